//! Achievable symmetric rates and capacity bounds for two-receiver discrete
//! memoryless broadcast channels whose i.i.d. state is known at the decoders
//! and strictly causally at the encoder.
//!
//! The crate models such channels as exact finite probability tables,
//! evaluates the achievable-rate region of the block-Markov
//! compress-and-refine scheme together with its symmetric-rate formula,
//! specializes it to the time-sharing and superposition schemes with their
//! closed forms, computes the degraded-channel upper bound on the symmetric
//! capacity, and validates the time-sharing rate empirically with a
//! zero-error feedback/XOR protocol on the broadcast erasure channel.
//!
//! Everything is deterministic: optimizers and simulators are seeded,
//! parallel work reduces in fixed order, and repeated runs produce
//! bit-identical results.

pub mod channel;
pub mod error;
pub mod optim;
pub mod prob;
pub mod rate;
pub mod reproduce;
pub mod scheme;
pub mod sim;

pub use channel::{
    check_deterministic, make_blackwell_with_state, make_erasure, make_finite_field,
    validate_symmetry, ChannelFile, DeterminismWitness, StateChannel, SymmetryWitness,
};
pub use error::{Error, Result};
pub use optim::{maximize, OptResult, SearchSpec};
pub use prob::{
    conditional_mutual_information, entropy, marginal, JointPmf, Pmf, VarGroup,
};
pub use rate::{
    c1, corollary1_bounds, degraded_upper_bound, remark3_rate, sp_rate, theorem2_rate, ts_lines,
    ts_rate, RateCertificate, RateMethod, RegionBounds, SearchTuning, TsDiagnostics,
};
pub use scheme::{
    build_sp_scheme, build_ts_scheme, make_blackwell_sp_params, symmetrize, AuxScheme,
    SuperpositionParams, TimeSharingParams,
};
pub use sim::{analytic_rate, rate_curve, simulate, SimConfig, SimReport};
