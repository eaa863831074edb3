//! Rate expressions: the four-inequality achievable region of the general
//! scheme, the symmetric-rate formula, the time-sharing and superposition
//! specializations with their closed forms, and the degraded-channel upper
//! bound on the symmetric capacity. All values are in bits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::channel::StateChannel;
use crate::error::{Error, Result};
use crate::optim::{maximize, OptResult, SearchSpec};
use crate::prob::{group, JointPmf, Pmf, VarGroup};
use crate::scheme::{build_sp_scheme, AuxScheme, SuperpositionParams};

/// Values this close below zero are rounding debris and snap to zero.
const NEG_TOL: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    if v < 0.0 && v > -NEG_TOL {
        0.0
    } else {
        v
    }
}

/// Budget knobs for the optimizer-backed operations. `None` fields fall back
/// to [`SearchSpec::default_for`] the block structure at hand.
#[derive(Debug, Clone, Default)]
pub struct SearchTuning {
    pub grid_resolution: Option<usize>,
    pub restarts: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub seed: u64,
}

impl SearchTuning {
    pub fn seeded(seed: u64) -> Self {
        SearchTuning {
            seed,
            ..Default::default()
        }
    }

    pub fn spec_for(&self, dims: &[usize]) -> SearchSpec {
        let mut spec = SearchSpec::default_for(dims).with_seed(self.seed);
        if let Some(g) = self.grid_resolution {
            spec.grid_resolution = g;
        }
        if let Some(r) = self.restarts {
            spec.restarts = r;
        }
        if let Some(m) = self.max_iters {
            spec.max_iters = m;
        }
        if let Some(t) = self.tol {
            spec.tol = t;
        }
        spec
    }
}

/// Right-hand sides of the four region inequalities, in display order:
/// the two individual bounds and the two sum-rate bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBounds {
    pub r1_max: f64,
    pub r2_max: f64,
    pub sum3: f64,
    pub sum4: f64,
}

impl RegionBounds {
    /// Largest achievable `R1 + R2` inside the region.
    pub fn sum_rate(&self) -> f64 {
        (self.r1_max + self.r2_max).min(self.sum3).min(self.sum4)
    }
}

/// How a [`RateCertificate`] value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    ClosedForm,
    Theorem2,
    Optimizer,
    Simulation,
}

/// A rate value together with the term values that produced it and the
/// parameters it was evaluated at.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateCertificate {
    /// Rate in bits per channel use.
    pub value: f64,
    pub units: String,
    pub method: RateMethod,
    pub term_breakdown: BTreeMap<String, f64>,
    pub argument: serde_json::Value,
}

impl RateCertificate {
    fn new(
        value: f64,
        method: RateMethod,
        term_breakdown: BTreeMap<String, f64>,
        argument: serde_json::Value,
    ) -> Self {
        RateCertificate {
            value,
            units: "bits".into(),
            method,
            term_breakdown,
            argument,
        }
    }

    /// Recomputes the value from the breakdown, per method. Used to check
    /// that certificates are self-contained.
    pub fn reconstruct_value(&self) -> Option<f64> {
        let b = &self.term_breakdown;
        let get = |k: &str| b.get(k).copied();
        match self.method {
            RateMethod::Theorem2 => {
                Some(snap(get("term_first")?.min(get("term_second")?)).max(0.0))
            }
            RateMethod::ClosedForm => {
                if let (Some(c1), Some(c12)) = (get("C1"), get("C1+2")) {
                    let d = c1 + c12;
                    return Some(if d > 0.0 { c1 * c12 / d } else { 0.0 });
                }
                if let (Some(a), Some(bb)) = (get("term_private_path"), get("term_common_path")) {
                    return Some(snap(a.min(bb)).max(0.0));
                }
                if let (Some(a), Some(bb)) = (get("I(U;Y2|S)"), get("I(X;Y1,Y2|S,U)")) {
                    return Some(snap(a.min(bb)).max(0.0));
                }
                None
            }
            RateMethod::Optimizer => {
                if let (Some(c1), Some(i12), Some(i21)) =
                    (get("C1"), get("I(X;Y1,Y2|S)"), get("I(X;Y2|Y1,S)"))
                {
                    let d = 2.0 * c1 + i21;
                    return Some(if d > 0.0 { c1 * i12 / d } else { 0.0 });
                }
                if let (Some(a), Some(bb)) = (get("term_private_path"), get("term_common_path")) {
                    return Some(snap(a.min(bb)).max(0.0));
                }
                if let (Some(a), Some(bb)) = (get("I(U;Y2|S)"), get("I(X;Y1,Y2|S,U)")) {
                    return Some(snap(a.min(bb)).max(0.0));
                }
                None
            }
            RateMethod::Simulation => {
                let slots = get("mean_slots")?;
                let bits = get("bits_per_user")?;
                Some(bits / slots)
            }
        }
    }
}

/// Intermediate quantities of the time-sharing analysis at a fixed input law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TsDiagnostics {
    pub c1: f64,
    pub l_of_p: f64,
    pub r_of_p: f64,
    pub p_star: f64,
}

// ---- region and symmetric-rate evaluation ---------------------------------

struct Terms<'a> {
    joint: &'a JointPmf,
}

impl Terms<'_> {
    fn i(&self, a: &VarGroup, b: &VarGroup, c: &VarGroup) -> f64 {
        self.joint
            .conditional_mutual_information(a, b, c)
            .expect("axis groups are fixed")
    }
}

/// Evaluates the four region bounds at a scheme, exactly as displayed
/// (including the inner min/max over the receiver index in the first
/// sum-rate bound). Sub-tolerance negatives snap to zero; genuinely negative
/// bounds (possible for poor refinement choices) are reported as computed.
pub fn corollary1_bounds(aux: &AuxScheme, ch: &StateChannel) -> Result<RegionBounds> {
    let joint = aux.joint_with(ch)?;
    let t = Terms { joint: &joint };

    let r1_max = t.i(&group(["U0", "U1"]), &group(["Y1", "V1"]), &group(["Q", "S"]))
        - t.i(
            &group(["U0", "U1", "U2"]),
            &group(["V0", "V1"]),
            &group(["Q", "Y1", "S"]),
        );
    let r2_max = t.i(&group(["U0", "U2"]), &group(["Y2", "V2"]), &group(["Q", "S"]))
        - t.i(
            &group(["U0", "U1", "U2"]),
            &group(["V0", "V2"]),
            &group(["Q", "Y2", "S"]),
        );

    let us = group(["U0", "U1", "U2"]);
    let i_u0_y1 = t.i(&group(["U0"]), &group(["Y1", "V1"]), &group(["Q", "S"]));
    let i_u0_y2 = t.i(&group(["U0"]), &group(["Y2", "V2"]), &group(["Q", "S"]));
    let i_v0_y1 = t.i(&us, &group(["V0"]), &group(["Q", "Y1", "S"]));
    let i_v0_y2 = t.i(&us, &group(["V0"]), &group(["Q", "Y2", "S"]));
    let sum3 = t.i(&group(["U1"]), &group(["Y1", "V1"]), &group(["Q", "U0", "S"]))
        + t.i(&group(["U2"]), &group(["Y2", "V2"]), &group(["Q", "U0", "S"]))
        + i_u0_y1.min(i_u0_y2)
        - t.i(&group(["U1"]), &group(["U2"]), &group(["Q", "U0"]))
        - t.i(&us, &group(["V1"]), &group(["Q", "V0", "Y1", "S"]))
        - t.i(&us, &group(["V2"]), &group(["Q", "V0", "Y2", "S"]))
        - i_v0_y1.max(i_v0_y2);

    let sum4 = t.i(&group(["U0", "U1"]), &group(["Y1", "V1"]), &group(["Q", "S"]))
        + t.i(&group(["U0", "U2"]), &group(["Y2", "V2"]), &group(["Q", "S"]))
        - t.i(&group(["U1"]), &group(["U2"]), &group(["Q", "U0"]))
        - t.i(&us, &group(["V0", "V1"]), &group(["Q", "Y1", "S"]))
        - t.i(&us, &group(["V0", "V2"]), &group(["Q", "Y2", "S"]));

    Ok(RegionBounds {
        r1_max: snap(r1_max),
        r2_max: snap(r2_max),
        sum3: snap(sum3),
        sum4: snap(sum4),
    })
}

/// Evaluates the symmetric-rate formula (the two-term min with 0.5
/// coefficients) at a symmetric scheme. The breakdown holds all seven
/// information terms plus both min arguments; `value` is the clamped min.
/// Rejects schemes that fail the symmetric-auxiliary check.
pub fn theorem2_rate(aux: &AuxScheme, ch: &StateChannel) -> Result<RateCertificate> {
    let witness = ch.symmetry_witness()?;
    aux.check_symmetric(&witness)?;
    let joint = aux.joint_with(ch)?;
    let t = Terms { joint: &joint };
    let us = group(["U0", "U1", "U2"]);

    let t1 = t.i(&group(["U1"]), &group(["Y1", "V1"]), &group(["Q", "U0", "S"]));
    let t2 = t.i(&group(["U0"]), &group(["Y1", "V1"]), &group(["Q", "S"]));
    let t3 = t.i(&group(["U1"]), &group(["U2"]), &group(["Q", "U0"]));
    let t4 = t.i(&us, &group(["V1"]), &group(["Q", "V0", "Y1", "S"]));
    let t5 = t.i(&us, &group(["V0"]), &group(["Q", "Y1", "S"]));
    let t6 = t.i(&group(["U0", "U1"]), &group(["Y1", "V1"]), &group(["Q", "S"]));
    let t7 = t.i(&us, &group(["V0", "V1"]), &group(["Q", "Y1", "S"]));

    let term_first = t1 + 0.5 * t2 - 0.5 * t3 - t4 - 0.5 * t5;
    let term_second = t6 - 0.5 * t3 - t7;
    let raw_min = term_first.min(term_second);

    let mut b = BTreeMap::new();
    b.insert("I(U1;Y1,V1|Q,U0,S)".into(), t1);
    b.insert("I(U0;Y1,V1|Q,S)".into(), t2);
    b.insert("I(U1;U2|Q,U0)".into(), t3);
    b.insert("I(U0,U1,U2;V1|Q,V0,Y1,S)".into(), t4);
    b.insert("I(U0,U1,U2;V0|Q,Y1,S)".into(), t5);
    b.insert("I(U0,U1;Y1,V1|Q,S)".into(), t6);
    b.insert("I(U0,U1,U2;V0,V1|Q,Y1,S)".into(), t7);
    b.insert("term_first".into(), term_first);
    b.insert("term_second".into(), term_second);
    b.insert("raw_min".into(), raw_min);

    Ok(RateCertificate::new(
        snap(raw_min).max(0.0),
        RateMethod::Theorem2,
        b,
        json!({"q_size": aux.q_size()}),
    ))
}

// ---- input-law information helpers -----------------------------------------

fn pmf_from_block(block: &[f64]) -> Pmf {
    Pmf::new(block.to_vec()).expect("projected block is a pmf")
}

/// `I(X; <targets> | S)` under `p(x) p(s) p(y1,y2|x,s)`.
fn input_information(ch: &StateChannel, px: &Pmf, targets: &VarGroup) -> Result<f64> {
    let j = ch.input_joint(px)?;
    j.conditional_mutual_information(&group(["X"]), targets, &group(["S"]))
}

fn i_x_y2_given_y1_s(ch: &StateChannel, px: &Pmf) -> Result<f64> {
    let j = ch.input_joint(px)?;
    j.conditional_mutual_information(&group(["X"]), &group(["Y2"]), &group(["Y1", "S"]))
}

fn inner_max_spec(x_size: usize, seed: u64) -> SearchSpec {
    SearchSpec {
        dims: vec![x_size],
        grid_resolution: if x_size <= 3 { 24 } else { 12 },
        restarts: 8,
        max_iters: 2500,
        tol: 1e-13,
        seed,
    }
}

fn maximize_input_information(ch: &StateChannel, targets: &VarGroup) -> OptResult {
    let spec = inner_max_spec(ch.x_size(), 0x5eed);
    maximize(
        |p| {
            let px = pmf_from_block(p);
            input_information(ch, &px, targets).unwrap_or(f64::NEG_INFINITY)
        },
        &spec,
    )
}

/// `C1 = max over p(x) of I(X;Y1|S)`, computed once per channel instance and
/// cached (the inner maximization uses a fixed internal budget, so every
/// caller sees the same value).
pub fn c1(ch: &StateChannel) -> f64 {
    *ch.c1_cache()
        .get_or_init(|| maximize_input_information(ch, &group(["Y1"])).best_value)
}

/// `C1+2 = max over p(x) of I(X;Y1,Y2|S)` together with its maximizer.
pub fn c12_with_argmax(ch: &StateChannel) -> (f64, Pmf) {
    let r = maximize_input_information(ch, &group(["Y1", "Y2"]));
    (r.best_value, pmf_from_block(&r.best_point))
}

// ---- time sharing -----------------------------------------------------------

/// The two linear-in-`p` expressions whose min the time-sharing scheme
/// maximizes, evaluated at an explicit common-layer law `pu0` instead of the
/// capacity-achieving one.
pub fn ts_two_term_min(p: f64, px: &Pmf, pu0: &Pmf, ch: &StateChannel) -> Result<(f64, f64)> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [0, 0.5]")));
    }
    let i1 = input_information(ch, px, &group(["Y1"]))?;
    let i21 = i_x_y2_given_y1_s(ch, px)?;
    let c = input_information(ch, pu0, &group(["Y1"]))?;
    let l = p * i1 + (0.5 - p) * c + 0.5 * p * i21;
    let r = p * i1 + (1.0 - 2.0 * p) * c;
    Ok((l, r))
}

/// Diagnostics of the time-sharing line analysis at time share `p` and input
/// law `px`: the cached `C1`, the two line values, and the crossing point
/// `p* = C1 / (2 C1 + I(X;Y2|Y1,S))`.
pub fn ts_lines(p: f64, px: &Pmf, ch: &StateChannel) -> Result<TsDiagnostics> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [0, 0.5]")));
    }
    let c1v = c1(ch);
    let i1 = input_information(ch, px, &group(["Y1"]))?;
    let i21 = i_x_y2_given_y1_s(ch, px)?;
    let denom = 2.0 * c1v + i21;
    let p_star = if denom > 0.0 { c1v / denom } else { 0.0 };
    Ok(TsDiagnostics {
        c1: c1v,
        l_of_p: p * i1 + (0.5 - p) * c1v + 0.5 * p * i21,
        r_of_p: p * i1 + (1.0 - 2.0 * p) * c1v,
        p_star,
    })
}

fn require_symmetric_deterministic(ch: &StateChannel) -> Result<()> {
    ch.symmetry_witness()?;
    if ch.determinism_witness().is_none() {
        return Err(Error::NotDeterministic);
    }
    Ok(())
}

/// Maximum symmetric rate of the time-sharing scheme:
/// `max over p(x) of C1 I(X;Y1,Y2|S) / (2 C1 + I(X;Y2|Y1,S))`. The ratio has
/// the crossing point eliminated analytically, so the outer search never
/// sees the min. Requires a symmetric deterministic channel.
pub fn ts_rate(ch: &StateChannel, tuning: &SearchTuning) -> Result<RateCertificate> {
    require_symmetric_deterministic(ch)?;
    let c1v = c1(ch);
    let spec = tuning.spec_for(&[ch.x_size()]);
    let result = maximize(
        |p| {
            let px = pmf_from_block(p);
            let i12 = input_information(ch, &px, &group(["Y1", "Y2"]))
                .unwrap_or(f64::NEG_INFINITY);
            let i21 = i_x_y2_given_y1_s(ch, &px).unwrap_or(f64::INFINITY);
            let denom = 2.0 * c1v + i21;
            if denom > 0.0 {
                c1v * i12 / denom
            } else {
                0.0
            }
        },
        &spec,
    );
    let px = pmf_from_block(&result.best_point);
    let i12 = input_information(ch, &px, &group(["Y1", "Y2"]))?;
    let i21 = i_x_y2_given_y1_s(ch, &px)?;
    let denom = 2.0 * c1v + i21;
    let p_star = if denom > 0.0 { c1v / denom } else { 0.0 };

    let mut b = BTreeMap::new();
    b.insert("C1".into(), c1v);
    b.insert("I(X;Y1,Y2|S)".into(), i12);
    b.insert("I(X;Y2|Y1,S)".into(), i21);
    b.insert("p_star".into(), p_star);
    Ok(RateCertificate::new(
        snap(result.best_value).max(0.0),
        RateMethod::Optimizer,
        b,
        json!({
            "px": px.probs(),
            "evaluations": result.evaluations,
        }),
    ))
}

/// Closed form `C1 C1+2 / (C1 + C1+2)`, valid when some maximizer of
/// `I(X;Y1,Y2|S)` also achieves `C1` (checked within 1e-6 at the found
/// maximizer). Returns `None` when the hypothesis fails.
pub fn remark3_rate(ch: &StateChannel) -> Result<Option<RateCertificate>> {
    let c1v = c1(ch);
    let (c12v, px12) = c12_with_argmax(ch);
    let i1_at_12 = input_information(ch, &px12, &group(["Y1"]))?;
    if c1v - i1_at_12 > 1e-6 {
        return Ok(None);
    }
    let denom = c1v + c12v;
    let value = if denom > 0.0 { c1v * c12v / denom } else { 0.0 };
    let p_star = if denom > 0.0 { c1v / denom } else { 0.0 };
    let mut b = BTreeMap::new();
    b.insert("C1".into(), c1v);
    b.insert("C1+2".into(), c12v);
    b.insert("p_star".into(), p_star);
    Ok(Some(RateCertificate::new(
        snap(value).max(0.0),
        RateMethod::ClosedForm,
        b,
        json!({"px": px12.probs()}),
    )))
}

// ---- superposition ----------------------------------------------------------

fn sp_joint(ch: &StateChannel, params: &SuperpositionParams) -> Result<JointPmf> {
    let u0_size = params.u0_pmf.len();
    JointPmf::from_fn(
        vec![
            ("U0", u0_size),
            ("X", ch.x_size()),
            ("S", ch.s_size()),
            ("Y1", ch.y_size()),
            ("Y2", ch.y_size()),
        ],
        |i| {
            params.u0_pmf.prob(i[0])
                * params.x_given_u0[i[0]].prob(i[1])
                * ch.state_pmf().prob(i[2])
                * ch.kernel_prob(i[1], i[2], i[3], i[4])
        },
    )
}

fn sp_terms(ch: &StateChannel, params: &SuperpositionParams) -> Result<(f64, f64, f64)> {
    let j = sp_joint(ch, params)?;
    let i_x_y1 = j.conditional_mutual_information(&group(["X"]), &group(["Y1"]), &group(["S"]))?;
    let i_x_y2 = j.conditional_mutual_information(
        &group(["X"]),
        &group(["Y2"]),
        &group(["Y1", "U0", "S"]),
    )?;
    let i_u0_y1 =
        j.conditional_mutual_information(&group(["U0"]), &group(["Y1"]), &group(["S"]))?;
    Ok((i_x_y1, i_x_y2, i_u0_y1))
}

fn sp_value_from_terms(i_x_y1: f64, i_x_y2: f64, i_u0_y1: f64) -> (f64, f64) {
    (
        0.5 * i_x_y1 + 0.25 * i_x_y2,
        0.5 * i_x_y1 + 0.5 * i_u0_y1,
    )
}

/// Symmetric rate of the superposition scheme at fixed parameters:
/// `min{ 0.5 I(X;Y1|S) + 0.25 I(X;Y2|Y1,U0,S), 0.5 I(X;Y1|S) + 0.5 I(U0;Y1|S) }`.
pub fn sp_rate(ch: &StateChannel, params: &SuperpositionParams) -> Result<RateCertificate> {
    require_symmetric_deterministic(ch)?;
    if params.x_given_u0.iter().any(|k| k.len() != ch.x_size()) {
        return Err(Error::InvalidParameter(
            "superposition kernel must map to the channel input alphabet".into(),
        ));
    }
    let (i_x_y1, i_x_y2, i_u0_y1) = sp_terms(ch, params)?;
    let (private_path, common_path) = sp_value_from_terms(i_x_y1, i_x_y2, i_u0_y1);

    let mut b = BTreeMap::new();
    b.insert("I(X;Y1|S)".into(), i_x_y1);
    b.insert("I(X;Y2|Y1,U0,S)".into(), i_x_y2);
    b.insert("I(U0;Y1|S)".into(), i_u0_y1);
    b.insert("term_private_path".into(), private_path);
    b.insert("term_common_path".into(), common_path);
    Ok(RateCertificate::new(
        snap(private_path.min(common_path)).max(0.0),
        RateMethod::ClosedForm,
        b,
        json!({
            "u0_pmf": params.u0_pmf.probs(),
            "x_given_u0": params.x_given_u0.iter().map(|k| k.probs().to_vec()).collect::<Vec<_>>(),
        }),
    ))
}

/// Searches the Blackwell five-parameter superposition family
/// `(q1, alpha1, alpha2, beta1, beta2)` and returns the best certificate
/// found together with the parameters. The channel must have the Blackwell
/// shape (ternary input, binary output, binary state).
pub fn sp_optimize_blackwell(
    ch: &StateChannel,
    tuning: &SearchTuning,
) -> Result<(RateCertificate, [f64; 5])> {
    require_symmetric_deterministic(ch)?;
    if ch.x_size() != 3 || ch.y_size() != 2 || ch.s_size() != 2 {
        return Err(Error::InvalidParameter(
            "the five-parameter family applies to the Blackwell-shaped channel".into(),
        ));
    }
    // five [0,1] knobs, each encoded as a binary simplex block
    let mut spec = tuning.spec_for(&[2, 2, 2, 2, 2]);
    if tuning.grid_resolution.is_none() {
        spec.grid_resolution = 8;
    }
    let decode = |p: &[f64]| -> [f64; 5] {
        [0.5 * p[0], p[2], p[4], p[6], p[8]]
    };
    let result = maximize(
        |p| {
            let [q1, a1, a2, b1, b2] = decode(p);
            match crate::scheme::make_blackwell_sp_params(q1, a1, a2, b1, b2) {
                Ok(params) => match sp_terms(ch, &params) {
                    Ok((x1, x2, u0)) => {
                        let (a, b) = sp_value_from_terms(x1, x2, u0);
                        a.min(b)
                    }
                    Err(_) => f64::NEG_INFINITY,
                },
                Err(_) => f64::NEG_INFINITY,
            }
        },
        &spec,
    );
    let best = decode(&result.best_point);
    let params =
        crate::scheme::make_blackwell_sp_params(best[0], best[1], best[2], best[3], best[4])?;
    let mut cert = sp_rate(ch, &params)?;
    cert.method = RateMethod::Optimizer;
    cert.argument = json!({
        "q1": best[0], "alpha1": best[1], "alpha2": best[2],
        "beta1": best[3], "beta2": best[4],
        "evaluations": result.evaluations,
    });
    Ok((cert, best))
}

/// Searches generic superposition parameters `(p(u0), p(x|u0))` with the
/// given common-layer alphabet size.
pub fn sp_optimize_generic(
    ch: &StateChannel,
    u0_size: usize,
    tuning: &SearchTuning,
) -> Result<(RateCertificate, SuperpositionParams)> {
    require_symmetric_deterministic(ch)?;
    if u0_size == 0 {
        return Err(Error::InvalidParameter("u0 alphabet must be non-empty".into()));
    }
    let mut dims = vec![u0_size];
    dims.extend(std::iter::repeat(ch.x_size()).take(u0_size));
    let spec = tuning.spec_for(&dims);
    let decode = |p: &[f64]| -> SuperpositionParams {
        let u0 = pmf_from_block(&p[..u0_size]);
        let kernels = (0..u0_size)
            .map(|u| {
                pmf_from_block(&p[u0_size + u * ch.x_size()..u0_size + (u + 1) * ch.x_size()])
            })
            .collect();
        SuperpositionParams::new(u0, kernels).expect("shapes fixed")
    };
    let result = maximize(
        |p| {
            let params = decode(p);
            match sp_terms(ch, &params) {
                Ok((x1, x2, u0)) => {
                    let (a, b) = sp_value_from_terms(x1, x2, u0);
                    a.min(b)
                }
                Err(_) => f64::NEG_INFINITY,
            }
        },
        &spec,
    );
    let params = decode(&result.best_point);
    let mut cert = sp_rate(ch, &params)?;
    cert.method = RateMethod::Optimizer;
    Ok((cert, params))
}

// ---- degraded-channel upper bound -------------------------------------------

fn bound_cardinality(ch: &StateChannel) -> usize {
    ch.x_size()
        .min(ch.y_size() * ch.s_size())
        .min(ch.y_size() * ch.s_size())
        + 1
}

fn degraded_terms(ch: &StateChannel, pu: &Pmf, x_given_u: &[Pmf]) -> Result<(f64, f64)> {
    if x_given_u.len() != pu.len() {
        return Err(Error::InvalidParameter(
            "one conditional input law per auxiliary letter required".into(),
        ));
    }
    if x_given_u.iter().any(|k| k.len() != ch.x_size()) {
        return Err(Error::InvalidParameter(
            "auxiliary kernel must map to the channel input alphabet".into(),
        ));
    }
    let bound = bound_cardinality(ch);
    if pu.len() > bound {
        return Err(Error::CardinalityExceeded {
            got: pu.len(),
            bound,
        });
    }
    let j = JointPmf::from_fn(
        vec![
            ("U", pu.len()),
            ("X", ch.x_size()),
            ("S", ch.s_size()),
            ("Y1", ch.y_size()),
            ("Y2", ch.y_size()),
        ],
        |i| {
            pu.prob(i[0])
                * x_given_u[i[0]].prob(i[1])
                * ch.state_pmf().prob(i[2])
                * ch.kernel_prob(i[1], i[2], i[3], i[4])
        },
    )?;
    let i_u_y2 = j.conditional_mutual_information(&group(["U"]), &group(["Y2"]), &group(["S"]))?;
    let i_x_y12 = j.conditional_mutual_information(
        &group(["X"]),
        &group(["Y1", "Y2"]),
        &group(["S", "U"]),
    )?;
    Ok((i_u_y2, i_x_y12))
}

/// Symmetric-capacity upper bound from the enhanced-receiver degraded
/// channel, at a fixed auxiliary: `min{ I(U;Y2|S), I(X;Y1,Y2|S,U) }`.
/// `|U|` must respect the cardinality bound
/// `min{|X|, |Y1||S|, |Y2||S|} + 1`.
pub fn degraded_upper_bound(ch: &StateChannel, pu: &Pmf, x_given_u: &[Pmf]) -> Result<f64> {
    let (a, b) = degraded_terms(ch, pu, x_given_u)?;
    Ok(snap(a.min(b)).max(0.0))
}

/// Certificate form of [`degraded_upper_bound`].
pub fn degraded_upper_bound_cert(
    ch: &StateChannel,
    pu: &Pmf,
    x_given_u: &[Pmf],
) -> Result<RateCertificate> {
    let (a, b) = degraded_terms(ch, pu, x_given_u)?;
    let mut br = BTreeMap::new();
    br.insert("I(U;Y2|S)".into(), a);
    br.insert("I(X;Y1,Y2|S,U)".into(), b);
    Ok(RateCertificate::new(
        snap(a.min(b)).max(0.0),
        RateMethod::ClosedForm,
        br,
        json!({
            "pu": pu.probs(),
            "x_given_u": x_given_u.iter().map(|k| k.probs().to_vec()).collect::<Vec<_>>(),
        }),
    ))
}

/// Maximizes the degraded-channel bound over `(p(u), p(x|u))` at the full
/// cardinality.
pub fn degraded_upper_bound_optimize(
    ch: &StateChannel,
    tuning: &SearchTuning,
) -> Result<(RateCertificate, Pmf, Vec<Pmf>)> {
    let u_size = bound_cardinality(ch);
    let mut dims = vec![u_size];
    dims.extend(std::iter::repeat(ch.x_size()).take(u_size));
    let mut spec = tuning.spec_for(&dims);
    if tuning.restarts.is_none() {
        spec.restarts = 48;
    }
    if tuning.max_iters.is_none() {
        spec.max_iters = 4000;
    }
    let decode = |p: &[f64]| -> (Pmf, Vec<Pmf>) {
        let pu = pmf_from_block(&p[..u_size]);
        let kernels: Vec<Pmf> = (0..u_size)
            .map(|u| {
                pmf_from_block(&p[u_size + u * ch.x_size()..u_size + (u + 1) * ch.x_size()])
            })
            .collect();
        (pu, kernels)
    };
    let result = maximize(
        |p| {
            let (pu, kernels) = decode(p);
            match degraded_terms(ch, &pu, &kernels) {
                Ok((a, b)) => a.min(b),
                Err(_) => f64::NEG_INFINITY,
            }
        },
        &spec,
    );
    let (pu, kernels) = decode(&result.best_point);
    let mut cert = degraded_upper_bound_cert(ch, &pu, &kernels)?;
    cert.method = RateMethod::Optimizer;
    Ok((cert, pu, kernels))
}

/// The built-in auxiliary that reproduces the reported Blackwell bound
/// evaluation point: `U ~ Bern(0.5)` splitting its 0.832 mass between the
/// two inputs the receivers always resolve, 0.168 on the contested letter.
pub fn blackwell_bound_paper_point() -> (Pmf, Vec<Pmf>) {
    let pu = Pmf::new(vec![0.5, 0.5]).expect("static");
    let kernels = vec![
        Pmf::new(vec![0.832, 0.168, 0.0]).expect("static"),
        Pmf::new(vec![0.0, 0.168, 0.832]).expect("static"),
    ];
    (pu, kernels)
}

/// The copy auxiliary `U = X` (uniform), which drives the second bound term
/// to zero.
pub fn copy_bound_point(ch: &StateChannel) -> (Pmf, Vec<Pmf>) {
    let n = ch.x_size();
    let pu = Pmf::uniform(n);
    let kernels = (0..n).map(|u| Pmf::point_mass(n, u)).collect();
    (pu, kernels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_blackwell_with_state, make_erasure, make_finite_field};
    use crate::scheme::{build_ts_scheme, TimeSharingParams};

    fn erasure_closed_form(eps: f64) -> f64 {
        (1.0 - eps * eps) / (2.0 + eps)
    }

    #[test]
    fn c1_matches_closed_forms() {
        assert!((c1(&make_erasure(0.3).unwrap()) - 0.7).abs() < 1e-9);
        assert!((c1(&make_finite_field(2).unwrap()) - 1.0).abs() < 1e-9);
        assert!((c1(&make_blackwell_with_state()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn c1_cache_returns_identical_value() {
        let ch = make_erasure(0.25).unwrap();
        let a = c1(&ch);
        let b = c1(&ch);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn all_constant_scheme_has_empty_region() {
        let ch = make_blackwell_with_state();
        let aux = AuxScheme::new(
            Pmf::uniform(1),
            1,
            1,
            1,
            1,
            1,
            1,
            3,
            2,
            vec![1.0],
            vec![0],
            vec![1.0; 2],
            Some(vec![0]),
        )
        .unwrap();
        let b = corollary1_bounds(&aux, &ch).unwrap();
        assert_eq!(
            (b.r1_max, b.r2_max, b.sum3, b.sum4),
            (0.0, 0.0, 0.0, 0.0)
        );
        let cert = theorem2_rate(&aux, &ch).unwrap();
        assert_eq!(cert.value, 0.0);
    }

    #[test]
    fn ts_scheme_matches_two_term_min_on_grid() {
        // the generic symmetric-rate evaluation equals the specialized
        // two-line expression for every (p, px) pair tried
        let channels = [
            make_erasure(0.35).unwrap(),
            make_finite_field(2).unwrap(),
            make_blackwell_with_state(),
        ];
        for ch in &channels {
            let n = ch.x_size();
            let laws = [
                Pmf::uniform(n),
                {
                    let mut v = vec![1.0 / (n as f64 + 1.0); n];
                    v[0] = 2.0 / (n as f64 + 1.0);
                    Pmf::new(v).unwrap()
                },
            ];
            for &p in &[0.0, 0.17, 0.3, 0.5] {
                for px in &laws {
                    for pu0 in &laws {
                        let params = TimeSharingParams::new(p, px.clone(), pu0.clone()).unwrap();
                        let aux = build_ts_scheme(&params, ch).unwrap();
                        let cert = theorem2_rate(&aux, ch).unwrap();
                        let (l, r) = ts_two_term_min(p, px, pu0, ch).unwrap();
                        assert!(
                            (cert.term_breakdown["raw_min"] - l.min(r)).abs() < 1e-9,
                            "p={p}: theorem gives {}, lines give {}",
                            cert.term_breakdown["raw_min"],
                            l.min(r)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn ts_degenerate_time_share_reduces_to_common_layer() {
        // at p = 0 only the common layer transmits; the rate is half its
        // single-receiver information, not zero
        let ch = make_erasure(0.5).unwrap();
        let pu0 = Pmf::uniform(2);
        let params = TimeSharingParams::new(0.0, Pmf::uniform(2), pu0.clone()).unwrap();
        let aux = build_ts_scheme(&params, &ch).unwrap();
        let cert = theorem2_rate(&aux, &ch).unwrap();
        let i_u0 = input_information(&ch, &pu0, &group(["Y1"])).unwrap();
        assert!((cert.value - 0.5 * i_u0).abs() < 1e-9);
    }

    #[test]
    fn lemma1_ties_theorem2_to_half_sum_rate_for_ts_schemes() {
        let ch = make_erasure(0.4).unwrap();
        let params =
            TimeSharingParams::new(0.3, Pmf::new(vec![0.6, 0.4]).unwrap(), Pmf::uniform(2))
                .unwrap();
        let aux = build_ts_scheme(&params, &ch).unwrap();
        let cert = theorem2_rate(&aux, &ch).unwrap();
        let bounds = corollary1_bounds(&aux, &ch).unwrap();
        assert!((bounds.r1_max - bounds.r2_max).abs() < 1e-9);
        assert!((cert.term_breakdown["raw_min"] - 0.5 * bounds.sum_rate()).abs() < 1e-9);
    }

    #[test]
    fn corollary1_on_erasure_at_crossing_hits_closed_form() {
        let eps = 0.5;
        let ch = make_erasure(eps).unwrap();
        let diag = ts_lines(0.1, &Pmf::uniform(2), &ch).unwrap();
        let params =
            TimeSharingParams::new(diag.p_star, Pmf::uniform(2), Pmf::uniform(2)).unwrap();
        let aux = build_ts_scheme(&params, &ch).unwrap();
        let bounds = corollary1_bounds(&aux, &ch).unwrap();
        assert!(
            (bounds.sum_rate() - 2.0 * erasure_closed_form(eps)).abs() < 1e-9,
            "sum rate {}",
            bounds.sum_rate()
        );
    }

    #[test]
    fn ts_lines_endpoints_and_crossing() {
        let ch = make_erasure(0.5).unwrap();
        let px = Pmf::uniform(2);
        let d0 = ts_lines(0.0, &px, &ch).unwrap();
        assert!(d0.l_of_p <= d0.r_of_p + 1e-12);
        assert!((d0.l_of_p - 0.5 * d0.c1).abs() < 1e-9);
        let d5 = ts_lines(0.5, &px, &ch).unwrap();
        assert!(d5.l_of_p >= d5.r_of_p - 1e-12);
        let ds = ts_lines(d0.p_star, &px, &ch).unwrap();
        assert!((ds.l_of_p - ds.r_of_p).abs() < 1e-9);
        assert!((0.0..=0.5).contains(&ds.p_star));
        // erasure at uniform input: p* = 0.5 / (1 + I(X;Y2|Y1,S) / C1)
        assert!((ds.p_star - 0.4).abs() < 1e-9);
        assert!(ts_lines(0.7, &px, &ch).is_err());
    }

    #[test]
    fn ts_rate_erasure_family() {
        let tuning = SearchTuning::seeded(1);
        for eps in [0.0, 0.2, 0.5, 0.8] {
            let ch = make_erasure(eps).unwrap();
            let cert = ts_rate(&ch, &tuning).unwrap();
            assert!(
                (cert.value - erasure_closed_form(eps)).abs() < 1e-6,
                "eps={eps}: {} vs {}",
                cert.value,
                erasure_closed_form(eps)
            );
            let rec = cert.reconstruct_value().unwrap();
            assert!((rec - cert.value).abs() < 1e-9);
        }
    }

    #[test]
    fn ts_rate_finite_field_is_two_thirds() {
        let ch = make_finite_field(2).unwrap();
        let cert = ts_rate(&ch, &SearchTuning::seeded(1)).unwrap();
        assert!((cert.value - 2.0 / 3.0).abs() < 1e-6, "{}", cert.value);
    }

    #[test]
    fn remark3_against_examples() {
        let ch = make_erasure(0.5).unwrap();
        let cert = remark3_rate(&ch).unwrap().expect("hypothesis holds");
        assert!((cert.value - 0.3).abs() < 1e-6);
        assert!((cert.term_breakdown["C1"] - 0.5).abs() < 1e-6);
        assert!((cert.term_breakdown["C1+2"] - 0.75).abs() < 1e-6);
        assert!((cert.reconstruct_value().unwrap() - cert.value).abs() < 1e-9);

        let ch = make_finite_field(2).unwrap();
        let cert = remark3_rate(&ch).unwrap().expect("hypothesis holds");
        assert!((cert.value - 2.0 / 3.0).abs() < 1e-6);

        // Blackwell: the joint-output maximizer is uniform, which does not
        // achieve C1, so the hypothesis fails
        let ch = make_blackwell_with_state();
        assert!(remark3_rate(&ch).unwrap().is_none());
    }

    #[test]
    fn remark3_when_second_output_is_constant() {
        // Y2 always reads 0 regardless of input: C1+2 = C1, rate C1/2.
        // (Not symmetric, but the closed form only needs the hypothesis.)
        let mut kernel = vec![0.0; 2 * 1 * 2 * 2];
        for x in 0..2 {
            kernel[((x) * 2 + x) * 2 + 0] = 1.0; // y1 = x, y2 = 0
        }
        let ch =
            crate::channel::StateChannel::new(2, 2, 1, Pmf::uniform(1), kernel, None).unwrap();
        let cert = remark3_rate(&ch).unwrap().expect("same maximizer");
        let c1v = cert.term_breakdown["C1"];
        assert!((c1v - 1.0).abs() < 1e-6);
        assert!((cert.value - 0.5 * c1v).abs() < 1e-9);
    }

    #[test]
    fn sp_rate_blackwell_paper_point() {
        let ch = make_blackwell_with_state();
        let params =
            crate::scheme::make_blackwell_sp_params(0.5, 0.13628, 0.5, 0.23025, 0.5).unwrap();
        let cert = sp_rate(&ch, &params).unwrap();
        assert!(
            (cert.value - 0.6103007020844055).abs() < 1e-9,
            "{}",
            cert.value
        );
        assert!((cert.reconstruct_value().unwrap() - cert.value).abs() < 1e-9);
    }

    #[test]
    fn sp_rate_matches_theorem2_of_built_scheme() {
        let ch = make_blackwell_with_state();
        for (q1, a1, a2, b1, b2) in [
            (0.5, 0.13628, 0.5, 0.23025, 0.5),
            (0.3, 0.4, 0.7, 0.2, 0.6),
            (0.1, 0.9, 0.1, 0.8, 0.3),
        ] {
            let params = crate::scheme::make_blackwell_sp_params(q1, a1, a2, b1, b2).unwrap();
            let direct = sp_rate(&ch, &params).unwrap();
            let aux = build_sp_scheme(&params, &ch).unwrap();
            let generic = theorem2_rate(&aux, &ch).unwrap();
            assert!(
                (direct.value - generic.value).abs() < 1e-9,
                "({q1},{a1},{a2},{b1},{b2}): {} vs {}",
                direct.value,
                generic.value
            );
        }
    }

    #[test]
    fn sp_degenerate_private_layer() {
        // X a deterministic function of U0: the private-path refinement term
        // vanishes and the first min argument is 0.5 I(X;Y1|S)
        let ch = make_blackwell_with_state();
        let params = crate::scheme::make_blackwell_sp_params(0.5, 1.0, 0.5, 0.0, 0.5).unwrap();
        let cert = sp_rate(&ch, &params).unwrap();
        let b = &cert.term_breakdown;
        assert!(b["I(X;Y2|Y1,U0,S)"].abs() < 1e-12);
        assert!((b["term_private_path"] - 0.5 * b["I(X;Y1|S)"]).abs() < 1e-12);
    }

    #[test]
    fn degraded_bound_copy_auxiliary_is_zero() {
        let ch = make_erasure(0.5).unwrap();
        let (pu, kernels) = copy_bound_point(&ch);
        let v = degraded_upper_bound(&ch, &pu, &kernels).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn degraded_bound_blackwell_paper_point() {
        let ch = make_blackwell_with_state();
        let (pu, kernels) = blackwell_bound_paper_point();
        let v = degraded_upper_bound(&ch, &pu, &kernels).unwrap();
        assert!((v - 0.6529892634585295).abs() < 1e-9, "{v}");
    }

    #[test]
    fn degraded_bound_cardinality_enforced() {
        let ch = make_blackwell_with_state();
        let pu = Pmf::uniform(5);
        let kernels: Vec<Pmf> = (0..5).map(|_| Pmf::uniform(3)).collect();
        assert!(matches!(
            degraded_upper_bound(&ch, &pu, &kernels),
            Err(Error::CardinalityExceeded { got: 5, bound: 4 })
        ));
    }
}
