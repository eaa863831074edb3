//! Auxiliary-variable structures for the achievable-rate region: the general
//! factorized scheme `(Q, U0, U1, U2, x(.), V0, V1, V2)`, the two concrete
//! specializations (time sharing and superposition), and the mirror
//! construction that symmetrizes an arbitrary scheme for a symmetric channel.

use rand::Rng;

use crate::channel::{StateChannel, SymmetryWitness};
use crate::error::{Error, Result};
use crate::prob::{check_cell_budget, JointPmf, Pmf, SUM_TOL};

/// Tolerance for the symmetric-auxiliary table comparisons.
pub const AUX_SYMMETRY_TOL: f64 = 1e-12;

/// A factorized auxiliary scheme
/// `p(q) p(u0,u1,u2|q) 1{x = x(u0,u1,u2,q)} p(s) p(v0,v1,v2|u0,u1,u2,s,q)`.
///
/// Tables are dense with `q` outermost; `v_given` is indexed
/// `[q][u0][u1][u2][s]` with a `(v0, v1, v2)` slice per entry.
#[derive(Debug, Clone)]
pub struct AuxScheme {
    q_pmf: Pmf,
    u0_size: usize,
    u1_size: usize,
    u2_size: usize,
    v0_size: usize,
    v1_size: usize,
    v2_size: usize,
    x_size: usize,
    s_size: usize,
    u_given_q: Vec<f64>,
    x_map: Vec<usize>,
    v_given: Vec<f64>,
    /// Mirror bijection on the time-sharing alphabet, set by builders whose
    /// output is symmetric by construction.
    q_mirror: Option<Vec<usize>>,
}

#[allow(clippy::too_many_arguments)]
impl AuxScheme {
    pub fn new(
        q_pmf: Pmf,
        u0_size: usize,
        u1_size: usize,
        u2_size: usize,
        v0_size: usize,
        v1_size: usize,
        v2_size: usize,
        x_size: usize,
        s_size: usize,
        u_given_q: Vec<f64>,
        x_map: Vec<usize>,
        v_given: Vec<f64>,
        q_mirror: Option<Vec<usize>>,
    ) -> Result<Self> {
        let q_size = q_pmf.len();
        for &d in &[u0_size, u1_size, u2_size, v0_size, v1_size, v2_size, x_size, s_size] {
            if d == 0 {
                return Err(Error::InvalidParameter("zero-size alphabet".into()));
            }
        }
        let u_cells = q_size * u0_size * u1_size * u2_size;
        if u_given_q.len() != u_cells {
            return Err(Error::InvalidParameter(format!(
                "u table has {} cells, expected {u_cells}",
                u_given_q.len()
            )));
        }
        if x_map.len() != u_cells {
            return Err(Error::InvalidParameter(format!(
                "x map has {} cells, expected {u_cells}",
                x_map.len()
            )));
        }
        if x_map.iter().any(|&x| x >= x_size) {
            return Err(Error::InvalidParameter("x map value out of range".into()));
        }
        let v_cells = u_cells * s_size * v0_size * v1_size * v2_size;
        if v_given.len() != v_cells {
            return Err(Error::InvalidParameter(format!(
                "v table has {} cells, expected {v_cells}",
                v_given.len()
            )));
        }
        for q in 0..q_size {
            let base = q * u0_size * u1_size * u2_size;
            let slice = &u_given_q[base..base + u0_size * u1_size * u2_size];
            let sum: f64 = slice.iter().sum();
            if slice.iter().any(|&p| p < 0.0 || !p.is_finite()) || (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidPmf(format!(
                    "u slice at q={q} is not a pmf (sum {sum})"
                )));
            }
        }
        let v_block = v0_size * v1_size * v2_size;
        for i in 0..u_cells * s_size {
            let slice = &v_given[i * v_block..(i + 1) * v_block];
            let sum: f64 = slice.iter().sum();
            if slice.iter().any(|&p| p < 0.0 || !p.is_finite()) || (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidPmf(format!(
                    "v slice {i} is not a pmf (sum {sum})"
                )));
            }
        }
        if let Some(ref m) = q_mirror {
            if m.len() != q_size {
                return Err(Error::InvalidParameter("q mirror has wrong length".into()));
            }
        }
        Ok(Self {
            q_pmf,
            u0_size,
            u1_size,
            u2_size,
            v0_size,
            v1_size,
            v2_size,
            x_size,
            s_size,
            u_given_q,
            x_map,
            v_given,
            q_mirror,
        })
    }

    pub fn q_size(&self) -> usize {
        self.q_pmf.len()
    }

    pub fn q_pmf(&self) -> &Pmf {
        &self.q_pmf
    }

    pub fn q_mirror(&self) -> Option<&[usize]> {
        self.q_mirror.as_deref()
    }

    pub fn u_prob(&self, q: usize, u0: usize, u1: usize, u2: usize) -> f64 {
        self.u_given_q[((q * self.u0_size + u0) * self.u1_size + u1) * self.u2_size + u2]
    }

    pub fn x_of(&self, q: usize, u0: usize, u1: usize, u2: usize) -> usize {
        self.x_map[((q * self.u0_size + u0) * self.u1_size + u1) * self.u2_size + u2]
    }

    #[allow(clippy::too_many_arguments)]
    pub fn v_prob(
        &self,
        q: usize,
        u0: usize,
        u1: usize,
        u2: usize,
        s: usize,
        v0: usize,
        v1: usize,
        v2: usize,
    ) -> f64 {
        let cell = (((q * self.u0_size + u0) * self.u1_size + u1) * self.u2_size + u2)
            * self.s_size
            + s;
        self.v_given[((cell * self.v0_size + v0) * self.v1_size + v1) * self.v2_size + v2]
    }

    /// Full joint over `(Q, U0, U1, U2, X, S, Y1, Y2, V0, V1, V2)` obtained
    /// by composing the scheme with the channel kernel.
    pub fn joint_with(&self, ch: &StateChannel) -> Result<JointPmf> {
        if ch.x_size() != self.x_size || ch.s_size() != self.s_size {
            return Err(Error::InvalidParameter(
                "scheme alphabets do not match the channel".into(),
            ));
        }
        let axes = vec![
            ("Q", self.q_size()),
            ("U0", self.u0_size),
            ("U1", self.u1_size),
            ("U2", self.u2_size),
            ("X", self.x_size),
            ("S", self.s_size),
            ("Y1", ch.y_size()),
            ("Y2", ch.y_size()),
            ("V0", self.v0_size),
            ("V1", self.v1_size),
            ("V2", self.v2_size),
        ];
        check_cell_budget(&axes.iter().map(|&(_, s)| s).collect::<Vec<_>>())?;
        JointPmf::from_fn(axes, |i| {
            let (q, u0, u1, u2, x, s) = (i[0], i[1], i[2], i[3], i[4], i[5]);
            if self.x_of(q, u0, u1, u2) != x {
                return 0.0;
            }
            let pu = self.u_prob(q, u0, u1, u2);
            if pu == 0.0 {
                return 0.0;
            }
            self.q_pmf.prob(q)
                * pu
                * ch.state_pmf().prob(s)
                * ch.kernel_prob(x, s, i[6], i[7])
                * self.v_prob(q, u0, u1, u2, s, i[8], i[9], i[10])
        })
    }

    /// Checks the four defining equalities of a symmetric auxiliary set
    /// against the stored mirror bijection and the channel's state
    /// permutation, within [`AUX_SYMMETRY_TOL`].
    pub fn check_symmetric(&self, witness: &SymmetryWitness) -> Result<()> {
        let mirror = self
            .q_mirror
            .as_deref()
            .ok_or_else(|| Error::AsymmetricAux("no mirror bijection recorded".into()))?;
        if self.u1_size != self.u2_size {
            return Err(Error::AsymmetricAux("U1 and U2 alphabets differ".into()));
        }
        if self.v1_size != self.v2_size {
            return Err(Error::AsymmetricAux("V1 and V2 alphabets differ".into()));
        }
        for q in 0..self.q_size() {
            let mq = mirror[q];
            if (self.q_pmf.prob(q) - self.q_pmf.prob(mq)).abs() > AUX_SYMMETRY_TOL {
                return Err(Error::AsymmetricAux(format!(
                    "p_Q({q}) != p_Q(mirror({q}))"
                )));
            }
            for u0 in 0..self.u0_size {
                for u1 in 0..self.u1_size {
                    for u2 in 0..self.u2_size {
                        let d = (self.u_prob(q, u0, u1, u2) - self.u_prob(mq, u0, u2, u1)).abs();
                        if d > AUX_SYMMETRY_TOL {
                            return Err(Error::AsymmetricAux(format!(
                                "u table asymmetric at q={q}, (u0,u1,u2)=({u0},{u1},{u2})"
                            )));
                        }
                        if self.x_of(q, u0, u1, u2) != self.x_of(mq, u0, u2, u1) {
                            return Err(Error::AsymmetricAux(format!(
                                "x map asymmetric at q={q}, (u0,u1,u2)=({u0},{u1},{u2})"
                            )));
                        }
                        for s in 0..self.s_size {
                            let ms = witness.apply(s);
                            for v0 in 0..self.v0_size {
                                for v1 in 0..self.v1_size {
                                    for v2 in 0..self.v2_size {
                                        let d = (self.v_prob(q, u0, u1, u2, s, v0, v1, v2)
                                            - self.v_prob(mq, u0, u2, u1, ms, v0, v2, v1))
                                        .abs();
                                        if d > AUX_SYMMETRY_TOL {
                                            return Err(Error::AsymmetricAux(format!(
                                                "v table asymmetric at q={q}, s={s}"
                                            )));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parameters of the time-sharing specialization: `Q in {1,2,3}` with
/// `p_Q = (p, p, 1-2p)`, independent `U0 ~ pu0` and `U1 ~ U2 ~ px` on the
/// input alphabet.
#[derive(Debug, Clone)]
pub struct TimeSharingParams {
    pub p: f64,
    pub px: Pmf,
    pub pu0: Pmf,
}

impl TimeSharingParams {
    pub fn new(p: f64, px: Pmf, pu0: Pmf) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "time share p = {p} outside [0, 0.5]"
            )));
        }
        Ok(Self { p, px, pu0 })
    }
}

/// Parameters of the superposition specialization: a common layer
/// `U0 ~ u0_pmf` and a shared private kernel `p(x | u0)`.
#[derive(Debug, Clone)]
pub struct SuperpositionParams {
    pub u0_pmf: Pmf,
    pub x_given_u0: Vec<Pmf>,
}

impl SuperpositionParams {
    pub fn new(u0_pmf: Pmf, x_given_u0: Vec<Pmf>) -> Result<Self> {
        if x_given_u0.len() != u0_pmf.len() {
            return Err(Error::InvalidParameter(
                "one conditional input law per common-layer letter required".into(),
            ));
        }
        if let Some(first) = x_given_u0.first() {
            if x_given_u0.iter().any(|k| k.len() != first.len()) {
                return Err(Error::InvalidParameter(
                    "conditional input laws have mismatched supports".into(),
                ));
            }
        }
        Ok(Self { u0_pmf, x_given_u0 })
    }
}

fn determinism_required(ch: &StateChannel) -> Result<crate::channel::DeterminismWitness> {
    ch.determinism_witness().ok_or(Error::NotDeterministic)
}

/// Builds the time-sharing scheme: `X = U1 / U2 / U0` and
/// `V0 = V1 = V2 = Y2 / Y1 / nothing` under `Q = 1 / 2 / 3`. The "nothing"
/// case is a dedicated extra letter on the shared refinement alphabet, so it
/// carries exactly zero information. Requires a deterministic channel (the
/// refinement variables copy channel outputs).
pub fn build_ts_scheme(params: &TimeSharingParams, ch: &StateChannel) -> Result<AuxScheme> {
    let det = determinism_required(ch)?;
    let x_size = ch.x_size();
    if params.px.len() != x_size || params.pu0.len() != x_size {
        return Err(Error::InvalidParameter(
            "time-sharing input laws must live on the channel input alphabet".into(),
        ));
    }
    let p = params.p;
    let q_pmf = Pmf::new(vec![p, p, 1.0 - 2.0 * p])?;
    let v_size = ch.y_size() + 1;
    let blank = ch.y_size();
    let u_cells = x_size * x_size * x_size;

    let mut u_given_q = Vec::with_capacity(3 * u_cells);
    let mut x_map = Vec::with_capacity(3 * u_cells);
    for q in 0..3 {
        for u0 in 0..x_size {
            for u1 in 0..x_size {
                for u2 in 0..x_size {
                    u_given_q.push(
                        params.pu0.prob(u0) * params.px.prob(u1) * params.px.prob(u2),
                    );
                    x_map.push(match q {
                        0 => u1,
                        1 => u2,
                        _ => u0,
                    });
                }
            }
        }
    }

    let v_block = v_size * v_size * v_size;
    let mut v_given = vec![0.0; 3 * u_cells * ch.s_size() * v_block];
    let mut cell = 0;
    for q in 0..3 {
        for u0 in 0..x_size {
            for u1 in 0..x_size {
                for u2 in 0..x_size {
                    for s in 0..ch.s_size() {
                        let v = match q {
                            0 => det.y2(u1, s),
                            1 => det.y1(u2, s),
                            _ => blank,
                        };
                        v_given[cell * v_block + (v * v_size + v) * v_size + v] = 1.0;
                        cell += 1;
                    }
                }
            }
        }
    }

    AuxScheme::new(
        q_pmf,
        x_size,
        x_size,
        x_size,
        v_size,
        v_size,
        v_size,
        x_size,
        ch.s_size(),
        u_given_q,
        x_map,
        v_given,
        Some(vec![1, 0, 2]),
    )
}

/// Builds the superposition scheme: `Q in {1,2}` uniform, `U1` and `U2`
/// conditionally i.i.d. given `U0`, `X = U_Q`, and
/// `V0 = V1 = V2 = Y2 / Y1` under `Q = 1 / 2`. Requires a deterministic
/// channel.
pub fn build_sp_scheme(params: &SuperpositionParams, ch: &StateChannel) -> Result<AuxScheme> {
    let det = determinism_required(ch)?;
    let x_size = ch.x_size();
    if params.x_given_u0.iter().any(|k| k.len() != x_size) {
        return Err(Error::InvalidParameter(
            "superposition kernel must map to the channel input alphabet".into(),
        ));
    }
    let u0_size = params.u0_pmf.len();
    let v_size = ch.y_size();
    let u_cells = u0_size * x_size * x_size;

    let mut u_given_q = Vec::with_capacity(2 * u_cells);
    let mut x_map = Vec::with_capacity(2 * u_cells);
    for q in 0..2 {
        for u0 in 0..u0_size {
            let k = &params.x_given_u0[u0];
            for u1 in 0..x_size {
                for u2 in 0..x_size {
                    u_given_q.push(params.u0_pmf.prob(u0) * k.prob(u1) * k.prob(u2));
                    x_map.push(if q == 0 { u1 } else { u2 });
                }
            }
        }
    }

    let v_block = v_size * v_size * v_size;
    let mut v_given = vec![0.0; 2 * u_cells * ch.s_size() * v_block];
    let mut cell = 0;
    for q in 0..2 {
        for _u0 in 0..u0_size {
            for u1 in 0..x_size {
                for u2 in 0..x_size {
                    for s in 0..ch.s_size() {
                        let v = if q == 0 {
                            det.y2(u1, s)
                        } else {
                            det.y1(u2, s)
                        };
                        v_given[cell * v_block + (v * v_size + v) * v_size + v] = 1.0;
                        cell += 1;
                    }
                }
            }
        }
    }

    AuxScheme::new(
        Pmf::uniform(2),
        u0_size,
        x_size,
        x_size,
        v_size,
        v_size,
        v_size,
        x_size,
        ch.s_size(),
        u_given_q,
        x_map,
        v_given,
        Some(vec![1, 0]),
    )
}

/// The Blackwell superposition family: `U0 in {0,1,2,3}` with
/// `p_U0 = (q1, q1, (1-2q1)/2, (1-2q1)/2)` and the six-case private kernel.
/// Input letters follow the convention pinned by the channel construction
/// (letters 0 and 2 are the mirrored pair both receivers resolve, letter 1
/// the contested one carrying the `beta` mass):
///
/// | `u0`  | `p(0|u0)`     | `p(1|u0)` | `p(2|u0)`     |
/// |-------|---------------|-----------|---------------|
/// | 0     | a1 (1 - b1)   | b1        | (1-a1)(1-b1)  |
/// | 1     | (1-a1)(1-b1)  | b1        | a1 (1 - b1)   |
/// | 2     | a2 (1 - b2)   | b2        | (1-a2)(1-b2)  |
/// | 3     | (1-a2)(1-b2)  | b2        | a2 (1 - b2)   |
pub fn make_blackwell_sp_params(
    q1: f64,
    alpha1: f64,
    alpha2: f64,
    beta1: f64,
    beta2: f64,
) -> Result<SuperpositionParams> {
    if !(0.0..=0.5).contains(&q1) {
        return Err(Error::InvalidParameter(format!(
            "q1 = {q1} outside [0, 0.5]"
        )));
    }
    for (name, v) in [
        ("alpha1", alpha1),
        ("alpha2", alpha2),
        ("beta1", beta1),
        ("beta2", beta2),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "{name} = {v} outside [0, 1]"
            )));
        }
    }
    let u0_pmf = Pmf::new(vec![q1, q1, 0.5 - q1, 0.5 - q1])?;
    let row = |a: f64, b: f64, flipped: bool| {
        let clean = a * (1.0 - b);
        let other = (1.0 - a) * (1.0 - b);
        if flipped {
            Pmf::new(vec![other, b, clean])
        } else {
            Pmf::new(vec![clean, b, other])
        }
    };
    let x_given_u0 = vec![
        row(alpha1, beta1, false)?,
        row(alpha1, beta1, true)?,
        row(alpha2, beta2, false)?,
        row(alpha2, beta2, true)?,
    ];
    SuperpositionParams::new(u0_pmf, x_given_u0)
}

/// Mirror construction: doubles the time-sharing alphabet, placing on the
/// upper half the receiver-swapped law
/// `p(u0, u2, u1, v0, v2, v1 | pi(s), q - N)` with the x-map arguments
/// swapped, each half weighted one half. The output carries the mirror
/// bijection `q <-> q +- N` and satisfies the symmetric-auxiliary equalities
/// whenever the channel permutation is an involution.
pub fn symmetrize(
    aux: &AuxScheme,
    ch: &StateChannel,
    witness: &SymmetryWitness,
) -> Result<AuxScheme> {
    if aux.u1_size != aux.u2_size || aux.v1_size != aux.v2_size {
        return Err(Error::AsymmetricAux(
            "mirroring needs matching U1/U2 and V1/V2 alphabets".into(),
        ));
    }
    if aux.s_size != ch.s_size() {
        return Err(Error::InvalidParameter(
            "scheme state alphabet does not match the channel".into(),
        ));
    }
    let n = aux.q_size();
    let mut q_probs = Vec::with_capacity(2 * n);
    for q in 0..n {
        q_probs.push(0.5 * aux.q_pmf.prob(q));
    }
    for q in 0..n {
        q_probs.push(0.5 * aux.q_pmf.prob(q));
    }
    let q_pmf = Pmf::new(q_probs)?;

    let (u0s, u1s, u2s) = (aux.u0_size, aux.u1_size, aux.u2_size);
    let u_cells = u0s * u1s * u2s;
    let mut u_given_q = Vec::with_capacity(2 * n * u_cells);
    let mut x_map = Vec::with_capacity(2 * n * u_cells);
    let mut v_given = Vec::with_capacity(2 * aux.v_given.len());

    for big_q in 0..2 * n {
        let mirrored = big_q >= n;
        let q = if mirrored { big_q - n } else { big_q };
        for u0 in 0..u0s {
            for u1 in 0..u1s {
                for u2 in 0..u2s {
                    if mirrored {
                        u_given_q.push(aux.u_prob(q, u0, u2, u1));
                        x_map.push(aux.x_of(q, u0, u2, u1));
                    } else {
                        u_given_q.push(aux.u_prob(q, u0, u1, u2));
                        x_map.push(aux.x_of(q, u0, u1, u2));
                    }
                    for s in 0..aux.s_size {
                        for v0 in 0..aux.v0_size {
                            for v1 in 0..aux.v1_size {
                                for v2 in 0..aux.v2_size {
                                    v_given.push(if mirrored {
                                        aux.v_prob(q, u0, u2, u1, witness.apply(s), v0, v2, v1)
                                    } else {
                                        aux.v_prob(q, u0, u1, u2, s, v0, v1, v2)
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    let mirror = (0..2 * n)
        .map(|q| if q < n { q + n } else { q - n })
        .collect();
    AuxScheme::new(
        q_pmf,
        u0s,
        u1s,
        u2s,
        aux.v0_size,
        aux.v1_size,
        aux.v2_size,
        aux.x_size,
        aux.s_size,
        u_given_q,
        x_map,
        v_given,
        Some(mirror),
    )
}

/// Alphabet sizes for [`random_scheme`].
#[derive(Debug, Clone, Copy)]
pub struct RandomSchemeDims {
    pub q_size: usize,
    pub u0_size: usize,
    pub u_size: usize,
    pub v0_size: usize,
    pub v_size: usize,
}

/// Samples an arbitrary valid scheme (generally asymmetric) with the given
/// alphabet sizes: Dirichlet(1) conditional slices and a uniformly random
/// x-map. `U1`/`U2` and `V1`/`V2` share alphabets so the result can be
/// mirrored.
pub fn random_scheme(
    rng: &mut impl Rng,
    ch: &StateChannel,
    dims: RandomSchemeDims,
) -> AuxScheme {
    let RandomSchemeDims {
        q_size,
        u0_size,
        u_size,
        v0_size,
        v_size,
    } = dims;
    let mut dirichlet = |n: usize| -> Vec<f64> {
        let mut v: Vec<f64> = (0..n)
            .map(|_| -f64::ln(1.0 - rng.gen::<f64>()).max(1e-12))
            .collect();
        let s: f64 = v.iter().sum();
        for x in v.iter_mut() {
            *x /= s;
        }
        v
    };
    let q_pmf = Pmf::new(dirichlet(q_size)).expect("normalized");
    let u_cells = u0_size * u_size * u_size;
    let mut u_given_q = Vec::with_capacity(q_size * u_cells);
    for _ in 0..q_size {
        u_given_q.extend(dirichlet(u_cells));
    }
    let x_map = (0..q_size * u_cells)
        .map(|_| rng.gen_range(0..ch.x_size()))
        .collect();
    let v_block = v0_size * v_size * v_size;
    let mut v_given = Vec::with_capacity(q_size * u_cells * ch.s_size() * v_block);
    for _ in 0..q_size * u_cells * ch.s_size() {
        v_given.extend(dirichlet(v_block));
    }
    AuxScheme::new(
        q_pmf,
        u0_size,
        u_size,
        u_size,
        v0_size,
        v_size,
        v_size,
        ch.x_size(),
        ch.s_size(),
        u_given_q,
        x_map,
        v_given,
        None,
    )
    .expect("sampled tables are valid")
}
