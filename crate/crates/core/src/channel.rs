//! Two-receiver broadcast channels with random state: validation, symmetry
//! and determinism witnesses, the built-in example channels, and the JSON
//! interchange format.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{check_cell_budget, JointPmf, Pmf, SUM_TOL};

/// Tolerance for the symmetry-witness equalities.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A discrete memoryless broadcast channel `p(y1,y2|x,s)` with i.i.d. state
/// `S ~ p(s)` known at both decoders and strictly causally at the encoder.
/// Both outputs share one alphabet of size `y_size`.
#[derive(Debug)]
pub struct StateChannel {
    x_size: usize,
    y_size: usize,
    s_size: usize,
    state_pmf: Pmf,
    /// `kernel[((x * s_size + s) * y_size + y1) * y_size + y2]`
    kernel: Vec<f64>,
    /// State permutation supplied by a builder or a channel file; validated
    /// lazily by [`StateChannel::symmetry_witness`].
    pi: Option<Vec<usize>>,
    c1_cache: OnceLock<f64>,
}

impl Clone for StateChannel {
    fn clone(&self) -> Self {
        let c1_cache = OnceLock::new();
        if let Some(&v) = self.c1_cache.get() {
            let _ = c1_cache.set(v);
        }
        Self {
            x_size: self.x_size,
            y_size: self.y_size,
            s_size: self.s_size,
            state_pmf: self.state_pmf.clone(),
            kernel: self.kernel.clone(),
            pi: self.pi.clone(),
            c1_cache,
        }
    }
}

/// Witness that a channel satisfies the two state-symmetry equalities for a
/// particular state permutation. Only [`StateChannel::validate_symmetry`]
/// constructs one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryWitness {
    pi: Vec<usize>,
}

impl SymmetryWitness {
    pub fn pi(&self) -> &[usize] {
        &self.pi
    }

    pub fn apply(&self, s: usize) -> usize {
        self.pi[s]
    }
}

/// Witness that both outputs are functions of `(x, s)`: the kernel puts mass
/// one on `(y1_map[x][s], y2_map[x][s])` for every `(x, s)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterminismWitness {
    y1_map: Vec<usize>,
    y2_map: Vec<usize>,
    s_size: usize,
}

impl DeterminismWitness {
    pub fn y1(&self, x: usize, s: usize) -> usize {
        self.y1_map[x * self.s_size + s]
    }

    pub fn y2(&self, x: usize, s: usize) -> usize {
        self.y2_map[x * self.s_size + s]
    }
}

impl StateChannel {
    pub fn new(
        x_size: usize,
        y_size: usize,
        s_size: usize,
        state_pmf: Pmf,
        kernel: Vec<f64>,
        pi: Option<Vec<usize>>,
    ) -> Result<Self> {
        if x_size == 0 || y_size == 0 || s_size == 0 {
            return Err(Error::InvalidParameter(
                "alphabet sizes must be positive".into(),
            ));
        }
        if state_pmf.len() != s_size {
            return Err(Error::InvalidParameter(format!(
                "state pmf has {} entries, s_size is {s_size}",
                state_pmf.len()
            )));
        }
        check_cell_budget(&[x_size, s_size, y_size, y_size])?;
        if kernel.len() != x_size * s_size * y_size * y_size {
            return Err(Error::InvalidParameter(format!(
                "kernel has {} entries, expected {}",
                kernel.len(),
                x_size * s_size * y_size * y_size
            )));
        }
        for x in 0..x_size {
            for s in 0..s_size {
                let mut sum = 0.0;
                for i in 0..y_size * y_size {
                    let p = kernel[(x * s_size + s) * y_size * y_size + i];
                    if !(0.0..=f64::INFINITY).contains(&p) || !p.is_finite() {
                        return Err(Error::InvalidPmf(format!(
                            "kernel entry at (x={x}, s={s}) is invalid ({p})"
                        )));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > SUM_TOL {
                    return Err(Error::InvalidPmf(format!(
                        "kernel slice at (x={x}, s={s}) sums to {sum}"
                    )));
                }
            }
        }
        if let Some(ref p) = pi {
            validate_permutation(p, s_size)?;
        }
        Ok(Self {
            x_size,
            y_size,
            s_size,
            state_pmf,
            kernel,
            pi,
            c1_cache: OnceLock::new(),
        })
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn s_size(&self) -> usize {
        self.s_size
    }

    pub fn state_pmf(&self) -> &Pmf {
        &self.state_pmf
    }

    pub fn pi(&self) -> Option<&[usize]> {
        self.pi.as_deref()
    }

    /// `p(y1, y2 | x, s)`.
    pub fn kernel_prob(&self, x: usize, s: usize, y1: usize, y2: usize) -> f64 {
        self.kernel[((x * self.s_size + s) * self.y_size + y1) * self.y_size + y2]
    }

    /// `p(y1 | x, s)` marginal of the kernel slice.
    pub fn y1_prob(&self, x: usize, s: usize, y1: usize) -> f64 {
        (0..self.y_size)
            .map(|y2| self.kernel_prob(x, s, y1, y2))
            .sum()
    }

    /// `p(y2 | x, s)` marginal of the kernel slice.
    pub fn y2_prob(&self, x: usize, s: usize, y2: usize) -> f64 {
        (0..self.y_size)
            .map(|y1| self.kernel_prob(x, s, y1, y2))
            .sum()
    }

    /// Checks the two defining equalities of a symmetric channel for `pi`
    /// within [`SYMMETRY_TOL`] and returns the witness, naming the first
    /// offending `(y, x, s)` otherwise.
    pub fn validate_symmetry(&self, pi: &[usize]) -> Result<SymmetryWitness> {
        validate_permutation(pi, self.s_size)?;
        for s in 0..self.s_size {
            let d = (self.state_pmf.prob(s) - self.state_pmf.prob(pi[s])).abs();
            if d > SYMMETRY_TOL {
                return Err(Error::SymmetryViolation {
                    y: 0,
                    x: 0,
                    s,
                    detail: format!("p_S(s) != p_S(pi(s)), difference {d:.3e}"),
                });
            }
        }
        for y in 0..self.y_size {
            for x in 0..self.x_size {
                for s in 0..self.s_size {
                    let lhs = self.y1_prob(x, s, y);
                    let rhs = self.y2_prob(x, pi[s], y);
                    if (lhs - rhs).abs() > SYMMETRY_TOL {
                        return Err(Error::SymmetryViolation {
                            y,
                            x,
                            s,
                            detail: format!(
                                "p(y1|x,s) = {lhs} but p(y2|x,pi(s)) = {rhs}"
                            ),
                        });
                    }
                }
            }
        }
        Ok(SymmetryWitness { pi: pi.to_vec() })
    }

    /// Witness for the channel's own `pi` field.
    pub fn symmetry_witness(&self) -> Result<SymmetryWitness> {
        match &self.pi {
            Some(pi) => self.validate_symmetry(pi),
            None => Err(Error::NotSymmetric(
                "channel carries no state permutation".into(),
            )),
        }
    }

    /// Determinism witness, or `None` if any kernel slice is non-degenerate.
    pub fn determinism_witness(&self) -> Option<DeterminismWitness> {
        let mut y1_map = vec![0usize; self.x_size * self.s_size];
        let mut y2_map = vec![0usize; self.x_size * self.s_size];
        for x in 0..self.x_size {
            for s in 0..self.s_size {
                let mut hit = None;
                for y1 in 0..self.y_size {
                    for y2 in 0..self.y_size {
                        let p = self.kernel_prob(x, s, y1, y2);
                        if p > 0.0 {
                            if (p - 1.0).abs() > SUM_TOL || hit.is_some() {
                                return None;
                            }
                            hit = Some((y1, y2));
                        }
                    }
                }
                let (y1, y2) = hit?;
                y1_map[x * self.s_size + s] = y1;
                y2_map[x * self.s_size + s] = y2;
            }
        }
        Some(DeterminismWitness {
            y1_map,
            y2_map,
            s_size: self.s_size,
        })
    }

    /// Joint `p(x, s, y1, y2) = p(x) p(s) p(y1,y2|x,s)` with axes
    /// `X, S, Y1, Y2`.
    pub fn input_joint(&self, px: &Pmf) -> Result<JointPmf> {
        if px.len() != self.x_size {
            return Err(Error::InvalidParameter(format!(
                "input pmf has {} entries, x_size is {}",
                px.len(),
                self.x_size
            )));
        }
        JointPmf::from_fn(
            vec![
                ("X", self.x_size),
                ("S", self.s_size),
                ("Y1", self.y_size),
                ("Y2", self.y_size),
            ],
            |idx| {
                px.prob(idx[0])
                    * self.state_pmf.prob(idx[1])
                    * self.kernel_prob(idx[0], idx[1], idx[2], idx[3])
            },
        )
    }

    pub(crate) fn c1_cache(&self) -> &OnceLock<f64> {
        &self.c1_cache
    }
}

fn validate_permutation(pi: &[usize], n: usize) -> Result<()> {
    if pi.len() != n {
        return Err(Error::InvalidParameter(format!(
            "permutation has {} entries, state alphabet has {n}",
            pi.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in pi {
        if p >= n || seen[p] {
            return Err(Error::InvalidParameter(
                "not a permutation of the state alphabet".into(),
            ));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Operation form of [`StateChannel::validate_symmetry`].
pub fn validate_symmetry(ch: &StateChannel, pi: &[usize]) -> Result<SymmetryWitness> {
    ch.validate_symmetry(pi)
}

/// Operation form of [`StateChannel::determinism_witness`].
pub fn check_deterministic(ch: &StateChannel) -> Option<DeterminismWitness> {
    ch.determinism_witness()
}

/// Broadcast erasure channel: `X` binary, `Y_i in {0, 1, e}`, erasure flags
/// `S = (S1, S2)` i.i.d. Bernoulli(eps) encoded on the 4-letter alphabet
/// `{(0,0), (0,1), (1,0), (1,1)}`; output `i` equals `X` when `S_i = 0` and
/// the erasure letter (index 2) when `S_i = 1`. The witness permutation
/// swaps the two flags.
pub fn make_erasure(eps: f64) -> Result<StateChannel> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "erasure probability {eps} outside [0, 1]"
        )));
    }
    const E: usize = 2; // erasure letter
    let state_pmf = Pmf::new(vec![
        (1.0 - eps) * (1.0 - eps),
        (1.0 - eps) * eps,
        eps * (1.0 - eps),
        eps * eps,
    ])?;
    let flags = [(0, 0), (0, 1), (1, 0), (1, 1)];
    let mut kernel = vec![0.0; 2 * 4 * 3 * 3];
    for x in 0..2 {
        for (s, &(s1, s2)) in flags.iter().enumerate() {
            let y1 = if s1 == 0 { x } else { E };
            let y2 = if s2 == 0 { x } else { E };
            kernel[((x * 4 + s) * 3 + y1) * 3 + y2] = 1.0;
        }
    }
    StateChannel::new(2, 3, 4, state_pmf, kernel, Some(vec![0, 2, 1, 3]))
}

fn is_prime(q: usize) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Finite-field channel over GF(q): input `X = (X1, X2)`, state `H` uniform
/// over the full-rank 2x2 matrices enumerated in lexicographic order of
/// `(h11, h12, h21, h22)`, outputs `Y1 = h11 X1 + h12 X2` and
/// `Y2 = h21 X1 + h22 X2` (mod q). The witness permutation maps each matrix
/// to its row-swapped counterpart.
pub fn make_finite_field(q: usize) -> Result<StateChannel> {
    if !is_prime(q) {
        return Err(Error::InvalidParameter(format!("{q} is not prime")));
    }
    let mut matrices = Vec::new();
    for h11 in 0..q {
        for h12 in 0..q {
            for h21 in 0..q {
                for h22 in 0..q {
                    let det = (h11 * h22 + q * q - h12 * h21) % q;
                    if det != 0 {
                        matrices.push([h11, h12, h21, h22]);
                    }
                }
            }
        }
    }
    let s_size = matrices.len();
    let x_size = q * q;
    let state_pmf = Pmf::uniform(s_size);
    let mut kernel = vec![0.0; x_size * s_size * q * q];
    for x in 0..x_size {
        let (x1, x2) = (x / q, x % q);
        for (s, m) in matrices.iter().enumerate() {
            let y1 = (m[0] * x1 + m[1] * x2) % q;
            let y2 = (m[2] * x1 + m[3] * x2) % q;
            kernel[((x * s_size + s) * q + y1) * q + y2] = 1.0;
        }
    }
    let pi = matrices
        .iter()
        .map(|m| {
            let swapped = [m[2], m[3], m[0], m[1]];
            matrices
                .iter()
                .position(|n| *n == swapped)
                .expect("row swap preserves full rank")
        })
        .collect();
    StateChannel::new(x_size, q, s_size, state_pmf, kernel, Some(pi))
}

/// Blackwell channel that switches between the two receiver roles with the
/// state: `X in {0,1,2}`, `Y in {0,1}`, `S` uniform binary. Under `s = 0`,
/// `y1 = 1` iff `x = 2` and `y2 = 1` iff `x >= 1`; under `s = 1` the two
/// output maps swap. Input letter 1 is the one the receivers see
/// differently; letters 0 and 2 map to `(0,0)` and `(1,1)` in both states.
pub fn make_blackwell_with_state() -> StateChannel {
    let mut kernel = vec![0.0; 3 * 2 * 2 * 2];
    for x in 0..3 {
        for s in 0..2 {
            let (y1, y2) = blackwell_maps(x, s);
            kernel[((x * 2 + s) * 2 + y1) * 2 + y2] = 1.0;
        }
    }
    StateChannel::new(3, 2, 2, Pmf::uniform(2), kernel, Some(vec![1, 0]))
        .expect("static construction")
}

fn blackwell_maps(x: usize, s: usize) -> (usize, usize) {
    if s == 0 {
        (usize::from(x == 2), usize::from(x >= 1))
    } else {
        (usize::from(x >= 1), usize::from(x == 2))
    }
}

/// JSON interchange form of a channel. `kernel[x][s]` is the `(y1, y2)`
/// slice flattened row-major as `y1 * y_size + y2`; `pi` is a 0-based state
/// permutation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelFile {
    pub x_size: usize,
    pub y_size: usize,
    pub s_size: usize,
    pub state_pmf: Vec<f64>,
    pub kernel: Vec<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<usize>>,
}

impl ChannelFile {
    pub fn from_channel(ch: &StateChannel) -> Self {
        let kernel = (0..ch.x_size())
            .map(|x| {
                (0..ch.s_size())
                    .map(|s| {
                        let mut slice = Vec::with_capacity(ch.y_size() * ch.y_size());
                        for y1 in 0..ch.y_size() {
                            for y2 in 0..ch.y_size() {
                                slice.push(ch.kernel_prob(x, s, y1, y2));
                            }
                        }
                        slice
                    })
                    .collect()
            })
            .collect();
        ChannelFile {
            x_size: ch.x_size(),
            y_size: ch.y_size(),
            s_size: ch.s_size(),
            state_pmf: ch.state_pmf().probs().to_vec(),
            kernel,
            pi: ch.pi().map(|p| p.to_vec()),
        }
    }

    pub fn into_channel(self) -> Result<StateChannel> {
        if self.kernel.len() != self.x_size {
            return Err(Error::ChannelFile(format!(
                "kernel has {} input rows, x_size is {}",
                self.kernel.len(),
                self.x_size
            )));
        }
        let mut flat = Vec::with_capacity(self.x_size * self.s_size * self.y_size * self.y_size);
        for (x, row) in self.kernel.iter().enumerate() {
            if row.len() != self.s_size {
                return Err(Error::ChannelFile(format!(
                    "kernel row {x} has {} state slices, s_size is {}",
                    row.len(),
                    self.s_size
                )));
            }
            for (s, slice) in row.iter().enumerate() {
                if slice.len() != self.y_size * self.y_size {
                    return Err(Error::ChannelFile(format!(
                        "kernel slice at (x={x}, s={s}) has {} entries, expected {}",
                        slice.len(),
                        self.y_size * self.y_size
                    )));
                }
                flat.extend_from_slice(slice);
            }
        }
        StateChannel::new(
            self.x_size,
            self.y_size,
            self.s_size,
            Pmf::new(self.state_pmf)?,
            flat,
            self.pi,
        )
    }
}
