//! Deterministic derivative-free maximization over products of probability
//! simplices.
//!
//! The search runs in two stages: a coarse scan of each simplex block (the
//! full product lattice when it fits the evaluation budget, otherwise a
//! seeded uniform sample of the same size), followed by Nelder-Mead
//! refinement started from the best scanned points, with every candidate
//! projected back onto the simplices before evaluation. Given the same
//! [`SearchSpec`] the result is bit-identical regardless of thread count:
//! scan points are generated in a fixed order, evaluated by a parallel
//! indexed map, and reduced in index order.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Maximum number of scan-stage evaluations.
const SCAN_BUDGET: usize = 200_000;

/// Search-space description and budgets for [`maximize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    /// One entry per pmf block: the block's support size.
    pub dims: Vec<usize>,
    /// Lattice resolution per block (points with coordinates `k / resolution`).
    pub grid_resolution: usize,
    /// Number of scanned points kept as refinement starts.
    pub restarts: usize,
    /// Nelder-Mead iteration cap per restart.
    pub max_iters: usize,
    /// Convergence tolerance on the value spread of the refinement simplex.
    pub tol: f64,
    /// Seed for the sampled scan (unused when the lattice is enumerated).
    pub seed: u64,
}

impl SearchSpec {
    /// Defaults for the given block sizes: resolution 20 when every block has
    /// at most 3 cells, 8 otherwise.
    pub fn default_for(dims: &[usize]) -> Self {
        let res = if dims.iter().all(|&d| d <= 3) { 20 } else { 8 };
        SearchSpec {
            dims: dims.to_vec(),
            grid_resolution: res,
            restarts: 12,
            max_iters: 1500,
            tol: 1e-12,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) {
        assert!(!self.dims.is_empty() && self.dims.iter().all(|&d| d >= 1));
        assert!(self.grid_resolution >= 1);
        assert!(self.restarts >= 1);
        assert!(self.tol > 0.0);
    }

    fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }
}

/// Outcome of a [`maximize`] run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptResult {
    pub best_value: f64,
    /// Concatenated pmf blocks, each summing to one.
    pub best_point: Vec<f64>,
    pub evaluations: usize,
    /// `(iteration, best value so far)` at each improvement, when requested.
    pub trace: Option<Vec<(usize, f64)>>,
    /// True when a refinement hit its iteration cap before converging.
    pub budget_exhausted: bool,
}

/// Euclidean projection of `v` onto the probability simplex, by the exact
/// sort-based algorithm. Ties in the sort keep the lower index first.
pub fn project_to_simplex(v: &mut [f64]) {
    let n = v.len();
    if n == 1 {
        v[0] = 1.0;
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = 0.0;
    let mut theta = 0.0;
    let mut rho = 0;
    for (i, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
            rho = i + 1;
        }
    }
    debug_assert!(rho >= 1);
    let _ = rho;
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // absorb rounding into the largest coordinate so the sum is exact
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        let imax = (0..n)
            .max_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap())
            .unwrap();
        v[imax] += 1.0 - sum;
        if v[imax] < 0.0 {
            v[imax] = 0.0;
        }
    } else {
        for x in v.iter_mut() {
            *x = 1.0 / n as f64;
        }
    }
}

/// Projects each block of `point` onto its simplex.
pub fn project_blocks(point: &mut [f64], dims: &[usize]) {
    let mut off = 0;
    for &d in dims {
        project_to_simplex(&mut point[off..off + d]);
        off += d;
    }
}

fn lattice_count(dim: usize, res: usize) -> Option<usize> {
    // compositions of `res` into `dim` nonnegative parts: C(res + dim - 1, dim - 1)
    let mut c: u128 = 1;
    for i in 0..dim - 1 {
        c = c.checked_mul((res + dim - 1 - i) as u128)?;
        c /= (i + 1) as u128;
        if c > u64::MAX as u128 {
            return None;
        }
    }
    Some(c as usize)
}

fn enumerate_block_lattice(dim: usize, res: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut comp = vec![0usize; dim];
    fn rec(comp: &mut Vec<usize>, i: usize, left: usize, res: usize, out: &mut Vec<Vec<f64>>) {
        if i == comp.len() - 1 {
            comp[i] = left;
            out.push(comp.iter().map(|&c| c as f64 / res as f64).collect());
            return;
        }
        for c in 0..=left {
            comp[i] = c;
            rec(comp, i + 1, left - c, res, out);
        }
    }
    rec(&mut comp, 0, res, res, &mut out);
    out
}

fn scan_points(spec: &SearchSpec) -> Vec<Vec<f64>> {
    let res = spec.grid_resolution;
    let per_block: Option<Vec<usize>> = spec
        .dims
        .iter()
        .map(|&d| lattice_count(d, res))
        .collect();
    let total = per_block.as_ref().and_then(|counts| {
        counts
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
    });
    if let Some(total) = total {
        if total <= SCAN_BUDGET {
            let blocks: Vec<Vec<Vec<f64>>> = spec
                .dims
                .iter()
                .map(|&d| enumerate_block_lattice(d, res))
                .collect();
            let mut out = Vec::with_capacity(total);
            let mut idx = vec![0usize; blocks.len()];
            loop {
                let mut point = Vec::with_capacity(spec.total_dim());
                for (b, &i) in blocks.iter().zip(&idx) {
                    point.extend_from_slice(&b[i]);
                }
                out.push(point);
                let mut k = blocks.len();
                loop {
                    if k == 0 {
                        return out;
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < blocks[k].len() {
                        break;
                    }
                    idx[k] = 0;
                }
            }
        }
    }
    // sampled scan: uniform (Dirichlet(1)) points per block, fixed order
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    (0..SCAN_BUDGET)
        .map(|_| {
            let mut point = Vec::with_capacity(spec.total_dim());
            for &d in &spec.dims {
                let mut block: Vec<f64> = (0..d)
                    .map(|_| -f64::ln(rng.sample::<f64, _>(Open01)))
                    .collect();
                let s: f64 = block.iter().sum();
                for v in block.iter_mut() {
                    *v /= s;
                }
                point.extend_from_slice(&block);
            }
            point
        })
        .collect()
}

struct NmOutcome {
    value: f64,
    point: Vec<f64>,
    evaluations: usize,
    exhausted: bool,
    trace: Vec<(usize, f64)>,
}

fn nelder_mead(
    objective: &(impl Fn(&[f64]) -> f64 + Sync),
    spec: &SearchSpec,
    start: &[f64],
    start_value: f64,
) -> NmOutcome {
    let dims = &spec.dims;
    let n = start.len();
    let mut evals = 0usize;
    let mut eval = |p: &mut Vec<f64>| -> f64 {
        project_blocks(p, dims);
        evals += 1;
        objective(p)
    };

    // initial simplex: start plus one vertex per coordinate, nudged and
    // reprojected
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n + 1);
    simplex.push((start_value, start.to_vec()));
    for i in 0..n {
        let mut p = start.to_vec();
        let step = if p[i] > 0.5 { -0.15 } else { 0.15 };
        p[i] += step;
        let v = eval(&mut p);
        simplex.push((v, p));
    }

    let mut trace = Vec::new();
    let mut exhausted = true;
    for iter in 0..spec.max_iters {
        // maximize: best = highest value; stable ordering for determinism
        simplex.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let best = simplex[0].0;
        let worst = simplex[n].0;
        if let Some(last) = trace.last() {
            let &(_, v) = last;
            if best > v {
                trace.push((iter, best));
            }
        } else {
            trace.push((iter, best));
        }
        if (best - worst).abs() < spec.tol {
            exhausted = false;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (_, p) in simplex.iter().take(n) {
            for (c, &x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }
        let worst_point = simplex[n].1.clone();
        let mk = |alpha: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst_point)
                .map(|(&c, &w)| c + alpha * (c - w))
                .collect()
        };

        let mut reflected = mk(1.0);
        let fr = eval(&mut reflected);
        if fr > simplex[0].0 {
            let mut expanded = mk(2.0);
            let fe = eval(&mut expanded);
            if fe > fr {
                simplex[n] = (fe, expanded);
            } else {
                simplex[n] = (fr, reflected);
            }
        } else if fr > simplex[n - 1].0 {
            simplex[n] = (fr, reflected);
        } else {
            let mut contracted = if fr > simplex[n].0 {
                mk(0.5)
            } else {
                mk(-0.5)
            };
            let fc = eval(&mut contracted);
            if fc > simplex[n].0.max(fr) {
                simplex[n] = (fc, contracted);
            } else {
                // shrink toward the best vertex
                let best_point = simplex[0].1.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let mut p: Vec<f64> = entry
                        .1
                        .iter()
                        .zip(&best_point)
                        .map(|(&x, &b)| b + 0.5 * (x - b))
                        .collect();
                    let v = eval(&mut p);
                    *entry = (v, p);
                }
            }
        }
    }
    simplex.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let (value, point) = simplex.swap_remove(0);
    NmOutcome {
        value,
        point,
        evaluations: evals,
        exhausted,
        trace,
    }
}

/// Deterministic two-stage maximization of `objective` over the product of
/// probability simplices described by `spec.dims`. The objective must be a
/// pure function; it may be called from multiple threads.
pub fn maximize(objective: impl Fn(&[f64]) -> f64 + Sync, spec: &SearchSpec) -> OptResult {
    maximize_impl(&objective, spec, false)
}

/// [`maximize`] with an improvement trace attached to the result.
pub fn maximize_traced(
    objective: impl Fn(&[f64]) -> f64 + Sync,
    spec: &SearchSpec,
) -> OptResult {
    maximize_impl(&objective, spec, true)
}

fn maximize_impl(
    objective: &(impl Fn(&[f64]) -> f64 + Sync),
    spec: &SearchSpec,
    want_trace: bool,
) -> OptResult {
    spec.validate();
    let points = scan_points(spec);
    let values: Vec<f64> = points.par_iter().map(|p| objective(p)).collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    // stable: ties keep the lower scan index
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let scan_best = order[0];

    let starts: Vec<usize> = order.into_iter().take(spec.restarts).collect();
    let outcomes: Vec<NmOutcome> = starts
        .par_iter()
        .map(|&i| nelder_mead(objective, spec, &points[i], values[i]))
        .collect();

    let mut best_value = values[scan_best];
    let mut best_point = points[scan_best].clone();
    let mut evaluations = points.len();
    let mut exhausted = false;
    let mut trace = Vec::new();
    for o in &outcomes {
        evaluations += o.evaluations;
        exhausted |= o.exhausted;
    }
    for o in outcomes {
        if o.value > best_value {
            best_value = o.value;
            best_point = o.point;
            trace = o.trace;
        }
    }
    project_blocks(&mut best_point, &spec.dims);
    OptResult {
        best_value,
        best_point,
        evaluations,
        trace: want_trace.then_some(trace),
        budget_exhausted: exhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_is_exact_on_feasible_points() {
        let mut v = vec![0.2, 0.3, 0.5];
        project_to_simplex(&mut v);
        assert!((v[0] - 0.2).abs() < 1e-12);
        assert!((v[1] - 0.3).abs() < 1e-12);
        assert!((v[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn projection_feasibility() {
        let cases = vec![
            vec![1.3, -0.2, 0.4],
            vec![-1.0, -2.0],
            vec![5.0, 5.0, 5.0, 5.0],
            vec![0.0, 0.0],
        ];
        for mut v in cases {
            project_to_simplex(&mut v);
            assert!(v.iter().all(|&x| x >= 0.0));
            let s: f64 = v.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn recovers_interior_target() {
        let target = [0.1, 0.25, 0.65];
        let spec = SearchSpec::default_for(&[3]).with_seed(1);
        let r = maximize(
            |p| -p.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            &spec,
        );
        for (a, b) in r.best_point.iter().zip(&target) {
            assert!((a - b).abs() < 1e-5, "{:?}", r.best_point);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = SearchSpec {
            dims: vec![3, 2],
            grid_resolution: 6,
            restarts: 4,
            max_iters: 300,
            tol: 1e-12,
            seed: 42,
        };
        let obj = |p: &[f64]| p[0] * p[3] - p[1] * p[1];
        let a = maximize(obj, &spec);
        let b = maximize(obj, &spec);
        assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
        assert_eq!(a.best_point, b.best_point);
        assert_eq!(a.evaluations, b.evaluations);
    }

    #[test]
    fn refinement_never_loses_ground() {
        // objective with a spike exactly on a lattice point
        let spec = SearchSpec {
            dims: vec![2],
            grid_resolution: 4,
            restarts: 2,
            max_iters: 50,
            tol: 1e-9,
            seed: 0,
        };
        let obj = |p: &[f64]| {
            if (p[0] - 0.75).abs() < 1e-12 {
                10.0
            } else {
                p[0]
            }
        };
        let r = maximize(obj, &spec);
        assert!(r.best_value >= 10.0);
    }

    #[test]
    fn sampled_scan_used_for_large_spaces() {
        // dims product lattice too large -> sampled, still deterministic
        let spec = SearchSpec {
            dims: vec![6, 6, 6, 6],
            grid_resolution: 12,
            restarts: 2,
            max_iters: 100,
            tol: 1e-10,
            seed: 9,
        };
        let obj = |p: &[f64]| -p.iter().map(|x| x * x).sum::<f64>();
        let a = maximize(obj, &spec);
        let b = maximize(obj, &spec);
        assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
    }
}
