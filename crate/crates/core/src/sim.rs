//! Monte Carlo simulator for the three-phase feedback protocol on the
//! broadcast erasure channel.
//!
//! Each trial delivers one fresh k-bit message per receiver. Phases A and B
//! send each receiver's bits in turn, repeating a bit until at least one
//! receiver gets it; a bit that lands only at the unintended receiver joins
//! that receiver's side-information queue. Phase C transmits the XOR of the
//! two queue heads (or a bare head once one queue drains); either receiver
//! can strip its known summand, so one reception resolves one pending bit.
//! The encoder sees both erasure flags after every slot, which is exactly
//! the strictly causal state the protocol needs. Termination only happens
//! with both messages fully decoded, so the protocol is zero-error and the
//! slot count is the random quantity.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Configuration of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Per-receiver erasure probability, strictly inside (0, 1).
    pub eps: f64,
    /// Message length k per receiver, in bits.
    pub bits_per_user: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Aggregated outcome of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub mean_slots: f64,
    /// `bits_per_user / mean_slots`.
    pub per_user_rate: f64,
    /// Delta-method standard error of `per_user_rate`.
    pub rate_stderr: f64,
    pub analytic_rate: f64,
    pub trials_run: usize,
    /// Mean fraction of phase-A bits that ended up queued for phase C.
    pub mean_queue1_frac: f64,
    pub queue1_frac_stderr: f64,
}

/// The limiting per-user rate of the protocol, `(1 - eps^2) / (2 + eps)`.
pub fn analytic_rate(eps: f64) -> f64 {
    (1.0 - eps * eps) / (2.0 + eps)
}

struct TrialOutcome {
    slots: u64,
    queue1_len: usize,
}

fn run_trial(eps: f64, k: usize, rng: &mut ChaCha12Rng) -> TrialOutcome {
    let msg1: Vec<bool> = (0..k).map(|_| rng.gen()).collect();
    let msg2: Vec<bool> = (0..k).map(|_| rng.gen()).collect();

    let mut rx1: Vec<Option<bool>> = vec![None; k];
    let mut rx2: Vec<Option<bool>> = vec![None; k];
    // side information collected during the other receiver's phase
    let mut side1: Vec<Option<bool>> = vec![None; k]; // receiver 1's copy of msg2 bits
    let mut side2: Vec<Option<bool>> = vec![None; k]; // receiver 2's copy of msg1 bits

    let mut q1: VecDeque<usize> = VecDeque::new(); // msg1 bits pending at rx1
    let mut q2: VecDeque<usize> = VecDeque::new(); // msg2 bits pending at rx2
    let mut slots = 0u64;

    // Phase A: user 1's bits, repeat until somebody receives
    for (i, &bit) in msg1.iter().enumerate() {
        loop {
            slots += 1;
            let e1 = rng.gen_bool(eps);
            let e2 = rng.gen_bool(eps);
            if !e2 {
                side2[i] = Some(bit);
            }
            if !e1 {
                rx1[i] = Some(bit);
                break;
            }
            if !e2 {
                q1.push_back(i);
                break;
            }
        }
    }
    let queue1_len = q1.len();

    // Phase B: user 2's bits
    for (i, &bit) in msg2.iter().enumerate() {
        loop {
            slots += 1;
            let e1 = rng.gen_bool(eps);
            let e2 = rng.gen_bool(eps);
            if !e1 {
                side1[i] = Some(bit);
            }
            if !e2 {
                rx2[i] = Some(bit);
                break;
            }
            if !e1 {
                q2.push_back(i);
                break;
            }
        }
    }

    // Phase C: XOR the queue heads. Both receivers know the state sequence,
    // so they track the queues exactly and can strip their known summand.
    while !q1.is_empty() || !q2.is_empty() {
        slots += 1;
        let head1 = q1.front().copied();
        let head2 = q2.front().copied();
        let symbol = match (head1, head2) {
            (Some(i), Some(j)) => msg1[i] ^ msg2[j],
            (Some(i), None) => msg1[i],
            (None, Some(j)) => msg2[j],
            (None, None) => unreachable!(),
        };
        let e1 = rng.gen_bool(eps);
        let e2 = rng.gen_bool(eps);
        if !e1 {
            if let Some(i) = head1 {
                let decoded = match head2 {
                    Some(j) => symbol ^ side1[j].expect("queued bits are known opposite"),
                    None => symbol,
                };
                rx1[i] = Some(decoded);
                q1.pop_front();
            }
        }
        if !e2 {
            if let Some(j) = head2 {
                let decoded = match head1 {
                    Some(i) => symbol ^ side2[i].expect("queued bits are known opposite"),
                    None => symbol,
                };
                rx2[j] = Some(decoded);
                q2.pop_front();
            }
        }
    }

    // zero-error check: both receivers hold their full messages
    let ok1 = rx1
        .iter()
        .zip(&msg1)
        .all(|(got, want)| got.map(|g| g == *want).unwrap_or(false));
    let ok2 = rx2
        .iter()
        .zip(&msg2)
        .all(|(got, want)| got.map(|g| g == *want).unwrap_or(false));
    assert!(ok1 && ok2, "protocol terminated without full decoding");

    TrialOutcome { slots, queue1_len }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 + 1);
    rng
}

/// Runs `cfg.trials` independent trials and aggregates. Trials use
/// independent counter-based substreams of the seed, so the report does not
/// depend on execution order or thread count.
pub fn simulate(cfg: &SimConfig) -> Result<SimReport> {
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "erasure probability {} outside (0, 1)",
            cfg.eps
        )));
    }
    if cfg.bits_per_user == 0 || cfg.trials == 0 {
        return Err(Error::InvalidParameter(
            "bits_per_user and trials must be positive".into(),
        ));
    }
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cfg.seed, t);
            run_trial(cfg.eps, cfg.bits_per_user, &mut rng)
        })
        .collect();

    let n = cfg.trials as f64;
    let k = cfg.bits_per_user as f64;
    let mean_slots = outcomes.iter().map(|o| o.slots as f64).sum::<f64>() / n;
    let var_slots = if cfg.trials > 1 {
        outcomes
            .iter()
            .map(|o| {
                let d = o.slots as f64 - mean_slots;
                d * d
            })
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    let per_user_rate = k / mean_slots;
    // delta method for g(m) = k / m
    let rate_stderr = k * (var_slots / n).sqrt() / (mean_slots * mean_slots);

    let mean_q1 = outcomes
        .iter()
        .map(|o| o.queue1_len as f64 / k)
        .sum::<f64>()
        / n;
    let var_q1 = if cfg.trials > 1 {
        outcomes
            .iter()
            .map(|o| {
                let d = o.queue1_len as f64 / k - mean_q1;
                d * d
            })
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };

    Ok(SimReport {
        mean_slots,
        per_user_rate,
        rate_stderr,
        analytic_rate: analytic_rate(cfg.eps),
        trials_run: cfg.trials,
        mean_queue1_frac: mean_q1,
        queue1_frac_stderr: (var_q1 / n).sqrt(),
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Independent [`simulate`] runs over an erasure-probability grid, with
/// per-point seeds derived from `(seed, index)`.
pub fn rate_curve(
    eps_list: &[f64],
    bits_per_user: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<(f64, SimReport)>> {
    eps_list
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let cfg = SimConfig {
                eps,
                bits_per_user,
                trials,
                seed: splitmix64(seed ^ ((i as u64 + 1) << 32)),
            };
            simulate(&cfg).map(|r| (eps, r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_configs() {
        for eps in [0.0, 1.0, -0.1, 1.3] {
            let cfg = SimConfig {
                eps,
                bits_per_user: 10,
                trials: 2,
                seed: 0,
            };
            assert!(simulate(&cfg).is_err());
        }
    }

    #[test]
    fn near_zero_erasures_cost_two_slots_per_bit_pair() {
        let cfg = SimConfig {
            eps: 1e-7,
            bits_per_user: 2000,
            trials: 4,
            seed: 11,
        };
        let r = simulate(&cfg).unwrap();
        assert!((r.per_user_rate - 0.5).abs() < 0.01, "{}", r.per_user_rate);
    }

    #[test]
    fn deterministic_given_seed_and_parallel_safe() {
        let cfg = SimConfig {
            eps: 0.5,
            bits_per_user: 500,
            trials: 16,
            seed: 7,
        };
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn converges_to_the_closed_form() {
        let cfg = SimConfig {
            eps: 0.5,
            bits_per_user: 2000,
            trials: 60,
            seed: 3,
        };
        let r = simulate(&cfg).unwrap();
        let rel = (r.per_user_rate - 0.3).abs() / 0.3;
        assert!(rel < 0.03, "relative deviation {rel}");
    }

    #[test]
    fn queue_fraction_matches_geometry() {
        // a phase-A bit queues with probability eps(1-eps) / (1-eps^2)
        let eps = 0.4;
        let cfg = SimConfig {
            eps,
            bits_per_user: 4000,
            trials: 30,
            seed: 5,
        };
        let r = simulate(&cfg).unwrap();
        let expected = eps / (1.0 + eps);
        let dev = (r.mean_queue1_frac - expected).abs();
        assert!(
            dev <= 3.0 * r.queue1_frac_stderr.max(1e-9),
            "dev {dev}, stderr {}",
            r.queue1_frac_stderr
        );
    }

    #[test]
    fn rate_curve_is_reproducible() {
        let grid = [0.3, 0.6];
        let a = rate_curve(&grid, 300, 6, 9).unwrap();
        let b = rate_curve(&grid, 300, 6, 9).unwrap();
        assert_eq!(a, b);
        let c = rate_curve(&grid, 300, 6, 10).unwrap();
        assert_ne!(a[0].1.mean_slots, c[0].1.mean_slots);
    }

    #[test]
    fn longer_messages_concentrate() {
        // average relative deviation from the limit shrinks when k doubles
        let grid = [0.3, 0.5, 0.7];
        let short = rate_curve(&grid, 1000, 24, 21).unwrap();
        let long = rate_curve(&grid, 2000, 24, 22).unwrap();
        let mean_dev = |rs: &[(f64, SimReport)]| {
            rs.iter()
                .map(|(_, r)| ((r.per_user_rate - r.analytic_rate) / r.analytic_rate).abs())
                .sum::<f64>()
                / rs.len() as f64
        };
        let (s, l) = (mean_dev(&short), mean_dev(&long));
        assert!(l < s, "short {s}, long {l}");
    }
}
