//! Randomized equivalence checks of the fast kernels against direct
//! evaluation: axis-sweep prefix sums against brute-force summation, the
//! maximal partial norm against a scan of the brute-force sums, and `φ`
//! against its hinge-sum form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hilbert;
use crate::lattice::{max_partial_norm, prefix_sums, prefix_sums_bruteforce, LatticeSample, MultiIndex};
use crate::poussin::{phi_eval, u_from_thresholds, PhiFunction};
use crate::rng;

/// Relative tolerance for floating comparisons.
pub const ORACLE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Counterexample {
    PrefixSum { sample: LatticeSample, offset: usize, fast: Vec<f64>, direct: Vec<f64> },
    MaxNorm { sample: LatticeSample, fast: f64, direct: f64 },
    Phi { thresholds: Vec<u64>, n_max: usize, t: f64, fast: f64, direct: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub trials: usize,
    pub seed: u64,
    pub comparisons: u64,
    /// Largest relative discrepancy seen among the prefix sums.
    pub max_rel_err: f64,
    pub counterexample: Option<Counterexample>,
}

impl OracleOutcome {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// A random case with `d ∈ {1, 2, 3}`, `n_i ≤ 4` and `D ∈ {1, 4}`, values
/// spread over several orders of magnitude.
pub fn random_case(seed: u64, trial: u64) -> LatticeSample {
    let mut r = rng::stream(seed, &[0x0ac1e, trial]);
    let d = r.random_range(1..=3usize);
    let coords: Vec<u64> = (0..d).map(|_| r.random_range(1..=4u64)).collect();
    let dim = if r.random::<bool>() { 1 } else { 4 };
    let n = MultiIndex::new(coords).expect("positive coordinates");
    let cells = n.size() as usize * dim;
    let data = (0..cells)
        .map(|_| {
            let mag = 10f64.powi(r.random_range(-3..=3));
            mag * r.random_range(-1.0..1.0)
        })
        .collect();
    LatticeSample::new(n, dim, data).expect("consistent shape")
}

fn rel_err(fast: &[f64], direct: &[f64], scale: f64) -> f64 {
    let diff: f64 = fast.iter().zip(direct).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    diff / hilbert::norm(direct).max(scale).max(f64::MIN_POSITIVE)
}

/// Runs `trials` prefix-sum cases and `trials` `φ` cases. With
/// `inject_fault` the fast prefix sums of the first case are perturbed, so
/// the suite must report it.
pub fn run_oracle_suite(trials: usize, seed: u64, inject_fault: bool) -> Result<OracleOutcome> {
    if trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let mut out = OracleOutcome { trials, seed, comparisons: 0, max_rel_err: 0.0, counterexample: None };
    for trial in 0..trials as u64 {
        let sample = random_case(seed, trial);
        let mut fast = prefix_sums(&sample);
        if inject_fault && trial == 0 {
            let last = fast.len() - 1;
            fast.cell_mut(last)[0] += 1.0;
        }
        let direct = prefix_sums_bruteforce(&sample)?;
        let scale = sample.norms().into_iter().fold(0.0, f64::max);
        for o in 0..sample.len() {
            out.comparisons += 1;
            let e = rel_err(fast.cell(o), direct.cell(o), scale);
            out.max_rel_err = out.max_rel_err.max(e);
            if !(e <= ORACLE_RTOL) {
                out.counterexample = Some(Counterexample::PrefixSum {
                    sample,
                    offset: o,
                    fast: fast.cell(o).to_vec(),
                    direct: direct.cell(o).to_vec(),
                });
                return Ok(out);
            }
        }
        let fast_max = max_partial_norm(&sample);
        let direct_max = direct.norms().into_iter().fold(0.0, f64::max);
        out.comparisons += 1;
        if (fast_max - direct_max).abs() > ORACLE_RTOL * direct_max.max(scale) {
            out.counterexample = Some(Counterexample::MaxNorm { sample, fast: fast_max, direct: direct_max });
            return Ok(out);
        }
    }
    for trial in 0..trials as u64 {
        let mut r = rng::stream(seed, &[0x9f1, trial]);
        let k = r.random_range(1..=8usize);
        let thresholds: Vec<u64> = (0..k).map(|_| r.random_range(1..=60u64)).collect();
        let n_max = r.random_range(1..=80usize);
        let phi = PhiFunction::new(u_from_thresholds(&thresholds, n_max)?)?;
        for _ in 0..16 {
            let t = if r.random::<bool>() {
                r.random_range(0..=n_max) as f64
            } else {
                r.random_range(0.0..n_max as f64)
            };
            let direct: f64 = thresholds.iter().map(|&nj| (t - nj as f64).max(0.0)).sum();
            let fast = phi_eval(&phi, t)?;
            out.comparisons += 1;
            if (fast - direct).abs() > ORACLE_RTOL * direct.max(1.0) {
                out.counterexample = Some(Counterexample::Phi { thresholds, n_max, t, fast, direct });
                return Ok(out);
            }
        }
    }
    Ok(out)
}
