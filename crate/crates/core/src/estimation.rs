//! Monte-Carlo parameter estimation: projective measurement in the SLD
//! eigenbasis, multinomial sampling, maximum-likelihood estimate per trial.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fisher::{classical_fisher, qfi, StateFamily};
use crate::linalg::{eigh, ComplexMatrix, DensityMatrix};

#[derive(Clone, Debug)]
pub struct EstimationConfig {
    /// Search interval; defaults to `[θ/10, 10θ]`.
    pub bracket: Option<(f64, f64)>,
    /// Number of equal sub-brackets searched independently.
    pub starts: usize,
    /// Golden-section stops when the interval is below `tol·(1 + |θ|)`.
    pub tol: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            bracket: None,
            starts: 3,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimationStats {
    pub theta_true: f64,
    pub n_samples: usize,
    pub n_trials: usize,
    pub mean_estimate: f64,
    /// Unbiased sample variance of the estimates (NaN for a single trial).
    pub variance: f64,
    pub qfi_at_true: f64,
    /// Fisher information of the outcome distribution at the true value.
    pub classical_fisher: f64,
    #[serde(skip)]
    pub estimates: Vec<f64>,
}

impl EstimationStats {
    /// `n·Var(θ̂)·F`, which tends to 1 for an efficient estimator.
    pub fn crb_ratio(&self) -> f64 {
        self.n_samples as f64 * self.variance * self.qfi_at_true
    }
}

/// Outcome probabilities `⟨ξ|ρ|ξ⟩` for the columns of `basis`.
pub fn outcome_probabilities(state: &DensityMatrix, basis: &ComplexMatrix) -> Vec<f64> {
    let rho = state.operator().in_basis(basis);
    // clamp roundoff negatives but let NaN through
    let raw: Vec<f64> = (0..basis.ncols()).map(|k| if rho[(k, k)].re < 0.0 { 0.0 } else { rho[(k, k)].re }).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Multinomial counts from `n` draws of `probs`.
pub fn sample_counts<R: Rng + ?Sized>(rng: &mut R, probs: &[f64], n: usize) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let last = probs.len() - 1;
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let k = cdf.partition_point(|&c| c <= u).min(last);
        counts[k] += 1;
    }
    counts
}

/// Outcome probabilities keyed by the exact parameter value. Every trial
/// searches the same bracket, so many golden-section points recur.
struct ProbabilityCache<'a, F: ?Sized> {
    family: &'a F,
    basis: &'a ComplexMatrix,
    entries: Mutex<HashMap<u64, Option<Arc<Vec<f64>>>>>,
}

const CACHE_CAPACITY: usize = 1 << 14;

impl<'a, F: StateFamily + ?Sized> ProbabilityCache<'a, F> {
    fn new(family: &'a F, basis: &'a ComplexMatrix) -> Self {
        Self {
            family,
            basis,
            entries: Mutex::new(HashMap::new()),
        }
    }

    fn get(&self, theta: f64) -> Option<Arc<Vec<f64>>> {
        let key = theta.to_bits();
        if let Some(hit) = self.entries.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let probs = self.family.outcome_probabilities(theta, self.basis).ok().map(Arc::new);
        let mut entries = self.entries.lock().unwrap();
        if entries.len() < CACHE_CAPACITY {
            entries.insert(key, probs.clone());
        }
        probs
    }

    fn log_likelihood(&self, counts: &[u64], theta: f64) -> f64 {
        let Some(probs) = self.get(theta) else {
            return f64::NEG_INFINITY;
        };
        let mut ll = 0.0;
        for (&c, &p) in counts.iter().zip(probs.iter()) {
            if c == 0 {
                continue;
            }
            if !(p > 0.0) {
                return f64::NEG_INFINITY;
            }
            ll += c as f64 * p.ln();
        }
        ll
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_section(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximum-likelihood estimate from outcome counts by multi-start golden-section search.
pub fn maximum_likelihood<F: StateFamily + ?Sized>(
    family: &F,
    basis: &ComplexMatrix,
    counts: &[u64],
    bracket: (f64, f64),
    config: &EstimationConfig,
) -> Result<f64> {
    cached_maximum_likelihood(&ProbabilityCache::new(family, basis), counts, bracket, config)
}

fn cached_maximum_likelihood<F: StateFamily + ?Sized>(
    cache: &ProbabilityCache<'_, F>,
    counts: &[u64],
    bracket: (f64, f64),
    config: &EstimationConfig,
) -> Result<f64> {
    let (lo, hi) = bracket;
    let starts = config.starts.max(1);
    let width = (hi - lo) / starts as f64;
    let scale = 1.0 + lo.abs().max(hi.abs());
    let tol = config.tol * scale;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for s in 0..starts {
        let a = lo + width * s as f64;
        let b = if s + 1 == starts { hi } else { a + width };
        let cand = golden_section(|t| cache.log_likelihood(counts, t), a, b, tol);
        if cand.1 > best.1 {
            best = cand;
        }
    }
    let edge = 4.0 * tol;
    if !best.1.is_finite() || best.0 - lo < edge || hi - best.0 < edge {
        return Err(Error::BracketExhausted {
            lo,
            hi,
            ll_lo: cache.log_likelihood(counts, lo),
            ll_hi: cache.log_likelihood(counts, hi),
        });
    }
    Ok(best.0)
}

/// Per-trial generator: stream `trial` of the ChaCha8 generator seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Repeats `n_trials` independent estimation experiments of `n_samples` shots each.
pub fn simulate_estimation<F: StateFamily + ?Sized>(
    family: &F,
    theta_true: f64,
    n_samples: usize,
    n_trials: usize,
    seed: u64,
    config: &EstimationConfig,
) -> Result<EstimationStats> {
    if n_samples == 0 || n_trials == 0 {
        return Err(Error::Domain("n_samples and n_trials must be at least 1".into()));
    }
    let bracket = match config.bracket {
        Some(b) => b,
        None if theta_true > 0.0 => (theta_true / 10.0, theta_true * 10.0),
        None => {
            return Err(Error::Domain(format!(
                "default bracket needs a positive parameter, got {theta_true}"
            )))
        }
    };
    let report = qfi(family, theta_true)?;
    if report.qfi < 1e-12 {
        return Err(Error::ZeroInformation(format!(
            "quantum Fisher information {:e} at theta = {theta_true}",
            report.qfi
        )));
    }
    let state = family.evaluate(theta_true)?;
    let basis = eigh(&report.sld)?.eigenvectors;
    let probs = family.outcome_probabilities(theta_true, &basis)?;
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric(format!("non-finite outcome probabilities at theta = {theta_true}")));
    }
    let derivative = family.state_derivative(theta_true)?;
    let cfi = classical_fisher(&state, &derivative, &basis);

    let cache = ProbabilityCache::new(family, &basis);
    let estimates: Vec<f64> = (0..n_trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let counts = sample_counts(&mut rng, &probs, n_samples);
            cached_maximum_likelihood(&cache, &counts, bracket, config)
        })
        .collect::<Result<_>>()?;

    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let variance = if estimates.len() > 1 {
        estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        f64::NAN
    };
    Ok(EstimationStats {
        theta_true,
        n_samples,
        n_trials,
        mean_estimate: mean,
        variance,
        qfi_at_true: report.qfi,
        classical_fisher: cfi,
        estimates,
    })
}
