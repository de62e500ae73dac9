//! Randomized sweeps behind the `verify` command.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::estimation::trial_rng;
use crate::fisher::{polynomial_generator, theorem1_check, ExponentialFamily};
use crate::random::{random_density_matrix, random_hermitian};
use crate::skew::skew_avg;

use rand::Rng;

pub const BOUND_TOL: f64 = 1e-8;
pub const PARTITION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest relative violation measure; non-positive when every trial passes.
    pub max_relative_violation: f64,
    pub worst_trial: usize,
    pub worst_dim: usize,
    pub seed: u64,
}

fn dim_for(trial: usize, dims: (usize, usize)) -> usize {
    dims.0 + trial % (dims.1 - dims.0 + 1)
}

fn summarize(name: &str, seed: u64, results: Vec<(usize, f64, bool)>) -> SweepSummary {
    let mut worst = (0, 0, f64::NEG_INFINITY);
    let mut violations = 0;
    for (trial, (dim, measure, ok)) in results.iter().enumerate() {
        if !ok {
            violations += 1;
        }
        if *measure > worst.2 {
            worst = (trial, *dim, *measure);
        }
    }
    SweepSummary {
        name: name.into(),
        trials: results.len(),
        violations,
        max_relative_violation: worst.2,
        worst_trial: worst.0,
        worst_dim: worst.1,
        seed,
    }
}

/// `F(θ) ≤ K[ρ_θ, B_θ]` on random families `A₀ + θA₁ + θ²A₂`; the measure is
/// `(F − K)/(1 + K)`.
pub fn theorem1_sweep(trials: usize, dims: (usize, usize), seed: u64) -> Result<SweepSummary> {
    let results = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial as u64);
            let dim = dim_for(trial, dims);
            let coeffs: Vec<_> = (0..3).map(|_| random_hermitian(&mut rng, dim, 1.0)).collect();
            let theta: f64 = rng.random_range(-1.0..1.0);
            let fam = ExponentialFamily::new(polynomial_generator(coeffs));
            let report = theorem1_check(&fam, theta)?;
            let excess = report.relative_excess().unwrap_or(f64::INFINITY);
            Ok((dim, excess, excess <= BOUND_TOL))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize("theorem1", seed, results))
}

/// `Q + K = Var` with independently summed K, non-negativity, and convexity
/// of Q; the measure is the partition residual relative to the variance.
pub fn partition_sweep(trials: usize, dims: (usize, usize), seed: u64) -> Result<SweepSummary> {
    let results = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed ^ 0x05ee_d0f5_ca1e, trial as u64);
            let dim = dim_for(trial, dims);
            let r1 = random_density_matrix(&mut rng, dim);
            let r2 = random_density_matrix(&mut rng, dim);
            let a = random_hermitian(&mut rng, dim, 1.0);
            let p1 = skew_avg(&r1, &a)?;
            let p2 = skew_avg(&r2, &a)?;
            let rel = p1.partition_residual / p1.variance.abs().max(1e-300);
            let mut ok = p1.is_consistent(PARTITION_TOL);
            for lambda in [0.25, 0.5, 0.75] {
                let q = skew_avg(&r1.mix(&r2, lambda)?, &a)?.quantum;
                ok &= q <= lambda * p1.quantum + (1.0 - lambda) * p2.quantum + 1e-9;
            }
            Ok((dim, rel - PARTITION_TOL, ok))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize("partition", seed, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweeps_pass() {
        let t = theorem1_sweep(40, (2, 8), 1).unwrap();
        assert_eq!(t.violations, 0);
        assert!(t.max_relative_violation <= BOUND_TOL);
        let p = partition_sweep(40, (2, 8), 1).unwrap();
        assert_eq!(p.violations, 0);
    }

    #[test]
    fn sweeps_are_deterministic_across_pools() {
        let a = theorem1_sweep(16, (2, 5), 7).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| theorem1_sweep(16, (2, 5), 7).unwrap());
        assert_eq!(a.max_relative_violation.to_bits(), b.max_relative_violation.to_bits());
        assert_eq!(a.worst_trial, b.worst_trial);
    }

    #[test]
    fn dims_cycle_through_range() {
        let dims: Vec<_> = (0..8).map(|t| dim_for(t, (2, 4))).collect();
        assert_eq!(dims, vec![2, 3, 4, 2, 3, 4, 2, 3]);
    }
}
