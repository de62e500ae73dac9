//! Wigner-Yanase-Dyson skew information and the quantum/classical split of
//! a variance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{trace_product, ComplexMatrix, DensityMatrix, HermitianOperator};
use crate::quadrature::{integrate_adaptive, DEFAULT_MAX_EVALUATIONS};

/// Var = Q + K for one (state, observable) pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VariancePartition {
    pub variance: f64,
    pub quantum: f64,
    /// `variance − quantum`.
    pub classical: f64,
    /// |Q + K − Var| with K from its own eigenbasis sum, not from the difference.
    pub partition_residual: f64,
}

impl VariancePartition {
    pub fn is_consistent(&self, rel_tol: f64) -> bool {
        self.quantum >= -1e-10
            && self.classical >= -1e-10
            && self.partition_residual <= rel_tol * self.variance.abs().max(1e-300)
    }
}

fn check_dims(state: &DensityMatrix, obs: &HermitianOperator) -> Result<()> {
    if state.dim() != obs.dim() {
        return Err(Error::Dimension(format!(
            "state dim {} vs observable dim {}",
            state.dim(),
            obs.dim()
        )));
    }
    Ok(())
}

/// `A − ⟨A⟩·I` and `⟨A⟩`.
pub(crate) fn centered(state: &DensityMatrix, obs: &HermitianOperator) -> Result<(HermitianOperator, f64)> {
    let mean = crate::linalg::expectation(state, obs)?;
    Ok((obs.shift(-mean), mean))
}

/// `tr[ρ (A − ⟨A⟩)²]`.
pub fn variance(state: &DensityMatrix, obs: &HermitianOperator) -> Result<f64> {
    check_dims(state, obs)?;
    let (delta, _) = centered(state, obs)?;
    let sq = delta.square();
    Ok(trace_product(state.matrix(), sq.matrix()).re)
}

/// Q_a = −½ tr([A, ρ^a][A, ρ^{1−a}]) for 0 < a < 1.
pub fn skew_a(state: &DensityMatrix, obs: &HermitianOperator, a: f64) -> Result<f64> {
    check_dims(state, obs)?;
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!("skew exponent a = {a} outside (0, 1)")));
    }
    let left = obs.commutator(&state.power(a));
    let right = obs.commutator(&state.power(1.0 - a));
    Ok(-0.5 * trace_product(&left, &right).re)
}

/// `Σ_{k≥2} (k−1) Δ^k / (k+1)!`, equal to `e^Δ + 1 − 2(e^Δ − 1)/Δ`.
fn skew_weight_series(delta: f64) -> f64 {
    let mut term = delta * delta / 6.0; // Δ^k/(k+1)! at k = 2
    let mut sum = term;
    let mut k = 2.0;
    loop {
        term *= delta / (k + 2.0);
        k += 1.0;
        let add = (k - 1.0) * term;
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            return sum;
        }
    }
}

/// Pair weight `p + q − 2(p − q)/(ln p − ln q)` of the averaged skew information.
pub fn skew_pair_weight(p: f64, q: f64) -> f64 {
    let (hi, lo) = if p >= q { (p, q) } else { (q, p) };
    let delta = hi.ln() - lo.ln();
    if delta < 0.1 {
        lo * skew_weight_series(delta)
    } else {
        hi + lo - 2.0 * (hi - lo) / delta
    }
}

/// Logarithmic mean `(p − q)/(ln p − ln q)`, with `L(p, p) = p`.
pub fn log_mean(p: f64, q: f64) -> f64 {
    if p <= 0.0 || q <= 0.0 {
        return 0.0;
    }
    let delta = p.ln() - q.ln();
    if delta == 0.0 {
        return p;
    }
    q * delta.exp_m1() / delta
}

/// Averaged Q and K from eigenvalues `probs` and matrix elements `b` of the
/// observable in the eigenbasis of the state.
pub(crate) fn partition_in_eigenbasis(probs: &[f64], b: &ComplexMatrix) -> VariancePartition {
    let n = probs.len();
    let mean: f64 = (0..n).map(|i| probs[i] * b[(i, i)].re).sum();
    let mut diag = 0.0;
    for i in 0..n {
        let d = b[(i, i)].re - mean;
        diag += probs[i] * d * d;
    }
    let mut quantum = 0.0;
    let mut classical_off = 0.0;
    let mut variance_off = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let m2 = b[(i, j)].norm_sqr();
            quantum += skew_pair_weight(probs[i], probs[j]) * m2;
            classical_off += 2.0 * log_mean(probs[i], probs[j]) * m2;
            variance_off += (probs[i] + probs[j]) * m2;
        }
    }
    let variance = diag + variance_off;
    let classical_direct = diag + classical_off;
    VariancePartition {
        variance,
        quantum,
        classical: variance - quantum,
        partition_residual: (quantum + classical_direct - variance).abs(),
    }
}

/// Averaged skew information `Q = ∫₀¹ Q_a da` and its complement `K`,
/// from the eigenbasis closed form. Requires a full-rank state.
pub fn skew_avg(state: &DensityMatrix, obs: &HermitianOperator) -> Result<VariancePartition> {
    check_dims(state, obs)?;
    state.require_full_rank()?;
    let b = obs.in_basis(&state.spectrum().eigenvectors);
    let mut part = partition_in_eigenbasis(state.probabilities(), &b);
    // the eigenbasis variance agrees with the direct one; keep the direct one
    // so that `variance` means the same thing everywhere
    let direct = variance(state, obs)?;
    part.partition_residual = (part.partition_residual + (direct - part.variance).abs()).abs();
    part.classical = direct - part.quantum;
    part.variance = direct;
    Ok(part)
}

/// `∫₀¹ Q_a da` by adaptive Gauss-Legendre quadrature of [`skew_a`].
pub fn skew_avg_quadrature(state: &DensityMatrix, obs: &HermitianOperator, abs_tol: f64) -> Result<f64> {
    check_dims(state, obs)?;
    state.require_full_rank()?;
    if !(abs_tol >= 1e-12) {
        return Err(Error::Domain(format!("quadrature tolerance {abs_tol:e} below 1e-12")));
    }
    integrate_adaptive(|a| skew_a(state, obs, a), 0.0, 1.0, abs_tol, DEFAULT_MAX_EVALUATIONS)
        .map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density_matrix, random_hermitian, random_state_vector};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit(p: f64) -> DensityMatrix {
        DensityMatrix::new(HermitianOperator::from_diagonal(&[p, 1.0 - p])).unwrap()
    }

    #[test]
    fn variance_examples() {
        let sx = HermitianOperator::pauli_x();
        assert!((variance(&DensityMatrix::maximally_mixed(2), &sx).unwrap() - 1.0).abs() < 1e-15);
        let up = qubit(1.0);
        assert!(variance(&up, &HermitianOperator::pauli_z()).unwrap().abs() < 1e-15);
    }

    #[test]
    fn variance_matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density_matrix(&mut rng, 4);
        let a = random_hermitian(&mut rng, 4, 1.0);
        // Σ_{nm} p_n |A_nm|² − (Σ_n p_n A_nn)²
        let b = a.in_basis(&rho.spectrum().eigenvectors);
        let p = rho.probabilities();
        let mut second = 0.0;
        let mut first = 0.0;
        for n in 0..4 {
            first += p[n] * b[(n, n)].re;
            for m in 0..4 {
                second += p[n] * b[(n, m)].norm_sqr();
            }
        }
        assert!((variance(&rho, &a).unwrap() - (second - first * first)).abs() < 1e-10);
    }

    #[test]
    fn skew_a_qubit_closed_form() {
        let (p, q) = (0.75_f64, 0.25_f64);
        let rho = qubit(p);
        let sx = HermitianOperator::pauli_x();
        for &a in &[0.1, 0.3, 0.5, 0.77] {
            let oracle = 1.0 - (p.powf(a) * q.powf(1.0 - a) + p.powf(1.0 - a) * q.powf(a));
            assert!((skew_a(&rho, &sx, a).unwrap() - oracle).abs() < 1e-14);
        }
        assert!((skew_a(&rho, &sx, 0.5).unwrap() - 0.133_974_596_215_561_35).abs() < 1e-12);
    }

    #[test]
    fn skew_a_rejects_bad_exponent() {
        let rho = qubit(0.6);
        let sx = HermitianOperator::pauli_x();
        for a in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(skew_a(&rho, &sx, a), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn skew_a_commuting_and_pure() {
        let rho = qubit(0.3);
        assert!(skew_a(&rho, &HermitianOperator::pauli_z(), 0.4).unwrap().abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = random_state_vector(&mut rng, 3);
        let pure = DensityMatrix::pure(&psi).unwrap();
        let a = random_hermitian(&mut rng, 3, 1.0);
        let var = variance(&pure, &a).unwrap();
        for &x in &[0.2, 0.5, 0.9] {
            assert!((skew_a(&pure, &a, x).unwrap() - var).abs() < 1e-10);
        }
    }

    #[test]
    fn skew_avg_qubit() {
        let part = skew_avg(&qubit(0.75), &HermitianOperator::pauli_x()).unwrap();
        let oracle = 1.0 - 2.0 * 0.5 / 3.0_f64.ln();
        assert!((part.quantum - oracle).abs() < 1e-14);
        assert!((part.quantum - 0.089761).abs() < 1e-6);
        assert!((part.classical - 0.910239).abs() < 1e-6);
        assert!((part.variance - 1.0).abs() < 1e-15);
    }

    #[test]
    fn skew_avg_maximally_mixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(&mut rng, 5, 1.0);
        let part = skew_avg(&DensityMatrix::maximally_mixed(5), &a).unwrap();
        assert!(part.quantum.abs() < 1e-15);
        assert!((part.classical - part.variance).abs() < 1e-14);
    }

    #[test]
    fn skew_avg_requires_full_rank() {
        let pure = DensityMatrix::pure(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        assert!(matches!(
            skew_avg(&pure, &HermitianOperator::pauli_x()),
            Err(Error::RankDeficient { .. })
        ));
        // the commutator form does not need full rank
        assert!((skew_a(&pure, &HermitianOperator::pauli_x(), 0.5).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn skew_avg_random_five_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_density_matrix(&mut rng, 5);
        let a = random_hermitian(&mut rng, 5, 1.0);
        let closed = skew_avg(&rho, &a).unwrap().quantum;
        let quad = skew_avg_quadrature(&rho, &a, 1e-10).unwrap();
        assert!((closed - quad).abs() < 1e-8, "{closed} vs {quad}");
    }

    #[test]
    fn quadrature_examples() {
        let rho = qubit(0.75);
        let oracle = 1.0 - 2.0 * 0.5 / 3.0_f64.ln();
        let q = skew_avg_quadrature(&rho, &HermitianOperator::pauli_x(), 1e-11).unwrap();
        assert!((q - oracle).abs() < 1e-11);
        let zero = skew_avg_quadrature(&rho, &HermitianOperator::pauli_z(), 1e-12).unwrap();
        assert!(zero.abs() < 1e-12);
        assert!(skew_avg_quadrature(&rho, &HermitianOperator::pauli_z(), 1e-13).is_err());
    }

    #[test]
    fn pair_weight_continuous_across_threshold() {
        let q = 0.2;
        for &d in &[0.0999999, 0.1, 0.1000001] {
            let p = q * f64::exp(d);
            let direct = p + q - 2.0 * (p - q) / d;
            assert!((skew_pair_weight(p, q) - direct).abs() < 1e-15, "d={d}");
        }
        // leading order (p + q) Δ²/12
        let d: f64 = 1e-6;
        let w = skew_pair_weight(q * d.exp(), q);
        assert!((w / ((2.0 * q + q * d) * d * d / 12.0) - 1.0).abs() < 1e-6);
        assert_eq!(skew_pair_weight(0.3, 0.3), 0.0);
    }

    #[test]
    fn log_mean_values() {
        assert_eq!(log_mean(0.4, 0.4), 0.4);
        assert!((log_mean(0.75, 0.25) - 0.5 / 3.0_f64.ln()).abs() < 1e-15);
        assert!((log_mean(0.25, 0.75) - 0.5 / 3.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn pure_state_limit_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 4;
        let psi = random_state_vector(&mut rng, d);
        let pure = DensityMatrix::pure(&psi).unwrap();
        let a = random_hermitian(&mut rng, d, 1.0);
        let mixed = DensityMatrix::maximally_mixed(d);
        let mut last_k = f64::INFINITY;
        let mut first_k = None;
        for &eps in &[1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
            let rho = pure.mix(&mixed, 1.0 - eps).unwrap();
            let part = skew_avg(&rho, &a).unwrap();
            assert!(part.classical < last_k, "K not decreasing at eps={eps}");
            last_k = part.classical;
            first_k.get_or_insert(last_k);
            let var_pure = variance(&pure, &a).unwrap();
            assert!((part.quantum + part.classical - part.variance).abs() < 1e-12);
            assert!(part.variance > 0.0 && var_pure > 0.0);
        }
        // K decays only like 1/ln(1/ε)
        assert!(last_k < 0.5 * first_k.unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn partition_identity(seed in any::<u64>(), dim in 2usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density_matrix(&mut rng, dim);
            let a = random_hermitian(&mut rng, dim, 1.0);
            let part = skew_avg(&rho, &a).unwrap();
            prop_assert!(part.is_consistent(1e-9), "{part:?}");
        }

        #[test]
        fn a_symmetry(seed in any::<u64>(), a in 0.01f64..0.99) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density_matrix(&mut rng, 3);
            let obs = random_hermitian(&mut rng, 3, 1.0);
            let lhs = skew_a(&rho, &obs, a).unwrap();
            let rhs = skew_a(&rho, &obs, 1.0 - a).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
            prop_assert!(lhs >= -1e-10);
        }

        #[test]
        fn convexity(seed in any::<u64>(), dim in 2usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r1 = random_density_matrix(&mut rng, dim);
            let r2 = random_density_matrix(&mut rng, dim);
            let a = random_hermitian(&mut rng, dim, 1.0);
            let q1 = skew_avg(&r1, &a).unwrap().quantum;
            let q2 = skew_avg(&r2, &a).unwrap().quantum;
            for &lambda in &[0.25, 0.5, 0.75] {
                let mix = r1.mix(&r2, lambda).unwrap();
                let q = skew_avg(&mix, &a).unwrap().quantum;
                prop_assert!(q <= lambda * q1 + (1.0 - lambda) * q2 + 1e-9);
            }
        }

        #[test]
        fn unitary_invariance(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density_matrix(&mut rng, 4);
            let a = random_hermitian(&mut rng, 4, 1.0);
            let u = crate::random::random_unitary(&mut rng, 4);
            let rho_u = DensityMatrix::new(HermitianOperator::from_basis(rho.matrix(), &u)).unwrap();
            let a_u = HermitianOperator::from_basis(a.matrix(), &u);
            let q = skew_avg(&rho, &a).unwrap().quantum;
            let qu = skew_avg(&rho_u, &a_u).unwrap().quantum;
            prop_assert!((q - qu).abs() <= 1e-10 * (1.0 + q));
        }
    }
}
