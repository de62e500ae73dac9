//! Seeded random operators and states for property sweeps.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{ComplexMatrix, DensityMatrix, HermitianOperator};

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// GUE-like hermitian matrix with entries of size `scale/√d`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> HermitianOperator {
    let s = scale / (dim as f64).sqrt();
    let mut m = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = Complex64::new(s * normal(rng), 0.0);
        for j in (i + 1)..dim {
            let z = Complex64::new(normal(rng), normal(rng)) * (s * std::f64::consts::FRAC_1_SQRT_2);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    HermitianOperator::hermitize(m)
}

/// `G G†/tr(G G†)` with complex Ginibre `G`; full rank with probability one.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| Complex64::new(normal(rng), normal(rng)));
    let op = HermitianOperator::hermitize(&g * g.adjoint());
    DensityMatrix::from_unnormalized(op).expect("Ginibre state is positive")
}

/// Haar-ish random unit vector.
pub fn random_state_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(normal(rng), normal(rng)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Random unitary from the eigenvectors of a random hermitian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    crate::linalg::eigh(&random_hermitian(rng, dim, 1.0))
        .expect("random hermitian diagonalizes")
        .eigenvectors
}
