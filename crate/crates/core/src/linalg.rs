//! Dense complex hermitian linear algebra.
//!
//! Everything above this layer works with [`HermitianOperator`] and
//! [`DensityMatrix`] values. Both are immutable after construction; the
//! density matrix carries its own spectral decomposition since nearly every
//! consumer (skew information, Fisher information, matrix powers) needs it.
//!
//! Composite spaces use the row-major tensor convention with the system
//! factor first: `(A ⊗ B)[i·d_B + k, j·d_B + l] = A[i, j]·B[k, l]`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Eigenvalues below this floor are treated as exact zeros by fractional
/// powers and rejected by logarithms.
pub const EPS_RANK: f64 = 1e-14;

/// Largest dimension any operator may have.
pub const MAX_DIM: usize = 4096;

const HERMITIAN_REJECT: f64 = 1e-8;
const TRACE_TOL: f64 = 1e-12;
const NEGATIVE_CLAMP: f64 = 1e-12;
const EIGH_EPS: f64 = 1e-15;
const EIGH_MAX_ITER: usize = 10_000;

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest entrywise modulus of a matrix difference.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Self-adjoint operator on a finite-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    /// Validates and symmetrizes `matrix` as `(M + M†)/2`.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::Dimension(format!("matrix is {rows}x{cols}, not square")));
        }
        if rows == 0 {
            return Err(Error::Dimension("empty matrix".into()));
        }
        if rows > MAX_DIM {
            return Err(Error::TooLarge { dim: rows, cap: MAX_DIM });
        }
        for j in 0..cols {
            for i in 0..rows {
                let z = matrix[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        let scale = max_abs(&matrix);
        let adjoint = matrix.adjoint();
        let asymmetry = max_abs_diff(&matrix, &adjoint);
        if asymmetry > HERMITIAN_REJECT * (1.0 + scale) {
            return Err(Error::NotHermitian { asymmetry, scale });
        }
        Ok(Self::hermitize(matrix))
    }

    /// Symmetrizes without validation. Callers guarantee hermiticity up to roundoff.
    pub(crate) fn hermitize(matrix: ComplexMatrix) -> Self {
        let adjoint = matrix.adjoint();
        Self {
            matrix: (matrix + adjoint).scale(0.5),
        }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rows of unequal length".into()));
        }
        Self::new(ComplexMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j], 0.0)))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            matrix: ComplexMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::zeros(dim, dim),
        }
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    pub fn pauli_y() -> Self {
        let i = Complex64::new(0.0, 1.0);
        let z = Complex64::new(0.0, 0.0);
        Self {
            matrix: ComplexMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        }
    }

    pub fn pauli_z() -> Self {
        Self::from_diagonal(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            matrix: self.matrix.scale(factor),
        }
    }

    /// `self + shift·I`.
    pub fn shift(&self, shift: f64) -> Self {
        let mut matrix = self.matrix.clone();
        for i in 0..self.dim() {
            matrix[(i, i)] += Complex64::new(shift, 0.0);
        }
        Self { matrix }
    }

    /// `[self, other]`, which is anti-hermitian.
    pub fn commutator(&self, other: &Self) -> ComplexMatrix {
        &self.matrix * &other.matrix - &other.matrix * &self.matrix
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        Self::hermitize(&self.matrix * &other.matrix + &other.matrix * &self.matrix)
    }

    /// Product `self·other·self`, hermitian whenever both factors are.
    pub fn sandwich(&self, other: &Self) -> Self {
        Self::hermitize(&self.matrix * &other.matrix * &self.matrix)
    }

    pub fn square(&self) -> Self {
        Self::hermitize(&self.matrix * &self.matrix)
    }

    /// Matrix elements `U† A U` in the basis given by the columns of `basis`.
    pub fn in_basis(&self, basis: &ComplexMatrix) -> ComplexMatrix {
        basis.adjoint() * &self.matrix * basis
    }

    /// Inverse of [`in_basis`](Self::in_basis): `U M U†`, symmetrized.
    pub fn from_basis(elements: &ComplexMatrix, basis: &ComplexMatrix) -> Self {
        Self::hermitize(basis * elements * basis.adjoint())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_diff(&self.matrix, &other.matrix)
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "operator dims {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}

impl Neg for &HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        self.scale(-1.0)
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ f(λ_n) |ψ_n⟩⟨ψ_n|` without domain checks.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let n = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        HermitianOperator::hermitize(scaled * self.eigenvectors.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.map(|x| x)
    }

    /// Largest entry of `U†U − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.eigenvectors.adjoint() * &self.eigenvectors;
        let n = self.dim();
        max_abs_diff(&gram, &ComplexMatrix::identity(n, n))
    }
}

/// Hermitian eigendecomposition, eigenvalues sorted descending.
///
/// Within (numerically) degenerate eigenvalue groups the eigenvectors are
/// re-orthonormalized by modified Gram-Schmidt in index order, and every
/// column is phase-fixed so that its largest component is real positive.
/// Relative magnitude below which entries are treated as zero by [`eigh`];
/// far under double resolution, but keeps products of tail entries normal.
const SUBNORMAL_FLUSH: f64 = 1e-30;

pub fn eigh(op: &HermitianOperator) -> Result<SpectralDecomposition> {
    let n = op.dim();
    let norm = op.max_abs();
    // Subnormal entries make the QR sweeps produce NaN, so work at unit scale
    // (exact power of two) with negligible entries flushed to zero.
    let scale = if norm > 0.0 { 2f64.powi(norm.log2().round() as i32) } else { 1.0 };
    let scaled = op.matrix.map(|z| {
        let z = z / scale;
        if z.norm() < SUBNORMAL_FLUSH {
            Complex64::new(0.0, 0.0)
        } else {
            z
        }
    });
    let eig = scaled
        .try_symmetric_eigen(EIGH_EPS, EIGH_MAX_ITER)
        .filter(|e| e.eigenvalues.iter().all(|x| x.is_finite()) && e.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or(Error::NoConvergence { dim: n, norm })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k] * scale).collect();
    let mut vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);

    let scale = eigenvalues.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let degenerate_tol = 1e-12 * (1.0 + scale);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (eigenvalues[end - 1] - eigenvalues[end]).abs() <= degenerate_tol {
            end += 1;
        }
        if end - start > 1 {
            gram_schmidt(&mut vectors, start, end);
        }
        start = end;
    }
    for j in 0..n {
        fix_phase(&mut vectors, j);
    }

    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}

fn gram_schmidt(v: &mut ComplexMatrix, start: usize, end: usize) {
    let n = v.nrows();
    for j in start..end {
        for k in start..j {
            let mut overlap = Complex64::new(0.0, 0.0);
            for i in 0..n {
                overlap += v[(i, k)].conj() * v[(i, j)];
            }
            for i in 0..n {
                let vik = v[(i, k)];
                v[(i, j)] -= overlap * vik;
            }
        }
        let norm = (0..n).map(|i| v[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            v[(i, j)] /= norm;
        }
    }
}

fn fix_phase(v: &mut ComplexMatrix, j: usize) {
    let n = v.nrows();
    let mut best = 0;
    let mut best_mod = -1.0;
    for i in 0..n {
        let m = v[(i, j)].norm();
        if m > best_mod + 1e-12 {
            best = i;
            best_mod = m;
        }
    }
    if best_mod > 0.0 {
        let phase = v[(best, j)].conj() / best_mod;
        for i in 0..n {
            v[(i, j)] *= phase;
        }
    }
}

/// `U f(Λ) U†`; errors when `f` is not finite somewhere on the spectrum.
pub fn matrix_function(op: &HermitianOperator, f: impl Fn(f64) -> f64) -> Result<HermitianOperator> {
    let spectrum = eigh(op)?;
    spectral_function(&spectrum, f)
}

pub(crate) fn spectral_function(
    spectrum: &SpectralDecomposition,
    f: impl Fn(f64) -> f64,
) -> Result<HermitianOperator> {
    for &lambda in &spectrum.eigenvalues {
        if !f(lambda).is_finite() {
            return Err(Error::SpectrumDomain { eigenvalue: lambda });
        }
    }
    Ok(spectrum.map(f))
}

pub fn exp_op(op: &HermitianOperator) -> Result<HermitianOperator> {
    matrix_function(op, f64::exp)
}

/// Natural logarithm; every eigenvalue must exceed [`EPS_RANK`].
pub fn ln_op(op: &HermitianOperator) -> Result<HermitianOperator> {
    let spectrum = eigh(op)?;
    if let Some(&bad) = spectrum.eigenvalues.iter().find(|&&x| x <= EPS_RANK) {
        return Err(Error::SpectrumDomain { eigenvalue: bad });
    }
    Ok(spectrum.map(f64::ln))
}

/// Fractional power of a positive semidefinite operator. Eigenvalues in
/// `[-EPS_RANK, EPS_RANK]` count as zero.
pub fn pow_op(op: &HermitianOperator, exponent: f64) -> Result<HermitianOperator> {
    let spectrum = eigh(op)?;
    if let Some(&bad) = spectrum.eigenvalues.iter().find(|&&x| x < -EPS_RANK) {
        return Err(Error::SpectrumDomain { eigenvalue: bad });
    }
    Ok(spectrum.map(|x| floored_pow(x, exponent)))
}

pub(crate) fn floored_pow(x: f64, exponent: f64) -> f64 {
    if x <= EPS_RANK {
        if exponent == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        x.powf(exponent)
    }
}

/// Tensor product `a ⊗ b`, system factor first.
pub fn kron(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    let dim = a.dim() * b.dim();
    if dim > MAX_DIM {
        return Err(Error::TooLarge { dim, cap: MAX_DIM });
    }
    Ok(HermitianOperator {
        matrix: a.matrix.kronecker(&b.matrix),
    })
}

/// Partial trace over the second (reservoir) factor.
pub fn partial_trace_r(op: &HermitianOperator, dim_s: usize, dim_r: usize) -> Result<HermitianOperator> {
    Ok(HermitianOperator::hermitize(partial_trace_r_matrix(
        op.matrix(),
        dim_s,
        dim_r,
    )?))
}

pub(crate) fn partial_trace_r_matrix(m: &ComplexMatrix, dim_s: usize, dim_r: usize) -> Result<ComplexMatrix> {
    if m.nrows() != dim_s * dim_r || m.ncols() != dim_s * dim_r {
        return Err(Error::Dimension(format!(
            "operator dim {} is not {dim_s}x{dim_r}",
            m.nrows()
        )));
    }
    Ok(ComplexMatrix::from_fn(dim_s, dim_s, |i, j| {
        (0..dim_r).map(|k| m[(i * dim_r + k, j * dim_r + k)]).sum()
    }))
}

/// `tr[ρ A]` for hermitian `ρ`, `A` given as raw matrices.
pub(crate) fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `⟨A⟩ = tr[ρ A]`. The imaginary residue is checked against `1e-10` (scaled) and dropped.
pub fn expectation(state: &DensityMatrix, obs: &HermitianOperator) -> Result<f64> {
    state.operator().check_same_dim(obs)?;
    let value = trace_product(state.matrix(), obs.matrix());
    if value.im.abs() > 1e-10 * (1.0 + obs.max_abs()) {
        return Err(Error::Numeric(format!(
            "expectation has imaginary residue {:e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// Positive semidefinite, unit-trace operator together with its spectrum.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: HermitianOperator,
    spectrum: SpectralDecomposition,
}

impl DensityMatrix {
    /// Validates trace and positivity; eigenvalues in `[-1e-12, 0)` are clamped to zero.
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let trace = op.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {trace} differs from 1")));
        }
        let spectrum = eigh(&op)?;
        let min = spectrum.eigenvalues.last().copied().unwrap_or(0.0);
        if min < -NEGATIVE_CLAMP {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        if min < 0.0 {
            let mut spectrum = spectrum;
            for p in spectrum.eigenvalues.iter_mut() {
                if *p < 0.0 {
                    *p = 0.0;
                }
            }
            let op = spectrum.reconstruct();
            return Ok(Self { op, spectrum });
        }
        Ok(Self { op, spectrum })
    }

    /// Divides by the trace before validating.
    pub fn from_unnormalized(op: HermitianOperator) -> Result<Self> {
        let trace = op.trace();
        if !(trace > 0.0) {
            return Err(Error::InvalidState(format!("non-positive trace {trace}")));
        }
        Self::new(op.scale(1.0 / trace))
    }

    /// `e^{−βH}/Z`, evaluated with the ground energy subtracted.
    pub fn gibbs(hamiltonian: &HermitianOperator, beta: f64) -> Result<Self> {
        let spectrum = eigh(hamiltonian)?;
        Self::gibbs_from_spectrum(&spectrum, beta)
    }

    pub(crate) fn gibbs_from_spectrum(spectrum: &SpectralDecomposition, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::Domain(format!("inverse temperature {beta}")));
        }
        let e0 = spectrum.eigenvalues.last().copied().unwrap_or(0.0);
        let weights: Vec<f64> = spectrum
            .eigenvalues
            .iter()
            .map(|&e| (-beta * (e - e0)).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
        // The Gibbs weights are monotone in the sorted energies, so the
        // eigenvector order already matches descending probabilities.
        let mut sorted = SpectralDecomposition {
            eigenvalues: probs,
            eigenvectors: spectrum.eigenvectors.clone(),
        };
        if beta < 0.0 {
            sorted.eigenvalues.reverse();
            let n = sorted.dim();
            sorted.eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| spectrum.eigenvectors[(i, n - 1 - j)]);
        }
        let op = sorted.reconstruct();
        Ok(Self { op, spectrum: sorted })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let op = HermitianOperator::identity(dim).scale(1.0 / dim as f64);
        Self::new(op).expect("maximally mixed state is valid")
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let n = psi.len();
        let m = ComplexMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Self::new(HermitianOperator::hermitize(m))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.op.matrix()
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    /// Eigenvalues, descending.
    pub fn probabilities(&self) -> &[f64] {
        &self.spectrum.eigenvalues
    }

    /// Errors unless every eigenvalue exceeds [`EPS_RANK`].
    pub fn require_full_rank(&self) -> Result<()> {
        let small: Vec<f64> = self
            .probabilities()
            .iter()
            .copied()
            .filter(|&p| p <= EPS_RANK)
            .collect();
        if small.is_empty() {
            Ok(())
        } else {
            Err(Error::RankDeficient { eigenvalues: small })
        }
    }

    /// `ρ^a`, eigenvalues below [`EPS_RANK`] treated as zero.
    pub fn power(&self, exponent: f64) -> HermitianOperator {
        self.spectrum.map(|p| floored_pow(p, exponent))
    }

    /// `ln ρ`; requires full rank.
    pub fn ln(&self) -> Result<HermitianOperator> {
        self.require_full_rank()?;
        Ok(self.spectrum.map(f64::ln))
    }

    /// Convex combination `λ·self + (1−λ)·other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        self.op.check_same_dim(&other.op)?;
        Self::new(&self.op.scale(lambda) + &other.op.scale(1.0 - lambda))
    }
}
