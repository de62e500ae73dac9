//! Quantum Fisher information, the symmetric logarithmic derivative, and the
//! bound `F(θ) ≤ K[ρ_θ, B_θ]` for exponential families `ρ_θ = e^{−A_θ}/Z_θ`.

use serde::Serialize;

use crate::diff::central_richardson;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix, HermitianOperator, EPS_RANK};
use crate::skew::{log_mean, skew_avg};

/// Pairs with `p_n + p_m` below this are left out of the QFI sum.
pub const PAIR_FLOOR: f64 = 1e-12;
const SLD_RESIDUAL_TOL: f64 = 1e-7;

/// A one-parameter family of density matrices of fixed dimension.
pub trait StateFamily: Sync {
    fn evaluate(&self, theta: f64) -> Result<DensityMatrix>;

    fn step_hint(&self, theta: f64) -> f64 {
        1e-5 * (1.0 + theta.abs())
    }

    /// `∂_θ ρ_θ`; central differences with one Richardson step unless overridden.
    fn state_derivative(&self, theta: f64) -> Result<HermitianOperator> {
        numeric_state_derivative(self, theta)
    }

    /// `⟨ξ_k|ρ_θ|ξ_k⟩` for the columns of `basis`, normalized.
    fn outcome_probabilities(&self, theta: f64, basis: &ComplexMatrix) -> Result<Vec<f64>> {
        Ok(crate::estimation::outcome_probabilities(&self.evaluate(theta)?, basis))
    }
}

pub fn numeric_state_derivative<F: StateFamily + ?Sized>(family: &F, theta: f64) -> Result<HermitianOperator> {
    let h = family.step_hint(theta);
    let d = central_richardson(|t| family.evaluate(t).map(|rho| rho.matrix().clone()), theta, h)?;
    Ok(HermitianOperator::hermitize(d.richardson))
}

/// Family given by a closure.
pub struct FnFamily<F> {
    f: F,
}

impl<F> FnFamily<F>
where
    F: Fn(f64) -> Result<DensityMatrix> + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f }
    }
}

impl<F> StateFamily for FnFamily<F>
where
    F: Fn(f64) -> Result<DensityMatrix> + Sync,
{
    fn evaluate(&self, theta: f64) -> Result<DensityMatrix> {
        (self.f)(theta)
    }
}

/// `ρ_θ = e^{−A_θ}/tr e^{−A_θ}` from a generator `θ ↦ A_θ`.
pub struct ExponentialFamily<G> {
    generator: G,
}

impl<G> ExponentialFamily<G>
where
    G: Fn(f64) -> Result<HermitianOperator> + Sync,
{
    pub fn new(generator: G) -> Self {
        Self { generator }
    }

    pub fn generator(&self, theta: f64) -> Result<HermitianOperator> {
        (self.generator)(theta)
    }

    /// `B_θ = ∂_θ A_θ` by central differences of the generator.
    pub fn generator_derivative(&self, theta: f64) -> Result<HermitianOperator> {
        let h = self.step_hint(theta);
        let d = central_richardson(|t| self.generator(t), theta, h)?;
        Ok(d.richardson)
    }
}

impl<G> StateFamily for ExponentialFamily<G>
where
    G: Fn(f64) -> Result<HermitianOperator> + Sync,
{
    fn evaluate(&self, theta: f64) -> Result<DensityMatrix> {
        DensityMatrix::gibbs(&self.generator(theta)?, 1.0)
    }
}

/// Polynomial generator `A₀ + θA₁ + θ²A₂ + …`.
pub fn polynomial_generator(coefficients: Vec<HermitianOperator>) -> impl Fn(f64) -> Result<HermitianOperator> + Sync {
    move |theta| {
        let mut acc = HermitianOperator::zeros(coefficients[0].dim());
        let mut power = 1.0;
        for c in &coefficients {
            acc = &acc + &c.scale(power);
            power *= theta;
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QfiReport {
    pub qfi: f64,
    #[serde(skip)]
    pub sld: HermitianOperator,
    /// `K[ρ_θ, B_θ]`, exponential families only.
    pub classical_bound: Option<f64>,
    /// `Q[ρ_θ, B_θ]`, exponential families only.
    pub quantum_term: Option<f64>,
    /// Set when the bound holds with a gap below `1e-6·K`.
    pub bound_tight: Option<bool>,
    pub dropped_pairs: usize,
    /// `‖∂ρ − ½{ρ, L}‖_max`.
    pub sld_residual: f64,
    /// `tr[ρ L²]`, to compare with `qfi`.
    pub sld_qfi: f64,
}

impl QfiReport {
    /// Relative excess `(F − K)/(1 + K)`; positive values violate the bound.
    pub fn relative_excess(&self) -> Option<f64> {
        self.classical_bound.map(|k| (self.qfi - k) / (1.0 + k))
    }
}

/// QFI and SLD from a state and its θ-derivative.
pub fn qfi_from_derivative(state: &DensityMatrix, derivative: &HermitianOperator) -> Result<QfiReport> {
    if derivative.dim() != state.dim() {
        return Err(Error::Dimension(format!(
            "derivative dim {} vs state dim {}",
            derivative.dim(),
            state.dim()
        )));
    }
    let u = &state.spectrum().eigenvectors;
    let d = derivative.in_basis(u);
    qfi_in_eigenbasis(state, &d)
}

fn qfi_in_eigenbasis(state: &DensityMatrix, d: &ComplexMatrix) -> Result<QfiReport> {
    let p = state.probabilities();
    let n = p.len();
    let mut qfi = 0.0;
    let mut dropped = 0;
    let mut l = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let s = p[i] + p[j];
            if s < PAIR_FLOOR {
                dropped += 1;
                continue;
            }
            qfi += 2.0 * d[(i, j)].norm_sqr() / s;
            l[(i, j)] = d[(i, j)] * (2.0 / s);
        }
    }
    let u = &state.spectrum().eigenvectors;
    let sld = HermitianOperator::from_basis(&l, u);

    // defining equation and tr[ρL²], both evaluated in the eigenbasis
    let mut residual = 0.0_f64;
    let mut sld_qfi = 0.0;
    for i in 0..n {
        for j in 0..n {
            let rebuilt = l[(i, j)] * (0.5 * (p[i] + p[j]));
            residual = residual.max((d[(i, j)] - rebuilt).norm());
            sld_qfi += p[i] * l[(i, j)].norm_sqr();
        }
    }
    if residual > SLD_RESIDUAL_TOL {
        if dropped > 0 {
            let eigenvalues = p.iter().copied().filter(|&x| x <= EPS_RANK.max(PAIR_FLOOR)).collect();
            return Err(Error::RankDeficient { eigenvalues });
        }
        return Err(Error::Numeric(format!("SLD residual {residual:e}")));
    }
    Ok(QfiReport {
        qfi,
        sld,
        classical_bound: None,
        quantum_term: None,
        bound_tight: None,
        dropped_pairs: dropped,
        sld_residual: residual,
        sld_qfi,
    })
}

/// QFI of a general family at `theta`.
pub fn qfi<F: StateFamily + ?Sized>(family: &F, theta: f64) -> Result<QfiReport> {
    let state = family.evaluate(theta)?;
    let derivative = family.state_derivative(theta)?;
    qfi_from_derivative(&state, &derivative)
}

/// `∂_θρ` of `e^{−A}/Z` given `B = ∂_θA`: in the eigenbasis of ρ,
/// `(∂ρ)_nm = −L(p_n, p_m)·(B − ⟨B⟩)_nm` with `L` the logarithmic mean.
pub fn exponential_state_derivative_in_eigenbasis(state: &DensityMatrix, b: &HermitianOperator) -> Result<ComplexMatrix> {
    if b.dim() != state.dim() {
        return Err(Error::Dimension(format!("B dim {} vs state dim {}", b.dim(), state.dim())));
    }
    let p = state.probabilities();
    let mut m = b.in_basis(&state.spectrum().eigenvectors);
    let mean: f64 = (0..p.len()).map(|i| p[i] * m[(i, i)].re).sum();
    for i in 0..p.len() {
        m[(i, i)] -= mean;
    }
    for i in 0..p.len() {
        for j in 0..p.len() {
            m[(i, j)] *= -log_mean(p[i], p[j]);
        }
    }
    Ok(m)
}

pub fn exponential_state_derivative(state: &DensityMatrix, b: &HermitianOperator) -> Result<HermitianOperator> {
    let m = exponential_state_derivative_in_eigenbasis(state, b)?;
    Ok(HermitianOperator::from_basis(&m, &state.spectrum().eigenvectors))
}

/// QFI of `e^{−A}/Z` along a direction `B = ∂_θA`, with both sides of the bound filled in.
pub fn qfi_exponential(state: &DensityMatrix, b: &HermitianOperator) -> Result<QfiReport> {
    let d = exponential_state_derivative_in_eigenbasis(state, b)?;
    let mut report = qfi_in_eigenbasis(state, &d)?;
    let part = skew_avg(state, b)?;
    report.classical_bound = Some(part.classical);
    report.quantum_term = Some(part.quantum);
    report.bound_tight = Some(part.classical - report.qfi < 1e-6 * part.classical);
    Ok(report)
}

/// Evaluates both sides of `F(θ) ≤ K[ρ_θ, B_θ]`.
pub fn theorem1_check<G>(family: &ExponentialFamily<G>, theta: f64) -> Result<QfiReport>
where
    G: Fn(f64) -> Result<HermitianOperator> + Sync,
{
    let state = family.evaluate(theta)?;
    let b = family.generator_derivative(theta)?;
    qfi_exponential(&state, &b)
}

/// Classical Fisher information of a projective measurement in the columns of `basis`.
pub fn classical_fisher(state: &DensityMatrix, derivative: &HermitianOperator, basis: &ComplexMatrix) -> f64 {
    let rho = state.operator().in_basis(basis);
    let d = derivative.in_basis(basis);
    (0..basis.ncols())
        .filter(|&k| rho[(k, k)].re > PAIR_FLOOR)
        .map(|k| d[(k, k)].re.powi(2) / rho[(k, k)].re)
        .sum()
}
