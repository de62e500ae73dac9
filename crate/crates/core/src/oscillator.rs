//! Damped harmonic oscillator with a Drude-Ullersma bath, in closed form.
//!
//! The reduced state is Gaussian, `π_S = e^{−βH*}/Z*` with
//! `H* = ω_T(a_T†a_T + ½)`, so everything follows from the two quadratures
//! `⟨x²⟩` and `⟨p²⟩` and their temperature dependence.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::diff::{central_richardson, richardson_from_values};
use crate::error::{Error, Result};
use crate::fisher::StateFamily;
use crate::linalg::{ComplexMatrix, DensityMatrix, HermitianOperator};
use crate::special::{digamma, trigamma};
use crate::thermo::ThermoScalars;

/// Step for ω_T′ and A_T′, relative to T.
pub const INNER_STEP: f64 = 1e-4;
/// Step for α_T′, relative to T.
pub const OUTER_STEP: f64 = 1e-3;
pub const FOCK_CAP: usize = 512;
/// Truncated Fock exports keep `Σ_{n>n_max} p_n` below this.
pub const FOCK_TAIL: f64 = 1e-12;
const CRITICAL_TOL: f64 = 1e-6;
const IMAG_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OscillatorModel {
    pub mass: f64,
    pub omega: f64,
    pub gamma: f64,
    pub cutoff: f64,
}

impl OscillatorModel {
    pub fn new(mass: f64, omega: f64, gamma: f64, cutoff: f64) -> Result<Self> {
        for (name, v) in [("mass", mass), ("omega", omega), ("gamma", gamma), ("cutoff", cutoff)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Model(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let scale = omega.max(gamma);
        if cutoff < 10.0 * scale {
            return Err(Error::Model(format!(
                "cutoff {cutoff} must be at least 10·max(omega, gamma) = {}",
                10.0 * scale
            )));
        }
        Ok(Self { mass, omega, gamma, cutoff })
    }

    /// Non-fatal remarks about the parameter regime.
    pub fn warnings(&self) -> Vec<String> {
        let scale = self.omega.max(self.gamma);
        if self.cutoff < 50.0 * scale {
            vec![format!(
                "cutoff {} is below 50·max(omega, gamma); large-cutoff corrections may be visible",
                self.cutoff
            )]
        } else {
            Vec::new()
        }
    }

    /// `λ₁,₂ = γ/2 ± √(γ²/4 − ω²)`, `λ₃ = ω_D − γ`.
    pub fn characteristic_frequencies(&self) -> [Complex64; 3] {
        let disc = Complex64::new(self.gamma * self.gamma / 4.0 - self.omega * self.omega, 0.0).sqrt();
        let half = Complex64::new(self.gamma / 2.0, 0.0);
        [half + disc, half - disc, Complex64::new(self.cutoff - self.gamma, 0.0)]
    }

    fn is_critical(&self, l: &[Complex64; 3]) -> bool {
        (l[0] - l[1]).norm() < CRITICAL_TOL * self.omega
    }

    /// `⟨x²⟩` and `⟨p²⟩` at temperature `t`.
    pub fn quadratures(&self, t: f64) -> Result<Quadratures> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("temperature must be positive and finite, got {t}")));
        }
        let l = self.characteristic_frequencies();
        let s = 1.0 / (2.0 * PI * t);
        let wd = self.cutoff;
        let psi = |lam: Complex64| digamma(lam * s + 1.0);
        let f = |lam: Complex64| -> Result<Complex64> { Ok((lam - wd) * psi(lam)?) };
        let g = |lam: Complex64| -> Result<Complex64> { Ok(lam * psi(lam)?) };
        let (fdd, gdd) = if self.is_critical(&l) {
            let mu = (l[0] + l[1]) * 0.5;
            let psi_mu = psi(mu)?;
            let tri_mu = trigamma(mu * s + 1.0)?;
            let fp = psi_mu + (mu - wd) * s * tri_mu;
            let gp = psi_mu + mu * s * tri_mu;
            (
                confluent_divided_difference(f, mu, fp, l[2])?,
                confluent_divided_difference(g, mu, gp, l[2])?,
            )
        } else {
            (divided_difference(f, &l)?, divided_difference(g, &l)?)
        };
        let (m, w) = (self.mass, self.omega);
        let x2 = t / (m * w * w) + fdd / (m * PI);
        let p2 = x2 * (m * w * w) + gdd * (m * self.gamma * wd / PI);
        let imag_residue = (x2.im.abs() / x2.re.abs()).max(p2.im.abs() / p2.re.abs());
        if !(imag_residue <= IMAG_TOL) {
            return Err(Error::Numeric(format!(
                "quadrature sums have imaginary residue {imag_residue:e} at T = {t}"
            )));
        }
        if !(x2.re > 0.0 && p2.re > 0.0) {
            return Err(Error::Numeric(format!(
                "non-positive quadratures x2 = {}, p2 = {} at T = {t}",
                x2.re, p2.re
            )));
        }
        Ok(Quadratures {
            x2: x2.re,
            p2: p2.re,
            imag_residue,
        })
    }

    /// `(ω_T, A_T)` from the quadratures.
    pub fn effective_frequency(&self, t: f64) -> Result<[f64; 2]> {
        let q = self.quadratures(t)?;
        effective_from_quadratures(&q, t)
    }

    fn alpha_at(&self, t: f64) -> Result<f64> {
        let h = INNER_STEP * t;
        let d = central_richardson(|tt| self.effective_frequency(tt), t, h)?.richardson;
        let w = self.effective_frequency(t)?[0];
        Ok(1.0 - t * d[0] / w)
    }

    /// All temperature-dependent parameters, including the derivatives.
    pub fn derived(&self, t: f64) -> Result<OscillatorDerived> {
        let q = self.quadratures(t)?;
        let [omega_t, a_t] = effective_from_quadratures(&q, t)?;
        let h = INNER_STEP * t;
        let d = central_richardson(|tt| self.effective_frequency(tt), t, h)?.richardson;
        let (d_omega_t, d_a_t) = (d[0], d[1]);
        let alpha_t = 1.0 - t * d_omega_t / omega_t;
        let g_t = omega_t * t * d_a_t / a_t;
        let d_alpha_t = central_richardson(|tt| self.alpha_at(tt), t, OUTER_STEP * t)?.richardson;
        Ok(OscillatorDerived {
            temperature: t,
            x2: q.x2,
            p2: q.p2,
            imag_residue: q.imag_residue,
            mass_t: a_t / omega_t,
            omega_t,
            a_t,
            alpha_t,
            g_t,
            d_omega_t,
            d_a_t,
            d_alpha_t,
        })
    }

    /// Closed-form thermodynamics at temperature `t`.
    pub fn report(&self, t: f64) -> Result<OscillatorReport> {
        let d = self.derived(t).map_err(|e| e.at_temperature(t))?;
        Ok(OscillatorReport::from_derived(d))
    }

    /// Diagonal Fock-basis export of `π_S` and `E*`.
    pub fn truncated_fock_export(&self, t: f64, n_max: Option<usize>) -> Result<FockExport> {
        let d = self.derived(t)?;
        fock_export(&d, n_max)
    }

    /// Fock basis of a fixed reference oscillator with `A₀ = a_ref`.
    pub fn reference_basis(&self, a_ref: f64, dim: usize) -> ReferenceBasis {
        ReferenceBasis::new(a_ref, dim)
    }
}

/// `f[λ₁, λ₂, λ₃]` in Newton form.
fn divided_difference<F>(f: F, l: &[Complex64; 3]) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let (f1, f2, f3) = (f(l[0])?, f(l[1])?, f(l[2])?);
    let d12 = (f2 - f1) / (l[1] - l[0]);
    let d23 = (f3 - f2) / (l[2] - l[1]);
    Ok((d23 - d12) / (l[2] - l[0]))
}

/// `f[μ, μ, λ] = (f[μ, λ] − f′(μ))/(λ − μ)`.
fn confluent_divided_difference<F>(f: F, mu: Complex64, f_prime: Complex64, lam: Complex64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let d = (f(lam)? - f(mu)?) / (lam - mu);
    Ok((d - f_prime) / (lam - mu))
}

fn effective_from_quadratures(q: &Quadratures, t: f64) -> Result<[f64; 2]> {
    let u = 2.0 * (q.p2 * q.x2).sqrt();
    if !(u > 1.0) {
        return Err(Error::Numeric(format!(
            "2·sqrt(<p^2><x^2>) = {u} is not above 1 at T = {t}; arcoth undefined"
        )));
    }
    // 2T·arcoth(u) = T·ln((u + 1)/(u − 1))
    let omega_t = t * (2.0 / (u - 1.0)).ln_1p();
    Ok([omega_t, (q.p2 / q.x2).sqrt()])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quadratures {
    pub x2: f64,
    pub p2: f64,
    pub imag_residue: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OscillatorDerived {
    pub temperature: f64,
    pub x2: f64,
    pub p2: f64,
    pub imag_residue: f64,
    pub mass_t: f64,
    pub omega_t: f64,
    pub a_t: f64,
    pub alpha_t: f64,
    pub g_t: f64,
    pub d_omega_t: f64,
    pub d_a_t: f64,
    pub d_alpha_t: f64,
}

/// `1 − tanh(x)/x`.
fn one_minus_tanhc(x: f64) -> f64 {
    if x < 0.05 {
        let x2 = x * x;
        x2 * (1.0 / 3.0 - x2 * (2.0 / 15.0 - x2 * (17.0 / 315.0 - x2 * 62.0 / 2835.0)))
    } else {
        1.0 - x.tanh() / x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OscillatorReport {
    pub derived: OscillatorDerived,
    pub scalars: ThermoScalars,
    /// `⟨H*⟩ = (ω_T/2) coth(βω_T/2)`.
    pub h_star_mean: f64,
    /// `Var[π_S, H*]`.
    pub var_h_star: f64,
    /// `T⁴·F(T)`.
    pub t4_qfi: f64,
}

impl OscillatorReport {
    pub fn from_derived(d: OscillatorDerived) -> Self {
        let t = d.temperature;
        let beta = 1.0 / t;
        let (w, a, g) = (d.omega_t, d.alpha_t, d.g_t);
        let x = beta * w;
        let em = (-x).exp();
        let om = -(-x).exp_m1();
        let em2 = em * em;
        let om2 = -(-2.0 * x).exp_m1();
        // Σ_n (n+1)(n+2) e^{−xn} (1 − e^{−x}) = 2/(1 − e^{−x})²
        let s = 2.0 / (om * om);
        let var_h = w * w * em / (om * om);
        let var = a * a * var_h + 0.25 * g * g * (1.0 + em2) * s;
        let t4_qfi = a * a * var_h + g * g / (4.0 * x * x) * om2 * om2 / (1.0 + em2) * s;
        let q = 0.25 * g * g * s * (1.0 + em2) * one_minus_tanhc(x);
        let coth_half = (1.0 + em) / om;
        let h_mean = 0.5 * w * coth_half;
        let u = a * h_mean;
        let c = 0.5 * coth_half * (d.d_alpha_t * w + a * d.d_omega_t)
            - a * w * beta * (d.d_omega_t - w * beta) * em / (om * om);
        let ratio = d.d_a_t / d.a_t;
        let dt_e = h_mean * (d.d_alpha_t + a * d.d_omega_t / w - t * ratio * ratio);
        let scalars = ThermoScalars::assemble(t, u, var, q, var - q, c, dt_e, t4_qfi / (t * t * t * t));
        Self {
            derived: d,
            scalars,
            h_star_mean: h_mean,
            var_h_star: var_h,
            t4_qfi,
        }
    }

    /// `(snr_bound − snr_opt)/snr_opt`.
    pub fn gap_rel(&self) -> f64 {
        (self.scalars.snr_bound - self.scalars.snr_opt) / self.scalars.snr_opt
    }
}

/// Finite Fock-space representation in the eigenbasis of `H*`.
#[derive(Clone, Debug)]
pub struct FockExport {
    pub state: DensityMatrix,
    pub e_star: HermitianOperator,
    pub h_star: HermitianOperator,
    pub n_max: usize,
    /// `|1 − Σ_{n≤n_max} p_n|` before renormalization.
    pub renormalization: f64,
}

/// Smallest `n_max` with `e^{−x(n_max+1)} < FOCK_TAIL`.
pub fn required_fock_cutoff(x: f64) -> usize {
    (FOCK_TAIL.ln() / -x).floor() as usize
}

pub(crate) fn fock_export(d: &OscillatorDerived, n_max: Option<usize>) -> Result<FockExport> {
    let x = d.omega_t / d.temperature;
    let required = required_fock_cutoff(x);
    if required > FOCK_CAP {
        return Err(Error::Truncation { required, cap: FOCK_CAP });
    }
    let n_max = match n_max {
        Some(n) if n < required => return Err(Error::Truncation { required, cap: FOCK_CAP }),
        Some(n) if n > FOCK_CAP => return Err(Error::Truncation { required: n, cap: FOCK_CAP }),
        Some(n) => n,
        None => required,
    };
    let dim = n_max + 1;
    let om = -(-x).exp_m1();
    let probs: Vec<f64> = (0..dim).map(|n| om * (-x * n as f64).exp()).collect();
    let total: f64 = probs.iter().sum();
    let renormalization = (1.0 - total).abs();
    let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
    let state = DensityMatrix::new(HermitianOperator::from_diagonal(&probs))?;

    let energies: Vec<f64> = (0..dim).map(|n| d.omega_t * (n as f64 + 0.5)).collect();
    let h_star = HermitianOperator::from_diagonal(&energies);
    let mut e = ComplexMatrix::zeros(dim, dim);
    for n in 0..dim {
        e[(n, n)] = Complex64::new(d.alpha_t * energies[n], 0.0);
        if n + 2 < dim {
            let v = -0.5 * d.g_t * (((n + 1) * (n + 2)) as f64).sqrt();
            e[(n, n + 2)] = Complex64::new(v, 0.0);
            e[(n + 2, n)] = Complex64::new(v, 0.0);
        }
    }
    Ok(FockExport {
        state,
        e_star: HermitianOperator::hermitize(e),
        h_star,
        n_max,
        renormalization,
    })
}

/// Truncated Fock basis of a reference oscillator with `A₀ = M₀ω₀`, in which
/// the temperature-dependent `H*` and `E*` are written without changing basis.
#[derive(Clone, Debug)]
pub struct ReferenceBasis {
    pub a_ref: f64,
    number: HermitianOperator,
    squeeze: HermitianOperator,
}

impl ReferenceBasis {
    pub fn new(a_ref: f64, dim: usize) -> Self {
        let number = HermitianOperator::from_diagonal(&(0..dim).map(|n| 2.0 * n as f64 + 1.0).collect::<Vec<_>>());
        let mut s = ComplexMatrix::zeros(dim, dim);
        for n in 0..dim.saturating_sub(2) {
            let v = (((n + 1) * (n + 2)) as f64).sqrt();
            s[(n, n + 2)] = Complex64::new(v, 0.0);
            s[(n + 2, n)] = Complex64::new(v, 0.0);
        }
        Self {
            a_ref,
            number,
            squeeze: HermitianOperator::hermitize(s),
        }
    }

    pub fn dim(&self) -> usize {
        self.number.dim()
    }

    /// `p²/A` and `A x²` for `A = a`.
    fn kinetic_potential(&self, a: f64) -> (HermitianOperator, HermitianOperator) {
        let r = self.a_ref / a;
        let kinetic = (&self.number - &self.squeeze).scale(0.5 * r);
        let potential = (&self.number + &self.squeeze).scale(0.5 / r);
        (kinetic, potential)
    }

    /// The even (`parity = 0`) or odd Fock block of `H*`, which is real and tridiagonal.
    fn h_star_parity_block(&self, omega_t: f64, a_t: f64, parity: usize) -> DMatrix<f64> {
        let r = self.a_ref / a_t;
        let (diag, off) = (0.25 * omega_t * (r + 1.0 / r), 0.25 * omega_t * (1.0 / r - r));
        let levels: Vec<usize> = (parity..self.dim()).step_by(2).collect();
        let m = levels.len();
        let mut h = DMatrix::zeros(m, m);
        for (i, &n) in levels.iter().enumerate() {
            h[(i, i)] = diag * (2 * n + 1) as f64;
            if i + 1 < m {
                let v = off * (((n + 1) * (n + 2)) as f64).sqrt();
                h[(i, i + 1)] = v;
                h[(i + 1, i)] = v;
            }
        }
        h
    }

    /// `H* = (ω_T/2)(p²/A_T + A_T x²)`.
    pub fn h_star(&self, omega_t: f64, a_t: f64) -> HermitianOperator {
        let (k, v) = self.kinetic_potential(a_t);
        (&k + &v).scale(0.5 * omega_t)
    }

    /// `E* = (α_T ω_T/2)(p²/A_T + A_T x²) − (g_T/2)(A_T x² − p²/A_T)`.
    pub fn e_star(&self, d: &OscillatorDerived) -> HermitianOperator {
        let (k, v) = self.kinetic_potential(d.a_t);
        let h = (&k + &v).scale(0.5 * d.alpha_t * d.omega_t);
        &h - &(&v - &k).scale(0.5 * d.g_t)
    }
}

/// The family `T ↦ e^{−H*(T)/T}/Z*` in a fixed reference Fock basis.
pub struct OscillatorFamily {
    pub model: OscillatorModel,
    pub basis: ReferenceBasis,
}

impl OscillatorFamily {
    /// Reference oscillator matched to `A_T` at `t_ref`, with the truncation
    /// chosen from the effective frequency there (margin of 1.5).
    pub fn around(model: OscillatorModel, t_ref: f64) -> Result<Self> {
        let [w, a] = model.effective_frequency(t_ref)?;
        let required = required_fock_cutoff(w / t_ref);
        let dim = ((required as f64 * 1.5) as usize + 1).min(FOCK_CAP + 1);
        if required > FOCK_CAP {
            return Err(Error::Truncation { required, cap: FOCK_CAP });
        }
        Ok(Self {
            model,
            basis: ReferenceBasis::new(a, dim),
        })
    }
}

impl StateFamily for OscillatorFamily {
    fn evaluate(&self, t: f64) -> Result<DensityMatrix> {
        let [w, a] = self.model.effective_frequency(t)?;
        DensityMatrix::gibbs(&self.basis.h_star(w, a), 1.0 / t)
    }

    fn step_hint(&self, t: f64) -> f64 {
        INNER_STEP * t.abs()
    }

    /// For a real measurement basis, diagonalizes the two parity blocks of
    /// `H*` in real arithmetic instead of the full complex matrix.
    fn outcome_probabilities(&self, t: f64, basis: &ComplexMatrix) -> Result<Vec<f64>> {
        let dim = self.basis.dim();
        if basis.nrows() != dim || basis.iter().any(|z| z.im.abs() > 1e-12) {
            return Ok(crate::estimation::outcome_probabilities(&self.evaluate(t)?, basis));
        }
        if !(t > 0.0) {
            return Err(Error::Domain(format!("temperature must be positive, got {t}")));
        }
        let [w, a] = self.model.effective_frequency(t)?;
        let blocks: Vec<_> = (0..2)
            .map(|parity| {
                let h = self.basis.h_star_parity_block(w, a, parity);
                let eig = h.try_symmetric_eigen(1e-15, 10_000).ok_or(Error::NoConvergence { dim, norm: w })?;
                Ok((parity, eig))
            })
            .collect::<Result<_>>()?;
        let e_min = blocks
            .iter()
            .flat_map(|(_, e)| e.eigenvalues.iter().copied())
            .fold(f64::INFINITY, f64::min);
        let mut probs = vec![0.0; basis.ncols()];
        for (parity, eig) in &blocks {
            let rows: Vec<usize> = (*parity..dim).step_by(2).collect();
            let xi = DMatrix::from_fn(rows.len(), basis.ncols(), |i, k| basis[(rows[i], k)].re);
            let overlap = xi.tr_mul(&eig.eigenvectors);
            let q: Vec<f64> = eig.eigenvalues.iter().map(|e| (-(e - e_min) / t).exp()).collect();
            for (k, p) in probs.iter_mut().enumerate() {
                *p += q.iter().enumerate().map(|(j, qj)| qj * overlap[(k, j)].powi(2)).sum::<f64>();
            }
        }
        let total: f64 = probs.iter().sum();
        Ok(probs.into_iter().map(|p| p / total).collect())
    }
}

/// `⟨∂_T E*⟩` from central differences of `E*` in a fixed reference basis.
pub fn dt_e_star_mean_numeric(model: &OscillatorModel, t: f64) -> Result<f64> {
    let fam = OscillatorFamily::around(*model, t)?;
    let h = OUTER_STEP * t;
    let mut ops = Vec::with_capacity(4);
    for tt in [t + h, t - h, t + 0.5 * h, t - 0.5 * h] {
        ops.push(fam.basis.e_star(&model.derived(tt)?).into_matrix());
    }
    let de = richardson_from_values(&ops[0], &ops[1], &ops[2], &ops[3], h).richardson;
    let state = fam.evaluate(t)?;
    Ok(crate::linalg::trace_product(state.matrix(), &de).re)
}

/// One row of the skew-information figure.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Fig1Row {
    #[serde(rename = "T")]
    pub t: f64,
    pub gamma: f64,
    #[serde(rename = "sqrtQ_over_omega")]
    pub sqrt_q_over_omega: f64,
}

/// One row of the signal-to-noise figure.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Fig2Row {
    #[serde(rename = "T")]
    pub t: f64,
    pub gamma: f64,
    pub snr_opt: f64,
    pub snr_bound: f64,
    pub gap_rel: f64,
}

impl OscillatorReport {
    pub fn fig1_row(&self, model: &OscillatorModel) -> Fig1Row {
        Fig1Row {
            t: self.scalars.temperature,
            gamma: model.gamma,
            sqrt_q_over_omega: self.scalars.q.max(0.0).sqrt() / model.omega,
        }
    }

    pub fn fig2_row(&self, model: &OscillatorModel) -> Fig2Row {
        Fig2Row {
            t: self.scalars.temperature,
            gamma: model.gamma,
            snr_opt: self.scalars.snr_opt,
            snr_bound: self.scalars.snr_bound,
            gap_rel: self.gap_rel(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{qfi, qfi_exponential};
    use crate::skew::{skew_avg, variance};

    fn model(gamma: f64) -> OscillatorModel {
        OscillatorModel::new(1.0, 1.0, gamma, 50.0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn model_validation() {
        assert!(OscillatorModel::new(1.0, 1.0, 0.5, 9.0).is_err());
        assert!(OscillatorModel::new(0.0, 1.0, 0.5, 50.0).is_err());
        assert!(OscillatorModel::new(1.0, 1.0, -0.5, 50.0).is_err());
        let m = OscillatorModel::new(1.0, 1.0, 0.5, 20.0).unwrap();
        assert_eq!(m.warnings().len(), 1);
        assert!(model(0.5).warnings().is_empty());
    }

    #[test]
    fn characteristic_frequency_examples() {
        let l = model(0.5).characteristic_frequencies();
        assert!((l[0] - Complex64::new(0.25, 0.968_245_836_551_854_2)).norm() < 1e-15);
        assert!((l[1] - l[0].conj()).norm() < 1e-15);
        assert!((l[2].re - 49.5).abs() < 1e-15);

        let l = model(3.0).characteristic_frequencies();
        assert!((l[0].re - (1.5 + 1.25f64.sqrt())).abs() < 1e-15 && l[0].im == 0.0);
        assert!((l[1].re - (1.5 - 1.25f64.sqrt())).abs() < 1e-15);

        let l = model(2.0).characteristic_frequencies();
        assert!((l[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((l[1] - Complex64::new(1.0, 0.0)).norm() < 1e-15);

        for g in [0.1, 0.7, 2.0, 5.0] {
            let l = model(g).characteristic_frequencies();
            assert!(((l[0] * l[1]).re - 1.0).abs() < 1e-12 && (l[0] * l[1]).im.abs() < 1e-12);
        }
    }

    #[test]
    fn weak_damping_recovers_free_oscillator() {
        let m = model(1e-6);
        for &t in &[0.2, 1.0, 3.0] {
            let q = m.quadratures(t).unwrap();
            let coth = 1.0 / (0.5 / t).tanh();
            assert!(rel(q.x2, coth / 2.0) < 1e-3, "T={t}");
            assert!(rel(q.p2, coth / 2.0) < 1e-3);
            let d = m.derived(t).unwrap();
            assert!(rel(d.omega_t, 1.0) < 1e-3);
            assert!((d.alpha_t - 1.0).abs() < 1e-3);
            assert!(d.g_t.abs() < 1e-3);
        }
    }

    #[test]
    fn classical_equipartition() {
        for g in [0.1, 0.5, 1.0, 2.0] {
            let q = model(g).quadratures(100.0).unwrap();
            assert!(rel(q.x2, 100.0) < 0.02, "gamma={g}");
        }
    }

    #[test]
    fn uncertainty_product_exceeds_bound() {
        for g in [0.01, 0.1, 0.5, 1.0, 2.0, 4.0] {
            for &t in &[0.02, 0.05, 0.2, 1.0, 10.0, 100.0] {
                let q = model(g).quadratures(t).unwrap();
                assert!(2.0 * (q.x2 * q.p2).sqrt() > 1.0, "gamma={g} T={t}");
                assert!(q.imag_residue <= 1e-9);
            }
        }
    }

    #[test]
    fn critical_damping_is_continuous() {
        let t = 0.7;
        let at = model(2.0).quadratures(t).unwrap();
        for g in [2.0 * (1.0 - 1e-5), 2.0 * (1.0 + 1e-5)] {
            let near = model(g).quadratures(t).unwrap();
            assert!(rel(near.x2, at.x2) < 1e-4 && rel(near.p2, at.p2) < 1e-4);
        }
        // just inside the switch both branches must agree closely
        let inside = model(2.0 * (1.0 - 1e-13)).quadratures(t).unwrap();
        assert!(rel(inside.x2, at.x2) < 1e-10);
    }

    /// dω_T/dT from the trigamma derivative of the quadrature sums.
    fn omega_prime_trigamma(m: &OscillatorModel, t: f64) -> f64 {
        let l = m.characteristic_frequencies();
        let s = 1.0 / (2.0 * PI * t);
        let ds = -s / t;
        let wd = m.cutoff;
        let fx = |lam: Complex64| Ok((lam - wd) * trigamma(lam * s + 1.0)? * lam * ds);
        let fp = |lam: Complex64| Ok(lam * trigamma(lam * s + 1.0)? * lam * ds);
        let dx2 = 1.0 / (m.mass * m.omega * m.omega) + divided_difference(fx, &l).unwrap().re / (m.mass * PI);
        let dp2 = m.mass * m.omega * m.omega * dx2 + divided_difference(fp, &l).unwrap().re * m.mass * m.gamma * wd / PI;
        let q = m.quadratures(t).unwrap();
        let u = 2.0 * (q.x2 * q.p2).sqrt();
        let du = 0.5 * u * (dx2 / q.x2 + dp2 / q.p2);
        let w = t * (2.0 / (u - 1.0)).ln_1p();
        w / t - t * 2.0 / (u * u - 1.0) * du
    }

    #[test]
    fn omega_derivative_matches_trigamma() {
        for g in [0.1, 0.8, 3.0] {
            let m = model(g);
            for &t in &[0.1, 0.5, 2.0] {
                let d = m.derived(t).unwrap();
                let oracle = omega_prime_trigamma(&m, t);
                assert!(rel(d.d_omega_t, oracle) < 1e-7, "gamma={g} T={t}: {} vs {oracle}", d.d_omega_t);
            }
        }
    }

    #[test]
    fn weak_damping_closed_forms() {
        let m = model(1e-6);
        for &t in &[0.3, 1.0, 4.0] {
            let r = m.report(t).unwrap();
            let x = 1.0 / t;
            let oracle = x * x * x.exp() / x.exp_m1().powi(2);
            assert!(rel(r.scalars.c, oracle) < 1e-3, "T={t}");
            assert!(r.scalars.q.abs() < 1e-9);
            assert!(rel(r.t4_qfi, r.scalars.var_u) < 1e-6);
        }
    }

    #[test]
    fn fdr_closes_with_closed_forms() {
        for g in [0.1, 0.5, 1.0, 2.0] {
            for &t in &[0.05, 0.2, 1.0, 5.0, 50.0] {
                let s = model(g).report(t).unwrap().scalars;
                assert!(s.fdr_residual <= 1e-6 * (1.0 + s.c.abs()), "gamma={g} T={t}: {:e}", s.fdr_residual);
                assert!(s.verify(1e-6).is_empty(), "gamma={g} T={t}: {:?}", s.verify(1e-6));
            }
        }
    }

    #[test]
    fn fock_export_reproduces_closed_forms() {
        for (g, t) in [(0.5, 0.5), (2.0, 2.0), (0.1, 5.0)] {
            let m = model(g);
            let r = m.report(t).unwrap();
            let ex = m.truncated_fock_export(t, None).unwrap();
            assert!(ex.renormalization <= 1e-12);
            let var = variance(&ex.state, &ex.e_star).unwrap();
            let part = skew_avg(&ex.state, &ex.e_star).unwrap();
            let f = qfi_exponential(&ex.state, &ex.e_star).unwrap().qfi;
            assert!(rel(var, r.scalars.var_u) < 1e-8, "gamma={g} T={t}");
            assert!(rel(part.quantum, r.scalars.q) < 1e-8);
            assert!(rel(f, r.t4_qfi) < 1e-8);
        }
    }

    #[test]
    fn fock_export_without_squeezing_is_classical() {
        let mut d = model(0.5).derived(1.0).unwrap();
        d.g_t = 0.0;
        let ex = fock_export(&d, None).unwrap();
        assert!(ex.e_star.matrix().iter().enumerate().all(|(k, z)| k % (ex.n_max + 2) == 0 || z.norm() == 0.0));
        let f = qfi_exponential(&ex.state, &ex.e_star).unwrap().qfi;
        let var = variance(&ex.state, &ex.e_star).unwrap();
        assert!(rel(f, var) < 1e-12);
    }

    #[test]
    fn fock_truncation_errors() {
        let m = model(0.5);
        assert!(matches!(m.truncated_fock_export(1.0, Some(3)), Err(Error::Truncation { .. })));
        match m.truncated_fock_export(100.0, None) {
            Err(Error::Truncation { required, cap }) => assert!(required > cap),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dissipation_term_matches_reference_basis() {
        for (g, t) in [(0.5, 1.0), (1.0, 0.3), (2.0, 2.0)] {
            let m = model(g);
            let closed = m.report(t).unwrap().scalars.dt_e_star_mean;
            let numeric = dt_e_star_mean_numeric(&m, t).unwrap();
            assert!((closed - numeric).abs() < 1e-6 * (1.0 + closed.abs()), "gamma={g} T={t}: {closed} vs {numeric}");
        }
    }

    #[test]
    fn reference_family_qfi_matches_closed_form() {
        let m = model(0.5);
        let t = 1.0;
        let fam = OscillatorFamily::around(m, t).unwrap();
        let f = qfi(&fam, t).unwrap().qfi;
        let closed = m.report(t).unwrap().scalars.qfi_t;
        assert!(rel(f, closed) < 1e-6, "{f} vs {closed}");
    }

    #[test]
    fn parity_block_probabilities_match_dense_state() {
        let m = model(0.7);
        let fam = OscillatorFamily::around(m, 1.5).unwrap();
        let sld = qfi(&fam, 1.5).unwrap().sld;
        let basis = crate::linalg::eigh(&sld).unwrap().eigenvectors;
        for t in [0.4, 1.5, 3.0] {
            let fast = fam.outcome_probabilities(t, &basis).unwrap();
            let dense = crate::estimation::outcome_probabilities(&fam.evaluate(t).unwrap(), &basis);
            let worst = fast.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-12, "T={t}: {worst:e}");
        }
    }

    #[test]
    fn sld_basis_survives_subnormal_tail() {
        // the SLD here has hundreds of subnormal entries in the Fock tail
        let fam = OscillatorFamily::around(model(0.5), 5.0).unwrap();
        let sld = qfi(&fam, 5.0).unwrap().sld;
        let spec = crate::linalg::eigh(&sld).unwrap();
        assert!(spec.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        assert!(spec.orthonormality_error() < 1e-12);
        assert!(spec.reconstruct().max_abs_diff(&sld) < 1e-12);
    }

    #[test]
    fn reference_basis_e_star_at_matching_point() {
        // with A₀ = A_T, H* is diagonal and E* has the export's band structure
        let m = model(0.8);
        let d = m.derived(0.6).unwrap();
        let basis = ReferenceBasis::new(d.a_t, 30);
        let ex = fock_export(&d, Some(29)).unwrap();
        assert!(basis.e_star(&d).max_abs_diff(&ex.e_star) < 1e-12);
        assert!(basis.h_star(d.omega_t, d.a_t).max_abs_diff(&ex.h_star) < 1e-12);
    }

    #[test]
    fn rejects_bad_temperature() {
        assert!(model(0.5).quadratures(0.0).is_err());
        assert!(matches!(model(0.5).report(-1.0), Err(Error::AtTemperature { .. })));
    }
}
