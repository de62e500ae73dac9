//! Equilibrium thermodynamics of a system strongly coupled to a finite
//! reservoir, through the Hamiltonian of mean force.
//!
//! Conventions: `H = H_S ⊗ I + I ⊗ H_R + V`, `k_B = ħ = 1`. The reduced
//! state is written as `π_S = e^{−βH*}/Z*` with
//! `H* = −T ln(tr_R e^{−βH} / tr e^{−βH_R})`, and the effective energy operator
//! is `E* = ∂_β(βH*)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::diff::{central_richardson, richardson_from_values};
use crate::error::{Error, Result};
use crate::fisher::{qfi_from_derivative, StateFamily};
use crate::linalg::{
    eigh, kron, partial_trace_r_matrix, trace_product, ComplexMatrix, DensityMatrix, HermitianOperator,
    SpectralDecomposition, EPS_RANK,
};
use crate::skew::{log_mean, skew_avg};

/// Step for C and ⟨∂_T E*⟩, relative to T.
pub const TEMPERATURE_STEP: f64 = 1e-4;
pub const FDR_TOL: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct CompositeModel {
    pub dim_s: usize,
    pub dim_r: usize,
    pub h_s: HermitianOperator,
    pub h_r: HermitianOperator,
    pub v: HermitianOperator,
}

impl CompositeModel {
    pub fn new(h_s: HermitianOperator, h_r: HermitianOperator, v: HermitianOperator) -> Result<Self> {
        let (dim_s, dim_r) = (h_s.dim(), h_r.dim());
        if v.dim() != dim_s * dim_r {
            return Err(Error::Dimension(format!(
                "coupling dim {} is not {dim_s}·{dim_r}",
                v.dim()
            )));
        }
        Ok(Self { dim_s, dim_r, h_s, h_r, v })
    }

    /// Same model with the coupling scaled by `eps`.
    pub fn with_coupling_scale(&self, eps: f64) -> Self {
        Self {
            v: self.v.scale(eps),
            ..self.clone()
        }
    }

    pub fn hamiltonian(&self) -> Result<HermitianOperator> {
        let hs = kron(&self.h_s, &HermitianOperator::identity(self.dim_r))?;
        let hr = kron(&HermitianOperator::identity(self.dim_s), &self.h_r)?;
        Ok(&(&hs + &hr) + &self.v)
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("temperature must be positive and finite, got {t}")));
    }
    Ok(())
}

/// Temperature-dependent pieces shared by all derived quantities.
struct Snapshot {
    /// π_S as a density matrix.
    pi: DensityMatrix,
    /// `tr_R[(H − e0) e^{−β(H−e0)}]/Z̃`.
    y: ComplexMatrix,
    /// Global internal energy ⟨H⟩.
    u_total: f64,
    /// ln Z̃ for the shifted global Hamiltonian.
    ln_z: f64,
    /// ⟨H_R⟩ in the bare reservoir Gibbs state.
    u_reservoir: f64,
    ln_z_reservoir: f64,
}

/// Caches the β-independent spectra of `H` and `H_R`.
#[derive(Clone, Debug)]
pub struct MeanForce {
    model: CompositeModel,
    total: SpectralDecomposition,
    reservoir: SpectralDecomposition,
}

impl MeanForce {
    pub fn new(model: CompositeModel) -> Result<Self> {
        let total = eigh(&model.hamiltonian()?)?;
        let reservoir = eigh(&model.h_r)?;
        Ok(Self { model, total, reservoir })
    }

    pub fn model(&self) -> &CompositeModel {
        &self.model
    }

    fn e0(&self) -> f64 {
        *self.total.eigenvalues.last().unwrap()
    }

    fn r0(&self) -> f64 {
        *self.reservoir.eigenvalues.last().unwrap()
    }

    /// `e^{−βH}/Z` of the composite system.
    pub fn global_gibbs(&self, t: f64) -> Result<DensityMatrix> {
        check_temperature(t)?;
        DensityMatrix::gibbs_from_spectrum(&self.total, 1.0 / t)
    }

    fn snapshot(&self, t: f64) -> Result<Snapshot> {
        check_temperature(t)?;
        let beta = 1.0 / t;
        let e0 = self.e0();
        let n = self.total.dim();
        let weights: Vec<f64> = self
            .total
            .eigenvalues
            .iter()
            .map(|&e| (-beta * (e - e0)).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        let u = &self.total.eigenvectors;
        let mut scaled_w = u.clone();
        let mut scaled_y = u.clone();
        let mut u_total = 0.0;
        for j in 0..n {
            let w = weights[j] / z;
            let shifted = self.total.eigenvalues[j] - e0;
            u_total += w * self.total.eigenvalues[j];
            for i in 0..n {
                scaled_w[(i, j)] *= w;
                scaled_y[(i, j)] *= w * shifted;
            }
        }
        let rho = scaled_w * u.adjoint();
        let y = scaled_y * u.adjoint();
        let (ds, dr) = (self.model.dim_s, self.model.dim_r);
        let pi_m = partial_trace_r_matrix(&rho, ds, dr)?;
        let y = partial_trace_r_matrix(&y, ds, dr)?;
        let pi = DensityMatrix::new(HermitianOperator::hermitize(pi_m))?;
        if let Some(&p) = pi.probabilities().iter().find(|&&p| p <= EPS_RANK) {
            return Err(Error::Numeric(format!(
                "reduced state eigenvalue {p:e} below floor; beta too large for double precision"
            )));
        }

        let r0 = self.r0();
        let rw: Vec<f64> = self
            .reservoir
            .eigenvalues
            .iter()
            .map(|&e| (-beta * (e - r0)).exp())
            .collect();
        let zr: f64 = rw.iter().sum();
        let u_reservoir = rw
            .iter()
            .zip(&self.reservoir.eigenvalues)
            .map(|(w, e)| w * e)
            .sum::<f64>()
            / zr;
        Ok(Snapshot {
            pi,
            y: HermitianOperator::hermitize(y).into_matrix(),
            u_total,
            ln_z: z.ln(),
            u_reservoir,
            ln_z_reservoir: zr.ln(),
        })
    }

    /// `H* = −T ln π_S + (e0 − r0) − T(ln Z̃ − ln Z̃_R)`.
    fn h_star_of(&self, s: &Snapshot, t: f64) -> HermitianOperator {
        let shift = (self.e0() - self.r0()) - t * (s.ln_z - s.ln_z_reservoir);
        s.pi.spectrum().map(|p| -t * p.ln() + shift)
    }

    /// `E* = D ln π_S[Y] + e0 − ⟨H_R⟩`, with the Fréchet derivative of the
    /// logarithm in divided-difference form.
    fn e_star_of(&self, s: &Snapshot) -> HermitianOperator {
        let spec = s.pi.spectrum();
        let p = &spec.eigenvalues;
        let mut m = HermitianOperator::hermitize(s.y.clone()).in_basis(&spec.eigenvectors);
        for i in 0..p.len() {
            for j in 0..p.len() {
                m[(i, j)] /= log_mean(p[i], p[j]);
            }
        }
        HermitianOperator::from_basis(&m, &spec.eigenvectors).shift(self.e0() - s.u_reservoir)
    }

    pub fn reduced_state(&self, t: f64) -> Result<DensityMatrix> {
        Ok(self.snapshot(t)?.pi)
    }

    pub fn mean_force_hamiltonian(&self, t: f64) -> Result<HermitianOperator> {
        let s = self.snapshot(t)?;
        Ok(self.h_star_of(&s, t))
    }

    pub fn effective_energy_operator(&self, t: f64) -> Result<HermitianOperator> {
        let s = self.snapshot(t)?;
        Ok(self.e_star_of(&s))
    }

    /// `U_{S∪R}` and `Ũ_R`, whose difference is the system's internal energy.
    pub fn energies(&self, t: f64) -> Result<(f64, f64)> {
        let s = self.snapshot(t)?;
        Ok((s.u_total, s.u_reservoir))
    }

    /// `∂_T π_S = (Y − (U_{S∪R} − e0)π_S)/T²`.
    pub fn reduced_state_derivative(&self, t: f64) -> Result<HermitianOperator> {
        let s = self.snapshot(t)?;
        Ok(self.pi_derivative_of(&s, t))
    }

    fn pi_derivative_of(&self, s: &Snapshot, t: f64) -> HermitianOperator {
        let y = HermitianOperator::hermitize(s.y.clone());
        let centered = &y - &s.pi.operator().scale(s.u_total - self.e0());
        centered.scale(1.0 / (t * t))
    }

    pub fn thermo_report(&self, t: f64) -> Result<ThermoReport> {
        self.thermo_report_inner(t).map_err(|e| e.at_temperature(t))
    }

    fn thermo_report_inner(&self, t: f64) -> Result<ThermoReport> {
        let s = self.snapshot(t)?;
        let h_star = self.h_star_of(&s, t);
        let e_star = self.e_star_of(&s);
        let part = skew_avg(&s.pi, &e_star)?;
        let u = crate::linalg::expectation(&s.pi, &e_star)?;

        let h = TEMPERATURE_STEP * t;
        let mut energy = Vec::with_capacity(4);
        let mut e_ops = Vec::with_capacity(4);
        for tt in [t + h, t - h, t + 0.5 * h, t - 0.5 * h] {
            let st = self.snapshot(tt).map_err(|e| e.at_stencil(tt))?;
            energy.push(st.u_total - st.u_reservoir);
            e_ops.push(self.e_star_of(&st).into_matrix());
        }
        let c = richardson_from_values(&energy[0], &energy[1], &energy[2], &energy[3], h).richardson;
        let de = richardson_from_values(&e_ops[0], &e_ops[1], &e_ops[2], &e_ops[3], h).richardson;
        let dt_e_star_mean = trace_product(s.pi.matrix(), &de).re;

        let d_pi = self.pi_derivative_of(&s, t);
        let qfi_t = qfi_from_derivative(&s.pi, &d_pi)?.qfi;

        let scalars = ThermoScalars::assemble(t, u, part.variance, part.quantum, part.classical, c, dt_e_star_mean, qfi_t);
        Ok(ThermoReport {
            scalars,
            pi_s: s.pi,
            h_star,
            e_star,
        })
    }

    /// One report per grid point, in grid order; failures are kept per point.
    pub fn temperature_sweep(&self, grid: &[f64]) -> Vec<SweepPoint> {
        grid.par_iter()
            .enumerate()
            .map(|(index, &t)| SweepPoint {
                index,
                temperature: t,
                result: self.thermo_report(t),
            })
            .collect()
    }
}

/// The family `T ↦ π_S(T)` with the exact temperature derivative.
impl StateFamily for MeanForce {
    fn evaluate(&self, theta: f64) -> Result<DensityMatrix> {
        self.reduced_state(theta)
    }

    fn step_hint(&self, theta: f64) -> f64 {
        TEMPERATURE_STEP * theta.abs()
    }

    fn state_derivative(&self, theta: f64) -> Result<HermitianOperator> {
        self.reduced_state_derivative(theta)
    }
}

/// Temperature-dependent scalars shared by the finite-model and oscillator reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThermoScalars {
    #[serde(rename = "T")]
    pub temperature: f64,
    pub beta: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "varU")]
    pub var_u: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "dT_E_star_mean")]
    pub dt_e_star_mean: f64,
    #[serde(rename = "qfi_T")]
    pub qfi_t: f64,
    pub snr_opt: f64,
    pub snr_bound: f64,
    pub delta_beta_strong: f64,
    pub delta_beta_weak: f64,
    /// `|C − varU/T² + Q/T² − ⟨∂_T E*⟩|`.
    pub fdr_residual: f64,
}

impl ThermoScalars {
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(t: f64, u: f64, var_u: f64, q: f64, k: f64, c: f64, dt_e_star_mean: f64, qfi_t: f64) -> Self {
        let snr_bound = c - dt_e_star_mean;
        Self {
            temperature: t,
            beta: 1.0 / t,
            u,
            var_u,
            q,
            k,
            c,
            dt_e_star_mean,
            qfi_t,
            snr_opt: t * t * qfi_t,
            snr_bound,
            delta_beta_strong: 1.0 / (var_u - q).sqrt(),
            delta_beta_weak: 1.0 / var_u.sqrt(),
            fdr_residual: (c - (var_u - q) / (t * t) - dt_e_star_mean).abs(),
        }
    }

    /// Whether no unbiased estimator can reach a positive SNR bound here.
    pub fn negative_snr_bound(&self) -> bool {
        self.snr_bound < 0.0
    }

    /// Names of the report invariants that fail; empty when all hold.
    pub fn verify(&self, fdr_tol: f64) -> Vec<String> {
        let mut failed = Vec::new();
        let t2 = self.temperature * self.temperature;
        let k = self.k;
        if !self.fdr_residual.is_finite() || self.fdr_residual > fdr_tol * (1.0 + self.c.abs()) {
            failed.push(format!("fdr residual {:e}", self.fdr_residual));
        }
        let t4f = t2 * t2 * self.qfi_t;
        if !(t4f <= k + 1e-8 * (1.0 + k)) {
            failed.push(format!("T^4 qfi_T = {t4f:e} exceeds K = {k:e}"));
        }
        if self.q < -1e-10 || self.k < -1e-10 {
            failed.push(format!("negative partition term Q = {:e}, K = {:e}", self.q, self.k));
        }
        if !(self.delta_beta_strong >= self.delta_beta_weak * (1.0 - 1e-12)) {
            failed.push("strong bound below weak bound".into());
        }
        let alt = (self.var_u - self.q) / t2;
        if (self.snr_bound - alt).abs() > fdr_tol * (1.0 + self.c.abs()) {
            failed.push(format!("snr_bound {:e} vs (varU − Q)/T² {alt:e}", self.snr_bound));
        }
        failed
    }

    /// CSV columns of the mean-force sweep, in order.
    pub const CSV_COLUMNS: [&'static str; 13] = [
        "T",
        "U",
        "varU",
        "Q",
        "K",
        "C",
        "dT_E_star_mean",
        "qfi_T",
        "snr_opt",
        "snr_bound",
        "delta_beta_strong",
        "delta_beta_weak",
        "fdr_residual",
    ];

    pub fn csv_values(&self) -> [f64; 13] {
        [
            self.temperature,
            self.u,
            self.var_u,
            self.q,
            self.k,
            self.c,
            self.dt_e_star_mean,
            self.qfi_t,
            self.snr_opt,
            self.snr_bound,
            self.delta_beta_strong,
            self.delta_beta_weak,
            self.fdr_residual,
        ]
    }
}

#[derive(Clone, Debug)]
pub struct ThermoReport {
    pub scalars: ThermoScalars,
    pub pi_s: DensityMatrix,
    pub h_star: HermitianOperator,
    pub e_star: HermitianOperator,
}

#[derive(Debug)]
pub struct SweepPoint {
    pub index: usize,
    pub temperature: f64,
    pub result: Result<ThermoReport>,
}

pub fn global_gibbs(model: &CompositeModel, t: f64) -> Result<DensityMatrix> {
    check_temperature(t)?;
    DensityMatrix::gibbs(&model.hamiltonian()?, 1.0 / t)
}

pub fn mean_force_hamiltonian(model: &CompositeModel, t: f64) -> Result<HermitianOperator> {
    MeanForce::new(model.clone())?.mean_force_hamiltonian(t)
}

pub fn effective_energy_operator(model: &CompositeModel, t: f64) -> Result<HermitianOperator> {
    MeanForce::new(model.clone())?.effective_energy_operator(t)
}

pub fn thermo_report(model: &CompositeModel, t: f64) -> Result<ThermoReport> {
    MeanForce::new(model.clone())?.thermo_report(t)
}

pub fn temperature_sweep(model: &CompositeModel, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("temperature grid must be strictly ascending".into()));
    }
    if let Some(&t) = grid.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::Domain(format!("non-positive temperature {t} in grid")));
    }
    Ok(MeanForce::new(model.clone())?.temperature_sweep(grid))
}

/// `E* = ∂_β(βH*)` by central differences in β, for cross-checking.
pub fn effective_energy_operator_numeric(engine: &MeanForce, t: f64) -> Result<HermitianOperator> {
    let beta = 1.0 / t;
    let h = 1e-5 * beta;
    let d = central_richardson(|b| Ok(engine.mean_force_hamiltonian(1.0 / b)?.scale(b)), beta, h)?;
    Ok(d.richardson)
}
