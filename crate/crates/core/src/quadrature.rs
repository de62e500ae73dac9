//! Adaptive Gauss-Legendre quadrature on a finite interval.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes and weights of an n-point Gauss-Legendre rule on [−1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Roots of P_n by Newton iteration from the Chebyshev guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn ten_point() -> &'static Self {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(10))
    }

    pub fn integrate<F>(&self, f: &mut F, a: f64, b: f64) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x)?;
        }
        Ok(sum * half)
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[derive(Clone, Copy, Debug)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

pub const DEFAULT_MAX_EVALUATIONS: usize = 100_000;

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol` by bisection.
///
/// Each panel compares the 10-point rule on the whole panel with the sum over
/// its two halves; a panel is accepted once the difference is within its share
/// of the tolerance.
pub fn integrate_adaptive<F>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_evaluations: usize,
) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(abs_tol > 0.0) || !(b > a) {
        return Err(Error::Domain(format!(
            "quadrature needs a < b and positive tolerance (a={a}, b={b}, tol={abs_tol})"
        )));
    }
    let rule = GaussLegendre::ten_point();
    let per_panel = rule.nodes.len();
    let mut evaluations = per_panel;
    let whole = rule.integrate(&mut f, a, b)?;
    let mut stack = vec![(a, b, whole, abs_tol, f64::INFINITY)];
    let mut value = 0.0;
    let mut error_estimate = 0.0;
    while let Some((lo, hi, estimate, tol, inherited)) = stack.pop() {
        if evaluations + 2 * per_panel > max_evaluations {
            let pending: f64 = stack.iter().map(|p| p.4).sum::<f64>() + inherited;
            return Err(Error::Quadrature {
                achieved: error_estimate + pending,
                requested: abs_tol,
            });
        }
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(&mut f, lo, mid)?;
        let right = rule.integrate(&mut f, mid, hi)?;
        evaluations += 2 * per_panel;
        let refined = left + right;
        let diff = (refined - estimate).abs();
        if diff <= tol || hi - lo < 1e-12 * (b - a) {
            value += refined;
            error_estimate += diff;
        } else {
            stack.push((mid, hi, right, 0.5 * tol, 0.5 * diff));
            stack.push((lo, mid, left, 0.5 * tol, 0.5 * diff));
        }
    }
    Ok(QuadratureResult {
        value,
        error_estimate,
        evaluations,
    })
}
