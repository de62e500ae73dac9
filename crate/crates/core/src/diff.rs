//! Central differences with one Richardson extrapolation step.

use crate::error::Result;
use crate::linalg::{ComplexMatrix, HermitianOperator};

/// Values that can be linearly combined, `a·x + b·y`.
pub trait Combine: Sized {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self;
}

impl Combine for f64 {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        a * self + b * other
    }
}

impl Combine for ComplexMatrix {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        self.scale(a) + other.scale(b)
    }
}

impl Combine for HermitianOperator {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        &self.scale(a) + &other.scale(b)
    }
}

impl<const N: usize> Combine for [f64; N] {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        std::array::from_fn(|i| a * self[i] + b * other[i])
    }
}

#[derive(Clone, Debug)]
pub struct Derivative<T> {
    /// `(4 D(h/2) − D(h))/3`.
    pub richardson: T,
    /// `D(h) = (f(x+h) − f(x−h))/2h`.
    pub single: T,
}

/// Richardson estimate from the four stencil values `f(x±h)`, `f(x±h/2)`.
pub fn richardson_from_values<T: Combine>(plus: &T, minus: &T, half_plus: &T, half_minus: &T, h: f64) -> Derivative<T> {
    let single = plus.combine(0.5 / h, minus, -0.5 / h);
    let half = half_plus.combine(1.0 / h, half_minus, -1.0 / h);
    let richardson = half.combine(4.0 / 3.0, &single, -1.0 / 3.0);
    Derivative { richardson, single }
}

/// Derivative of `f` at `x` with step `h`; stencil failures carry their location.
pub fn central_richardson<T, F>(mut f: F, x: f64, h: f64) -> Result<Derivative<T>>
where
    T: Combine,
    F: FnMut(f64) -> Result<T>,
{
    let mut at = |t: f64| f(t).map_err(|e| e.at_stencil(t));
    let plus = at(x + h)?;
    let minus = at(x - h)?;
    let half_plus = at(x + 0.5 * h)?;
    let half_minus = at(x - 0.5 * h)?;
    Ok(richardson_from_values(&plus, &minus, &half_plus, &half_minus, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn exact_on_quartics() {
        let d = central_richardson(|x: f64| Ok(x.powi(4) - 3.0 * x.powi(3) + x), 0.7, 0.1).unwrap();
        let exact = 4.0 * 0.7f64.powi(3) - 9.0 * 0.49 + 1.0;
        assert!((d.richardson - exact).abs() < 1e-12);
        assert!((d.single - exact).abs() > 1e-4);
    }

    #[test]
    fn sin_derivative_accuracy() {
        let d = central_richardson(|x: f64| Ok(x.sin()), 1.0, 1e-3).unwrap();
        assert!((d.richardson - 1f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn stencil_failure_reports_location() {
        let err = central_richardson(|x: f64| if x > 1.0 { Err(Error::Numeric("x".into())) } else { Ok(x) }, 1.0, 0.1)
            .unwrap_err();
        match err {
            Error::Stencil { theta, .. } => assert!((theta - 1.1).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }
}
