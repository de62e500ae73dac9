//! Complex digamma and trigamma.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// B_2, B_4, ..., B_16.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

const SHIFT_TO: f64 = 10.0;
const POLE_TOL: f64 = 1e-12;

fn check_pole(z: Complex64) -> Result<()> {
    if z.re <= 0.5 && z.im.abs() < POLE_TOL {
        let n = z.re.round();
        if n <= 0.0 && (z.re - n).abs() < POLE_TOL {
            return Err(Error::Domain(format!("polygamma pole at z = {z}")));
        }
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {z}")));
    }
    Ok(())
}

/// ψ(z) = Γ'(z)/Γ(z).
pub fn digamma(z: Complex64) -> Result<Complex64> {
    check_pole(z)?;
    let mut z = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while z.re < SHIFT_TO {
        acc -= z.inv();
        z += 1.0;
    }
    let w = z.inv();
    let w2 = w * w;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = w2;
    for (k, b) in BERNOULLI.iter().enumerate() {
        series += pow * (b / (2.0 * (k + 1) as f64));
        pow *= w2;
    }
    Ok(acc + z.ln() - w * 0.5 - series)
}

/// ψ'(z).
pub fn trigamma(z: Complex64) -> Result<Complex64> {
    check_pole(z)?;
    let mut z = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while z.re < SHIFT_TO {
        acc += (z * z).inv();
        z += 1.0;
    }
    let w = z.inv();
    let w2 = w * w;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = w2 * w;
    for b in BERNOULLI.iter() {
        series += pow * *b;
        pow *= w2;
    }
    Ok(acc + w + w2 * 0.5 + series)
}

pub fn digamma_real(x: f64) -> Result<f64> {
    digamma(Complex64::new(x, 0.0)).map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{LN_2, PI};

    const EULER: f64 = 0.577_215_664_901_532_9;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn digamma_at_one() {
        let v = digamma(c(1.0, 0.0)).unwrap();
        assert!((v.re + EULER).abs() < 1e-14);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn digamma_at_half() {
        let v = digamma_real(0.5).unwrap();
        assert!((v - (-EULER - 2.0 * LN_2)).abs() < 1e-14);
    }

    #[test]
    fn digamma_integers() {
        // ψ(n) = −γ + H_{n−1}
        let mut harmonic = 0.0;
        for n in 1..30 {
            let v = digamma_real(n as f64).unwrap();
            assert!((v - (harmonic - EULER)).abs() < 1e-13 * (1.0 + v.abs()), "n={n}");
            harmonic += 1.0 / n as f64;
        }
    }

    #[test]
    fn digamma_on_imaginary_axis() {
        // Im ψ(1 + iy) = −1/(2y) + (π/2) coth(πy)
        for &y in &[0.1, 0.7, 2.0, 15.0, 80.0] {
            let v = digamma(c(1.0, y)).unwrap();
            let oracle = -1.0 / (2.0 * y) + PI / 2.0 / (PI * y).tanh();
            assert!((v.im - oracle).abs() < 1e-12 * (1.0 + oracle.abs()), "y={y}");
        }
    }

    #[test]
    fn poles_rejected() {
        for n in 0..5 {
            assert!(matches!(digamma(c(-(n as f64), 0.0)), Err(Error::Domain(_))));
            assert!(trigamma(c(-(n as f64) + 1e-13, 0.0)).is_err());
        }
        assert!(digamma(c(-2.0, 1e-6)).is_ok());
        assert!(digamma(c(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn trigamma_values() {
        assert!((trigamma(c(1.0, 0.0)).unwrap().re - PI * PI / 6.0).abs() < 1e-14);
        assert!((trigamma(c(0.5, 0.0)).unwrap().re - PI * PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn trigamma_is_digamma_derivative() {
        for &z in &[c(0.3, 0.2), c(2.5, -1.0), c(1.0, 9.0), c(14.0, 3.0)] {
            let h = 1e-4;
            let d = (digamma(z + h).unwrap() - digamma(z - h).unwrap()) / (2.0 * h);
            let d2 = (digamma(z + h / 2.0).unwrap() - digamma(z - h / 2.0).unwrap()) / h;
            let rich = (d2 * 4.0 - d) / 3.0;
            assert!(rel(trigamma(z).unwrap(), rich) < 1e-9, "z={z}");
        }
    }

    proptest! {
        #[test]
        fn recurrence(re in -8.0f64..30.0, im in 0.05f64..40.0) {
            let z = c(re, im);
            let lhs = digamma(z + 1.0).unwrap() - digamma(z).unwrap();
            prop_assert!(rel(lhs, z.inv()) < 1e-12);
            let t = trigamma(z).unwrap() - trigamma(z + 1.0).unwrap();
            prop_assert!(rel(t, (z * z).inv()) < 1e-11);
        }

        #[test]
        fn duplication(re in 0.01f64..25.0, im in -25.0f64..25.0) {
            // ψ(2z) = ½ψ(z) + ½ψ(z+½) + ln 2
            let z = c(re, im);
            let lhs = digamma(z * 2.0).unwrap();
            let rhs = (digamma(z).unwrap() + digamma(z + 0.5).unwrap()) * 0.5 + LN_2;
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }

        #[test]
        fn conjugate_symmetry(re in 0.01f64..20.0, im in -20.0f64..20.0) {
            let z = c(re, im);
            prop_assert!((digamma(z.conj()).unwrap() - digamma(z).unwrap().conj()).norm() < 1e-14);
        }

        #[test]
        fn reflection(re in 0.05f64..0.95, im in -3.0f64..3.0) {
            // ψ(1−z) − ψ(z) = π cot(πz)
            let z = c(re, im);
            let lhs = digamma(-z + 1.0).unwrap() - digamma(z).unwrap();
            let piz = z * PI;
            let rhs = piz.cos() / piz.sin() * PI;
            prop_assert!((lhs - rhs).norm() <= 1e-11 * (1.0 + rhs.norm()));
        }
    }
}
