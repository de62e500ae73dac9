//! Temperature grids.

use crate::error::{Error, Result};

/// `points` log-spaced values from `min` to `max` inclusive.
pub fn log_space(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0) || !(max >= min) || !max.is_finite() {
        return Err(Error::Domain(format!("grid needs 0 < min <= max, got [{min}, {max}]")));
    }
    match points {
        0 => Err(Error::Domain("grid needs at least one point".into())),
        1 => Ok(vec![min]),
        _ if max == min => Err(Error::Domain("grid with several points needs min < max".into())),
        _ => {
            let (a, b) = (min.ln(), max.ln());
            let step = (b - a) / (points - 1) as f64;
            let mut v: Vec<f64> = (0..points).map(|i| (a + step * i as f64).exp()).collect();
            v[0] = min;
            v[points - 1] = max;
            Ok(v)
        }
    }
}

/// Checks that a grid is non-empty, strictly positive and strictly ascending.
pub fn validate(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("empty grid".into()));
    }
    if let Some(t) = grid.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::Domain(format!("grid value {t} is not positive")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("grid must be strictly ascending".into()));
    }
    Ok(())
}
