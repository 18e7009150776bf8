//! Shared helpers for JSON reports.

use num_complex::Complex64;
use serde::Serialize;

/// Version tag carried by every report the CLI writes.
pub const SCHEMA_VERSION: &str = "fockcascade-report/1";

/// Rounds to 12 significant digits so reports stay stable across
/// platforms with different last-bit rounding.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComplexOut {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexOut {
    fn from(z: Complex64) -> Self {
        Self {
            re: sig12(z.re),
            im: sig12(z.im),
        }
    }
}

pub fn complex_vec(v: &[Complex64]) -> Vec<ComplexOut> {
    v.iter().copied().map(ComplexOut::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(sig12(0.5), 0.5);
        assert_eq!(sig12(1.0 / 3.0), 0.333333333333);
        assert_eq!(sig12(-2.0e-20 / 3.0), -6.66666666667e-21);
        assert_eq!(sig12(0.0), 0.0);
    }
}
