//! M4 cubic spline with compact support `2h`, normalized to unit integral.

use std::f64::consts::PI;

/// `W(r, h)`.
#[inline]
pub fn w(r: f64, h: f64) -> f64 {
    let q = r / h;
    let norm = 1.0 / (PI * h * h * h);
    if q < 1.0 {
        norm * (1.0 - 1.5 * q * q + 0.75 * q * q * q)
    } else if q < 2.0 {
        let t = 2.0 - q;
        norm * 0.25 * t * t * t
    } else {
        0.0
    }
}

/// `∂W/∂r`.
#[inline]
pub fn dw(r: f64, h: f64) -> f64 {
    let q = r / h;
    let norm = 1.0 / (PI * h * h * h * h);
    if q < 1.0 {
        norm * (-3.0 * q + 2.25 * q * q)
    } else if q < 2.0 {
        let t = 2.0 - q;
        -norm * 0.75 * t * t
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_value_and_normalization() {
        assert!((w(0.0, 1.0) - 1.0 / PI).abs() < 1e-15);
        let n = 80;
        let dx = 4.0 / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let p = |i: usize| -2.0 + (i as f64 + 0.5) * dx;
                    let r = (p(i).powi(2) + p(j).powi(2) + p(k).powi(2)).sqrt();
                    total += w(r, 1.0) * dx * dx * dx;
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn derivative_matches_difference() {
        for &r in &[0.1, 0.7, 1.0, 1.3, 1.9] {
            let e = 1e-6;
            let fd = (w(r + e, 0.8) - w(r - e, 0.8)) / (2.0 * e);
            assert!((fd - dw(r, 0.8)).abs() < 1e-8);
        }
        assert_eq!(w(2.0, 1.0), 0.0);
        assert_eq!(dw(2.5, 1.0), 0.0);
    }
}
