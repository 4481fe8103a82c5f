//! Classical fixed-step Runge–Kutta.

use crate::Result;

/// One RK4 step of `y' = f(t, y)`.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let add = |a: &[f64; N], b: &[f64; N], s: f64| -> [f64; N] { std::array::from_fn(|i| a[i] + s * b[i]) };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &add(y, &k1, 0.5 * h))?;
    let k3 = f(t + 0.5 * h, &add(y, &k2, 0.5 * h))?;
    let k4 = f(t + h, &add(y, &k3, h))?;
    Ok(std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_global_error_is_fourth_order() {
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = [1.0];
            let mut f = |_t: f64, y: &[f64; 1]| Ok([y[0]]);
            for i in 0..n {
                y = rk4_step(&mut f, i as f64 * h, &y, h).unwrap();
            }
            (y[0] - 1f64.exp()).abs()
        };
        let ratio = err(20) / err(40);
        assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
    }

    #[test]
    fn harmonic_oscillator_period() {
        let n = 2000;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut y = [1.0, 0.0];
        let mut f = |_t: f64, y: &[f64; 2]| Ok([y[1], -y[0]]);
        for i in 0..n {
            y = rk4_step(&mut f, i as f64 * h, &y, h).unwrap();
        }
        assert!((y[0] - 1.0).abs() < 1e-10 && y[1].abs() < 1e-10);
    }
}
