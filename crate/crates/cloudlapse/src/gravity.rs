//! Gravity fields seen by boundary parcels.

use crate::potential::{eval_gravity, eval_tidal, DensityModel};
use crate::quadrature::QuadratureSpec;
use crate::{Mat3, Vec3, FOUR_PI};

/// Gradient (and optionally Hessian) of Φ along a parcel path.
///
/// The velocity argument lets frame-relative surrogates orient themselves
/// with respect to the parcel's tangential motion.
pub trait GravityField: Sync {
    fn gradient(&self, t: f64, chi: &Vec3, w: &Vec3) -> Vec3;

    fn tidal(&self, _t: f64, _chi: &Vec3, _w: &Vec3) -> Option<Mat3> {
        None
    }

    /// Radial and tangential projections `(χ̂·∇Φ, X̂·∇Φ)` expressed through
    /// the reduced variables alone, when the field allows it.
    fn projections(&self, _t: f64, _q: f64, _z: f64, _y: f64) -> Option<(f64, f64)> {
        None
    }
}

/// No gravity at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroGravity;

impl GravityField for ZeroGravity {
    fn gradient(&self, _t: f64, _chi: &Vec3, _w: &Vec3) -> Vec3 {
        Vec3::zeros()
    }

    fn tidal(&self, _t: f64, _chi: &Vec3, _w: &Vec3) -> Option<Mat3> {
        Some(Mat3::zeros())
    }

    fn projections(&self, _t: f64, _q: f64, _z: f64, _y: f64) -> Option<(f64, f64)> {
        Some((0.0, 0.0))
    }
}

/// Inverse-square surrogate `|∇Φ| = μ/|χ|²`, directed at angle `tilt` from
/// the outward radial towards the parcel's tangential velocity. With zero
/// tilt this is exactly a point mass `4πμ` at the origin.
#[derive(Debug, Clone, Copy)]
pub struct InverseSquare {
    pub mu: f64,
    pub tilt: f64,
}

impl InverseSquare {
    pub fn radial(mu: f64) -> Self {
        Self { mu, tilt: 0.0 }
    }

    /// Point-mass surrogate for total mass `m`.
    pub fn point_mass(m: f64) -> Self {
        Self::radial(m / FOUR_PI)
    }
}

impl GravityField for InverseSquare {
    fn gradient(&self, _t: f64, chi: &Vec3, w: &Vec3) -> Vec3 {
        let r2 = chi.norm_squared();
        let n = chi / r2.sqrt();
        let tangential = w - n * n.dot(w);
        let x = tangential.norm();
        let (s, c) = self.tilt.sin_cos();
        let dir = if x > 0.0 { n * c + tangential * (s / x) } else { n * c };
        dir * (self.mu / r2)
    }

    /// Hessian of the point mass (the tilt does not enter).
    fn tidal(&self, _t: f64, chi: &Vec3, _w: &Vec3) -> Option<Mat3> {
        let r2 = chi.norm_squared();
        let r3 = r2 * r2.sqrt();
        Some((Mat3::identity() - chi * chi.transpose() * (3.0 / r2)) * (self.mu / r3))
    }

    fn projections(&self, _t: f64, q: f64, _z: f64, y: f64) -> Option<(f64, f64)> {
        let g = self.mu * q * q;
        let (s, c) = self.tilt.sin_cos();
        Some((g * c, if y > 0.0 { g * s } else { 0.0 }))
    }
}

/// Field of a static density model by quadrature.
#[derive(Debug, Clone)]
pub struct DensityGravity {
    pub density: DensityModel,
    pub quad: QuadratureSpec,
}

impl GravityField for DensityGravity {
    fn gradient(&self, t: f64, chi: &Vec3, _w: &Vec3) -> Vec3 {
        eval_gravity(&self.density, t, chi, &self.quad).unwrap_or_else(|_| Vec3::repeat(f64::NAN))
    }

    fn tidal(&self, t: f64, chi: &Vec3, _w: &Vec3) -> Option<Mat3> {
        eval_tidal(&self.density, t, chi, &self.quad).ok()
    }
}

/// Direct-sum field of particle snapshots, linear in time between frames.
#[derive(Debug, Clone)]
pub struct SnapshotGravity {
    pub times: Vec<f64>,
    pub frames: Vec<Vec<(Vec3, f64)>>,
    pub softening: f64,
}

impl SnapshotGravity {
    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let j = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        (j - 1, j, (t - t0) / (t1 - t0))
    }

    fn frame_gradient(&self, k: usize, x: &Vec3) -> Vec3 {
        let e2 = self.softening * self.softening;
        let mut g = Vec3::zeros();
        for (y, m) in &self.frames[k] {
            let d = x - y;
            let s2 = d.norm_squared() + e2;
            g += d * (m / (s2 * s2.sqrt()));
        }
        g / FOUR_PI
    }

    fn frame_tidal(&self, k: usize, x: &Vec3) -> Mat3 {
        let e2 = self.softening * self.softening;
        let mut h = Mat3::zeros();
        for (y, m) in &self.frames[k] {
            let d = x - y;
            let s2 = d.norm_squared() + e2;
            h += (Mat3::identity() - d * d.transpose() * (3.0 / s2)) * (m / (s2 * s2.sqrt()));
        }
        h / FOUR_PI
    }
}

impl GravityField for SnapshotGravity {
    fn gradient(&self, t: f64, chi: &Vec3, _w: &Vec3) -> Vec3 {
        let (a, b, s) = self.bracket(t);
        let ga = self.frame_gradient(a, chi);
        if a == b {
            return ga;
        }
        ga * (1.0 - s) + self.frame_gradient(b, chi) * s
    }

    fn tidal(&self, t: f64, chi: &Vec3, _w: &Vec3) -> Option<Mat3> {
        let (a, b, s) = self.bracket(t);
        let ha = self.frame_tidal(a, chi);
        if a == b {
            return Some(ha);
        }
        Some(ha * (1.0 - s) + self.frame_tidal(b, chi) * s)
    }
}

/// Another field with its strength multiplied by `factor`.
pub struct Scaled<'a, G: GravityField + ?Sized> {
    pub inner: &'a G,
    pub factor: f64,
}

impl<G: GravityField + ?Sized> GravityField for Scaled<'_, G> {
    fn gradient(&self, t: f64, chi: &Vec3, w: &Vec3) -> Vec3 {
        self.inner.gradient(t, chi, w) * self.factor
    }

    fn tidal(&self, t: f64, chi: &Vec3, w: &Vec3) -> Option<Mat3> {
        self.inner.tidal(t, chi, w).map(|h| h * self.factor)
    }

    fn projections(&self, t: f64, q: f64, z: f64, y: f64) -> Option<(f64, f64)> {
        self.inner.projections(t, q, z, y).map(|(a, b)| (a * self.factor, b * self.factor))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_projections_agree_with_gradient() {
        let g = InverseSquare { mu: 0.7, tilt: 0.3 };
        let chi = Vec3::new(1.0, 2.0, -0.5);
        let w = Vec3::new(0.2, -0.1, 0.4);
        let grad = g.gradient(0.0, &chi, &w);
        let n = chi.normalize();
        let xv = w - n * n.dot(&w);
        let q = 1.0 / chi.norm();
        let y = q * xv.norm_squared();
        let (gr, gt) = g.projections(0.0, q, n.dot(&w), y).unwrap();
        assert!((grad.dot(&n) - gr).abs() < 1e-15);
        assert!((grad.dot(&xv.normalize()) - gt).abs() < 1e-15);
        assert!((grad.norm() - 0.7 * q * q).abs() < 1e-15);
    }

    #[test]
    fn point_mass_hessian_is_traceless() {
        let g = InverseSquare::radial(1.0);
        let h = g.tidal(0.0, &Vec3::new(0.0, 2.0, 0.0), &Vec3::zeros()).unwrap();
        assert!(h.trace().abs() < 1e-15);
        assert!((h[(1, 1)] + 2.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn snapshot_interpolation() {
        let s = SnapshotGravity {
            times: vec![0.0, 1.0],
            frames: vec![vec![(Vec3::zeros(), 1.0)], vec![(Vec3::zeros(), 3.0)]],
            softening: 0.0,
        };
        let x = Vec3::new(1.0, 0.0, 0.0);
        let g = s.gradient(0.5, &x, &Vec3::zeros());
        assert!((g.x - 2.0 / FOUR_PI).abs() < 1e-15);
    }
}
