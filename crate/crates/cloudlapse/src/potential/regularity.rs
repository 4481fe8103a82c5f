use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::DensityModel;
use crate::quadrature::sphere_crossings;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Sampling resolution for the regularity falsifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSpec {
    pub boundary_points: usize,
    pub ball_samples: usize,
    pub seed: u64,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self { boundary_points: 200, ball_samples: 400, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityWitness {
    pub t: f64,
    pub x: [f64; 3],
    pub r: [f64; 3],
    pub density: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub b: u8,
    pub delta: f64,
    pub g_bound: f64,
    pub verdict: Verdict,
    pub witness: Option<RegularityWitness>,
    /// Number of `(x, r)` pairs tested.
    pub samples: usize,
}

/// `G_b = (1/(2(b+1)δ^{3−b}) + 3(2−b)/4) M/π`.
pub fn regularity_constant(b: u8, delta: f64, mass: f64) -> f64 {
    let bf = f64::from(b);
    (1.0 / (2.0 * (bf + 1.0) * delta.powf(3.0 - bf)) + 0.75 * (2.0 - bf)) * mass / PI
}

/// Directions spread evenly over the sphere (Fibonacci lattice).
pub(crate) fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(s * phi.cos(), s * phi.sin(), z)
        })
        .collect()
}

/// Points of `∂Ω`, one per direction from the origin, at the outermost radius
/// where ρ exceeds `10⁻¹²` of the peak. Spherical cores are intersected
/// exactly; other models are scanned inwards and bisected.
pub fn boundary_points(density: &DensityModel, n: usize) -> Result<Vec<Vec3>> {
    let peak = density.peak_density();
    if !(peak > 0.0) {
        return Err(Error::EmptyBoundary);
    }
    let level = 1e-12 * peak;
    let rmax = density.support_radius();
    let origin = Vec3::zeros();
    let pts: Vec<Vec3> = fibonacci_sphere(n)
        .into_par_iter()
        .filter_map(|dir| {
            if let Some(cores) = density.cores() {
                cores
                    .iter()
                    .filter(|c| c.peak_density > 0.0)
                    .filter_map(|c| sphere_crossings(&origin, &dir, &c.center(), c.radius).map(|(_, b)| b))
                    .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.max(b))))
                    .map(|r| dir * r)
            } else {
                let steps = 2000;
                let dr = rmax / steps as f64;
                let hit = (0..=steps).rev().find(|&i| density.value(&(dir * (i as f64 * dr))) > level)?;
                let (mut lo, mut hi) = (hit as f64 * dr, (hit + 1) as f64 * dr);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if density.value(&(dir * mid)) > level {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(dir * hi)
            }
        })
        .collect();
    if pts.is_empty() {
        Err(Error::EmptyBoundary)
    } else {
        Ok(pts)
    }
}

/// Sampled test of `ρ(t, |x| r) < 3M |n − r|^{1−b} / (4πδ|x|³)` over boundary
/// points `x` (with `n = x/|x|`) and `r ∈ B(n, δ)`. Points where `|x| r`
/// leaves the support count with ρ = 0.
pub fn classify_regularity(
    density: &DensityModel,
    t_grid: &[f64],
    b: u8,
    delta: f64,
    sampler: &SamplerSpec,
) -> Result<RegularityReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    if b > 1 {
        return Err(Error::Degenerate(format!("regularity index must be 0 or 1, got {b}")));
    }
    let mass = density.total_mass();
    let g_bound = regularity_constant(b, delta, mass);
    let times: &[f64] = if t_grid.is_empty() { &[0.0] } else { t_grid };
    let pts = boundary_points(density, sampler.boundary_points)?;
    let exponent = 1.0 - f64::from(b);

    let mut witness = None;
    let mut samples = 0;
    for &t in times {
        let found: Vec<Option<RegularityWitness>> = pts
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed.wrapping_add(i as u64));
                let norm = x.norm();
                let n = x / norm;
                let scale = 3.0 * mass / (4.0 * PI * delta * norm.powi(3));
                for _ in 0..sampler.ball_samples {
                    let dir = loop {
                        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                        let l = v.norm();
                        if l > 1e-3 && l <= 1.0 {
                            break v / l;
                        }
                    };
                    // radii biased towards n, where the b = 0 bound is tightest
                    let s: f64 = rng.gen::<f64>();
                    let r = n + dir * (delta * s * s);
                    let dist = (n - r).norm();
                    let bound = scale * dist.powf(exponent);
                    let rho = density.value(&(r * norm));
                    if !(rho < bound) {
                        return Some(RegularityWitness { t, x: (*x).into(), r: r.into(), density: rho, bound });
                    }
                }
                None
            })
            .collect();
        samples += pts.len() * sampler.ball_samples;
        if let Some(w) = found.into_iter().flatten().next() {
            witness = Some(w);
            break;
        }
    }
    Ok(RegularityReport {
        b,
        delta,
        g_bound,
        verdict: if witness.is_some() { Verdict::Fail } else { Verdict::Pass },
        witness,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_matches_closed_forms() {
        let m = 2.0;
        let d = 0.4;
        let g1 = (1.0 / (d * d) + 3.0) * m / (4.0 * PI);
        let g0 = (m / d.powi(3) + 3.0 * m) / (2.0 * PI);
        assert!((regularity_constant(1, d, m) - g1).abs() < 1e-14);
        assert!((regularity_constant(0, d, m) - g0).abs() < 1e-13);
    }

    #[test]
    fn ball_boundary_is_unit_sphere() {
        let pts = boundary_points(&DensityModel::uniform_ball(1.0, 1.0), 50).unwrap();
        assert_eq!(pts.len(), 50);
        assert!(pts.iter().all(|p| (p.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn invalid_delta() {
        let d = DensityModel::uniform_ball(1.0, 1.0);
        assert_eq!(classify_regularity(&d, &[0.0], 1, 1.0, &SamplerSpec::default()), Err(Error::InvalidDelta(1.0)));
    }

    #[test]
    fn zero_density_has_no_boundary() {
        let d = DensityModel::uniform_ball(1.0, 0.0);
        assert_eq!(boundary_points(&d, 10), Err(Error::EmptyBoundary));
    }
}
