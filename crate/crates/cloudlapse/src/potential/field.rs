use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::density::{Core, DensityModel, GridDensity, ParticleDensity};
use super::grid;
use crate::quadrature::{adaptive, adaptive_levels, angular_integrate, ray_integrate, sphere_crossings, Breaks, Integral, QuadratureSpec, RayFrame, Resolution};
use crate::{Error, Mat3, Result, Vec3, FOUR_PI};

/// Φ, ∇Φ and optionally ∇²Φ at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub phi: f64,
    pub grad: [f64; 3],
    pub hessian: Option<[[f64; 3]; 3]>,
}

/// A quadrature value together with the largest per-level node count used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluated<T> {
    pub value: T,
    pub nodes: usize,
}

/// Newtonian potential `Φ(x) = −(1/4π) ∫ ρ(y)/|x − y| dy`.
///
/// The density is static, so `t` only labels the evaluation.
pub fn eval_potential(density: &DensityModel, _t: f64, x: &Vec3, quad: &QuadratureSpec) -> Result<f64> {
    potential_detailed(density, x, quad).map(|e| e.value)
}

/// Gravity `∂ᵢΦ(x) = (1/4π) ∫ ρ(y) (x − y)ᵢ/|x − y|³ dy`.
pub fn eval_gravity(density: &DensityModel, _t: f64, x: &Vec3, quad: &QuadratureSpec) -> Result<Vec3> {
    gravity_detailed(density, x, quad).map(|e| e.value)
}

/// Tidal matrix `∂ᵢ∂ⱼΦ(x)`.
///
/// Inside the support (or on a jump of ρ) the kernel singularity is removed
/// by subtracting the directional limit of ρ on a small ball about `x`;
/// this requires `quad.holder_interior`.
pub fn eval_tidal(density: &DensityModel, _t: f64, x: &Vec3, quad: &QuadratureSpec) -> Result<Mat3> {
    tidal_detailed(density, x, quad).map(|e| e.value)
}

pub fn eval_field(density: &DensityModel, t: f64, x: &Vec3, quad: &QuadratureSpec, hessian: bool) -> Result<FieldSample> {
    let phi = eval_potential(density, t, x, quad)?;
    let g = eval_gravity(density, t, x, quad)?;
    let hessian = if hessian { Some(eval_tidal(density, t, x, quad)?.into()) } else { None };
    Ok(FieldSample { phi, grad: g.into(), hessian })
}

pub fn potential_detailed(density: &DensityModel, x: &Vec3, quad: &QuadratureSpec) -> Result<Evaluated<f64>> {
    let out = match density {
        DensityModel::ParticleCloud(p) => return Ok(Evaluated { value: particles_potential(p, x), nodes: p.masses.len() }),
        DensityModel::GridSnapshot(g) => grid_integral::<1>(g, x, quad, |r, _, rho, _| [r * rho])?,
        _ => cores_integral::<1>(&density.cores().unwrap(), x, quad, |r, _, rho, _| [r * rho])?,
    };
    Ok(Evaluated { value: -out.value[0] / FOUR_PI, nodes: out.nodes })
}

pub fn gravity_detailed(density: &DensityModel, x: &Vec3, quad: &QuadratureSpec) -> Result<Evaluated<Vec3>> {
    let integrand = |_r: f64, om: &Vec3, rho: f64, _c: f64| [rho * om.x, rho * om.y, rho * om.z];
    let out = match density {
        DensityModel::ParticleCloud(p) => return Ok(Evaluated { value: particles_gravity(p, x), nodes: p.masses.len() }),
        DensityModel::GridSnapshot(g) => grid_integral::<3>(g, x, quad, integrand)?,
        _ => cores_integral::<3>(&density.cores().unwrap(), x, quad, integrand)?,
    };
    Ok(Evaluated { value: -Vec3::from(out.value) / FOUR_PI, nodes: out.nodes })
}

pub fn tidal_detailed(density: &DensityModel, x: &Vec3, quad: &QuadratureSpec) -> Result<Evaluated<Mat3>> {
    match density {
        DensityModel::ParticleCloud(p) => Ok(Evaluated { value: particles_tidal(p, x), nodes: p.masses.len() }),
        DensityModel::GridSnapshot(g) => grid_tidal(g, x, quad),
        _ => {
            let mut total = Mat3::zeros();
            let mut nodes = 0;
            for core in density.cores().unwrap().iter() {
                let e = core_tidal(core, x, quad)?;
                total += e.value;
                nodes = nodes.max(e.nodes);
            }
            Ok(Evaluated { value: total, nodes })
        }
    }
}

/// `(δ − 3ωω)` in the order xx, yy, zz, xy, xz, yz.
#[inline]
fn traceless_kernel(om: &Vec3) -> [f64; 6] {
    [
        1.0 - 3.0 * om.x * om.x,
        1.0 - 3.0 * om.y * om.y,
        1.0 - 3.0 * om.z * om.z,
        -3.0 * om.x * om.y,
        -3.0 * om.x * om.z,
        -3.0 * om.y * om.z,
    ]
}

fn sym_from6(v: &[f64; 6]) -> Mat3 {
    Mat3::new(v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2])
}

struct CoreGeometry {
    frame: RayFrame,
    theta_breaks: Vec<f64>,
    dist: f64,
}

fn core_geometry(core: &Core, x: &Vec3) -> CoreGeometry {
    let d = core.center() - x;
    let dist = d.norm();
    let r = core.radius;
    let axis = if dist > 1e-14 * r { Some(d) } else { None };
    let mut theta_breaks = Vec::new();
    if dist > r * (1.0 + 1e-12) {
        theta_breaks.push((r / dist).asin());
    } else if dist >= r * (1.0 - 1e-12) {
        theta_breaks.push(0.5 * PI);
    }
    CoreGeometry { frame: RayFrame::new(*x, axis), theta_breaks, dist }
}

/// Sum over cores of `∫dΩ ∫dr g(r, ω, ρ_core(x + rω))`, each core integrated in
/// its own frame (axis towards its centre) so the polar structure is exact.
fn cores_integral<const K: usize>(
    cores: &[Core],
    x: &Vec3,
    quad: &QuadratureSpec,
    g: impl Fn(f64, &Vec3, f64, f64) -> [f64; K] + Sync + Copy,
) -> Result<Integral<K>> {
    let mut total = Integral::<K>::zero();
    let mut nodes = 0;
    for core in cores {
        if core.peak_density == 0.0 {
            continue;
        }
        let geo = core_geometry(core, x);
        let c = core.center();
        let part = adaptive(quad, |res| {
            ray_integrate(&geo.frame, &geo.theta_breaks, res, |om, br| {
                if let Some((a, b)) = sphere_crossings(x, om, &c, core.radius) {
                    br.push(a);
                    br.push(b);
                }
            }, |r, om| g(r, om, core.chord_value(&(x + om * r)), 0.0))
        })?;
        nodes = nodes.max(part.nodes);
        total.add(&part);
    }
    total.nodes = nodes;
    Ok(total)
}

fn core_tidal(core: &Core, x: &Vec3, quad: &QuadratureSpec) -> Result<Evaluated<Mat3>> {
    if core.peak_density == 0.0 {
        return Ok(Evaluated { value: Mat3::zeros(), nodes: 0 });
    }
    let geo = core_geometry(core, x);
    let r_core = core.radius;
    let gap = r_core - geo.dist;
    let touching = gap >= -1e-12 * r_core && (core.value(x) > 0.0 || core.exponent == 0.0);
    let c = core.center();
    if !touching {
        let out = adaptive(quad, |res| {
            ray_integrate(&geo.frame, &geo.theta_breaks, res, |om, br| {
                if let Some((a, b)) = sphere_crossings(x, om, &c, r_core) {
                    br.push(a);
                    br.push(b);
                }
            }, |r, om| kernel_term(om, core.chord_value(&(x + om * r)) / r))
        })?;
        return Ok(Evaluated { value: sym_from6(&out.value) / FOUR_PI, nodes: out.nodes });
    }
    if !quad.holder_interior {
        return Err(Error::SingularEvaluation);
    }
    let r0 = if gap > 1e-3 * r_core { 0.5 * gap } else { 0.25 * r_core };
    let mut theta_breaks = geo.theta_breaks.clone();
    if geo.dist > 0.0 {
        // cone on which the exit point crosses the subtraction radius
        let c = (r0 * r0 + geo.dist * geo.dist - r_core * r_core) / (2.0 * r0 * geo.dist);
        if c.abs() < 1.0 {
            theta_breaks.push(c.acos());
        }
    }
    let eta = 1e-9 * r_core;
    // on the surface to roundoff: chords of the exact tangent sphere, so the
    // inward hemisphere matches the π/2 break
    let on_surface = gap.abs() <= 1e-12 * r_core;
    let crossings = |om: &Vec3| {
        if on_surface {
            let b = om.dot(&(x - c));
            (b < 0.0).then(|| (0.0, -2.0 * b))
        } else {
            sphere_crossings(x, om, &c, r_core)
        }
    };
    // directional limit, probed inside the chord when the ray enters at once
    let limit = |om: &Vec3| match crossings(om) {
        Some((a, b)) if a <= eta => core.chord_value(&(x + om * (a + eta).min(0.5 * (a + b)))),
        _ => 0.0,
    };
    let exit = |om: &Vec3| crossings(om).map(|(_, b)| b).unwrap_or(0.0);
    let mut nodes = 0;
    let mut local = [0.0; 6];
    let out = adaptive(quad, |res: Resolution| {
        let part = ray_integrate(&geo.frame, &theta_breaks, res, |om, br| {
            let e = exit(om);
            push_sorted(br, &[0.0, r0.min(e), e]);
        }, |r, om| {
            let sub = if r < r0 { limit(om) } else { 0.0 };
            kernel_term(om, (core.chord_value(&(x + om * r)) - sub) / r)
        });
        // past the exit ρ vanishes and the subtracted `−limit/r` integrates in closed form
        local = angular_integrate(&geo.frame, &theta_breaks, res, |om| {
            let l = limit(om);
            let mut v = outer_product(om, l);
            let e = exit(om);
            if l != 0.0 && e < r0 {
                let k = kernel_term(om, -l * (r0 / e).ln());
                for (a, b) in v.iter_mut().zip(k) {
                    *a += b;
                }
            }
            v
        });
        nodes = nodes.max(part.nodes);
        part
    })?;
    let total: [f64; 6] = std::array::from_fn(|k| out.value[k] + local[k]);
    Ok(Evaluated { value: sym_from6(&total) / FOUR_PI, nodes })
}

#[inline]
fn kernel_term(om: &Vec3, s: f64) -> [f64; 6] {
    traceless_kernel(om).map(|k| k * s)
}

#[inline]
fn outer_product(om: &Vec3, s: f64) -> [f64; 6] {
    [om.x * om.x * s, om.y * om.y * s, om.z * om.z * s, om.x * om.y * s, om.x * om.z * s, om.y * om.z * s]
}

fn push_sorted(br: &mut Breaks, pts: &[f64]) {
    for &p in pts {
        br.push(p);
    }
    br.sort_by(|a, b| a.partial_cmp(b).unwrap());
    br.dedup();
}

fn grid_integral<const K: usize>(
    g: &GridDensity,
    x: &Vec3,
    quad: &QuadratureSpec,
    f: impl Fn(f64, &Vec3, f64, f64) -> [f64; K] + Sync,
) -> Result<Integral<K>> {
    adaptive_levels(quad, grid::LEVELS.len(), |level| {
        grid::integrate(g, Some(x), level, |y| {
            let d = y - x;
            let r = d.norm();
            f(r, &(d / r), g.value(y), 0.0).map(|v| v / (r * r))
        })
    })
}

fn grid_tidal(g: &GridDensity, x: &Vec3, quad: &QuadratureSpec) -> Result<Evaluated<Mat3>> {
    let (lo, hi) = (g.lower(), g.upper());
    let inside = (0..3).all(|a| x[a] >= lo[a] && x[a] <= hi[a]);
    let rho0 = if inside { g.value(x) } else { 0.0 };
    if rho0 > 0.0 && !quad.holder_interior {
        return Err(Error::SingularEvaluation);
    }
    let local = if rho0 != 0.0 { -rho0 * grid::prism_hessian(x, &lo, &hi).ok_or(Error::SingularEvaluation)? } else { Mat3::zeros() };
    let out = adaptive_levels(quad, grid::LEVELS.len(), |level| {
        grid::integrate(g, Some(x), level, |y| {
            let d = y - x;
            let r = d.norm();
            kernel_term(&(d / r), (g.value(y) - rho0) / (r * r * r))
        })
    })?;
    Ok(Evaluated { value: (sym_from6(&out.value) + local) / FOUR_PI, nodes: out.nodes })
}

fn particles_potential(p: &ParticleDensity, x: &Vec3) -> f64 {
    let eps2 = p.softening * p.softening;
    -p.positions
        .iter()
        .zip(&p.masses)
        .map(|(y, m)| m / ((x - Vec3::from(*y)).norm_squared() + eps2).sqrt())
        .sum::<f64>()
        / FOUR_PI
}

fn particles_gravity(p: &ParticleDensity, x: &Vec3) -> Vec3 {
    let eps2 = p.softening * p.softening;
    let mut g = Vec3::zeros();
    for (y, m) in p.positions.iter().zip(&p.masses) {
        let d = x - Vec3::from(*y);
        let s2 = d.norm_squared() + eps2;
        g += d * (m / (s2 * s2.sqrt()));
    }
    g / FOUR_PI
}

fn particles_tidal(p: &ParticleDensity, x: &Vec3) -> Mat3 {
    let eps2 = p.softening * p.softening;
    let mut t = Mat3::zeros();
    for (y, m) in p.positions.iter().zip(&p.masses) {
        let d = x - Vec3::from(*y);
        let s2 = d.norm_squared() + eps2;
        let s3 = s2 * s2.sqrt();
        t += (Mat3::identity() - d * d.transpose() * (3.0 / s2)) * (m / s3);
    }
    t / FOUR_PI
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball() -> DensityModel {
        DensityModel::uniform_ball(1.0, 1.0)
    }

    fn q() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn interior_potential_is_quadratic() {
        for r in [0.0, 0.3, 0.8] {
            let phi = eval_potential(&ball(), 0.0, &Vec3::new(0.0, r, 0.0), &q()).unwrap();
            let want = -(3.0 - r * r) / 6.0;
            assert!((phi - want).abs() < 1e-9, "r={r}: {phi} vs {want}");
        }
    }

    #[test]
    fn field_at_surface_and_outside() {
        let g = eval_gravity(&ball(), 0.0, &Vec3::new(0.0, 0.0, 1.0), &q()).unwrap();
        assert!((g.z - 1.0 / 3.0).abs() < 1e-9, "{g:?}");
        let g = eval_gravity(&ball(), 0.0, &Vec3::new(1.2, 1.6, 0.0), &q()).unwrap();
        let want = Vec3::new(1.2, 1.6, 0.0) / 8.0 / 3.0;
        assert!((g - want).norm() < 1e-9 * want.norm());
    }

    #[test]
    fn interior_hessian_is_isotropic() {
        let t = eval_tidal(&ball(), 0.0, &Vec3::new(0.2, -0.4, 0.1), &q()).unwrap();
        assert!((t - Mat3::identity() / 3.0).norm() < 1e-7, "{t}");
    }

    #[test]
    fn surface_hessian_averages_the_one_sided_limits() {
        // inside (1/3)δ, outside (1/3)(δ − 3nn)
        let t = eval_tidal(&ball(), 0.0, &Vec3::new(1.0, 0.0, 0.0), &q()).unwrap();
        let want = Mat3::new(-1.0 / 6.0, 0.0, 0.0, 0.0, 1.0 / 3.0, 0.0, 0.0, 0.0, 1.0 / 3.0);
        assert!((t - want).norm() < 1e-6, "{t}");
    }

    #[test]
    fn interior_hessian_needs_flag() {
        let spec = QuadratureSpec { holder_interior: false, ..q() };
        let err = eval_tidal(&ball(), 0.0, &Vec3::new(0.1, 0.0, 0.0), &spec).unwrap_err();
        assert_eq!(err, Error::SingularEvaluation);
        assert!(eval_tidal(&ball(), 0.0, &Vec3::new(3.0, 0.0, 0.0), &spec).is_ok());
    }

    #[test]
    fn tiny_budget_is_reported() {
        let spec = QuadratureSpec { max_nodes: 10, ..q() };
        let err = eval_potential(&ball(), 0.0, &Vec3::new(0.5, 0.0, 0.0), &spec).unwrap_err();
        assert!(matches!(err, Error::QuadratureBudgetExceeded { .. }));
    }

    #[test]
    fn tapered_interior_poisson_residual() {
        let d = DensityModel::TaperedProfile { center: [0.0; 3], radius: 1.0, peak_density: 2.0, exponent: 2.0 };
        let x = Vec3::new(0.3, 0.2, -0.1);
        let t = eval_tidal(&d, 0.0, &x, &q()).unwrap();
        assert!((t.trace() - d.value(&x)).abs() < 1e-6, "{} vs {}", t.trace(), d.value(&x));
        assert!((t - t.transpose()).norm() < 1e-12);
    }

    #[test]
    fn grid_matches_uniform_cube_exterior() {
        // a constant cube seen from far away is almost a point mass
        let n = 5;
        let g = GridDensity { dims: [n; 3], spacing: [0.25; 3], origin: [-0.5; 3], values: vec![1.0; n * n * n], sidecar: None };
        let d = DensityModel::GridSnapshot(g);
        let x = Vec3::new(20.0, 0.0, 0.0);
        let phi = eval_potential(&d, 0.0, &x, &QuadratureSpec::with_rel_tol(1e-6)).unwrap();
        let want = -1.0 / (FOUR_PI * 20.0);
        assert!((phi - want).abs() < 1e-4 * want.abs(), "{phi} vs {want}");
    }

    #[test]
    fn particle_fields_are_direct_sums() {
        let p = ParticleDensity { positions: vec![[0.0; 3]], masses: vec![2.0], smoothing: vec![0.1], softening: 0.0 };
        let d = DensityModel::ParticleCloud(p);
        let x = Vec3::new(0.0, 2.0, 0.0);
        let phi = eval_potential(&d, 0.0, &x, &q()).unwrap();
        assert!((phi + 2.0 / (FOUR_PI * 2.0)).abs() < 1e-15);
        let t = eval_tidal(&d, 0.0, &x, &q()).unwrap();
        assert!(t.trace().abs() < 1e-15);
    }
}
