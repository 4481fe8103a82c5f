//! Quadrature engines.
//!
//! The workhorse is a spherical ray rule centred on a chosen origin: in
//! coordinates `y = x + r ω` the volume element `r² dr dΩ` absorbs the
//! `1/|x − y|` and `1/|x − y|²` singularities of the Newtonian kernels exactly.
//! Radial integration is split at every surface where the integrand is not
//! smooth, polar integration at tangent cones, and both use Gauss–Legendre
//! nodes pushed through a quintic smoothstep map so that square-root endpoint
//! and logarithmic endpoint behaviour (chords near tangency) does not spoil
//! convergence.
//!
//! A stratified Monte-Carlo integrator over balls is provided as an
//! independent cross-check.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::{Error, Result, Vec3};

/// Accuracy request for field and moment quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Accept when two successive refinement levels differ by less than this,
    /// relative to the result.
    pub rel_tol: f64,
    /// Absolute floor added to the acceptance test.
    pub abs_tol: f64,
    /// Node budget for a single refinement level.
    pub max_nodes: usize,
    /// Allow second derivatives inside the support (ball subtraction).
    pub holder_interior: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 0.0, max_nodes: 2_000_000, holder_interior: true }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

/// Nodes per radial sub-interval, per polar sub-interval, and in azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub n_r: usize,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Resolution {
    pub const fn new(n_r: usize, n_theta: usize, n_phi: usize) -> Self {
        Self { n_r, n_theta, n_phi }
    }
}

pub(crate) const LADDER: [Resolution; 8] = [
    Resolution::new(6, 8, 6),
    Resolution::new(8, 12, 8),
    Resolution::new(12, 16, 12),
    Resolution::new(16, 24, 16),
    Resolution::new(20, 32, 24),
    Resolution::new(24, 48, 32),
    Resolution::new(32, 64, 48),
    Resolution::new(40, 96, 64),
];

/// Result of one quadrature pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<const K: usize> {
    pub value: [f64; K],
    /// Same sum with absolute values of the integrand; a magnitude scale.
    pub magnitude: [f64; K],
    pub nodes: usize,
}

impl<const K: usize> Integral<K> {
    pub fn zero() -> Self {
        Self { value: [0.0; K], magnitude: [0.0; K], nodes: 0 }
    }

    pub fn add(&mut self, other: &Self) {
        for k in 0..K {
            self.value[k] += other.value[k];
            self.magnitude[k] += other.magnitude[k];
        }
        self.nodes += other.nodes;
    }

    fn norm(v: &[f64; K]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Gauss–Legendre nodes on `[0, 1]` composed with `s(u) = 10u³ − 15u⁴ + 6u⁵`.
/// Returns `(s, weight · s'(u))` pairs.
pub(crate) fn smooth_rule(n: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
    gl.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| {
            let u = 0.5 * (x + 1.0);
            let s = u * u * u * (10.0 + u * (6.0 * u - 15.0));
            let v = u * (1.0 - u);
            (s, 0.5 * w * 30.0 * v * v)
        })
        .collect()
}

/// Orthonormal frame for spherical coordinates about `origin`, polar axis `e3`.
#[derive(Debug, Clone, Copy)]
pub struct RayFrame {
    pub origin: Vec3,
    e1: Vec3,
    e2: Vec3,
    e3: Vec3,
}

impl RayFrame {
    pub fn new(origin: Vec3, axis: Option<Vec3>) -> Self {
        let e3 = match axis {
            Some(a) if a.norm() > 0.0 => a.normalize(),
            _ => Vec3::z(),
        };
        let helper = if e3.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let e1 = (helper - e3 * e3.dot(&helper)).normalize();
        let e2 = e3.cross(&e1);
        Self { origin, e1, e2, e3 }
    }

    pub fn axis(&self) -> Vec3 {
        self.e3
    }

    #[inline]
    fn direction(&self, cos_t: f64, sin_t: f64, phi: f64) -> Vec3 {
        let (s, c) = phi.sin_cos();
        self.e1 * (sin_t * c) + self.e2 * (sin_t * s) + self.e3 * cos_t
    }
}

pub(crate) type Breaks = SmallVec<[f64; 8]>;

fn polar_nodes(theta_breaks: &[f64], n_theta: usize) -> Vec<(f64, f64, f64)> {
    let rule = smooth_rule(n_theta);
    let mut edges: Vec<f64> = Vec::with_capacity(theta_breaks.len() + 2);
    edges.push(0.0);
    edges.extend(theta_breaks.iter().copied().filter(|&t| t > 0.0 && t < PI));
    edges.push(PI);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let mut out = Vec::with_capacity(rule.len() * (edges.len() - 1));
    for win in edges.windows(2) {
        let (a, b) = (win[0], win[1]);
        for &(s, w) in &rule {
            let th = a + (b - a) * s;
            let (st, ct) = th.sin_cos();
            out.push((ct, st, (b - a) * w * st));
        }
    }
    out
}

/// Integrate `∫ dΩ ∫ dr g(r, ω)` about `frame.origin`.
///
/// `breaks(ω, out)` must fill `out` with the sorted radial nodes delimiting
/// smooth pieces along the ray, starting at 0 and ending where the integrand
/// vanishes identically; an empty list skips the ray. `g` must already contain
/// the `r²` Jacobian.
pub(crate) fn ray_integrate<const K: usize, B, G>(
    frame: &RayFrame,
    theta_breaks: &[f64],
    res: Resolution,
    breaks: B,
    g: G,
) -> Integral<K>
where
    B: Fn(&Vec3, &mut Breaks) + Sync,
    G: Fn(f64, &Vec3) -> [f64; K] + Sync,
{
    let radial = smooth_rule(res.n_r);
    let polar = polar_nodes(theta_breaks, res.n_theta);
    let dphi = 2.0 * PI / res.n_phi as f64;

    let parts: Vec<Integral<K>> = polar
        .par_iter()
        .map(|&(ct, st, wt)| {
            let mut acc = Integral::<K>::zero();
            let mut br = Breaks::new();
            for j in 0..res.n_phi {
                let phi = (j as f64 + 0.5) * dphi;
                let omega = frame.direction(ct, st, phi);
                br.clear();
                breaks(&omega, &mut br);
                let w_ang = wt * dphi;
                for win in br.windows(2) {
                    let (a, b) = (win[0], win[1]);
                    if b <= a {
                        continue;
                    }
                    for &(s, w) in &radial {
                        let r = a + (b - a) * s;
                        let val = g(r, &omega);
                        let wr = w_ang * (b - a) * w;
                        for k in 0..K {
                            acc.value[k] += wr * val[k];
                            acc.magnitude[k] += (wr * val[k]).abs();
                        }
                        acc.nodes += 1;
                    }
                }
            }
            acc
        })
        .collect();

    let mut total = Integral::<K>::zero();
    for p in &parts {
        total.add(p);
    }
    total
}

/// Integrate `∫ dΩ g(ω)` with the same polar splitting as [`ray_integrate`].
pub(crate) fn angular_integrate<const K: usize, G>(
    frame: &RayFrame,
    theta_breaks: &[f64],
    res: Resolution,
    g: G,
) -> [f64; K]
where
    G: Fn(&Vec3) -> [f64; K],
{
    let polar = polar_nodes(theta_breaks, res.n_theta);
    let dphi = 2.0 * PI / res.n_phi as f64;
    let mut out = [0.0; K];
    for &(ct, st, wt) in &polar {
        for j in 0..res.n_phi {
            let omega = frame.direction(ct, st, (j as f64 + 0.5) * dphi);
            let v = g(&omega);
            for k in 0..K {
                out[k] += wt * dphi * v[k];
            }
        }
    }
    out
}

/// Climb the resolution ladder until two successive levels agree.
pub(crate) fn adaptive<const K: usize, E>(spec: &QuadratureSpec, mut eval: E) -> Result<Integral<K>>
where
    E: FnMut(Resolution) -> Integral<K>,
{
    adaptive_levels(spec, LADDER.len(), |i| eval(LADDER[i]))
}

/// [`adaptive`] over an arbitrary number of numbered levels.
pub(crate) fn adaptive_levels<const K: usize, E>(spec: &QuadratureSpec, levels: usize, mut eval: E) -> Result<Integral<K>>
where
    E: FnMut(usize) -> Integral<K>,
{
    let mut prev = eval(0);
    let mut change = f64::INFINITY;
    for level in 1..levels {
        let cur = eval(level);
        if cur.nodes > spec.max_nodes {
            break;
        }
        let diff: [f64; K] = std::array::from_fn(|k| cur.value[k] - prev.value[k]);
        change = Integral::<K>::norm(&diff);
        let scale = Integral::<K>::norm(&cur.value).max(1e-2 * Integral::<K>::norm(&cur.magnitude));
        if change <= spec.rel_tol * scale + spec.abs_tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureBudgetExceeded { tol: spec.rel_tol, change, budget: spec.max_nodes })
}

/// Ray parameters where `origin + r ω` crosses the sphere `|y − c| = R`,
/// restricted to `r > 0`.
#[inline]
pub(crate) fn sphere_crossings(origin: &Vec3, omega: &Vec3, center: &Vec3, radius: f64) -> Option<(f64, f64)> {
    let d = origin - center;
    let b = omega.dot(&d);
    let c = d.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let (r0, r1) = (-b - s, -b + s);
    if r1 <= 0.0 {
        return None;
    }
    Some((r0.max(0.0), r1))
}

/// Stratified Monte-Carlo estimate of `∫_{B(c,R)} f(y) d³y`.
///
/// The unit cube is split into `m³` strata (`m³ ≤ samples`) and mapped onto
/// the ball by the volume-preserving map `(u, v, w) ↦ (R u^{1/3}, arccos(1−2v), 2πw)`;
/// each stratum receives `samples / m³` jittered points.
pub fn stratified_ball<const K: usize, F>(center: &Vec3, radius: f64, samples: usize, seed: u64, f: F) -> [f64; K]
where
    F: Fn(&Vec3) -> [f64; K] + Sync,
{
    let m = ((samples as f64).cbrt().floor() as usize).max(1);
    let per = (samples / (m * m * m)).max(1);
    let volume = 4.0 / 3.0 * PI * radius.powi(3);
    let sums: Vec<[f64; K]> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
            let mut acc = [0.0; K];
            for j in 0..m {
                for k in 0..m {
                    for _ in 0..per {
                        let u = (i as f64 + rng.gen::<f64>()) / m as f64;
                        let v = (j as f64 + rng.gen::<f64>()) / m as f64;
                        let w = (k as f64 + rng.gen::<f64>()) / m as f64;
                        let r = radius * u.cbrt();
                        let ct = 1.0 - 2.0 * v;
                        let st = (1.0 - ct * ct).max(0.0).sqrt();
                        let (sp, cp) = (2.0 * PI * w).sin_cos();
                        let y = center + Vec3::new(r * st * cp, r * st * sp, r * ct);
                        let val = f(&y);
                        for q in 0..K {
                            acc[q] += val[q];
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let n = (m * m * m * per) as f64;
    let mut out = [0.0; K];
    for s in &sums {
        for q in 0..K {
            out[q] += s[q];
        }
    }
    out.map(|v| v * volume / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_rule_integrates_polynomials() {
        let rule = smooth_rule(8);
        let total: f64 = rule.iter().map(|&(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let cube: f64 = rule.iter().map(|&(s, w)| w * s.powi(3)).sum();
        assert!((cube - 0.25).abs() < 1e-14);
    }

    #[test]
    fn smooth_rule_handles_endpoint_singularities() {
        let rule = smooth_rule(24);
        let v: f64 = rule.iter().map(|&(s, w)| w * (1.0 - s).sqrt()).sum();
        assert!((v - 2.0 / 3.0).abs() < 1e-10, "{v}");
        let l: f64 = rule.iter().map(|&(s, w)| w * s.ln()).sum();
        assert!((l + 1.0).abs() < 1e-6, "{l}");
    }

    #[test]
    fn unit_ball_volume_by_rays() {
        let frame = RayFrame::new(Vec3::new(0.3, -0.2, 0.1), None);
        let c = Vec3::zeros();
        let out: Integral<1> = ray_integrate(&frame, &[], Resolution::new(8, 24, 24), |om, br| {
            if let Some((a, b)) = sphere_crossings(&frame.origin, om, &c, 1.0) {
                br.push(a);
                br.push(b);
            }
        }, |r, _| [r * r]);
        assert!((out.value[0] - 4.0 / 3.0 * PI).abs() < 1e-9, "{}", out.value[0]);
    }

    #[test]
    fn stratified_volume() {
        let v = stratified_ball(&Vec3::zeros(), 2.0, 20_000, 1, |_| [1.0]);
        assert!((v[0] - 32.0 / 3.0 * PI).abs() < 1e-12);
    }
}
