//! Small-parameter algebra (σ★, σ†, λ₀, λ₁, r_c), compatibility of
//! `(E, M, G1)`, and construction/validation of admissible boundary data.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary_dynamics::decompose_velocity;
use crate::potential::fibonacci_sphere;
use crate::raychaudhuri::KinematicState;
use crate::{io, Error, Result, Vec3};

/// Hard cap on σ★.
pub const SIGMA_CAP: f64 = 0.2;

/// Relative tolerance for the (B★) equality.
pub const B_STAR_RTOL: f64 = 1e-12;

/// `β = min{1, 3(γ−1)}`.
pub fn beta_of_gamma(gamma: f64) -> f64 {
    (3.0 * (gamma - 1.0)).min(1.0)
}

/// `σ★ = min{1/5, βE/(500|H′(0)|)}`, with `H′(0) = 0` giving 1/5.
pub fn sigma_star(energy: f64, beta: f64, h_prime0: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::NonpositiveEnergy(energy));
    }
    let hp = h_prime0.abs();
    let second = if hp == 0.0 { f64::INFINITY } else { beta * energy / (500.0 * hp) };
    Ok(SIGMA_CAP.min(second))
}

/// `σ† = min{1/263200⁴, σ★}`.
pub fn sigma_dagger(energy: f64, beta: f64, h_prime0: f64) -> Result<f64> {
    Ok(263200f64.powi(-4).min(sigma_star(energy, beta, h_prime0)?))
}

/// Open interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamIntervals {
    pub sigma: f64,
    pub lambda0: Interval,
}

impl ParamIntervals {
    /// λ₁ range for a given λ₀.
    pub fn lambda1(&self, lambda0: f64) -> Interval {
        let s = self.sigma;
        Interval { lo: (1.0 - s) * lambda0 * lambda0, hi: (1.0 + s / 14.0) * lambda0 }
    }

    pub fn admits(&self, lambda0: f64, lambda1: f64) -> bool {
        self.lambda0.contains(lambda0) && self.lambda1(lambda0).contains(lambda1)
    }

    /// Midpoints of both intervals.
    pub fn midpoint(&self) -> (f64, f64) {
        let l0 = self.lambda0.midpoint();
        (l0, self.lambda1(l0).midpoint())
    }
}

/// `λ₀ ∈ (2/(2−σ), (1+σ/14)/(1−σ))` and `λ₁ ∈ ((1−σ)λ₀², (1+σ/14)λ₀)`.
pub fn param_intervals(sigma: f64) -> Result<ParamIntervals> {
    if !(sigma > 0.0 && sigma < SIGMA_CAP) {
        return Err(Error::SigmaOutOfRange { sigma, max: SIGMA_CAP });
    }
    let lambda0 = Interval { lo: 2.0 / (2.0 - sigma), hi: (1.0 + sigma / 14.0) / (1.0 - sigma) };
    let out = ParamIntervals { sigma, lambda0 };
    // the λ₁ interval is non-empty iff λ₀ < (1+σ/14)/(1−σ), i.e. on all of the λ₀ interval
    debug_assert!(!lambda0.is_empty() && !out.lambda1(lambda0.hi * (1.0 - 1e-12)).is_empty());
    Ok(out)
}

/// `r_c = 2(9G1)^{1/3} / ((2−σ★)σ★)`.
pub fn critical_radius(g1: f64, sigma_star: f64) -> f64 {
    2.0 * (9.0 * g1).cbrt() / ((2.0 - sigma_star) * sigma_star)
}

/// Global constants of a cloud that the data conditions refer to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudConstants {
    pub energy: f64,
    pub mass: f64,
    pub g1: f64,
    #[serde(default)]
    pub g0: f64,
    pub beta: f64,
    #[serde(default)]
    pub h_prime0: f64,
}

impl CloudConstants {
    /// `(9G1)^{1/3}`, the lower end of the A range.
    pub fn a_min(&self) -> f64 {
        (9.0 * self.g1).cbrt()
    }

    /// `(1/24)√(βE/M)`, the upper end of the A range.
    pub fn a_max(&self) -> f64 {
        (self.beta * self.energy / self.mass).sqrt() / 24.0
    }

    pub fn a_range(&self) -> Interval {
        Interval { lo: self.a_min(), hi: self.a_max() }
    }

    pub fn sigma_star(&self) -> Result<f64> {
        sigma_star(self.energy, self.beta, self.h_prime0)
    }

    pub fn sigma_dagger(&self) -> Result<f64> {
        sigma_dagger(self.energy, self.beta, self.h_prime0)
    }

    pub fn is_compatible(&self) -> bool {
        is_compatible(self.energy, self.mass, self.g1, self.beta)
    }

    fn require_compatible(&self) -> Result<()> {
        if self.energy > 0.0 && self.mass > 0.0 && self.g1 > 0.0 && self.is_compatible() {
            Ok(())
        } else {
            Err(Error::IncompatibleTriple { lower: self.a_min(), upper: self.a_max() })
        }
    }
}

/// `(9G1)^{1/3} < (1/24)√(βE/M)`.
pub fn is_compatible(energy: f64, mass: f64, g1: f64, beta: f64) -> bool {
    (9.0 * g1).cbrt() < (beta * energy / mass).sqrt() / 24.0
}

/// σ, λ₀, λ₁ and the velocity scale A, with `a = 1/σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleParams {
    pub sigma: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// Velocity scale `A`.
    #[serde(rename = "A")]
    pub speed: f64,
    /// Time offset `a = σ⁻¹`.
    pub a: f64,
    pub beta: f64,
}

impl AdmissibleParams {
    pub fn new(sigma: f64, lambda0: f64, lambda1: f64, speed: f64, beta: f64) -> Self {
        Self { sigma, lambda0, lambda1, speed, a: 1.0 / sigma, beta }
    }

    /// Checks the interval memberships against `consts`; returns the
    /// violated constraints.
    pub fn violations(&self, consts: &CloudConstants) -> Vec<String> {
        let mut out = Vec::new();
        match param_intervals(self.sigma) {
            Ok(iv) => {
                if !iv.lambda0.contains(self.lambda0) {
                    out.push(format!("λ₀ = {} outside ({}, {})", self.lambda0, iv.lambda0.lo, iv.lambda0.hi));
                }
                let l1 = iv.lambda1(self.lambda0);
                if !l1.contains(self.lambda1) {
                    out.push(format!("λ₁ = {} outside ({}, {})", self.lambda1, l1.lo, l1.hi));
                }
            }
            Err(e) => out.push(e.to_string()),
        }
        if !consts.a_range().contains(self.speed) {
            out.push(format!("A = {} outside ((9G1)^(1/3), √(βE/M)/24) = ({}, {})", self.speed, consts.a_min(), consts.a_max()));
        }
        out
    }
}

/// Initial boundary position `ξ` with radial speed `z₀` and tangential
/// velocity `X₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDatum {
    pub xi: [f64; 3],
    pub z0: f64,
    pub x0: f64,
    pub x0_vec: [f64; 3],
}

impl BoundaryDatum {
    pub fn from_velocity(xi: Vec3, w: Vec3) -> Result<Self> {
        let d = decompose_velocity(&xi, &w)?;
        Ok(Self { xi: xi.into(), z0: d.z, x0: d.x, x0_vec: d.x_vec.into() })
    }

    pub fn radius(&self) -> f64 {
        Vec3::from(self.xi).norm()
    }

    pub fn position(&self) -> Vec3 {
        Vec3::from(self.xi)
    }

    /// `w₀ = z₀ ξ/|ξ| + X₀`.
    pub fn velocity(&self) -> Vec3 {
        let xi = self.position();
        xi * (self.z0 / xi.norm()) + Vec3::from(self.x0_vec)
    }

    pub const CSV_HEADER: [&'static str; 7] = ["xi1", "xi2", "xi3", "z0", "X01", "X02", "X03"];

    pub fn csv_row(&self) -> [f64; 7] {
        let [a, b, c] = self.xi;
        let [u, v, w] = self.x0_vec;
        [a, b, c, self.z0, u, v, w]
    }
}

pub fn write_boundary_csv(path: &Path, data: &[BoundaryDatum]) -> Result<()> {
    io::write_csv(path, &BoundaryDatum::CSV_HEADER, data.iter().map(|d| d.csv_row()))
}

/// Radial extent of `∂Ω(0)` for a star-shaped initial domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportShell {
    pub r_min: f64,
    pub r_max: f64,
}

impl SupportShell {
    pub fn of(data: &[BoundaryDatum]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyBoundary);
        }
        let (mut r_min, mut r_max) = (f64::INFINITY, 0.0f64);
        for d in data {
            let r = d.radius();
            r_min = r_min.min(r);
            r_max = r_max.max(r);
        }
        Ok(Self { r_min, r_max })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleReport {
    pub sigma_xi: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// `Ω(0)` strictly contains the closed ball of radius r_c.
    pub contains_critical_ball: bool,
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub pass: bool,
}

struct Candidate {
    sigma: f64,
    lambda0: f64,
    lambda1: f64,
}

fn evaluate(datum: &BoundaryDatum, consts: &CloudConstants, r_c: f64, shell: &SupportShell, c: &Candidate) -> AdmissibleReport {
    let r = datum.radius();
    let g = consts.a_min();
    let mid = c.lambda0 * g / c.sigma;
    let a = r > mid && mid > r_c;
    let z_lo = c.lambda1 * g;
    let z_hi = c.lambda1 * consts.a_max();
    let b = datum.z0 > z_lo && datum.z0 < z_hi;
    let x_hi = (c.sigma / c.lambda1) * (c.lambda0 / 2.0).sqrt() * datum.z0;
    let cc = datum.x0 >= 0.0 && datum.x0 < x_hi;
    let ball = shell.r_min > r_c;
    AdmissibleReport {
        sigma_xi: c.sigma,
        lambda0: c.lambda0,
        lambda1: c.lambda1,
        contains_critical_ball: ball,
        a,
        b,
        c: cc,
        pass: a && b && cc && ball,
    }
}

/// Checks conditions (A), (B), (C) at one boundary point.
///
/// σ_ξ is inferred from `z₀ = λ₁λ₀⁻¹σ_ξ|ξ|`. With `hint = Some((λ₀, λ₁))`
/// the relation is solved for σ_ξ directly and the pair must be admissible
/// for it. Without a hint σ is scanned over `(0, σ★)`, choosing λ₀ inside
/// the range the relation allows; the first σ meeting every condition wins,
/// otherwise the best-scoring one is reported.
pub fn validate_admissible(
    datum: &BoundaryDatum,
    consts: &CloudConstants,
    shell: &SupportShell,
    hint: Option<(f64, f64)>,
) -> Result<AdmissibleReport> {
    consts.require_compatible()?;
    let s_star = consts.sigma_star()?;
    let r_c = critical_radius(consts.g1, s_star);
    let ratio = datum.z0 / datum.radius();
    if let Some((lambda0, lambda1)) = hint {
        let sigma = ratio * lambda0 / lambda1;
        let feasible = sigma > 0.0 && sigma < s_star && param_intervals(sigma).is_ok_and(|iv| iv.admits(lambda0, lambda1));
        if !feasible {
            return Err(Error::NoFeasibleSigma);
        }
        return Ok(evaluate(datum, consts, r_c, shell, &Candidate { sigma, lambda0, lambda1 }));
    }

    const GRID: usize = 4000;
    let mut best: Option<(usize, AdmissibleReport)> = None;
    for i in 1..GRID {
        let sigma = s_star * i as f64 / GRID as f64;
        let Ok(iv) = param_intervals(sigma) else { continue };
        // λ₁/λ₀ = ratio/σ must lie in ((1−σ)λ₀, 1+σ/14)
        let k = ratio / sigma;
        if !(k < 1.0 + sigma / 14.0) {
            continue;
        }
        let hi = iv.lambda0.hi.min(k / (1.0 - sigma));
        if !(hi > iv.lambda0.lo) {
            continue;
        }
        let lambda0 = 0.5 * (iv.lambda0.lo + hi);
        let cand = Candidate { sigma, lambda0, lambda1: k * lambda0 };
        let rep = evaluate(datum, consts, r_c, shell, &cand);
        if rep.pass {
            return Ok(rep);
        }
        let score = rep.a as usize + rep.b as usize + rep.c as usize;
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, rep));
        }
    }
    best.map(|(_, r)| r).ok_or(Error::NoFeasibleSigma)
}

/// Strict mode enforces `σ < σ†`; relaxed mode accepts `σ ∈ (0, σ★)` and
/// marks the result non-conforming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    #[default]
    Strict,
    Relaxed,
}

/// Boundary datum together with the initial kinematics at that point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongDatum {
    pub datum: BoundaryDatum,
    pub kinematics: KinematicState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongPointReport {
    pub b_star: bool,
    pub c_star: bool,
    /// Left side of (D★).
    pub d_star_lhs: f64,
    pub d_star: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongReport {
    pub sigma: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// `σ < σ†`, i.e. the data are strong admissible in the literal sense.
    pub conforming: bool,
    pub shell: bool,
    pub points: Vec<StrongPointReport>,
    pub pass: bool,
}

/// Checks the shell containment and (B★), (C★), (D★) at every point.
pub fn validate_strong_admissible(
    data: &[StrongDatum],
    consts: &CloudConstants,
    params: (f64, f64, f64),
    mode: SigmaMode,
) -> Result<StrongReport> {
    let (sigma, lambda0, lambda1) = params;
    consts.require_compatible()?;
    let dagger = consts.sigma_dagger()?;
    let s_star = consts.sigma_star()?;
    match mode {
        SigmaMode::Strict if !(sigma > 0.0 && sigma < dagger) => return Err(Error::SigmaAboveDagger { sigma, dagger }),
        SigmaMode::Relaxed if !(sigma > 0.0 && sigma < s_star) => return Err(Error::SigmaOutOfRange { sigma, max: s_star }),
        _ => {}
    }
    let iv = param_intervals(sigma)?;
    if !iv.admits(lambda0, lambda1) {
        return Err(Error::Precondition(vec![format!("(λ₀, λ₁) = ({lambda0}, {lambda1}) not admissible for σ = {sigma}")]));
    }
    let bare: Vec<BoundaryDatum> = data.iter().map(|d| d.datum).collect();
    let sh = SupportShell::of(&bare)?;
    let inner = lambda0 * consts.a_min() / sigma;
    let outer = lambda0 * consts.a_max() / sigma;
    let shell = sh.r_min > inner && sh.r_max < outer;

    let cap = 0.25 / sigma.sqrt();
    let points: Vec<StrongPointReport> = data
        .par_iter()
        .map(|d| {
            let r = d.datum.radius();
            let target = lambda1 / lambda0 * sigma * r;
            let b_star = (d.datum.z0 - target).abs() <= B_STAR_RTOL * target.abs();
            let x_hi = (sigma / lambda1) * (lambda0 / 2.0).sqrt() * d.datum.z0;
            let c_star = d.datum.x0 >= 0.0 && d.datum.x0 < x_hi;
            let k = &d.kinematics;
            let lhs = d_star_lhs(k, sigma, lambda0, lambda1);
            StrongPointReport { b_star, c_star, d_star_lhs: lhs, d_star: k.theta > 0.0 && lhs < cap }
        })
        .collect();
    let pass = shell && points.iter().all(|p| p.b_star && p.c_star && p.d_star);
    Ok(StrongReport { sigma, lambda0, lambda1, conforming: sigma < dagger, shell, points, pass })
}

/// `√((3λ₁/4λ₀)|Θ₀⁻¹ − (λ₀/3λ₁)σ⁻¹|) + Θ₀^{−7/4} max|Ξ₀| + Θ₀⁻² max|Ω₀|`.
pub fn d_star_lhs(k: &KinematicState, sigma: f64, lambda0: f64, lambda1: f64) -> f64 {
    let th = k.theta;
    let first = (0.75 * lambda1 / lambda0 * (1.0 / th - lambda0 / (3.0 * lambda1 * sigma)).abs()).sqrt();
    first + th.powf(-1.75) * k.max_shear() + th.powi(-2) * k.max_rotation()
}

/// Initial domain shapes for [`generate_admissible`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Sphere { radius: f64, points: usize },
    Ellipsoid { axes: [f64; 3], points: usize },
}

impl Shape {
    pub fn boundary(&self) -> Vec<Vec3> {
        match *self {
            Shape::Sphere { radius, points } => fibonacci_sphere(points).into_iter().map(|n| n * radius).collect(),
            Shape::Ellipsoid { axes, points } => fibonacci_sphere(points)
                .into_iter()
                .map(|n| {
                    // radial projection of the direction onto the surface
                    let s = ((n.x / axes[0]).powi(2) + (n.y / axes[1]).powi(2) + (n.z / axes[2]).powi(2)).sqrt();
                    n / s
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedData {
    pub sigma: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub data: Vec<BoundaryDatum>,
}

impl GeneratedData {
    /// `A = z₀/λ₁` at each point.
    pub fn speeds(&self) -> Vec<f64> {
        self.data.iter().map(|d| d.z0 / self.lambda1).collect()
    }

    pub fn params(&self, i: usize, beta: f64) -> AdmissibleParams {
        AdmissibleParams::new(self.sigma, self.lambda0, self.lambda1, self.data[i].z0 / self.lambda1, beta)
    }
}

/// Expanding data on the boundary of `shape` with `A_ξ = σ|ξ|/λ₀`,
/// `z₀ = λ₁A_ξ`, and tangential speed `x0_fraction` times the (C) cap in a
/// seeded random tangent direction.
pub fn generate_admissible(
    shape: &Shape,
    sigma: f64,
    consts: &CloudConstants,
    x0_fraction: f64,
    seed: u64,
) -> Result<GeneratedData> {
    consts.require_compatible()?;
    let s_star = consts.sigma_star()?;
    if !(sigma > 0.0 && sigma < s_star) {
        return Err(Error::SigmaOutOfRange { sigma, max: s_star });
    }
    if !(0.0..1.0).contains(&x0_fraction) {
        return Err(Error::InfeasibleShape(format!("x0_fraction {x0_fraction} outside [0, 1)")));
    }
    let iv = param_intervals(sigma)?;
    let (lambda0, lambda1) = iv.midpoint();
    let r_c = critical_radius(consts.g1, s_star);
    let range = consts.a_range();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::new();
    for xi in shape.boundary() {
        let r = xi.norm();
        let speed = r * sigma / lambda0;
        if !(r > r_c) || !range.contains(speed) {
            return Err(Error::InfeasibleShape(format!(
                "|ξ| = {r}: need |ξ| > r_c = {r_c} and σ|ξ|/λ₀ = {speed} in ({}, {})",
                range.lo, range.hi
            )));
        }
        let z0 = lambda1 * speed;
        let x_cap = (sigma / lambda1) * (lambda0 / 2.0).sqrt() * z0;
        let n = xi / r;
        let tangent = loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let t = v - n * n.dot(&v);
            if t.norm() > 1e-3 {
                break t.normalize();
            }
        };
        let x0 = x0_fraction * x_cap;
        data.push(BoundaryDatum { xi: xi.into(), z0, x0, x0_vec: (tangent * x0).into() });
    }
    Ok(GeneratedData { sigma, lambda0, lambda1, data })
}
