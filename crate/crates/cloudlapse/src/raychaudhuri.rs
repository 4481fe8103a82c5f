//! Expansion, shear and rotation of the boundary flow and their Newtonian
//! Raychaudhuri evolution.
//!
//! Index convention: `W_jk = ∂_j w_k`. Then `Θ = tr W`,
//! `Ξ = sym W − (Θ/3)I` and `Ω_jk = ½(W_kj − W_jk)`, so
//! `W_jk = Ξ_jk + (Θ/3)δ_jk − Ω_jk`.
//!
//! Ξ is stored as `[Ξ11, Ξ22, Ξ12, Ξ13, Ξ23]` (with `Ξ33 = −Ξ11 − Ξ22`) and Ω
//! as its axial entries `[Ω23, Ω31, Ω12]`, so trace-freeness and
//! antisymmetry hold by construction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boundary_dynamics::BoundaryTrajectory;
use crate::gravity::GravityField;
use crate::ode::rk4_step;
use crate::{io, Error, Mat3, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub theta: f64,
    pub xi: [f64; 5],
    pub omega: [f64; 3],
}

fn pack_sym(m: &Mat3) -> [f64; 5] {
    [m[(0, 0)], m[(1, 1)], m[(0, 1)], m[(0, 2)], m[(1, 2)]]
}

fn unpack_sym(s: &[f64; 5]) -> Mat3 {
    Mat3::new(s[0], s[2], s[3], s[2], s[1], s[4], s[3], s[4], -s[0] - s[1])
}

fn pack_anti(m: &Mat3) -> [f64; 3] {
    [m[(1, 2)], m[(2, 0)], m[(0, 1)]]
}

fn unpack_anti(v: &[f64; 3]) -> Mat3 {
    let [a, b, c] = *v;
    Mat3::new(0.0, c, -b, -c, 0.0, a, b, -a, 0.0)
}

impl KinematicState {
    pub fn xi_matrix(&self) -> Mat3 {
        unpack_sym(&self.xi)
    }

    pub fn omega_matrix(&self) -> Mat3 {
        unpack_anti(&self.omega)
    }

    /// Largest `|Ξ_jk|`.
    pub fn max_shear(&self) -> f64 {
        self.xi_matrix().amax()
    }

    /// Largest `|Ω_jk|`.
    pub fn max_rotation(&self) -> f64 {
        self.omega.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `W_jk = Ξ_jk + (Θ/3)δ_jk − Ω_jk`.
    pub fn gradient(&self) -> Mat3 {
        self.xi_matrix() + Mat3::identity() * (self.theta / 3.0) - self.omega_matrix()
    }

    fn to_array(self) -> [f64; 9] {
        let [a, b, c, d, e] = self.xi;
        let [u, v, w] = self.omega;
        [self.theta, a, b, c, d, e, u, v, w]
    }

    fn from_array(s: &[f64; 9]) -> Self {
        Self { theta: s[0], xi: [s[1], s[2], s[3], s[4], s[5]], omega: [s[6], s[7], s[8]] }
    }
}

pub fn decompose_gradient(w: &Mat3) -> KinematicState {
    let theta = w.trace();
    let sym = (w + w.transpose()) * 0.5 - Mat3::identity() * (theta / 3.0);
    // Ω_jk = ½(W_kj − W_jk)
    let anti = (w.transpose() - w) * 0.5;
    KinematicState { theta, xi: pack_sym(&sym), omega: pack_anti(&anti) }
}

/// Time derivatives of `(Θ, Ξ, Ω)` for a given tidal matrix `∂_j∂_kΦ`.
///
/// Only the trace-free part of the tidal matrix enters; on the boundary the
/// trace `ρ` vanishes anyway.
pub fn rhs_raychaudhuri(s: &KinematicState, tidal: &Mat3) -> Result<KinematicState> {
    let defect = (tidal - tidal.transpose()).amax();
    if defect > 1e-10 * tidal.amax().max(f64::MIN_POSITIVE) {
        return Err(Error::AsymmetricTidal(defect));
    }
    let th = s.theta;
    let xi = s.xi_matrix();
    let om = s.omega_matrix();
    let xx = xi * xi;
    let oo = om * om;
    let xi2 = xi.component_mul(&xi).sum();
    let tr_oo = oo.trace();
    let d_theta = -th * th / 3.0 - xi2 - tr_oo;
    let tide = tidal - Mat3::identity() * (tidal.trace() / 3.0);
    let d_xi = xi * (-2.0 / 3.0 * th) - xx - oo + Mat3::identity() * ((xi2 + tr_oo) / 3.0) - tide;
    let d_om = om * (-2.0 / 3.0 * th) - xi * om - om * xi;
    Ok(KinematicState { theta: d_theta, xi: pack_sym(&d_xi), omega: pack_anti(&d_om) })
}

/// `Θ̃(t) = (Θ₀⁻¹ + t/3)⁻¹`.
pub fn free_solution(t: f64, theta0: f64) -> Result<f64> {
    if !(theta0 > 0.0) {
        return Err(Error::NonpositiveTheta0(theta0));
    }
    Ok(1.0 / (1.0 / theta0 + t / 3.0))
}

/// `𝔢 = Θ⁻¹ − t/3 − (λ₀/3λ₁)σ⁻¹`, `𝔰 = Θ^{−7/4}Ξ`, `𝔟 = Θ⁻²Ω`, `𝔖 = 𝔰:𝔰`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationState {
    pub e_frak: f64,
    pub s_frak: [f64; 5],
    pub b_frak: [f64; 3],
    pub s_big: f64,
}

impl PerturbationState {
    pub fn s_matrix(&self) -> Mat3 {
        unpack_sym(&self.s_frak)
    }

    pub fn b_matrix(&self) -> Mat3 {
        unpack_anti(&self.b_frak)
    }

    pub fn max_b(&self) -> f64 {
        self.b_frak.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Perturbation parameters `(σ, λ₀, λ₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub sigma: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

impl Scaling {
    /// `(λ₀/3λ₁)σ⁻¹`, the approximate solution's `Θ⁻¹` at t = 0.
    pub fn theta_inv0(&self) -> f64 {
        self.lambda0 / (3.0 * self.lambda1 * self.sigma)
    }
}

pub fn to_perturbation(s: &KinematicState, t: f64, sc: &Scaling) -> Result<PerturbationState> {
    if !(s.theta > 0.0) {
        return Err(Error::NonpositiveExpansion(s.theta));
    }
    let th = s.theta;
    let k = th.powf(-1.75);
    let s_frak = s.xi.map(|v| v * k);
    let s_big = unpack_sym(&s_frak).component_mul(&unpack_sym(&s_frak)).sum();
    Ok(PerturbationState {
        e_frak: 1.0 / th - t / 3.0 - sc.theta_inv0(),
        s_frak,
        b_frak: s.omega.map(|v| v / (th * th)),
        s_big,
    })
}

pub fn from_perturbation(p: &PerturbationState, t: f64, sc: &Scaling) -> Result<KinematicState> {
    let inv = p.e_frak + t / 3.0 + sc.theta_inv0();
    if !(inv > 0.0) {
        return Err(Error::NonpositiveExpansion(1.0 / inv));
    }
    let th = 1.0 / inv;
    let k = th.powf(1.75);
    Ok(KinematicState { theta: th, xi: p.s_frak.map(|v| v * k), omega: p.b_frak.map(|v| v * th * th) })
}

/// `W = Θ^{7/4}𝔰 + (Θ/3)I − Θ²𝔟` in the `W_jk = ∂_j w_k` convention, with
/// its largest entry.
pub fn reconstruct_w(theta: f64, p: &PerturbationState) -> (Mat3, f64) {
    let w = p.s_matrix() * theta.powf(1.75) + Mat3::identity() * (theta / 3.0) - p.b_matrix() * (theta * theta);
    (w, w.amax())
}

/// `(6λ₁/λ₀)^{7/4}σ^{5/4} + (2λ₁/λ₀)σ + (6λ₁/λ₀)²σ^{3/2}`.
pub fn w_sup_bound(sc: &Scaling) -> f64 {
    let k = 6.0 * sc.lambda1 / sc.lambda0;
    let s = sc.sigma;
    k.powf(1.75) * s.powf(1.25) + (2.0 * sc.lambda1 / sc.lambda0) * s + k * k * s.powf(1.5)
}

/// Tidal matrix along a parcel path.
pub trait TidalSource: Sync {
    fn tidal(&self, t: f64) -> Result<Mat3>;

    /// Parcel radius `|χ(t)|`, when known.
    fn radius(&self, _t: f64) -> Option<f64> {
        None
    }
}

pub struct ZeroTidal;

impl TidalSource for ZeroTidal {
    fn tidal(&self, _t: f64) -> Result<Mat3> {
        Ok(Mat3::zeros())
    }
}

/// Hessian of a gravity field evaluated along a boundary trajectory, with χ
/// cubic-Hermite interpolated between samples and the result multiplied by
/// `factor`.
pub struct TrajectoryTidal<'a, G: GravityField + ?Sized> {
    pub trajectory: &'a BoundaryTrajectory,
    pub gravity: &'a G,
    pub factor: f64,
}

impl<G: GravityField + ?Sized> TrajectoryTidal<'_, G> {
    fn state(&self, t: f64) -> (Vec3, Vec3) {
        let s = &self.trajectory.samples;
        let i = s.partition_point(|p| p.t < t).clamp(1, s.len() - 1);
        let (p0, p1) = (&s[i - 1], &s[i]);
        let h = p1.t - p0.t;
        let u = ((t - p0.t) / h).clamp(0.0, 1.0);
        let (x0, x1) = (Vec3::from(p0.chi), Vec3::from(p1.chi));
        let (v0, v1) = (Vec3::from(p0.w), Vec3::from(p1.w));
        let (u2, u3) = (u * u, u * u * u);
        let chi = x0 * (2.0 * u3 - 3.0 * u2 + 1.0) + v0 * (h * (u3 - 2.0 * u2 + u)) + x1 * (3.0 * u2 - 2.0 * u3) + v1 * (h * (u3 - u2));
        (chi, v0 + (v1 - v0) * u)
    }
}

impl<G: GravityField + ?Sized> TidalSource for TrajectoryTidal<'_, G> {
    fn tidal(&self, t: f64) -> Result<Mat3> {
        let (chi, w) = self.state(t);
        self.gravity
            .tidal(t, &chi, &w)
            .map(|m| m * self.factor)
            .ok_or_else(|| Error::Degenerate("gravity field provides no tidal matrix".into()))
    }

    fn radius(&self, t: f64) -> Option<f64> {
        Some(self.state(t).0.norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicSample {
    pub t: f64,
    pub state: KinematicState,
    /// Largest `|∂_j∂_kΦ|·|χ|³` seen over the step ending here, if the
    /// source knows `|χ|`.
    pub tidal_weighted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicSeries {
    pub samples: Vec<KinematicSample>,
    /// Estimated time where `Θ⁻¹` reaches 0, when the integration ran into it.
    pub singularity: Option<f64>,
}

/// `|Θ|` beyond which the integration stops and reports a singularity.
pub const BLOWUP_THETA: f64 = 1e12;

/// RK4 over `[0, horizon]` with output every `h`. Substeps are shortened to
/// `0.05/|Θ|` when the expansion rate is large, so a collapse is resolved up
/// to `|Θ| = BLOWUP_THETA·max(1, |Θ₀|)`; the pole is then extrapolated as
/// `t − 3/Θ`.
pub fn integrate_raychaudhuri(init: &KinematicState, source: &dyn TidalSource, h: f64, horizon: f64) -> Result<KinematicSeries> {
    if !(h > 0.0 && horizon > 0.0) {
        return Err(Error::Degenerate(format!("step {h} and horizon {horizon} must be positive")));
    }
    let limit = BLOWUP_THETA * init.theta.abs().max(1.0);
    let mut f = |t: f64, y: &[f64; 9]| -> Result<[f64; 9]> {
        let tide = source.tidal(t)?;
        Ok(rhs_raychaudhuri(&KinematicState::from_array(y), &tide)?.to_array())
    };
    let weighted = |t: f64| -> Result<Option<f64>> {
        Ok(match source.radius(t) {
            Some(r) => Some(source.tidal(t)?.amax() * r * r * r),
            None => None,
        })
    };
    let steps = (horizon / h).ceil().max(1.0) as usize;
    let mut y = init.to_array();
    let mut samples = vec![KinematicSample { t: 0.0, state: *init, tidal_weighted: weighted(0.0)? }];
    let mut t = 0.0;
    for k in 1..=steps {
        let target = if k == steps { horizon } else { k as f64 * h };
        let mut peak: Option<f64> = None;
        while t < target {
            let dt = (target - t).min(0.05 / y[0].abs().max(1e-300));
            let dt = if target - t - dt < 1e-12 * h { target - t } else { dt };
            y = rk4_step(&mut f, t, &y, dt)?;
            t = if dt == target - t { target } else { t + dt };
            if let Some(w) = weighted(t)? {
                peak = Some(peak.map_or(w, |p: f64| p.max(w)));
            }
            if !y[0].is_finite() || y[0].abs() > limit {
                let state = KinematicState::from_array(&y);
                let singularity = y[0].is_finite().then(|| t - 3.0 / y[0]);
                samples.push(KinematicSample { t, state, tidal_weighted: peak });
                return Ok(KinematicSeries { samples, singularity });
            }
        }
        samples.push(KinematicSample { t: target, state: KinematicState::from_array(&y), tidal_weighted: peak });
    }
    Ok(KinematicSeries { samples, singularity: None })
}

pub const PERTURBATION_BOUNDS: [&str; 6] = ["e_assumed", "S_assumed", "b_assumed", "e_improved", "S_improved", "b_improved"];

/// Flags for [`PERTURBATION_BOUNDS`]; all false when `Θ ≤ 0`.
pub fn perturbation_flags(p: Option<&PerturbationState>, sc: &Scaling) -> [bool; 6] {
    let Some(p) = p else { return [false; 6] };
    let s = sc.sigma;
    let r = sc.lambda0 / sc.lambda1 / s;
    let bmax = p.max_b();
    [
        p.e_frak.abs() <= r / 6.0,
        p.s_big <= 1.0 / s,
        bmax <= s.powf(-0.5),
        p.e_frak.abs() <= r / 8.0,
        p.s_big <= 3.0 / (16.0 * s),
        bmax <= 0.5 * s.powf(-0.5),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub assumed_pass: bool,
    pub improved_pass: bool,
    pub first_violation: Option<(f64, String)>,
    pub w_sup: f64,
    pub w_bound: f64,
    pub w_pass: bool,
}

pub fn monitor_perturbation_bounds(series: &KinematicSeries, sc: &Scaling) -> PerturbationReport {
    let mut out = PerturbationReport {
        assumed_pass: true,
        improved_pass: true,
        first_violation: None,
        w_sup: 0.0,
        w_bound: w_sup_bound(sc),
        w_pass: true,
    };
    for s in &series.samples {
        let p = to_perturbation(&s.state, s.t, sc).ok();
        let f = perturbation_flags(p.as_ref(), sc);
        out.assumed_pass &= f[..3].iter().all(|&b| b);
        out.improved_pass &= f[3..].iter().all(|&b| b);
        if out.first_violation.is_none() {
            if let Some(k) = f.iter().position(|&b| !b) {
                out.first_violation = Some((s.t, PERTURBATION_BOUNDS[k].to_string()));
            }
        }
        if let Some(p) = p {
            out.w_sup = out.w_sup.max(reconstruct_w(s.state.theta, &p).1);
        }
    }
    if series.singularity.is_some() && out.first_violation.is_none() {
        out.first_violation = series.samples.last().map(|s| (s.t, "expansion_blowup".to_string()));
        out.assumed_pass = false;
        out.improved_pass = false;
    }
    out.w_pass = out.w_sup < out.w_bound;
    out
}

pub fn write_kinematics_csv(path: &Path, series: &KinematicSeries, sc: &Scaling) -> Result<()> {
    let mut header = vec![
        "t", "Theta", "Xi11", "Xi22", "Xi12", "Xi13", "Xi23", "Omega23", "Omega31", "Omega12", "e_frak", "S_frak", "b23", "b31", "b12",
    ];
    header.extend(PERTURBATION_BOUNDS);
    let rows = series.samples.iter().map(|s| {
        let st = &s.state;
        let p = to_perturbation(st, s.t, sc).ok();
        let mut row = vec![s.t, st.theta];
        row.extend(st.xi);
        row.extend(st.omega);
        match &p {
            Some(p) => {
                row.push(p.e_frak);
                row.push(p.s_big);
                row.extend(p.b_frak);
            }
            None => row.extend([f64::NAN; 5]),
        }
        row.extend(perturbation_flags(p.as_ref(), sc).map(|b| if b { 1.0 } else { 0.0 }));
        row
    });
    io::write_csv(path, &header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_examples() {
        let k = decompose_gradient(&Mat3::identity());
        assert_eq!((k.theta, k.xi, k.omega), (3.0, [0.0; 5], [0.0; 3]));

        // w = (y, −x, 0): W₁₂ = ∂₁w₂ = −1, W₂₁ = ∂₂w₁ = 1
        let mut w = Mat3::zeros();
        w[(0, 1)] = -1.0;
        w[(1, 0)] = 1.0;
        let k = decompose_gradient(&w);
        assert_eq!((k.theta, k.xi, k.omega), (0.0, [0.0; 5], [0.0, 0.0, 1.0]));
        assert_eq!(k.gradient(), w);

        let k = decompose_gradient(&Mat3::from_diagonal(&Vec3::new(1.0, -1.0, 0.0)));
        assert_eq!((k.theta, k.xi, k.omega), (0.0, [1.0, -1.0, 0.0, 0.0, 0.0], [0.0; 3]));
    }

    #[test]
    fn rhs_signs() {
        let z = Mat3::zeros();
        let r = rhs_raychaudhuri(&KinematicState { theta: 3.0, xi: [0.0; 5], omega: [0.0; 3] }, &z).unwrap();
        assert_eq!(r.theta, -3.0);
        let r = rhs_raychaudhuri(&KinematicState { theta: 0.0, xi: [0.0; 5], omega: [0.0, 0.0, 1.0] }, &z).unwrap();
        assert_eq!(r.theta, 2.0);
        let r = rhs_raychaudhuri(&KinematicState { theta: 0.0, xi: [1.0, -1.0, 0.0, 0.0, 0.0], omega: [0.0; 3] }, &z).unwrap();
        assert_eq!(r.theta, -2.0);
        let mut bad = Mat3::zeros();
        bad[(0, 1)] = 1.0;
        assert!(matches!(rhs_raychaudhuri(&KinematicState { theta: 1.0, xi: [0.0; 5], omega: [0.0; 3] }, &bad), Err(Error::AsymmetricTidal(_))));
    }

    #[test]
    fn free_solution_values() {
        assert_eq!(free_solution(1.0, 3.0).unwrap(), 1.5);
        assert_eq!(free_solution(0.0, 0.7).unwrap(), 0.7);
        let t = 1e3;
        assert!((free_solution(t, 2.0).unwrap() - 3.0 / t).abs() < 0.5 * 3.0 / t);
        assert!(free_solution(1.0, 0.0).is_err());
    }

    #[test]
    fn approximate_solution_is_zero_perturbation() {
        let sc = Scaling { sigma: 0.1, lambda0: 1.08, lambda1: 1.06 };
        let th0 = 1.0 / sc.theta_inv0();
        let s = KinematicState { theta: th0, xi: [0.0; 5], omega: [0.0; 3] };
        let p = to_perturbation(&s, 0.0, &sc).unwrap();
        assert!(p.e_frak.abs() < 1e-14 && p.s_big == 0.0 && p.max_b() == 0.0);
        let p = to_perturbation(&KinematicState { theta: free_solution(5.0, th0).unwrap(), ..s }, 5.0, &sc).unwrap();
        assert!(p.e_frak.abs() < 1e-13);
        assert!(to_perturbation(&KinematicState { theta: -1.0, ..s }, 0.0, &sc).is_err());
    }

    #[test]
    fn reconstruct_identity_third() {
        let p = PerturbationState { e_frak: 0.0, s_frak: [0.0; 5], b_frak: [0.0; 3], s_big: 0.0 };
        let (w, sup) = reconstruct_w(1.0, &p);
        assert_eq!(w, Mat3::identity() / 3.0);
        assert_eq!(sup, 1.0 / 3.0);
    }

    #[test]
    fn collapse_singularity_is_found() {
        let init = KinematicState { theta: -3.0, xi: [0.0; 5], omega: [0.0; 3] };
        let s = integrate_raychaudhuri(&init, &ZeroTidal, 1e-2, 2.0).unwrap();
        let t = s.singularity.unwrap();
        assert!((t - 1.0).abs() < 1e-6, "{t}");
    }
}
