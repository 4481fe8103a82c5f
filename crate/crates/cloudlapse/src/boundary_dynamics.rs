//! Free fall of boundary parcels: raw `(χ, w)` and reduced `(q, z, Y)`
//! integration, rescaled variables, and the bootstrap/envelope monitors.
//!
//! Integration runs in `τ = t/a` with fixed steps; a step whose result
//! leaves the validity domain (`q ≤ 0`, `Y < 0`, non-finite) is retried as
//! two half steps, up to [`MAX_HALVINGS`] times.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admissible::{AdmissibleParams, BoundaryDatum};
use crate::gravity::GravityField;
use crate::ode::rk4_step;
use crate::{io, Error, Result, Vec3};

pub const MAX_HALVINGS: u32 = 20;

/// `q = 1/|χ|`, `z = χ̂·w`, `X = w − χ̂z`, `Y = qX²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub q: f64,
    pub z: f64,
    pub x_vec: Vec3,
    pub x: f64,
    pub y: f64,
}

pub fn decompose_velocity(chi: &Vec3, w: &Vec3) -> Result<Decomposition> {
    let r = chi.norm();
    if !(r > 0.0) {
        return Err(Error::OriginSingularity);
    }
    let n = chi / r;
    let z = n.dot(w);
    let x_vec = w - n * z;
    let x = x_vec.norm();
    let q = 1.0 / r;
    Ok(Decomposition { q, z, x_vec, x, y: q * x * x })
}

/// `(dq/dt, dz/dt, dY/dt)` given the radial and tangential projections of
/// ∇Φ. The tangential projection is ignored when `Y = 0`.
pub fn rhs_reduced(q: f64, z: f64, y: f64, radial: f64, tangential: f64) -> Result<[f64; 3]> {
    if y < 0.0 {
        return Err(Error::NegativeY(y));
    }
    let tang = if y > 0.0 { 2.0 * (q * y).sqrt() * tangential } else { 0.0 };
    Ok([-q * q * z, y - radial, -3.0 * z * q * y - tang])
}

/// [`rhs_reduced`] with the projections taken from a full gradient.
pub fn rhs_from_gradient(chi: &Vec3, w: &Vec3, grad: &Vec3) -> Result<[f64; 3]> {
    let d = decompose_velocity(chi, w)?;
    let n = chi * d.q;
    let tangential = if d.x > 0.0 { d.x_vec.dot(grad) / d.x } else { 0.0 };
    rhs_reduced(d.q, d.z, d.y, n.dot(grad), tangential)
}

/// `q̃ = A(t+a)q`, `Ũ = (t+a)²zq²`, `Ṽ = (t+a) − (t+a)²zq`, `Ỹ = (t+a)Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaledState {
    pub q_tilde: f64,
    pub u_lower: f64,
    pub v_lower: f64,
    pub y_tilde: f64,
}

pub fn to_rescaled(q: f64, z: f64, y: f64, t: f64, speed: f64, a: f64) -> RescaledState {
    let s = t + a;
    RescaledState { q_tilde: speed * s * q, u_lower: s * s * z * q * q, v_lower: s - s * s * z * q, y_tilde: s * y }
}

/// Inverse of [`to_rescaled`]: returns `(q, zq, zq², Y)`.
pub fn from_rescaled(r: &RescaledState, t: f64, speed: f64, a: f64) -> (f64, f64, f64, f64) {
    let s = t + a;
    (r.q_tilde / (speed * s), (1.0 - r.v_lower / s) / s, r.u_lower / (s * s), r.y_tilde / s)
}

/// `q = zq² / zq` recovered from `Ũ` and `Ṽ` alone; `None` when `zq = 0`.
pub fn q_from_u_v(r: &RescaledState, t: f64, a: f64) -> Option<f64> {
    let s = t + a;
    let zq = (1.0 - r.v_lower / s) / s;
    (zq != 0.0).then(|| r.u_lower / (s * s) / zq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Raw,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub chi: [f64; 3],
    pub w: [f64; 3],
    pub q: f64,
    pub z: f64,
    pub x: f64,
    pub y: f64,
    pub rescaled: RescaledState,
}

impl TrajectorySample {
    pub fn radius(&self) -> f64 {
        Vec3::from(self.chi).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrajectory {
    pub datum: BoundaryDatum,
    pub params: AdmissibleParams,
    pub mode: Mode,
    pub samples: Vec<TrajectorySample>,
}

impl BoundaryTrajectory {
    /// Samples `(t, |χ|)`.
    pub fn radii(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t, s.radius())).collect()
    }
}

fn sample(t: f64, chi: Vec3, w: Vec3, p: &AdmissibleParams) -> Result<TrajectorySample> {
    let d = decompose_velocity(&chi, &w)?;
    Ok(TrajectorySample {
        t,
        chi: chi.into(),
        w: w.into(),
        q: d.q,
        z: d.z,
        x: d.x,
        y: d.y,
        rescaled: to_rescaled(d.q, d.z, d.y, t, p.speed, p.a),
    })
}

/// Fixed-step RK4 in `τ` from `0` to `horizon/a`, with recursive halving of
/// rejected steps. `valid` decides rejection.
fn march<const N: usize, F, V>(
    mut f: F,
    valid: V,
    y0: [f64; N],
    a: f64,
    h: f64,
    horizon: f64,
    mut emit: impl FnMut(f64, &[f64; N]) -> Result<()>,
) -> Result<()>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    V: Fn(&[f64; N]) -> bool,
{
    fn advance<const N: usize>(
        f: &mut impl FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
        valid: &impl Fn(&[f64; N]) -> bool,
        tau: f64,
        y: &[f64; N],
        dtau: f64,
        depth: u32,
        a: f64,
    ) -> Result<[f64; N]> {
        let next = rk4_step(f, tau, y, dtau).ok().filter(|n| n.iter().all(|v| v.is_finite()) && valid(n));
        match next {
            Some(n) => Ok(n),
            None if depth < MAX_HALVINGS => {
                let mid = advance(f, valid, tau, y, 0.5 * dtau, depth + 1, a)?;
                advance(f, valid, tau + 0.5 * dtau, &mid, 0.5 * dtau, depth + 1, a)
            }
            None => Err(Error::StepRejection { t: tau * a }),
        }
    }

    let steps = (horizon / h).ceil().max(1.0) as usize;
    let mut y = y0;
    emit(0.0, &y)?;
    let mut t_prev = 0.0;
    for k in 1..=steps {
        let t = if k == steps { horizon } else { k as f64 * h };
        y = advance(&mut f, &valid, t_prev / a, &y, (t - t_prev) / a, 0, a).map_err(|e| match e {
            Error::StepRejection { .. } => Error::StepRejection { t: t_prev },
            e => e,
        })?;
        emit(t, &y)?;
        t_prev = t;
    }
    Ok(())
}

/// Integrates one parcel over `[0, horizon]` with step `h` in t.
pub fn integrate_trajectory(
    datum: &BoundaryDatum,
    gravity: &(impl GravityField + ?Sized),
    params: &AdmissibleParams,
    h: f64,
    horizon: f64,
    mode: Mode,
) -> Result<BoundaryTrajectory> {
    if !(h > 0.0) || !(horizon > 0.0) {
        return Err(Error::Degenerate(format!("step {h} and horizon {horizon} must be positive")));
    }
    let a = params.a;
    let chi0 = datum.position();
    let w0 = datum.velocity();
    let mut samples = Vec::with_capacity((horizon / h).ceil() as usize + 1);
    match mode {
        Mode::Raw => {
            let rhs = |tau: f64, s: &[f64; 6]| -> Result<[f64; 6]> {
                let chi = Vec3::new(s[0], s[1], s[2]);
                let w = Vec3::new(s[3], s[4], s[5]);
                let g = gravity.gradient(a * tau, &chi, &w);
                Ok([a * w.x, a * w.y, a * w.z, -a * g.x, -a * g.y, -a * g.z])
            };
            let y0 = [chi0.x, chi0.y, chi0.z, w0.x, w0.y, w0.z];
            march(rhs, |s| s[0] * s[0] + s[1] * s[1] + s[2] * s[2] > 0.0, y0, a, h, horizon, |t, s| {
                samples.push(sample(t, Vec3::new(s[0], s[1], s[2]), Vec3::new(s[3], s[4], s[5]), params)?);
                Ok(())
            })?;
        }
        Mode::Reduced => {
            let d = decompose_velocity(&chi0, &w0)?;
            gravity
                .projections(0.0, d.q, d.z, d.y)
                .ok_or_else(|| Error::Degenerate("gravity field has no reduced (q, z, Y) form".into()))?;
            // in-plane frame: the motion stays in span{ξ̂, X̂₀}
            let e_r = chi0 * d.q;
            let e_t = if d.x > 0.0 { d.x_vec / d.x } else { Vec3::zeros() };
            let rhs = |tau: f64, s: &[f64; 4]| -> Result<[f64; 4]> {
                let (q, z, y) = (s[0], s[1], s[2].max(0.0));
                let (rad, tan) = gravity.projections(a * tau, q, z, y).unwrap_or((f64::NAN, f64::NAN));
                let [dq, dz, dy] = rhs_reduced(q, z, y, rad, tan)?;
                Ok([a * dq, a * dz, a * dy, a * (q * y).sqrt()])
            };
            march(rhs, |s| s[0] > 0.0 && s[2] >= 0.0, [d.q, d.z, d.y, 0.0], a, h, horizon, |t, s| {
                let (q, z, y, th) = (s[0], s[1], s[2], s[3]);
                let x = (y / q).sqrt();
                let (sn, cs) = th.sin_cos();
                let n = e_r * cs + e_t * sn;
                let tdir = e_t * cs - e_r * sn;
                samples.push(TrajectorySample {
                    t,
                    chi: (n / q).into(),
                    w: (n * z + tdir * x).into(),
                    q,
                    z,
                    x,
                    y,
                    rescaled: to_rescaled(q, z, y, t, params.speed, a),
                });
                Ok(())
            })?;
        }
    }
    Ok(BoundaryTrajectory { datum: *datum, params: *params, mode, samples })
}

/// Integrates every datum in parallel. `params` is either one entry shared by
/// all data or one per datum.
pub fn integrate_boundary(
    data: &[BoundaryDatum],
    gravity: &(impl GravityField + ?Sized),
    params: &[AdmissibleParams],
    h: f64,
    horizon: f64,
    mode: Mode,
) -> Result<Vec<BoundaryTrajectory>> {
    if params.len() != 1 && params.len() != data.len() {
        return Err(Error::Degenerate(format!("{} parameter sets for {} data", params.len(), data.len())));
    }
    data.par_iter()
        .enumerate()
        .map(|(i, d)| integrate_trajectory(d, gravity, &params[if params.len() == 1 { 0 } else { i }], h, horizon, mode))
        .collect()
}

/// Kepler energy `½(z²+X²) − μq` and angular momentum `X/q`.
pub fn kepler_invariants(s: &TrajectorySample, mu: f64) -> (f64, f64) {
    (0.5 * (s.z * s.z + s.x * s.x) - mu * s.q, s.x / s.q)
}

/// Monitored bounds, in CSV column order.
pub const BOUND_NAMES: [&str; 13] = [
    "q_tilde_lt_1",
    "U_gt_1m2s_over_A",
    "V_gt_m1_7",
    "Y_lt_As2",
    "q_tilde_lt_1ms_4",
    "U_gt_1m1.5s_over_A",
    "V_gt_m3_28",
    "Y_lt_0.9As2",
    "chi_gt_lower",
    "chi_lt_upper",
    "z_gt_lower",
    "z_lt_upper",
    "X2_lt_upper",
];

/// Per-sample truth values of [`BOUND_NAMES`]: four assumed bounds, four
/// improved bounds, five envelope bounds.
pub fn sample_flags(s: &TrajectorySample, p: &AdmissibleParams) -> [bool; 13] {
    let (aa, sg) = (p.speed, p.sigma);
    let r = &s.rescaled;
    let tp = s.t + p.a;
    let chi = s.radius();
    let grow = 1.0 + 1.0 / (7.0 * tp);
    [
        r.q_tilde < 1.0,
        r.u_lower > (1.0 - 2.0 * sg) / aa,
        r.v_lower > -1.0 / 7.0,
        r.y_tilde < aa * sg * sg,
        r.q_tilde < 1.0 - sg / 4.0,
        r.u_lower > (1.0 - 1.5 * sg) / aa,
        r.v_lower > -3.0 / 28.0,
        r.y_tilde < 0.9 * aa * sg * sg,
        aa * tp < chi,
        chi < aa / (1.0 - 2.0 * sg) * tp * grow,
        (1.0 - 2.0 * sg) / aa * chi * chi / (tp * tp) < s.z,
        s.z < grow * chi / tp,
        s.x * s.x < aa * sg * sg * chi / tp,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub bound: String,
    /// Index of the trajectory within the batch, when known.
    pub trajectory: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundMonitorReport {
    pub bootstrap_pass: bool,
    pub improved_pass: bool,
    pub envelope_pass: bool,
    pub first_violation: Option<Violation>,
}

impl BoundMonitorReport {
    pub fn pass(&self) -> bool {
        self.bootstrap_pass && self.improved_pass && self.envelope_pass
    }
}

fn first_failure(traj: &BoundaryTrajectory, range: std::ops::Range<usize>) -> Option<Violation> {
    traj.samples.iter().find_map(|s| {
        let f = sample_flags(s, &traj.params);
        range.clone().find(|&k| !f[k]).map(|k| Violation { t: s.t, bound: BOUND_NAMES[k].to_string(), trajectory: None })
    })
}

/// Assumed and improved bootstrap bounds at every sample, plus the envelope.
pub fn monitor_bootstrap(traj: &BoundaryTrajectory) -> BoundMonitorReport {
    let boot = first_failure(traj, 0..4);
    let imp = first_failure(traj, 4..8);
    let env = first_failure(traj, 8..13);
    let first = [&boot, &imp, &env]
        .into_iter()
        .flatten()
        .min_by(|a, b| a.t.partial_cmp(&b.t).unwrap())
        .cloned();
    BoundMonitorReport { bootstrap_pass: boot.is_none(), improved_pass: imp.is_none(), envelope_pass: env.is_none(), first_violation: first }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub pass: bool,
    pub first_violation: Option<Violation>,
}

/// The `|χ|`, `z` and `X²` sandwiches.
pub fn check_envelope(traj: &BoundaryTrajectory) -> EnvelopeCheck {
    let v = first_failure(traj, 8..13);
    EnvelopeCheck { pass: v.is_none(), first_violation: v }
}

/// Combines per-trajectory reports; the earliest violation wins.
pub fn merge_reports(reports: impl IntoIterator<Item = BoundMonitorReport>) -> BoundMonitorReport {
    let mut out = BoundMonitorReport { bootstrap_pass: true, improved_pass: true, envelope_pass: true, first_violation: None };
    for (i, r) in reports.into_iter().enumerate() {
        out.bootstrap_pass &= r.bootstrap_pass;
        out.improved_pass &= r.improved_pass;
        out.envelope_pass &= r.envelope_pass;
        if let Some(mut v) = r.first_violation {
            if out.first_violation.as_ref().is_none_or(|w| v.t < w.t) {
                v.trajectory = Some(i);
                out.first_violation = Some(v);
            }
        }
    }
    out
}

pub fn trajectory_header() -> Vec<&'static str> {
    let mut h = vec![
        "t", "chi1", "chi2", "chi3", "w1", "w2", "w3", "q", "z", "X", "Y", "q_tilde", "U_lower", "V_lower", "Y_tilde",
    ];
    h.extend(BOUND_NAMES);
    h
}

pub fn write_trajectory_csv(path: &Path, traj: &BoundaryTrajectory) -> Result<()> {
    let rows = traj.samples.iter().map(|s| {
        let r = &s.rescaled;
        let mut row = vec![s.t, s.chi[0], s.chi[1], s.chi[2], s.w[0], s.w[1], s.w[2], s.q, s.z, s.x, s.y];
        row.extend([r.q_tilde, r.u_lower, r.v_lower, r.y_tilde]);
        row.extend(sample_flags(s, &traj.params).map(|b| if b { 1.0 } else { 0.0 }));
        row
    });
    io::write_csv(path, &trajectory_header(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gravity::{InverseSquare, ZeroGravity};

    fn params() -> AdmissibleParams {
        AdmissibleParams::new(0.1, 1.08, 1.06, 1.01, 1.0)
    }

    #[test]
    fn decomposition_examples() {
        let d = decompose_velocity(&Vec3::new(1.0, 0.0, 0.0), &Vec3::new(2.0, 3.0, 0.0)).unwrap();
        assert_eq!((d.q, d.z, d.x, d.y), (1.0, 2.0, 3.0, 9.0));
        assert_eq!(d.x_vec, Vec3::new(0.0, 3.0, 0.0));
        let d = decompose_velocity(&Vec3::new(0.0, 2.0, 0.0), &Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!((d.q, d.z, d.x, d.y), (0.5, 0.0, 1.0, 0.5));
        let d = decompose_velocity(&Vec3::new(1.0, 1.0, 0.0), &Vec3::new(2.0, 2.0, 0.0)).unwrap();
        assert!(d.x < 1e-15 && d.y < 1e-15);
        assert_eq!(decompose_velocity(&Vec3::zeros(), &Vec3::x()), Err(Error::OriginSingularity));
    }

    #[test]
    fn reduced_rhs_examples() {
        assert_eq!(rhs_reduced(1.0, 1.0, 0.0, 0.0, 0.0).unwrap(), [-1.0, 0.0, 0.0]);
        assert_eq!(rhs_reduced(1.0, 0.0, 0.0, 1.0, 0.0).unwrap()[1], -1.0);
        let r = rhs_reduced(1.0, 0.0, 4.0, 0.0, 0.5).unwrap();
        assert_eq!(r, [0.0, 4.0, -2.0 * 2.0 * 0.5]);
        assert!(matches!(rhs_reduced(1.0, 0.0, -1.0, 0.0, 0.0), Err(Error::NegativeY(_))));
    }

    #[test]
    fn rescaled_examples() {
        let p = params();
        let r = p.lambda0 * p.speed / p.sigma;
        let s = to_rescaled(1.0 / r, 0.0, 0.0, 0.0, p.speed, p.a);
        assert!((s.q_tilde - 1.0 / 1.08).abs() < 1e-15);
        assert!(s.q_tilde < 1.0 - p.sigma / 2.0);
        assert_eq!((s.u_lower, s.v_lower, s.y_tilde), (0.0, p.a, 0.0));
    }

    #[test]
    fn free_motion() {
        let mut p = params();
        p.a = 1.0;
        let d = BoundaryDatum { xi: [1.0, 0.0, 0.0], z0: 1.0, x0: 0.0, x0_vec: [0.0; 3] };
        for (mode, tol) in [(Mode::Raw, 1e-14), (Mode::Reduced, 1e-9)] {
            let tr = integrate_trajectory(&d, &ZeroGravity, &p, 0.01, 1.0, mode).unwrap();
            let last = tr.samples.last().unwrap();
            assert_eq!(last.t, 1.0);
            assert!((last.q - 0.5).abs() < tol, "{mode:?}: {}", last.q);
        }
    }

    #[test]
    fn zero_gravity_at_exact_speed_fails_envelope() {
        let p = params();
        let d = BoundaryDatum { xi: [p.speed * p.a, 0.0, 0.0], z0: p.speed, x0: 0.0, x0_vec: [0.0; 3] };
        let tr = integrate_trajectory(&d, &ZeroGravity, &p, 0.01, 0.1, Mode::Raw).unwrap();
        let e = check_envelope(&tr);
        assert!(!e.pass);
        assert_eq!(e.first_violation.unwrap().t, 0.0);
    }

    #[test]
    fn kepler_energy_is_conserved() {
        let mut p = params();
        p.a = 1.0;
        let mu = 1.0;
        // e = z²/2 − μq = 1 with q = 1
        let d = BoundaryDatum { xi: [1.0, 0.0, 0.0], z0: 2.0, x0: 0.3, x0_vec: [0.0, 0.3, 0.0] };
        let tr = integrate_trajectory(&d, &InverseSquare::radial(mu), &p, 1e-3, 2.0, Mode::Raw).unwrap();
        let (e0, l0) = kepler_invariants(&tr.samples[0], mu);
        for s in &tr.samples {
            let (e, l) = kepler_invariants(s, mu);
            assert!((e - e0).abs() < 1e-10 * e0.abs() && (l - l0).abs() < 1e-10 * l0);
        }
    }

    struct Broken;

    impl GravityField for Broken {
        fn gradient(&self, t: f64, _chi: &Vec3, _w: &Vec3) -> Vec3 {
            if t > 0.95 { Vec3::repeat(f64::NAN) } else { Vec3::zeros() }
        }
    }

    #[test]
    fn rejected_step_reports_last_valid_time() {
        let mut p = params();
        p.a = 1.0;
        let d = BoundaryDatum { xi: [1.0, 0.0, 0.0], z0: 1.0, x0: 0.0, x0_vec: [0.0; 3] };
        let err = integrate_trajectory(&d, &Broken, &p, 0.1, 2.0, Mode::Raw).unwrap_err();
        assert!(matches!(err, Error::StepRejection { t } if (t - 0.9).abs() < 1e-12), "{err:?}");
    }
}
