//! WebAssembly views for `www/index.html`: the virial functional with its
//! critical times, one boundary parcel inside its envelope, and the
//! Raychaudhuri expansion along that parcel against the free solution.
//!
//! Cloud constants are fixed to the bootstrap scenario (E = 600, M = 1,
//! G1 = 1/9, β = 1, σ = 0.1); the page varies the velocity scale, the
//! surrogate gravity strength and the initial shear.

use cloudlapse::admissible::{generate_admissible, param_intervals, CloudConstants, Shape};
use cloudlapse::boundary_dynamics::{check_envelope, integrate_trajectory, monitor_bootstrap, BoundaryTrajectory, Mode};
use cloudlapse::gravity::{InverseSquare, Scaled};
use cloudlapse::raychaudhuri::{
    free_solution, integrate_raychaudhuri, monitor_perturbation_bounds, KinematicState, Scaling, TrajectoryTidal,
};
use cloudlapse::virial::{blowup_certificate, critical_time, supercritical_time, virial_f, VirialInputs};
use wasm_bindgen::prelude::*;

const SIGMA: f64 = 0.1;
const STEPS_PER_A: f64 = 2000.0;

fn constants() -> CloudConstants {
    CloudConstants { energy: 600.0, mass: 1.0, g1: 1.0 / 9.0, g0: 2.0 / 9.0, beta: 1.0, h_prime0: 0.0 }
}

fn js(e: cloudlapse::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct VirialView {
    t: Vec<f64>,
    f: Vec<f64>,
    t_dagger: f64,
    t_natural: f64,
    first_positive: Option<f64>,
}

#[wasm_bindgen]
impl VirialView {
    #[wasm_bindgen(getter)]
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn f(&self) -> Vec<f64> {
        self.f.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn t_dagger(&self) -> f64 {
        self.t_dagger
    }

    #[wasm_bindgen(getter)]
    pub fn t_natural(&self) -> f64 {
        self.t_natural
    }

    /// NaN when F stays non-positive.
    #[wasm_bindgen(getter)]
    pub fn first_positive(&self) -> f64 {
        self.first_positive.unwrap_or(f64::NAN)
    }
}

/// `F(t)` along `R = 2A(t+a)` with `βE = M = 1`, `H = H′ = 0`, sampled on
/// `[0, 1.5 T♮]`.
#[wasm_bindgen]
pub fn virial_view(speed: f64, a: f64, samples: usize) -> Result<VirialView, JsError> {
    let inp = VirialInputs { energy: 1.0, mass: 1.0, beta: 1.0, h0: 0.0, h_prime0: 0.0 };
    let t_dagger = critical_time(&inp, speed, a).map_err(js)?;
    let t_natural = supercritical_time(&inp, 1.0 / a);
    let n = samples.max(2);
    let end = 1.5 * t_natural.max(t_dagger);
    let pts: Vec<(f64, f64)> = (0..n).map(|k| {
        let t = end * k as f64 / (n - 1) as f64;
        (t, 2.0 * speed * (t + a))
    }).collect();
    let cert = blowup_certificate(&inp, &pts, end).map_err(js)?;
    Ok(VirialView {
        t: pts.iter().map(|p| p.0).collect(),
        f: pts.iter().map(|&(t, r)| virial_f(t, r, &inp)).collect(),
        t_dagger,
        t_natural,
        first_positive: cert.first_positive_t,
    })
}

fn parcel(speed: f64, x0_fraction: f64, seed: u64, gravity_factor: f64) -> Result<BoundaryTrajectory, JsError> {
    let c = constants();
    let (lambda0, _) = param_intervals(SIGMA).map_err(js)?.midpoint();
    let shape = Shape::Sphere { radius: lambda0 * speed / SIGMA, points: 8 };
    let g = generate_admissible(&shape, SIGMA, &c, x0_fraction, seed).map_err(js)?;
    let grav = Scaled { inner: &InverseSquare::radial(c.g1), factor: gravity_factor };
    let a = 1.0 / SIGMA;
    integrate_trajectory(&g.data[0], &grav, &g.params(0, c.beta), a / STEPS_PER_A, 1.0, Mode::Raw).map_err(js)
}

#[wasm_bindgen]
pub struct BoundaryView {
    t: Vec<f64>,
    radius: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    bootstrap_pass: bool,
    envelope_pass: bool,
    violation: Option<String>,
}

#[wasm_bindgen]
impl BoundaryView {
    #[wasm_bindgen(getter)]
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn radius(&self) -> Vec<f64> {
        self.radius.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn lower(&self) -> Vec<f64> {
        self.lower.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn upper(&self) -> Vec<f64> {
        self.upper.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn bootstrap_pass(&self) -> bool {
        self.bootstrap_pass
    }

    #[wasm_bindgen(getter)]
    pub fn envelope_pass(&self) -> bool {
        self.envelope_pass
    }

    /// First violated bound as `name @ t`, if any.
    #[wasm_bindgen(getter)]
    pub fn violation(&self) -> Option<String> {
        self.violation.clone()
    }
}

/// `|χ(t)|` of the first generated parcel with `A(t+a) < |χ| < (A/(1−2σ))(t+a)(1+(1/7)(t+a)⁻¹)`.
#[wasm_bindgen]
pub fn boundary_view(speed: f64, gravity_factor: f64, x0_fraction: f64, seed: u64) -> Result<BoundaryView, JsError> {
    let tr = parcel(speed, x0_fraction, seed, gravity_factor)?;
    let p = tr.params;
    let report = monitor_bootstrap(&tr);
    let env = check_envelope(&tr);
    let mut view = BoundaryView {
        t: Vec::new(),
        radius: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        bootstrap_pass: report.bootstrap_pass && report.improved_pass,
        envelope_pass: env.pass,
        violation: report.first_violation.map(|v| format!("{} @ t = {:.3}", v.bound, v.t)),
    };
    for s in &tr.samples {
        let tp = s.t + p.a;
        view.t.push(s.t);
        view.radius.push(s.radius());
        view.lower.push(p.speed * tp);
        view.upper.push(p.speed / (1.0 - 2.0 * p.sigma) * tp * (1.0 + 1.0 / (7.0 * tp)));
    }
    Ok(view)
}

#[wasm_bindgen]
pub struct RaychaudhuriView {
    t: Vec<f64>,
    theta: Vec<f64>,
    free_theta: Vec<f64>,
    w_sup: f64,
    w_bound: f64,
}

#[wasm_bindgen]
impl RaychaudhuriView {
    #[wasm_bindgen(getter)]
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn theta(&self) -> Vec<f64> {
        self.theta.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn free_theta(&self) -> Vec<f64> {
        self.free_theta.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn w_sup(&self) -> f64 {
        self.w_sup
    }

    #[wasm_bindgen(getter)]
    pub fn w_bound(&self) -> f64 {
        self.w_bound
    }
}

/// Θ along the parcel of [`boundary_view`], started at the approximate
/// solution's value with shear `shear·Θ₀^{7/4}` in the `x`–`y` plane.
#[wasm_bindgen]
pub fn raychaudhuri_view(speed: f64, gravity_factor: f64, shear: f64, seed: u64) -> Result<RaychaudhuriView, JsError> {
    let tr = parcel(speed, 0.5, seed, 1.0)?;
    let p = tr.params;
    let sc = Scaling { sigma: p.sigma, lambda0: p.lambda0, lambda1: p.lambda1 };
    let theta0 = 1.0 / sc.theta_inv0();
    let s = shear * theta0.powf(1.75);
    let init = KinematicState { theta: theta0, xi: [s, -s, 0.0, 0.0, 0.0], omega: [0.0; 3] };
    let grav = InverseSquare::radial(constants().g1);
    let tide = TrajectoryTidal { trajectory: &tr, gravity: &grav, factor: gravity_factor };
    let series = integrate_raychaudhuri(&init, &tide, p.a / STEPS_PER_A, 1.0).map_err(js)?;
    let report = monitor_perturbation_bounds(&series, &sc);
    let mut view = RaychaudhuriView { t: Vec::new(), theta: Vec::new(), free_theta: Vec::new(), w_sup: report.w_sup, w_bound: report.w_bound };
    for k in &series.samples {
        view.t.push(k.t);
        view.theta.push(k.state.theta);
        view.free_theta.push(free_solution(k.t, theta0).map_err(js)?);
    }
    Ok(view)
}
