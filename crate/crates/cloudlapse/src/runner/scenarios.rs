use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::*;
use super::{Findings, Sink};
use crate::admissible::{
    generate_admissible, param_intervals, write_boundary_csv, AdmissibleParams, GeneratedData, Shape, SigmaMode,
};
use crate::boundary_dynamics::{
    check_envelope, integrate_boundary, integrate_trajectory, merge_reports, monitor_bootstrap, sample_flags,
    write_trajectory_csv, BoundMonitorReport, BoundaryTrajectory, EnvelopeCheck, Mode, Violation, BOUND_NAMES,
};
use crate::conservation::{
    check_identity_total_force, check_identity_virial_potential, drift_report, Diagnostics, DriftReport, ForceResidual,
    VirialIdentity,
};
use crate::fluid_sim::{self, density_extremum_detector, DensityEvent, EventKind};
use crate::gravity::{DensityGravity, GravityField, InverseSquare, Scaled, ZeroGravity};
use crate::potential::{
    boundary_points, check_gravity_bound, check_tidal_bound, classify_regularity, eval_field, gravity_bound_g1,
    tidal_bound_g0, BoundCheck, RegularityReport, Verdict,
};
use crate::raychaudhuri::{
    free_solution, from_perturbation, integrate_raychaudhuri, monitor_perturbation_bounds, write_kinematics_csv,
    KinematicState, PerturbationReport, PerturbationState, Scaling, TidalSource, TrajectoryTidal, ZeroTidal,
};
use crate::virial::{blowup_certificate, critical_time, second_differences, virial_f, Certificate, CertificateVerdict};
use crate::{io, Error, Result, Vec3};

/// Slack on `|∂∂Φ|·|χ|³ ≤ G0`, which the point-mass surrogate meets with
/// equality on the coordinate axes.
const TIDAL_RTOL: f64 = 1e-9;

pub(crate) fn run(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Findings> {
    let phys = cfg.physics;
    let need = || phys.ok_or_else(|| Error::Precondition(vec![format!("{} needs a physics block", cfg.scenario.kind())]));
    match &cfg.scenario {
        Scenario::PotentialCheck(p) => potential_check(p, sink),
        Scenario::IdentityCheck(c) => identity_check(c, sink),
        Scenario::BoundaryCertify(b) => boundary_certify(&need()?, cfg.mode, cfg.seed, b, sink),
        Scenario::RaychaudhuriCertify(r) => raychaudhuri_certify(&need()?, cfg.mode, cfg.seed, r, sink),
        Scenario::VirialCertify(v) => virial_certify(&need()?, v, sink),
        Scenario::SphRun(s) => sph_run(phys.as_ref(), s, sink),
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FALSIFIED"
    }
}

#[derive(Serialize)]
struct BoundsCertificate {
    g1: f64,
    gravity: BoundCheck,
    g0: Option<f64>,
    tidal: Option<BoundCheck>,
}

fn potential_check(p: &PotentialCheck, sink: &mut Sink) -> Result<Findings> {
    let d = &p.density;
    let q = &p.quadrature;
    let mut summary = Vec::new();
    let mut pass = true;
    if !p.points.is_empty() {
        let mut header = vec!["x1", "x2", "x3", "phi", "dphi1", "dphi2", "dphi3"];
        if p.hessian {
            header.extend(["h11", "h12", "h13", "h21", "h22", "h23", "h31", "h32", "h33"]);
        }
        let mut rows = Vec::with_capacity(p.points.len());
        for x in &p.points {
            let f = eval_field(d, 0.0, &Vec3::from(*x), q, p.hessian)?;
            let mut row = vec![x[0], x[1], x[2], f.phi, f.grad[0], f.grad[1], f.grad[2]];
            if let Some(h) = f.hessian {
                for r in h {
                    row.extend(r);
                }
            }
            rows.push(row);
        }
        io::write_csv(sink.file("fields.csv", "potential, gravity and tidal matrix at the requested points")?, &header, rows)?;
        summary.push(format!("evaluated fields at {} points", p.points.len()));
    }
    if let Some(b) = &p.bounds {
        let mass = d.total_mass();
        let samples = boundary_points(d, b.boundary_points)?;
        let g1 = b.g1.unwrap_or_else(|| gravity_bound_g1(mass, b.delta.unwrap()));
        let gravity = check_gravity_bound(d, 0.0, &samples, g1, q)?;
        let (g0, tidal) = if b.tidal {
            let g0 = b.g0.unwrap_or_else(|| tidal_bound_g0(mass, b.delta.unwrap()));
            (Some(g0), Some(check_tidal_bound(d, 0.0, &samples, g0, q)?))
        } else {
            (None, None)
        };
        summary.push(format!("gravity bound G1 = {g1}: {} (max ratio {})", verdict(gravity.pass), gravity.max_ratio));
        pass &= gravity.pass;
        if let (Some(g0), Some(t)) = (g0, &tidal) {
            summary.push(format!("tidal bound G0 = {g0}: {} (max ratio {})", verdict(t.pass), t.max_ratio));
            pass &= t.pass;
        }
        sink.json("bounds.json", "gravity and tidal bound certificate", &BoundsCertificate { g1, gravity, g0, tidal })?;
    }
    if let Some(r) = &p.regularity {
        let rep: RegularityReport = classify_regularity(d, &[0.0], r.b, r.delta, &r.sampler)?;
        let ok = rep.verdict == Verdict::Pass;
        summary.push(format!("regularity R^{} (δ = {}): {}", r.b, r.delta, verdict(ok)));
        pass &= ok;
        sink.json("regularity.json", "regularity class certificate", &rep)?;
    }
    Ok(Findings { pass, conforming: None, summary })
}

#[derive(Serialize)]
struct IdentityCertificate {
    total_force: ForceResidual,
    force_tol: f64,
    force_pass: bool,
    virial_potential: VirialIdentity,
    virial_tol: f64,
    virial_pass: bool,
}

fn identity_check(c: &IdentityCheck, sink: &mut Sink) -> Result<Findings> {
    let force = check_identity_total_force(&c.density, 0.0, &c.quadrature)?;
    let vir = check_identity_virial_potential(&c.density, 0.0, &c.quadrature)?;
    let force_pass = force.residual < c.force_tol * force.scale;
    let virial_pass = vir.residual < c.virial_tol;
    let cert = IdentityCertificate {
        total_force: force,
        force_tol: c.force_tol,
        force_pass,
        virial_potential: vir,
        virial_tol: c.virial_tol,
        virial_pass,
    };
    sink.json("identities.json", "integral identity certificate", &cert)?;
    Ok(Findings {
        pass: force_pass && virial_pass,
        conforming: None,
        summary: vec![
            format!("∫ρ∇Φ = 0: {} (residual {:e} of scale {})", verdict(force_pass), force.residual, force.scale),
            format!("∫ρ x·∇Φ = −½∫ρΦ: {} (relative gap {:e})", verdict(virial_pass), vir.residual),
        ],
    })
}

fn gravity_field(phys: &Physics, spec: &GravitySpec) -> Box<dyn GravityField> {
    match spec {
        GravitySpec::InverseSquare { mu, tilt } => Box::new(InverseSquare { mu: mu.unwrap_or(phys.g1), tilt: *tilt }),
        GravitySpec::PointMass { mass } => Box::new(InverseSquare::point_mass(mass.unwrap_or(phys.mass))),
        GravitySpec::Zero => Box::new(ZeroGravity),
        GravitySpec::Density { density, quadrature } => {
            Box::new(DensityGravity { density: density.clone(), quad: *quadrature })
        }
    }
}

/// Data, parameters and step for a boundary scenario.
struct Prepared {
    generated: GeneratedData,
    params: Vec<AdmissibleParams>,
    sigma: f64,
    h: f64,
    horizon: f64,
    conforming: bool,
}

fn prepare(phys: &Physics, mode: SigmaMode, seed: u64, b: &BoundarySetup) -> Result<Prepared> {
    let consts = phys.constants();
    let sigma = phys.sigma.ok_or_else(|| Error::Precondition(vec!["σ is required".into()]))?;
    let (lambda0, _) = param_intervals(sigma)?.midpoint();
    let shape = match b.shape {
        ShapeSpec::Sphere { radius, points } => Shape::Sphere { radius, points },
        ShapeSpec::Ellipsoid { axes, points } => Shape::Ellipsoid { axes, points },
        ShapeSpec::SphereAtSpeed { speed, points } => Shape::Sphere { radius: lambda0 * speed / sigma, points },
    };
    let generated = generate_admissible(&shape, sigma, &consts, b.x0_fraction, seed)?;
    let beta = phys.beta();
    let params = (0..generated.data.len()).map(|i| generated.params(i, beta)).collect();
    let a = 1.0 / sigma;
    Ok(Prepared {
        generated,
        params,
        sigma,
        h: a / b.steps_per_a,
        horizon: b.horizon.unwrap_or_else(|| phys.t_natural(sigma)),
        conforming: mode == SigmaMode::Strict && sigma < consts.sigma_dagger()?,
    })
}

#[derive(Serialize)]
struct RunParameters {
    sigma: f64,
    lambda0: f64,
    lambda1: f64,
    a: f64,
    step: f64,
    horizon: f64,
    integrator: Mode,
    gravity_factor: f64,
    conforming: bool,
}

fn run_parameters(p: &Prepared, b: &BoundarySetup) -> RunParameters {
    RunParameters {
        sigma: p.sigma,
        lambda0: p.generated.lambda0,
        lambda1: p.generated.lambda1,
        a: 1.0 / p.sigma,
        step: p.h,
        horizon: p.horizon,
        integrator: b.integrator,
        gravity_factor: b.gravity_factor,
        conforming: p.conforming,
    }
}

#[derive(Serialize)]
struct BootstrapCertificate {
    parameters: RunParameters,
    assumed_pass: bool,
    improved_pass: bool,
    /// Earliest violation of an assumed or improved bound.
    witness: Option<Violation>,
    trajectories: Vec<TrajectorySummary>,
}

#[derive(Serialize)]
struct TrajectorySummary {
    index: usize,
    file: String,
    speed: f64,
    pass: bool,
}

#[derive(Serialize)]
struct EnvelopeCertificate {
    parameters: RunParameters,
    pass: bool,
    witness: Option<Violation>,
}

fn trajectory_file(i: usize) -> String {
    format!("trajectories/trajectory_{i:04}.csv")
}

fn earliest(vs: impl IntoIterator<Item = Option<Violation>>) -> Option<Violation> {
    vs.into_iter().flatten().min_by(|a, b| a.t.total_cmp(&b.t))
}

/// Earliest failure among the assumed and improved bootstrap bounds.
fn bootstrap_witness(traj: &BoundaryTrajectory, index: usize) -> Option<Violation> {
    traj.samples.iter().find_map(|s| {
        let f = sample_flags(s, &traj.params);
        (0..8).find(|&k| !f[k]).map(|k| Violation { t: s.t, bound: BOUND_NAMES[k].to_string(), trajectory: Some(index) })
    })
}

fn boundary_certify(phys: &Physics, mode: SigmaMode, seed: u64, b: &BoundarySetup, sink: &mut Sink) -> Result<Findings> {
    let prep = prepare(phys, mode, seed, b)?;
    let base = gravity_field(phys, &b.gravity);
    let grav = Scaled { inner: base.as_ref(), factor: b.gravity_factor };
    let trajs = integrate_boundary(&prep.generated.data, &grav, &prep.params, prep.h, prep.horizon, b.integrator)?;
    write_boundary_csv(&sink.file("boundary_data.csv", "generated admissible boundary data")?, &prep.generated.data)?;
    let reports: Vec<BoundMonitorReport> = trajs.iter().map(monitor_bootstrap).collect();
    let mut summaries = Vec::with_capacity(trajs.len());
    for (i, t) in trajs.iter().enumerate() {
        let file = trajectory_file(i);
        write_trajectory_csv(&sink.file(&file, "boundary parcel trajectory with bound flags")?, t)?;
        summaries.push(TrajectorySummary { index: i, file, speed: t.params.speed, pass: reports[i].pass() });
    }
    let merged = merge_reports(reports.iter().cloned());
    let boot_witness = earliest(trajs.iter().enumerate().map(|(i, t)| bootstrap_witness(t, i)));
    let env_witness = earliest(trajs.iter().enumerate().map(|(i, t)| {
        check_envelope(t).first_violation.map(|mut v| {
            v.trajectory = Some(i);
            v
        })
    }));
    let boot_pass = merged.bootstrap_pass && merged.improved_pass;
    sink.json(
        "bootstrap.json",
        "assumed and improved bootstrap bound certificate",
        &BootstrapCertificate {
            parameters: run_parameters(&prep, b),
            assumed_pass: merged.bootstrap_pass,
            improved_pass: merged.improved_pass,
            witness: boot_witness.clone(),
            trajectories: summaries,
        },
    )?;
    sink.json(
        "envelope.json",
        "trajectory envelope certificate",
        &EnvelopeCertificate { parameters: run_parameters(&prep, b), pass: merged.envelope_pass, witness: env_witness.clone() },
    )?;
    let describe = |w: &Option<Violation>| match w {
        Some(v) => format!(" (first violation {} at t = {} on trajectory {})", v.bound, v.t, v.trajectory.unwrap_or(0)),
        None => String::new(),
    };
    let mut summary = vec![
        format!("{} trajectories, σ = {}, horizon {}, step {}", trajs.len(), prep.sigma, prep.horizon, prep.h),
        format!("bootstrap bounds: {}{}", verdict(boot_pass), describe(&boot_witness)),
        format!("envelope: {}{}", verdict(merged.envelope_pass), describe(&env_witness)),
    ];
    if !prep.conforming {
        summary.push("σ is not below σ†: results are non-conforming (relaxed mode)".into());
    }
    Ok(Findings { pass: merged.pass(), conforming: Some(prep.conforming), summary })
}

/// Perturbation state with the given fractions of the initial caps.
fn conforming_state(sc: &Scaling, fractions: (f64, f64, f64), seed: u64) -> Result<KinematicState> {
    let (fe, fs, fb) = fractions;
    let s = sc.sigma;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5241_5943);
    let mut dir = [0.0; 5];
    for v in &mut dir {
        *v = rng.gen_range(-1.0..1.0);
    }
    let probe = PerturbationState { e_frak: 0.0, s_frak: dir, b_frak: [0.0; 3], s_big: 0.0 };
    let s_dir = probe.s_matrix().component_mul(&probe.s_matrix()).sum();
    let target_s = fs * s.recip() / 16.0;
    let k = if s_dir > 0.0 { (target_s / s_dir).sqrt() } else { 0.0 };
    let b_dir = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let b = if b_dir.norm() > 0.0 { b_dir.normalize() * (fb * 0.25 / s.sqrt()) } else { Vec3::zeros() };
    let p = PerturbationState {
        e_frak: fe * sc.lambda0 / (12.0 * sc.lambda1 * s),
        s_frak: dir.map(|v| v * k),
        b_frak: b.into(),
        s_big: target_s,
    };
    from_perturbation(&p, 0.0, sc)
}

#[derive(Serialize)]
struct RaychaudhuriCertificate {
    parameters: RunParameters,
    parcel: usize,
    initial: KinematicState,
    tidal: TidalMode,
    g0: f64,
    /// Largest `|∂∂Φ|·|χ|³` along the path.
    tidal_peak: Option<f64>,
    tidal_pass: bool,
    envelope: EnvelopeCheck,
    perturbation: PerturbationReport,
    singularity: Option<f64>,
    /// Largest relative gap to `(Θ₀⁻¹ + t/3)⁻¹`, for zero tidal forcing.
    free_solution_gap: Option<f64>,
    pass: bool,
}

fn raychaudhuri_certify(
    phys: &Physics,
    mode: SigmaMode,
    seed: u64,
    r: &RaychaudhuriCertify,
    sink: &mut Sink,
) -> Result<Findings> {
    let b = &r.boundary;
    let prep = prepare(phys, mode, seed, b)?;
    let base = gravity_field(phys, &b.gravity);
    let grav = Scaled { inner: base.as_ref(), factor: b.gravity_factor };
    let i = r.parcel;
    let traj = integrate_trajectory(&prep.generated.data[i], &grav, &prep.params[i], prep.h, prep.horizon, b.integrator)?;
    write_trajectory_csv(&sink.file(&trajectory_file(i), "traced boundary parcel trajectory")?, &traj)?;
    let sc = Scaling { sigma: prep.sigma, lambda0: prep.generated.lambda0, lambda1: prep.generated.lambda1 };
    let init = match r.initial {
        InitialKinematics::Conforming { e_fraction, s_fraction, b_fraction } => {
            conforming_state(&sc, (e_fraction, s_fraction, b_fraction), seed)?
        }
        InitialKinematics::Explicit { state } => state,
    };
    let along = TrajectoryTidal { trajectory: &traj, gravity: &grav, factor: 1.0 };
    let source: &dyn TidalSource = match r.tidal {
        TidalMode::Trajectory => &along,
        TidalMode::Zero => &ZeroTidal,
    };
    let series = integrate_raychaudhuri(&init, source, prep.h, prep.horizon)?;
    write_kinematics_csv(&sink.file("kinematics.csv", "expansion, shear, rotation and perturbation variables")?, &series, &sc)?;
    let perturbation = monitor_perturbation_bounds(&series, &sc);
    let g0 = phys.g0();
    let tidal_peak = series.samples.iter().filter_map(|s| s.tidal_weighted).reduce(f64::max);
    let tidal_pass = tidal_peak.is_none_or(|p| p <= g0 * (1.0 + TIDAL_RTOL));
    let free_solution_gap = match r.tidal {
        TidalMode::Zero => {
            let mut gap = 0.0f64;
            for s in &series.samples {
                let exact = free_solution(s.t, init.theta)?;
                gap = gap.max((s.state.theta - exact).abs() / exact.abs());
            }
            Some(gap)
        }
        TidalMode::Trajectory => None,
    };
    let envelope = check_envelope(&traj);
    let pass = perturbation.assumed_pass && perturbation.improved_pass && perturbation.w_pass && tidal_pass && envelope.pass;
    let mut summary = vec![
        format!("parcel {i}: Θ₀ = {}, horizon {}", init.theta, prep.horizon),
        format!(
            "perturbation bounds: assumed {}, improved {}{}",
            verdict(perturbation.assumed_pass),
            verdict(perturbation.improved_pass),
            perturbation.first_violation.as_ref().map_or(String::new(), |(t, n)| format!(" (first violation {n} at t = {t})"))
        ),
        format!("sup|W| = {} against {}: {}", perturbation.w_sup, perturbation.w_bound, verdict(perturbation.w_pass)),
        format!("tidal ≤ G0/|χ|³ with G0 = {g0}: {}", verdict(tidal_pass)),
        format!("parcel envelope: {}", verdict(envelope.pass)),
    ];
    if let Some(g) = free_solution_gap {
        summary.push(format!("largest relative gap to the free solution: {g:e}"));
    }
    sink.json(
        "raychaudhuri.json",
        "Raychaudhuri perturbation bound certificate",
        &RaychaudhuriCertificate {
            parameters: run_parameters(&prep, b),
            parcel: i,
            initial: init,
            tidal: r.tidal,
            g0,
            tidal_peak,
            tidal_pass,
            envelope,
            perturbation,
            singularity: series.singularity,
            free_solution_gap,
            pass,
        },
    )?;
    Ok(Findings { pass, conforming: Some(prep.conforming), summary })
}

fn virial_certify(phys: &Physics, v: &VirialCertify, sink: &mut Sink) -> Result<Findings> {
    let inp = phys.virial_inputs();
    let a = v.a.or(phys.sigma.map(f64::recip)).ok_or_else(|| Error::Precondition(vec!["virial-certify needs a or σ".into()]))?;
    let t_natural = phys.t_natural(1.0 / a);
    let t_dagger = critical_time(&inp, v.speed, a)?;
    let horizon = v.horizon.unwrap_or(t_natural);
    let n = v.samples;
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let t = if k + 1 == n { horizon } else { horizon * k as f64 / (n - 1) as f64 };
            (t, 2.0 * v.speed * (t + a))
        })
        .collect();
    let mut cert: Certificate = blowup_certificate(&inp, &samples, horizon)?;
    cert.t_dagger = Some(t_dagger);
    cert.t_natural = Some(t_natural);
    io::write_csv(
        sink.file("virial.csv", "virial functional along the linear envelope")?,
        &["t", "R", "F"],
        samples.iter().map(|&(t, r)| [t, r, virial_f(t, r, &inp)]),
    )?;
    sink.json("virial.json", "virial blowup certificate", &cert)?;
    let flagged = cert.verdict == CertificateVerdict::BlowupBeforeT && cert.first_positive_t.is_some_and(|t| t <= t_natural);
    let pass = flagged && t_dagger < t_natural;
    Ok(Findings {
        pass,
        conforming: None,
        summary: vec![
            format!("T† = {t_dagger}, T♮ = {t_natural}"),
            format!(
                "F > 0 first at {}: blowup before T♮ {}",
                cert.first_positive_t.map_or("never".into(), |t| t.to_string()),
                verdict(pass)
            ),
        ],
    })
}

#[derive(Serialize)]
struct SphCertificate {
    particles: usize,
    steps: usize,
    drift: DriftReport,
    tolerances: SphTolerances,
    drift_pass: bool,
    beta: f64,
    energy: f64,
    /// Smallest second difference of `H`, when `E > 0`.
    min_h_ddot: Option<f64>,
    virial_pass: bool,
    events: Vec<DensityEvent>,
    pass: bool,
}

fn sph_run(phys: Option<&Physics>, s: &SphRun, sink: &mut Sink) -> Result<Findings> {
    let out = fluid_sim::run(&s.sph)?;
    let header: Vec<&str> = Diagnostics::CSV_HEADER.iter().copied().chain(["E_kin", "E_int", "E_grav"]).collect();
    io::write_csv(
        sink.file("diagnostics.csv", "conserved quantities after every step")?,
        &header,
        out.diagnostics.iter().map(|d| {
            let mut row = d.csv_row().to_vec();
            row.extend([d.kinetic, d.internal, d.gravitational]);
            row
        }),
    )?;
    if s.write_snapshots {
        for (k, snap) in out.snapshots.iter().enumerate() {
            let stem = format!("snapshots/snap_{k:04}");
            sink.file(&format!("{stem}.bin"), "snapshot particle data (little-endian float64 rows)")?;
            let side = sink.file(&format!("{stem}.json"), "snapshot sidecar")?;
            snap.write(&side.with_extension(""))?;
        }
    }
    let drift = drift_report(&out.diagnostics)?;
    let tol = s.tolerances;
    let drift_pass = drift.mass <= tol.mass_drift && drift.com_velocity < tol.com_velocity_drift && drift.energy < tol.energy_drift;
    let beta = phys.map_or_else(|| crate::admissible::beta_of_gamma(s.sph.eos.gamma), Physics::beta);
    let energy = out.diagnostics[0].energy;
    let series: Vec<(f64, f64)> = out.diagnostics.iter().map(|d| (d.t, d.h)).collect();
    let hdd = second_differences(&series);
    io::write_csv(sink.file("h_ddot.csv", "second differences of the moment of inertia")?, &["t", "H_ddot"], hdd.iter().map(|&(t, v)| [t, v]))?;
    let min_h_ddot = (energy > 0.0).then(|| hdd.iter().map(|p| p.1).fold(f64::INFINITY, f64::min));
    let virial_pass = min_h_ddot.is_none_or(|m| m >= beta * energy * (1.0 - tol.virial_rtol));
    let events = match &s.detector {
        Some(spec) => density_extremum_detector(&out.snapshots, spec)?,
        None => Vec::new(),
    };
    if s.detector.is_some() {
        io::write_csv(
            sink.file("events.csv", "near-boundary density events (accretion = 1, fragmentation = 0)")?,
            &["parcel", "t", "accretion", "relative_density"],
            events.iter().map(|e| [e.parcel as f64, e.t, f64::from(u8::from(e.kind == EventKind::Accretion)), e.relative_density]),
        )?;
    }
    let pass = drift_pass && virial_pass;
    let summary = vec![
        format!("{} particles, {} steps", out.snapshots[0].len(), out.diagnostics.len() - 1),
        format!("drift: mass {}, COM velocity {:e}, energy {:e}: {}", drift.mass, drift.com_velocity, drift.energy, verdict(drift_pass)),
        match min_h_ddot {
            Some(m) => format!("min Ḧ = {m} against βE = {}: {}", beta * energy, verdict(virial_pass)),
            None => "E ≤ 0: Ḧ ≥ βE not applicable".into(),
        },
        format!("{} density events", events.len()),
    ];
    sink.json(
        "sph.json",
        "SPH conservation certificate",
        &SphCertificate {
            particles: out.snapshots[0].len(),
            steps: out.diagnostics.len() - 1,
            drift,
            tolerances: tol,
            drift_pass,
            beta,
            energy,
            min_h_ddot,
            virial_pass,
            events,
            pass,
        },
    )?;
    Ok(Findings { pass, conforming: None, summary })
}
