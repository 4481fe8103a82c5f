use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::admissible::{beta_of_gamma, param_intervals, CloudConstants, SigmaMode};
use crate::boundary_dynamics::Mode;
use crate::fluid_sim::{DetectorSpec, SphConfig};
use crate::potential::{DensityModel, SamplerSpec};
use crate::quadrature::QuadratureSpec;
use crate::raychaudhuri::KinematicState;
use crate::virial::{VirialInputs, KAPPA1};
use crate::{Error, Result};

/// One batch run: shared physics, the scenario, and where artifacts go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub mode: SigmaMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub physics: Option<Physics>,
    pub scenario: Scenario,
}

/// Cloud constants. `g0` defaults to `2·g1`, `beta` to `β(γ)` (or 1 without
/// γ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub energy: f64,
    pub mass: f64,
    pub g1: f64,
    #[serde(default)]
    pub g0: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub h0: f64,
    #[serde(default)]
    pub h_prime0: f64,
}

impl Physics {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or_else(|| self.gamma.map_or(1.0, beta_of_gamma))
    }

    pub fn g0(&self) -> f64 {
        self.g0.unwrap_or(2.0 * self.g1)
    }

    pub fn constants(&self) -> CloudConstants {
        CloudConstants {
            energy: self.energy,
            mass: self.mass,
            g1: self.g1,
            g0: self.g0(),
            beta: self.beta(),
            h_prime0: self.h_prime0,
        }
    }

    pub fn virial_inputs(&self) -> VirialInputs {
        VirialInputs { energy: self.energy, mass: self.mass, beta: self.beta(), h0: self.h0, h_prime0: self.h_prime0 }
    }

    /// `T♮ = κ₁σ⁻¹ + κ₂`.
    pub fn t_natural(&self, sigma: f64) -> f64 {
        KAPPA1 / sigma + self.virial_inputs().kappa2()
    }

    fn violations(&self, out: &mut Vec<String>) {
        if !(self.energy > 0.0) {
            out.push(format!("E = {} must be positive (the virial blowup argument needs E > 0)", self.energy));
        }
        if !(self.mass > 0.0) {
            out.push(format!("M = {} must be positive", self.mass));
        }
        if !(self.g1 > 0.0) {
            out.push(format!("G1 = {} must be positive", self.g1));
        }
        if let Some(g0) = self.g0 {
            if !(g0 > 0.0) {
                out.push(format!("G0 = {g0} must be positive"));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 1.0) {
                out.push(format!("γ = {g} must exceed 1"));
            }
        }
        if let Some(k) = self.k {
            if !(k >= 0.0) {
                out.push(format!("K = {k} must be nonnegative"));
            }
        }
        let beta = self.beta();
        if !(beta > 0.0 && beta <= 1.0) {
            out.push(format!("β = {beta} outside (0, 1]"));
        }
        if !(self.h0 >= 0.0) {
            out.push(format!("H(0) = {} must be nonnegative", self.h0));
        }
        if !self.h_prime0.is_finite() {
            out.push("H′(0) must be finite".into());
        }
    }

    /// σ against the caps of `mode`, plus the compatibility of (E, M, G1).
    fn sigma_violations(&self, mode: SigmaMode, out: &mut Vec<String>) {
        let c = self.constants();
        if self.energy > 0.0 && self.mass > 0.0 && self.g1 > 0.0 && !c.is_compatible() {
            out.push(format!(
                "(E, M, G1) not compatible: (9 G1)^(1/3) = {} must be below sqrt(βE/M)/24 = {}",
                c.a_min(),
                c.a_max()
            ));
        }
        let Some(sigma) = self.sigma else {
            out.push("σ is required".into());
            return;
        };
        let (Ok(star), Ok(dagger)) = (c.sigma_star(), c.sigma_dagger()) else { return };
        if !(sigma > 0.0 && sigma < star) {
            out.push(format!("σ = {sigma} outside (0, σ★) with σ★ = min(1/5, βE/(500|H′(0)|)) = {star}"));
        } else if mode == SigmaMode::Strict && !(sigma < dagger) {
            out.push(format!("σ = {sigma} is not below σ† = {dagger:e} (strict mode; use relaxed mode for σ < σ★ = {star})"));
        } else if let Err(e) = param_intervals(sigma) {
            out.push(e.to_string());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    PotentialCheck(PotentialCheck),
    BoundaryCertify(BoundarySetup),
    RaychaudhuriCertify(RaychaudhuriCertify),
    VirialCertify(VirialCertify),
    SphRun(SphRun),
    IdentityCheck(IdentityCheck),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::PotentialCheck(_) => "potential-check",
            Scenario::BoundaryCertify(_) => "boundary-certify",
            Scenario::RaychaudhuriCertify(_) => "raychaudhuri-certify",
            Scenario::VirialCertify(_) => "virial-certify",
            Scenario::SphRun(_) => "sph-run",
            Scenario::IdentityCheck(_) => "identity-check",
        }
    }
}

fn default_true() -> bool {
    true
}

/// Fields at given points, and optionally the gravity/tidal bounds and a
/// regularity class on the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialCheck {
    pub density: DensityModel,
    #[serde(default)]
    pub points: Vec<[f64; 3]>,
    #[serde(default = "default_true")]
    pub hessian: bool,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub bounds: Option<BoundSpec>,
    #[serde(default)]
    pub regularity: Option<RegularitySpec>,
}

fn default_boundary_points() -> usize {
    100
}

/// Bound constants either explicit or from `δ` and the density's mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub g1: Option<f64>,
    #[serde(default)]
    pub g0: Option<f64>,
    #[serde(default = "default_boundary_points")]
    pub boundary_points: usize,
    #[serde(default = "default_true")]
    pub tidal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularitySpec {
    pub b: u8,
    pub delta: f64,
    #[serde(default)]
    pub sampler: SamplerSpec,
}

/// Initial boundary surface for the data generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeSpec {
    Sphere { radius: f64, points: usize },
    Ellipsoid { axes: [f64; 3], points: usize },
    /// Sphere of radius `λ₀A/σ`, so every point has velocity scale `A`.
    SphereAtSpeed { speed: f64, points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GravitySpec {
    /// `|∇Φ| = μ/|χ|²` at angle `tilt` from the radial; μ defaults to G1.
    InverseSquare {
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default)]
        tilt: f64,
    },
    /// Point mass, M by default.
    PointMass {
        #[serde(default)]
        mass: Option<f64>,
    },
    Zero,
    Density {
        density: DensityModel,
        #[serde(default)]
        quadrature: QuadratureSpec,
    },
}

impl Default for GravitySpec {
    fn default() -> Self {
        GravitySpec::InverseSquare { mu: None, tilt: 0.0 }
    }
}

fn default_x0_fraction() -> f64 {
    0.5
}
fn default_one() -> f64 {
    1.0
}
fn default_steps_per_a() -> f64 {
    1e4
}

/// Admissible data on a shape, integrated under a gravity field over
/// `[0, horizon]` (T♮ by default) with step `a / steps_per_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySetup {
    pub shape: ShapeSpec,
    #[serde(default = "default_x0_fraction")]
    pub x0_fraction: f64,
    #[serde(default)]
    pub gravity: GravitySpec,
    #[serde(default = "default_one")]
    pub gravity_factor: f64,
    #[serde(default)]
    pub integrator: Mode,
    #[serde(default = "default_steps_per_a")]
    pub steps_per_a: f64,
    #[serde(default)]
    pub horizon: Option<f64>,
}

fn default_half() -> f64 {
    0.5
}

/// Initial kinematics at the traced boundary parcel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialKinematics {
    /// Perturbation sizes as fractions of the initial caps
    /// `|𝔢₀| ≤ (λ₀/12λ₁)σ⁻¹`, `𝔖₀ ≤ σ⁻¹/16`, `|𝔟₀| ≤ ¼σ^{−1/2}`, with
    /// seeded random directions.
    Conforming {
        #[serde(default = "default_half")]
        e_fraction: f64,
        #[serde(default = "default_half")]
        s_fraction: f64,
        #[serde(default = "default_half")]
        b_fraction: f64,
    },
    Explicit { state: KinematicState },
}

impl Default for InitialKinematics {
    fn default() -> Self {
        InitialKinematics::Conforming { e_fraction: 0.5, s_fraction: 0.5, b_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TidalMode {
    /// Hessian of the boundary gravity along the traced trajectory.
    #[default]
    Trajectory,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaychaudhuriCertify {
    pub boundary: BoundarySetup,
    /// Index of the traced boundary parcel.
    #[serde(default)]
    pub parcel: usize,
    #[serde(default)]
    pub initial: InitialKinematics,
    #[serde(default)]
    pub tidal: TidalMode,
}

fn default_virial_samples() -> usize {
    10_001
}

/// `F(t)` along `R(t) = 2A(t + a)`; `a` defaults to `1/σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirialCertify {
    pub speed: f64,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_virial_samples")]
    pub samples: usize,
}

fn default_energy_drift() -> f64 {
    0.01
}
fn default_com_drift() -> f64 {
    1e-10
}
fn default_virial_rtol() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphTolerances {
    #[serde(default = "default_energy_drift")]
    pub energy_drift: f64,
    #[serde(default = "default_com_drift")]
    pub com_velocity_drift: f64,
    #[serde(default)]
    pub mass_drift: f64,
    /// `Ḧ ≥ βE(1 − virial_rtol)`.
    #[serde(default = "default_virial_rtol")]
    pub virial_rtol: f64,
}

impl Default for SphTolerances {
    fn default() -> Self {
        Self {
            energy_drift: default_energy_drift(),
            com_velocity_drift: default_com_drift(),
            mass_drift: 0.0,
            virial_rtol: default_virial_rtol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphRun {
    pub sph: SphConfig,
    #[serde(default)]
    pub detector: Option<DetectorSpec>,
    #[serde(default)]
    pub tolerances: SphTolerances,
    #[serde(default = "default_true")]
    pub write_snapshots: bool,
}

fn default_force_tol() -> f64 {
    1e-3
}
fn default_identity_tol() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityCheck {
    pub density: DensityModel,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// Accept `|∫ρ∇Φ| < force_tol · ∫ρ|∇Φ|`.
    #[serde(default = "default_force_tol")]
    pub force_tol: f64,
    /// Accept a relative gap below this between `∫ρ x·∇Φ` and `−½∫ρΦ`.
    #[serde(default = "default_identity_tol")]
    pub virial_tol: f64,
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub relaxed: bool,
    pub seed: Option<u64>,
}

/// Reads, validates and returns a scenario with defaults filled in.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    load_config(path, &Overrides::default())
}

/// [`parse_config`] with command-line overrides applied before validation.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cfg = parse_config_str(&text, base)?;
    cfg.apply(overrides);
    cfg.validate()?;
    Ok(cfg)
}

/// Parses without validating. Grid sidecars resolve relative to `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<ScenarioConfig> {
    let mut cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    for d in cfg.densities_mut() {
        d.resolve(base)?;
    }
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.output_dir = Some(out.clone());
        }
        if o.relaxed {
            self.mode = SigmaMode::Relaxed;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn densities_mut(&mut self) -> Vec<&mut DensityModel> {
        let mut out = Vec::new();
        match &mut self.scenario {
            Scenario::PotentialCheck(p) => out.push(&mut p.density),
            Scenario::IdentityCheck(p) => out.push(&mut p.density),
            Scenario::BoundaryCertify(b) => {
                if let GravitySpec::Density { density, .. } = &mut b.gravity {
                    out.push(density);
                }
            }
            Scenario::RaychaudhuriCertify(r) => {
                if let GravitySpec::Density { density, .. } = &mut r.boundary.gravity {
                    out.push(density);
                }
            }
            _ => {}
        }
        out
    }

    /// Every violated constraint, or `Ok`.
    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Precondition(v))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let needs_physics = matches!(
            self.scenario,
            Scenario::BoundaryCertify(_) | Scenario::RaychaudhuriCertify(_) | Scenario::VirialCertify(_)
        );
        match (&self.physics, needs_physics) {
            (Some(p), _) => p.violations(&mut out),
            (None, true) => out.push(format!("{} needs a physics block", self.scenario.kind())),
            (None, false) => {}
        }
        match &self.scenario {
            Scenario::PotentialCheck(p) => {
                density_violations(&p.density, &mut out);
                quadrature_violations(&p.quadrature, &mut out);
                if let Some(b) = &p.bounds {
                    if b.g1.is_none() && b.delta.is_none() {
                        out.push("bounds need δ or an explicit G1".into());
                    }
                    if b.tidal && b.g0.is_none() && b.delta.is_none() {
                        out.push("tidal bound needs δ or an explicit G0".into());
                    }
                    if let Some(d) = b.delta {
                        if !(d > 0.0 && d < 1.0) {
                            out.push(format!("δ = {d} outside (0, 1)"));
                        }
                    }
                    if b.boundary_points == 0 {
                        out.push("bounds need at least one boundary point".into());
                    }
                }
                if let Some(r) = &p.regularity {
                    if r.b > 1 {
                        out.push(format!("regularity index b = {} must be 0 or 1", r.b));
                    }
                    if !(r.delta > 0.0 && r.delta < 1.0) {
                        out.push(format!("regularity δ = {} outside (0, 1)", r.delta));
                    }
                }
            }
            Scenario::IdentityCheck(c) => {
                density_violations(&c.density, &mut out);
                quadrature_violations(&c.quadrature, &mut out);
                if !(c.force_tol > 0.0 && c.virial_tol > 0.0) {
                    out.push("identity tolerances must be positive".into());
                }
            }
            Scenario::BoundaryCertify(b) => {
                if let Some(p) = &self.physics {
                    p.sigma_violations(self.mode, &mut out);
                }
                boundary_violations(b, &mut out);
            }
            Scenario::RaychaudhuriCertify(r) => {
                if let Some(p) = &self.physics {
                    p.sigma_violations(self.mode, &mut out);
                }
                boundary_violations(&r.boundary, &mut out);
                if r.parcel >= shape_points(&r.boundary.shape) {
                    out.push(format!("parcel {} outside the {} boundary points", r.parcel, shape_points(&r.boundary.shape)));
                }
                match r.initial {
                    InitialKinematics::Conforming { e_fraction, s_fraction, b_fraction } => {
                        for (name, f) in [("e", e_fraction), ("s", s_fraction), ("b", b_fraction)] {
                            if !(0.0..=1.0).contains(&f) {
                                out.push(format!("{name}_fraction = {f} outside [0, 1]"));
                            }
                        }
                    }
                    InitialKinematics::Explicit { state } => {
                        if !(state.theta > 0.0) {
                            out.push(format!("initial Θ = {} must be positive", state.theta));
                        }
                    }
                }
            }
            Scenario::VirialCertify(v) => {
                if !(v.speed > 0.0) {
                    out.push(format!("A = {} must be positive", v.speed));
                }
                match (v.a, self.physics.and_then(|p| p.sigma)) {
                    (Some(a), _) if !(a > 0.0) => out.push(format!("a = {a} must be positive")),
                    (None, None) => out.push("virial-certify needs a or σ".into()),
                    (None, Some(s)) if !(s > 0.0) => out.push(format!("σ = {s} must be positive")),
                    _ => {}
                }
                if let Some(h) = v.horizon {
                    if !(h > 0.0) {
                        out.push(format!("horizon = {h} must be positive"));
                    }
                }
                if v.samples < 2 {
                    out.push(format!("virial-certify needs ≥ 2 samples, got {}", v.samples));
                }
            }
            Scenario::SphRun(s) => {
                let c = &s.sph;
                if !(c.eos.gamma > 1.0) || !(c.eos.k >= 0.0) {
                    out.push(format!("equation of state needs γ > 1 and K ≥ 0, got {:?}", c.eos));
                }
                if !(c.horizon != 0.0 && c.horizon.is_finite()) {
                    out.push(format!("horizon = {} must be finite and nonzero", c.horizon));
                }
                if !(c.eta > 0.0 && c.courant > 0.0) {
                    out.push("η and the Courant factor must be positive".into());
                }
                if let Some(d) = &s.detector {
                    if !(d.delta > 0.0 && d.delta < 1.0) {
                        out.push(format!("detector δ = {} outside (0, 1)", d.delta));
                    }
                    if s.sph.snapshot_every == 0 {
                        out.push("snapshot_every must be positive".into());
                    }
                }
            }
        }
        out
    }
}

fn shape_points(s: &ShapeSpec) -> usize {
    match *s {
        ShapeSpec::Sphere { points, .. } | ShapeSpec::Ellipsoid { points, .. } | ShapeSpec::SphereAtSpeed { points, .. } => points,
    }
}

fn density_violations(d: &DensityModel, out: &mut Vec<String>) {
    if let Err(e) = d.validate() {
        out.push(e.to_string());
    }
}

fn quadrature_violations(q: &QuadratureSpec, out: &mut Vec<String>) {
    if !(q.rel_tol > 0.0) || !(q.abs_tol >= 0.0) || q.max_nodes == 0 {
        out.push(format!("quadrature needs rel_tol > 0, abs_tol ≥ 0 and a node budget: {q:?}"));
    }
}

fn boundary_violations(b: &BoundarySetup, out: &mut Vec<String>) {
    if shape_points(&b.shape) == 0 {
        out.push("shape needs at least one boundary point".into());
    }
    if !(0.0..1.0).contains(&b.x0_fraction) {
        out.push(format!("x0_fraction = {} outside [0, 1)", b.x0_fraction));
    }
    if !(b.gravity_factor >= 0.0 && b.gravity_factor.is_finite()) {
        out.push(format!("gravity_factor = {} must be finite and nonnegative", b.gravity_factor));
    }
    if !(b.steps_per_a >= 1.0) {
        out.push(format!("steps_per_a = {} must be at least 1", b.steps_per_a));
    }
    if let Some(h) = b.horizon {
        if !(h > 0.0) {
            out.push(format!("horizon = {h} must be positive"));
        }
    }
    if b.integrator == Mode::Reduced && matches!(b.gravity, GravitySpec::Density { .. }) {
        out.push("the reduced integrator needs a gravity field with a (q, z, Y) form".into());
    }
    if let GravitySpec::Density { density, quadrature } = &b.gravity {
        density_violations(density, out);
        quadrature_violations(quadrature, out);
    }
}
