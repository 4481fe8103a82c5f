use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::sph::{cloud_diagnostics, Leapfrog, ParticleCloud, COURANT};
use crate::conservation::{Diagnostics, Eos};
use crate::{io, Error, Result, Vec3};

/// Initial particle layouts. Velocities are `hubble·x + ω×x` unless noted;
/// every generated cloud is shifted to its centre-of-mass frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    UniformBall {
        n: usize,
        radius: f64,
        mass: f64,
        #[serde(default)]
        hubble: f64,
        #[serde(default)]
        omega: [f64; 3],
        /// Lattice jitter as a fraction of the spacing.
        #[serde(default)]
        jitter: f64,
    },
    /// `ρ ∝ (1 − r²/R²)^p`, obtained by a radial mass-coordinate remap of the
    /// uniform lattice.
    TaperedBall {
        n: usize,
        radius: f64,
        mass: f64,
        exponent: f64,
        #[serde(default)]
        hubble: f64,
    },
    /// Two equal uniform balls at `±separation/2` on the x axis moving
    /// towards each other with `speed` each.
    TwoBlobs {
        n_per_blob: usize,
        radius: f64,
        mass: f64,
        separation: f64,
        #[serde(default)]
        speed: f64,
    },
    /// Two point masses `m` at distance `d` on the circular orbit
    /// `v² = m/(8πd)`.
    TwoBody { mass: f64, separation: f64 },
}

/// Cubic lattice points closest to the origin, rescaled so the outermost sits
/// at `radius`. Returns the points and the lattice spacing.
pub fn ball_lattice(n: usize, radius: f64, jitter: f64, seed: u64) -> (Vec<Vec3>, f64) {
    let s = radius * (4.0 * std::f64::consts::PI / (3.0 * n as f64)).cbrt();
    let k = (1.3 * radius / s).ceil() as i64 + 1;
    let mut pts = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            for l in -k..=k {
                pts.push(Vec3::new(i as f64 + 0.5, j as f64 + 0.5, l as f64 + 0.5) * s);
            }
        }
    }
    // stable sort keeps the lattice order among equal radii
    pts.sort_by(|a, b| a.norm_squared().partial_cmp(&b.norm_squared()).unwrap());
    pts.truncate(n);
    let r_max = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let scale = radius / r_max;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in &mut pts {
        *p *= scale;
        if jitter > 0.0 {
            let d = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            *p += d * (jitter * s * scale);
        }
    }
    (pts, s * scale)
}

/// Radius `r'` with the same enclosed mass fraction in the `(1−s²)^p`
/// profile as `r` in the uniform ball.
fn taper_radius(r: f64, radius: f64, p: f64) -> f64 {
    let f = (r / radius).powi(3);
    if f >= 1.0 {
        return radius;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(1.5, p + 1.0, mid * mid) < f {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) * radius
}

impl InitialCondition {
    /// Builds the cloud. Smoothing is `eta` times the local spacing and the
    /// softening defaults to half the mean spacing.
    pub fn build(&self, eos: Eos, eta: f64, softening: Option<f64>, seed: u64) -> Result<ParticleCloud> {
        let uniform = |n: usize, radius: f64, jitter: f64| -> Result<(Vec<Vec3>, f64)> {
            if n < 2 || !(radius > 0.0) {
                return Err(Error::Degenerate(format!("ball needs n ≥ 2 and R > 0: n = {n}, R = {radius}")));
            }
            Ok(ball_lattice(n, radius, jitter, seed))
        };
        let mut cloud = match *self {
            InitialCondition::UniformBall { n, radius, mass, hubble, omega, jitter } => {
                let (pos, s) = uniform(n, radius, jitter)?;
                let om = Vec3::from(omega);
                let vel = pos.iter().map(|x| x * hubble + om.cross(x)).collect();
                ParticleCloud {
                    velocities: vel,
                    masses: vec![mass / n as f64; n],
                    smoothing: vec![eta * s; n],
                    softening: softening.unwrap_or(0.5 * s),
                    positions: pos,
                    eos,
                }
            }
            InitialCondition::TaperedBall { n, radius, mass, exponent, hubble } => {
                if !(exponent >= 0.0) {
                    return Err(Error::InvalidExponent(exponent));
                }
                let (lat, s) = uniform(n, radius, 0.0)?;
                let pos: Vec<Vec3> = lat
                    .iter()
                    .map(|x| {
                        let r = x.norm();
                        if r > 0.0 { x * (taper_radius(r, radius, exponent) / r) } else { *x }
                    })
                    .collect();
                // local spacing ∝ (ρ_uniform/ρ(r'))^{1/3}, capped at 3× the mean
                let smoothing = lat
                    .iter()
                    .zip(&pos)
                    .map(|(x, y)| {
                        let (r, rp) = (x.norm(), y.norm());
                        let stretch = if r > 0.0 { (rp / r).powi(2) * (rp / r) } else { 1.0 };
                        let profile = (1.0 - (rp / radius).powi(2)).max(0.0).powf(exponent);
                        let local = if profile > 0.0 { (1.0 / (profile * stretch.max(1e-300))).cbrt() } else { 3.0 };
                        eta * s * local.clamp(0.5, 3.0)
                    })
                    .collect();
                ParticleCloud {
                    velocities: pos.iter().map(|x| x * hubble).collect(),
                    masses: vec![mass / n as f64; n],
                    smoothing,
                    softening: softening.unwrap_or(0.5 * s),
                    positions: pos,
                    eos,
                }
            }
            InitialCondition::TwoBlobs { n_per_blob, radius, mass, separation, speed } => {
                let (lat, s) = uniform(n_per_blob, radius, 0.0)?;
                let off = Vec3::new(0.5 * separation, 0.0, 0.0);
                let mut pos = Vec::with_capacity(2 * n_per_blob);
                let mut vel = Vec::with_capacity(2 * n_per_blob);
                for (sign, shift) in [(1.0, -off), (-1.0, off)] {
                    for x in &lat {
                        pos.push(x + shift);
                        vel.push(Vec3::new(sign * speed, 0.0, 0.0));
                    }
                }
                let n = pos.len();
                ParticleCloud {
                    positions: pos,
                    velocities: vel,
                    masses: vec![mass / n_per_blob as f64; n],
                    smoothing: vec![eta * s; n],
                    softening: softening.unwrap_or(0.5 * s),
                    eos,
                }
            }
            InitialCondition::TwoBody { mass, separation } => {
                let v = (mass / (8.0 * std::f64::consts::PI * separation)).sqrt();
                ParticleCloud {
                    positions: vec![Vec3::new(-0.5 * separation, 0.0, 0.0), Vec3::new(0.5 * separation, 0.0, 0.0)],
                    velocities: vec![Vec3::new(0.0, -v, 0.0), Vec3::new(0.0, v, 0.0)],
                    masses: vec![mass; 2],
                    smoothing: vec![0.1 * separation; 2],
                    softening: softening.unwrap_or(0.0),
                    eos,
                }
            }
        };
        cloud.recenter();
        cloud.validate()?;
        Ok(cloud)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DtPolicy {
    /// Fixed signed step; a step exceeding the Courant limit is an error.
    Fixed { dt: f64 },
    /// `dt = courant · h/max(cₛ, |w|)`, re-evaluated each step.
    Courant { courant: f64 },
}

fn default_eta() -> f64 {
    1.2
}
fn default_snapshot_every() -> usize {
    10
}
fn default_courant() -> f64 {
    COURANT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphConfig {
    pub initial: InitialCondition,
    pub eos: Eos,
    #[serde(default)]
    pub softening: Option<f64>,
    /// Smoothing length in units of the lattice spacing.
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub dt: DtPolicy,
    pub horizon: f64,
    /// Steps between stored snapshots.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    /// Courant factor for the limit check.
    #[serde(default = "default_courant")]
    pub courant: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Particle state plus derived density and pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
    pub masses: Vec<f64>,
    pub smoothing: Vec<f64>,
    pub density: Vec<f64>,
    pub pressure: Vec<f64>,
    pub eos: Eos,
    pub softening: f64,
    pub diagnostics: Diagnostics,
}

impl Snapshot {
    pub fn capture(cloud: &ParticleCloud, rho: &[f64], t: f64) -> Self {
        Self {
            t,
            positions: cloud.positions.iter().map(|x| (*x).into()).collect(),
            velocities: cloud.velocities.iter().map(|x| (*x).into()).collect(),
            masses: cloud.masses.clone(),
            smoothing: cloud.smoothing.clone(),
            density: rho.to_vec(),
            pressure: rho.iter().map(|&r| cloud.eos.pressure(r)).collect(),
            eos: cloud.eos,
            softening: cloud.softening,
            diagnostics: cloud_diagnostics(cloud, rho, t),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn cloud(&self) -> ParticleCloud {
        ParticleCloud {
            positions: self.positions.iter().map(|x| Vec3::from(*x)).collect(),
            velocities: self.velocities.iter().map(|x| Vec3::from(*x)).collect(),
            masses: self.masses.clone(),
            smoothing: self.smoothing.clone(),
            eos: self.eos,
            softening: self.softening,
        }
    }

    /// Column order of the binary file, one row of 10 floats per particle.
    pub const COLUMNS: [&'static str; 10] = ["x1", "x2", "x3", "w1", "w2", "w3", "m", "h", "rho", "p"];

    /// Writes `stem.bin` (row-major little-endian float64) and `stem.json`;
    /// returns the sidecar path.
    pub fn write(&self, stem: &Path) -> Result<PathBuf> {
        let mut flat = Vec::with_capacity(10 * self.len());
        for i in 0..self.len() {
            flat.extend(self.positions[i]);
            flat.extend(self.velocities[i]);
            flat.extend([self.masses[i], self.smoothing[i], self.density[i], self.pressure[i]]);
        }
        let bin = stem.with_extension("bin");
        io::write_f64_le(&bin, &flat)?;
        let side = stem.with_extension("json");
        let meta = SnapshotSidecar {
            t: self.t,
            n: self.len(),
            columns: Self::COLUMNS.iter().map(|s| s.to_string()).collect(),
            data: bin.file_name().unwrap().to_string_lossy().into_owned(),
            eos: self.eos,
            softening: self.softening,
            diagnostics: self.diagnostics,
        };
        io::write_json(&side, &meta)?;
        Ok(side)
    }

    pub fn read(sidecar: &Path) -> Result<Self> {
        let meta: SnapshotSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar)?)?;
        let flat = io::read_f64_le(&sidecar.with_file_name(&meta.data))?;
        if flat.len() != 10 * meta.n {
            return Err(Error::Schema(format!("snapshot holds {} floats, expected {}", flat.len(), 10 * meta.n)));
        }
        let row = |i: usize| &flat[10 * i..10 * i + 10];
        Ok(Self {
            t: meta.t,
            positions: (0..meta.n).map(|i| [row(i)[0], row(i)[1], row(i)[2]]).collect(),
            velocities: (0..meta.n).map(|i| [row(i)[3], row(i)[4], row(i)[5]]).collect(),
            masses: (0..meta.n).map(|i| row(i)[6]).collect(),
            smoothing: (0..meta.n).map(|i| row(i)[7]).collect(),
            density: (0..meta.n).map(|i| row(i)[8]).collect(),
            pressure: (0..meta.n).map(|i| row(i)[9]).collect(),
            eos: meta.eos,
            softening: meta.softening,
            diagnostics: meta.diagnostics,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotSidecar {
    t: f64,
    n: usize,
    columns: Vec<String>,
    data: String,
    eos: Eos,
    softening: f64,
    diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Every `snapshot_every` steps, plus the first and the last state.
    pub snapshots: Vec<Snapshot>,
    /// After every step, starting at t = 0.
    pub diagnostics: Vec<Diagnostics>,
}

/// Integrates the configured cloud over `[0, horizon]`.
pub fn run(config: &SphConfig) -> Result<RunOutput> {
    let cloud = config.initial.build(config.eos, config.eta, config.softening, config.seed)?;
    run_cloud(cloud, config)
}

/// Like [`run`] but from an explicit cloud. A negative fixed step with a
/// negative horizon integrates backwards.
pub fn run_cloud(cloud: ParticleCloud, config: &SphConfig) -> Result<RunOutput> {
    let mut lf = Leapfrog::new(cloud, config.courant)?;
    let horizon = config.horizon;
    let every = config.snapshot_every.max(1);
    let mut snapshots = vec![Snapshot::capture(&lf.cloud, &lf.rho, 0.0)];
    let mut diagnostics = vec![lf.diagnostics()];
    let dir = horizon.signum();
    let mut k = 0usize;
    let done = |t: f64| (horizon - t) * dir <= 1e-12 * horizon.abs();
    while !done(lf.t) {
        let dt = match config.dt {
            DtPolicy::Fixed { dt } => {
                if dt == 0.0 || dt.signum() != dir {
                    return Err(Error::Degenerate(format!("step {dt} does not advance towards horizon {horizon}")));
                }
                dt
            }
            DtPolicy::Courant { courant } => dir * courant / lf.courant * lf.cfl_limit(),
        };
        let remaining = horizon - lf.t;
        let dt = if dt.abs() >= remaining.abs() * (1.0 - 1e-9) { remaining } else { dt };
        lf.step(dt)?;
        k += 1;
        if done(lf.t) {
            lf.t = horizon;
        }
        diagnostics.push(lf.diagnostics());
        if k.is_multiple_of(every) || done(lf.t) {
            snapshots.push(Snapshot::capture(&lf.cloud, &lf.rho, lf.t));
        }
    }
    Ok(RunOutput { snapshots, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_has_requested_size_and_radius() {
        let (p, s) = ball_lattice(500, 2.0, 0.0, 1);
        assert_eq!(p.len(), 500);
        let r = p.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!((r - 2.0).abs() < 1e-12);
        assert!(s > 0.0);
    }

    #[test]
    fn taper_remap_preserves_mass_fractions() {
        let r = taper_radius(0.5, 1.0, 2.0);
        assert!((beta_reg(1.5, 3.0, r * r) - 0.125).abs() < 1e-12);
        assert!((taper_radius(1.0, 1.0, 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snapshot_round_trip() {
        let ic = InitialCondition::UniformBall { n: 30, radius: 1.0, mass: 1.0, hubble: 1.0, omega: [0.0; 3], jitter: 0.1 };
        let cloud = ic.build(Eos { k: 0.1, gamma: 5.0 / 3.0 }, 1.2, None, 3).unwrap();
        let rho = super::super::sph::sph_density(&cloud);
        let snap = Snapshot::capture(&cloud, &rho, 0.25);
        let dir = tempfile::tempdir().unwrap();
        let side = snap.write(&dir.path().join("snap")).unwrap();
        assert_eq!(Snapshot::read(&side).unwrap(), snap);
    }
}
