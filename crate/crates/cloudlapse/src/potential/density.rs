use std::borrow::Cow;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::fluid_sim::kernel;
use crate::{Error, Result, Vec3};

/// Spherical blob `ρ = ρ₀ (1 − |x−c|²/R²)^p` on `|x − c| < R`; `p = 0` is a
/// uniform ball with a sharp edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Core {
    pub center: [f64; 3],
    pub radius: f64,
    pub peak_density: f64,
    #[serde(default)]
    pub exponent: f64,
}

impl Core {
    pub fn center(&self) -> Vec3 {
        Vec3::from(self.center)
    }

    #[inline]
    pub fn value(&self, x: &Vec3) -> f64 {
        let d2 = (x - self.center()).norm_squared();
        let r2 = self.radius * self.radius;
        if d2 >= r2 {
            return 0.0;
        }
        if self.exponent == 0.0 {
            self.peak_density
        } else {
            self.peak_density * (1.0 - d2 / r2).powf(self.exponent)
        }
    }

    /// Density at a point known to lie on a chord of the core, so that
    /// rounding near tangency cannot push it outside.
    #[inline]
    pub(crate) fn chord_value(&self, x: &Vec3) -> f64 {
        if self.exponent == 0.0 {
            return self.peak_density;
        }
        let s = 1.0 - (x - self.center()).norm_squared() / (self.radius * self.radius);
        self.peak_density * s.max(0.0).powf(self.exponent)
    }

    pub fn mass(&self) -> f64 {
        // ∫₀¹ s²(1−s²)^p ds = B(3/2, p+1)/2
        2.0 * PI * self.peak_density * self.radius.powi(3) * beta(1.5, self.exponent + 1.0)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.center.iter().all(|c| c.is_finite())
            && self.radius > 0.0
            && self.radius.is_finite()
            && self.peak_density >= 0.0
            && self.peak_density.is_finite()
            && self.exponent >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDensity(format!("bad core {self:?}")))
        }
    }
}

/// Particles carrying mass, smoothed by the cubic spline for pointwise density
/// and treated as (optionally softened) point masses for fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleDensity {
    pub positions: Vec<[f64; 3]>,
    pub masses: Vec<f64>,
    pub smoothing: Vec<f64>,
    #[serde(default)]
    pub softening: f64,
}

/// Nodal values on a regular grid, trilinear in between, zero outside the box.
/// Node `(i, j, k)` sits at `origin + (i, j, k) ∘ spacing` and is stored at
/// `(i · ny + j) · nz + k` (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    /// Sidecar JSON of a binary grid, used when `values` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridSidecar {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    data: PathBuf,
}

impl GridDensity {
    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn upper(&self) -> Vec3 {
        Vec3::from_fn(|a, _| self.origin[a] + (self.dims[a] - 1) as f64 * self.spacing[a])
    }

    pub fn lower(&self) -> Vec3 {
        Vec3::from(self.origin)
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        let mut idx = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let s = (x[a] - self.origin[a]) / self.spacing[a];
            let n = self.dims[a] - 1;
            if !(0.0..=n as f64).contains(&s) {
                return 0.0;
            }
            let i = (s.floor() as usize).min(n - 1);
            idx[a] = i;
            frac[a] = s - i as f64;
        }
        let mut v = 0.0;
        for corner in 0..8 {
            let o = [corner >> 2 & 1, corner >> 1 & 1, corner & 1];
            let w: f64 = (0..3).map(|a| if o[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
            if w != 0.0 {
                v += w * self.values[self.index(idx[0] + o[0], idx[1] + o[1], idx[2] + o[2])];
            }
        }
        v
    }

    /// Exact integral of the trilinear interpolant (trapezoid weights).
    pub fn mass(&self) -> f64 {
        let cell: f64 = self.spacing.iter().product();
        let [nx, ny, nz] = self.dims;
        let edge = |i: usize, n: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let mut m = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    m += edge(i, nx) * edge(j, ny) * edge(k, nz) * self.values[self.index(i, j, k)];
                }
            }
        }
        m * cell
    }

    /// Read a grid from its JSON sidecar and little-endian f64 payload.
    pub fn read(sidecar: &Path) -> Result<Self> {
        let meta: GridSidecar = serde_json::from_reader(std::fs::File::open(sidecar)?)?;
        let data = sidecar.parent().unwrap_or(Path::new(".")).join(&meta.data);
        let values = crate::io::read_f64_le(&data)?;
        let grid = Self { dims: meta.dims, spacing: meta.spacing, origin: meta.origin, values, sidecar: None };
        grid.validate()?;
        Ok(grid)
    }

    /// Write `<stem>.json` and `<stem>.bin`.
    pub fn write(&self, stem: &Path) -> Result<PathBuf> {
        let bin = stem.with_extension("bin");
        let json = stem.with_extension("json");
        crate::io::write_f64_le(&bin, &self.values)?;
        let meta = GridSidecar {
            dims: self.dims,
            spacing: self.spacing,
            origin: self.origin,
            data: PathBuf::from(bin.file_name().unwrap()),
        };
        std::fs::write(&json, serde_json::to_string_pretty(&meta)?)?;
        Ok(json)
    }

    fn validate(&self) -> Result<()> {
        let n: usize = self.dims.iter().product();
        if self.dims.iter().any(|&d| d < 2) || self.spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidDensity("grid needs ≥ 2 nodes and positive spacing per axis".into()));
        }
        if self.values.len() != n {
            return Err(Error::InvalidDensity(format!("grid has {} values, dims need {n}", self.values.len())));
        }
        if self.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidDensity("grid values must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// A compactly supported, nonnegative mass density (static in time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensityModel {
    UniformBall {
        #[serde(default)]
        center: [f64; 3],
        radius: f64,
        density: f64,
    },
    TaperedProfile {
        #[serde(default)]
        center: [f64; 3],
        radius: f64,
        peak_density: f64,
        exponent: f64,
    },
    MultiCoreBlob { cores: Vec<Core> },
    ParticleCloud(ParticleDensity),
    GridSnapshot(GridDensity),
}

impl DensityModel {
    pub fn uniform_ball(radius: f64, density: f64) -> Self {
        Self::UniformBall { center: [0.0; 3], radius, density }
    }

    /// Load a JSON description; grid sidecars are resolved relative to `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut model: Self = serde_json::from_str(text)?;
        model.resolve(base)?;
        Ok(model)
    }

    /// Pull binary grid data referenced by a sidecar and check invariants.
    pub fn resolve(&mut self, base: &Path) -> Result<()> {
        if let Self::GridSnapshot(g) = self {
            if g.values.is_empty() {
                let side = g.sidecar.clone().ok_or_else(|| Error::InvalidDensity("grid without values or sidecar".into()))?;
                *g = GridDensity::read(&base.join(side))?;
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ParticleCloud(p) => {
                let n = p.positions.len();
                if n == 0 || p.masses.len() != n || p.smoothing.len() != n {
                    return Err(Error::InvalidDensity("particle arrays must be non-empty and equally long".into()));
                }
                if p.masses.iter().any(|m| !(*m >= 0.0)) || p.smoothing.iter().any(|h| !(*h > 0.0)) || !(p.softening >= 0.0)
                {
                    return Err(Error::InvalidDensity("particle masses ≥ 0 and smoothing > 0 required".into()));
                }
                Ok(())
            }
            Self::GridSnapshot(g) => g.validate(),
            _ => {
                let cores = self.cores().unwrap();
                if cores.is_empty() {
                    return Err(Error::InvalidDensity("no cores".into()));
                }
                cores.iter().try_for_each(Core::validate)
            }
        }
    }

    /// Analytic kinds as a list of spherical cores.
    pub fn cores(&self) -> Option<Cow<'_, [Core]>> {
        match self {
            Self::UniformBall { center, radius, density } => Some(Cow::Owned(vec![Core {
                center: *center,
                radius: *radius,
                peak_density: *density,
                exponent: 0.0,
            }])),
            Self::TaperedProfile { center, radius, peak_density, exponent } => Some(Cow::Owned(vec![Core {
                center: *center,
                radius: *radius,
                peak_density: *peak_density,
                exponent: *exponent,
            }])),
            Self::MultiCoreBlob { cores } => Some(Cow::Borrowed(cores)),
            _ => None,
        }
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        match self {
            Self::ParticleCloud(p) => p
                .positions
                .iter()
                .zip(&p.masses)
                .zip(&p.smoothing)
                .map(|((y, m), h)| m * kernel::w((x - Vec3::from(*y)).norm(), *h))
                .sum(),
            Self::GridSnapshot(g) => g.value(x),
            _ => self.cores().unwrap().iter().map(|c| c.value(x)).sum(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Self::ParticleCloud(p) => p.masses.iter().sum(),
            Self::GridSnapshot(g) => g.mass(),
            _ => self.cores().unwrap().iter().map(Core::mass).sum(),
        }
    }

    /// Radius about the origin outside which ρ vanishes.
    pub fn support_radius(&self) -> f64 {
        match self {
            Self::ParticleCloud(p) => p
                .positions
                .iter()
                .zip(&p.smoothing)
                .map(|(y, h)| Vec3::from(*y).norm() + 2.0 * h)
                .fold(0.0, f64::max),
            Self::GridSnapshot(g) => {
                let (lo, hi) = (g.lower(), g.upper());
                (0..8)
                    .map(|c| Vec3::new(
                        if c & 4 != 0 { hi.x } else { lo.x },
                        if c & 2 != 0 { hi.y } else { lo.y },
                        if c & 1 != 0 { hi.z } else { lo.z },
                    ).norm())
                    .fold(0.0, f64::max)
            }
            _ => self.cores().unwrap().iter().map(|c| c.center().norm() + c.radius).fold(0.0, f64::max),
        }
    }

    /// Largest density value (attained at a core centre, particle or node).
    pub fn peak_density(&self) -> f64 {
        match self {
            Self::ParticleCloud(p) => p.positions.iter().map(|y| self.value(&Vec3::from(*y))).fold(0.0, f64::max),
            Self::GridSnapshot(g) => g.values.iter().copied().fold(0.0, f64::max),
            _ => self.cores().unwrap().iter().map(|c| self.value(&c.center())).fold(0.0, f64::max),
        }
    }

    /// Same model with every density value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::UniformBall { density, .. } => *density *= c,
            Self::TaperedProfile { peak_density, .. } => *peak_density *= c,
            Self::MultiCoreBlob { cores } => cores.iter_mut().for_each(|k| k.peak_density *= c),
            Self::ParticleCloud(p) => p.masses.iter_mut().for_each(|m| *m *= c),
            Self::GridSnapshot(g) => g.values.iter_mut().for_each(|v| *v *= c),
        }
        out
    }

    /// Same model rigidly translated by `d`.
    pub fn translated(&self, d: &Vec3) -> Self {
        let shift = |c: &mut [f64; 3]| (0..3).for_each(|a| c[a] += d[a]);
        let mut out = self.clone();
        match &mut out {
            Self::UniformBall { center, .. } | Self::TaperedProfile { center, .. } => shift(center),
            Self::MultiCoreBlob { cores } => cores.iter_mut().for_each(|k| shift(&mut k.center)),
            Self::ParticleCloud(p) => p.positions.iter_mut().for_each(shift),
            Self::GridSnapshot(g) => shift(&mut g.origin),
        }
        out
    }
}
