use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel;
use super::run::Snapshot;
use crate::admissible::BoundaryDatum;
use crate::{Error, Result, Vec3};

/// Indices of the particles whose radius lies in the top `fraction` of
/// radii (at least one particle).
fn shell_indices(snap: &Snapshot, fraction: f64) -> Result<Vec<usize>> {
    if snap.len() < 10 {
        return Err(Error::Degenerate(format!("shell extraction needs ≥ 10 particles, got {}", snap.len())));
    }
    if !(fraction > 0.0) {
        return Err(Error::EmptyShell);
    }
    let mut idx: Vec<usize> = (0..snap.len()).collect();
    let r = |i: usize| Vec3::from(snap.positions[i]).norm();
    idx.sort_by(|&a, &b| r(b).partial_cmp(&r(a)).unwrap().then(a.cmp(&b)));
    let count = ((fraction.min(1.0) * snap.len() as f64).ceil() as usize).max(1);
    idx.truncate(count);
    idx.sort_unstable();
    Ok(idx)
}

/// Boundary data `(ξ, z₀, X₀)` of the outermost particles.
pub fn boundary_shell(snap: &Snapshot, shell_fraction: f64) -> Result<Vec<BoundaryDatum>> {
    shell_indices(snap, shell_fraction)?
        .into_iter()
        .map(|i| BoundaryDatum::from_velocity(Vec3::from(snap.positions[i]), Vec3::from(snap.velocities[i])))
        .collect()
}

/// Largest `(Kγ/(γ−1))|∇ρ^{γ−1}|` over the shell, with the SPH difference
/// gradient `∇fᵢ = Σⱼ (mⱼ/ρⱼ)(fⱼ − fᵢ)∇ᵢWᵢⱼ`.
pub fn diffuse_boundary_residual(snap: &Snapshot, shell_fraction: f64) -> Result<f64> {
    let eos = snap.eos;
    if !(eos.gamma > 1.0) {
        return Err(Error::Degenerate(format!("γ = {} must exceed 1", eos.gamma)));
    }
    let shell = shell_indices(snap, shell_fraction)?;
    if eos.k == 0.0 {
        return Ok(0.0);
    }
    let pos: Vec<Vec3> = snap.positions.iter().map(|x| Vec3::from(*x)).collect();
    let f: Vec<f64> = snap.density.iter().map(|r| r.powf(eos.gamma - 1.0)).collect();
    let h = &snap.smoothing;
    let coef = eos.k * eos.gamma / (eos.gamma - 1.0);
    let vals: Vec<f64> = shell
        .par_iter()
        .map(|&i| {
            let mut g = Vec3::zeros();
            for j in 0..pos.len() {
                if i == j || snap.density[j] <= 0.0 {
                    continue;
                }
                let d = pos[i] - pos[j];
                let r = d.norm();
                if r == 0.0 {
                    continue;
                }
                let dw = kernel::dw(r, 0.5 * (h[i] + h[j]));
                g += d * (snap.masses[j] / snap.density[j] * (f[j] - f[i]) * dw / r);
            }
            coef * g.norm()
        })
        .collect();
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Kernel density with per-particle smoothing chosen so that the `k`-th
/// nearest neighbour sits at `2h`; independent of the smoothing lengths the
/// dynamics used.
pub fn adaptive_density(positions: &[[f64; 3]], masses: &[f64], k: usize) -> Vec<f64> {
    let pos: Vec<Vec3> = positions.iter().map(|x| Vec3::from(*x)).collect();
    let k = k.min(pos.len() - 1).max(1);
    let h: Vec<f64> = (0..pos.len())
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = pos.iter().map(|y| (pos[i] - y).norm()).collect();
            let (_, kth, _) = d.select_nth_unstable_by(k, |a, b| a.partial_cmp(b).unwrap());
            0.5 * kth.max(1e-300)
        })
        .collect();
    super::sph::densities(&pos, masses, &h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Accretion,
    Fragmentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEvent {
    pub parcel: usize,
    pub t: f64,
    pub kind: EventKind,
    /// `ϱ` at the event.
    pub relative_density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Accretion fires when `ϱ` rises through `1/δ`.
    pub delta: f64,
    /// Fragmentation fires when `ϱ` falls through this floor.
    pub floor: f64,
    /// Neighbour count for the adaptive density.
    #[serde(default = "default_neighbours")]
    pub neighbours: usize,
}

fn default_neighbours() -> usize {
    32
}

/// `ϱᵢ = ρᵢ/ρ̄` with `ρ̄ = M/((4/3)π max|x|³)`.
pub fn relative_density(snap: &Snapshot, neighbours: usize) -> Vec<f64> {
    let rho = adaptive_density(&snap.positions, &snap.masses, neighbours);
    let m: f64 = snap.masses.iter().sum();
    let r = snap.positions.iter().map(|x| Vec3::from(*x).norm()).fold(0.0, f64::max);
    let mean = m / (4.0 / 3.0 * std::f64::consts::PI * r * r * r);
    rho.into_iter().map(|x| x / mean).collect()
}

/// Upward crossings of `1/δ` and downward crossings of the floor between
/// consecutive snapshots, in time order then parcel order.
pub fn density_extremum_detector(series: &[Snapshot], spec: &DetectorSpec) -> Result<Vec<DensityEvent>> {
    if series.len() < 3 {
        return Err(Error::InsufficientSamples(format!("detector needs ≥ 3 snapshots, got {}", series.len())));
    }
    if !(spec.delta > 0.0 && spec.delta < 1.0) {
        return Err(Error::InvalidDelta(spec.delta));
    }
    let n = series[0].len();
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::Degenerate("snapshots differ in particle count".into()));
    }
    let rel: Vec<Vec<f64>> = series.iter().map(|s| relative_density(s, spec.neighbours)).collect();
    let high = 1.0 / spec.delta;
    let mut events = Vec::new();
    for k in 1..series.len() {
        for i in 0..n {
            let (a, b) = (rel[k - 1][i], rel[k][i]);
            if a < high && b >= high {
                events.push(DensityEvent { parcel: i, t: series[k].t, kind: EventKind::Accretion, relative_density: b });
            }
            if a > spec.floor && b <= spec.floor {
                events.push(DensityEvent { parcel: i, t: series[k].t, kind: EventKind::Fragmentation, relative_density: b });
            }
        }
    }
    Ok(events)
}
