//! Mass, energy, centre of mass, moment of inertia and virial of a cloud,
//! plus the integral identities `∫ρ∇Φ = 0` and `∫ρ x·∇Φ = −½∫ρΦ`.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::fluid_sim;
use crate::potential::{eval_gravity, eval_potential, grid, DensityModel, GridDensity, ParticleDensity};
use crate::quadrature::{adaptive, adaptive_levels, ray_integrate, sphere_crossings, Integral, QuadratureSpec, RayFrame};
use crate::{Error, Result, Vec3, FOUR_PI};

/// Polytropic equation of state `p = K ρ^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eos {
    pub k: f64,
    pub gamma: f64,
}

impl Eos {
    pub fn pressure(&self, rho: f64) -> f64 {
        self.k * rho.powf(self.gamma)
    }

    /// Internal energy per unit mass `K ρ^{γ−1}/(γ−1)`.
    pub fn specific_internal(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            0.0
        } else {
            self.k * rho.powf(self.gamma - 1.0) / (self.gamma - 1.0)
        }
    }
}

/// Velocity field on the support.
pub trait VelocityField: Sync {
    fn at(&self, x: &Vec3) -> Vec3;
}

impl<F: Fn(&Vec3) -> Vec3 + Sync> VelocityField for F {
    fn at(&self, x: &Vec3) -> Vec3 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub internal: f64,
    /// Gravitational part `½∫ρΦ`.
    pub gravitational: f64,
    pub x_c: [f64; 3],
    pub v_c: [f64; 3],
    /// Moment of inertia `½∫ρ|x|²`.
    pub h: f64,
    /// Virial `∫ρ w·x`.
    pub h_prime: f64,
}

impl Diagnostics {
    pub const CSV_HEADER: [&'static str; 11] = ["t", "M", "E", "xc1", "xc2", "xc3", "vc1", "vc2", "vc3", "H", "Hprime"];

    pub fn csv_row(&self) -> [f64; 11] {
        let [a, b, c] = self.x_c;
        let [u, v, w] = self.v_c;
        [self.t, self.mass, self.energy, a, b, c, u, v, w, self.h, self.h_prime]
    }

    /// Mass must be positive for the derived quantities to mean anything.
    pub fn is_valid(&self) -> bool {
        self.mass > 0.0 && self.h >= 0.0
    }
}

/// `∫ ρ_part(x) f(x) d³x` summed over the parts of the density.
///
/// Cores are integrated in rays from their own centres; `f` receives the
/// point, the part's density and the total density there.
pub(crate) fn moment_integral<const K: usize, F>(density: &DensityModel, quad: &QuadratureSpec, f: F) -> Result<[f64; K]>
where
    F: Fn(&Vec3, f64, f64) -> Result<[f64; K]> + Sync,
{
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let guarded = |x: &Vec3, part: f64, total: f64| -> [f64; K] {
        if part == 0.0 {
            return [0.0; K];
        }
        match f(x, part, total) {
            Ok(v) => v,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                [0.0; K]
            }
        }
    };
    let out = match density {
        DensityModel::ParticleCloud(_) => {
            return Err(Error::Degenerate("particle clouds are summed, not integrated".into()));
        }
        DensityModel::GridSnapshot(g) => grid_moment(g, quad, &guarded)?,
        _ => {
            let cores = density.cores().unwrap();
            let mut total = Integral::<K>::zero();
            for core in cores.iter().filter(|c| c.peak_density > 0.0) {
                let c = core.center();
                let frame = RayFrame::new(c, None);
                let part = adaptive(quad, |res| {
                    ray_integrate(&frame, &[], res, |om, br| {
                        br.push(0.0);
                        for other in cores.iter() {
                            if let Some((a, b)) = sphere_crossings(&c, om, &other.center(), other.radius) {
                                br.push(a.min(core.radius));
                                br.push(b.min(core.radius));
                            }
                        }
                        br.push(core.radius);
                        br.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        br.dedup();
                    }, |r, om| {
                        let x = c + om * r;
                        guarded(&x, core.value(&x), density.value(&x)).map(|v| v * r * r)
                    })
                })?;
                total.add(&part);
            }
            total
        }
    };
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(out.value)
}

fn grid_moment<const K: usize>(
    g: &GridDensity,
    quad: &QuadratureSpec,
    f: &(impl Fn(&Vec3, f64, f64) -> [f64; K] + Sync),
) -> Result<Integral<K>> {
    adaptive_levels(quad, grid::LEVELS.len(), |level| {
        grid::integrate(g, None, level, |y| {
            let rho = g.value(y);
            f(y, rho, rho)
        })
    })
}

/// Pairwise sums over a particle cloud excluding self-interaction:
/// returns per-particle `(Φᵢ, ∇Φᵢ)` with Plummer softening.
fn particle_fields(p: &ParticleDensity) -> Vec<(f64, Vec3)> {
    use rayon::prelude::*;
    let e2 = p.softening * p.softening;
    let pos: Vec<Vec3> = p.positions.iter().map(|y| Vec3::from(*y)).collect();
    (0..pos.len())
        .into_par_iter()
        .map(|i| {
            let mut phi = 0.0;
            let mut g = Vec3::zeros();
            for j in 0..pos.len() {
                if i == j {
                    continue;
                }
                let d = pos[i] - pos[j];
                let s2 = d.norm_squared() + e2;
                let s = s2.sqrt();
                phi -= p.masses[j] / s;
                g += d * (p.masses[j] / (s2 * s));
            }
            (phi / FOUR_PI, g / FOUR_PI)
        })
        .collect()
}

/// M, E (kinetic + internal + ½∫ρΦ), x_c, v_c, H and H′ of a density with a
/// given velocity field.
pub fn compute_diagnostics(
    density: &DensityModel,
    velocity: &dyn VelocityField,
    eos: &Eos,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<Diagnostics> {
    if !(eos.gamma > 1.0) || !(eos.k >= 0.0) {
        return Err(Error::Degenerate(format!("equation of state needs γ > 1 and K ≥ 0, got {eos:?}")));
    }
    if let DensityModel::ParticleCloud(p) = density {
        let fields = particle_fields(p);
        let pos: Vec<Vec3> = p.positions.iter().map(|y| Vec3::from(*y)).collect();
        let rho = fluid_sim::densities(&pos, &p.masses, &p.smoothing);
        let mut acc = [0.0; 12];
        for (i, x) in pos.iter().enumerate() {
            let w = velocity.at(x);
            let row = diag_row(x, &w, p.masses[i], eos.specific_internal(rho[i]), fields[i].0);
            for k in 0..12 {
                acc[k] += row[k];
            }
        }
        return Ok(assemble(t, &acc));
    }
    let acc = moment_integral::<12, _>(density, quad, |x, part, total| {
        let phi = eval_potential(density, t, x, quad)?;
        let w = velocity.at(x);
        Ok(diag_row(x, &w, part, eos.specific_internal(total), phi))
    })?;
    Ok(assemble(t, &acc))
}

fn diag_row(x: &Vec3, w: &Vec3, m: f64, e_int: f64, phi: f64) -> [f64; 12] {
    [
        m,
        m * x.x,
        m * x.y,
        m * x.z,
        m * w.x,
        m * w.y,
        m * w.z,
        0.5 * m * w.norm_squared(),
        m * e_int,
        0.5 * m * phi,
        0.5 * m * x.norm_squared(),
        m * w.dot(x),
    ]
}

fn assemble(t: f64, a: &[f64; 12]) -> Diagnostics {
    let mass = a[0];
    let inv = if mass > 0.0 { 1.0 / mass } else { 0.0 };
    Diagnostics {
        t,
        mass,
        energy: a[7] + a[8] + a[9],
        kinetic: a[7],
        internal: a[8],
        gravitational: a[9],
        x_c: [a[1] * inv, a[2] * inv, a[3] * inv],
        v_c: [a[4] * inv, a[5] * inv, a[6] * inv],
        h: a[10],
        h_prime: a[11],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceResidual {
    /// `max_k |∫ρ ∂_kΦ|`.
    pub residual: f64,
    /// `∫ρ|∇Φ|`, the size of the cancelling terms.
    pub scale: f64,
}

/// Total self-force, which vanishes for any density.
pub fn check_identity_total_force(density: &DensityModel, t: f64, quad: &QuadratureSpec) -> Result<ForceResidual> {
    let acc = if let DensityModel::ParticleCloud(p) = density {
        let mut acc = [0.0; 4];
        for (m, (_, g)) in p.masses.iter().zip(particle_fields(p)) {
            acc[0] += m * g.x;
            acc[1] += m * g.y;
            acc[2] += m * g.z;
            acc[3] += m * g.norm();
        }
        acc
    } else {
        moment_integral::<4, _>(density, quad, |x, part, _| {
            let g = eval_gravity(density, t, x, quad)?;
            Ok([part * g.x, part * g.y, part * g.z, part * g.norm()])
        })?
    };
    Ok(ForceResidual { residual: acc[0].abs().max(acc[1].abs()).max(acc[2].abs()), scale: acc[3] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialIdentity {
    /// `∫ρ x·∇Φ`.
    pub lhs: f64,
    /// `−½∫ρΦ`.
    pub rhs: f64,
    pub residual: f64,
}

/// Both sides of `∫ρ x·∇Φ = −½∫ρΦ` from independent quadratures.
pub fn check_identity_virial_potential(density: &DensityModel, t: f64, quad: &QuadratureSpec) -> Result<VirialIdentity> {
    let acc = if let DensityModel::ParticleCloud(p) = density {
        let mut acc = [0.0; 2];
        for ((m, y), (phi, g)) in p.masses.iter().zip(&p.positions).zip(particle_fields(p)) {
            acc[0] += m * g.dot(&Vec3::from(*y));
            acc[1] += m * phi;
        }
        acc
    } else {
        let lhs = moment_integral::<1, _>(density, quad, |x, part, _| Ok([part * eval_gravity(density, t, x, quad)?.dot(x)]))?;
        let phi = moment_integral::<1, _>(density, quad, |x, part, _| Ok([part * eval_potential(density, t, x, quad)?]))?;
        [lhs[0], phi[0]]
    };
    let rhs = -0.5 * acc[1];
    if rhs == 0.0 {
        return Err(Error::Degenerate("−½∫ρΦ vanishes (zero density)".into()));
    }
    Ok(VirialIdentity { lhs: acc[0], rhs, residual: (acc[0] - rhs).abs() / rhs.abs() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub mass: f64,
    pub energy: f64,
    pub com_velocity: f64,
}

/// Largest relative departures from the first sample.
///
/// Mass and energy are scaled by their initial magnitude; the centre-of-mass
/// velocity by the initial rms speed `√(2 E_kin/M)` (or 1 for a cloud at rest).
pub fn drift_report(series: &[Diagnostics]) -> Result<DriftReport> {
    if series.len() < 2 {
        return Err(Error::InsufficientSamples(format!("drift needs ≥ 2 samples, got {}", series.len())));
    }
    let d0 = &series[0];
    let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { a.abs() / b.abs() };
    let rms = if d0.mass > 0.0 { (2.0 * d0.kinetic / d0.mass).sqrt() } else { 0.0 };
    let vscale = if rms > 0.0 { rms } else { 1.0 };
    let v0 = Vec3::from(d0.v_c);
    let mut out = DriftReport { mass: 0.0, energy: 0.0, com_velocity: 0.0 };
    for d in &series[1..] {
        out.mass = out.mass.max(rel(d.mass - d0.mass, d0.mass));
        out.energy = out.energy.max(rel(d.energy - d0.energy, d0.energy));
        out.com_velocity = out.com_velocity.max((Vec3::from(d.v_c) - v0).norm() / vscale);
    }
    Ok(out)
}
