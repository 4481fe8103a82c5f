use rayon::prelude::*;

use super::kernel;
use crate::conservation::{Diagnostics, Eos};
use crate::potential::{DensityModel, ParticleDensity};
use crate::{Error, Result, Vec3, FOUR_PI};

/// Particles carrying mass, velocity and a fixed smoothing length.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub masses: Vec<f64>,
    pub smoothing: Vec<f64>,
    pub eos: Eos,
    /// Plummer softening of the gravity sums.
    pub softening: f64,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n < 2 {
            return Err(Error::Degenerate(format!("a cloud needs ≥ 2 particles, got {n}")));
        }
        if self.velocities.len() != n || self.masses.len() != n || self.smoothing.len() != n {
            return Err(Error::Degenerate("per-particle arrays differ in length".into()));
        }
        if self.masses.iter().any(|m| !(*m > 0.0)) || self.smoothing.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::Degenerate("masses and smoothing lengths must be positive".into()));
        }
        if !(self.softening >= 0.0) || !(self.eos.k >= 0.0) || !(self.eos.gamma > 1.0) {
            return Err(Error::Degenerate(format!("need ε ≥ 0, K ≥ 0, γ > 1: ε = {}, {:?}", self.softening, self.eos)));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Shifts to the centre-of-mass frame (position and velocity).
    pub fn recenter(&mut self) {
        let m = self.total_mass();
        let (mut xc, mut vc) = (Vec3::zeros(), Vec3::zeros());
        for i in 0..self.len() {
            xc += self.positions[i] * self.masses[i];
            vc += self.velocities[i] * self.masses[i];
        }
        xc /= m;
        vc /= m;
        for x in &mut self.positions {
            *x -= xc;
        }
        for v in &mut self.velocities {
            *v -= vc;
        }
    }

    pub fn density_model(&self) -> DensityModel {
        DensityModel::ParticleCloud(ParticleDensity {
            positions: self.positions.iter().map(|x| (*x).into()).collect(),
            masses: self.masses.clone(),
            smoothing: self.smoothing.clone(),
            softening: self.softening,
        })
    }

    pub fn max_radius(&self) -> f64 {
        self.positions.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

#[inline]
fn pair_h(h: &[f64], i: usize, j: usize) -> f64 {
    0.5 * (h[i] + h[j])
}

/// `ρᵢ = Σⱼ mⱼ W(|xᵢ − xⱼ|, ½(hᵢ + hⱼ))`, including the self term.
pub(crate) fn densities(pos: &[Vec3], m: &[f64], h: &[f64]) -> Vec<f64> {
    (0..pos.len())
        .into_par_iter()
        .map(|i| {
            let mut rho = 0.0;
            for j in 0..pos.len() {
                rho += m[j] * kernel::w((pos[i] - pos[j]).norm(), pair_h(h, i, j));
            }
            rho
        })
        .collect()
}

pub fn sph_density(cloud: &ParticleCloud) -> Vec<f64> {
    densities(&cloud.positions, &cloud.masses, &cloud.smoothing)
}

/// Symmetrized pressure acceleration plus softened direct-sum gravity,
/// `−Σⱼ mⱼ(Pᵢ/ρᵢ² + Pⱼ/ρⱼ²)∇ᵢWᵢⱼ − Σⱼ mⱼ(xᵢ−xⱼ)/(4π(r²+ε²)^{3/2})`.
pub fn accelerations(cloud: &ParticleCloud, rho: &[f64]) -> Vec<Vec3> {
    let (pos, m, h) = (&cloud.positions, &cloud.masses, &cloud.smoothing);
    let e2 = cloud.softening * cloud.softening;
    let pressure_term: Vec<f64> = rho.iter().map(|&r| if r > 0.0 { cloud.eos.pressure(r) / (r * r) } else { 0.0 }).collect();
    let cold = cloud.eos.k == 0.0;
    (0..pos.len())
        .into_par_iter()
        .map(|i| {
            let mut a = Vec3::zeros();
            for j in 0..pos.len() {
                if i == j {
                    continue;
                }
                let d = pos[i] - pos[j];
                let r2 = d.norm_squared();
                let r = r2.sqrt();
                if !cold && r > 0.0 {
                    let g = kernel::dw(r, pair_h(h, i, j));
                    if g != 0.0 {
                        a -= d * (m[j] * (pressure_term[i] + pressure_term[j]) * g / r);
                    }
                }
                let s2 = r2 + e2;
                if s2 > 0.0 {
                    a -= d * (m[j] / (FOUR_PI * s2 * s2.sqrt()));
                }
            }
            a
        })
        .collect()
}

/// `½Σᵢ mᵢΦᵢ` with the softened pair potential and no self term.
pub fn potential_energy(cloud: &ParticleCloud) -> f64 {
    let (pos, m) = (&cloud.positions, &cloud.masses);
    let e2 = cloud.softening * cloud.softening;
    let per: Vec<f64> = (0..pos.len())
        .into_par_iter()
        .map(|i| {
            let mut phi = 0.0;
            for j in 0..pos.len() {
                if i != j {
                    phi -= m[j] / ((pos[i] - pos[j]).norm_squared() + e2).sqrt();
                }
            }
            0.5 * m[i] * phi / FOUR_PI
        })
        .collect();
    per.iter().sum()
}

/// Diagnostics of the discrete cloud, consistent with its dynamics.
pub fn cloud_diagnostics(cloud: &ParticleCloud, rho: &[f64], t: f64) -> Diagnostics {
    let mut acc = [0.0; 11];
    for i in 0..cloud.len() {
        let (x, w, m) = (cloud.positions[i], cloud.velocities[i], cloud.masses[i]);
        let row = [
            m,
            m * x.x,
            m * x.y,
            m * x.z,
            m * w.x,
            m * w.y,
            m * w.z,
            0.5 * m * w.norm_squared(),
            m * cloud.eos.specific_internal(rho[i]),
            0.5 * m * x.norm_squared(),
            m * w.dot(&x),
        ];
        for k in 0..11 {
            acc[k] += row[k];
        }
    }
    let grav = potential_energy(cloud);
    let mass = acc[0];
    Diagnostics {
        t,
        mass,
        energy: acc[7] + acc[8] + grav,
        kinetic: acc[7],
        internal: acc[8],
        gravitational: grav,
        x_c: [acc[1] / mass, acc[2] / mass, acc[3] / mass],
        v_c: [acc[4] / mass, acc[5] / mass, acc[6] / mass],
        h: acc[9],
        h_prime: acc[10],
    }
}

/// `C·min hᵢ / max(cₛ, |w|)` over particles; infinite for a cold cloud at rest.
pub fn cfl_limit(cloud: &ParticleCloud, rho: &[f64], courant: f64) -> f64 {
    let mut limit = f64::INFINITY;
    for i in 0..cloud.len() {
        let cs = if rho[i] > 0.0 { (cloud.eos.gamma * cloud.eos.pressure(rho[i]) / rho[i]).sqrt() } else { 0.0 };
        let s = cs.max(cloud.velocities[i].norm());
        if s > 0.0 {
            limit = limit.min(courant * cloud.smoothing[i] / s);
        }
    }
    limit
}

/// Default Courant factor.
pub const COURANT: f64 = 0.3;

/// Kick-drift-kick integrator with the end-of-step accelerations cached.
#[derive(Debug, Clone)]
pub struct Leapfrog {
    pub cloud: ParticleCloud,
    pub rho: Vec<f64>,
    pub acc: Vec<Vec3>,
    pub t: f64,
    pub courant: f64,
}

impl Leapfrog {
    pub fn new(cloud: ParticleCloud, courant: f64) -> Result<Self> {
        cloud.validate()?;
        let rho = sph_density(&cloud);
        let acc = accelerations(&cloud, &rho);
        Ok(Self { cloud, rho, acc, t: 0.0, courant })
    }

    pub fn cfl_limit(&self) -> f64 {
        cfl_limit(&self.cloud, &self.rho, self.courant)
    }

    /// One step of signed length `dt`.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let limit = self.cfl_limit();
        if dt.abs() > limit {
            return Err(Error::CflViolation { dt, limit });
        }
        let c = &mut self.cloud;
        for i in 0..c.len() {
            c.velocities[i] += self.acc[i] * (0.5 * dt);
            c.positions[i] += c.velocities[i] * dt;
        }
        self.rho = sph_density(c);
        self.acc = accelerations(c, &self.rho);
        for i in 0..c.len() {
            c.velocities[i] += self.acc[i] * (0.5 * dt);
        }
        self.t += dt;
        Ok(())
    }

    pub fn diagnostics(&self) -> Diagnostics {
        cloud_diagnostics(&self.cloud, &self.rho, self.t)
    }
}

/// One kick-drift-kick step from scratch.
pub fn step_leapfrog(cloud: &ParticleCloud, dt: f64) -> Result<ParticleCloud> {
    let mut lf = Leapfrog::new(cloud.clone(), COURANT)?;
    lf.step(dt)?;
    Ok(lf.cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(d: f64, k: f64) -> ParticleCloud {
        ParticleCloud {
            positions: vec![Vec3::zeros(), Vec3::new(d, 0.0, 0.0)],
            velocities: vec![Vec3::zeros(); 2],
            masses: vec![1.0; 2],
            smoothing: vec![1.0; 2],
            eos: Eos { k, gamma: 5.0 / 3.0 },
            softening: 0.0,
        }
    }

    #[test]
    fn density_examples() {
        let c = pair(0.0, 0.0);
        let rho = sph_density(&c);
        assert!((rho[0] - 2.0 / std::f64::consts::PI).abs() < 1e-15);
        let single = densities(&[Vec3::zeros()], &[1.0], &[1.0]);
        assert!((single[0] - 1.0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn pair_gravity_uses_four_pi() {
        let c = pair(1.0, 0.0);
        let a = accelerations(&c, &sph_density(&c));
        assert!((a[0].x - 1.0 / FOUR_PI).abs() < 1e-15);
        assert_eq!(a[0], -a[1]);
    }

    #[test]
    fn pressure_pushes_apart() {
        let c = pair(0.5, 1.0);
        let cold = pair(0.5, 0.0);
        let a = accelerations(&c, &sph_density(&c));
        let g = accelerations(&cold, &sph_density(&cold));
        assert!(a[0].x < g[0].x);
        assert!((a[0] + a[1]).norm() < 1e-15);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let mut c = pair(1.0, 0.0);
        c.velocities[0] = Vec3::new(1.0, 0.0, 0.0);
        assert!(matches!(step_leapfrog(&c, 1.0), Err(Error::CflViolation { .. })));
        assert!(step_leapfrog(&c, 0.1).is_ok());
    }
}
