use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::DensityModel;
use super::field::{eval_gravity, eval_tidal};
use crate::quadrature::QuadratureSpec;
use crate::{Result, Vec3, FOUR_PI};

/// Gravity bound `G₁ = (1/δ² + 3) M/(4π)`.
pub fn gravity_bound_g1(mass: f64, delta: f64) -> f64 {
    (1.0 / (delta * delta) + 3.0) * mass / FOUR_PI
}

/// Tidal bound `G₀ = (M/δ³ + 3M)/(2π)`.
pub fn tidal_bound_g0(mass: f64, delta: f64) -> f64 {
    (mass / delta.powi(3) + 3.0 * mass) / (0.5 * FOUR_PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundWitness {
    pub x: [f64; 3],
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub pass: bool,
    /// Largest value / bound over the samples.
    pub max_ratio: f64,
    pub witness: Option<BoundWitness>,
}

fn summarize(vals: Vec<(Vec3, f64, f64)>) -> BoundCheck {
    let mut max_ratio = 0.0f64;
    let mut witness = None;
    for (x, v, b) in vals {
        max_ratio = max_ratio.max(v / b);
        if witness.is_none() && v > b {
            witness = Some(BoundWitness { x: x.into(), value: v, bound: b });
        }
    }
    BoundCheck { pass: witness.is_none(), max_ratio, witness }
}

/// `|∇Φ(x)| ≤ G₁/|x|²` at every sample (Euclidean norm of the gradient).
pub fn check_gravity_bound(
    density: &DensityModel,
    t: f64,
    samples: &[Vec3],
    g1: f64,
    quad: &QuadratureSpec,
) -> Result<BoundCheck> {
    let vals = samples
        .par_iter()
        .map(|x| Ok((*x, eval_gravity(density, t, x, quad)?.norm(), g1 / x.norm_squared())))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(vals))
}

/// `−G₀/|x|³ ≤ ∇²Φ(x) ≤ G₀/|x|³` as quadratic forms, i.e. all eigenvalues
/// of the Hessian within `±G₀/|x|³`.
pub fn check_tidal_bound(
    density: &DensityModel,
    t: f64,
    samples: &[Vec3],
    g0: f64,
    quad: &QuadratureSpec,
) -> Result<BoundCheck> {
    let vals = samples
        .par_iter()
        .map(|x| {
            let h = eval_tidal(density, t, x, quad)?;
            let spectral = h.symmetric_eigenvalues().iter().fold(0.0f64, |m, e| m.max(e.abs()));
            Ok((*x, spectral, g0 / x.norm().powi(3)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(vals))
}
