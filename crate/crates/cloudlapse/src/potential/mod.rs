//! Newtonian fields of compactly supported densities.

mod bounds;
mod density;
mod field;
pub(crate) mod grid;
mod regularity;

pub use bounds::{check_gravity_bound, check_tidal_bound, gravity_bound_g1, tidal_bound_g0, BoundCheck, BoundWitness};
pub use density::{Core, DensityModel, GridDensity, ParticleDensity};
pub use field::{
    eval_field, eval_gravity, eval_potential, eval_tidal, gravity_detailed, potential_detailed, tidal_detailed, Evaluated,
    FieldSample,
};
pub use regularity::{
    boundary_points, classify_regularity, regularity_constant, RegularityReport, RegularityWitness, SamplerSpec, Verdict,
};

pub(crate) use regularity::fibonacci_sphere;

use crate::{Error, Result};

/// `∫_{B(0,R)} |y|^{−k} dy = 4π R^{3−k}/(3−k)` for `k < 3`.
pub fn ball_kernel_integral(k: f64, radius: f64) -> Result<f64> {
    if !(k < 3.0) {
        return Err(Error::InvalidExponent(k));
    }
    if !(radius > 0.0) {
        return Err(Error::Degenerate(format!("radius must be positive, got {radius}")));
    }
    Ok(crate::FOUR_PI * radius.powf(3.0 - k) / (3.0 - k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kernel_integral_values() {
        assert!((ball_kernel_integral(2.0, 1.0).unwrap() - 4.0 * PI).abs() < 1e-14);
        assert!((ball_kernel_integral(0.0, 1.0).unwrap() - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((ball_kernel_integral(1.0, 2.0).unwrap() - 8.0 * PI).abs() < 1e-13);
        assert_eq!(ball_kernel_integral(3.0, 1.0), Err(Error::InvalidExponent(3.0)));
    }
}
