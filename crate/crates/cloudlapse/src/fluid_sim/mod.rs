//! Desk-scale SPH solver for isentropic self-gravitating gas with vacuum.
//!
//! Density by kernel summation with the symmetric smoothing
//! `½(hᵢ + hⱼ)`, symmetrized pressure forces, direct-sum Plummer-softened
//! gravity, kick-drift-kick time stepping. Smoothing lengths are fixed per
//! particle, which keeps the scheme Hamiltonian: momentum is conserved to
//! roundoff and energy to the integrator's accuracy. Forces are reduced in
//! a fixed order, so results do not depend on the thread count.

mod analysis;
pub mod kernel;
mod run;
mod sph;

pub use analysis::{
    adaptive_density, boundary_shell, density_extremum_detector, diffuse_boundary_residual, relative_density, DensityEvent,
    DetectorSpec, EventKind,
};
pub use run::{ball_lattice, run, run_cloud, DtPolicy, InitialCondition, RunOutput, Snapshot, SphConfig};
pub(crate) use sph::densities;
pub use sph::{
    accelerations, cfl_limit, cloud_diagnostics, potential_energy, sph_density, step_leapfrog, Leapfrog, ParticleCloud,
    COURANT,
};
