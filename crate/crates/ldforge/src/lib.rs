//! Numerical library for rotationally invariant linearized-doubling (RLD/LD)
//! solutions on cylinder-type backgrounds, flat-torus spectral LD solutions,
//! and glued "initial surface" doublings exported as triangle meshes.
//!
//! The core objects are
//!
//! - [`background::Background`]: a potential `V(s)` and conformal factor
//!   `omega(s)` on a cylinder interval, plus an ambient embedding chart;
//! - [`rld::RldSolution`]: a positive piecewise-smooth solution of
//!   `phi'' + V phi = 0` with concave derivative jumps at prescribed
//!   latitudes, built by flux-matched shooting;
//! - [`ld::LdSolution`]: a singular solution with logarithmic singularities
//!   on lattices of points, synthesized circle-by-circle from Fourier modes;
//! - [`clifford`]: the analogous machinery on the flat square torus, solved
//!   spectrally;
//! - [`mesh::SurfaceMesh`] and [`initial`]: doubled initial surfaces with
//!   catenoidal bridges and discrete-curvature diagnostics.

pub mod background;
pub mod bridge;
pub mod chart;
pub mod cli;
pub mod clifford;
pub mod cutoff;
pub mod curvature;
pub mod greens;
pub mod initial;
pub mod jsonw;
pub mod ld;
pub mod mesh;
pub mod modes;
pub mod ode;
pub mod rld;
pub mod root;
pub mod verify;

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("numerical nonconvergence: {0}")]
    NonConvergence(String),
    #[error("domain exit: {0}")]
    DomainExit(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Default integration tolerance; overridable via the `LDFORGE_TOL` env var.
pub fn default_tol() -> f64 {
    match std::env::var("LDFORGE_TOL") {
        Ok(v) => v.parse().unwrap_or(1e-10),
        Err(_) => 1e-10,
    }
}
