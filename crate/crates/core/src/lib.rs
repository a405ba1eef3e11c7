//! Self-similar blowup profiles for the three-dimensional Keller-Segel system
//! with logistic damping `d_t rho = Lap rho - div(rho grad c) - mu rho^2`,
//! together with the weighted linearized operator around the profile and
//! radial solvers in renormalized and physical variables.
//!
//! Numerical kernels are generic over [`Real`]; the aliases at the crate root
//! fix the scalar to `f64`.

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod error;
pub mod heat;
pub mod linops;
pub mod lsq;
pub mod ode;
pub mod params;
pub mod phys;
pub mod portrait;
pub mod profile;
pub mod quadrature;
pub mod renorm;
pub mod scalar;
pub mod series;

pub use error::{Error, HeatError, LinopsError, PhysError, ProfileError, RenormError};
pub use params::{compute_admissibility, similarity_exponent, Admissibility};
pub use scalar::{FieldScalar, Real};
pub use series::{build_series, CoefficientBound};
pub use profile::solve_profile;

pub type ProfileParams = params::ProfileParams<f64>;
pub type PowerSeries = series::PowerSeries<f64>;
pub type RadialProfile = profile::RadialProfile<f64>;
