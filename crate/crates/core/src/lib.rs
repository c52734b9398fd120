//! Free molecular (Knudsen) gas in a smooth bounded domain of the plane or
//! space, with Maxwell diffuse/specular wall interaction.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: implicit domains, exit times `σ(x, v)`, hit points and normals.
//! * [`wall`]: the Maxwell boundary kernel (wall Maxwellian, diffuse sampler,
//!   specular map and their mixture).
//! * [`transport`]: event-driven particle ensembles for the reflecting problem,
//!   exact survival for the absorbing problem, checkpoints.
//! * [`weights`]: the bracket `⟨x, v⟩` and the Lyapunov weight family, weighted
//!   norm estimation and the constants of the integrated Lyapunov inequality.
//! * [`analysis`]: L¹ distances, decay fits, and the verification audits.
//!
//! Supporting numerics live in [`quadrature`], [`stats`], [`rng`] and [`oracle`].

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod transport;
pub mod wall;
pub mod weights;

pub use error::{Error, Result};
pub use geometry::{Domain, DomainKind, PhaseState};
pub use transport::{Ensemble, InitialData, Particle};
pub use wall::{Field, WallModel};
pub use weights::{WeightContext, WeightSpec};

/// Position and velocity vectors. Planar domains keep the third component at zero.
pub type Vector = nalgebra::Vector3<f64>;

/// Crate version, echoed into reports and checkpoints.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
