//! Simulation and numerical verification toolkit for the two-dimensional
//! asymmetric simple exclusion process in equilibrium.
//!
//! The crate is organised around five areas:
//!
//! * [`model`]: jump kernels, torus geometry, configurations and Bernoulli
//!   equilibrium sampling.
//! * [`dynamics`]: exact-law continuous-time simulation of the exclusion
//!   process and of the basic coupling carrying a second-class particle.
//! * [`observables`]: occupation-time variance, second-class return
//!   probabilities, Laplace transforms and scaling fits.
//! * [`exact`]: generator matrices on small state spaces, resolvent and
//!   variational identities, the duality basis and H-norms.
//! * [`fourier`]: Fourier symbols, the partially integrated kernels `F¹`, `F²`
//!   and the variational lower-bound curves with their divergence fits.

pub mod campaign;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod fit;
pub mod fourier;
pub mod io;
pub mod model;
pub mod observables;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
pub use model::{JumpKernel, Rate, TorusGeometry, Vec2};
