//! Exact generator matrices on enumerated small state spaces, resolvent and
//! variational identities, the duality basis and `H₋₁` norms.

pub mod duality;
pub mod linalg;
pub mod operators;
pub mod state_space;

pub use duality::{verify_duality_reconstruction, Coeffs, DualityBasis, DualityParts};
pub use linalg::Csr;
pub use operators::{
    build_operators, h_norms, resolvent_form, sigma2_block_exponential, sigma2_quadrature,
    sigma2_spectral, verify_variational_identity, OperatorSet, ResolventValues, VariationalReport,
};
pub use state_space::{Ensemble, StateSpace, DEFAULT_STATE_CAP};
