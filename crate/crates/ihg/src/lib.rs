//! Incomplete Delta_1 x Delta_1 hypergeometric functions.
//!
//! Evaluates the incomplete kernel integral
//!
//! ```text
//! Phi = integral_a^b t^gamma (x11 + x21 t)^alpha1 (x12 + x22 t)^alpha2 dt
//! ```
//!
//! by double series (four expansions, one per convergence region), by Appell
//! F1 / Gauss 2F1 representations, and by adaptive quadrature, and implements
//! the contiguity relations, connection formulas and monodromy formulas of
//! the associated inhomogeneous GKZ system, each backed by a numerical
//! verification suite.
//!
//! Entry points:
//! - [`quad::phi_integral`]: quadrature ground truth.
//! - [`series::f_series`]: region series with certified tail bounds.
//! - [`system::verify_contiguity`]: check any published contiguity relation.
//! - [`connection::verify_connection`] / [`connection::monodromy_rhs`]:
//!   connection and monodromy formulas.
//! - [`apps`]: incomplete beta and elliptic integral specializations.
//! - [`suites`]: seeded verification suites (also exposed by the `ihg` CLI).
//!
//! See the crate examples for one runnable program per capability.

pub mod apps;
pub mod atlas;
pub mod cli;
pub mod connection;
pub mod error;
pub mod quad;
pub mod scalar;
pub mod series;
pub mod suites;
pub mod system;
pub mod weyl;

pub use atlas::{classify_d, region_membership, EvaluationPoint, DVector, RegionTag};
pub use error::{Error, Result};
pub use scalar::C64;
pub use series::{Parameters, SeriesResult};
