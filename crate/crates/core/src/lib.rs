//! Slow-manifold projections for stable linear systems `ẋ = L x`.
//!
//! The central object is the dynamically optimal projection (DOP): the
//! projection onto the span of the slowest eigenvectors that minimizes the
//! time-integrated squared error between the full trajectory and the
//! trajectory of the reduced model.

pub mod ensemble;
pub mod error;
pub mod error_functional;
pub mod linalg;
pub mod models;
pub mod projection;
pub mod spectral;
pub mod trajectory;
pub mod validate;

pub use error::{Error, Result};
pub use error_functional::{ErrorBreakdown, ErrorFunctional, QuadratureConfig};
pub use linalg::{ComplexMatrix, ComplexVector};
pub use projection::{Dop, DualBasis, Gramian, Method, ProjectionOperator};
pub use spectral::{LinearSystem, SlowBasis, SpectralData};
pub use trajectory::{TimeGrid, Trajectory};
pub use validate::ValidationReport;
