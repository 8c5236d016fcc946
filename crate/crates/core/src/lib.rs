//! Sequential tests of a simple null against a composite alternative.

pub mod error;
pub mod expfam;
pub mod gsprt;
pub mod montecarlo;
pub mod projection;
pub mod simplex;
pub mod uncertainty;

mod linalg;
mod qp;

pub use error::{Error, Result};
pub use projection::{ProjectionResult, Projector, ReverseProjection, WarmStart};
pub use simplex::{Distribution, EmpiricalType};
pub use uncertainty::{AssumptionReport, LinearFamily};
