//! Oscillation-based estimates of the essential-spectrum edge of half-line
//! canonical systems `J u' = -z H u`.

pub mod bisect;
pub mod bounds;
pub mod error;
pub mod interval;
pub mod model;
pub mod ode;
pub mod prufer;
pub mod quad;
pub mod schrodinger;
pub mod spectrum;
pub mod transforms;
pub mod verify;

pub use error::{Error, Result};
pub use interval::Interval;
pub use model::{builtin_family, CoefficientField, FamilyParams, HMatrix};
pub use ode::StepPolicy;
