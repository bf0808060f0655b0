//! Coefficient fields `H(x) >= 0` in the `(phi, g)` form.

pub mod families;
pub mod field;
pub mod hmatrix;

pub use families::{builtin_family, dyadic_modulated, FamilyParams, FAMILY_NAMES};
pub use field::{
    AnalyticTail, AngleScale, ArclengthTable, CoefficientField, GridTable, MatrixFn, ScalarFn,
    TraceModel,
};
pub use hmatrix::{from_phi_g, lambda_segment, projection, reduce_angle, to_phi_g, HMatrix, PhiG};
