//! Steerability of two-qubit states under projective measurements.
//!
//! The library decides whether Alice can steer Bob's qubit by computing the
//! critical radius of local hidden state models:
//!
//! * exact closed form for T-states (maximally mixed marginals), where the
//!   optimal ansatz density on Bob's Bloch sphere is known;
//! * certified lower bounds for general non-degenerate states, obtained by
//!   optimizing discrete measures on the sphere;
//! * an operational local-hidden-state simulator that reproduces the
//!   conditional statistics of any unsteerable state.
//!
//! The geometric core works with the polyhedral box (a zonotope) spanned by
//! the hidden-state atoms, its hyperplane section at the trace-one level, and
//! the support function of that section after pulling everything back through
//! the inverse state map so the steering ellipsoid becomes the unit ball.

pub mod ansatz;
pub mod geometry;
pub mod lhs;
mod lp;
pub mod qstate;
pub mod radius;

pub use ansatz::{fibonacci_grid, normalize_jevtic, JevticDensity, SphereMeasure};
pub use geometry::{
    boundary_point, box_membership, build_box, pull_back, section_support, solve_lambda, GPolicy,
    Membership, PulledBackSection, SteeringBox,
};
pub use lhs::{build_response, simulate, verify_response, LhsError, ResponseModel, SimReport};
pub use qstate::{EprMap, StateError, TStateForm, TwoQubitState};
pub use radius::{
    critical_radius, optimize_ansatz, perturbation_test, principal_radius,
    tstate_critical_radius, Method, OptimizerBudget, PerturbationReport, RadiusError,
    RadiusResult, Verdict,
};

/// 3-vector of real coordinates (Bloch vectors, sphere points, directions).
pub type Vec3 = nalgebra::Vector3<f64>;
/// 4-vector of operator coordinates (trace component first).
pub type Vec4 = nalgebra::Vector4<f64>;
/// Real 3x3 matrix (correlation blocks, rotations).
pub type Mat3 = nalgebra::Matrix3<f64>;
/// Real 4x4 matrix (state maps in operator coordinates).
pub type Mat4 = nalgebra::Matrix4<f64>;
/// Complex 4x4 matrix (two-qubit density operators).
pub type CMat4 = nalgebra::Matrix4<nalgebra::Complex<f64>>;
/// Complex 2x2 matrix (single-qubit operators).
pub type CMat2 = nalgebra::Matrix2<nalgebra::Complex<f64>>;
