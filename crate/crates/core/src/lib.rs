//! Numerical laboratory for the anisotropic p-Laplacian evolution equation
//! `u_t = sum_i (|u_{x_i}|^{p_i-2} u_{x_i})_{x_i}` in the fast-diffusion
//! range `1 < p_i < 2`.
//!
//! The crate is organized around six pieces:
//!
//! * [`exponents`] — admissibility conditions on the diffusion exponents and
//!   the self-similar exponent algebra (decay rate, per-axis spread rates,
//!   mass-scaling exponents, the symmetrization constant, and the
//!   doubly-nonlinear generalization).
//! * [`profiles`] — closed-form Barenblatt profiles for the orthotropic and
//!   isotropic cases, very singular solutions, explicit upper/lower barriers,
//!   and a finite-difference residual probe for sub/supersolution checks.
//! * [`grid`] — tensor-product grids on truncated boxes, cell-centered
//!   fields, quadrature, decreasing rearrangement, Schwarz symmetrization,
//!   and the mass-concentration partial order.
//! * [`solver`] — the implicit time discretization scheme (each step a
//!   strictly convex minimization), an isotropic companion solver for
//!   symmetrization comparisons, and the rescaled drift-diffusion flow whose
//!   steady state is the numeric self-similar profile.
//! * [`verify`] — tolerance-based checks turning qualitative statements
//!   (mass conservation, contraction, comparison, smoothing, barriers,
//!   concentration, convergence to the Barenblatt attractor) into structured
//!   pass/fail reports.
//! * [`experiments`] — the pinned desk-scale experiment configurations used
//!   by the acceptance suite and the command-line `verify` subcommand.
//!
//! Everything is deterministic and single-threaded: identical inputs produce
//! bit-identical outputs.

pub mod error;
pub mod exponents;
pub mod experiments;
pub mod gamma;
pub mod grid;
pub mod profiles;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
