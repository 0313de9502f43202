//! Spline quasi-interpolating projection methods for nonlinear Urysohn
//! integral equations `x - K(x) = f` on [0, 1].
//!
//! The crate provides:
//!
//! - uniform B-spline spaces and quasi-interpolating projectors ([`bspline`],
//!   [`quasi_interp`]),
//! - Gauss-Legendre quadrature on knot-aligned meshes ([`quadrature`]),
//! - the Urysohn operator, its Fréchet derivative and two benchmark problems
//!   ([`operator`], [`problems`]),
//! - Newton-Kantorovich solvers for a classical collocation scheme and a
//!   high-order modified projection scheme ([`solver`]),
//! - a convergence-study harness with CSV/markdown reports and a property
//!   suite ([`harness`]); the `urysohn` binary drives it from the command
//!   line.
//!
//! ```
//! use std::sync::Arc;
//! use urysohn::bspline::build_space;
//! use urysohn::problems::catalog_entry;
//! use urysohn::quadrature::gauss_rule;
//! use urysohn::quasi_interp::{build_qip, QipVariant};
//! use urysohn::solver::{eval_highorder, solve_highorder, NewtonConfig};
//!
//! let entry = catalog_entry("test2", Some(1.0))?;
//! let space = Arc::new(build_space(2, 16)?);
//! let scheme = Arc::new(build_qip(space, QipVariant::Q2)?);
//! let rule = gauss_rule(20)?;
//! let (result, approx) =
//!     solve_highorder(&entry.problem, &scheme, &NewtonConfig::default(), &rule)?;
//! let value = eval_highorder(&approx, 0.5)?;
//! assert!((value - 1.0 / 1.5).abs() < 1e-9);
//! assert!(result.iterations <= 10);
//! # Ok::<(), urysohn::Error>(())
//! ```

pub mod bspline;
pub mod error;
pub mod harness;
pub mod operator;
pub mod problems;
pub mod quadrature;
pub mod quasi_interp;
pub mod solver;

pub use error::{Error, Result};
