//! Numerical toolkit for a parabolic-elliptic chemotaxis system with growth,
//!
//! ```text
//! u_t = ∇·(∇u - χu∇v) + f(u),   0 = Δv - v + g(u),   g(u) = βu^κ,
//! ```
//!
//! on rectangles with homogeneous Neumann conditions: finite-volume time
//! stepping, linear stability thresholds, Newton continuation of steady
//! states and the comparison ODEs that bound solutions in time.

mod banded;
mod ode;
pub mod compare;
pub mod config;
pub mod diagnostics;
pub mod evolve;
pub mod grid;
pub mod model;
pub mod stability;
pub mod steady;
