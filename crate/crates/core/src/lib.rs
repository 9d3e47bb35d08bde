//! Finite-volume simulation of a three-species predator-prey system with
//! prey-taxis and alarm-taxis, together with monitors and audits of its a
//! priori estimates and of its generalized-solution identities.
//!
//! The species are prey `u`, predator `v` and superpredator `w`:
//!
//! ```text
//! u_t = d1 Lap u                              + u (l1 - m1 u - a1 v - a2 w)
//! v_t = d2 Lap v - xi  div(S(v) grad u)       + v (l2 - m2 v + b1 u - a3 w)
//! w_t = d3 Lap w - chi div(S(w) grad(u v))    + w (l3 - m3 w + b2 u + b3 v)
//! ```
//!
//! with zero-flux boundaries on a rectangle, and `S` the identity or a smooth
//! cutoff vanishing above `2 / eps`.

pub mod config;
pub mod diagnostics;
pub mod grid;
pub mod model;
pub mod ode;
pub mod solver;
pub mod study;
pub mod weakform;

pub use grid::{Field, GridSpec};
pub use model::{CutoffSpec, Params, StateTriple};
pub use solver::{Regime, SolverConfig, Trajectory};
