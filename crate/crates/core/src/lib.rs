//! Individual-level delayed SIR spreading of a computer virus on a network,
//! and the overall damage it inflicts.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: the networks a virus spreads on (generators, SNAP loader, degree statistics).
//! - [`dynamics`]: the two-phase mean-field ODE for per-host infection/recovery probabilities.
//! - [`damage`]: economic loss, antivirus development cost, and their sum.
//! - [`oracle`]: exact stochastic ground truth (Gillespie sampling, master equation).
//! - [`experiments`]: parameter sweeps, damage curves, and the optimal-delay search.
//!
//! Randomness always flows from a master seed through the named sub-streams in [`seed`].

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod damage;
pub mod dynamics;
pub mod experiments;
pub mod export;
pub mod graph;
pub mod oracle;
pub mod seed;

pub use damage::{antivirus_cost, economic_loss, total_damage, CostParams, DamageError, DamageReport};
pub use dynamics::{integrate, InitialCondition, ModelParams, ParamsError, Trajectory};
pub use graph::{DegreeStats, GraphError, Network};
