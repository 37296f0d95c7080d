//! Idle energy minimization for parallel identical machines.
//!
//! Machines idle between jobs and can drop into power-saving modes whose
//! switching costs time and energy. The [`energy`] module condenses a mode
//! set into a piecewise-linear energy function of the idle length; the
//! remaining modules schedule jobs against it:
//!
//! - [`problem`]: instances, schedules, feasibility and the energy objective
//! - [`generator`]: seeded random instances and suites
//! - [`milp`]: relative-order and position-based MILP models, LP-file output
//! - [`solve`]: external solver adapter and exact enumeration/DP oracles
//! - [`bench`]: experiment runner, aggregation tables and plot data

pub mod bench;
pub mod energy;
pub mod generator;
pub mod milp;
pub mod problem;
pub mod solve;

pub use energy::{EnergyError, EnergyFunction, EnergyMode};
pub use problem::{evaluate, check_feasibility, validate_instance, Instance, Job, Solution};
