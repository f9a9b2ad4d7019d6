//! Zero-sum stochastic differential games whose Hamiltonians do not satisfy the
//! Isaacs condition, played on a time grid where a priority rule (deterministic
//! marks or a biased coin) decides who sees whose action first.
//!
//! The crate provides the one-period game, the priority-weighted Hamiltonians,
//! mark schedules, an explicit monotone solver for the limiting equation, and
//! a lattice engine that computes discrete values, extracts Markov strategies
//! and plays them by Monte Carlo.

pub mod engine;
pub mod error;
pub mod hamiltonian;
pub mod pde;
pub mod problem;
pub mod schedule;
pub mod static_game;

pub use engine::{
    best_response, build_lattice, dp_value_deterministic, dp_value_random, exploitability, simulate, CoinSource,
    GameValueTables, MarkovStrategy, MonteCarloSettings, NoiseSource, PathRecord, PlayMode, Side, Strategy,
    TransitionModel,
};
pub use error::{Error, Result};
pub use hamiltonian::{hamiltonians, DifferentialState, HamiltonianKind, Hamiltonians};
pub use pde::{cfl_max_dt, isaacs_gap, solve, solve_with, SpatialGrid, ValueField};
pub use problem::{ActionSet, CoefficientFamily, CoefficientSpec, PayoffSpec, PrioritySpec, ProblemSpec};
pub use schedule::{
    check_density, make_marks, make_uniform_partition, DensityReport, MarkSequence, Partition, SubGrid,
};
pub use static_game::{lower_value, mixed_value, saddle, upper_value, LocalGameMatrix};
