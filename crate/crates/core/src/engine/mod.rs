//! The discretized game: lattice dynamic programming, strategies, path
//! simulation and exploitability sampling.

pub mod dp;
pub mod exploit;
pub mod lattice;
pub mod simulate;
pub mod strategy;

pub use dp::{best_response, dp_value_deterministic, dp_value_random, BestResponse, GameValueTables, PriorityRule};
pub use exploit::{exploitability, ChallengerOutcome, ExploitabilityReport, MonteCarloSettings};
pub use lattice::{build_lattice, GaussHermite, TransitionModel};
pub use simulate::{simulate, write_records_csv, CoinSource, NoiseSource, PathRecord, PlayMode, SimulationResult};
pub use strategy::{Decision, FeedbackStrategy, History, MarkovStrategy, Perturbed, ResponseStrategy, Side, Strategy};
