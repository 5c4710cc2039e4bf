//! Experiment orchestration: scenario grids, replicate runs and the
//! recommendation tree.

pub mod grid;
pub mod recommend;
pub mod run;

pub use grid::{expand_scenario_grid, load_grid, ConfigError, NetworkSource, ScenarioSpec};
pub use recommend::{recommend, Leaf, Recommendation};
pub use run::{
    derive_seed, run_replicate, run_scenario, simulate, write_outputs, ReplicateFailure, ScenarioError, SimulationOptions,
    SimulationOutput, Stage,
};
