//! Seeded simulated learners driving the practice service, plus the pieces
//! behind the `steerpath` admin CLI.

pub mod ingest;
pub mod learner;
pub mod report;
pub mod run;
pub mod synthetic;

pub use ingest::ingest_bank;
pub use learner::{Policy, SimLearner};
pub use report::{LearnerMetrics, SimReport, StepRow, Summary};
pub use run::{run_simulation, simulate_learner, truth_table, SimConfig, SimError};
pub use synthetic::grid_bank;
