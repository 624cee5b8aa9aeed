//! Configuration, run orchestration and validation studies.

pub mod config;
pub mod run;
pub mod sim;
pub mod studies;

pub use config::{DtPolicy, GridSpec, InitConfig, InitPreset, OutputConfig, RunConfig, SolverConfig, TimeConfig};
pub use run::{run, run_observed, RunOutput, StepExtremes};
pub use sim::{initial_state, Simulation};

pub use studies::{barenblatt_validate, eps_study, mms_validate, ConvergenceTable, EpsStudy};
