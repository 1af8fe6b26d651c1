//! Experiment driver: configuration, closed-loop simulation and reporting.

pub mod config;
pub mod experiment;
pub mod matching;
pub mod metrics;
pub mod output;
pub mod receiver;
pub mod run;
pub mod sweep;

#[cfg(test)]
mod tests;

pub use config::{DoaInput, ExperimentConfig, OccupancyCase, SamplingMode, SweepAxes};
pub use experiment::{aggregate, run_experiment, run_point, PointResult, PolicyAggregate};
pub use metrics::{
    compute_deviation, compute_doa_error, compute_regret, compute_throughput, RunSummary, Stats,
};
pub use output::{emit_reports, read_slot_csv, write_slot_csv, OutputPaths, Summary, SLOT_COLUMNS};
pub use receiver::{DoaOutput, Receiver, SlotAnalysis};
pub use run::{DoaRecord, FrontEnd, Simulation, SlotOutput, SlotReport, SlotTerms, SpectrumDump};
pub use sweep::{DoaSweep, DoaSweepResult};
