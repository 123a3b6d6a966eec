//! Synthetic data generation, tip error metrics and basis comparison.

pub mod compare;
pub mod dataset;
pub mod metrics;
pub mod scenario;

pub use compare::{
    compare_bases, fit_dataset, ComparisonReport, ComparisonRow, ConfigFit, ErrorRecord, FitOutcome,
};
pub use dataset::{
    read_dataset, write_dataset, ConfigRecord, Dataset, Exclusion, MarkerRecord, SCHEMA_VERSION,
};
pub use metrics::{bend_deflection, median, tip_errors, Region, Stats, TipError, Workspace};
pub use scenario::{PressureGrid, PressureMap, SensorSetup, SyntheticScenario};
