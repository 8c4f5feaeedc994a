//! Datasets, Monte Carlo link campaigns, end-to-end runs and result files.

mod dataset;
mod endtoend;
mod link;
mod output;

pub use dataset::{dataset_from_idx, load_idx, parse_idx, synth_dataset, Dataset, IdxArray};
pub use endtoend::{run_end_to_end, EndToEndConfig, EndToEndMetrics, Modulation};
pub use link::{
    run_bsec_montecarlo, run_link_montecarlo, run_link_with_channel, trit_chi_square, ChiSquare, LinkStats, TritCounts,
    MIN_LINK_BITS,
};
pub use output::{format_number, Cell, ConfigFile, CsvTable, RunRecord, SweepPoint, SWEEP_HEADER};
