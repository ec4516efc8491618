//! Cohort assembly, split plans and synthetic cohorts.

mod cohort;
mod split;
pub mod synth;

pub use cohort::{assemble, balanced_cell_size, Aggregation, Balance, Cohort, Task};
pub use split::{make_splits, SplitPlan};
pub use synth::{
    generate_synthetic, read_manifest, BandEffect, ManifestRow, MetaEffect, MetaField, SignalSpec, SynthConfig,
    SyntheticCohort,
};
