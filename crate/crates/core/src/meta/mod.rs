//! Patient metadata: records, leakage exclusions and the scaled design matrix.

mod encode;
mod exclusion;
pub mod io;
mod record;
mod schema;

pub use encode::{encode, EncodedMeta, MetaEncoder, ScalerParam};
pub use exclusion::{apply_exclusions, ExclusionOutcome, ExclusionPolicy, RemovedRecord};
pub use record::{normalize_name, Diagnosis, PatientRecord, Sex, SmokingStatus};
pub use schema::{MetadataSchema, NamedField, DEFAULT_MEDICATION_COUNT};
