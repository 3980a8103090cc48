//! Patient records, cohorts, the delimited-text layout and the synthetic
//! cohort generator.

mod cohort;
mod record;
mod synthetic;
mod table;

pub use cohort::{
    cohort_summary, filter_by_method, AgeBucket, Cohort, CohortSummary, OutcomeCounts, Provenance, SummaryCell,
};
pub use record::{ConfirmationMethod, Flag, Outcome, PatientRecord, Sex, TestResult, MAX_AGE};
pub use synthetic::{generate_synthetic, SyntheticCohortSpec, FLAG_RATES};
pub use table::{RecordLayout, REQUIRED_COLUMNS};
