use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::record::{ConfirmationMethod, Outcome, PatientRecord, Sex, TestResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Loaded,
    Synthetic,
}

/// An ordered set of patient records with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    records: Vec<PatientRecord>,
    pub provenance: Provenance,
    pub seed: Option<u64>,
}

impl Cohort {
    pub fn new(records: Vec<PatientRecord>, provenance: Provenance, seed: Option<u64>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for r in &records {
            r.validate()?;
            if !ids.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("duplicate record id `{}`", r.id)));
            }
        }
        Ok(Cohort { records, provenance, seed })
    }

    pub fn records(&self) -> &[PatientRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Union of the extra symptom names across all records, sorted.
    pub fn extra_symptom_names(&self) -> BTreeSet<&str> {
        self.records.iter().flat_map(|r| r.extra_symptoms.keys().map(|k| k.as_str())).collect()
    }
}

/// Records confirmed by `method`, in their original order.
pub fn filter_by_method(c: &Cohort, method: ConfirmationMethod) -> Cohort {
    Cohort {
        records: c.records.iter().filter(|r| r.confirmation_method == method).cloned().collect(),
        provenance: c.provenance,
        seed: c.seed,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub outcome: Outcome,
    pub test_result: TestResult,
    pub confirmation_method: ConfirmationMethod,
    pub sex: Sex,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub recovered: usize,
    pub deceased: usize,
}

impl OutcomeCounts {
    fn add(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Recovered => self.recovered += 1,
            Outcome::Deceased => self.deceased += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.recovered + self.deceased
    }

    pub fn recovery_rate(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.recovered as f64 / self.total() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeBucket {
    /// Inclusive bounds in years.
    pub lo: u8,
    pub hi: u8,
    pub counts: OutcomeCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub total: usize,
    pub by_outcome: OutcomeCounts,
    pub positive: OutcomeCounts,
    pub negative: OutcomeCounts,
    pub clinical: OutcomeCounts,
    pub rtpcr: OutcomeCounts,
    pub male: OutcomeCounts,
    pub female: OutcomeCounts,
    /// Non-empty cells of outcome × test result × method × sex.
    pub cells: Vec<SummaryCell>,
    /// Ten-year buckets: 0–9, 10–19, …, 110–120.
    pub age_histogram: Vec<AgeBucket>,
    /// Outcome counts by hospitalization length in days, for records that have one.
    pub stay_histogram: Vec<(u32, OutcomeCounts)>,
}

impl CohortSummary {
    pub fn n_clinical(&self) -> usize {
        self.clinical.total()
    }

    pub fn n_rtpcr(&self) -> usize {
        self.rtpcr.total()
    }
}

pub fn cohort_summary(c: &Cohort) -> Result<CohortSummary> {
    if c.is_empty() {
        return Err(Error::EmptyInput("cohort summary of an empty cohort"));
    }
    let zero = || OutcomeCounts { recovered: 0, deceased: 0 };
    let mut s = CohortSummary {
        total: c.len(),
        by_outcome: zero(),
        positive: zero(),
        negative: zero(),
        clinical: zero(),
        rtpcr: zero(),
        male: zero(),
        female: zero(),
        cells: Vec::new(),
        age_histogram: (0..12u8)
            .map(|d| AgeBucket { lo: d * 10, hi: if d == 11 { 120 } else { d * 10 + 9 }, counts: zero() })
            .collect(),
        stay_histogram: Vec::new(),
    };
    let mut cells = BTreeMap::new();
    let mut stays: BTreeMap<u32, OutcomeCounts> = BTreeMap::new();
    for r in c.records() {
        let o = r.outcome;
        s.by_outcome.add(o);
        match r.test_result {
            TestResult::Positive => s.positive.add(o),
            TestResult::Negative => s.negative.add(o),
        }
        match r.confirmation_method {
            ConfirmationMethod::Clinical => s.clinical.add(o),
            ConfirmationMethod::Rtpcr => s.rtpcr.add(o),
        }
        match r.sex {
            Sex::Male => s.male.add(o),
            Sex::Female => s.female.add(o),
        }
        *cells.entry((o, r.test_result, r.confirmation_method, r.sex)).or_insert(0usize) += 1;
        let bucket = usize::from((r.age / 10).min(11));
        s.age_histogram[bucket].counts.add(o);
        if let Some(d) = r.hospitalization_days {
            stays.entry(d).or_insert_with(zero).add(o);
        }
    }
    s.cells = cells
        .into_iter()
        .map(|((outcome, test_result, confirmation_method, sex), count)| SummaryCell {
            outcome,
            test_result,
            confirmation_method,
            sex,
            count,
        })
        .collect();
    s.stay_histogram = stays.into_iter().collect();
    Ok(s)
}
