//! Seeded generator for cohorts shaped like the published marginals.
//!
//! Sampling model, per record:
//! * confirmation method: exactly `n_clinical` clinical rows, placed by a
//!   seeded shuffle;
//! * sex, test result: independent Bernoulli draws;
//! * age: discretised Gaussian over 1..=95 years;
//! * outcome: death probability `base[test] · g(age) · h(sex)`, where
//!   `g = 0` below the age knee and rises linearly above it, and `h` moves
//!   mortality from women to men while keeping its mean at 1. `base` is
//!   solved exactly from the age distribution so the per-test-result
//!   recovery rates hit their targets in expectation;
//! * hospitalization days: 1..=7 for survivors, 3..=21 for deaths;
//! * clinical flags: independent Bernoulli conditioned on outcome;
//! * rare symptoms: set on exactly `round(frequency · n_total)` records.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cohort::{Cohort, Provenance};
use super::record::{ConfirmationMethod, Flag, Outcome, PatientRecord, Sex, TestResult};
use crate::{seeded_rng, Error, Result};

const AGE_MIN: u8 = 1;
const AGE_MAX: u8 = 95;
const AGE_MEAN: f64 = 52.0;
const AGE_SD: f64 = 19.0;
/// Years over which the age risk factor grows by 1.
const AGE_RISK_SCALE: f64 = 25.0;

/// Probability of each clinical flag given (recovered, deceased).
pub const FLAG_RATES: [(Flag, f64, f64); 6] = [
    (Flag::Ventilator, 0.06, 0.55),
    (Flag::Cough, 0.45, 0.55),
    (Flag::Apnea, 0.14, 0.40),
    (Flag::Carcinoma, 0.12, 0.30),
    (Flag::HealthcareStaff, 0.18, 0.08),
    (Flag::IcuHospitalization, 0.08, 0.60),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCohortSpec {
    pub n_total: usize,
    pub n_clinical: usize,
    pub seed: u64,
    pub recovery_rate_negative: f64,
    pub recovery_rate_positive: f64,
    /// Nobody younger than this dies.
    pub age_death_knee: u8,
    /// Relative reduction of female mortality; male mortality rises to compensate.
    pub female_recovery_boost: f64,
    /// Symptom columns planted below the selection threshold.
    pub rare_symptom_columns: Vec<(String, f64)>,
    pub positive_fraction: f64,
    pub female_fraction: f64,
}

impl Default for SyntheticCohortSpec {
    fn default() -> Self {
        SyntheticCohortSpec {
            n_total: 2875,
            n_clinical: 1787,
            seed: 7,
            recovery_rate_negative: 0.85,
            recovery_rate_positive: 0.75,
            age_death_knee: 40,
            female_recovery_boost: 0.2,
            rare_symptom_columns: alloc::vec![
                (String::from("anosmia"), 0.06),
                (String::from("diarrhea"), 0.087),
                (String::from("skin_rash"), 0.03),
            ],
            positive_fraction: 0.6,
            female_fraction: 0.45,
        }
    }
}

impl SyntheticCohortSpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::Validation(msg));
        if self.n_clinical > self.n_total {
            return invalid(format!("n_clinical {} exceeds n_total {}", self.n_clinical, self.n_total));
        }
        for (name, v) in [
            ("recovery_rate_negative", self.recovery_rate_negative),
            ("recovery_rate_positive", self.recovery_rate_positive),
            ("female_recovery_boost", self.female_recovery_boost),
            ("positive_fraction", self.positive_fraction),
            ("female_fraction", self.female_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return invalid(format!("{name} = {v} is not a fraction"));
            }
        }
        if self.female_fraction >= 1.0 {
            return invalid(String::from("female_fraction must be below 1"));
        }
        if self.age_death_knee > AGE_MAX {
            return invalid(format!("age_death_knee {} leaves no age at risk", self.age_death_knee));
        }
        let mut names = alloc::collections::BTreeSet::new();
        for (name, freq) in &self.rare_symptom_columns {
            if !(0.0..0.1).contains(freq) {
                return invalid(format!("rare symptom `{name}` frequency {freq} not in [0, 0.1)"));
            }
            if super::table::REQUIRED_COLUMNS.contains(&name.as_str()) || !names.insert(name.as_str()) {
                return invalid(format!("rare symptom name `{name}` clashes with another column"));
            }
        }
        let model = DeathModel::new(self);
        if model.max_probability() > 1.0 {
            return invalid(format!(
                "targets need a death probability of {:.3} for the oldest men",
                model.max_probability()
            ));
        }
        Ok(())
    }
}

/// Discretised Gaussian age distribution, as a CDF over `AGE_MIN..=AGE_MAX`.
fn age_pmf() -> Vec<(u8, f64)> {
    let weights: Vec<(u8, f64)> = (AGE_MIN..=AGE_MAX)
        .map(|a| {
            let z = (f64::from(a) - AGE_MEAN) / AGE_SD;
            (a, libm::exp(-0.5 * z * z))
        })
        .collect();
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    weights.into_iter().map(|(a, w)| (a, w / total)).collect()
}

struct DeathModel {
    knee: u8,
    /// Death scale for (negative, positive) test results.
    base: [f64; 2],
    male_factor: f64,
    female_factor: f64,
}

impl DeathModel {
    fn new(spec: &SyntheticCohortSpec) -> Self {
        let knee = spec.age_death_knee;
        let mean_age_risk: f64 = age_pmf().iter().map(|&(a, p)| p * age_risk(a, knee)).sum();
        let female_factor = 1.0 - spec.female_recovery_boost;
        let male_factor = (1.0 - spec.female_fraction * female_factor) / (1.0 - spec.female_fraction);
        let base =
            [(1.0 - spec.recovery_rate_negative) / mean_age_risk, (1.0 - spec.recovery_rate_positive) / mean_age_risk];
        DeathModel { knee, base, male_factor, female_factor }
    }

    fn probability(&self, age: u8, sex: Sex, test: TestResult) -> f64 {
        let base = match test {
            TestResult::Negative => self.base[0],
            TestResult::Positive => self.base[1],
        };
        let sex_factor = match sex {
            Sex::Male => self.male_factor,
            Sex::Female => self.female_factor,
        };
        base * age_risk(age, self.knee) * sex_factor
    }

    fn max_probability(&self) -> f64 {
        let worst = self.base[0].max(self.base[1]);
        worst * age_risk(AGE_MAX, self.knee) * self.male_factor.max(self.female_factor)
    }
}

fn age_risk(age: u8, knee: u8) -> f64 {
    if age < knee {
        0.0
    } else {
        1.0 + f64::from(age - knee) / AGE_RISK_SCALE
    }
}

/// Builds a cohort from `spec`. The output is a pure function of `spec`.
pub fn generate_synthetic(spec: &SyntheticCohortSpec) -> Result<Cohort> {
    spec.validate()?;
    let n = spec.n_total;
    let mut rng = seeded_rng(spec.seed);

    let mut methods: Vec<ConfirmationMethod> = (0..n)
        .map(|i| if i < spec.n_clinical { ConfirmationMethod::Clinical } else { ConfirmationMethod::Rtpcr })
        .collect();
    methods.shuffle(&mut rng);

    let pmf = age_pmf();
    let model = DeathModel::new(spec);
    let mut records = Vec::with_capacity(n);
    for (i, method) in methods.into_iter().enumerate() {
        let sex = if rng.gen::<f64>() < spec.female_fraction { Sex::Female } else { Sex::Male };
        let test_result =
            if rng.gen::<f64>() < spec.positive_fraction { TestResult::Positive } else { TestResult::Negative };
        let age = sample_age(&pmf, rng.gen::<f64>());
        let deceased = rng.gen::<f64>() < model.probability(age, sex, test_result);
        let outcome = if deceased { Outcome::Deceased } else { Outcome::Recovered };
        let days = if deceased { rng.gen_range(3..=21) } else { rng.gen_range(1..=7) };
        let mut record = PatientRecord {
            id: format!("P{:05}", i + 1),
            age,
            sex,
            test_result,
            confirmation_method: method,
            ventilator: false,
            cough: false,
            apnea: false,
            carcinoma: false,
            healthcare_staff: false,
            icu_hospitalization: false,
            hospitalization_days: Some(days),
            extra_symptoms: BTreeMap::new(),
            outcome,
        };
        for (flag, p_recovered, p_deceased) in FLAG_RATES {
            let p = if deceased { p_deceased } else { p_recovered };
            record.set_flag(flag, rng.gen::<f64>() < p);
        }
        records.push(record);
    }

    for (name, freq) in &spec.rare_symptom_columns {
        let k = libm::round(freq * n as f64) as usize;
        let mut marked = alloc::vec![false; n];
        for idx in rand::seq::index::sample(&mut rng, n, k.min(n)).into_iter() {
            marked[idx] = true;
        }
        for (r, m) in records.iter_mut().zip(marked) {
            r.extra_symptoms.insert(name.clone(), m);
        }
    }

    Cohort::new(records, Provenance::Synthetic, Some(spec.seed))
}

fn sample_age(pmf: &[(u8, f64)], u: f64) -> u8 {
    let mut acc = 0.0;
    for &(age, p) in pmf {
        acc += p;
        if u < acc {
            return age;
        }
    }
    pmf.last().map_or(AGE_MAX, |&(a, _)| a)
}
