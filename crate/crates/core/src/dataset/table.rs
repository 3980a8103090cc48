//! Column layout of the comma-separated cohort format.
//!
//! Only string handling lives here; reading and writing files is done by
//! the caller.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::record::{Flag, PatientRecord};
use crate::{Error, Result};

pub const REQUIRED_COLUMNS: [&str; 13] = [
    "id",
    "age",
    "sex",
    "test_result",
    "confirmation_method",
    "ventilator",
    "cough",
    "apnea",
    "carcinoma",
    "healthcare_staff",
    "icu_hospitalization",
    "hospitalization_days",
    "outcome",
];

/// Maps header positions to record fields.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordLayout {
    /// Position of each required column, in `REQUIRED_COLUMNS` order.
    required: [usize; 13],
    /// Extra symptom columns: (position, name).
    extras: Vec<(usize, String)>,
    width: usize,
}

impl RecordLayout {
    pub fn from_header<S: AsRef<str>>(header: &[S]) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for (i, h) in header.iter().enumerate() {
            let name = h.as_ref().trim();
            if name.is_empty() {
                return Err(Error::Schema { column: format!("#{}", i + 1), reason: "has an empty name" });
            }
            if seen.insert(name.to_owned(), i).is_some() {
                return Err(Error::Schema { column: name.to_owned(), reason: "appears more than once" });
            }
        }
        let mut required = [0usize; 13];
        for (slot, col) in required.iter_mut().zip(REQUIRED_COLUMNS) {
            *slot = *seen.get(col).ok_or_else(|| Error::Schema { column: col.to_owned(), reason: "is missing" })?;
        }
        let mut extras: Vec<(usize, String)> = seen
            .into_iter()
            .filter(|(name, _)| !REQUIRED_COLUMNS.contains(&name.as_str()))
            .map(|(name, i)| (i, name))
            .collect();
        extras.sort();
        Ok(RecordLayout { required, extras, width: header.len() })
    }

    /// Layout used when writing: required columns, then extras alphabetically.
    pub fn for_extras<'a>(extra_names: impl IntoIterator<Item = &'a str>) -> Self {
        let mut names: Vec<String> = extra_names.into_iter().map(String::from).collect();
        names.sort();
        names.dedup();
        let mut required = [0usize; 13];
        for (i, slot) in required.iter_mut().enumerate() {
            *slot = i;
        }
        let extras = names.into_iter().enumerate().map(|(i, n)| (13 + i, n)).collect::<Vec<_>>();
        let width = 13 + extras.len();
        RecordLayout { required, extras, width }
    }

    pub fn header(&self) -> Vec<String> {
        let mut out = alloc::vec![String::new(); self.width];
        for (pos, name) in self.required.iter().zip(REQUIRED_COLUMNS) {
            out[*pos] = name.to_owned();
        }
        for (pos, name) in &self.extras {
            out[*pos] = name.clone();
        }
        out
    }

    pub fn extra_names(&self) -> impl Iterator<Item = &str> {
        self.extras.iter().map(|(_, n)| n.as_str())
    }

    /// Parses one data row. `row` is the 1-based data row index used in errors.
    pub fn parse_row<S: AsRef<str>>(&self, fields: &[S], row: usize) -> Result<PatientRecord> {
        if fields.len() != self.width {
            return Err(Error::Parse {
                row,
                column: String::from("<row>"),
                value: format!("{} fields, expected {}", fields.len(), self.width),
            });
        }
        let cell = |k: usize| fields[self.required[k]].as_ref().trim();
        let parse_err =
            |k: usize| Error::Parse { row, column: REQUIRED_COLUMNS[k].to_owned(), value: cell(k).to_owned() };
        let boolean = |k: usize| parse_bool(cell(k)).ok_or_else(|| parse_err(k));

        let id = cell(0).to_owned();
        if id.is_empty() {
            return Err(parse_err(0));
        }
        let age: u8 = cell(1).parse().map_err(|_| parse_err(1))?;
        if age > super::record::MAX_AGE {
            return Err(parse_err(1));
        }
        let sex = cell(2).parse().map_err(|_| parse_err(2))?;
        let test_result = cell(3).parse().map_err(|_| parse_err(3))?;
        let confirmation_method = cell(4).parse().map_err(|_| parse_err(4))?;
        let hospitalization_days = match cell(11) {
            "" => None,
            s => Some(s.parse::<u32>().map_err(|_| parse_err(11))?),
        };
        let outcome = cell(12).parse().map_err(|_| parse_err(12))?;

        let mut extra_symptoms = BTreeMap::new();
        for (pos, name) in &self.extras {
            let raw = fields[*pos].as_ref().trim();
            let v = parse_bool(raw).ok_or_else(|| Error::Parse { row, column: name.clone(), value: raw.to_owned() })?;
            extra_symptoms.insert(name.clone(), v);
        }

        Ok(PatientRecord {
            id,
            age,
            sex,
            test_result,
            confirmation_method,
            ventilator: boolean(5)?,
            cough: boolean(6)?,
            apnea: boolean(7)?,
            carcinoma: boolean(8)?,
            healthcare_staff: boolean(9)?,
            icu_hospitalization: boolean(10)?,
            hospitalization_days,
            extra_symptoms,
            outcome,
        })
    }

    /// Renders a record into cells in header order. Extra symptoms missing
    /// from the record are an error.
    pub fn format_row(&self, r: &PatientRecord) -> Result<Vec<String>> {
        let b = |v: bool| String::from(if v { "1" } else { "0" });
        let values: [String; 13] = [
            r.id.clone(),
            r.age.to_string(),
            r.sex.as_str().to_owned(),
            r.test_result.as_str().to_owned(),
            r.confirmation_method.as_str().to_owned(),
            b(r.flag(Flag::Ventilator)),
            b(r.flag(Flag::Cough)),
            b(r.flag(Flag::Apnea)),
            b(r.flag(Flag::Carcinoma)),
            b(r.flag(Flag::HealthcareStaff)),
            b(r.flag(Flag::IcuHospitalization)),
            r.hospitalization_days.map(|d| d.to_string()).unwrap_or_default(),
            r.outcome.as_str().to_owned(),
        ];
        let mut out = alloc::vec![String::new(); self.width];
        for (pos, v) in self.required.iter().zip(values) {
            out[*pos] = v;
        }
        for (pos, name) in &self.extras {
            let v = r
                .extra_symptoms
                .get(name)
                .ok_or_else(|| Error::Schema { column: name.clone(), reason: "is missing from a record" })?;
            out[*pos] = b(*v);
        }
        Ok(out)
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}
