//! Cohort → design matrix: frequency-based feature selection, encoding,
//! min-max scaling, stage views and the stratified split.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{Cohort, ConfirmationMethod, Flag, Outcome, PatientRecord, TestResult};
use crate::{seeded_rng, Error, Result, Tensor};

pub const DEFAULT_SELECTION_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Binary,
}

/// Record field a column is computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    TestResult,
    ConfirmationMethod,
    Age,
    Flag(Flag),
    Extra(String),
}

impl FeatureSource {
    fn name(&self) -> String {
        match self {
            FeatureSource::TestResult => "test_result".to_owned(),
            FeatureSource::ConfirmationMethod => "confirmation_method".to_owned(),
            FeatureSource::Age => "age".to_owned(),
            FeatureSource::Flag(f) => f.as_str().to_owned(),
            FeatureSource::Extra(name) => name.clone(),
        }
    }

    fn kind(&self) -> FeatureKind {
        match self {
            FeatureSource::Age => FeatureKind::Continuous,
            _ => FeatureKind::Binary,
        }
    }

    /// Unscaled numeric value; age is returned in years.
    fn raw_value(&self, r: &PatientRecord) -> Result<f64> {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        Ok(match self {
            FeatureSource::TestResult => b(r.test_result == TestResult::Positive),
            FeatureSource::ConfirmationMethod => b(r.confirmation_method == ConfirmationMethod::Clinical),
            FeatureSource::Age => f64::from(r.age),
            FeatureSource::Flag(f) => b(r.flag(*f)),
            FeatureSource::Extra(name) => b(*r
                .extra_symptoms
                .get(name)
                .ok_or_else(|| Error::Schema { column: name.clone(), reason: "is missing from a record" })?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: FeatureKind,
    pub source: FeatureSource,
}

impl FeatureColumn {
    pub fn new(source: FeatureSource) -> Self {
        FeatureColumn { name: source.name(), kind: source.kind(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<FeatureColumn>,
    pub selection_threshold: f64,
}

impl FeatureSchema {
    pub fn new(columns: Vec<FeatureColumn>, selection_threshold: f64) -> Result<Self> {
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Validation(format!("duplicate feature column `{}`", c.name)));
            }
        }
        Ok(FeatureSchema { columns, selection_threshold })
    }

    /// The nine standard clinical features, in encoding order.
    pub fn standard() -> Self {
        let mut columns = alloc::vec![
            FeatureColumn::new(FeatureSource::TestResult),
            FeatureColumn::new(FeatureSource::ConfirmationMethod),
            FeatureColumn::new(FeatureSource::Age),
        ];
        columns.extend(Flag::ALL.iter().map(|f| FeatureColumn::new(FeatureSource::Flag(*f))));
        FeatureSchema { columns, selection_threshold: DEFAULT_SELECTION_THRESHOLD }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn position(&self, source: &FeatureSource) -> Option<usize> {
        self.columns.iter().position(|c| &c.source == source)
    }
}

/// Numeric features, 0/1 labels (1 = deceased) and the ids of the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub x: Tensor,
    pub y: Vec<u8>,
    pub schema: FeatureSchema,
    pub row_ids: Vec<String>,
}

impl DesignMatrix {
    pub fn new(x: Tensor, y: Vec<u8>, schema: FeatureSchema, row_ids: Vec<String>) -> Result<Self> {
        let ok = x.ndim() == 2
            && x.rows() == y.len()
            && y.len() == row_ids.len()
            && x.cols() == schema.len()
            && y.iter().all(|&v| v <= 1);
        if !ok {
            return Err(Error::Shape {
                op: "design_matrix",
                detail: format!(
                    "x {:?}, {} labels, {} ids, {} schema columns",
                    x.shape(),
                    y.len(),
                    row_ids.len(),
                    schema.len()
                ),
            });
        }
        Ok(DesignMatrix { x, y, schema, row_ids })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    /// `[recovered, deceased]` row counts.
    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.y.iter().filter(|&&v| v == 1).count();
        [self.y.len() - pos, pos]
    }

    pub fn take_rows(&self, idx: &[usize]) -> DesignMatrix {
        DesignMatrix {
            x: self.x.take_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            schema: self.schema.clone(),
            row_ids: idx.iter().map(|&i| self.row_ids[i].clone()).collect(),
        }
    }

    /// Comma-separated dump: `id`, the feature columns, then `label`.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("id");
        for name in self.schema.names() {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",label\n");
        for i in 0..self.n_rows() {
            out.push_str(&self.row_ids[i]);
            for v in self.x.row(i) {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", self.y[i]));
        }
        out
    }
}

/// Min-max scaling to `[0, 1]`; a constant input maps to all zeros.
pub fn normalize_age(values: &[u8]) -> Result<Vec<f64>> {
    let min = *values.iter().min().ok_or(Error::EmptyInput("normalize_age"))?;
    let max = *values.iter().max().unwrap();
    let range = f64::from(max - min);
    Ok(values.iter().map(|&v| if range == 0.0 { 0.0 } else { f64::from(v - min) / range }).collect())
}

/// Encodes every record of `c` with the columns of `schema`.
///
/// Two-valued fields become one 0/1 column (positive, clinical and `true`
/// map to 1); age is min-max scaled over the cohort.
pub fn encode_features(c: &Cohort, schema: &FeatureSchema) -> Result<DesignMatrix> {
    let records = c.records();
    let ages: Vec<u8> = records.iter().map(|r| r.age).collect();
    let scaled_age = if records.is_empty() { Vec::new() } else { normalize_age(&ages)? };
    let mut data = Vec::with_capacity(records.len() * schema.len());
    for (i, r) in records.iter().enumerate() {
        for col in &schema.columns {
            let v = match col.source {
                FeatureSource::Age => scaled_age[i],
                ref s => s.raw_value(r)?,
            };
            data.push(v);
        }
    }
    let x = Tensor::new(alloc::vec![records.len(), schema.len()], data)?;
    let y = records.iter().map(|r| u8::from(r.outcome == Outcome::Deceased)).collect();
    let ids = records.iter().map(|r| r.id.clone()).collect();
    DesignMatrix::new(x, y, schema.clone(), ids)
}

/// Keeps test result, confirmation method and age, plus every symptom
/// column whose positive fraction is at least `threshold`. Order: table
/// order, then extra symptoms alphabetically.
pub fn select_by_frequency(c: &Cohort, threshold: f64) -> Result<FeatureSchema> {
    if c.is_empty() {
        return Err(Error::EmptyInput("feature selection on an empty cohort"));
    }
    let n = c.len() as f64;
    let frequency = |pred: &dyn Fn(&PatientRecord) -> bool| c.records().iter().filter(|r| pred(r)).count() as f64 / n;
    let mut columns = alloc::vec![
        FeatureColumn::new(FeatureSource::TestResult),
        FeatureColumn::new(FeatureSource::ConfirmationMethod),
        FeatureColumn::new(FeatureSource::Age),
    ];
    for &flag in Flag::ALL {
        if frequency(&|r| r.flag(flag)) >= threshold {
            columns.push(FeatureColumn::new(FeatureSource::Flag(flag)));
        }
    }
    for name in c.extra_symptom_names() {
        if frequency(&|r| r.extra_symptoms.get(name).copied().unwrap_or(false)) >= threshold {
            columns.push(FeatureColumn::new(FeatureSource::Extra(name.to_owned())));
        }
    }
    FeatureSchema::new(columns, threshold)
}

/// The four feature/row ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// All selected features.
    S1,
    /// Without test result and confirmation method.
    S2,
    /// Clinically confirmed rows only.
    S3,
    /// RT-PCR confirmed rows only.
    S4,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::S1, Stage::S2, Stage::S3, Stage::S4];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::S1 => "s1",
            Stage::S2 => "s2",
            Stage::S3 => "s3",
            Stage::S4 => "s4",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" | "1" => Ok(Stage::S1),
            "s2" | "2" => Ok(Stage::S2),
            "s3" | "3" => Ok(Stage::S3),
            "s4" | "4" => Ok(Stage::S4),
            _ => Err(Error::Validation(format!("unknown stage `{s}`"))),
        }
    }
}

pub fn stage_view(dm: &DesignMatrix, stage: Stage) -> Result<DesignMatrix> {
    let method_col = || {
        dm.schema.position(&FeatureSource::ConfirmationMethod).ok_or_else(|| Error::Schema {
            column: String::from("confirmation_method"),
            reason: "is required for this stage",
        })
    };
    match stage {
        Stage::S1 => Ok(dm.clone()),
        Stage::S2 => {
            let keep: Vec<usize> = (0..dm.n_cols())
                .filter(|&j| {
                    !matches!(
                        dm.schema.columns[j].source,
                        FeatureSource::TestResult | FeatureSource::ConfirmationMethod
                    )
                })
                .collect();
            let x = crate::numcore::kernels::select_last(&dm.x, &keep)?;
            let schema = FeatureSchema {
                columns: keep.iter().map(|&j| dm.schema.columns[j].clone()).collect(),
                selection_threshold: dm.schema.selection_threshold,
            };
            DesignMatrix::new(x, dm.y.clone(), schema, dm.row_ids.clone())
        }
        Stage::S3 | Stage::S4 => {
            let col = method_col()?;
            let want = if stage == Stage::S3 { 1.0 } else { 0.0 };
            let rows: Vec<usize> = (0..dm.n_rows()).filter(|&i| dm.x.at(i, col) == want).collect();
            Ok(dm.take_rows(&rows))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub train: DesignMatrix,
    pub test: DesignMatrix,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Number of test rows for `n` rows: `⌈test_fraction · n⌉`.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    let exact = test_fraction * n as f64;
    (libm::ceil(exact - 1e-9) as usize).min(n)
}

/// Stratified train/test split.
///
/// The test size is `⌈test_fraction · n⌉`. Each class first gets
/// `⌊test_fraction · n_c⌋` rows; the leftover rows go to the classes with
/// the largest fractional parts (lower class first on ties), so every class
/// is within one row of its exact share. Rows are picked per
/// class after a seeded shuffle; both parts keep the input row order.
pub fn stratified_split(dm: &DesignMatrix, test_fraction: f64, seed: u64) -> Result<SplitResult> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Validation(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    let counts = dm.class_counts();
    for (class, &count) in counts.iter().enumerate() {
        if count < 2 {
            return Err(Error::Stratification { class: class as u8, count });
        }
    }
    let n = dm.n_rows();
    let n_test = test_size(n, test_fraction);
    let mut alloc_test = [0usize; 2];
    let mut fractions = [(0.0f64, 0usize); 2];
    for c in 0..2 {
        let exact = test_fraction * counts[c] as f64;
        let base = libm::floor(exact + 1e-9);
        alloc_test[c] = base as usize;
        fractions[c] = (exact - base, c);
    }
    let mut leftover = n_test - alloc_test[0] - alloc_test[1];
    fractions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in &fractions {
        if leftover == 0 {
            break;
        }
        alloc_test[c] += 1;
        leftover -= 1;
    }

    let mut rng = seeded_rng(seed);
    let mut in_test = alloc::vec![false; n];
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..n).filter(|&i| dm.y[i] == class).collect();
        idx.shuffle(&mut rng);
        for &i in &idx[..alloc_test[usize::from(class)]] {
            in_test[i] = true;
        }
    }
    let test_idx: Vec<usize> = (0..n).filter(|&i| in_test[i]).collect();
    let train_idx: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
    Ok(SplitResult { train: dm.take_rows(&train_idx), test: dm.take_rows(&test_idx), seed, test_fraction })
}

/// Per-column min-max statistics of the continuous columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    /// (column, min, max)
    pub columns: Vec<(usize, f64, f64)>,
}

impl MinMaxScaler {
    pub fn fit(dm: &DesignMatrix) -> Result<Self> {
        if dm.n_rows() == 0 {
            return Err(Error::EmptyInput("min-max scaler fit"));
        }
        let columns = dm
            .schema
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == FeatureKind::Continuous)
            .map(|(j, _)| {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for i in 0..dm.n_rows() {
                    lo = lo.min(dm.x.at(i, j));
                    hi = hi.max(dm.x.at(i, j));
                }
                (j, lo, hi)
            })
            .collect();
        Ok(MinMaxScaler { columns })
    }

    /// Scales in place, clipping into `[0, 1]` for rows outside the fitted range.
    pub fn transform(&self, dm: &mut DesignMatrix) {
        let n_cols = dm.n_cols();
        for row in dm.x.data_mut().chunks_mut(n_cols) {
            for &(j, lo, hi) in &self.columns {
                row[j] = if hi > lo { ((row[j] - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
            }
        }
    }
}
