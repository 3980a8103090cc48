//! The seven classical classifiers used as comparison points.
//!
//! Every model is fitted from a `[rows × features]` tensor and 0/1 labels,
//! and predicts 0/1 labels. All tie-breaking rules are fixed so results are
//! reproducible across implementations.

mod adaboost;
mod cart;
mod gnb;
mod knn;
mod logreg;
mod random_forest;
mod svm;

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

pub use adaboost::{adaboost_fit_predict, stage_weight, AdaBoostModel, AdaBoostParams, Stump};
pub use cart::{cart_fit_predict, gini, CartNode, CartTreeModel};
pub use gnb::{gnb_fit_predict, GaussianNBModel, VARIANCE_FLOOR};
pub use knn::{knn_fit_predict, KnnModel};
pub use logreg::{logreg_fit_predict, LogisticRegressionModel, LogisticRegressionParams};
pub use random_forest::{rf_fit_predict, RandomForestModel, RandomForestParams};
pub use svm::{svm_fit_predict, LinearSvmModel, LinearSvmParams};

use crate::{Error, Result, Tensor};

pub trait Classifier {
    fn predict(&self, x: &Tensor) -> Result<Vec<u8>>;
}

/// The baseline families, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Gnb,
    Knn,
    LogReg,
    Cart,
    Rf,
    Svm,
    AdaBoost,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 7] = [
        BaselineKind::Gnb,
        BaselineKind::Knn,
        BaselineKind::LogReg,
        BaselineKind::Cart,
        BaselineKind::Rf,
        BaselineKind::Svm,
        BaselineKind::AdaBoost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Gnb => "gnb",
            BaselineKind::Knn => "knn",
            BaselineKind::LogReg => "logreg",
            BaselineKind::Cart => "cart",
            BaselineKind::Rf => "rf",
            BaselineKind::Svm => "svm",
            BaselineKind::AdaBoost => "adaboost",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            BaselineKind::Gnb => "Gaussian NB",
            BaselineKind::Knn => "KNN",
            BaselineKind::LogReg => "Logistic Regression",
            BaselineKind::Cart => "Decision Tree",
            BaselineKind::Rf => "Random Forest",
            BaselineKind::Svm => "SVM",
            BaselineKind::AdaBoost => "AdaBoost",
        }
    }

    /// Fits the baseline with its default hyperparameters.
    pub fn fit(self, x: &Tensor, y: &[u8], seed: u64) -> Result<Box<dyn Classifier>> {
        Ok(match self {
            BaselineKind::Gnb => Box::new(GaussianNBModel::fit(x, y)?),
            BaselineKind::Knn => Box::new(KnnModel::fit(x, y, 5)?),
            BaselineKind::LogReg => Box::new(LogisticRegressionModel::fit(x, y, &Default::default())?),
            BaselineKind::Cart => Box::new(CartTreeModel::fit(x, y)?),
            BaselineKind::Rf => {
                Box::new(RandomForestModel::fit(x, y, &RandomForestParams { seed, ..Default::default() })?)
            }
            BaselineKind::Svm => Box::new(LinearSvmModel::fit(x, y, &LinearSvmParams { seed, ..Default::default() })?),
            BaselineKind::AdaBoost => Box::new(AdaBoostModel::fit(x, y, &Default::default())?),
        })
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Validation(format!("unknown baseline `{s}`")))
    }
}

/// Shape checks shared by every `fit`.
pub(crate) fn check_training(x: &Tensor, y: &[u8], op: &'static str) -> Result<()> {
    if x.ndim() != 2 || x.rows() != y.len() {
        return Err(Error::Shape { op, detail: format!("x {:?} vs {} labels", x.shape(), y.len()) });
    }
    if y.is_empty() {
        return Err(Error::Training(format!("{op}: empty training set")));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::Validation(format!("{op}: label {bad} is not 0/1")));
    }
    Ok(())
}

pub(crate) fn require_both_classes(y: &[u8], op: &'static str) -> Result<()> {
    let ones = y.iter().filter(|&&v| v == 1).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::Training(format!("{op}: training data has a single class")));
    }
    Ok(())
}

pub(crate) fn check_width(x: &Tensor, n_features: usize, op: &'static str) -> Result<()> {
    if x.ndim() != 2 || x.cols() != n_features {
        return Err(Error::Shape { op, detail: format!("input {:?}, model expects {n_features} features", x.shape()) });
    }
    Ok(())
}
