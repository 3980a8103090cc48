use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{ParamStore, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    /// Flat index of the worst coordinate.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }
}

/// `|a − n| / max(|a|, |n|, 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Compares the analytic gradient returned by `f` against central finite
/// differences on every coordinate of every parameter.
///
/// `f` returns the scalar value and the analytic gradient for each parameter.
pub fn gradient_check<F>(f: F, params: &ParamStore, step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(f64, BTreeMap<String, Tensor>)>,
{
    let (value, analytic) = f(params)?;
    if !value.is_finite() {
        return Err(Error::Numeric(format!("objective is {value} at the base point")));
    }
    let mut probe = params.clone();
    let names: Vec<String> = params.names().map(String::from).collect();
    let mut report = Vec::with_capacity(names.len());
    for name in names {
        let grad = analytic.get(&name).ok_or_else(|| Error::Key(format!("no analytic gradient for `{name}`")))?;
        let base = params.get(&name).unwrap();
        base.same_shape(grad, "gradient_check")?;
        let mut check =
            ParamCheck { name: name.clone(), max_rel_error: 0.0, worst_index: 0, analytic: 0.0, numeric: 0.0 };
        for i in 0..base.len() {
            let orig = base.data()[i];
            probe.get_mut(&name).unwrap().data_mut()[i] = orig + step;
            let (plus, _) = f(&probe)?;
            probe.get_mut(&name).unwrap().data_mut()[i] = orig - step;
            let (minus, _) = f(&probe)?;
            probe.get_mut(&name).unwrap().data_mut()[i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!("objective not finite around `{name}`[{i}]")));
            }
            let numeric = (plus - minus) / (2.0 * step);
            let a = grad.data()[i];
            let err = relative_error(a, numeric);
            if err > check.max_rel_error || i == 0 {
                check = ParamCheck { name: name.clone(), max_rel_error: err, worst_index: i, analytic: a, numeric };
            }
        }
        report.push(check);
    }
    Ok(GradCheckReport { params: report, tolerance: tol })
}
