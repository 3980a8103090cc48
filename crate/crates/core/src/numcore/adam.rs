use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-7 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid Adam configuration {self:?}")))
        }
    }
}

/// A trainable tensor with its Adam moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub m: Tensor,
    pub v: Tensor,
    pub t: u64,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let m = Tensor::zeros(value.shape());
        let v = Tensor::zeros(value.shape());
        Param { value, m, v, t: 0 }
    }
}

/// Named parameters, iterated in name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.params.insert(name.into(), Param::new(value));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name).map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name).map(|p| &mut p.value)
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn remove(&mut self, name: &str) -> Option<Param> {
        self.params.remove(name)
    }
}

/// One bias-corrected Adam update of every parameter in `store`.
///
/// `grads` must carry exactly the parameter names of `store`, with matching
/// shapes; nothing is modified if it does not.
pub fn adam_step(store: &mut ParamStore, grads: &BTreeMap<String, Tensor>, cfg: &AdamConfig) -> Result<()> {
    cfg.validate()?;
    if let Some(extra) = grads.keys().find(|k| !store.params.contains_key(*k)) {
        return Err(Error::Key(format!("gradient for unknown parameter `{extra}`")));
    }
    for (name, p) in &store.params {
        let g = grads.get(name).ok_or_else(|| Error::Key(format!("missing gradient for `{name}`")))?;
        p.value.same_shape(g, "adam_step")?;
    }

    for (name, p) in store.params.iter_mut() {
        let g = &grads[name];
        p.t += 1;
        let t = p.t as i32;
        let c1 = 1.0 - libm::pow(cfg.beta1, f64::from(t));
        let c2 = 1.0 - libm::pow(cfg.beta2, f64::from(t));
        let (theta, m, v) = (p.value.data_mut(), p.m.data_mut(), p.v.data_mut());
        for i in 0..theta.len() {
            let gi = g.data()[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            theta[i] -= cfg.learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn single(theta: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("theta", Tensor::scalar(theta));
        s
    }

    fn grad(g: f64) -> BTreeMap<String, Tensor> {
        let mut m = BTreeMap::new();
        m.insert(String::from("theta"), Tensor::scalar(g));
        m
    }

    #[test]
    fn first_step_closed_form() {
        // m̂ = g = 1 and v̂ = g² = 1 after bias correction.
        let mut s = single(0.0);
        adam_step(&mut s, &grad(1.0), &AdamConfig::default()).unwrap();
        let expected = -0.001 * 1.0 / (1.0 + 1e-7);
        assert!((s.get("theta").unwrap().data()[0] - expected).abs() < 1e-18);
        assert_eq!(s.param("theta").unwrap().t, 1);
    }

    #[test]
    fn two_steps_match_hand_unroll() {
        let cfg = AdamConfig::default();
        let mut s = single(0.0);
        adam_step(&mut s, &grad(1.0), &cfg).unwrap();
        let theta1 = s.get("theta").unwrap().data()[0];
        adam_step(&mut s, &grad(1.0), &cfg).unwrap();
        let theta2 = s.get("theta").unwrap().data()[0];

        let m2 = 0.9 * 0.1 + 0.1;
        let v2 = 0.999 * 0.001 + 0.001;
        let m_hat = m2 / (1.0 - 0.81);
        let v_hat = v2 / (1.0 - 0.999f64 * 0.999);
        let unrolled = theta1 - 0.001 * m_hat / (v_hat.sqrt() + 1e-7);
        assert!((theta2 - unrolled).abs() < 1e-18);
        assert!(theta2 != 2.0 * theta1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = single(1.5);
        for _ in 0..5 {
            adam_step(&mut s, &grad(0.0), &AdamConfig::default()).unwrap();
        }
        assert_eq!(s.get("theta").unwrap().data(), &[1.5]);
        assert_eq!(s.param("theta").unwrap().t, 5);
    }

    #[test]
    fn key_mismatch_is_rejected_without_mutation() {
        let mut s = single(0.0);
        let mut g = grad(1.0);
        g.insert(String::from("other"), Tensor::scalar(1.0));
        assert!(matches!(adam_step(&mut s, &g, &AdamConfig::default()), Err(Error::Key(_))));
        assert!(matches!(adam_step(&mut s, &BTreeMap::new(), &AdamConfig::default()), Err(Error::Key(_))));
        assert_eq!(s.param("theta").unwrap().t, 0);
        let mut bad = BTreeMap::new();
        bad.insert(String::from("theta"), Tensor::new(vec![2], vec![0.0, 0.0]).unwrap());
        assert!(adam_step(&mut s, &bad, &AdamConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig { beta1: 1.0, ..Default::default() }.validate().is_err());
        assert!(AdamConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(AdamConfig { epsilon: 0.0, ..Default::default() }.validate().is_err());
        assert!(AdamConfig::default().validate().is_ok());
    }
}
