use serde::{Deserialize, Serialize};

use crate::nn::tensor::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, _, t, _)| vec![0.0; t.len()]).collect();
        AdamState {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// Bias-corrected Adam update on trainable parameters; clears every grad
/// slot afterwards. A trainable parameter without a gradient is treated
/// as having a zero gradient.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState) {
    state.t += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    let c1 = 1.0 - beta1.powi(state.t.min(i32::MAX as u64) as i32);
    let c2 = 1.0 - beta2.powi(state.t.min(i32::MAX as u64) as i32);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        if !store.is_trainable(id) {
            continue;
        }
        let i = id.index();
        let tensor = store.get_mut(id);
        let grad = tensor.grad().map(<[f64]>::to_vec);
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        let values = tensor.values_mut();
        for k in 0..values.len() {
            let g = grad.as_ref().map_or(0.0, |g| g[k]);
            m[k] = beta1 * m[k] + (1.0 - beta1) * g;
            v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            values[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    store.clear_grads();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    fn single(w: f64) -> (ParamStore, crate::nn::ParamId) {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::new(vec![1], vec![w]).unwrap()).unwrap();
        (store, id)
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let (mut store, id) = single(0.75);
        let mut st = AdamState::new(&store, AdamConfig::default());
        adam_step(&mut store, &mut st);
        assert_eq!(store.value(id), &[0.75]);
        assert_eq!(st.steps(), 1);
    }

    #[test]
    fn one_step_hand_value() {
        let (mut store, id) = single(0.0);
        let mut st = AdamState::new(
            &store,
            AdamConfig {
                lr: 0.1,
                ..AdamConfig::default()
            },
        );
        store.get_mut(id).set_grad(vec![1.0]).unwrap();
        adam_step(&mut store, &mut st);
        assert!((store.value(id)[0] + 0.1).abs() < 1e-8);
        assert!(store.get(id).grad().is_none());
    }

    #[test]
    fn frozen_param_unchanged() {
        let (mut store, id) = single(0.5);
        store.set_trainable(id, false);
        store.get_mut(id).set_grad(vec![3.0]).unwrap();
        let mut st = AdamState::new(&store, AdamConfig::default());
        let before = store.value(id)[0].to_bits();
        adam_step(&mut store, &mut st);
        assert_eq!(store.value(id)[0].to_bits(), before);
    }
}
