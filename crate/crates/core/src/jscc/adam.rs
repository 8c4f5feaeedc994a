use crate::error::{Error, Result};

use super::model::DenseModel;

/// First and second moment estimates for every parameter of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    // per layer: weights then bias
    m: Vec<[Vec<f64>; 2]>,
    v: Vec<[Vec<f64>; 2]>,
}

impl AdamState {
    pub fn new(model: &DenseModel, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
            return Err(Error::config(format!(
                "Adam needs beta1, beta2 in [0, 1) and eps > 0 (got {beta1}, {beta2}, {eps})"
            )));
        }
        let zeros: Vec<[Vec<f64>; 2]> = model
            .layers()
            .iter()
            .map(|l| [vec![0.0; l.weights().len()], vec![0.0; l.bias().len()]])
            .collect();
        Ok(Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        })
    }

    /// Standard defaults: 0.9, 0.999, 1e-8.
    pub fn with_defaults(model: &DenseModel) -> Self {
        Self::new(model, 0.9, 0.999, 1e-8).expect("default Adam constants are valid")
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    fn matches(&self, model: &DenseModel) -> bool {
        self.m.len() == model.layers().len()
            && self
                .m
                .iter()
                .zip(model.layers())
                .all(|(m, l)| m[0].len() == l.weights().len() && m[1].len() == l.bias().len())
    }
}

/// One bias-corrected Adam update from the model's accumulated gradients.
pub fn adam_step(model: &mut DenseModel, state: &mut AdamState, lr: f64) -> Result<()> {
    if !state.matches(model) {
        return Err(Error::State("optimizer state does not match the model".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (k, layer) in model.layers_mut().iter_mut().enumerate() {
        for (j, (params, grads)) in layer.params_and_grads_mut().into_iter().enumerate() {
            let m = &mut state.m[k][j];
            let v = &mut state.v[k][j];
            for i in 0..params.len() {
                let g = grads[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
    Ok(())
}
