use serde::{Deserialize, Serialize};

use crate::encoders::ParamTensors;
use crate::error::{Error, Result};

/// AdamW hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimConfig {
    pub fn with_learning_rate(self, learning_rate: f64) -> Self {
        Self { learning_rate, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate >= 0.0
            && self.weight_decay.is_finite()
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings: {self:?}")))
        }
    }
}

/// Moment accumulators for one parameter set.
#[derive(Debug, Clone)]
pub struct OptimState {
    pub config: OptimConfig,
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl OptimState {
    pub fn new(params: &impl ParamTensors, config: OptimConfig) -> Self {
        let shapes: Vec<usize> = params.named_tensors().iter().map(|(_, _, t)| t.len()).collect();
        Self {
            config,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One AdamW step with decoupled weight decay:
/// `p ← p − lr·m̂/(√v̂+ε) − lr·wd·p`.
pub fn optimizer_step<P: ParamTensors>(params: &mut P, grads: &P, state: &mut OptimState) -> Result<()> {
    let grads = grads.named_tensors();
    let c = state.config;
    let mut tensors = params.tensors_mut();
    if tensors.len() != grads.len() || tensors.len() != state.first.len() {
        return Err(Error::DimensionMismatch(format!(
            "optimizer tracks {} tensors, got {} params and {} grads",
            state.first.len(),
            tensors.len(),
            grads.len()
        )));
    }
    for (i, (p, (name, _, g))) in tensors.iter().zip(&grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first[i].len() {
            return Err(Error::DimensionMismatch(format!("gradient shape mismatch for {name}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    for (i, p) in tensors.iter_mut().enumerate() {
        let g = grads[i].2;
        let m = &mut state.first[i];
        let v = &mut state.second[i];
        for j in 0..p.len() {
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            let old = p[j];
            p[j] = old - c.learning_rate * m_hat / (v_hat.sqrt() + c.eps) - c.learning_rate * c.weight_decay * old;
        }
    }
    Ok(())
}
