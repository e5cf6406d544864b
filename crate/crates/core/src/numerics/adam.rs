//! Bias-corrected Adam.

use super::tensor::DenseTensor;
use super::NumError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<DenseTensor>,
    v: Vec<DenseTensor>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &[DenseTensor], lr: f64) -> Self {
        AdamState {
            m: params.iter().map(|p| DenseTensor::zeros(p.rows(), p.cols())).collect(),
            v: params.iter().map(|p| DenseTensor::zeros(p.rows(), p.cols())).collect(),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One optimizer step; parameters are updated in place.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [DenseTensor],
    grads: &[DenseTensor],
) -> Result<(), NumError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(NumError::Shape("adam parameter/gradient count mismatch".into()));
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if p.shape != g.shape {
            return Err(NumError::Shape("adam shape mismatch".into()));
        }
        for k in 0..p.values.len() {
            let gk = g.values[k];
            if !gk.is_finite() {
                return Err(NumError::NonFinite("gradient".into()));
            }
            m.values[k] = state.beta1 * m.values[k] + (1.0 - state.beta1) * gk;
            v.values[k] = state.beta2 * v.values[k] + (1.0 - state.beta2) * gk * gk;
            let mhat = m.values[k] / bc1;
            let vhat = v.values[k] / bc2;
            p.values[k] -= state.lr * mhat / (vhat.sqrt() + state.eps);
        }
        if !p.is_finite() {
            return Err(NumError::NonFinite("parameter".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_about_lr() {
        let mut params = vec![DenseTensor::scalar(1.0)];
        let grads = vec![DenseTensor::scalar(1.0)];
        let mut state = AdamState::new(&params, 0.001);
        adam_step(&mut state, &mut params, &grads).unwrap();
        let delta = params[0].item() - 1.0;
        assert!((delta + 0.001).abs() < 1e-6, "delta {delta}");
    }

    #[test]
    fn zero_grads_leave_parameters_unchanged() {
        let mut params = vec![DenseTensor::row_vector(vec![1.0, -2.0])];
        let grads = vec![DenseTensor::row_vector(vec![0.0, 0.0])];
        let mut state = AdamState::new(&params, 0.01);
        adam_step(&mut state, &mut params, &grads).unwrap();
        assert_eq!(params[0].values, vec![1.0, -2.0]);
    }

    #[test]
    fn identical_runs_identical_trajectories() {
        let run = || {
            let mut params = vec![DenseTensor::row_vector(vec![0.3, 0.7])];
            let mut state = AdamState::new(&params, 0.01);
            for i in 0..20 {
                let grads =
                    vec![DenseTensor::row_vector(vec![params[0].values[0] + i as f64 * 0.1, -0.5])];
                adam_step(&mut state, &mut params, &grads).unwrap();
            }
            params[0].values.clone()
        };
        assert_eq!(run(), run());
    }
}
