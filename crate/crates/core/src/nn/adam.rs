use super::{check_shape, LayerParams, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Bias-corrected Adam moments, one accumulator per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<LayerParams>,
    v: Vec<LayerParams>,
}

impl AdamState {
    pub fn new(params: &[LayerParams], lr: f64) -> Self {
        Self {
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            t: 0,
            m: params.iter().map(LayerParams::zeros_like).collect(),
            v: params.iter().map(LayerParams::zeros_like).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[LayerParams] {
        &self.m
    }

    pub fn second_moments(&self) -> &[LayerParams] {
        &self.v
    }

    pub fn step(&mut self, params: &mut [LayerParams], grads: &[LayerParams]) -> Result<()> {
        check_shape("adam layer count", (params.len(), 0), (grads.len(), 0))?;
        check_shape("adam state layer count", (params.len(), 0), (self.m.len(), 0))?;
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            check_shape("adam gradient", p.weight.shape(), g.weight.shape())?;
            check_shape("adam bias gradient", (p.bias.len(), 0), (g.bias.len(), 0))?;
            check_shape("adam state", p.weight.shape(), m.weight.shape())?;
        }
        self.t += 1;
        let t = self.t as i32;
        let correct1 = 1.0 - self.beta1.powi(t);
        let correct2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((theta, g), m), v) in p.values_mut().zip(g.values()).zip(m.values_mut()).zip(v.values_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / correct1;
                let v_hat = *v / correct2;
                *theta -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

pub fn adam_step(params: &mut [LayerParams], grads: &[LayerParams], state: &mut AdamState) -> Result<()> {
    state.step(params, grads)
}
