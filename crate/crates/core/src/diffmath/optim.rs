use super::params::ParameterSet;
use crate::error::{Error, Result};

/// Adaptive-moment optimizer with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale the joint gradient when its L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: None,
        }
    }

    pub fn with_clip(mut self, clip: f64) -> Self {
        self.clip_norm = Some(clip);
        self
    }

    /// Applies one update to every parameter, zeroes gradients and bumps
    /// each step counter. Fails if any parameter never received a gradient.
    pub fn step(&self, params: &mut ParameterSet) -> Result<()> {
        if let Some(p) = params.iter().find(|p| !p.has_grad) {
            return Err(Error::MissingGradients(p.name.clone()));
        }
        let mut scale = 1.0;
        if let Some(clip) = self.clip_norm {
            let norm = params
                .iter()
                .flat_map(|p| p.grad.iter())
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            if !norm.is_finite() {
                return Err(Error::NonFinite("optimizer gradient norm"));
            }
            if norm > clip {
                scale = clip / norm;
            }
        }
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let p = params.param_mut(id);
            p.step += 1;
            let t = p.step as i32;
            let bc1 = 1.0 - self.beta1.powi(t);
            let bc2 = 1.0 - self.beta2.powi(t);
            let data = p.value.data_mut();
            for i in 0..data.len() {
                let g = p.grad[i] * scale;
                p.m[i] = self.beta1 * p.m[i] + (1.0 - self.beta1) * g;
                p.v[i] = self.beta2 * p.v[i] + (1.0 - self.beta2) * g * g;
                let mh = p.m[i] / bc1;
                let vh = p.v[i] / bc2;
                data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
            p.grad.iter_mut().for_each(|g| *g = 0.0);
            p.has_grad = false;
        }
        Ok(())
    }
}
