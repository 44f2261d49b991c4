use crate::error::{Error, Result};

/// Bootstrapped λ-returns by backward recursion:
/// `R_t = r_t + gamma c_t ((1 - lambda) V_{t+1} + lambda R_{t+1})`, with
/// `R_T = V_T`. `values` has one more entry than `rewards`.
pub fn lambda_returns(rewards: &[f64], cont: &[f64], values: &[f64], lambda: f64, gamma: f64) -> Result<Vec<f64>> {
    let t_len = rewards.len();
    if cont.len() != t_len || values.len() != t_len + 1 {
        return Err(Error::Length(format!(
            "{} rewards, {} continuation flags, {} values",
            t_len,
            cont.len(),
            values.len()
        )));
    }
    let mut out = vec![0.0; t_len];
    let mut next = values[t_len];
    for t in (0..t_len).rev() {
        next = rewards[t] + gamma * cont[t] * ((1.0 - lambda) * values[t + 1] + lambda * next);
        out[t] = next;
    }
    Ok(out)
}

/// Percentile with linear interpolation between closest ranks.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Exponential moving average of the 5th-95th percentile range of returns.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnNormalizer {
    scale: f64,
    decay: f64,
}

impl ReturnNormalizer {
    pub fn new(decay: f64) -> Self {
        Self { scale: 0.0, decay }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// Divisor applied to advantages.
    pub fn denominator(&self) -> f64 {
        self.scale.max(1.0)
    }

    pub fn update(&mut self, returns: &[f64]) -> Result<f64> {
        if returns.is_empty() {
            return Err(Error::NotEnoughData { have: 0, need: 1 });
        }
        if returns.iter().any(|r| r.is_nan()) {
            return Err(Error::NanInput);
        }
        let mut sorted = returns.to_vec();
        sorted.sort_by(f64::total_cmp);
        let range = percentile(&sorted, 0.95) - percentile(&sorted, 0.05);
        self.scale = self.decay * self.scale + (1.0 - self.decay) * range;
        Ok(self.scale)
    }
}
