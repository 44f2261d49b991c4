use crate::error::{Error, Result};

pub fn symlog(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

pub fn symexp(x: f64) -> f64 {
    x.signum() * x.abs().exp_m1()
}

/// Exponentially spaced bins for regressing real values with a softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoHotSpec {
    centers: Vec<f64>,
}

impl Default for TwoHotSpec {
    fn default() -> Self {
        Self::symexp_grid(41, 20.0)
    }
}

impl TwoHotSpec {
    /// `symexp(linspace(-range, range, bins))`; `bins` must be odd.
    pub fn symexp_grid(bins: usize, range: f64) -> Self {
        assert!(bins >= 3 && bins % 2 == 1, "bin count must be odd and at least 3");
        let half = (bins / 2) as f64;
        let centers = (0..bins)
            .map(|i| {
                let x = (i as f64 - half) / half * range;
                symexp(x)
            })
            .collect();
        Self { centers }
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Index of the zero-valued center bin.
    pub fn center_bin(&self) -> usize {
        self.centers.len() / 2
    }

    /// Mass on the two bins bracketing `v` (clamped to the grid range).
    pub fn encode(&self, v: f64) -> Result<Vec<f64>> {
        let mut w = vec![0.0; self.len()];
        let (j, a) = self.locate(v)?;
        w[j] += 1.0 - a;
        if a > 0.0 {
            w[j + 1] += a;
        }
        Ok(w)
    }

    /// Writes the encoding of `v` into `out` (length = bin count).
    pub fn encode_into(&self, v: f64, out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|x| *x = 0.0);
        let (j, a) = self.locate(v)?;
        out[j] += 1.0 - a;
        if a > 0.0 {
            out[j + 1] += a;
        }
        Ok(())
    }

    /// Lower bracketing bin and the interpolation weight of the upper one.
    fn locate(&self, v: f64) -> Result<(usize, f64)> {
        if v.is_nan() {
            return Err(Error::NanInput);
        }
        let c = &self.centers;
        let last = c.len() - 1;
        if v <= c[0] {
            return Ok((0, 0.0));
        }
        if v >= c[last] {
            return Ok((last, 0.0));
        }
        // first index with center > v; v lies in [c[j-1], c[j])
        let hi = c.partition_point(|&x| x <= v);
        let lo = hi - 1;
        if c[lo] == v {
            return Ok((lo, 0.0));
        }
        Ok((lo, (v - c[lo]) / (c[hi] - c[lo])))
    }

    /// Expected value under the bin weights.
    pub fn decode(&self, weights: &[f64]) -> Result<f64> {
        if weights.len() != self.len() {
            return Err(Error::Length(format!(
                "{} weights for {} bins",
                weights.len(),
                self.len()
            )));
        }
        if weights.iter().any(|w| w.is_nan()) {
            return Err(Error::NanInput);
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized { group: 0, sum });
        }
        Ok(weights.iter().zip(&self.centers).map(|(w, c)| w * c).sum())
    }
}
