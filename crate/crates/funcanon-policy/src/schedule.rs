use crate::{PolicyError, Result};
use serde::{Deserialize, Serialize};

/// Linear-beta DDPM schedule with a strided subset used at inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    pub t_train: usize,
    pub t_infer: usize,
    pub betas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn linear(t_train: usize, t_infer: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if t_train == 0 {
            return Err(PolicyError::BadSchedule("t_train must be positive".into()));
        }
        if t_infer == 0 || t_infer > t_train || t_train % t_infer != 0 {
            return Err(PolicyError::BadSchedule(format!(
                "t_infer must divide t_train; got {t_infer} / {t_train}"
            )));
        }
        if !(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0) {
            return Err(PolicyError::BadSchedule(format!(
                "betas must satisfy 0 < start <= end < 1; got [{beta_start}, {beta_end}]"
            )));
        }
        let mut betas = Vec::with_capacity(t_train);
        for i in 0..t_train {
            let f = if t_train == 1 {
                0.0
            } else {
                i as f64 / (t_train - 1) as f64
            };
            betas.push(beta_start + (beta_end - beta_start) * f);
        }
        let mut alpha_bars = Vec::with_capacity(t_train);
        let mut product = 1.0;
        for beta in &betas {
            product *= 1.0 - beta;
            alpha_bars.push(product);
        }
        Ok(DiffusionSchedule {
            t_train,
            t_infer,
            betas,
            alpha_bars,
        })
    }

    pub fn from_config(config: &crate::PolicyConfig) -> Result<Self> {
        Self::linear(
            config.t_train,
            config.t_infer,
            config.beta_start,
            config.beta_end,
        )
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.alpha_bars
            .get(t)
            .copied()
            .ok_or(PolicyError::BadTimestep {
                t,
                t_train: self.t_train,
            })
    }

    /// Inference timesteps, descending: every (t_train / t_infer)-th index.
    pub fn inference_steps(&self) -> Vec<usize> {
        let stride = self.t_train / self.t_infer;
        (0..self.t_infer).rev().map(|i| i * stride).collect()
    }
}

/// Forward noising: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
pub fn q_sample(
    x0: &[f64],
    t: usize,
    noise: &[f64],
    schedule: &DiffusionSchedule,
) -> Result<Vec<f64>> {
    if noise.len() != x0.len() {
        return Err(PolicyError::DimMismatch {
            expected: x0.len(),
            got: noise.len(),
        });
    }
    let abar = schedule.alpha_bar(t)?;
    let signal = abar.sqrt();
    let spread = (1.0 - abar).sqrt();
    Ok(x0
        .iter()
        .zip(noise)
        .map(|(x, n)| signal * x + spread * n)
        .collect())
}
