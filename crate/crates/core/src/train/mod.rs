//! Mini-batch training of the attention model: Adam, fixed-length windows,
//! seeded shuffling and dropout, checkpoints and held-out early stopping.

mod adam;
mod trainer;
mod windows;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use trainer::{dataset_windows, sibling, train, train_samples, Progress, TrainOutcome, Trainer};
pub use windows::training_windows;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Decode;
use crate::smcf::LossWeights;

/// Optimisation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    /// Steps over which the rate ramps linearly up to `lr`; 0 starts at `lr`.
    #[serde(default)]
    pub warmup_steps: u64,
    pub batch_size: usize,
    /// Passes over the training windows.
    pub epochs: usize,
    /// Stop after this many optimizer steps even mid-epoch.
    pub max_steps: Option<u64>,
    pub weights: LossWeights,
    /// Steps over which the penalty weights ramp linearly from zero up to
    /// `weights`; 0 applies them in full from the first step.
    #[serde(default)]
    pub penalty_ramp_steps: u64,
    /// Train on cross-entropy alone; the penalties are still logged.
    pub baseline: bool,
    pub seed: u64,
    /// Steps between rolling checkpoints; 0 disables them.
    pub checkpoint_every: u64,
    pub adam: AdamHyper,
    /// Steps between held-out evaluations; 0 evaluates once per epoch.
    pub val_every: u64,
    /// Evaluations without improvement before stopping; 0 never stops early.
    pub patience: usize,
    pub val_decode: Decode,
}

impl TrainConfig {
    /// Base rate 1e-4, batches of 128.
    pub fn paper() -> Self {
        Self {
            lr: 1e-4,
            warmup_steps: 0,
            batch_size: 128,
            epochs: 10,
            max_steps: None,
            weights: LossWeights::PAPER,
            penalty_ramp_steps: 0,
            baseline: false,
            seed: 0,
            checkpoint_every: 1000,
            adam: AdamHyper::default(),
            val_every: 0,
            patience: 0,
            val_decode: Decode::Lp,
        }
    }

    /// Batches of 32 and a higher, warmed-up rate suited to the small model.
    pub fn desk() -> Self {
        Self {
            lr: 1e-3,
            warmup_steps: 1000,
            batch_size: 32,
            epochs: 20,
            val_every: 0,
            patience: 4,
            checkpoint_every: 500,
            ..Self::paper()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::param(format!("unknown training preset `{other}` (desk, paper)"))),
        }
    }

    /// Rate used for the update that follows `step` completed steps.
    pub fn lr_at(&self, step: u64) -> f64 {
        if step >= self.warmup_steps {
            self.lr
        } else {
            self.lr * (step + 1) as f64 / self.warmup_steps as f64
        }
    }

    /// Weights that enter the optimised total once any ramp is over.
    pub fn effective_weights(&self) -> LossWeights {
        if self.baseline {
            LossWeights::BASELINE
        } else {
            self.weights
        }
    }

    /// Weights for the update that follows `step` completed steps.
    pub fn weights_at(&self, step: u64) -> LossWeights {
        let w = self.effective_weights();
        if step >= self.penalty_ramp_steps {
            return w;
        }
        let f = step as f64 / self.penalty_ramp_steps as f64;
        LossWeights {
            lambda2: w.lambda2 * f,
            lambda3: w.lambda3 * f,
            lambda4: w.lambda4 * f,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::param("lr must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size must be at least 1"));
        }
        if self.epochs == 0 && self.max_steps.is_none() {
            return Err(Error::param("need epochs >= 1 or a step budget"));
        }
        self.weights.validate()?;
        self.adam.validate()
    }
}
