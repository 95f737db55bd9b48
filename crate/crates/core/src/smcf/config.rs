use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the attention model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Longest window the model accepts; also the number of position
    /// columns of the head.
    pub seq_len: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    /// Quantization levels over `[0, 1]`.
    pub n_quant: usize,
    /// Relative distances beyond this are clipped.
    pub rel_clip: usize,
    /// Links further ahead than this are masked out of the soft-max.
    pub lookahead: usize,
    /// Dropout rate on attention and feed-forward outputs during training.
    pub dropout: f64,
}

impl ModelConfig {
    /// Single-machine preset.
    pub fn desk() -> Self {
        Self {
            seq_len: 64,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 256,
            n_quant: 501,
            rel_clip: 16,
            lookahead: 64,
            dropout: 0.1,
        }
    }

    /// Full-size preset.
    pub fn paper() -> Self {
        Self {
            seq_len: 256,
            d_model: 512,
            n_layers: 12,
            n_heads: 8,
            d_ff: 2048,
            n_quant: 5001,
            rel_clip: 16,
            lookahead: 256,
            dropout: 0.1,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::param(format!("unknown model preset `{other}` (expected desk or paper)"))),
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Number of relative-position buckets, `2 * rel_clip + 1`.
    pub fn rel_buckets(&self) -> usize {
        2 * self.rel_clip + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.seq_len < 2 {
            return Err(Error::param("seq_len must be at least 2"));
        }
        if self.n_quant < 2 {
            return Err(Error::param("n_quant must be at least 2"));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::param("d_model must be a positive multiple of n_heads"));
        }
        if self.d_ff == 0 {
            return Err(Error::param("d_ff must be positive"));
        }
        if self.lookahead == 0 {
            return Err(Error::param("lookahead must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::param("dropout must be in [0, 1)"));
        }
        Ok(())
    }
}
