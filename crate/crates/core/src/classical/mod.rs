//! Histogram-based deinterleavers that need no training: cumulative (CDIF)
//! and sequential (SDIF) difference histograms, and the PRI transform.
//!
//! All three share the same outer loop: estimate PRI candidates from the
//! pulses that are still unassigned, follow the best candidate through the
//! pulse train with [`sequence_search`], extract the chain, and repeat.
//! Pulses never claimed by a chain end up as singletons.

mod difference;
mod histogram;
mod prit;
mod search;

pub use difference::{cdif, cdif_detailed, sdif, sdif_detailed};
pub use histogram::{toa_diff_histogram, Binning, DiffHistogram};
pub use prit::{prit, prit_detailed, prit_spectrum, PriSpectrum};
pub use search::{sequence_search, SearchOutcome, SearchParams};

use serde::{Deserialize, Serialize};

use crate::assignment::ClusterSet;
use crate::error::Result;
use crate::sequence::PulseSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicalMethod {
    Cdif,
    Sdif,
    Prit,
}

impl ClassicalMethod {
    pub fn name(self) -> &'static str {
        match self {
            ClassicalMethod::Cdif => "cdif",
            ClassicalMethod::Sdif => "sdif",
            ClassicalMethod::Prit => "prit",
        }
    }
}

/// A PRI the method committed to, with the evidence behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct PriEstimate {
    pub pri: f64,
    /// Histogram count or spectrum magnitude at the candidate bin.
    pub score: f64,
    pub source: ClassicalMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deinterleaved {
    pub clusters: ClusterSet,
    /// One estimate per extracted chain, in extraction order.
    pub estimates: Vec<PriEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalParams {
    pub binning: Binning,
    pub tau_max: f64,
    pub max_level: usize,
    /// CDIF threshold `b * N / c`.
    pub cdif_b: f64,
    /// SDIF threshold `a * E * exp(-tau / (k * tau_max))`.
    pub sdif_a: f64,
    pub sdif_k: f64,
    /// PRIT: minimum ratio of coherent magnitude to pair count in a bin.
    pub prit_coherence: f64,
    /// PRIT: minimum magnitude as a fraction of `observation / tau`.
    pub prit_occupancy: f64,
    pub search: SearchParams,
}

impl Default for ClassicalParams {
    fn default() -> Self {
        Self {
            binning: Binning::default(),
            tau_max: 1100.0,
            max_level: 6,
            cdif_b: 0.15,
            sdif_a: 0.2,
            sdif_k: 0.2,
            prit_coherence: 0.5,
            prit_occupancy: 0.3,
            search: SearchParams::default(),
        }
    }
}

pub fn deinterleave(method: ClassicalMethod, seq: &PulseSequence, params: &ClassicalParams) -> Result<ClusterSet> {
    match method {
        ClassicalMethod::Cdif => cdif(seq, params),
        ClassicalMethod::Sdif => sdif(seq, params),
        ClassicalMethod::Prit => prit(seq, params),
    }
}

/// Bookkeeping shared by the extraction loops.
pub(crate) struct Extraction<'a> {
    toas: &'a [f64],
    remaining: Vec<usize>,
    chains: Vec<Vec<usize>>,
    estimates: Vec<PriEstimate>,
}

impl<'a> Extraction<'a> {
    fn new(toas: &'a [f64]) -> Self {
        Self {
            toas,
            remaining: (0..toas.len()).collect(),
            chains: Vec::new(),
            estimates: Vec::new(),
        }
    }

    fn remaining_toas(&self) -> Vec<f64> {
        self.remaining.iter().map(|&i| self.toas[i]).collect()
    }

    /// Search `pri` among the remaining pulses; extract on success.
    fn try_extract(&mut self, pri: f64, score: f64, source: ClassicalMethod, params: &SearchParams) -> Result<bool> {
        let out = sequence_search(self.toas, &self.remaining, pri, params)?;
        if !out.acceptable(params) {
            return Ok(false);
        }
        let span = self.toas[*out.chain.last().expect("non-empty")] - self.toas[out.chain[0]];
        self.estimates.push(PriEstimate {
            pri: span / out.periods as f64,
            score,
            source,
        });
        self.chains.push(out.chain);
        self.remaining = out.remaining;
        Ok(true)
    }

    fn finish(self) -> Result<Deinterleaved> {
        let mut chains = self.chains;
        chains.extend(self.remaining.iter().map(|&i| vec![i]));
        Ok(Deinterleaved {
            clusters: ClusterSet::new(self.toas.len(), chains)?,
            estimates: self.estimates,
        })
    }
}
