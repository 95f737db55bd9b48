use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Mapping from a time difference to a histogram bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Binning {
    /// Bins `[k w, (k + 1) w)`.
    Linear { width: f64 },
    /// Bins `[min r^k, min r^(k+1))`; differences below `min` are dropped.
    Geometric { ratio: f64, min: f64 },
}

impl Default for Binning {
    fn default() -> Self {
        Binning::Geometric {
            ratio: 1.01,
            min: 1.0,
        }
    }
}

impl Binning {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Binning::Linear { width } if width > 0.0 && width.is_finite() => Ok(()),
            Binning::Geometric { ratio, min } if ratio > 1.0 && min > 0.0 && ratio.is_finite() => Ok(()),
            other => Err(Error::param(format!("invalid binning {other:?}"))),
        }
    }

    pub fn index(&self, tau: f64) -> Option<usize> {
        if !(tau >= 0.0) {
            return None;
        }
        match *self {
            Binning::Linear { width } => Some((tau / width).floor() as usize),
            Binning::Geometric { ratio, min } => {
                if tau < min {
                    None
                } else {
                    Some(((tau / min).ln() / ratio.ln()).floor() as usize)
                }
            }
        }
    }

    pub fn lower(&self, k: usize) -> f64 {
        match *self {
            Binning::Linear { width } => k as f64 * width,
            Binning::Geometric { ratio, min } => min * ratio.powi(k as i32),
        }
    }

    pub fn upper(&self, k: usize) -> f64 {
        self.lower(k + 1)
    }

    pub fn center(&self, k: usize) -> f64 {
        0.5 * (self.lower(k) + self.upper(k))
    }

    pub fn width(&self, k: usize) -> f64 {
        self.upper(k) - self.lower(k)
    }
}

/// Counts of ToA differences at one difference level (or accumulated
/// over several levels).
#[derive(Debug, Clone, PartialEq)]
pub struct DiffHistogram {
    pub level: usize,
    pub binning: Binning,
    pub tau_max: f64,
    bins: BTreeMap<usize, BinStat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct BinStat {
    count: usize,
    sum: f64,
}

impl DiffHistogram {
    pub fn empty(level: usize, binning: Binning, tau_max: f64) -> Self {
        Self {
            level,
            binning,
            tau_max,
            bins: BTreeMap::new(),
        }
    }

    pub fn count(&self, k: usize) -> usize {
        self.bins.get(&k).map_or(0, |b| b.count)
    }

    pub fn count_at(&self, tau: f64) -> usize {
        self.binning.index(tau).map_or(0, |k| self.count(k))
    }

    /// Mean of the differences that landed in bin `k`.
    pub fn mean(&self, k: usize) -> Option<f64> {
        self.bins
            .get(&k)
            .filter(|b| b.count > 0)
            .map(|b| b.sum / b.count as f64)
    }

    pub fn total(&self) -> usize {
        self.bins.values().map(|b| b.count).sum()
    }

    /// Non-empty bins in ascending order as `(bin index, count)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bins.iter().map(|(&k, b)| (k, b.count))
    }

    /// `(bin lower edge, count)` rows for CSV export.
    pub fn rows(&self) -> Vec<(f64, usize)> {
        self.iter().map(|(k, c)| (self.binning.lower(k), c)).collect()
    }

    pub fn accumulate(&mut self, other: &DiffHistogram) {
        for (k, b) in &other.bins {
            let e = self.bins.entry(*k).or_default();
            e.count += b.count;
            e.sum += b.sum;
        }
        self.level = self.level.max(other.level);
    }

    fn add(&mut self, tau: f64) {
        if tau > self.tau_max {
            return;
        }
        if let Some(k) = self.binning.index(tau) {
            let e = self.bins.entry(k).or_default();
            e.count += 1;
            e.sum += tau;
        }
    }

    /// Bins above `threshold(center)` that are not smaller than either
    /// neighbour, ascending. Plateaus report their first bin.
    pub fn peaks(&self, threshold: impl Fn(f64) -> f64) -> Vec<usize> {
        self.bins
            .iter()
            .filter(|(&k, b)| {
                let c = b.count;
                (c as f64) > threshold(self.binning.center(k))
                    && (k == 0 || self.count(k - 1) < c)
                    && self.count(k + 1) <= c
            })
            .map(|(&k, _)| k)
            .collect()
    }
}

/// Histogram of `toas[i + level] - toas[i]`. A level at or beyond the
/// sequence length yields an empty histogram.
pub fn toa_diff_histogram(toas: &[f64], level: usize, binning: Binning, tau_max: f64) -> Result<DiffHistogram> {
    if level < 1 {
        return Err(Error::param("difference level must be at least 1"));
    }
    binning.validate()?;
    let mut h = DiffHistogram::empty(level, binning, tau_max);
    if level < toas.len() {
        for i in 0..toas.len() - level {
            h.add(toas[i + level] - toas[i]);
        }
    }
    Ok(h)
}
