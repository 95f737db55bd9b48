//! Pulse sequences and their relative time-of-arrival view.
//!
//! Times are microseconds throughout. Arrival times are non-decreasing;
//! coincident arrivals are allowed and keep their stored order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Emitter identifier attached to a pulse.
pub type EmitterId = u32;

/// Time-ordered arrival times with optional ground-truth emitter labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    toas: Vec<f64>,
    labels: Option<Vec<EmitterId>>,
}

impl PulseSequence {
    pub fn new(toas: Vec<f64>, labels: Option<Vec<EmitterId>>) -> Result<Self> {
        if toas.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(i) = toas.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidSequence(format!("non-finite toa at index {i}")));
        }
        if let Some(i) = toas.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidSequence(format!(
                "toas decrease at index {}: {} < {}",
                i + 1,
                toas[i + 1],
                toas[i]
            )));
        }
        if let Some(l) = &labels {
            if l.len() != toas.len() {
                return Err(Error::InvalidSequence(format!(
                    "{} labels for {} toas",
                    l.len(),
                    toas.len()
                )));
            }
        }
        Ok(Self { toas, labels })
    }

    pub fn unlabeled(toas: Vec<f64>) -> Result<Self> {
        Self::new(toas, None)
    }

    pub fn labeled(toas: Vec<f64>, labels: Vec<EmitterId>) -> Result<Self> {
        Self::new(toas, Some(labels))
    }

    pub fn toas(&self) -> &[f64] {
        &self.toas
    }

    pub fn labels(&self) -> Option<&[EmitterId]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.toas.len()
    }

    /// Always false for a constructed sequence; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.toas.is_empty()
    }

    /// Contiguous sub-sequence `[start, end)`, labels included.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::param(format!(
                "slice [{start}, {end}) out of range for length {}",
                self.len()
            )));
        }
        Ok(Self {
            toas: self.toas[start..end].to_vec(),
            labels: self.labels.as_ref().map(|l| l[start..end].to_vec()),
        })
    }

    pub fn into_parts(self) -> (Vec<f64>, Option<Vec<EmitterId>>) {
        (self.toas, self.labels)
    }
}

/// First differences of a pulse sequence; the first element is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RtoaSequence {
    rtoas: Vec<f64>,
}

impl RtoaSequence {
    pub fn values(&self) -> &[f64] {
        &self.rtoas
    }

    pub fn len(&self) -> usize {
        self.rtoas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rtoas.is_empty()
    }
}

pub fn compute_rtoa(seq: &PulseSequence) -> RtoaSequence {
    RtoaSequence {
        rtoas: first_differences(seq.toas()),
    }
}

/// Relative arrival times straight from a slice of ToAs.
pub fn rtoa_from_toas(toas: &[f64]) -> Result<RtoaSequence> {
    if toas.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(RtoaSequence {
        rtoas: first_differences(toas),
    })
}

fn first_differences(toas: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(toas.len());
    out.push(0.0);
    out.extend(toas.windows(2).map(|w| w[1] - w[0]));
    out
}

/// Divide by the maximum so values land in `[0, 1]`. An all-zero input
/// stays all-zero.
pub fn normalize_sequence<T: Real>(values: &[T]) -> Vec<T> {
    let max = values.iter().copied().fold(T::zero(), T::max);
    if max <= T::zero() {
        return vec![T::zero(); values.len()];
    }
    values.iter().map(|&v| (v / max).max(T::zero())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(toas: &[f64]) -> PulseSequence {
        PulseSequence::unlabeled(toas.to_vec()).unwrap()
    }

    #[test]
    fn rtoa_examples() {
        assert_eq!(compute_rtoa(&seq(&[0.0, 5.0, 12.0, 20.0])).values(), &[0.0, 5.0, 7.0, 8.0]);
        assert_eq!(compute_rtoa(&seq(&[7.0])).values(), &[0.0]);
        assert_eq!(compute_rtoa(&seq(&[3.0, 3.0, 10.0])).values(), &[0.0, 0.0, 7.0]);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(matches!(PulseSequence::unlabeled(vec![]), Err(Error::EmptyInput)));
        assert!(matches!(rtoa_from_toas(&[]), Err(Error::EmptyInput)));
        assert_eq!(Error::EmptyInput.to_string(), "empty input");
    }

    #[test]
    fn decreasing_and_mislabeled_are_rejected() {
        assert!(PulseSequence::unlabeled(vec![1.0, 0.5]).is_err());
        assert!(PulseSequence::labeled(vec![1.0, 2.0], vec![0]).is_err());
        assert!(PulseSequence::unlabeled(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_sequence(&[0.0, 5.0, 10.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize_sequence(&[0.0f64, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(normalize_sequence(&[2.0f32]), vec![1.0f32]);
    }

    proptest! {
        #[test]
        fn rtoa_preserves_length_and_sign(mut toas in prop::collection::vec(0.0f64..1e6, 1..80)) {
            toas.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let r = compute_rtoa(&seq(&toas));
            prop_assert_eq!(r.len(), toas.len());
            prop_assert_eq!(r.values()[0], 0.0);
            prop_assert!(r.values().iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn normalized_values_in_unit_interval(v in prop::collection::vec(0.0f64..1e4, 1..50)) {
            let n = normalize_sequence(&v);
            prop_assert!(n.iter().all(|&x| (0.0..=1.0).contains(&x)));
            if v.iter().any(|&x| x > 0.0) {
                prop_assert!(n.iter().any(|&x| x == 1.0));
            }
        }
    }
}
