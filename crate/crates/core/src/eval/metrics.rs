use crate::assignment::{AssignmentMatrix, ClusterSet, Link};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Chains with more than this many pulses count as a radar.
pub const RADAR_MIN_EXCLUSIVE: usize = 3;

/// Fraction of rows whose predicted link matches the true link; the
/// terminal counts as a position.
pub fn acc_link(pred: &AssignmentMatrix, truth: &AssignmentMatrix) -> Result<f64> {
    if pred.n() != truth.n() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} rows, truth has {}",
            pred.n(),
            truth.n()
        )));
    }
    let n = pred.n();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(link_agreement(&pred.links()?, &truth.links()?) as f64 / n as f64)
}

pub(crate) fn link_agreement(pred: &[Link], truth: &[Link]) -> usize {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count()
}

/// 1 if both partitions contain the same number of chains longer than
/// three, else 0.
pub fn acc_nor(pred: &ClusterSet, truth: &ClusterSet) -> Result<f64> {
    if pred.n() != truth.n() {
        return Err(Error::ShapeMismatch(format!(
            "prediction covers {} pulses, truth {}",
            pred.n(),
            truth.n()
        )));
    }
    let same = pred.count_larger_than(RADAR_MIN_EXCLUSIVE) == truth.count_larger_than(RADAR_MIN_EXCLUSIVE);
    Ok(if same { 1.0 } else { 0.0 })
}

/// One-to-many violations of the row-wise argmax: for every non-terminal
/// column, the number of rows pointing at it beyond the first.
pub fn v_one_to_many<T: Real>(raw: &AssignmentMatrix<T>) -> f64 {
    violations_of_links(&raw.argmax_links(), raw.n()) as f64
}

pub(crate) fn violations_of_links(links: &[Link], n: usize) -> usize {
    let mut hits = vec![0usize; n];
    for l in links {
        if let Link::Next(j) = l {
            hits[*j] += 1;
        }
    }
    hits.iter().map(|&h| h.saturating_sub(1)).sum()
}
