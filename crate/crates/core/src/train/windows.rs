use crate::assignment::{labels_to_assignment, Link};
use crate::error::Result;
use crate::eval::window_input;
use crate::sequence::PulseSequence;
use crate::smcf::Sample;

/// Cut a labeled sequence into consecutive non-overlapping windows of at
/// most `seq_len` samples. A true link that leaves its window, or reaches
/// further than `lookahead`, becomes a terminal link inside the window.
pub fn training_windows(seq: &PulseSequence, seq_len: usize, lookahead: usize) -> Result<Vec<Sample>> {
    let links = labels_to_assignment(seq)?.links()?;
    let toas = seq.toas();
    let n = toas.len();
    let mut out = Vec::with_capacity(n.div_ceil(seq_len.max(1)));
    let mut start = 0;
    while start < n {
        let end = (start + seq_len).min(n);
        let y = links[start..end]
            .iter()
            .enumerate()
            .map(|(i, l)| match *l {
                Link::Next(j) if j < end && j - (start + i) <= lookahead => Link::Next(j - start),
                _ => Link::Terminal,
            })
            .collect();
        out.push(Sample {
            x: window_input(&toas[start..end])?,
            y,
        });
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Link::*;

    #[test]
    fn links_crossing_a_boundary_become_terminal() {
        // labels: a b a b a b a
        let seq = PulseSequence::labeled((0..7).map(|i| i as f64 * 10.0).collect(), vec![0, 1, 0, 1, 0, 1, 0]).unwrap();
        let w = training_windows(&seq, 3, 64).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].y, vec![Next(2), Terminal, Terminal]);
        assert_eq!(w[1].y, vec![Next(2), Terminal, Terminal]);
        assert_eq!(w[2].y, vec![Terminal]);
        assert_eq!(w[0].x, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn lookahead_limits_links() {
        let seq = PulseSequence::labeled(vec![0.0, 1.0, 2.0, 3.0], vec![0, 1, 1, 0]).unwrap();
        let w = training_windows(&seq, 8, 2).unwrap();
        assert_eq!(w[0].y, vec![Terminal, Next(2), Terminal, Terminal]);
    }

    proptest::proptest! {
        #[test]
        fn every_pulse_is_covered_once(labels in proptest::collection::vec(0u32..4, 1..80), len in 1usize..20) {
            let toas: Vec<f64> = (0..labels.len()).map(|i| i as f64 * 3.0 + 1.0).collect();
            let seq = PulseSequence::labeled(toas, labels.clone()).unwrap();
            let w = training_windows(&seq, len, len).unwrap();
            let total: usize = w.iter().map(|s| s.x.len()).sum();
            proptest::prop_assert_eq!(total, labels.len());
            for s in &w {
                proptest::prop_assert!(s.x.len() <= len && s.x.len() == s.y.len());
                crate::assignment::validate_links(&s.y).unwrap();
            }
        }
    }
}
