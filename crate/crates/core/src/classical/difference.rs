use crate::assignment::ClusterSet;
use crate::error::Result;
use crate::sequence::PulseSequence;

use super::histogram::{toa_diff_histogram, DiffHistogram};
use super::{ClassicalMethod, ClassicalParams, Deinterleaved, Extraction};

/// Cumulative difference histogram deinterleaver.
pub fn cdif(seq: &PulseSequence, params: &ClassicalParams) -> Result<ClusterSet> {
    cdif_detailed(seq, params).map(|d| d.clusters)
}

/// Sequential difference histogram deinterleaver.
pub fn sdif(seq: &PulseSequence, params: &ClassicalParams) -> Result<ClusterSet> {
    sdif_detailed(seq, params).map(|d| d.clusters)
}

pub fn cdif_detailed(seq: &PulseSequence, params: &ClassicalParams) -> Result<Deinterleaved> {
    run(seq, params, ClassicalMethod::Cdif)
}

pub fn sdif_detailed(seq: &PulseSequence, params: &ClassicalParams) -> Result<Deinterleaved> {
    run(seq, params, ClassicalMethod::Sdif)
}

fn run(seq: &PulseSequence, params: &ClassicalParams, method: ClassicalMethod) -> Result<Deinterleaved> {
    params.binning.validate()?;
    params.search.validate()?;
    let mut ex = Extraction::new(seq.toas());

    'restart: loop {
        let toas = ex.remaining_toas();
        if toas.len() < params.search.min_len {
            break;
        }
        let mut cumulative = DiffHistogram::empty(0, params.binning, params.tau_max);
        for level in 1..=params.max_level.min(toas.len() - 1) {
            let h = toa_diff_histogram(&toas, level, params.binning, params.tau_max)?;
            let candidates = match method {
                ClassicalMethod::Cdif => {
                    cumulative.accumulate(&h);
                    cdif_candidates(&cumulative, toas.len(), level, params)
                }
                _ => sdif_candidates(&h, &toas, level, params)?,
            };
            for (pri, score) in candidates {
                if ex.try_extract(pri, score, method, &params.search)? {
                    continue 'restart;
                }
            }
        }
        break;
    }
    ex.finish()
}

/// Largest count among bin `k` and its neighbours, so a peak straddling
/// a bin edge is not missed.
fn count_near(h: &DiffHistogram, tau: f64) -> usize {
    match h.binning.index(tau) {
        None => 0,
        Some(k) => (k.saturating_sub(1)..=k + 1).map(|j| h.count(j)).max().unwrap_or(0),
    }
}

/// Peaks of the accumulated histogram above `b * N / c`, ascending in
/// PRI. Except for a lone level-1 peak, the bin at twice the PRI must
/// pass too (when it lies inside the histogram range).
fn cdif_candidates(h: &DiffHistogram, n: usize, level: usize, params: &ClassicalParams) -> Vec<(f64, f64)> {
    let threshold = params.cdif_b * n as f64 / level as f64;
    let peaks = h.peaks(|_| threshold);
    let lone = level == 1 && peaks.len() == 1;
    peaks
        .into_iter()
        .filter_map(|k| {
            let pri = h.mean(k)?;
            let double = 2.0 * pri;
            let confirmed = lone || double > h.tau_max || count_near(h, double) as f64 > threshold;
            confirmed.then_some((pri, h.count(k) as f64))
        })
        .collect()
}

/// `a * E * exp(-tau / (k * tau_max))`, where `tau_max` plays the role of
/// bin count times bin width.
fn sdif_threshold(params: &ClassicalParams, differences: usize, tau: f64) -> f64 {
    params.sdif_a * differences as f64 * (-tau / (params.sdif_k * params.tau_max)).exp()
}

/// Peaks of the level's own histogram above the exponential threshold,
/// highest count first. A lone level-1 peak is only taken at once if level 2 shows
/// its double; otherwise the search falls through to level 2.
fn sdif_candidates(h: &DiffHistogram, toas: &[f64], level: usize, params: &ClassicalParams) -> Result<Vec<(f64, f64)>> {
    let e = toas.len() - level;
    let peaks = h.peaks(|tau| sdif_threshold(params, e, tau));
    let mut out: Vec<(f64, f64)> = peaks
        .into_iter()
        .filter_map(|k| h.mean(k).map(|pri| (pri, h.count(k) as f64)))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    if level == 1 && out.len() == 1 && toas.len() > 2 {
        let double = 2.0 * out[0].0;
        if double <= params.tau_max {
            let h2 = toa_diff_histogram(toas, 2, params.binning, params.tau_max)?;
            if (count_near(&h2, double) as f64) <= sdif_threshold(params, e - 1, double) {
                out.clear();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::labels_to_assignment;

    fn train(pri: f64, start: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| start + pri * i as f64).collect()
    }

    fn two_constants() -> PulseSequence {
        let mut pulses: Vec<(f64, u32)> = train(300.0, 0.0, 20).into_iter().map(|t| (t, 0)).collect();
        pulses.extend(train(700.0, 50.0, 20).into_iter().map(|t| (t, 1)));
        pulses.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (toas, labels) = pulses.into_iter().unzip();
        PulseSequence::labeled(toas, labels).unwrap()
    }

    type Method = fn(&PulseSequence, &ClassicalParams) -> Result<Deinterleaved>;
    const METHODS: [Method; 2] = [cdif_detailed, sdif_detailed];

    #[test]
    fn single_constant_train() {
        let seq = PulseSequence::unlabeled(train(500.0, 10.0, 30)).unwrap();
        for m in METHODS {
            let d = m(&seq, &ClassicalParams::default()).unwrap();
            assert_eq!(d.clusters.chains(), &[(0..30).collect::<Vec<_>>()]);
            assert_eq!(d.estimates.len(), 1);
            let b = ClassicalParams::default().binning;
            assert_eq!(b.index(d.estimates[0].pri), b.index(500.0));
        }
    }

    #[test]
    fn two_constant_trains_match_labels() {
        let seq = two_constants();
        let truth = labels_to_assignment(&seq).unwrap();
        for m in METHODS {
            let d = m(&seq, &ClassicalParams::default()).unwrap();
            assert_eq!(d.clusters.to_assignment(), truth);
            let mut pris: Vec<f64> = d.estimates.iter().map(|e| e.pri).collect();
            pris.sort_by(f64::total_cmp);
            assert!((pris[0] - 300.0).abs() < 1e-9 && (pris[1] - 700.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_pulse_is_singleton() {
        let seq = PulseSequence::unlabeled(vec![3.0]).unwrap();
        for m in METHODS {
            let d = m(&seq, &ClassicalParams::default()).unwrap();
            assert_eq!(d.clusters.chains(), &[vec![0]]);
        }
    }

    #[test]
    fn short_noise_stays_singletons() {
        let seq = PulseSequence::unlabeled(vec![0.0, 13.0, 170.0, 411.0]).unwrap();
        for m in METHODS {
            let d = m(&seq, &ClassicalParams::default()).unwrap();
            assert_eq!(d.clusters.chains().len(), 4);
        }
    }
}
