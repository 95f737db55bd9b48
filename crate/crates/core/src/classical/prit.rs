use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::assignment::ClusterSet;
use crate::error::Result;
use crate::sequence::PulseSequence;

use super::histogram::Binning;
use super::{ClassicalMethod, ClassicalParams, Deinterleaved, Extraction};

/// Complex PRI spectrum: per difference bin, the sum of
/// `exp(2 pi i t_n / (t_n - t_m))` over pulse pairs `m < n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriSpectrum {
    pub binning: Binning,
    pub tau_max: f64,
    bins: BTreeMap<usize, SpectrumBin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct SpectrumBin {
    sum: Complex64,
    pairs: usize,
    tau_sum: f64,
}

impl PriSpectrum {
    pub fn magnitude(&self, k: usize) -> f64 {
        self.bins.get(&k).map_or(0.0, |b| b.sum.norm())
    }

    pub fn magnitude_at(&self, tau: f64) -> f64 {
        self.binning.index(tau).map_or(0.0, |k| self.magnitude(k))
    }

    /// Number of pairs whose difference fell in bin `k`.
    pub fn pairs(&self, k: usize) -> usize {
        self.bins.get(&k).map_or(0, |b| b.pairs)
    }

    pub fn mean_tau(&self, k: usize) -> Option<f64> {
        self.bins
            .get(&k)
            .filter(|b| b.pairs > 0)
            .map(|b| b.tau_sum / b.pairs as f64)
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// `(bin lower edge, magnitude)` rows, ascending.
    pub fn rows(&self) -> Vec<(f64, f64)> {
        self.bins
            .iter()
            .map(|(&k, b)| (self.binning.lower(k), b.sum.norm()))
            .collect()
    }

    /// Local maxima of the magnitude, strongest first.
    fn peaks(&self) -> Vec<usize> {
        let mut peaks: Vec<usize> = self
            .bins
            .keys()
            .copied()
            .filter(|&k| {
                let m = self.magnitude(k);
                m > 0.0 && (k == 0 || self.magnitude(k - 1) < m) && self.magnitude(k + 1) <= m
            })
            .collect();
        peaks.sort_by(|&a, &b| self.magnitude(b).total_cmp(&self.magnitude(a)).then(a.cmp(&b)));
        peaks
    }
}

pub fn prit_spectrum(toas: &[f64], binning: Binning, tau_max: f64) -> Result<PriSpectrum> {
    binning.validate()?;
    let mut bins: BTreeMap<usize, SpectrumBin> = BTreeMap::new();
    for n in 1..toas.len() {
        for m in (0..n).rev() {
            let tau = toas[n] - toas[m];
            if tau > tau_max {
                break;
            }
            if tau <= 0.0 {
                continue;
            }
            if let Some(k) = binning.index(tau) {
                let b = bins.entry(k).or_default();
                b.sum += Complex64::from_polar(1.0, TAU * toas[n] / tau);
                b.pairs += 1;
                b.tau_sum += tau;
            }
        }
    }
    Ok(PriSpectrum {
        binning,
        tau_max,
        bins,
    })
}

/// PRI-transform deinterleaver.
pub fn prit(seq: &PulseSequence, params: &ClassicalParams) -> Result<ClusterSet> {
    prit_detailed(seq, params).map(|d| d.clusters)
}

/// Candidates are spectrum peaks with magnitude at least
/// `coherence * pairs`, `occupancy * T / tau` and `min_len - 1`, tried
/// strongest first; the spectrum is recomputed after every extraction.
pub fn prit_detailed(seq: &PulseSequence, params: &ClassicalParams) -> Result<Deinterleaved> {
    params.search.validate()?;
    let mut ex = Extraction::new(seq.toas());
    'restart: loop {
        let toas = ex.remaining_toas();
        if toas.len() < params.search.min_len {
            break;
        }
        let observed = toas[toas.len() - 1] - toas[0];
        let spectrum = prit_spectrum(&toas, params.binning, params.tau_max)?;
        for k in spectrum.peaks() {
            let Some(pri) = spectrum.mean_tau(k) else { continue };
            let mag = spectrum.magnitude(k);
            let floor = (params.prit_coherence * spectrum.pairs(k) as f64)
                .max(params.prit_occupancy * observed / pri)
                .max(params.search.min_len as f64 - 1.0);
            if mag < floor {
                continue;
            }
            if ex.try_extract(pri, mag, ClassicalMethod::Prit, &params.search)? {
                continue 'restart;
            }
        }
        break;
    }
    ex.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn train(pri: f64, start: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| start + pri * i as f64).collect()
    }

    /// Straight sum over all pairs with a difference in `[lo, hi)`.
    fn direct(toas: &[f64], lo: f64, hi: f64) -> f64 {
        let mut s = Complex64::new(0.0, 0.0);
        for n in 0..toas.len() {
            for m in 0..n {
                let tau = toas[n] - toas[m];
                if tau >= lo && tau < hi {
                    s += Complex64::from_polar(1.0, TAU * toas[n] / tau);
                }
            }
        }
        s.norm()
    }

    #[test]
    fn subharmonic_is_suppressed() {
        let toas = train(500.0, 0.0, 50);
        let s = prit_spectrum(&toas, Binning::default(), 1100.0).unwrap();
        let b = Binning::default();
        let k = b.index(500.0).unwrap();
        let peak = s.magnitude(k);
        assert!((peak - direct(&toas, b.lower(k), b.upper(k))).abs() < 1e-9);
        assert!((peak - 49.0).abs() < 1e-9);
        let k2 = b.index(1000.0).unwrap();
        let double = s.magnitude(k2);
        assert!((double - direct(&toas, b.lower(k2), b.upper(k2))).abs() < 1e-9);
        assert!(double < 0.1 * peak);
        assert_eq!(s.peaks()[0], k);
    }

    #[test]
    fn two_trains_give_two_peaks() {
        let mut toas = train(300.0, 0.0, 20);
        toas.extend(train(700.0, 50.0, 20));
        toas.sort_by(f64::total_cmp);
        let s = prit_spectrum(&toas, Binning::default(), 1100.0).unwrap();
        let b = Binning::default();
        let top: Vec<usize> = s.peaks().into_iter().take(2).collect();
        let mut expect = vec![b.index(300.0).unwrap(), b.index(700.0).unwrap()];
        expect.sort();
        let mut got = top.clone();
        got.sort();
        assert_eq!(got, expect);
    }

    #[test]
    fn deinterleaves_two_trains() {
        let mut toas = train(300.0, 0.0, 20);
        toas.extend(train(700.0, 50.0, 20));
        toas.sort_by(f64::total_cmp);
        let seq = PulseSequence::unlabeled(toas.clone()).unwrap();
        let d = prit_detailed(&seq, &ClassicalParams::default()).unwrap();
        assert_eq!(d.clusters.chains().len(), 2);
        for chain in d.clusters.chains() {
            let gaps: Vec<f64> = chain.windows(2).map(|w| toas[w[1]] - toas[w[0]]).collect();
            assert!(gaps.iter().all(|g| *g == gaps[0]));
        }
    }

    #[test]
    fn single_pulse() {
        let s = prit_spectrum(&[1.0], Binning::default(), 1100.0).unwrap();
        assert!(s.is_empty());
        let seq = PulseSequence::unlabeled(vec![1.0]).unwrap();
        assert_eq!(prit(&seq, &ClassicalParams::default()).unwrap().chains(), &[vec![0]]);
    }

    #[test]
    fn single_train_one_chain() {
        let seq = PulseSequence::unlabeled(train(500.0, 10.0, 30)).unwrap();
        let c = prit(&seq, &ClassicalParams::default()).unwrap();
        assert_eq!(c.chains(), &[(0..30).collect::<Vec<_>>()]);
    }
}
