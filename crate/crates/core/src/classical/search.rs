use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Accepted deviation of a gap from `k * pri`, as a fraction of `pri`
    /// per elapsed period.
    pub tolerance_frac: f64,
    /// Largest gap, in periods, the search will bridge.
    pub max_missed: usize,
    /// Shortest chain a deinterleaver will extract.
    pub min_len: usize,
    /// Smallest ratio of found pulses to periods spanned for extraction.
    pub min_fill: f64,
    /// Floor of the refined tolerance used in the second pass.
    pub min_tolerance_frac: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            tolerance_frac: 0.15,
            max_missed: 3,
            min_len: 5,
            min_fill: 0.6,
            min_tolerance_frac: 0.02,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance_frac > 0.0 && self.tolerance_frac < 1.0) {
            return Err(Error::param("tolerance fraction must be in (0, 1)"));
        }
        if !(self.min_tolerance_frac > 0.0 && self.min_tolerance_frac <= self.tolerance_frac) {
            return Err(Error::param("minimum tolerance must be in (0, tolerance fraction]"));
        }
        if self.max_missed < 1 {
            return Err(Error::param("max missed periods must be at least 1"));
        }
        Ok(())
    }
}

/// Result of following one PRI hypothesis through the pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Sample indices of the best chain, time ordered; empty if no chain of
    /// at least two pulses exists.
    pub chain: Vec<usize>,
    /// `available` minus `chain`.
    pub remaining: Vec<usize>,
    /// Periods spanned by the chain (sum of the step multiples).
    pub periods: usize,
}

impl SearchOutcome {
    /// Fraction of expected pulses actually present.
    pub fn fill(&self) -> f64 {
        if self.chain.is_empty() {
            0.0
        } else {
            self.chain.len() as f64 / (self.periods + 1) as f64
        }
    }

    pub fn acceptable(&self, params: &SearchParams) -> bool {
        self.chain.len() >= params.min_len && self.fill() >= params.min_fill
    }
}

/// Follow a PRI forward from every available pulse and keep the best chain:
/// most pulses, then smallest accumulated relative deviation, then earliest
/// start. From each pulse the next one is the available pulse closest to
/// `t + k * pri` for the smallest `k <= max_missed` with any pulse inside
/// `± tolerance_frac * pri`.
///
/// When the first chain has at least three single-period gaps, the search
/// is repeated with the median of those gaps as PRI and a tolerance of
/// three robust standard deviations, clamped to
/// `[min_tolerance_frac, tolerance_frac]`. A train with a steady PRI then
/// no longer absorbs a neighbour whose PRI is close to a multiple.
pub fn sequence_search(toas: &[f64], available: &[usize], pri: f64, params: &SearchParams) -> Result<SearchOutcome> {
    if !(pri > 0.0 && pri.is_finite()) {
        return Err(Error::param("PRI must be positive"));
    }
    params.validate()?;
    let times: Vec<f64> = available.iter().map(|&i| toas[i]).collect();

    let (chain, periods) = best_chain(&times, pri, params.tolerance_frac, params);
    let (chain, periods) = match refine(&times, &chain, pri, params) {
        Some((pri2, tol2)) => best_chain(&times, pri2, tol2, params),
        None => (chain, periods),
    };

    let chain_set: Vec<usize> = chain.iter().map(|&p| available[p]).collect();
    let mut in_chain = vec![false; available.len()];
    for &p in &chain {
        in_chain[p] = true;
    }
    let remaining = available
        .iter()
        .zip(&in_chain)
        .filter(|(_, &c)| !c)
        .map(|(&i, _)| i)
        .collect();
    Ok(SearchOutcome {
        chain: chain_set,
        remaining,
        periods,
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Refined `(pri, tolerance_frac)` from the single-period gaps of `chain`.
fn refine(times: &[f64], chain: &[usize], pri: f64, params: &SearchParams) -> Option<(f64, f64)> {
    let lo = (1.0 - params.tolerance_frac) * pri;
    let hi = (1.0 + params.tolerance_frac) * pri;
    let mut gaps: Vec<f64> = chain
        .windows(2)
        .map(|w| times[w[1]] - times[w[0]])
        .filter(|g| (lo..=hi).contains(g))
        .collect();
    if gaps.len() < 3 {
        return None;
    }
    let center = median(&mut gaps);
    let mut dev: Vec<f64> = gaps.iter().map(|g| (g - center).abs()).collect();
    let sigma = 1.4826 * median(&mut dev) / center;
    let tol = (3.0 * sigma).clamp(params.min_tolerance_frac, params.tolerance_frac);
    Some((center, tol))
}

/// Best chain over all starting pulses as positions into `times`, with the
/// periods it spans; empty if no chain has two pulses.
fn best_chain(times: &[f64], pri: f64, tol_frac: f64, params: &SearchParams) -> (Vec<usize>, usize) {
    let mut best: Option<(Vec<usize>, f64, usize)> = None;
    for start in 0..times.len() {
        let (chain, dev, periods) = follow(times, start, pri, tol_frac, params.max_missed);
        if chain.len() < 2 {
            continue;
        }
        let better = match &best {
            None => true,
            Some((b, bdev, _)) => chain.len() > b.len() || (chain.len() == b.len() && dev < *bdev),
        };
        if better {
            best = Some((chain, dev, periods));
        }
    }

    best.map_or((Vec::new(), 0), |(chain, _, periods)| (chain, periods))
}

fn follow(times: &[f64], start: usize, pri: f64, tol_frac: f64, max_missed: usize) -> (Vec<usize>, f64, usize) {
    let mut chain = vec![start];
    let mut dev_sum = 0.0;
    let mut periods = 0usize;
    let mut cur = start;
    'step: loop {
        let t = times[cur];
        for k in 1..=max_missed {
            let target = t + k as f64 * pri;
            let tol = tol_frac * pri;
            let lo = times.partition_point(|&x| x < target - tol);
            let mut pick: Option<(usize, f64)> = None;
            for (j, &x) in times.iter().enumerate().skip(lo.max(cur + 1)) {
                if x > target + tol {
                    break;
                }
                let d = (x - target).abs();
                if pick.is_none_or(|(_, pd)| d < pd) {
                    pick = Some((j, d));
                }
            }
            if let Some((j, d)) = pick {
                chain.push(j);
                dev_sum += d / pri;
                periods += k;
                cur = j;
                continue 'step;
            }
        }
        break;
    }
    (chain, dev_sum, periods)
}
