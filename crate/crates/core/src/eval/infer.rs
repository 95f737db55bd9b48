use serde::{Deserialize, Serialize};

use crate::assignment::{AssignmentMatrix, Link};
use crate::error::{Error, Result};
use crate::flow::{greedy_links, lp_links};
use crate::sequence::{normalize_sequence, rtoa_from_toas, PulseSequence};
use crate::smcf::Model;

/// How a soft assignment becomes hard links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decode {
    Greedy,
    Lp,
}

impl Decode {
    pub fn name(self) -> &'static str {
        match self {
            Decode::Greedy => "greedy",
            Decode::Lp => "lp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greedy" => Ok(Decode::Greedy),
            "lp" => Ok(Decode::Lp),
            other => Err(Error::param(format!("unknown decode `{other}` (greedy, lp)"))),
        }
    }
}

/// Stitched result of windowed inference.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedInference {
    /// Feasible hard assignment.
    pub assignment: AssignmentMatrix,
    /// Per-row argmax of each window's soft matrix, stitched with the same
    /// latest-window rule but without any feasibility repair.
    pub raw_links: Vec<Link>,
    /// `[start, end)` of every window, in processing order.
    pub windows: Vec<(usize, usize)>,
}

/// Window starts: every `stride` from zero, with the last window
/// right-aligned to the end of the sequence.
pub fn window_bounds(n: usize, window: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    if window == 0 || stride == 0 || stride > window {
        return Err(Error::param(format!("need 1 <= stride ({stride}) <= window ({window})")));
    }
    if n <= window {
        return Ok(vec![(0, n)]);
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + window < n {
        out.push((start, start + window));
        start += stride;
    }
    out.push((n - window, n));
    Ok(out)
}

/// Model input for ToAs of one window: relative arrival times scaled by
/// their maximum.
pub fn window_input(toas: &[f64]) -> Result<Vec<f64>> {
    Ok(normalize_sequence(rtoa_from_toas(toas)?.values()))
}

/// Run the model over overlapping windows and stitch the decisions.
///
/// A sample covered by several windows keeps the link chosen by the latest
/// window that contains it. When a window is decoded, columns already
/// claimed by samples that precede it (and are therefore final) are
/// blocked, so the stitched links stay one-to-one.
pub fn infer_windowed(model: &Model<f64>, seq: &PulseSequence, window: usize, stride: usize, decode: Decode) -> Result<AssignmentMatrix> {
    infer_windowed_detailed(model, seq, window, stride, decode).map(|w| w.assignment)
}

pub fn infer_windowed_detailed(
    model: &Model<f64>,
    seq: &PulseSequence,
    window: usize,
    stride: usize,
    decode: Decode,
) -> Result<WindowedInference> {
    let n = seq.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if window > model.config.seq_len {
        return Err(Error::param(format!(
            "window {window} exceeds model capacity {}",
            model.config.seq_len
        )));
    }
    let windows = window_bounds(n, window, stride)?;
    let toas = seq.toas();
    let lookahead = model.config.lookahead;
    let mut links = vec![Link::Terminal; n];
    let mut raw = vec![Link::Terminal; n];

    for &(start, end) in &windows {
        let len = end - start;
        let p = model.predict(&window_input(&toas[start..end])?)?;
        let mut blocked = vec![false; len];
        for l in &links[..start] {
            if let Link::Next(j) = *l {
                if (start..end).contains(&j) {
                    blocked[j - start] = true;
                }
            }
        }
        let local = match decode {
            Decode::Greedy => greedy_links(&p, &blocked),
            Decode::Lp => lp_links(&p, lookahead, &blocked)?,
        };
        let shift = |l: Link| match l {
            Link::Next(j) => Link::Next(j + start),
            Link::Terminal => Link::Terminal,
        };
        for (i, (l, r)) in local.into_iter().zip(p.argmax_links()).enumerate() {
            links[start + i] = shift(l);
            raw[start + i] = shift(r);
        }
    }
    Ok(WindowedInference {
        assignment: AssignmentMatrix::from_links(&links)?,
        raw_links: raw,
        windows,
    })
}
