//! Successor-link assignment matrices and the chain partitions they encode.
//!
//! An assignment over `n` samples is an `n x (n + 1)` matrix. Column `j < n`
//! means "the next pulse of this emitter is sample `j`"; column `n` is the
//! terminal vertex. Links only point forward in time, so entries at or below
//! the diagonal are structurally zero. The start vertex is never stored:
//! a chain starts wherever a column has no incoming link.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sequence::PulseSequence;

/// Where a sample's flow goes next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Link {
    Next(usize),
    Terminal,
}

impl Link {
    /// Column index in an `n x (n + 1)` assignment matrix.
    pub fn column(self, n: usize) -> usize {
        match self {
            Link::Next(j) => j,
            Link::Terminal => n,
        }
    }

    pub fn from_column(col: usize, n: usize) -> Self {
        if col >= n {
            Link::Terminal
        } else {
            Link::Next(col)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentKind {
    Soft,
    Hard,
}

const ROW_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix<T = f64> {
    n: usize,
    values: Vec<T>,
    kind: AssignmentKind,
}

impl<T: Real> AssignmentMatrix<T> {
    /// Hard assignment from one link per row. Fails on backward links,
    /// out-of-range targets, or a column claimed twice.
    pub fn from_links(links: &[Link]) -> Result<Self> {
        validate_links(links)?;
        let n = links.len();
        let mut values = vec![T::zero(); n * (n + 1)];
        for (i, l) in links.iter().enumerate() {
            values[i * (n + 1) + l.column(n)] = T::one();
        }
        Ok(Self {
            n,
            values,
            kind: AssignmentKind::Hard,
        })
    }

    /// Soft assignment from a row-major `n x (n + 1)` buffer.
    pub fn soft(n: usize, values: Vec<T>) -> Result<Self> {
        let m = Self {
            n,
            values,
            kind: AssignmentKind::Soft,
        };
        m.validate()?;
        Ok(m)
    }

    /// Rebuild from raw values, checking the invariants of `kind`.
    pub fn from_raw(n: usize, values: Vec<T>, kind: AssignmentKind) -> Result<Self> {
        let m = Self { n, values, kind };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.values.len() != n * (n + 1) {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries for n = {n}, got {}",
                n * (n + 1),
                self.values.len()
            )));
        }
        for i in 0..n {
            let row = self.row(i);
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let v = v.as_f64();
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InfeasibleAssignment(format!(
                        "entry ({i}, {j}) = {v} outside [0, 1]"
                    )));
                }
                if j < n && j <= i && v != 0.0 {
                    return Err(Error::InfeasibleAssignment(format!(
                        "backward link ({i}, {j})"
                    )));
                }
                if self.kind == AssignmentKind::Hard && v != 0.0 && v != 1.0 {
                    return Err(Error::InfeasibleAssignment(format!(
                        "non-binary entry ({i}, {j}) in hard assignment"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InfeasibleAssignment(format!("row {i} sums to {sum}")));
            }
        }
        if self.kind == AssignmentKind::Hard {
            for (j, s) in self.column_sums().iter().enumerate() {
                if s.as_f64() > 1.0 {
                    return Err(Error::InfeasibleAssignment(format!(
                        "column {j} has {s} predecessors"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> AssignmentKind {
        self.kind
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * (self.n + 1) + j]
    }

    pub fn terminal(&self, i: usize) -> T {
        self.get(i, self.n)
    }

    pub fn row(&self, i: usize) -> &[T] {
        let w = self.n + 1;
        &self.values[i * w..(i + 1) * w]
    }

    /// Sums over rows for each non-terminal column.
    pub fn column_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.n];
        for i in 0..self.n {
            for (s, &v) in sums.iter_mut().zip(&self.row(i)[..self.n]) {
                *s = *s + v;
            }
        }
        sums
    }

    /// Successor of each row. Only meaningful for hard assignments.
    pub fn links(&self) -> Result<Vec<Link>> {
        if self.kind != AssignmentKind::Hard {
            return Err(Error::InfeasibleAssignment(
                "links requested from a soft assignment".into(),
            ));
        }
        Ok(self.argmax_links())
    }

    /// Per-row argmax without any column-feasibility repair. Ties go to
    /// the lowest column index.
    pub fn argmax_links(&self) -> Vec<Link> {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let mut best = self.n;
                for j in (i + 1)..=self.n {
                    if row[j] > row[best] || (row[j] == row[best] && j < best) {
                        best = j;
                    }
                }
                Link::from_column(best, self.n)
            })
            .collect()
    }

    pub fn cast<U: Real>(&self) -> AssignmentMatrix<U> {
        AssignmentMatrix {
            n: self.n,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
            kind: self.kind,
        }
    }
}

/// Check forward-only, in-range, single-predecessor structure.
pub fn validate_links(links: &[Link]) -> Result<()> {
    let n = links.len();
    let mut claimed = vec![false; n];
    for (i, l) in links.iter().enumerate() {
        if let Link::Next(j) = *l {
            if j >= n {
                return Err(Error::InfeasibleAssignment(format!(
                    "link {i} -> {j} out of range"
                )));
            }
            if j <= i {
                return Err(Error::InfeasibleAssignment(format!(
                    "link {i} -> {j} is not forward in time"
                )));
            }
            if std::mem::replace(&mut claimed[j], true) {
                return Err(Error::InfeasibleAssignment(format!(
                    "column {j} has more than one predecessor"
                )));
            }
        }
    }
    Ok(())
}

/// Partition of sample indices into time-ordered chains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSet {
    n: usize,
    chains: Vec<Vec<usize>>,
}

impl ClusterSet {
    /// Chains are re-ordered by their first index.
    pub fn new(n: usize, mut chains: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for c in &chains {
            if c.is_empty() {
                return Err(Error::InfeasibleAssignment("empty chain".into()));
            }
            if c.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InfeasibleAssignment(format!(
                    "chain {c:?} is not strictly increasing"
                )));
            }
            for &i in c {
                if i >= n || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InfeasibleAssignment(format!(
                        "index {i} out of range or repeated"
                    )));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InfeasibleAssignment(format!("index {i} not covered")));
        }
        chains.sort_by_key(|c| c[0]);
        Ok(Self { n, chains })
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            n,
            chains: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn chains(&self) -> &[Vec<usize>] {
        &self.chains
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    /// Successor links implied by the chains.
    pub fn to_links(&self) -> Vec<Link> {
        let mut links = vec![Link::Terminal; self.n];
        for c in &self.chains {
            for w in c.windows(2) {
                links[w[0]] = Link::Next(w[1]);
            }
        }
        links
    }

    pub fn to_assignment(&self) -> AssignmentMatrix {
        AssignmentMatrix::from_links(&self.to_links()).expect("chains encode a feasible assignment")
    }

    /// Number of chains with more than `min_exclusive` members.
    /// Mean PRI of each chain (`None` for singletons).
    pub fn mean_pris(&self, toas: &[f64]) -> Vec<Option<f64>> {
        self.chains
            .iter()
            .map(|c| (c.len() > 1).then(|| (toas[c[c.len() - 1]] - toas[c[0]]) / (c.len() - 1) as f64))
            .collect()
    }

    pub fn count_larger_than(&self, min_exclusive: usize) -> usize {
        self.chains.iter().filter(|c| c.len() > min_exclusive).count()
    }
}

pub fn labels_to_assignment(seq: &PulseSequence) -> Result<AssignmentMatrix> {
    let labels = seq.labels().ok_or(Error::MissingLabels)?;
    AssignmentMatrix::from_links(&labels_to_links(labels))
}

pub(crate) fn labels_to_links<L: Eq + std::hash::Hash + Copy>(labels: &[L]) -> Vec<Link> {
    let mut links = vec![Link::Terminal; labels.len()];
    let mut last: HashMap<L, usize> = HashMap::new();
    for (j, l) in labels.iter().enumerate() {
        if let Some(i) = last.insert(*l, j) {
            links[i] = Link::Next(j);
        }
    }
    links
}

pub fn assignment_to_clusters<T: Real>(a: &AssignmentMatrix<T>) -> Result<ClusterSet> {
    clusters_from_links(&a.links()?)
}

/// Follow successor links from every chain start.
pub fn clusters_from_links(links: &[Link]) -> Result<ClusterSet> {
    validate_links(links)?;
    let n = links.len();
    let mut has_pred = vec![false; n];
    for l in links {
        if let Link::Next(j) = *l {
            has_pred[j] = true;
        }
    }
    let mut chains = Vec::new();
    for start in (0..n).filter(|&i| !has_pred[i]) {
        let mut chain = vec![start];
        let mut cur = start;
        while let Link::Next(j) = links[cur] {
            chain.push(j);
            cur = j;
        }
        chains.push(chain);
    }
    ClusterSet::new(n, chains)
}
