//! Min-cost flow over the successor-link graph.
//!
//! Every sample must send exactly one unit of flow forward (to a later
//! sample or to the terminal) and may receive at most one. Start edges are
//! implicit and free, so the number of flows is whatever minimises cost.
//! This is a bipartite matching between rows and `{later columns} ∪
//! {a private terminal copy per row}`, solved exactly with a shortest
//! augmenting path (Hungarian) method.

mod brute;
mod decode;
mod solver;

pub use brute::{brute_force_assignments, BruteForceAssignments, MAX_BRUTE_FORCE_N};
pub use decode::{greedy_decode, greedy_links, lp_decode, lp_links};
pub use solver::{solve_min_cost_flow, FlowSolution};

use crate::assignment::Link;
use crate::error::{Error, Result};
use crate::scalar::CostScalar;

/// Default forward lookahead (maximum `j - i` of a candidate link).
pub const DEFAULT_LOOKAHEAD: usize = 64;

/// Edge costs over `n` rows and `n + 1` columns (the last is terminal).
///
/// Entries at or below the diagonal, beyond the lookahead, in a blocked
/// column, or non-finite are treated as absent edges.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<C> {
    n: usize,
    values: Vec<C>,
    lookahead: usize,
    blocked: Vec<bool>,
}

impl<C: CostScalar> CostMatrix<C> {
    pub fn new(n: usize, values: Vec<C>, lookahead: usize) -> Result<Self> {
        if values.len() != n * (n + 1) {
            return Err(Error::ShapeMismatch(format!(
                "cost matrix for n = {n} needs {} entries, got {}",
                n * (n + 1),
                values.len()
            )));
        }
        if lookahead == 0 {
            return Err(Error::param("lookahead must be at least 1"));
        }
        Ok(Self {
            n,
            values,
            lookahead,
            blocked: vec![false; n],
        })
    }

    /// Build from a function of `(row, link)`; masked entries are filled
    /// with zero and never read.
    pub fn from_fn(n: usize, lookahead: usize, mut f: impl FnMut(usize, Link) -> C) -> Result<Self> {
        let mut values = Vec::with_capacity(n * (n + 1));
        for i in 0..n {
            for j in 0..=n {
                values.push(if j == n {
                    f(i, Link::Terminal)
                } else if j > i && j - i <= lookahead {
                    f(i, Link::Next(j))
                } else {
                    C::zero()
                });
            }
        }
        Self::new(n, values, lookahead)
    }

    /// Forbid any row from linking into column `j`.
    pub fn block_column(&mut self, j: usize) {
        self.blocked[j] = true;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lookahead(&self) -> usize {
        self.lookahead
    }

    /// Cost of the edge `i -> link`, or `None` if the edge is absent.
    pub fn edge(&self, i: usize, link: Link) -> Option<&C> {
        let col = match link {
            Link::Terminal => self.n,
            Link::Next(j) => {
                if j <= i || j >= self.n || j - i > self.lookahead || self.blocked[j] {
                    return None;
                }
                j
            }
        };
        let c = &self.values[i * (self.n + 1) + col];
        c.is_admissible().then_some(c)
    }

    /// Admissible links of row `i` in column order (terminal last).
    pub fn row_links(&self, i: usize) -> impl Iterator<Item = Link> + '_ {
        let hi = (i + self.lookahead).min(self.n.saturating_sub(1));
        ((i + 1)..=hi)
            .map(Link::Next)
            .chain(std::iter::once(Link::Terminal))
            .filter(move |&l| self.edge(i, l).is_some())
    }

    /// Total cost of a link set, summed in row order. `None` if any link
    /// uses an absent edge.
    pub fn cost_of(&self, links: &[Link]) -> Option<C> {
        let mut total = C::zero();
        for (i, &l) in links.iter().enumerate() {
            total = total + self.edge(i, l)?.clone();
        }
        Some(total)
    }
}
