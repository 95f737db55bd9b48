use std::cmp::Ordering;

use crate::assignment::{AssignmentMatrix, Link};
use crate::error::Result;
use crate::scalar::{CostScalar, Real};

use super::{solve_min_cost_flow, CostMatrix};

/// Commit links from the largest probability down, skipping rows already
/// assigned and columns already claimed. The terminal never runs out.
pub fn greedy_decode<T: Real>(p: &AssignmentMatrix<T>) -> AssignmentMatrix {
    let links = greedy_links(p, &vec![false; p.n()]);
    AssignmentMatrix::from_links(&links).expect("greedy links are feasible")
}

/// Greedy decode with some columns unavailable from the start.
pub fn greedy_links<T: Real>(p: &AssignmentMatrix<T>, blocked: &[bool]) -> Vec<Link> {
    let n = p.n();
    let mut entries: Vec<(T, usize, usize)> = Vec::with_capacity(n * (n + 1) / 2 + n);
    for i in 0..n {
        let row = p.row(i);
        for (j, &v) in row.iter().enumerate().skip(i + 1) {
            if j == n || !blocked[j] {
                entries.push((v, i, j));
            }
        }
    }
    entries.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut links: Vec<Option<Link>> = vec![None; n];
    let mut claimed = vec![false; n];
    let mut remaining = n;
    for (_, i, j) in entries {
        if remaining == 0 {
            break;
        }
        if links[i].is_some() {
            continue;
        }
        if j < n {
            if claimed[j] {
                continue;
            }
            claimed[j] = true;
        }
        links[i] = Some(Link::from_column(j, n));
        remaining -= 1;
    }
    links.into_iter().map(|l| l.unwrap_or(Link::Terminal)).collect()
}

/// Exact decode: min-cost flow with cost `1 - p`.
pub fn lp_decode<T: Real + CostScalar>(p: &AssignmentMatrix<T>, lookahead: usize) -> Result<AssignmentMatrix> {
    let links = lp_links(p, lookahead, &vec![false; p.n()])?;
    AssignmentMatrix::from_links(&links)
}

pub fn lp_links<T: Real + CostScalar>(p: &AssignmentMatrix<T>, lookahead: usize, blocked: &[bool]) -> Result<Vec<Link>> {
    let n = p.n();
    let mut costs = CostMatrix::from_fn(n, lookahead, |i, l| T::one() - p.get(i, l.column(n)))?;
    for (j, _) in blocked.iter().enumerate().filter(|(_, b)| **b) {
        costs.block_column(j);
    }
    Ok(solve_min_cost_flow(&costs)?.links)
}
