use crate::assignment::{AssignmentMatrix, Link};
use crate::error::{Error, Result};
use crate::scalar::CostScalar;

use super::CostMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution<C> {
    pub links: Vec<Link>,
    pub assignment: AssignmentMatrix,
    pub total_cost: C,
    /// Number of chains, i.e. terminal links.
    pub num_flows: usize,
}

/// Exact min-cost assignment. Among optimal solutions, returns the one
/// whose link sequence (row by row, terminal ordered last) is smallest.
pub fn solve_min_cost_flow<C: CostScalar>(costs: &CostMatrix<C>) -> Result<FlowSolution<C>> {
    let n = costs.n();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let rows: Vec<usize> = (0..n).collect();
    let cols = columns(costs, &[]);
    let first = hungarian(costs, &rows, &cols)?;
    let optimum = costs
        .cost_of(&first.links)
        .expect("hungarian only uses admissible edges");

    let links = lexicographic_optimum(costs, &first, &optimum)?;
    let total_cost = costs.cost_of(&links).expect("admissible");
    let assignment = AssignmentMatrix::from_links(&links)?;
    let num_flows = links.iter().filter(|l| **l == Link::Terminal).count();
    Ok(FlowSolution {
        links,
        assignment,
        total_cost,
        num_flows,
    })
}

/// Column universe: real columns `0..n` not already taken, then one
/// private terminal copy per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Col {
    Real(usize),
    TerminalOf(usize),
}

fn columns<C: CostScalar>(costs: &CostMatrix<C>, taken: &[usize]) -> Vec<Col> {
    let n = costs.n();
    (0..n)
        .filter(|j| !taken.contains(j))
        .map(Col::Real)
        .chain((0..n).map(Col::TerminalOf))
        .collect()
}

fn edge<'a, C: CostScalar>(costs: &'a CostMatrix<C>, row: usize, col: Col) -> Option<&'a C> {
    match col {
        Col::Real(j) => costs.edge(row, Link::Next(j)),
        Col::TerminalOf(r) if r == row => costs.edge(row, Link::Terminal),
        Col::TerminalOf(_) => None,
    }
}

struct Matching<C> {
    /// Link chosen for every row of the full problem that took part.
    links: Vec<Link>,
    /// Row potentials indexed by full row id.
    row_pot: Vec<C>,
    /// Potentials for real columns and for terminal copies, by full index.
    col_pot: Vec<C>,
    term_pot: Vec<C>,
}

/// Shortest augmenting path assignment over a subset of rows and columns.
/// Rows outside `rows` keep `Link::Terminal` and zero potentials in the
/// returned structure; callers only read the rows they passed.
fn hungarian<C: CostScalar>(costs: &CostMatrix<C>, rows: &[usize], cols: &[Col]) -> Result<Matching<C>> {
    let n = costs.n();
    let nr = rows.len();
    let nc = cols.len();
    // 1-based with sentinel 0, as in the classic O(n^2 m) formulation.
    let mut u = vec![C::zero(); nr + 1];
    let mut v = vec![C::zero(); nc + 1];
    let mut owner = vec![0usize; nc + 1];
    let mut way = vec![0usize; nc + 1];

    for r in 1..=nr {
        owner[0] = r;
        let mut j0 = 0usize;
        let mut minv: Vec<Option<C>> = vec![None; nc + 1];
        let mut used = vec![false; nc + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = rows[i0 - 1];
            let mut delta: Option<C> = None;
            let mut j1 = 0usize;
            for j in 1..=nc {
                if used[j] {
                    continue;
                }
                if let Some(c) = edge(costs, row, cols[j - 1]) {
                    let cur = c.clone() - u[i0].clone() - v[j].clone();
                    if minv[j].as_ref().is_none_or(|m| cur < *m) {
                        minv[j] = Some(cur);
                        way[j] = j0;
                    }
                }
                if let Some(m) = &minv[j] {
                    if delta.as_ref().is_none_or(|d| m < d) {
                        delta = Some(m.clone());
                        j1 = j;
                    }
                }
            }
            let delta = delta.ok_or(Error::InfeasibleCosts { row: rows[r - 1] })?;
            for j in 0..=nc {
                if used[j] {
                    u[owner[j]] = u[owner[j]].clone() + delta.clone();
                    v[j] = v[j].clone() - delta.clone();
                } else if let Some(m) = minv[j].take() {
                    minv[j] = Some(m - delta.clone());
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut links = vec![Link::Terminal; n];
    let mut row_pot = vec![C::zero(); n];
    let mut col_pot = vec![C::zero(); n];
    let mut term_pot = vec![C::zero(); n];
    for j in 1..=nc {
        match cols[j - 1] {
            Col::Real(c) => col_pot[c] = v[j].clone(),
            Col::TerminalOf(r) => term_pot[r] = v[j].clone(),
        }
        if owner[j] != 0 {
            let row = rows[owner[j] - 1];
            links[row] = match cols[j - 1] {
                Col::Real(c) => Link::Next(c),
                Col::TerminalOf(_) => Link::Terminal,
            };
        }
    }
    for (i, &row) in rows.iter().enumerate() {
        row_pot[row] = u[i + 1].clone();
    }
    Ok(Matching {
        links,
        row_pot,
        col_pot,
        term_pot,
    })
}

/// Walk rows in order and commit the smallest link that still admits an
/// optimal completion. Only edges with zero reduced cost under an optimal
/// dual can appear in an optimal solution, so a row with a single tight
/// edge needs no re-solve.
fn lexicographic_optimum<C: CostScalar>(
    costs: &CostMatrix<C>,
    first: &Matching<C>,
    optimum: &C,
) -> Result<Vec<Link>> {
    let n = costs.n();
    let slack = C::slack(optimum);
    let mut fixed: Vec<Link> = Vec::with_capacity(n);
    let mut taken: Vec<usize> = Vec::new();
    let mut fixed_cost = C::zero();

    for i in 0..n {
        let tight: Vec<Link> = costs
            .row_links(i)
            .filter(|l| match l {
                Link::Next(j) => !taken.contains(j),
                Link::Terminal => true,
            })
            .filter(|&l| {
                let c = costs.edge(i, l).expect("row_links yields admissible edges");
                let pot = match l {
                    Link::Next(j) => first.col_pot[j].clone(),
                    Link::Terminal => first.term_pot[i].clone(),
                };
                c.clone() - first.row_pot[i].clone() - pot <= slack
            })
            .collect();

        let choice = if tight.len() == 1 {
            tight[0]
        } else {
            let rest: Vec<usize> = ((i + 1)..n).collect();
            let mut best: Option<(C, Link)> = None;
            let mut chosen = None;
            for &l in &tight {
                let mut taken_l = taken.clone();
                if let Link::Next(j) = l {
                    taken_l.push(j);
                }
                let mut total = fixed_cost.clone() + costs.edge(i, l).expect("admissible").clone();
                if !rest.is_empty() {
                    let sub = hungarian(costs, &rest, &columns(costs, &taken_l))?;
                    let mut sub_cost = C::zero();
                    for &r in &rest {
                        sub_cost = sub_cost + edge_of(costs, r, sub.links[r]).clone();
                    }
                    total = total + sub_cost;
                }
                if total.near_eq(optimum) {
                    chosen = Some(l);
                    break;
                }
                if best.as_ref().is_none_or(|(b, _)| total < *b) {
                    best = Some((total, l));
                }
            }
            match (chosen, best) {
                (Some(l), _) => l,
                (None, Some((_, l))) => l,
                // Rounding left no tight edge; keep the solver's own choice.
                (None, None) => first.links[i],
            }
        };

        fixed_cost = fixed_cost + edge_of(costs, i, choice).clone();
        if let Link::Next(j) = choice {
            taken.push(j);
        }
        fixed.push(choice);
    }
    Ok(fixed)
}

fn edge_of<C: CostScalar>(costs: &CostMatrix<C>, i: usize, l: Link) -> &C {
    costs.edge(i, l).expect("matched edges are admissible")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::DEFAULT_LOOKAHEAD;
    use num_rational::Rational64;
    use Link::*;

    #[test]
    fn single_row_takes_terminal() {
        let c = CostMatrix::new(1, vec![0.0, 0.3], DEFAULT_LOOKAHEAD).unwrap();
        let s = solve_min_cost_flow(&c).unwrap();
        assert_eq!(s.links, vec![Terminal]);
        assert_eq!(s.total_cost, 0.3);
        assert_eq!(s.num_flows, 1);
    }

    #[test]
    fn one_minus_truth_recovers_truth() {
        let truth = vec![Next(2), Next(3), Terminal, Terminal];
        let c = CostMatrix::from_fn(4, 4, |i, l| if truth[i] == l { 0.0 } else { 1.0 }).unwrap();
        let s = solve_min_cost_flow(&c).unwrap();
        assert_eq!(s.links, truth);
        assert_eq!(s.total_cost, 0.0);
        assert_eq!(s.num_flows, 2);
    }

    #[test]
    fn uniform_costs_give_lexicographic_chain() {
        let c = CostMatrix::from_fn(5, 5, |_, _| Rational64::new(1, 2)).unwrap();
        let s = solve_min_cost_flow(&c).unwrap();
        assert_eq!(s.links, vec![Next(1), Next(2), Next(3), Next(4), Terminal]);
    }

    #[test]
    fn conflict_resolved_to_cheaper_total() {
        // rows 0 and 1 both prefer column 2
        let c = CostMatrix::from_fn(3, 3, |i, l| match (i, l) {
            (0, Next(2)) => 0.1f64,
            (1, Next(2)) => 0.2,
            (0, Next(1)) => 0.5,
            (_, Terminal) => 0.9,
            _ => 1.0,
        })
        .unwrap();
        let s = solve_min_cost_flow(&c).unwrap();
        // {0->1, 1->2, 2->t} = 0.5 + 0.2 + 0.9 beats {0->2, 1->t, 2->t} = 0.1 + 0.9 + 0.9
        assert_eq!(s.links, vec![Next(1), Next(2), Terminal]);
        assert!((s.total_cost - 1.6).abs() < 1e-12);
    }

    #[test]
    fn lookahead_and_blocking_restrict_edges() {
        let mut c = CostMatrix::from_fn(4, 1, |_, l| if l == Terminal { 1.0 } else { 0.0 }).unwrap();
        let s = solve_min_cost_flow(&c).unwrap();
        assert_eq!(s.links, vec![Next(1), Next(2), Next(3), Terminal]);
        c.block_column(2);
        let s = solve_min_cost_flow(&c).unwrap();
        assert_eq!(s.links, vec![Next(1), Terminal, Next(3), Terminal]);
    }

    #[test]
    fn all_infinite_row_is_infeasible() {
        let c = CostMatrix::new(2, vec![0.0, 0.0, f64::INFINITY, 0.0, 0.0, f64::INFINITY], 2).unwrap();
        assert!(matches!(
            solve_min_cost_flow(&c),
            Err(Error::InfeasibleCosts { .. })
        ));
    }

    #[test]
    fn negative_costs_are_fine() {
        let c = CostMatrix::from_fn(3, 3, |_, l| if l == Terminal { 0.0 } else { -1.0 }).unwrap();
        let s = solve_min_cost_flow(&c).unwrap();
        assert_eq!(s.total_cost, -2.0);
        assert_eq!(s.num_flows, 1);
    }
}
