use crate::assignment::{AssignmentMatrix, Link};
use crate::error::{Error, Result};

pub const MAX_BRUTE_FORCE_N: usize = 10;

/// Every feasible hard assignment over `n` samples with lookahead `w`, in
/// lexicographic link order (row 0 most significant, terminal last).
///
/// Test oracle only; the count grows like the Bell numbers.
pub fn brute_force_assignments(n: usize, w: usize) -> Result<BruteForceAssignments> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if n > MAX_BRUTE_FORCE_N {
        return Err(Error::TooLarge(format!(
            "brute force limited to n <= {MAX_BRUTE_FORCE_N}, got {n}"
        )));
    }
    let options = (0..n)
        .map(|i| {
            let hi = (i + w).min(n - 1);
            ((i + 1)..=hi).chain(std::iter::once(n)).collect()
        })
        .collect();
    Ok(BruteForceAssignments {
        n,
        options,
        pos: vec![0; n],
        used: vec![false; n],
        depth: 0,
        done: false,
    })
}

pub struct BruteForceAssignments {
    n: usize,
    options: Vec<Vec<usize>>,
    pos: Vec<usize>,
    used: Vec<bool>,
    depth: usize,
    done: bool,
}

impl BruteForceAssignments {
    fn chosen(&self, row: usize) -> usize {
        self.options[row][self.pos[row]]
    }

    /// Undo the choice at `depth - 1` and advance it.
    fn backtrack(&mut self) {
        self.depth -= 1;
        let col = self.chosen(self.depth);
        if col < self.n {
            self.used[col] = false;
        }
        self.pos[self.depth] += 1;
    }
}

impl Iterator for BruteForceAssignments {
    type Item = AssignmentMatrix;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            if self.depth == self.n {
                let links: Vec<Link> = (0..self.n)
                    .map(|r| Link::from_column(self.chosen(r), self.n))
                    .collect();
                self.backtrack();
                return Some(AssignmentMatrix::from_links(&links).expect("enumerated links are feasible"));
            }
            let d = self.depth;
            if self.pos[d] >= self.options[d].len() {
                self.pos[d] = 0;
                if d == 0 {
                    self.done = true;
                    break;
                }
                self.backtrack();
                continue;
            }
            let col = self.chosen(d);
            if col < self.n {
                if self.used[col] {
                    self.pos[d] += 1;
                    continue;
                }
                self.used[col] = true;
            }
            self.depth += 1;
        }
        None
    }
}
