use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::assignment::{AssignmentMatrix, Link};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Floor for the argument of the log in the cross-entropy term.
pub const LOG_EPS: f64 = 1e-12;

/// Penalty coefficients of the flow loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl LossWeights {
    pub const PAPER: LossWeights = LossWeights {
        lambda2: 10.0,
        lambda3: 1.0,
        lambda4: 5.0,
    };

    /// All penalties off: cross-entropy only.
    pub const BASELINE: LossWeights = LossWeights {
        lambda2: 0.0,
        lambda3: 0.0,
        lambda4: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda2", self.lambda2), ("lambda3", self.lambda3), ("lambda4", self.lambda4)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::PAPER
    }
}

/// Loss terms of one evaluation. `total = ce + l2 l2 + l3 l3 + l4 l4`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub total: f64,
    pub weights: Option<LossWeights>,
    /// Rows whose true entry fell below the log floor.
    pub clamped: usize,
}

impl LossBreakdown {
    fn assemble(ce: f64, l2: f64, l3: f64, l4: f64, w: &LossWeights, clamped: usize) -> Self {
        Self {
            ce,
            l2,
            l3,
            l4,
            total: ce + w.lambda2 * l2 + w.lambda3 * l3 + w.lambda4 * l4,
            weights: Some(*w),
            clamped,
        }
    }

    /// Mean of several breakdowns that share the same weights.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        if items.is_empty() {
            return LossBreakdown::default();
        }
        let n = items.len() as f64;
        let sum = |f: fn(&LossBreakdown) -> f64| items.iter().map(f).sum::<f64>() / n;
        LossBreakdown {
            ce: sum(|b| b.ce),
            l2: sum(|b| b.l2),
            l3: sum(|b| b.l3),
            l4: sum(|b| b.l4),
            total: sum(|b| b.total),
            weights: items[0].weights,
            clamped: items.iter().map(|b| b.clamped).sum(),
        }
    }

    /// The term responsible for a non-finite total, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [("ce", self.ce), ("l2", self.l2), ("l3", self.l3), ("l4", self.l4), ("total", self.total)]
            .into_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(n, _)| n)
    }
}

/// Flow loss of a soft assignment `p` against hard ground truth `y`.
pub fn flow_loss<T: Real>(p: &AssignmentMatrix<T>, y: &AssignmentMatrix, w: &LossWeights) -> Result<LossBreakdown> {
    if p.n() != y.n() {
        return Err(Error::ShapeMismatch(format!("p has {} rows, y has {}", p.n(), y.n())));
    }
    let n = p.n();
    let view = ArrayView2::from_shape((n, n + 1), p.values()).expect("validated shape");
    Ok(loss_and_grad(view, &y.links()?, w, false).0)
}

/// Loss terms and, if requested, `dL/dp` (same shape as `p`).
pub(crate) fn loss_and_grad<T: Real>(
    p: ArrayView2<T>,
    y: &[Link],
    w: &LossWeights,
    want_grad: bool,
) -> (LossBreakdown, Option<Array2<T>>) {
    let n = p.nrows();
    let t = n;
    let nf = n as f64;
    let eps = T::lit(LOG_EPS);

    let mut ce = 0.0;
    let mut clamped = 0;
    for (i, link) in y.iter().enumerate() {
        let v = p[[i, link.column(n)]];
        if v < eps {
            clamped += 1;
            ce -= LOG_EPS.ln();
        } else {
            ce -= v.as_f64().ln();
        }
    }
    ce /= nf;

    let colsum: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| p[[i, j]].as_f64()).sum())
        .collect();
    let l2 = colsum.iter().map(|&s| (s - 1.0).max(0.0)).sum::<f64>() / nf;
    let terminal: f64 = (0..n).map(|i| p[[i, t]].as_f64()).sum();
    let balance = terminal - colsum.iter().map(|&s| 1.0 - s).sum::<f64>();
    let l3 = balance * balance;
    let norms: Vec<f64> = (0..n)
        .map(|i| p.row(i).iter().map(|&v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt())
        .collect();
    let l4 = (0..n)
        .map(|i| p.row(i).iter().map(|&v| v.as_f64()).sum::<f64>() - norms[i])
        .sum::<f64>()
        / nf;

    let breakdown = LossBreakdown::assemble(ce, l2, l3, l4, w, clamped);
    if !want_grad {
        return (breakdown, None);
    }

    let mut g = Array2::<T>::zeros((n, n + 1));
    for (i, link) in y.iter().enumerate() {
        let c = link.column(n);
        let v = p[[i, c]];
        if v >= eps {
            g[[i, c]] = g[[i, c]] - T::one() / (T::lit(nf) * v);
        }
    }
    let hinge = T::lit(w.lambda2 / nf);
    let flow = T::lit(w.lambda3 * 2.0 * balance);
    let binary = T::lit(w.lambda4 / nf);
    for i in 0..n {
        let norm = T::lit(norms[i]);
        for j in 0..=n {
            let mut d = g[[i, j]] + flow;
            if j < n && colsum[j] > 1.0 {
                d = d + hinge;
            }
            if norm > T::zero() {
                d = d + binary * (T::one() - p[[i, j]] / norm);
            }
            g[[i, j]] = d;
        }
    }
    (breakdown, Some(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Link::*;

    fn hard(links: &[Link]) -> AssignmentMatrix {
        AssignmentMatrix::from_links(links).unwrap()
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let y = hard(&[Next(2), Next(3), Terminal, Terminal]);
        let b = flow_loss(&y, &y, &LossWeights::PAPER).unwrap();
        assert_eq!((b.ce, b.l2, b.l3, b.l4, b.total), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn uniform_row_l4() {
        // row 0 uniform over its 4 allowed entries (cols 1, 2, 3, terminal)
        let n = 4;
        let mut v = vec![0.0; n * (n + 1)];
        for j in [1, 2, 3, 4] {
            v[j] = 0.25;
        }
        for (i, c) in [(1, 2), (2, 3), (3, 4)] {
            v[i * (n + 1) + c] = 1.0;
        }
        let p = AssignmentMatrix::soft(n, v).unwrap();
        let y = hard(&[Next(1), Next(2), Next(3), Terminal]);
        let b = flow_loss(&p, &y, &LossWeights::PAPER).unwrap();
        assert!((b.l4 - (1.0 - 1.0 / 2.0) / 4.0).abs() <= 1e-12);
    }

    #[test]
    fn doubly_claimed_column_l2() {
        let n = 3;
        let v = vec![
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ];
        let p = AssignmentMatrix::soft(n, v).unwrap();
        let y = hard(&[Next(1), Next(2), Terminal]);
        let b = flow_loss(&p, &y, &LossWeights::PAPER).unwrap();
        assert!((b.l2 - 1.0 / 3.0).abs() <= 1e-12);
        // row 0's truth entry is 0: clamped, finite
        assert_eq!(b.clamped, 1);
        assert!(b.ce.is_finite());
    }

    #[test]
    fn total_matches_weights() {
        let n = 3;
        let v = vec![
            0.0, 0.5, 0.3, 0.2, //
            0.0, 0.0, 0.6, 0.4, //
            0.0, 0.0, 0.0, 1.0,
        ];
        let p = AssignmentMatrix::soft(n, v).unwrap();
        let y = hard(&[Next(1), Next(2), Terminal]);
        let w = LossWeights {
            lambda2: 2.0,
            lambda3: 3.0,
            lambda4: 4.0,
        };
        let b = flow_loss(&p, &y, &w).unwrap();
        assert!((b.total - (b.ce + 2.0 * b.l2 + 3.0 * b.l3 + 4.0 * b.l4)).abs() < 1e-15);
        assert!(b.l3 < 1e-24);
        let base = flow_loss(&p, &y, &LossWeights::BASELINE).unwrap();
        assert_eq!(base.total, base.ce);
        assert_eq!(base.l4, b.l4);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // Perturb p freely (not through a soft-max) and check dL/dp.
        let n = 3;
        let v = vec![
            0.0, 0.3, 0.5, 0.2, //
            0.0, 0.0, 0.7, 0.3, //
            0.0, 0.0, 0.0, 1.0,
        ];
        let y = [Next(1), Next(2), Terminal];
        let p = Array2::from_shape_vec((n, n + 1), v).unwrap();
        let (_, g) = loss_and_grad(p.view(), &y, &LossWeights::PAPER, true);
        let g = g.unwrap();
        let h = 1e-6;
        for i in 0..n {
            for j in (i + 1)..=n {
                let mut a = p.clone();
                a[[i, j]] += h;
                let mut b = p.clone();
                b[[i, j]] -= h;
                let fa = loss_and_grad(a.view(), &y, &LossWeights::PAPER, false).0.total;
                let fb = loss_and_grad(b.view(), &y, &LossWeights::PAPER, false).0.total;
                let fd = (fa - fb) / (2.0 * h);
                assert!((fd - g[[i, j]]).abs() < 1e-6, "({i},{j}) fd {fd} vs {}", g[[i, j]]);
            }
        }
    }

    /// Term-by-term evaluation written out with plain loops over a dense
    /// `Vec<Vec<f64>>`.
    fn straight_line(p: &[Vec<f64>], truth_col: &[usize], l2w: f64, l3w: f64, l4w: f64) -> f64 {
        let n = p.len();
        let mut ce = 0.0;
        for i in 0..n {
            ce += -(p[i][truth_col[i]].max(1e-12)).ln();
        }
        ce /= n as f64;
        let mut l2 = 0.0;
        let mut missing = 0.0;
        for j in 0..n {
            let mut c = 0.0;
            for row in p {
                c += row[j];
            }
            if c > 1.0 {
                l2 += c - 1.0;
            }
            missing += 1.0 - c;
        }
        l2 /= n as f64;
        let mut term = 0.0;
        for row in p {
            term += row[n];
        }
        let l3 = (term - missing) * (term - missing);
        let mut l4 = 0.0;
        for row in p {
            let l1: f64 = row.iter().map(|v| v.abs()).sum();
            let sq: f64 = row.iter().map(|v| v * v).sum();
            l4 += l1 - sq.sqrt();
        }
        l4 /= n as f64;
        ce + l2w * l2 + l3w * l3 + l4w * l4
    }

    #[test]
    fn matches_straight_line_oracle() {
        use rand::{Rng, SeedableRng};
        let n = 5;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut r: Vec<f64> = (0..=n).map(|j| if j > i || j == n { rng.gen::<f64>() } else { 0.0 }).collect();
                    let s: f64 = r.iter().sum();
                    r.iter_mut().for_each(|v| *v /= s);
                    r
                })
                .collect();
            let y = [Next(2), Next(3), Terminal, Next(4), Terminal];
            let cols: Vec<usize> = y.iter().map(|l| l.column(n)).collect();
            let p = AssignmentMatrix::soft(n, rows.concat()).unwrap();
            let w = LossWeights { lambda2: 10.0, lambda3: 1.0, lambda4: 5.0 };
            let got = flow_loss(&p, &hard(&y), &w).unwrap().total;
            let want = straight_line(&rows, &cols, 10.0, 1.0, 5.0);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn relabeling_emitters_leaves_loss_unchanged() {
        use crate::assignment::labels_to_assignment;
        use crate::sequence::PulseSequence;
        let toas = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let a = PulseSequence::labeled(toas.clone(), vec![0, 1, 0, 1, 0, 2]).unwrap();
        let b = PulseSequence::labeled(toas, vec![7, 3, 7, 3, 7, 0]).unwrap();
        let (ya, yb) = (labels_to_assignment(&a).unwrap(), labels_to_assignment(&b).unwrap());
        let v: Vec<f64> = (0..6)
            .flat_map(|i| (0..7).map(move |j| if j > i { 1.0 / (6 - i) as f64 } else { 0.0 }))
            .collect();
        let p = AssignmentMatrix::soft(6, v).unwrap();
        let w = LossWeights::PAPER;
        assert_eq!(flow_loss(&p, &ya, &w).unwrap(), flow_loss(&p, &yb, &w).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn terms_are_non_negative(raw in proptest::collection::vec(0.001f64..1.0, 42)) {
            let n = 6;
            let mut v = vec![0.0; n * (n + 1)];
            for i in 0..n {
                let s: f64 = (i + 1..=n).map(|j| raw[i * 7 + j]).sum();
                for j in i + 1..=n {
                    v[i * (n + 1) + j] = raw[i * 7 + j] / s;
                }
            }
            let p = AssignmentMatrix::soft(n, v).unwrap();
            let y = hard(&[Next(1), Next(2), Next(3), Next(4), Next(5), Terminal]);
            let b = flow_loss(&p, &y, &LossWeights::PAPER).unwrap();
            proptest::prop_assert!(b.l2 >= 0.0 && b.l3 >= 0.0 && b.l4 >= 0.0 && b.ce >= 0.0);
        }
    }
}
