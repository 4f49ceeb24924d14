use crate::graph::JointSpace;
use crate::{Error, Result};

use super::SparseRow;

/// Tolerance on row sums of stochastic kernels.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Row-stochastic passive kernel of a single agent.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalKernel {
    rows: Vec<SparseRow>,
}

impl LocalKernel {
    pub fn new(rows: Vec<SparseRow>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("rows", "kernel needs at least one state"));
        }
        let mut rows = rows;
        for (i, row) in rows.iter_mut().enumerate() {
            row.retain(|&(_, p)| p != 0.0);
            row.sort_by_key(|&(j, _)| j);
            let mut sum = 0.0;
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::invalid(
                        "rows",
                        format!("row {i} lists successor {} twice", w[0].0),
                    ));
                }
            }
            for &(j, p) in row.iter() {
                if j >= n {
                    return Err(Error::invalid(
                        "rows",
                        format!("row {i} points at state {j} outside 0..{n}"),
                    ));
                }
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::invalid(
                        "rows",
                        format!("row {i} has invalid probability {p}"),
                    ));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotStochastic { row: i, sum });
            }
        }
        Ok(Self { rows })
    }

    /// Random wind on a `rows x cols` grid: uniform over the feasible subset
    /// of {stay, up, down, left, right}. Cell `(r, c)` (0-based) has index
    /// `r * cols + c`.
    pub fn grid_wind(rows: usize, cols: usize) -> Self {
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let mut succ = vec![r * cols + c];
                if r > 0 {
                    succ.push((r - 1) * cols + c);
                }
                if r + 1 < rows {
                    succ.push((r + 1) * cols + c);
                }
                if c > 0 {
                    succ.push(r * cols + c - 1);
                }
                if c + 1 < cols {
                    succ.push(r * cols + c + 1);
                }
                succ.sort_unstable();
                let p = 1.0 / succ.len() as f64;
                out.push(succ.into_iter().map(|j| (j, p)).collect());
            }
        }
        Self { rows: out }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[state]
    }
}

/// Product distribution of the members' next states, in ascending joint
/// index order. `kernels[k]` is the kernel of member `k` of `space`.
pub fn passive_joint_transition(
    kernels: &[LocalKernel],
    space: &JointSpace,
    state: usize,
) -> Result<SparseRow> {
    if kernels.len() != space.arity() {
        return Err(Error::DimensionMismatch {
            what: "per-member kernels",
            expected: space.arity(),
            got: kernels.len(),
        });
    }
    for (k, kernel) in kernels.iter().enumerate() {
        if kernel.n_states() != space.cards()[k] {
            return Err(Error::DimensionMismatch {
                what: "kernel state count",
                expected: space.cards()[k],
                got: kernel.n_states(),
            });
        }
    }
    let locals = space.unflatten(state)?;
    let rows: Vec<&[(usize, f64)]> = kernels.iter().zip(&locals).map(|(k, &x)| k.row(x)).collect();
    Ok(product_row(&rows, space))
}

/// Enumerates the product of sparse local rows. Each local row is sorted, and
/// the first member is the most significant digit, so the odometer visits
/// joint successors in ascending index order.
pub(crate) fn product_row(rows: &[&[(usize, f64)]], space: &JointSpace) -> SparseRow {
    let n: usize = rows.iter().map(|r| r.len()).product();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let arity = rows.len();
    let mut digit = vec![0usize; arity];
    let mut locals = vec![0usize; arity];
    loop {
        let mut p = 1.0;
        for k in 0..arity {
            let (x, pk) = rows[k][digit[k]];
            locals[k] = x;
            p *= pk;
        }
        out.push((space.flatten(&locals).expect("local successor in range"), p));
        let mut k = arity;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            digit[k] += 1;
            if digit[k] < rows[k].len() {
                break;
            }
            digit[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform2() -> LocalKernel {
        LocalKernel::new(vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 0.5), (1, 0.5)]]).unwrap()
    }

    #[test]
    fn stay_put_product_is_stay_put() {
        let stay = LocalKernel::new(vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(2, 1.0)]]).unwrap();
        let js = JointSpace::new(vec![1, 2], vec![3, 3]).unwrap();
        let x = js.flatten(&[2, 1]).unwrap();
        let row = passive_joint_transition(&[stay.clone(), stay], &js, x).unwrap();
        assert_eq!(row, vec![(x, 1.0)]);
    }

    #[test]
    fn uniform_product_is_uniform() {
        let js = JointSpace::new(vec![1, 2], vec![2, 2]).unwrap();
        let row = passive_joint_transition(&[uniform2(), uniform2()], &js, 3).unwrap();
        assert_eq!(row, vec![(0, 0.25), (1, 0.25), (2, 0.25), (3, 0.25)]);
    }

    #[test]
    fn wind_in_a_corner_has_three_moves() {
        let k = LocalKernel::grid_wind(5, 5);
        let row = k.row(0);
        assert_eq!(row.len(), 3);
        for &(_, p) in row {
            assert_eq!(p, 1.0 / 3.0);
        }
        // edge cell: 4 moves; interior cell: 5 moves
        assert_eq!(k.row(2).len(), 4);
        assert_eq!(k.row(12).len(), 5);
        assert_eq!(row.iter().map(|e| e.0).collect::<Vec<_>>(), vec![0, 1, 5]);
    }

    #[test]
    fn rows_must_be_normalized() {
        let err = LocalKernel::new(vec![vec![(0, 0.6)]]).unwrap_err();
        assert!(matches!(err, Error::NotStochastic { row: 0, .. }));
        assert!(LocalKernel::new(vec![vec![(1, 1.0)]]).is_err());
        assert!(LocalKernel::new(vec![vec![(0, 1.0 + 1e-13)]]).is_ok());
    }

    #[test]
    fn product_rows_sum_to_one() {
        let k = LocalKernel::grid_wind(5, 5);
        let js = JointSpace::new(vec![1, 2, 3], vec![25, 25, 25]).unwrap();
        for x in [0, 7, 312, 15624] {
            let row = passive_joint_transition(&[k.clone(), k.clone(), k.clone()], &js, x).unwrap();
            let s: f64 = row.iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
        }
    }
}
