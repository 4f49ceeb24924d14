use serde::{Deserialize, Serialize};

use crate::Execution;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from rows of `(column, value)`; columns must be `< n_cols`.
    pub fn from_rows(n_cols: usize, rows: impl IntoIterator<Item = Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (j, v) in row {
                debug_assert!(j < n_cols);
                cols.push(j as u32);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n_rows: row_ptr.len() - 1,
            n_cols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.vals[r])
            .map(|(&j, &v)| (j as usize, v))
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.vals[r])
            .map(|(&j, &v)| v * x[j as usize])
            .sum()
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64], exec: Execution) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(out.len(), self.n_rows);
        exec.fill(out, |i| self.row_dot(i, x));
    }

    pub fn mul_vec(&self, x: &[f64], exec: Execution) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut out, exec);
        out
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows)
            .map(|i| {
                let mut r = vec![0.0; self.n_cols];
                for (j, v) in self.row(i) {
                    r[j] += v;
                }
                r
            })
            .collect()
    }
}

/// The linear desirability system `Z_I = M Z_I + N Z_B` of a first-exit MDP,
/// with `M = diag(exp(-q_I)) P_II` and `N = diag(exp(-q_I)) P_IB`.
///
/// Only the passive blocks and `-q_I` are stored; `M` and `N` are
/// materialised on request.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub(crate) n_states: usize,
    pub(crate) interior: Vec<usize>,
    pub(crate) boundary: Vec<usize>,
    pub(crate) p_ii: SparseMatrix,
    pub(crate) p_ib: SparseMatrix,
    pub(crate) log_decay: Vec<f64>,
}

impl LinearSystem {
    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    /// Joint-state indices of the interior rows of `M`.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Joint-state indices of the columns of `N`.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn p_ii(&self) -> &SparseMatrix {
        &self.p_ii
    }

    pub fn p_ib(&self) -> &SparseMatrix {
        &self.p_ib
    }

    /// `-q` on interior states.
    pub fn log_decay(&self) -> &[f64] {
        &self.log_decay
    }

    /// `diag(exp(-q_I)) P_II`.
    pub fn m(&self) -> SparseMatrix {
        self.row_scaled(&self.p_ii)
    }

    /// `diag(exp(-q_I)) P_IB`.
    pub fn n(&self) -> SparseMatrix {
        self.row_scaled(&self.p_ib)
    }

    fn row_scaled(&self, a: &SparseMatrix) -> SparseMatrix {
        SparseMatrix::from_rows(
            a.n_cols(),
            (0..a.n_rows()).map(|i| {
                let d = self.log_decay[i].exp();
                a.row(i).map(|(j, v)| (j, d * v)).collect()
            }),
        )
    }

    /// Spectral radius of `M`, estimated on the similar matrix
    /// `P_II diag(exp(-q_I))` whose iterates stay representable.
    pub fn spectral_radius(&self, exec: Execution) -> SpectralEstimate {
        let decay: Vec<f64> = self.log_decay.iter().map(|v| v.exp()).collect();
        let mut scaled = vec![0.0; self.n_interior()];
        power_bounds(
            self.n_interior(),
            |x, y| {
                for ((s, &xi), &d) in scaled.iter_mut().zip(x).zip(&decay) {
                    *s = xi * d;
                }
                self.p_ii.mul_vec_into(&scaled, y, exec);
            },
            1e-10,
            2_000,
        )
    }
}

/// Power-method estimate of the spectral radius of a nonnegative matrix.
///
/// `upper` and `lower` are Collatz-Wielandt bounds from the final positive
/// iterate, so `lower <= rho <= upper` holds whatever the convergence state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

/// Runs the power method on `A + I` (aperiodic, same Perron vector, radius
/// shifted by one) starting from the all-ones vector, until the bounds are
/// within `tol` or `max_iter` is reached.
pub fn spectral_radius(a: &SparseMatrix, tol: f64, max_iter: usize, exec: Execution) -> SpectralEstimate {
    assert_eq!(a.n_rows(), a.n_cols(), "spectral radius needs a square matrix");
    power_bounds(a.n_rows(), |x, y| a.mul_vec_into(x, y, exec), tol, max_iter)
}

fn power_bounds(
    n: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    tol: f64,
    max_iter: usize,
) -> SpectralEstimate {
    if n == 0 {
        return SpectralEstimate {
            estimate: 0.0,
            lower: 0.0,
            upper: 0.0,
            iterations: 0,
        };
    }
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        apply(&x, &mut y);
        let (mut lo, mut hi, mut norm) = (f64::INFINITY, 0.0f64, 0.0f64);
        for (yi, &xi) in y.iter_mut().zip(&x) {
            *yi += xi;
            let ratio = *yi / xi;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            norm = norm.max(*yi);
        }
        lower = lo - 1.0;
        upper = hi - 1.0;
        for (xi, &yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if upper - lower <= tol {
            break;
        }
    }
    let lower = lower.max(0.0);
    SpectralEstimate {
        estimate: 0.5 * (lower + upper),
        lower,
        upper,
        iterations,
    }
}
