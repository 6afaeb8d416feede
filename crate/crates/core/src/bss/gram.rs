//! Solving the normal equations `G c = d` of the projection problem.
//!
//! `G` is symmetric positive semi-definite. Rows with a zero diagonal (silent
//! reference channels) are zero throughout and are dropped. The rest is
//! factored with a tiny diagonal load (`1e-12 * tr(G) / n`) and two rounds of
//! iterative refinement against the unloaded matrix remove the load's bias.
//! When the factorization reveals a numerically singular matrix, the
//! minimum-norm solution from a symmetric eigendecomposition is used instead.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};

const LOADING: f64 = 1e-12;
const REFINEMENT_STEPS: usize = 2;
/// Pivots below this multiple of the load mark the matrix as singular.
const PIVOT_RATIO: f64 = 100.0;

enum Factor {
    Cholesky(Llt<f64>),
    PseudoInverse(Mat<f64>),
}

pub(crate) struct GramSolver {
    size: usize,
    /// Indices of the rows kept in `gram`.
    active: Vec<usize>,
    gram: Mat<f64>,
    factor: Factor,
    rank_deficient: bool,
}

impl GramSolver {
    pub(crate) fn new(full: Mat<f64>) -> Self {
        let size = full.nrows();
        let active: Vec<usize> = (0..size).filter(|&i| full[(i, i)] > 0.0).collect();
        let n = active.len();
        let gram = if n == size {
            full
        } else {
            Mat::from_fn(n, n, |r, c| full[(active[r], active[c])])
        };
        let trace: f64 = (0..n).map(|i| gram[(i, i)]).sum();
        let load = LOADING * trace / n.max(1) as f64;

        let mut loaded = gram.clone();
        for i in 0..n {
            loaded[(i, i)] += load;
        }
        let factor = match loaded.llt(Side::Lower) {
            Ok(llt) => {
                let l = llt.L();
                let singular = (0..n).any(|i| l[(i, i)] * l[(i, i)] <= PIVOT_RATIO * load);
                if singular {
                    None
                } else {
                    Some(Factor::Cholesky(llt))
                }
            }
            Err(_) => None,
        };
        let rank_deficient = n < size || factor.is_none();
        let factor = factor.unwrap_or_else(|| Factor::PseudoInverse(pseudo_inverse(&gram)));
        Self {
            size,
            active,
            gram,
            factor,
            rank_deficient,
        }
    }

    /// True when `G` was singular and a minimum-norm solution is returned.
    pub(crate) fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    pub(crate) fn solve(&self, rhs: &Mat<f64>) -> Mat<f64> {
        let cols = rhs.ncols();
        let reduced = Mat::from_fn(self.active.len(), cols, |r, c| rhs[(self.active[r], c)]);
        let x = match &self.factor {
            Factor::PseudoInverse(p) => p * &reduced,
            Factor::Cholesky(llt) => {
                let mut x = llt.solve(&reduced);
                for _ in 0..REFINEMENT_STEPS {
                    let residual = &reduced - &self.gram * &x;
                    x += llt.solve(&residual);
                }
                x
            }
        };
        let mut out = Mat::zeros(self.size, cols);
        for (r, &i) in self.active.iter().enumerate() {
            for c in 0..cols {
                out[(i, c)] = x[(r, c)];
            }
        }
        out
    }
}

fn pseudo_inverse(gram: &Mat<f64>) -> Mat<f64> {
    let n = gram.nrows();
    let Ok(eig) = gram.self_adjoint_eigen(Side::Lower) else {
        return Mat::zeros(n, n);
    };
    let s = eig.S().column_vector();
    let u = eig.U();
    let max = (0..n).map(|i| s[i]).fold(0.0_f64, f64::max);
    let cutoff = max * 1e-12;
    let mut scaled = u.to_owned();
    for k in 0..n {
        let inv = if s[k] > cutoff && s[k] > 0.0 { 1.0 / s[k] } else { 0.0 };
        for r in 0..n {
            scaled[(r, k)] *= inv;
        }
    }
    &scaled * u.transpose()
}
