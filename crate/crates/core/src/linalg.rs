//! Dense linear-algebra helpers: thresholded rank and kernels, smallest
//! singular pairs, and the rotation-block form of skew-symmetric matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative singular-value threshold used for every rank decision.
pub const TAU_RANK: f64 = 1e-9;

/// Outcome of a thresholded rank decision.
///
/// The smallest accepted and the largest rejected singular value are kept so
/// borderline decisions are visible in reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDecision {
    pub rank: usize,
    pub threshold: f64,
    pub smallest_accepted: Option<f64>,
    pub largest_rejected: Option<f64>,
}

impl RankDecision {
    fn from_sorted(sv: &[f64]) -> Self {
        let top = sv.first().copied().unwrap_or(0.0);
        let threshold = TAU_RANK * top;
        let rank = if top > 0.0 {
            sv.iter().filter(|&&s| s > threshold).count()
        } else {
            0
        };
        RankDecision {
            rank,
            threshold,
            smallest_accepted: rank.checked_sub(1).map(|i| sv[i]),
            largest_rejected: sv.get(rank).copied(),
        }
    }
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub fn numerical_rank(a: &DMatrix<f64>) -> RankDecision {
    RankDecision::from_sorted(&singular_values(a))
}

/// Orthonormal basis (as columns) of the numerical kernel of `a`.
pub fn kernel_basis(a: &DMatrix<f64>) -> (DMatrix<f64>, RankDecision) {
    let ncols = a.ncols();
    if ncols == 0 {
        return (DMatrix::zeros(0, 0), RankDecision::from_sorted(&[]));
    }
    // Thin SVD only returns min(rows, cols) right vectors; pad with zero rows
    // so the full right basis is available.
    let padded = if a.nrows() < ncols {
        let mut p = DMatrix::zeros(ncols, ncols);
        p.view_mut((0, 0), (a.nrows(), ncols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sorted: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let decision = RankDecision::from_sorted(&sorted);
    let kernel_rows = &order[decision.rank..];
    let mut basis = DMatrix::zeros(ncols, kernel_rows.len());
    for (c, &r) in kernel_rows.iter().enumerate() {
        basis.set_column(c, &v_t.row(r).transpose());
    }
    (basis, decision)
}

/// Smallest singular value of a square matrix with its singular pair
/// `(sigma, left, right)` such that `a * right = sigma * left`.
pub fn smallest_singular_pair(a: &DMatrix<f64>) -> (f64, DVector<f64>, DVector<f64>) {
    let svd = a.clone().svd(true, true);
    let (idx, sigma) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("non-empty matrix");
    let left = svd.u.expect("u requested").column(idx).into_owned();
    let right = svd.v_t.expect("v_t requested").row(idx).transpose();
    (sigma, left, right)
}

/// Orthogonal reduction of a real skew-symmetric matrix to 2x2 rotation
/// generators: `J = Q B Q^T` with `B` block diagonal, blocks `[[0, -t], [t, 0]]`
/// on consecutive column pairs of `Q` followed by a zero block.
#[derive(Debug, Clone)]
pub struct SkewDecomposition {
    pub basis: DMatrix<f64>,
    pub angles: Vec<f64>,
}

impl SkewDecomposition {
    pub fn new(j: &DMatrix<f64>) -> Self {
        let m = j.nrows();
        let scale = j.norm();
        if scale == 0.0 {
            return SkewDecomposition {
                basis: DMatrix::identity(m, m),
                angles: Vec::new(),
            };
        }
        // J^T J is symmetric positive semidefinite and J maps each of its
        // eigenspaces into itself, so eigenvectors can be paired as (e, Je/|Je|).
        let gram = j.transpose() * j;
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let kernel_tol = 1e-14 * scale;
        let mut pairs: Vec<(DVector<f64>, DVector<f64>, f64)> = Vec::new();
        let mut kernel: Vec<DVector<f64>> = Vec::new();
        let candidates = order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .chain((0..m).map(|i| DVector::from_fn(m, |r, _| if r == i { 1.0 } else { 0.0 })));

        for cand in candidates {
            let used = 2 * pairs.len() + kernel.len();
            if used == m {
                break;
            }
            let chosen: Vec<&DVector<f64>> = pairs
                .iter()
                .flat_map(|(e, f, _)| [e, f])
                .chain(kernel.iter())
                .collect();
            let Some(e) = orthonormalize(&cand, &chosen, 0.5) else {
                continue;
            };
            if used + 1 == m {
                kernel.push(e);
                continue;
            }
            let mut with_e = chosen.clone();
            with_e.push(&e);
            let je = j * &e;
            if je.norm() <= kernel_tol {
                kernel.push(e);
                continue;
            }
            match orthonormalize(&je, &with_e, 1e-3) {
                Some(f) => {
                    let angle = f.dot(&(j * &e));
                    pairs.push((e, f, angle));
                }
                None => kernel.push(e),
            }
        }

        let mut basis = DMatrix::zeros(m, m);
        let mut angles = Vec::with_capacity(pairs.len());
        let mut col = 0;
        for (e, f, angle) in pairs {
            basis.set_column(col, &e);
            basis.set_column(col + 1, &f);
            angles.push(angle);
            col += 2;
        }
        for k in kernel {
            basis.set_column(col, &k);
            col += 1;
        }
        SkewDecomposition { basis, angles }
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Rotation `exp(t J)` in the reduced coordinates, applied to `y`.
    pub fn rotate_reduced(&self, t: f64, y: &DVector<f64>) -> DVector<f64> {
        let mut out = y.clone();
        for (k, &a) in self.angles.iter().enumerate() {
            let (s, c) = (a * t).sin_cos();
            let (p, q) = (y[2 * k], y[2 * k + 1]);
            out[2 * k] = c * p - s * q;
            out[2 * k + 1] = s * p + c * q;
        }
        out
    }

    /// `∫_0^t exp(s J) ds` in reduced coordinates, applied to `y`.
    pub fn integrate_reduced(&self, t: f64, y: &DVector<f64>) -> DVector<f64> {
        let mut out = y * t;
        for (k, &a) in self.angles.iter().enumerate() {
            let half = 0.5 * a * t;
            let sin_part = t * sinc(2.0 * half);
            let cos_part = t * half.sin() * sinc(half);
            let (p, q) = (y[2 * k], y[2 * k + 1]);
            out[2 * k] = sin_part * p - cos_part * q;
            out[2 * k + 1] = cos_part * p + sin_part * q;
        }
        out
    }

    /// `rotate_reduced` and `integrate_reduced` written into `v` and `x`.
    pub(crate) fn reduced_into(&self, t: f64, y: &[f64], x: &mut [f64], v: &mut [f64]) {
        for i in 0..y.len() {
            x[i] = y[i] * t;
            v[i] = y[i];
        }
        for (k, &a) in self.angles.iter().enumerate() {
            let (s, c) = (a * t).sin_cos();
            let half = 0.5 * a * t;
            let sin_part = t * sinc(2.0 * half);
            let cos_part = t * half.sin() * sinc(half);
            let (p, q) = (y[2 * k], y[2 * k + 1]);
            v[2 * k] = c * p - s * q;
            v[2 * k + 1] = s * p + c * q;
            x[2 * k] = sin_part * p - cos_part * q;
            x[2 * k + 1] = cos_part * p + sin_part * q;
        }
    }

    pub fn exp(&self, t: f64) -> DMatrix<f64> {
        let m = self.dim();
        let mut rot = DMatrix::identity(m, m);
        for (k, &a) in self.angles.iter().enumerate() {
            let (s, c) = (a * t).sin_cos();
            rot[(2 * k, 2 * k)] = c;
            rot[(2 * k, 2 * k + 1)] = -s;
            rot[(2 * k + 1, 2 * k)] = s;
            rot[(2 * k + 1, 2 * k + 1)] = c;
        }
        &self.basis * rot * self.basis.transpose()
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Gram-Schmidt (two passes) of `v` against orthonormal `basis`; `None` when
/// the residual keeps less than `keep` of the original norm.
pub(crate) fn orthonormalize(
    v: &DVector<f64>,
    basis: &[&DVector<f64>],
    keep: f64,
) -> Option<DVector<f64>> {
    let norm0 = v.norm();
    if norm0 == 0.0 {
        return None;
    }
    let mut w = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&w);
            w.axpy(-c, b, 1.0);
        }
    }
    let norm = w.norm();
    (norm > keep * norm0).then(|| w / norm)
}
