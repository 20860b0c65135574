//! The filtration `U^l(p)`, `U_l(p)`, `W_l(p)` attached to a point
//! `p = xi + u` and the pointwise invariant `N(p)`, together with a seeded
//! search for the supremum `N_0` of its finite values.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::algebra::{GroupPoint, StructureConstants};
use crate::error::{CarnotError, Result};
use crate::jmaps::j_matrix;
use crate::linalg::{kernel_basis, orthonormalize, TAU_RANK};
use crate::rng::stream_rng;

/// `N(p)`: finite integer or infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PointInvariant {
    Finite(u64),
    Infinite,
}

impl PointInvariant {
    pub fn finite(self) -> Option<u64> {
        match self {
            PointInvariant::Finite(v) => Some(v),
            PointInvariant::Infinite => None,
        }
    }
}

impl fmt::Display for PointInvariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointInvariant::Finite(v) => write!(f, "{v}"),
            PointInvariant::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationReport {
    pub p: GroupPoint,
    /// `dim U^l(p)` for `l = 0..=L`, where `L` is the first stable index.
    pub dims_upper: Vec<usize>,
    /// `dim U_l(p)` for `l = 0..=L`.
    pub dims_lower: Vec<usize>,
    /// `dim W_l(p)` for `l = 0..L`.
    pub dims_w: Vec<usize>,
    pub dim_w_inf: usize,
    pub n_of_p: PointInvariant,
    /// Smallest singular value (or Krylov residual) accepted as nonzero.
    pub smallest_accepted: Option<f64>,
    /// Largest singular value (or Krylov residual) rejected as zero.
    pub largest_rejected: Option<f64>,
}

/// Orthonormal basis (columns) of `U^l(p) = span{xi, J_u xi, ..., J_u^{l-1} xi}`.
pub fn flag_subspace(sc: &StructureConstants, p: &GroupPoint, ell: usize) -> Result<DMatrix<f64>> {
    sc.check_point(p)?;
    let krylov = Krylov::build(sc, p, ell);
    Ok(krylov.basis_upto(ell))
}

/// Orthonormal basis (columns) of `U_l(p) = {v in g_2 : J_v(U^l(p)) = 0}`.
pub fn annihilator(sc: &StructureConstants, p: &GroupPoint, ell: usize) -> Result<DMatrix<f64>> {
    sc.check_point(p)?;
    let krylov = Krylov::build(sc, p, ell);
    let layers = layer_operators(sc);
    Ok(annihilator_of(&layers, sc.d2(), &krylov.basis_upto(ell)).0)
}

pub fn w_decomposition(sc: &StructureConstants, p: &GroupPoint) -> Result<FiltrationReport> {
    sc.check_point(p)?;
    let layers = layer_operators(sc);
    Ok(decompose(sc, &layers, p))
}

/// Arnoldi-type construction of the flag `U^1 ⊂ U^2 ⊂ ...`, with `J_u`
/// normalized so that the rank decisions do not depend on the scale of `u`.
struct Krylov {
    vectors: Vec<DVector<f64>>,
    smallest_accepted: Option<f64>,
    largest_rejected: Option<f64>,
}

impl Krylov {
    fn build(sc: &StructureConstants, p: &GroupPoint, max_len: usize) -> Self {
        let mut out = Krylov {
            vectors: Vec::new(),
            smallest_accepted: None,
            largest_rejected: None,
        };
        let xi_norm = p.xi.norm();
        if max_len == 0 || xi_norm == 0.0 {
            return out;
        }
        out.vectors.push(&p.xi / xi_norm);
        let j = j_matrix(sc, &p.u);
        let j_norm = j.norm();
        if j_norm == 0.0 {
            return out;
        }
        let j = j / j_norm;
        while out.vectors.len() < max_len.min(sc.m()) {
            let w = &j * out.vectors.last().expect("non-empty");
            let refs: Vec<&DVector<f64>> = out.vectors.iter().collect();
            let mut r = w.clone();
            for _ in 0..2 {
                for b in &refs {
                    let c = b.dot(&r);
                    r.axpy(-c, b, 1.0);
                }
            }
            let residual = r.norm();
            if residual > TAU_RANK {
                out.smallest_accepted = Some(out.smallest_accepted.map_or(residual, |s: f64| s.min(residual)));
                out.vectors.push(orthonormalize(&w, &refs, 0.0).expect("residual above threshold"));
            } else {
                out.largest_rejected = Some(residual);
                break;
            }
        }
        out
    }

    fn basis_upto(&self, ell: usize) -> DMatrix<f64> {
        let r = ell.min(self.vectors.len());
        let m = self.vectors.first().map_or(0, |v| v.len());
        let mut b = DMatrix::zeros(m, r);
        for (c, v) in self.vectors.iter().take(r).enumerate() {
            b.set_column(c, v);
        }
        b
    }
}

fn layer_operators(sc: &StructureConstants) -> Vec<DMatrix<f64>> {
    (0..sc.d2())
        .map(|l| {
            let mut e = DVector::zeros(sc.d2());
            e[l] = 1.0;
            j_matrix(sc, &e)
        })
        .collect()
}

/// Kernel of `v -> (J_v b_1, ..., J_v b_r)` as an `(m r) x d2` matrix.
fn annihilator_of(
    layers: &[DMatrix<f64>],
    d2: usize,
    basis: &DMatrix<f64>,
) -> (DMatrix<f64>, Option<f64>, Option<f64>) {
    let r = basis.ncols();
    if r == 0 {
        return (DMatrix::identity(d2, d2), None, None);
    }
    let m = basis.nrows();
    let mut stacked = DMatrix::zeros(m * r, d2);
    for (a, jl) in layers.iter().enumerate() {
        let img = jl * basis;
        for c in 0..r {
            stacked.view_mut((c * m, a), (m, 1)).copy_from(&img.column(c));
        }
    }
    let (kernel, decision) = kernel_basis(&stacked);
    (kernel, decision.smallest_accepted, decision.largest_rejected)
}

fn decompose(sc: &StructureConstants, layers: &[DMatrix<f64>], p: &GroupPoint) -> FiltrationReport {
    let (m, d2) = (sc.m(), sc.d2());
    let (n, q) = sc.dims();
    let krylov = Krylov::build(sc, p, m);
    let stable = krylov.vectors.len();
    let mut smallest_accepted = krylov.smallest_accepted;
    let mut largest_rejected = krylov.largest_rejected;

    let mut dims_upper = Vec::with_capacity(stable + 1);
    let mut dims_lower = Vec::with_capacity(stable + 1);
    for ell in 0..=stable {
        let basis = krylov.basis_upto(ell);
        let (kernel, acc, rej) = annihilator_of(layers, d2, &basis);
        dims_upper.push(basis.ncols());
        dims_lower.push(kernel.ncols());
        if let Some(a) = acc {
            smallest_accepted = Some(smallest_accepted.map_or(a, |s: f64| s.min(a)));
        }
        if let Some(r) = rej {
            largest_rejected = Some(largest_rejected.map_or(r, |s: f64| s.max(r)));
        }
    }
    let dims_w: Vec<usize> = dims_lower
        .windows(2)
        .map(|w| w[0].saturating_sub(w[1]))
        .collect();
    let dim_w_inf = *dims_lower.last().expect("at least U_0");
    let n_of_p = if dim_w_inf == 0 {
        let weighted: usize = dims_w.iter().enumerate().map(|(l, &d)| l * d).sum();
        PointInvariant::Finite((2 * q - n + 2 * weighted) as u64)
    } else {
        PointInvariant::Infinite
    };
    FiltrationReport {
        p: p.clone(),
        dims_upper,
        dims_lower,
        dims_w,
        dim_w_inf,
        n_of_p,
        smallest_accepted,
        largest_rejected,
    }
}

/// How a candidate point in the `N_0` search was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    Basis,
    Sparse,
    Random,
}

impl fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidateKind::Basis => "basis",
            CandidateKind::Sparse => "sparse",
            CandidateKind::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct N0SearchResult {
    pub best_value: u64,
    pub argmax: GroupPoint,
    pub argmax_index: usize,
    pub argmax_kind: CandidateKind,
    pub samples_evaluated: usize,
    pub basis_candidates: usize,
    pub sparse_candidates: usize,
    pub random_candidates: usize,
    pub infinite_count: usize,
    pub seed: u64,
}

/// Deterministic candidate list: basis points, sparse signed combinations
/// and `budget` standard-normal points drawn from `seed`.
pub fn n0_candidates(sc: &StructureConstants, budget: usize, seed: u64) -> Vec<(CandidateKind, GroupPoint)> {
    let (m, d2) = (sc.m(), sc.d2());
    let unit = |dim: usize, i: usize| {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        v
    };
    let signed_pairs = |dim: usize| -> Vec<DVector<f64>> {
        let mut out = Vec::new();
        for i in 0..dim {
            for j in (i + 1)..dim {
                for sign in [1.0, -1.0] {
                    let mut v = unit(dim, i);
                    v[j] = sign;
                    out.push(v);
                }
            }
        }
        out
    };

    let mut out = Vec::new();
    for i in 0..m {
        out.push((CandidateKind::Basis, GroupPoint::new(unit(m, i), DVector::zeros(d2))));
        for l in 0..d2 {
            out.push((CandidateKind::Basis, GroupPoint::new(unit(m, i), unit(d2, l))));
        }
    }
    let xis: Vec<DVector<f64>> = signed_pairs(m);
    let us: Vec<DVector<f64>> = std::iter::once(DVector::zeros(d2))
        .chain((0..d2).map(|l| unit(d2, l)))
        .chain(signed_pairs(d2))
        .collect();
    for xi in &xis {
        for u in &us {
            out.push((CandidateKind::Sparse, GroupPoint::new(xi.clone(), u.clone())));
        }
    }
    // the basis first-layer vectors against sparse second-layer pairs
    for i in 0..m {
        for u in us.iter().skip(1 + d2) {
            out.push((CandidateKind::Sparse, GroupPoint::new(unit(m, i), u.clone())));
        }
    }
    for k in 0..budget {
        let mut rng = stream_rng(seed, k as u64);
        let flat: Vec<f64> = (0..m + d2).map(|_| StandardNormal.sample(&mut rng)).collect();
        out.push((
            CandidateKind::Random,
            GroupPoint::from_flat(m, d2, &flat).expect("matching length"),
        ));
    }
    out
}

/// Largest finite `N(p)` over the candidate set; a lower bound for `N_0`.
pub fn n0_search(sc: &StructureConstants, budget: usize, seed: u64) -> Result<N0SearchResult> {
    if budget == 0 {
        return Err(CarnotError::Domain("N_0 search budget must be positive".into()));
    }
    let candidates = n0_candidates(sc, budget, seed);
    let layers = layer_operators(sc);
    let values: Vec<PointInvariant> = candidates
        .par_iter()
        .map(|(_, p)| decompose(sc, &layers, p).n_of_p)
        .collect();

    let mut best: Option<(usize, u64)> = None;
    for (idx, v) in values.iter().enumerate() {
        if let PointInvariant::Finite(val) = *v {
            if best.is_none_or(|(_, b)| val > b) {
                best = Some((idx, val));
            }
        }
    }
    let (idx, best_value) = best.ok_or_else(|| {
        CarnotError::Numerical("no candidate point has finite N(p)".into())
    })?;
    let count = |k: CandidateKind| candidates.iter().filter(|c| c.0 == k).count();
    Ok(N0SearchResult {
        best_value,
        argmax: candidates[idx].1.clone(),
        argmax_index: idx,
        argmax_kind: candidates[idx].0,
        samples_evaluated: candidates.len(),
        basis_candidates: count(CandidateKind::Basis),
        sparse_candidates: count(CandidateKind::Sparse),
        random_candidates: count(CandidateKind::Random),
        infinite_count: values.iter().filter(|v| **v == PointInvariant::Infinite).count(),
        seed,
    })
}
