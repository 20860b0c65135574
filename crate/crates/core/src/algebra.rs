//! Step-two Carnot groups in exponential coordinates.
//!
//! A group is fixed by its structure constants `c[l][i][j]` with respect to
//! orthonormal bases `X_1..X_m` of the first layer and `Y_1..Y_d2` of the
//! second layer: `[X_i, X_j] = sum_l c^l_ij Y_l`. Points are `p = xi + u`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, CarnotError, Result};
use crate::linalg::{self, RankDecision};

/// Structure constants of a step-two Lie algebra.
///
/// Only the entries with `i < j` are ever supplied; the lower half is the
/// mirrored negative, so antisymmetry holds for every value of this type.
#[derive(Clone, PartialEq)]
pub struct StructureConstants {
    m: usize,
    d2: usize,
    /// One `m x m` skew matrix per second-layer direction: `layers[l][(i, j)] = c^l_ij`.
    layers: Vec<DMatrix<f64>>,
}

impl StructureConstants {
    /// Builds from upper-triangular entries `(i, j, l, value)`, zero-based, `i < j`.
    pub fn from_upper<I>(m: usize, d2: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize, f64)>,
    {
        if m < 2 {
            return Err(CarnotError::Domain(format!("first layer dimension m = {m} < 2")));
        }
        let mut layers = vec![DMatrix::zeros(m, m); d2];
        for (i, j, l, value) in entries {
            if i >= m || j >= m || l >= d2 {
                return Err(CarnotError::Domain(format!(
                    "index ({}, {}, {}) out of range for m = {m}, d2 = {d2}",
                    i + 1,
                    j + 1,
                    l + 1
                )));
            }
            if i >= j {
                return Err(CarnotError::Antisymmetry { i: i + 1, j: j + 1, l: l + 1 });
            }
            layers[l][(i, j)] = value;
            layers[l][(j, i)] = -value;
        }
        Ok(StructureConstants { m, d2, layers })
    }

    /// Builds from a full tensor `dense[l][(i, j)]`, rejecting any entry that
    /// breaks exact antisymmetry.
    pub fn from_dense(m: usize, d2: usize, dense: &[DMatrix<f64>]) -> Result<Self> {
        check_len("second-layer tensor slices", d2, dense.len())?;
        if let Some((i, j, l)) = antisymmetry_violation(m, dense)? {
            return Err(CarnotError::Antisymmetry { i: i + 1, j: j + 1, l: l + 1 });
        }
        let entries = (0..d2).flat_map(|l| {
            (0..m).flat_map(move |i| ((i + 1)..m).map(move |j| (i, j, l, dense[l][(i, j)])))
        });
        Self::from_upper(m, d2, entries)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    /// `c^l_ij`, zero-based.
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.layers[l][(i, j)]
    }

    /// The skew matrix `(c^l_ij)_ij` for one second-layer direction.
    pub fn layer(&self, l: usize) -> &DMatrix<f64> {
        &self.layers[l]
    }

    /// Nonzero entries with `i < j`, zero-based.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        (0..self.d2).flat_map(move |l| {
            (0..self.m).flat_map(move |i| {
                ((i + 1)..self.m).filter_map(move |j| {
                    let v = self.layers[l][(i, j)];
                    (v != 0.0).then_some((i, j, l, v))
                })
            })
        })
    }

    /// `(n, Q)`: topological and homogeneous dimension.
    pub fn dims(&self) -> (usize, usize) {
        (self.m + self.d2, self.m + 2 * self.d2)
    }

    /// The `d2 x m(m-1)/2` matrix whose columns are the brackets `[X_i, X_j]`, `i < j`.
    pub fn bracket_matrix(&self) -> DMatrix<f64> {
        let pairs: Vec<(usize, usize)> = (0..self.m)
            .flat_map(|i| ((i + 1)..self.m).map(move |j| (i, j)))
            .collect();
        DMatrix::from_fn(self.d2, pairs.len(), |l, c| self.layers[l][pairs[c]])
    }

    /// Copy with every structure constant multiplied by `factor`.
    ///
    /// The result is isometric to `self` through `u -> u / factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        StructureConstants {
            m: self.m,
            d2: self.d2,
            layers: self.layers.iter().map(|c| c * factor).collect(),
        }
    }

    /// Largest operator norm of `v -> [w, v]` over unit `w`, bounded by the
    /// Frobenius norm of the tensor.
    pub fn bracket_norm_bound(&self) -> f64 {
        self.layers.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn zero_point(&self) -> GroupPoint {
        GroupPoint::zeros(self.m, self.d2)
    }

    pub(crate) fn check_point(&self, p: &GroupPoint) -> Result<()> {
        check_len("first-layer coordinates", self.m, p.xi.len())?;
        check_len("second-layer coordinates", self.d2, p.u.len())
    }

    /// Second-layer vector `([a, b]_l)_l` for first-layer vectors `a`, `b`.
    pub fn bracket_xi(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let m = self.m;
        DVector::from_iterator(
            self.d2,
            self.layers.iter().map(|c| {
                let mut s = 0.0;
                for i in 0..m {
                    for j in (i + 1)..m {
                        s += c[(i, j)] * (a[i] * b[j] - a[j] * b[i]);
                    }
                }
                s
            }),
        )
    }

    /// Lie bracket; only first-layer parts contribute.
    pub fn bracket(&self, a: &GroupPoint, b: &GroupPoint) -> Result<GroupPoint> {
        self.check_point(a)?;
        self.check_point(b)?;
        Ok(GroupPoint {
            xi: DVector::zeros(self.m),
            u: self.bracket_xi(&a.xi, &b.xi),
        })
    }

    /// Group law `a * b = a + b + [a, b] / 2`.
    pub fn mul(&self, a: &GroupPoint, b: &GroupPoint) -> Result<GroupPoint> {
        self.check_point(a)?;
        self.check_point(b)?;
        let br = self.bracket_xi(&a.xi, &b.xi);
        Ok(GroupPoint {
            xi: &a.xi + &b.xi,
            u: &a.u + &b.u + br * 0.5,
        })
    }

    pub fn inv(&self, a: &GroupPoint) -> GroupPoint {
        a.neg()
    }

    /// Anisotropic dilation `(lambda xi, lambda^2 u)`.
    pub fn dilation(&self, lambda: f64, p: &GroupPoint) -> Result<GroupPoint> {
        self.check_point(p)?;
        dilate(lambda, p)
    }
}

pub(crate) fn dilate(lambda: f64, p: &GroupPoint) -> Result<GroupPoint> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(CarnotError::Domain(format!("dilation factor must be positive, got {lambda}")));
    }
    Ok(GroupPoint {
        xi: &p.xi * lambda,
        u: &p.u * (lambda * lambda),
    })
}

fn antisymmetry_violation(m: usize, dense: &[DMatrix<f64>]) -> Result<Option<(usize, usize, usize)>> {
    for (l, c) in dense.iter().enumerate() {
        if c.nrows() != m || c.ncols() != m {
            return Err(CarnotError::Dimension {
                what: "structure-constant slice",
                expected: m,
                got: c.nrows().max(c.ncols()),
            });
        }
        for i in 0..m {
            for j in i..m {
                if c[(i, j)] != -c[(j, i)] {
                    return Ok(Some((i, j, l)));
                }
            }
        }
    }
    Ok(None)
}

impl fmt::Debug for StructureConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StructureConstants")
            .field("m", &self.m)
            .field("d2", &self.d2)
            .field("entries", &self.upper_entries().collect::<Vec<_>>())
            .finish()
    }
}

/// A point `xi + u` in exponential coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint {
    pub xi: DVector<f64>,
    pub u: DVector<f64>,
}

impl GroupPoint {
    pub fn new(xi: DVector<f64>, u: DVector<f64>) -> Self {
        GroupPoint { xi, u }
    }

    pub fn zeros(m: usize, d2: usize) -> Self {
        GroupPoint {
            xi: DVector::zeros(m),
            u: DVector::zeros(d2),
        }
    }

    /// Splits a flat coordinate list into the first `m` and the remaining entries.
    pub fn from_flat(m: usize, d2: usize, coords: &[f64]) -> Result<Self> {
        check_len("point coordinates", m + d2, coords.len())?;
        Ok(GroupPoint {
            xi: DVector::from_column_slice(&coords[..m]),
            u: DVector::from_column_slice(&coords[m..]),
        })
    }

    /// Basis vector `X_i` (zero-based) of the first layer.
    pub fn first_basis(m: usize, d2: usize, i: usize) -> Self {
        let mut p = Self::zeros(m, d2);
        p.xi[i] = 1.0;
        p
    }

    /// Basis vector `Y_l` (zero-based) of the second layer.
    pub fn second_basis(m: usize, d2: usize, l: usize) -> Self {
        let mut p = Self::zeros(m, d2);
        p.u[l] = 1.0;
        p
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.xi.iter().chain(self.u.iter()).copied().collect()
    }

    pub fn neg(&self) -> Self {
        GroupPoint {
            xi: -&self.xi,
            u: -&self.u,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        GroupPoint {
            xi: &self.xi + &other.xi,
            u: &self.u + &other.u,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        GroupPoint {
            xi: &self.xi * factor,
            u: &self.u * factor,
        }
    }

    /// Euclidean norm of the coordinate vector.
    pub fn norm(&self) -> f64 {
        (self.xi.norm_squared() + self.u.norm_squared()).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.xi
            .iter()
            .zip(other.xi.iter())
            .chain(self.u.iter().zip(other.u.iter()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Result of checking a candidate set of structure constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub m: usize,
    pub d2: usize,
    pub antisymmetric: bool,
    /// First offending `(i, j, l)`, one-based.
    pub antisymmetry_violation: Option<(usize, usize, usize)>,
    pub rank: RankDecision,
    pub bracket_generating: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.antisymmetric && self.bracket_generating
    }

    /// The first failed condition as an error.
    pub fn into_result(self) -> Result<()> {
        if let Some((i, j, l)) = self.antisymmetry_violation {
            return Err(CarnotError::Antisymmetry { i, j, l });
        }
        if !self.bracket_generating {
            return Err(CarnotError::NotStepTwo {
                rank: self.rank.rank,
                d2: self.d2,
            });
        }
        Ok(())
    }
}

/// Checks antisymmetry (exact, entrywise) and the bracket-generating rank of
/// a full tensor `dense[l][(i, j)] = c^l_ij` (zero-based).
pub fn validate_dense(m: usize, d2: usize, dense: &[DMatrix<f64>]) -> Result<ValidationReport> {
    check_len("second-layer tensor slices", d2, dense.len())?;
    let violation = antisymmetry_violation(m, dense)?;
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))).collect();
    let brackets = DMatrix::from_fn(d2, pairs.len(), |l, c| dense[l][pairs[c]]);
    let rank = linalg::numerical_rank(&brackets);
    let bracket_generating = d2 >= 1 && rank.rank == d2;
    Ok(ValidationReport {
        m,
        d2,
        antisymmetric: violation.is_none(),
        antisymmetry_violation: violation.map(|(i, j, l)| (i + 1, j + 1, l + 1)),
        rank,
        bracket_generating,
    })
}

pub fn validate_spec(sc: &StructureConstants) -> ValidationReport {
    let rank = linalg::numerical_rank(&sc.bracket_matrix());
    ValidationReport {
        m: sc.m,
        d2: sc.d2,
        antisymmetric: true,
        antisymmetry_violation: None,
        bracket_generating: sc.d2 >= 1 && rank.rank == sc.d2,
        rank,
    }
}

/// The Heisenberg group `[X_1, X_2] = Y_1`.
pub fn heisenberg() -> StructureConstants {
    StructureConstants::from_upper(2, 1, [(0, 1, 0, 1.0)]).expect("static constants")
}

/// Free step-two algebra on `m` generators: one second-layer direction per pair.
pub fn free_step_two(m: usize) -> Result<StructureConstants> {
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))).collect();
    StructureConstants::from_upper(
        m,
        pairs.len(),
        pairs.iter().enumerate().map(|(l, &(i, j))| (i, j, l, 1.0)),
    )
}

/// Euclidean space `R^m` seen as a group with no second layer.
pub fn euclidean(m: usize) -> StructureConstants {
    StructureConstants::from_upper(m, 0, std::iter::empty()).expect("static constants")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::gk_member;
    use crate::deformation::FamilyIndex;

    fn pt(xi: &[f64], u: &[f64]) -> GroupPoint {
        GroupPoint::new(DVector::from_column_slice(xi), DVector::from_column_slice(u))
    }

    #[test]
    fn validation_examples() {
        assert!(validate_spec(&heisenberg()).is_valid());
        let zero = StructureConstants::from_upper(2, 1, []).unwrap();
        let r = validate_spec(&zero);
        assert!(!r.is_valid());
        assert_eq!(r.rank.rank, 0);
        assert_eq!(r.into_result(), Err(CarnotError::NotStepTwo { rank: 0, d2: 1 }));
        assert!(validate_spec(&gk_member(FamilyIndex::Finite(1))).is_valid());
        assert!(!validate_spec(&euclidean(3)).is_valid());
    }

    #[test]
    fn dense_antisymmetry_is_exact() {
        let mut c = DMatrix::zeros(2, 2);
        c[(0, 1)] = 1.0;
        c[(1, 0)] = -1.0 + 1e-15;
        let r = validate_dense(2, 1, &[c.clone()]).unwrap();
        assert!(!r.antisymmetric);
        assert_eq!(r.antisymmetry_violation, Some((1, 2, 1)));
        c[(1, 0)] = -1.0;
        assert!(validate_dense(2, 1, &[c.clone()]).unwrap().is_valid());
        let sc = StructureConstants::from_dense(2, 1, &[c]).unwrap();
        assert_eq!(sc, heisenberg());
    }

    #[test]
    fn upper_entries_reject_lower_triangle() {
        let err = StructureConstants::from_upper(2, 1, [(1, 0, 0, 1.0)]).unwrap_err();
        assert!(matches!(err, CarnotError::Antisymmetry { .. }));
        assert!(StructureConstants::from_upper(2, 1, [(0, 2, 0, 1.0)]).is_err());
    }

    #[test]
    fn gk_brackets() {
        let sc = gk_member(FamilyIndex::Finite(4));
        let x = |i| GroupPoint::first_basis(4, 3, i);
        let y = |l| GroupPoint::second_basis(4, 3, l);
        assert_eq!(sc.bracket(&x(0), &x(1)).unwrap(), y(0));
        assert_eq!(sc.bracket(&x(1), &x(2)).unwrap(), y(2).scale(0.25));
        let a = pt(&[0.3, -1.0, 2.0, 0.1], &[1.0, 2.0, 3.0]);
        assert_eq!(sc.bracket(&a, &a).unwrap(), sc.zero_point());
    }

    #[test]
    fn group_law_examples() {
        let sc = gk_member(FamilyIndex::Infinite);
        let a = pt(&[0.5, -1.5, 2.0, 1.0], &[0.25, 3.0, -1.0]);
        assert_eq!(sc.mul(&a, &sc.zero_point()).unwrap(), a);
        assert_eq!(sc.mul(&a, &sc.inv(&a)).unwrap(), sc.zero_point());
        let x0 = GroupPoint::first_basis(4, 3, 0);
        let x1 = GroupPoint::first_basis(4, 3, 1);
        let expected = pt(&[1.0, 1.0, 0.0, 0.0], &[0.5, 0.0, 0.0]);
        assert_eq!(sc.mul(&x0, &x1).unwrap(), expected);
    }

    #[test]
    fn dilation_examples() {
        let sc = heisenberg();
        let p = pt(&[1.0, -2.0], &[3.0]);
        assert_eq!(sc.dilation(1.0, &p).unwrap(), p);
        assert_eq!(sc.dilation(2.0, &p).unwrap(), pt(&[2.0, -4.0], &[12.0]));
        let back = sc.dilation(3.0, &sc.dilation(1.0 / 3.0, &p).unwrap()).unwrap();
        assert!(back.max_abs_diff(&p) < 1e-15);
        assert!(matches!(sc.dilation(0.0, &p), Err(CarnotError::Domain(_))));
        assert!(sc.dilation(-1.0, &p).is_err());
    }

    #[test]
    fn dims_examples() {
        assert_eq!(heisenberg().dims(), (3, 4));
        assert_eq!(gk_member(FamilyIndex::Finite(3)).dims(), (7, 10));
        let free3 = free_step_two(3).unwrap();
        assert_eq!(free3.dims(), (6, 9));
        assert!(validate_spec(&free3).is_valid());
    }

    #[test]
    fn dimension_mismatch() {
        let sc = heisenberg();
        let bad = pt(&[1.0, 2.0, 3.0], &[0.0]);
        assert!(matches!(sc.bracket(&bad, &bad), Err(CarnotError::Dimension { .. })));
        assert!(GroupPoint::from_flat(2, 1, &[1.0, 2.0]).is_err());
    }
}
