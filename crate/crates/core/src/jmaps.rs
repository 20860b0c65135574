//! The skew operators `J_u` on the first layer, `<u, [v, w]> = <J_u v, w>`,
//! and the search for singular ones (Métivier property).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::algebra::StructureConstants;
use crate::error::{check_len, CarnotError, Result};
use crate::linalg::smallest_singular_pair;
use crate::rng::stream_rng;

/// A Métivier witness must have `sigma_min(J_u)` at most this on the unit sphere.
pub const SINGULAR_WITNESS_TOL: f64 = 1e-12;
/// Minimum `sigma_min(J_u)` over the sphere required to report a Métivier group.
pub const INVERTIBLE_BOUND: f64 = 1e-6;

const MAX_DESCENT_STEPS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct JOperator {
    pub u: DVector<f64>,
    pub mat: DMatrix<f64>,
}

impl JOperator {
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.mat * v
    }

    pub fn sigma_min(&self) -> f64 {
        smallest_singular_pair(&self.mat).0
    }
}

/// `J_u` with `mat[(j, i)] = sum_l u_l c^l_ij`.
pub fn j_operator(sc: &StructureConstants, u: &DVector<f64>) -> Result<JOperator> {
    check_len("second-layer vector u", sc.d2(), u.len())?;
    Ok(JOperator {
        u: u.clone(),
        mat: j_matrix(sc, u),
    })
}

pub(crate) fn j_matrix(sc: &StructureConstants, u: &DVector<f64>) -> DMatrix<f64> {
    let m = sc.m();
    let mut mat = DMatrix::zeros(m, m);
    for (l, &ul) in u.iter().enumerate() {
        if ul != 0.0 {
            // layer(l)[(i, j)] = c^l_ij lands at (j, i)
            mat += sc.layer(l).transpose() * ul;
        }
    }
    mat
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetivierStatus {
    Metivier,
    NotMetivier,
    Inconclusive,
}

impl fmt::Display for MetivierStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetivierStatus::Metivier => "Metivier",
            MetivierStatus::NotMetivier => "NotMetivier",
            MetivierStatus::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetivierVerdict {
    pub status: MetivierStatus,
    /// Unit vector attaining the smallest `sigma_min(J_u)` found.
    pub witness: Option<DVector<f64>>,
    pub min_sigma: f64,
    pub budget: usize,
    pub seed: u64,
    pub certificate: String,
}

struct StartOutcome {
    sigma: f64,
    u: DVector<f64>,
    converged: bool,
}

/// Minimizes `sigma_min(J_u)` over the unit sphere by seeded multi-start
/// projected descent.
pub fn metivier_check(sc: &StructureConstants, budget: usize, seed: u64) -> Result<MetivierVerdict> {
    if budget == 0 {
        return Err(CarnotError::Domain("Métivier search budget must be positive".into()));
    }
    let d2 = sc.d2();
    if d2 == 0 {
        return Err(CarnotError::Domain("no second layer to search over".into()));
    }
    if sc.m() % 2 == 1 {
        let mut u = DVector::zeros(d2);
        u[0] = 1.0;
        let sigma = smallest_singular_pair(&j_matrix(sc, &u)).0;
        return Ok(MetivierVerdict {
            status: MetivierStatus::NotMetivier,
            witness: Some(u),
            min_sigma: sigma,
            budget,
            seed,
            certificate: format!(
                "odd first-layer dimension m = {}: every skew J_u is singular",
                sc.m()
            ),
        });
    }

    let layers: Vec<DMatrix<f64>> = (0..d2)
        .map(|l| {
            let mut e = DVector::zeros(d2);
            e[l] = 1.0;
            j_matrix(sc, &e)
        })
        .collect();

    let outcomes: Vec<StartOutcome> = (0..budget)
        .into_par_iter()
        .map(|start| {
            let mut rng = stream_rng(seed, start as u64);
            let u0 = random_unit(&mut rng, d2);
            descend(&layers, u0)
        })
        .collect();

    // first start attaining the minimum wins ties
    let (best_idx, best) = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.sigma.total_cmp(&b.1.sigma))
        .expect("budget >= 1");
    let all_converged = outcomes.iter().all(|o| o.converged);
    let all_above = outcomes.iter().all(|o| o.sigma >= INVERTIBLE_BOUND);

    let status = if best.sigma <= SINGULAR_WITNESS_TOL {
        MetivierStatus::NotMetivier
    } else if all_above && all_converged {
        MetivierStatus::Metivier
    } else {
        MetivierStatus::Inconclusive
    };
    let certificate = format!(
        "projected descent on the unit sphere: {budget} starts (seed {seed}), \
         min sigma_min(J_u) = {:.6e} at start {best_idx}, {} of {budget} starts converged; \
         thresholds: singular <= {SINGULAR_WITNESS_TOL:e}, invertible >= {INVERTIBLE_BOUND:e}",
        best.sigma,
        outcomes.iter().filter(|o| o.converged).count(),
    );
    Ok(MetivierVerdict {
        status,
        witness: Some(best.u.clone()),
        min_sigma: best.sigma,
        budget,
        seed,
        certificate,
    })
}

fn random_unit<R: Rng>(rng: &mut R, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

fn combine(layers: &[DMatrix<f64>], u: &DVector<f64>) -> DMatrix<f64> {
    let mut mat = DMatrix::zeros(layers[0].nrows(), layers[0].ncols());
    for (c, &ul) in layers.iter().zip(u.iter()) {
        mat += c * ul;
    }
    mat
}

fn descend(layers: &[DMatrix<f64>], mut u: DVector<f64>) -> StartOutcome {
    let (mut sigma, mut left, mut right) = smallest_singular_pair(&combine(layers, &u));
    let mut step = 1.0;
    for _ in 0..MAX_DESCENT_STEPS {
        if sigma <= SINGULAR_WITNESS_TOL * 1e-2 {
            return StartOutcome { sigma, u, converged: true };
        }
        // d sigma / d u_l = left^T J_{Y_l} right, projected onto the tangent space
        let mut grad = DVector::from_iterator(layers.len(), layers.iter().map(|c| left.dot(&(c * &right))));
        let radial = grad.dot(&u);
        grad.axpy(-radial, &u, 1.0);
        let gnorm = grad.norm();
        if gnorm <= 1e-12 * (1.0 + sigma) {
            return StartOutcome { sigma, u, converged: true };
        }
        let mut improved = false;
        while step > 1e-14 {
            let trial = &u - &grad * (step / gnorm);
            let trial = &trial / trial.norm();
            let (s, a, b) = smallest_singular_pair(&combine(layers, &trial));
            if s < sigma {
                let decrease = sigma - s;
                u = trial;
                sigma = s;
                left = a;
                right = b;
                step = (step * 2.0).min(1.0);
                improved = true;
                if decrease <= 1e-15 * (1.0 + s) {
                    return StartOutcome { sigma, u, converged: true };
                }
                break;
            }
            step *= 0.5;
        }
        if !improved {
            return StartOutcome { sigma, u, converged: true };
        }
    }
    StartOutcome { sigma, u, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{free_step_two, heisenberg, GroupPoint};
    use crate::deformation::{gk_member, FamilyIndex};
    use approx::assert_relative_eq;

    /// `<J_u X_i, X_j>` by evaluating `<u, [X_i, X_j]>` over basis pairs.
    fn brute_force_j(sc: &StructureConstants, u: &DVector<f64>) -> DMatrix<f64> {
        let (m, d2) = (sc.m(), sc.d2());
        DMatrix::from_fn(m, m, |j, i| {
            let b = sc
                .bracket(&GroupPoint::first_basis(m, d2, i), &GroupPoint::first_basis(m, d2, j))
                .unwrap();
            u.dot(&b.u)
        })
    }

    #[test]
    fn heisenberg_matrix() {
        let sc = heisenberg();
        let t = 2.5;
        let j = j_operator(&sc, &DVector::from_element(1, t)).unwrap();
        assert_eq!(j.mat, DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]));
        assert_eq!(j.mat, brute_force_j(&sc, &j.u));
    }

    #[test]
    fn gk_matrix_display() {
        let k = 3.0;
        let sc = gk_member(FamilyIndex::Finite(3));
        let (u1, u2, u3) = (0.7, -1.1, 0.4);
        let u = DVector::from_vec(vec![u1, u2, u3]);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, -u1, -u2, -u3,
                u1, 0.0, -u3 / k, u2 / k,
                u2, u3 / k, 0.0, -u1 / k,
                u3, -u2 / k, u1 / k, 0.0,
            ],
        );
        let j = j_operator(&sc, &u).unwrap();
        assert_relative_eq!(j.mat, expected, epsilon = 1e-15);
        assert_relative_eq!(j.mat, brute_force_j(&sc, &u), epsilon = 1e-15);
    }

    #[test]
    fn zero_u_gives_zero_matrix() {
        let sc = free_step_two(4).unwrap();
        let j = j_operator(&sc, &DVector::zeros(6)).unwrap();
        assert_eq!(j.mat, DMatrix::zeros(4, 4));
        assert!(j_operator(&sc, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn gk_square_structure() {
        // J_u^2 = -|u|^2 (P_{X_0} + P_u) - |u|^2/k^2 P_{u-perp}, negative definite for u != 0
        for k in [1u64, 2, 10, 1000] {
            let sc = gk_member(FamilyIndex::Finite(k));
            let u = DVector::from_vec(vec![0.3, -0.9, 1.7]);
            let j = j_operator(&sc, &u).unwrap().mat;
            let sq = &j * &j;
            let n2 = u.norm_squared();
            let kf = k as f64;
            let mut expected = DMatrix::zeros(4, 4);
            expected[(0, 0)] = -n2;
            let uu = &u * u.transpose();
            let lower = -&uu - (DMatrix::identity(3, 3) * n2 - &uu) / (kf * kf);
            expected.view_mut((1, 1), (3, 3)).copy_from(&lower);
            assert_relative_eq!(sq, expected, epsilon = 1e-12);
            let eig = (-sq).symmetric_eigen();
            let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            assert_relative_eq!(min, n2 / (kf * kf), max_relative = 1e-9);
        }
    }

    #[test]
    fn verdicts() {
        let h = metivier_check(&heisenberg(), 8, 0).unwrap();
        assert_eq!(h.status, MetivierStatus::Metivier);
        assert_relative_eq!(h.min_sigma, 1.0, epsilon = 1e-12);

        let g2 = metivier_check(&gk_member(FamilyIndex::Finite(2)), 16, 7).unwrap();
        assert_eq!(g2.status, MetivierStatus::Metivier);
        assert_relative_eq!(g2.min_sigma, 0.5, epsilon = 1e-10);

        let ginf = metivier_check(&gk_member(FamilyIndex::Infinite), 16, 7).unwrap();
        assert_eq!(ginf.status, MetivierStatus::NotMetivier);
        let w = ginf.witness.unwrap();
        assert_relative_eq!(w.norm(), 1.0, epsilon = 1e-12);
        assert!(j_operator(&gk_member(FamilyIndex::Infinite), &w).unwrap().sigma_min() <= SINGULAR_WITNESS_TOL);

        let odd = metivier_check(&free_step_two(3).unwrap(), 4, 0).unwrap();
        assert_eq!(odd.status, MetivierStatus::NotMetivier);
        assert!(odd.min_sigma <= SINGULAR_WITNESS_TOL);

        assert!(metivier_check(&heisenberg(), 0, 0).is_err());
    }

    #[test]
    fn free_four_generator_is_not_metivier() {
        // J_u for u along [X_1, X_2] kills X_3 and X_4
        let v = metivier_check(&free_step_two(4).unwrap(), 16, 3).unwrap();
        assert_eq!(v.status, MetivierStatus::NotMetivier);
    }

    #[test]
    fn ginf_witness_rank_two() {
        let sc = gk_member(FamilyIndex::Infinite);
        let j = j_operator(&sc, &DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert_eq!(crate::linalg::numerical_rank(&j.mat).rank, 2);
    }
}
