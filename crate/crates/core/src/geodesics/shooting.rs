//! Multi-start damped Gauss–Newton on the endpoint map.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{endpoint, Covector};
use crate::algebra::{dilate, GroupPoint, StructureConstants};
use crate::error::{CarnotError, Result};
use crate::jmaps::j_matrix;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingOptions {
    pub starts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Converged when `|E(lambda) - q| <= residual_tol * (1 + |q|)`.
    pub residual_tol: f64,
    /// Extra covectors tried before the random starts.
    pub warm_starts: Vec<Covector>,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            starts: 32,
            max_iter: 80,
            seed: 0,
            residual_tol: 1e-8,
            warm_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingOutcome {
    /// Length `|xi0|` of the shortest converged geodesic.
    pub length: f64,
    pub covector: Covector,
    pub residual: f64,
    pub converged_starts: usize,
    pub starts_used: usize,
    /// Index of the start that produced the reported geodesic.
    pub start_index: usize,
}

const STALL_WINDOW: usize = 8;

struct Attempt {
    covector: Covector,
    residual: f64,
}

/// Homogeneous size `|xi| + sqrt(|u|)`; dilations scale it linearly.
pub(crate) fn homogeneous_norm(p: &GroupPoint) -> f64 {
    p.xi.norm() + p.u.norm().sqrt()
}

/// Finds normal geodesics from the identity to `target` and returns the
/// shortest converged one.
pub fn shoot(sc: &StructureConstants, target: &GroupPoint, opts: &ShootingOptions) -> Result<ShootingOutcome> {
    sc.check_point(target)?;
    if opts.starts == 0 && opts.warm_starts.is_empty() {
        return Err(CarnotError::Domain("shooting needs at least one start".into()));
    }
    let scale = homogeneous_norm(target);
    let (m, d2) = (sc.m(), sc.d2());
    if scale == 0.0 {
        return Ok(ShootingOutcome {
            length: 0.0,
            covector: Covector::zeros(m, d2),
            residual: 0.0,
            converged_starts: 1,
            starts_used: 1,
            start_index: 0,
        });
    }
    // Solve for the dilated target of unit homogeneous size; (c xi0, u0)
    // reaches delta_c of the endpoint of (xi0, u0).
    let unit_target = dilate(1.0 / scale, target)?;
    let tol = opts.residual_tol * (1.0 + unit_target.norm());

    let rotation_scale = (0..d2)
        .map(|l| {
            let mut e = DVector::zeros(d2);
            e[l] = 1.0;
            j_matrix(sc, &e).norm() / std::f64::consts::SQRT_2
        })
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let u_sd = std::f64::consts::PI / rotation_scale;
    let xi_sd = 2.0 / (m as f64).sqrt();

    let mut initial: Vec<Covector> = opts
        .warm_starts
        .iter()
        .map(|c| Covector::new(&c.xi0 / scale, c.u0.clone()))
        .collect();
    initial.push(Covector::new(unit_target.xi.clone(), DVector::zeros(d2)));
    for k in 1..opts.starts {
        let mut rng = stream_rng(opts.seed, k as u64);
        let xi0 = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal) * xi_sd);
        let u0 = DVector::from_fn(d2, |_, _| rng.sample::<f64, _>(StandardNormal) * u_sd);
        initial.push(Covector::new(xi0, u0));
    }
    let starts_used = initial.len();

    let attempts: Vec<Option<Attempt>> = initial
        .into_par_iter()
        .map(|c| levenberg_marquardt(sc, &unit_target, c, opts.max_iter, tol))
        .collect();

    let best_residual = attempts
        .iter()
        .flatten()
        .map(|a| a.residual)
        .fold(f64::INFINITY, f64::min);
    let mut best: Option<(usize, &Attempt)> = None;
    let mut converged_starts = 0;
    for (idx, a) in attempts.iter().enumerate() {
        let Some(a) = a else { continue };
        if a.residual > tol {
            continue;
        }
        converged_starts += 1;
        if best.is_none_or(|(_, b)| a.covector.speed() < b.covector.speed()) {
            best = Some((idx, a));
        }
    }
    let Some((start_index, found)) = best else {
        return Err(CarnotError::Inconclusive {
            reason: format!("no shooting start converged ({starts_used} starts)"),
            best_residual: best_residual * scale,
        });
    };
    let covector = Covector::new(&found.covector.xi0 * scale, found.covector.u0.clone());
    Ok(ShootingOutcome {
        length: covector.speed(),
        covector,
        residual: found.residual * scale,
        converged_starts,
        starts_used,
        start_index,
    })
}

fn residual_vec(sc: &StructureConstants, target: &GroupPoint, flat: &[f64]) -> Option<DVector<f64>> {
    let c = Covector::from_flat(sc.m(), sc.d2(), flat).ok()?;
    let p = endpoint(sc, &c).ok()?;
    let r = DVector::from_vec(p.to_flat()) - DVector::from_vec(target.to_flat());
    r.iter().all(|x| x.is_finite()).then_some(r)
}

fn levenberg_marquardt(
    sc: &StructureConstants,
    target: &GroupPoint,
    start: Covector,
    max_iter: usize,
    tol: f64,
) -> Option<Attempt> {
    let n = sc.m() + sc.d2();
    let mut x = start.to_flat();
    let mut f = residual_vec(sc, target, &x)?;
    let mut damping = 1e-3;
    let mut checkpoint = f.norm();
    for iter in 0..max_iter {
        if f.norm() <= tol {
            break;
        }
        if iter > 0 && iter % STALL_WINDOW == 0 {
            // abandon starts that stopped making progress
            if f.norm() > 0.5 * checkpoint {
                break;
            }
            checkpoint = f.norm();
        }
        let jac = jacobian(sc, target, &x)?;
        let jtj = jac.transpose() * &jac;
        let jtf = jac.transpose() * &f;
        let diag_scale = jtj.diagonal().max().max(1e-12);
        let mut accepted = false;
        while damping < 1e12 {
            let mut lhs = jtj.clone();
            for i in 0..n {
                lhs[(i, i)] += damping * diag_scale;
            }
            let Some(chol) = lhs.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&jtf));
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if let Some(ft) = residual_vec(sc, target, &trial) {
                if ft.norm() < f.norm() {
                    x = trial;
                    f = ft;
                    damping = (damping / 5.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            damping *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    Some(Attempt {
        covector: Covector::from_flat(sc.m(), sc.d2(), &x).ok()?,
        residual: f.norm(),
    })
}

fn jacobian(sc: &StructureConstants, target: &GroupPoint, x: &[f64]) -> Option<DMatrix<f64>> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = x.to_vec();
    for i in 0..n {
        let h = 1e-6 * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let fp = residual_vec(sc, target, &probe)?;
        probe[i] = x[i] - h;
        let fm = residual_vec(sc, target, &probe)?;
        probe[i] = x[i];
        jac.set_column(i, &((fp - fm) / (2.0 * h)));
    }
    Some(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::heisenberg;
    use crate::deformation::{gk_member, FamilyIndex};
    use crate::geodesics::exp_map;

    #[test]
    fn first_layer_target_is_straight() {
        let sc = gk_member(FamilyIndex::Finite(2));
        let q = GroupPoint::new(DVector::from_vec(vec![0.3, -0.4, 1.2, 0.0]), DVector::zeros(3));
        let out = shoot(&sc, &q, &ShootingOptions::default()).unwrap();
        assert!((out.length - q.xi.norm()).abs() < 1e-9);
    }

    #[test]
    fn heisenberg_center() {
        // d(0, (0, 0, z)) = sqrt(4 pi |z|)
        let sc = heisenberg();
        let q = GroupPoint::new(DVector::zeros(2), DVector::from_element(1, 0.5));
        let out = shoot(&sc, &q, &ShootingOptions::default()).unwrap();
        let exact = (4.0 * std::f64::consts::PI * 0.5).sqrt();
        assert!((out.length - exact).abs() < 1e-6, "{} vs {exact}", out.length);
        let reached = exp_map(&sc, &out.covector, 1.0).unwrap();
        assert!(reached.max_abs_diff(&q) < 1e-7);
    }

    #[test]
    fn identity_target() {
        let out = shoot(&heisenberg(), &heisenberg().zero_point(), &ShootingOptions::default()).unwrap();
        assert_eq!(out.length, 0.0);
    }
}
