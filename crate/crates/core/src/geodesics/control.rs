//! Direct discretization: `N` piecewise-constant horizontal controls,
//! minimum energy subject to the endpoint constraint, solved by an augmented
//! Lagrangian with L-BFGS inner iterations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::shooting::homogeneous_norm;
use crate::algebra::{dilate, GroupPoint, StructureConstants};
use crate::error::{CarnotError, Result};
use crate::jmaps::j_matrix;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOptions {
    pub steps: usize,
    pub starts: usize,
    pub seed: u64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Endpoint residual accepted as feasible, relative to `1 + |q|` after
    /// normalizing `q` to unit homogeneous size.
    pub feasibility_tol: f64,
}

impl Default for ControlOptions {
    fn default() -> Self {
        ControlOptions {
            steps: 256,
            starts: 3,
            seed: 0,
            max_outer: 40,
            max_inner: 3000,
            feasibility_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutcome {
    /// Length of the discrete horizontal path, `h * sum |w_i|`.
    pub length: f64,
    /// `sqrt(h * sum |w_i|^2)`; equals `length` at constant speed.
    pub energy_length: f64,
    pub residual: f64,
    pub steps: usize,
    pub start_index: usize,
    pub outer_iterations: usize,
    pub feasible_starts: usize,
    /// Controls `w_i` of the reported path (scaled back to the target).
    pub controls: Vec<DVector<f64>>,
}

struct Problem<'a> {
    m: usize,
    d2: usize,
    steps: usize,
    h: f64,
    sc: &'a StructureConstants,
    target: DVector<f64>,
}

impl Problem<'_> {
    /// Endpoint of the discrete path: `x_N = h sum w`, `z_N = h^2/2 sum_i [S_i, w_i]`
    /// with prefix sums `S_i = w_0 + ... + w_{i-1}`.
    fn endpoint(&self, w: &[f64]) -> DVector<f64> {
        let (m, d2, h) = (self.m, self.d2, self.h);
        let mut prefix = vec![0.0; m];
        // sum_i S_i w_i^T
        let mut outer = vec![0.0; m * m];
        for wi in w.chunks_exact(m) {
            for a in 0..m {
                let pa = prefix[a];
                if pa != 0.0 {
                    for b in 0..m {
                        outer[a * m + b] += pa * wi[b];
                    }
                }
            }
            for a in 0..m {
                prefix[a] += wi[a];
            }
        }
        let mut out = DVector::zeros(m + d2);
        for a in 0..m {
            out[a] = prefix[a] * h;
        }
        for l in 0..d2 {
            let c = self.sc.layer(l);
            let mut z = 0.0;
            for a in 0..m {
                for b in 0..m {
                    z += c[(a, b)] * outer[a * m + b];
                }
            }
            out[m + l] = z * 0.5 * h * h;
        }
        out
    }

    fn constraint(&self, w: &[f64]) -> DVector<f64> {
        self.endpoint(w) - &self.target
    }

    /// Augmented Lagrangian value and gradient.
    fn lagrangian(&self, w: &[f64], mult: &DVector<f64>, rho: f64, grad: &mut [f64]) -> f64 {
        let (m, d2, h) = (self.m, self.d2, self.h);
        let c = self.constraint(w);
        let energy: f64 = h * w.iter().map(|x| x * x).sum::<f64>();
        let value = energy + mult.dot(&c) + 0.5 * rho * c.norm_squared();
        let g = mult + &c * rho;
        let jg = if d2 > 0 {
            j_matrix(self.sc, &g.rows(m, d2).into_owned())
        } else {
            DMatrix::zeros(m, m)
        };

        let mut total = vec![0.0; m];
        for wi in w.chunks_exact(m) {
            for a in 0..m {
                total[a] += wi[a];
            }
        }
        // R_i = (sum after i) - (sum before i); d<g, z_N>/dw_i = -h^2/2 J_g R_i
        let mut before = vec![0.0; m];
        let mut r = vec![0.0; m];
        let k = -0.5 * h * h;
        for (wi, gi) in w.chunks_exact(m).zip(grad.chunks_exact_mut(m)) {
            for a in 0..m {
                r[a] = total[a] - 2.0 * before[a] - wi[a];
            }
            for a in 0..m {
                let mut v = 0.0;
                for b in 0..m {
                    v += jg[(a, b)] * r[b];
                }
                gi[a] = 2.0 * h * wi[a] + h * g[a] + k * v;
            }
            for a in 0..m {
                before[a] += wi[a];
            }
        }
        value
    }

    fn length(&self, w: &[f64]) -> (f64, f64) {
        let m = self.m;
        let mut len = 0.0;
        let mut energy = 0.0;
        for i in 0..self.steps {
            let n2: f64 = w[i * m..(i + 1) * m].iter().map(|x| x * x).sum();
            len += n2.sqrt();
            energy += n2;
        }
        (self.h * len, (self.h * energy).sqrt())
    }
}

/// Shortest discrete horizontal path from the identity to `target`.
pub fn solve_control(sc: &StructureConstants, target: &GroupPoint, opts: &ControlOptions) -> Result<ControlOutcome> {
    sc.check_point(target)?;
    if opts.steps < 2 || opts.starts == 0 {
        return Err(CarnotError::Domain("control solver needs at least 2 steps and 1 start".into()));
    }
    let (m, d2) = (sc.m(), sc.d2());
    let scale = homogeneous_norm(target);
    if scale == 0.0 {
        return Ok(ControlOutcome {
            length: 0.0,
            energy_length: 0.0,
            residual: 0.0,
            steps: opts.steps,
            start_index: 0,
            outer_iterations: 0,
            feasible_starts: 1,
            controls: vec![DVector::zeros(m); opts.steps],
        });
    }
    let unit = dilate(1.0 / scale, target)?;
    let problem = Problem {
        m,
        d2,
        steps: opts.steps,
        h: 1.0 / opts.steps as f64,
        sc,
        target: DVector::from_vec(unit.to_flat()),
    };
    let tol = opts.feasibility_tol * (1.0 + problem.target.norm());

    let mut best: Option<(usize, Vec<f64>, f64, usize)> = None;
    let mut feasible_starts = 0;
    let mut best_residual = f64::INFINITY;
    for start in 0..opts.starts {
        let mut w = initial_controls(&problem, &unit, opts.seed, start);
        let (residual, outer) = augmented_lagrangian(&problem, &mut w, opts, tol);
        best_residual = best_residual.min(residual);
        if residual > tol {
            continue;
        }
        feasible_starts += 1;
        let len = problem.length(&w).0;
        if best.as_ref().is_none_or(|b| len < problem.length(&b.1).0) {
            best = Some((start, w, residual, outer));
        }
    }
    let Some((start_index, w, residual, outer_iterations)) = best else {
        return Err(CarnotError::Numerical(format!(
            "control solver did not reach the endpoint: best residual {:.3e} > {tol:.3e}",
            best_residual * scale
        )));
    };
    let (length, energy_length) = problem.length(&w);
    Ok(ControlOutcome {
        length: length * scale,
        energy_length: energy_length * scale,
        residual: residual * scale,
        steps: opts.steps,
        start_index,
        outer_iterations,
        feasible_starts,
        controls: w
            .chunks(m)
            .map(|c| DVector::from_column_slice(c) * scale)
            .collect(),
    })
}

/// Straight segment to the first-layer target plus a seeded low-frequency
/// loop sized to the vertical target.
fn initial_controls(problem: &Problem<'_>, unit: &GroupPoint, seed: u64, start: usize) -> Vec<f64> {
    let m = problem.m;
    let mut rng = stream_rng(seed ^ 0x5eed_c0de, start as u64);
    let amp = 2.0 * unit.u.norm().sqrt() + 0.1;
    let a = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal) * amp);
    let b = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal) * amp);
    let a2 = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.1 * amp);
    let b2 = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.1 * amp);
    let tau = std::f64::consts::TAU;
    let mut w = Vec::with_capacity(m * problem.steps);
    for i in 0..problem.steps {
        let t = (i as f64 + 0.5) * problem.h;
        let v = &unit.xi + &a * (tau * t).cos() + &b * (tau * t).sin() + &a2 * (2.0 * tau * t).cos()
            + &b2 * (2.0 * tau * t).sin();
        w.extend(v.iter());
    }
    w
}

fn augmented_lagrangian(problem: &Problem<'_>, w: &mut Vec<f64>, opts: &ControlOptions, tol: f64) -> (f64, usize) {
    let mut mult = DVector::zeros(problem.m + problem.d2);
    let mut rho = 10.0;
    let mut residual = problem.constraint(w).norm();
    for outer in 1..=opts.max_outer {
        let gtol = (1e-3 * residual).clamp(1e-11, 1e-6);
        lbfgs(
            |x, g| problem.lagrangian(x, &mult, rho, g),
            w,
            opts.max_inner,
            gtol,
        );
        let c = problem.constraint(w);
        let new_residual = c.norm();
        if !new_residual.is_finite() {
            return (f64::INFINITY, outer);
        }
        mult += &c * rho;
        if new_residual <= tol {
            return (new_residual, outer);
        }
        if new_residual > 0.25 * residual {
            rho = (rho * 10.0).min(1e9);
        }
        residual = new_residual;
    }
    (residual, opts.max_outer)
}

/// Limited-memory BFGS with Armijo backtracking; stops when the gradient
/// max-norm drops below `gtol`.
fn lbfgs<F>(mut f: F, x: &mut [f64], max_iter: usize, gtol: f64) -> usize
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    const MEMORY: usize = 12;
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut fx = f(x, &mut g);
    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(MEMORY);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(MEMORY);
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();

    for iter in 0..max_iter {
        let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if gmax <= gtol {
            return iter;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let rho_i = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alpha[i] = rho_i * dot(&s_hist[i], &d);
            for (dj, yj) in d.iter_mut().zip(&y_hist[i]) {
                *dj -= alpha[i] * yj;
            }
        }
        let gamma = if k > 0 {
            dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1])
        } else {
            1.0 / gmax.max(1e-300) * 1e-2
        };
        d.iter_mut().for_each(|v| *v *= gamma);
        for i in 0..k {
            let rho_i = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho_i * dot(&y_hist[i], &d);
            for (dj, sj) in d.iter_mut().zip(&s_hist[i]) {
                *dj += (alpha[i] - beta) * sj;
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
            s_hist.clear();
            y_hist.clear();
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = x[i] + step * d[i];
            }
            let ft = f(&trial, &mut g_trial);
            let dphi = dot(&g_trial, &d);
            // near the roundoff floor of f, fall back on the directional derivative
            let approx_wolfe = ft <= fx + 1e-12 * fx.abs() && dphi >= 0.9 * slope && dphi <= -0.9 * slope;
            if ft.is_finite() && (ft <= fx + 1e-4 * step * slope || approx_wolfe) {
                let s: Vec<f64> = (0..n).map(|i| trial[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| g_trial[i] - g[i]).collect();
                if dot(&s, &y) > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                    if s_hist.len() == MEMORY {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                    s_hist.push(s);
                    y_hist.push(y);
                }
                x.copy_from_slice(&trial);
                g.copy_from_slice(&g_trial);
                fx = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return iter;
        }
    }
    max_iter
}
