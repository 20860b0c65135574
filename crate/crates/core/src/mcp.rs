//! Distortion coefficients and empirical contraction exponents.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::algebra::{GroupPoint, StructureConstants};
use crate::error::{CarnotError, Result};
use crate::geodesics::{exp_map, minimizing_check, shoot, Covector, DistanceOptions, ShootingOptions};
use crate::jmaps::j_matrix;
use crate::linalg::singular_values;
use crate::rng::stream_rng;

/// Condition number above which a finite-difference Jacobian is flagged.
pub const CONDITION_LIMIT: f64 = 1e12;

/// `sin(sqrt(K) t) / sqrt(K)`, `t`, or `sinh(sqrt(-K) t) / sqrt(-K)`.
pub fn s_k(k: f64, t: f64) -> f64 {
    if k > 0.0 {
        let r = k.sqrt();
        (r * t).sin() / r
    } else if k < 0.0 {
        let r = (-k).sqrt();
        (r * t).sinh() / r
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionQuery {
    pub k: f64,
    pub n: f64,
    pub s: f64,
    pub d: f64,
}

/// `s * [s_K(s d / sqrt(N-1)) / s_K(d / sqrt(N-1))]^(N-1)` with `0/0 = 1`
/// and the bracket equal to 1 when `N = 1`.
pub fn mcp_integrand(q: &DistortionQuery) -> Result<f64> {
    let DistortionQuery { k, n, s, d } = *q;
    if !(n >= 1.0) || !(0.0..=1.0).contains(&s) || !(d >= 0.0) || !k.is_finite() {
        return Err(CarnotError::Domain(format!(
            "distortion query needs N >= 1, s in [0, 1], d >= 0; got N = {n}, s = {s}, d = {d}, K = {k}"
        )));
    }
    if n == 1.0 {
        return Ok(s);
    }
    let scale = (n - 1.0).sqrt();
    if k > 0.0 && d >= std::f64::consts::PI * scale / k.sqrt() {
        return Err(CarnotError::Domain(format!(
            "d = {d} outside the ball of radius pi sqrt((N-1)/K) for K = {k}, N = {n}"
        )));
    }
    let t = d / scale;
    let num = s_k(k, s * t);
    let den = s_k(k, t);
    let ratio = if num == 0.0 && den == 0.0 { 1.0 } else { num / den };
    Ok(s * ratio.powf(n - 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianEstimate {
    /// `|det D E(lambda)|`.
    pub det: f64,
    pub condition: f64,
    pub flagged: bool,
    pub matrix: DMatrix<f64>,
}

/// Absolute determinant of the derivative of `lambda -> exp_map(lambda, 1)`
/// by central differences.
pub fn jacobian_exp(sc: &StructureConstants, covector: &Covector) -> Result<JacobianEstimate> {
    jacobian_with_step(sc, covector, 1e-5)
}

pub(crate) fn jacobian_with_step(sc: &StructureConstants, covector: &Covector, base: f64) -> Result<JacobianEstimate> {
    covector.check(sc)?;
    let (m, d2) = (sc.m(), sc.d2());
    let x = covector.to_flat();
    let n = x.len();
    let mut matrix = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for i in 0..n {
        let h = base * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let fp = exp_map(sc, &Covector::from_flat(m, d2, &probe)?, 1.0)?.to_flat();
        probe[i] = x[i] - h;
        let fm = exp_map(sc, &Covector::from_flat(m, d2, &probe)?, 1.0)?.to_flat();
        probe[i] = x[i];
        for r in 0..n {
            matrix[(r, i)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    let sv = singular_values(&matrix);
    let largest = sv.first().copied().unwrap_or(0.0);
    let smallest = sv.last().copied().unwrap_or(0.0);
    let condition = if smallest > 0.0 { largest / smallest } else { f64::INFINITY };
    let det = matrix.determinant().abs();
    Ok(JacobianEstimate {
        det,
        condition,
        flagged: !(condition <= CONDITION_LIMIT) || det == 0.0 || !det.is_finite(),
        matrix,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionSample {
    pub covector: Covector,
    pub s: f64,
    /// `None` when a Jacobian was zero or flagged.
    pub exponent: Option<f64>,
    pub minimizing: bool,
    pub discard_reason: Option<String>,
}

/// `log(s^n J(s lambda) / J(lambda)) / log(s)` for `0 < s < 1`.
pub fn contraction_exponent(
    sc: &StructureConstants,
    covector: &Covector,
    s: f64,
    minimizing: bool,
) -> Result<ContractionSample> {
    let full = jacobian_exp(sc, covector)?;
    contraction_from(sc, covector, &full, s, minimizing)
}

fn contraction_from(
    sc: &StructureConstants,
    covector: &Covector,
    full: &JacobianEstimate,
    s: f64,
    minimizing: bool,
) -> Result<ContractionSample> {
    if !(s > 0.0 && s < 1.0) {
        return Err(CarnotError::Domain(format!("contraction parameter s = {s} not in (0, 1)")));
    }
    let scaled = jacobian_exp(sc, &covector.time_scaled(s))?;
    let mut sample = ContractionSample {
        covector: covector.clone(),
        s,
        exponent: None,
        minimizing,
        discard_reason: None,
    };
    if full.flagged || scaled.flagged {
        sample.discard_reason = Some(format!(
            "degenerate Jacobian: det {:.3e} (cond {:.3e}) at lambda, det {:.3e} (cond {:.3e}) at s lambda",
            full.det, full.condition, scaled.det, scaled.condition
        ));
        return Ok(sample);
    }
    let n = (sc.m() + sc.d2()) as f64;
    sample.exponent = Some(n + (scaled.det / full.det).ln() / s.ln());
    Ok(sample)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovectorSampler {
    /// Unit `xi0`, `u0` normal with scale `pi` over the largest rotation rate.
    Normal,
    /// Unit `xi0`, `u0 = 0`.
    Horizontal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NceOptions {
    pub sampler: CovectorSampler,
    pub distance: DistanceOptions,
}

impl Default for NceOptions {
    fn default() -> Self {
        let mut distance = DistanceOptions::default();
        distance.shooting.starts = 12;
        distance.shooting.max_iter = 60;
        distance.control.steps = 128;
        distance.control.starts = 1;
        NceOptions {
            sampler: CovectorSampler::Normal,
            distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NceReport {
    /// Largest exponent over minimizing samples and the grid; `-inf` if none.
    pub value: f64,
    pub witness: Option<(Covector, f64)>,
    pub samples: usize,
    pub minimizing: usize,
    pub excluded: usize,
    pub discarded: usize,
    pub s_grid: Vec<f64>,
    pub seed: u64,
    /// One row per (sample, s), in sample order.
    pub rows: Vec<ContractionSample>,
}

impl NceReport {
    pub fn exclusion_rate(&self) -> f64 {
        self.excluded as f64 / self.samples as f64
    }
}

/// Seeded covector `index` of the sampler.
pub fn sample_covector(sc: &StructureConstants, sampler: CovectorSampler, seed: u64, index: u64) -> Covector {
    let (m, d2) = (sc.m(), sc.d2());
    let mut rng = stream_rng(seed, index);
    let mut xi0 = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = xi0.norm();
    if norm > 0.0 {
        xi0 /= norm;
    } else {
        xi0[0] = 1.0;
    }
    let u0 = match sampler {
        CovectorSampler::Horizontal => DVector::zeros(d2),
        CovectorSampler::Normal => {
            let rate = (0..d2)
                .map(|l| {
                    let mut e = DVector::zeros(d2);
                    e[l] = 1.0;
                    j_matrix(sc, &e).norm() / std::f64::consts::SQRT_2
                })
                .fold(0.0f64, f64::max)
                .max(1e-12);
            let sd = std::f64::consts::PI / rate;
            DVector::from_fn(d2, |_, _| rng.sample::<f64, _>(StandardNormal) * sd)
        }
    };
    Covector::new(xi0, u0)
}

/// Empirical lower bound for the curvature exponent: the largest contraction
/// exponent over seeded minimizing covectors and the `s` grid.
pub fn nce_lower_bound(
    sc: &StructureConstants,
    samples: usize,
    s_grid: &[f64],
    seed: u64,
    opts: &NceOptions,
) -> Result<NceReport> {
    if samples == 0 {
        return Err(CarnotError::Domain("need at least one sample".into()));
    }
    if s_grid.is_empty() || s_grid.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
        return Err(CarnotError::Domain("s grid must be a nonempty subset of (0, 1)".into()));
    }
    let per_sample: Vec<Result<Option<Vec<ContractionSample>>>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let covector = sample_covector(sc, opts.sampler, seed, i as u64);
            let dist = opts.distance.clone().with_seed(seed.wrapping_add(i as u64));
            if !minimizing_check(sc, &covector, &dist)? {
                return Ok(None);
            }
            let full = jacobian_exp(sc, &covector)?;
            s_grid
                .iter()
                .map(|&s| contraction_from(sc, &covector, &full, s, true))
                .collect::<Result<Vec<_>>>()
                .map(Some)
        })
        .collect();

    let mut rows = Vec::new();
    let mut excluded = 0;
    for r in per_sample {
        match r? {
            Some(mut v) => rows.append(&mut v),
            None => excluded += 1,
        }
    }
    let minimizing = samples - excluded;
    if minimizing == 0 {
        return Err(CarnotError::Inconclusive {
            reason: format!("all {samples} sampled covectors failed the minimizing check"),
            best_residual: f64::NAN,
        });
    }
    let discarded = rows.iter().filter(|r| r.exponent.is_none()).count();
    let mut value = f64::NEG_INFINITY;
    let mut witness = None;
    for row in &rows {
        if let Some(e) = row.exponent {
            if e > value {
                value = e;
                witness = Some((row.covector.clone(), row.s));
            }
        }
    }
    Ok(NceReport {
        value,
        witness,
        samples,
        minimizing,
        excluded,
        discarded,
        s_grid: s_grid.to_vec(),
        seed,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeRatio {
    pub ratio: f64,
    pub std_error: f64,
    pub points: usize,
    pub failures: usize,
}

/// Monte Carlo estimate of `mu(Z_s(0, A)) / mu(A)` for the coordinate ball
/// `A = B(center, radius)`: each sample `y` is pulled back to a covector by
/// shooting and weighted by `s^n J(s lambda) / J(lambda)`.
pub fn zs_volume_ratio(
    sc: &StructureConstants,
    center: &GroupPoint,
    radius: f64,
    s: f64,
    mc_points: usize,
    seed: u64,
    shooting: &ShootingOptions,
) -> Result<VolumeRatio> {
    sc.check_point(center)?;
    if !(radius > 0.0) || !(s > 0.0 && s <= 1.0) || mc_points < 2 {
        return Err(CarnotError::Domain(format!(
            "volume ratio needs radius > 0, s in (0, 1], at least 2 points; got {radius}, {s}, {mc_points}"
        )));
    }
    let (m, d2) = (sc.m(), sc.d2());
    let n = m + d2;
    let c = center.to_flat();
    let weights: Vec<Option<f64>> = (0..mc_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let y = uniform_in_ball(&mut rng, n, radius);
            let y: Vec<f64> = y.iter().zip(&c).map(|(a, b)| a + b).collect();
            let y = GroupPoint::from_flat(m, d2, &y).ok()?;
            let mut opts = shooting.clone();
            opts.seed = seed.wrapping_add(i as u64);
            let lambda = shoot(sc, &y, &opts).ok()?.covector;
            if s == 1.0 {
                return Some(1.0);
            }
            let full = jacobian_exp(sc, &lambda).ok()?;
            let scaled = jacobian_exp(sc, &lambda.time_scaled(s)).ok()?;
            (!full.flagged && !scaled.flagged).then(|| s.powi(n as i32) * scaled.det / full.det)
        })
        .collect();
    let ok: Vec<f64> = weights.iter().flatten().copied().collect();
    let failures = mc_points - ok.len();
    if failures as f64 > 0.05 * mc_points as f64 || ok.len() < 2 {
        return Err(CarnotError::Inconclusive {
            reason: format!("{failures} of {mc_points} samples could not be pulled back"),
            best_residual: f64::NAN,
        });
    }
    let count = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / count;
    let var = ok.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (count - 1.0);
    Ok(VolumeRatio {
        ratio: mean,
        std_error: (var / count).sqrt(),
        points: mc_points,
        failures,
    })
}

/// Uniform point in the Euclidean ball of `radius` in `R^n`.
pub fn uniform_in_ball<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
    let dir = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    (dir.normalize() * r).iter().copied().collect()
}
