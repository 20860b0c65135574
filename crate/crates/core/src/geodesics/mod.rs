//! Normal geodesics, the exponential map and Carnot–Carathéodory distances.
//!
//! A covector `(xi0, u0)` generates the constant-speed curve with horizontal
//! velocity `v(t) = exp(t J_{u0}) xi0`; the curve itself solves
//! `gamma' = v + [gamma, v] / 2` from the identity.

mod control;
mod distance;
mod quadrature;
mod shooting;

pub use control::{solve_control, ControlOptions, ControlOutcome};
pub use distance::{distance, minimizing_check, DistanceEstimate, DistanceMethod, DistanceOptions};
pub use quadrature::{gauss_legendre, integrate};
pub use shooting::{shoot, ShootingOptions, ShootingOutcome};

use nalgebra::{DMatrix, DVector};

use crate::algebra::{GroupPoint, StructureConstants};
use crate::error::{check_len, CarnotError, Result};
use crate::jmaps::j_matrix;
use crate::linalg::SkewDecomposition;

/// Absolute quadrature target for the vertical component of the exponential map.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Initial momentum of a normal geodesic from the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector {
    pub xi0: DVector<f64>,
    pub u0: DVector<f64>,
}

impl Covector {
    pub fn new(xi0: DVector<f64>, u0: DVector<f64>) -> Self {
        Covector { xi0, u0 }
    }

    pub fn zeros(m: usize, d2: usize) -> Self {
        Covector {
            xi0: DVector::zeros(m),
            u0: DVector::zeros(d2),
        }
    }

    pub fn from_flat(m: usize, d2: usize, coords: &[f64]) -> Result<Self> {
        let p = GroupPoint::from_flat(m, d2, coords)?;
        Ok(Covector { xi0: p.xi, u0: p.u })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.xi0.iter().chain(self.u0.iter()).copied().collect()
    }

    /// Speed of the generated geodesic.
    pub fn speed(&self) -> f64 {
        self.xi0.norm()
    }

    /// `(s xi0, s u0)`: the same geodesic run `s` times as fast.
    pub fn time_scaled(&self, s: f64) -> Self {
        Covector {
            xi0: &self.xi0 * s,
            u0: &self.u0 * s,
        }
    }

    pub(crate) fn check(&self, sc: &StructureConstants) -> Result<()> {
        check_len("covector xi0", sc.m(), self.xi0.len())?;
        check_len("covector u0", sc.d2(), self.u0.len())
    }
}

/// Left-invariant frame: the tangent vector `v + [p, v] / 2` at `p` of the
/// horizontal direction `v`.
pub fn left_frame(sc: &StructureConstants, p: &GroupPoint, v: &DVector<f64>) -> Result<GroupPoint> {
    sc.check_point(p)?;
    check_len("horizontal vector", sc.m(), v.len())?;
    Ok(GroupPoint {
        xi: v.clone(),
        u: sc.bracket_xi(&p.xi, v) * 0.5,
    })
}

/// Precomputed normal geodesic for one covector.
#[derive(Debug, Clone)]
pub struct Geodesic {
    decomposition: SkewDecomposition,
    /// `xi0` in the rotation-block basis.
    reduced_xi0: DVector<f64>,
    /// Structure matrices conjugated into the rotation-block basis.
    reduced_layers: Vec<DMatrix<f64>>,
    covector: Covector,
}

impl Geodesic {
    pub fn new(sc: &StructureConstants, covector: &Covector) -> Result<Self> {
        covector.check(sc)?;
        let j = j_matrix(sc, &covector.u0);
        let decomposition = SkewDecomposition::new(&j);
        let q = &decomposition.basis;
        let reduced_xi0 = q.transpose() * &covector.xi0;
        let reduced_layers = (0..sc.d2())
            .map(|l| q.transpose() * sc.layer(l) * q)
            .collect();
        Ok(Geodesic {
            decomposition,
            reduced_xi0,
            reduced_layers,
            covector: covector.clone(),
        })
    }

    pub fn covector(&self) -> &Covector {
        &self.covector
    }

    /// Horizontal velocity `v(t)`.
    pub fn velocity(&self, t: f64) -> DVector<f64> {
        &self.decomposition.basis * self.decomposition.rotate_reduced(t, &self.reduced_xi0)
    }

    /// First-layer position `x(t)`.
    pub fn horizontal(&self, t: f64) -> DVector<f64> {
        &self.decomposition.basis * self.decomposition.integrate_reduced(t, &self.reduced_xi0)
    }

    /// `gamma(t)`.
    pub fn point(&self, t: f64) -> Result<GroupPoint> {
        let d2 = self.reduced_layers.len();
        let xi = self.horizontal(t);
        if self.covector.u0.iter().all(|&x| x == 0.0) {
            return Ok(GroupPoint::new(&self.covector.xi0 * t, DVector::zeros(d2)));
        }
        if t == 0.0 || self.reduced_xi0.norm() == 0.0 {
            return Ok(GroupPoint::new(xi, DVector::zeros(d2)));
        }
        let max_angle = self.decomposition.angles.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let panels = 1 + (max_angle * t.abs() / std::f64::consts::PI).ceil() as usize;
        let dec = &self.decomposition;
        let y = &self.reduced_xi0;
        let layers = &self.reduced_layers;
        let m = y.len();
        let flat: Vec<f64> = layers.iter().flat_map(|c| c.iter().copied()).collect();
        let (mut x, mut v) = (vec![0.0; m], vec![0.0; m]);
        let integrand = |s: f64, out: &mut [f64]| {
            dec.reduced_into(s, y.as_slice(), &mut x, &mut v);
            for (l, o) in out.iter_mut().enumerate() {
                // column-major layer l
                let c = &flat[l * m * m..(l + 1) * m * m];
                let mut acc = 0.0;
                for (j, &vj) in v.iter().enumerate() {
                    let col = &c[j * m..(j + 1) * m];
                    let mut dot = 0.0;
                    for (xi, cij) in x.iter().zip(col) {
                        dot += xi * cij;
                    }
                    acc += dot * vj;
                }
                *o = 0.5 * acc;
            }
        };
        // tighter than the nominal target so finite differences of the map stay clean
        let tol = QUADRATURE_TOL.min(1e-3 * QUADRATURE_TOL * (1.0 + y.norm_squared() * t * t));
        let u = integrate(integrand, 0.0, t, d2, tol, panels)?;
        Ok(GroupPoint::new(xi, u))
    }
}

/// The exponential map `(xi0, u0), t -> gamma(t)`, `t` in `[0, 1]`.
pub fn exp_map(sc: &StructureConstants, covector: &Covector, t: f64) -> Result<GroupPoint> {
    if !(0.0..=1.0).contains(&t) {
        return Err(CarnotError::Domain(format!("time {t} outside [0, 1]")));
    }
    Geodesic::new(sc, covector)?.point(t)
}

/// Endpoint map `E(lambda) = exp_map(lambda, 1)`.
pub(crate) fn endpoint(sc: &StructureConstants, covector: &Covector) -> Result<GroupPoint> {
    Geodesic::new(sc, covector)?.point(1.0)
}

/// A sampled horizontal curve.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    /// Generating covector when the path is a sampled normal geodesic.
    pub covector: Option<Covector>,
    pub times: Vec<f64>,
    pub points: Vec<GroupPoint>,
}

impl GeodesicPath {
    pub fn sample(sc: &StructureConstants, covector: &Covector, times: &[f64]) -> Result<Self> {
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CarnotError::Domain("sample times must be strictly increasing".into()));
        }
        let geo = Geodesic::new(sc, covector)?;
        let points = times.iter().map(|&t| geo.point(t)).collect::<Result<Vec<_>>>()?;
        Ok(GeodesicPath {
            covector: Some(covector.clone()),
            times: times.to_vec(),
            points,
        })
    }

    /// Piecewise-linear horizontal path through the given first-layer
    /// vertices, starting at the identity.
    pub fn polygon(sc: &StructureConstants, vertices: &[DVector<f64>]) -> Result<Self> {
        let mut p = sc.zero_point();
        let mut points = vec![p.clone()];
        for v in vertices {
            check_len("polygon vertex", sc.m(), v.len())?;
            let step = v - &p.xi;
            p = GroupPoint {
                u: &p.u + sc.bracket_xi(&p.xi, &step) * 0.5,
                xi: v.clone(),
            };
            points.push(p.clone());
        }
        let n = points.len();
        Ok(GeodesicPath {
            covector: None,
            times: (0..n).map(|k| k as f64 / (n - 1).max(1) as f64).collect(),
            points,
        })
    }
}

/// Sub-Riemannian length of a sampled horizontal path.
///
/// Sampled normal geodesics have constant speed `|xi0|`; other paths are
/// measured by their first-layer chords, which is exact for horizontal
/// polygons. Samples whose vertical increment is not explained by the
/// horizontal motion are rejected.
pub fn path_length(sc: &StructureConstants, path: &GeodesicPath) -> Result<f64> {
    if path.points.len() != path.times.len() {
        return Err(CarnotError::Domain("path times and points differ in length".into()));
    }
    let bound = sc.bracket_norm_bound();
    let mut chords = 0.0;
    for (k, w) in path.points.windows(2).enumerate() {
        sc.check_point(&w[0])?;
        sc.check_point(&w[1])?;
        let dx = &w[1].xi - &w[0].xi;
        let expected = sc.bracket_xi(&w[0].xi, &dx) * 0.5;
        let defect = (&w[1].u - &w[0].u - expected).norm();
        let chord = dx.norm();
        // samples of a curved geodesic may leave the chord by up to the enclosed area
        let slack = if path.covector.is_some() { bound * chord * chord } else { 0.0 };
        if defect > slack + 1e-9 * (1.0 + w[1].u.norm()) {
            return Err(CarnotError::Domain(format!(
                "path is not horizontal between samples {k} and {}: vertical defect {defect:.3e}",
                k + 1
            )));
        }
        chords += chord;
    }
    match (&path.covector, path.times.first(), path.times.last()) {
        (Some(c), Some(t0), Some(t1)) => Ok((t1 - t0) * c.speed()),
        _ => Ok(chords),
    }
}
