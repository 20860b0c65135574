use std::fmt;

use super::control::{solve_control, ControlOptions, ControlOutcome};
use super::shooting::{shoot, ShootingOptions, ShootingOutcome};
use super::{endpoint, Covector};
use crate::algebra::{GroupPoint, StructureConstants};
use crate::error::{CarnotError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMethod {
    Shooting,
    Control,
    Both,
}

impl fmt::Display for DistanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMethod::Shooting => "shooting",
            DistanceMethod::Control => "control",
            DistanceMethod::Both => "both",
        })
    }
}

impl std::str::FromStr for DistanceMethod {
    type Err = CarnotError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shooting" => Ok(DistanceMethod::Shooting),
            "control" => Ok(DistanceMethod::Control),
            "both" => Ok(DistanceMethod::Both),
            other => Err(CarnotError::Domain(format!("unknown distance method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistanceOptions {
    pub shooting: ShootingOptions,
    pub control: ControlOptions,
}

impl DistanceOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.shooting.seed = seed;
        self.control.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEstimate {
    pub method: DistanceMethod,
    /// Left-translated target `(-p) * q`.
    pub target: GroupPoint,
    pub shooting: Option<ShootingOutcome>,
    /// Why shooting produced no value, with its best residual.
    pub shooting_failure: Option<(String, f64)>,
    pub control: Option<ControlOutcome>,
    pub seed: u64,
}

impl DistanceEstimate {
    /// Smallest length among the available solver results.
    pub fn value(&self) -> f64 {
        let s = self.shooting.as_ref().map(|s| s.length);
        let c = self.control.as_ref().map(|c| c.length);
        match (s, c) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => f64::NAN,
        }
    }

    /// `|shooting - control| / control` when both are available.
    pub fn relative_gap(&self) -> Option<f64> {
        let s = self.shooting.as_ref()?.length;
        let c = self.control.as_ref()?.length;
        if c == 0.0 {
            return Some(if s == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Some((s - c).abs() / c)
    }
}

/// Carnot–Carathéodory distance `d(p, q) = d(0, (-p) * q)`.
pub fn distance(
    sc: &StructureConstants,
    p: &GroupPoint,
    q: &GroupPoint,
    method: DistanceMethod,
    opts: &DistanceOptions,
) -> Result<DistanceEstimate> {
    let target = sc.mul(&sc.inv(p), q)?;
    let mut est = DistanceEstimate {
        method,
        target: target.clone(),
        shooting: None,
        shooting_failure: None,
        control: None,
        seed: opts.shooting.seed,
    };
    if matches!(method, DistanceMethod::Shooting | DistanceMethod::Both) {
        match shoot(sc, &target, &opts.shooting) {
            Ok(s) => est.shooting = Some(s),
            Err(CarnotError::Inconclusive { reason, best_residual }) if method == DistanceMethod::Both => {
                est.shooting_failure = Some((reason, best_residual));
            }
            Err(e) => return Err(e),
        }
    }
    if matches!(method, DistanceMethod::Control | DistanceMethod::Both) {
        est.control = Some(solve_control(sc, &target, &opts.control)?);
    }
    Ok(est)
}

/// Heuristic cut-locus filter: the geodesic of `covector` on `[0, 1]` is
/// accepted when no solver finds a path to its endpoint that is shorter by
/// more than `1e-3 (1 + |xi0|)`.
pub fn minimizing_check(sc: &StructureConstants, covector: &Covector, opts: &DistanceOptions) -> Result<bool> {
    covector.check(sc)?;
    let speed = covector.speed();
    if speed == 0.0 || covector.u0.iter().all(|&x| x == 0.0) {
        return Ok(true);
    }
    let target = endpoint(sc, covector)?;
    let bound = speed - 1e-3 * (1.0 + speed);
    let mut opts = opts.clone();
    opts.shooting.warm_starts.push(covector.clone());
    // a shorter shooting solution already decides the minimum
    if let Ok(s) = shoot(sc, &target, &opts.shooting) {
        if s.length < bound {
            return Ok(false);
        }
    }
    let control = solve_control(sc, &target, &opts.control)?;
    Ok(control.length >= bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::heisenberg;
    use nalgebra::DVector;

    #[test]
    fn zero_distance() {
        let sc = heisenberg();
        let p = GroupPoint::new(DVector::from_vec(vec![0.3, 0.2]), DVector::from_element(1, -1.0));
        let est = distance(&sc, &p, &p, DistanceMethod::Both, &DistanceOptions::default()).unwrap();
        assert_eq!(est.value(), 0.0);
        assert_eq!(est.relative_gap(), Some(0.0));
    }

    #[test]
    fn heisenberg_minimizing_examples() {
        let sc = heisenberg();
        let opts = DistanceOptions::default();
        let straight = Covector::new(DVector::from_vec(vec![1.0, 0.5]), DVector::zeros(1));
        assert!(minimizing_check(&sc, &straight, &opts).unwrap());
        assert!(minimizing_check(&sc, &Covector::zeros(2, 1), &opts).unwrap());
        let short = Covector::new(DVector::from_vec(vec![1.0, 0.0]), DVector::from_element(1, 3.0));
        assert!(minimizing_check(&sc, &short, &opts).unwrap());
        // past the first return to the center axis at |u0| = 2 pi
        let long = Covector::new(DVector::from_vec(vec![1.0, 0.0]), DVector::from_element(1, 9.0));
        assert!(!minimizing_check(&sc, &long, &opts).unwrap());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("both".parse::<DistanceMethod>().unwrap(), DistanceMethod::Both);
        assert!("nope".parse::<DistanceMethod>().is_err());
    }
}
