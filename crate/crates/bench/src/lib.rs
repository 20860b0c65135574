//! Fixed inputs shared by the solver benchmarks.

use carnot::algebra::GroupPoint;
use carnot::geodesics::Covector;
use nalgebra::DVector;

/// A generic Heisenberg covector with one full turn of rotation budget left.
pub fn heisenberg_covector() -> Covector {
    Covector::new(DVector::from_vec(vec![0.6, 0.8]), DVector::from_element(1, 2.5))
}

/// A generic `G_k` covector.
pub fn gk_covector() -> Covector {
    Covector::new(
        DVector::from_vec(vec![0.5, -0.3, 0.7, 0.2]),
        DVector::from_vec(vec![1.1, -0.4, 0.6]),
    )
}

pub fn heisenberg_target() -> GroupPoint {
    GroupPoint::new(DVector::from_vec(vec![0.4, -0.2]), DVector::from_element(1, 0.3))
}

pub fn gk_target() -> GroupPoint {
    GroupPoint::new(
        DVector::from_vec(vec![0.3, 0.1, -0.2, 0.4]),
        DVector::from_vec(vec![0.2, -0.1, 0.15]),
    )
}
