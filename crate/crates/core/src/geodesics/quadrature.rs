//! Adaptive Gauss–Legendre quadrature for vector-valued integrands.

use std::sync::OnceLock;

use nalgebra::DVector;

use crate::error::{CarnotError, Result};

const ORDER: usize = 16;
const MAX_DEPTH: usize = 40;

/// Nodes and weights on [-1, 1] by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn panel<F>(f: &mut F, a: f64, b: f64, acc: &mut [f64], buf: &mut [f64])
where
    F: FnMut(f64, &mut [f64]),
{
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    acc.fill(0.0);
    for (x, w) in nodes.iter().zip(weights) {
        f(mid + half * x, buf);
        for (o, v) in acc.iter_mut().zip(buf.iter()) {
            *o += w * half * v;
        }
    }
}

/// Integral of `f` over `[a, b]` to absolute tolerance `tol` (max norm),
/// starting from `panels` equal panels. `f(t, out)` writes the integrand into `out`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, dim: usize, tol: f64, panels: usize) -> Result<DVector<f64>>
where
    F: FnMut(f64, &mut [f64]),
{
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = vec![0.0; dim];
    let mut whole = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    for k in 0..panels {
        let lo = a + k as f64 * width;
        let hi = if k + 1 == panels { b } else { lo + width };
        panel(&mut f, lo, hi, &mut whole, &mut buf);
        adapt(&mut f, lo, hi, &whole, &mut total, &mut buf, tol / panels as f64, 0)?;
    }
    Ok(DVector::from_vec(total))
}

#[allow(clippy::too_many_arguments)]
fn adapt<F>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: &[f64],
    total: &mut [f64],
    buf: &mut [f64],
    tol: f64,
    depth: usize,
) -> Result<()>
where
    F: FnMut(f64, &mut [f64]),
{
    let dim = whole.len();
    let mid = 0.5 * (a + b);
    let mut left = vec![0.0; dim];
    let mut right = vec![0.0; dim];
    panel(f, a, mid, &mut left, buf);
    panel(f, mid, b, &mut right, buf);
    let err = (0..dim).fold(0.0f64, |e, i| e.max((left[i] + right[i] - whole[i]).abs()));
    if err <= tol {
        for i in 0..dim {
            total[i] += left[i] + right[i];
        }
        return Ok(());
    }
    if depth >= MAX_DEPTH || !err.is_finite() {
        return Err(CarnotError::Numerical(format!(
            "quadrature did not converge on [{a:.6e}, {b:.6e}]: error estimate {err:.3e} > {tol:.3e} at depth {depth}"
        )));
    }
    adapt(f, a, mid, &left, total, buf, 0.5 * tol, depth + 1)?;
    adapt(f, mid, b, &right, total, buf, 0.5 * tol, depth + 1)
}
