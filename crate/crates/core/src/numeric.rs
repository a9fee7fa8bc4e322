//! Finite differences, periodic stencils and deterministic reductions.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Per-component central-difference step `eps^(1/3) * max(1, |u_i|)`.
pub fn fd_step(ui: f64) -> f64 {
    f64::EPSILON.cbrt() * ui.abs().max(1.0)
}

/// Central-difference Jacobian of a vector map.
///
/// With `h = None` the step is chosen per component by [`fd_step`]; otherwise the
/// given step is scaled the same way. Entrywise error is O(h^2) for C^3 maps.
pub fn numeric_jacobian<F>(f: F, u: &DVector<f64>, h: Option<f64>) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = u.len();
    let mut jac: Option<DMatrix<f64>> = None;
    for j in 0..n {
        let hj = match h {
            Some(h) => h * u[j].abs().max(1.0),
            None => fd_step(u[j]),
        };
        let mut up = u.clone();
        let mut um = u.clone();
        up[j] += hj;
        um[j] -= hj;
        // the realised step differs from hj by rounding; use it exactly
        let dh = up[j] - um[j];
        let col = (f(&up)? - f(&um)?) / dh;
        let m = jac.get_or_insert_with(|| DMatrix::zeros(col.len(), n));
        m.set_column(j, &col);
    }
    Ok(jac.unwrap_or_else(|| DMatrix::zeros(0, 0)))
}

/// Central-difference gradient of a scalar map.
pub fn numeric_gradient<F>(f: F, u: &DVector<f64>) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let jac = numeric_jacobian(|x| Ok(DVector::from_element(1, f(x)?)), u, None)?;
    Ok(jac.row(0).transpose())
}

/// Hessians of every component of a vector map, from central differences of
/// its Jacobian. Entry `k` of the result is the n x n Hessian of component `k`.
pub fn numeric_hessians<J>(jac: J, u: &DVector<f64>) -> Result<Vec<DMatrix<f64>>>
where
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let n = u.len();
    let mut out: Vec<DMatrix<f64>> = Vec::new();
    for j in 0..n {
        // second derivatives of a first derivative: use a larger step
        let hj = f64::EPSILON.powf(0.25) * u[j].abs().max(1.0);
        let mut up = u.clone();
        let mut um = u.clone();
        up[j] += hj;
        um[j] -= hj;
        let dh = up[j] - um[j];
        let dj = (jac(&up)? - jac(&um)?) / dh;
        if out.is_empty() {
            out = vec![DMatrix::zeros(n, n); dj.nrows()];
        }
        for (k, hk) in out.iter_mut().enumerate() {
            for i in 0..n {
                hk[(i, j)] = dj[(k, i)];
            }
        }
    }
    for hk in out.iter_mut() {
        let sym = (&*hk + hk.transpose()) * 0.5;
        *hk = sym;
    }
    Ok(out)
}

/// Pairwise (tree) summation; the result does not depend on thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Periodic second-order central difference of a scalar sequence.
pub fn periodic_dx(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| (values[(i + 1) % n] - values[(i + n - 1) % n]) / (2.0 * dx))
        .collect()
}

/// Periodic second-order central difference of a vector field.
pub fn periodic_dx_vec(values: &[DVector<f64>], dx: f64) -> Vec<DVector<f64>> {
    let n = values.len();
    (0..n)
        .map(|i| (&values[(i + 1) % n] - &values[(i + n - 1) % n]) / (2.0 * dx))
        .collect()
}

/// Second-order time derivative at snapshot `k` of a uniformly spaced series:
/// central in the interior, one-sided three-point at the ends.
pub fn time_derivative(series: &[f64], k: usize, dt: f64) -> f64 {
    let m = series.len();
    debug_assert!(m >= 3);
    if k == 0 {
        (-3.0 * series[0] + 4.0 * series[1] - series[2]) / (2.0 * dt)
    } else if k == m - 1 {
        (3.0 * series[m - 1] - 4.0 * series[m - 2] + series[m - 3]) / (2.0 * dt)
    } else {
        (series[k + 1] - series[k - 1]) / (2.0 * dt)
    }
}

/// Trapezoid weights for `m` uniformly spaced samples with spacing `dt`.
pub fn trapezoid_weights(m: usize, dt: f64) -> Vec<f64> {
    (0..m)
        .map(|k| if k == 0 || k + 1 == m { 0.5 * dt } else { dt })
        .collect()
}

/// Max-abs entry of a matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Contracts per-component Hessians with a direction: entry (i, j) of the result
/// is `sum_k d^2 G_i / (du_j du_k) * w_k`.
pub fn contract_last(hessians: &[DMatrix<f64>], w: &DVector<f64>) -> DMatrix<f64> {
    let n = w.len();
    let mut out = DMatrix::zeros(hessians.len(), n);
    for (i, hi) in hessians.iter().enumerate() {
        let row = hi * w;
        for j in 0..n {
            out[(i, j)] = row[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_of_identity_is_identity() {
        let u = DVector::from_vec(vec![0.3, -2.0, 7.5]);
        let j = numeric_jacobian(|x| Ok(x.clone()), &u, None).unwrap();
        assert!((j - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    }

    #[test]
    fn jacobian_of_square_map() {
        let u = DVector::from_vec(vec![1.0, 1.0]);
        let j = numeric_jacobian(
            |x| Ok(DVector::from_vec(vec![x[0] * x[0], x[1]])),
            &u,
            Some(1e-5),
        )
        .unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!((j - expect).abs().max() < 1e-9);
    }

    #[test]
    fn hessian_of_cubic() {
        // f(x, y) = x^2 y; Hessian [[2y, 2x], [2x, 0]]
        let u = DVector::from_vec(vec![1.5, -0.5]);
        let h = numeric_hessians(
            |x| Ok(DMatrix::from_row_slice(1, 2, &[2.0 * x[0] * x[1], x[0] * x[0]])),
            &u,
        )
        .unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[-1.0, 3.0, 3.0, 0.0]);
        assert!((&h[0] - expect).abs().max() < 1e-7);
    }

    #[test]
    fn pairwise_matches_naive_sum() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn one_sided_time_derivative_is_exact_for_quadratics() {
        let dt = 0.1;
        let s: Vec<f64> = (0..5).map(|k| (k as f64 * dt).powi(2)).collect();
        assert!((time_derivative(&s, 0, dt) - 0.0).abs() < 1e-12);
        assert!((time_derivative(&s, 4, dt) - 0.8).abs() < 1e-12);
        assert!((time_derivative(&s, 2, dt) - 0.4).abs() < 1e-12);
    }
}
