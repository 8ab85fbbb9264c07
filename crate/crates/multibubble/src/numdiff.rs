//! Central finite-difference helpers (gradients, Laplacians, Hessians).

use nalgebra::DMatrix;

/// Central-difference gradient of a scalar function.
pub fn gradient<F>(f: F, x: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut g = Vec::with_capacity(x.len());
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + step;
        let fp = f(&p);
        p[i] = x[i] - step;
        let fm = f(&p);
        p[i] = x[i];
        g.push((fp - fm) / (2.0 * step));
    }
    g
}

/// Second-order central Laplacian of a scalar field in R^n.
pub fn laplacian<F>(f: F, x: &[f64], step: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let center = f(x);
    let mut acc = 0.0;
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + step;
        let fp = f(&p);
        p[i] = x[i] - step;
        let fm = f(&p);
        p[i] = x[i];
        acc += fp - 2.0 * center + fm;
    }
    acc / (step * step)
}

/// Symmetrised central-difference Hessian built from a gradient oracle.
/// `step(j)` selects the per-coordinate step; `None` from the gradient marks
/// an infeasible probe point.
pub fn symmetric_hessian<G, S>(grad: G, x: &[f64], step: S) -> Option<DMatrix<f64>>
where
    G: Fn(&[f64]) -> Option<Vec<f64>>,
    S: Fn(usize) -> f64,
{
    let dim = x.len();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..dim {
        let hj = step(j);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += hj;
        xm[j] -= hj;
        let gp = grad(&xp)?;
        let gm = grad(&xm)?;
        for i in 0..dim {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * hj);
        }
    }
    let ht = h.transpose();
    Some((h + ht) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_quadratic() {
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[1];
        let g = gradient(f, &[2.0, 1.0], 1e-6);
        assert!((g[0] - 4.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn laplacian_of_harmonic_polynomial() {
        // x^2 - y^2 is harmonic
        let f = |x: &[f64]| x[0] * x[0] - x[1] * x[1];
        let l = laplacian(f, &[0.3, -0.7, 0.1], 1e-3);
        assert!(l.abs() < 1e-9);
    }

    #[test]
    fn hessian_recovers_quadratic_exactly() {
        // f = x^2 + 3xy - 2y^2: H = [[2, 3], [3, -4]], linear gradient so
        // central differences are exact up to roundoff
        let grad = |x: &[f64]| Some(vec![2.0 * x[0] + 3.0 * x[1], 3.0 * x[0] - 4.0 * x[1]]);
        let h = symmetric_hessian(grad, &[0.4, -0.9], |_| 1e-4).unwrap();
        let expected = [[2.0, 3.0], [3.0, -4.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (h[(i, j)] - expected[i][j]).abs() < 1e-5,
                    "H[{i}{j}] = {}",
                    h[(i, j)]
                );
            }
        }
    }
}
