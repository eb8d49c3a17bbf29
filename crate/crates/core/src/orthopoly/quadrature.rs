//! Gauss–Jacobi quadrature by the Golub–Welsch method.
//!
//! The symmetric tridiagonal Jacobi matrix is built from the textbook
//! closed forms of the orthonormal recurrence coefficients, not from the
//! coefficients stored in [`OrthonormalBasis`](super::OrthonormalBasis), so
//! that the rule can serve as an independent check on them. Nodes are its
//! eigenvalues; weights are `h_0` times the squared first components of the
//! normalized eigenvectors.

use nalgebra::{DMatrix, SymmetricEigen};

use super::JacobiParams;
use crate::error::{OrcaError, Result};

/// Diagonal entry `b_k` of the Jacobi matrix.
fn diagonal(params: JacobiParams, k: usize) -> f64 {
    let (a, b) = (params.alpha, params.beta);
    let ab = a + b;
    if k == 0 {
        return (b - a) / (ab + 2.0);
    }
    let s = 2.0 * k as f64 + ab;
    (b * b - a * a) / (s * (s + 2.0))
}

/// Off-diagonal entry coupling rows `k - 1` and `k`, `k >= 1`.
fn off_diagonal(params: JacobiParams, k: usize) -> f64 {
    let (a, b) = (params.alpha, params.beta);
    let ab = a + b;
    if k == 1 {
        return (4.0 * (1.0 + a) * (1.0 + b) / ((ab + 2.0).powi(2) * (ab + 3.0))).sqrt();
    }
    let k = k as f64;
    let s = 2.0 * k + ab;
    (4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0))).sqrt()
}

/// `nodes`-point Gauss–Jacobi rule, exact for polynomials of degree
/// `2 * nodes - 1`. Nodes are returned in ascending order.
pub fn gauss_jacobi(params: JacobiParams, nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let params = JacobiParams::new(params.alpha, params.beta)?;
    if nodes == 0 {
        return Err(OrcaError::InvalidConfig(
            "quadrature needs at least one node".into(),
        ));
    }
    let mut jacobi = DMatrix::<f64>::zeros(nodes, nodes);
    for k in 0..nodes {
        jacobi[(k, k)] = diagonal(params, k);
        if k > 0 {
            let e = off_diagonal(params, k);
            jacobi[(k, k - 1)] = e;
            jacobi[(k - 1, k)] = e;
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mass = params.norm_sq(0);
    let mut pairs: Vec<(f64, f64)> = (0..nodes)
        .map(|i| (eig.eigenvalues[i], mass * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|l, r| l.0.total_cmp(&r.0));
    Ok(pairs.into_iter().unzip())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_total_mass() {
        for (a, b) in [(0.0, 0.0), (2.5, 1.2), (-0.5, -0.5), (4.3, 1.8)] {
            let p = JacobiParams::new(a, b).unwrap();
            let (_, w) = gauss_jacobi(p, 20).unwrap();
            let total: f64 = w.iter().sum();
            assert!((total - p.norm_sq(0)).abs() < 1e-12 * p.norm_sq(0));
        }
    }

    #[test]
    fn three_point_legendre_rule() {
        let (x, w) = gauss_jacobi(JacobiParams::legendre(), 3).unwrap();
        let r = (0.6f64).sqrt();
        for (got, want) in x.iter().zip([-r, 0.0, r]) {
            assert!((got - want).abs() < 1e-14);
        }
        for (got, want) in w.iter().zip([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn integrates_monomials_exactly() {
        // int_{-1}^{1} x^2 (1 - x) dx = 2/3 under alpha = 1, beta = 0
        let p = JacobiParams::new(1.0, 0.0).unwrap();
        let (x, w) = gauss_jacobi(p, 4).unwrap();
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((got - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_nodes_rejected() {
        assert!(gauss_jacobi(JacobiParams::legendre(), 0).is_err());
    }
}
