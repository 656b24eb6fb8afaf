//! Dense symmetric-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Matrix = DMatrix<f64>;

/// Solves `(m + eps I) x = b` with `eps = 1e-10 * trace / dim`. Falls back
/// to an eigenvalue-floored pseudo-inverse when Cholesky fails.
pub fn solve_regularized(m: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let mut reg = m.clone();
    let eps = 1e-10 * (m.trace().abs() / n as f64).max(f64::MIN_POSITIVE);
    for i in 0..n {
        reg[(i, i)] += eps;
    }
    let rhs = DVector::from_column_slice(b);
    if let Some(ch) = reg.clone().cholesky() {
        return ch.solve(&rhs).as_slice().to_vec();
    }
    let eig = SymmetricEigen::new(reg);
    let floor = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs())) * 1e-12;
    let mut x = DVector::zeros(n);
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > floor {
            let v = eig.eigenvectors.column(j);
            x += v * (v.dot(&rhs) / lam);
        }
    }
    x.as_slice().to_vec()
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}

/// Eigenvalues in ascending order.
pub fn sorted_eigenvalues(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let m = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let x = solve_regularized(&m, &[1.0, 2.0]);
        let r = &m * DVector::from_column_slice(&x);
        assert!((r[0] - 1.0).abs() < 1e-8 && (r[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn singular_system_uses_pseudo_inverse() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let x = solve_regularized(&m, &[2.0, 0.0]);
        assert!((x[0] - 2.0).abs() < 1e-6);
        assert!(x[1].abs() < 1e-6);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = Matrix::from_diagonal(&DVector::from_vec(vec![-3.0, 2.0]));
        assert_eq!(spectral_norm(&m), 3.0);
        assert_eq!(sorted_eigenvalues(&m), vec![-3.0, 2.0]);
    }
}
