//! Small dense linear-algebra helpers over `faer`.

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

pub fn to_complex(a: &Mat<f64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

/// `max |A − Aᵀ|`.
pub fn symmetry_defect(a: &Mat<f64>) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..i {
            d = d.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    d
}

/// `max |A − Aᵀ|` for a complex matrix (plain transpose, not adjoint).
pub fn transpose_defect(a: &Mat<c64>) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..i {
            d = d.max((a[(i, j)] - a[(j, i)]).norm());
        }
    }
    d
}

pub fn symmetrize(a: &mut Mat<f64>) {
    for i in 0..a.nrows() {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

pub fn max_abs(a: &Mat<f64>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// Eigenvalues of a real symmetric matrix in ascending order.
pub fn sym_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    let mut v = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolve failed: {e:?}")))?;
    v.sort_by(|x, y| x.total_cmp(y));
    Ok(v)
}

/// Eigen-decomposition of a real symmetric matrix, ascending eigenvalues and
/// orthonormal eigenvectors as columns.
pub fn sym_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolve failed: {e:?}")))?;
    let n = a.nrows();
    let vals: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Eigenvalues and right eigenvectors of a general complex matrix.
pub fn eigen(a: &Mat<c64>) -> Result<(Vec<c64>, Mat<c64>)> {
    let evd = a.eigen().map_err(|e| Error::Numerical(format!("eigensolve failed: {e:?}")))?;
    let n = a.nrows();
    let vals: Vec<c64> = (0..n).map(|i| evd.S()[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum()).collect()
}

pub fn cmatvec(a: &Mat<c64>, x: &[c64]) -> Vec<c64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum()).collect()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Bilinear (non-conjugating) product `xᵀ y`.
pub fn bdot(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Hermitian product `x^* y`.
pub fn hdot(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn cnorm(x: &[c64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn column(a: &Mat<c64>, j: usize) -> Vec<c64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn real_vec(x: &[f64]) -> Vec<c64> {
    x.iter().map(|&v| c64::new(v, 0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_helpers() {
        let mut a = Mat::<f64>::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(symmetry_defect(&a), 4.0);
        symmetrize(&mut a);
        assert_eq!(symmetry_defect(&a), 0.0);
        let d = Mat::<f64>::from_fn(3, 3, |i, j| if i == j { [3.0, -1.0, 2.0][i] } else { 0.0 });
        assert_eq!(sym_eigenvalues(&d).unwrap(), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn complex_eigen_of_rotation() {
        let a = Mat::<c64>::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c64::new(-1.0, 0.0),
            (1, 0) => c64::new(1.0, 0.0),
            _ => c64::new(0.0, 0.0),
        });
        let (vals, vecs) = eigen(&a).unwrap();
        for (k, l) in vals.iter().enumerate() {
            assert!((l.norm() - 1.0).abs() < 1e-14 && l.re.abs() < 1e-14);
            let v = column(&vecs, k);
            let av = cmatvec(&a, &v);
            for i in 0..2 {
                assert!((av[i] - l * v[i]).norm() < 1e-13);
            }
        }
    }
}
