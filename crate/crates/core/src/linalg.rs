//! Small dense symmetric matrices and their square roots.
//!
//! Eigendecompositions use the cyclic Jacobi method, which is plenty for the
//! validation-sized matrices here and needs no external dependency.

use crate::error::{domain, Error, Result};

/// Largest dimension accepted by the eigendecomposition.
pub const MAX_JACOBI_DIM: usize = 64;

const SYM_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// A dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn scalar(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from rows; fails if the rows are not square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(domain("matrix rows must form a square array"));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.n, v.len(), "dimension mismatch");
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn zip(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        Matrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// Largest `|A_ij − A_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() <= SYM_TOL
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self[(i, j)] == 0.0))
    }

    /// Whether `AB = BA` up to `tol` relative to the product's size.
    pub fn commutes_with(&self, other: &Matrix, tol: f64) -> bool {
        let ab = self.matmul(other);
        let ba = other.matmul(self);
        let scale = ab.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        ab.data.iter().zip(&ba.data).all(|(x, y)| (x - y).abs() <= tol * scale)
    }

    /// The symmetric part `(A + Aᵀ)/2`.
    pub fn symmetrized(&self) -> Matrix {
        self.add(&self.transpose()).scale(0.5)
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Eigenvalues and orthonormal eigenvectors (as columns of `vectors`).
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymmetricEigen {
    /// `V f(Λ) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n).map(|k| v[(i, k)] * fv[k] * v[(j, k)]).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    let n = a.dim();
    if n > MAX_JACOBI_DIM {
        return Err(Error::Unsupported(format!(
            "eigendecomposition limited to dimension {MAX_JACOBI_DIM}, got {n}"
        )));
    }
    if !a.is_symmetric() {
        return Err(domain(format!(
            "matrix is not symmetric (relative asymmetry {:e})",
            a.asymmetry()
        )));
    }
    let mut m = a.symmetrized();
    let mut v = Matrix::identity(n);
    let total = m.frobenius_sq().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off.sqrt() <= 1e-12 * total.sqrt() || off == 0.0 {
            let values = (0..n).map(|i| m[(i, i)]).collect();
            return Ok(SymmetricEigen { values, vectors: v });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Convergence {
        best: f64::NAN,
        abs_error: f64::NAN,
        subdivisions: 100,
    })
}

fn psd_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    let eig = symmetric_eigen(a)?;
    let scale = eig.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if let Some(&bad) = eig.values.iter().find(|&&l| l < -PSD_TOL * scale) {
        return Err(domain(format!("matrix is not positive semidefinite (eigenvalue {bad:e})")));
    }
    Ok(eig)
}

/// Checks symmetry and positive semidefiniteness.
pub fn check_psd(a: &Matrix) -> Result<()> {
    psd_eigen(a).map(|_| ())
}

/// Principal square root of a symmetric PSD matrix.
pub fn sqrt_psd(a: &Matrix) -> Result<Matrix> {
    Ok(psd_eigen(a)?.map(|l| l.max(0.0).sqrt()))
}

/// Inverse principal square root of a symmetric positive definite matrix.
pub fn inv_sqrt_pd(a: &Matrix) -> Result<Matrix> {
    let eig = psd_eigen(a)?;
    if let Some(&bad) = eig.values.iter().find(|&&l| l <= 0.0) {
        return Err(domain(format!("matrix is singular (eigenvalue {bad:e})")));
    }
    Ok(eig.map(|l| 1.0 / l.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_known_matrix() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = symmetric_eigen(&a).unwrap();
        let mut vals = e.values.clone();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let back = e.map(|l| l);
        assert!(back.sub(&a).frobenius_sq() < 1e-28);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 2.0],
        ])
        .unwrap();
        let s = sqrt_psd(&a).unwrap();
        assert!(s.matmul(&s).sub(&a).frobenius_sq() < 1e-26);
        let is = inv_sqrt_pd(&a).unwrap();
        let id = is.matmul(&a).matmul(&is);
        assert!(id.sub(&Matrix::identity(3)).frobenius_sq() < 1e-26);
    }

    #[test]
    fn rejects_bad_input() {
        let asym = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sqrt_psd(&asym), Err(Error::Domain(_))));
        let indef = Matrix::diagonal(&[1.0, -1.0]);
        assert!(matches!(sqrt_psd(&indef), Err(Error::Domain(_))));
        let big = Matrix::identity(65);
        assert!(matches!(symmetric_eigen(&big), Err(Error::Unsupported(_))));
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
