//! Dense self-adjoint eigensolver.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenpairs of a self-adjoint matrix, eigenvalues ascending; `vectors`
/// is column-major with one column per eigenvalue.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub n: usize,
    pub values: Vec<f64>,
    pub vectors: Vec<Complex64>,
    /// Index of the first stored eigenvector column.
    pub first: usize,
}

impl Eigen {
    /// Eigenvector of eigenvalue `col`; panics if the column was not kept.
    pub fn vector(&self, col: usize) -> &[Complex64] {
        let c = col - self.first;
        &self.vectors[c * self.n..(c + 1) * self.n]
    }

    pub fn has_vector(&self, col: usize) -> bool {
        col >= self.first && (col - self.first) * self.n < self.vectors.len()
    }

    pub fn stored(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.vectors.len() / self.n.max(1)
    }
}

/// Solves the `n × n` self-adjoint problem given by `entry(i, j)` for `i ≥ j`
/// (the upper triangle is implied). When `real` is set, imaginary parts are
/// ignored and a real symmetric solve is used.
pub fn eigh(n: usize, real: bool, entry: impl Fn(usize, usize) -> Complex64) -> Result<Eigen> {
    if n == 0 {
        return Ok(Eigen { n, values: Vec::new(), vectors: Vec::new(), first: 0 });
    }
    if real {
        let m = Mat::<f64>::from_fn(n, n, |i, j| if i >= j { entry(i, j).re } else { entry(j, i).re });
        let e = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
        let s = e.S().column_vector();
        let u = e.U();
        let values: Vec<f64> = (0..n).map(|i| s[i]).collect();
        let mut vectors = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                vectors.push(Complex64::new(u[(i, j)], 0.0));
            }
        }
        check_finite(&values)?;
        Ok(Eigen { n, values, vectors, first: 0 })
    } else {
        let m = Mat::<faer::c64>::from_fn(n, n, |i, j| {
            let z = if i >= j { entry(i, j) } else { entry(j, i).conj() };
            faer::c64::new(z.re, z.im)
        });
        let e = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
        let s = e.S().column_vector();
        let u = e.U();
        let values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
        let mut vectors = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let z = u[(i, j)];
                vectors.push(Complex64::new(z.re, z.im));
            }
        }
        check_finite(&values)?;
        Ok(Eigen { n, values, vectors, first: 0 })
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("non-finite eigenvalue".into()))
    }
}

/// Sparse self-adjoint matrix: real diagonal plus lower-triangle entries
/// `(i, j, z)` with `i > j`.
#[derive(Debug, Clone, Default)]
pub struct SparseHermitian {
    pub diag: Vec<f64>,
    pub lower: Vec<(usize, usize, Complex64)>,
}

impl SparseHermitian {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn is_real(&self) -> bool {
        self.lower.iter().all(|e| e.2.im == 0.0)
    }

    /// Eigenpairs; only eigenvectors whose eigenvalue lies in the closed
    /// `window` are stored (all when `None`).
    pub fn solve(&self, window: Option<(f64, f64)>) -> Result<Eigen> {
        let n = self.n();
        if n == 0 {
            return Ok(Eigen { n, values: Vec::new(), vectors: Vec::new(), first: 0 });
        }
        let keep = |values: &[f64]| -> std::ops::Range<usize> {
            match window {
                None => 0..n,
                Some((lo, hi)) => {
                    let a = values.partition_point(|&v| v < lo);
                    let b = values.partition_point(|&v| v <= hi);
                    a..b.max(a)
                }
            }
        };
        if self.is_real() {
            let mut m = Mat::<f64>::zeros(n, n);
            for (i, d) in self.diag.iter().enumerate() {
                m[(i, i)] = *d;
            }
            for &(i, j, z) in &self.lower {
                m[(i, j)] = z.re;
                m[(j, i)] = z.re;
            }
            let e = m
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
            let s = e.S().column_vector();
            let u = e.U();
            let values: Vec<f64> = (0..n).map(|i| s[i]).collect();
            let keep = keep(&values);
            let mut vectors = Vec::with_capacity(n * keep.len());
            for j in keep.clone() {
                for i in 0..n {
                    vectors.push(Complex64::new(u[(i, j)], 0.0));
                }
            }
            check_finite(&values)?;
            Ok(Eigen { n, values, vectors, first: keep.start })
        } else {
            let mut m = Mat::<faer::c64>::zeros(n, n);
            for (i, d) in self.diag.iter().enumerate() {
                m[(i, i)] = faer::c64::new(*d, 0.0);
            }
            for &(i, j, z) in &self.lower {
                m[(i, j)] = faer::c64::new(z.re, z.im);
                m[(j, i)] = faer::c64::new(z.re, -z.im);
            }
            let e = m
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
            let s = e.S().column_vector();
            let u = e.U();
            let values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
            let keep = keep(&values);
            let mut vectors = Vec::with_capacity(n * keep.len());
            for j in keep.clone() {
                for i in 0..n {
                    let z = u[(i, j)];
                    vectors.push(Complex64::new(z.re, z.im));
                }
            }
            check_finite(&values)?;
            Ok(Eigen { n, values, vectors, first: keep.start })
        }
    }
}

/// Eigenvalues only.
pub fn eigvalsh(n: usize, real: bool, entry: impl Fn(usize, usize) -> Complex64) -> Result<Vec<f64>> {
    Ok(eigh(n, real, entry)?.values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_real() {
        let m = [[2.0, 1.0], [1.0, 2.0]];
        let e = eigh(2, true, |i, j| Complex64::new(m[i][j], 0.0)).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_complex() {
        let z = Complex64::new(0.0, 1.0);
        let e = eigh(2, false, |i, j| match (i, j) {
            (0, 0) | (1, 1) => Complex64::new(0.0, 0.0),
            (1, 0) => z,
            _ => z.conj(),
        })
        .unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let v = e.vector(1);
        let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sparse_matches_dense() {
        let h = SparseHermitian {
            diag: vec![1.0, 2.0, 3.0],
            lower: vec![(1, 0, Complex64::new(0.5, 0.25)), (2, 1, Complex64::new(-0.3, 0.0))],
        };
        let a = h.solve(Some((1.5, 10.0))).unwrap();
        let b = eigh(3, false, |i, j| match (i, j) {
            (i, j) if i == j => Complex64::new(h.diag[i], 0.0),
            (1, 0) => h.lower[0].2,
            (2, 1) => h.lower[1].2,
            _ => Complex64::new(0.0, 0.0),
        })
        .unwrap();
        for k in 0..3 {
            assert!((a.values[k] - b.values[k]).abs() < 1e-14);
        }
        assert!(a.has_vector(2) && !a.has_vector(0));
        let dot: Complex64 = a.vector(1).iter().zip(b.vector(1)).map(|(x, y)| x * y.conj()).sum();
        assert!((dot.norm() - 1.0).abs() < 1e-12);
    }
}
