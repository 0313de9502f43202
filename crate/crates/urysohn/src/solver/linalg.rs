//! Dense row-major matrices and LU solves for the Newton systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Solves `M x = b` by LU factorization with partial pivoting. Fails with a
/// singularity error when an elimination pivot falls below `1e-300` times the
/// largest entry of `M`.
pub fn dense_solve(m: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.nrows;
    if m.ncols != n {
        return Err(Error::parameter("matrix must be square"));
    }
    if b.len() != n {
        return Err(Error::parameter("right-hand side length mismatch"));
    }
    let scale = m.data.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Singular { pivot: 0 });
    }
    let threshold = 1e-300 * scale;
    let mut a = m.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val <= threshold {
            return Err(Error::Singular { pivot: col });
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            x.swap(col, pivot_row);
        }
        let inv = 1.0 / a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] * inv;
            if factor == 0.0 {
                continue;
            }
            a[r * n + col] = 0.0;
            for j in col + 1..n {
                a[r * n + j] -= factor * a[col * n + j];
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut v = x[col];
        for j in col + 1..n {
            v -= a[col * n + j] * x[j];
        }
        x[col] = v / a[col * n + col];
    }
    Ok(x)
}
