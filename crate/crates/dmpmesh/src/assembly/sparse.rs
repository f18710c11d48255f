//! Minimal sparse matrix support: coordinate triplets during scatter,
//! compressed rows after finalize. Duplicate triplets are summed in sorted
//! index order so assembled values do not depend on element iteration order.

use std::fmt::Write as _;

use crate::{Error, Result};

/// Coordinate-format accumulator.
#[derive(Clone, Debug, Default)]
pub struct CooMatrix {
    nrows: usize,
    ncols: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        CooMatrix {
            nrows,
            ncols,
            triplets: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        if v != 0.0 {
            self.triplets.push((i, j, v));
        }
    }

    /// Sorts triplets by (row, col) and sums duplicates in that order.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut t = self.triplets.clone();
        t.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_counts = vec![0usize; self.nrows + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j, v) in &t {
            if prev == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_counts[i + 1] += 1;
                prev = Some((i, j));
            }
        }
        let mut row_ptr = row_counts;
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            cols,
            vals,
        }
    }
}

/// Compressed sparse rows; immutable after construction.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.cols[lo..hi]
            .iter()
            .copied()
            .zip(self.vals[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// MatrixMarket coordinate text (1-based indices), deterministic.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::new();
        out.push_str("%%MatrixMarket matrix coordinate real general\n");
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz()).unwrap();
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                writeln!(out, "{} {} {}", i + 1, j + 1, v).unwrap();
            }
        }
        out
    }
}

/// Direct skyline (profile) LU factorization without pivoting.
///
/// FEM stiffness matrices have a symmetric sparsity pattern; the factors
/// fill in only inside the row/column envelope, so the Doolittle
/// factorization can work row-by-row and column-by-column on the stored
/// profile. A vanishing pivot is reported with its row index.
#[derive(Debug)]
pub struct SkylineLu {
    n: usize,
    /// first profiled column of each L row
    row_start: Vec<usize>,
    /// first profiled row of each U column
    col_start: Vec<usize>,
    /// L rows, columns row_start[i]..i (unit diagonal implicit)
    lower: Vec<Vec<f64>>,
    /// U columns, rows col_start[j]..=j
    upper: Vec<Vec<f64>>,
}

impl SkylineLu {
    pub fn factor(a: &CsrMatrix) -> Result<SkylineLu> {
        if a.nrows() != a.ncols() {
            return Err(Error::Mismatch(format!(
                "skyline LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let mut row_start: Vec<usize> = (0..n).collect();
        let mut col_start: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for (j, _) in a.row(i) {
                if j < i {
                    row_start[i] = row_start[i].min(j);
                }
                if j > i {
                    col_start[j] = col_start[j].min(i);
                }
            }
        }
        let mut lower: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i - row_start[i]]).collect();
        let mut upper: Vec<Vec<f64>> = (0..n).map(|j| vec![0.0; j - col_start[j] + 1]).collect();
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j < i {
                    lower[i][j - row_start[i]] = v;
                } else {
                    upper[j][i - col_start[j]] = v;
                }
            }
        }

        let scale: Vec<f64> = (0..n)
            .map(|i| {
                a.row(i)
                    .map(|(_, v)| v.abs())
                    .fold(0.0, f64::max)
                    .max(1e-300)
            })
            .collect();

        for k in 0..n {
            // U column k: u(i,k) = a(i,k) - sum_{m} l(i,m) u(m,k), i < k
            for i in col_start[k]..k {
                let lo = row_start[i].max(col_start[k]);
                let mut sum = 0.0;
                for m in lo..i {
                    sum += lower[i][m - row_start[i]] * upper[k][m - col_start[k]];
                }
                upper[k][i - col_start[k]] -= sum;
            }
            // L row k: l(k,j) = (a(k,j) - sum l(k,m) u(m,j)) / u(j,j), j < k
            for j in row_start[k]..k {
                let lo = row_start[k].max(col_start[j]);
                let mut sum = 0.0;
                for m in lo..j {
                    sum += lower[k][m - row_start[k]] * upper[j][m - col_start[j]];
                }
                let ujj = upper[j][j - col_start[j]];
                lower[k][j - row_start[k]] = (lower[k][j - row_start[k]] - sum) / ujj;
            }
            // diagonal of U
            let lo = row_start[k].max(col_start[k]);
            let mut sum = 0.0;
            for m in lo..k {
                sum += lower[k][m - row_start[k]] * upper[k][m - col_start[k]];
            }
            let pivot = upper[k][k - col_start[k]] - sum;
            if pivot.abs() <= 1e-14 * scale[k] {
                return Err(Error::SingularFactorization { row: k, pivot });
            }
            upper[k][k - col_start[k]] = pivot;
        }

        Ok(SkylineLu {
            n,
            row_start,
            col_start,
            lower,
            upper,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = b.to_vec();
        // forward: L y = b (unit diagonal)
        for i in 0..self.n {
            let mut sum = 0.0;
            for m in self.row_start[i]..i {
                sum += self.lower[i][m - self.row_start[i]] * y[m];
            }
            y[i] -= sum;
        }
        // backward: U x = y
        let mut x = y;
        for j in (0..self.n).rev() {
            x[j] /= self.upper[j][j - self.col_start[j]];
            let xj = x[j];
            for i in self.col_start[j]..j {
                x[i] -= self.upper[j][i - self.col_start[j]] * xj;
            }
        }
        x
    }
}
