//! Compressed sparse row storage and a banded Cholesky factorization.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Square sparse matrix in CSR form with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from one `(column, value)` list per row; columns must be sorted
    /// and unique within each row.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (r, row) in rows.into_iter().enumerate() {
            let mut last = None;
            for (c, v) in row {
                if c >= n || last.is_some_and(|l| c <= l) {
                    return Err(Error::DimensionMismatch(format!(
                        "row {r}: column {c} out of order or out of range"
                    )));
                }
                last = Some(c);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(dense: &DMatrix<f64>) -> Result<Self> {
        if dense.nrows() != dense.ncols() {
            return Err(Error::DimensionMismatch("matrix must be square".into()));
        }
        let rows = (0..dense.nrows())
            .map(|r| {
                (0..dense.ncols())
                    .filter(|&c| dense[(r, c)] != 0.0)
                    .map(|c| (c, dense[(r, c)]))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (r, xr) in x.iter().enumerate().take(self.n) {
            let mut row = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.values[k] * y[self.col_idx[k]];
            }
            acc += xr * row;
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// `max |a_ij - a_ji|` over the stored pattern.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    /// `alpha * a + beta * b` over the union of both patterns.
    pub fn linear_combination(
        a: &CsrMatrix,
        alpha: f64,
        b: &CsrMatrix,
        beta: f64,
    ) -> Result<CsrMatrix> {
        if a.n != b.n {
            return Err(Error::DimensionMismatch(format!("{} vs {} rows", a.n, b.n)));
        }
        let rows = (0..a.n)
            .map(|r| {
                let mut merged: Vec<(usize, f64)> = Vec::new();
                let (mut ia, mut ib) = (a.row(r).peekable(), b.row(r).peekable());
                loop {
                    match (ia.peek().copied(), ib.peek().copied()) {
                        (Some((ca, va)), Some((cb, vb))) if ca == cb => {
                            merged.push((ca, alpha * va + beta * vb));
                            ia.next();
                            ib.next();
                        }
                        (Some((ca, va)), Some((cb, _))) if ca < cb => {
                            merged.push((ca, alpha * va));
                            ia.next();
                        }
                        (_, Some((cb, vb))) => {
                            merged.push((cb, beta * vb));
                            ib.next();
                        }
                        (Some((ca, va)), None) => {
                            merged.push((ca, alpha * va));
                            ia.next();
                        }
                        (None, None) => break,
                    }
                }
                merged
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    /// Coordinate triplets `row col value`, one per line, 17 significant digits.
    pub fn to_triplets(&self) -> String {
        let mut out = String::with_capacity(self.nnz() * 32);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                let _ = writeln!(out, "{r} {c} {v:.16e}");
            }
        }
        out
    }

    /// Parse the output of [`CsrMatrix::to_triplets`] for a matrix of order `n`.
    pub fn from_triplets(n: usize, text: &str) -> Result<CsrMatrix> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::DimensionMismatch(format!("triplet line {}: {line:?}", lineno + 1));
            let mut parts = line.split_whitespace();
            let r: usize = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
            let c: usize = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
            let v: f64 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
            if r >= n {
                return Err(bad());
            }
            rows[r].push((c, v));
        }
        for row in &mut rows {
            row.sort_by_key(|(c, _)| *c);
        }
        CsrMatrix::from_rows(rows)
    }
}

/// `A = L L^T` for a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    /// row `i` holds `L[i, i - bw ..= i]`, left-padded with zeros
    lower: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let bw = a.bandwidth();
        let width = bw + 1;
        let mut lower = vec![0.0; n * width];
        for i in 0..n {
            for (c, v) in a.row(i) {
                if c <= i {
                    lower[i * width + (c + bw - i)] = v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut sum = lower[i * width + (j + bw - i)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    sum -= lower[i * width + (k + bw - i)] * lower[j * width + (k + bw - j)];
                }
                if j == i {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::FactorizationFailure {
                            pivot: i,
                            value: sum,
                        });
                    }
                    lower[i * width + bw] = sum.sqrt();
                } else {
                    lower[i * width + (j + bw - i)] = sum / lower[j * width + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, lower })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, width) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut sum = x[i];
            for k in i.saturating_sub(bw)..i {
                sum -= self.lower[i * width + (k + bw - i)] * x[k];
            }
            x[i] = sum / self.lower[i * width + bw];
        }
        for i in (0..n).rev() {
            let mut sum = x[i];
            for k in i + 1..n.min(i + bw + 1) {
                sum -= self.lower[k * width + (i + bw - k)] * x[k];
            }
            x[i] = sum / self.lower[i * width + bw];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
