//! Uniform tensor grid on the reference rectangle `[0, L] x [-1, 1]`.
//!
//! Nodes are numbered with `t` running fastest: node `(i, j)` has index
//! `i * n_t + j`, where `i` indexes `s` and `j` indexes `t`. With this ordering
//! every bilinear-element matrix has half-bandwidth `n_t + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    length: f64,
    n_s: usize,
    n_t: usize,
}

impl GridSpec {
    /// Requires `n_s >= 2` and an odd `n_t >= 3`, so that `t = 0` is a node.
    pub fn new(length: f64, n_s: usize, n_t: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "length must be positive, got {length}"
            )));
        }
        if n_s < 2 {
            return Err(Error::InvalidGrid(format!("n_s must be >= 2, got {n_s}")));
        }
        if n_t < 3 || n_t.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_t must be odd and >= 3 so that t = 0 is a node, got {n_t}"
            )));
        }
        Ok(GridSpec { length, n_s, n_t })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn len(&self) -> usize {
        self.n_s * self.n_t
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h_s(&self) -> f64 {
        self.length / (self.n_s - 1) as f64
    }

    pub fn h_t(&self) -> f64 {
        2.0 / (self.n_t - 1) as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        if i + 1 == self.n_s {
            self.length
        } else {
            i as f64 * self.h_s()
        }
    }

    pub fn t(&self, j: usize) -> f64 {
        let mid = (self.n_t - 1) / 2;
        // symmetric about the centre node so that t(mid) == 0 exactly
        if j >= mid {
            (j - mid) as f64 / mid as f64
        } else {
            -((mid - j) as f64 / mid as f64)
        }
    }

    /// Index of the `t = 0` row.
    pub fn t_zero(&self) -> usize {
        (self.n_t - 1) / 2
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_t + j
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.n_t, index % self.n_t)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.n_s || j + 1 == self.n_t
    }

    /// Half-bandwidth of the 9-point stencil under the node ordering.
    pub fn bandwidth(&self) -> usize {
        self.n_t + 1
    }

    /// Same `t` resolution, `s` spacing divided by `factor`.
    pub fn refined_s(&self, factor: usize) -> Self {
        GridSpec {
            length: self.length,
            n_s: (self.n_s - 1) * factor.max(1) + 1,
            n_t: self.n_t,
        }
    }

    /// Evaluate `func(s, t)` at every node, in node order.
    pub fn sample(&self, mut func: impl FnMut(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.n_s {
            let s = self.s(i);
            for j in 0..self.n_t {
                out.push(func(s, self.t(j)));
            }
        }
        out
    }

    /// Plain-text matrix dump: one line per `t` row, one column per `s` node.
    pub fn dump(&self, values: &[f64]) -> String {
        let mut out = String::new();
        for j in 0..self.n_t {
            let row: Vec<String> = (0..self.n_s)
                .map(|i| format!("{:.17e}", values[self.index(i, j)]))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}
