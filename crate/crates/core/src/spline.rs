//! Natural cubic splines for tabulated curvature data.

use crate::error::{Error, Result};

/// Natural cubic spline through `(x_k, y_k)`, strictly increasing knots.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "spline knots ({}) and values ({}) differ in length",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: x.len(),
            });
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::PreconditionViolated(
                "spline knots must be finite and strictly increasing".into(),
            ));
        }
        let m = natural_second_derivatives(&x, &y);
        Ok(CubicSpline { x, y, m })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn locate(&self, at: f64) -> Option<usize> {
        let (lo, hi) = self.domain();
        let slack = 1e-12 * (hi - lo).abs().max(1.0);
        if !(at >= lo - slack && at <= hi + slack) {
            return None;
        }
        let k = self.x.partition_point(|&v| v <= at);
        Some(k.clamp(1, self.x.len() - 1) - 1)
    }

    /// Derivative of order `order` (0..=3) at `at`; `None` outside the knot range.
    pub fn eval(&self, at: f64, order: u8) -> Option<f64> {
        let k = self.locate(at)?;
        let h = self.x[k + 1] - self.x[k];
        let a = (self.x[k + 1] - at) / h;
        let b = (at - self.x[k]) / h;
        let (m0, m1) = (self.m[k], self.m[k + 1]);
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let v = match order {
            0 => a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0,
            1 => {
                (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0
                    + (3.0 * b * b - 1.0) / 6.0 * h * m1
            }
            2 => a * m0 + b * m1,
            3 => (m1 - m0) / h,
            _ => 0.0,
        };
        Some(v)
    }
}

fn natural_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations, m_0 = m_{n-1} = 0
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        if i > 1 {
            let w = h0 / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
    }
    for i in (1..n - 1).rev() {
        let next = if i + 1 < n - 1 { m[i + 1] } else { 0.0 };
        m[i] = (rhs[i] - upper[i] * next) / diag[i];
    }
    m
}

/// Bicubic (tensor natural spline) interpolation of tabulated `K(s, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineTable2d {
    s: Vec<f64>,
    u: Vec<f64>,
    /// one spline in `u` per `s` knot; `None` entries when `u` has a single knot
    rows: Vec<Option<CubicSpline>>,
    constant_rows: Vec<f64>,
}

impl SplineTable2d {
    /// `values[k][l]` is the sample at `(s[k], u[l])`. A single `u` knot means
    /// the field does not depend on `u`.
    pub fn new(s: Vec<f64>, u: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != s.len() {
            return Err(Error::DimensionMismatch(format!(
                "table has {} rows for {} s-knots",
                values.len(),
                s.len()
            )));
        }
        if u.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        // validate the s knots once through a throwaway spline
        CubicSpline::new(s.clone(), vec![0.0; s.len()])?;
        let mut rows = Vec::with_capacity(s.len());
        let mut constant_rows = Vec::with_capacity(s.len());
        for row in &values {
            if row.len() != u.len() {
                return Err(Error::DimensionMismatch(format!(
                    "table row has {} entries for {} u-knots",
                    row.len(),
                    u.len()
                )));
            }
            if u.len() == 1 {
                if !row[0].is_finite() {
                    return Err(Error::PreconditionViolated("non-finite table entry".into()));
                }
                rows.push(None);
                constant_rows.push(row[0]);
            } else {
                rows.push(Some(CubicSpline::new(u.clone(), row.clone())?));
                constant_rows.push(0.0);
            }
        }
        Ok(SplineTable2d {
            s,
            u,
            rows,
            constant_rows,
        })
    }

    pub fn s_domain(&self) -> (f64, f64) {
        (self.s[0], self.s[self.s.len() - 1])
    }

    /// `None` when the table is independent of `u`.
    pub fn u_domain(&self) -> Option<(f64, f64)> {
        if self.u.len() == 1 {
            None
        } else {
            Some((self.u[0], self.u[self.u.len() - 1]))
        }
    }

    /// Mixed derivative `d^s_order/ds d^u_order/du` at `(s, u)`; `u_order <= 1`.
    pub fn eval(&self, s: f64, u: f64, s_order: u8, u_order: u8) -> Option<f64> {
        let mut column = Vec::with_capacity(self.s.len());
        for (row, c) in self.rows.iter().zip(&self.constant_rows) {
            let v = match row {
                Some(spline) => spline.eval(u, u_order)?,
                None if u_order == 0 => *c,
                None => 0.0,
            };
            column.push(v);
        }
        if self.s.len() == 1 {
            return Some(if s_order == 0 { column[0] } else { 0.0 });
        }
        CubicSpline::new(self.s.clone(), column)
            .ok()?
            .eval(s, s_order)
    }
}
