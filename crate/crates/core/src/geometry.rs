//! Intrinsic strip data and the transverse Jacobian `f` in Fermi coordinates.
//!
//! A strip of half-width `eps` around a unit-speed curve of length `L` is
//! described by the geodesic curvature `kappa(s)` of the curve and the Gauss
//! curvature `K(s, u)` of the surface, `u` being the unscaled normal distance.
//! In the scaled coordinates `(s, t) in [0, L] x [-1, 1]` the metric is
//! `diag(f^2, eps^2)`, and for every fixed `s` the factor `f` solves
//!
//! ```text
//! f_tt + eps^2 K(s, eps t) f = 0,    f(s, 0) = 1,    f_t(s, 0) = -eps kappa(s).
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_loglog, LogLogFit};
use crate::grid::GridSpec;
use crate::spline::{CubicSpline, SplineTable2d};

/// Base number of intervals for supremum sampling, before oversampling.
const SUP_BASE_INTERVALS: usize = 256;
const SUP_OVERSAMPLING: usize = 16;

/// Geodesic curvature of the base curve as a function of arc length.
#[derive(Debug, Clone, PartialEq)]
pub enum CurvatureProfile {
    Constant(f64),
    /// `amplitude * sin(2 pi s / period)`
    Sine {
        amplitude: f64,
        period: f64,
    },
    Table(CubicSpline),
}

impl CurvatureProfile {
    pub fn value(&self, s: f64) -> Result<f64> {
        self.derivative(s, 0)
    }

    /// `order`-th derivative in `s`, for `order <= 3`.
    pub fn derivative(&self, s: f64, order: u8) -> Result<f64> {
        let v = match self {
            CurvatureProfile::Constant(c) => {
                if order == 0 {
                    *c
                } else {
                    0.0
                }
            }
            CurvatureProfile::Sine { amplitude, period } => {
                let w = 2.0 * std::f64::consts::PI / period;
                let phase = w * s;
                let scale = amplitude * w.powi(order as i32);
                match order % 4 {
                    0 => scale * phase.sin(),
                    1 => scale * phase.cos(),
                    2 => -scale * phase.sin(),
                    _ => -scale * phase.cos(),
                }
            }
            CurvatureProfile::Table(spline) => {
                spline
                    .eval(s, order)
                    .ok_or_else(|| Error::EvaluationFailure {
                        what: "curvature table",
                        at: format!("s = {s}"),
                    })?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::EvaluationFailure {
                what: "curvature",
                at: format!("s = {s}"),
            })
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CurvatureProfile::Constant(c) => *c == 0.0,
            CurvatureProfile::Sine { amplitude, .. } => *amplitude == 0.0,
            CurvatureProfile::Table(_) => false,
        }
    }
}

/// Gauss curvature of the ambient surface near the curve.
#[derive(Debug, Clone, PartialEq)]
pub enum GaussField {
    /// Constant curvature; evaluation is skipped entirely.
    Constant(f64),
    Table(SplineTable2d),
}

impl GaussField {
    pub fn value(&self, s: f64, u: f64) -> Result<f64> {
        self.derivative(s, u, 0, 0)
    }

    /// `d^s_order/ds d^u_order/du K` at `(s, u)`, `s_order <= 3`, `u_order <= 1`.
    pub fn derivative(&self, s: f64, u: f64, s_order: u8, u_order: u8) -> Result<f64> {
        let v = match self {
            GaussField::Constant(k) => {
                if s_order == 0 && u_order == 0 {
                    *k
                } else {
                    0.0
                }
            }
            GaussField::Table(table) => {
                table
                    .eval(s, u, s_order, u_order)
                    .ok_or_else(|| Error::EvaluationFailure {
                        what: "Gauss curvature table",
                        at: format!("(s, u) = ({s}, {u})"),
                    })?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::EvaluationFailure {
                what: "Gauss curvature",
                at: format!("(s, u) = ({s}, {u})"),
            })
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, GaussField::Constant(k) if *k == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StripGeometry {
    length: f64,
    kappa: CurvatureProfile,
    gauss: GaussField,
    epsilon: f64,
}

impl StripGeometry {
    pub fn new(
        length: f64,
        kappa: CurvatureProfile,
        gauss: GaussField,
        epsilon: f64,
    ) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::PreconditionViolated(format!(
                "curve length must be positive, got {length}"
            )));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::PreconditionViolated(format!(
                "half-width must be positive, got {epsilon}"
            )));
        }
        Ok(StripGeometry {
            length,
            kappa,
            gauss,
            epsilon,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kappa(&self) -> &CurvatureProfile {
        &self.kappa
    }

    pub fn gauss(&self) -> &GaussField {
        &self.gauss
    }

    /// Same curve and surface, different half-width.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        StripGeometry::new(self.length, self.kappa.clone(), self.gauss.clone(), epsilon)
    }

    /// True when both curvatures vanish identically, i.e. `f == 1`.
    pub fn is_flat(&self) -> bool {
        self.kappa.is_zero() && self.gauss.is_zero()
    }

    fn sup_s_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = SUP_BASE_INTERVALS * SUP_OVERSAMPLING;
        (0..=n).map(move |k| self.length * k as f64 / n as f64)
    }

    /// `max |kappa|` over a 16x oversampled grid of `[0, L]`.
    pub fn kappa_sup(&self) -> Result<f64> {
        if let CurvatureProfile::Constant(c) = self.kappa {
            return Ok(c.abs());
        }
        self.sup_s_nodes()
            .try_fold(0.0f64, |acc, s| Ok(acc.max(self.kappa.value(s)?.abs())))
    }

    /// `max |K|` over a 16x oversampled grid of `[0, L] x [-half_width, half_width]`.
    pub fn gauss_sup_on(&self, half_width: f64) -> Result<f64> {
        let table = match &self.gauss {
            GaussField::Constant(k) => return Ok(k.abs()),
            GaussField::Table(table) => table,
        };
        let n_u = if table.u_domain().is_some() {
            2 * SUP_OVERSAMPLING
        } else {
            0
        };
        let mut sup = 0.0f64;
        for s in self.sup_s_nodes() {
            for l in 0..=n_u {
                let u = if n_u == 0 {
                    0.0
                } else {
                    -half_width + 2.0 * half_width * l as f64 / n_u as f64
                };
                sup = sup.max(self.gauss.value(s, u)?.abs());
            }
        }
        Ok(sup)
    }

    /// `max |K|` over the strip of half-width `eps`.
    pub fn gauss_sup(&self) -> Result<f64> {
        self.gauss_sup_on(self.epsilon)
    }

    /// `max |K|` over the fixed neighbourhood where `K` is known: the full
    /// `u`-range of a table, or anything for constant `K`.
    pub fn gauss_sup_neighbourhood(&self) -> Result<f64> {
        match &self.gauss {
            GaussField::Constant(k) => Ok(k.abs()),
            GaussField::Table(table) => match table.u_domain() {
                Some((lo, hi)) => self.gauss_sup_on(lo.abs().min(hi.abs())),
                None => self.gauss_sup_on(0.0),
            },
        }
    }
}

/// `C_eps = eps k + (eps^2 G / 2) (1 + eps k) / (1 - eps^2 G / 2)` with
/// `k = sup|kappa|`, `G = sup|K|`; requires `eps^2 G < 2`.
pub fn c_epsilon_from_norms(epsilon: f64, kappa_sup: f64, gauss_sup: f64) -> Result<f64> {
    let half = 0.5 * epsilon * epsilon * gauss_sup;
    if half >= 1.0 {
        return Err(Error::PreconditionViolated(format!(
            "eps^2 sup|K| = {} must be < 2 for the Jacobian bound",
            2.0 * half
        )));
    }
    Ok(epsilon * kappa_sup + half * (1.0 + epsilon * kappa_sup) / (1.0 - half))
}

/// Bound constant `C_eps` for the geometry's own half-width.
pub fn c_epsilon(geom: &StripGeometry) -> Result<f64> {
    c_epsilon_from_norms(geom.epsilon, geom.kappa_sup()?, geom.gauss_sup()?)
}

/// Root of `C_eps = 1` on `(0, sqrt(2 / sup|K|))` by bisection to relative
/// tolerance 1e-10; `+inf` when both curvatures vanish.
pub fn epsilon_tilde_from_norms(kappa_sup: f64, gauss_sup: f64) -> f64 {
    if kappa_sup == 0.0 && gauss_sup == 0.0 {
        return f64::INFINITY;
    }
    let mut hi = if gauss_sup > 0.0 {
        (2.0 / gauss_sup).sqrt()
    } else {
        // C_eps = eps kappa_sup, exceeds 1 beyond 1 / kappa_sup
        2.0 / kappa_sup
    };
    let mut lo = 0.0;
    let c = |e: f64| c_epsilon_from_norms(e, kappa_sup, gauss_sup).unwrap_or(f64::INFINITY);
    while (hi - lo) > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if c(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn epsilon_tilde(geom: &StripGeometry) -> Result<f64> {
    Ok(epsilon_tilde_from_norms(
        geom.kappa_sup()?,
        geom.gauss_sup_neighbourhood()?,
    ))
}

/// Samples of `f` and its first partials (plus `f_tt`) on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    grid: GridSpec,
    epsilon: f64,
    f: Vec<f64>,
    df_ds: Vec<f64>,
    df_dt: Vec<f64>,
    d2f_dt2: Vec<f64>,
}

impl MetricField {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn df_ds(&self) -> &[f64] {
        &self.df_ds
    }

    pub fn df_dt(&self) -> &[f64] {
        &self.df_dt
    }

    pub fn d2f_dt2(&self) -> &[f64] {
        &self.d2f_dt2
    }

    pub fn min_f(&self) -> f64 {
        self.f.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_f(&self) -> f64 {
        self.f.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Plain-text dump of `f`, one line per `t` row.
    pub fn dump(&self) -> String {
        self.grid.dump(&self.f)
    }
}

/// Integrate the Jacobi equation column by column on an `n_s x n_t` grid.
///
/// Each column is advanced from `t = 0` towards `t = +1` and `t = -1` with
/// the classical fourth-order Runge-Kutta scheme, four steps per grid
/// interval.
pub fn solve_jacobi(geom: &StripGeometry, n_s: usize, n_t: usize) -> Result<MetricField> {
    let field = integrate_field(geom, n_s, n_t)?;
    let n_t = field.grid.n_t();
    if let Some((k, &v)) = field.f.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositiveJacobian {
            s_index: k / n_t,
            t_index: k % n_t,
            value: v,
        });
    }
    Ok(field)
}

/// Column data: `(f, f_t, f_tt)` at every `t` node.
type Column = (Vec<f64>, Vec<f64>, Vec<f64>);

fn integrate_field(geom: &StripGeometry, n_s: usize, n_t: usize) -> Result<MetricField> {
    let grid = GridSpec::new(geom.length, n_s, n_t)?;
    let columns: Vec<Column> = (0..n_s)
        .into_par_iter()
        .map(|i| integrate_column(geom, &grid, grid.s(i)))
        .collect::<Result<_>>()?;

    let mut f = Vec::with_capacity(grid.len());
    let mut df_dt = Vec::with_capacity(grid.len());
    let mut d2f_dt2 = Vec::with_capacity(grid.len());
    for (cf, cd, cdd) in columns {
        f.extend(cf);
        df_dt.extend(cd);
        d2f_dt2.extend(cdd);
    }
    let df_ds = differentiate_s(&grid, &f);
    Ok(MetricField {
        grid,
        epsilon: geom.epsilon,
        f,
        df_ds,
        df_dt,
        d2f_dt2,
    })
}

fn integrate_column(geom: &StripGeometry, grid: &GridSpec, s: f64) -> Result<Column> {
    let eps = geom.epsilon;
    let n_t = grid.n_t();
    let mid = grid.t_zero();
    let kappa = geom.kappa.value(s)?;
    let gauss = |t: f64| -> Result<f64> {
        match geom.gauss {
            GaussField::Constant(k) => Ok(k),
            _ => geom.gauss.value(s, eps * t),
        }
    };

    let mut f = vec![0.0; n_t];
    let mut df = vec![0.0; n_t];
    let mut ddf = vec![0.0; n_t];
    f[mid] = 1.0;
    df[mid] = -eps * kappa;
    ddf[mid] = -eps * eps * gauss(0.0)?;

    const SUBSTEPS: usize = 4;
    let h_node = 1.0 / mid as f64;
    for dir in [1.0f64, -1.0] {
        let h = dir * h_node / SUBSTEPS as f64;
        let (mut y, mut p) = (1.0, -eps * kappa);
        for step in 1..=mid {
            let t0 = dir * (step - 1) as f64 * h_node;
            for sub in 0..SUBSTEPS {
                let t = t0 + sub as f64 * h;
                let rhs = |tt: f64, yy: f64| -> Result<f64> { Ok(-eps * eps * gauss(tt)? * yy) };
                let k1y = p;
                let k1p = rhs(t, y)?;
                let k2y = p + 0.5 * h * k1p;
                let k2p = rhs(t + 0.5 * h, y + 0.5 * h * k1y)?;
                let k3y = p + 0.5 * h * k2p;
                let k3p = rhs(t + 0.5 * h, y + 0.5 * h * k2y)?;
                let k4y = p + h * k3p;
                let k4p = rhs(t + h, y + h * k3y)?;
                y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
                p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            }
            let j = if dir > 0.0 { mid + step } else { mid - step };
            f[j] = y;
            df[j] = p;
            ddf[j] = -eps * eps * gauss(grid.t(j))? * y;
        }
    }
    Ok((f, df, ddf))
}

/// Fourth-order differences in `s` (one-sided near the ends); lower order on
/// grids too short for the five-point stencils.
fn differentiate_s(grid: &GridSpec, values: &[f64]) -> Vec<f64> {
    let (n_s, n_t) = (grid.n_s(), grid.n_t());
    let h = grid.h_s();
    let mut out = vec![0.0; values.len()];
    for j in 0..n_t {
        let v = |i: usize| values[grid.index(i, j)];
        for i in 0..n_s {
            let d = if n_s >= 5 {
                if i >= 2 && i + 2 < n_s {
                    (v(i - 2) - 8.0 * v(i - 1) + 8.0 * v(i + 1) - v(i + 2)) / (12.0 * h)
                } else if i == 0 {
                    (-25.0 * v(0) + 48.0 * v(1) - 36.0 * v(2) + 16.0 * v(3) - 3.0 * v(4))
                        / (12.0 * h)
                } else if i == 1 {
                    (-3.0 * v(0) - 10.0 * v(1) + 18.0 * v(2) - 6.0 * v(3) + v(4)) / (12.0 * h)
                } else if i + 2 == n_s {
                    let e = n_s - 1;
                    (3.0 * v(e) + 10.0 * v(e - 1) - 18.0 * v(e - 2) + 6.0 * v(e - 3) - v(e - 4))
                        / (12.0 * h)
                } else {
                    let e = n_s - 1;
                    (25.0 * v(e) - 48.0 * v(e - 1) + 36.0 * v(e - 2) - 16.0 * v(e - 3)
                        + 3.0 * v(e - 4))
                        / (12.0 * h)
                }
            } else if n_s >= 3 {
                if i == 0 {
                    (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
                } else if i + 1 == n_s {
                    (3.0 * v(i) - 4.0 * v(i - 1) + v(i - 2)) / (2.0 * h)
                } else {
                    (v(i + 1) - v(i - 1)) / (2.0 * h)
                }
            } else {
                (v(1) - v(0)) / h
            };
            out[grid.index(i, j)] = d;
        }
    }
    out
}

/// Bound constant, validity radius and the numerical positivity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub epsilon: f64,
    /// `None` when `eps^2 sup|K| >= 2` and the bound does not apply.
    pub c_eps: Option<f64>,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub eps_tilde: f64,
    pub min_f: f64,
    pub max_f: f64,
    pub valid: bool,
}

/// Evaluate `C_eps` and `eps_tilde` and integrate `f` on an `n_s x n_t` grid.
pub fn validate(geom: &StripGeometry, n_s: usize, n_t: usize) -> Result<ValidityReport> {
    let c_eps = match c_epsilon(geom) {
        Ok(c) => Some(c),
        Err(Error::PreconditionViolated(_)) => None,
        Err(e) => return Err(e),
    };
    let eps_tilde = epsilon_tilde(geom)?;
    let field = integrate_field(geom, n_s, n_t)?;
    let min_f = field.min_f();
    Ok(ValidityReport {
        epsilon: geom.epsilon,
        c_eps,
        eps_tilde,
        min_f,
        max_f: field.max_f(),
        valid: geom.epsilon < eps_tilde && min_f > 0.0,
    })
}

/// Log-log slope of one sup-norm quantity across a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SlopeEstimate {
    /// All samples are zero (or not strictly positive); nothing to fit.
    Degenerate,
    Fitted(LogLogFit),
}

impl SlopeEstimate {
    pub fn slope(&self) -> Option<f64> {
        match self {
            SlopeEstimate::Degenerate => None,
            SlopeEstimate::Fitted(fit) => Some(fit.slope),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRow {
    pub epsilon: f64,
    pub sup_f_minus_one: f64,
    pub sup_df_ds: f64,
    pub sup_df_dt: f64,
    pub sup_d2f_dt2: f64,
}

/// Sup norms of `f - 1`, `f_s`, `f_t`, `f_tt` per half-width, with fitted
/// slopes to compare against the orders 1, 1, 1 and 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsTable {
    pub rows: Vec<AsymptoticsRow>,
    pub slope_f_minus_one: SlopeEstimate,
    pub slope_df_ds: SlopeEstimate,
    pub slope_df_dt: SlopeEstimate,
    pub slope_d2f_dt2: SlopeEstimate,
}

pub fn verify_f_asymptotics(family: &[MetricField]) -> Result<AsymptoticsTable> {
    if family.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: family.len(),
        });
    }
    let grid = family[0].grid;
    if family.iter().any(|m| m.grid != grid) {
        return Err(Error::PreconditionViolated(
            "all fields must share one grid".into(),
        ));
    }
    if family.windows(2).any(|w| !(w[1].epsilon < w[0].epsilon)) {
        return Err(Error::PreconditionViolated(
            "half-widths must be strictly decreasing".into(),
        ));
    }
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let rows: Vec<AsymptoticsRow> = family
        .iter()
        .map(|m| AsymptoticsRow {
            epsilon: m.epsilon,
            sup_f_minus_one: m.f.iter().fold(0.0f64, |a, x| a.max((x - 1.0).abs())),
            sup_df_ds: sup(&m.df_ds),
            sup_df_dt: sup(&m.df_dt),
            sup_d2f_dt2: sup(&m.d2f_dt2),
        })
        .collect();
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let slope = |pick: fn(&AsymptoticsRow) -> f64| {
        let values: Vec<f64> = rows.iter().map(pick).collect();
        match fit_loglog(&eps, &values) {
            Some(fit) => SlopeEstimate::Fitted(fit),
            None => SlopeEstimate::Degenerate,
        }
    };
    Ok(AsymptoticsTable {
        slope_f_minus_one: slope(|r| r.sup_f_minus_one),
        slope_df_ds: slope(|r| r.sup_df_ds),
        slope_df_dt: slope(|r| r.sup_df_dt),
        slope_d2f_dt2: slope(|r| r.sup_d2f_dt2),
        rows,
    })
}
