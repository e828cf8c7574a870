//! Extremum localization checks and half-width convergence studies.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{
    align_sign, resolvent_gap_with, solve_smallest_with, EigenPair, PowerOptions, SolverOptions,
};
use crate::error::{Error, Result};
pub use crate::fit::{fit_loglog, LogLogFit};
use crate::geometry::{epsilon_tilde, solve_jacobi, GaussField, StripGeometry};
use crate::grid::GridSpec;
use crate::operator::{
    assemble_eps, assemble_flat, longitudinal_eigenvalue, sample_psi0, DiscreteForms,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub m: usize,
    pub s: f64,
    pub kind: ExtremumKind,
}

/// `s_m = m L / (n - 1)` for `m = 0..n`; even `m` are maxima.
pub fn stationary_points_1d(n: usize, length: f64) -> Result<Vec<StationaryPoint>> {
    if n < 2 {
        return Err(Error::PreconditionViolated(format!(
            "mode index must be >= 2, got {n}"
        )));
    }
    Ok((0..n)
        .map(|m| StationaryPoint {
            m,
            s: if m + 1 == n {
                length
            } else {
                m as f64 * length / (n - 1) as f64
            },
            kind: if m % 2 == 0 {
                ExtremumKind::Max
            } else {
                ExtremumKind::Min
            },
        })
        .collect())
}

/// Default localization half-width `0.1 L / (n - 1)`.
pub fn default_delta(n: usize, length: f64) -> f64 {
    0.1 * length / (n.max(2) - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub i: usize,
    pub j: usize,
    pub s: f64,
    pub t: f64,
    pub value: f64,
}

impl Node {
    fn at(grid: &GridSpec, values: &[f64], i: usize, j: usize) -> Self {
        Node {
            i,
            j,
            s: grid.s(i),
            t: grid.t(j),
            value: values[grid.index(i, j)],
        }
    }
}

/// Nodes within `flat_top_tol * (max - min)` of the global max and min.
pub fn locate_extrema(
    values: &[f64],
    grid: &GridSpec,
    flat_top_tol: f64,
) -> Result<(Vec<Node>, Vec<Node>)> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values on a grid of {} nodes",
            values.len(),
            grid.len()
        )));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if !(range >= 1e-12) {
        return Err(Error::DegenerateRange { range });
    }
    let band = flat_top_tol * range;
    let mut max_nodes = Vec::new();
    let mut min_nodes = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        let (i, j) = grid.coords(k);
        if v >= max - band {
            max_nodes.push(Node::at(grid, values, i, j));
        }
        if v <= min + band {
            min_nodes.push(Node::at(grid, values, i, j));
        }
    }
    Ok((max_nodes, min_nodes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationOptions {
    pub flat_top_tol: f64,
    /// stationary threshold relative to the largest interior gradient
    pub grad_tol: f64,
}

impl Default for LocationOptions {
    fn default() -> Self {
        LocationOptions {
            flat_top_tol: 1e-6,
            grad_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaReport {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub max_nodes: Vec<Node>,
    pub min_nodes: Vec<Node>,
    /// interior nodes with small discrete gradient
    pub stationary_nodes: Vec<Node>,
    /// stationary interior nodes outside every band `S_m(delta)`
    pub stationary_outside: Vec<Node>,
    /// local minima in even bands or local maxima in odd interior bands
    pub forbidden_extrema: Vec<Node>,
    pub verdict_max: bool,
    pub verdict_min: bool,
    /// extrema on the boundary only; reported for `n = 2`
    pub boundary_verdict: Option<bool>,
}

impl ExtremaReport {
    pub fn passed(&self) -> bool {
        self.verdict_max
            && self.verdict_min
            && self.boundary_verdict != Some(false)
            && self.stationary_outside.is_empty()
            && self.forbidden_extrema.is_empty()
    }
}

struct Bands {
    length: f64,
    delta: f64,
    points: Vec<StationaryPoint>,
    slack: f64,
}

impl Bands {
    /// closed set `S~_m`
    fn in_closed(&self, grid: &GridSpec, m: usize, i: usize) -> bool {
        let last = self.points.len() - 1;
        if m == 0 {
            i == 0
        } else if m == last {
            i + 1 == grid.n_s()
        } else {
            (grid.s(i) - self.points[m].s).abs() <= self.delta + self.slack
        }
    }

    /// open set `S_m(delta)` restricted to `(0, L) x (-1, 1)`
    fn in_open(&self, grid: &GridSpec, m: usize, i: usize, j: usize) -> bool {
        let s = grid.s(i);
        (s - self.points[m].s).abs() < self.delta
            && s > 0.0
            && s < self.length
            && j > 0
            && j + 1 < grid.n_t()
    }
}

/// Check the extremum and stationary-point localization of the `n`-th mode.
///
/// The vector is first sign-aligned against the sampled flat mode in the
/// forms' mass inner product.
pub fn check_location(
    pair: &EigenPair,
    n: usize,
    delta: f64,
    forms: &DiscreteForms,
    opts: &LocationOptions,
) -> Result<ExtremaReport> {
    let grid = forms.grid();
    let length = grid.length();
    if n < 2 {
        return Err(Error::PreconditionViolated(format!(
            "mode index must be >= 2, got {n}"
        )));
    }
    let limit = length / (4.0 * (n - 1) as f64);
    if !(delta > 0.0 && delta < limit) {
        return Err(Error::PreconditionViolated(format!(
            "delta = {delta} must lie in (0, L/(4(n-1))) = (0, {limit})"
        )));
    }
    let reference = sample_psi0(n, grid)?;
    let aligned = align_sign(pair, &reference, forms.mass())?;
    let values = &aligned.vector;
    let (max_nodes, min_nodes) = locate_extrema(values, grid, opts.flat_top_tol)?;

    let bands = Bands {
        length,
        delta,
        points: stationary_points_1d(n, length)?,
        slack: 1e-12 * length,
    };
    let parity_ok = |node: &Node, parity: usize| {
        (0..n)
            .filter(|m| m % 2 == parity)
            .any(|m| bands.in_closed(grid, m, node.i))
    };
    let verdict_max = max_nodes.iter().all(|node| parity_ok(node, 0));
    let verdict_min = min_nodes.iter().all(|node| parity_ok(node, 1));
    let boundary_verdict = (n == 2).then(|| {
        max_nodes
            .iter()
            .chain(&min_nodes)
            .all(|node| grid.is_boundary(node.i, node.j))
    });

    let (n_s, n_t) = (grid.n_s(), grid.n_t());
    let v = |i: usize, j: usize| values[grid.index(i, j)];
    let mut gradients = Vec::new();
    for i in 1..n_s.saturating_sub(1) {
        for j in 1..n_t - 1 {
            let gs = (v(i + 1, j) - v(i - 1, j)) / (2.0 * grid.h_s());
            let gt = (v(i, j + 1) - v(i, j - 1)) / (2.0 * grid.h_t());
            gradients.push((i, j, gs.hypot(gt)));
        }
    }
    let max_grad = gradients.iter().fold(0.0f64, |a, g| a.max(g.2));
    let threshold = opts.grad_tol * max_grad;
    let stationary_nodes: Vec<Node> = gradients
        .iter()
        .filter(|g| g.2 < threshold)
        .map(|&(i, j, _)| Node::at(grid, values, i, j))
        .collect();
    let stationary_outside: Vec<Node> = stationary_nodes
        .iter()
        .filter(|node| !(0..n).any(|m| bands.in_open(grid, m, node.i, node.j)))
        .copied()
        .collect();

    let mut forbidden_extrema = Vec::new();
    for m in 1..n - 1 {
        for i in 1..n_s - 1 {
            for j in 1..n_t - 1 {
                if !bands.in_open(grid, m, i, j) {
                    continue;
                }
                let kind = strict_local_extremum(grid, values, i, j);
                let forbidden = match kind {
                    Some(ExtremumKind::Min) => m % 2 == 0,
                    Some(ExtremumKind::Max) => m % 2 == 1,
                    None => false,
                };
                if forbidden {
                    forbidden_extrema.push(Node::at(grid, values, i, j));
                }
            }
        }
    }

    Ok(ExtremaReport {
        n,
        epsilon: forms.epsilon(),
        delta,
        max_nodes,
        min_nodes,
        stationary_nodes,
        stationary_outside,
        forbidden_extrema,
        verdict_max,
        verdict_min,
        boundary_verdict,
    })
}

/// Strict comparison against every available neighbour of the 8-neighbourhood;
/// ties are not extrema.
pub fn strict_local_extremum(
    grid: &GridSpec,
    values: &[f64],
    i: usize,
    j: usize,
) -> Option<ExtremumKind> {
    let centre = values[grid.index(i, j)];
    let (mut above, mut below) = (true, true);
    for di in -1isize..=1 {
        for dj in -1isize..=1 {
            if di == 0 && dj == 0 {
                continue;
            }
            let (ni, nj) = (i as isize + di, j as isize + dj);
            if ni < 0 || nj < 0 || ni >= grid.n_s() as isize || nj >= grid.n_t() as isize {
                continue;
            }
            let other = values[grid.index(ni as usize, nj as usize)];
            above &= centre > other;
            below &= centre < other;
        }
    }
    match (above, below) {
        (true, _) => Some(ExtremumKind::Max),
        (_, true) => Some(ExtremumKind::Min),
        _ => None,
    }
}

/// Left-hand side of the uniform-class bound: the supremum over
/// `[0, L] x [-radius, radius]` of
/// `sum_{i<=3} (|kappa^(i)| + |d_s^i K|) + |d_u K|`.
pub fn uniform_class_check(geom: &StripGeometry, radius: f64) -> Result<f64> {
    let radius = match geom.gauss() {
        GaussField::Table(table) => match table.u_domain() {
            Some((lo, hi)) => radius.min(lo.abs()).min(hi.abs()),
            None => 0.0,
        },
        GaussField::Constant(_) => radius,
    };
    let n_s = 4096;
    let n_u = if radius > 0.0 { 32 } else { 0 };
    let mut sup = 0.0f64;
    for k in 0..=n_s {
        let s = geom.length() * k as f64 / n_s as f64;
        let mut kappa_part = 0.0;
        for order in 0..=3 {
            kappa_part += geom.kappa().derivative(s, order)?.abs();
        }
        for l in 0..=n_u {
            let u = if n_u == 0 {
                0.0
            } else {
                -radius + 2.0 * radius * l as f64 / n_u as f64
            };
            let mut total = kappa_part + geom.gauss().derivative(s, u, 0, 1)?.abs();
            for order in 0..=3 {
                total += geom.gauss().derivative(s, u, order, 0)?.abs();
            }
            sup = sup.max(total);
        }
    }
    Ok(sup)
}

/// Quantity compared against the flat limit in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    EigenvalueError,
    L2Error,
    SupError,
    SupGradSError,
    ResolventGap,
}

impl Observable {
    pub const ALL: [Observable; 5] = [
        Observable::EigenvalueError,
        Observable::L2Error,
        Observable::SupError,
        Observable::SupGradSError,
        Observable::ResolventGap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Observable::EigenvalueError => "eigenvalue_error",
            Observable::L2Error => "l2_error",
            Observable::SupError => "sup_error",
            Observable::SupGradSError => "sup_grad_s_error",
            Observable::ResolventGap => "resolvent_gap",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Observable::ALL.into_iter().find(|o| o.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// `s` nodes for the bootstrap run at the largest half-width
    pub base_n_s: usize,
    pub n_t: usize,
    pub max_n_s: usize,
    /// multiplies the number of `s` intervals chosen by the scaling rule
    pub refine: usize,
    /// largest mode index `N` the half-widths must respect
    pub max_mode: usize,
    pub solver: SolverOptions,
    pub power_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            base_n_s: 129,
            n_t: 9,
            max_n_s: 8193,
            refine: 1,
            max_mode: 4,
            solver: SolverOptions::default(),
            power_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    /// `None` when the mode could not be paired (degenerate eigenvalue)
    pub error: Option<f64>,
    /// same observable for the flat problem on the same grid
    pub floor: f64,
    pub n_s: usize,
    pub n_t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitOutcome {
    Fitted(LogLogFit),
    /// every error sits at the discretization floor: the model is exact
    ExactSkipped,
    Skipped {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub observable: Observable,
    pub n: usize,
    pub rows: Vec<ConvergenceRow>,
    pub fit: FitOutcome,
    pub warnings: Vec<String>,
}

impl ConvergenceReport {
    pub fn slope(&self) -> Option<f64> {
        match &self.fit {
            FitOutcome::Fitted(fit) => Some(fit.slope),
            _ => None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,error,floor,n_s,n_t\n");
        for row in &self.rows {
            let err = row.error.map_or_else(String::new, |e| format!("{e:.17e}"));
            let _ = writeln!(
                out,
                "{:.17e},{},{:.17e},{},{}",
                row.epsilon, err, row.floor, row.n_s, row.n_t
            );
        }
        out
    }
}

/// Validate a half-width list for a sweep; returns it sorted decreasing.
pub fn check_sweep_epsilons(
    geom: &StripGeometry,
    eps_list: &[f64],
    max_mode: usize,
) -> Result<Vec<f64>> {
    if eps_list.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: eps_list.len(),
        });
    }
    let mut eps = eps_list.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let ratio = std::f64::consts::FRAC_1_SQRT_2 * (1.0 + 1e-12);
    if eps.windows(2).any(|w| !(w[1] <= ratio * w[0])) {
        return Err(Error::PreconditionViolated(
            "half-widths must decrease geometrically with ratio <= 1/sqrt(2)".into(),
        ));
    }
    let rearrange = geom.length() / (2.0 * (max_mode.max(2) - 1) as f64);
    let tilde = epsilon_tilde(geom)?;
    if let Some(bad) = eps.iter().find(|&&e| !(e > 0.0 && e < rearrange)) {
        return Err(Error::PreconditionViolated(format!(
            "eps = {bad} violates eps < L/(2(N-1)) = {rearrange} (N = {max_mode}), which keeps the first N flat modes longitudinal"
        )));
    }
    if let Some(bad) = eps.iter().find(|&&e| !(e < tilde)) {
        return Err(Error::PreconditionViolated(format!(
            "eps = {bad} is not below the validity radius {tilde}"
        )));
    }
    Ok(eps)
}

struct Sample {
    error: Option<f64>,
    floor: f64,
}

fn nodal_diff_s(grid: &GridSpec, v: &[f64]) -> Vec<f64> {
    let (n_s, h) = (grid.n_s(), grid.h_s());
    let mut out = vec![0.0; v.len()];
    for i in 0..n_s {
        for j in 0..grid.n_t() {
            let at = |k: usize| v[grid.index(k, j)];
            out[grid.index(i, j)] = if n_s < 3 {
                (at(1) - at(0)) / h
            } else if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if i + 1 == n_s {
                (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * h)
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * h)
            };
        }
    }
    out
}

fn mode_error(
    observable: Observable,
    pair: &EigenPair,
    n: usize,
    forms: &DiscreteForms,
    flat_mass: &DiscreteForms,
) -> Result<f64> {
    let grid = forms.grid();
    // sampled flat mode, rescaled to unit norm in the discrete flat inner product
    let mut reference = sample_psi0(n, grid)?;
    let scale = flat_mass.mass().bilinear(&reference, &reference).sqrt();
    reference.iter_mut().for_each(|v| *v /= scale);
    let aligned = align_sign(pair, &reference, forms.mass())?;
    let diff: Vec<f64> = aligned
        .vector
        .iter()
        .zip(&reference)
        .map(|(a, b)| a - b)
        .collect();
    Ok(match observable {
        Observable::EigenvalueError => {
            (pair.value - longitudinal_eigenvalue(n, grid.length())).abs()
        }
        Observable::L2Error => flat_mass.mass().bilinear(&diff, &diff).max(0.0).sqrt(),
        Observable::SupError => diff.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        Observable::SupGradSError => nodal_diff_s(grid, &diff)
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs())),
        Observable::ResolventGap => unreachable!("resolvent gap is not a mode error"),
    })
}

fn evaluate(
    geom: &StripGeometry,
    n_s: usize,
    n: usize,
    observable: Observable,
    opts: &SweepOptions,
) -> Result<Sample> {
    let metric = solve_jacobi(geom, n_s, opts.n_t)?;
    let forms = assemble_eps(&metric)?;
    let flat = assemble_flat(metric.grid(), geom.epsilon())?;
    if observable == Observable::ResolventGap {
        let power = PowerOptions {
            seed: opts.solver.seed,
            ..PowerOptions::default()
        };
        let est = resolvent_gap_with(&forms, &flat, &metric, opts.power_tol, &power)?;
        return Ok(Sample {
            error: Some(est.norm_estimate),
            floor: 0.0,
        });
    }
    let curved_pairs = solve_smallest_with(&forms, n, &opts.solver)?;
    let flat_pairs = solve_smallest_with(&flat, n, &opts.solver)?;
    let floor = mode_error(observable, &flat_pairs[n - 1], n, &flat, &flat)?;
    let pair = &curved_pairs[n - 1];
    let error = if pair.degenerate {
        None
    } else {
        Some(mode_error(observable, pair, n, &forms, &flat)?)
    };
    Ok(Sample { error, floor })
}

/// Grid size from the bootstrap constant: `h_s^2 <= 0.1 C eps`.
fn scaled_n_s(length: f64, constant: f64, eps: f64, opts: &SweepOptions) -> usize {
    let base = if constant > 0.0 {
        let h = (0.1 * constant * eps).sqrt();
        ((length / h).ceil() as usize + 1).max(opts.base_n_s)
    } else {
        opts.base_n_s
    };
    let capped = base.min(opts.max_n_s);
    (capped - 1) * opts.refine.max(1) + 1
}

/// Run the pipeline for each half-width and fit the log-log rate of `observable`.
pub fn sweep_convergence(
    geom: &StripGeometry,
    eps_list: &[f64],
    n: usize,
    observable: Observable,
    opts: &SweepOptions,
) -> Result<ConvergenceReport> {
    if n < 1 || n > opts.max_mode {
        return Err(Error::PreconditionViolated(format!(
            "mode {n} must lie in 1..={}",
            opts.max_mode
        )));
    }
    let eps = check_sweep_epsilons(geom, eps_list, opts.max_mode)?;

    // bootstrap the error constant on the coarsest run
    let coarse = geom.with_epsilon(eps[0])?;
    let boot = evaluate(&coarse, opts.base_n_s, n, observable, opts)?;
    let constant = match boot.error {
        Some(e) if e > boot.floor => (e - boot.floor) / eps[0],
        _ => 0.0,
    };

    let samples: Vec<(f64, usize, Sample)> = eps
        .par_iter()
        .map(|&e| {
            let g = geom.with_epsilon(e)?;
            let n_s = scaled_n_s(geom.length(), constant, e, opts);
            Ok((e, n_s, evaluate(&g, n_s, n, observable, opts)?))
        })
        .collect::<Result<_>>()?;

    let rows: Vec<ConvergenceRow> = samples
        .iter()
        .map(|(e, n_s, sample)| ConvergenceRow {
            epsilon: *e,
            error: sample.error,
            floor: sample.floor,
            n_s: *n_s,
            n_t: opts.n_t,
        })
        .collect();

    let mut warnings = Vec::new();
    for row in rows.iter().filter(|r| r.error.is_none()) {
        warnings.push(format!(
            "degenerate eigenvalue at eps = {}: mode {n} not paired",
            row.epsilon
        ));
    }
    let valid: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.error.is_some()).collect();
    let at_floor = |r: &ConvergenceRow| {
        let e = r.error.unwrap_or(0.0);
        e <= r.floor * (1.0 + 1e-9) + 1e-15
    };
    let fit = if !valid.is_empty() && valid.iter().all(|r| at_floor(r)) {
        FitOutcome::ExactSkipped
    } else if valid.len() < 4 {
        FitOutcome::Skipped {
            reason: format!("only {} paired samples", valid.len()),
        }
    } else {
        let xs: Vec<f64> = valid.iter().map(|r| r.epsilon).collect();
        let ys: Vec<f64> = valid.iter().map(|r| r.error.unwrap_or(0.0)).collect();
        match fit_loglog(&xs, &ys) {
            Some(fit) => FitOutcome::Fitted(fit),
            None => FitOutcome::Skipped {
                reason: "non-positive error in table".into(),
            },
        }
    };

    if !matches!(fit, FitOutcome::ExactSkipped) && valid.len() >= 2 {
        let last = valid[valid.len() - 1];
        let prev = valid[valid.len() - 2];
        let (el, ep) = (last.error.unwrap_or(0.0), prev.error.unwrap_or(0.0));
        if el >= 0.9 * ep || el <= 10.0 * last.floor {
            warnings.push(format!(
                "discretization floor: error {el:e} at eps = {} (previous {ep:e}, floor {:e}); refine the s-grid",
                last.epsilon, last.floor
            ));
        }
    }

    Ok(ConvergenceReport {
        observable,
        n,
        rows,
        fit,
        warnings,
    })
}
