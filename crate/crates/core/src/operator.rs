//! Bilinear finite elements for the Neumann forms on the reference rectangle.
//!
//! The stiffness matrix realizes
//! `h[psi] = int f^{-1} |psi_s|^2 + eps^{-2} int f |psi_t|^2`
//! and the mass matrix the weighted inner product `int f psi phi`. Neumann
//! conditions are natural: no boundary rows are modified.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MetricField;
use crate::grid::GridSpec;
use crate::sparse::CsrMatrix;

/// Stiffness and mass matrices for one half-width.
#[derive(Debug, Clone)]
pub struct DiscreteForms {
    grid: GridSpec,
    epsilon: f64,
    stiffness: CsrMatrix,
    mass: CsrMatrix,
    /// nodal `f`; `None` for the flat forms
    weight: Option<Vec<f64>>,
}

impl DiscreteForms {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn weight(&self) -> Option<&[f64]> {
        self.weight.as_deref()
    }

    pub fn is_flat(&self) -> bool {
        self.weight.is_none()
    }
}

// Gauss points on [0, 1] and the shape functions of the unit square.
const GAUSS: [f64; 2] = [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9];
/// local corner offsets `(di, dj)`
const CORNERS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

fn shape(corner: (usize, usize), x: f64, y: f64) -> (f64, f64, f64) {
    let (px, dx) = if corner.0 == 0 {
        (1.0 - x, -1.0)
    } else {
        (x, 1.0)
    };
    let (py, dy) = if corner.1 == 0 {
        (1.0 - y, -1.0)
    } else {
        (y, 1.0)
    };
    (px * py, dx * py, px * dy)
}

type SparseRow = Vec<(usize, f64)>;

type Element = ([[f64; 4]; 4], [[f64; 4]; 4]);

/// Element stiffness and mass for a cell with corner weights `fc`.
fn element(fc: [f64; 4], h_s: f64, h_t: f64, inv_eps2: f64) -> Element {
    let mut a = [[0.0; 4]; 4];
    let mut m = [[0.0; 4]; 4];
    let w = 0.25 * h_s * h_t;
    for &x in &GAUSS {
        for &y in &GAUSS {
            let mut vals = [(0.0, 0.0, 0.0); 4];
            let mut f = 0.0;
            for (k, &c) in CORNERS.iter().enumerate() {
                vals[k] = shape(c, x, y);
                f += fc[k] * vals[k].0;
            }
            let finv = 1.0 / f;
            for p in 0..4 {
                let (vp, sp, tp) = vals[p];
                for q in p..4 {
                    let (vq, sq, tq) = vals[q];
                    a[p][q] += w
                        * (finv * (sp / h_s) * (sq / h_s) + inv_eps2 * f * (tp / h_t) * (tq / h_t));
                    m[p][q] += w * f * vp * vq;
                }
            }
        }
    }
    for p in 0..4 {
        for q in 0..p {
            a[p][q] = a[q][p];
            m[p][q] = m[q][p];
        }
    }
    (a, m)
}

fn assemble(grid: GridSpec, epsilon: f64, weight: Option<Vec<f64>>) -> Result<DiscreteForms> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "half-width must be positive, got {epsilon}"
        )));
    }
    if let Some(w) = &weight {
        if w.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "weight has {} samples for {} nodes",
                w.len(),
                grid.len()
            )));
        }
        if let Some((k, &v)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            let (i, j) = grid.coords(k);
            return Err(Error::NonPositiveJacobian {
                s_index: i,
                t_index: j,
                value: v,
            });
        }
    }
    let (n_s, n_t) = (grid.n_s(), grid.n_t());
    let (h_s, h_t) = (grid.h_s(), grid.h_t());
    let inv_eps2 = 1.0 / (epsilon * epsilon);
    let nodal = |i: usize, j: usize| weight.as_ref().map_or(1.0, |w| w[grid.index(i, j)]);

    let cells_t = n_t - 1;
    let elements: Vec<Element> = (0..(n_s - 1) * cells_t)
        .into_par_iter()
        .map(|c| {
            let (ci, cj) = (c / cells_t, c % cells_t);
            let fc = CORNERS.map(|(di, dj)| nodal(ci + di, cj + dj));
            element(fc, h_s, h_t, inv_eps2)
        })
        .collect();

    // each row sums its neighbouring cells in a fixed order
    let rows: Vec<(SparseRow, SparseRow)> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let (i, j) = grid.coords(node);
            let mut a_row = [0.0; 9];
            let mut m_row = [0.0; 9];
            for (di, dj) in CORNERS {
                // the cell whose corner (di, dj) is this node
                if i < di || j < dj || i - di >= n_s - 1 || j - dj >= n_t - 1 {
                    continue;
                }
                let (ci, cj) = (i - di, j - dj);
                let (ea, em) = &elements[ci * cells_t + cj];
                let p = CORNERS.iter().position(|&c| c == (di, dj)).unwrap();
                for (q, &(qi, qj)) in CORNERS.iter().enumerate() {
                    // offset of the other corner relative to this node, in -1..=1
                    let oi = (ci + qi) as isize - i as isize;
                    let oj = (cj + qj) as isize - j as isize;
                    let slot = ((oi + 1) * 3 + (oj + 1)) as usize;
                    a_row[slot] += ea[p][q];
                    m_row[slot] += em[p][q];
                }
            }
            let mut a_out = Vec::with_capacity(9);
            let mut m_out = Vec::with_capacity(9);
            for oi in -1isize..=1 {
                for oj in -1isize..=1 {
                    let (ni, nj) = (i as isize + oi, j as isize + oj);
                    if ni < 0 || nj < 0 || ni >= n_s as isize || nj >= n_t as isize {
                        continue;
                    }
                    let col = grid.index(ni as usize, nj as usize);
                    let slot = ((oi + 1) * 3 + (oj + 1)) as usize;
                    a_out.push((col, a_row[slot]));
                    m_out.push((col, m_row[slot]));
                }
            }
            (a_out, m_out)
        })
        .collect();
    let (a_rows, m_rows): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(DiscreteForms {
        grid,
        epsilon,
        stiffness: CsrMatrix::from_rows(a_rows)?,
        mass: CsrMatrix::from_rows(m_rows)?,
        weight,
    })
}

/// Forms of the curved strip, weighted by the metric's `f`.
pub fn assemble_eps(metric: &MetricField) -> Result<DiscreteForms> {
    assemble(*metric.grid(), metric.epsilon(), Some(metric.f().to_vec()))
}

/// Forms of the straight strip (`f == 1`).
pub fn assemble_flat(grid: &GridSpec, epsilon: f64) -> Result<DiscreteForms> {
    assemble(*grid, epsilon, None)
}

/// One entry `lambda = lambda_n + nu_m` of the separable flat spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEigenvalue {
    pub lambda: f64,
    /// longitudinal index, starting at 1
    pub n: usize,
    /// transverse index, starting at 0
    pub m: usize,
}

/// Closed-form spectrum of the flat operator, nondecreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpectrum {
    pub entries: Vec<ReferenceEigenvalue>,
}

impl ReferenceSpectrum {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }
}

/// `((n - 1) pi / L)^2`
pub fn longitudinal_eigenvalue(n: usize, length: f64) -> f64 {
    let k = (n.max(1) - 1) as f64 * std::f64::consts::PI / length;
    k * k
}

/// `(m pi / (2 eps))^2`
pub fn transverse_eigenvalue(m: usize, epsilon: f64) -> f64 {
    let k = m as f64 * std::f64::consts::PI / (2.0 * epsilon);
    k * k
}

/// The `count` smallest `lambda_n + nu_m`, ties broken by `(m, n)`.
pub fn reference_spectrum(length: f64, epsilon: f64, count: usize) -> Result<ReferenceSpectrum> {
    if count == 0 {
        return Err(Error::PreconditionViolated("count must be >= 1".into()));
    }
    if !(length > 0.0 && epsilon > 0.0) {
        return Err(Error::PreconditionViolated(
            "length and half-width must be positive".into(),
        ));
    }
    // the smallest `count` values use n <= count and m <= count - 1
    let mut all = Vec::with_capacity(count * count);
    for m in 0..count {
        for n in 1..=count {
            all.push(ReferenceEigenvalue {
                lambda: longitudinal_eigenvalue(n, length) + transverse_eigenvalue(m, epsilon),
                n,
                m,
            });
        }
    }
    all.sort_by(|a, b| {
        a.lambda
            .total_cmp(&b.lambda)
            .then(a.m.cmp(&b.m))
            .then(a.n.cmp(&b.n))
    });
    all.truncate(count);
    Ok(ReferenceSpectrum { entries: all })
}

/// `u_n(s)` of the interval `(0, L)`, unit `L^2` norm.
pub fn interval_mode(n: usize, length: f64, s: f64) -> f64 {
    if n <= 1 {
        1.0 / length.sqrt()
    } else {
        (2.0 / length).sqrt() * ((n - 1) as f64 * std::f64::consts::PI * s / length).cos()
    }
}

/// `s`-derivative of [`interval_mode`].
pub fn interval_mode_ds(n: usize, length: f64, s: f64) -> f64 {
    if n <= 1 {
        0.0
    } else {
        let k = (n - 1) as f64 * std::f64::consts::PI / length;
        -(2.0 / length).sqrt() * k * (k * s).sin()
    }
}

/// `psi_n(s, t) = u_n(s) / sqrt(2)` at every node, unit norm in `L^2` of the rectangle.
pub fn sample_psi0(n: usize, grid: &GridSpec) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::PreconditionViolated("mode index starts at 1".into()));
    }
    let length = grid.length();
    Ok(grid.sample(|s, _| interval_mode(n, length, s) / std::f64::consts::SQRT_2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{solve_jacobi, CurvatureProfile, GaussField, StripGeometry};

    #[test]
    fn reference_spectrum_ordering() {
        let spectrum = reference_spectrum(std::f64::consts::PI, 0.1, 3).unwrap();
        assert_eq!(spectrum.values(), vec![0.0, 1.0, 4.0]);
        assert!(spectrum.entries.iter().all(|e| e.m == 0));

        let wide = reference_spectrum(std::f64::consts::PI, 1.0, 3).unwrap();
        let nu1 = (std::f64::consts::PI / 2.0).powi(2);
        assert_eq!(wide.entries[2].m, 1);
        assert!((wide.entries[2].lambda - nu1).abs() < 1e-15);
        assert_eq!(wide.entries[1].lambda, 1.0);

        assert_eq!(reference_spectrum(7.0, 0.3, 1).unwrap().values(), vec![0.0]);
        assert!(reference_spectrum(1.0, 0.1, 0).is_err());
    }

    #[test]
    fn psi0_samples() {
        let pi = std::f64::consts::PI;
        let grid = GridSpec::new(pi, 9, 5).unwrap();
        let c = sample_psi0(1, &grid).unwrap();
        assert!(c
            .iter()
            .all(|v| (v - 1.0 / (2.0 * pi).sqrt()).abs() < 1e-15));
        let p2 = sample_psi0(2, &grid).unwrap();
        assert!((p2[grid.index(0, 2)] - 1.0 / pi.sqrt()).abs() < 1e-15);
        assert!(p2[grid.index(4, 0)].abs() < 1e-15);
    }

    #[test]
    fn toy_grid_neumann_kernel() {
        let grid = GridSpec::new(1.0, 2, 3).unwrap();
        let forms = assemble_flat(&grid, 1.0).unwrap();
        let ones = vec![1.0; grid.len()];
        let r = forms.stiffness().mul_vec(&ones);
        assert!(r.iter().all(|v| v.abs() < 1e-14), "{r:?}");
        assert!((forms.mass().bilinear(&ones, &ones) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_positive_weight() {
        let grid = GridSpec::new(1.0, 3, 3).unwrap();
        let mut w = vec![1.0; grid.len()];
        w[4] = 0.0;
        assert!(matches!(
            assemble(grid, 0.1, Some(w)),
            Err(Error::NonPositiveJacobian {
                s_index: 1,
                t_index: 1,
                ..
            })
        ));
    }

    fn arc_metric(kappa: f64, eps: f64, n_s: usize, n_t: usize) -> MetricField {
        let geom = StripGeometry::new(
            std::f64::consts::PI,
            CurvatureProfile::Constant(kappa),
            GaussField::Constant(0.0),
            eps,
        )
        .unwrap();
        solve_jacobi(&geom, n_s, n_t).unwrap()
    }

    #[test]
    fn mass_of_constant_integrates_jacobian() {
        let metric = arc_metric(1.0, 0.1, 64, 9);
        let forms = assemble_eps(&metric).unwrap();
        let ones = vec![1.0; forms.grid().len()];
        let area = forms.mass().bilinear(&ones, &ones);
        assert!((area - 2.0 * std::f64::consts::PI).abs() < 1e-10, "{area}");
    }

    #[test]
    fn unit_weight_matches_flat_assembly() {
        let metric = arc_metric(0.0, 0.1, 17, 9);
        let curved = assemble_eps(&metric).unwrap();
        let flat = assemble_flat(metric.grid(), 0.1).unwrap();
        assert!(flat.is_flat());
        assert_eq!(curved.stiffness(), flat.stiffness());
        assert_eq!(curved.mass(), flat.mass());
    }

    #[test]
    fn forms_are_symmetric_and_banded() {
        let metric = arc_metric(1.0, 0.2, 33, 9);
        let forms = assemble_eps(&metric).unwrap();
        for mat in [forms.stiffness(), forms.mass()] {
            assert_eq!(mat.max_asymmetry(), 0.0);
            assert!(mat.bandwidth() <= forms.grid().bandwidth());
        }
        let ones = vec![1.0; forms.grid().len()];
        let r = forms.stiffness().mul_vec(&ones);
        assert!(r
            .iter()
            .all(|v| v.abs() < 1e-10 * forms.stiffness().max_abs()));
    }

    #[test]
    fn entries_depend_continuously_on_weight() {
        let grid = GridSpec::new(1.0, 9, 5).unwrap();
        let base = grid.sample(|s, t| 1.0 + 0.3 * s * t);
        let delta = 1e-6;
        let bumped: Vec<f64> = base.iter().map(|w| w + delta).collect();
        let a = assemble(grid, 0.1, Some(base.clone())).unwrap();
        let b = assemble(grid, 0.1, Some(bumped)).unwrap();
        let min_f = base.iter().cloned().fold(f64::INFINITY, f64::min);
        let bound = 2.0 * delta * a.stiffness().max_abs() / (min_f * min_f);
        let diff = CsrMatrix::linear_combination(a.stiffness(), 1.0, b.stiffness(), -1.0).unwrap();
        assert!(diff.max_abs() > 0.0 && diff.max_abs() <= bound);
        let diff = CsrMatrix::linear_combination(a.mass(), 1.0, b.mass(), -1.0).unwrap();
        assert!(diff.max_abs() <= 2.0 * delta * a.mass().max_abs() / min_f);
    }

    #[test]
    fn rayleigh_quotient_of_flat_mode() {
        let eps = 0.05;
        let metric = arc_metric(1.0, eps, 129, 9);
        let forms = assemble_eps(&metric).unwrap();
        let psi = sample_psi0(2, forms.grid()).unwrap();
        let q = forms.stiffness().bilinear(&psi, &psi) / forms.mass().bilinear(&psi, &psi);
        let h = forms.grid().h_s();
        assert!((q - 1.0).abs() <= 10.0 * (eps + h * h), "{q}");
    }
}
