//! Smallest eigenpairs of `A v = lambda M v` and the resolvent-difference norm.
//!
//! The eigensolver runs Lanczos on the shift-inverted operator
//! `(A - sigma M)^{-1} M`, which is self-adjoint in the `M` inner product.
//! Every new direction is orthogonalized twice against the whole basis, and
//! the projected matrix is built from those coefficients, so the Rayleigh-Ritz
//! step stays valid after a restart with a fresh random direction. One such
//! restart is always made after the first convergence, to pick up copies of
//! multiple eigenvalues that a single Krylov sequence cannot see.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MetricField;
use crate::operator::DiscreteForms;
use crate::sparse::{BandCholesky, CsrMatrix};

pub const MAX_COUNT: usize = 12;

/// Relative eigenvalue gap below which two neighbours are flagged degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub shift: f64,
    /// cap on the Krylov basis size
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            shift: -1.0,
            max_iter: 500,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// nodal values, normalized so that `v^T M v = 1`
    pub vector: Vec<f64>,
    /// `|A v - lambda M v| / |M v|`
    pub residual: f64,
    /// a neighbour lies within relative distance 1e-8
    pub degenerate: bool,
}

pub fn solve_smallest(forms: &DiscreteForms, count: usize, tol: f64) -> Result<Vec<EigenPair>> {
    solve_smallest_with(
        forms,
        count,
        &SolverOptions {
            tol,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_smallest_with(
    forms: &DiscreteForms,
    count: usize,
    opts: &SolverOptions,
) -> Result<Vec<EigenPair>> {
    solve_pencil(forms.stiffness(), forms.mass(), count, opts)
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

struct Ritz {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
}

/// Smallest `count` eigenpairs of the pencil `(a, m)`, `m` positive definite.
pub fn solve_pencil(
    a: &CsrMatrix,
    m: &CsrMatrix,
    count: usize,
    opts: &SolverOptions,
) -> Result<Vec<EigenPair>> {
    let n = a.n();
    if m.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "stiffness {n} vs mass {}",
            m.n()
        )));
    }
    if count == 0 || count > MAX_COUNT {
        return Err(Error::PreconditionViolated(format!(
            "count must be in 1..={MAX_COUNT}, got {count}"
        )));
    }
    if count > n {
        return Err(Error::PreconditionViolated(format!(
            "count {count} exceeds problem size {n}"
        )));
    }
    if !(1e-12..=1e-6).contains(&opts.tol) {
        return Err(Error::PreconditionViolated(format!(
            "tolerance must be in [1e-12, 1e-6], got {:e}",
            opts.tol
        )));
    }
    let shifted = CsrMatrix::linear_combination(a, 1.0, m, -opts.shift)?;
    let chol = BandCholesky::factor(&shifted)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let max_dim = opts.max_iter.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut m_basis: Vec<Vec<f64>> = Vec::new();
    let mut proj = vec![vec![0.0; max_dim]; max_dim];

    let mut next = random_vector(&mut rng, n);
    let mut injected = false;
    let mut hold_until = 0usize;
    let mut best_residual = f64::INFINITY;
    let extra_steps = 2 * count + 10;

    while basis.len() < max_dim {
        // M-orthonormalize the candidate against the basis; replace if it collapses
        let mut candidate = next;
        let mut tries = 0;
        let m_candidate = loop {
            let scale = mnorm(m, &candidate);
            for _ in 0..2 {
                for (q, mq) in basis.iter().zip(&m_basis) {
                    let c = dot(mq, &candidate);
                    axpy(-c, q, &mut candidate);
                }
            }
            let mc = m.mul_vec(&candidate);
            let nrm = dot(&candidate, &mc).max(0.0).sqrt();
            if nrm > 1e-10 * scale && nrm > 0.0 {
                candidate.iter_mut().for_each(|v| *v /= nrm);
                break mc.into_iter().map(|v| v / nrm).collect::<Vec<f64>>();
            }
            tries += 1;
            if tries > 5 {
                // basis spans everything reachable
                break Vec::new();
            }
            candidate = random_vector(&mut rng, n);
        };
        if m_candidate.is_empty() {
            break;
        }
        basis.push(candidate);
        m_basis.push(m_candidate);
        let k = basis.len() - 1;

        // w = Op q_k and its projections onto the basis
        let mut w = chol.solve(&m_basis[k]);
        let mut coeffs = vec![0.0; k + 1];
        for _ in 0..2 {
            for (j, (q, mq)) in basis.iter().zip(&m_basis).enumerate() {
                let c = dot(mq, &w);
                coeffs[j] += c;
                axpy(-c, q, &mut w);
            }
        }
        for (j, c) in coeffs.into_iter().enumerate() {
            proj[j][k] = c;
            proj[k][j] = c;
        }
        next = w;

        let dim = k + 1;
        let due = dim >= count
            && (dim.is_multiple_of(5) || dim == max_dim || dim == n)
            && dim >= hold_until;
        if !due {
            continue;
        }
        let ritz = rayleigh_ritz(a, m, &basis, &proj, count, opts.shift);
        let worst = ritz.residuals.iter().copied().fold(0.0f64, f64::max);
        best_residual = best_residual.min(worst);
        let converged = ritz.values.len() == count && worst <= opts.tol;
        if converged && (injected || dim == n) {
            return Ok(finish(ritz));
        }
        if converged {
            // probe the complement of the Krylov space for hidden multiplicity
            injected = true;
            hold_until = dim + extra_steps;
            next = random_vector(&mut rng, n);
        }
    }

    // basis exhausted: accept if the problem was fully spanned and converged
    let ritz = rayleigh_ritz(a, m, &basis, &proj, count, opts.shift);
    let worst = ritz.residuals.iter().copied().fold(0.0f64, f64::max);
    if ritz.values.len() == count && (worst <= opts.tol || basis.len() == n) {
        return Ok(finish(ritz));
    }
    Err(Error::NoConvergence {
        iterations: basis.len(),
        residual: best_residual.min(worst),
    })
}

fn mnorm(m: &CsrMatrix, x: &[f64]) -> f64 {
    m.bilinear(x, x).max(0.0).sqrt()
}

fn rayleigh_ritz(
    a: &CsrMatrix,
    m: &CsrMatrix,
    basis: &[Vec<f64>],
    proj: &[Vec<f64>],
    count: usize,
    shift: f64,
) -> Ritz {
    let dim = basis.len();
    let h = DMatrix::from_fn(dim, dim, |r, c| 0.5 * (proj[r][c] + proj[c][r]));
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > 0.0).collect();
    // largest theta <=> smallest lambda
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    order.truncate(count);

    let n = a.n();
    let mut values = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for idx in order {
        let theta = eig.eigenvalues[idx];
        let lambda = shift + 1.0 / theta;
        let mut y = vec![0.0; n];
        for (j, q) in basis.iter().enumerate() {
            axpy(eig.eigenvectors[(j, idx)], q, &mut y);
        }
        let my = m.mul_vec(&y);
        let nrm = dot(&y, &my).max(0.0).sqrt();
        y.iter_mut().for_each(|v| *v /= nrm);
        let my: Vec<f64> = my.into_iter().map(|v| v / nrm).collect();
        let mut r = a.mul_vec(&y);
        axpy(-lambda, &my, &mut r);
        residuals.push(norm2(&r) / norm2(&my));
        values.push(lambda);
        vectors.push(y);
    }
    Ritz {
        values,
        vectors,
        residuals,
    }
}

fn finish(ritz: Ritz) -> Vec<EigenPair> {
    let mut pairs: Vec<EigenPair> = ritz
        .values
        .into_iter()
        .zip(ritz.vectors)
        .zip(ritz.residuals)
        .map(|((value, vector), residual)| EigenPair {
            value,
            vector,
            residual,
            degenerate: false,
        })
        .collect();
    pairs.sort_by(|x, y| x.value.total_cmp(&y.value));
    for i in 1..pairs.len() {
        let (lo, hi) = (pairs[i - 1].value, pairs[i].value);
        let scale = lo.abs().max(hi.abs());
        if (hi - lo).abs() <= DEGENERACY_GAP * scale {
            pairs[i - 1].degenerate = true;
            pairs[i].degenerate = true;
        }
    }
    pairs
}

/// Flip the vector's sign if its `mass` inner product with `reference` is negative.
pub fn align_sign(pair: &EigenPair, reference: &[f64], mass: &CsrMatrix) -> Result<EigenPair> {
    if reference.len() != pair.vector.len() || mass.n() != reference.len() {
        return Err(Error::DimensionMismatch(
            "reference, vector and mass must agree".into(),
        ));
    }
    if reference.iter().all(|v| *v == 0.0) {
        return Err(Error::PreconditionViolated(
            "reference vector is zero".into(),
        ));
    }
    let overlap = mass.bilinear(&pair.vector, reference);
    if overlap.abs() < 1e-8 {
        return Err(Error::DegenerateAlignment { overlap });
    }
    let mut out = pair.clone();
    if overlap < 0.0 {
        out.vector.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(out)
}

/// The operator `D = U R_eps U^{-1} - R_0` on nodal values, with
/// `R = (A + M)^{-1} M` and `U` multiplication by `f^{1/2}`.
pub struct ResolventDifference {
    curved: BandCholesky,
    flat: BandCholesky,
    flat_mass: BandCholesky,
    mass_eps: CsrMatrix,
    mass_flat: CsrMatrix,
    sqrt_f: Vec<f64>,
}

impl ResolventDifference {
    pub fn new(
        forms_eps: &DiscreteForms,
        forms_flat: &DiscreteForms,
        metric: &MetricField,
    ) -> Result<Self> {
        if forms_eps.grid() != forms_flat.grid() || metric.grid() != forms_eps.grid() {
            return Err(Error::DimensionMismatch(
                "forms and metric must share one grid".into(),
            ));
        }
        if (forms_eps.epsilon() - forms_flat.epsilon()).abs() > 1e-15 * forms_eps.epsilon()
            || (metric.epsilon() - forms_eps.epsilon()).abs() > 1e-15 * forms_eps.epsilon()
        {
            return Err(Error::PreconditionViolated(
                "forms and metric must share one half-width".into(),
            ));
        }
        let sum =
            |f: &DiscreteForms| CsrMatrix::linear_combination(f.stiffness(), 1.0, f.mass(), 1.0);
        Ok(ResolventDifference {
            curved: BandCholesky::factor(&sum(forms_eps)?)?,
            flat: BandCholesky::factor(&sum(forms_flat)?)?,
            flat_mass: BandCholesky::factor(forms_flat.mass())?,
            mass_eps: forms_eps.mass().clone(),
            mass_flat: forms_flat.mass().clone(),
            sqrt_f: metric.f().iter().map(|v| v.sqrt()).collect(),
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = x.iter().zip(&self.sqrt_f).map(|(v, s)| v / s).collect();
        let mut curved = self.curved.solve(&self.mass_eps.mul_vec(&scaled));
        curved
            .iter_mut()
            .zip(&self.sqrt_f)
            .for_each(|(v, s)| *v *= s);
        let flat = self.flat.solve(&self.mass_flat.mul_vec(x));
        curved.iter().zip(&flat).map(|(c, f)| c - f).collect()
    }

    /// Adjoint of [`apply`](Self::apply) in the flat-mass inner product.
    pub fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let z = self.mass_flat.mul_vec(y);
        let scaled: Vec<f64> = z.iter().zip(&self.sqrt_f).map(|(v, s)| v * s).collect();
        let mut curved = self.mass_eps.mul_vec(&self.curved.solve(&scaled));
        curved
            .iter_mut()
            .zip(&self.sqrt_f)
            .for_each(|(v, s)| *v /= s);
        let flat = self.mass_flat.mul_vec(&self.flat.solve(&z));
        let transposed: Vec<f64> = curved.iter().zip(&flat).map(|(c, f)| c - f).collect();
        self.flat_mass.solve(&transposed)
    }

    /// Norm in discrete `L^2` of the rectangle.
    pub fn norm(&self, x: &[f64]) -> f64 {
        mnorm(&self.mass_flat, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventEstimate {
    pub norm_estimate: f64,
    pub iterations: usize,
    /// relative change of the last Rayleigh quotient
    pub tolerance_achieved: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            max_iter: 5000,
            seed: 42,
        }
    }
}

pub fn resolvent_gap(
    forms_eps: &DiscreteForms,
    forms_flat: &DiscreteForms,
    metric: &MetricField,
    tol: f64,
) -> Result<ResolventEstimate> {
    resolvent_gap_with(forms_eps, forms_flat, metric, tol, &PowerOptions::default())
}

/// Power iteration on `D* D`; the estimate `|D w|` for the current unit `w`
/// grows monotonically towards `|D|`.
pub fn resolvent_gap_with(
    forms_eps: &DiscreteForms,
    forms_flat: &DiscreteForms,
    metric: &MetricField,
    tol: f64,
    opts: &PowerOptions,
) -> Result<ResolventEstimate> {
    let op = ResolventDifference::new(forms_eps, forms_flat, metric)?;
    power_norm(&op, tol, opts)
}

pub fn power_norm(
    op: &ResolventDifference,
    tol: f64,
    opts: &PowerOptions,
) -> Result<ResolventEstimate> {
    let n = op.sqrt_f.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut w = random_vector(&mut rng, n);
    let nrm = op.norm(&w);
    w.iter_mut().for_each(|v| *v /= nrm);

    let mut previous = 0.0;
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let dw = op.apply(&w);
        let rho = op.norm(&dw).powi(2);
        if rho == 0.0 {
            return Ok(ResolventEstimate {
                norm_estimate: 0.0,
                iterations: it,
                tolerance_achieved: 0.0,
            });
        }
        change = (rho - previous).abs() / rho;
        if change < tol {
            return Ok(ResolventEstimate {
                norm_estimate: rho.sqrt(),
                iterations: it,
                tolerance_achieved: change,
            });
        }
        previous = rho;
        w = op.apply_adjoint(&dw);
        let nrm = op.norm(&w);
        w.iter_mut().for_each(|v| *v /= nrm);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{solve_jacobi, CurvatureProfile, GaussField, StripGeometry};
    use crate::grid::GridSpec;
    use crate::operator::{assemble_eps, assemble_flat, sample_psi0};
    use nalgebra::{DMatrix, SymmetricEigen};
    use std::f64::consts::PI;

    fn arc(
        kappa: f64,
        eps: f64,
        n_s: usize,
        n_t: usize,
    ) -> (MetricField, DiscreteForms, DiscreteForms) {
        let geom = StripGeometry::new(
            PI,
            CurvatureProfile::Constant(kappa),
            GaussField::Constant(0.0),
            eps,
        )
        .unwrap();
        let metric = solve_jacobi(&geom, n_s, n_t).unwrap();
        let curved = assemble_eps(&metric).unwrap();
        let flat = assemble_flat(metric.grid(), eps).unwrap();
        (metric, curved, flat)
    }

    /// Generalized eigenvalues via Cholesky of the dense mass matrix.
    fn dense_eigenvalues(a: &CsrMatrix, m: &CsrMatrix) -> Vec<f64> {
        let a: DMatrix<f64> = a.to_dense();
        let l = m.to_dense().cholesky().unwrap().l();
        let l_inv = l.clone().try_inverse().unwrap();
        let c = &l_inv * a * l_inv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let mut values: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }

    /// Eigenvalues of the 1D bilinear Neumann stencil on `nodes` points.
    fn stencil_eigenvalues(nodes: usize, h: f64) -> Vec<f64> {
        (0..nodes)
            .map(|k| {
                let theta = PI * k as f64 / (nodes - 1) as f64;
                6.0 / (h * h) * (1.0 - theta.cos()) / (2.0 + theta.cos())
            })
            .collect()
    }

    #[test]
    fn matches_dense_oracle() {
        let (_, forms, _) = arc(0.5, 0.05, 48, 5);
        let dense = dense_eigenvalues(forms.stiffness(), forms.mass());
        let pairs = solve_smallest(&forms, 4, 1e-10).unwrap();
        for (pair, exact) in pairs.iter().zip(&dense) {
            assert!(
                (pair.value - exact).abs() <= 1e-8 * exact.max(1.0),
                "{} vs {exact}",
                pair.value
            );
            assert!(pair.residual <= 1e-10);
        }
        assert!((pairs[1].value - 1.0).abs() <= 0.5 * 0.05 + 1e-2);
    }

    #[test]
    fn matches_discrete_tensor_spectrum() {
        let eps = 0.5;
        let grid = GridSpec::new(PI, 33, 5).unwrap();
        let forms = assemble_flat(&grid, eps).unwrap();
        let mut exact = Vec::new();
        for mu_s in stencil_eigenvalues(grid.n_s(), grid.h_s()) {
            for mu_t in stencil_eigenvalues(grid.n_t(), grid.h_t()) {
                exact.push(mu_s + mu_t / (eps * eps));
            }
        }
        exact.sort_by(f64::total_cmp);
        let pairs = solve_smallest(&forms, 8, 1e-10).unwrap();
        for (pair, mu) in pairs.iter().zip(&exact) {
            assert!(
                (pair.value - mu).abs() <= 1e-9 * mu.max(1.0),
                "{} vs {mu}",
                pair.value
            );
        }
    }

    #[test]
    fn flat_spectrum_of_unit_interval_modes() {
        let grid = GridSpec::new(PI, 128, 9).unwrap();
        let forms = assemble_flat(&grid, 0.1).unwrap();
        let pairs = solve_smallest(&forms, 3, 1e-10).unwrap();
        assert!(pairs[0].value.abs() < 1e-10);
        let h2 = grid.h_s().powi(2);
        assert!((pairs[1].value - 1.0).abs() < h2);
        assert!((pairs[2].value - 4.0).abs() < 16.0 * h2);
    }

    #[test]
    fn basis_is_mass_orthonormal() {
        let tol = 1e-9;
        let (_, forms, _) = arc(1.0, 0.1, 65, 9);
        let pairs = solve_smallest(&forms, 6, tol).unwrap();
        assert!(pairs.windows(2).all(|w| w[0].value <= w[1].value));
        for (i, p) in pairs.iter().enumerate() {
            assert!(p.residual <= tol);
            for (j, q) in pairs.iter().enumerate() {
                let ip = forms.mass().bilinear(&p.vector, &q.vector);
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((ip - target).abs() <= 10.0 * tol, "({i},{j}) {ip}");
            }
        }
    }

    #[test]
    fn shift_does_not_change_values() {
        let (_, forms, _) = arc(1.0, 0.1, 65, 9);
        let base = solve_smallest(&forms, 4, 1e-11).unwrap();
        let opts = SolverOptions {
            tol: 1e-11,
            shift: -0.5,
            ..SolverOptions::default()
        };
        let shifted = solve_smallest_with(&forms, 4, &opts).unwrap();
        for (a, b) in base.iter().zip(&shifted) {
            assert!((a.value - b.value).abs() <= 1e-10);
        }
    }

    #[test]
    fn ground_state_is_constant() {
        let (_, forms, _) = arc(1.0, 0.1, 33, 9);
        let pair = &solve_smallest(&forms, 1, 1e-10).unwrap()[0];
        assert!(pair.value.abs() < 1e-9);
        let first = pair.vector[0];
        assert!(pair
            .vector
            .iter()
            .all(|v| (v - first).abs() < 1e-8 * first.abs()));
    }

    #[test]
    fn square_cells_give_flagged_multiplicity() {
        // L = 2, eps = 1: the stencil is symmetric under s <-> t
        let grid = GridSpec::new(2.0, 9, 9).unwrap();
        let forms = assemble_flat(&grid, 1.0).unwrap();
        let pairs = solve_smallest(&forms, 4, 1e-10).unwrap();
        assert!((pairs[1].value - pairs[2].value).abs() < 1e-9 * pairs[1].value);
        assert!(pairs[1].degenerate && pairs[2].degenerate);
        assert!(!pairs[0].degenerate);
        assert!(!pairs[3].degenerate);
        let ip = forms.mass().bilinear(&pairs[1].vector, &pairs[2].vector);
        assert!(ip.abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_requests() {
        let (_, forms, _) = arc(0.0, 0.1, 9, 3);
        assert!(solve_smallest(&forms, 0, 1e-9).is_err());
        assert!(solve_smallest(&forms, MAX_COUNT + 1, 1e-9).is_err());
        assert!(solve_smallest(&forms, 2, 1e-3).is_err());
        assert!(solve_smallest(&forms, 2, 1e-14).is_err());
    }

    #[test]
    fn sign_alignment() {
        let (_, forms, flat) = arc(1.0, 0.05, 129, 9);
        let pairs = solve_smallest(&forms, 2, 1e-10).unwrap();
        let reference = sample_psi0(2, forms.grid()).unwrap();
        let aligned = align_sign(&pairs[1], &reference, forms.mass()).unwrap();
        assert!(forms.mass().bilinear(&aligned.vector, &reference) > 0.9);
        assert_eq!(
            align_sign(&aligned, &reference, forms.mass()).unwrap(),
            aligned
        );

        let mut flipped = aligned.clone();
        flipped.vector.iter_mut().for_each(|v| *v = -*v);
        assert_eq!(
            align_sign(&flipped, &reference, forms.mass()).unwrap(),
            aligned
        );

        // the constant mode is orthogonal to psi_2
        let constant = &solve_smallest(&flat, 1, 1e-10).unwrap()[0];
        assert!(matches!(
            align_sign(constant, &reference, flat.mass()),
            Err(Error::DegenerateAlignment { .. })
        ));
    }

    #[test]
    fn resolvent_gap_vanishes_on_flat_metric() {
        let (metric, forms, flat) = arc(0.0, 0.1, 33, 9);
        let est = resolvent_gap(&forms, &flat, &metric, 1e-8).unwrap();
        assert!(est.norm_estimate <= 1e-12);
    }

    #[test]
    fn power_estimate_bounds_random_directions() {
        let (metric, forms, flat) = arc(1.0, 0.1, 65, 9);
        let op = ResolventDifference::new(&forms, &flat, &metric).unwrap();
        let est = power_norm(&op, 1e-8, &PowerOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let w = random_vector(&mut rng, metric.grid().len());
            let ratio = op.norm(&op.apply(&w)) / op.norm(&w);
            assert!(ratio <= est.norm_estimate * (1.0 + 1e-6));
        }
        let other = power_norm(
            &op,
            1e-8,
            &PowerOptions {
                seed: 1234,
                ..PowerOptions::default()
            },
        )
        .unwrap();
        assert!((other.norm_estimate - est.norm_estimate).abs() <= 0.01 * est.norm_estimate);
    }

    #[test]
    fn adjoint_is_consistent() {
        let (metric, forms, flat) = arc(1.0, 0.2, 17, 5);
        let op = ResolventDifference::new(&forms, &flat, &metric).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_vector(&mut rng, metric.grid().len());
        let y = random_vector(&mut rng, metric.grid().len());
        let lhs = flat.mass().bilinear(&op.apply(&x), &y);
        let rhs = flat.mass().bilinear(&x, &op.apply_adjoint(&y));
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn estimate_bounds_eigenvalue_shift() {
        let tol = 1e-8;
        let (metric, forms, flat) = arc(1.0, 0.1, 129, 9);
        let est = resolvent_gap(&forms, &flat, &metric, tol).unwrap();
        let curved = solve_smallest(&forms, 2, 1e-10).unwrap();
        let reference = solve_smallest(&flat, 2, 1e-10).unwrap();
        let gap = (1.0 / (curved[1].value + 1.0) - 1.0 / (reference[1].value + 1.0)).abs();
        assert!(
            gap <= est.norm_estimate + 10.0 * tol,
            "{gap} vs {}",
            est.norm_estimate
        );
    }
}
