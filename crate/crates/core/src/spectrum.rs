//! Dirichlet eigenproblems `K u = λ M u` on interior vertices.
//!
//! [`weighted_spectrum`] uses the renormalized stiffness `K` of an
//! [`EnergyForm`] and the mass `M = diag(w_x·(−a(x)))`; with `a ≡ −1` this is
//! the weak Laplacian, whose values converge to the continuum spectrum.
//! [`raw_dirichlet_spectrum`] uses the unscaled graph Laplacian `−H_m`,
//! which is the form in which spectral decimation holds. The two differ by
//! the factor `(N+2)^m · N / multiplicity` at each vertex.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use serde::Serialize;

use crate::energy::{EnergyForm, Field};
use crate::error::{Error, Result};
use crate::gasket::LevelGraph;
use crate::measure::QuadratureWeights;

const SCHEMA: &str = "sierpinski.spectrum/1";
/// Interior unknowns up to which the dense solver is used.
pub const DENSE_LIMIT: usize = 2000;
const MAX_SUBSPACE_ITER: usize = 2000;
/// Eigenvalues of the level-`m+1` raw Laplacian excluded from decimation.
pub const FORBIDDEN: [f64; 3] = [2.0, 5.0, 6.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Stiffness scaled by `((N+2)/N)^m`, mass from the vertex quadrature.
    Renormalized,
    /// Graph Laplacian `−H_m`, identity mass.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    ShiftInvert,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    pub schema: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    pub m: u32,
    pub normalization: Normalization,
    pub method: Method,
    pub eigenvalues: Vec<f64>,
    /// `‖K u − λ M u‖` per pair.
    pub residuals: Vec<f64>,
    /// `M`-orthonormal, zero on `V_0`.
    pub eigenfields: Vec<Field>,
}

struct Pencil {
    interior: Vec<usize>,
    stiffness: CscMatrix<f64>,
    mass: Vec<f64>,
}

fn interior_stiffness(g: &LevelGraph, factor: f64) -> (Vec<usize>, CscMatrix<f64>) {
    let interior = g.interior();
    let mut slot = vec![usize::MAX; g.num_vertices()];
    for (k, &x) in interior.iter().enumerate() {
        slot[x] = k;
    }
    let n = interior.len();
    let mut coo = CooMatrix::new(n, n);
    for (k, &x) in interior.iter().enumerate() {
        coo.push(k, k, g.degree(x) as f64 * factor);
    }
    for &[a, b] in g.edges() {
        if slot[a] != usize::MAX && slot[b] != usize::MAX {
            coo.push(slot[a], slot[b], -factor);
            coo.push(slot[b], slot[a], -factor);
        }
    }
    (interior, CscMatrix::from(&coo))
}

fn csc_mul(a: &CscMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    for (j, col) in a.col_iter().enumerate() {
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            y[i] += v * x[j];
        }
    }
    y
}

impl Pencil {
    fn len(&self) -> usize {
        self.interior.len()
    }

    fn residual(&self, lambda: f64, y: &[f64]) -> f64 {
        let ky = csc_mul(&self.stiffness, y);
        ky.iter()
            .zip(y)
            .zip(&self.mass)
            .map(|((k, v), m)| (k - lambda * m * v).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Symmetric reduction `M^{−1/2} K M^{−1/2}`, solved densely.
    fn dense(&self, k: usize) -> Vec<(f64, Vec<f64>)> {
        let n = self.len();
        let scale: Vec<f64> = self.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (j, col) in self.stiffness.col_iter().enumerate() {
            for (&i, &v) in col.row_indices().iter().zip(col.values()) {
                a[(i, j)] = v * scale[i] * scale[j];
            }
        }
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        order
            .into_iter()
            .take(k)
            .map(|i| {
                let y: Vec<f64> = eig
                    .eigenvectors
                    .column(i)
                    .iter()
                    .zip(&scale)
                    .map(|(v, s)| v * s)
                    .collect();
                (eig.eigenvalues[i], y)
            })
            .collect()
    }

    /// Subspace iteration with `K^{−1} M` (shift zero, `K` is positive
    /// definite on interior unknowns) and Rayleigh–Ritz on each sweep.
    fn shift_invert(&self, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let n = self.len();
        let chol = CscCholesky::factor(&self.stiffness)
            .map_err(|e| Error::Linalg(format!("stiffness factorization failed: {e}")))?;
        let p = (2 * k + 8).min(n);
        // Deterministic, non-degenerate start block.
        let mut x = DMatrix::<f64>::from_fn(n, p, |i, j| {
            let t = (i + 1) as f64 * (j + 1) as f64;
            (t * 0.618_033_988_749_894_9).fract() - 0.5 + if j == 0 { 1.0 } else { 0.0 }
        });
        let mut pairs = Vec::new();
        for _ in 0..MAX_SUBSPACE_ITER {
            for (i, mut row) in x.row_iter_mut().enumerate() {
                row *= self.mass[i];
            }
            x = chol.solve(&x);
            // Rayleigh–Ritz on span(x)
            let mut kx = DMatrix::<f64>::zeros(n, p);
            for c in 0..p {
                let col: Vec<f64> = x.column(c).iter().copied().collect();
                kx.set_column(c, &DVector::from_vec(csc_mul(&self.stiffness, &col)));
            }
            let mut mx = x.clone();
            for (i, mut row) in mx.row_iter_mut().enumerate() {
                row *= self.mass[i];
            }
            let a_r = x.transpose() * &kx;
            let b_r = x.transpose() * &mx;
            let b_r = (&b_r + b_r.transpose()) * 0.5;
            let chol_b = b_r
                .cholesky()
                .ok_or_else(|| Error::Linalg("subspace lost rank".into()))?;
            let l_inv = chol_b
                .l()
                .try_inverse()
                .ok_or_else(|| Error::Linalg("subspace lost rank".into()))?;
            let c = &l_inv * a_r * l_inv.transpose();
            let c = (&c + c.transpose()) * 0.5;
            let eig = SymmetricEigen::new(c);
            let mut order: Vec<usize> = (0..p).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            let z = l_inv.transpose() * &eig.eigenvectors;
            let mut next = DMatrix::<f64>::zeros(n, p);
            for (c, &i) in order.iter().enumerate() {
                next.set_column(c, &(&x * z.column(i)));
            }
            x = next;
            pairs = (0..k)
                .map(|c| (eig.eigenvalues[order[c]], x.column(c).iter().copied().collect::<Vec<_>>()))
                .collect::<Vec<_>>();
            let done = pairs
                .iter()
                .all(|(l, y)| self.residual(*l, y) <= 1e-11 * l.abs().max(1.0));
            if done {
                return Ok(pairs);
            }
        }
        let worst = pairs
            .iter()
            .map(|(l, y)| self.residual(*l, y))
            .fold(0.0, f64::max);
        Err(Error::NoConvergence(format!(
            "subspace iteration stopped with residual {worst:e}"
        )))
    }

    fn solve(&self, g: &LevelGraph, k: usize, normalization: Normalization) -> Result<SpectrumResult> {
        let n = self.len();
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "requested {k} eigenpairs from {n} interior unknowns"
            )));
        }
        let (method, pairs) = if n <= DENSE_LIMIT {
            (Method::Dense, self.dense(k))
        } else {
            (Method::ShiftInvert, self.shift_invert(k)?)
        };
        let mut eigenvalues = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        let mut eigenfields = Vec::with_capacity(k);
        for (lambda, mut y) in pairs {
            let norm: f64 = y.iter().zip(&self.mass).map(|(v, m)| m * v * v).sum::<f64>().sqrt();
            y.iter_mut().for_each(|v| *v /= norm);
            // fix the sign so the largest entry is positive
            let peak = y.iter().cloned().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            if peak < 0.0 {
                y.iter_mut().for_each(|v| *v = -*v);
            }
            residuals.push(self.residual(lambda, &y));
            eigenvalues.push(lambda);
            let mut full = vec![0.0; g.num_vertices()];
            for (&x, v) in self.interior.iter().zip(&y) {
                full[x] = *v;
            }
            eigenfields.push(Field::dirichlet(g, full)?);
        }
        Ok(SpectrumResult {
            schema: SCHEMA,
            n: g.n(),
            m: g.level(),
            normalization,
            method,
            eigenvalues,
            residuals,
            eigenfields,
        })
    }
}

/// The `k` smallest eigenvalues of `K u = λ M u`, `M = diag(w_x·(−a(x)))`,
/// on interior unknowns. Requires `a < 0` at every interior vertex.
pub fn weighted_spectrum(
    form: &EnergyForm,
    w: &QuadratureWeights,
    a: &[f64],
    k: usize,
) -> Result<SpectrumResult> {
    let g = form.graph();
    if a.len() != g.num_vertices() || w.len() != g.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: g.num_vertices(),
            got: if a.len() != g.num_vertices() { a.len() } else { w.len() },
        });
    }
    let (interior, stiffness) = interior_stiffness(g, form.factor());
    let mut mass = Vec::with_capacity(interior.len());
    for &x in &interior {
        if !(a[x] < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mass is not positive definite: a = {} at interior vertex {x}",
                a[x]
            )));
        }
        mass.push(-w.get(x) * a[x]);
    }
    Pencil {
        interior,
        stiffness,
        mass,
    }
    .solve(g, k, Normalization::Renormalized)
}

/// All Dirichlet eigenvalues of the graph Laplacian `−H_m`, ascending.
pub fn raw_dirichlet_spectrum(g: &LevelGraph) -> Result<Vec<f64>> {
    let (interior, stiffness) = interior_stiffness(g, 1.0);
    if interior.len() > DENSE_LIMIT {
        return Err(Error::ResourceLimit {
            what: "interior unknowns for a full spectrum",
            needed: interior.len() as u128,
            cap: DENSE_LIMIT,
        });
    }
    let n = interior.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let pencil = Pencil {
        interior,
        stiffness,
        mass: vec![1.0; n],
    };
    Ok(pencil.dense(n).into_iter().map(|(l, _)| l).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct DecimationReport {
    pub coarse_level: u32,
    pub fine_level: u32,
    /// Fine eigenvalues (with multiplicity) outside the forbidden set.
    pub checked: usize,
    pub matched: usize,
    pub forbidden: usize,
    pub match_fraction: f64,
    /// Largest distance from `ν(5−ν)` to the nearest coarse eigenvalue.
    pub max_mismatch: f64,
    pub tolerance: f64,
}

impl DecimationReport {
    pub fn passed(&self) -> bool {
        self.matched == self.checked
    }
}

/// For `N = 3`: every raw level-`m+1` eigenvalue `ν ∉ {2, 5, 6}` must have
/// `ν(5−ν)` among the level-`m` eigenvalues, to within `1e−9`.
pub fn decimation_check(coarse: &LevelGraph, fine: &LevelGraph) -> Result<DecimationReport> {
    if coarse.n() != 3 || fine.n() != 3 {
        return Err(Error::InvalidParameter(
            "spectral decimation is implemented for N = 3 only".into(),
        ));
    }
    if fine.level() != coarse.level() + 1 {
        return Err(Error::InvalidParameter(format!(
            "levels {} and {} are not consecutive",
            coarse.level(),
            fine.level()
        )));
    }
    let tolerance = 1e-9;
    let coarse_vals = raw_dirichlet_spectrum(coarse)?;
    let fine_vals = raw_dirichlet_spectrum(fine)?;
    let mut report = DecimationReport {
        coarse_level: coarse.level(),
        fine_level: fine.level(),
        checked: 0,
        matched: 0,
        forbidden: 0,
        match_fraction: 1.0,
        max_mismatch: 0.0,
        tolerance,
    };
    for &nu in &fine_vals {
        if FORBIDDEN.iter().any(|f| (nu - f).abs() < 1e-8) {
            report.forbidden += 1;
            continue;
        }
        report.checked += 1;
        let image = nu * (5.0 - nu);
        let gap = coarse_vals
            .iter()
            .map(|c| (c - image).abs())
            .fold(f64::INFINITY, f64::min);
        report.max_mismatch = report.max_mismatch.max(gap);
        if gap <= tolerance {
            report.matched += 1;
        }
    }
    if report.checked > 0 {
        report.match_fraction = report.matched as f64 / report.checked as f64;
    }
    Ok(report)
}
