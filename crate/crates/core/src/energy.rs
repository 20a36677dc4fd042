//! Renormalized Dirichlet energy on `V_m` and the quantities built from it.
//!
//! `W_m(u) = ((N+2)/N)^m Σ_{x~y} (u(x) - u(y))^2`, summed once per edge of
//! `V_m`. The factor makes `W_m` invariant under harmonic extension, so a
//! level-`m` field and its energy-minimizing extension to `V_*` share the
//! same energy.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gasket::{refine, LevelGraph, Point};
use crate::measure::QuadratureWeights;

/// Real values on the vertices of a [`LevelGraph`], in vertex order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Field {
    values: Vec<f64>,
    dirichlet: bool,
}

impl Field {
    /// A field with no boundary condition attached.
    pub fn new(g: &LevelGraph, values: Vec<f64>) -> Result<Field> {
        check_len(g, values.len())?;
        Ok(Field {
            values,
            dirichlet: false,
        })
    }

    /// A field in `C_0`: values must be exactly zero on `V_0`.
    pub fn dirichlet(g: &LevelGraph, values: Vec<f64>) -> Result<Field> {
        check_len(g, values.len())?;
        if let Some(&b) = g.boundary().iter().find(|&&b| values[b] != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet field is {} at boundary vertex {b}",
                values[b]
            )));
        }
        Ok(Field {
            values,
            dirichlet: true,
        })
    }

    pub fn zeros(g: &LevelGraph) -> Field {
        Field {
            values: vec![0.0; g.num_vertices()],
            dirichlet: true,
        }
    }

    /// Samples `f` at Cartesian vertex coordinates.
    pub fn from_fn(g: &LevelGraph, f: impl Fn(&[f64]) -> f64) -> Field {
        let values = g.euclidean_coords().iter().map(|x| f(x)).collect();
        Field {
            values,
            dirichlet: false,
        }
    }

    /// Zeroes the boundary and marks the field Dirichlet.
    pub fn into_dirichlet(mut self, g: &LevelGraph) -> Field {
        for &b in g.boundary() {
            self.values[b] = 0.0;
        }
        self.dirichlet = true;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_dirichlet(&self) -> bool {
        self.dirichlet
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn check_len(g: &LevelGraph, got: usize) -> Result<()> {
    if got != g.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: g.num_vertices(),
            got,
        });
    }
    Ok(())
}

/// The level-`m` form `W_m` with its stiffness matrix
/// `K[x][x] = deg(x)·c`, `K[x][y] = -c` on edges, `c = ((N+2)/N)^m`.
#[derive(Clone, Debug)]
pub struct EnergyForm {
    graph: Arc<LevelGraph>,
    factor: f64,
    stiffness: CsrMatrix<f64>,
}

impl EnergyForm {
    pub fn new(graph: Arc<LevelGraph>) -> Self {
        Self::with_factor_scale(graph, 1.0)
    }

    /// Uses `(scale·(N+2)/N)^m` as renormalization. Only meaningful for
    /// fault injection; `scale = 1` is the correct form.
    pub fn with_factor_scale(graph: Arc<LevelGraph>, scale: f64) -> Self {
        let n = graph.n() as f64;
        let factor = (scale * (n + 2.0) / n).powi(graph.level() as i32);
        let nv = graph.num_vertices();
        let mut coo = CooMatrix::new(nv, nv);
        for v in 0..nv {
            coo.push(v, v, graph.degree(v) as f64 * factor);
        }
        for &[a, b] in graph.edges() {
            coo.push(a, b, -factor);
            coo.push(b, a, -factor);
        }
        EnergyForm {
            stiffness: CsrMatrix::from(&coo),
            graph,
            factor,
        }
    }

    pub fn graph(&self) -> &LevelGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<LevelGraph> {
        &self.graph
    }

    /// `((N+2)/N)^m`.
    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }

    /// `K u`, accumulated edge by edge in sorted edge order.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for &[a, b] in self.graph.edges() {
            let d = self.factor * (u[a] - u[b]);
            out[a] += d;
            out[b] -= d;
        }
        out
    }

    /// `W_m(u)` on raw values; the length must match the graph.
    pub fn energy_values(&self, u: &[f64]) -> f64 {
        self.factor
            * self
                .graph
                .edges()
                .iter()
                .map(|&[a, b]| (u[a] - u[b]).powi(2))
                .sum::<f64>()
    }

    pub fn inner_values(&self, u: &[f64], v: &[f64]) -> f64 {
        self.factor
            * self
                .graph
                .edges()
                .iter()
                .map(|&[a, b]| (u[a] - u[b]) * (v[a] - v[b]))
                .sum::<f64>()
    }

    /// `W_m(u)`.
    pub fn energy(&self, u: &Field) -> Result<f64> {
        check_len(&self.graph, u.len())?;
        Ok(self.energy_values(u.values()))
    }

    /// `𝒲_m(u, v)`.
    pub fn inner(&self, u: &Field, v: &Field) -> Result<f64> {
        check_len(&self.graph, u.len())?;
        check_len(&self.graph, v.len())?;
        Ok(self.inner_values(u.values(), v.values()))
    }

    /// `‖u‖ = √W_m(u)`.
    pub fn norm(&self, u: &Field) -> Result<f64> {
        self.energy(u).map(f64::sqrt)
    }

    /// Upper-triangle-inclusive `(row, col, value)` triplets of `K`, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.stiffness
            .triplet_iter()
            .map(|(r, c, v)| (r, c, *v))
            .collect()
    }

    /// Writes `K` as one `row col value` line per stored entry.
    pub fn write_triplets(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "% {} {} {}",
            self.stiffness.nrows(),
            self.stiffness.ncols(),
            self.stiffness.nnz()
        )?;
        for (r, c, v) in self.triplets() {
            writeln!(out, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }
}

/// `(H_m u)(x) = Σ_{y~x} (u(y) - u(x))`.
pub fn graph_laplacian(g: &LevelGraph, u: &[f64], x: usize) -> f64 {
    g.neighbors(x).iter().map(|&y| u[y] - u[x]).sum()
}

/// `(N+2)^m (H_m u)(x)`, the pointwise standard-Laplacian approximation.
pub fn standard_laplacian(g: &LevelGraph, u: &[f64], x: usize) -> f64 {
    (g.n() as f64 + 2.0).powi(g.level() as i32) * graph_laplacian(g, u, x)
}

/// `-(K u)(x) / w_x`, the discrete Laplacian dual to `W_m` against the
/// vertex quadrature. At a junction vertex this is `(N/2)(N+2)^m H_m u`.
pub fn weak_laplacian(form: &EnergyForm, w: &QuadratureWeights, u: &[f64], x: usize) -> f64 {
    form.factor() * graph_laplacian(form.graph(), u, x) / w.get(x)
}

/// Harmonic-extension coefficients for one cell: row `k` gives the value at
/// the `k`-th edge midpoint (pairs `(i, j)`, `i < j`, lexicographic) as a
/// combination of the `N` corner values.
#[derive(Clone, Debug)]
pub struct ExtensionStencil {
    pairs: Vec<(usize, usize)>,
    coeffs: DMatrix<f64>,
}

impl ExtensionStencil {
    pub fn new(n: usize) -> Self {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let p = pairs.len();
        let pos = |i: usize, j: usize| {
            let (i, j) = (i.min(j), i.max(j));
            pairs.iter().position(|&q| q == (i, j)).unwrap()
        };
        // Each midpoint m_ij has neighbours p_i, p_j and m_il, m_jl (l ≠ i, j).
        let mut a = DMatrix::zeros(p, p);
        let mut b = DMatrix::zeros(p, n);
        for (k, &(i, j)) in pairs.iter().enumerate() {
            a[(k, k)] = (2 * n - 2) as f64;
            b[(k, i)] = 1.0;
            b[(k, j)] = 1.0;
            for l in (0..n).filter(|&l| l != i && l != j) {
                a[(k, pos(i, l))] -= 1.0;
                a[(k, pos(j, l))] -= 1.0;
            }
        }
        let coeffs = a
            .lu()
            .solve(&b)
            .expect("local extension system is nonsingular");
        ExtensionStencil { pairs, coeffs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Midpoint values for given corner values.
    pub fn apply(&self, corners: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(corners);
        (&self.coeffs * c).iter().copied().collect()
    }
}

/// Extends `u` from `coarse` to `fine = refine(coarse)` (with `map` the
/// coarse-to-fine index map), minimizing `W_{m+1}` cell by cell.
pub fn harmonic_extension_onto(
    coarse: &LevelGraph,
    fine: &LevelGraph,
    map: &[usize],
    u: &Field,
) -> Result<Field> {
    check_len(coarse, u.len())?;
    check_len(coarse, map.len())?;
    if fine.level() != coarse.level() + 1 {
        return Err(Error::InvalidParameter(format!(
            "extension target is level {}, expected {}",
            fine.level(),
            coarse.level() + 1
        )));
    }
    let stencil = ExtensionStencil::new(coarse.n());
    let mut values = vec![0.0; fine.num_vertices()];
    for (old, &new) in map.iter().enumerate() {
        values[new] = u.values()[old];
    }
    let mut corner_vals = vec![0.0; coarse.n()];
    for (_, members) in coarse.cells() {
        for (c, &v) in corner_vals.iter_mut().zip(members) {
            *c = u.values()[v];
        }
        let mids = stencil.apply(&corner_vals);
        for (&(i, j), val) in stencil.pairs().iter().zip(mids) {
            let p = Point::midpoint(coarse.point(members[i]), coarse.point(members[j]));
            let k = fine
                .index_of(&p)
                .expect("edge midpoints are vertices of the refinement");
            values[k] = val;
        }
    }
    Ok(Field {
        values,
        dirichlet: u.dirichlet,
    })
}

/// Refines the graph and harmonically extends `u` onto it.
pub fn harmonic_extension(coarse: &LevelGraph, u: &Field) -> Result<(LevelGraph, Field)> {
    let (fine, map) = refine(coarse)?;
    let ext = harmonic_extension_onto(coarse, &fine, &map, u)?;
    Ok((fine, ext))
}

/// Hölder exponent `σ = log((N+2)/N) / (2 log 2)`.
pub fn holder_exponent(n: usize) -> f64 {
    let n = n as f64;
    ((n + 2.0) / n).ln() / (2.0 * 2f64.ln())
}

/// The constant `2N + 3` of the Sobolev-type and sup-norm inequalities.
pub fn embedding_constant(n: usize) -> f64 {
    (2 * n + 3) as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderReport {
    pub sigma: f64,
    /// `max_{x≠y} |u(x) - u(y)| / |x - y|^σ` over all vertex pairs.
    pub quotient: f64,
    /// `(2N + 3) √W_m(u)`.
    pub bound: f64,
    pub ok: bool,
    pub sup_norm: f64,
    /// Result of `‖u‖_∞ ≤ (2N+3)‖u‖`; only checked for Dirichlet fields.
    pub sup_ok: Option<bool>,
}

const HOLDER_SLACK: f64 = 1e-10;
const HOLDER_TABLE_LEVEL: u32 = 8;

/// Checks `|u(x) - u(y)| ≤ (2N+3) √W_m(u) |x - y|^σ` over every vertex pair.
///
/// The maximum is exact. Pairs are visited in order of decreasing value gap
/// and abandoned once the gap divided by the smallest possible distance
/// factor cannot beat the running maximum.
pub fn holder_check(form: &EnergyForm, u: &Field) -> Result<HolderReport> {
    let g = form.graph();
    check_len(g, u.len())?;
    let vals = u.values();
    let sigma = holder_exponent(g.n());
    let scale = 4f64.powi(-(g.level() as i32)) / 2.0;
    // |x - y|^σ depends only on the integer gap Σδ² ≤ 2·4^m; tabulate it on
    // fine levels where the pair loop dominates.
    let table: Vec<f64> = if g.level() <= HOLDER_TABLE_LEVEL && vals.len() > 256 {
        let top = 2u64 << (2 * g.level());
        (0..=top).map(|k| (k as f64 * scale).powf(sigma / 2.0)).collect()
    } else {
        Vec::new()
    };
    let dist_pow = |a: usize, b: usize| -> f64 {
        let gap = g.point(a).barycentric_gap(g.point(b));
        match table.get(gap as usize) {
            Some(&p) => p,
            None => (gap as f64 * scale).powf(sigma / 2.0),
        }
    };
    let min_pow = 2f64.powi(-(g.level() as i32)).powf(sigma);

    let mut best = g
        .edges()
        .iter()
        .map(|&[a, b]| (vals[a] - vals[b]).abs() / min_pow)
        .fold(0.0, f64::max);

    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let top = vals[*order.last().unwrap_or(&0)];
    for (i, &lo) in order.iter().enumerate() {
        if top - vals[lo] <= best * min_pow {
            break;
        }
        for &hi in order[i + 1..].iter().rev() {
            let gap = vals[hi] - vals[lo];
            if gap <= best * min_pow {
                break;
            }
            best = best.max(gap / dist_pow(lo, hi));
        }
    }

    let c = embedding_constant(g.n());
    let bound = c * form.energy_values(vals).sqrt();
    let sup_norm = u.sup_norm();
    Ok(HolderReport {
        sigma,
        quotient: best,
        bound,
        ok: best <= bound + HOLDER_SLACK,
        sup_norm,
        sup_ok: u.is_dirichlet().then_some(sup_norm <= bound + HOLDER_SLACK),
    })
}

/// A scalar map with a known Lipschitz constant.
pub trait LipschitzMap {
    fn apply(&self, t: f64) -> f64;
    fn lipschitz(&self) -> f64;
    fn name(&self) -> String;
}

/// The piecewise-linear catalog used by the truncation checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    Identity,
    /// `t ↦ |min{t, 1}|`.
    UnitCap,
    Scale(f64),
    Clamp(f64, f64),
}

impl LipschitzMap for Truncation {
    fn apply(&self, t: f64) -> f64 {
        match *self {
            Truncation::Identity => t,
            Truncation::UnitCap => t.min(1.0).abs(),
            Truncation::Scale(c) => c * t,
            Truncation::Clamp(lo, hi) => t.clamp(lo, hi),
        }
    }

    fn lipschitz(&self) -> f64 {
        match *self {
            Truncation::Scale(c) => c.abs(),
            _ => 1.0,
        }
    }

    fn name(&self) -> String {
        match *self {
            Truncation::Identity => "identity".into(),
            Truncation::UnitCap => "|min{t,1}|".into(),
            Truncation::Scale(c) => format!("{c}t"),
            Truncation::Clamp(lo, hi) => format!("clamp[{lo},{hi}]"),
        }
    }
}

/// A closure with a declared Lipschitz constant.
pub struct FnLipschitz<F> {
    pub f: F,
    pub lipschitz: f64,
}

impl<F: Fn(f64) -> f64> LipschitzMap for FnLipschitz<F> {
    fn apply(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn name(&self) -> String {
        "closure".into()
    }
}

/// Pointwise `h ∘ u`. `W_m(h∘u) ≤ L² W_m(u)` holds edge by edge.
pub fn truncate(u: &Field, h: &dyn LipschitzMap) -> Result<Field> {
    if u.dirichlet && h.apply(0.0) != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{} does not fix 0, so it would break the boundary condition",
            h.name()
        )));
    }
    Ok(Field {
        values: u.values.iter().map(|&t| h.apply(t)).collect(),
        dirichlet: u.dirichlet,
    })
}

/// `‖u‖_* = (W_m(u) - Σ_x w_x a(x) u(x)^2)^{1/2}`.
///
/// With `check_sign`, any `a(x) > 0` is rejected as a violation of `a ≤ 0`.
pub fn starred_norm(
    form: &EnergyForm,
    w: &QuadratureWeights,
    u: &Field,
    a: &[f64],
    check_sign: bool,
) -> Result<f64> {
    let g = form.graph();
    check_len(g, u.len())?;
    check_len(g, a.len())?;
    if check_sign {
        if let Some(v) = a.iter().position(|&x| x > 0.0) {
            return Err(Error::Hypothesis(
                "h1",
                format!("a = {} > 0 at vertex {v}", a[v]),
            ));
        }
    }
    let mass: f64 = (0..u.len())
        .map(|x| w.get(x) * a[x] * u.values[x] * u.values[x])
        .sum();
    Ok((form.energy(u)? - mass).max(0.0).sqrt())
}
