//! The energy functional `I_λ = Φ − λΨ` of the Dirichlet problem
//! `Δu + a u = λ g f(u)`, `u|_{V_0} = 0`, and the machinery that minimizes it.
//!
//! With `F(ξ) = ∫_0^ξ f`:
//!
//! ```text
//! Φ(u) = ½ W_m(u) − ½ Σ_x w_x a(x) u(x)²
//! Ψ(u) = − Σ_x w_x g(x) F(u(x))
//! ```
//!
//! and the gradient against the Euclidean pairing on interior vertices is
//! `(K u)(x) − w_x a(x) u(x) + λ w_x g(x) f(u(x))`.

mod golden;
mod minimize;
mod newton;
mod sweep;
mod threshold;

use std::sync::Arc;

use serde::Serialize;

use crate::energy::{standard_laplacian, weak_laplacian, EnergyForm, Field};
use crate::error::{Error, Result};
use crate::exprs::{parse_with, Expr, Nonlinearity, VarScope};
use crate::gasket::{build_gasket, LevelGraph};
use crate::measure::{compensated_sum, vertex_weights, QuadratureWeights};

pub use golden::golden_max;
pub use minimize::{minimize_from, minimize_restricted, SolveOptions, SolveResult, TraceEntry};
pub use newton::{newton_refine, solve, NewtonOptions};
pub use sweep::{sweep, SweepOptions, SweepPoint, SweepResult};
pub use threshold::{
    lambda_star, lambda_star_at, lambda_star_with, max_primitive, radius_for, GammaGrid,
    LambdaStar, LambdaStarRow, ThresholdStatus,
};

/// Data of the problem as given by the user.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub n: usize,
    pub level: u32,
    pub a: Expr,
    pub g: Expr,
    pub f: Expr,
    /// Closed-form `F`; tabulated numerically when absent.
    pub big_f: Option<Expr>,
    pub lambda: f64,
    /// Enforce `a ≤ 0` at every vertex.
    pub assume_h1: bool,
    /// Enforce `g ≤ 0` at every vertex and the support surrogate.
    pub assume_h2: bool,
    /// Half-width of the interval on which a numeric `F` is tabulated.
    pub primitive_range: f64,
}

impl ProblemSpec {
    /// Parses the coefficient expressions with the variables each may use.
    pub fn parse(
        n: usize,
        level: u32,
        a: &str,
        g: &str,
        f: &str,
        big_f: Option<&str>,
        lambda: f64,
    ) -> Result<Self> {
        let coords = VarScope::coordinates(n);
        Ok(ProblemSpec {
            n,
            level,
            a: parse_with(a, coords)?,
            g: parse_with(g, coords)?,
            f: parse_with(f, VarScope::unknown())?,
            big_f: big_f.map(|t| parse_with(t, VarScope::unknown())).transpose()?,
            lambda,
            assume_h1: true,
            assume_h2: true,
            primitive_range: 10.0,
        })
    }

    /// The worked example `Δu + λ e^u = u`: `a = g = −1`, `f = exp`.
    pub fn exponential_example(n: usize, level: u32, lambda: f64) -> Self {
        Self::parse(n, level, "-1", "-1", "exp(u)", None, lambda)
            .expect("built-in expressions parse")
    }
}

/// A [`ProblemSpec`] sampled on `V_m`.
#[derive(Clone, Debug)]
pub struct Problem {
    form: EnergyForm,
    weights: QuadratureWeights,
    a: Vec<f64>,
    g: Vec<f64>,
    nonlin: Arc<Nonlinearity>,
    lambda: f64,
    interior: Vec<usize>,
}

impl Problem {
    pub fn new(spec: &ProblemSpec) -> Result<Problem> {
        if !(spec.lambda >= 0.0 && spec.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "λ must be a finite non-negative number, got {}",
                spec.lambda
            )));
        }
        let graph = Arc::new(build_gasket(spec.n, spec.level)?);
        let coords = graph.euclidean_coords();
        let a = coords
            .iter()
            .map(|x| spec.a.eval_x(x))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let g = coords
            .iter()
            .map(|x| spec.g.eval_x(x))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if spec.assume_h1 {
            check_h1(&a)?;
        }
        if spec.assume_h2 {
            check_h2(&graph, &g)?;
        }
        let nonlin = match &spec.big_f {
            Some(big_f) => Nonlinearity::closed_form(spec.f.clone(), big_f.clone()),
            None => Nonlinearity::tabulated(spec.f.clone(), spec.primitive_range),
        };
        let weights = vertex_weights(&graph);
        Ok(Self::from_parts(
            EnergyForm::new(graph),
            weights,
            a,
            g,
            Arc::new(nonlin),
            spec.lambda,
        ))
    }

    /// Assembles a problem from already-sampled coefficients. No hypothesis
    /// checks are applied.
    pub fn from_parts(
        form: EnergyForm,
        weights: QuadratureWeights,
        a: Vec<f64>,
        g: Vec<f64>,
        nonlin: Arc<Nonlinearity>,
        lambda: f64,
    ) -> Problem {
        let interior = form.graph().interior();
        Problem {
            form,
            weights,
            a,
            g,
            nonlin,
            lambda,
            interior,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Problem {
        Problem {
            lambda,
            ..self.clone()
        }
    }

    pub fn graph(&self) -> &LevelGraph {
        self.form.graph()
    }

    pub fn form(&self) -> &EnergyForm {
        &self.form
    }

    pub fn weights(&self) -> &QuadratureWeights {
        &self.weights
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlin
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> usize {
        self.graph().n()
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// `∫_V g dμ` under the vertex quadrature.
    pub fn integral_g(&self) -> f64 {
        compensated_sum(self.weights.as_slice().iter().zip(&self.g).map(|(w, g)| w * g))
    }

    fn check(&self, u: &Field) -> Result<()> {
        if u.len() != self.graph().num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: self.graph().num_vertices(),
                got: u.len(),
            });
        }
        if !u.is_dirichlet() {
            return Err(Error::InvalidParameter(
                "the energy functional is defined on Dirichlet fields".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn phi_values(&self, u: &[f64]) -> f64 {
        let mass: f64 = (0..u.len())
            .map(|x| self.weights.get(x) * self.a[x] * u[x] * u[x])
            .sum();
        0.5 * self.form.energy_values(u) - 0.5 * mass
    }

    pub(crate) fn psi_values(&self, u: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for x in 0..u.len() {
            acc -= self.weights.get(x) * self.g[x] * self.nonlin.integral(u[x])?;
        }
        Ok(acc)
    }

    /// `½W_m(u) − ½∫a u² dμ + λ∫g F(u) dμ`, assembled directly.
    pub(crate) fn energy_values(&self, u: &[f64]) -> Result<f64> {
        let mut coupling = 0.0;
        let mut mass = 0.0;
        for x in 0..u.len() {
            let w = self.weights.get(x);
            mass += w * self.a[x] * u[x] * u[x];
            coupling += w * self.g[x] * self.nonlin.integral(u[x])?;
        }
        Ok(0.5 * self.form.energy_values(u) - 0.5 * mass + self.lambda * coupling)
    }

    /// Gradient on all vertices, zero on `V_0`.
    pub(crate) fn gradient_values(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut grad = self.form.apply(u);
        for x in 0..u.len() {
            let w = self.weights.get(x);
            grad[x] += -w * self.a[x] * u[x] + self.lambda * w * self.g[x] * self.nonlin.value(u[x])?;
        }
        for &b in self.graph().boundary() {
            grad[b] = 0.0;
        }
        Ok(grad)
    }

    /// Diagonal of the Hessian beyond `K`: `−w a + λ w g f'(u)`.
    pub(crate) fn hessian_shift(&self, u: &[f64]) -> Result<Vec<f64>> {
        (0..u.len())
            .map(|x| {
                let w = self.weights.get(x);
                Ok(-w * self.a[x] + self.lambda * w * self.g[x] * self.nonlin.slope(u[x])?)
            })
            .collect()
    }

    /// `Φ(u) = ½‖u‖² − ½∫a u² dμ`.
    pub fn phi(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        Ok(self.phi_values(u.values()))
    }

    /// `Ψ(u) = −∫g F(u) dμ`.
    pub fn psi(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        self.psi_values(u.values())
    }

    /// `I_λ(u)`.
    pub fn i_lambda(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        self.energy_values(u.values())
    }

    /// The field representing `I_λ'(u)` on interior vertices.
    pub fn gradient(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        Field::dirichlet(self.graph(), self.gradient_values(u.values())?)
    }

    /// `I_λ'(u)(v) = 𝒲_m(u,v) − Σ w a u v + λ Σ w g f(u) v`.
    pub fn weak_residual(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let (uv, vv) = (u.values(), v.values());
        let mut acc = self.form.inner_values(uv, vv);
        for x in 0..uv.len() {
            let w = self.weights.get(x);
            acc += -w * self.a[x] * uv[x] * vv[x]
                + self.lambda * w * self.g[x] * self.nonlin.value(uv[x])? * vv[x];
        }
        Ok(acc)
    }

    /// Pointwise residuals of `Δu + a u − λ g f(u)` over interior vertices.
    ///
    /// The first uses the Laplacian dual to `W_m` under the vertex quadrature
    /// (`−(Ku)(x)/w_x`); the second uses `(N+2)^m H_m u` literally.
    pub fn strong_residuals(&self, u: &Field) -> Result<(f64, f64)> {
        self.check(u)?;
        let vals = u.values();
        let mut weak = 0.0f64;
        let mut standard = 0.0f64;
        for &x in &self.interior {
            let rest = self.a[x] * vals[x] - self.lambda * self.g[x] * self.nonlin.value(vals[x])?;
            weak = weak.max((weak_laplacian(&self.form, &self.weights, vals, x) + rest).abs());
            standard = standard.max((standard_laplacian(self.graph(), vals, x) + rest).abs());
        }
        Ok((weak, standard))
    }
}

fn check_h1(a: &[f64]) -> Result<()> {
    match a.iter().position(|&v| v > 0.0) {
        Some(x) => Err(Error::Hypothesis(
            "h1",
            format!("a = {} > 0 at vertex {x}", a[x]),
        )),
        None => Ok(()),
    }
}

/// `g ≤ 0` everywhere, and `g ≠ 0` somewhere in every level-⌈m/2⌉ cell.
pub fn check_h2(graph: &LevelGraph, g: &[f64]) -> Result<()> {
    if let Some(x) = g.iter().position(|&v| v > 0.0) {
        return Err(Error::Hypothesis(
            "h2",
            format!("g = {} > 0 at vertex {x}", g[x]),
        ));
    }
    let coarse = graph.level().div_ceil(2);
    let block = graph.n().pow(graph.level() - coarse);
    for k in 0..graph.n().pow(coarse) {
        let hit = (k * block..(k + 1) * block)
            .flat_map(|c| graph.cell_by_index(c).iter())
            .any(|&v| g[v] != 0.0);
        if !hit {
            return Err(Error::Hypothesis(
                "h2",
                format!("g vanishes on the whole level-{coarse} cell #{k}"),
            ));
        }
    }
    Ok(())
}

/// Problem metadata carried into serialized results.
#[derive(Clone, Debug, Serialize)]
pub struct ProblemSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub m: u32,
    pub lambda: f64,
    pub integral_g: f64,
    pub f: String,
}

impl Problem {
    pub fn summary(&self) -> ProblemSummary {
        ProblemSummary {
            n: self.n(),
            m: self.graph().level(),
            lambda: self.lambda,
            integral_g: self.integral_g(),
            f: self.nonlin.expr().to_string(),
        }
    }
}
