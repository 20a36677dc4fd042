//! The solvability threshold
//!
//! ```text
//! λ*(γ) = −γ² / (2 (2N+3)² (∫g dμ) max_{|ξ|≤γ} F(ξ)),     λ* = sup_{γ>0} λ*(γ)
//! ```
//!
//! and the sublevel radius `r = γ² / (2 (2N+3)²)` attached to a box `[−γ, γ]`.

use serde::Serialize;

use super::golden::golden_max;
use super::Problem;
use crate::energy::embedding_constant;
use crate::error::{Error, Result};
use crate::exprs::Nonlinearity;

/// Samples used for `max_{|ξ|≤γ} F(ξ)` before local refinement.
const PRIMITIVE_SAMPLES: usize = 10_001;

/// Uniform grid `γ_k = k·max/points`, `k = 1..=points`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaGrid {
    pub max: f64,
    pub points: usize,
}

impl Default for GammaGrid {
    fn default() -> Self {
        GammaGrid {
            max: 10.0,
            points: 400,
        }
    }
}

impl GammaGrid {
    pub fn values(&self) -> Vec<f64> {
        (1..=self.points)
            .map(|k| self.max * k as f64 / self.points as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStatus {
    /// The supremum is attained inside the grid.
    Finite,
    /// `λ*(γ)` still increases at an end of the grid.
    UnboundedOnGrid,
    /// `max F ≤ 0` on some box, so every `λ > 0` is admissible.
    NonPositivePrimitive,
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaStarRow {
    pub gamma: f64,
    pub max_primitive: f64,
    /// `None` stands for `+∞`.
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaStar {
    /// `None` stands for `+∞`.
    pub value: Option<f64>,
    /// Maximizing `γ` (or the box that certifies the infinite case).
    pub gamma: f64,
    pub status: ThresholdStatus,
    pub integral_g: f64,
    pub table: Vec<LambdaStarRow>,
}

impl LambdaStar {
    pub fn is_infinite(&self) -> bool {
        self.value.is_none()
    }

    /// `r = γ̄²/(2(2N+3)²)` for the selected `γ̄`.
    pub fn radius(&self, n: usize) -> f64 {
        radius_for(n, self.gamma)
    }
}

/// `r = γ² / (2 (2N+3)²)`.
pub fn radius_for(n: usize, gamma: f64) -> f64 {
    let c = embedding_constant(n);
    gamma * gamma / (2.0 * c * c)
}

/// `λ*(γ)` for a given `max_{|ξ|≤γ} F`; `None` when that maximum is `≤ 0`.
pub fn lambda_star_at(n: usize, integral_g: f64, gamma: f64, max_primitive: f64) -> Option<f64> {
    if max_primitive <= 0.0 {
        return None;
    }
    let c = embedding_constant(n);
    Some(-gamma * gamma / (2.0 * c * c * integral_g * max_primitive))
}

/// `max_{|ξ|≤γ} F(ξ)`: dense sampling, then golden-section refinement
/// around the best sample.
pub fn max_primitive(nonlin: &Nonlinearity, gamma: f64) -> Result<f64> {
    let step = 2.0 * gamma / (PRIMITIVE_SAMPLES - 1) as f64;
    let node = |k: usize| (-gamma + k as f64 * step).clamp(-gamma, gamma);
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in 0..PRIMITIVE_SAMPLES {
        let v = nonlin.integral(node(k))?;
        if v > best.1 {
            best = (k, v);
        }
    }
    let lo = node(best.0.saturating_sub(1));
    let hi = node((best.0 + 1).min(PRIMITIVE_SAMPLES - 1));
    let (_, refined) = golden_max(|t| Ok(nonlin.integral(t)?), lo, hi, 1e-12 * gamma.max(1.0))?;
    Ok(best.1.max(refined))
}

/// `λ*` for a sampled problem, using its `∫g dμ` and `F`.
pub fn lambda_star(problem: &Problem, grid: &GammaGrid) -> Result<LambdaStar> {
    let nonlin = problem.nonlinearity();
    lambda_star_with(problem.n(), problem.integral_g(), grid, |gamma| {
        max_primitive(nonlin, gamma)
    })
}

/// `λ*` with a caller-supplied `γ ↦ max_{|ξ|≤γ} F(ξ)` (or any upper bound
/// of it, which yields a smaller, still certified threshold).
pub fn lambda_star_with<M>(
    n: usize,
    integral_g: f64,
    grid: &GammaGrid,
    mut max_f: M,
) -> Result<LambdaStar>
where
    M: FnMut(f64) -> Result<f64>,
{
    if !(integral_g < 0.0) {
        return Err(Error::Hypothesis(
            "h2",
            format!("∫g dμ must be negative, got {integral_g}"),
        ));
    }
    if grid.points < 2 || !(grid.max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "γ grid needs at least two points on (0, max], got {grid:?}"
        )));
    }
    let mut table = Vec::with_capacity(grid.points);
    for gamma in grid.values() {
        let m = max_f(gamma)?;
        table.push(LambdaStarRow {
            gamma,
            max_primitive: m,
            lambda: lambda_star_at(n, integral_g, gamma, m),
        });
    }

    if let Some(row) = table.iter().find(|r| r.lambda.is_none()) {
        return Ok(LambdaStar {
            value: None,
            gamma: row.gamma,
            status: ThresholdStatus::NonPositivePrimitive,
            integral_g,
            table,
        });
    }

    let lam = |k: usize| table[k].lambda.unwrap();
    let mut k_best = 0;
    for k in 1..table.len() {
        if lam(k) > lam(k_best) {
            k_best = k;
        }
    }
    let last = table.len() - 1;
    if (k_best == last && lam(last) > lam(last - 1)) || (k_best == 0 && lam(0) > lam(1)) {
        return Ok(LambdaStar {
            value: None,
            gamma: table[k_best].gamma,
            status: ThresholdStatus::UnboundedOnGrid,
            integral_g,
            table,
        });
    }

    let lo = table[k_best.saturating_sub(1)].gamma;
    let hi = table[(k_best + 1).min(last)].gamma;
    let (gamma, value) = golden_max(
        |g| {
            let m = max_f(g)?;
            Ok(lambda_star_at(n, integral_g, g, m).unwrap_or(f64::INFINITY))
        },
        lo,
        hi,
        1e-10,
    )?;
    let (gamma, value) = if value >= lam(k_best) {
        (gamma, value)
    } else {
        (table[k_best].gamma, lam(k_best))
    };
    Ok(LambdaStar {
        value: Some(value),
        gamma,
        status: ThresholdStatus::Finite,
        integral_g,
        table,
    })
}
