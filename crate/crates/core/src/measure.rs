//! Vertex quadrature for the normalized self-similar measure `μ`.
//!
//! Each level-`m` cell carries mass `N^{-m}`, split equally over its `N`
//! vertices. A vertex in `c` cells therefore gets `c / N^{m+1}`.

use serde::Serialize;

use crate::energy::Field;
use crate::error::{Error, Result};
use crate::gasket::LevelGraph;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct QuadratureWeights {
    weights: Vec<f64>,
}

impl QuadratureWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, v: usize) -> f64 {
        self.weights[v]
    }

    /// Total mass, summed in vertex order.
    pub fn total(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }
}

/// Neumaier summation; exact to the last bit for the sums of weights that
/// occur here.
pub fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for x in terms {
        let t = sum + x;
        carry += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + carry
}

pub fn vertex_weights(g: &LevelGraph) -> QuadratureWeights {
    let n = g.n() as u128;
    let denom = n.pow(g.level() + 1);
    let tally: u128 = (0..g.num_vertices())
        .map(|v| g.multiplicity(v) as u128)
        .sum();
    debug_assert_eq!(tally, denom, "cell masses must sum to one");
    let denom = denom as f64;
    QuadratureWeights {
        weights: (0..g.num_vertices())
            .map(|v| g.multiplicity(v) as f64 / denom)
            .collect(),
    }
}

/// `Σ_x w_x u(x)`, the level-`m` approximation of `∫_V u dμ`.
pub fn integrate(g: &LevelGraph, w: &QuadratureWeights, u: &Field) -> Result<f64> {
    integrate_values(g, w, u.values())
}

pub fn integrate_values(g: &LevelGraph, w: &QuadratureWeights, u: &[f64]) -> Result<f64> {
    if u.len() != g.num_vertices() || w.len() != g.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: g.num_vertices(),
            got: if u.len() != g.num_vertices() { u.len() } else { w.len() },
        });
    }
    Ok(compensated_sum(w.weights.iter().zip(u).map(|(w, u)| w * u)))
}
