//! λ-continuation: one restricted solve per λ, warm-started from the
//! previous solution.

use std::io::Write;

use serde::Serialize;

use super::minimize::SolveOptions;
use super::newton::{solve, NewtonOptions};
use super::Problem;
use crate::error::{Error, Result};

const SCHEMA: &str = "sierpinski.sweep/1";

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub solve: SolveOptions,
    pub newton: NewtonOptions,
    pub warm_start: bool,
    /// `u_λ` counts as non-trivial when `‖u_λ‖` exceeds this.
    pub nontrivial_threshold: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            solve: SolveOptions {
                record_trace: false,
                ..SolveOptions::default()
            },
            newton: NewtonOptions::default(),
            warm_start: true,
            nontrivial_threshold: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub norm_u: f64,
    pub sup_norm: f64,
    pub energy: f64,
    pub phi: f64,
    pub nontrivial: bool,
    pub grad_norm: f64,
    pub residual: f64,
    pub converged: bool,
    pub max_phi: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub schema: &'static str,
    pub radius: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    fn solved(&self) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(|p| p.error.is_none())
    }

    pub fn all_nontrivial(&self) -> bool {
        self.points.iter().all(|p| p.error.is_none() && p.nontrivial)
    }

    pub fn all_negative(&self) -> bool {
        self.points.iter().all(|p| p.error.is_none() && p.energy < 0.0)
    }

    /// `I_λ(u_λ)` strictly decreasing along the (ascending) λ grid.
    pub fn energies_strictly_decreasing(&self) -> bool {
        let e: Vec<f64> = self.solved().map(|p| p.energy).collect();
        e.len() == self.points.len() && e.windows(2).all(|w| w[1] < w[0])
    }

    /// `‖u_λ‖` non-decreasing in λ, i.e. decreasing as λ↓.
    pub fn norms_monotone(&self) -> bool {
        let n: Vec<f64> = self.solved().map(|p| p.norm_u).collect();
        n.len() == self.points.len() && n.windows(2).all(|w| w[0] <= w[1])
    }

    /// `‖u‖` at the smallest λ over `‖u‖` at the largest.
    pub fn norm_ratio(&self) -> Option<f64> {
        let first = self.points.first()?;
        let last = self.points.last()?;
        (last.norm_u > 0.0).then(|| first.norm_u / last.norm_u)
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }

    /// Columns `lambda,norm_u,I_lambda,nontrivial,grad_norm,residual`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "lambda,norm_u,I_lambda,nontrivial,grad_norm,residual")?;
        for p in &self.points {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
                p.lambda, p.norm_u, p.energy, p.nontrivial, p.grad_norm, p.residual
            )?;
        }
        Ok(())
    }
}

/// Solves at every λ of an ascending grid inside `{Φ < r}`. Failures are
/// recorded on their point and do not stop the sweep.
pub fn sweep(p: &Problem, lambdas: &[f64], r: f64, opts: &SweepOptions) -> Result<SweepResult> {
    if lambdas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("the λ grid must be strictly ascending".into()));
    }
    let mut points = Vec::with_capacity(lambdas.len());
    let mut previous = None;
    for &lambda in lambdas {
        let q = p.with_lambda(lambda);
        let mut solve_opts = opts.solve.clone();
        if opts.warm_start {
            if let Some(u) = previous.take() {
                solve_opts.warm_starts.push(u);
            }
        }
        match solve(&q, r, &solve_opts, &opts.newton) {
            Ok(res) => {
                points.push(SweepPoint {
                    lambda,
                    norm_u: res.norm,
                    sup_norm: res.sup_norm,
                    energy: res.energy,
                    phi: res.phi,
                    nontrivial: res.norm > opts.nontrivial_threshold,
                    grad_norm: res.grad_norm,
                    residual: res.strong_residual,
                    converged: res.converged,
                    max_phi: res.max_phi,
                    error: None,
                });
                previous = Some(res.u);
            }
            Err(e) => points.push(SweepPoint {
                lambda,
                norm_u: f64::NAN,
                sup_norm: f64::NAN,
                energy: f64::NAN,
                phi: f64::NAN,
                nontrivial: false,
                grad_norm: f64::NAN,
                residual: f64::NAN,
                converged: false,
                max_phi: f64::NAN,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(SweepResult {
        schema: SCHEMA,
        radius: r,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{radius_for, ProblemSpec};

    #[test]
    fn rejects_unsorted_grid() {
        let p = Problem::new(&ProblemSpec::exponential_example(3, 2, 0.0)).unwrap();
        assert!(sweep(&p, &[2e-3, 1e-3], 1.0, &SweepOptions::default()).is_err());
    }

    #[test]
    fn small_sweep_is_negative_and_decreasing() {
        let p = Problem::new(&ProblemSpec::exponential_example(3, 3, 0.0)).unwrap();
        let bound = 2.0 * (-2f64).exp() / 81.0;
        let grid: Vec<f64> = [0.2, 0.5, 0.8].iter().map(|s| s * bound).collect();
        let res = sweep(&p, &grid, radius_for(3, 2.0), &SweepOptions::default()).unwrap();
        assert!(res.all_nontrivial());
        assert!(res.all_negative());
        assert!(res.energies_strictly_decreasing());
        assert!(res.norms_monotone());
        let mut csv = Vec::new();
        res.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("lambda,norm_u,I_lambda,nontrivial,grad_norm,residual\n"));
    }
}
