//! Minimization of `I_λ` over the sublevel set `{Φ < r}`.
//!
//! Each start runs Polak–Ribière+ nonlinear conjugate gradients with an
//! Armijo backtracking line search. `Φ` is quadratic, so along a search
//! direction the largest step keeping `Φ ≤ r(1 − 1e−9)` is a root of a
//! quadratic and every trial step is capped by it.

use serde::Serialize;

use super::Problem;
use crate::energy::{truncate, Field, Truncation};
use crate::error::{Error, Result};

const SCHEMA: &str = "sierpinski.solve/1";
/// Relative margin kept from the sublevel boundary `Φ = r`.
const BOUNDARY_MARGIN: f64 = 1e-9;
const ARMIJO: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Converged when `‖∇I_λ‖ ≤ tol · max(1, |I_λ|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub include_zero: bool,
    /// Seeds `ξ·h∘u_probe` with `ξ = s·γ̄` for each `s` listed here, where
    /// `u_probe` is a positive bump peaking at 2 and `h(t) = |min{t,1}|`.
    pub seed_scales: Vec<f64>,
    /// Additional starting fields, e.g. a neighbouring solution.
    pub warm_starts: Vec<Field>,
    pub record_trace: bool,
    /// Polish with damped Newton after descent (used by [`super::sweep`]).
    pub newton: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iter: 50_000,
            include_zero: true,
            seed_scales: vec![0.5, 0.1, 0.01],
            warm_starts: Vec::new(),
            record_trace: true,
            newton: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub phi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    pub schema: &'static str,
    pub lambda: f64,
    /// The sublevel radius `r`; `+∞` when unrestricted.
    pub radius: f64,
    pub phi: f64,
    pub psi: f64,
    /// `I_λ(u_λ)`.
    pub energy: f64,
    /// `‖u_λ‖ = √W_m(u_λ)`.
    pub norm: f64,
    pub sup_norm: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub converged: bool,
    /// `max |Δ_m u + a u − λ g f(u)|` with `Δ_m u = −(Ku)/w`.
    pub strong_residual: f64,
    /// The same with `(N+2)^m H_m u` as Laplacian.
    pub standard_residual: f64,
    /// Largest `Φ` over all accepted iterates.
    pub max_phi: f64,
    pub start: String,
    pub status: String,
    pub trace: Vec<TraceEntry>,
    pub u: Field,
}

impl SolveResult {
    pub(crate) fn assemble(
        p: &Problem,
        values: Vec<f64>,
        radius: f64,
        start: String,
        status: String,
    ) -> Result<SolveResult> {
        let u = Field::dirichlet(p.graph(), values)?;
        let grad = p.gradient_values(u.values())?;
        let grad_norm = norm2(&grad);
        let phi = p.phi(&u)?;
        let energy = p.i_lambda(&u)?;
        let (strong_residual, standard_residual) = p.strong_residuals(&u)?;
        Ok(SolveResult {
            schema: SCHEMA,
            lambda: p.lambda(),
            radius,
            phi,
            psi: p.psi(&u)?,
            energy,
            norm: p.form().norm(&u)?,
            sup_norm: u.sup_norm(),
            grad_norm,
            iterations: 0,
            newton_steps: 0,
            converged: false,
            strong_residual,
            standard_residual,
            max_phi: phi,
            start,
            status,
            trace: Vec::new(),
            u,
        })
    }

    /// The convergence test shared by descent and polish.
    pub fn meets_tolerance(&self, tol: f64) -> bool {
        self.grad_norm <= tol * self.energy.abs().max(1.0)
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest `t ≥ 0` with `φ0 + b t + ½ c t² ≤ target`, given `φ0 ≤ target`.
fn feasible_step(phi0: f64, b: f64, c: f64, target: f64) -> f64 {
    let slack = (target - phi0).max(0.0);
    if c > 0.0 {
        let disc = b * b + 2.0 * c * slack;
        // (−b + √disc)/c, written to avoid cancellation when b < 0
        if b <= 0.0 {
            (-b + disc.sqrt()) / c
        } else {
            2.0 * slack / (b + disc.sqrt())
        }
    } else if b > 0.0 {
        slack / b
    } else {
        f64::INFINITY
    }
}

/// A positive Dirichlet bump with maximum 2: the product of barycentric
/// coordinates, rescaled.
pub(crate) fn probe_field(p: &Problem) -> Field {
    let g = p.graph();
    let side = (1u64 << g.level()) as f64;
    let raw: Vec<f64> = g
        .points()
        .iter()
        .map(|pt| pt.barycentric().iter().map(|&b| b as f64 / side).product())
        .collect();
    let peak = raw.iter().cloned().fold(0.0, f64::max);
    let vals = if peak > 0.0 {
        raw.iter().map(|v| 2.0 * v / peak).collect()
    } else {
        raw
    };
    Field::new(g, vals)
        .expect("probe has one value per vertex")
        .into_dirichlet(g)
}

/// Descent from a single start. The start is halved until it lies inside
/// the sublevel set.
pub fn minimize_from(p: &Problem, r: f64, start: &Field, opts: &SolveOptions) -> Result<SolveResult> {
    minimize_labeled(p, r, start, opts, "custom".into())
}

fn minimize_labeled(
    p: &Problem,
    r: f64,
    start: &Field,
    opts: &SolveOptions,
    label: String,
) -> Result<SolveResult> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("sublevel radius must be positive, got {r}")));
    }
    let target = if r.is_finite() { r * (1.0 - BOUNDARY_MARGIN) } else { f64::INFINITY };
    let g = p.graph();
    let mut u = start.values().to_vec();
    if u.len() != g.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: g.num_vertices(),
            got: u.len(),
        });
    }
    for &b in g.boundary() {
        u[b] = 0.0;
    }
    let mut phi = p.phi_values(&u);
    let mut halvings = 0;
    while phi > target {
        u.iter_mut().for_each(|v| *v *= 0.5);
        phi = p.phi_values(&u);
        halvings += 1;
        if halvings > 200 {
            u.iter_mut().for_each(|v| *v = 0.0);
            phi = 0.0;
        }
    }

    let mut energy = p.energy_values(&u)?;
    let mut grad = p.gradient_values(&u)?;
    let mut dir: Vec<f64> = grad.iter().map(|x| -x).collect();
    let mut max_phi = phi;
    let mut trace = Vec::new();
    let mut last_step = 1.0;
    let restart_every = p.interior().len().max(1);
    let mut status = String::from("iteration cap reached");
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..opts.max_iter {
        iterations = it;
        let gn = norm2(&grad);
        if opts.record_trace {
            trace.push(TraceEntry {
                iteration: it,
                energy,
                grad_norm: gn,
                phi,
            });
        }
        if gn <= opts.tol * energy.abs().max(1.0) {
            converged = true;
            status = "converged".into();
            break;
        }
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            dir = grad.iter().map(|x| -x).collect();
            slope = -gn * gn;
        }

        let kd = p.form().apply(&dir);
        let mut c = dot(&kd, &dir);
        let mut b = dot(&p.form().apply(&u), &dir);
        let shift = p.hessian_shift(&u)?;
        let mut curv = c;
        for x in 0..u.len() {
            let wa = p.weights().get(x) * p.a()[x];
            c -= wa * dir[x] * dir[x];
            b -= wa * u[x] * dir[x];
            curv += shift[x] * dir[x] * dir[x];
        }
        let t_max = feasible_step(phi, b, c, target);
        if t_max <= 0.0 {
            status = "sublevel boundary blocks descent".into();
            break;
        }
        let mut t = if curv > 0.0 { -slope / curv } else { 2.0 * last_step };
        t = t.min(t_max);

        // Strict decrease: at the rounding floor of I_λ the search fails and
        // the run ends, leaving the last digits to Newton.
        let mut accepted = None;
        for _ in 0..80 {
            let cand: Vec<f64> = u.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            let cand_phi = p.phi_values(&cand);
            if cand_phi <= target {
                if let Ok(e) = p.energy_values(&cand) {
                    if e < energy && e <= energy + ARMIJO * t * slope {
                        accepted = Some((cand, e, cand_phi));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some((cand, e, cand_phi)) = accepted else {
            status = "line search stalled".into();
            break;
        };
        last_step = t;
        u = cand;
        energy = e;
        phi = cand_phi;
        max_phi = max_phi.max(phi);

        let new_grad = p.gradient_values(&u)?;
        let denom = dot(&grad, &grad);
        let beta = if (it + 1) % restart_every == 0 || denom == 0.0 {
            0.0
        } else {
            (dot(&new_grad, &new_grad) - dot(&new_grad, &grad)).max(0.0) / denom
        };
        for (d, gx) in dir.iter_mut().zip(&new_grad) {
            *d = -gx + beta * *d;
        }
        grad = new_grad;
        iterations = it + 1;
    }

    let mut res = SolveResult::assemble(p, u, r, label, status)?;
    res.iterations = iterations;
    res.converged = converged;
    res.max_phi = max_phi;
    res.trace = trace;
    Ok(res)
}

/// Multi-start restricted descent: the zero field, the truncated-bump seeds
/// and any warm starts. The lowest `I_λ` wins; values within `1e−12` are
/// broken in favour of the smaller `‖u‖`.
pub fn minimize_restricted(p: &Problem, r: f64, opts: &SolveOptions) -> Result<SolveResult> {
    let g = p.graph();
    let mut starts: Vec<(String, Field)> = Vec::new();
    if opts.include_zero {
        starts.push(("zero".into(), Field::zeros(g)));
    }
    if !opts.seed_scales.is_empty() {
        let c = crate::energy::embedding_constant(p.n());
        let gamma = if r.is_finite() { c * (2.0 * r).sqrt() } else { 1.0 };
        let plateau = truncate(&probe_field(p), &Truncation::UnitCap)?;
        for &s in &opts.seed_scales {
            let xi = s * gamma;
            let vals = plateau.values().iter().map(|v| xi * v).collect();
            starts.push((format!("bump*{xi:.6e}"), Field::dirichlet(g, vals)?));
        }
    }
    for (k, w) in opts.warm_starts.iter().enumerate() {
        starts.push((format!("warm#{k}"), w.clone()));
    }
    if starts.is_empty() {
        return Err(Error::InvalidParameter("no starting fields configured".into()));
    }

    let mut best: Option<SolveResult> = None;
    for (label, start) in starts {
        let res = minimize_labeled(p, r, &start, opts, label)?;
        best = Some(match best {
            None => res,
            Some(cur) => {
                let better = if (res.energy - cur.energy).abs() <= 1e-12 {
                    res.norm < cur.norm
                } else {
                    res.energy < cur.energy
                };
                if better {
                    res
                } else {
                    cur
                }
            }
        });
    }
    Ok(best.expect("at least one start"))
}
