//! Damped Newton polish on the critical-point equation `∇I_λ(u) = 0`.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use super::minimize::{minimize_restricted, norm2, SolveOptions, SolveResult};
use super::Problem;
use crate::energy::Field;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    /// Stop once `‖∇I_λ‖ ≤ tol`.
    pub tol: f64,
    pub max_steps: usize,
    /// Reject trial points with `Φ ≥ r` when set.
    pub radius: Option<f64>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_steps: 20,
            radius: None,
        }
    }
}

enum Direction {
    Newton(Vec<f64>),
    Gradient(Vec<f64>),
}

/// Solves `H δ = −G` on the interior unknowns with
/// `H = K − diag(w a) + λ diag(w g f′(u))`.
fn newton_direction(p: &Problem, u: &[f64], grad: &[f64]) -> Result<Direction> {
    let g = p.graph();
    let interior = p.interior();
    let mut slot = vec![usize::MAX; g.num_vertices()];
    for (k, &x) in interior.iter().enumerate() {
        slot[x] = k;
    }
    let n = interior.len();
    let factor = p.form().factor();
    let shift = p.hessian_shift(u)?;
    let mut coo = CooMatrix::new(n, n);
    for (k, &x) in interior.iter().enumerate() {
        coo.push(k, k, g.degree(x) as f64 * factor + shift[x]);
    }
    for &[a, b] in g.edges() {
        let (sa, sb) = (slot[a], slot[b]);
        if sa != usize::MAX && sb != usize::MAX {
            coo.push(sa, sb, -factor);
            coo.push(sb, sa, -factor);
        }
    }
    let rhs = DVector::from_iterator(n, interior.iter().map(|&x| -grad[x]));
    let csc = CscMatrix::from(&coo);

    let scatter = |sol: &DVector<f64>| {
        let mut full = vec![0.0; u.len()];
        for (k, &x) in interior.iter().enumerate() {
            full[x] = sol[k];
        }
        full
    };
    if let Ok(chol) = CscCholesky::factor(&csc) {
        let sol = chol.solve(&rhs);
        let col = sol.column(0).into_owned();
        if col.iter().all(|v| v.is_finite()) {
            return Ok(Direction::Newton(scatter(&col)));
        }
    }
    // indefinite or numerically singular: dense LU
    let dense: DMatrix<f64> = DMatrix::from(&csc);
    if let Some(sol) = dense.lu().solve(&rhs) {
        if sol.iter().all(|v| v.is_finite()) {
            return Ok(Direction::Newton(scatter(&sol)));
        }
    }
    Ok(Direction::Gradient(grad.iter().map(|v| -v).collect()))
}

/// Damped Newton from `u0`. Steps are halved until the gradient norm
/// decreases; the run stops at the tolerance, on stagnation or at the cap.
pub fn newton_refine(p: &Problem, u0: &Field, opts: &NewtonOptions) -> Result<SolveResult> {
    if u0.len() != p.graph().num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: p.graph().num_vertices(),
            got: u0.len(),
        });
    }
    let radius = opts.radius.unwrap_or(f64::INFINITY);
    let mut u = u0.values().to_vec();
    for &b in p.graph().boundary() {
        u[b] = 0.0;
    }
    let mut grad = p.gradient_values(&u)?;
    let mut gn = norm2(&grad);
    let mut max_phi = p.phi_values(&u);
    let mut steps = 0;
    let mut status = String::from("step cap reached");
    let mut fallback = false;

    loop {
        if gn <= opts.tol {
            status = "converged".into();
            break;
        }
        if steps >= opts.max_steps {
            break;
        }
        let dir = match newton_direction(p, &u, &grad)? {
            Direction::Newton(d) => d,
            Direction::Gradient(d) => {
                fallback = true;
                d
            }
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = u.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            if p.phi_values(&cand) < radius {
                if let Ok(cg) = p.gradient_values(&cand) {
                    let cn = norm2(&cg);
                    if cn < (1.0 - 1e-4 * t) * gn {
                        accepted = Some((cand, cg, cn));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some((cand, cg, cn)) = accepted else {
            status = "stagnated".into();
            break;
        };
        u = cand;
        grad = cg;
        gn = cn;
        max_phi = max_phi.max(p.phi_values(&u));
        steps += 1;
    }
    if fallback {
        status.push_str(" (singular Hessian: gradient steps used)");
    }

    let mut res = SolveResult::assemble(p, u, radius, "newton".into(), status)?;
    res.newton_steps = steps;
    res.converged = res.grad_norm <= opts.tol;
    res.max_phi = max_phi;
    Ok(res)
}

/// Restricted descent followed by Newton polish inside the same sublevel set.
/// The polish is kept only if it lowers the gradient norm.
pub fn solve(p: &Problem, r: f64, opts: &SolveOptions, newton: &NewtonOptions) -> Result<SolveResult> {
    let mut best = minimize_restricted(p, r, opts)?;
    if opts.newton {
        let polish = newton_refine(
            p,
            &best.u,
            &NewtonOptions {
                radius: Some(r * (1.0 - 1e-9)),
                ..newton.clone()
            },
        )?;
        if polish.grad_norm < best.grad_norm {
            best.status = if polish.grad_norm <= newton.tol {
                format!("{}; newton converged", best.status)
            } else {
                format!("{}; newton {}", best.status, polish.status)
            };
            best.newton_steps = polish.newton_steps;
            best.max_phi = best.max_phi.max(polish.max_phi);
            best.u = polish.u;
            best.phi = polish.phi;
            best.psi = polish.psi;
            best.energy = polish.energy;
            best.norm = polish.norm;
            best.sup_norm = polish.sup_norm;
            best.grad_norm = polish.grad_norm;
            best.strong_residual = polish.strong_residual;
            best.standard_residual = polish.standard_residual;
        }
    }
    best.converged = best.meets_tolerance(opts.tol);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{radius_for, ProblemSpec};

    #[test]
    fn linear_problem_in_one_step() {
        let p = Problem::new(&ProblemSpec::parse(2, 4, "0", "-1", "1", None, 2.0).unwrap()).unwrap();
        let res = newton_refine(&p, &Field::zeros(p.graph()), &NewtonOptions::default()).unwrap();
        assert!(res.converged, "{}", res.status);
        assert_eq!(res.newton_steps, 1);
        for (pt, v) in p.graph().euclidean_coords().iter().zip(res.u.values()) {
            let x = pt[0];
            assert!((v - x * (1.0 - x)).abs() < 1e-13);
        }
    }

    #[test]
    fn exact_solution_takes_no_step() {
        let p = Problem::new(&ProblemSpec::parse(2, 3, "0", "-1", "1", None, 2.0).unwrap()).unwrap();
        let exact = Field::from_fn(p.graph(), |x| x[0] * (1.0 - x[0])).into_dirichlet(p.graph());
        let res = newton_refine(&p, &exact, &NewtonOptions::default()).unwrap();
        assert_eq!(res.newton_steps, 0);
        assert!(res.converged);
    }

    #[test]
    fn polishes_descent_output() {
        let p = Problem::new(&ProblemSpec::exponential_example(3, 3, 1.6e-3)).unwrap();
        let r = radius_for(3, 2.0);
        let cg = minimize_restricted(&p, r, &SolveOptions::default()).unwrap();
        let res = newton_refine(&p, &cg.u, &NewtonOptions::default()).unwrap();
        assert!(res.grad_norm <= 1e-12, "{}", res.grad_norm);
        assert!(res.newton_steps <= 5);
    }
}
