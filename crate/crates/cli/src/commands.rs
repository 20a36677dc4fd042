use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use sierpinski::gasket::{build_gasket, GraphExport};
use sierpinski::measure::{vertex_weights, QuadratureWeights};
use sierpinski::solver::{
    lambda_star, lambda_star_at, lambda_star_with, max_primitive, radius_for, solve, sweep,
    GammaGrid, LambdaStar, NewtonOptions, Problem, ProblemSpec, SolveOptions, SolveResult,
    SweepOptions, SweepResult, ThresholdStatus,
};
use sierpinski::spectrum::{decimation_check, raw_dirichlet_spectrum, weighted_spectrum};
use sierpinski::verify::{run_verify, VerifyConfig, VerifyReport};
use sierpinski::{EnergyForm, Expr};

use crate::config::{RunConfig, Settings};
use crate::output::{emit, to_json};
use crate::Failure;

const SWEEP_FRACTIONS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Prints the summary to stdout, or to stderr when JSON goes to stdout.
struct Reporter {
    to_stderr: bool,
}

impl Reporter {
    fn new(s: &Settings) -> Self {
        Reporter {
            to_stderr: s.out.as_deref() == Some(Path::new("-")),
        }
    }

    fn line(&self, text: impl AsRef<str>) {
        // a closed pipe (e.g. `| head`) is not an error worth reporting
        let _ = if self.to_stderr {
            writeln!(std::io::stderr(), "{}", text.as_ref())
        } else {
            writeln!(std::io::stdout(), "{}", text.as_ref())
        };
    }
}

fn write_json<T: Serialize>(s: &Settings, value: &T) -> Result<(), Failure> {
    if let Some(path) = &s.out {
        emit(path, &to_json(value))
            .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn problem(s: &Settings, lambda: f64) -> Result<Problem, Failure> {
    let spec = ProblemSpec::parse(s.n(), s.m(), s.a(), s.g(), s.f(), s.big_f.as_deref(), lambda)?;
    Ok(Problem::new(&spec)?)
}

fn grid(s: &Settings) -> GammaGrid {
    let d = GammaGrid::default();
    GammaGrid {
        max: s.gamma_max.unwrap_or(d.max),
        points: s.gamma_points.unwrap_or(d.points),
    }
}

fn is_exponential(p: &Problem) -> bool {
    p.nonlinearity().expr().to_string() == "exp(u)"
}

/// `λ*` with `max_{|ξ|≤γ} F ≤ e^γ`, valid for `f = exp`.
fn exponential_bound(p: &Problem, grid: &GammaGrid) -> Result<LambdaStar, Failure> {
    Ok(lambda_star_with(p.n(), p.integral_g(), grid, |g| Ok(g.exp()))?)
}

fn fmt_lambda(v: Option<f64>) -> String {
    v.map_or_else(|| "+inf".to_string(), |x| format!("{x:e}"))
}

#[derive(Serialize)]
struct BuildOutput<'a> {
    config: RunConfig<'a>,
    graph: GraphExport,
    weights: QuadratureWeights,
}

pub fn build(s: &Settings) -> Result<(), Failure> {
    let report = Reporter::new(s);
    let g = build_gasket(s.n(), s.m())?;
    let w = vertex_weights(&g);
    report.line(format!(
        "vertices={} edges={} cells={}",
        g.num_vertices(),
        g.edges().len(),
        g.num_cells()
    ));
    write_json(
        s,
        &BuildOutput {
            config: RunConfig {
                command: "build",
                settings: s,
            },
            graph: g.export(),
            weights: w,
        },
    )
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    config: RunConfig<'a>,
    report: VerifyReport,
}

pub fn verify(s: &Settings) -> Result<(), Failure> {
    let report = Reporter::new(s);
    let mut cfg = VerifyConfig::new(s.n(), s.m(), s.seed());
    if let Some(fields) = s.fields {
        cfg.sobolev_fields = fields;
    }
    cfg.corrupt_energy_factor = s.corrupt_energy_factor;
    let rep = run_verify(&cfg)?;
    report.line(format!(
        "N={} m={} seed={} vertices={} sigma={} constant={}",
        cfg.n, cfg.m, cfg.seed, rep.vertices, rep.sigma, rep.embedding_constant
    ));
    for c in &rep.checks {
        report.line(format!(
            "{} {} trials={} violations={} worst={:e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.trials,
            c.violations,
            c.worst
        ));
    }
    let passed = rep.passed;
    write_json(
        s,
        &VerifyOutput {
            config: RunConfig {
                command: "verify",
                settings: s,
            },
            report: rep,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Checks("one or more invariant checks failed".into()))
    }
}

#[derive(Serialize)]
struct ThresholdOutput<'a> {
    config: RunConfig<'a>,
    integral_g: f64,
    lambda_star: LambdaStar,
    /// Present for `f = exp`: the threshold with `max F ≤ e^γ`.
    lambda_star_bound: Option<LambdaStar>,
}

pub fn lambda_star_cmd(s: &Settings) -> Result<(), Failure> {
    let report = Reporter::new(s);
    let p = problem(s, 0.0)?;
    let grid = grid(s);
    let ls = lambda_star(&p, &grid)?;
    report.line("gamma max_F lambda_star(gamma)");
    for row in &ls.table {
        report.line(format!(
            "{:e} {:e} {}",
            row.gamma,
            row.max_primitive,
            fmt_lambda(row.lambda)
        ));
    }
    report.line(format!("integral_g={:e}", p.integral_g()));
    match ls.status {
        ThresholdStatus::Finite => report.line(format!(
            "lambda_star={} gamma_bar={:e}",
            fmt_lambda(ls.value),
            ls.gamma
        )),
        ThresholdStatus::UnboundedOnGrid => report.line(format!(
            "lambda_star=+inf (λ*(γ) still grows at γ={:e}: a non-trivial solution exists for every λ > 0)",
            ls.gamma
        )),
        ThresholdStatus::NonPositivePrimitive => report.line(format!(
            "lambda_star=+inf (max F ≤ 0 on [-{0:e}, {0:e}]: every λ > 0 is admissible)",
            ls.gamma
        )),
    }
    let bound = if is_exponential(&p) {
        let b = exponential_bound(&p, &grid)?;
        report.line(format!(
            "lambda_star_bound={} gamma_bound={:e} (using max F ≤ e^γ; certified sub-bound)",
            fmt_lambda(b.value),
            b.gamma
        ));
        if let (Some(exact), Some(sub)) = (ls.value, b.value) {
            report.line(format!("exact_ge_bound={}", exact >= sub));
        }
        Some(b)
    } else {
        None
    };
    write_json(
        s,
        &ThresholdOutput {
            config: RunConfig {
                command: "lambda-star",
                settings: s,
            },
            integral_g: p.integral_g(),
            lambda_star: ls,
            lambda_star_bound: bound,
        },
    )
}

/// The box `[−γ̄, γ̄]` used for the sublevel radius, and `λ*(γ̄)`.
struct Region {
    gamma: f64,
    radius: f64,
    lambda_at_gamma: Option<f64>,
    lambda_star: LambdaStar,
}

fn region(s: &Settings, p: &Problem) -> Result<Region, Failure> {
    let ls = lambda_star(p, &grid(s))?;
    let gamma = s.gamma.unwrap_or(ls.gamma);
    if !(gamma > 0.0) {
        return Err(Failure::Config(format!("γ̄ must be positive, got {gamma}")));
    }
    let max_f = max_primitive(p.nonlinearity(), gamma)?;
    Ok(Region {
        gamma,
        radius: radius_for(p.n(), gamma),
        lambda_at_gamma: lambda_star_at(p.n(), p.integral_g(), gamma, max_f),
        lambda_star: ls,
    })
}

fn solve_options(s: &Settings) -> SolveOptions {
    let mut opts = SolveOptions::default();
    if let Some(tol) = s.tol {
        opts.tol = tol;
    }
    opts
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    config: RunConfig<'a>,
    problem: sierpinski::solver::ProblemSummary,
    gamma_bar: f64,
    radius: f64,
    lambda_star_at_gamma: Option<f64>,
    sup_within_gamma: bool,
    result: &'a SolveResult,
}

pub fn solve_cmd(s: &Settings) -> Result<(), Failure> {
    let report = Reporter::new(s);
    let lambda = s
        .lambda
        .ok_or_else(|| Failure::Config("solve needs --lambda".into()))?;
    let p = problem(s, lambda)?;
    let reg = region(s, &p)?;
    if let Some(limit) = reg.lambda_at_gamma {
        if lambda >= limit {
            eprintln!("warning: λ = {lambda:e} is not below λ*(γ̄) = {limit:e}; existence is not certified");
        }
    }
    let res = solve(&p, reg.radius, &solve_options(s), &NewtonOptions::default())?;
    let sup_ok = res.sup_norm <= reg.gamma + 1e-9;
    report.line(format!(
        "lambda={:e} norm_u={:e} I_lambda={:e} residual={:e} converged={}",
        lambda, res.norm, res.energy, res.strong_residual, res.converged
    ));
    report.line(format!(
        "sup_norm={:e} grad_norm={:e} phi={:e} radius={:e} gamma_bar={:e} standard_residual={:e} iterations={} newton_steps={}",
        res.sup_norm,
        res.grad_norm,
        res.phi,
        reg.radius,
        reg.gamma,
        res.standard_residual,
        res.iterations,
        res.newton_steps
    ));
    write_json(
        s,
        &SolveOutput {
            config: RunConfig {
                command: "solve",
                settings: s,
            },
            problem: p.summary(),
            gamma_bar: reg.gamma,
            radius: reg.radius,
            lambda_star_at_gamma: reg.lambda_at_gamma,
            sup_within_gamma: sup_ok,
            result: &res,
        },
    )?;
    if res.converged || s.allow_nonconverged {
        Ok(())
    } else {
        Err(Failure::Checks(format!("solve did not converge: {}", res.status)))
    }
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    config: RunConfig<'a>,
    problem: sierpinski::solver::ProblemSummary,
    gamma_bar: f64,
    lambda_reference: f64,
    all_nontrivial: bool,
    all_negative: bool,
    strictly_decreasing: bool,
    norm_ratio: Option<f64>,
    sweep: &'a SweepResult,
}

fn csv_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "csv") {
        out.with_extension("sweep.csv")
    } else {
        out.with_extension("csv")
    }
}

pub fn sweep_cmd(s: &Settings) -> Result<(), Failure> {
    let report = Reporter::new(s);
    let p = problem(s, 0.0)?;
    let reg = region(s, &p)?;
    // default grid: fractions of the smallest certified threshold available
    let reference = if is_exponential(&p) {
        exponential_bound(&p, &grid(s))?.value
    } else {
        reg.lambda_star.value
    };
    let lambdas = match &s.lambda_grid {
        Some(grid) => grid.clone(),
        None => {
            let base = reference.ok_or_else(|| {
                Failure::Config("λ* is infinite; pass an explicit --lambda-grid".into())
            })?;
            SWEEP_FRACTIONS.iter().map(|t| t * base).collect()
        }
    };
    let opts = SweepOptions {
        solve: SolveOptions {
            record_trace: false,
            ..solve_options(s)
        },
        ..SweepOptions::default()
    };
    let res = sweep(&p, &lambdas, reg.radius, &opts)?;
    for pt in &res.points {
        match &pt.error {
            None => report.line(format!(
                "lambda={:e} norm_u={:e} I_lambda={:e} residual={:e} converged={}",
                pt.lambda, pt.norm_u, pt.energy, pt.residual, pt.converged
            )),
            Some(e) => report.line(format!("lambda={:e} error={e}", pt.lambda)),
        }
    }
    let ratio = res.norm_ratio();
    report.line(format!(
        "nontrivial={} negative={} strictly_decreasing={} norm_ratio={}",
        res.all_nontrivial(),
        res.all_negative(),
        res.energies_strictly_decreasing(),
        ratio.map_or("n/a".into(), |r| format!("{r:e}"))
    ));
    write_json(
        s,
        &SweepOutput {
            config: RunConfig {
                command: "sweep",
                settings: s,
            },
            problem: p.summary(),
            gamma_bar: reg.gamma,
            lambda_reference: reference.unwrap_or(f64::INFINITY),
            all_nontrivial: res.all_nontrivial(),
            all_negative: res.all_negative(),
            strictly_decreasing: res.energies_strictly_decreasing(),
            norm_ratio: ratio,
            sweep: &res,
        },
    )?;
    if let Some(out) = s.out.as_deref().filter(|o| *o != Path::new("-")) {
        let path = csv_path(out);
        let mut buf = Vec::new();
        res.write_csv(&mut buf).expect("writing to memory");
        std::fs::write(&path, buf)
            .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    if res.all_converged() || s.allow_nonconverged {
        Ok(())
    } else {
        Err(Failure::Checks("some sweep points did not converge".into()))
    }
}

#[derive(Serialize)]
struct EigenOutput<'a> {
    config: RunConfig<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectrum: Option<sierpinski::spectrum::SpectrumResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw_eigenvalues: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decimation: Option<sierpinski::spectrum::DecimationReport>,
}

pub fn eigen(s: &Settings) -> Result<(), Failure> {
    let report = Reporter::new(s);
    let g = Arc::new(build_gasket(s.n(), s.m())?);
    let k = s.k.unwrap_or(5);
    let mut out = EigenOutput {
        config: RunConfig {
            command: "eigen",
            settings: s,
        },
        spectrum: None,
        raw_eigenvalues: None,
        decimation: None,
    };
    if s.raw {
        let vals: Vec<f64> = raw_dirichlet_spectrum(&g)?.into_iter().take(k).collect();
        for (i, v) in vals.iter().enumerate() {
            report.line(format!("raw_eigenvalue[{}]={v:e}", i + 1));
        }
        out.raw_eigenvalues = Some(vals);
    } else {
        let a_expr: Expr = sierpinski::exprs::parse_with(
            s.a(),
            sierpinski::exprs::VarScope::coordinates(s.n()),
        )?;
        let a = g
            .euclidean_coords()
            .iter()
            .map(|x| a_expr.eval_x(x))
            .collect::<Result<Vec<_>, _>>()?;
        let w = vertex_weights(&g);
        let spec = weighted_spectrum(&EnergyForm::new(g.clone()), &w, &a, k)?;
        for (i, (v, r)) in spec.eigenvalues.iter().zip(&spec.residuals).enumerate() {
            report.line(format!("eigenvalue[{}]={v:e} residual={r:e}", i + 1));
        }
        out.spectrum = Some(spec);
    }
    let mut decimation_ok = true;
    if s.decimation {
        let fine = build_gasket(s.n(), s.m() + 1)?;
        let rep = decimation_check(&g, &fine)?;
        report.line(format!(
            "decimation m={}->{} checked={} matched={} forbidden={} match_fraction={} max_mismatch={:e}",
            rep.coarse_level,
            rep.fine_level,
            rep.checked,
            rep.matched,
            rep.forbidden,
            rep.match_fraction,
            rep.max_mismatch
        ));
        decimation_ok = rep.passed();
        out.decimation = Some(rep);
    }
    write_json(s, &out)?;
    if decimation_ok {
        Ok(())
    } else {
        Err(Failure::Checks("spectral decimation mismatch".into()))
    }
}
