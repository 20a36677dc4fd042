//! Acceptance criteria for the toolkit. Each criterion prints one line
//! `PASS|FAIL criterion <k> (<name>): <detail>`; the process exits nonzero
//! if any criterion fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use sierpinski::energy::{harmonic_extension, truncate, LipschitzMap, Truncation};
use sierpinski::gasket::Point;
use sierpinski::solver::{
    lambda_star, radius_for, solve, sweep, GammaGrid, NewtonOptions, Problem, ProblemSpec,
    SolveOptions, SweepOptions,
};
use sierpinski::spectrum::{decimation_check, weighted_spectrum};
use sierpinski::verify::sobolev_suite;
use sierpinski::{build_gasket, vertex_weights, EnergyForm, Field, LevelGraph};

const SOBOLEV_BUDGET: Duration = Duration::from_secs(60);
const SWEEP_BUDGET: Duration = Duration::from_secs(300);
const ACCEPTANCE_SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

type Criterion = fn() -> Result<Outcome, String>;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 9] = [
        ("sobolev inequality", sobolev),
        ("threshold of the exponential example", threshold),
        ("lambda sweep", lambda_sweep),
        ("harmonic extension", extension),
        ("interval oracle", interval),
        ("gradient and newton", derivatives),
        ("truncation", truncation),
        ("spectral decimation", decimation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let tag = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {} ({name}): {}", k + 1, outcome.detail);
        failed += usize::from(!outcome.passed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn random_dirichlet(g: &LevelGraph, rng: &mut impl Rng, amp: f64) -> Field {
    let vals = (0..g.num_vertices())
        .map(|v| if g.is_boundary(v) { 0.0 } else { rng.random_range(-amp..amp) })
        .collect();
    Field::dirichlet(g, vals).expect("boundary is zero")
}

fn shifted(g: &LevelGraph, u: &Field, v: &Field, s: f64) -> Field {
    let vals = u.values().iter().zip(v.values()).map(|(a, b)| a + s * b).collect();
    Field::dirichlet(g, vals).expect("boundary is zero")
}

fn sierpinski_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sierpinski"))
}

fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("sierpinski-acceptance-{}-{name}", std::process::id()))
}

fn run_json(args: &[&str], name: &str) -> Result<Value, String> {
    let path = scratch(name);
    let out = sierpinski_bin()
        .args(args)
        .arg("--out")
        .arg(&path)
        .output()
        .map_err(err)?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    let text = std::fs::read_to_string(&path).map_err(err)?;
    let _ = std::fs::remove_file(&path);
    serde_json::from_str(&text).map_err(err)
}

fn sobolev() -> Result<Outcome, String> {
    let start = Instant::now();
    let mut violations = 0;
    let mut trials = 0;
    let mut worst: f64 = 0.0;
    for n in 2..=4 {
        for m in 1..=6 {
            let (holder, _) = sobolev_suite(n, m, 1000, ACCEPTANCE_SEED).map_err(err)?;
            violations += holder.violations;
            trials += holder.trials;
            worst = worst.max(holder.worst);
        }
    }
    let elapsed = start.elapsed();
    Ok(Outcome::new(
        violations == 0 && elapsed < SOBOLEV_BUDGET,
        format!(
            "{trials} fields, {violations} violations, worst quotient/bound {worst:.4}, {:.1}s (budget {}s)",
            elapsed.as_secs_f64(),
            SOBOLEV_BUDGET.as_secs()
        ),
    ))
}

/// `max_γ γ² / (2·9²·(e^γ − 1))` by brute-force grid search.
fn exponential_threshold_oracle() -> f64 {
    (1..=1_000_000)
        .map(|k| {
            let gamma = k as f64 * 1e-5;
            gamma * gamma / (162.0 * gamma.exp_m1())
        })
        .fold(0.0, f64::max)
}

fn threshold() -> Result<Outcome, String> {
    let json = run_json(&["lambda-star", "--N", "3", "--a=-1", "--g=-1", "--f", "exp(u)"], "lambda-star.json")?;
    let exact = json["lambda_star"]["value"].as_f64().ok_or("no finite lambda_star")?;
    let bound = json["lambda_star_bound"]["value"].as_f64().ok_or("no lambda_star_bound")?;
    let oracle = exponential_threshold_oracle();
    let closed = 2.0 * (-2f64).exp() / 81.0;
    let bound_digits = format!("{bound:.3e}") == format!("{:.3e}", 3.3417e-3)
        && (bound - closed).abs() <= 1e-12 * closed;
    let exact_rel = (exact - oracle).abs() / oracle;
    let passed = bound_digits && exact_rel <= 1e-3 && exact >= bound;
    Ok(Outcome::new(
        passed,
        format!("bound {bound:.5e} (2e^-2/81 = {closed:.5e}), exact {exact:.5e} vs grid oracle {oracle:.5e} (rel {exact_rel:.1e}), exact >= bound: {}", exact >= bound),
    ))
}

fn lambda_sweep() -> Result<Outcome, String> {
    let start = Instant::now();
    let p = Problem::new(&ProblemSpec::exponential_example(3, 4, 0.0)).map_err(err)?;
    let bound = 2.0 * (-2f64).exp() / 81.0;
    let lambdas: Vec<f64> = (1..=9).map(|k| 0.1 * k as f64 * bound).collect();
    let gamma_bar = lambda_star(&p, &GammaGrid::default()).map_err(err)?.gamma;
    let res = sweep(&p, &lambdas, radius_for(3, gamma_bar), &SweepOptions::default()).map_err(err)?;
    let elapsed = start.elapsed();

    let nontrivial = res.points.iter().all(|q| q.norm_u > 1e-8);
    let negative = res.all_negative();
    let decreasing = res.energies_strictly_decreasing();
    let ratio = res.norm_ratio().unwrap_or(f64::NAN);
    // the smallest λ must carry less than 10% of the norm at the largest
    let shrinking = res.norms_monotone() && ratio < 0.1;
    let in_time = elapsed < SWEEP_BUDGET;
    Ok(Outcome::new(
        nontrivial && negative && decreasing && shrinking && in_time && res.all_converged(),
        format!(
            "(a) nontrivial {nontrivial}; (b) I<0 {negative}, strictly decreasing {decreasing}; \
             (c) norm ratio smallest/largest {ratio:.6} (needs < 0.1); converged {}; {:.1}s",
            res.all_converged(),
            elapsed.as_secs_f64()
        ),
    ))
}

fn extension() -> Result<Outcome, String> {
    let g0 = build_gasket(3, 0).map_err(err)?;
    let corners: Vec<Point> = (0..3).map(|i| Point::corner(3, i)).collect();
    let mut vals = vec![0.0; 3];
    vals[g0.index_of(&corners[0]).ok_or("corner missing")?] = 1.0;
    let u0 = Field::new(&g0, vals).map_err(err)?;
    let (g1, u1) = harmonic_extension(&g0, &u0).map_err(err)?;
    let mut mid_err: f64 = 0.0;
    for (i, j, want) in [(0, 1, 0.4), (0, 2, 0.4), (1, 2, 0.2)] {
        let x = g1
            .index_of(&Point::midpoint(&corners[i], &corners[j]))
            .ok_or("midpoint missing")?;
        mid_err = mid_err.max((u1.values()[x] - want).abs());
    }
    let w0 = EnergyForm::new(Arc::new(g0.clone())).energy(&u0).map_err(err)?;
    let w1 = EnergyForm::new(Arc::new(g1)).energy(&u1).map_err(err)?;
    let unit_err = (w0 - 2.0).abs().max((w1 - 2.0).abs());

    let mut rng = ChaCha8Rng::seed_from_u64(ACCEPTANCE_SEED);
    let mut random_err: f64 = 0.0;
    for _ in 0..100 {
        let mut g = g0.clone();
        let mut u = Field::new(&g, (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).map_err(err)?;
        let base = EnergyForm::new(Arc::new(g.clone())).energy(&u).map_err(err)?;
        for _ in 0..3 {
            let (fine, v) = harmonic_extension(&g, &u).map_err(err)?;
            let w = EnergyForm::new(Arc::new(fine.clone())).energy(&v).map_err(err)?;
            random_err = random_err.max((w - base).abs());
            g = fine;
            u = v;
        }
    }
    Ok(Outcome::new(
        mid_err <= 1e-12 && unit_err <= 1e-12 && random_err <= 1e-12,
        format!("midpoint error {mid_err:.1e}, |W_1 - 2| and |W_0 - 2| {unit_err:.1e}, random 3-step drift {random_err:.1e}"),
    ))
}

fn interval() -> Result<Outcome, String> {
    let spec = ProblemSpec::parse(2, 6, "0", "-1", "1", Some("u"), 2.0).map_err(err)?;
    let p = Problem::new(&spec).map_err(err)?;
    let opts = SolveOptions {
        record_trace: false,
        ..SolveOptions::default()
    };
    let res = solve(&p, f64::INFINITY, &opts, &NewtonOptions::default()).map_err(err)?;
    let coords = p.graph().euclidean_coords();
    let fixture_err = coords
        .iter()
        .zip(res.u.values())
        .map(|(x, u)| (u - x[0] * (1.0 - x[0])).abs())
        .fold(0.0, f64::max);

    let g = build_gasket(2, 8).map_err(err)?;
    let w = vertex_weights(&g);
    let a = vec![-1.0; g.num_vertices()];
    let spec = weighted_spectrum(&EnergyForm::new(Arc::new(g)), &w, &a, 1).map_err(err)?;
    let pi2 = std::f64::consts::PI.powi(2);
    let rel = (spec.eigenvalues[0] - pi2).abs() / pi2;
    Ok(Outcome::new(
        fixture_err <= 1e-10 && rel <= 0.01,
        format!("max |u - x(1-x)| {fixture_err:.1e}, lambda_1 {:.6} vs pi^2 (rel {rel:.1e})", spec.eigenvalues[0]),
    ))
}

fn derivative_specs() -> Result<Vec<ProblemSpec>, String> {
    Ok(vec![
        ProblemSpec::exponential_example(3, 3, 2e-3),
        ProblemSpec::parse(2, 5, "-1 - x1", "-(1 + x1^2)", "u^3", None, 0.7).map_err(err)?,
        ProblemSpec::parse(3, 3, "-2", "-1", "sin(u)", Some("1 - cos(u)"), 1.3).map_err(err)?,
        ProblemSpec::parse(4, 2, "-x1 - 1", "-1", "u + u^2", None, 0.2).map_err(err)?,
    ])
}

fn derivatives() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(ACCEPTANCE_SEED);
    let specs = derivative_specs()?;
    let mut worst_fd: f64 = 0.0;
    for k in 0..20 {
        let p = Problem::new(&specs[k % specs.len()]).map_err(err)?;
        let g = p.graph();
        let u = random_dirichlet(g, &mut rng, 0.8);
        let v = random_dirichlet(g, &mut rng, 1.0);
        let grad = p.gradient(&u).map_err(err)?;
        let analytic: f64 = grad.values().iter().zip(v.values()).map(|(a, b)| a * b).sum();
        let h = 1e-5;
        let up = p.i_lambda(&shifted(g, &u, &v, h)).map_err(err)?;
        let down = p.i_lambda(&shifted(g, &u, &v, -h)).map_err(err)?;
        let fd = (up - down) / (2.0 * h);
        worst_fd = worst_fd.max((fd - analytic).abs() / analytic.abs().max(1e-300));
    }

    let bound = 2.0 * (-2f64).exp() / 81.0;
    let mut fixtures = vec![
        (ProblemSpec::parse(2, 6, "0", "-1", "1", Some("u"), 2.0).map_err(err)?, f64::INFINITY),
        (ProblemSpec::exponential_example(2, 6, 1e-3), radius_for(2, 2.0)),
    ];
    for frac in [0.1, 0.5, 0.9] {
        fixtures.push((ProblemSpec::exponential_example(3, 4, frac * bound), radius_for(3, 2.0)));
    }
    let opts = SolveOptions {
        record_trace: false,
        ..SolveOptions::default()
    };
    let newton = NewtonOptions::default();
    let mut worst_grad: f64 = 0.0;
    for (spec, r) in &fixtures {
        let p = Problem::new(spec).map_err(err)?;
        let res = solve(&p, *r, &opts, &newton).map_err(err)?;
        worst_grad = worst_grad.max(res.grad_norm);
    }
    Ok(Outcome::new(
        worst_fd <= 1e-6 && worst_grad <= 1e-12,
        format!(
            "20 pairs, worst relative gradient error {worst_fd:.1e}; worst grad_norm after newton over {} fixtures {worst_grad:.1e}",
            fixtures.len()
        ),
    ))
}

fn truncation() -> Result<Outcome, String> {
    let g = build_gasket(3, 4).map_err(err)?;
    let form = EnergyForm::new(Arc::new(g.clone()));
    let catalog = [
        Truncation::Identity,
        Truncation::UnitCap,
        Truncation::Scale(2.0),
        Truncation::Clamp(-1.0, 1.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(ACCEPTANCE_SEED);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let u = random_dirichlet(&g, &mut rng, 2.0);
        let base = form.energy(&u).map_err(err)?;
        for h in &catalog {
            let t = form.energy(&truncate(&u, h).map_err(err)?).map_err(err)?;
            let allowed = h.lipschitz().powi(2) * base;
            worst = worst.max(t / allowed);
            violations += usize::from(t > allowed * (1.0 + 1e-12));
        }
    }
    Ok(Outcome::new(
        violations == 0,
        format!("200 fields x {} maps, {violations} violations, worst ratio {worst:.6}", catalog.len()),
    ))
}

fn decimation() -> Result<Outcome, String> {
    let g2 = build_gasket(3, 2).map_err(err)?;
    let g3 = build_gasket(3, 3).map_err(err)?;
    let rep = decimation_check(&g2, &g3).map_err(err)?;
    Ok(Outcome::new(
        rep.passed(),
        format!(
            "{} level-3 eigenvalues checked, {} matched, {} forbidden, max mismatch {:.1e}",
            rep.checked, rep.matched, rep.forbidden, rep.max_mismatch
        ),
    ))
}

fn determinism() -> Result<Outcome, String> {
    let mut files = Vec::new();
    for run in 0..2 {
        let path = scratch(&format!("verify-{run}.json"));
        let out = sierpinski_bin()
            .args(["verify", "--N", "3", "--m", "4", "--seed", "7", "--out"])
            .arg(&path)
            .output()
            .map_err(err)?;
        if !out.status.success() {
            return Err(format!("verify exited with {}", out.status));
        }
        files.push(std::fs::read(&path).map_err(err)?);
        let _ = std::fs::remove_file(&path);
    }
    Ok(Outcome::new(
        files[0] == files[1] && !files[0].is_empty(),
        format!("two verify reports of {} bytes, identical: {}", files[0].len(), files[0] == files[1]),
    ))
}
