//! Seeded invariant suites over one `(N, m)` configuration.
//!
//! Every suite draws from its own ChaCha8 stream derived from the seed, so
//! reports are reproducible bit for bit and suites can be run in any subset.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::{
    embedding_constant, graph_laplacian, harmonic_extension_onto, holder_check, holder_exponent,
    truncate, EnergyForm, Field, LipschitzMap, Truncation,
};
use crate::error::{Error, Result};
use crate::gasket::{build_gasket, refine, LevelGraph, Point};
use crate::measure::vertex_weights;

const SCHEMA: &str = "sierpinski.verify/1";

#[derive(Clone, Debug, Serialize)]
pub struct VerifyConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub m: u32,
    pub seed: u64,
    pub sobolev_fields: usize,
    pub extension_trials: usize,
    pub extension_depth: u32,
    pub truncation_fields: usize,
    pub sbp_fields: usize,
    /// Multiplies `(N+2)/N` in the renormalization; `None` is the true form.
    pub corrupt_energy_factor: Option<f64>,
}

impl VerifyConfig {
    pub fn new(n: usize, m: u32, seed: u64) -> Self {
        VerifyConfig {
            n,
            m,
            seed,
            sobolev_fields: 1000,
            extension_trials: 100,
            extension_depth: 3,
            truncation_fields: 200,
            sbp_fields: 50,
            corrupt_energy_factor: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub trials: usize,
    pub violations: usize,
    /// Worst observed value of the checked quantity (ratio or error).
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub schema: &'static str,
    pub config: VerifyConfig,
    pub sigma: f64,
    pub embedding_constant: f64,
    pub vertices: usize,
    pub checks: Vec<CheckReport>,
    pub passed: bool,
}

/// Graphs `V_0..V_m` with coarse-to-fine index maps and (possibly corrupted)
/// energy forms.
struct Tower {
    graphs: Vec<Arc<LevelGraph>>,
    maps: Vec<Vec<usize>>,
    forms: Vec<EnergyForm>,
}

impl Tower {
    fn new(n: usize, m: u32, scale: f64) -> Result<Tower> {
        let mut graphs = vec![Arc::new(build_gasket(n, 0)?)];
        let mut maps = Vec::new();
        for _ in 0..m {
            let (fine, map) = refine(graphs.last().unwrap())?;
            graphs.push(Arc::new(fine));
            maps.push(map);
        }
        let forms = graphs
            .iter()
            .map(|g| EnergyForm::with_factor_scale(g.clone(), scale))
            .collect();
        Ok(Tower { graphs, maps, forms })
    }

    fn top(&self) -> &EnergyForm {
        self.forms.last().unwrap()
    }

    fn extend(&self, level: usize, u: &Field) -> Result<Field> {
        harmonic_extension_onto(&self.graphs[level], &self.graphs[level + 1], &self.maps[level], u)
    }
}

fn stream(seed: u64, suite: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(suite);
    rng
}

fn random_values(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Alternates i.i.d. vertex values with harmonic extensions of random
/// coarse Dirichlet data, which are smoother and closer to extremal.
fn random_dirichlet(tower: &Tower, rng: &mut ChaCha8Rng, k: usize) -> Result<Field> {
    let m = tower.graphs.len() - 1;
    if k.is_multiple_of(2) || m == 0 {
        let g = &tower.graphs[m];
        return Ok(Field::new(g, random_values(rng, g.num_vertices()))?.into_dirichlet(g));
    }
    let start = rng.random_range(1..=m).min(m);
    let g = &tower.graphs[start];
    let mut u = Field::new(g, random_values(rng, g.num_vertices()))?.into_dirichlet(g);
    for level in start..m {
        u = tower.extend(level, &u)?;
    }
    Ok(u)
}

fn check(name: &str, trials: usize, violations: usize, worst: f64, tolerance: f64, detail: String) -> CheckReport {
    CheckReport {
        name: name.into(),
        passed: violations == 0,
        trials,
        violations,
        worst,
        tolerance,
        detail,
    }
}

fn measure_check(tower: &Tower) -> CheckReport {
    let g = tower.top().graph();
    let w = vertex_weights(g);
    let err = (w.total() - 1.0).abs();
    let positive = w.as_slice().iter().all(|&x| x > 0.0);
    let tol = 1e-14;
    check(
        "measure_total",
        1,
        usize::from(err > tol || !positive),
        err,
        tol,
        format!("|Σw − 1| = {err:e}, all weights positive: {positive}"),
    )
}

fn sobolev_checks(tower: &Tower, cfg: &VerifyConfig) -> Result<(CheckReport, CheckReport)> {
    let mut rng = stream(cfg.seed, 1);
    let (mut holder_bad, mut sup_bad) = (0, 0);
    let (mut holder_worst, mut sup_worst) = (0.0f64, 0.0f64);
    for k in 0..cfg.sobolev_fields {
        let u = random_dirichlet(tower, &mut rng, k)?;
        let rep = holder_check(tower.top(), &u)?;
        if !rep.ok {
            holder_bad += 1;
        }
        if rep.sup_ok == Some(false) {
            sup_bad += 1;
        }
        if rep.bound > 0.0 {
            holder_worst = holder_worst.max(rep.quotient / rep.bound);
            sup_worst = sup_worst.max(rep.sup_norm / rep.bound);
        }
    }
    let c = embedding_constant(cfg.n);
    Ok((
        check(
            "sobolev_holder",
            cfg.sobolev_fields,
            holder_bad,
            holder_worst,
            1.0,
            format!("max quotient/((2N+3)√W) over fields, 2N+3 = {c}"),
        ),
        check(
            "sup_norm",
            cfg.sobolev_fields,
            sup_bad,
            sup_worst,
            1.0,
            "max ‖u‖_∞/((2N+3)‖u‖) over fields".into(),
        ),
    ))
}

fn extension_check(tower: &Tower, cfg: &VerifyConfig) -> Result<CheckReport> {
    let m = tower.graphs.len() - 1;
    let depth = (cfg.extension_depth as usize).min(m);
    let tol = 1e-12;
    if depth == 0 {
        return Ok(check("harmonic_extension", 0, 0, 0.0, tol, "no refinement below level 0".into()));
    }
    let mut rng = stream(cfg.seed, 2);
    let start = m - depth;
    let (mut bad, mut worst) = (0, 0.0f64);
    let mut trials = 0;
    for k in 0..cfg.extension_trials {
        let g = &tower.graphs[start];
        let vals = if k == 0 && start == 0 {
            // the corner indicator of p_1
            let mut v = vec![0.0; g.num_vertices()];
            v[g.index_of(&Point::corner(cfg.n, 0)).unwrap()] = 1.0;
            v
        } else {
            random_values(&mut rng, g.num_vertices())
        };
        let mut u = Field::new(g, vals)?;
        let mut energy = tower.forms[start].energy(&u)?;
        for level in start..m {
            u = tower.extend(level, &u)?;
            let next = tower.forms[level + 1].energy(&u)?;
            let err = (next - energy).abs() / energy.max(1.0);
            worst = worst.max(err);
            trials += 1;
            if err > tol {
                bad += 1;
            }
            energy = next;
        }
    }
    Ok(check(
        "harmonic_extension",
        trials,
        bad,
        worst,
        tol,
        format!("|W_(k+1)(ext u) − W_k(u)| / max(1, W_k(u)), levels {start}..{m}"),
    ))
}

fn truncation_check(tower: &Tower, cfg: &VerifyConfig) -> Result<CheckReport> {
    let mut rng = stream(cfg.seed, 3);
    let catalog = [
        Truncation::Identity,
        Truncation::UnitCap,
        Truncation::Scale(2.0),
        Truncation::Clamp(-1.0, 1.0),
    ];
    let form = tower.top();
    let (mut bad, mut worst) = (0, 0.0f64);
    for k in 0..cfg.truncation_fields {
        let mut u = random_dirichlet(tower, &mut rng, k)?;
        // spread values past the clamp levels
        let stretch = rng.random_range(0.5..3.0);
        u = truncate(&u, &Truncation::Scale(stretch))?;
        let w = form.energy(&u)?;
        for h in &catalog {
            let l = h.lipschitz();
            let wh = form.energy(&truncate(&u, h)?)?;
            let excess = wh - l * l * w;
            if excess > 1e-12 * w.max(1.0) {
                bad += 1;
            }
            if w > 0.0 {
                worst = worst.max(wh / (l * l * w));
            }
        }
    }
    Ok(check(
        "truncation",
        cfg.truncation_fields * catalog.len(),
        bad,
        worst,
        1.0,
        "max W(h∘u)/(L²W(u)) over {identity, |min{t,1}|, 2t, clamp[−1,1]}".into(),
    ))
}

/// `𝒲_m(u, v) = −((N+2)/N)^m Σ_x (H_m u)(x) v(x)` for Dirichlet `v`, with
/// the renormalization computed independently of the form.
fn summation_by_parts_check(tower: &Tower, cfg: &VerifyConfig) -> Result<CheckReport> {
    let mut rng = stream(cfg.seed, 4);
    let form = tower.top();
    let g = form.graph();
    let n = cfg.n as f64;
    let factor = ((n + 2.0) / n).powi(cfg.m as i32);
    let tol = 1e-10;
    let (mut bad, mut worst) = (0, 0.0f64);
    for k in 0..cfg.sbp_fields {
        let u = Field::new(g, random_values(&mut rng, g.num_vertices()))?;
        let v = random_dirichlet(tower, &mut rng, k)?;
        let lhs = form.inner(&u, &v)?;
        let rhs: f64 = -factor
            * (0..g.num_vertices())
                .map(|x| graph_laplacian(g, u.values(), x) * v.values()[x])
                .sum::<f64>();
        let err = (lhs - rhs).abs() / lhs.abs().max(1.0);
        worst = worst.max(err);
        if err > tol {
            bad += 1;
        }
    }
    Ok(check(
        "summation_by_parts",
        cfg.sbp_fields,
        bad,
        worst,
        tol,
        "relative |𝒲_m(u,v) + ((N+2)/N)^m Σ H_m u·v|".into(),
    ))
}

/// Hölder and sup-norm checks alone, for sweeps over many configurations.
pub fn sobolev_suite(n: usize, m: u32, fields: usize, seed: u64) -> Result<(CheckReport, CheckReport)> {
    let tower = Tower::new(n, m, 1.0)?;
    let cfg = VerifyConfig {
        sobolev_fields: fields,
        ..VerifyConfig::new(n, m, seed)
    };
    sobolev_checks(&tower, &cfg)
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let scale = cfg.corrupt_energy_factor.unwrap_or(1.0);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "energy factor scale must be positive, got {scale}"
        )));
    }
    let tower = Tower::new(cfg.n, cfg.m, scale)?;
    let mut checks = vec![measure_check(&tower)];
    let (holder, sup) = sobolev_checks(&tower, cfg)?;
    checks.push(holder);
    checks.push(sup);
    checks.push(extension_check(&tower, cfg)?);
    checks.push(truncation_check(&tower, cfg)?);
    checks.push(summation_by_parts_check(&tower, cfg)?);
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        schema: SCHEMA,
        config: cfg.clone(),
        sigma: holder_exponent(cfg.n),
        embedding_constant: embedding_constant(cfg.n),
        vertices: tower.top().graph().num_vertices(),
        checks,
        passed,
    })
}
