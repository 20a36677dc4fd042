use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

/// Flags shared by every subcommand. Each may also come from `--config`;
/// a flag given on the command line wins over the file.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Number of corners (gasket in R^{N-1})
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Level of the vertex graph V_m
    #[arg(long)]
    pub m: Option<u32>,
    /// Coefficient a(x1, .., x_{N-1})
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Coefficient g(x1, .., x_{N-1})
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<String>,
    /// Nonlinearity f(u)
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
    /// Closed-form primitive F(u) with F(0) = 0; tabulated when omitted
    #[arg(long = "F", allow_hyphen_values = true)]
    #[serde(rename = "F")]
    pub big_f: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated ascending λ values for `sweep`
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Upper end of the γ grid for λ*
    #[arg(long)]
    pub gamma_max: Option<f64>,
    #[arg(long)]
    pub gamma_points: Option<usize>,
    /// Box half-width γ̄ defining the sublevel radius (default: the λ* maximizer)
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; `-` writes JSON to stdout
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Gradient tolerance of the descent (relative to max(1, |I|))
    #[arg(long)]
    pub tol: Option<f64>,
    /// Number of eigenpairs
    #[arg(short = 'k')]
    pub k: Option<usize>,
    /// Random fields in the Sobolev suite of `verify`
    #[arg(long)]
    pub fields: Option<usize>,
    /// Scale the energy renormalization (fault injection for `verify`)
    #[arg(long)]
    pub corrupt_energy_factor: Option<f64>,
    /// Exit 0 even when a solve does not converge
    #[arg(long)]
    pub allow_nonconverged: bool,
    /// Also run the spectral decimation check (`eigen`, N = 3)
    #[arg(long)]
    pub decimation: bool,
    /// Report raw graph-Laplacian eigenvalues instead (`eigen`)
    #[arg(long)]
    pub raw: bool,
    /// JSON file with any of the settings above
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Settings {
    /// Fills every unset field from `file`.
    pub fn merge_under(self, file: Settings) -> Settings {
        Settings {
            n: self.n.or(file.n),
            m: self.m.or(file.m),
            a: self.a.or(file.a),
            g: self.g.or(file.g),
            f: self.f.or(file.f),
            big_f: self.big_f.or(file.big_f),
            lambda: self.lambda.or(file.lambda),
            lambda_grid: self.lambda_grid.or(file.lambda_grid),
            gamma_max: self.gamma_max.or(file.gamma_max),
            gamma_points: self.gamma_points.or(file.gamma_points),
            gamma: self.gamma.or(file.gamma),
            seed: self.seed.or(file.seed),
            out: self.out.or(file.out),
            tol: self.tol.or(file.tol),
            k: self.k.or(file.k),
            fields: self.fields.or(file.fields),
            corrupt_energy_factor: self.corrupt_energy_factor.or(file.corrupt_energy_factor),
            allow_nonconverged: self.allow_nonconverged || file.allow_nonconverged,
            decimation: self.decimation || file.decimation,
            raw: self.raw || file.raw,
            config: self.config,
        }
    }

    pub fn load(path: &Path) -> Result<Settings, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }

    /// Replaces unset core fields with their defaults.
    pub fn resolved(self) -> Settings {
        Settings {
            n: Some(self.n()),
            m: Some(self.m()),
            a: Some(self.a().to_owned()),
            g: Some(self.g().to_owned()),
            f: Some(self.f().to_owned()),
            seed: Some(self.seed()),
            ..self
        }
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(3)
    }

    pub fn m(&self) -> u32 {
        self.m.unwrap_or(4)
    }

    pub fn a(&self) -> &str {
        self.a.as_deref().unwrap_or("-1")
    }

    pub fn g(&self) -> &str {
        self.g.as_deref().unwrap_or("-1")
    }

    pub fn f(&self) -> &str {
        self.f.as_deref().unwrap_or("exp(u)")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(42)
    }
}

/// The fully resolved run, embedded in every JSON output.
#[derive(Serialize)]
pub struct RunConfig<'a> {
    pub command: &'a str,
    #[serde(flatten)]
    pub settings: &'a Settings,
}
