//! Command-line surface. Every subcommand's arguments serialize to JSON so
//! each output file can carry the exact run that produced it.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thermsearch::{EllChoice, ModelParams, ModelSpec};

use crate::error::CliError;
use crate::table::Format;

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[command(
    name = "thermsearch",
    version,
    about = "Database search as thermal relaxation of an N-level system",
    after_help = "Rates are reported in units of v, times in units of 1/v, energies as beta*energy.\n\
                  THERMSEARCH_THREADS sets the worker thread count."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Energy levels, spectral gap and ground-state dominance.
    Spectrum(SpectrumArgs),
    /// Equilibrium ground-state and error probabilities.
    Equilibrium(EquilibriumArgs),
    /// Propagate the master equation and find the hitting time.
    Relax(RelaxArgs),
    /// Stochastic trajectories compared with exact propagation.
    Gillespie(GillespieArgs),
    /// Relaxation time over a grid of system sizes.
    TauScan(TauScanArgs),
    /// Least-squares fit of a scan file.
    Fit(FitArgs),
    /// Total escape rates gamma_k for several system sizes.
    Gamma(GammaArgs),
    /// Ground-state population curves and hitting times for the N sweep.
    ReproduceFig1(Fig1Args),
    /// Relaxation-time scaling and its fits.
    ReproduceFig2(Fig2Args),
    /// Redraw a saved table (CSV) as an SVG chart.
    Plot(PlotArgs),
}

fn parse_size(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(0) => Err("system sizes must be positive".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Number of levels (database size)
    #[arg(long)]
    pub n: usize,
    /// Background strength: eta_k = a ln k
    #[arg(long, default_value_t = 1.2, allow_hyphen_values = true)]
    pub a: f64,
    /// Marker strength: the sought level is shifted by -b ln N
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub beta: f64,
    /// 1-based index of the sought element [default: N]
    #[arg(long)]
    pub ell: Option<usize>,
    /// Bare rate v
    #[arg(long, default_value_t = 1.0)]
    pub v: f64,
    /// Use the flat reference model instead: one level at beta*eps, N-1 at zero
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["a", "b", "beta", "ell"])]
    pub beta_eps: Option<f64>,
}

impl ModelArgs {
    pub fn spec(&self) -> Result<ModelSpec, CliError> {
        let spec = match self.beta_eps {
            Some(beta_eps) => {
                if beta_eps.is_nan() || beta_eps >= 0.0 {
                    return Err(CliError::Usage(format!(
                        "--beta-eps must be negative, got {beta_eps}"
                    )));
                }
                if self.n == 0 || !(self.v > 0.0 && self.v.is_finite()) {
                    return Err(CliError::Usage(
                        "need N >= 1 and a positive finite v".into(),
                    ));
                }
                ModelSpec::Degenerate {
                    n: self.n,
                    beta_eps,
                    v: self.v,
                }
            }
            None => {
                let p = ModelParams::new(
                    self.n,
                    self.a,
                    self.b,
                    self.beta,
                    self.ell.unwrap_or(self.n),
                )
                .with_rate(self.v);
                validate_params(&p)?;
                ModelSpec::Logarithmic(p)
            }
        };
        Ok(spec)
    }
}

fn validate_params(p: &ModelParams) -> Result<(), CliError> {
    p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !p.is_gapped() {
        return Err(CliError::Usage(format!(
            "need b > a for the sought level to be the ground state (a = {}, b = {})",
            p.a, p.b
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Output file [default: stdout]
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write the rate matrix as "k l v_kl" lines (1-based sorted ranks)
    #[arg(long)]
    pub dump_rates: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EquilibriumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// List the whole Gibbs distribution instead of the summary row
    #[arg(long)]
    pub levels: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartKind {
    /// p_k = 1/N
    Uniform,
    /// All weight on the highest level
    Top,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RelaxArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// End of the time grid, in units of 1/v
    #[arg(long, default_value_t = 100.0)]
    pub t_max: f64,
    /// Number of time steps
    #[arg(long, default_value_t = 400)]
    pub steps: usize,
    /// Ground-population threshold for the hitting time
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = StartKind::Uniform)]
    pub start: StartKind,
    /// Write every level's population, not just p1
    #[arg(long)]
    pub full: bool,
    /// SVG chart of p1(t)
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GillespieArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of trajectories
    #[arg(long, default_value_t = 100_000)]
    pub traj: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated sampling times, in units of 1/v
    #[arg(long, value_delimiter = ',', default_value = "2,5,10")]
    pub times: Vec<f64>,
    #[arg(long, value_enum, default_value_t = StartKind::Uniform)]
    pub start: StartKind,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EllArg {
    First,
    Middle,
    Last,
}

impl From<EllArg> for EllChoice {
    fn from(e: EllArg) -> Self {
        match e {
            EllArg::First => EllChoice::First,
            EllArg::Middle => EllChoice::Middle,
            EllArg::Last => EllChoice::Last,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = 1.2, allow_hyphen_values = true)]
    pub a_beta: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub b_beta: f64,
    /// Position of the sought element as N varies
    #[arg(long, value_enum, default_value_t = EllArg::Last)]
    pub ell: EllArg,
    /// Comma-separated system sizes
    #[arg(long, value_parser = parse_size, value_delimiter = ',', default_value = "500,1000,1500,2000,2500,3000,3500")]
    pub n_grid: Vec<usize>,
    /// Flat reference model at this beta*eps instead of the logarithmic one
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["a_beta", "b_beta", "ell"])]
    pub beta_eps: Option<f64>,
}

impl GridArgs {
    pub fn specs(&self) -> Result<Vec<ModelSpec>, CliError> {
        if let Some(beta_eps) = self.beta_eps {
            if beta_eps.is_nan() || beta_eps >= 0.0 {
                return Err(CliError::Usage(format!(
                    "--beta-eps must be negative, got {beta_eps}"
                )));
            }
            return Ok(self
                .n_grid
                .iter()
                .map(|&n| ModelSpec::Degenerate {
                    n,
                    beta_eps,
                    v: 1.0,
                })
                .collect());
        }
        model_grid(self.a_beta, self.b_beta, self.ell.into(), &self.n_grid)
    }
}

pub fn model_grid(
    a_beta: f64,
    b_beta: f64,
    ell: EllChoice,
    ns: &[usize],
) -> Result<Vec<ModelSpec>, CliError> {
    let grid = thermsearch::log_grid(a_beta, b_beta, ell, ns);
    for spec in &grid {
        if let ModelSpec::Logarithmic(p) = spec {
            validate_params(p)?;
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TauScanArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Fit overlaid on the chart
    #[arg(long, value_enum, default_value_t = FitKind::Log)]
    pub fit: FitKind,
    /// SVG chart of tau v against ln N
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    Log,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitColumn {
    TauV,
    HittingTimeV,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Scan file written by tau-scan or a reproduce command (CSV)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FitKind::Log)]
    pub model: FitKind,
    #[arg(long, value_enum, default_value_t = FitColumn::TauV)]
    pub column: FitColumn,
    /// Only rows whose `series` column equals this
    #[arg(long)]
    pub series: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PlotArgs {
    /// Chart kind: p1 (relax or fig1_p1 table), gamma (gamma table) or tau (scan table)
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub input: PathBuf,
    /// SVG file to write
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Threshold line on p1 charts
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Overlay a fit on each tau series
    #[arg(long, value_enum)]
    pub fit: Option<FitKind>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GammaArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// SVG chart of the profiles
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Fig1Args {
    /// Directory for the data files and charts
    #[arg(long, default_value = "fig1")]
    pub out_dir: PathBuf,
    #[arg(long, value_parser = parse_size, value_delimiter = ',', default_value = "500,1000,1500,2000,2500,3000,3500")]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 1.2)]
    pub a_beta: f64,
    #[arg(long, default_value_t = 2.0)]
    pub b_beta: f64,
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
    #[arg(long, default_value_t = 100.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 400)]
    pub steps: usize,
    /// Gillespie trajectories at the smallest N (0 disables the check)
    #[arg(long, default_value_t = 0)]
    pub traj: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Log,
    Power,
    All,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Fig2Args {
    #[arg(long, value_enum, default_value_t = Regime::All)]
    pub regime: Regime,
    #[arg(long, default_value = "fig2")]
    pub out_dir: PathBuf,
    /// Sizes for the logarithmic regime
    #[arg(long, value_parser = parse_size, value_delimiter = ',', default_value = "500,1000,1500,2000,2500,3000,3500")]
    pub n_grid: Vec<usize>,
    /// Sizes for the power-law regime
    #[arg(long, value_parser = parse_size, value_delimiter = ',', default_value = "100,200,500,1000,1500,2000,2500,3000,3500")]
    pub power_grid: Vec<usize>,
    /// Skip the (3,4), (1.2,4), (1.2,5) comparison curves
    #[arg(long)]
    pub no_comparison: bool,
    /// Recorded in the metadata; the scans themselves are deterministic
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// What gets embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    #[serde(flatten)]
    pub command: Command,
}

impl RunConfig {
    pub fn new(command: &Command) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CliError> {
        serde_json::from_str(s).map_err(|e| CliError::Parse(format!("run config: {e}")))
    }
}
