//! The `nodal` command line: one subcommand per analysis, JSON or CSV out.
//!
//! Every artifact carries the resolved configuration, so a file alone is
//! enough to reproduce it. Thread count comes from `NODAL_THREADS` and never
//! changes the output.

mod commands;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use nodal_core::Error as CoreError;

pub use commands::Outcome;

/// Environment variable that fixes the worker-thread count.
pub const THREADS_ENV: &str = "NODAL_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("{0}")]
    Internal(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Internal(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::BudgetExceeded { .. } | CoreError::TableTooLarge { .. } => {
                CliError::Budget(e.to_string())
            }
            CoreError::InvalidDimension { .. }
            | CoreError::InvalidNorm(_)
            | CoreError::NormTooLarge { .. }
            | CoreError::NoLatticePoints { .. }
            | CoreError::EvenNormInDimensionFour(_)
            | CoreError::UnknownTestFunction(_)
            | CoreError::MomentOrderOutOfRange(_)
            | CoreError::InsufficientData { .. }
            | CoreError::InvalidArgument(_) => CliError::Config(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Subcommand)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// List the frequency set.
    Lattice,
    /// Count 4- and 6-correlations; fit the exponent over an m-range.
    Census,
    /// Exact inner-product moments B_k.
    Moments,
    /// Exact torus integrals, trace integrals and the 1/N cancellation.
    Integrals,
    /// Pointwise two-point intensity and the singular-set measure.
    Kacrice,
    /// Monte Carlo nodal volume: mean and noise-corrected variance.
    Simulate,
    /// Predicted mean, variance main term and bound ladder.
    Predict,
    /// Everything for a single (d, m) in one JSON document.
    Report,
}

#[derive(Debug, Parser)]
#[command(name = "nodal", version, about = "Nodal volume of arithmetic random waves on the torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Dimension of the torus.
    #[arg(long, global = true, default_value_t = 4)]
    pub d: usize,
    /// Norm m = |μ|².
    #[arg(long, global = true, conflicts_with = "m_range")]
    pub m: Option<u64>,
    /// Inclusive range LO:HI of norms.
    #[arg(long, global = true)]
    pub m_range: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Waves per simulation batch.
    #[arg(long, global = true, default_value_t = 200)]
    pub samples: usize,
    /// Transect lines per wave.
    #[arg(long, global = true, default_value_t = 500)]
    pub lines: usize,
    /// Monte Carlo samples per norm-product estimate.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub mc_samples: u64,
    /// Points for pointwise K2 diagnostics.
    #[arg(long, global = true, default_value_t = 20)]
    pub points: usize,
    /// Uniform samples for the singular-set measure.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub singular_samples: u64,
    /// Work budget for anything involving 6-correlations.
    #[arg(long, global = true, default_value_t = 100_000_000)]
    pub c6_budget: u64,
    /// Cap on stored pair sums and materialised pairs.
    #[arg(long, global = true, default_value_t = nodal_core::correlations::DEFAULT_TABLE_CAP)]
    pub table_cap: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Allow even m in dimension four.
    #[arg(long, global = true)]
    pub no_strict: bool,
}

/// The resolved configuration, embedded in every artifact. The output path
/// is deliberately left out so that identical runs produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub d: usize,
    pub m_values: Vec<u64>,
    pub seed: u64,
    pub samples: usize,
    pub lines: usize,
    pub mc_samples: u64,
    pub points: usize,
    pub singular_samples: u64,
    pub c6_budget: u64,
    pub table_cap: u64,
    pub format: Format,
    pub strict: bool,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(u64, u64), CliError> {
    let bad = || CliError::Config(format!("m-range must look like LO:HI, got '{s}'"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

impl RunConfig {
    /// Validates the flags. In a range, norms without lattice points and
    /// (in strict mode) even norms in dimension four are skipped; a single
    /// such norm is an error.
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let strict = !cli.no_strict;
        if cli.d < 2 {
            return Err(CliError::Config(format!("d must be at least 2, got {}", cli.d)));
        }
        let positive = [
            ("samples", cli.samples as u64),
            ("lines", cli.lines as u64),
            ("mc-samples", cli.mc_samples),
            ("points", cli.points as u64),
            ("singular-samples", cli.singular_samples),
            ("c6-budget", cli.c6_budget),
            ("table-cap", cli.table_cap),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::Config(format!("{name} must be positive")));
        }
        let m_values = match (&cli.m, &cli.m_range) {
            (Some(m), _) => {
                if *m == 0 {
                    return Err(CliError::Config("m must be positive".into()));
                }
                vec![*m]
            }
            (None, Some(r)) => {
                let (lo, hi) = parse_range(r)?;
                (lo..=hi)
                    .filter(|&m| !(strict && cli.d == 4 && m % 2 == 0))
                    .filter(|&m| has_points(cli.d, m))
                    .collect()
            }
            (None, None) => return Err(CliError::Config("one of --m or --m-range is required".into())),
        };
        if m_values.is_empty() {
            return Err(CliError::Config("the m-range contains no usable norm".into()));
        }
        if cli.command == Command::Report && m_values.len() != 1 {
            return Err(CliError::Config("report takes a single --m".into()));
        }
        Ok(RunConfig {
            command: cli.command,
            d: cli.d,
            m_values,
            seed: cli.seed,
            samples: cli.samples,
            lines: cli.lines,
            mc_samples: cli.mc_samples,
            points: cli.points,
            singular_samples: cli.singular_samples,
            c6_budget: cli.c6_budget,
            table_cap: cli.table_cap,
            format: cli.format,
            strict,
            output: cli.output,
        })
    }

    pub fn mode(&self) -> nodal_core::EnumerationMode {
        if self.strict {
            nodal_core::EnumerationMode::Strict
        } else {
            nodal_core::EnumerationMode::Permissive
        }
    }
}

fn has_points(d: usize, m: u64) -> bool {
    !matches!(
        nodal_core::enumerate_frequencies(d, m, nodal_core::EnumerationMode::Permissive),
        Err(CoreError::NoLatticePoints { .. })
    )
}

/// Runs one configuration and returns the rendered artifact. A budget
/// shortfall still yields the artifact, flagged `"partial": true`.
pub fn render(config: &RunConfig) -> Result<(String, bool), CliError> {
    let outcome = commands::dispatch(config)?;
    let text = match config.format {
        Format::Json => {
            let doc = json!({
                "tool": "nodal",
                "version": env!("CARGO_PKG_VERSION"),
                "config": config,
                "partial": outcome.partial,
                "result": outcome.json,
            });
            let mut s = serde_json::to_string_pretty(&doc)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let body = outcome.csv.ok_or_else(|| {
                CliError::Config(format!("{:?} has no CSV form", config.command).to_lowercase())
            })?;
            let cfg = serde_json::to_string(config).map_err(|e| CliError::Internal(e.to_string()))?;
            format!("# config {cfg}\n# partial {}\n{body}", outcome.partial)
        }
    };
    Ok((text, outcome.partial))
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let (text, partial) = render(config)?;
    match &config.output {
        Some(path) => fs::write(path, &text)?,
        None => print!("{text}"),
    }
    if partial {
        return Err(CliError::Budget(
            "some quantities were skipped; see \"partial\" in the output".into(),
        ));
    }
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(())
}

pub fn run_cli(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let config = RunConfig::from_cli(cli)?;
    run(&config)
}
