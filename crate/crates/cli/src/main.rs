//! `sll` — a config-driven laboratory for the reduced energies of the
//! singular prescribed-curvature problem: hypothesis analysis, landscape
//! export, critical-point search, max-min runs, blow-up verification and
//! class certificates.
//!
//! Exit codes: 0 success, 1 error, 2 "no result" (e.g. no critical point
//! found, inconclusive certificate).

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CommandContext, Outcome};

#[derive(Parser)]
#[command(name = "sll", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for report.json and CSV exports.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override the search seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the stationarity tolerance from the config.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Downgrade unknown config keys from errors to warnings.
    #[arg(long, global = true)]
    lenient: bool,
    /// Exclude wall-clock timings so reports are byte-reproducible.
    #[arg(long, global = true)]
    no_timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the hypotheses and the topology of the positivity region.
    Analyze,
    /// Export the single-point energy landscape (Ψ, Φ, 𝒜) as CSV.
    Landscape,
    /// Locate and classify critical points of the reduced energy.
    Search,
    /// Run the retraction-based max-min deformation.
    Minmax,
    /// Assemble the bubble ansatz at a critical point and verify masses,
    /// residual and the Gauss-Bonnet balance.
    Verify,
    /// Check the sufficiently-convex/concave class certificate.
    Classes,
}

fn error_code(err: &anyhow::Error) -> &'static str {
    use sll_core::error::{EnergyError, GeometryError, ProblemError, SearchError, VerifyError};
    if let Some(e) = err.downcast_ref::<SearchError>() {
        return match e {
            SearchError::NotCritical { .. } => "not_critical",
            SearchError::DomainEscape { .. } => "domain_escape",
            SearchError::TopologyMismatch { .. } => "topology_mismatch",
            SearchError::NoFeasibleSplit { .. } => "no_feasible_split",
            SearchError::SetupInfeasible { .. } => "setup_infeasible",
        };
    }
    if let Some(e) = err.downcast_ref::<ProblemError>() {
        return match e {
            ProblemError::OnNodalLine { .. } => "on_nodal_line",
            ProblemError::AtSingularPoint { .. } => "at_singular_point",
            ProblemError::GridTooCoarse { .. } => "grid_too_coarse",
            _ => "semantic_error",
        };
    }
    if let Some(e) = err.downcast_ref::<VerifyError>() {
        return match e {
            VerifyError::ScaleTooLarge { .. } => "scale_too_large",
            VerifyError::BallsOverlap { .. } => "balls_overlap",
            VerifyError::DomainX { .. } => "domain_x",
            VerifyError::NormalizationFailed { .. } => "normalization_failed",
            VerifyError::Energy(_) => "out_of_domain",
        };
    }
    if let Some(e) = err.downcast_ref::<EnergyError>() {
        return match e {
            EnergyError::OutOfDomain { .. } => "out_of_domain",
            EnergyError::SOutOfBox { .. } => "s_out_of_box",
            EnergyError::BallNotInDomain { .. } => "ball_not_in_domain",
        };
    }
    if err.downcast_ref::<GeometryError>().is_some() {
        return "geometry_error";
    }
    let msg = format!("{err}");
    if msg.contains("config parse error") {
        "parse_error"
    } else if msg.contains("semantic error") {
        "semantic_error"
    } else {
        "error"
    }
}

fn run() -> anyhow::Result<Outcome> {
    let cli = Cli::parse();
    let config_path = cli
        .config
        .ok_or_else(|| anyhow::anyhow!("--config PATH is required"))?;
    let (config, warnings, text) = config::read_config_file(&config_path, cli.lenient)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let ctx = CommandContext {
        config: &config,
        config_text: &text,
        out_dir: &cli.out,
        seed: cli.seed,
        tol: cli.tol,
        no_timings: cli.no_timings,
        warnings,
    };
    match cli.command {
        Command::Analyze => commands::analyze(&ctx),
        Command::Landscape => commands::landscape(&ctx),
        Command::Search => commands::search(&ctx),
        Command::Minmax => commands::minmax(&ctx),
        Command::Verify => commands::verify(&ctx),
        Command::Classes => commands::classes(&ctx),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(Outcome::Done) => ExitCode::from(0),
        Ok(Outcome::NoResult) => ExitCode::from(2),
        Err(err) => {
            let payload = serde_json::json!({
                "error": {
                    "code": error_code(&err),
                    "message": format!("{err:#}"),
                }
            });
            eprintln!("{payload}");
            ExitCode::from(1)
        }
    }
}
