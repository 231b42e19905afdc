use calpath_cli::commands;
use calpath_cli::config::ExperimentConfig;
use calpath_core::NonconformityKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "calpath",
    about = "Conformal path planning experiments: calibrate thresholds, evaluate coverage, \
             sweep the similarity gate, ablate stages, and run closed-loop suites",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Start from a named suite preset (coverage, ablation, closedloop)
    /// instead of the bare defaults.
    #[arg(long)]
    preset: Option<String>,
    /// TOML experiment config; omitted fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the alpha grid.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Override the delta grid.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Override the non-conformity score kinds (LAC, APS, RAPS).
    #[arg(long, value_delimiter = ',')]
    score_kinds: Option<Vec<String>>,
    /// Override the seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override the candidate count.
    #[arg(long)]
    k: Option<usize>,
    /// Override the calibration pool size.
    #[arg(long)]
    n_cal: Option<usize>,
    /// Override the test pool size.
    #[arg(long)]
    n_test: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => match self.preset.as_deref() {
                Some("coverage") => ExperimentConfig::coverage_suite(),
                Some("ablation") => ExperimentConfig::ablation_suite(),
                Some("closedloop") => ExperimentConfig::closedloop_suite(),
                Some(other) => {
                    return Err(anyhow::anyhow!(
                        "unknown preset {other:?}; expected coverage, ablation, or closedloop"
                    ))
                }
                None => ExperimentConfig::default(),
            },
        };
        if self.config.is_some() && self.preset.is_some() {
            return Err(anyhow::anyhow!(
                "--preset and --config are mutually exclusive"
            ));
        }
        if let Some(alphas) = &self.alphas {
            cfg.alphas = alphas.clone();
        }
        if let Some(deltas) = &self.deltas {
            cfg.deltas = deltas.clone();
        }
        if let Some(kinds) = &self.score_kinds {
            cfg.score_kinds = kinds
                .iter()
                .map(|k| match k.to_ascii_uppercase().as_str() {
                    "LAC" => Ok(NonconformityKind::Lac),
                    "APS" => Ok(NonconformityKind::Aps),
                    "RAPS" => Ok(NonconformityKind::Raps),
                    other => Err(anyhow::anyhow!("unknown score kind {other:?}")),
                })
                .collect::<anyhow::Result<_>>()?;
        }
        if let Some(seeds) = &self.seeds {
            cfg.seeds = seeds.clone();
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(n_cal) = self.n_cal {
            cfg.n_cal = n_cal;
        }
        if let Some(n_test) = self.n_test {
            cfg.n_test = n_test;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the calibration pool, score it, persist thresholds.
    Calibrate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output run directory.
        #[arg(long, default_value = "runs/calibrate")]
        out: PathBuf,
    },
    /// Coverage / set-size / delegation metrics on a held-out pool.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Thresholds artifact produced by `calibrate`.
        #[arg(long, default_value = "runs/calibrate/thresholds.json")]
        thresholds: PathBuf,
        #[arg(long, default_value = "runs/evaluate")]
        out: PathBuf,
    },
    /// Delegation rate over the delta grid, per alpha.
    SweepDelta {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "runs/sweep-delta")]
        out: PathBuf,
    },
    /// Collision rates for stage-1 / stages-1+3 / full pipelines.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "runs/ablate")]
        out: PathBuf,
    },
    /// The 30-episode closed-loop suite, pipeline vs greedy baseline.
    Closedloop {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "runs/closedloop")]
        out: PathBuf,
    },
    /// Re-render a run directory as one readable summary.
    Report {
        /// Run directory produced by any other command.
        #[arg(long)]
        run: PathBuf,
        /// Also write the summary to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Calibrate { config, out } => {
            commands::calibrate::run(&config.resolve()?, &out)?;
        }
        Command::Evaluate {
            config,
            thresholds,
            out,
        } => {
            commands::evaluate::run(&config.resolve()?, &thresholds, &out)?;
        }
        Command::SweepDelta { config, out } => {
            commands::sweep::run(&config.resolve()?, &out)?;
        }
        Command::Ablate { config, out } => {
            commands::ablate::run(&config.resolve()?, &out)?;
        }
        Command::Closedloop { config, out } => {
            commands::closedloop::run(&config.resolve()?, &out)?;
        }
        Command::Report { run, out } => {
            commands::report::run(&run, out.as_deref())?;
        }
    }
    Ok(())
}
