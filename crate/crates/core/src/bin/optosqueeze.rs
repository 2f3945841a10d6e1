use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use optosqueeze::experiments::config::linspace;
use optosqueeze::experiments::{
    baseline_reservoir, evolve_run, figure_config, geff_scan, run_figure, squeeze_run, steady_run,
    sweep_systematic, sweep_thermal, write_emission, Emission, FigureId, Model, RunConfig,
};
use optosqueeze::Result;

#[derive(Parser)]
#[command(name = "optosqueeze", version, about = "Two-mode squeezing in three-mode cavity optomechanics")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key by dotted path, e.g. `--set system.g=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory (same as `--set output.dir=...`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track the eigenvalues of ℒ across Δ_a and extract g_eff numerically.
    GeffScan,
    /// Covariance trajectory on the configured time grid.
    Evolve {
        #[arg(long, default_value = "full")]
        model: Model,
    },
    /// Lyapunov steady state; fails with exit code 3 when the drift is unstable.
    Steady {
        #[arg(long, default_value = "reservoir")]
        model: Model,
    },
    /// Optimal-quadrature squeezing reports of the full model.
    Squeeze,
    /// Reproduce one figure's data (fig2a, fig2b, fig3, fig4, fig5, figB, figC1, figC2).
    Figure { id: String },
    /// S_lin(τ), S̃_lin(τ) over the `gamma` × `eta` axes.
    SweepError,
    /// S_lin at τ/2, τ, 3τ/2 over the `temp_k` axis.
    SweepThermal,
    /// Steady-state reservoir-engineering S and S′ over the `ratio` axis.
    Baseline,
}

fn config_for(cli: &Cli, base: RunConfig) -> Result<RunConfig> {
    let mut overrides = cli.overrides.clone();
    if let Some(dir) = &cli.out {
        overrides.push(format!("output.dir={}", serde_json::to_string(dir)?));
    }
    match &cli.config {
        Some(path) => RunConfig::load(path, &overrides),
        None => RunConfig::with_overrides(&base, &overrides),
    }
}

fn run(cli: &Cli) -> Result<(String, RunConfig, Emission)> {
    Ok(match &cli.command {
        Command::GeffScan => {
            let cfg = config_for(cli, figure_config(FigureId::FigC1))?;
            let em = geff_scan(&cfg, "geff_scan")?;
            ("geff-scan".into(), cfg, em)
        }
        Command::Evolve { model } => {
            let cfg = config_for(cli, RunConfig::default())?;
            let em = evolve_run(&cfg, *model)?;
            (format!("evolve --model {model}"), cfg, em)
        }
        Command::Steady { model } => {
            let base = if *model == Model::Reservoir {
                figure_config(FigureId::FigB)
            } else {
                RunConfig::default()
            };
            let cfg = config_for(cli, base)?;
            let em = steady_run(&cfg, *model)?;
            (format!("steady --model {model}"), cfg, em)
        }
        Command::Squeeze => {
            let cfg = config_for(cli, RunConfig::default())?;
            let em = squeeze_run(&cfg)?;
            ("squeeze".into(), cfg, em)
        }
        Command::Figure { id } => {
            let fig: FigureId = id.parse()?;
            let cfg = config_for(cli, figure_config(fig))?;
            let em = run_figure(fig, &cfg)?;
            (format!("figure {fig}"), cfg, em)
        }
        Command::SweepError => {
            let cfg = config_for(cli, RunConfig::default())?;
            let gammas = cfg.axis_values_or("gamma", &linspace(0.0, 0.2, 11));
            let etas = cfg.axis_values_or("eta", &[0.0]);
            let em = sweep_systematic(&cfg, &gammas, &etas);
            ("sweep-error".into(), cfg, em)
        }
        Command::SweepThermal => {
            let cfg = config_for(cli, figure_config(FigureId::Fig5))?;
            let temps = cfg.axis_values_or("temp_k", &linspace(0.0, 0.2, 11));
            let em = sweep_thermal(&cfg, &temps);
            ("sweep-thermal".into(), cfg, em)
        }
        Command::Baseline => {
            let cfg = config_for(cli, figure_config(FigureId::FigB))?;
            let ratios = cfg.axis_values_or("ratio", &linspace(0.1, 0.99, 90));
            let em = baseline_reservoir(&cfg, &ratios);
            ("baseline".into(), cfg, em)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = run(&cli).and_then(|(name, cfg, em)| {
        let manifest = write_emission(&name, &cfg, &em, started)?;
        Ok((cfg, manifest))
    });
    match result {
        Ok((cfg, manifest)) => {
            println!(
                "{}: {} files, {} cells ({} not ok) -> {}",
                manifest.command,
                manifest.files.len(),
                manifest.cells.len(),
                manifest.missing_cells(),
                cfg.output.dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
