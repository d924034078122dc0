//! `risnoma`: runs the energy-efficiency experiments and writes CSV tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use risnoma::config::{parse_config, Framework, ScenarioConfig};
use risnoma::experiments::{convergence_trace, run_paired, sweep_power, sweep_qos, trial_seed, SweepResult};
use risnoma::report::{emit_csv, fmt_num};

mod plot;

#[derive(Parser, Debug)]
#[command(name = "risnoma", version, about = "Energy-efficiency experiments for RIS-assisted NOMA LEO downlinks")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (TOML); missing keys take their defaults
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for CSV (and SVG) output
    #[arg(long, global = true, value_name = "PATH", default_value = "results")]
    out_dir: PathBuf,

    /// Master seed; trial k uses seed ^ k
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Monte Carlo trials per operating point
    #[arg(long, global = true, value_name = "N")]
    trials: Option<usize>,

    /// Frameworks to run, comma separated
    /// (proposed, benchmark_fixed_phase, conventional_no_ris)
    #[arg(long, global = true, value_name = "NAME,...", value_delimiter = ',')]
    framework: Option<Vec<Framework>>,

    /// Worker threads (default: one per core)
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Also render SVG line charts next to the CSVs
    #[arg(long, global = true)]
    emit_plots: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean EE per outer iteration of the proposed scheme for several RIS sizes
    Convergence {
        /// RIS element counts (default from the config sweeps)
        #[arg(long, value_name = "M,...", value_delimiter = ',')]
        elements: Option<Vec<usize>>,
    },
    /// EE versus the satellite power budget
    SweepPower {
        /// Power grid in dBm (default from the config sweeps)
        #[arg(long, value_name = "DBM,...", value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// EE versus the per-terminal QoS rate
    SweepQos {
        /// QoS grid in bit/s (default from the config sweeps)
        #[arg(long, value_name = "BPS,...", value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// One channel draw solved by every selected framework
    SingleTrial {
        /// Trial index combined with the master seed
        #[arg(long, value_name = "K", default_value_t = 0)]
        index: u64,
    },
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(p) => parse_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if let Some(f) = &common.framework {
        cfg.frameworks = f.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_sweep(res: &SweepResult, dir: &Path, stem: &str, x_label: &str, x_scale: f64, plots: bool) -> Result<()> {
    let csv = dir.join(format!("{stem}.csv"));
    emit_csv(res, &csv)?;
    println!("{}", csv.display());
    if plots {
        let rows = res.rows()?;
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for r in rows {
            let name = r.framework.name().to_string();
            let pt = (r.param_value * x_scale, r.stats.mean);
            match series.iter_mut().find(|(n, _)| *n == name) {
                Some((_, v)) => v.push(pt),
                None => series.push((name, vec![pt])),
            }
        }
        let svg = dir.join(format!("{stem}.svg"));
        plot::line_chart(&svg, x_label, "EE (bit/s/Hz/W)", &series)?;
        println!("{}", svg.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load(&cli.common)?;
    if let Some(n) = cli.common.jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting worker pool")?;
    }
    let dir = &cli.common.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let plots = cli.common.emit_plots;
    match cli.command {
        Command::Convergence { elements } => {
            let ms = elements.unwrap_or_else(|| cfg.sweeps.convergence_elements.clone());
            log::info!("convergence: M = {ms:?}, {} trials", cfg.trials);
            let table = convergence_trace(&cfg, cfg.trials, &ms)?;
            let csv = dir.join("convergence.csv");
            emit_csv(&table, &csv)?;
            println!("{}", csv.display());
            if plots {
                let series: Vec<(String, Vec<(f64, f64)>)> = ms
                    .iter()
                    .map(|&m| {
                        let pts = table
                            .rows
                            .iter()
                            .filter(|r| r.elements == m)
                            .map(|r| (r.iteration as f64, r.mean_ee))
                            .collect();
                        (format!("M = {m}"), pts)
                    })
                    .collect();
                let svg = dir.join("convergence.svg");
                plot::line_chart(&svg, "iteration", "EE (bit/s/Hz/W)", &series)?;
                println!("{}", svg.display());
            }
        }
        Command::SweepPower { grid } => {
            let grid = grid.unwrap_or_else(|| cfg.sweeps.power_dbm.clone());
            log::info!("power sweep over {} points, {} trials each", grid.len(), cfg.trials);
            let res = sweep_power(&cfg, &grid)?;
            write_sweep(&res, dir, "sweep_power", "P_T (dBm)", 1.0, plots)?;
        }
        Command::SweepQos { grid } => {
            let grid = grid.unwrap_or_else(|| cfg.sweeps.qos_rate_bps.clone());
            log::info!("QoS sweep over {} points, {} trials each", grid.len(), cfg.trials);
            let res = sweep_qos(&cfg, &grid)?;
            write_sweep(&res, dir, "sweep_qos", "QoS (Mbit/s)", 1e-6, plots)?;
        }
        Command::SingleTrial { index } => {
            let seed = trial_seed(cfg.master_seed, index);
            let results = run_paired(&cfg, seed, &cfg.frameworks)?;
            println!("framework,seed,ee,rate_i,rate_j,iterations,feasible,status");
            for r in &results {
                println!(
                    "{},{},{},{},{},{},{},{:?}",
                    r.framework,
                    r.seed,
                    fmt_num(r.ee),
                    fmt_num(r.rate_i),
                    fmt_num(r.rate_j),
                    r.iterations,
                    r.feasible,
                    r.status
                );
                let csv = dir.join(format!("trace_{}.csv", r.framework));
                emit_csv(&r.trace, &csv)?;
                log::info!("wrote {}", csv.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
