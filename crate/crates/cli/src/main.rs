mod grid;
mod plot;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use beliefrl::checkpoint::Checkpoint;
use beliefrl::config::{RunConfig, SEED_ENV};
use beliefrl::metrics::MetricsWriter;
use beliefrl::run::{agent_from_checkpoint, Session};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "beliefrl", version, about = "Belief-state RL on partially observable control tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; `--section.key=value` arguments override the config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Evaluate a checkpoint and print the mean and standard deviation of returns.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: usize,
        /// Take the most probable (or mean) action instead of sampling.
        #[arg(long)]
        greedy: bool,
        /// Evaluation seed; defaults to BELIEFRL_SEED, then the run's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in oracle and property suites.
    Verify,
    /// Train every cell of an ablation grid.
    Ablate {
        #[arg(long)]
        grid: PathBuf,
    },
    /// Plot return against frames for one or more metrics files.
    Plot {
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, overrides } => cmd_train(&config, &overrides),
        Command::Eval {
            checkpoint,
            episodes,
            greedy,
            seed,
        } => cmd_eval(&checkpoint, episodes, greedy, seed),
        Command::Verify => cmd_verify(),
        Command::Ablate { grid } => cmd_ablate(&grid),
        Command::Plot { inputs, out } => cmd_plot(&inputs, &out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn train_to(cfg: RunConfig, metrics: &Path, checkpoint: &Path) -> Result<()> {
    let file = File::create(metrics).with_context(|| format!("creating {}", metrics.display()))?;
    let mut writer = MetricsWriter::new(BufWriter::new(file))?;
    let mut session = Session::new(cfg)?;
    session.train(&mut writer, |c| c.save(checkpoint))?;
    writer.into_inner()?;
    Ok(())
}

fn cmd_train(config: &Path, overrides: &[String]) -> Result<bool> {
    let cfg = RunConfig::load(config, overrides)?;
    let metrics = PathBuf::from(&cfg.log.metrics);
    let checkpoint = PathBuf::from(&cfg.log.checkpoint);
    train_to(cfg, &metrics, &checkpoint)?;
    println!("metrics: {}\ncheckpoint: {}", metrics.display(), checkpoint.display());
    Ok(true)
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => Ok(Some(s.parse().with_context(|| format!("{SEED_ENV}={s} is not a seed"))?)),
        Err(_) => Ok(None),
    }
}

fn cmd_eval(checkpoint: &Path, episodes: usize, greedy: bool, seed: Option<u64>) -> Result<bool> {
    if episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    let ckpt = Checkpoint::load(checkpoint)?;
    let (cfg, agent) = agent_from_checkpoint(&ckpt)?;
    let seed = match seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(cfg.train.seed),
    };
    let report = beliefrl::rl::evaluate(&agent, cfg.make_envs(cfg.n_e)?, episodes, seed, !greedy)?;
    println!(
        "return {:.4} ± {:.4} over {} episodes ({})",
        report.mean,
        report.std,
        report.returns.len(),
        if greedy { "greedy" } else { "sampled" }
    );
    Ok(true)
}

fn cmd_verify() -> Result<bool> {
    let results = beliefrl::verify::run_all();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    Ok(results.iter().all(|r| r.passed))
}

fn cmd_ablate(grid_path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(grid_path).with_context(|| format!("reading {}", grid_path.display()))?;
    let root = grid_path.parent().unwrap_or(Path::new("."));
    let grid = grid::Grid::parse(&text)?;
    let base = match &grid.base {
        Some(p) => {
            let p = root.join(p);
            std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?
        }
        None => String::new(),
    };
    let out_dir = root.join(&grid.out_dir);
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for cell in grid.cells() {
        let mut overrides = grid.overrides.clone();
        overrides.extend(cell.overrides.iter().cloned());
        let cfg = RunConfig::parse(&base, &overrides).with_context(|| format!("cell {}", cell.name))?;
        let metrics = out_dir.join(format!("{}.csv", cell.name));
        let checkpoint = out_dir.join(format!("{}.bin", cell.name));
        train_to(cfg, &metrics, &checkpoint).with_context(|| format!("cell {}", cell.name))?;
        println!("{}", metrics.display());
    }
    Ok(true)
}

fn cmd_plot(inputs: &[PathBuf], out: &Path) -> Result<bool> {
    let mut series = Vec::with_capacity(inputs.len());
    for path in inputs {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let records = beliefrl::metrics::read_metrics(file).with_context(|| format!("reading {}", path.display()))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let points = records
            .iter()
            .filter_map(|r| r.mean_return.map(|m| (r.frames as f64, m)))
            .collect();
        series.push(plot::Series { label, points });
    }
    std::fs::write(out, plot::render_svg(&series)).with_context(|| format!("writing {}", out.display()))?;
    Ok(true)
}
