//! `dllm` command-line entry point.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dllm_core::env::Achievement;
use dllm_core::evalmetrics::GoalQualityReport;
use dllm_core::trainer::{
    aggregate_goal_report, crafter_score, episode_stats, load_run, series_from_csv, svg_line_plot, Config,
    ProviderKind, Trainer,
};

#[derive(Parser)]
#[command(name = "dllm", about = "Language-goal intrinsic rewards for world-model agents", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write metrics, checkpoints and a summary.
    Train {
        /// Flat `key = value` config file; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for the run files.
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        /// Keep the RND predictor frozen so goal novelty never decays.
        #[arg(long)]
        no_rnd_decay: bool,
        /// Draw goals uniformly from the caption vocabulary.
        #[arg(long)]
        random_goals: bool,
        /// Reward a goal every time it is matched within a rollout.
        #[arg(long)]
        allow_repetition: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = ["scripted", "random", "remote"])]
        provider: Option<String>,
        /// Extra `key=value` overrides applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run evaluation episodes from a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
        /// Write a JSON-lines trace of every step.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Aggregate the goal-quality report of a run.
    GoalsReport {
        #[arg(long)]
        run: PathBuf,
    },
    /// Plot metrics columns of one or more runs as SVG.
    Plot {
        /// Run directories; each contributes one line per column.
        #[arg(long, required = true, num_args = 1..)]
        run: Vec<PathBuf>,
        #[arg(long, default_value = "achievements", value_delimiter = ',')]
        columns: Vec<String>,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn train(
    config: Option<PathBuf>,
    out: PathBuf,
    alpha: Option<f64>,
    flags: [bool; 3],
    seed: Option<u64>,
    provider: Option<String>,
    set: Vec<String>,
) -> Res<()> {
    let mut cfg = match config {
        Some(p) => Config::from_file(&p).map_err(|e| format!("config {}: {e}", p.display()))?,
        None => Config::default(),
    };
    let [no_rnd_decay, random_goals, allow_repetition] = flags;
    if let Some(a) = alpha {
        cfg.alpha = a;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(p) = provider {
        cfg.provider = p.parse()?;
    }
    if random_goals {
        cfg.provider = ProviderKind::Random;
    }
    cfg.no_rnd_decay |= no_rnd_decay;
    cfg.allow_repetition |= allow_repetition;
    for kv in &set {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{kv}`"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    let mut trainer = Trainer::new(cfg)?;
    let summary = trainer.run(Some(&out))?;
    println!("{}", summary.to_json());
    Ok(())
}

fn eval(checkpoint: &Path, episodes: usize, seed: u64, trace: Option<PathBuf>) -> Res<()> {
    let trainer = load_run(checkpoint)?;
    let mut file = trace.map(fs::File::create).transpose()?;
    let eps = trainer.evaluate(episodes, seed, file.as_mut().map(|f| f as &mut dyn std::io::Write))?;
    let (ach, ret, rates) = episode_stats(&eps);
    println!("episodes: {episodes}");
    println!("mean return: {ret:.3}");
    println!("mean achievements: {ach:.3}");
    for (a, r) in Achievement::ALL.iter().zip(&rates) {
        println!("  {:<20} {:.3}", a.name(), r);
    }
    println!("score: {:.3}", crafter_score(&rates));
    Ok(())
}

fn goals_report(run: &Path) -> Res<()> {
    let text = fs::read_to_string(run.join("goal_quality.csv"))?;
    let (r, windows): (GoalQualityReport, usize) = aggregate_goal_report(&text)?;
    println!("windows: {windows}");
    println!("goals assessed: {}", r.samples);
    println!("unassessable: {}", r.unassessable);
    println!("novelty: {:.4}", r.novelty_rate());
    println!("correctness: {:.4}", r.correctness_rate());
    println!("context sensitivity: {:.4}", r.context_rate());
    println!("common-sense sensitivity: {:.4}", r.common_sense_rate());
    Ok(())
}

fn plot(runs: &[PathBuf], columns: &[String], out: &Path) -> Res<()> {
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut series = Vec::new();
    for run in runs {
        let text = fs::read_to_string(run.join("metrics.csv"))?;
        for mut s in series_from_csv(&text, &cols)? {
            if runs.len() > 1 {
                let name = run.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                s.label = format!("{name}: {}", s.label);
            }
            series.push(s);
        }
    }
    fs::write(out, svg_line_plot(&columns.join(", "), "environment step", &series))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            config,
            out,
            alpha,
            no_rnd_decay,
            random_goals,
            allow_repetition,
            seed,
            provider,
            set,
        } => train(config, out, alpha, [no_rnd_decay, random_goals, allow_repetition], seed, provider, set),
        Command::Eval {
            checkpoint,
            episodes,
            seed,
            trace,
        } => eval(&checkpoint, episodes, seed, trace),
        Command::GoalsReport { run } => goals_report(&run),
        Command::Plot { run, columns, out } => plot(&run, &columns, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
