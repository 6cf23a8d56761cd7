use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use semprobe::agent::train::{agent_from_checkpoint, log_from_jsonl, log_to_jsonl, seen_texts};
use semprobe::agent::{run_training, TrainConfig, TrainingOutcome, Variant};
use semprobe::config::{desk_config, overlay_train_config};
use semprobe::env::fixtures::{load_game, FIXTURES};
use semprobe::env::GameSpec;
use semprobe::experiments::{
    agent_grad_check, export_embeddings, final_score, from_scratch, max_score, play_repl, project_2d,
    projection_csv, run_compare, transfer_train, EmbeddingDump,
};
use semprobe::nn::checkpoint::Checkpoint;
use semprobe::par::Exec;

#[derive(Parser)]
#[command(name = "semprobe", version, about = "Train and probe DRRN agents on text games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and save its checkpoint and episode log.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Output directory [default: runs/<game>_<variant>_<seed>]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every game, variant and seed and print the score table.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Number of seeds per cell, starting at --seed.
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        #[arg(long, default_value = "runs/compare")]
        out: PathBuf,
    },
    /// Freeze a checkpoint's encoders and retrain a fresh Q head on another game.
    Transfer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Target game: fixture name or spec file.
        #[arg(long)]
        game: String,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also train a same-configuration agent from scratch for comparison.
        #[arg(long)]
        baseline: bool,
        #[arg(long, default_value = "runs/transfer")]
        out: PathBuf,
    },
    /// Encode every walkthrough observation and write a CSV dump.
    ExportEmbeddings {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Training log used for seen labels [default: log.jsonl next to the checkpoint]
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value = "treasure-hunt")]
        game: String,
        #[arg(long, default_value = "embeddings.csv")]
        out: PathBuf,
    },
    /// Project an embedding dump onto its top two principal directions.
    Project {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "projection.csv")]
        out: PathBuf,
    },
    /// Play a game interactively.
    Play {
        #[arg(long, default_value = "treasure-hunt")]
        game: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        stochastic: bool,
    },
    /// Compare analytic gradients of the training loss with finite differences.
    GradCheck {
        #[command(flatten)]
        run: RunArgs,
        /// Transitions in the probe batch.
        #[arg(long, default_value_t = 8)]
        rows: usize,
        /// Probes per parameter tensor.
        #[arg(long, default_value_t = 4)]
        probes: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Full-size networks and budgets.
    Full,
    /// Small networks and short runs for the bundled fixtures.
    Desk,
}

#[derive(Args)]
struct RunArgs {
    /// Fixture name or path to a game spec file; compare accepts several.
    #[arg(long, default_values_t = ["treasure-hunt".to_string()])]
    game: Vec<String>,
    /// base, min-ob, hash or inv-dy; compare accepts several and defaults to
    /// all four, the other commands default to the configuration's variant.
    #[arg(long)]
    variant: Vec<Variant>,
    #[arg(long)]
    seed: Option<u64>,
    /// Environment steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Episode-varying seeds: paraphrases and random events.
    #[arg(long)]
    stochastic: bool,
    #[arg(long, value_enum, default_value = "full")]
    preset: Preset,
    /// JSON file overriding preset fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<TrainConfig> {
        let mut c = match self.preset {
            Preset::Full => TrainConfig::default(),
            Preset::Desk => desk_config(),
        };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            c = overlay_train_config(&c, &text).with_context(|| format!("in {}", path.display()))?;
        }
        match self.variant[..] {
            [] => {}
            [v] => c.set_variant(v),
            _ => bail!("this command takes a single --variant"),
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.steps {
            c.total_steps = n;
        }
        c.stochastic |= self.stochastic;
        c.validate()?;
        Ok(c)
    }

    fn game(&self) -> Result<&str> {
        match &self.game[..] {
            [g] => Ok(g),
            _ => bail!("this command takes a single --game"),
        }
    }

    fn spec(&self) -> Result<Arc<GameSpec>> {
        game(self.game()?)
    }
}

fn game(name: &str) -> Result<Arc<GameSpec>> {
    load_game(name).with_context(|| {
        let names: Vec<&str> = FIXTURES.iter().map(|(n, _)| *n).collect();
        format!("loading game {name:?} (bundled: {})", names.join(", "))
    })
}

/// File stem for a game argument, which may be a path.
fn game_label(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .map_or_else(|| name.to_string(), |s| s.to_string_lossy().into_owned())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn summary(out: &TrainingOutcome) -> serde_json::Value {
    let scores: Vec<f64> = out.episode_scores().iter().map(|&s| s as f64).collect();
    json!({
        "episodes": scores.len(),
        "final_score": final_score(&scores),
        "max_score": max_score(&scores),
        "updates": out.agent.updates(),
    })
}

fn save_run(dir: &Path, out: &TrainingOutcome) -> Result<serde_json::Value> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    out.checkpoint().save(&dir.join("checkpoint.bin"))?;
    write(&dir.join("log.jsonl"), log_to_jsonl(&out.log))?;
    write(&dir.join("config.json"), serde_json::to_string_pretty(&out.config)?)?;
    let s = summary(out);
    write(&dir.join("summary.json"), serde_json::to_string_pretty(&s)?)?;
    Ok(s)
}

fn print_summary(label: &str, s: &serde_json::Value) {
    println!(
        "{label}: episodes {} final {:.2} max {:.0} updates {}",
        s["episodes"], s["final_score"].as_f64().unwrap_or(0.0), s["max_score"].as_f64().unwrap_or(0.0), s["updates"]
    );
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { run, out } => {
            let config = run.config()?;
            let spec = run.spec()?;
            let label = game_label(run.game()?);
            let dir = out.unwrap_or_else(|| PathBuf::from(format!("runs/{label}_{}_{}", config.variant(), config.seed)));
            let outcome = run_training(&spec, &config)?;
            let s = save_run(&dir, &outcome)?;
            print_summary(&format!("{label} {}", config.variant()), &s);
            println!("saved to {}", dir.display());
        }
        Command::Compare { mut run, seeds, out } => {
            let variants = if run.variant.is_empty() {
                Variant::ALL.to_vec()
            } else {
                std::mem::take(&mut run.variant)
            };
            let config = run.config()?;
            let games = run
                .game
                .iter()
                .map(|g| Ok((game_label(g), game(g)?)))
                .collect::<Result<Vec<_>>>()?;
            let result = run_compare(&games, &variants, seeds, &config, Exec::default())?;
            result.write(&out)?;
            print!("{}", result.table.to_text());
        }
        Command::Transfer {
            checkpoint,
            game: target,
            steps,
            seed,
            baseline,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let spec = game(&target)?;
            let transferred = transfer_train(&ck, &spec, steps, seed)?;
            let s = save_run(&out.join("transfer"), &transferred)?;
            print_summary("transfer", &s);
            if baseline {
                let (_, config) = agent_from_checkpoint(&ck, Exec::default())?;
                let scratch = from_scratch(&config, &spec, steps, seed)?;
                let b = save_run(&out.join("scratch"), &scratch)?;
                print_summary("scratch", &b);
            }
        }
        Command::ExportEmbeddings {
            checkpoint,
            log,
            game: name,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let (agent, _) = agent_from_checkpoint(&ck, Exec::default())?;
            let log_path = log.unwrap_or_else(|| checkpoint.with_file_name("log.jsonl"));
            let text = fs::read_to_string(&log_path).with_context(|| format!("reading {}", log_path.display()))?;
            let records = log_from_jsonl(&text)?;
            let seen: HashSet<&str> = seen_texts(&records);
            let dump = export_embeddings(&agent.qnet, &game(&name)?, &seen)?;
            write(&out, dump.to_csv())?;
            let n_seen = dump.rows.iter().filter(|r| r.seen).count();
            println!("{} states ({} seen), dimension {} -> {}", dump.rows.len(), n_seen, dump.dim, out.display());
        }
        Command::Project { input, out } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let dump = EmbeddingDump::from_csv(&text)?;
            let points = project_2d(&dump)?;
            write(&out, projection_csv(&points))?;
            println!("{} points -> {}", points.len(), out.display());
        }
        Command::Play { game: name, seed, stochastic } => {
            let spec = game(&name)?;
            let s = play_repl(&spec, seed, stochastic, io::stdin().lock(), io::stdout().lock())?;
            eprintln!("{} steps, score {}", s.steps, s.score);
        }
        Command::GradCheck {
            run,
            rows,
            probes,
            tolerance,
        } => {
            let config = run.config()?;
            let report = agent_grad_check(&run.spec()?, &config, rows, probes, 1e-5)?;
            for (name, err) in &report.per_param {
                println!("{name:<16} {err:.3e}");
            }
            println!("checked {} entries, max relative error {:.3e}", report.checked, report.max_rel_error);
            if !(report.max_rel_error < tolerance) {
                eprintln!("gradient check failed: tolerance {tolerance:e}");
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
