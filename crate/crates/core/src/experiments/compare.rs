use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::train::{game_vocab, init_agent, log_to_jsonl, train_agent};
use crate::agent::{LogRecord, TrainConfig, Variant};
use crate::env::GameSpec;
use crate::error::{Error, Result};
use crate::par::Exec;

use super::metrics::{final_score, max_score, normalized_score};

/// Result of one (game, variant, seed) training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub game: String,
    pub variant: Variant,
    pub seed: u64,
    pub episodes: usize,
    pub final_score: f64,
    pub max_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub game: String,
    pub variant: Variant,
    pub total: i64,
    pub mean_final: f64,
    pub mean_max: f64,
    pub normalized_final: f64,
    pub normalized_max: f64,
    pub per_seed_final: Vec<f64>,
    pub per_seed_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub cells: Vec<CellResult>,
    pub summary: Vec<VariantSummary>,
}

impl ScoreTable {
    /// Groups cells by (game, variant) in first-appearance order. `totals`
    /// maps each game name to its maximum score.
    pub fn from_cells(cells: Vec<CellResult>, totals: &[(String, i64)]) -> Result<Self> {
        let mut summary: Vec<VariantSummary> = Vec::new();
        for c in &cells {
            let total = totals
                .iter()
                .find(|(g, _)| *g == c.game)
                .map(|(_, t)| *t)
                .ok_or_else(|| Error::UnknownReference(c.game.clone()))?;
            match summary.iter_mut().find(|s| s.game == c.game && s.variant == c.variant) {
                Some(s) => {
                    s.per_seed_final.push(c.final_score);
                    s.per_seed_max.push(c.max_score);
                }
                None => summary.push(VariantSummary {
                    game: c.game.clone(),
                    variant: c.variant,
                    total,
                    mean_final: 0.0,
                    mean_max: 0.0,
                    normalized_final: 0.0,
                    normalized_max: 0.0,
                    per_seed_final: vec![c.final_score],
                    per_seed_max: vec![c.max_score],
                }),
            }
        }
        for s in &mut summary {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            s.mean_final = mean(&s.per_seed_final);
            s.mean_max = mean(&s.per_seed_max);
            s.normalized_final = normalized_score(s.mean_final, s.total as f64)?;
            s.normalized_max = normalized_score(s.mean_max, s.total as f64)?;
        }
        Ok(ScoreTable { cells, summary })
    }

    pub fn get(&self, game: &str, variant: Variant) -> Option<&VariantSummary> {
        self.summary.iter().find(|s| s.game == game && s.variant == variant)
    }

    /// Aligned plain-text table, one line per (game, variant).
    pub fn to_text(&self) -> String {
        let header = [
            "game", "variant", "seeds", "final", "max", "norm.final", "norm.max", "final/seed", "max/seed",
        ];
        let fmt_list = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ");
        let rows: Vec<[String; 9]> = self
            .summary
            .iter()
            .map(|s| {
                [
                    s.game.clone(),
                    s.variant.to_string(),
                    s.per_seed_final.len().to_string(),
                    format!("{:.2}", s.mean_final),
                    format!("{:.2}", s.mean_max),
                    format!("{:.3}", s.normalized_final),
                    format!("{:.3}", s.normalized_max),
                    fmt_list(&s.per_seed_final),
                    fmt_list(&s.per_seed_max),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[&str]| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &header);
        for r in &rows {
            line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("score table serializes")
    }
}

/// One trained cell with its full log.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub game: String,
    pub variant: Variant,
    pub seed: u64,
    pub log: Vec<LogRecord>,
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub table: ScoreTable,
    pub runs: Vec<CellRun>,
}

impl CompareOutput {
    /// Writes `table.txt`, `table.json` and one `logs/<game>_<variant>_<seed>.jsonl`
    /// per cell under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let logs = dir.join("logs");
        std::fs::create_dir_all(&logs).map_err(|e| Error::io(&logs, e))?;
        let put = |p: &Path, s: &str| std::fs::write(p, s).map_err(|e| Error::io(p, e));
        put(&dir.join("table.txt"), &self.table.to_text())?;
        put(&dir.join("table.json"), &self.table.to_json())?;
        for r in &self.runs {
            put(
                &logs.join(format!("{}_{}_{}.jsonl", r.game, r.variant, r.seed)),
                &log_to_jsonl(&r.log),
            )?;
        }
        Ok(())
    }
}

/// Trains every (game, variant, seed) cell and assembles the score table.
/// Seeds are `base.seed .. base.seed + seeds`.
pub fn run_compare(
    games: &[(String, Arc<GameSpec>)],
    variants: &[Variant],
    seeds: usize,
    base: &TrainConfig,
    exec: Exec,
) -> Result<CompareOutput> {
    if seeds == 0 {
        return Err(Error::Config("compare needs at least one seed".into()));
    }
    let mut cells = Vec::new();
    for (gi, _) in games.iter().enumerate() {
        for &v in variants {
            for s in 0..seeds as u64 {
                cells.push((gi, v, base.seed + s));
            }
        }
    }
    let results = exec.map(&cells, |&(gi, variant, seed)| -> Result<CellRun> {
        let (name, spec) = &games[gi];
        let mut config = base.clone();
        config.set_variant(variant);
        config.seed = seed;
        let agent = init_agent(Arc::new(game_vocab(spec)), &config, Exec::Sequential)?;
        let out = train_agent(agent, spec, &config)?;
        Ok(CellRun {
            game: name.clone(),
            variant,
            seed,
            log: out.log,
        })
    });
    let runs: Vec<CellRun> = results.into_iter().collect::<Result<_>>()?;
    let cells = runs
        .iter()
        .map(|r| {
            let scores: Vec<f64> = crate::agent::train::episode_scores(&r.log).iter().map(|&s| s as f64).collect();
            CellResult {
                game: r.game.clone(),
                variant: r.variant,
                seed: r.seed,
                episodes: scores.len(),
                final_score: final_score(&scores),
                max_score: max_score(&scores),
            }
        })
        .collect();
    let totals: Vec<(String, i64)> = games.iter().map(|(n, s)| (n.clone(), s.max_score)).collect();
    Ok(CompareOutput {
        table: ScoreTable::from_cells(cells, &totals)?,
        runs,
    })
}
