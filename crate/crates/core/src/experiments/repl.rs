use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::env::{GameSpec, GameState, StepResult};
use crate::error::{Error, Result};

pub const NOTHING_HAPPENS: &str = "Nothing happens.";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplSummary {
    /// Environment steps taken across all episodes.
    pub steps: usize,
    /// Score of the current (or last finished) episode.
    pub score: i64,
    pub done: bool,
    pub episodes: usize,
}

fn show<W: Write>(out: &mut W, r: &StepResult) -> std::io::Result<()> {
    let o = &r.observation;
    writeln!(out, "\n== {} ==", o.location)?;
    writeln!(out, "{}", o.feedback)?;
    if o.look != o.feedback {
        writeln!(out, "{}", o.look)?;
    }
    writeln!(out, "{}", o.inventory)?;
    if !r.done {
        for (i, a) in r.valid_actions.iter().enumerate() {
            writeln!(out, "  {:>2}. {a}", i + 1)?;
        }
    }
    Ok(())
}

/// Line-oriented player. Accepts an action's text or its number; `:walk`
/// replays the walkthrough from a fresh episode, `:q` or end of input exits.
/// Finished episodes restart automatically.
pub fn play_repl<R: BufRead, W: Write>(
    spec: &Arc<GameSpec>,
    seed: u64,
    stochastic: bool,
    input: R,
    mut out: W,
) -> Result<ReplSummary> {
    let w = |e: std::io::Error| Error::io("<output>", e);
    let mut summary = ReplSummary::default();
    let mut episode_seed = seed;
    let (mut state, mut res) = GameState::reset(spec.clone(), episode_seed, stochastic);
    show(&mut out, &res).map_err(w)?;
    let mut lines = input.lines();
    loop {
        write!(out, "> ").and_then(|_| out.flush()).map_err(w)?;
        let Some(line) = lines.next() else { break };
        let line = line.map_err(|e| Error::io("<input>", e))?;
        let cmd = line.trim();
        if cmd == ":q" {
            break;
        }
        if cmd == ":walk" {
            let walk = spec
                .walkthrough
                .clone()
                .ok_or_else(|| Error::Invalid("the game has no walkthrough".into()))?;
            (state, res) = GameState::reset(spec.clone(), episode_seed, false);
            for a in &walk {
                res = state.step(a)?;
                summary.steps += 1;
                writeln!(out, "> {a}\n{}  [score {}]", res.observation.feedback, state.score()).map_err(w)?;
            }
            writeln!(out, "Score: {} / {}{}", state.score(), spec.max_score, if res.done { " (done)" } else { "" })
                .map_err(w)?;
        } else {
            let action = match cmd.parse::<usize>() {
                Ok(k) if (1..=res.valid_actions.len()).contains(&k) => Some(res.valid_actions[k - 1].clone()),
                Ok(_) => None,
                Err(_) => res.valid_actions.iter().find(|a| a.as_str() == cmd.to_lowercase()).cloned(),
            };
            let Some(action) = action else {
                writeln!(out, "{NOTHING_HAPPENS}").map_err(w)?;
                continue;
            };
            res = state.step(&action)?;
            summary.steps += 1;
            show(&mut out, &res).map_err(w)?;
            writeln!(out, "Reward: {}  Score: {} / {}", res.reward, state.score(), spec.max_score).map_err(w)?;
        }
        summary.score = state.score();
        summary.done = res.done;
        if res.done {
            summary.episodes += 1;
            writeln!(out, "*** Episode over: score {} ***", state.score()).map_err(w)?;
            episode_seed = episode_seed.wrapping_add(1);
            (state, res) = GameState::reset(spec.clone(), episode_seed, stochastic);
            show(&mut out, &res).map_err(w)?;
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::fixtures::fixture;

    fn run(input: &str) -> (ReplSummary, String) {
        let spec = fixture("treasure-hunt").unwrap();
        let mut out = Vec::new();
        let s = play_repl(&spec, 0, false, input.as_bytes(), &mut out).unwrap();
        (s, String::from_utf8(out).unwrap())
    }

    #[test]
    fn quit_immediately() {
        let (s, out) = run(":q\n");
        assert_eq!(s.steps, 0);
        assert!(out.contains("Cave Mouth"));
    }

    #[test]
    fn walkthrough_scores_full() {
        let (s, out) = run(":walk\n:q\n");
        assert_eq!((s.score, s.done, s.steps), (10, true, 10));
        assert!(out.contains("Score: 10 / 10 (done)"));
    }

    #[test]
    fn invalid_input_changes_nothing() {
        let (s, out) = run("dance wildly\n99\n:q\n");
        assert_eq!((s.steps, s.score), (0, 0));
        assert_eq!(out.matches(NOTHING_HAPPENS).count(), 2);
    }

    #[test]
    fn number_and_text_selection() {
        let (s, _) = run("take lamp\n1\n:q\n");
        assert_eq!(s.steps, 2);
    }
}
