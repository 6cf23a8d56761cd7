//! Bundled game fixtures.
//!
//! * `treasure-hunt`: five rooms, three rewards, max score 10.
//! * `treasure-hunt-b`: reworded twin of `treasure-hunt` with identical
//!   commands, used as a transfer target.
//! * `alias-maze`: two different hallways share the location phrase
//!   "Hallway" and need opposite moves.
//! * `bandit1`: one room, two commands, rewards 1 and 0.

use std::path::Path;
use std::sync::Arc;

use crate::env::spec::{parse_game_spec, GameSpec};
use crate::error::{Error, Result};

pub const FIXTURES: &[(&str, &str)] = &[
    ("treasure-hunt", include_str!("../../fixtures/treasure_hunt.json")),
    ("treasure-hunt-b", include_str!("../../fixtures/treasure_hunt_b.json")),
    ("alias-maze", include_str!("../../fixtures/alias_maze.json")),
    ("bandit1", include_str!("../../fixtures/bandit1.json")),
];

pub fn fixture(name: &str) -> Result<Arc<GameSpec>> {
    let (_, doc) = FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::UnknownReference(format!("fixture {name:?}")))?;
    parse_game_spec(doc)
}

/// Resolves a bundled fixture name or reads a spec file from disk.
pub fn load_game(name_or_path: &str) -> Result<Arc<GameSpec>> {
    if FIXTURES.iter().any(|(n, _)| *n == name_or_path) {
        return fixture(name_or_path);
    }
    let path = Path::new(name_or_path);
    let doc = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_game_spec(&doc)
}

/// Every text of every bundled fixture, so that vocabularies (and hence
/// checkpoints) are shared across games.
pub fn bundled_texts() -> Vec<String> {
    FIXTURES
        .iter()
        .flat_map(|(_, doc)| parse_game_spec(doc).expect("bundled fixture parses").texts())
        .collect()
}
