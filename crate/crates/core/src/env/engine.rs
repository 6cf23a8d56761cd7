use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::spec::{EventEffect, GameSpec};
use crate::error::{Error, Result};
use crate::text::hash::{splitmix64_next, SplitMix64};

pub const DEFAULT_STEP_LIMIT: usize = 100;

const WAIT_TEXT: &str = "Time passes.";
const TAKEN_TEXT: &str = "Taken.";
const DROPPED_TEXT: &str = "Dropped.";
const REPEAT_TEXT: &str = "Nothing else happens.";
const EMPTY_INVENTORY: &str = "You are carrying nothing.";

/// Fixed strings the engine may emit, for vocabulary construction.
pub const ENGINE_PHRASES: &[&str] = &[
    WAIT_TEXT,
    TAKEN_TEXT,
    DROPPED_TEXT,
    REPEAT_TEXT,
    EMPTY_INVENTORY,
    "You are carrying:",
    "You see:",
    "You go",
    "look wait go take drop with",
];

/// Feedback text plus the look/inventory augmentation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub feedback: String,
    pub look: String,
    pub inventory: String,
    /// Name phrase of the current room.
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: i64,
    pub done: bool,
    pub valid_actions: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Location {
    Room(usize),
    Inventory,
    Nowhere,
}

/// Mutable runtime state of one game instance.
#[derive(Debug, Clone)]
pub struct GameState {
    spec: Arc<GameSpec>,
    room: usize,
    objects: Vec<Location>,
    flags: BTreeSet<String>,
    fired: Vec<u32>,
    score: i64,
    steps: usize,
    step_limit: usize,
    done: bool,
    stochastic: bool,
    events: SplitMix64,
    texts: SplitMix64,
}

fn location_of(spec: &GameSpec, loc: &str) -> Location {
    match loc {
        "inventory" => Location::Inventory,
        "nowhere" => Location::Nowhere,
        id => spec
            .room_index(id)
            .map(Location::Room)
            .unwrap_or(Location::Nowhere),
    }
}

impl GameState {
    /// Starts an episode in the first room. Deterministic mode ignores
    /// random events and always uses variant 0 of paraphrasable texts.
    pub fn reset(spec: Arc<GameSpec>, seed: u64, stochastic: bool) -> (GameState, StepResult) {
        let objects = spec
            .objects
            .iter()
            .map(|o| location_of(&spec, &o.location))
            .collect();
        let flags = spec.objects.iter().flat_map(|o| o.flags.iter().cloned()).collect();
        let fired = vec![0; spec.triggers.len()];
        let mut state = GameState {
            room: 0,
            objects,
            flags,
            fired,
            score: 0,
            steps: 0,
            step_limit: DEFAULT_STEP_LIMIT,
            done: false,
            stochastic,
            events: SplitMix64::new(splitmix64_next(seed).0),
            texts: SplitMix64::new(splitmix64_next(seed ^ 0xA5A5_5A5A_C3C3_3C3C).0),
            spec,
        };
        let feedback = state.room_description();
        let result = state.result(feedback, 0);
        (state, result)
    }

    pub fn spec(&self) -> &Arc<GameSpec> {
        &self.spec
    }

    pub fn score(&self) -> i64 {
        self.score
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn step_limit(&self) -> usize {
        self.step_limit
    }

    pub fn set_step_limit(&mut self, limit: usize) {
        self.step_limit = limit;
    }

    pub fn room_id(&self) -> &str {
        &self.spec.rooms[self.room].id
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.contains(flag)
    }

    /// Number of times each trigger has fired with effect.
    pub fn fired_counts(&self) -> &[u32] {
        &self.fired
    }

    pub fn inventory(&self) -> Vec<&str> {
        self.spec
            .objects
            .iter()
            .zip(&self.objects)
            .filter(|(_, l)| **l == Location::Inventory)
            .map(|(o, _)| o.id.as_str())
            .collect()
    }

    fn visible(&self, k: usize) -> bool {
        self.spec.objects[k]
            .visible_when
            .as_ref()
            .is_none_or(|f| self.flags.contains(f))
    }

    fn here(&self, k: usize) -> bool {
        self.objects[k] == Location::Room(self.room) && self.visible(k)
    }

    fn carried(&self, k: usize) -> bool {
        self.objects[k] == Location::Inventory
    }

    fn accessible(&self, id: &str) -> bool {
        self.spec
            .object_index(id)
            .is_some_and(|k| self.here(k) || self.carried(k))
    }

    fn pick<'a>(&mut self, variants: &[&'a str]) -> &'a str {
        if self.stochastic && variants.len() > 1 {
            variants[self.texts.next_index(variants.len())]
        } else {
            variants[0]
        }
    }

    fn room_description(&mut self) -> String {
        let spec = self.spec.clone();
        let room = &spec.rooms[self.room];
        self.pick(&spec.variants(&room.id, &room.description)).to_string()
    }

    fn trigger_applicable(&self, i: usize) -> bool {
        let t = &self.spec.triggers[i];
        t.room.as_ref().is_none_or(|r| *r == self.spec.rooms[self.room].id)
            && t.requires_flags.iter().all(|f| self.flags.contains(f))
            && !t.forbids_flags.iter().any(|f| self.flags.contains(f))
            && t.requires_items.iter().all(|id| {
                self.spec
                    .object_index(id)
                    .is_some_and(|k| self.carried(k))
            })
            && t.object.as_ref().is_none_or(|o| self.accessible(o))
            && t.instrument.as_ref().is_none_or(|o| {
                self.spec
                    .object_index(o)
                    .is_some_and(|k| self.carried(k))
            })
    }

    fn open_exits(&self) -> impl Iterator<Item = (&String, usize)> + '_ {
        self.spec.rooms[self.room]
            .exits
            .iter()
            .filter(|(_, e)| e.required_flag().is_none_or(|f| self.flags.contains(f)))
            .filter_map(|(d, e)| self.spec.room_index(e.target()).map(|r| (d, r)))
    }

    /// Admissible commands in lexicographic order; always includes "look"
    /// and "wait".
    pub fn valid_actions(&self) -> Vec<String> {
        let mut out: BTreeSet<String> = ["look".to_string(), "wait".to_string()].into();
        for (dir, _) in self.open_exits() {
            out.insert(format!("go {dir}"));
        }
        for (k, o) in self.spec.objects.iter().enumerate() {
            if o.portable && self.here(k) {
                out.insert(format!("take {}", o.name));
            }
            if self.carried(k) {
                out.insert(format!("drop {}", o.name));
            }
        }
        for i in 0..self.spec.triggers.len() {
            if self.trigger_applicable(i) {
                out.insert(self.spec.trigger_command(i));
            }
        }
        out.into_iter().collect()
    }

    /// Applies one command. Errors on commands outside [`Self::valid_actions`]
    /// or once the episode is over.
    pub fn step(&mut self, action: &str) -> Result<StepResult> {
        if self.done {
            return Err(Error::InvalidAction(format!("{action} (episode is over)")));
        }
        let valid = self.valid_actions();
        if valid.binary_search_by(|a| a.as_str().cmp(action)).is_err() {
            return Err(Error::InvalidAction(action.to_string()));
        }
        let spec = self.spec.clone();
        let matching: Vec<usize> = (0..spec.triggers.len())
            .filter(|&i| self.trigger_applicable(i) && spec.trigger_command(i) == action)
            .collect();

        let mut feedback = Vec::<String>::new();
        let mut ends = false;
        let words: Vec<&str> = action.split(' ').collect();
        match words.as_slice() {
            ["look"] => feedback.push(self.look_text()),
            ["wait"] => feedback.push(WAIT_TEXT.into()),
            ["go", dir] => {
                let (_, to) = self
                    .open_exits()
                    .find(|(d, _)| d.as_str() == *dir)
                    .expect("validated exit");
                self.room = to;
                feedback.push(format!("You go {dir}."));
                if spec.rooms[to].terminal {
                    feedback.push(self.room_description());
                    ends = true;
                }
            }
            ["take", name] => {
                if let Some(k) = self.portable_here(name) {
                    self.objects[k] = Location::Inventory;
                    feedback.push(TAKEN_TEXT.into());
                }
            }
            ["drop", name] => {
                if let Some(k) = spec
                    .objects
                    .iter()
                    .position(|o| o.name == *name)
                    .filter(|&k| self.carried(k))
                {
                    self.objects[k] = Location::Room(self.room);
                    feedback.push(DROPPED_TEXT.into());
                }
            }
            _ => {}
        }

        let mut reward = 0;
        for i in matching {
            let t = &spec.triggers[i];
            if t.once && self.fired[i] > 0 {
                feedback.push(REPEAT_TEXT.into());
                continue;
            }
            self.fired[i] += 1;
            reward += t.reward;
            for f in &t.set_flags {
                self.flags.insert(f.clone());
            }
            for f in &t.clear_flags {
                self.flags.remove(f);
            }
            if !t.message.is_empty() {
                let msg = self.pick(&spec.variants(&t.id, &t.message)).to_string();
                feedback.push(msg);
            }
            ends |= t.ends_episode;
        }
        self.score += reward;
        self.steps += 1;

        if self.stochastic {
            for e in &spec.random_events {
                if e.room.as_ref().is_some_and(|r| *r != spec.rooms[self.room].id) {
                    continue;
                }
                if self.events.next_f64() < e.probability {
                    self.apply_event(&e.effect);
                    if !e.message.is_empty() {
                        feedback.push(e.message.clone());
                    }
                }
            }
        }

        self.done = ends || self.score == spec.max_score || self.steps >= self.step_limit;
        Ok(self.result(feedback.join(" "), reward))
    }

    fn portable_here(&self, name: &str) -> Option<usize> {
        (0..self.spec.objects.len()).find(|&k| {
            let o = &self.spec.objects[k];
            o.name == name && o.portable && self.here(k)
        })
    }

    fn apply_event(&mut self, effect: &EventEffect) {
        match effect {
            EventEffect::None => {}
            EventEffect::Teleport { room } => {
                if let Some(r) = self.spec.room_index(room) {
                    self.room = r;
                }
            }
            EventEffect::Relocate { object, to } => {
                if let Some(k) = self.spec.object_index(object) {
                    self.objects[k] = location_of(&self.spec, to);
                }
            }
            EventEffect::SetFlag { flag } => {
                self.flags.insert(flag.clone());
            }
            EventEffect::ClearFlag { flag } => {
                self.flags.remove(flag);
            }
        }
    }

    fn look_text(&mut self) -> String {
        let desc = self.room_description();
        let names: Vec<&str> = (0..self.spec.objects.len())
            .filter(|&k| self.here(k))
            .map(|k| self.spec.objects[k].name.as_str())
            .collect();
        if names.is_empty() {
            desc
        } else {
            format!("{desc} You see: {}.", names.join(", "))
        }
    }

    fn inventory_text(&self) -> String {
        let names: Vec<&str> = (0..self.spec.objects.len())
            .filter(|&k| self.carried(k))
            .map(|k| self.spec.objects[k].name.as_str())
            .collect();
        if names.is_empty() {
            EMPTY_INVENTORY.to_string()
        } else {
            format!("You are carrying: {}.", names.join(", "))
        }
    }

    fn result(&mut self, feedback: String, reward: i64) -> StepResult {
        StepResult {
            observation: augment_observation(self, feedback),
            reward,
            done: self.done,
            valid_actions: self.valid_actions(),
        }
    }
}

/// Builds the augmented observation for the current state: feedback,
/// room description with visible objects, inventory listing and location
/// phrase.
pub fn augment_observation(state: &mut GameState, feedback: String) -> Observation {
    Observation {
        feedback,
        look: state.look_text(),
        inventory: state.inventory_text(),
        location: state.spec.rooms[state.room].name.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::spec::parse_game_spec;

    fn game(doc: &str) -> Arc<GameSpec> {
        parse_game_spec(doc).unwrap()
    }

    const BARE: &str = r#"{"rooms": [{"id": "r", "name": "Bare Room", "description": "Nothing here."}],
        "max_score": 1}"#;

    #[test]
    fn bare_room_actions() {
        let (s, res) = GameState::reset(game(BARE), 0, false);
        assert_eq!(res.valid_actions, vec!["look", "wait"]);
        assert_eq!(s.valid_actions(), res.valid_actions);
        assert_eq!(res.observation.inventory, "You are carrying nothing.");
        assert_eq!(res.observation.location, "Bare Room");
    }

    #[test]
    fn wait_changes_nothing() {
        let (mut s, _) = GameState::reset(game(BARE), 0, false);
        let r = s.step("wait").unwrap();
        assert_eq!(r.reward, 0);
        assert!(!r.done);
        assert_eq!(s.room_id(), "r");
        assert_eq!(r.observation.feedback, "Time passes.");
    }

    #[test]
    fn invalid_action_rejected() {
        let (mut s, _) = GameState::reset(game(BARE), 0, false);
        assert!(matches!(s.step("dance"), Err(Error::InvalidAction(_))));
        assert_eq!(s.steps(), 0);
    }

    #[test]
    fn exits_and_portables_enumerated() {
        let doc = r#"{"rooms": [{"id": "a", "name": "A", "description": "a.", "exits": {"north": "b"}},
                                {"id": "b", "name": "B", "description": "b."}],
            "objects": [{"id": "lamp", "name": "lamp", "portable": true, "location": "a"},
                        {"id": "case", "name": "case", "location": "a"}],
            "max_score": 0}"#;
        let (mut s, r) = GameState::reset(game(doc), 0, false);
        assert!(r.valid_actions.contains(&"go north".to_string()));
        assert!(r.valid_actions.contains(&"take lamp".to_string()));
        assert!(!r.valid_actions.contains(&"take case".to_string()));
        assert_eq!(r.observation.look, "a. You see: lamp, case.");
        let r = s.step("take lamp").unwrap();
        assert_eq!(r.observation.inventory, "You are carrying: lamp.");
        assert!(r.valid_actions.contains(&"drop lamp".to_string()));
    }

    #[test]
    fn once_trigger_pays_once() {
        let doc = r#"{"rooms": [{"id": "r", "name": "R", "description": "r."}],
            "triggers": [{"id": "pray", "verb": "pray", "reward": 2, "once": true, "message": "You feel blessed."}],
            "max_score": 5}"#;
        let (mut s, _) = GameState::reset(game(doc), 0, false);
        assert_eq!(s.step("pray").unwrap().reward, 2);
        let second = s.step("pray").unwrap();
        assert_eq!(second.reward, 0);
        assert_eq!(s.score(), 2);
    }

    #[test]
    fn step_limit_ends_episode() {
        let (mut s, _) = GameState::reset(game(BARE), 0, false);
        s.set_step_limit(3);
        assert!(!s.step("wait").unwrap().done);
        assert!(!s.step("wait").unwrap().done);
        assert!(s.step("wait").unwrap().done);
        assert!(s.step("wait").is_err());
    }

    #[test]
    fn paraphrases_are_closed_choice() {
        let doc = r#"{"rooms": [{"id": "r", "name": "R", "description": "The first wording."}],
            "paraphrases": {"r": ["The second wording."]}, "max_score": 1}"#;
        let spec = game(doc);
        let mut seen = BTreeSet::new();
        for seed in 0..40 {
            let (_, r) = GameState::reset(spec.clone(), seed, true);
            assert!(r.observation.look == "The first wording." || r.observation.look == "The second wording.");
            seen.insert(r.observation.look);
        }
        assert_eq!(seen.len(), 2);
        let (_, d) = GameState::reset(spec, 3, false);
        assert_eq!(d.observation.look, "The first wording.");
    }
}
