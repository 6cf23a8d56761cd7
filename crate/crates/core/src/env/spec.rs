//! Game-spec document format and validation.
//!
//! ```json
//! {
//!   "rooms": [{"id": "mouth", "name": "Cave Mouth", "description": "...",
//!              "exits": {"north": "tunnel", "east": {"to": "vault", "requires": "door_open"}},
//!              "terminal": false}],
//!   "objects": [{"id": "key", "name": "key", "portable": true, "location": "pool",
//!                "flags": [], "visible_when": null}],
//!   "triggers": [{"id": "unlock", "verb": "unlock", "object": "door", "instrument": "key",
//!                 "room": "hall", "requires_flags": [], "requires_items": ["key"],
//!                 "forbids_flags": ["door_open"], "reward": 3, "message": "...",
//!                 "once": true, "set_flags": ["door_open"], "clear_flags": [],
//!                 "ends_episode": false}],
//!   "max_score": 10,
//!   "walkthrough": ["go north", "..."],
//!   "paraphrases": {"mouth": ["alternative description"]},
//!   "random_events": [{"probability": 0.05, "room": null, "message": "...",
//!                      "effect": {"kind": "teleport", "room": "mouth"}}]
//! }
//! ```
//!
//! The first room is the start room. Paraphrase keys name a room (its
//! description) or a trigger (its message); variant 0 is always the
//! original text.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::engine::{GameState, ENGINE_PHRASES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub id: String,
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub exits: BTreeMap<String, Exit>,
    #[serde(default)]
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exit {
    Open(String),
    Gated { to: String, requires: String },
}

impl Exit {
    pub fn target(&self) -> &str {
        match self {
            Exit::Open(to) | Exit::Gated { to, .. } => to,
        }
    }

    pub fn required_flag(&self) -> Option<&str> {
        match self {
            Exit::Open(_) => None,
            Exit::Gated { requires, .. } => Some(requires),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Object {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub portable: bool,
    /// Room id, `"inventory"`, or `"nowhere"`.
    pub location: String,
    /// Flags raised at reset.
    #[serde(default)]
    pub flags: Vec<String>,
    /// The object is only visible (and usable) while this flag is set.
    #[serde(default)]
    pub visible_when: Option<String>,
}

fn default_preposition() -> String {
    "with".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trigger {
    pub id: String,
    pub verb: String,
    #[serde(default)]
    pub object: Option<String>,
    #[serde(default)]
    pub instrument: Option<String>,
    #[serde(default = "default_preposition")]
    pub preposition: String,
    #[serde(default)]
    pub room: Option<String>,
    #[serde(default)]
    pub requires_flags: Vec<String>,
    #[serde(default)]
    pub requires_items: Vec<String>,
    #[serde(default)]
    pub forbids_flags: Vec<String>,
    #[serde(default)]
    pub reward: i64,
    #[serde(default)]
    pub message: String,
    #[serde(default)]
    pub once: bool,
    #[serde(default)]
    pub set_flags: Vec<String>,
    #[serde(default)]
    pub clear_flags: Vec<String>,
    #[serde(default)]
    pub ends_episode: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventEffect {
    /// Message only.
    None,
    Teleport { room: String },
    Relocate { object: String, to: String },
    SetFlag { flag: String },
    ClearFlag { flag: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomEvent {
    pub probability: f64,
    pub effect: EventEffect,
    #[serde(default)]
    pub message: String,
    /// Only eligible while the player is in this room.
    #[serde(default)]
    pub room: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub rooms: Vec<Room>,
    #[serde(default)]
    pub objects: Vec<Object>,
    #[serde(default)]
    pub triggers: Vec<Trigger>,
    pub max_score: i64,
    #[serde(default)]
    pub walkthrough: Option<Vec<String>>,
    #[serde(default)]
    pub paraphrases: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub random_events: Vec<RandomEvent>,
}

impl GameSpec {
    pub fn room_index(&self, id: &str) -> Option<usize> {
        self.rooms.iter().position(|r| r.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    /// Surface text of trigger `i` as a command.
    pub fn trigger_command(&self, i: usize) -> String {
        let t = &self.triggers[i];
        let name = |id: &String| {
            self.object_index(id)
                .map(|k| self.objects[k].name.clone())
                .unwrap_or_default()
        };
        let mut s = t.verb.clone();
        if let Some(o) = &t.object {
            s.push(' ');
            s.push_str(&name(o));
            if let Some(i) = &t.instrument {
                s.push(' ');
                s.push_str(&t.preposition);
                s.push(' ');
                s.push_str(&name(i));
            }
        }
        s
    }

    /// Variants of a paraphrasable text: the original first.
    pub fn variants<'a>(&'a self, id: &str, original: &'a str) -> Vec<&'a str> {
        let mut v = vec![original];
        if let Some(alts) = self.paraphrases.get(id) {
            v.extend(alts.iter().map(String::as_str));
        }
        v
    }

    /// Every text the engine can emit for this game, plus the command
    /// grammar words. Used to build vocabularies.
    pub fn texts(&self) -> Vec<String> {
        let mut out: Vec<String> = ENGINE_PHRASES.iter().map(|s| s.to_string()).collect();
        for r in &self.rooms {
            out.push(r.name.clone());
            out.push(r.description.clone());
            out.extend(r.exits.keys().cloned());
        }
        for o in &self.objects {
            out.push(o.name.clone());
        }
        for (i, t) in self.triggers.iter().enumerate() {
            out.push(self.trigger_command(i));
            out.push(t.message.clone());
        }
        for vs in self.paraphrases.values() {
            out.extend(vs.iter().cloned());
        }
        for e in &self.random_events {
            out.push(e.message.clone());
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.rooms.is_empty() {
            return Err(Error::InvalidSpec("a game needs at least one room".into()));
        }
        let mut ids = BTreeSet::new();
        for id in self
            .rooms
            .iter()
            .map(|r| &r.id)
            .chain(self.objects.iter().map(|o| &o.id))
            .chain(self.triggers.iter().map(|t| &t.id))
        {
            if !ids.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let rooms: BTreeSet<&str> = self.rooms.iter().map(|r| r.id.as_str()).collect();
        let objects: BTreeSet<&str> = self.objects.iter().map(|o| o.id.as_str()).collect();
        let room_ref = |id: &str, ctx: &str| {
            if rooms.contains(id) {
                Ok(())
            } else {
                Err(Error::UnknownReference(format!("room {id:?} ({ctx})")))
            }
        };
        let object_ref = |id: &str, ctx: &str| {
            if objects.contains(id) {
                Ok(())
            } else {
                Err(Error::UnknownReference(format!("object {id:?} ({ctx})")))
            }
        };
        let word = |w: &str, ctx: &str| {
            if !w.is_empty() && w.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit()) {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!(
                    "{ctx} {w:?} must be a single lowercase word"
                )))
            }
        };
        for r in &self.rooms {
            for (dir, exit) in &r.exits {
                word(dir, "direction")?;
                room_ref(exit.target(), &format!("exit {dir} of {}", r.id))?;
            }
        }
        let mut names = BTreeSet::new();
        for o in &self.objects {
            word(&o.name, "object name")?;
            if !names.insert(o.name.as_str()) {
                return Err(Error::DuplicateId(format!("object name {}", o.name)));
            }
            if o.location != "inventory" && o.location != "nowhere" {
                room_ref(&o.location, &format!("location of {}", o.id))?;
            }
        }
        for t in &self.triggers {
            word(&t.verb, "verb")?;
            word(&t.preposition, "preposition")?;
            if let Some(o) = &t.object {
                object_ref(o, &format!("trigger {}", t.id))?;
            }
            if let Some(i) = &t.instrument {
                if t.object.is_none() {
                    return Err(Error::InvalidSpec(format!(
                        "trigger {} has an instrument but no object",
                        t.id
                    )));
                }
                object_ref(i, &format!("trigger {}", t.id))?;
            }
            if let Some(r) = &t.room {
                room_ref(r, &format!("trigger {}", t.id))?;
            }
            for i in &t.requires_items {
                object_ref(i, &format!("trigger {}", t.id))?;
            }
        }
        for key in self.paraphrases.keys() {
            if !rooms.contains(key.as_str()) && !self.triggers.iter().any(|t| &t.id == key) {
                return Err(Error::UnknownReference(format!("paraphrase key {key:?}")));
            }
        }
        for e in &self.random_events {
            if !(0.0..=1.0).contains(&e.probability) {
                return Err(Error::InvalidSpec(format!(
                    "event probability {} outside [0, 1]",
                    e.probability
                )));
            }
            if let Some(r) = &e.room {
                room_ref(r, "random event")?;
            }
            match &e.effect {
                EventEffect::Teleport { room } => room_ref(room, "random event")?,
                EventEffect::Relocate { object, to } => {
                    object_ref(object, "random event")?;
                    if to != "nowhere" && to != "inventory" {
                        room_ref(to, "random event")?;
                    }
                }
                EventEffect::None | EventEffect::SetFlag { .. } | EventEffect::ClearFlag { .. } => {}
            }
        }
        Ok(())
    }

    /// Replays the walkthrough in deterministic mode; returns the reached score.
    pub fn replay_walkthrough(self: &Arc<Self>) -> Result<Option<i64>> {
        let Some(walk) = &self.walkthrough else {
            return Ok(None);
        };
        let (mut state, _) = GameState::reset(self.clone(), 0, false);
        state.set_step_limit(usize::MAX);
        for action in walk {
            state.step(action)?;
        }
        Ok(Some(state.score()))
    }
}

/// Parses and validates a game-spec document. A walkthrough, when present,
/// must reach exactly `max_score`.
pub fn parse_game_spec(text: &str) -> Result<Arc<GameSpec>> {
    let spec: GameSpec = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    spec.validate()?;
    let spec = Arc::new(spec);
    if let Some(reached) = spec.replay_walkthrough()? {
        if reached != spec.max_score {
            return Err(Error::WalkthroughMismatch {
                reached,
                expected: spec.max_score,
            });
        }
    }
    Ok(spec)
}
