//! Per-round record of an execution.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::grid::Node;
use crate::model::{Movement, ParticleId, ParticleState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlagEvent {
    Create {
        particle: ParticleId,
    },
    Forward {
        particle: ParticleId,
        to: ParticleId,
    },
    Clear {
        particle: ParticleId,
    },
}

impl FlagEvent {
    pub fn particle(&self) -> ParticleId {
        match *self {
            FlagEvent::Create { particle }
            | FlagEvent::Forward { particle, .. }
            | FlagEvent::Clear { particle } => particle,
        }
    }
}

/// A movement together with what the engine knew when it happened.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracedMove {
    pub movement: Movement,
    /// The expansion used up one of the actor's complaint flags.
    pub consumes_flag: bool,
    /// Out-neighbor of the actor's head in the forest graph just before the move.
    pub parent: Option<Node>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Move(TracedMove),
    Flag(FlagEvent),
    State {
        particle: ParticleId,
        state: ParticleState,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: u64,
    pub events: Vec<Event>,
}

impl RoundTrace {
    pub fn movements(&self) -> impl Iterator<Item = &TracedMove> {
        self.events.iter().filter_map(|e| match e {
            Event::Move(m) => Some(m),
            _ => None,
        })
    }

    pub fn flag_events(&self) -> impl Iterator<Item = &FlagEvent> {
        self.events.iter().filter_map(|e| match e {
            Event::Flag(f) => Some(f),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticleSnapshot {
    pub head: Node,
    pub tail: Node,
    pub state: String,
    pub flags: u8,
}

/// Particle records at the end of a round; round 0 is the initial configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub round: u64,
    pub particles: Vec<ParticleSnapshot>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub seed: u64,
    pub object: Vec<Node>,
    pub initial: Vec<Node>,
    pub rounds: Vec<RoundTrace>,
}

impl Trace {
    pub fn movement_count(&self) -> usize {
        self.rounds.iter().map(|r| r.movements().count()).sum()
    }

    /// Movements of every particle in execution order.
    pub fn per_particle_movements(&self, n: usize) -> Vec<Vec<(u64, TracedMove)>> {
        let mut out = vec![Vec::new(); n];
        for r in &self.rounds {
            for m in r.movements() {
                out[m.movement.actor.0].push((r.round, *m));
            }
        }
        out
    }

    /// Writes a header line followed by one JSON object per round.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header = serde_json::json!({
            "seed": self.seed,
            "n": self.initial.len(),
            "object": self.object,
            "initial": self.initial,
        });
        writeln!(w, "{header}")?;
        for r in &self.rounds {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Trace, serde_json::Error> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut trace = Trace::default();
        if let Some(h) = lines.next() {
            let v: serde_json::Value = serde_json::from_str(h)?;
            trace.seed = v["seed"].as_u64().unwrap_or_default();
            trace.object = serde_json::from_value(v["object"].clone())?;
            trace.initial = serde_json::from_value(v["initial"].clone())?;
        }
        for l in lines {
            trace.rounds.push(serde_json::from_str(l)?);
        }
        Ok(trace)
    }
}
