//! Parallel movement schedules rebuilt from asynchronous traces.
//!
//! A greedy forest schedule replays every particle's movement sequence from
//! the trace, executing in each parallel step a maximal set of mutually
//! compatible next movements. In complaint mode the complaint flags of the
//! trace travel along their recorded routes with a capacity of one flag per
//! particle.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::trace::{Event, FlagEvent, Trace, TracedMove};
use crate::grid::Node;
use crate::model::{Movement, MovementKind, ParticleId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Plain,
    Complaint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub head: Node,
    pub tail: Node,
}

impl Placement {
    pub fn contracted(v: Node) -> Self {
        Placement { head: v, tail: v }
    }

    pub fn is_expanded(&self) -> bool {
        self.head != self.tail
    }

    fn nodes(&self) -> impl Iterator<Item = Node> {
        let extra = self.is_expanded().then_some(self.tail);
        std::iter::once(self.head).chain(extra)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub placements: Vec<Placement>,
    /// Complaint flags held per particle; all zero in plain mode.
    pub flags: Vec<u8>,
}

/// What happened between two consecutive configurations.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelStep {
    pub movements: Vec<Movement>,
    /// Flag transfers `(from, to)`.
    pub forwards: Vec<(ParticleId, ParticleId)>,
    /// Particles that consumed a flag with a sole expansion.
    pub consumed: Vec<ParticleId>,
    /// Flags that appeared or were cleared by state changes.
    pub created: Vec<ParticleId>,
    pub cleared: Vec<ParticleId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelSchedule {
    pub mode: ScheduleMode,
    pub configs: Vec<ScheduleConfig>,
    pub steps: Vec<ParallelStep>,
}

impl ParallelSchedule {
    /// Number of parallel steps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleViolation {
    #[error("step {step}: node {node:?} occupied twice")]
    DoubleOccupancy { step: usize, node: Node },
    #[error("step {step}: particle {particle:?} made an illegal transition")]
    IllegalTransition { step: usize, particle: ParticleId },
    #[error("step {step}: particle {particle:?} holds {flags} flags")]
    FlagCapacity {
        step: usize,
        particle: ParticleId,
        flags: u8,
    },
    #[error("step {step}: flag forwarded from {from:?} to {to:?} is not allowed")]
    IllegalForward {
        step: usize,
        from: ParticleId,
        to: ParticleId,
    },
    #[error("schedule has {configs} configurations for {steps} steps")]
    Shape { configs: usize, steps: usize },
}

/// Checks a schedule against the movement rules of its mode.
pub fn validate_parallel_schedule(s: &ParallelSchedule) -> Result<(), ScheduleViolation> {
    if s.configs.len() != s.steps.len() + 1 {
        return Err(ScheduleViolation::Shape {
            configs: s.configs.len(),
            steps: s.steps.len(),
        });
    }
    for (i, c) in s.configs.iter().enumerate() {
        let mut seen = HashSet::new();
        for p in &c.placements {
            for v in p.nodes() {
                if !seen.insert(v) {
                    return Err(ScheduleViolation::DoubleOccupancy { step: i, node: v });
                }
            }
        }
        if s.mode == ScheduleMode::Complaint {
            if let Some((id, &f)) = c.flags.iter().enumerate().find(|(_, &f)| f > 1) {
                return Err(ScheduleViolation::FlagCapacity {
                    step: i,
                    particle: ParticleId(id),
                    flags: f,
                });
            }
        }
    }
    for (i, step) in s.steps.iter().enumerate() {
        let (before, after) = (&s.configs[i], &s.configs[i + 1]);
        let occupied: HashSet<Node> = before.placements.iter().flat_map(|p| p.nodes()).collect();
        let partners: HashMap<ParticleId, ParticleId> = step
            .movements
            .iter()
            .filter_map(|m| m.partner().map(|q| (m.actor, q)))
            .collect();
        for (id, (a, b)) in before.placements.iter().zip(&after.placements).enumerate() {
            let pid = ParticleId(id);
            let ok = if a == b {
                true
            } else if !a.is_expanded() && b.is_expanded() && b.tail == a.head {
                // expansion: into an empty node, or into the tail of a contracting partner
                match partners.get(&pid) {
                    Some(&q) => {
                        let (qa, qb) = (before.placements[q.0], after.placements[q.0]);
                        qa.is_expanded()
                            && !qb.is_expanded()
                            && qa.tail == b.head
                            && partners.get(&q) == Some(&pid)
                    }
                    None => !occupied.contains(&b.head),
                }
            } else if a.is_expanded() && !b.is_expanded() && b.head == a.head {
                match partners.get(&pid) {
                    Some(&q) => {
                        let (qa, qb) = (before.placements[q.0], after.placements[q.0]);
                        !qa.is_expanded()
                            && qb.is_expanded()
                            && qb.head == a.tail
                            && partners.get(&q) == Some(&pid)
                    }
                    None => true,
                }
            } else {
                false
            };
            if !ok {
                return Err(ScheduleViolation::IllegalTransition {
                    step: i,
                    particle: pid,
                });
            }
        }
        if s.mode == ScheduleMode::Complaint {
            let senders: HashSet<ParticleId> = step.forwards.iter().map(|&(a, _)| a).collect();
            for &(from, to) in &step.forwards {
                let adjacent = before.placements[from.0]
                    .nodes()
                    .any(|u| before.placements[to.0].nodes().any(|v| u.is_adjacent(v)));
                let room = before.flags[to.0] == 0 || senders.contains(&to);
                if !adjacent || !room {
                    return Err(ScheduleViolation::IllegalForward { step: i, from, to });
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("round {round}: handover half of {particle:?} is not followed by its partner's half")]
    UnpairedHandover { round: u64, particle: ParticleId },
    #[error("round {round}: particle {particle:?} held two complaint flags; complaint schedules need a flag capacity of one")]
    FlagCapacity { round: u64, particle: ParticleId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum FlagEnd {
    Held,
    Consumed {
        particle: ParticleId,
        movement: usize,
    },
    Cleared {
        round: u64,
    },
}

/// The recorded life of one complaint flag: who held it, in order.
#[derive(Clone, Debug, PartialEq, Eq)]
struct FlagRoute {
    created: u64,
    holders: Vec<ParticleId>,
    /// Round in which the flag reached `holders[k]`.
    arrivals: Vec<u64>,
    end: FlagEnd,
    end_round: Option<u64>,
}

impl FlagRoute {
    /// Remaining route length with the flag at hop `hop` (ended flags count zero).
    fn remaining(&self, hop: usize, ended: bool) -> usize {
        if ended {
            return 0;
        }
        let tail = usize::from(self.end != FlagEnd::Held);
        self.holders.len() - 1 - hop + tail
    }
}

/// Everything the schedule builder and the dominance check need from a trace.
#[derive(Clone, Debug)]
pub struct TraceReplay {
    pub n: usize,
    pub initial: Vec<Node>,
    /// `moves[p]` is the movement sequence M(p) with the round of each movement.
    pub moves: Vec<Vec<(u64, TracedMove)>>,
    flags: Vec<FlagRoute>,
    pub rounds: u64,
}

impl TraceReplay {
    pub fn new(trace: &Trace) -> Self {
        let n = trace.initial.len();
        let mut moves = vec![Vec::new(); n];
        let mut flags: Vec<FlagRoute> = Vec::new();
        let mut held: Vec<VecDeque<usize>> = vec![VecDeque::new(); n];
        for r in &trace.rounds {
            for e in &r.events {
                match *e {
                    Event::Move(m) => {
                        let actor = m.movement.actor;
                        if m.consumes_flag {
                            if let Some(f) = held[actor.0].pop_front() {
                                flags[f].end = FlagEnd::Consumed {
                                    particle: actor,
                                    movement: moves[actor.0].len(),
                                };
                                flags[f].end_round = Some(r.round);
                            }
                        }
                        moves[actor.0].push((r.round, m));
                    }
                    Event::Flag(FlagEvent::Create { particle }) => {
                        held[particle.0].push_back(flags.len());
                        flags.push(FlagRoute {
                            created: r.round,
                            holders: vec![particle],
                            arrivals: vec![r.round],
                            end: FlagEnd::Held,
                            end_round: None,
                        });
                    }
                    Event::Flag(FlagEvent::Forward { particle, to }) => {
                        if let Some(f) = held[particle.0].pop_front() {
                            flags[f].holders.push(to);
                            flags[f].arrivals.push(r.round);
                            held[to.0].push_back(f);
                        }
                    }
                    Event::Flag(FlagEvent::Clear { particle }) => {
                        if let Some(f) = held[particle.0].pop_front() {
                            flags[f].end = FlagEnd::Cleared { round: r.round };
                            flags[f].end_round = Some(r.round);
                        }
                    }
                    Event::State { .. } => {}
                }
            }
        }
        TraceReplay {
            n,
            initial: trace.initial.clone(),
            moves,
            flags,
            rounds: trace.rounds.last().map_or(0, |r| r.round),
        }
    }

    /// Number of movements each particle completed by the end of `round`.
    pub fn progress_after(&self, round: u64) -> Vec<usize> {
        self.moves
            .iter()
            .map(|m| m.iter().take_while(|(r, _)| *r <= round).count())
            .collect()
    }

    /// Per-flag `(hop, ended)` at the end of `round`, `None` if not yet created.
    fn flags_after(&self, round: u64) -> Vec<Option<(usize, bool)>> {
        self.flags
            .iter()
            .map(|f| {
                (f.created <= round).then(|| {
                    let hop = f.arrivals.iter().filter(|&&a| a <= round).count() - 1;
                    (hop, f.end_round.is_some_and(|e| e <= round))
                })
            })
            .collect()
    }

    pub fn flag_count(&self) -> usize {
        self.flags.len()
    }

    /// Head and tail distance of `p` after `k` of its movements.
    pub fn distances(&self, p: usize, k: usize) -> (usize, usize) {
        let total = self.moves[p]
            .iter()
            .filter(|(_, m)| m.movement.is_expansion())
            .count();
        let done = &self.moves[p][..k];
        let exp = done
            .iter()
            .filter(|(_, m)| m.movement.is_expansion())
            .count();
        let con = k - exp;
        (total - exp, total - con)
    }

    /// Placement of `p` after `k` of its movements.
    pub fn placement(&self, p: usize, k: usize) -> Placement {
        let mut pl = Placement::contracted(self.initial[p]);
        for (_, m) in &self.moves[p][..k] {
            apply(&mut pl, &m.movement);
        }
        pl
    }
}

fn apply(pl: &mut Placement, m: &Movement) {
    if m.is_expansion() {
        pl.head = m.node_to;
    } else {
        pl.tail = pl.head;
    }
}

/// One schedulable piece of the trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Act {
    /// A sole movement; `bool` marks a consumed flag.
    Sole(Movement, bool),
    /// Both halves of a handover: the contraction, then the expansion.
    Handover(Movement, Movement),
    Create(ParticleId),
    Forward(ParticleId, ParticleId),
    Clear(ParticleId),
}

impl Act {
    fn is_exogenous(&self) -> bool {
        matches!(self, Act::Create(_) | Act::Clear(_))
    }
}

#[derive(Clone, Debug)]
struct TraceEvent {
    round: u64,
    act: Act,
    /// Predecessors that must be done in an earlier step.
    hard: Vec<usize>,
    /// Predecessors that may be done earlier in the same step.
    soft: Vec<usize>,
}

/// Splits a trace into schedulable events with their ordering constraints:
/// each particle performs its events in trace order, and events changing the
/// occupant of a node happen in trace order.
fn trace_events(trace: &Trace, mode: ScheduleMode) -> Result<Vec<TraceEvent>, ScheduleError> {
    let n = trace.initial.len();
    let mut raw: Vec<(u64, Act)> = Vec::new();
    let mut held = vec![0u8; n];
    for r in &trace.rounds {
        let mut events = r.events.iter().peekable();
        while let Some(e) = events.next() {
            let act = match *e {
                Event::Move(m) => match m.movement.kind {
                    MovementKind::SoleExpansion | MovementKind::SoleContraction => Act::Sole(
                        m.movement,
                        m.consumes_flag && mode == ScheduleMode::Complaint,
                    ),
                    MovementKind::HandoverContraction { partner }
                    | MovementKind::HandoverExpansion { partner } => {
                        let other = match events.next() {
                            Some(Event::Move(o))
                                if o.movement.actor == partner
                                    && o.movement.partner() == Some(m.movement.actor) =>
                            {
                                o.movement
                            }
                            _ => {
                                return Err(ScheduleError::UnpairedHandover {
                                    round: r.round,
                                    particle: m.movement.actor,
                                })
                            }
                        };
                        if m.movement.is_expansion() {
                            Act::Handover(other, m.movement)
                        } else {
                            Act::Handover(m.movement, other)
                        }
                    }
                },
                Event::Flag(_) if mode == ScheduleMode::Plain => continue,
                Event::Flag(FlagEvent::Create { particle }) => Act::Create(particle),
                Event::Flag(FlagEvent::Forward { particle, to }) => Act::Forward(particle, to),
                Event::Flag(FlagEvent::Clear { particle }) => Act::Clear(particle),
                Event::State { .. } => continue,
            };
            let (gain, loss) = match act {
                Act::Create(p) => (Some(p), None),
                Act::Forward(p, q) => (Some(q), Some(p)),
                Act::Clear(p) => (None, Some(p)),
                Act::Sole(m, true) => (None, Some(m.actor)),
                _ => (None, None),
            };
            if let Some(p) = loss {
                held[p.0] = held[p.0].saturating_sub(1);
            }
            if let Some(p) = gain {
                held[p.0] += 1;
                if held[p.0] > 1 {
                    return Err(ScheduleError::FlagCapacity {
                        round: r.round,
                        particle: p,
                    });
                }
            }
            raw.push((r.round, act));
        }
    }

    let mut last_of: Vec<Option<usize>> = vec![None; n];
    let mut last_at: HashMap<Node, usize> = HashMap::new();
    let mut out: Vec<TraceEvent> = Vec::with_capacity(raw.len());
    for (i, &(round, act)) in raw.iter().enumerate() {
        let (particles, node): (Vec<ParticleId>, Option<Node>) = match act {
            Act::Sole(m, _) if m.is_expansion() => (vec![m.actor], Some(m.node_to)),
            Act::Sole(m, _) => (vec![m.actor], Some(m.node_from)),
            Act::Handover(c, e) => (vec![c.actor, e.actor], Some(c.node_from)),
            Act::Create(p) | Act::Clear(p) => (vec![p], None),
            Act::Forward(p, q) => (vec![p, q], None),
        };
        let mut ev = TraceEvent {
            round,
            act,
            hard: Vec::new(),
            soft: Vec::new(),
        };
        for &p in &particles {
            if let Some(j) = last_of[p.0] {
                let pipelined = matches!((out[j].act, act), (Act::Forward(a, _), Act::Forward(_, b)) if a == p && b == p);
                if act.is_exogenous() || out[j].act.is_exogenous() || pipelined {
                    ev.soft.push(j);
                } else {
                    ev.hard.push(j);
                }
            }
            last_of[p.0] = Some(i);
        }
        if let Some(v) = node {
            if let Some(j) = last_at.insert(v, i) {
                ev.hard.push(j);
            }
        }
        out.push(ev);
    }
    Ok(out)
}

struct Builder {
    events: Vec<TraceEvent>,
    /// Step in which each event was performed.
    done: Vec<Option<usize>>,
    placements: Vec<Placement>,
    flags: Vec<u8>,
    mode: ScheduleMode,
}

/// Per-step capacity of each particle.
#[derive(Clone, Copy, Default)]
struct Budget {
    moved: bool,
    sent: bool,
    received: bool,
}

impl Builder {
    fn ready(&self, e: usize, step: usize) -> bool {
        let ev = &self.events[e];
        ev.round as usize <= step
            && ev
                .hard
                .iter()
                .all(|&j| self.done[j].is_some_and(|s| s < step))
            && ev.soft.iter().all(|&j| self.done[j].is_some())
    }

    fn fits(&self, act: Act, budget: &[Budget]) -> bool {
        match act {
            Act::Sole(m, _) => !budget[m.actor.0].moved && !budget[m.actor.0].sent,
            Act::Handover(c, e) => [c.actor, e.actor]
                .iter()
                .all(|p| !budget[p.0].moved && !budget[p.0].sent),
            Act::Forward(p, q) => !budget[p.0].sent && !budget[p.0].moved && !budget[q.0].received,
            Act::Create(_) | Act::Clear(_) => true,
        }
    }

    fn perform(&mut self, act: Act, budget: &mut [Budget], step: &mut ParallelStep) {
        match act {
            Act::Sole(m, consumed) => {
                apply(&mut self.placements[m.actor.0], &m);
                budget[m.actor.0].moved = true;
                step.movements.push(m);
                if consumed {
                    self.flags[m.actor.0] -= 1;
                    step.consumed.push(m.actor);
                }
            }
            Act::Handover(c, e) => {
                apply(&mut self.placements[c.actor.0], &c);
                apply(&mut self.placements[e.actor.0], &e);
                budget[c.actor.0].moved = true;
                budget[e.actor.0].moved = true;
                step.movements.push(c);
                step.movements.push(e);
            }
            Act::Forward(p, q) => {
                self.flags[p.0] -= 1;
                self.flags[q.0] += 1;
                budget[p.0].sent = true;
                budget[q.0].received = true;
                step.forwards.push((p, q));
            }
            Act::Create(p) => {
                self.flags[p.0] += 1;
                step.created.push(p);
            }
            Act::Clear(p) => {
                self.flags[p.0] -= 1;
                step.cleared.push(p);
            }
        }
    }

    fn config(&self) -> ScheduleConfig {
        ScheduleConfig {
            placements: self.placements.clone(),
            flags: match self.mode {
                ScheduleMode::Plain => vec![0; self.placements.len()],
                ScheduleMode::Complaint => self.flags.clone(),
            },
        }
    }
}

/// Rebuilds a greedy forest schedule from the movements recorded in `trace`.
/// Every step performs as many pending trace events as the movement rules
/// allow, but none before the round in which the asynchronous run performed
/// it; `seed` fixes the order in which ready events claim their particles.
///
/// Complaint mode needs a trace recorded with a flag capacity of one.
pub fn build_greedy_forest_schedule(
    trace: &Trace,
    mode: ScheduleMode,
    seed: u64,
) -> Result<ParallelSchedule, ScheduleError> {
    let events = trace_events(trace, mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = trace.initial.len();
    let mut b = Builder {
        done: vec![None; events.len()],
        events,
        placements: trace
            .initial
            .iter()
            .map(|&v| Placement::contracted(v))
            .collect(),
        flags: vec![0; n],
        mode,
    };
    let mut schedule = ParallelSchedule {
        mode,
        configs: vec![b.config()],
        steps: Vec::new(),
    };
    let mut first_open = 0;
    while first_open < b.events.len() {
        let index = schedule.steps.len() + 1;
        let mut step = ParallelStep::default();
        let mut budget = vec![Budget::default(); n];
        let released = b.events[first_open..]
            .iter()
            .take_while(|e| e.round as usize <= index)
            .count();
        let mut open: Vec<usize> = (first_open..first_open + released)
            .filter(|&e| b.done[e].is_none())
            .collect();
        loop {
            open.shuffle(&mut rng);
            let mut progressed = false;
            open.retain(|&e| {
                if b.ready(e, index) && b.fits(b.events[e].act, &budget) {
                    let act = b.events[e].act;
                    b.perform(act, &mut budget, &mut step);
                    b.done[e] = Some(index);
                    progressed = true;
                    false
                } else {
                    true
                }
            });
            if !progressed {
                break;
            }
        }
        while first_open < b.events.len() && b.done[first_open].is_some() {
            first_open += 1;
        }
        schedule.steps.push(step);
        schedule.configs.push(b.config());
    }
    Ok(schedule)
}

/// A configuration index where the asynchronous run falls behind the schedule.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DominanceViolation {
    #[error("round {round}: particle {particle:?} has distances {async_d:?} asynchronously but {sched_d:?} in the schedule")]
    Particle {
        round: usize,
        particle: ParticleId,
        async_d: (usize, usize),
        sched_d: (usize, usize),
    },
    #[error("round {round}: flag {flag} has complaint distance {async_d} asynchronously but {sched_d} in the schedule")]
    Flag {
        round: usize,
        flag: usize,
        async_d: usize,
        sched_d: usize,
    },
    #[error("round {round}: particle {particle:?} is off its recorded path")]
    OffPath { round: usize, particle: ParticleId },
}

/// Per-index comparison of the asynchronous configurations against the
/// schedule. Indices past either end use that run's final configuration.
pub fn check_dominance(trace: &Trace, sched: &ParallelSchedule) -> Result<(), DominanceViolation> {
    let replay = TraceReplay::new(trace);
    let horizon = (sched.configs.len() - 1).max(replay.rounds as usize);
    // schedule progress per configuration, reconstructed from its steps
    let mut sched_progress = vec![vec![0usize; replay.n]];
    for step in &sched.steps {
        let mut next = sched_progress.last().unwrap().clone();
        for m in &step.movements {
            next[m.actor.0] += 1;
        }
        sched_progress.push(next);
    }
    let sched_flags = schedule_flag_states(&replay, sched);
    for i in 0..=horizon {
        let a = replay.progress_after(i as u64);
        let si = i.min(sched.configs.len() - 1);
        let s = &sched_progress[si];
        for p in 0..replay.n {
            if replay.placement(p, s[p]) != sched.configs[si].placements[p] {
                return Err(DominanceViolation::OffPath {
                    round: i,
                    particle: ParticleId(p),
                });
            }
            let (ah, at) = replay.distances(p, a[p]);
            let (sh, st) = replay.distances(p, s[p]);
            if ah > sh || at > st {
                return Err(DominanceViolation::Particle {
                    round: i,
                    particle: ParticleId(p),
                    async_d: (ah, at),
                    sched_d: (sh, st),
                });
            }
        }
        if sched.mode == ScheduleMode::Complaint {
            let af = replay.flags_after(i as u64);
            for (f, route) in replay.flags.iter().enumerate() {
                let (Some((ah, ae)), Some((sh, se))) = (af[f], sched_flags[si][f]) else {
                    continue;
                };
                let (ad, sd) = (route.remaining(ah, ae), route.remaining(sh, se));
                if ad > sd {
                    return Err(DominanceViolation::Flag {
                        round: i,
                        flag: f,
                        async_d: ad,
                        sched_d: sd,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Replays the flag hops of a complaint schedule to per-configuration flag states.
fn schedule_flag_states(
    replay: &TraceReplay,
    sched: &ParallelSchedule,
) -> Vec<Vec<Option<(usize, bool)>>> {
    let mut state: Vec<Option<(usize, bool)>> = replay
        .flags
        .iter()
        .map(|f| (f.created == 0).then_some((0, false)))
        .collect();
    let mut out = vec![state.clone()];
    for (i, step) in sched.steps.iter().enumerate() {
        let round = i as u64 + 1;
        let mut moved: HashSet<usize> = HashSet::new();
        for &(from, to) in &step.forwards {
            let f = (0..replay.flags.len()).find(|&f| {
                !moved.contains(&f)
                    && matches!(state[f], Some((hop, false)) if replay.flags[f].holders[hop] == from
                        && replay.flags[f].holders.get(hop + 1) == Some(&to))
            });
            if let Some(f) = f {
                let (hop, _) = state[f].unwrap();
                state[f] = Some((hop + 1, false));
                moved.insert(f);
            }
        }
        for &p in &step.consumed {
            let f = (0..replay.flags.len()).find(|&f| {
                !moved.contains(&f)
                    && matches!(replay.flags[f].end, FlagEnd::Consumed { particle, .. } if particle == p)
                    && matches!(state[f], Some((hop, false)) if hop + 1 == replay.flags[f].holders.len())
            });
            if let Some(f) = f {
                state[f] = state[f].map(|(h, _)| (h, true));
            }
        }
        for (f, route) in replay.flags.iter().enumerate() {
            match state[f] {
                None if route.created <= round => state[f] = Some((0, false)),
                Some((hop, false)) if hop + 1 == route.holders.len() => {
                    if let FlagEnd::Cleared { round: r } = route.end {
                        if r <= round && step.cleared.contains(&route.holders[hop]) {
                            state[f] = Some((hop, true));
                        }
                    }
                }
                _ => {}
            }
        }
        out.push(state.clone());
    }
    out
}

/// An expanded particle waiting on a handover contraction whose followers are all expanded.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("configuration {config}: expanded parent {parent:?} has no contracted child")]
pub struct ExpandedParentViolation {
    pub config: usize,
    pub parent: ParticleId,
}

/// Every expanded parent keeps at least one contracted child. In schedule
/// configurations the children of `p` are the particles whose next pending
/// movement is a handover expansion into `p`, and `p` is a parent when its
/// own next movement is a handover contraction.
pub fn check_expanded_parent_invariant(
    trace: &Trace,
    sched: &ParallelSchedule,
) -> Result<(), ExpandedParentViolation> {
    let replay = TraceReplay::new(trace);
    let mut next = vec![0usize; replay.n];
    for (i, config) in sched.configs.iter().enumerate() {
        let mut children: HashMap<usize, Vec<usize>> = HashMap::new();
        for q in 0..replay.n {
            if let Some((_, m)) = replay.moves[q].get(next[q]) {
                if let MovementKind::HandoverExpansion { partner } = m.movement.kind {
                    children.entry(partner.0).or_default().push(q);
                }
            }
        }
        for p in 0..replay.n {
            let waiting = matches!(
                replay.moves[p].get(next[p]).map(|(_, m)| m.movement.kind),
                Some(MovementKind::HandoverContraction { .. })
            );
            if !waiting || !config.placements[p].is_expanded() {
                continue;
            }
            let kids = children.get(&p).map(Vec::as_slice).unwrap_or(&[]);
            if !kids.is_empty() && kids.iter().all(|&q| config.placements[q].is_expanded()) {
                return Err(ExpandedParentViolation {
                    config: i,
                    parent: ParticleId(p),
                });
            }
        }
        if let Some(step) = sched.steps.get(i) {
            for m in &step.movements {
                next[m.actor.0] += 1;
            }
        }
    }
    Ok(())
}
