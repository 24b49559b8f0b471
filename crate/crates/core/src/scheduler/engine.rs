//! Sequential execution of the coating algorithm under a fair activation
//! sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::policy::ActivationPolicy;
use super::trace::{Event, FlagEvent, ParticleSnapshot, RoundTrace, Snapshot, Trace, TracedMove};
use crate::analysis::{is_legal, LayerStats};
use crate::coating::election::make_election;
use crate::coating::{
    self, Action, ActivationContext, CoatingParams, ElectionKind, LeaderElection,
};
use crate::coating::{NeighborView, Part, Slot};
use crate::grid::{layer_one_cycle, LayerMap, Node};
use crate::model::{Configuration, MoveError, Movement, Particle, ParticleId, ParticleState, Port};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub seed: u64,
    pub params: CoatingParams,
    pub election: ElectionKind,
    pub policy: ActivationPolicy,
    /// Defaults to `50 * n` rounds.
    pub max_rounds: Option<u64>,
    pub record_trace: bool,
    pub record_snapshots: bool,
    /// Check occupancy, connectivity and the forest structure after every round.
    pub check_invariants: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            params: CoatingParams::default(),
            election: ElectionKind::Randomized,
            policy: ActivationPolicy::default(),
            max_rounds: None,
            record_trace: false,
            record_snapshots: false,
            check_invariants: false,
        }
    }
}

impl RunOptions {
    pub fn with_seed(seed: u64) -> Self {
        RunOptions {
            seed,
            ..RunOptions::default()
        }
    }

    pub fn round_limit(&self, n: usize) -> u64 {
        self.max_rounds.unwrap_or(50 * n as u64).max(1)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("particle {0:?} attempted an illegal movement: {1}")]
    Movement(ParticleId, MoveError),
    #[error("invariant violated in round {round}: {message}")]
    Invariant { round: u64, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Quiescent,
    RoundLimit,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    /// Rounds executed before the first quiet round.
    pub rounds: u64,
    pub activations: u64,
    pub config: Configuration,
    pub leader: Option<Node>,
    pub stats: LayerStats,
    /// `layer_rounds[i - 1]` is the first round at whose end layer `i` was
    /// complete. The final layer counts as complete at quiescence.
    pub layer_rounds: Vec<Option<u64>>,
    pub trace: Option<Trace>,
    pub snapshots: Vec<Snapshot>,
}

impl RunResult {
    pub fn is_quiescent(&self) -> bool {
        self.outcome == Outcome::Quiescent
    }
}

/// What one activation did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ActivationReport {
    pub moved: bool,
    pub changed: bool,
}

/// An execution in progress.
pub struct Simulation {
    cfg: Configuration,
    params: CoatingParams,
    election: Box<dyn LeaderElection>,
    layers: LayerMap,
    stats: LayerStats,
    layer_one_size: usize,
    layer_one_contracted: usize,
    entrants: usize,
    retired_in_layer: Vec<usize>,
    layer_rounds: Vec<Option<u64>>,
    round: u64,
    activations: u64,
    record: bool,
    events: Vec<Event>,
}

fn is_entrant(state: ParticleState) -> bool {
    matches!(state, ParticleState::Idle | ParticleState::Follower)
}

impl Simulation {
    pub fn new(cfg: Configuration, opts: &RunOptions) -> Self {
        let (stats, layers) = LayerStats::with_map(cfg.object(), cfg.len());
        let cycle = layer_one_cycle(cfg.object());
        let election = make_election(opts.election, cycle, opts.seed);
        let mut sim = Simulation {
            params: opts.params,
            election,
            layer_one_size: layers.count(1),
            layer_one_contracted: 0,
            entrants: 0,
            retired_in_layer: vec![0; layers.max_layer() as usize + 1],
            layer_rounds: vec![None; stats.final_layer as usize],
            stats,
            layers,
            round: 0,
            activations: 0,
            record: opts.record_trace,
            events: Vec::new(),
            cfg,
        };
        for i in 0..sim.cfg.len() {
            let id = ParticleId(i);
            sim.layer_one_contracted += sim.layer_one_share(id);
            sim.entrants += usize::from(is_entrant(sim.cfg.particle(id).mem.state));
            if sim.cfg.particle(id).mem.state.is_retired() {
                let l = sim.layer_index(sim.cfg.particle(id).head);
                sim.retired_in_layer[l] += 1;
            }
        }
        sim
    }

    pub fn config(&self) -> &Configuration {
        &self.cfg
    }

    pub fn into_config(self) -> Configuration {
        self.cfg
    }

    pub fn leader(&self) -> Option<Node> {
        self.election.leader()
    }

    pub fn stats(&self) -> &LayerStats {
        &self.stats
    }

    pub fn layers(&self) -> &LayerMap {
        &self.layers
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn layer_one_complete(&self) -> bool {
        self.layer_one_contracted == self.layer_one_size
    }

    fn layer_index(&self, v: Node) -> usize {
        self.layers
            .layer(v)
            .map_or(self.retired_in_layer.len() - 1, |l| l as usize)
    }

    fn layer_one_share(&self, id: ParticleId) -> usize {
        let p = self.cfg.particle(id);
        usize::from(p.is_contracted() && self.layers.layer(p.head) == Some(1))
    }

    fn slot(&self, viewer: &Particle, v: Node) -> Slot {
        if viewer.occupies(v) {
            return Slot::Own;
        }
        if self.cfg.is_object(v) {
            return Slot::Object;
        }
        match self.cfg.occupant_particle(v) {
            None => Slot::Empty,
            Some(q) => Slot::Particle(self.view(viewer, q, v)),
        }
    }

    fn view(&self, viewer: &Particle, q: &Particle, v: Node) -> NeighborView {
        let points_to = q.pointer_node().and_then(|t| {
            if t == viewer.head {
                Some(Part::Head)
            } else if viewer.is_expanded() && t == viewer.tail {
                Some(Part::Tail)
            } else {
                None
            }
        });
        let marker = q.mem.state.is_marker();
        let marks_me = marker && q.mem.marker.is_some_and(|m| q.port_node(m) == viewer.head);
        let retired_at = |port: Option<Port>| {
            port.is_some_and(|c| {
                self.cfg
                    .occupant_particle(q.port_node(c))
                    .is_some_and(|w| w.mem.state.is_retired())
            })
        };
        NeighborView {
            state: q.mem.state,
            expanded: q.is_expanded(),
            at_tail: q.is_expanded() && q.tail == v,
            flags: q.mem.flags,
            layer: q.mem.layer,
            points_to,
            marks_me,
            marker_sides_retired: marker && retired_at(q.mem.cw) && retired_at(q.mem.ccw),
            awaits_follower: self.awaits_follower(q),
        }
    }

    fn awaits_follower(&self, q: &Particle) -> bool {
        if q.mem.state != ParticleState::Root
            || !q.is_expanded()
            || self.layers.layer(q.head) != Some(1)
        {
            return false;
        }
        q.tail.neighbors().into_iter().any(|v| {
            self.cfg.occupant_particle(v).is_some_and(|f| {
                f.mem.state == ParticleState::Follower && f.pointer_node() == Some(q.tail)
            })
        })
    }

    /// The local view of particle `id`.
    pub fn context(&self, id: ParticleId) -> ActivationContext {
        let p = self.cfg.particle(id);
        let around = |center: Node| {
            let mut slots = [Slot::Empty; 6];
            for port in Port::ALL {
                slots[port.0 as usize] = self.slot(p, center.neighbor(p.global(port)));
            }
            slots
        };
        ActivationContext {
            memory: p.mem,
            head: around(p.head),
            tail: p.is_expanded().then(|| around(p.tail)),
            at_leader_position: p.is_contracted() && self.election.leader() == Some(p.head),
            entrants_remain: self.entrants > 0,
            params: self.params,
        }
    }

    fn push_event(&mut self, e: Event) {
        if self.record {
            self.events.push(e);
        }
    }

    fn push_move(&mut self, movement: Movement, consumes_flag: bool, parent: Option<Node>) {
        self.push_event(Event::Move(TracedMove {
            movement,
            consumes_flag,
            parent,
        }));
    }

    /// Runs one activation of particle `id`.
    pub fn activate(&mut self, id: ParticleId) -> Result<ActivationReport, EngineError> {
        self.activations += 1;
        let mut report = ActivationReport::default();
        let before = self.cfg.particle(id).clone();
        if before.mem.state == ParticleState::Root
            && before.is_contracted()
            && self.layers.layer(before.head) == Some(1)
        {
            let complete = self.layer_one_complete();
            report.changed |= self.election.step(before.head, complete);
        }

        let decision = coating::activate(&self.context(id));
        let old = before.mem;
        let new = decision.memory;
        if !old.state.can_become(new.state) {
            return Err(self.violation(format!(
                "{:?} moved from {:?} to {:?}",
                id, old.state, new.state
            )));
        }
        if decision.register_candidate {
            self.election.register_candidate(before.head);
        }
        report.changed |= new != old;
        if new.state != old.state {
            self.entrants -= usize::from(is_entrant(old.state));
            self.entrants += usize::from(is_entrant(new.state));
            self.push_event(Event::State {
                particle: id,
                state: new.state,
            });
            if new.state.is_retired() {
                let l = self.layer_index(before.head);
                self.retired_in_layer[l] += 1;
            }
        }
        for _ in old.flags..new.flags {
            self.push_event(Event::Flag(FlagEvent::Create { particle: id }));
        }
        let expands = matches!(decision.action, Some(Action::Expand(_)));
        let consumed = old.flags > new.flags && expands;
        if old.flags > new.flags && !expands {
            for _ in new.flags..old.flags {
                self.push_event(Event::Flag(FlagEvent::Clear { particle: id }));
            }
        }
        self.cfg.particle_mut(id).mem = new;

        if let Some(action) = decision.action {
            self.apply_action(id, action, consumed)?;
            report.moved = true;
            report.changed = true;
        }
        if let Some(port) = decision.forward {
            self.forward(id, port)?;
            report.changed = true;
        }
        Ok(report)
    }

    fn apply_action(
        &mut self,
        id: ParticleId,
        action: Action,
        consumed: bool,
    ) -> Result<(), EngineError> {
        let p = self.cfg.particle(id).clone();
        let partner = match action {
            Action::Pull(port) => Some(p.tail.neighbor(p.global(port))),
            Action::Push(port) => Some(p.port_node(port)),
            _ => None,
        }
        .map(|v| {
            self.cfg.occupant(v).ok_or(EngineError::Movement(
                id,
                MoveError::IllegalHandover(id, id),
            ))
        })
        .transpose()?;
        let involved: Vec<ParticleId> = std::iter::once(id).chain(partner).collect();
        for &q in &involved {
            self.layer_one_contracted -= self.layer_one_share(q);
        }
        let parents: Vec<Option<Node>> = involved
            .iter()
            .map(|&q| self.cfg.particle(q).forest_parent())
            .collect();
        match action {
            Action::Expand(port) => {
                let m = self
                    .cfg
                    .expand(id, port)
                    .map_err(|e| EngineError::Movement(id, e))?;
                self.push_move(m, consumed, parents[0]);
            }
            Action::Contract => {
                let m = self
                    .cfg
                    .contract(id)
                    .map_err(|e| EngineError::Movement(id, e))?;
                self.push_move(m, false, parents[0]);
            }
            Action::Pull(_) | Action::Push(_) => {
                let q = partner.expect("handover partner");
                let (contraction, expansion) = self
                    .cfg
                    .handover(id, q)
                    .map_err(|e| EngineError::Movement(id, e))?;
                let parent_of = |who: ParticleId| if who == id { parents[0] } else { parents[1] };
                self.push_move(contraction, false, parent_of(contraction.actor));
                self.push_move(expansion, false, parent_of(expansion.actor));
            }
        }
        for &q in &involved {
            self.layer_one_contracted += self.layer_one_share(q);
        }
        Ok(())
    }

    fn forward(&mut self, id: ParticleId, port: Port) -> Result<(), EngineError> {
        let target = self.cfg.particle(id).port_node(port);
        let Some(q) = self.cfg.occupant(target) else {
            return Err(self.violation(format!("{id:?} forwarded a flag to empty node {target}")));
        };
        if self.cfg.particle(q).mem.flags >= self.params.flag_capacity
            || self.cfg.particle(id).mem.flags == 0
        {
            return Err(self.violation(format!("{id:?} forwarded a flag to {q:?} beyond capacity")));
        }
        self.cfg.particle_mut(id).mem.flags -= 1;
        self.cfg.particle_mut(q).mem.flags += 1;
        self.push_event(Event::Flag(FlagEvent::Forward {
            particle: id,
            to: q,
        }));
        Ok(())
    }

    fn violation(&self, message: String) -> EngineError {
        EngineError::Invariant {
            round: self.round + 1,
            message,
        }
    }

    /// Runs the given activations as one round. Returns whether anything
    /// changed and the events recorded during the round.
    pub fn run_round(
        &mut self,
        sequence: &[ParticleId],
    ) -> Result<(bool, Vec<Event>), EngineError> {
        let mut changed = false;
        for &id in sequence {
            changed |= self.activate(id)?.changed;
        }
        if !self.election.is_dormant() {
            changed = true;
        }
        if changed {
            self.round += 1;
            self.update_layer_rounds();
        }
        Ok((changed, std::mem::take(&mut self.events)))
    }

    fn update_layer_rounds(&mut self) {
        for i in 1..self.stats.final_layer {
            let k = (i - 1) as usize;
            if self.layer_rounds[k].is_none()
                && self.retired_in_layer[i as usize] == self.stats.b(i)
            {
                self.layer_rounds[k] = Some(self.round);
            }
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            round: self.round,
            particles: self
                .cfg
                .particles()
                .iter()
                .map(|p| ParticleSnapshot {
                    head: p.head,
                    tail: p.tail,
                    state: p.mem.state.label().to_string(),
                    flags: p.mem.flags,
                })
                .collect(),
        }
    }

    /// Structural checks: occupancy, connectivity, forest out-degree, flag
    /// capacity, and markers only releasing a layer once the one below retired.
    pub fn check_invariants(&self) -> Result<(), EngineError> {
        if !self.cfg.occupancy_consistent() {
            return Err(self.violation("occupancy index out of sync".into()));
        }
        if !self.cfg.is_connected() {
            return Err(self.violation("particles and object disconnected".into()));
        }
        if self.cfg.build_forest_graph().max_out_degree() > 1 {
            return Err(self.violation("forest vertex with two out-edges".into()));
        }
        for p in self.cfg.particles() {
            if p.mem.flags > self.params.flag_capacity {
                return Err(self.violation(format!("{:?} holds {} flags", p.id, p.mem.flags)));
            }
            if p.mem.state.is_retired() && p.is_expanded() {
                return Err(self.violation(format!("{:?} retired while expanded", p.id)));
            }
            // a marked position only opens once the whole layer below has retired
            let marked = p.mem.state
                == ParticleState::Retired {
                    leader: false,
                    marker: true,
                };
            let below = self.layers.layer(p.head).unwrap_or(0).saturating_sub(1);
            if marked && below >= 1 {
                let settled = self.layers.nodes(below).iter().all(|&v| {
                    self.cfg
                        .occupant_particle(v)
                        .is_some_and(|q| q.mem.state.is_retired())
                });
                if !settled {
                    return Err(self.violation(format!(
                        "{:?} retired at a marked position above an unfinished layer {below}",
                        p.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Runs the coating algorithm on `cfg` until a quiet round or the round limit.
pub fn run_async(cfg: Configuration, opts: &RunOptions) -> Result<RunResult, EngineError> {
    let n = cfg.len();
    let limit = opts.round_limit(n);
    let mut trace = opts.record_trace.then(|| Trace {
        seed: opts.seed,
        object: {
            let mut o: Vec<Node> = cfg.object().iter().copied().collect();
            o.sort_unstable();
            o
        },
        initial: cfg.particles().iter().map(|p| p.head).collect(),
        rounds: Vec::new(),
    });
    let mut sim = Simulation::new(cfg, opts);
    let mut snapshots = Vec::new();
    if opts.record_snapshots {
        snapshots.push(sim.snapshot());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let outcome = loop {
        if n == 0 {
            break Outcome::Quiescent;
        }
        let sequence = opts.policy.round_sequence(n, sim.round, &mut rng);
        let (changed, events) = sim.run_round(&sequence)?;
        if !changed {
            break Outcome::Quiescent;
        }
        if let Some(t) = trace.as_mut() {
            t.rounds.push(RoundTrace {
                round: sim.round,
                events,
            });
        }
        if opts.record_snapshots {
            snapshots.push(sim.snapshot());
        }
        if opts.check_invariants {
            sim.check_invariants()?;
        }
        if sim.round > limit {
            break Outcome::RoundLimit;
        }
    };
    let rounds = sim.round;
    let mut layer_rounds = sim.layer_rounds.clone();
    if outcome == Outcome::Quiescent && is_legal(sim.config()) {
        if let Some(last) = layer_rounds.last_mut() {
            *last = Some(rounds);
        }
    }
    Ok(RunResult {
        outcome,
        rounds,
        activations: sim.activations,
        leader: sim.leader(),
        stats: sim.stats.clone(),
        layer_rounds,
        trace,
        snapshots,
        config: sim.into_config(),
    })
}
