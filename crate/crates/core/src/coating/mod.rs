//! The Universal Coating algorithm as a pure function of a particle's local view.
//!
//! [`activate`] receives an [`ActivationContext`] holding only the acting
//! particle's memory and what it can see through its ports, and returns a
//! [`Decision`]: the new memory, at most one movement, and at most one
//! complaint-flag transfer. Applying the decision is the engine's job.

pub mod election;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Memory, ParticleState, Port};

pub use election::{ElectionKind, LeaderElection, OracleElection, RandomizedElection};

/// Which of the acting particle's nodes a neighbor refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Head,
    Tail,
}

/// What a particle sees of a neighboring particle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NeighborView {
    pub state: ParticleState,
    pub expanded: bool,
    /// The node behind this port is the neighbor's tail.
    pub at_tail: bool,
    pub flags: u8,
    pub layer: u8,
    /// The neighbor's parent (follower) or dir (root) pointer designates one
    /// of the acting particle's nodes.
    pub points_to: Option<Part>,
    /// The neighbor is a marker whose marker port designates the acting
    /// particle's head.
    pub marks_me: bool,
    /// For markers: the particles at its CW and CCW ports are both retired.
    pub marker_sides_retired: bool,
    /// An expanded layer-1 root whose tail has a follower child waiting to be
    /// pulled into layer 1.
    pub awaits_follower: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Empty,
    Object,
    /// The other node of the acting particle itself.
    Own,
    Particle(NeighborView),
}

impl Slot {
    pub fn particle(&self) -> Option<&NeighborView> {
        match self {
            Slot::Particle(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExecutionMode {
    Asynchronous,
    Parallel,
}

/// Algorithm knobs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoatingParams {
    /// Roots created from idle particles also create a complaint flag.
    pub root_generates_flag: bool,
    /// Complaint flags a particle may hold.
    pub flag_capacity: u8,
}

impl Default for CoatingParams {
    fn default() -> Self {
        CoatingParams {
            root_generates_flag: true,
            flag_capacity: 2,
        }
    }
}

impl CoatingParams {
    pub fn mode(&self) -> ExecutionMode {
        if self.flag_capacity <= 1 {
            ExecutionMode::Parallel
        } else {
            ExecutionMode::Asynchronous
        }
    }
}

/// The local view handed to [`activate`]. Holds no coordinates, ids or counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActivationContext {
    pub memory: Memory,
    /// Slots around the head, indexed by local port label.
    pub head: [Slot; 6],
    /// Slots around the tail when expanded.
    pub tail: Option<[Slot; 6]>,
    /// The leader election announced this particle's node as leader position.
    pub at_leader_position: bool,
    /// Some particle is still idle or a follower, so layer-1 chains of roots
    /// may still have to shift to make room.
    pub entrants_remain: bool,
    pub params: CoatingParams,
}

impl ActivationContext {
    pub fn is_contracted(&self) -> bool {
        self.tail.is_none()
    }

    fn all_slots(&self) -> impl Iterator<Item = &Slot> {
        self.head.iter().chain(self.tail.iter().flatten())
    }

    fn has_idle_neighbor(&self) -> bool {
        self.all_slots()
            .any(|s| s.particle().is_some_and(|v| v.state == ParticleState::Idle))
    }

    fn touches_object(&self) -> bool {
        self.head.contains(&Slot::Object)
    }

    fn touches_retired(&self) -> bool {
        self.head
            .iter()
            .any(|s| s.particle().is_some_and(|v| v.state.is_retired()))
    }

    /// Whether `q` counts as a child of the acting particle.
    fn is_child(&self, q: &NeighborView) -> bool {
        match q.state {
            ParticleState::Follower => true,
            ParticleState::Root => {
                self.memory.state.is_active() && (self.entrants_remain || !self.touches_object())
            }
            _ => false,
        }
    }

    /// Tail ports of children whose pointer designates the tail.
    fn tail_children(&self) -> impl Iterator<Item = (Port, &NeighborView)> {
        self.tail.iter().flat_map(move |slots| {
            Port::ALL
                .into_iter()
                .filter_map(move |p| match &slots[p.0 as usize] {
                    Slot::Particle(q) if q.points_to == Some(Part::Tail) && self.is_child(q) => {
                        Some((p, q))
                    }
                    _ => None,
                })
        })
    }

    fn head_slot(&self, port: Port) -> &Slot {
        &self.head[port.0 as usize]
    }
}

/// A movement requested by the acting particle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    /// Sole expansion through a head port.
    Expand(Port),
    /// Sole contraction onto the head.
    Contract,
    /// Handover contraction with the contracted child behind this tail port.
    Pull(Port),
    /// Handover expansion into the tail of the expanded particle at this head port.
    Push(Port),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub memory: Memory,
    pub action: Option<Action>,
    /// Forward one complaint flag through this head port.
    pub forward: Option<Port>,
    /// The particle made its node a leader candidate position.
    pub register_candidate: bool,
}

impl Decision {
    fn keep(memory: Memory) -> Self {
        Decision {
            memory,
            action: None,
            forward: None,
            register_candidate: false,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("every port of the particle is incident to the surface below it")]
pub struct AllPortsIncident;

/// Runs one activation of the acting particle.
pub fn activate(ctx: &ActivationContext) -> Decision {
    match ctx.memory.state {
        ParticleState::Idle => activate_idle(ctx),
        ParticleState::Follower => activate_follower(ctx),
        ParticleState::Root => activate_root(ctx),
        ParticleState::Retired { .. } => {
            let mut mem = ctx.memory;
            mem.flags = mem.flags.saturating_sub(1);
            Decision::keep(mem)
        }
    }
}

fn activate_idle(ctx: &ActivationContext) -> Decision {
    let mut mem = ctx.memory;
    if ctx.touches_object() {
        mem.state = ParticleState::Root;
        settle_layer(ctx, &mut mem);
        if ctx.params.root_generates_flag {
            mem.flags += 1;
        }
        return Decision {
            register_candidate: true,
            ..Decision::keep(mem)
        };
    }
    if ctx.touches_retired() {
        mem.state = ParticleState::Root;
        settle_layer(ctx, &mut mem);
        if ctx.params.root_generates_flag {
            mem.flags += 1;
        }
        return Decision::keep(mem);
    }
    let parent = Port::ALL.into_iter().find(|&p| {
        ctx.head_slot(p)
            .particle()
            .is_some_and(|q| q.state.is_active())
    });
    if let Some(port) = parent {
        mem.state = ParticleState::Follower;
        mem.parent = Some(port);
        mem.flags += 1;
    }
    Decision::keep(mem)
}

/// Records the layer of a particle that just became a root.
fn settle_layer(ctx: &ActivationContext, mem: &mut Memory) {
    let mut probe = *mem;
    if orient(ctx, &mut probe) {
        mem.layer = probe.layer;
    }
}

fn activate_follower(ctx: &ActivationContext) -> Decision {
    let mut mem = ctx.memory;
    if ctx.is_contracted() {
        if ctx.touches_object() || ctx.touches_retired() {
            mem.state = ParticleState::Root;
            mem.adopted_parent = mem.parent.is_some();
            settle_layer(ctx, &mut mem);
            return Decision::keep(mem);
        }
        let mut decision = Decision::keep(mem);
        match handover(ctx) {
            Some(action) => decision.action = Some(action),
            None => decision.forward = mem.parent.filter(|&p| forward_complaint(ctx, p)),
        }
        return decision;
    }
    let mut decision = Decision::keep(mem);
    decision.action = expanded_move(ctx);
    if let Some(Action::Pull(_)) = decision.action {
        decision.forward = mem.parent.filter(|&p| forward_complaint(ctx, p));
    }
    decision
}

fn activate_root(ctx: &ActivationContext) -> Decision {
    if !ctx.is_contracted() {
        let mut decision = Decision::keep(ctx.memory);
        decision.action = expanded_move(ctx);
        if let Some(Action::Pull(_)) = decision.action {
            decision.forward = ctx.memory.dir.filter(|&p| forward_complaint(ctx, p));
        }
        return decision;
    }
    let mut mem = ctx.memory;
    let oriented = orient(ctx, &mut mem);
    if let Some(retired) = marker_retired_conditions(ctx, &mem) {
        return Decision::keep(retired);
    }
    let mut decision = Decision::keep(mem);
    if !oriented {
        return decision;
    }
    let local = ActivationContext {
        memory: mem,
        ..*ctx
    };
    if let Some(action) = handover(&local) {
        decision.action = Some(action);
        return decision;
    }
    let (mem, action) = extend_layer(&local);
    decision.memory = mem;
    decision.action = action;
    if action.is_none() {
        decision.forward = mem.dir.filter(|&p| forward_complaint(&local, p));
    }
    decision
}

/// Moves of an expanded follower or root: hand over to a contracted child at
/// the tail, or contract when nothing is attached to the tail.
fn expanded_move(ctx: &ActivationContext) -> Option<Action> {
    if let Some(action) = handover(ctx) {
        return Some(action);
    }
    let has_children = ctx.tail_children().next().is_some();
    (!has_children && !ctx.has_idle_neighbor()).then_some(Action::Contract)
}

/// Handover decision for the acting particle, if one applies.
pub fn handover(ctx: &ActivationContext) -> Option<Action> {
    let mem = &ctx.memory;
    if !ctx.is_contracted() {
        if mem.state == ParticleState::Root && ctx.touches_object() {
            let followers: Vec<(Port, &NeighborView)> = ctx
                .tail_children()
                .filter(|(_, q)| q.state == ParticleState::Follower)
                .collect();
            if !followers.is_empty() {
                // a contracted follower child is pulled; an expanded one is waited for
                return followers
                    .iter()
                    .find(|(_, q)| !q.expanded)
                    .map(|&(p, _)| Action::Pull(p));
            }
        }
        return ctx
            .tail_children()
            .find(|(_, q)| !q.expanded)
            .map(|(p, _)| Action::Pull(p));
    }
    let target = match mem.state {
        ParticleState::Follower => mem.parent,
        ParticleState::Root => mem.dir,
        _ => None,
    }?;
    let q = ctx.head_slot(target).particle()?;
    let eligible = match mem.state {
        ParticleState::Follower => q.state.is_active(),
        _ => {
            q.state == ParticleState::Root
                && !q.awaits_follower
                && (ctx.entrants_remain || !ctx.touches_object())
        }
    };
    (eligible && q.expanded && q.at_tail).then_some(Action::Push(target))
}

/// Whether a contracted particle forwards a complaint flag through `port`.
pub fn forward_complaint(ctx: &ActivationContext, port: Port) -> bool {
    if ctx.memory.flags == 0 {
        return false;
    }
    match ctx.head_slot(port) {
        Slot::Particle(q)
            if ctx.memory.state == ParticleState::Root
                && (q.state != ParticleState::Root || q.expanded) =>
        {
            false
        }
        Slot::Particle(q) => q.flags < ctx.params.flag_capacity,
        _ => false,
    }
}

fn incident_below(slot: &Slot, layer: u8) -> bool {
    match slot {
        Slot::Object => true,
        Slot::Particle(q) => q.state.is_retired() && q.layer == (layer + 3) % 4,
        _ => false,
    }
}

/// Computes `(cw, ccw)`: the first ports found by rotating away from `down`
/// in either sense that are not incident to the surface below.
pub fn clockwise(
    ctx: &ActivationContext,
    down: Port,
    layer: u8,
) -> Result<(Port, Port), AllPortsIncident> {
    let blocked = |p: Port| incident_below(ctx.head_slot(p), layer);
    let scan = |step: i32| {
        let mut j = down;
        for _ in 0..6 {
            if !blocked(j) {
                return Some(j);
            }
            j = j.rotate(step);
        }
        None
    };
    match (scan(-1), scan(1)) {
        (Some(cw), Some(ccw)) => Ok((cw, ccw)),
        _ => Err(AllPortsIncident),
    }
}

/// Recomputes `layer`, `down`, `cw`, `ccw` and `dir` for a contracted root.
/// Returns false when the particle cannot orient itself.
fn orient(ctx: &ActivationContext, mem: &mut Memory) -> bool {
    let below = if let Some(p) = Port::ALL
        .into_iter()
        .find(|&p| *ctx.head_slot(p) == Slot::Object)
    {
        Some((p, 1))
    } else {
        let retired: Vec<(Port, u8)> = Port::ALL
            .into_iter()
            .filter_map(|p| match ctx.head_slot(p) {
                Slot::Particle(q) if q.state.is_retired() => Some((p, q.layer)),
                _ => None,
            })
            .collect();
        // adjacent layers differ by at most one, so the cyclic minimum is unique
        retired
            .iter()
            .find(|(_, l)| !retired.iter().any(|(_, m)| *m == (l + 3) % 4))
            .map(|&(p, l)| (p, (l + 1) % 4))
    };
    let Some((down, layer)) = below else {
        return false;
    };
    mem.down = Some(down);
    mem.layer = layer;
    match clockwise(ctx, down, layer) {
        Ok((cw, ccw)) => {
            mem.cw = Some(cw);
            mem.ccw = Some(ccw);
            mem.dir = Some(if layer % 2 == 1 { cw } else { ccw });
            true
        }
        Err(AllPortsIncident) => false,
    }
}

/// The extension branch for a contracted root: recompute orientation and
/// expand along `dir` when allowed. Returns the updated memory and movement.
pub fn layer_extension(ctx: &ActivationContext) -> (Memory, Option<Action>) {
    let mut mem = ctx.memory;
    if !orient(ctx, &mut mem) {
        return (mem, None);
    }
    extend_layer(&ActivationContext {
        memory: mem,
        ..*ctx
    })
}

fn extend_layer(ctx: &ActivationContext) -> (Memory, Option<Action>) {
    let mut mem = ctx.memory;
    let Some(dir) = mem.dir else {
        return (mem, None);
    };
    let free = *ctx.head_slot(dir) == Slot::Empty;
    if free && (!ctx.touches_object() || mem.flags > 0) {
        mem.flags = mem.flags.saturating_sub(1);
        return (mem, Some(Action::Expand(dir)));
    }
    (mem, None)
}

/// Marker port chosen by the leader: the bisector of the arc between its CW
/// and CCW ports that avoids `down`. With two bisectors, the one farther
/// from `down` wins.
pub fn leader_marker_port(down: Port, cw: Port, ccw: Port) -> Port {
    let arc = (cw.0 as i32 - ccw.0 as i32).rem_euclid(6);
    if arc % 2 == 0 {
        return ccw.rotate(arc / 2);
    }
    let a = ccw.rotate(arc / 2);
    let b = ccw.rotate(arc / 2 + 1);
    let gap = |p: Port| {
        let d = (p.0 as i32 - down.0 as i32).rem_euclid(6);
        d.min(6 - d)
    };
    if gap(b) > gap(a) {
        b
    } else {
        a
    }
}

/// The three retirement rules for a contracted root whose orientation was
/// just recomputed into `mem`. Returns the new memory if the root retires.
pub fn marker_retired_conditions(ctx: &ActivationContext, mem: &Memory) -> Option<Memory> {
    let mut out = *mem;
    if ctx.at_leader_position && ctx.touches_object() {
        if let (Some(down), Some(cw), Some(ccw)) = (mem.down, mem.cw, mem.ccw) {
            out.state = ParticleState::Retired {
                leader: true,
                marker: true,
            };
            out.marker = Some(leader_marker_port(down, cw, ccw));
            return Some(out);
        }
    }
    let marked_by = Port::ALL.into_iter().find(|&p| {
        ctx.head_slot(p)
            .particle()
            .is_some_and(|q| q.state.is_marker() && q.marks_me)
    });
    if let Some(port) = marked_by {
        let q = ctx.head_slot(port).particle().copied();
        if q.is_some_and(|q| q.marker_sides_retired) {
            out.state = ParticleState::Retired {
                leader: false,
                marker: true,
            };
            out.marker = Some(port.opposite());
            return Some(out);
        }
    }
    if let Some(dir) = mem.dir {
        if ctx
            .head_slot(dir)
            .particle()
            .is_some_and(|q| q.state.is_retired())
        {
            out.state = ParticleState::Retired {
                leader: false,
                marker: false,
            };
            return Some(out);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(state: ParticleState) -> ActivationContext {
        ActivationContext {
            memory: Memory {
                state,
                ..Memory::default()
            },
            head: [Slot::Empty; 6],
            tail: None,
            at_leader_position: false,
            entrants_remain: true,
            params: CoatingParams::default(),
        }
    }

    fn view(state: ParticleState) -> NeighborView {
        NeighborView {
            state,
            expanded: false,
            at_tail: false,
            flags: 0,
            layer: 0,
            points_to: None,
            marks_me: false,
            marker_sides_retired: false,
            awaits_follower: false,
        }
    }

    const RETIRED: ParticleState = ParticleState::Retired {
        leader: false,
        marker: false,
    };

    #[test]
    fn idle_next_to_object_becomes_candidate_root() {
        let mut c = ctx(ParticleState::Idle);
        c.head[3] = Slot::Object;
        let d = activate(&c);
        assert_eq!(d.memory.state, ParticleState::Root);
        assert!(d.register_candidate);
        assert_eq!(d.memory.flags, 1);
        assert_eq!(d.action, None);
        c.params.root_generates_flag = false;
        assert_eq!(activate(&c).memory.flags, 0);
    }

    #[test]
    fn idle_next_to_follower_follows_with_a_flag() {
        let mut c = ctx(ParticleState::Idle);
        c.head[4] = Slot::Particle(view(ParticleState::Follower));
        let d = activate(&c);
        assert_eq!(d.memory.state, ParticleState::Follower);
        assert_eq!(d.memory.parent, Some(Port(4)));
        assert_eq!(d.memory.flags, 1);
        assert!(!d.register_candidate);
    }

    #[test]
    fn lonely_idle_stays_idle() {
        let c = ctx(ParticleState::Idle);
        assert_eq!(activate(&c), Decision::keep(c.memory));
    }

    #[test]
    fn retired_clears_a_flag_without_moving() {
        let mut c = ctx(RETIRED);
        c.memory.flags = 1;
        let d = activate(&c);
        assert_eq!(d.memory.flags, 0);
        assert_eq!(d.action, None);
    }

    #[test]
    fn complaint_forwarding_respects_capacity() {
        let mut c = ctx(ParticleState::Follower);
        c.memory.flags = 1;
        c.head[0] = Slot::Particle(view(ParticleState::Root));
        assert!(forward_complaint(&c, Port(0)));
        c.memory.flags = 0;
        assert!(!forward_complaint(&c, Port(0)));
        c.memory.flags = 2;
        c.head[0] = Slot::Particle(NeighborView {
            flags: 2,
            ..view(ParticleState::Root)
        });
        assert!(!forward_complaint(&c, Port(0)));
        c.params.flag_capacity = 1;
        c.head[0] = Slot::Particle(NeighborView {
            flags: 1,
            ..view(ParticleState::Root)
        });
        assert!(!forward_complaint(&c, Port(0)));
    }

    #[test]
    fn follower_forward_moves_one_flag() {
        let mut c = ctx(ParticleState::Follower);
        c.memory.flags = 1;
        c.memory.parent = Some(Port(0));
        c.head[0] = Slot::Particle(view(ParticleState::Follower));
        let d = activate(&c);
        assert_eq!(d.forward, Some(Port(0)));
    }

    #[test]
    fn clockwise_single_object_neighbor() {
        let mut c = ctx(ParticleState::Root);
        c.head[3] = Slot::Object;
        assert_eq!(clockwise(&c, Port(3), 1), Ok((Port(2), Port(4))));
        c.head[4] = Slot::Object;
        assert_eq!(clockwise(&c, Port(3), 1), Ok((Port(2), Port(5))));
        c.head = [Slot::Object; 6];
        assert_eq!(clockwise(&c, Port(3), 1), Err(AllPortsIncident));
    }

    #[test]
    fn clockwise_skips_lower_retired_only() {
        let mut c = ctx(ParticleState::Root);
        let lower = NeighborView {
            layer: 1,
            ..view(RETIRED)
        };
        let same = NeighborView {
            layer: 2,
            ..view(RETIRED)
        };
        c.head[3] = Slot::Particle(lower);
        c.head[2] = Slot::Particle(lower);
        c.head[4] = Slot::Particle(same);
        assert_eq!(clockwise(&c, Port(3), 2), Ok((Port(1), Port(4))));
    }

    fn layer_one_root(flags: u8) -> ActivationContext {
        let mut c = ctx(ParticleState::Root);
        c.head[3] = Slot::Object;
        c.memory.flags = flags;
        c
    }

    #[test]
    fn layer_one_super_root_needs_a_flag() {
        let c = layer_one_root(1);
        let (mem, action) = layer_extension(&c);
        assert_eq!(mem.layer, 1);
        assert_eq!(mem.dir, Some(Port(2)));
        assert_eq!(action, Some(Action::Expand(Port(2))));
        assert_eq!(mem.flags, 0);
        let c = layer_one_root(0);
        assert_eq!(layer_extension(&c).1, None);
        // full decision path agrees
        assert_eq!(
            activate(&layer_one_root(1)).action,
            Some(Action::Expand(Port(2)))
        );
        assert_eq!(activate(&layer_one_root(0)).action, None);
    }

    #[test]
    fn higher_layer_root_expands_without_flags() {
        let mut c = ctx(ParticleState::Root);
        let lower = NeighborView {
            layer: 1,
            ..view(RETIRED)
        };
        c.head[3] = Slot::Particle(lower);
        let (mem, action) = layer_extension(&c);
        assert_eq!(mem.layer, 2);
        // even layers travel counter-clockwise
        assert_eq!(mem.dir, Some(Port(4)));
        assert_eq!(action, Some(Action::Expand(Port(4))));
    }

    #[test]
    fn layer_choice_uses_cyclic_minimum() {
        let mut c = ctx(ParticleState::Root);
        // retired layers 3 and 0 (i.e. 3 and 4): the lower one is 3
        c.head[3] = Slot::Particle(NeighborView {
            layer: 3,
            ..view(RETIRED)
        });
        c.head[1] = Slot::Particle(NeighborView {
            layer: 0,
            ..view(RETIRED)
        });
        let (mem, _) = layer_extension(&c);
        assert_eq!(mem.layer, 0);
        assert_eq!(mem.down, Some(Port(3)));
    }

    #[test]
    fn root_retires_behind_retired_particle() {
        let mut c = layer_one_root(0);
        c.head[2] = Slot::Particle(NeighborView {
            layer: 1,
            ..view(RETIRED)
        });
        let d = activate(&c);
        assert!(d.memory.state.is_retired());
        assert!(!d.memory.state.is_marker());
        assert_eq!(d.action, None);
    }

    #[test]
    fn leader_becomes_marker_pointing_outward() {
        let mut c = ctx(ParticleState::Root);
        c.head[3] = Slot::Object;
        c.head[4] = Slot::Object;
        c.head[2] = Slot::Particle(view(ParticleState::Root));
        c.head[5] = Slot::Particle(view(ParticleState::Root));
        c.at_leader_position = true;
        let d = activate(&c);
        assert_eq!(
            d.memory.state,
            ParticleState::Retired {
                leader: true,
                marker: true
            }
        );
        let m = d.memory.marker.unwrap();
        assert!(m == Port(0) || m == Port(1));
        // farther from down (3) wins
        assert_eq!(m, Port(0));
    }

    #[test]
    fn marker_port_bisects_outer_arc() {
        // corner: object only at 3
        assert_eq!(leader_marker_port(Port(3), Port(2), Port(4)), Port(0));
        assert_eq!(leader_marker_port(Port(3), Port(2), Port(5)), Port(0));
    }

    #[test]
    fn marked_position_waits_for_lower_layer() {
        let mut c = ctx(ParticleState::Root);
        let marker = NeighborView {
            layer: 1,
            marks_me: true,
            marker_sides_retired: false,
            awaits_follower: false,
            ..view(ParticleState::Retired {
                leader: true,
                marker: true,
            })
        };
        c.head[3] = Slot::Particle(marker);
        let d = activate(&c);
        assert_eq!(d.memory.state, ParticleState::Root);
        c.head[3] = Slot::Particle(NeighborView {
            marker_sides_retired: true,
            awaits_follower: false,
            ..marker
        });
        let d = activate(&c);
        assert_eq!(
            d.memory.state,
            ParticleState::Retired {
                leader: false,
                marker: true
            }
        );
        assert_eq!(d.memory.marker, Some(Port(0)));
    }

    #[test]
    fn expanded_follower_pulls_contracted_child() {
        let mut c = ctx(ParticleState::Follower);
        let mut tail = [Slot::Empty; 6];
        tail[0] = Slot::Own;
        tail[3] = Slot::Particle(NeighborView {
            points_to: Some(Part::Tail),
            ..view(ParticleState::Follower)
        });
        c.tail = Some(tail);
        assert_eq!(activate(&c).action, Some(Action::Pull(Port(3))));
        // an expanded child is waited for
        tail[3] = Slot::Particle(NeighborView {
            points_to: Some(Part::Tail),
            expanded: true,
            ..view(ParticleState::Follower)
        });
        c.tail = Some(tail);
        assert_eq!(activate(&c).action, None);
        // no children and no idle neighbour: contract
        tail[3] = Slot::Empty;
        c.tail = Some(tail);
        assert_eq!(activate(&c).action, Some(Action::Contract));
        c.head[1] = Slot::Particle(view(ParticleState::Idle));
        assert_eq!(activate(&c).action, None);
    }

    #[test]
    fn layer_one_root_prefers_follower_child() {
        let mut c = ctx(ParticleState::Root);
        c.memory.layer = 1;
        c.head[2] = Slot::Object;
        let mut tail = [Slot::Empty; 6];
        tail[0] = Slot::Own;
        tail[2] = Slot::Particle(NeighborView {
            points_to: Some(Part::Tail),
            ..view(ParticleState::Root)
        });
        tail[4] = Slot::Particle(NeighborView {
            points_to: Some(Part::Tail),
            ..view(ParticleState::Follower)
        });
        c.tail = Some(tail);
        assert_eq!(activate(&c).action, Some(Action::Pull(Port(4))));
    }

    #[test]
    fn outer_layer_with_first_layer_residue_needs_no_flag() {
        let mut c = ctx(ParticleState::Root);
        let lower = NeighborView {
            layer: 0,
            ..view(RETIRED)
        };
        c.head[3] = Slot::Particle(lower);
        let (mem, action) = layer_extension(&c);
        assert_eq!(mem.layer, 1);
        assert!(action.is_some());
    }

    #[test]
    fn root_does_not_push_into_root_awaiting_follower() {
        let mut c = ctx(ParticleState::Root);
        c.memory.dir = Some(Port(1));
        let ahead = NeighborView {
            expanded: true,
            at_tail: true,
            ..view(ParticleState::Root)
        };
        c.head[1] = Slot::Particle(ahead);
        assert_eq!(handover(&c), Some(Action::Push(Port(1))));
        c.head[1] = Slot::Particle(NeighborView {
            awaits_follower: true,
            ..ahead
        });
        assert_eq!(handover(&c), None);
    }

    #[test]
    fn settled_first_layer_roots_stop_shifting() {
        let mut c = ctx(ParticleState::Root);
        c.memory.dir = Some(Port(1));
        c.head[3] = Slot::Object;
        c.head[1] = Slot::Particle(NeighborView {
            expanded: true,
            at_tail: true,
            ..view(ParticleState::Root)
        });
        assert_eq!(handover(&c), Some(Action::Push(Port(1))));
        c.entrants_remain = false;
        assert_eq!(handover(&c), None);
    }

    #[test]
    fn roots_forward_flags_only_to_contracted_roots() {
        let mut c = layer_one_root(1);
        c.head[0] = Slot::Particle(view(ParticleState::Follower));
        assert!(!forward_complaint(&c, Port(0)));
        c.head[0] = Slot::Particle(NeighborView {
            expanded: true,
            ..view(ParticleState::Root)
        });
        assert!(!forward_complaint(&c, Port(0)));
        c.head[0] = Slot::Particle(view(ParticleState::Root));
        assert!(forward_complaint(&c, Port(0)));
    }

    #[test]
    fn contracted_follower_pushes_into_expanded_parent() {
        let mut c = ctx(ParticleState::Follower);
        c.memory.parent = Some(Port(1));
        c.memory.flags = 1;
        c.head[1] = Slot::Particle(NeighborView {
            expanded: true,
            at_tail: true,
            ..view(ParticleState::Root)
        });
        let d = activate(&c);
        assert_eq!(d.action, Some(Action::Push(Port(1))));
        assert_eq!(d.forward, None);
    }
}
