//! Particles, configurations and the movement primitives of the amoebot model.
//!
//! All port labels stored in a particle's memory are *local*: label `l`
//! corresponds to global direction `(l + chirality_offset) mod 6`, measured
//! from the particle's head.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Direction, Node};

/// Simulator-side handle of a particle. Never shown to the algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParticleId(pub usize);

/// A local port label in `0..6`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Port(pub u8);

impl Port {
    pub const ALL: [Port; 6] = [Port(0), Port(1), Port(2), Port(3), Port(4), Port(5)];

    pub fn rotate(self, steps: i32) -> Port {
        Port((self.0 as i32 + steps).rem_euclid(6) as u8)
    }

    pub fn opposite(self) -> Port {
        self.rotate(3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParticleState {
    Idle,
    Follower,
    Root,
    Retired { leader: bool, marker: bool },
}

impl ParticleState {
    pub fn is_active(self) -> bool {
        matches!(self, ParticleState::Follower | ParticleState::Root)
    }

    pub fn is_retired(self) -> bool {
        matches!(self, ParticleState::Retired { .. })
    }

    pub fn is_marker(self) -> bool {
        matches!(self, ParticleState::Retired { marker: true, .. })
    }

    /// Whether `self -> next` is one of the arcs the algorithm allows.
    pub fn can_become(self, next: ParticleState) -> bool {
        use ParticleState::*;
        match (self, next) {
            (a, b) if a == b => true,
            (Idle, Root | Follower) => true,
            (Follower, Root) => true,
            (Root, Retired { .. }) => true,
            _ => false,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ParticleState::Idle => "idle",
            ParticleState::Follower => "follower",
            ParticleState::Root => "root",
            ParticleState::Retired { .. } => "retired",
        }
    }
}

/// The constant-size memory of a particle, readable by its neighbors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Memory {
    pub state: ParticleState,
    pub parent: Option<Port>,
    pub dir: Option<Port>,
    pub down: Option<Port>,
    /// Layer number modulo 4.
    pub layer: u8,
    /// Complaint flags held.
    pub flags: u8,
    pub marker: Option<Port>,
    pub cw: Option<Port>,
    pub ccw: Option<Port>,
    /// Set once a root performed its first handover expansion; from then on
    /// the particle at `dir` is its parent in the forest graph.
    pub adopted_parent: bool,
}

impl Default for Memory {
    fn default() -> Self {
        Memory {
            state: ParticleState::Idle,
            parent: None,
            dir: None,
            down: None,
            layer: 0,
            flags: 0,
            marker: None,
            cw: None,
            ccw: None,
            adopted_parent: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Particle {
    pub id: ParticleId,
    pub head: Node,
    pub tail: Node,
    pub chirality_offset: u8,
    pub mem: Memory,
}

impl Particle {
    pub fn new(id: ParticleId, at: Node, chirality_offset: u8) -> Self {
        Particle {
            id,
            head: at,
            tail: at,
            chirality_offset: chirality_offset % 6,
            mem: Memory::default(),
        }
    }

    pub fn is_contracted(&self) -> bool {
        self.head == self.tail
    }

    pub fn is_expanded(&self) -> bool {
        !self.is_contracted()
    }

    pub fn global(&self, port: Port) -> Direction {
        Direction::new((port.0 + self.chirality_offset) % 6)
    }

    pub fn local(&self, dir: Direction) -> Port {
        Port(((dir.index() as u8) + 6 - self.chirality_offset) % 6)
    }

    /// Node reached through a head port.
    pub fn port_node(&self, port: Port) -> Node {
        self.head.neighbor(self.global(port))
    }

    pub fn occupies(&self, v: Node) -> bool {
        self.head == v || self.tail == v
    }

    /// Node a stored pointer currently designates: `parent` for followers,
    /// `dir` for roots.
    pub fn pointer_node(&self) -> Option<Node> {
        match self.mem.state {
            ParticleState::Follower => self.mem.parent.map(|p| self.port_node(p)),
            ParticleState::Root => self.mem.dir.or(self.mem.parent).map(|p| self.port_node(p)),
            _ => None,
        }
    }

    /// Out-neighbor of the head in `A(C)`. A root that has not yet oriented
    /// itself in its layer has none.
    pub fn forest_parent(&self) -> Option<Node> {
        match self.mem.state {
            ParticleState::Follower => self.mem.parent.map(|p| self.port_node(p)),
            ParticleState::Root if self.mem.adopted_parent => {
                self.mem.dir.map(|p| self.port_node(p))
            }
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MovementKind {
    SoleContraction,
    SoleExpansion,
    HandoverContraction { partner: ParticleId },
    HandoverExpansion { partner: ParticleId },
}

/// One movement as executed by `actor`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Movement {
    pub kind: MovementKind,
    pub actor: ParticleId,
    /// For expansions the node expanded from; for contractions the vacated tail.
    pub node_from: Node,
    /// For expansions the new head; for contractions the remaining head.
    pub node_to: Node,
}

impl Movement {
    pub fn is_expansion(&self) -> bool {
        matches!(
            self.kind,
            MovementKind::SoleExpansion | MovementKind::HandoverExpansion { .. }
        )
    }

    pub fn partner(&self) -> Option<ParticleId> {
        match self.kind {
            MovementKind::HandoverContraction { partner }
            | MovementKind::HandoverExpansion { partner } => Some(partner),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MoveError {
    #[error("target node {0} is occupied")]
    TargetOccupied(Node),
    #[error("target node {0} belongs to the object")]
    TargetIsObject(Node),
    #[error("particle {0:?} is already expanded")]
    AlreadyExpanded(ParticleId),
    #[error("particle {0:?} is already contracted")]
    AlreadyContracted(ParticleId),
    #[error("illegal handover between {0:?} and {1:?}")]
    IllegalHandover(ParticleId, ParticleId),
}

/// Object nodes, particles and the occupancy index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    object: HashSet<Node>,
    particles: Vec<Particle>,
    occupancy: HashMap<Node, ParticleId>,
}

impl Configuration {
    /// Builds a configuration of contracted idle particles, particle `i`
    /// standing on `positions[i]` with chirality offset `offsets[i]`.
    pub fn new(object: impl IntoIterator<Item = Node>, positions: &[Node], offsets: &[u8]) -> Self {
        assert_eq!(positions.len(), offsets.len());
        let object: HashSet<Node> = object.into_iter().collect();
        let mut occupancy = HashMap::with_capacity(positions.len() * 2);
        let particles = positions
            .iter()
            .zip(offsets)
            .enumerate()
            .map(|(i, (&v, &o))| {
                assert!(!object.contains(&v), "particle placed on object node {v}");
                let prev = occupancy.insert(v, ParticleId(i));
                assert!(prev.is_none(), "two particles placed on {v}");
                Particle::new(ParticleId(i), v, o)
            })
            .collect();
        Configuration {
            object,
            particles,
            occupancy,
        }
    }

    /// Builds a configuration from arbitrary particle records. Panics on
    /// overlapping occupancy.
    pub fn from_particles(
        object: impl IntoIterator<Item = Node>,
        particles: Vec<Particle>,
    ) -> Self {
        let object: HashSet<Node> = object.into_iter().collect();
        let mut occupancy = HashMap::new();
        for (i, p) in particles.iter().enumerate() {
            assert_eq!(p.id, ParticleId(i), "particle ids must be dense");
            for v in [p.head, p.tail] {
                assert!(!object.contains(&v));
                let prev = occupancy.insert(v, p.id);
                assert!(prev.is_none() || prev == Some(p.id), "overlap at {v}");
            }
        }
        Configuration {
            object,
            particles,
            occupancy,
        }
    }

    pub fn object(&self) -> &HashSet<Node> {
        &self.object
    }

    pub fn is_object(&self, v: Node) -> bool {
        self.object.contains(&v)
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particle(&self, id: ParticleId) -> &Particle {
        &self.particles[id.0]
    }

    pub fn particle_mut(&mut self, id: ParticleId) -> &mut Particle {
        &mut self.particles[id.0]
    }

    pub fn occupant(&self, v: Node) -> Option<ParticleId> {
        self.occupancy.get(&v).copied()
    }

    pub fn occupant_particle(&self, v: Node) -> Option<&Particle> {
        self.occupant(v).map(|id| self.particle(id))
    }

    pub fn is_free(&self, v: Node) -> bool {
        !self.object.contains(&v) && !self.occupancy.contains_key(&v)
    }

    /// Nodes occupied by particles.
    pub fn occupied_nodes(&self) -> impl Iterator<Item = Node> + '_ {
        self.occupancy.keys().copied()
    }

    /// Sorted multiset of occupied nodes.
    pub fn occupied_sorted(&self) -> Vec<Node> {
        let mut v: Vec<Node> = self.occupied_nodes().collect();
        v.sort_unstable();
        v
    }

    /// Whether `V(P) ∪ V(O)` induces a connected subgraph.
    pub fn is_connected(&self) -> bool {
        let nodes: HashSet<Node> = self
            .object
            .iter()
            .copied()
            .chain(self.occupied_nodes())
            .collect();
        crate::grid::is_connected(&nodes)
    }

    /// Checks the occupancy index against the particle records.
    pub fn occupancy_consistent(&self) -> bool {
        let mut expected = 0;
        for p in &self.particles {
            if p.is_expanded() {
                if !p.head.is_adjacent(p.tail) {
                    return false;
                }
                expected += 2;
            } else {
                expected += 1;
            }
            for v in [p.head, p.tail] {
                if self.occupancy.get(&v) != Some(&p.id) || self.object.contains(&v) {
                    return false;
                }
            }
        }
        expected == self.occupancy.len()
    }

    fn rewrite_pointer(&mut self, id: ParticleId, toward: Node) {
        let p = &mut self.particles[id.0];
        if let Some(d) = p.head.direction_to(toward) {
            let port = p.local(d);
            match p.mem.state {
                ParticleState::Follower => p.mem.parent = Some(port),
                ParticleState::Root => p.mem.dir = Some(port),
                _ => {}
            }
        }
    }

    /// Contracted particle `p` expands through its head port `port`.
    pub fn expand(&mut self, id: ParticleId, port: Port) -> Result<Movement, MoveError> {
        let p = self.particle(id);
        if p.is_expanded() {
            return Err(MoveError::AlreadyExpanded(id));
        }
        let from = p.head;
        let dir = p.global(port);
        let target = from.neighbor(dir);
        if self.object.contains(&target) {
            return Err(MoveError::TargetIsObject(target));
        }
        if self.occupancy.contains_key(&target) {
            return Err(MoveError::TargetOccupied(target));
        }
        self.occupancy.insert(target, id);
        let p = self.particle_mut(id);
        p.head = target;
        if p.mem.state == ParticleState::Root {
            // pointer ports are relative to the old head
            p.mem.dir = None;
            p.mem.parent = None;
        }
        Ok(Movement {
            kind: MovementKind::SoleExpansion,
            actor: id,
            node_from: from,
            node_to: target,
        })
    }

    /// Expanded particle `p` contracts onto its head, freeing its tail.
    pub fn contract(&mut self, id: ParticleId) -> Result<Movement, MoveError> {
        let p = self.particle(id);
        if p.is_contracted() {
            return Err(MoveError::AlreadyContracted(id));
        }
        let (head, tail) = (p.head, p.tail);
        self.occupancy.remove(&tail);
        self.particle_mut(id).tail = head;
        Ok(Movement {
            kind: MovementKind::SoleContraction,
            actor: id,
            node_from: tail,
            node_to: head,
        })
    }

    /// Handover between an expanded and a contracted particle adjacent to the
    /// expanded one's tail. Either party may initiate. Returns the movements
    /// of the expanded party (contraction) and the contracted party
    /// (expansion), in that order.
    pub fn handover(
        &mut self,
        initiator: ParticleId,
        partner: ParticleId,
    ) -> Result<(Movement, Movement), MoveError> {
        let a = self.particle(initiator);
        let b = self.particle(partner);
        let (exp, con) = match (a.is_expanded(), b.is_expanded()) {
            (true, false) => (initiator, partner),
            (false, true) => (partner, initiator),
            _ => return Err(MoveError::IllegalHandover(initiator, partner)),
        };
        let (e_head, e_tail) = (self.particle(exp).head, self.particle(exp).tail);
        let c_node = self.particle(con).head;
        if !c_node.is_adjacent(e_tail) {
            return Err(MoveError::IllegalHandover(initiator, partner));
        }
        self.occupancy.insert(e_tail, con);
        {
            let e = self.particle_mut(exp);
            e.tail = e_head;
        }
        {
            let c = self.particle_mut(con);
            c.head = e_tail;
            if c.mem.state == ParticleState::Root {
                c.mem.adopted_parent = true;
            }
        }
        // the contracted party keeps following the expanded one
        self.rewrite_pointer(con, e_head);
        Ok((
            Movement {
                kind: MovementKind::HandoverContraction { partner: con },
                actor: exp,
                node_from: e_tail,
                node_to: e_head,
            },
            Movement {
                kind: MovementKind::HandoverExpansion { partner: exp },
                actor: con,
                node_from: c_node,
                node_to: e_tail,
            },
        ))
    }

    pub fn build_forest_graph(&self) -> ForestGraph {
        build_forest_graph(self)
    }
}

/// The directed graph `A(C)` over nodes occupied by active particles.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ForestGraph {
    pub vertices: Vec<Node>,
    /// `(from, to)` pairs; each vertex has at most one outgoing edge.
    pub edges: Vec<(Node, Node)>,
}

impl ForestGraph {
    pub fn out_edge(&self, v: Node) -> Option<Node> {
        self.edges.iter().find(|e| e.0 == v).map(|e| e.1)
    }

    pub fn max_out_degree(&self) -> usize {
        let mut count: HashMap<Node, usize> = HashMap::new();
        for &(a, _) in &self.edges {
            *count.entry(a).or_default() += 1;
        }
        count.values().copied().max().unwrap_or(0)
    }

    /// Nodes lying on a directed cycle.
    pub fn cycle_nodes(&self) -> Vec<Node> {
        let next: HashMap<Node, Node> = self.edges.iter().copied().collect();
        let mut on_cycle = HashSet::new();
        let mut state: HashMap<Node, u8> = HashMap::new();
        for &start in &self.vertices {
            if state.contains_key(&start) {
                continue;
            }
            let mut path = Vec::new();
            let mut v = start;
            loop {
                match state.get(&v) {
                    Some(1) => {
                        if let Some(pos) = path.iter().position(|&w| w == v) {
                            on_cycle.extend(path[pos..].iter().copied());
                        }
                        break;
                    }
                    Some(_) => break,
                    None => {}
                }
                state.insert(v, 1);
                path.push(v);
                match next.get(&v) {
                    Some(&w) => v = w,
                    None => break,
                }
            }
            for w in path {
                state.insert(w, 2);
            }
        }
        let mut out: Vec<Node> = on_cycle.into_iter().collect();
        out.sort_unstable();
        out
    }
}

/// Builds `A(C)`: tail→head for expanded active particles, head→parent for
/// followers, head→node at `dir` for roots that adopted a parent.
pub fn build_forest_graph(cfg: &Configuration) -> ForestGraph {
    let mut g = ForestGraph::default();
    let active = |v: Node| {
        cfg.occupant_particle(v)
            .is_some_and(|q| q.mem.state.is_active())
    };
    for p in cfg.particles() {
        if !p.mem.state.is_active() {
            continue;
        }
        g.vertices.push(p.head);
        if p.is_expanded() {
            g.vertices.push(p.tail);
            g.edges.push((p.tail, p.head));
        }
        if let Some(t) = p.forest_parent() {
            if active(t) && !p.occupies(t) {
                g.edges.push((p.head, t));
            }
        }
    }
    g.vertices.sort_unstable();
    g
}

/// Roots with no predecessor at `dir`.
pub fn super_roots(cfg: &Configuration) -> Vec<ParticleId> {
    cfg.particles()
        .iter()
        .filter(|p| p.mem.state == ParticleState::Root)
        .filter(|p| match p.mem.dir {
            Some(d) => cfg.occupant(p.port_node(d)).is_none_or(|q| q == p.id),
            None => true,
        })
        .map(|p| p.id)
        .collect()
}
