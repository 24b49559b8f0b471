//! Stand-ins for the node-based leader election on layer 1.
//!
//! Both strategies elect at most one layer-1 node, and only once the engine
//! reports layer 1 as completely filled by contracted particles. The
//! particle that occupies the elected node when it next activates becomes
//! the leader.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::Node;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElectionKind {
    Oracle,
    Randomized,
}

impl std::str::FromStr for ElectionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(ElectionKind::Oracle),
            "randomized" => Ok(ElectionKind::Randomized),
            other => Err(format!("unknown election strategy `{other}`")),
        }
    }
}

pub trait LeaderElection: Send {
    /// An idle particle touching the object made `node` a candidate position.
    fn register_candidate(&mut self, node: Node);

    /// A contracted layer-1 root at `node` takes an election step.
    /// `layer_complete` reports whether layer 1 is filled by contracted
    /// particles. Returns true if the strategy's state changed.
    fn step(&mut self, node: Node, layer_complete: bool) -> bool;

    fn leader(&self) -> Option<Node>;

    /// No pending internal work: either finished or not yet started.
    fn is_dormant(&self) -> bool;
}

pub fn make_election(
    kind: ElectionKind,
    layer_one: Vec<Node>,
    seed: u64,
) -> Box<dyn LeaderElection> {
    match kind {
        ElectionKind::Oracle => Box::new(OracleElection::new(layer_one)),
        ElectionKind::Randomized => Box::new(RandomizedElection::new(layer_one, seed)),
    }
}

/// A referee that names the smallest layer-1 node as soon as layer 1 is complete.
#[derive(Clone, Debug)]
pub struct OracleElection {
    least: Option<Node>,
    leader: Option<Node>,
}

impl OracleElection {
    pub fn new(layer_one: Vec<Node>) -> Self {
        OracleElection {
            least: layer_one.into_iter().min(),
            leader: None,
        }
    }
}

impl LeaderElection for OracleElection {
    fn register_candidate(&mut self, _node: Node) {}

    fn step(&mut self, _node: Node, layer_complete: bool) -> bool {
        if self.leader.is_none() && layer_complete {
            self.leader = self.least;
            return true;
        }
        false
    }

    fn leader(&self) -> Option<Node> {
        self.leader
    }

    fn is_dormant(&self) -> bool {
        true
    }
}

/// Coin-flipping elimination among candidate positions along the layer-1 cycle.
///
/// In every phase each live candidate flips a fair coin when its occupant
/// activates. Once all live candidates have flipped, a candidate that shows
/// tails while the next live candidate clockwise shows heads withdraws. Heads
/// never withdraw, so at least one candidate survives every phase.
#[derive(Clone, Debug)]
pub struct RandomizedElection {
    cycle_index: HashMap<Node, usize>,
    live: BTreeSet<(usize, Node)>,
    flips: HashMap<Node, bool>,
    rng: ChaCha8Rng,
    phase: u32,
    started: bool,
    leader: Option<Node>,
}

impl RandomizedElection {
    /// `layer_one` lists the layer-1 nodes in clockwise cyclic order.
    pub fn new(layer_one: Vec<Node>, seed: u64) -> Self {
        RandomizedElection {
            cycle_index: layer_one.iter().enumerate().map(|(i, &v)| (v, i)).collect(),
            live: BTreeSet::new(),
            flips: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6c65_6164_6572),
            phase: 0,
            started: false,
            leader: None,
        }
    }

    pub fn phases(&self) -> u32 {
        self.phase
    }

    pub fn live_candidates(&self) -> Vec<Node> {
        self.live.iter().map(|&(_, v)| v).collect()
    }

    fn start(&mut self) {
        self.started = true;
        if self.live.is_empty() {
            self.live = self.cycle_index.iter().map(|(&v, &i)| (i, v)).collect();
        }
        if self.live.len() == 1 {
            self.leader = self.live.first().map(|&(_, v)| v);
        }
    }

    fn resolve_phase(&mut self) {
        let order: Vec<Node> = self.live.iter().map(|&(_, v)| v).collect();
        let withdrawn: Vec<Node> = order
            .iter()
            .enumerate()
            .filter(|&(i, v)| {
                let next = order[(i + 1) % order.len()];
                !self.flips[v] && self.flips[&next]
            })
            .map(|(_, &v)| v)
            .collect();
        for v in withdrawn {
            self.live.remove(&(self.cycle_index[&v], v));
        }
        self.flips.clear();
        self.phase += 1;
        if self.live.len() == 1 {
            self.leader = self.live.first().map(|&(_, v)| v);
        }
    }
}

impl LeaderElection for RandomizedElection {
    fn register_candidate(&mut self, node: Node) {
        if self.started {
            return;
        }
        if let Some(&i) = self.cycle_index.get(&node) {
            self.live.insert((i, node));
        }
    }

    fn step(&mut self, node: Node, layer_complete: bool) -> bool {
        if self.leader.is_some() || !layer_complete {
            return false;
        }
        if !self.started {
            self.start();
            if self.leader.is_some() {
                return true;
            }
        }
        let Some(&i) = self.cycle_index.get(&node) else {
            return false;
        };
        if !self.live.contains(&(i, node)) || self.flips.contains_key(&node) {
            return false;
        }
        let heads = self.rng.gen_bool(0.5);
        self.flips.insert(node, heads);
        if self.flips.len() == self.live.len() {
            self.resolve_phase();
        }
        true
    }

    fn leader(&self) -> Option<Node> {
        self.leader
    }

    fn is_dormant(&self) -> bool {
        self.leader.is_some() || !self.started
    }
}
