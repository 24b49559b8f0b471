//! Greedy forest-path schedules on synthetic fixtures.
//!
//! Every particle follows a fixed route: an approach ending next to its entry
//! node on a track, then the track itself. A linear track ends at its last
//! node, a cyclic one wraps around. Each parallel step performs a maximal set
//! of compatible movements along the routes; in complaint mode a contracted
//! particle expands into an empty node only by consuming a complaint flag, and
//! flags are forwarded one hop per step toward the particle ahead, alongside
//! whatever movement the holder makes.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::parallel::{ParallelSchedule, ParallelStep, Placement, ScheduleConfig, ScheduleMode};
use crate::grid::{hexagon, layer_one_cycle, LayerMap, Node};
use crate::model::{Movement, MovementKind, ParticleId};

/// How a particle reaches the track: the nodes it crosses first (starting
/// with its initial node) and the track index it enters at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Route {
    pub approach: Vec<Node>,
    pub entry: usize,
}

impl Route {
    pub fn on_track(entry: usize) -> Self {
        Route {
            approach: Vec::new(),
            entry,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForestPath {
    pub track: Vec<Node>,
    pub cyclic: bool,
    pub routes: Vec<Route>,
    /// Every particle starts with one complaint flag.
    pub flagged: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FixtureError {
    #[error("particles {0} and {1} start on the same node")]
    SharedStart(usize, usize),
    #[error("route of particle {0} is not a walk on the grid")]
    BrokenRoute(usize),
    #[error("track is not a walk on the grid")]
    BrokenTrack,
}

impl ForestPath {
    /// `k` particles in a straight chain whose front sits on the first node
    /// of a straight track of length `len`.
    pub fn line(len: usize, k: usize) -> Self {
        let track = (1..=len as i32).map(|i| Node::new(i, 0)).collect();
        let routes = (0..k as i32)
            .map(|j| Route {
                approach: (1 - j..=0).map(|q| Node::new(q, 0)).collect(),
                entry: 0,
            })
            .collect();
        ForestPath {
            track,
            cyclic: false,
            routes,
            flagged: false,
        }
    }

    /// One root on the first track node with two follower branches: one
    /// behind it in line with the track, one hanging off the side.
    pub fn comb(len: usize, k: usize) -> Self {
        let track = (1..=len as i32).map(|i| Node::new(i, 0)).collect();
        let mut routes = vec![Route::on_track(0)];
        let (mut behind, mut below) = (0i32, 0i32);
        for j in 1..k {
            let approach = if j % 2 == 1 {
                behind += 1;
                (1 - behind..=0).map(|q| Node::new(q, 0)).collect()
            } else {
                below += 1;
                (1..=below).rev().map(|r| Node::new(1, r)).collect()
            };
            routes.push(Route { approach, entry: 0 });
        }
        ForestPath {
            track,
            cyclic: false,
            routes,
            flagged: false,
        }
    }

    /// `k` particles in several trees: roots on the first track node and on
    /// random nodes among the first `len - k + 1`, followers hanging below them.
    pub fn spread(len: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = (len + 1).saturating_sub(k).max(1);
        let roots_wanted = rng.gen_range(1..=k.min(span));
        let mut columns: Vec<usize> = (1..span).collect();
        columns.shuffle(&mut rng);
        columns.truncate(roots_wanted - 1);
        columns.insert(0, 0);
        let track: Vec<Node> = (1..=len as i32).map(|i| Node::new(i, 0)).collect();
        let mut depth = vec![0i32; columns.len()];
        let mut routes: Vec<Route> = columns.iter().map(|&c| Route::on_track(c)).collect();
        for _ in columns.len()..k {
            let i = rng.gen_range(0..columns.len());
            depth[i] += 1;
            let column = columns[i] as i32 + 1;
            routes.push(Route {
                approach: (1..=depth[i]).rev().map(|r| Node::new(column, r)).collect(),
                entry: columns[i],
            });
        }
        ForestPath {
            track,
            cyclic: false,
            routes,
            flagged: false,
        }
    }

    /// The first layer around a hexagonal object of the given radius, with
    /// `B_1 + extra` flagged particles: roots on random layer-1 nodes and
    /// follower chains growing outward from them.
    pub fn ring(radius: u32, extra: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let object: HashSet<Node> = hexagon(Node::ORIGIN, radius).into_iter().collect();
        let track = layer_one_cycle(&object);
        let m = track.len() + extra;
        let map = LayerMap::new(&object, m as u32 + 2);
        let roots_wanted = rng.gen_range(1..=(track.len() / 3).max(1));
        let mut entries: Vec<usize> = (0..track.len()).collect();
        entries.shuffle(&mut rng);
        entries.truncate(roots_wanted);
        let mut used: HashSet<Node> = entries.iter().map(|&e| track[e]).collect();
        let mut chains: Vec<Vec<Node>> = vec![Vec::new(); entries.len()];
        let mut routes: Vec<Route> = entries.iter().map(|&e| Route::on_track(e)).collect();
        while routes.len() < m {
            let i = rng.gen_range(0..entries.len());
            let from = chains[i].last().copied().unwrap_or(track[entries[i]]);
            let depth = map.layer(from).unwrap_or(1);
            let next = from
                .neighbors()
                .into_iter()
                .find(|w| map.layer(*w) == Some(depth + 1) && !used.contains(w));
            let Some(w) = next else { continue };
            used.insert(w);
            chains[i].push(w);
            routes.push(Route {
                approach: chains[i].iter().rev().copied().collect(),
                entry: entries[i],
            });
        }
        ForestPath {
            track,
            cyclic: true,
            routes,
            flagged: true,
        }
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// Node `h` steps along the route of particle `p`, if the route is that long.
    pub fn node(&self, p: usize, h: usize) -> Option<Node> {
        let route = &self.routes[p];
        if h < route.approach.len() {
            return Some(route.approach[h]);
        }
        let along = route.entry + h - route.approach.len();
        if self.cyclic {
            Some(self.track[along % self.track.len()])
        } else {
            self.track.get(along).copied()
        }
    }

    /// Track index of `v`, if it is on the track.
    pub fn track_index(&self, v: Node) -> Option<usize> {
        self.track.iter().position(|&w| w == v)
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        if self.track.windows(2).any(|w| !w[0].is_adjacent(w[1])) {
            return Err(FixtureError::BrokenTrack);
        }
        let mut starts: HashMap<Node, usize> = HashMap::new();
        for p in 0..self.len() {
            let start = self.node(p, 0).ok_or(FixtureError::BrokenRoute(p))?;
            if let Some(q) = starts.insert(start, p) {
                return Err(FixtureError::SharedStart(q, p));
            }
            let route = &self.routes[p];
            let walk: Vec<Node> = route
                .approach
                .iter()
                .copied()
                .chain(self.track.get(route.entry).copied())
                .collect();
            if walk.windows(2).any(|w| !w[0].is_adjacent(w[1])) || route.entry >= self.track.len() {
                return Err(FixtureError::BrokenRoute(p));
            }
        }
        Ok(())
    }
}

/// A greedy forest-path schedule together with the identity of every flag.
#[derive(Clone, Debug)]
pub struct PathRun {
    pub schedule: ParallelSchedule,
    /// `flag_holders[i][f]` is the particle holding flag `f` in configuration
    /// `i`, or `None` once it was consumed.
    pub flag_holders: Vec<Vec<Option<ParticleId>>>,
}

struct Executor<'a> {
    fx: &'a ForestPath,
    mode: ScheduleMode,
    /// Route indices of head and tail.
    head: Vec<usize>,
    tail: Vec<usize>,
    flag: Vec<Option<usize>>,
    holders: Vec<Option<ParticleId>>,
}

impl Executor<'_> {
    fn placement(&self, p: usize) -> Placement {
        Placement {
            head: self.fx.node(p, self.head[p]).expect("head on route"),
            tail: self.fx.node(p, self.tail[p]).expect("tail on route"),
        }
    }

    fn occupancy(&self) -> HashMap<Node, usize> {
        let mut occ = HashMap::new();
        for p in 0..self.fx.len() {
            occ.insert(self.fx.node(p, self.head[p]).unwrap(), p);
            occ.insert(self.fx.node(p, self.tail[p]).unwrap(), p);
        }
        occ
    }

    fn next_node(&self, p: usize) -> Option<Node> {
        self.fx.node(p, self.head[p] + 1)
    }

    fn config(&self) -> ScheduleConfig {
        ScheduleConfig {
            placements: (0..self.fx.len()).map(|p| self.placement(p)).collect(),
            flags: self.flag.iter().map(|f| u8::from(f.is_some())).collect(),
        }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> ParallelStep {
        let n = self.fx.len();
        let occ = self.occupancy();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut used = vec![false; n];
        let forwards = if self.mode == ScheduleMode::Complaint {
            self.plan_forwards(&occ, &order)
        } else {
            Vec::new()
        };
        let mut claimed: HashSet<Node> = HashSet::new();
        let mut step = ParallelStep::default();
        let expanded = |ex: &Self, p: usize| ex.head[p] != ex.tail[p];

        for &p in &order {
            if used[p] {
                continue;
            }
            if expanded(self, p) {
                let tail = self.fx.node(p, self.tail[p]).unwrap();
                let children: Vec<usize> = (0..n)
                    .filter(|&q| q != p && self.next_node(q) == Some(tail))
                    .collect();
                // children still approaching the track go first
                let pick = children
                    .iter()
                    .copied()
                    .filter(|&q| !used[q] && !expanded(self, q))
                    .min_by_key(|&q| self.fx.track_index(self.placement(q).head).is_some());
                if let Some(q) = pick {
                    let (ph, qh) = (self.placement(p).head, self.placement(q).head);
                    step.movements.push(Movement {
                        kind: MovementKind::HandoverContraction {
                            partner: ParticleId(q),
                        },
                        actor: ParticleId(p),
                        node_from: tail,
                        node_to: ph,
                    });
                    step.movements.push(Movement {
                        kind: MovementKind::HandoverExpansion {
                            partner: ParticleId(p),
                        },
                        actor: ParticleId(q),
                        node_from: qh,
                        node_to: tail,
                    });
                    used[p] = true;
                    used[q] = true;
                } else if children.is_empty() {
                    step.movements.push(Movement {
                        kind: MovementKind::SoleContraction,
                        actor: ParticleId(p),
                        node_from: tail,
                        node_to: self.placement(p).head,
                    });
                    used[p] = true;
                }
            } else if let Some(v) = self.next_node(p) {
                let needs_flag = self.mode == ScheduleMode::Complaint;
                if !occ.contains_key(&v)
                    && !claimed.contains(&v)
                    && (!needs_flag || self.flag[p].is_some())
                {
                    claimed.insert(v);
                    step.movements.push(Movement {
                        kind: MovementKind::SoleExpansion,
                        actor: ParticleId(p),
                        node_from: self.placement(p).head,
                        node_to: v,
                    });
                    if needs_flag {
                        step.consumed.push(ParticleId(p));
                    }
                    used[p] = true;
                }
            }
        }

        for m in &step.movements {
            let p = m.actor.0;
            if m.is_expansion() {
                self.head[p] += 1;
            } else {
                self.tail[p] = self.head[p];
            }
        }
        for &p in &step.consumed {
            let f = self.flag[p.0].take().expect("consumed flag");
            self.holders[f] = None;
        }
        let moving: Vec<(usize, usize)> = forwards
            .iter()
            .map(|&(p, q)| (self.flag[p].take().expect("forwarded flag"), q))
            .collect();
        for (f, q) in moving {
            self.flag[q] = Some(f);
            self.holders[f] = Some(ParticleId(q));
        }
        step.forwards = forwards
            .into_iter()
            .map(|(p, q)| (ParticleId(p), ParticleId(q)))
            .collect();
        step
    }

    /// Flags moving one hop toward the particle ahead: the receiver must
    /// hold no flag or pass its own on in the same step, and receives at most
    /// one, preferring a flag from off the track.
    fn plan_forwards(&self, occ: &HashMap<Node, usize>, order: &[usize]) -> Vec<(usize, usize)> {
        let mut wants: HashMap<usize, usize> = HashMap::new();
        for &p in order {
            if self.flag[p].is_none() {
                continue;
            }
            let Some(q) = self.next_node(p).and_then(|v| occ.get(&v).copied()) else {
                continue;
            };
            if q == p {
                continue;
            }
            let entering = self.fx.track_index(self.placement(p).head).is_none();
            match wants.get(&q) {
                Some(&r) if !entering || self.fx.track_index(self.placement(r).head).is_none() => {}
                _ => {
                    wants.insert(q, p);
                }
            }
        }
        loop {
            let senders: HashSet<usize> = wants.values().copied().collect();
            let blocked: Vec<usize> = wants
                .keys()
                .copied()
                .filter(|&q| self.flag[q].is_some() && !senders.contains(&q))
                .collect();
            if blocked.is_empty() {
                break;
            }
            for q in blocked {
                wants.remove(&q);
            }
        }
        let mut out: Vec<(usize, usize)> = wants.into_iter().map(|(q, p)| (p, q)).collect();
        out.sort_unstable();
        out
    }

    fn track_full(&self, contracted_only: bool) -> bool {
        let occ = self.occupancy();
        self.fx.track.iter().all(|v| {
            occ.get(v)
                .is_some_and(|&p| !contracted_only || self.head[p] == self.tail[p])
        })
    }
}

/// Runs the greedy forest-path schedule until nothing moves, the track is
/// filled (with contracted particles, for a linear track), or `max_steps`
/// steps have passed.
pub fn run_forest_path(
    fx: &ForestPath,
    mode: ScheduleMode,
    seed: u64,
    max_steps: usize,
) -> PathRun {
    let n = fx.len();
    let flagged = fx.flagged && mode == ScheduleMode::Complaint;
    let mut ex = Executor {
        fx,
        mode,
        head: vec![0; n],
        tail: vec![0; n],
        flag: (0..n).map(|p| flagged.then_some(p)).collect(),
        holders: (0..n).map(|p| flagged.then_some(ParticleId(p))).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut schedule = ParallelSchedule {
        mode,
        configs: vec![ex.config()],
        steps: Vec::new(),
    };
    let mut flag_holders = vec![ex.holders.clone()];
    while schedule.steps.len() < max_steps && !ex.track_full(!fx.cyclic) {
        let step = ex.step(&mut rng);
        let idle = step.movements.is_empty() && step.forwards.is_empty();
        if idle {
            break;
        }
        schedule.steps.push(step);
        schedule.configs.push(ex.config());
        flag_holders.push(ex.holders.clone());
    }
    PathRun {
        schedule,
        flag_holders,
    }
}

/// First configuration in which the last `k` track nodes hold contracted particles.
pub fn tail_fill_time(fx: &ForestPath, run: &PathRun, k: usize) -> Option<usize> {
    let targets = &fx.track[fx.track.len() - k..];
    run.schedule.configs.iter().position(|c| {
        targets
            .iter()
            .all(|&v| c.placements.iter().any(|pl| pl.head == v && pl.tail == v))
    })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("steps {window}..{}: no flag consumed, none entered the track, not every flag advanced, and the track is not filled", window + 2)]
pub struct WindowViolation {
    pub window: usize,
}

/// Checks the progress property of complaint-based schedules on a cyclic
/// track: for every configuration `i <= t - 2`, where `t` is the first
/// configuration with a completely filled track, the next two steps consume
/// a flag, bring a flag onto the track, move every remaining flag closer along
/// its route to the next particle that can expand, or fill the track.
pub fn check_progress_windows(fx: &ForestPath, run: &PathRun) -> Result<(), WindowViolation> {
    let configs = &run.schedule.configs;
    let on_track: HashSet<Node> = fx.track.iter().copied().collect();
    let filled = |c: &ScheduleConfig| {
        fx.track
            .iter()
            .all(|v| c.placements.iter().any(|pl| pl.head == *v || pl.tail == *v))
    };
    let t = configs
        .iter()
        .position(|c| filled(c) && c.placements.iter().all(|pl| !pl.is_expanded()))
        .unwrap_or(configs.len() - 1);
    let distances = |i: usize| flag_distances(fx, &configs[i], &run.flag_holders[i]);
    for i in 0..=t.saturating_sub(2) {
        if i + 2 >= configs.len() {
            break;
        }
        let steps = &run.schedule.steps[i..i + 2];
        let consumed = steps.iter().any(|s| !s.consumed.is_empty());
        let entered = steps.iter().enumerate().any(|(j, s)| {
            let before = &configs[i + j];
            s.forwards.iter().any(|&(a, b)| {
                !on_track.contains(&before.placements[a.0].head)
                    && on_track.contains(&before.placements[b.0].head)
            })
        });
        let (d0, d2) = (distances(i), distances(i + 2));
        let remaining: Vec<usize> = (0..d2.len())
            .filter(|&f| run.flag_holders[i + 2][f].is_some())
            .collect();
        let advanced = !remaining.is_empty()
            && remaining.iter().all(|&f| match (d0[f], d2[f]) {
                (Some(a), Some(b)) => b < a,
                _ => false,
            });
        let full = filled(&configs[i + 1]) || filled(&configs[i + 2]);
        if !(consumed || entered || advanced || full) {
            return Err(WindowViolation { window: i });
        }
    }
    Ok(())
}

/// Per flag: number of route steps from its holder's head to the nearest
/// track node holding the head of a particle whose next track node is free,
/// or `None` if there is no such node ahead.
fn flag_distances(
    fx: &ForestPath,
    c: &ScheduleConfig,
    holders: &[Option<ParticleId>],
) -> Vec<Option<usize>> {
    let b = fx.track.len();
    let mut occupant: HashMap<Node, usize> = HashMap::new();
    for (p, pl) in c.placements.iter().enumerate() {
        occupant.insert(pl.head, p);
        occupant.insert(pl.tail, p);
    }
    let frees_ahead = |j: usize| {
        let here = fx.track[j % b];
        let next = fx.track[(j + 1) % b];
        let open = fx.cyclic || j + 1 < b;
        open && occupant
            .get(&here)
            .is_some_and(|&p| c.placements[p].head == here)
            && !occupant.contains_key(&next)
    };
    holders
        .iter()
        .map(|h| {
            let p = (*h)?.0;
            let route = &fx.routes[p];
            let reach = route.approach.len() + b;
            let at = (0..reach).find(|&h| fx.node(p, h) == Some(c.placements[p].head))?;
            (at..reach).find_map(|h| {
                let v = fx.node(p, h)?;
                let j = fx.track_index(v)?;
                frees_ahead(j).then_some(h - at)
            })
        })
        .collect()
}
