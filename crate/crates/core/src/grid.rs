//! Geometry of the infinite triangular grid.
//!
//! Nodes use axial coordinates `(q, r)`. The six unit directions are indexed
//! `0..6` in clockwise order starting from East, with `r` growing downward:
//!
//! ```text
//!   4:NW (0,-1)   5:NE (1,-1)
//! 3:W (-1,0)   *   0:E (1,0)
//!   2:SW (-1,1)   1:SE (0,1)
//! ```
//!
//! Nothing here ever materializes the whole grid; node sets are grown on
//! demand by bounded breadth-first search.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

/// A node of the triangular grid. Serializes as `[q, r]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Node {
    pub q: i32,
    pub r: i32,
}

impl From<[i32; 2]> for Node {
    fn from([q, r]: [i32; 2]) -> Self {
        Node { q, r }
    }
}

impl From<Node> for [i32; 2] {
    fn from(n: Node) -> Self {
        [n.q, n.r]
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.q, self.r)
    }
}

impl Node {
    pub const ORIGIN: Node = Node { q: 0, r: 0 };

    pub const fn new(q: i32, r: i32) -> Self {
        Node { q, r }
    }

    pub fn neighbor(self, d: Direction) -> Node {
        let (dq, dr) = OFFSETS[d.index()];
        Node::new(self.q + dq, self.r + dr)
    }

    pub fn neighbors(self) -> [Node; 6] {
        Direction::ALL.map(|d| self.neighbor(d))
    }

    /// Global direction from `self` to an adjacent node, if they are adjacent.
    pub fn direction_to(self, other: Node) -> Option<Direction> {
        let delta = (other.q - self.q, other.r - self.r);
        OFFSETS
            .iter()
            .position(|&o| o == delta)
            .map(|i| Direction(i as u8))
    }

    pub fn is_adjacent(self, other: Node) -> bool {
        self.direction_to(other).is_some()
    }

    pub fn distance(self, other: Node) -> u32 {
        distance(self, other)
    }

    /// Horizontal screen coordinate in units of the edge length.
    pub fn x(self) -> f64 {
        self.q as f64 + self.r as f64 / 2.0
    }

    /// Vertical screen coordinate (downward) in units of the edge length.
    pub fn y(self) -> f64 {
        self.r as f64 * 3f64.sqrt() / 2.0
    }
}

const OFFSETS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// One of the six global grid directions, indexed clockwise from East.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Direction(u8);

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction(0),
        Direction(1),
        Direction(2),
        Direction(3),
        Direction(4),
        Direction(5),
    ];

    pub fn new(index: u8) -> Self {
        Direction(index % 6)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn opposite(self) -> Self {
        Direction((self.0 + 3) % 6)
    }

    /// Rotate by `steps` sixths of a turn clockwise (negative for counter-clockwise).
    pub fn rotate(self, steps: i32) -> Self {
        Direction((self.0 as i32 + steps).rem_euclid(6) as u8)
    }

    pub fn clockwise(self) -> Self {
        self.rotate(1)
    }

    pub fn counter_clockwise(self) -> Self {
        self.rotate(-1)
    }
}

pub fn neighbor(v: Node, d: Direction) -> Node {
    v.neighbor(d)
}

/// Shortest-path length in the grid.
pub fn distance(v: Node, w: Node) -> u32 {
    let dq = w.q - v.q;
    let dr = w.r - v.r;
    ((dq.abs() + dr.abs() + (dq + dr).abs()) / 2) as u32
}

/// Minimum distance from `v` to any node of `set`.
///
/// Panics if `set` is empty.
pub fn distance_to_set<'a, I>(v: Node, set: I) -> u32
where
    I: IntoIterator<Item = &'a Node>,
{
    set.into_iter()
        .map(|&w| distance(v, w))
        .min()
        .expect("distance_to_set called with an empty node set")
}

/// Layer index of `v` with respect to the object `object` (0 for object nodes).
pub fn layer_of<'a, I>(v: Node, object: I) -> u32
where
    I: IntoIterator<Item = &'a Node>,
{
    distance_to_set(v, object)
}

/// Distances from an object to every node within `max_layer`, computed by
/// multi-source BFS.
#[derive(Clone, Debug)]
pub struct LayerMap {
    dist: HashMap<Node, u32>,
    layers: Vec<Vec<Node>>,
}

impl LayerMap {
    pub fn new<'a, I>(object: I, max_layer: u32) -> Self
    where
        I: IntoIterator<Item = &'a Node>,
    {
        let mut dist = HashMap::new();
        let mut layers: Vec<Vec<Node>> = vec![Vec::new()];
        let mut queue = VecDeque::new();
        for &v in object {
            if dist.insert(v, 0).is_none() {
                layers[0].push(v);
                queue.push_back(v);
            }
        }
        assert!(!layers[0].is_empty(), "LayerMap needs a nonempty object");
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            if d == max_layer {
                continue;
            }
            for w in v.neighbors() {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(w) {
                    e.insert(d + 1);
                    if layers.len() <= (d + 1) as usize {
                        layers.push(Vec::new());
                    }
                    layers[(d + 1) as usize].push(w);
                    queue.push_back(w);
                }
            }
        }
        for layer in &mut layers {
            layer.sort_unstable();
        }
        LayerMap { dist, layers }
    }

    pub fn max_layer(&self) -> u32 {
        (self.layers.len() - 1) as u32
    }

    /// Layer of `v`, or `None` if it lies beyond the computed radius.
    pub fn layer(&self, v: Node) -> Option<u32> {
        self.dist.get(&v).copied()
    }

    /// Sorted nodes of layer `i` (empty slice beyond the computed radius).
    pub fn nodes(&self, i: u32) -> &[Node] {
        self.layers.get(i as usize).map_or(&[], Vec::as_slice)
    }

    pub fn count(&self, i: u32) -> usize {
        self.nodes(i).len()
    }
}

/// The exact set of nodes at distance `i >= 1` from `object`.
pub fn layer_nodes<'a, I>(i: u32, object: I) -> BTreeSet<Node>
where
    I: IntoIterator<Item = &'a Node>,
{
    assert!(i >= 1, "layer_nodes expects i >= 1");
    LayerMap::new(object, i).nodes(i).iter().copied().collect()
}

/// Number of connected components of the subgraph induced by `nodes`.
pub fn components(nodes: &HashSet<Node>) -> usize {
    let mut seen: HashSet<Node> = HashSet::with_capacity(nodes.len());
    let mut count = 0;
    for &start in nodes {
        if !seen.insert(start) {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for w in v.neighbors() {
                if nodes.contains(&w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
    }
    count
}

pub fn is_connected(nodes: &HashSet<Node>) -> bool {
    components(nodes) <= 1
}

/// All nodes within distance `radius` of `center` (a regular hexagon).
pub fn hexagon(center: Node, radius: u32) -> Vec<Node> {
    let r = radius as i32;
    let mut out = Vec::new();
    for dq in -r..=r {
        for dr in (-r).max(-dq - r)..=r.min(-dq + r) {
            out.push(Node::new(center.q + dq, center.r + dr));
        }
    }
    out.sort_unstable();
    out
}

/// Layer-1 nodes of a hole-free object listed in clockwise walking order,
/// starting from the smallest node.
pub fn layer_one_cycle(object: &HashSet<Node>) -> Vec<Node> {
    let map = LayerMap::new(object, 1);
    let ring: HashSet<Node> = map.nodes(1).iter().copied().collect();
    let Some(&start) = map.nodes(1).first() else {
        return Vec::new();
    };
    let mut order = vec![start];
    let mut seen = HashSet::from([start]);
    let mut cur = start;
    loop {
        let next = clockwise_step(cur, |w| object.contains(&w));
        match next {
            Some(n) if ring.contains(&n) && seen.insert(n) => {
                order.push(n);
                cur = n;
            }
            _ => break,
        }
    }
    order
}

/// Next node when walking clockwise around the region marked `blocked`,
/// keeping it on the walker's side. Returns `None` if `v` is not adjacent to
/// the region or is surrounded by it.
pub fn clockwise_step(v: Node, blocked: impl Fn(Node) -> bool) -> Option<Node> {
    let down = Direction::ALL
        .into_iter()
        .find(|&d| blocked(v.neighbor(d)))?;
    let mut d = down;
    for _ in 0..6 {
        d = d.counter_clockwise();
        if !blocked(v.neighbor(d)) {
            return Some(v.neighbor(d));
        }
    }
    None
}
