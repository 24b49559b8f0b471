use std::collections::HashSet;

use serde::Serialize;

use super::Instance;
use crate::analysis::LayerStats;
use crate::grid::{components, hexagon, Node};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "property", rename_all = "snake_case")]
pub enum Violation {
    /// Property 1: particles must be contracted on distinct free nodes.
    ParticleOnObject {
        node: Node,
    },
    SharedNode {
        node: Node,
    },
    /// Property 2.
    EmptyObject,
    ObjectDisconnected {
        components: usize,
    },
    SystemDisconnected {
        components: usize,
    },
    /// Property 3: the complement of the object has `components` parts.
    Hole {
        components: usize,
    },
    /// Property 4: `node` lies in a passage narrower than `width`.
    Tunnel {
        node: Node,
        width: usize,
    },
}

impl Violation {
    pub fn property(&self) -> u8 {
        match self {
            Violation::ParticleOnObject { .. } | Violation::SharedNode { .. } => 1,
            Violation::EmptyObject
            | Violation::ObjectDisconnected { .. }
            | Violation::SystemDisconnected { .. } => 2,
            Violation::Hole { .. } => 3,
            Violation::Tunnel { .. } => 4,
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::ParticleOnObject { node } => {
                write!(f, "property 1: particle on object node {node}")
            }
            Violation::SharedNode { node } => write!(f, "property 1: two particles on node {node}"),
            Violation::EmptyObject => write!(f, "property 2: the object is empty"),
            Violation::ObjectDisconnected { components } => {
                write!(f, "property 2: the object has {components} components")
            }
            Violation::SystemDisconnected { components } => {
                write!(
                    f,
                    "property 2: object and particles form {components} components"
                )
            }
            Violation::Hole { components } => {
                write!(f, "property 3: the free space has {components} components")
            }
            Violation::Tunnel { node, width } => {
                write!(
                    f,
                    "property 4: node {node} lies in a tunnel narrower than {width}"
                )
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TunnelCheck {
    Unchecked,
    Checked,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub property4: TunnelCheck,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the validity properties of an instance. Tunnel width is checked
/// only when `strict` is set.
pub fn validate_instance(inst: &Instance, strict: bool) -> ValidationReport {
    let object = inst.object_set();
    let mut violations = Vec::new();

    let mut seen = HashSet::new();
    for &p in &inst.particles {
        if object.contains(&p) {
            violations.push(Violation::ParticleOnObject { node: p });
        } else if !seen.insert(p) {
            violations.push(Violation::SharedNode { node: p });
        }
    }

    if object.is_empty() {
        violations.push(Violation::EmptyObject);
    } else {
        let parts = components(&object);
        if parts > 1 {
            violations.push(Violation::ObjectDisconnected { components: parts });
        }
        let system: HashSet<Node> = object.union(&seen).copied().collect();
        let parts = components(&system);
        if parts > 1 {
            violations.push(Violation::SystemDisconnected { components: parts });
        }
        let parts = components(&free_region(&object));
        if parts > 1 {
            violations.push(Violation::Hole { components: parts });
        }
    }

    let property4 = if strict && !object.is_empty() && !inst.particles.is_empty() {
        violations.extend(tunnels(&object, inst.n()));
        TunnelCheck::Checked
    } else {
        TunnelCheck::Unchecked
    };

    ValidationReport {
        violations,
        property4,
    }
}

/// Free nodes of a hexagon that contains the object with two rings to spare.
/// Its outer ring is free and connected, so the free space of the whole grid
/// is connected exactly when this region is.
fn free_region(object: &HashSet<Node>) -> HashSet<Node> {
    let center = centroid(object);
    let reach = object.iter().map(|v| v.distance(center)).max().unwrap_or(0);
    hexagon(center, reach + 2)
        .into_iter()
        .filter(|v| !object.contains(v))
        .collect()
}

fn centroid(nodes: &HashSet<Node>) -> Node {
    let k = nodes.len().max(1) as i64;
    let q: i64 = nodes.iter().map(|v| v.q as i64).sum();
    let r: i64 = nodes.iter().map(|v| v.r as i64).sum();
    Node::new((q / k) as i32, (r / k) as i32)
}

/// Free nodes near the object that no free hexagon of radius
/// `ceil(n / B_1)` covers. A passage admitting such a hexagon is at least
/// `2 ceil(n / B_1) + 1` nodes wide; only nodes within `ceil(n / B_1) + 2`
/// of the object are inspected.
fn tunnels(object: &HashSet<Node>, n: usize) -> Vec<Violation> {
    let b1 = LayerStats::compute(object, n).b(1).max(1);
    let r = n.div_ceil(b1) as u32;
    let width = 2 * (r as usize + 1);
    let near = |v: Node| {
        object
            .iter()
            .map(|o| o.distance(v))
            .min()
            .unwrap_or(u32::MAX)
    };
    let inspected: Vec<Node> = {
        let center = centroid(object);
        let reach = object.iter().map(|v| v.distance(center)).max().unwrap_or(0);
        let mut nodes: Vec<Node> = hexagon(center, reach + r + 2)
            .into_iter()
            .filter(|&v| !object.contains(&v) && near(v) <= r + 2)
            .collect();
        nodes.sort_unstable();
        nodes
    };
    let ball_free = |c: Node| hexagon(c, r).into_iter().all(|w| !object.contains(&w));
    let mut centers: HashSet<Node> = HashSet::new();
    for &v in &inspected {
        for c in hexagon(v, r) {
            if !object.contains(&c) && !centers.contains(&c) && ball_free(c) {
                centers.insert(c);
            }
        }
    }
    inspected
        .into_iter()
        .filter(|&v| !hexagon(v, r).into_iter().any(|c| centers.contains(&c)))
        .map(|node| Violation::Tunnel { node, width })
        .collect()
}
