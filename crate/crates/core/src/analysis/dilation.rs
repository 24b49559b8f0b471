use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::matching::BipartiteMatching;
use super::LayerStats;
use crate::grid::{distance, Node};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingDilationResult {
    pub value: u32,
    /// `assignment[k]` is the target node of particle `k`.
    pub assignment: Vec<Node>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DilationError {
    #[error("no particles")]
    Empty,
    #[error("{n} particles exceed the {slots} available target positions")]
    Infeasible { n: usize, slots: usize },
}

/// Target positions of a legal coating: every node of layers `1..N` is
/// required, every node of layer `N` is optional.
struct Slots {
    nodes: Vec<Node>,
    required: usize,
}

fn slots(object: &HashSet<Node>, n: usize) -> Slots {
    let (stats, map) = LayerStats::with_map(object, n);
    let mut nodes = Vec::new();
    for i in 1..stats.final_layer {
        nodes.extend_from_slice(map.nodes(i));
    }
    let required = nodes.len();
    nodes.extend_from_slice(map.nodes(stats.final_layer));
    Slots { nodes, required }
}

/// Finds an assignment saturating all particles and all required slots using
/// only particle-slot pairs at distance at most `c`.
fn assign(particles: &[Node], slots: &Slots, c: u32) -> Option<Vec<usize>> {
    let n = particles.len();
    // first saturate the required slots, with slots on the left
    let required_adj: Vec<Vec<usize>> = slots.nodes[..slots.required]
        .iter()
        .map(|&s| (0..n).filter(|&k| distance(s, particles[k]) <= c).collect())
        .collect();
    let mut first = BipartiteMatching::new(required_adj, n);
    if first.maximize() < slots.required {
        return None;
    }
    // then augment from the particle side; matched slots stay matched
    let adj: Vec<Vec<usize>> = particles
        .iter()
        .map(|&p| {
            (0..slots.nodes.len())
                .filter(|&s| distance(p, slots.nodes[s]) <= c)
                .collect()
        })
        .collect();
    let seed: Vec<(usize, usize)> = first.pairs().map(|(s, k)| (k, s)).collect();
    let mut second = BipartiteMatching::new(adj, slots.nodes.len()).with_matching(seed);
    if second.maximize() < n {
        return None;
    }
    Some((0..n).map(|k| second.partner_of_left(k).unwrap()).collect())
}

/// Whether a perfect assignment with maximum distance at most `c` exists.
pub fn md_bottleneck_feasible(object: &HashSet<Node>, particles: &[Node], c: u32) -> bool {
    if particles.is_empty() {
        return true;
    }
    assign(particles, &slots(object, particles.len()), c).is_some()
}

/// The matching dilation of the particle positions with respect to the object.
pub fn matching_dilation(
    object: &HashSet<Node>,
    particles: &[Node],
) -> Result<MatchingDilationResult, DilationError> {
    if particles.is_empty() {
        return Err(DilationError::Empty);
    }
    let slots = slots(object, particles.len());
    if slots.nodes.len() < particles.len() {
        return Err(DilationError::Infeasible {
            n: particles.len(),
            slots: slots.nodes.len(),
        });
    }
    let hi = particles
        .iter()
        .flat_map(|&p| slots.nodes.iter().map(move |&s| distance(p, s)))
        .max()
        .unwrap_or(0);
    let (mut lo, mut hi) = (0, hi);
    let mut best = assign(particles, &slots, hi).expect("all edges present");
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        match assign(particles, &slots, mid) {
            Some(a) => {
                best = a;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    let assignment: Vec<Node> = best.into_iter().map(|s| slots.nodes[s]).collect();
    let value = particles
        .iter()
        .zip(&assignment)
        .map(|(&p, &s)| distance(p, s))
        .max()
        .unwrap_or(0);
    debug_assert_eq!(value, lo);
    Ok(MatchingDilationResult { value, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> HashSet<Node> {
        HashSet::from([Node::ORIGIN])
    }

    #[test]
    fn particles_already_in_place() {
        let md = matching_dilation(&single(), &Node::ORIGIN.neighbors()).unwrap();
        assert_eq!(md.value, 0);
    }

    #[test]
    fn lone_far_particle() {
        let md = matching_dilation(&single(), &[Node::new(5, 0)]).unwrap();
        assert_eq!(md.value, 4);
        assert_eq!(md.assignment, vec![Node::new(1, 0)]);
    }

    #[test]
    fn zero_threshold_needs_exact_cover() {
        let ring = Node::ORIGIN.neighbors();
        assert!(md_bottleneck_feasible(&single(), &ring, 0));
        let mut off = ring.to_vec();
        off[0] = Node::new(2, 0);
        assert!(!md_bottleneck_feasible(&single(), &off, 0));
        assert!(md_bottleneck_feasible(&single(), &off, 1));
    }

    #[test]
    fn second_layer_must_complete_the_first() {
        // seven particles: six must cover layer 1 entirely
        let mut pos: Vec<Node> = (0..7).map(|k| Node::new(2 + k, 0)).collect();
        pos.sort();
        let md = matching_dilation(&single(), &pos).unwrap();
        let layer_one: HashSet<Node> = Node::ORIGIN.neighbors().into_iter().collect();
        let covered = md
            .assignment
            .iter()
            .filter(|v| layer_one.contains(v))
            .count();
        assert_eq!(covered, 6);
        assert!(md_bottleneck_feasible(&single(), &pos, md.value));
        assert!(!md_bottleneck_feasible(&single(), &pos, md.value - 1));
    }
}
