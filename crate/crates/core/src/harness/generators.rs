use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::Instance;
use crate::grid::{hexagon, Node};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeneratorError {
    #[error("the gap construction needs n = 2L + 4 for an even line length L >= 2, got n = {0}")]
    BadParity(usize),
    #[error("at least one particle is required")]
    NoParticles,
}

/// A regular hexagon of the given radius with `n` particles grown around it
/// by random accretion: each particle lands on a uniformly chosen free node
/// adjacent to the object or to an earlier particle.
pub fn gen_hexagon(radius: u32, n: usize, seed: u64) -> Result<Instance, GeneratorError> {
    if n == 0 {
        return Err(GeneratorError::NoParticles);
    }
    let object: BTreeSet<Node> = hexagon(Node::ORIGIN, radius).into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = object.clone();
    let mut frontier: BTreeSet<Node> = BTreeSet::new();
    for v in &object {
        frontier.extend(v.neighbors().into_iter().filter(|w| !object.contains(w)));
    }
    let mut particles = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.gen_range(0..frontier.len());
        let v = *frontier.iter().nth(k).expect("frontier is never empty");
        frontier.remove(&v);
        taken.insert(v);
        particles.push(v);
        frontier.extend(v.neighbors().into_iter().filter(|w| !taken.contains(w)));
    }
    Ok(Instance::new(object, particles, seed)
        .with_meta("generator", "hexagon")
        .with_meta("radius", radius)
        .with_meta("n", n))
}

/// A horizontal line object of length `n` with a perpendicular chain of `n`
/// particles rising from its last node; the k-th particle sits at distance k.
pub fn gen_line_lemma1(n: usize) -> Result<Instance, GeneratorError> {
    if n == 0 {
        return Err(GeneratorError::NoParticles);
    }
    let len = n as i32;
    let object = (0..len).map(|q| Node::new(q, 0));
    let particles = (1..=len).map(|k| Node::new(len - 1, -k)).collect();
    Ok(Instance::new(object, particles, 0)
        .with_meta("generator", "line_lemma1")
        .with_meta("n", n))
}

/// The competitive-gap construction: a line object of even length `L`, its
/// first layer fully occupied except for the middle node below the line, and
/// one extra particle in layer 2 above the middle. Requires `n = 2L + 4`.
pub fn gen_gap_theorem1(n: usize) -> Result<Instance, GeneratorError> {
    if n < 8 || !(n - 4).is_multiple_of(4) {
        return Err(GeneratorError::BadParity(n));
    }
    let len = ((n - 4) / 2) as i32;
    let object: Vec<Node> = (0..len).map(|q| Node::new(q, 0)).collect();
    let hole = Node::new(len / 2 - 1, 1);
    let mut particles: Vec<Node> = Vec::with_capacity(n);
    particles.extend((0..=len).map(|q| Node::new(q, -1)));
    particles.push(Node::new(len, 0));
    particles.extend(
        (-1..len)
            .rev()
            .map(|q| Node::new(q, 1))
            .filter(|&v| v != hole),
    );
    particles.push(Node::new(-1, 0));
    particles.push(Node::new(len / 2, -2));
    Ok(Instance::new(object, particles, 0)
        .with_meta("generator", "gap_theorem1")
        .with_meta("n", n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LayerMap;
    use std::collections::HashSet;

    #[test]
    fn hexagon_counts() {
        let inst = gen_hexagon(1, 6, 3).unwrap();
        assert_eq!(inst.object.len(), 7);
        let map = LayerMap::new(&inst.object, 1);
        assert_eq!(map.count(1), 12);
        let inst = gen_hexagon(2, 18, 3).unwrap();
        assert_eq!(LayerMap::new(&inst.object, 1).count(1), 18);
        assert_eq!(inst.n(), 18);
    }

    #[test]
    fn hexagon_particles_are_distinct_and_off_object() {
        let inst = gen_hexagon(3, 80, 11).unwrap();
        let object = inst.object_set();
        let set: HashSet<Node> = inst.particles.iter().copied().collect();
        assert_eq!(set.len(), 80);
        assert!(set.iter().all(|v| !object.contains(v)));
    }

    #[test]
    fn line_chain_distances() {
        let inst = gen_line_lemma1(3).unwrap();
        let map = LayerMap::new(&inst.object, 5);
        let d: Vec<u32> = inst
            .particles
            .iter()
            .map(|&v| map.layer(v).unwrap())
            .collect();
        assert_eq!(d, vec![1, 2, 3]);
        let one = gen_line_lemma1(1).unwrap();
        assert_eq!(map.layer(one.particles[0]), Some(1));
    }

    #[test]
    fn gap_shape() {
        assert_eq!(gen_gap_theorem1(9), Err(GeneratorError::BadParity(9)));
        assert_eq!(gen_gap_theorem1(6), Err(GeneratorError::BadParity(6)));
        let inst = gen_gap_theorem1(12).unwrap();
        let map = LayerMap::new(&inst.object, 3);
        let layers: Vec<u32> = inst
            .particles
            .iter()
            .map(|&v| map.layer(v).unwrap())
            .collect();
        assert_eq!(layers.iter().filter(|&&l| l == 1).count(), map.count(1) - 1);
        assert_eq!(layers.iter().filter(|&&l| l == 2).count(), 1);
        assert_eq!(inst.n(), map.count(1));
    }
}
