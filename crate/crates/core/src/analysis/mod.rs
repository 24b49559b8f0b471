//! Verdicts and metrics over configurations: legality, layer statistics,
//! layer completion and the matching-dilation lower bound.

mod dilation;
pub mod matching;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::grid::{LayerMap, Node};
use crate::model::Configuration;

pub use dilation::{
    matching_dilation, md_bottleneck_feasible, DilationError, MatchingDilationResult,
};

/// Layer sizes around an object together with the final layer index `N` for
/// `n` particles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerStats {
    /// `b[i - 1] = B_i` for `i = 1..=N+1`.
    pub b: Vec<usize>,
    /// Smallest `N` with `B_1 + ... + B_N >= n`.
    pub final_layer: u32,
    pub n: usize,
}

impl LayerStats {
    pub fn compute(object: &HashSet<Node>, n: usize) -> LayerStats {
        Self::with_map(object, n).0
    }

    /// Also returns the layer map covering layers `0..=N+1`.
    pub fn with_map(object: &HashSet<Node>, n: usize) -> (LayerStats, LayerMap) {
        let mut radius = 4;
        loop {
            let map = LayerMap::new(object, radius);
            let mut total = 0;
            let mut final_layer = None;
            for i in 1..=radius {
                total += map.count(i);
                if total >= n.max(1) {
                    final_layer = Some(i);
                    break;
                }
            }
            match final_layer {
                Some(big_n) if big_n < radius => {
                    let b = (1..=big_n + 1).map(|i| map.count(i)).collect();
                    let stats = LayerStats {
                        b,
                        final_layer: big_n,
                        n,
                    };
                    return (stats, map);
                }
                _ => radius *= 2,
            }
        }
    }

    pub fn b(&self, i: u32) -> usize {
        self.b[(i - 1) as usize]
    }

    /// Particles left for layer `i` and beyond: `n - (B_1 + ... + B_{i-1})`.
    pub fn remaining(&self, i: u32) -> usize {
        let filled: usize = self.b.iter().take((i - 1) as usize).sum();
        self.n.saturating_sub(filled)
    }
}

/// All particles contracted, and no free non-object node is closer to the
/// object than the farthest particle.
pub fn is_legal(cfg: &Configuration) -> bool {
    if cfg.particles().iter().any(|p| p.is_expanded()) {
        return false;
    }
    if cfg.is_empty() {
        return true;
    }
    let object = cfg.object();
    let probe = LayerMap::new(object, 1);
    let mut max_occupied = 0;
    for p in cfg.particles() {
        max_occupied = max_occupied.max(probe.layer(p.head).unwrap_or(2));
    }
    if max_occupied > 1 {
        let map = LayerMap::new(object, cfg.len() as u32 + 1);
        max_occupied = cfg
            .particles()
            .iter()
            .map(|p| map.layer(p.head).unwrap_or(u32::MAX))
            .max()
            .unwrap_or(0);
        if max_occupied == u32::MAX {
            return false;
        }
        return (1..max_occupied).all(|i| map.nodes(i).iter().all(|&v| cfg.occupant(v).is_some()));
    }
    true
}

/// Whether layer `i` is complete in the sense of the layering argument. For
/// `i < N` every node of layer `i` holds a contracted retired particle. For
/// the final layer every particle must be contracted and the execution
/// `quiescent`.
pub fn layer_complete(
    cfg: &Configuration,
    stats: &LayerStats,
    map: &LayerMap,
    i: u32,
    quiescent: bool,
) -> bool {
    if i == 0 || i > stats.final_layer {
        return false;
    }
    if i < stats.final_layer {
        return map.nodes(i).iter().all(|&v| {
            cfg.occupant_particle(v)
                .is_some_and(|p| p.is_contracted() && p.mem.state.is_retired())
        });
    }
    quiescent && cfg.particles().iter().all(|p| p.is_contracted()) && is_legal(cfg)
}

/// Ratio of rounds to matching dilation; `None` when the dilation is zero.
pub fn competitive_ratio_estimate(rounds: u64, md: u32) -> Option<f64> {
    (md > 0).then(|| rounds as f64 / md as f64)
}
