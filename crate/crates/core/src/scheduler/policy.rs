//! Activation orders for the sequential scheduler.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::ParticleId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum ActivationPolicy {
    /// Every round activates all particles once, in a fresh random order.
    #[default]
    RandomPermutationRounds,
    /// Activations are drawn uniformly with replacement; a round closes once
    /// every particle has been activated at least once since it began.
    UniformRandomSingles,
    /// The given rounds are played in order and then repeated cyclically.
    /// Each round must mention every particle.
    Scripted(Vec<Vec<ParticleId>>),
}


impl std::str::FromStr for ActivationPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "permutation" | "random-permutation" => Ok(ActivationPolicy::RandomPermutationRounds),
            "uniform" | "uniform-singles" => Ok(ActivationPolicy::UniformRandomSingles),
            other => Err(format!("unknown activation policy `{other}`")),
        }
    }
}

impl ActivationPolicy {
    /// The activation sequence of round `round` (0-based).
    pub fn round_sequence(&self, n: usize, round: u64, rng: &mut ChaCha8Rng) -> Vec<ParticleId> {
        match self {
            ActivationPolicy::RandomPermutationRounds => {
                let mut ids: Vec<ParticleId> = (0..n).map(ParticleId).collect();
                ids.shuffle(rng);
                ids
            }
            ActivationPolicy::UniformRandomSingles => {
                let mut seen = vec![false; n];
                let mut missing = n;
                let mut seq = Vec::with_capacity(n * 4);
                while missing > 0 {
                    let i = rng.gen_range(0..n);
                    if !seen[i] {
                        seen[i] = true;
                        missing -= 1;
                    }
                    seq.push(ParticleId(i));
                }
                seq
            }
            ActivationPolicy::Scripted(rounds) => {
                if rounds.is_empty() {
                    return (0..n).map(ParticleId).collect();
                }
                rounds[(round % rounds.len() as u64) as usize].clone()
            }
        }
    }
}
