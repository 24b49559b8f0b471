use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::Node;
use crate::model::Configuration;

/// An object together with contracted idle particles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub object: Vec<Node>,
    pub particles: Vec<Node>,
    pub seed: u64,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl Instance {
    /// Sorts the object nodes so equal instances serialize identically.
    /// Particle order is kept because it fixes particle identities.
    pub fn new(object: impl IntoIterator<Item = Node>, particles: Vec<Node>, seed: u64) -> Self {
        let mut object: Vec<Node> = object.into_iter().collect();
        object.sort_unstable();
        object.dedup();
        Instance {
            object,
            particles,
            seed,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn n(&self) -> usize {
        self.particles.len()
    }

    pub fn object_set(&self) -> HashSet<Node> {
        self.object.iter().copied().collect()
    }

    pub fn generator(&self) -> &str {
        self.meta
            .get("generator")
            .and_then(|v| v.as_str())
            .unwrap_or("file")
    }

    /// Chirality offsets drawn uniformly from `0..6` with the given seed.
    pub fn chirality_offsets(&self, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6368_6972_616c);
        (0..self.n()).map(|_| rng.gen_range(0..6)).collect()
    }

    pub fn configuration(&self, seed: u64) -> Configuration {
        Configuration::new(
            self.object.iter().copied(),
            &self.particles,
            &self.chirality_offsets(seed),
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("instances always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(std::io::Error::other)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }
}
