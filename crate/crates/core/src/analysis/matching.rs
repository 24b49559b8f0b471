//! Hopcroft–Karp maximum bipartite matching with warm starts.

use std::collections::VecDeque;

const NIL: usize = usize::MAX;

/// A bipartite graph with left vertices `0..adj.len()` and right vertices
/// `0..right`, plus a current matching.
#[derive(Clone, Debug)]
pub struct BipartiteMatching {
    adj: Vec<Vec<usize>>,
    match_left: Vec<usize>,
    match_right: Vec<usize>,
    dist: Vec<u32>,
}

impl BipartiteMatching {
    pub fn new(adj: Vec<Vec<usize>>, right: usize) -> Self {
        let left = adj.len();
        BipartiteMatching {
            adj,
            match_left: vec![NIL; left],
            match_right: vec![NIL; right],
            dist: vec![0; left],
        }
    }

    /// Seeds the matching with the given pairs. Pairs must be edges and
    /// vertex-disjoint.
    pub fn with_matching(mut self, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        for (l, r) in pairs {
            debug_assert!(self.adj[l].contains(&r));
            debug_assert!(self.match_left[l] == NIL && self.match_right[r] == NIL);
            self.match_left[l] = r;
            self.match_right[r] = l;
        }
        self
    }

    pub fn size(&self) -> usize {
        self.match_left.iter().filter(|&&r| r != NIL).count()
    }

    pub fn partner_of_left(&self, l: usize) -> Option<usize> {
        Some(self.match_left[l]).filter(|&r| r != NIL)
    }

    pub fn partner_of_right(&self, r: usize) -> Option<usize> {
        Some(self.match_right[r]).filter(|&l| l != NIL)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.match_left
            .iter()
            .enumerate()
            .filter(|(_, &r)| r != NIL)
            .map(|(l, &r)| (l, r))
    }

    /// Grows the current matching to a maximum one. Vertices matched before
    /// the call stay matched.
    pub fn maximize(&mut self) -> usize {
        while self.bfs() {
            for l in 0..self.adj.len() {
                if self.match_left[l] == NIL {
                    self.dfs(l);
                }
            }
        }
        self.size()
    }

    fn bfs(&mut self) -> bool {
        let mut queue = VecDeque::new();
        for l in 0..self.adj.len() {
            if self.match_left[l] == NIL {
                self.dist[l] = 0;
                queue.push_back(l);
            } else {
                self.dist[l] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in &self.adj[l] {
                let m = self.match_right[r];
                if m == NIL {
                    found = true;
                } else if self.dist[m] == u32::MAX {
                    self.dist[m] = self.dist[l] + 1;
                    queue.push_back(m);
                }
            }
        }
        found
    }

    fn dfs(&mut self, l: usize) -> bool {
        for i in 0..self.adj[l].len() {
            let r = self.adj[l][i];
            let m = self.match_right[r];
            if m == NIL || (self.dist[m] == self.dist[l] + 1 && self.dfs(m)) {
                self.match_left[l] = r;
                self.match_right[r] = l;
                return true;
            }
        }
        self.dist[l] = u32::MAX;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(adj: &[Vec<usize>], right: usize) -> usize {
        fn go(l: usize, adj: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
            if l == adj.len() {
                return 0;
            }
            let mut best = go(l + 1, adj, used);
            for &r in &adj[l] {
                if !used[r] {
                    used[r] = true;
                    best = best.max(1 + go(l + 1, adj, used));
                    used[r] = false;
                }
            }
            best
        }
        go(0, adj, &mut vec![false; right])
    }

    #[test]
    fn matches_brute_force_on_small_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let left = rng.gen_range(0..7);
            let right = rng.gen_range(1..7);
            let adj: Vec<Vec<usize>> = (0..left)
                .map(|_| (0..right).filter(|_| rng.gen_bool(0.4)).collect())
                .collect();
            let mut m = BipartiteMatching::new(adj.clone(), right);
            assert_eq!(m.maximize(), brute_force(&adj, right));
            for (l, r) in m.pairs() {
                assert!(adj[l].contains(&r));
                assert_eq!(m.partner_of_right(r), Some(l));
            }
        }
    }

    #[test]
    fn warm_start_keeps_matched_vertices() {
        // path l0-r0, l1-r0, l1-r1: seeding (1,0) must still reach size 2
        let adj = vec![vec![0], vec![0, 1]];
        let mut m = BipartiteMatching::new(adj, 2).with_matching([(1, 0)]);
        assert_eq!(m.maximize(), 2);
        assert!(m.partner_of_right(0).is_some());
    }
}
