//! Synchronous-round average consensus on clock offsets.

/// Offsets of one connected group of peers, with unit edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub offsets: Vec<f64>,
    pub epsilon: f64,
    /// Adjacency lists over local indices; symmetric.
    pub neighbors: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusRun {
    /// Rounds charged, after the min/max clamps.
    pub iterations: u32,
    pub converged: bool,
    /// Spread before the first round and after every round.
    pub spreads: Vec<f64>,
    /// Rounds in which the spread grew.
    pub spread_increases: u32,
}

impl ConsensusState {
    /// Step size `1 / max_degree`, the largest stable choice.
    pub fn new(offsets: Vec<f64>, neighbors: Vec<Vec<usize>>) -> Self {
        let max_degree = neighbors.iter().map(Vec::len).max().unwrap_or(0);
        let epsilon = if max_degree == 0 { 0.0 } else { 1.0 / max_degree as f64 };
        Self::with_epsilon(offsets, neighbors, epsilon)
    }

    pub fn with_epsilon(offsets: Vec<f64>, neighbors: Vec<Vec<usize>>, epsilon: f64) -> Self {
        assert_eq!(offsets.len(), neighbors.len(), "one adjacency list per node");
        Self {
            offsets,
            epsilon,
            neighbors,
        }
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Largest pairwise offset difference.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .offsets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if self.offsets.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }

    /// One round; every update reads the previous round's offsets.
    pub fn step(&mut self) {
        let prev = self.offsets.clone();
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            let pull: f64 = nbrs.iter().map(|&j| prev[j] - prev[i]).sum();
            self.offsets[i] = prev[i] + self.epsilon * pull;
        }
    }

    /// Iterates until the spread drops below `tolerance`, then charges at
    /// least `min_iter` and at most `max_iter` rounds.
    pub fn run(&mut self, tolerance: f64, min_iter: u32, max_iter: u32) -> ConsensusRun {
        let mut spreads = vec![self.spread()];
        let mut increases = 0;
        let mut done = 0;
        while done < max_iter && (done < min_iter || spreads[spreads.len() - 1] >= tolerance) {
            self.step();
            done += 1;
            let s = self.spread();
            let prev = spreads[spreads.len() - 1];
            if s > prev * (1.0 + 1e-9) + 1e-18 {
                increases += 1;
            }
            spreads.push(s);
        }
        ConsensusRun {
            iterations: done.max(min_iter).min(max_iter),
            converged: spreads[spreads.len() - 1] < tolerance,
            spreads,
            spread_increases: increases,
        }
    }
}

/// Connected components of an undirected graph, each sorted, in order of
/// their smallest member.
pub fn components(neighbors: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; neighbors.len()];
    let mut out = Vec::new();
    for start in 0..neighbors.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut k = 0;
        while k < comp.len() {
            for &j in &neighbors[comp[k]] {
                if !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                }
            }
            k += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(n: usize) -> Vec<Vec<usize>> {
        (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect()
    }

    #[test]
    fn two_peers_meet_in_the_middle() {
        let mut s = ConsensusState::with_epsilon(vec![0.0, 10e-6], mesh(2), 0.5);
        s.step();
        assert_eq!(s.offsets, vec![5e-6, 5e-6]);
        let mut s = ConsensusState::with_epsilon(vec![0.0, 10e-6], mesh(2), 0.5);
        let run = s.run(1e-6, 3, 20);
        assert!(run.converged);
        assert_eq!(run.iterations, 3);
    }

    #[test]
    fn fixed_point_charges_minimum() {
        let mut s = ConsensusState::new(vec![1e-6; 5], mesh(5));
        let run = s.run(1e-6, 3, 20);
        assert!(run.converged);
        assert_eq!(run.iterations, 3);
    }

    #[test]
    fn ten_node_mesh_contracts_every_round() {
        // Independent oracle: iterate the linear map by hand with explicit sums.
        let init: Vec<f64> = (0..10).map(|i| ((i * 37 % 19) as f64 - 9.0) * 5e-6).collect();
        let mut s = ConsensusState::new(init.clone(), mesh(10));
        assert_eq!(s.epsilon, 1.0 / 9.0);
        let mut oracle = init;
        for _ in 0..20 {
            let before = s.spread();
            s.step();
            let next: Vec<f64> = (0..10)
                .map(|i| {
                    let others: f64 = (0..10).filter(|&j| j != i).map(|j| oracle[j]).sum();
                    others / 9.0
                })
                .collect();
            oracle = next;
            for (a, b) in s.offsets.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-15);
            }
            assert!(s.spread() < before || before == 0.0);
        }
        assert!(s.spread() < 1e-6);
    }

    #[test]
    fn component_split() {
        let adj = vec![vec![1], vec![0], vec![], vec![4], vec![3]];
        assert_eq!(components(&adj), vec![vec![0, 1], vec![2], vec![3, 4]]);
    }
}
