//! Perturbation patterns for the network-structure comparison.
//!
//! Edges are directed with equal weights summing to `weight_sum`:
//! star points every leaf at node 0, chain links `i → i+1`, ring adds the
//! closing edge `m−1 → 0`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use netprice::{BlockNetwork, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Star,
    Chain,
    Ring,
}

impl Family {
    fn edges(self, m: usize) -> Vec<(usize, usize)> {
        match self {
            Family::Star => (1..m).map(|j| (j, 0)).collect(),
            Family::Chain => (0..m.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            Family::Ring => (0..m).map(|i| (i, (i + 1) % m)).collect(),
        }
    }

    /// Weight matrix `C` with entries summing to `weight_sum`.
    pub fn weights(self, m: usize, weight_sum: f64) -> DMatrix<f64> {
        let edges = self.edges(m);
        let w = weight_sum / edges.len().max(1) as f64;
        let mut c = DMatrix::zeros(m, m);
        for (i, j) in edges {
            c[(i, j)] += w;
        }
        c
    }

    /// `E = I + δC` with equal group sizes.
    pub fn network(self, m: usize, weight_sum: f64, delta: f64) -> Result<BlockNetwork> {
        let e = DMatrix::identity(m, m) + self.weights(m, weight_sum) * delta;
        BlockNetwork::equal_groups(e)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Star => "star",
            Family::Chain => "chain",
            Family::Ring => "ring",
        })
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "star" => Ok(Family::Star),
            "chain" => Ok(Family::Chain),
            "ring" => Ok(Family::Ring),
            other => Err(format!("unknown network family `{other}`")),
        }
    }
}
