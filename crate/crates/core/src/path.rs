//! Price paths in chronological order.
//!
//! Round `r = 1` is the first round offered. Closed forms are usually
//! written in terms of `t`, the number of rounds remaining, with
//! `t = T + 1 − r`; [`PricePath::at_remaining`] does that conversion.

use serde::{Deserialize, Serialize};

use crate::error::{NetPriceError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PricePath {
    /// One price per round.
    Scalar(Vec<f64>),
    /// `prices[r][i]` is the price for group `i` in round `r`.
    PerGroup(Vec<Vec<f64>>),
}

impl PricePath {
    pub fn scalar(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(NetPriceError::param("path", "need at least one round"));
        }
        Ok(PricePath::Scalar(prices))
    }

    pub fn per_group(prices: Vec<Vec<f64>>) -> Result<Self> {
        let m = prices.first().map_or(0, Vec::len);
        if prices.is_empty() || m == 0 || prices.iter().any(|r| r.len() != m) {
            return Err(NetPriceError::ShapeMismatch {
                expected: "T rows of m group prices".into(),
                got: format!("{:?}", prices.iter().map(Vec::len).collect::<Vec<_>>()),
            });
        }
        Ok(PricePath::PerGroup(prices))
    }

    /// Builds a path from a function of `t` (rounds remaining).
    pub fn from_remaining(rounds: usize, f: impl Fn(usize) -> f64) -> Self {
        PricePath::Scalar((1..=rounds).map(|r| f(rounds + 1 - r)).collect())
    }

    pub fn rounds(&self) -> usize {
        match self {
            PricePath::Scalar(p) => p.len(),
            PricePath::PerGroup(p) => p.len(),
        }
    }

    /// Number of groups for per-group paths.
    pub fn groups(&self) -> Option<usize> {
        match self {
            PricePath::Scalar(_) => None,
            PricePath::PerGroup(p) => Some(p[0].len()),
        }
    }

    /// Price in chronological round `r` (0-based) for `group`.
    pub fn price(&self, r: usize, group: usize) -> f64 {
        match self {
            PricePath::Scalar(p) => p[r],
            PricePath::PerGroup(p) => p[r][group],
        }
    }

    /// Price with `t` rounds remaining (1-based, `t = 1` is the last round).
    pub fn at_remaining(&self, t: usize, group: usize) -> f64 {
        self.price(self.rounds() - t, group)
    }

    /// Flattened prices, round-major.
    pub fn flat(&self) -> Vec<f64> {
        match self {
            PricePath::Scalar(p) => p.clone(),
            PricePath::PerGroup(p) => p.iter().flatten().copied().collect(),
        }
    }

    /// First round (chronologically) where some price drops.
    pub fn first_decrease(&self, tol: f64) -> Option<(usize, f64, f64)> {
        let t = self.rounds();
        let m = self.groups().unwrap_or(1);
        for r in 1..t {
            for i in 0..m {
                let (a, b) = (self.price(r - 1, i), self.price(r, i));
                if b < a - tol {
                    return Some((r + 1, a, b));
                }
            }
        }
        None
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.first_decrease(tol).is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remaining_index_maps_to_chronological() {
        let p = PricePath::from_remaining(3, |t| t as f64);
        assert_eq!(p, PricePath::Scalar(vec![3.0, 2.0, 1.0]));
        assert_eq!(p.at_remaining(3, 0), 3.0);
        assert_eq!(p.at_remaining(1, 0), 1.0);
        assert_eq!(p.first_decrease(0.0), Some((2, 3.0, 2.0)));
    }

    #[test]
    fn per_group_shape() {
        assert!(PricePath::per_group(vec![vec![0.1, 0.2], vec![0.3]]).is_err());
        let p = PricePath::per_group(vec![vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        assert_eq!(p.groups(), Some(2));
        assert_eq!(p.at_remaining(1, 1), 0.4);
        assert!(p.is_nondecreasing(0.0));
    }

    #[test]
    fn json_roundtrip() {
        let p = PricePath::per_group(vec![vec![0.1, 0.2]]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<PricePath>(&s).unwrap(), p);
    }
}
