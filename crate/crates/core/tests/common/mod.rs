#![allow(dead_code)]

use nalgebra::DMatrix;
use netprice::network::check_assumption2;
use netprice::BlockNetwork;
use proptest::prelude::*;

fn build(m: usize, weights: Vec<f64>, diag: Vec<f64>, off: Vec<f64>, symmetric: bool) -> Option<BlockNetwork> {
    let total: f64 = weights.iter().sum();
    let mut alpha: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let head: f64 = alpha[..m - 1].iter().sum();
    alpha[m - 1] = 1.0 - head;
    let mut e = DMatrix::from_fn(m, m, |i, j| if i == j { diag[i] } else { off[i * m + j] });
    if symmetric {
        e = (&e + e.transpose()) * 0.5;
    }
    let net = BlockNetwork::new(alpha, e).ok()?;
    check_assumption2(&net).passed().then_some(net)
}

fn net_with(symmetric: bool, max_m: usize) -> impl Strategy<Value = BlockNetwork> {
    (1..=max_m)
        .prop_flat_map(move |m| {
            (
                Just(m),
                prop::collection::vec(0.2..1.0f64, m),
                prop::collection::vec(0.3..1.2f64, m),
                prop::collection::vec(prop_oneof![Just(0.0), 0.0..0.4f64], m * m),
            )
        })
        .prop_filter_map("assumption check", move |(m, w, d, o)| build(m, w, d, o, symmetric))
}

/// Networks passing the invertibility, S ≥ 1 and E⁻¹1 ≥ 0 checks.
pub fn valid_net() -> impl Strategy<Value = BlockNetwork> {
    net_with(false, 4)
}

pub fn symmetric_net() -> impl Strategy<Value = BlockNetwork> {
    net_with(true, 4)
}

/// Equal group sizes and `E = I + δC` with `C` having equal row sums, so that
/// every group carries the same share of `E⁻¹1`.
pub fn regular_net() -> impl Strategy<Value = BlockNetwork> {
    (1usize..=4, 0.0..0.5f64).prop_map(|(m, delta)| {
        let e = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                1.0
            } else if (i + 1) % m == j {
                delta
            } else {
                0.0
            }
        });
        BlockNetwork::equal_groups(e).unwrap()
    })
}
