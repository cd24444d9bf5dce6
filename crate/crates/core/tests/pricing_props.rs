mod common;

use netprice::pricing::{
    all_sales_policy, block_policy, block_prices, block_prices_alt, discrimination_policy,
    nonuniform_policy, uniform_policy, welfare,
};
use netprice::{BlockNetwork, PricePath, ValuationDistribution};
use proptest::prelude::*;

fn steps(path: &PricePath, group: usize) -> Vec<f64> {
    (1..path.rounds())
        .map(|r| path.price(r, group) - path.price(r - 1, group))
        .collect()
}

fn constant_steps(path: &PricePath) -> bool {
    (0..path.groups().unwrap_or(1)).all(|i| {
        let s = steps(path, i);
        s.iter().all(|d| (d - s[0]).abs() <= 1e-10)
    })
}

proptest! {
    #[test]
    fn committed_paths_nondecreasing_and_linear(net in common::valid_net(), t in 1usize..8) {
        let b = block_policy(&net, t).unwrap();
        prop_assert!(b.path.is_nondecreasing(0.0));
        prop_assert!(constant_steps(&b.path));
        if let Ok(n) = nonuniform_policy(&net, &ValuationDistribution::Uniform, t) {
            prop_assert!(n.path.is_nondecreasing(0.0));
            prop_assert!(constant_steps(&n.path));
        }
        if let Ok(a) = all_sales_policy(&net, t) {
            prop_assert!(a.path.is_nondecreasing(0.0));
        }
    }

    #[test]
    fn uniform_paths_nondecreasing_and_linear(g in 0.0..=1.0f64, t in 1usize..15) {
        let u = uniform_policy(g, t).unwrap();
        prop_assert!(u.path.is_nondecreasing(0.0));
        prop_assert!(constant_steps(&u.path));
    }

    #[test]
    fn discrimination_paths_linear_and_dominant(net in common::symmetric_net(), t in 1usize..7) {
        if let Ok(d) = discrimination_policy(&net, t) {
            prop_assert!(d.path.is_nondecreasing(1e-12));
            prop_assert!(constant_steps(&d.path));
            let b = block_policy(&net, t).unwrap();
            prop_assert!(d.normalized_revenue >= b.normalized_revenue - 1e-12);
        }
    }

    #[test]
    fn revenue_and_welfare_monotone(g in 0.01..0.99f64, dg in 0.001..0.01f64, t in 1usize..20) {
        let r = |g: f64, t: usize| uniform_policy(g, t).unwrap().normalized_revenue;
        let w = |g: f64, t: usize| uniform_policy(g, t).unwrap().welfare.unwrap();
        prop_assert!(r(g, t + 1) > r(g, t));
        prop_assert!(w(g, t + 1) > w(g, t));
        if t >= 2 {
            prop_assert!(r(g + dg, t) > r(g, t));
            prop_assert!(w(g + dg, t) > w(g, t));
        }
    }

    #[test]
    fn block_welfare_monotone_in_t(net in common::valid_net(), t in 1usize..12) {
        prop_assert!(welfare(&net, t + 1).unwrap() > welfare(&net, t).unwrap());
        let r = |t| block_policy(&net, t).unwrap().normalized_revenue;
        prop_assert!(r(t + 1) > r(t));
    }

    #[test]
    fn revenue_convex_in_effect_concave_in_t(g in 0.01..0.98f64, h in 0.001..0.005f64, t in 1usize..20) {
        let r = |g: f64, t: usize| uniform_policy(g, t).unwrap().normalized_revenue;
        prop_assert!(r(g + 2.0 * h, t) - 2.0 * r(g + h, t) + r(g, t) >= -1e-15);
        prop_assert!(r(g, t + 2) - 2.0 * r(g, t + 1) + r(g, t) <= 1e-15);
    }

    #[test]
    fn threshold_structure(net in common::valid_net(), t in 1usize..8) {
        let sched = block_policy(&net, t).unwrap().thresholds.unwrap();
        let m = net.m();
        for i in 0..m {
            prop_assert_eq!(sched.v(t + 1, i), 1.0);
            prop_assert!(sched.v(1, i) >= 0.0);
            for tt in 2..=t {
                prop_assert!(sched.v(tt + 1, i) >= sched.v(tt, i));
            }
        }
        // The step from the last round to the one before is where interiority
        // can break: v₂ ≥ v₁ exactly when every x_i/α_i ≤ TS/(T−1).
        if t >= 2 {
            let x = net.e_inv_ones().unwrap();
            let s = x.sum();
            let tf = t as f64;
            for i in 0..m {
                let ratio = x[i] / net.alpha()[i];
                let ordered = sched.v(2, i) >= sched.v(1, i) - 1e-12;
                let predicted = ratio <= tf * s / (tf - 1.0) + 1e-9;
                prop_assert_eq!(ordered, predicted, "group {} ratio {} bound {}", i, ratio, tf * s / (tf - 1.0));
            }
        }
    }

    #[test]
    fn thresholds_interior_on_regular_nets(net in common::regular_net(), t in 1usize..10) {
        let sched = block_policy(&net, t).unwrap().thresholds.unwrap();
        for i in 0..net.m() {
            prop_assert!(sched.v(1, i) >= 0.0);
            for tt in 1..=t {
                prop_assert!(sched.v(tt + 1, i) >= sched.v(tt, i) - 1e-12);
            }
        }
    }

    #[test]
    fn reduction_chain(g in 0.05..=1.0f64, t in 1usize..10) {
        let net = BlockNetwork::uniform(g).unwrap();
        let u = uniform_policy(g, t).unwrap();
        let b = block_policy(&net, t).unwrap();
        let n = nonuniform_policy(&net, &ValuationDistribution::Uniform, t).unwrap();
        for r in 0..t {
            prop_assert!((u.path.price(r, 0) - b.path.price(r, 0)).abs() <= 1e-10);
            prop_assert!((b.path.price(r, 0) - n.path.price(r, 0)).abs() <= 1e-10);
        }
        prop_assert!((u.normalized_revenue - b.normalized_revenue).abs() <= 1e-10);
        prop_assert!((b.normalized_revenue - n.normalized_revenue).abs() <= 1e-10);
    }

    #[test]
    fn nonuniform_matches_block_for_uniform_values(net in common::regular_net(), t in 1usize..8) {
        let b = block_policy(&net, t).unwrap();
        let n = nonuniform_policy(&net, &ValuationDistribution::Uniform, t).unwrap();
        let (pb, pn) = (b.path.flat(), n.path.flat());
        prop_assert!(pb.iter().zip(&pn).all(|(x, y)| (x - y).abs() <= 1e-10));
        prop_assert!((b.normalized_revenue - n.normalized_revenue).abs() <= 1e-10);
    }

    #[test]
    fn single_round_revenue_is_quarter(net in common::valid_net()) {
        prop_assert!((block_policy(&net, 1).unwrap().normalized_revenue - 0.25).abs() <= 1e-15);
    }

    #[test]
    fn two_price_forms_agree(s in 1.0..20.0f64, t in 1usize..15) {
        let (a, b) = (block_prices(s, t).flat(), block_prices_alt(s, t).flat());
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-12));
    }
}
