mod common;

use netprice::equilibrium::thresholds_for_prices;
use netprice::pricing::block_policy;
use netprice::simulator::{monte_carlo, run_market, sample_market};
use netprice::ValuationDistribution;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conservation_and_accounting(net in common::regular_net(), t in 1usize..6,
                                   n in 1usize..3000, seed in any::<u64>()) {
        let u = ValuationDistribution::Uniform;
        let policy = block_policy(&net, t).unwrap();
        let sched = thresholds_for_prices(&net, &u, &policy.path).unwrap();
        let market = sample_market(&net, &u, n, seed).unwrap();
        let rep = run_market(&market, &policy.path, &sched).unwrap();
        let sold: u64 = rep.per_round_counts.iter().flatten().sum();
        prop_assert_eq!(sold + rep.never_bought, n as u64);
        let mut cash = 0.0;
        for (r, row) in rep.per_round_counts.iter().enumerate() {
            for (i, k) in row.iter().enumerate() {
                cash += policy.path.price(r, i) * *k as f64;
            }
        }
        prop_assert!((rep.realized_revenue * n as f64 - cash).abs() <= 1e-9 * cash.max(1.0));
    }

    #[test]
    fn skimming_in_realized_play(net in common::regular_net(), t in 2usize..6,
                                 n in 10usize..500, seed in any::<u64>()) {
        let u = ValuationDistribution::Uniform;
        let policy = block_policy(&net, t).unwrap();
        let sched = thresholds_for_prices(&net, &u, &policy.path).unwrap();
        let market = sample_market(&net, &u, n, seed).unwrap();
        let rep = run_market(&market, &policy.path, &sched).unwrap();
        for i in 0..net.m() {
            // Round of purchase per buyer of group i under the schedule.
            let mut buys: Vec<(usize, f64)> = market
                .valuations
                .iter()
                .zip(&market.group_of)
                .filter(|(_, g)| **g == i)
                .filter_map(|(v, _)| {
                    (1..=t).find(|&r| *v >= sched.v(t + 1 - r, i)).map(|r| (r, *v))
                })
                .collect();
            for r in 1..=t {
                let k = buys.iter().filter(|b| b.0 == r).count() as u64;
                prop_assert_eq!(k, rep.per_round_counts[r - 1][i]);
            }
            buys.sort_by(|a, b| a.0.cmp(&b.0));
            for w in buys.windows(2) {
                if w[0].0 < w[1].0 {
                    prop_assert!(w[0].1 >= sched.v(t + 1 - w[1].0, i));
                }
            }
        }
    }
}

#[test]
fn monte_carlo_independent_of_thread_count() {
    let net = netprice::BlockNetwork::new(
        vec![0.3, 0.7],
        nalgebra::DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 0.8]),
    )
    .unwrap();
    let u = ValuationDistribution::Uniform;
    let path = block_policy(&net, 3).unwrap().path;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| monte_carlo(&net, &u, &path, 5_000, 8, 42).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert_eq!(
        one.replication_revenues.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        four.replication_revenues.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
}
