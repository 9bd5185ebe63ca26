use proptest::prelude::*;

use dst_lasserre::exact::{enumerate_integral_solutions, verify_solution};
use dst_lasserre::harness::gen_random_layered;
use dst_lasserre::moments::from_distribution;
use dst_lasserre::rounding::{path_sum_check, round, sample_once, CountingOracle};
use dst_lasserre::scalar::rat;
use dst_lasserre::{LayeredInstance, Rational};

/// A random layered instance and an edge oracle mixing up to three of its
/// minimal solutions.
fn oracle() -> impl Strategy<Value = (LayeredInstance, Vec<(Rational, Vec<bool>)>)> {
    (
        1usize..=3,
        0u64..1000,
        prop::collection::vec((0usize..64, 1i64..=5), 1..=3),
    )
        .prop_map(|(ell, seed, picks)| {
            let widths = vec![2; ell];
            let li = gen_random_layered(ell, &widths, 0.7, (0, 9), seed).unwrap();
            let g = li.graph();
            let sols = enumerate_integral_solutions(g, 4096).unwrap();
            let total: i64 = picks.iter().map(|(_, w)| w).sum();
            let atoms = picks
                .iter()
                .map(|&(k, w)| {
                    let s = &sols[k % sols.len()];
                    let mut x = vec![false; g.num_edges()];
                    for &e in &s.edges {
                        x[e] = true;
                    }
                    (rat(w, total), x)
                })
                .collect();
            (li, atoms)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn samples_are_prefix_closed_and_reproducible((li, atoms) in oracle(), seed in any::<u64>(), stream in 0u64..8) {
        let g = li.graph();
        let y = from_distribution(g.num_edges(), li.ell() / 2, &atoms).unwrap();
        let run = sample_once(&y, &li, seed, stream).unwrap();
        prop_assert_eq!(&run, &sample_once(&y, &li, seed, stream).unwrap());
        for p in &run.paths {
            prop_assert_eq!(p.start, g.root());
            for (level, &e) in p.edges.iter().enumerate() {
                prop_assert_eq!(li.level_of(g.edge(e).tail), level);
            }
            if p.edges.len() > 1 {
                let prefix = &p.edges[..p.edges.len() - 1];
                prop_assert!(run.paths.iter().any(|q| q.edges == prefix), "prefix missing");
            }
        }
    }

    #[test]
    fn rounding_is_always_feasible((li, atoms) in oracle(), seed in any::<u64>(), reps in 1usize..4) {
        let g = li.graph();
        let y = from_distribution(g.num_edges(), li.ell() / 2, &atoms).unwrap();
        let r = round(&y, &li, reps, seed).unwrap();
        let v = verify_solution(g, &r.edges).unwrap();
        prop_assert!(v.feasible);
        prop_assert_eq!(v.cost, r.cost.clone());
        prop_assert!(verify_solution(li.base(), &r.base_edges).unwrap().feasible);
        prop_assert!(r.base_cost <= r.cost);
        // Exact oracles never clamp.
        prop_assert_eq!(r.counters.clamps, 0);
    }

    #[test]
    fn path_sums_hold_exactly((li, atoms) in oracle()) {
        let g = li.graph();
        let y = from_distribution(g.num_edges(), li.ell() / 2, &atoms).unwrap();
        let r = path_sum_check(&y, &li, 0.0).unwrap();
        prop_assert!(r.ok, "{:?}", r);
        prop_assert!(r.terminal_sums.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn queries_stay_below_node_count_squared((li, atoms) in oracle(), seed in any::<u64>()) {
        let g = li.graph();
        let y = from_distribution(g.num_edges(), li.ell() / 2, &atoms).unwrap();
        let counting = CountingOracle::new(&y);
        let runs = 50;
        for stream in 0..runs {
            sample_once(&counting, &li, seed, stream).unwrap();
        }
        let n = g.num_nodes() as u64;
        prop_assert!(counting.count() <= runs * n * n);
    }
}
