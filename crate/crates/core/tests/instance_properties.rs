use proptest::prelude::*;

use dst_lasserre::exact::{enumerate_integral_solutions, exact_opt, verify_solution};
use dst_lasserre::flow_lp::{build_flow_lp, check_point, integral_point, solve_lp, LpStatus};
use dst_lasserre::scalar::int;
use dst_lasserre::{
    levelize, map_back, metric_closure, parse_instance, DstInstance, LevelizeOptions, Rational,
    Scalar,
};

/// Random digraph on `n` nodes rooted at 0 with 1–3 reachable terminals.
fn instance() -> impl Strategy<Value = DstInstance> {
    (3usize..=6)
        .prop_flat_map(|n| {
            let pairs = n * (n - 1);
            (
                Just(n),
                prop::collection::vec(prop::option::weighted(0.4, 0i64..10), pairs),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_map(|(n, picks, want)| {
            let mut edges = Vec::new();
            let mut k = 0;
            for u in 0..n {
                for v in 0..n {
                    if u == v {
                        continue;
                    }
                    if let Some(c) = picks[k] {
                        edges.push((u, v, c));
                    }
                    k += 1;
                }
            }
            if !edges.iter().any(|&(u, _, _)| u == 0) {
                edges.push((0, 1, 1));
            }
            let mut reach = vec![false; n];
            reach[0] = true;
            let mut changed = true;
            while changed {
                changed = false;
                for &(u, v, _) in &edges {
                    if reach[u] && !reach[v] {
                        reach[v] = true;
                        changed = true;
                    }
                }
            }
            let mut terminals: Vec<usize> =
                (1..n).filter(|&v| reach[v] && want[v]).take(3).collect();
            if terminals.is_empty() {
                terminals.push(
                    (1..n)
                        .find(|&v| reach[v])
                        .expect("node 1 or another is reachable"),
                );
            }
            DstInstance::new(
                (0..n).map(|i| format!("v{i}")).collect(),
                edges.into_iter().map(|(u, v, c)| (u, v, int(c))),
                0,
                terminals,
            )
            .expect("generated instance is valid")
        })
}

fn levelization_bound(ell: usize, terminals: usize) -> f64 {
    ell as f64 * (terminals as f64).powf(1.0 / ell as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn file_format_round_trips(inst in instance()) {
        let back = parse_instance(&inst.to_dst_string()).unwrap();
        prop_assert_eq!(back.num_nodes(), inst.num_nodes());
        prop_assert_eq!(back.edges(), inst.edges());
        prop_assert_eq!(back.terminals(), inst.terminals());
    }

    #[test]
    fn closure_obeys_triangle_inequality(inst in instance()) {
        let mc = metric_closure(&inst);
        let n = inst.num_nodes();
        for u in 0..n {
            for v in 0..n {
                for w in 0..n {
                    if let (Some(a), Some(b), Some(c)) = (mc.cost(u, w), mc.cost(u, v), mc.cost(v, w)) {
                        prop_assert!(*a <= b.clone() + c.clone());
                    }
                }
            }
        }
        for e in inst.edges() {
            prop_assert!(mc.cost(e.tail, e.head).unwrap() <= &e.cost);
        }
    }

    #[test]
    fn levelized_edges_join_consecutive_levels(inst in instance(), ell in 1usize..=3) {
        let li = levelize(&inst, ell, LevelizeOptions::default()).unwrap();
        let g = li.graph();
        prop_assert_eq!(li.level_of(g.root()), 0);
        for e in g.edges() {
            prop_assert_eq!(li.level_of(e.head), li.level_of(e.tail) + 1);
        }
        let mut last = li.level(ell);
        last.sort_unstable();
        let mut terms = g.terminals().to_vec();
        terms.sort_unstable();
        prop_assert_eq!(last, terms);
    }

    #[test]
    fn mapped_back_solutions_stay_feasible_and_cheaper(inst in instance(), ell in 1usize..=3) {
        let li = levelize(&inst, ell, LevelizeOptions::default()).unwrap();
        let layered = exact_opt(li.graph()).unwrap();
        let base = map_back(&layered.witness, &li).unwrap();
        let v = verify_solution(&inst, &base).unwrap();
        prop_assert!(v.feasible);
        prop_assert!(v.cost <= layered.opt);
    }

    #[test]
    fn levelization_cost_is_bounded(inst in instance()) {
        let opt = exact_opt(&inst).unwrap().opt;
        let k = inst.terminals().len();
        let mut previous: Option<Rational> = None;
        for ell in 1..=3 {
            let li = levelize(&inst, ell, LevelizeOptions::default()).unwrap();
            let layered = exact_opt(li.graph()).unwrap().opt;
            prop_assert!(layered >= opt);
            prop_assert!(layered.to_f64() <= levelization_bound(ell, k) * opt.to_f64() + 1e-9);
            if let Some(p) = previous {
                prop_assert!(layered <= p, "more layers cost more at ℓ = {}", ell);
            }
            previous = Some(layered);
        }
    }

    #[test]
    fn dynamic_program_matches_enumeration(inst in instance()) {
        prop_assume!(inst.num_edges() <= 14);
        let opt = exact_opt(&inst).unwrap();
        let all = enumerate_integral_solutions(&inst, 1 << 14).unwrap();
        let best = all.iter().map(|s| s.cost.clone()).min().unwrap();
        prop_assert_eq!(&opt.opt, &best);
        prop_assert_eq!(inst.cost_of(&opt.witness), opt.opt.clone());
        prop_assert!(verify_solution(&inst, &opt.witness).unwrap().feasible);
    }

    #[test]
    fn flow_lp_lies_below_the_optimum(inst in instance(), ell in 1usize..=2) {
        let li = levelize(&inst, ell, LevelizeOptions::default()).unwrap();
        let cs = build_flow_lp(&li);
        let lp = solve_lp(&cs);
        prop_assert_eq!(lp.status, LpStatus::Optimal);
        prop_assert!(check_point(&cs, &lp.values).unwrap().is_empty());
        let opt = exact_opt(li.graph()).unwrap();
        prop_assert!(lp.objective <= opt.opt);
        // Zero-cost edges can give the witness a node entered twice; such a
        // set is not a point of the LP, but a cheapest subtree of it is.
        if let Some(x) = integral_point(li.graph(), &opt.witness) {
            let xr: Vec<Rational> = x.iter().map(|&b| Rational::from_i64(b as i64)).collect();
            prop_assert!(check_point(&cs, &xr).unwrap().is_empty());
            prop_assert_eq!(cs.objective_value(&xr), opt.opt);
        }
    }
}
