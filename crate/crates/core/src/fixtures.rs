//! Small named instances used by tests, benches and the CLI smoke suite.

use crate::instance::{parse_instance, DstInstance, EdgeId};
use crate::scalar::int;

pub const FIGURE_ONE: &str = include_str!("../data/figure1.dst");

/// The three-level, four-terminal example graph (12 nodes, 17 edges, optimum 19).
pub fn figure_one() -> DstInstance {
    parse_instance(FIGURE_ONE).expect("bundled instance parses")
}

/// Edge ids of the optimum of [`figure_one`] inside `inst` (matched by names).
pub fn figure_one_optimum(inst: &DstInstance) -> Vec<EdgeId> {
    let pairs = [
        ("r", "u1"),
        ("r", "u3"),
        ("u1", "v1"),
        ("u1", "v2"),
        ("u3", "v4"),
        ("v1", "s1"),
        ("v2", "s2"),
        ("v2", "s3"),
        ("v4", "s4"),
    ];
    let mut ids: Vec<EdgeId> = pairs
        .iter()
        .map(|(u, v)| inst.edge_by_names(u, v).expect("optimum edge present"))
        .collect();
    ids.sort_unstable();
    ids
}

fn build(names: &[&str], edges: &[(&str, &str, i64)], terminals: &[&str]) -> DstInstance {
    let id = |n: &str| names.iter().position(|m| *m == n).expect("known node");
    DstInstance::new(
        names.iter().map(|s| s.to_string()).collect(),
        edges.iter().map(|&(u, v, c)| (id(u), id(v), int(c))),
        0,
        terminals.iter().map(|t| id(t)),
    )
    .expect("fixture is valid")
}

/// `r -> s` with the given cost.
pub fn single_edge(cost: i64) -> DstInstance {
    build(&["r", "s"], &[("r", "s", cost)], &["s"])
}

/// `r -> a -> s`, unit costs.
pub fn two_hop_path() -> DstInstance {
    build(&["r", "a", "s"], &[("r", "a", 1), ("a", "s", 1)], &["s"])
}

/// `r -> a (1)`, `a -> b (1)`, `r -> b (5)`; terminal `b`.
pub fn triangle() -> DstInstance {
    build(
        &["r", "a", "b"],
        &[("r", "a", 1), ("a", "b", 1), ("r", "b", 5)],
        &["b"],
    )
}

/// Two disjoint two-hop routes `r -> a -> s` and `r -> b -> s`, each of cost 2.
pub fn two_routes() -> DstInstance {
    build(
        &["r", "a", "b", "s"],
        &[("r", "a", 1), ("r", "b", 1), ("a", "s", 1), ("b", "s", 1)],
        &["s"],
    )
}

/// Root with unit-cost edges to `k` terminals.
pub fn star(k: usize) -> DstInstance {
    let mut names = vec!["r".to_string()];
    names.extend((1..=k).map(|i| format!("s{i}")));
    DstInstance::new(names, (1..=k).map(|i| (0, i, int(1))), 0, 1..=k).expect("star is valid")
}
