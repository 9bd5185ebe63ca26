//! Ground truth: the exact optimum by a directed Dreyfus-Wagner dynamic
//! program, feasibility checking, and exhaustive enumeration of root paths
//! and minimal solutions on small instances.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{DstInstance, EdgeId, LayeredInstance, NodeId, PathRecord};
use crate::scalar::Rational;

pub const TERMINAL_LIMIT: usize = 16;
pub const SUBSET_EDGE_LIMIT: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactResult {
    #[serde(with = "crate::scalar::serde_rational")]
    pub opt: Rational,
    pub witness: Vec<EdgeId>,
    /// Finite `(node, terminal subset)` states in the table.
    pub states: usize,
    pub splits_examined: u64,
}

#[derive(Clone, Copy)]
enum Choice {
    Leaf,
    Split(usize),
    Edge(EdgeId),
}

/// Minimum-cost arborescence from the root spanning every terminal.
///
/// `dp[S][v]` is the cheapest `v`-rooted tree reaching the terminal subset
/// `S`. Each layer merges two subtrees at `v`, then relaxes
/// `dp[S][v] <= c(v, u) + dp[S][u]` with Dijkstra over reversed edges.
pub fn exact_opt(inst: &DstInstance) -> Result<ExactResult> {
    let k = inst.terminals().len();
    if k > TERMINAL_LIMIT {
        return Err(Error::Guard {
            what: "terminal count",
            limit: TERMINAL_LIMIT as u128,
            actual: k as u128,
        });
    }
    let n = inst.num_nodes();
    let full = (1usize << k) - 1;
    let mut dp: Vec<Vec<Option<Rational>>> = vec![Vec::new(); full + 1];
    let mut choice: Vec<Vec<Choice>> = vec![Vec::new(); full + 1];
    let mut splits_examined = 0u64;

    for mask in 1..=full {
        let mut cur: Vec<Option<Rational>> = vec![None; n];
        let mut how = vec![Choice::Leaf; n];
        if mask.count_ones() == 1 {
            let t = inst.terminals()[mask.trailing_zeros() as usize];
            cur[t] = Some(Rational::zero());
        } else {
            // Submasks holding the lowest bit, so each split is seen once.
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            let mut sub = rest;
            loop {
                let a = sub | low;
                if a != mask {
                    let b = mask ^ a;
                    for v in 0..n {
                        if let (Some(x), Some(y)) = (&dp[a][v], &dp[b][v]) {
                            splits_examined += 1;
                            let cand = x + y;
                            if cur[v].as_ref().is_none_or(|c| cand < *c) {
                                cur[v] = Some(cand);
                                how[v] = Choice::Split(a);
                            }
                        }
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
        relax(inst, &mut cur, &mut how);
        dp[mask] = cur;
        choice[mask] = how;
    }

    let root = inst.root();
    let opt = dp[full][root]
        .clone()
        .ok_or_else(|| Error::Infeasible("some terminal is unreachable from the root".into()))?;
    let mut witness = Vec::new();
    let mut stack = vec![(full, root)];
    while let Some((mask, v)) = stack.pop() {
        match choice[mask][v] {
            Choice::Leaf => {}
            Choice::Split(a) => {
                stack.push((a, v));
                stack.push((mask ^ a, v));
            }
            Choice::Edge(e) => {
                witness.push(e);
                stack.push((mask, inst.edge(e).head));
            }
        }
    }
    witness.sort_unstable();
    witness.dedup();
    let states = dp.iter().flatten().filter(|d| d.is_some()).count();
    Ok(ExactResult {
        opt,
        witness,
        states,
        splits_examined,
    })
}

fn relax(inst: &DstInstance, dist: &mut [Option<Rational>], how: &mut [Choice]) {
    let mut done = vec![false; dist.len()];
    let mut heap: BinaryHeap<Reverse<(Rational, NodeId)>> = dist
        .iter()
        .enumerate()
        .filter_map(|(v, d)| d.clone().map(|d| Reverse((d, v))))
        .collect();
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &e in inst.in_edges(u) {
            let v = inst.edge(e).tail;
            if done[v] {
                continue;
            }
            let cand = &d + &inst.edge(e).cost;
            if dist[v].as_ref().is_none_or(|c| cand < *c) {
                dist[v] = Some(cand.clone());
                how[v] = Choice::Edge(e);
                heap.push(Reverse((cand, v)));
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verification {
    pub feasible: bool,
    #[serde(with = "crate::scalar::serde_rational")]
    pub cost: Rational,
    /// Terminals not reachable from the root through the given edges.
    pub unreached: Vec<NodeId>,
}

/// Feasible iff every terminal is reachable from the root using only
/// `edges`; the cost counts each edge once.
pub fn verify_solution(inst: &DstInstance, edges: &[EdgeId]) -> Result<Verification> {
    let mut allowed = vec![false; inst.num_edges()];
    for &e in edges {
        *allowed
            .get_mut(e)
            .ok_or_else(|| Error::Semantic(format!("unknown edge id {e}")))? = true;
    }
    let seen = inst.reachable_from(inst.root(), |e| allowed[e]);
    let unreached: Vec<NodeId> = inst
        .terminals()
        .iter()
        .copied()
        .filter(|&t| !seen[t])
        .collect();
    Ok(Verification {
        feasible: unreached.is_empty(),
        cost: inst.cost_of(edges),
        unreached,
    })
}

/// What [`enumerate_paths`] collects root paths to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathTarget {
    /// `Q(v)`: every root-`v` path.
    Node(NodeId),
    /// `Q(e)`: root paths whose last edge is `e`.
    Edge(EdgeId),
    /// `Q(s)`: root paths to the terminal `s` (a layered terminal copy).
    Terminal(NodeId),
}

/// Root paths of a layered instance ending at the target, in lexicographic
/// order of edge ids. Counts first and refuses more than `cap` paths.
pub fn enumerate_paths(
    li: &LayeredInstance,
    target: PathTarget,
    cap: usize,
) -> Result<Vec<PathRecord>> {
    let g = li.graph();
    let (end, last) = match target {
        PathTarget::Node(v) => (v, None),
        PathTarget::Edge(e) => {
            if e >= g.num_edges() {
                return Err(Error::Semantic(format!("unknown edge id {e}")));
            }
            (g.edge(e).tail, Some(e))
        }
        PathTarget::Terminal(s) => {
            if !g.is_terminal(s) {
                return Err(Error::Semantic(format!("{} is not a terminal", g.name(s))));
            }
            (s, None)
        }
    };
    if end >= g.num_nodes() {
        return Err(Error::Semantic(format!("unknown node id {end}")));
    }
    let counts = path_counts(li);
    let total = counts[end];
    if total > cap as u128 {
        return Err(Error::Guard {
            what: "path count",
            limit: cap as u128,
            actual: total,
        });
    }
    // Backward DFS from `end` along edges that lie on some root path.
    let mut out = Vec::new();
    let mut suffix: Vec<EdgeId> = last.into_iter().collect();
    collect_back(g, &counts, end, &mut suffix, &mut out);
    let mut records = out
        .into_iter()
        .map(|edges| PathRecord::from_edges(g, g.root(), edges))
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.edges.cmp(&b.edges));
    Ok(records)
}

fn collect_back(
    g: &DstInstance,
    counts: &[u128],
    v: NodeId,
    suffix: &mut Vec<EdgeId>,
    out: &mut Vec<Vec<EdgeId>>,
) {
    if v == g.root() {
        out.push(suffix.iter().rev().copied().collect());
        return;
    }
    for &e in g.in_edges(v) {
        let u = g.edge(e).tail;
        if counts[u] == 0 {
            continue;
        }
        suffix.push(e);
        collect_back(g, counts, u, suffix, out);
        suffix.pop();
    }
}

/// Number of root paths to every node, by levels.
pub fn path_counts(li: &LayeredInstance) -> Vec<u128> {
    let g = li.graph();
    let mut counts = vec![0u128; g.num_nodes()];
    counts[g.root()] = 1;
    for j in 1..=li.ell() {
        for v in li.level(j) {
            counts[v] = g
                .in_edges(v)
                .iter()
                .fold(0u128, |acc, &e| acc.saturating_add(counts[g.edge(e).tail]));
        }
    }
    counts
}

/// A feasible edge set with its cost.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralSolution {
    pub edges: Vec<EdgeId>,
    #[serde(with = "crate::scalar::serde_rational")]
    pub cost: Rational,
}

/// Every inclusion-minimal feasible edge set, by brute force over edge
/// subsets. Sorted by cost, then edge list.
pub fn enumerate_integral_solutions(
    inst: &DstInstance,
    cap: usize,
) -> Result<Vec<IntegralSolution>> {
    let m = inst.num_edges();
    if m > SUBSET_EDGE_LIMIT {
        return Err(Error::Guard {
            what: "edge count for subset enumeration",
            limit: SUBSET_EDGE_LIMIT as u128,
            actual: m as u128,
        });
    }
    let feasible = |mask: u32| {
        let seen = inst.reachable_from(inst.root(), |e| mask >> e & 1 == 1);
        inst.terminals().iter().all(|&t| seen[t])
    };
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << m) {
        if !feasible(mask) {
            continue;
        }
        // Feasibility is monotone, so single-edge removals decide minimality.
        let minimal = (0..m)
            .filter(|&e| mask >> e & 1 == 1)
            .all(|e| !feasible(mask & !(1 << e)));
        if !minimal {
            continue;
        }
        if out.len() == cap {
            return Err(Error::Guard {
                what: "minimal solution count",
                limit: cap as u128,
                actual: cap as u128 + 1,
            });
        }
        let edges: Vec<EdgeId> = (0..m).filter(|&e| mask >> e & 1 == 1).collect();
        let cost = inst.cost_of(&edges);
        out.push(IntegralSolution { edges, cost });
    }
    out.sort_by(|a, b| a.cost.cmp(&b.cost).then_with(|| a.edges.cmp(&b.edges)));
    Ok(out)
}
