//! Top-down randomized path sampling driven by a moment oracle.
//!
//! Starting from the root, each sampled path `P` ending at `u` is extended by
//! every `e ∈ δ⁺(u)` independently with probability `y_{P ∪ {e}} / y_P`, so
//! that `Pr[P ∈ T] = y_P`. Partial paths stay in `T`.
//!
//! Randomness: one ChaCha8 generator per run, seeded with the caller's seed
//! and with the run index as its stream. Coins are drawn in discovery order
//! (paths in the order they were sampled, out-edges by id), one `f64` in
//! `[0, 1)` per coin; the coin succeeds when the draw is below the
//! probability.

mod stats;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{map_back, shortest_path, EdgeId, LayeredInstance, NodeId, PathRecord};
use crate::moments::{IndexSet, MomentVector};
use crate::scalar::{Rational, Scalar};

pub use stats::{
    edge_marginal_check, path_sum_check, stats, EdgeMarginalReport, EdgeRow, PathRow,
    PathSumReport, StatsReport, TerminalStats,
};

/// Float paths with `y_P` below this are never extended.
pub const DEAD_PATH_THRESHOLD: f64 = 1e-12;

/// Read-only access to moments `y_P` of edge sets; edge `e` is variable `e`.
pub trait MomentOracle {
    type Value: Scalar;
    fn query(&self, set: &IndexSet) -> Result<Self::Value>;
}

impl<T: Scalar> MomentOracle for MomentVector<T> {
    type Value = T;
    fn query(&self, set: &IndexSet) -> Result<T> {
        self.get(set).cloned()
    }
}

impl<O: MomentOracle> MomentOracle for &O {
    type Value = O::Value;
    fn query(&self, set: &IndexSet) -> Result<O::Value> {
        (**self).query(set)
    }
}

/// Counts queries passed to the wrapped oracle.
pub struct CountingOracle<O> {
    inner: O,
    count: AtomicU64,
}

impl<O: MomentOracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

impl<O: MomentOracle> MomentOracle for CountingOracle<O> {
    type Value = O::Value;
    fn query(&self, set: &IndexSet) -> Result<O::Value> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.query(set)
    }
}

/// The generator for run `stream` under `seed`.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One sampled path, without the bookkeeping of [`PathRecord`].
#[derive(Clone, Debug)]
pub(crate) struct RawPath {
    pub edges: Vec<EdgeId>,
    pub end: NodeId,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub queries: u64,
    /// Extension probabilities clamped into `[0, 1]`.
    pub clamps: u64,
    /// Float paths too light to extend.
    pub dead: u64,
}

impl Counters {
    fn add(&mut self, other: Counters) {
        self.queries += other.queries;
        self.clamps += other.clamps;
        self.dead += other.dead;
    }
}

pub(crate) fn sample_raw<O: MomentOracle>(
    oracle: &O,
    li: &LayeredInstance,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<RawPath>, Counters)> {
    let g = li.graph();
    let mut counters = Counters::default();
    let mut all: Vec<RawPath> = Vec::new();
    // (path, its index set, y_P)
    let mut frontier: Vec<(RawPath, IndexSet, O::Value)> = Vec::new();

    let mut coin = |value: &O::Value, base: Option<&O::Value>, counters: &mut Counters| {
        let p = match base {
            None => value.to_f64(),
            Some(b) => (value.clone() / b.clone()).to_f64(),
        };
        let p = if (0.0..=1.0).contains(&p) {
            p
        } else {
            counters.clamps += 1;
            if p.is_nan() {
                0.0
            } else {
                p.clamp(0.0, 1.0)
            }
        };
        rng.random::<f64>() < p
    };

    for &e in g.out_edges(g.root()) {
        let set = IndexSet::singleton(e);
        let v = oracle.query(&set)?;
        counters.queries += 1;
        if coin(&v, None, &mut counters) {
            let path = RawPath {
                edges: vec![e],
                end: g.edge(e).head,
            };
            all.push(path.clone());
            frontier.push((path, set, v));
        }
    }
    for _ in 1..li.ell() {
        let mut next = Vec::new();
        for (path, set, y_p) in &frontier {
            if !O::Value::EXACT && y_p.to_f64() < DEAD_PATH_THRESHOLD {
                counters.dead += 1;
                continue;
            }
            for &e in g.out_edges(path.end) {
                let ext = set.with(e);
                let v = oracle.query(&ext)?;
                counters.queries += 1;
                if coin(&v, Some(y_p), &mut counters) {
                    let mut edges = path.edges.clone();
                    edges.push(e);
                    let p = RawPath {
                        edges,
                        end: g.edge(e).head,
                    };
                    all.push(p.clone());
                    next.push((p, ext, v));
                }
            }
        }
        frontier = next;
    }
    Ok((all, counters))
}

/// The sampled path set `T` of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleRun {
    pub paths: Vec<PathRecord>,
    /// `Z_s`: full root-`s` paths in `T`, per layered terminal in order.
    pub z: Vec<usize>,
    pub seed: u64,
    pub stream: u64,
    pub counters: Counters,
}

impl SampleRun {
    /// `E(T)`, sorted.
    pub fn edges(&self) -> Vec<EdgeId> {
        let mut out: Vec<EdgeId> = self
            .paths
            .iter()
            .flat_map(|p| p.edges.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

pub fn sample_once<O: MomentOracle>(
    oracle: &O,
    li: &LayeredInstance,
    seed: u64,
    stream: u64,
) -> Result<SampleRun> {
    let mut rng = run_rng(seed, stream);
    let (raw, counters) = sample_raw(oracle, li, &mut rng)?;
    let g = li.graph();
    let z = g
        .terminals()
        .iter()
        .map(|&s| raw.iter().filter(|p| p.end == s).count())
        .collect();
    let paths = raw
        .into_iter()
        .map(|p| PathRecord::from_edges(g, g.root(), p.edges))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleRun {
        paths,
        z,
        seed,
        stream,
        counters,
    })
}

/// `max(1, ⌈2 ℓ log₂ |X|⌉)`.
pub fn default_reps(ell: usize, terminals: usize) -> usize {
    let r = (2.0 * ell as f64 * (terminals.max(1) as f64).log2()).ceil();
    (r as usize).max(1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundingResult {
    /// `H` in the layered graph, sorted.
    pub edges: Vec<EdgeId>,
    #[serde(with = "crate::scalar::serde_rational")]
    pub cost: Rational,
    /// Per layered terminal: reached by a sampled path (before repair).
    pub sampled_connected: Vec<bool>,
    pub reps: usize,
    pub repair_edges: Vec<EdgeId>,
    /// Cost of repair edges not already sampled.
    #[serde(with = "crate::scalar::serde_rational")]
    pub repair_cost: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub sampled_cost: Rational,
    /// `H` mapped to base-instance edges, and its cost.
    pub base_edges: Vec<EdgeId>,
    #[serde(with = "crate::scalar::serde_rational")]
    pub base_cost: Rational,
    pub counters: Counters,
}

/// Unions `reps` independent runs (streams `0..reps`), then buys a shortest
/// root path for every terminal no run reached.
pub fn round<O: MomentOracle>(
    oracle: &O,
    li: &LayeredInstance,
    reps: usize,
    seed: u64,
) -> Result<RoundingResult> {
    if reps == 0 {
        return Err(Error::Precondition(
            "at least one repetition is required".into(),
        ));
    }
    let g = li.graph();
    let mut counters = Counters::default();
    let mut sampled: Vec<EdgeId> = Vec::new();
    let mut connected = vec![false; g.num_nodes()];
    for rep in 0..reps {
        let mut rng = run_rng(seed, rep as u64);
        let (raw, c) = sample_raw(oracle, li, &mut rng)?;
        counters.add(c);
        for p in raw {
            connected[p.end] = true;
            sampled.extend(p.edges);
        }
    }
    sampled.sort_unstable();
    sampled.dedup();
    let sampled_connected: Vec<bool> = g.terminals().iter().map(|&s| connected[s]).collect();
    let mut repair_edges = Vec::new();
    for (&s, &ok) in g.terminals().iter().zip(&sampled_connected) {
        if !ok {
            repair_edges.extend(shortest_path(li, s)?.edges);
        }
    }
    repair_edges.sort_unstable();
    repair_edges.dedup();
    let mut edges = sampled.clone();
    edges.extend(&repair_edges);
    edges.sort_unstable();
    edges.dedup();
    let sampled_cost = g.cost_of(&sampled);
    let cost = g.cost_of(&edges);
    let base_edges = map_back(&edges, li)?;
    let base_cost = li.base().cost_of(&base_edges);
    Ok(RoundingResult {
        repair_cost: cost.clone() - sampled_cost.clone(),
        edges,
        cost,
        sampled_connected,
        reps,
        repair_edges,
        sampled_cost,
        base_edges,
        base_cost,
        counters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::flow_lp::{integral_point, VarLayout};
    use crate::moments::{from_distribution, point_moments};
    use crate::scalar::{int, rat};

    fn two_routes() -> (LayeredInstance, Vec<bool>, Vec<bool>) {
        let li = LayeredInstance::detect(fixtures::two_routes()).unwrap();
        let g = li.graph();
        let a = integral_point(
            g,
            &[
                g.edge_by_names("r", "a").unwrap(),
                g.edge_by_names("a", "s").unwrap(),
            ],
        )
        .unwrap();
        let b = integral_point(
            g,
            &[
                g.edge_by_names("r", "b").unwrap(),
                g.edge_by_names("b", "s").unwrap(),
            ],
        )
        .unwrap();
        (li, a, b)
    }

    #[test]
    fn integral_oracle_samples_its_path() {
        let (li, a, _) = two_routes();
        let y = point_moments(2, &a).unwrap();
        for seed in 0..20 {
            let run = sample_once(&y, &li, seed, 0).unwrap();
            assert_eq!(run.paths.len(), 2);
            assert_eq!(run.z, vec![1]);
            assert_eq!(run.counters.clamps, 0);
        }
        let res = round(&y, &li, 1, 3).unwrap();
        assert!(res.repair_edges.is_empty());
        assert_eq!(res.cost, int(2));
    }

    #[test]
    fn half_half_root_coins_are_independent() {
        // Root edges are flipped independently, so both routes appear with
        // probability 1/4 and then each extends with probability 1.
        let (li, a, b) = two_routes();
        let n = VarLayout::for_instance(li.graph()).num_vars();
        let y = from_distribution(n, 2, &[(rat(1, 2), a), (rat(1, 2), b)]).unwrap();
        let (mut total, mut both) = (0, 0);
        for stream in 0..4000 {
            let run = sample_once(&y, &li, 11, stream).unwrap();
            total += run.z[0];
            both += usize::from(run.z[0] == 2);
            for p in &run.paths {
                let prefix = &p.edges[..p.edges.len() - 1];
                assert!(prefix.is_empty() || run.paths.iter().any(|q| q.edges == prefix));
            }
        }
        assert!((total as f64 / 4000.0 - 1.0).abs() < 0.05);
        assert!((both as f64 / 4000.0 - 0.25).abs() < 0.03);
    }

    #[test]
    fn reproducible_and_counted() {
        let (li, a, b) = two_routes();
        let n = VarLayout::for_instance(li.graph()).num_vars();
        let y = from_distribution(n, 2, &[(rat(1, 3), a), (rat(2, 3), b)]).unwrap();
        let counting = CountingOracle::new(&y);
        let r1 = sample_once(&counting, &li, 5, 9).unwrap();
        let r2 = sample_once(&y, &li, 5, 9).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(counting.count(), r1.counters.queries);
    }

    #[test]
    fn reps_formula() {
        assert_eq!(default_reps(2, 1), 1);
        assert_eq!(default_reps(3, 4), 12);
        assert_eq!(default_reps(2, 3), 7);
    }

    #[test]
    fn figure_one_black_oracle_costs_nineteen() {
        let li = LayeredInstance::detect(fixtures::figure_one()).unwrap();
        let g = li.graph();
        let x = integral_point(g, &fixtures::figure_one_optimum(g)).unwrap();
        // Paths only read edge variables, which come first.
        let y = point_moments(1, &x[..g.num_edges()]).unwrap();
        for seed in 0..5 {
            let res = round(&y, &li, default_reps(3, 4), seed).unwrap();
            assert_eq!(res.cost, int(19));
            assert!(res.repair_edges.is_empty());
        }
    }
}
