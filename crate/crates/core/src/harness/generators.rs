use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{DstInstance, LayeredInstance};
use crate::scalar::{Rational, Scalar};

/// Attempts before [`gen_random_layered`] gives up on reaching every terminal.
pub const RANDOM_RETRIES: u64 = 1000;

/// Set cover as DST: `r -> set_i` at the set's cost, `set_i -> element_j` at
/// cost 0 for each element the set contains. Elements are the terminals, so
/// the result is 2-layered and its optimum is the cheapest cover.
pub fn gen_set_cover(
    costs: &[Rational],
    sets: &[Vec<usize>],
    elements: usize,
) -> Result<LayeredInstance> {
    if costs.len() != sets.len() {
        return Err(Error::Dimension {
            expected: sets.len(),
            actual: costs.len(),
        });
    }
    let mut covered = vec![false; elements];
    for set in sets {
        for &j in set {
            *covered
                .get_mut(j)
                .ok_or_else(|| Error::Semantic(format!("element {j} out of range")))? = true;
        }
    }
    if let Some(j) = covered.iter().position(|c| !c) {
        return Err(Error::Semantic(format!(
            "element e{} is covered by no set",
            j + 1
        )));
    }
    let m = sets.len();
    let mut names = vec!["r".to_string()];
    names.extend((1..=m).map(|i| format!("S{i}")));
    names.extend((1..=elements).map(|j| format!("e{j}")));
    let mut edges = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        edges.push((0, 1 + i, costs[i].clone()));
        for &j in set {
            edges.push((1 + i, 1 + m + j, Rational::from_i64(0)));
        }
    }
    let inst = DstInstance::new(names, edges, 0, (0..elements).map(|j| 1 + m + j))?;
    let mut level_of = vec![1; 1 + m + elements];
    level_of[0] = 0;
    for l in level_of.iter_mut().skip(1 + m) {
        *l = 2;
    }
    LayeredInstance::with_levels(inst, 2, level_of)
}

/// Unit-cost cover of `k` elements by all `(k-1)`-subsets: the LP pays
/// `k/(k-1)`, any cover pays 2.
pub fn set_cover_gap(k: usize) -> Result<LayeredInstance> {
    if k < 2 {
        return Err(Error::Precondition("the gap family needs k >= 2".into()));
    }
    let sets: Vec<Vec<usize>> = (0..k)
        .map(|skip| (0..k).filter(|&j| j != skip).collect())
        .collect();
    gen_set_cover(&vec![Rational::from_i64(1); k], &sets, k)
}

/// Random set cover: each of `m` sets holds each element with probability
/// 1/2 and costs a uniform integer in `1..=max_cost`. Redrawn until every
/// element is covered.
pub fn gen_random_set_cover(
    m: usize,
    k: usize,
    max_cost: i64,
    seed: u64,
) -> Result<LayeredInstance> {
    for attempt in 0..RANDOM_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        let sets: Vec<Vec<usize>> = (0..m)
            .map(|_| (0..k).filter(|_| rng.random_bool(0.5)).collect())
            .collect();
        let costs: Vec<Rational> = (0..m)
            .map(|_| Rational::from_i64(rng.random_range(1..=max_cost.max(1))))
            .collect();
        if sets.iter().all(|s| s.is_empty()) {
            continue;
        }
        match gen_set_cover(&costs, &sets, k) {
            Ok(li) => return Ok(li),
            Err(Error::Semantic(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Infeasible(format!(
        "no covering family after {RANDOM_RETRIES} attempts"
    )))
}

/// A random ℓ-layered DAG. `widths[j-1]` nodes sit on level `j`; the last
/// level holds the terminals. Each edge between consecutive levels is present
/// with probability `density` and costs a uniform integer in `costs`.
/// Redraws (on the next stream of the seeded generator) until every terminal
/// is reachable.
pub fn gen_random_layered(
    ell: usize,
    widths: &[usize],
    density: f64,
    costs: (i64, i64),
    seed: u64,
) -> Result<LayeredInstance> {
    if ell == 0 || widths.len() != ell || widths.contains(&0) {
        return Err(Error::Precondition(format!(
            "need {ell} positive level widths, got {widths:?}"
        )));
    }
    if !(0.0..=1.0).contains(&density) || costs.0 < 0 || costs.0 > costs.1 {
        return Err(Error::Precondition("bad density or cost range".into()));
    }
    let mut names = vec!["r".to_string()];
    let mut level_of = vec![0];
    let mut levels: Vec<Vec<usize>> = vec![vec![0]];
    for (j, &w) in widths.iter().enumerate() {
        let level = j + 1;
        let mut ids = Vec::with_capacity(w);
        for i in 0..w {
            ids.push(names.len());
            names.push(if level == ell {
                format!("t{}", i + 1)
            } else {
                format!("v{level}_{}", i + 1)
            });
            level_of.push(level);
        }
        levels.push(ids);
    }
    let terminals = levels[ell].clone();
    for attempt in 0..RANDOM_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        let mut edges = Vec::new();
        for j in 1..=ell {
            for &u in &levels[j - 1] {
                for &v in &levels[j] {
                    let keep = density >= 1.0 || rng.random::<f64>() < density;
                    let c = rng.random_range(costs.0..=costs.1);
                    if keep {
                        edges.push((u, v, Rational::from_i64(c)));
                    }
                }
            }
        }
        match DstInstance::new(names.clone(), edges, 0, terminals.clone()) {
            Ok(inst) => return LayeredInstance::with_levels(inst, ell, level_of.clone()),
            Err(Error::Semantic(msg)) if msg.contains("reachable") => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Infeasible(format!(
        "retry budget exhausted: no draw in {RANDOM_RETRIES} reaches every terminal"
    )))
}
