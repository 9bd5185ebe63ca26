use std::collections::HashMap;

use serde::Serialize;

use super::{run_rng, sample_raw, Counters, MomentOracle};
use crate::error::Result;
use crate::exact::{enumerate_paths, PathTarget};
use crate::instance::{EdgeId, LayeredInstance};
use crate::moments::IndexSet;
use num_traits::{One, Zero};

use crate::scalar::Scalar;

/// Most paths enumerated per target before falling back to observed paths.
pub const PATH_CAP: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathRow {
    pub edges: Vec<EdgeId>,
    pub label: String,
    pub y: f64,
    pub hits: u64,
    pub frequency: f64,
    /// `sqrt(y (1 - y) / trials)`.
    pub se: f64,
    /// `Ê[Z | P ∈ T]`, the per-path estimator.
    pub mean_z_given_path: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TerminalStats {
    pub terminal: String,
    pub mean_z: f64,
    pub se_z: f64,
    pub pr_connected: f64,
    pub se_connected: f64,
    /// Pooled `Ê[Z | Z >= 1]`.
    pub mean_z_given_connected: Option<f64>,
    pub se_z_given_connected: Option<f64>,
    /// Largest per-path `Ê[Z | P ∈ T]` over paths hit at least once.
    pub max_mean_z_given_path: Option<f64>,
    /// Every full root path when enumerable, else the observed ones.
    pub paths_enumerated: bool,
    pub paths: Vec<PathRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsReport {
    pub trials: u64,
    pub seed: u64,
    pub ell: usize,
    pub terminals: Vec<TerminalStats>,
    pub mean_queries: f64,
    pub se_queries: f64,
    pub max_queries: u64,
    pub counters: Counters,
    /// `Ê[c(E(T))]` and its standard error.
    pub mean_cost: f64,
    pub se_cost: f64,
    /// `Σ c_e y_{{e}}`.
    pub fractional_cost: f64,
    pub edges: Vec<EdgeRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeRow {
    pub edge: EdgeId,
    pub label: String,
    pub y: f64,
    pub hits: u64,
    pub frequency: f64,
    pub se: f64,
}

fn mean_se(sum: f64, sum_sq: f64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    (mean, (var / nf).sqrt())
}

fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

/// Empirical estimators over `trials` runs (streams `0..trials`).
pub fn stats<O: MomentOracle>(
    oracle: &O,
    li: &LayeredInstance,
    trials: u64,
    seed: u64,
) -> Result<StatsReport> {
    let g = li.graph();
    let trials = trials.max(1);
    let terminals = g.terminals().to_vec();
    let k = terminals.len();
    let mut term_pos = vec![usize::MAX; g.num_nodes()];
    for (i, &s) in terminals.iter().enumerate() {
        term_pos[s] = i;
    }

    let mut z_sum = vec![0u64; k];
    let mut z_sq = vec![0u64; k];
    let mut connected = vec![0u64; k];
    let mut path_hits: HashMap<Vec<EdgeId>, (u64, u64)> = HashMap::new();
    let mut edge_hits = vec![0u64; g.num_edges()];
    let (mut q_sum, mut q_sq, mut q_max) = (0u64, 0u128, 0u64);
    let (mut cost_sum, mut cost_sq) = (0.0f64, 0.0f64);
    let edge_cost: Vec<f64> = g.edges().iter().map(|e| e.cost.to_f64()).collect();
    let mut counters = Counters::default();

    let mut in_run = vec![false; g.num_edges()];
    for trial in 0..trials {
        let mut rng = run_rng(seed, trial);
        let (raw, c) = sample_raw(oracle, li, &mut rng)?;
        counters.add(c);
        q_sum += c.queries;
        q_sq += (c.queries as u128).pow(2);
        q_max = q_max.max(c.queries);

        let mut z = vec![0u64; k];
        for p in &raw {
            if term_pos[p.end] != usize::MAX {
                z[term_pos[p.end]] += 1;
            }
        }
        let mut cost = 0.0;
        let mut touched = Vec::new();
        for p in &raw {
            for &e in &p.edges {
                if !in_run[e] {
                    in_run[e] = true;
                    touched.push(e);
                    cost += edge_cost[e];
                }
            }
            if term_pos[p.end] != usize::MAX {
                let entry = path_hits.entry(p.edges.clone()).or_insert((0, 0));
                entry.0 += 1;
                entry.1 += z[term_pos[p.end]];
            }
        }
        for e in touched {
            in_run[e] = false;
            edge_hits[e] += 1;
        }
        cost_sum += cost;
        cost_sq += cost * cost;
        for i in 0..k {
            z_sum[i] += z[i];
            z_sq[i] += z[i] * z[i];
            if z[i] > 0 {
                connected[i] += 1;
            }
        }
    }

    let mut terminal_stats = Vec::with_capacity(k);
    for (i, &s) in terminals.iter().enumerate() {
        let (mean_z, se_z) = mean_se(z_sum[i] as f64, z_sq[i] as f64, trials);
        let pr = connected[i] as f64 / trials as f64;
        let (given, given_se) = if connected[i] > 0 {
            let (m, se) = mean_se(z_sum[i] as f64, z_sq[i] as f64, connected[i]);
            (Some(m), Some(se))
        } else {
            (None, None)
        };
        let (paths, enumerated) = match enumerate_paths(li, PathTarget::Terminal(s), PATH_CAP) {
            Ok(list) => (list.into_iter().map(|p| p.edges).collect::<Vec<_>>(), true),
            Err(_) => {
                let mut seen: Vec<Vec<EdgeId>> = path_hits
                    .keys()
                    .filter(|p| g.edge(*p.last().expect("nonempty")).head == s)
                    .cloned()
                    .collect();
                seen.sort();
                (seen, false)
            }
        };
        let mut rows = Vec::with_capacity(paths.len());
        let mut max_given = None::<f64>;
        for edges in paths {
            let y = oracle
                .query(&IndexSet::new(edges.iter().copied()))?
                .to_f64();
            let (hits, zs) = path_hits.get(&edges).copied().unwrap_or((0, 0));
            let given_path = (hits > 0).then(|| zs as f64 / hits as f64);
            if let Some(v) = given_path {
                max_given = Some(max_given.map_or(v, |m| m.max(v)));
            }
            rows.push(PathRow {
                label: path_label(li, &edges),
                edges,
                y,
                hits,
                frequency: hits as f64 / trials as f64,
                se: binomial_se(y.clamp(0.0, 1.0), trials),
                mean_z_given_path: given_path,
            });
        }
        terminal_stats.push(TerminalStats {
            terminal: g.name(s).to_string(),
            mean_z,
            se_z,
            pr_connected: pr,
            se_connected: binomial_se(pr, trials),
            mean_z_given_connected: given,
            se_z_given_connected: given_se,
            max_mean_z_given_path: max_given,
            paths_enumerated: enumerated,
            paths: rows,
        });
    }

    let mut fractional_cost = 0.0;
    let mut edges = Vec::with_capacity(g.num_edges());
    for e in 0..g.num_edges() {
        let y = oracle.query(&IndexSet::singleton(e))?.to_f64();
        fractional_cost += edge_cost[e] * y;
        edges.push(EdgeRow {
            edge: e,
            label: g.edge_label(e),
            y,
            hits: edge_hits[e],
            frequency: edge_hits[e] as f64 / trials as f64,
            se: binomial_se(y.clamp(0.0, 1.0), trials),
        });
    }
    let (mean_queries, se_queries) = mean_se(q_sum as f64, q_sq as f64, trials);
    let (mean_cost, se_cost) = mean_se(cost_sum, cost_sq, trials);
    Ok(StatsReport {
        trials,
        seed,
        ell: li.ell(),
        terminals: terminal_stats,
        mean_queries,
        se_queries,
        max_queries: q_max,
        counters,
        mean_cost,
        se_cost,
        fractional_cost,
        edges,
    })
}

fn path_label(li: &LayeredInstance, edges: &[EdgeId]) -> String {
    let g = li.graph();
    let mut out = g.name(g.root()).to_string();
    for &e in edges {
        out.push_str("->");
        out.push_str(g.name(g.edge(e).head));
    }
    out
}

/// Exact path-sum identities over enumerated root paths:
/// `Σ_{P ∈ Q(e)} y_P <= y_{{e}}` per edge, `Σ_{P ∈ Q(s)} y_P = 1` per
/// terminal, and `Σ_{P ∈ Q(s), P' ⊆ P} y_P <= y_{P'}` per prefix `P'`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSumReport {
    pub edges_checked: usize,
    pub edge_violations: Vec<String>,
    /// `Σ_{P ∈ Q(s)} y_P` per terminal.
    pub terminal_sums: Vec<f64>,
    pub terminal_violations: Vec<String>,
    pub prefixes_checked: usize,
    pub prefix_violations: Vec<String>,
    pub ok: bool,
}

pub fn path_sum_check<O: MomentOracle>(
    oracle: &O,
    li: &LayeredInstance,
    tol: f64,
) -> Result<PathSumReport> {
    let g = li.graph();
    let y_of = |edges: &[EdgeId]| oracle.query(&IndexSet::new(edges.iter().copied()));

    let mut edge_violations = Vec::new();
    for e in 0..g.num_edges() {
        let mut sum = O::Value::zero();
        for p in enumerate_paths(li, PathTarget::Edge(e), PATH_CAP)? {
            sum = sum + y_of(&p.edges)?;
        }
        let ye = y_of(&[e])?;
        if !sum.le_tol(&ye, tol) {
            edge_violations.push(format!(
                "{}: path sum {} > {}",
                g.edge_label(e),
                sum.format_value(),
                ye.format_value()
            ));
        }
    }

    let one = O::Value::one();
    let mut terminal_sums = Vec::new();
    let mut terminal_violations = Vec::new();
    let mut prefix_violations = Vec::new();
    let mut prefixes_checked = 0;
    for &s in g.terminals() {
        let mut total = O::Value::zero();
        let mut through: HashMap<Vec<EdgeId>, O::Value> = HashMap::new();
        for p in enumerate_paths(li, PathTarget::Terminal(s), PATH_CAP)? {
            let yp = y_of(&p.edges)?;
            total = total + yp.clone();
            for j in 1..=p.edges.len() {
                let acc = through
                    .entry(p.edges[..j].to_vec())
                    .or_insert_with(O::Value::zero);
                *acc = acc.clone() + yp.clone();
            }
        }
        if !total.eq_tol(&one, tol) {
            terminal_violations.push(format!("{}: Σ y_P = {}", g.name(s), total.format_value()));
        }
        terminal_sums.push(total.to_f64());
        let mut keys: Vec<_> = through.into_iter().collect();
        keys.sort_by(|a, b| a.0.cmp(&b.0));
        for (prefix, sum) in keys {
            prefixes_checked += 1;
            let yp = y_of(&prefix)?;
            if !sum.le_tol(&yp, tol) {
                prefix_violations.push(format!(
                    "{} via {}: {} > {}",
                    g.name(s),
                    path_label(li, &prefix),
                    sum.format_value(),
                    yp.format_value()
                ));
            }
        }
    }
    let ok = edge_violations.is_empty()
        && terminal_violations.is_empty()
        && prefix_violations.is_empty();
    Ok(PathSumReport {
        edges_checked: g.num_edges(),
        edge_violations,
        terminal_sums,
        terminal_violations,
        prefixes_checked,
        prefix_violations,
        ok,
    })
}

/// Path-sum identities plus the empirical edge marginals and cost bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeMarginalReport {
    pub exact: PathSumReport,
    pub trials: u64,
    /// Edges with `P̂r[e ∈ E(T)] > y_{{e}} + 3σ`.
    pub marginal_violations: Vec<String>,
    pub mean_cost: f64,
    pub se_cost: f64,
    pub fractional_cost: f64,
    /// `Ê[c(E(T))] <= Σ c_e y_{{e}} + 3σ`.
    pub cost_ok: bool,
    pub ok: bool,
}

pub fn edge_marginal_check<O: MomentOracle>(
    oracle: &O,
    li: &LayeredInstance,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<EdgeMarginalReport> {
    let exact = path_sum_check(oracle, li, tol)?;
    let report = stats(oracle, li, trials, seed)?;
    let marginal_violations: Vec<String> = report
        .edges
        .iter()
        .filter(|r| r.frequency > r.y + 3.0 * r.se + tol)
        .map(|r| format!("{}: {} > {}", r.label, r.frequency, r.y))
        .collect();
    let cost_ok = report.mean_cost <= report.fractional_cost + 3.0 * report.se_cost + tol;
    let ok = exact.ok && marginal_violations.is_empty() && cost_ok;
    Ok(EdgeMarginalReport {
        exact,
        trials: report.trials,
        marginal_violations,
        mean_cost: report.mean_cost,
        se_cost: report.se_cost,
        fractional_cost: report.fractional_cost,
        cost_ok,
        ok,
    })
}
