use std::path::PathBuf;

use num_traits::Zero;
use serde::Serialize;

use super::generators::{gen_random_layered, gen_random_set_cover, set_cover_gap};
use crate::error::{Error, Result};
use crate::exact::{exact_opt, verify_solution};
use crate::fixtures;
use crate::flow_lp::{build_flow_lp, solve_lp, LpStatus};
use crate::instance::{levelize, DstInstance, LayeredInstance, LevelizeOptions};
use crate::moments::{certify, from_distribution, MomentVector};
use crate::rounding::{default_reps, round, MomentOracle};
use crate::scalar::{format_rational, Rational, Scalar};
use crate::sdp::{
    assemble_with_budget, dimensions, import_moments, moment_budget, solve, SolverConfig,
};

/// Where the rounding oracle comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleSource {
    /// Solve the level-`t` lift and round its (certified) solution.
    Solve,
    /// Moments of the exact optimum as a single integral point. A member of
    /// every level, usable where the lift is beyond desk scale.
    IntegralWitness,
    /// Moments read from a file, over the layered edge variables (which come
    /// first in the LP ordering).
    File(PathBuf),
}

impl OracleSource {
    fn tag(&self) -> &'static str {
        match self {
            OracleSource::Solve => "sdp",
            OracleSource::IntegralWitness => "integral-witness",
            OracleSource::File(_) => "file",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    /// Lift level; `None` means `2ℓ`.
    pub t: Option<usize>,
    /// Rounding runs with seeds `seed, seed + 1, ...`.
    pub rounding_seeds: u64,
    pub seed: u64,
    /// Repetitions per rounding run; `None` means `max(1, ⌈2ℓ log₂|X|⌉)`.
    pub reps: Option<usize>,
    pub solver: SolverConfig,
    pub certify_tol: f64,
    pub oracle: OracleSource,
    pub budget: u128,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            t: None,
            rounding_seeds: 20,
            seed: 0,
            reps: None,
            solver: SolverConfig::default(),
            certify_tol: 1e-6,
            oracle: OracleSource::Solve,
            budget: moment_budget(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub id: String,
    pub nodes: usize,
    pub edges: usize,
    pub terminals: usize,
    pub ell: usize,
    pub t: usize,
    pub lp_vars: usize,
    pub lp: f64,
    pub lp_exact: String,
    pub sdp: Option<f64>,
    pub sdp_dual_bound: Option<f64>,
    pub sdp_converged: Option<bool>,
    pub sdp_certified: Option<bool>,
    pub sdp_note: Option<String>,
    pub oracle: String,
    /// `Σ c_e y_{{e}}` of the oracle.
    pub oracle_value: f64,
    pub opt: f64,
    pub opt_exact: String,
    /// Optimum of the instance before levelization.
    pub opt_base: String,
    pub reps: usize,
    pub seeds: Vec<u64>,
    pub rounded_mean: f64,
    pub rounded_std: f64,
    pub rounded_min: f64,
    pub rounded_max: f64,
    /// Mean cost after mapping back to the base instance.
    pub rounded_base_mean: f64,
    pub repair_rate: f64,
    pub all_feasible: bool,
    /// `LP <= SDP + tol <= OPT + 2 tol` (SDP omitted when not solved).
    pub sandwich_ok: bool,
    pub ratio_opt_over_lp: Option<f64>,
    pub ratio_rounded_over_oracle: Option<f64>,
    pub ratio_rounded_over_opt: Option<f64>,
}

/// Levelizes with `ell`, or takes an already layered input as is.
pub fn prepare(inst: &DstInstance, ell: Option<usize>) -> Result<LayeredInstance> {
    match ell {
        Some(ell) => levelize(inst, ell, LevelizeOptions::default()),
        None => LayeredInstance::detect(inst.clone()),
    }
    .map_err(|e| e.in_stage("levelize"))
}

pub fn run_pipeline(
    id: &str,
    inst: &DstInstance,
    ell: Option<usize>,
    cfg: &PipelineConfig,
) -> Result<ReportRow> {
    run_layered(id, &prepare(inst, ell)?, cfg)
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

pub fn run_layered(id: &str, li: &LayeredInstance, cfg: &PipelineConfig) -> Result<ReportRow> {
    let g = li.graph();
    let ell = li.ell();
    let t = cfg.t.unwrap_or(2 * ell);
    if t < ell {
        return Err(Error::Precondition(format!(
            "level t = {t} is below ℓ = {ell}; full-path moments would be undefined"
        ))
        .in_stage("rounding"));
    }

    let cs = build_flow_lp(li);
    let lp = solve_lp(&cs);
    if lp.status != LpStatus::Optimal {
        return Err(Error::Infeasible(format!("flow LP is {:?}", lp.status)).in_stage("flow_lp"));
    }

    let opt = exact_opt(g).map_err(|e| e.in_stage("exact_oracle"))?;
    let opt_base = exact_opt(li.base()).map_err(|e| e.in_stage("exact_oracle"))?;

    // The lift, when it fits.
    let dims = dimensions(cs.num_vars(), cs.constraints.len(), t, cfg.budget);
    let fits = dims.fits_budget && dims.free_vars <= cfg.solver.max_free_vars as u128;
    let mut sdp = None;
    let mut sdp_note = None;
    let mut solved: Option<MomentVector<f64>> = None;
    let (mut sdp_dual_bound, mut sdp_converged, mut sdp_certified) = (None, None, None);
    if fits && !matches!(cfg.oracle, OracleSource::File(_)) {
        let p = assemble_with_budget(&cs, t, cfg.budget).map_err(|e| e.in_stage("lasserre_sdp"))?;
        let sol = solve(&p, &cfg.solver).map_err(|e| e.in_stage("lasserre_sdp"))?;
        let report =
            certify(&sol.moments, &cs, t, cfg.certify_tol).map_err(|e| e.in_stage("moments"))?;
        sdp = Some(sol.objective);
        sdp_dual_bound = Some(sol.diagnostics.dual_bound);
        sdp_converged = Some(sol.diagnostics.converged);
        sdp_certified = Some(report.is_clean());
        solved = Some(sol.moments);
    } else if !fits {
        sdp_note = Some(format!(
            "not solved: moment block {} (budget {}), {} free variables (limit {})",
            dims.moment_dim, cfg.budget, dims.free_vars, cfg.solver.max_free_vars
        ));
    }

    let oracle: MomentVector<f64> = match &cfg.oracle {
        OracleSource::Solve => solved.ok_or_else(|| {
            Error::Guard {
                what: "moment matrix dimension",
                limit: cfg.budget,
                actual: dims.moment_dim,
            }
            .in_stage("lasserre_sdp")
        })?,
        OracleSource::IntegralWitness => {
            let mut x = vec![false; g.num_edges()];
            for &e in &opt.witness {
                x[e] = true;
            }
            // Paths of ℓ edges need sets up to size ℓ.
            let level = ell.saturating_sub(1) / 2;
            from_distribution(g.num_edges(), level, &[(Rational::from_i64(1), x)])
                .map_err(|e| e.in_stage("moments"))?
                .to_f64()
        }
        OracleSource::File(path) => import_moments(path).map_err(|e| e.in_stage("lasserre_sdp"))?,
    };
    let mut oracle_value = 0.0;
    for (e, edge) in g.edges().iter().enumerate() {
        oracle_value += edge.cost.to_f64()
            * oracle
                .query(&crate::moments::IndexSet::singleton(e))
                .map_err(|err| err.in_stage("rounding"))?;
    }

    let reps = cfg
        .reps
        .unwrap_or_else(|| default_reps(ell, g.terminals().len()));
    let seeds: Vec<u64> = (0..cfg.rounding_seeds.max(1))
        .map(|i| cfg.seed + i)
        .collect();
    let mut costs = Vec::with_capacity(seeds.len());
    let mut base_total = 0.0;
    let mut repaired = 0usize;
    let mut all_feasible = true;
    for &s in &seeds {
        let res = round(&oracle, li, reps, s).map_err(|e| e.in_stage("rounding"))?;
        let check = verify_solution(g, &res.edges)?;
        all_feasible &= check.feasible && verify_solution(li.base(), &res.base_edges)?.feasible;
        if !res.repair_edges.is_empty() {
            repaired += 1;
        }
        costs.push(res.cost.to_f64());
        base_total += res.base_cost.to_f64();
    }
    if !all_feasible {
        return Err(
            Error::Infeasible("a rounded solution misses a terminal".into()).in_stage("rounding"),
        );
    }
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let std = if costs.len() > 1 {
        (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };

    let lp_f = lp.objective.to_f64();
    let opt_f = opt.opt.to_f64();
    let tol = cfg.certify_tol.max(1e-9) * (1.0 + opt_f.abs());
    let sandwich_ok = match sdp {
        Some(v) => lp_f <= v + tol && v <= opt_f + 2.0 * tol,
        None => lp.objective <= opt.opt,
    };
    Ok(ReportRow {
        id: id.to_string(),
        nodes: g.num_nodes(),
        edges: g.num_edges(),
        terminals: g.terminals().len(),
        ell,
        t,
        lp_vars: cs.num_vars(),
        lp: lp_f,
        lp_exact: format_rational(&lp.objective),
        sdp,
        sdp_dual_bound,
        sdp_converged,
        sdp_certified,
        sdp_note,
        oracle: cfg.oracle.tag().to_string(),
        oracle_value,
        opt: opt_f,
        opt_exact: format_rational(&opt.opt),
        opt_base: format_rational(&opt_base.opt),
        reps,
        seeds,
        rounded_mean: mean,
        rounded_std: std,
        rounded_min: costs.iter().copied().fold(f64::INFINITY, f64::min),
        rounded_max: costs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        rounded_base_mean: base_total / n,
        repair_rate: repaired as f64 / n,
        all_feasible,
        sandwich_ok,
        ratio_opt_over_lp: if lp.objective.is_zero() {
            None
        } else {
            ratio(opt_f, lp_f)
        },
        ratio_rounded_over_oracle: ratio(mean, oracle_value),
        ratio_rounded_over_opt: ratio(mean, opt_f),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Smoke,
    Gap,
    Full,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoke" => Ok(Suite::Smoke),
            "gap" => Ok(Suite::Gap),
            "full" => Ok(Suite::Full),
            other => Err(Error::Precondition(format!("unknown suite {other:?}"))),
        }
    }
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Smoke => "smoke",
            Suite::Gap => "gap",
            Suite::Full => "full",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub rounding_seeds: u64,
    pub seed: u64,
    pub certify_tol: f64,
    pub solver_tol: f64,
    pub solver_gap_tol: f64,
    pub solver_max_iters: usize,
    pub moment_budget: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub suite: String,
    pub config: ConfigEcho,
    pub rows: Vec<ReportRow>,
}

struct Case {
    id: String,
    li: LayeredInstance,
    t: usize,
    oracle: OracleSource,
}

fn detect(inst: DstInstance) -> Result<LayeredInstance> {
    LayeredInstance::detect(inst)
}

fn smoke_cases() -> Result<Vec<Case>> {
    let solve = |id: &str, li: LayeredInstance| {
        let t = li.ell();
        Case {
            id: id.into(),
            li,
            t,
            oracle: OracleSource::Solve,
        }
    };
    Ok(vec![
        solve("single-edge", detect(fixtures::single_edge(5))?),
        solve("star-2", detect(fixtures::star(2))?),
        solve("two-routes", detect(fixtures::two_routes())?),
        solve(
            "triangle-l2",
            levelize(&fixtures::triangle(), 2, LevelizeOptions::default())?,
        ),
    ])
}

fn gap_cases() -> Result<Vec<Case>> {
    let witness = |id: String, li: LayeredInstance| {
        let t = 2 * li.ell();
        Case {
            id,
            li,
            t,
            oracle: OracleSource::IntegralWitness,
        }
    };
    let mut cases = vec![
        witness("set-cover-gap-3".into(), set_cover_gap(3)?),
        witness("set-cover-gap-4".into(), set_cover_gap(4)?),
        witness("figure-1".into(), detect(fixtures::figure_one())?),
    ];
    for seed in 0..3 {
        cases.push(witness(
            format!("set-cover-random-{seed}"),
            gen_random_set_cover(4, 3, 5, seed)?,
        ));
    }
    Ok(cases)
}

fn random_cases() -> Result<Vec<Case>> {
    let mut cases = Vec::new();
    for seed in 0..4 {
        for widths in [[2usize, 1], [1, 2]] {
            let li = gen_random_layered(2, &widths, 0.8, (1, 9), seed)?;
            cases.push(Case {
                id: format!("random-l2-{}x{}-{seed}", widths[0], widths[1]),
                li,
                t: 2,
                oracle: OracleSource::Solve,
            });
        }
    }
    Ok(cases)
}

/// Runs a named suite. `base` supplies seeds, solver settings and budget;
/// each case fixes its own level and oracle source.
pub fn run_suite(suite: Suite, base: &PipelineConfig) -> Result<ExperimentReport> {
    let cases = match suite {
        Suite::Smoke => smoke_cases()?,
        Suite::Gap => gap_cases()?,
        Suite::Full => {
            let mut all = smoke_cases()?;
            all.extend(gap_cases()?);
            all.extend(random_cases()?);
            all
        }
    };
    let mut rows = Vec::with_capacity(cases.len());
    for case in cases {
        let cfg = PipelineConfig {
            t: Some(case.t),
            oracle: case.oracle,
            ..base.clone()
        };
        rows.push(run_layered(&case.id, &case.li, &cfg)?);
    }
    Ok(ExperimentReport {
        suite: suite.name().into(),
        config: ConfigEcho {
            rounding_seeds: base.rounding_seeds,
            seed: base.seed,
            certify_tol: base.certify_tol,
            solver_tol: base.solver.tol,
            solver_gap_tol: base.solver.gap_tol,
            solver_max_iters: base.solver.max_iters,
            moment_budget: base.budget,
        },
        rows,
    })
}

/// Tab-separated ratio table; missing values are `NaN` so gnuplot skips them.
pub fn to_tsv(report: &ExperimentReport) -> String {
    let opt = |v: Option<f64>| v.map_or("NaN".to_string(), |x| x.to_string());
    let mut out = String::from(
        "# id\tell\tt\tlp\tsdp\topt\toracle_value\trounded_mean\trounded_std\topt_over_lp\trounded_over_oracle\trounded_over_opt\n",
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.id,
            r.ell,
            r.t,
            r.lp,
            opt(r.sdp),
            r.opt,
            r.oracle_value,
            r.rounded_mean,
            r.rounded_std,
            opt(r.ratio_opt_over_lp),
            opt(r.ratio_rounded_over_oracle),
            opt(r.ratio_rounded_over_opt),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_row_is_tight() {
        let cfg = PipelineConfig {
            rounding_seeds: 3,
            ..PipelineConfig::default()
        };
        let row = run_pipeline("single", &fixtures::single_edge(5), None, &cfg).unwrap();
        assert_eq!(row.lp, 5.0);
        assert!((row.sdp.unwrap() - 5.0).abs() < 1e-6);
        assert_eq!(row.opt, 5.0);
        assert_eq!(row.rounded_mean, 5.0);
        assert!(row.sandwich_ok && row.all_feasible);
        assert_eq!(row.ratio_rounded_over_opt, Some(1.0));
    }

    #[test]
    fn level_below_path_length_is_rejected() {
        let cfg = PipelineConfig {
            t: Some(0),
            ..PipelineConfig::default()
        };
        let err = run_pipeline("fig1", &fixtures::figure_one(), None, &cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::Stage {
                stage: "rounding",
                ..
            }
        ));
    }

    #[test]
    fn gap_instance_with_witness_oracle() {
        let cfg = PipelineConfig {
            oracle: OracleSource::IntegralWitness,
            rounding_seeds: 5,
            ..PipelineConfig::default()
        };
        let row = run_layered("gap3", &set_cover_gap(3).unwrap(), &cfg).unwrap();
        assert_eq!(row.lp_exact, "3/2");
        assert_eq!(row.opt_exact, "2");
        assert!(row.sdp.is_none() && row.sdp_note.is_some());
        assert_eq!(row.rounded_mean, 2.0);
        let report = ExperimentReport {
            suite: "x".into(),
            config: ConfigEcho {
                rounding_seeds: 5,
                seed: 0,
                certify_tol: 1e-6,
                solver_tol: 1e-7,
                solver_gap_tol: 1e-6,
                solver_max_iters: 1,
                moment_budget: 2000,
            },
            rows: vec![row],
        };
        let tsv = to_tsv(&report);
        assert_eq!(tsv.lines().count(), 2);
        assert!(tsv.contains("gap3\t2\t4\t1.5\tNaN\t2\t"));
    }
}
