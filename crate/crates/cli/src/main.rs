use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use dst_lasserre::exact::{exact_opt, verify_solution};
use dst_lasserre::flow_lp::{build_flow_lp, solve_lp, ConstraintSystem, LpStatus};
use dst_lasserre::harness::{prepare, run_suite, to_tsv, PipelineConfig, Suite};
use dst_lasserre::moments::{
    certify, inversion_check, shift_commutes_check, IndexSet, MomentVector,
};
use dst_lasserre::rounding::{default_reps, edge_marginal_check, round, stats, MomentOracle};
use dst_lasserre::scalar::format_rational;
use dst_lasserre::sdp::{
    assemble_with_budget, dimensions, export_moments, import_moments, moment_budget, solve,
    Backend, SolverConfig,
};
use dst_lasserre::{parse_instance, DstInstance, Error, LayeredInstance, Rational, Result, Scalar};

#[derive(Parser)]
#[command(
    name = "dst-lasserre",
    version,
    about = "Lasserre-lifted flow LP and path rounding for Directed Steiner Tree"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Input {
    /// Instance file.
    instance: PathBuf,
    /// Levelize to this many layers; omit for an already layered instance.
    #[arg(long)]
    ell: Option<usize>,
}

impl Input {
    fn load(&self) -> Result<LayeredInstance> {
        prepare(&read_instance(&self.instance)?, self.ell)
    }
}

#[derive(Args)]
struct OutOpt {
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Smoke,
    Gap,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Write the ℓ-layer reduction of an instance.
    Levelize {
        #[arg(long)]
        ell: usize,
        input: PathBuf,
        output: PathBuf,
    },
    /// Solve the flow LP exactly.
    SolveLp {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Write the flow LP in lp-dump format.
    DumpLp {
        #[command(flatten)]
        input: Input,
        output: PathBuf,
    },
    /// Report the size of the level-t lift without building it.
    LiftDim {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        t: usize,
    },
    /// Solve the level-t lift and write its moment vector.
    LiftSolve {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 50_000)]
        max_iters: usize,
        /// Take the moments from this file instead of the built-in solver.
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Certify a moment vector against an lp-dump and run the conditioning
    /// identities.
    Check {
        moments: PathBuf,
        system: PathBuf,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Conditioning set as comma-separated ordinals (default: `0,1`).
        #[arg(long)]
        set: Option<String>,
        /// Read values as exact rationals.
        #[arg(long)]
        exact: bool,
    },
    /// Round a moment vector to a tree.
    Round {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        moments: PathBuf,
        /// Repetitions per trial (default `⌈2ℓ log₂|X|⌉`).
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Empirical table of the sampling estimators.
    Stats {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        moments: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Also write a whitespace-separated per-terminal table.
        #[arg(long)]
        gnuplot: Option<PathBuf>,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Exact optimum by dynamic programming.
    Exact {
        instance: PathBuf,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Run an experiment suite end to end.
    Experiment {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the ratio table as TSV.
        #[arg(long)]
        tsv: Option<PathBuf>,
        #[command(flatten)]
        out: OutOpt,
    },
}

fn read_instance(path: &Path) -> Result<DstInstance> {
    parse_instance(&fs::read_to_string(path)?)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn edge_labels(g: &DstInstance, edges: &[usize]) -> Vec<String> {
    edges.iter().map(|&e| g.edge_label(e)).collect()
}

fn parse_set(spec: &str) -> Result<IndexSet> {
    let ords = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Precondition(format!("bad ordinal {s:?} in --set")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IndexSet::new(ords))
}

fn check_suite<T: Scalar>(
    y: &MomentVector<T>,
    cs: &ConstraintSystem,
    t: usize,
    tol: f64,
    set: &IndexSet,
) -> Result<serde_json::Value> {
    let report = certify(y, cs, t, tol)?;
    let inversion = inversion_check(y, set, tol)?;
    let mut commutes = Vec::new();
    for row in &cs.constraints {
        for x in set.subsets() {
            let c = shift_commutes_check(y, &x, set, &row.coeffs, &row.rhs, tol)?;
            commutes.push(json!({
                "row": row.label,
                "x": x.to_string(),
                "holds": c.holds,
                "max_deviation": c.max_deviation,
                "compared": c.compared,
            }));
        }
    }
    let all_commute = commutes.iter().all(|c| c["holds"] == true);
    Ok(json!({
        "certified": report.is_clean(),
        "certify": report,
        "set": set.to_string(),
        "inversion": inversion,
        "commutativity_ok": all_commute,
        "commutativity": commutes,
        "ok": report.is_clean() && inversion.holds && all_commute,
    }))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Levelize { ell, input, output } => {
            let li = prepare(&read_instance(&input)?, Some(ell))?;
            fs::write(&output, li.graph().to_dst_string())?;
            let g = li.graph();
            emit(
                &json!({
                    "ell": ell,
                    "nodes": g.num_nodes(),
                    "edges": g.num_edges(),
                    "terminals": g.terminals().len(),
                }),
                None,
            )
        }
        Command::SolveLp { input, out } => {
            let li = input.load()?;
            let cs = build_flow_lp(&li);
            let sol = solve_lp(&cs);
            let zero = Rational::from_i64(0);
            let nonzero: Vec<_> = sol
                .values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != zero)
                .map(|(i, v)| json!({"var": cs.var_names[i], "value": format_rational(v)}))
                .collect();
            emit(
                &json!({
                    "status": sol.status,
                    "objective": (sol.status == LpStatus::Optimal).then(|| format_rational(&sol.objective)),
                    "objective_f64": (sol.status == LpStatus::Optimal).then(|| sol.objective.to_f64()),
                    "vars": cs.num_vars(),
                    "constraints": cs.constraints.len(),
                    "pivots": sol.pivots,
                    "nonzero": nonzero,
                }),
                out.out.as_deref(),
            )
        }
        Command::DumpLp { input, output } => {
            let cs = build_flow_lp(&input.load()?);
            fs::write(&output, cs.to_lpdump())?;
            emit(
                &json!({"vars": cs.num_vars(), "constraints": cs.constraints.len()}),
                None,
            )
        }
        Command::LiftDim { input, t } => {
            let cs = build_flow_lp(&input.load()?);
            emit(
                &dimensions(cs.num_vars(), cs.constraints.len(), t, moment_budget()),
                None,
            )
        }
        Command::LiftSolve {
            input,
            t,
            tol,
            max_iters,
            external,
            out,
        } => {
            let cs = build_flow_lp(&input.load()?);
            let p = assemble_with_budget(&cs, t, moment_budget())
                .map_err(|e| e.in_stage("lasserre_sdp"))?;
            let cfg = SolverConfig {
                tol: tol / 10.0,
                gap_tol: tol,
                max_iters,
                backend: external.map_or(Backend::Builtin, Backend::ExternalFile),
                ..SolverConfig::default()
            };
            let sol = solve(&p, &cfg).map_err(|e| e.in_stage("lasserre_sdp"))?;
            export_moments(&sol.moments, &out)?;
            let report = certify(&sol.moments, &cs, t, tol)?;
            emit(
                &json!({
                    "objective": sol.objective,
                    "certified": report.is_clean(),
                    "min_constraint_value": report.min_constraint_value,
                    "diagnostics": sol.diagnostics,
                }),
                None,
            )
        }
        Command::Check {
            moments,
            system,
            t,
            tol,
            set,
            exact,
        } => {
            let cs = ConstraintSystem::from_lpdump(&fs::read_to_string(&system)?)?;
            let set = match set {
                Some(s) => parse_set(&s)?,
                None => IndexSet::new((0..cs.num_vars().min(2)).collect::<Vec<_>>()),
            };
            let value = if exact {
                let y: MomentVector<Rational> = import_moments(&moments)?;
                check_suite(&y, &cs, t, tol, &set)?
            } else {
                let y: MomentVector<f64> = import_moments(&moments)?;
                check_suite(&y, &cs, t, tol, &set)?
            };
            emit(&value, None)
        }
        Command::Round {
            input,
            moments,
            reps,
            seed,
            trials,
            out,
        } => {
            let li = input.load()?;
            let g = li.graph();
            let y: MomentVector<f64> = import_moments(&moments)?;
            let reps = reps.unwrap_or_else(|| default_reps(li.ell(), g.terminals().len()));
            let mut runs = Vec::new();
            let mut total = 0.0;
            for i in 0..trials.max(1) {
                let res = round(&y, &li, reps, seed + i)?;
                let v = verify_solution(g, &res.edges)?;
                total += res.cost.to_f64();
                let connectivity: Vec<_> = g
                    .terminals()
                    .iter()
                    .zip(&res.sampled_connected)
                    .map(|(&s, &c)| json!({"terminal": g.name(s), "sampled": c, "connected": !v.unreached.contains(&s)}))
                    .collect();
                runs.push(json!({
                    "seed": seed + i,
                    "cost": format_rational(&res.cost),
                    "sampled_cost": format_rational(&res.sampled_cost),
                    "repair_cost": format_rational(&res.repair_cost),
                    "feasible": v.feasible,
                    "edges": edge_labels(g, &res.edges),
                    "repair_edges": edge_labels(g, &res.repair_edges),
                    "base_cost": format_rational(&res.base_cost),
                    "base_edges": edge_labels(li.base(), &res.base_edges),
                    "terminals": connectivity,
                    "queries": res.counters.queries,
                    "clamps": res.counters.clamps,
                    "dead": res.counters.dead,
                }));
            }
            let fractional: f64 = (0..g.num_edges())
                .map(|e| {
                    g.edge(e).cost.to_f64() * y.query(&IndexSet::singleton(e)).unwrap_or(f64::NAN)
                })
                .sum();
            emit(
                &json!({
                    "reps": reps,
                    "trials": runs.len(),
                    "fractional_cost": fractional,
                    "mean_cost": total / runs.len() as f64,
                    "runs": runs,
                }),
                out.out.as_deref(),
            )
        }
        Command::Stats {
            input,
            moments,
            trials,
            seed,
            tol,
            gnuplot,
            out,
        } => {
            let li = input.load()?;
            let y: MomentVector<f64> = import_moments(&moments)?;
            let table = stats(&y, &li, trials, seed)?;
            let marginals = edge_marginal_check(&y, &li, trials, seed, tol)?;
            if let Some(path) = gnuplot {
                let na = |v: Option<f64>| v.map_or("NaN".to_string(), |x| x.to_string());
                let mut text = String::from(
                    "# terminal mean_z se_z pr_connected se_connected mean_z_given_connected max_mean_z_given_path\n",
                );
                for ts in &table.terminals {
                    text.push_str(&format!(
                        "{} {} {} {} {} {} {}\n",
                        ts.terminal,
                        ts.mean_z,
                        ts.se_z,
                        ts.pr_connected,
                        ts.se_connected,
                        na(ts.mean_z_given_connected),
                        na(ts.max_mean_z_given_path),
                    ));
                }
                fs::write(path, text)?;
            }
            emit(
                &json!({"stats": table, "edge_marginals": marginals}),
                out.out.as_deref(),
            )
        }
        Command::Exact { instance, out } => {
            let g = read_instance(&instance)?;
            let res = exact_opt(&g).map_err(|e| e.in_stage("exact_oracle"))?;
            emit(
                &json!({
                    "opt": format_rational(&res.opt),
                    "opt_f64": res.opt.to_f64(),
                    "witness": edge_labels(&g, &res.witness),
                    "witness_ids": res.witness,
                    "states": res.states,
                    "splits_examined": res.splits_examined,
                }),
                out.out.as_deref(),
            )
        }
        Command::Experiment {
            suite,
            seeds,
            seed,
            tsv,
            out,
        } => {
            let suite = match suite {
                SuiteArg::Smoke => Suite::Smoke,
                SuiteArg::Gap => Suite::Gap,
                SuiteArg::Full => Suite::Full,
            };
            let base = PipelineConfig {
                rounding_seeds: seeds,
                seed,
                ..PipelineConfig::default()
            };
            let report = run_suite(suite, &base)?;
            if let Some(path) = tsv {
                fs::write(path, to_tsv(&report))?;
            }
            emit(&report, out.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
