//! The level-`t` lift of a flow LP as an explicit SDP, and its solution.
//!
//! Free variables are the moments `y_I` for `1 <= |I| <= min(2t+2, n)`; `y_∅`
//! is pinned to 1 and enters as a constant. Blocks are `M_{t+1}(y)` and one
//! `M_t((a; β) ∗ y)` per constraint row. Each matrix slot `(I, J)` is an
//! affine expression in the free variables, so slots with equal `I ∪ J`
//! share variables by construction.

mod admm;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow_lp::ConstraintSystem;
use crate::moments::{
    count_sets_up_to, format_moments, parse_moments, sets_up_to, IndexSet, MomentVector,
};
use crate::scalar::{Rational, Scalar};

pub use admm::{solve_builtin, Diagnostics};

/// Default cap on the side of any PSD block.
pub const DEFAULT_MOMENT_BUDGET: u128 = 2000;
/// Environment variable overriding [`DEFAULT_MOMENT_BUDGET`].
pub const MOMENT_BUDGET_ENV: &str = "DST_MOMENT_BUDGET";

pub fn moment_budget() -> u128 {
    std::env::var(MOMENT_BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MOMENT_BUDGET)
}

/// Sizes of the level-`t` lift, computable without assembling it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SdpDimensions {
    pub num_vars: usize,
    pub level: usize,
    pub rows: usize,
    /// Side of `M_{t+1}(y)`.
    pub moment_dim: u128,
    /// Side of each `M_t((a; β) ∗ y)`.
    pub shifted_dim: u128,
    pub blocks: usize,
    /// Moments `y_I` with `1 <= |I| <= 2t+2`.
    pub free_vars: u128,
    pub budget: u128,
    pub fits_budget: bool,
}

pub fn dimensions(num_vars: usize, rows: usize, t: usize, budget: u128) -> SdpDimensions {
    let moment_dim = count_sets_up_to(num_vars, t + 1);
    SdpDimensions {
        num_vars,
        level: t,
        rows,
        moment_dim,
        shifted_dim: count_sets_up_to(num_vars, t),
        blocks: rows + 1,
        free_vars: count_sets_up_to(num_vars, 2 * t + 2) - 1,
        budget,
        fits_budget: moment_dim <= budget,
    }
}

/// One PSD block. Slots cover the upper triangle row-major; slot value is
/// `constant + Σ coeff · y[var]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub label: String,
    pub index: Vec<IndexSet>,
    pub slots: Vec<Slot>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Slot {
    pub row: usize,
    pub col: usize,
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn evaluate(&self, y: &[f64]) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for s in &self.slots {
            let v = s.constant + s.terms.iter().map(|&(j, a)| a * y[j]).sum::<f64>();
            m[(s.row, s.col)] = v;
            m[(s.col, s.row)] = v;
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub num_vars: usize,
    pub level: usize,
    /// Free variable `k` is the moment of `sets[k]`.
    pub sets: Vec<IndexSet>,
    var_of: HashMap<IndexSet, usize>,
    pub blocks: Vec<Block>,
    /// Cost per free variable; nonzero only on singletons.
    pub objective: Vec<f64>,
    pub dimensions: SdpDimensions,
}

impl SdpProblem {
    pub fn var_of(&self, set: &IndexSet) -> Option<usize> {
        self.var_of.get(set).copied()
    }

    /// Free-variable values read from a moment vector.
    pub fn free_values<T: Scalar>(&self, y: &MomentVector<T>) -> Result<Vec<f64>> {
        self.sets.iter().map(|s| Ok(y.get(s)?.to_f64())).collect()
    }

    pub fn to_moments(&self, values: &[f64]) -> MomentVector<f64> {
        let mut y = MomentVector::new(self.num_vars, self.level);
        y.insert(IndexSet::empty(), 1.0).expect("empty set");
        for (s, &v) in self.sets.iter().zip(values) {
            y.insert(s.clone(), v).expect("ordinals in range");
        }
        y
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, v)| c * v).sum()
    }

    /// Smallest eigenvalue of each block at the given point.
    pub fn block_min_eigenvalues(&self, values: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| admm::min_eigenvalue(&b.evaluate(values)))
            .collect()
    }
}

/// Builds the level-`t` lift under the budget from [`moment_budget`].
pub fn assemble(cs: &ConstraintSystem, t: usize) -> Result<SdpProblem> {
    assemble_with_budget(cs, t, moment_budget())
}

pub fn assemble_with_budget(cs: &ConstraintSystem, t: usize, budget: u128) -> Result<SdpProblem> {
    let n = cs.num_vars();
    let dims = dimensions(n, cs.constraints.len(), t, budget);
    if !dims.fits_budget {
        return Err(Error::Guard {
            what: "moment matrix dimension",
            limit: budget,
            actual: dims.moment_dim,
        });
    }
    let sets: Vec<IndexSet> = sets_up_to(n, 2 * t + 2).into_iter().skip(1).collect();
    let var_of: HashMap<IndexSet, usize> = sets
        .iter()
        .cloned()
        .enumerate()
        .map(|(k, s)| (s, k))
        .collect();
    let term = |set: &IndexSet| -> Option<usize> { var_of.get(set).copied() };

    let mut blocks = Vec::with_capacity(cs.constraints.len() + 1);
    let outer = sets_up_to(n, t + 1);
    blocks.push(build_block("moment".into(), outer, |k| {
        let mut acc = Affine::default();
        acc.add(term(k), 1.0);
        acc
    }));
    let inner = sets_up_to(n, t);
    for row in &cs.constraints {
        let coeffs: Vec<(usize, f64)> = row.coeffs.iter().map(|(i, a)| (*i, a.to_f64())).collect();
        let beta = row.rhs.to_f64();
        blocks.push(build_block(row.label.clone(), inner.clone(), |k| {
            let mut acc = Affine::default();
            if beta != 0.0 {
                acc.add(term(k), -beta);
            }
            for &(i, a) in &coeffs {
                acc.add(term(&k.with(i)), a);
            }
            acc
        }));
    }

    let mut objective = vec![0.0; sets.len()];
    for (i, c) in cs.objective.iter().enumerate() {
        if !c.is_zero() {
            objective[var_of[&IndexSet::singleton(i)]] = c.to_f64();
        }
    }
    Ok(SdpProblem {
        num_vars: n,
        level: t,
        sets,
        var_of,
        blocks,
        objective,
        dimensions: dims,
    })
}

#[derive(Default)]
struct Affine {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl Affine {
    /// `None` is the pinned variable `y_∅ = 1`.
    fn add(&mut self, var: Option<usize>, coeff: f64) {
        match var {
            None => self.constant += coeff,
            Some(j) => match self.terms.iter_mut().find(|(k, _)| *k == j) {
                Some((_, a)) => *a += coeff,
                None => self.terms.push((j, coeff)),
            },
        }
    }
}

fn build_block(
    label: String,
    index: Vec<IndexSet>,
    mut expr: impl FnMut(&IndexSet) -> Affine,
) -> Block {
    let n = index.len();
    let mut cache: HashMap<IndexSet, (f64, Vec<(usize, f64)>)> = HashMap::new();
    let mut slots = Vec::with_capacity(n * (n + 1) / 2);
    for r in 0..n {
        for c in r..n {
            let key = index[r].union(&index[c]);
            let (constant, terms) = cache
                .entry(key)
                .or_insert_with_key(|k| {
                    let mut a = expr(k);
                    a.terms.retain(|&(_, v)| v != 0.0);
                    a.terms.sort_by_key(|&(j, _)| j);
                    (a.constant, a.terms)
                })
                .clone();
            slots.push(Slot {
                row: r,
                col: c,
                constant,
                terms,
            });
        }
    }
    Block {
        label,
        index,
        slots,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Backend {
    Builtin,
    /// Moments computed elsewhere and handed over in the moment file format.
    ExternalFile(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Target for the normalized primal and dual residuals and for the
    /// relative smallest eigenvalue of every block.
    pub tol: f64,
    /// Target for the relative duality gap.
    pub gap_tol: f64,
    /// Initial penalty; adapted during the run.
    pub rho: f64,
    /// Over-relaxation factor in `(0, 2)`.
    pub alpha: f64,
    /// `0` starts from the origin; other values start from a seeded random
    /// point.
    pub seed: u64,
    /// Refuse problems with more free variables (the normal matrix is dense).
    pub max_free_vars: usize,
    pub backend: Backend,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 50_000,
            tol: 1e-7,
            gap_tol: 1e-6,
            rho: 1.0,
            alpha: 1.6,
            seed: 0,
            max_free_vars: 4000,
            backend: Backend::Builtin,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.gap_tol > 0.0 && self.rho > 0.0) {
            return Err(Error::Precondition(
                "solver tolerances and rho must be positive".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::Precondition(
                "relaxation factor must lie in (0, 2)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub moments: MomentVector<f64>,
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

/// Solves with the configured backend. Non-convergence is not an error: the
/// last iterate is returned with `diagnostics.converged == false`.
pub fn solve(p: &SdpProblem, cfg: &SolverConfig) -> Result<SdpSolution> {
    cfg.validate()?;
    match &cfg.backend {
        Backend::Builtin => solve_builtin(p, cfg),
        Backend::ExternalFile(path) => {
            let y: MomentVector<f64> = import_moments(path)?;
            if y.num_vars() != p.num_vars {
                return Err(Error::Dimension {
                    expected: p.num_vars,
                    actual: y.num_vars(),
                });
            }
            let values = p.free_values(&y)?;
            let objective = p.objective_value(&values);
            let diagnostics = admm::external_diagnostics(p, &values);
            Ok(SdpSolution {
                moments: y,
                objective,
                diagnostics,
            })
        }
    }
}

pub fn export_moments<T: Scalar>(y: &MomentVector<T>, path: &Path) -> Result<()> {
    std::fs::write(path, format_moments(y))?;
    Ok(())
}

/// Reads a moment file and checks the domain is complete for its level.
pub fn import_moments<T: Scalar>(path: &Path) -> Result<MomentVector<T>> {
    parse_moments(&std::fs::read_to_string(path)?)
}

/// Exact objective `Σ c_i y_{{i}}` of a rational moment vector.
pub fn exact_objective(cs: &ConstraintSystem, y: &MomentVector<Rational>) -> Result<Rational> {
    y.linear_value(&cs.objective)
}
