use serde::Serialize;

use super::matrix::{moment_matrix, shifted_matrix};
use super::{sets_up_to, IndexSet, MomentVector};
use crate::error::{Error, Result};
use crate::flow_lp::ConstraintSystem;
use crate::scalar::Scalar;

const LISTED: usize = 20;
const SPOT_PAIRS: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockReport {
    pub label: String,
    pub dim: usize,
    pub psd: bool,
    pub min_value: f64,
}

/// Everything [`certify`] checked. Violations are listed up to a cap and
/// always counted.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifyReport {
    pub level: usize,
    pub exact: bool,
    pub tol: f64,
    /// Entries the vector stores, and the largest `|I|` the certificate reads.
    pub stored_entries: usize,
    pub certified_max_size: usize,
    pub normalized: bool,
    pub empty_value: f64,
    pub moment_block: BlockReport,
    pub constraint_blocks: usize,
    pub min_constraint_value: f64,
    pub constraint_failures: Vec<BlockReport>,
    pub monotonicity_violations: usize,
    pub monotonicity_examples: Vec<String>,
    pub one_implies_violations: usize,
    pub one_implies_examples: Vec<String>,
}

impl CertifyReport {
    pub fn is_clean(&self) -> bool {
        self.normalized
            && self.moment_block.psd
            && self.constraint_failures.is_empty()
            && self.monotonicity_violations == 0
            && self.one_implies_violations == 0
    }
}

/// Checks membership of `y` in level `t` of the lift of `cs`: `y_∅ = 1`,
/// `M_{t+1}(y) ⪰ 0`, `M_t((a; β) ∗ y) ⪰ 0` per row, plus the monotonicity
/// chain `0 <= y_I <= y_J <= 1` (`J ⊆ I`, `|I| <= t`) and spot checks of
/// `y_I = 1 ⇒ y_{I ∪ J} = y_J`.
pub fn certify<T: Scalar>(
    y: &MomentVector<T>,
    cs: &ConstraintSystem,
    t: usize,
    tol: f64,
) -> Result<CertifyReport> {
    let n = cs.num_vars();
    if y.num_vars() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: y.num_vars(),
        });
    }
    let one = T::one();
    let empty = y.mass()?.clone();
    let normalized = empty.eq_tol(&one, tol);

    let m = moment_matrix(y, t + 1)?;
    let out = m.psd(tol);
    let moment_block = BlockReport {
        label: "moment".into(),
        dim: m.dim(),
        psd: out.psd,
        min_value: out.min_value,
    };

    let mut constraint_failures = Vec::new();
    let mut min_constraint_value = f64::INFINITY;
    for row in &cs.constraints {
        let m = shifted_matrix(y, &row.coeffs, &row.rhs, t)?;
        let out = m.psd(tol);
        min_constraint_value = min_constraint_value.min(out.min_value);
        if !out.psd {
            constraint_failures.push(BlockReport {
                label: row.label.clone(),
                dim: m.dim(),
                psd: false,
                min_value: out.min_value,
            });
        }
    }
    if cs.constraints.is_empty() {
        min_constraint_value = 0.0;
    }

    let small = sets_up_to(n, t);
    let zero = T::zero();
    let mut monotonicity_violations = 0;
    let mut monotonicity_examples = Vec::new();
    let flag = |msg: String, count: &mut usize, list: &mut Vec<String>| {
        *count += 1;
        if list.len() < LISTED {
            list.push(msg);
        }
    };
    for set in &small {
        let v = y.get(set)?;
        if !zero.le_tol(v, tol) || !v.le_tol(&one, tol) {
            flag(
                format!("y{set} = {} outside [0, 1]", v.format_value()),
                &mut monotonicity_violations,
                &mut monotonicity_examples,
            );
        }
        for i in set.iter() {
            let sub = set.minus(&IndexSet::singleton(i));
            let w = y.get(&sub)?;
            if !v.le_tol(w, tol) {
                flag(
                    format!(
                        "y{set} = {} > y{sub} = {}",
                        v.format_value(),
                        w.format_value()
                    ),
                    &mut monotonicity_violations,
                    &mut monotonicity_examples,
                );
            }
        }
    }

    let mut one_implies_violations = 0;
    let mut one_implies_examples = Vec::new();
    let mut pairs = 0;
    'outer: for i_set in small.iter().filter(|s| !s.is_empty()) {
        if !y.get(i_set)?.eq_tol(&one, tol) {
            continue;
        }
        for j_set in &small {
            if pairs >= SPOT_PAIRS {
                break 'outer;
            }
            pairs += 1;
            let joint = y.get(&i_set.union(j_set))?;
            let alone = y.get(j_set)?;
            if !joint.eq_tol(alone, tol) {
                flag(
                    format!(
                        "y{i_set} = 1 but y{} = {} != y{j_set} = {}",
                        i_set.union(j_set),
                        joint.format_value(),
                        alone.format_value()
                    ),
                    &mut one_implies_violations,
                    &mut one_implies_examples,
                );
            }
        }
    }

    Ok(CertifyReport {
        level: t,
        exact: T::EXACT,
        tol,
        stored_entries: y.len(),
        certified_max_size: (2 * t + 2).min(n),
        normalized,
        empty_value: empty.to_f64(),
        moment_block,
        constraint_blocks: cs.constraints.len(),
        min_constraint_value,
        constraint_failures,
        monotonicity_violations,
        monotonicity_examples,
        one_implies_violations,
        one_implies_examples,
    })
}
