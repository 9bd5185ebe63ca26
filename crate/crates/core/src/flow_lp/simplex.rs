//! Dense two-phase primal simplex over exact rationals with Bland's rule.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::ConstraintSystem;
use crate::scalar::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// One value per variable ordinal; all zero unless optimal.
    pub values: Vec<Rational>,
    pub objective: Rational,
    pub pivots: usize,
}

/// Standard form `min c^T z, A z = b, z >= 0, b >= 0` with a record of how
/// the original variables map onto columns.
struct StandardForm {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    cost: Vec<Rational>,
    /// Initial basic column per row, or `None` when an artificial is needed.
    unit: Vec<Option<usize>>,
    pos_col: Vec<usize>,
    neg_col: Vec<Option<usize>>,
}

fn standard_form(cs: &ConstraintSystem) -> StandardForm {
    let n = cs.num_vars();
    let mut nonneg = vec![false; n];
    let mut is_bound_row = vec![false; cs.constraints.len()];
    for (r, c) in cs.constraints.iter().enumerate() {
        if c.coeffs.len() == 1 && c.coeffs[0].1.is_positive() && c.rhs.is_zero() {
            nonneg[c.coeffs[0].0] = true;
            is_bound_row[r] = true;
        }
    }

    let mut ncols = 0;
    let mut pos_col = Vec::with_capacity(n);
    let mut neg_col = Vec::with_capacity(n);
    for &nn in &nonneg {
        pos_col.push(ncols);
        ncols += 1;
        if nn {
            neg_col.push(None);
        } else {
            neg_col.push(Some(ncols));
            ncols += 1;
        }
    }

    // Pair rows a >= b with -a >= -b into equalities.
    type Key = (Vec<(usize, Rational)>, Rational);
    let mut by_key: HashMap<Key, Vec<usize>> = HashMap::new();
    for (r, c) in cs.constraints.iter().enumerate() {
        if !is_bound_row[r] {
            by_key
                .entry((c.coeffs.clone(), c.rhs.clone()))
                .or_default()
                .push(r);
        }
    }
    let mut used = vec![false; cs.constraints.len()];
    let mut logical: Vec<(usize, bool)> = Vec::new(); // (row, is_equality)
    for (r, c) in cs.constraints.iter().enumerate() {
        if is_bound_row[r] || used[r] {
            continue;
        }
        used[r] = true;
        let neg_key: Key = (
            c.coeffs.iter().map(|(i, a)| (*i, -a.clone())).collect(),
            -c.rhs.clone(),
        );
        let partner = by_key
            .get(&neg_key)
            .and_then(|rs| rs.iter().copied().find(|&q| !used[q]));
        match partner {
            Some(q) => {
                used[q] = true;
                logical.push((r, true));
            }
            None => logical.push((r, false)),
        }
    }

    let num_slacks = logical.iter().filter(|(_, eq)| !eq).count();
    let total = ncols + num_slacks;
    let mut rows = Vec::with_capacity(logical.len());
    let mut rhs = Vec::with_capacity(logical.len());
    let mut unit = Vec::with_capacity(logical.len());
    let mut next_slack = ncols;
    for &(r, eq) in &logical {
        let c = &cs.constraints[r];
        let mut row = vec![Rational::zero(); total];
        for (i, a) in &c.coeffs {
            row[pos_col[*i]] = a.clone();
            if let Some(nc) = neg_col[*i] {
                row[nc] = -a.clone();
            }
        }
        let mut b = c.rhs.clone();
        let mut slack = None;
        if !eq {
            row[next_slack] = -Rational::one();
            slack = Some(next_slack);
            next_slack += 1;
        }
        if b.is_negative() {
            for v in row.iter_mut() {
                *v = -v.clone();
            }
            b = -b;
        }
        let basic = slack.filter(|&s| row[s].is_one());
        rows.push(row);
        rhs.push(b);
        unit.push(basic);
    }

    let mut cost = vec![Rational::zero(); total];
    for (i, c) in cs.objective.iter().enumerate() {
        cost[pos_col[i]] = c.clone();
        if let Some(nc) = neg_col[i] {
            cost[nc] = -c.clone();
        }
    }
    StandardForm {
        rows,
        rhs,
        cost,
        unit,
        pos_col,
        neg_col,
    }
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    reduced: Vec<Rational>,
    value: Rational,
    allowed: Vec<bool>,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, p: usize, j: usize) {
        self.pivots += 1;
        let inv = Rational::one() / &self.rows[p][j];
        let support: Vec<usize> = (0..self.rows[p].len())
            .filter(|&k| !self.rows[p][k].is_zero())
            .collect();
        for &k in &support {
            self.rows[p][k] = &self.rows[p][k] * &inv;
        }
        self.rhs[p] = &self.rhs[p] * &inv;
        let prow = std::mem::take(&mut self.rows[p]);
        let prhs = self.rhs[p].clone();
        for i in 0..self.rows.len() {
            if i == p || self.rows[i][j].is_zero() {
                continue;
            }
            let f = self.rows[i][j].clone();
            for &k in &support {
                let d = &f * &prow[k];
                self.rows[i][k] -= d;
            }
            self.rhs[i] -= &f * &prhs;
        }
        if !self.reduced[j].is_zero() {
            let f = self.reduced[j].clone();
            for &k in &support {
                let d = &f * &prow[k];
                self.reduced[k] -= d;
            }
            self.value += &f * &prhs;
        }
        self.rows[p] = prow;
        self.basis[p] = j;
    }

    /// Bland's rule: lowest-index improving column, ties in the ratio test
    /// broken by lowest basic index.
    fn run(&mut self) -> Outcome {
        loop {
            let entering =
                (0..self.reduced.len()).find(|&j| self.allowed[j] && self.reduced[j].is_negative());
            let Some(j) = entering else {
                return Outcome::Optimal;
            };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][j];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((p, _)) => self.pivot(p, j),
                None => return Outcome::Unbounded,
            }
        }
    }

    fn set_costs(&mut self, cost: &[Rational]) {
        self.reduced = cost.to_vec();
        self.value = Rational::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (k, a) in self.rows[i].iter().enumerate() {
                if !a.is_zero() {
                    self.reduced[k] -= cb * a;
                }
            }
            self.value += cb * &self.rhs[i];
        }
    }
}

/// Solves `min c^T x` over `K` exactly.
///
/// Single-variable rows `a x_i >= 0` with `a > 0` become sign constraints;
/// every other variable is split into a difference of nonnegative parts.
/// Opposite row pairs are merged into equalities.
pub fn solve_lp(cs: &ConstraintSystem) -> LpSolution {
    let sf = standard_form(cs);
    let m = sf.rows.len();
    let base_cols = sf.cost.len();
    let artificial: Vec<usize> = (0..m).filter(|&i| sf.unit[i].is_none()).collect();
    let total = base_cols + artificial.len();

    let mut rows = sf.rows;
    let mut basis = vec![0; m];
    for row in rows.iter_mut() {
        row.resize(total, Rational::zero());
    }
    for (k, &i) in artificial.iter().enumerate() {
        rows[i][base_cols + k] = Rational::one();
    }
    for i in 0..m {
        basis[i] = match sf.unit[i] {
            Some(c) => c,
            None => base_cols + artificial.iter().position(|&a| a == i).unwrap_or(0),
        };
    }
    let mut t = Tableau {
        rows,
        rhs: sf.rhs,
        basis,
        reduced: Vec::new(),
        value: Rational::zero(),
        allowed: vec![true; total],
        pivots: 0,
    };

    let n = cs.num_vars();
    let empty = |status, pivots| LpSolution {
        status,
        values: vec![Rational::zero(); n],
        objective: Rational::zero(),
        pivots,
    };

    if !artificial.is_empty() {
        let mut phase1 = vec![Rational::zero(); total];
        for c in phase1.iter_mut().skip(base_cols) {
            *c = Rational::one();
        }
        t.set_costs(&phase1);
        t.run();
        if t.value.is_positive() {
            return empty(LpStatus::Infeasible, t.pivots);
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= base_cols {
                match (0..base_cols).find(|&j| !t.rows[i][j].is_zero()) {
                    Some(j) => t.pivot(i, j),
                    None => {
                        t.rows.remove(i);
                        t.rhs.remove(i);
                        t.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for a in t.allowed.iter_mut().skip(base_cols) {
            *a = false;
        }
    }

    let mut cost = sf.cost;
    cost.resize(total, Rational::zero());
    t.set_costs(&cost);
    if let Outcome::Unbounded = t.run() {
        return empty(LpStatus::Unbounded, t.pivots);
    }

    let mut z = vec![Rational::zero(); total];
    for (i, &b) in t.basis.iter().enumerate() {
        z[b] = t.rhs[i].clone();
    }
    let values: Vec<Rational> = (0..n)
        .map(|i| {
            let p = z[sf.pos_col[i]].clone();
            match sf.neg_col[i] {
                Some(nc) => p - &z[nc],
                None => p,
            }
        })
        .collect();
    let objective = cs.objective_value(&values);
    LpSolution {
        status: LpStatus::Optimal,
        values,
        objective,
        pivots: t.pivots,
    }
}

/// Whether `K` is nonempty.
pub fn is_feasible(cs: &ConstraintSystem) -> bool {
    let mut probe = cs.clone();
    probe.objective = vec![Rational::zero(); cs.num_vars()];
    solve_lp(&probe).status == LpStatus::Optimal
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::flow_lp::{build_flow_lp, check_point, Constraint};
    use crate::instance::LayeredInstance;
    use crate::scalar::{int, rat};

    fn system(n: usize, rows: Vec<Constraint>, obj: Vec<Rational>) -> ConstraintSystem {
        ConstraintSystem {
            var_names: (0..n).map(|i| format!("x{i}")).collect(),
            constraints: rows,
            objective: obj,
        }
    }

    #[test]
    fn textbook_lp() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0  -> (8/5, 6/5)
        let cs = system(
            2,
            vec![
                Constraint::new("a", vec![(0, int(-1)), (1, int(-2))], int(-4)),
                Constraint::new("b", vec![(0, int(-3)), (1, int(-1))], int(-6)),
                Constraint::new("x", vec![(0, int(1))], int(0)),
                Constraint::new("y", vec![(1, int(1))], int(0)),
            ],
            vec![int(-1), int(-1)],
        );
        let sol = solve_lp(&cs);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.values, vec![rat(8, 5), rat(6, 5)]);
        assert_eq!(sol.objective, rat(-14, 5));
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x s.t. x = y - 3, y >= 1 (x free) -> x = -2
        let cs = system(
            2,
            vec![
                Constraint::new("e+", vec![(0, int(1)), (1, int(-1))], int(-3)),
                Constraint::new("e-", vec![(0, int(-1)), (1, int(1))], int(3)),
                Constraint::new("y", vec![(1, int(1))], int(1)),
            ],
            vec![int(1), int(0)],
        );
        let sol = solve_lp(&cs);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.values[0], int(-2));
    }

    #[test]
    fn detects_unbounded_and_infeasible() {
        let unbounded = system(
            1,
            vec![Constraint::new("x", vec![(0, int(1))], int(0))],
            vec![int(-1)],
        );
        assert_eq!(solve_lp(&unbounded).status, LpStatus::Unbounded);
        let infeasible = system(
            1,
            vec![
                Constraint::new("lo", vec![(0, int(1))], int(2)),
                Constraint::new("hi", vec![(0, int(-1))], int(-1)),
            ],
            vec![int(0)],
        );
        assert_eq!(solve_lp(&infeasible).status, LpStatus::Infeasible);
        assert!(!is_feasible(&infeasible));
    }

    #[test]
    fn single_edge_lp_value_is_cost() {
        let li = LayeredInstance::detect(fixtures::single_edge(5)).unwrap();
        let sol = solve_lp(&build_flow_lp(&li));
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective, int(5));
        assert_eq!(sol.values, vec![int(1), int(1)]);
    }

    #[test]
    fn figure_one_lp_value() {
        let li = LayeredInstance::detect(fixtures::figure_one()).unwrap();
        let cs = build_flow_lp(&li);
        let sol = solve_lp(&cs);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(check_point(&cs, &sol.values).unwrap().is_empty());
        assert!(sol.objective <= int(19));
        // Regression value from the exact solve.
        assert_eq!(sol.objective, int(19));
    }

    #[test]
    fn two_routes_lp_is_integral() {
        let li = LayeredInstance::detect(fixtures::two_routes()).unwrap();
        let sol = solve_lp(&build_flow_lp(&li));
        assert_eq!(sol.objective, int(2));
    }

    #[test]
    fn terminal_without_in_edges_is_infeasible() {
        // Row set of a two-node instance with the only edge removed.
        let li = LayeredInstance::detect(fixtures::single_edge(5)).unwrap();
        let mut cs = build_flow_lp(&li);
        cs.constraints
            .push(Constraint::new("cut", vec![(0, int(-1))], int(0)));
        assert_eq!(solve_lp(&cs).status, LpStatus::Infeasible);
    }
}
