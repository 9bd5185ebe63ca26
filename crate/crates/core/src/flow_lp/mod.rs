//! The flow LP over a layered instance, stored as an explicit `a^T x >= β`
//! system, with an exact rational simplex and a plain-text dump format.
//!
//! Variable ordinals are frozen: edge variables `y_e` come first in edge-id
//! order (ordinal `e`), followed by flow variables `f_{s,e}` in
//! (terminal, edge) lexicographic order (ordinal `|E| + k·|E| + e` for the
//! `k`-th terminal). Moment files and index sets refer to these ordinals.
//!
//! Row order: flow conservation for every (terminal, node) as two opposite
//! inequalities, capacities `y_e - f_{s,e} >= 0`, in-degree bounds
//! `-y(δ⁻(v)) >= -1`, then the box `x_i >= 0` and `-x_i >= -1` for each
//! variable.

mod simplex;

use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{DstInstance, EdgeId, LayeredInstance};
use crate::scalar::{format_rational, parse_rational, Rational};

pub use simplex::{is_feasible, solve_lp, LpSolution, LpStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum VarKind {
    Edge(EdgeId),
    /// `terminal` indexes the layered instance's sorted terminal list.
    Flow {
        terminal: usize,
        edge: EdgeId,
    },
}

/// Dense ordinal layout of the LP variables for one layered graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarLayout {
    pub num_edges: usize,
    pub num_terminals: usize,
}

impl VarLayout {
    pub fn for_instance(inst: &DstInstance) -> Self {
        VarLayout {
            num_edges: inst.num_edges(),
            num_terminals: inst.terminals().len(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_edges * (1 + self.num_terminals)
    }

    pub fn edge_var(&self, e: EdgeId) -> usize {
        e
    }

    pub fn flow_var(&self, terminal: usize, e: EdgeId) -> usize {
        self.num_edges * (1 + terminal) + e
    }

    pub fn kind(&self, ordinal: usize) -> VarKind {
        if ordinal < self.num_edges {
            VarKind::Edge(ordinal)
        } else {
            let k = ordinal / self.num_edges - 1;
            VarKind::Flow {
                terminal: k,
                edge: ordinal % self.num_edges,
            }
        }
    }
}

/// One row `Σ a_i x_i >= rhs`, coefficients sparse and sorted by ordinal.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub coeffs: Vec<(usize, Rational)>,
    pub rhs: Rational,
}

impl Constraint {
    pub fn new(
        label: impl Into<String>,
        mut coeffs: Vec<(usize, Rational)>,
        rhs: Rational,
    ) -> Self {
        coeffs.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, Rational)> = Vec::with_capacity(coeffs.len());
        for (i, a) in coeffs {
            match merged.last_mut() {
                Some((j, b)) if *j == i => *b += a,
                _ => merged.push((i, a)),
            }
        }
        merged.retain(|(_, a)| !a.is_zero());
        Constraint {
            label: label.into(),
            coeffs: merged,
            rhs,
        }
    }

    /// `a^T x - rhs`.
    pub fn slack(&self, x: &[Rational]) -> Rational {
        self.coeffs
            .iter()
            .fold(-self.rhs.clone(), |acc, (i, a)| acc + a * &x[*i])
    }

    pub fn dense(&self, n: usize) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); n];
        for (i, a) in &self.coeffs {
            out[*i] = a.clone();
        }
        out
    }
}

/// `K = {x : a_r^T x >= β_r for every row r}` with a linear objective to minimize.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSystem {
    pub var_names: Vec<String>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<Rational>,
}

impl ConstraintSystem {
    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        self.objective
            .iter()
            .zip(x)
            .fold(Rational::zero(), |acc, (c, v)| acc + c * v)
    }

    /// Copy of the system with `x_i >= 1` appended for every `i` in `ones`.
    pub fn with_fixed_ones(&self, ones: &[usize]) -> ConstraintSystem {
        let mut cs = self.clone();
        for &i in ones {
            cs.constraints.push(Constraint::new(
                format!("fix[{}]", self.var_names[i]),
                vec![(i, Rational::one())],
                Rational::one(),
            ));
        }
        cs
    }

    /// Writes the plain-text dump:
    ///
    /// ```text
    /// lpdump <num_vars> <num_rows>
    /// var <ordinal> <name>
    /// obj <i>:<c> ...
    /// row <label> <rhs> <i>:<a> ...
    /// ```
    ///
    /// Every row means `Σ a_i x_i >= rhs`; coefficients are exact rationals.
    pub fn to_lpdump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lpdump {} {}", self.num_vars(), self.constraints.len());
        for (i, name) in self.var_names.iter().enumerate() {
            let _ = writeln!(out, "var {i} {name}");
        }
        out.push_str("obj");
        for (i, c) in self.objective.iter().enumerate() {
            if !c.is_zero() {
                let _ = write!(out, " {i}:{}", format_rational(c));
            }
        }
        out.push('\n');
        for row in &self.constraints {
            let _ = write!(out, "row {} {}", row.label, format_rational(&row.rhs));
            for (i, a) in &row.coeffs {
                let _ = write!(out, " {i}:{}", format_rational(a));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_lpdump(text: &str) -> Result<ConstraintSystem> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::syntax(1, "empty lpdump"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 || h[0] != "lpdump" {
            return Err(Error::syntax(
                hline,
                "expected `lpdump <num_vars> <num_rows>`",
            ));
        }
        let n: usize = h[1]
            .parse()
            .map_err(|_| Error::syntax(hline, "bad variable count"))?;
        let m: usize = h[2]
            .parse()
            .map_err(|_| Error::syntax(hline, "bad row count"))?;
        let mut var_names: Vec<Option<String>> = vec![None; n];
        let mut objective = vec![Rational::zero(); n];
        let mut constraints = Vec::with_capacity(m);
        let parse_terms = |line: usize, terms: &[&str]| -> Result<Vec<(usize, Rational)>> {
            terms
                .iter()
                .map(|t| {
                    let (i, a) = t
                        .split_once(':')
                        .ok_or_else(|| Error::syntax(line, format!("bad term {t:?}")))?;
                    let i: usize = i
                        .parse()
                        .map_err(|_| Error::syntax(line, format!("bad ordinal {i:?}")))?;
                    if i >= n {
                        return Err(Error::syntax(line, format!("ordinal {i} out of range")));
                    }
                    let a = parse_rational(a)
                        .map_err(|_| Error::syntax(line, format!("bad coefficient {a:?}")))?;
                    Ok((i, a))
                })
                .collect()
        };
        for (line, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            match f[0] {
                "var" if f.len() == 3 => {
                    let i: usize = f[1]
                        .parse()
                        .map_err(|_| Error::syntax(line, "bad ordinal"))?;
                    if i >= n {
                        return Err(Error::syntax(line, "ordinal out of range"));
                    }
                    var_names[i] = Some(f[2].to_string());
                }
                "obj" => {
                    for (i, c) in parse_terms(line, &f[1..])? {
                        objective[i] = c;
                    }
                }
                "row" if f.len() >= 3 => {
                    let rhs = parse_rational(f[2]).map_err(|_| Error::syntax(line, "bad rhs"))?;
                    constraints.push(Constraint::new(f[1], parse_terms(line, &f[3..])?, rhs));
                }
                _ => return Err(Error::syntax(line, format!("unrecognized line {l:?}"))),
            }
        }
        if constraints.len() != m {
            return Err(Error::syntax(
                hline,
                format!("header declares {m} rows, found {}", constraints.len()),
            ));
        }
        let var_names = var_names
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.unwrap_or_else(|| format!("x{i}")))
            .collect();
        Ok(ConstraintSystem {
            var_names,
            constraints,
            objective,
        })
    }
}

/// Builds the flow LP of a layered instance.
pub fn build_flow_lp(li: &LayeredInstance) -> ConstraintSystem {
    build_flow_lp_for(li.graph())
}

/// Same LP for any instance graph; used by the exact checks on base graphs.
pub fn build_flow_lp_for(g: &DstInstance) -> ConstraintSystem {
    let layout = VarLayout::for_instance(g);
    let n = layout.num_vars();
    let one = Rational::one();
    let mut var_names = Vec::with_capacity(n);
    for e in 0..g.num_edges() {
        var_names.push(format!("y[{}]", g.edge_label(e)));
    }
    for &s in g.terminals() {
        for e in 0..g.num_edges() {
            var_names.push(format!("f[{},{}]", g.name(s), g.edge_label(e)));
        }
    }

    let mut rows = Vec::new();
    for (k, &s) in g.terminals().iter().enumerate() {
        for v in 0..g.num_nodes() {
            let mut coeffs = Vec::new();
            for &e in g.out_edges(v) {
                coeffs.push((layout.flow_var(k, e), one.clone()));
            }
            for &e in g.in_edges(v) {
                coeffs.push((layout.flow_var(k, e), -one.clone()));
            }
            let rhs = if v == g.root() {
                one.clone()
            } else if v == s {
                -one.clone()
            } else {
                Rational::zero()
            };
            let neg: Vec<_> = coeffs.iter().map(|(i, a)| (*i, -a.clone())).collect();
            let tag = format!("{},{}", g.name(s), g.name(v));
            rows.push(Constraint::new(
                format!("flow+[{tag}]"),
                coeffs,
                rhs.clone(),
            ));
            rows.push(Constraint::new(format!("flow-[{tag}]"), neg, -rhs));
        }
    }
    for (k, &s) in g.terminals().iter().enumerate() {
        for e in 0..g.num_edges() {
            rows.push(Constraint::new(
                format!("cap[{},{}]", g.name(s), g.edge_label(e)),
                vec![
                    (layout.edge_var(e), one.clone()),
                    (layout.flow_var(k, e), -one.clone()),
                ],
                Rational::zero(),
            ));
        }
    }
    for v in 0..g.num_nodes() {
        let coeffs = g
            .in_edges(v)
            .iter()
            .map(|&e| (layout.edge_var(e), -one.clone()))
            .collect();
        rows.push(Constraint::new(
            format!("indeg[{}]", g.name(v)),
            coeffs,
            -one.clone(),
        ));
    }
    for i in 0..n {
        rows.push(Constraint::new(
            format!("lo[{i}]"),
            vec![(i, one.clone())],
            Rational::zero(),
        ));
        rows.push(Constraint::new(
            format!("hi[{i}]"),
            vec![(i, -one.clone())],
            -one.clone(),
        ));
    }

    let mut objective = vec![Rational::zero(); n];
    for (e, edge) in g.edges().iter().enumerate() {
        objective[layout.edge_var(e)] = edge.cost.clone();
    }
    ConstraintSystem {
        var_names,
        constraints: rows,
        objective,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub row: usize,
    pub label: String,
    /// `a^T x - β`, negative for a violated row.
    #[serde(with = "crate::scalar::serde_rational")]
    pub slack: Rational,
}

/// Lists every violated row. Empty iff `x ∈ K`.
pub fn check_point(cs: &ConstraintSystem, x: &[Rational]) -> Result<Vec<Violation>> {
    if x.len() != cs.num_vars() {
        return Err(Error::Dimension {
            expected: cs.num_vars(),
            actual: x.len(),
        });
    }
    Ok(cs
        .constraints
        .iter()
        .enumerate()
        .filter_map(|(row, c)| {
            let slack = c.slack(x);
            slack.is_negative().then(|| Violation {
                row,
                label: c.label.clone(),
                slack,
            })
        })
        .collect())
}

/// The 0/1 point of `K` induced by an edge set that contains, for every
/// terminal, exactly one root-terminal path: `y_e = 1` on the set and
/// `f_{s,e} = 1` along that path. `None` when a terminal has no path or the
/// path is not unique.
pub fn integral_point(g: &DstInstance, edges: &[EdgeId]) -> Option<Vec<bool>> {
    let layout = VarLayout::for_instance(g);
    let mut x = vec![false; layout.num_vars()];
    let mut chosen = vec![false; g.num_edges()];
    for &e in edges {
        chosen[e] = true;
        x[layout.edge_var(e)] = true;
    }
    for (k, &s) in g.terminals().iter().enumerate() {
        // Walk back from s; the path is unique only if in-degrees along it are 1.
        let mut cur = s;
        let mut steps = 0;
        while cur != g.root() {
            let incoming: Vec<EdgeId> = g
                .in_edges(cur)
                .iter()
                .copied()
                .filter(|&e| chosen[e])
                .collect();
            if incoming.len() != 1 || steps > g.num_nodes() {
                return None;
            }
            x[layout.flow_var(k, incoming[0])] = true;
            cur = g.edge(incoming[0]).tail;
            steps += 1;
        }
    }
    Some(x)
}

pub fn bools_to_rationals(x: &[bool]) -> Vec<Rational> {
    x.iter()
        .map(|&b| if b { Rational::one() } else { Rational::zero() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::{int, rat};

    fn layered(inst: DstInstance) -> LayeredInstance {
        LayeredInstance::detect(inst).unwrap()
    }

    #[test]
    fn ordinals_are_canonical() {
        let layout = VarLayout {
            num_edges: 3,
            num_terminals: 2,
        };
        assert_eq!(layout.num_vars(), 9);
        assert_eq!(layout.flow_var(1, 2), 8);
        assert_eq!(
            layout.kind(4),
            VarKind::Flow {
                terminal: 0,
                edge: 1
            }
        );
        assert_eq!(layout.kind(2), VarKind::Edge(2));
        for i in 0..9 {
            let back = match layout.kind(i) {
                VarKind::Edge(e) => layout.edge_var(e),
                VarKind::Flow { terminal, edge } => layout.flow_var(terminal, edge),
            };
            assert_eq!(back, i);
        }
    }

    #[test]
    fn single_edge_system_shape() {
        let cs = build_flow_lp(&layered(fixtures::single_edge(5)));
        assert_eq!(cs.num_vars(), 2);
        // 2 nodes x 2 directions, 1 capacity, 2 in-degree, 4 box rows.
        assert_eq!(cs.constraints.len(), 4 + 1 + 2 + 4);
        assert_eq!(cs.objective, vec![int(5), int(0)]);
        assert!(check_point(&cs, &[int(1), int(1)]).unwrap().is_empty());
        assert!(!check_point(&cs, &[rat(1, 2), int(1)]).unwrap().is_empty());
    }

    #[test]
    fn figure_one_optimum_is_feasible() {
        let li = layered(fixtures::figure_one());
        let cs = build_flow_lp(&li);
        let black = fixtures::figure_one_optimum(li.graph());
        let x = integral_point(li.graph(), &black).unwrap();
        let x = bools_to_rationals(&x);
        assert!(check_point(&cs, &x).unwrap().is_empty());
        assert_eq!(cs.objective_value(&x), int(19));
    }

    #[test]
    fn zero_vector_violates_conservation() {
        let cs = build_flow_lp(&layered(fixtures::figure_one()));
        let v = check_point(&cs, &vec![int(0); cs.num_vars()]).unwrap();
        assert!(v.iter().any(|v| v.label.starts_with("flow")));
        assert!(matches!(
            check_point(&cs, &[int(0)]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn half_split_over_two_routes_is_feasible() {
        let li = layered(fixtures::two_routes());
        let g = li.graph();
        let cs = build_flow_lp(&li);
        let layout = VarLayout::for_instance(g);
        let mut x = vec![int(0); cs.num_vars()];
        for e in 0..g.num_edges() {
            x[layout.edge_var(e)] = rat(1, 2);
            x[layout.flow_var(0, e)] = rat(1, 2);
        }
        assert!(check_point(&cs, &x).unwrap().is_empty());
    }

    #[test]
    fn lpdump_round_trips() {
        let cs = build_flow_lp(&layered(fixtures::figure_one()));
        let text = cs.to_lpdump();
        let back = ConstraintSystem::from_lpdump(&text).unwrap();
        assert_eq!(back, cs);
        assert!(ConstraintSystem::from_lpdump("lpdump 1 1\nrow a 0 3:1\n").is_err());
        assert!(ConstraintSystem::from_lpdump("lpdump 1 2\nrow a 0 0:1\n").is_err());
    }

    #[test]
    fn integral_point_requires_unique_paths() {
        let li = layered(fixtures::two_routes());
        let g = li.graph();
        let all: Vec<EdgeId> = (0..g.num_edges()).collect();
        assert!(integral_point(g, &all).is_none());
        assert!(integral_point(g, &[]).is_none());
    }
}
