//! Built-in solver: ADMM on `min c^T y` subject to `A_k(y) = Z_k`, `Z_k ⪰ 0`,
//! with every `A_k` affine.
//!
//! Matrices are vectorized with off-diagonal slots weighted by `√2` so that
//! Euclidean norms equal Frobenius norms. The `y`-update solves normal
//! equations whose matrix `Σ L_k^T L_k` does not depend on the penalty, so it
//! is factored once. The `Z`-update clips negative eigenvalues block by
//! block. A constraint stored as two opposite rows lifts to a pair of blocks
//! `M ⪰ 0`, `−M ⪰ 0`, i.e. `M = 0`; such pairs are recognised and enforced as
//! plain linear equations (one per distinct entry), which keeps the problem
//! from losing its interior. With `Λ = −ρU` (always PSD after the projection) the solver reports
//! a dual bound valid for every feasible point, all of whose moments lie in
//! `[-1, 1]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use std::collections::HashSet;

use super::{Block, SdpProblem, SdpSolution, SolverConfig};
use crate::error::{Error, Result};

const CHECK_EVERY: usize = 10;
const ADAPT_EVERY: usize = 100;
const ADAPT_RATIO: f64 = 10.0;
const MAX_ADAPTATIONS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub backend: String,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub dual_bound: f64,
    pub gap: f64,
    pub rho: f64,
    /// Worst block eigenvalue relative to `max(1, max|entry|)`.
    pub min_eigenvalue: f64,
    pub free_vars: usize,
    pub blocks: usize,
}

struct Row {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

struct Layout {
    rows: Vec<Row>,
    /// `(first row, dim)` per PSD block; block rows follow the slot order.
    blocks: Vec<(usize, usize)>,
    /// Rows from here on must vanish.
    zero_start: usize,
}

fn negates(a: &Block, b: &Block) -> bool {
    a.index == b.index
        && a.slots.iter().zip(&b.slots).all(|(x, y)| {
            x.constant == -y.constant
                && x.terms.len() == y.terms.len()
                && x.terms
                    .iter()
                    .zip(&y.terms)
                    .all(|(p, q)| p.0 == q.0 && p.1 == -q.1)
        })
}

type RowKey = (u64, Vec<(usize, u64)>);

impl Layout {
    fn new(p: &SdpProblem) -> Self {
        // Pair each block with a later block that is its negation.
        let mut partner: Vec<Option<usize>> = vec![None; p.blocks.len()];
        for i in 0..p.blocks.len() {
            if partner[i].is_some() {
                continue;
            }
            for j in i + 1..p.blocks.len() {
                if partner[j].is_none() && negates(&p.blocks[i], &p.blocks[j]) {
                    partner[i] = Some(j);
                    partner[j] = Some(i);
                    break;
                }
            }
        }

        let mut rows = Vec::new();
        let mut blocks = Vec::with_capacity(p.blocks.len());
        for (b, pair) in p.blocks.iter().zip(&partner) {
            if pair.is_some() {
                continue;
            }
            blocks.push((rows.len(), b.dim()));
            for s in &b.slots {
                let w = if s.row == s.col {
                    1.0
                } else {
                    std::f64::consts::SQRT_2
                };
                rows.push(Row {
                    terms: s.terms.iter().map(|&(j, a)| (j, w * a)).collect(),
                    constant: w * s.constant,
                });
            }
        }
        let zero_start = rows.len();
        let mut seen: HashSet<RowKey> = HashSet::new();
        for (i, b) in p.blocks.iter().enumerate() {
            if !matches!(partner[i], Some(j) if j > i) {
                continue;
            }
            for s in &b.slots {
                if s.terms.is_empty() && s.constant == 0.0 {
                    continue;
                }
                let key = (
                    s.constant.to_bits(),
                    s.terms.iter().map(|&(j, a)| (j, a.to_bits())).collect(),
                );
                if seen.insert(key) {
                    rows.push(Row {
                        terms: s.terms.clone(),
                        constant: s.constant,
                    });
                }
            }
        }
        Layout {
            rows,
            blocks,
            zero_start,
        }
    }

    /// Projects onto the product of PSD cones and the zero cone, in place.
    fn project_all(&self, v: &mut [f64]) {
        for &(start, dim) in &self.blocks {
            project(&mut v[start..start + dim * (dim + 1) / 2], dim);
        }
        v[self.zero_start..].iter_mut().for_each(|x| *x = 0.0);
    }

    /// `L y + g`.
    fn apply(&self, y: &DVector<f64>) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.constant + r.terms.iter().map(|&(j, a)| a * y[j]).sum::<f64>())
            .collect()
    }

    /// `L^T x`.
    fn adjoint(&self, x: &[f64], m: usize) -> DVector<f64> {
        let mut out = DVector::zeros(m);
        for (r, &v) in self.rows.iter().zip(x) {
            if v != 0.0 {
                for &(j, a) in &r.terms {
                    out[j] += a * v;
                }
            }
        }
        out
    }

    fn normal_matrix(&self, m: usize) -> DMatrix<f64> {
        let mut n = DMatrix::zeros(m, m);
        for r in &self.rows {
            for &(j, a) in &r.terms {
                for &(k, b) in &r.terms {
                    n[(j, k)] += a * b;
                }
            }
        }
        n
    }
}

fn unpack(v: &[f64], dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let mut k = 0;
    for r in 0..dim {
        for c in r..dim {
            let x = if r == c {
                v[k]
            } else {
                v[k] / std::f64::consts::SQRT_2
            };
            m[(r, c)] = x;
            m[(c, r)] = x;
            k += 1;
        }
    }
    m
}

fn pack(m: &DMatrix<f64>, out: &mut [f64]) {
    let dim = m.nrows();
    let mut k = 0;
    for r in 0..dim {
        for c in r..dim {
            out[k] = if r == c {
                m[(r, c)]
            } else {
                m[(r, c)] * std::f64::consts::SQRT_2
            };
            k += 1;
        }
    }
}

/// Entries this far below the block scale are zeroed before an
/// eigendecomposition; left in, their squares underflow inside the Jacobi
/// rotations and the decomposition returns NaN.
const FLUSH_RATIO: f64 = 1e-100;

fn eigen(mut m: DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let floor = FLUSH_RATIO * m.amax().max(1.0);
    m.iter_mut().for_each(|x| {
        if x.abs() < floor {
            *x = 0.0;
        }
    });
    SymmetricEigen::new(m)
}

/// Projects one vectorized block onto the PSD cone in place.
fn project(v: &mut [f64], dim: usize) {
    if dim == 1 {
        v[0] = v[0].max(0.0);
        return;
    }
    let eig = eigen(unpack(v, dim));
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return;
    }
    if eig.eigenvalues.iter().all(|&l| l <= 0.0) {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let m = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    pack(&m, v);
}

pub(super) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    eigen(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Worst block eigenvalue relative to the block's scale, and minus the
/// largest violation of the linear equations.
fn relative_min_eigenvalue(layout: &Layout, ay: &[f64]) -> f64 {
    let equations = -ay[layout.zero_start..]
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    layout
        .blocks
        .iter()
        .map(|&(start, dim)| {
            let slice = &ay[start..start + dim * (dim + 1) / 2];
            let m = unpack(slice, dim);
            let scale = m.amax().max(1.0);
            min_eigenvalue(&m) / scale
        })
        .fold(equations, f64::min)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn solve_builtin(p: &SdpProblem, cfg: &SolverConfig) -> Result<SdpSolution> {
    let m = p.sets.len();
    if m > cfg.max_free_vars {
        return Err(Error::Guard {
            what: "free moment variables",
            limit: cfg.max_free_vars as u128,
            actual: m as u128,
        });
    }
    let layout = Layout::new(p);
    let c = DVector::from_column_slice(&p.objective);
    let c_norm = c.norm();

    let mut normal = layout.normal_matrix(m);
    let chol = loop {
        if let Some(ch) = normal.clone().cholesky() {
            break ch;
        }
        // Only reachable if some variable appears in no slot.
        for i in 0..m {
            normal[(i, i)] += 1e-10;
        }
    };

    let mut y = DVector::zeros(m);
    if cfg.seed != 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        y.iter_mut().for_each(|v| *v = rng.random::<f64>());
    }
    let mut z = layout.apply(&y);
    layout.project_all(&mut z);
    let rows = z.len();
    let mut u = vec![0.0; rows];
    let mut rho = cfg.rho;
    let alpha = cfg.alpha;

    let mut iterations = 0;
    let mut adaptations = 0;
    let mut converged = false;
    let mut stats = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut ay = layout.apply(&y);
    let mut min_eig = f64::NEG_INFINITY;
    let mut tmp = vec![0.0; rows];
    while iterations < cfg.max_iters {
        iterations += 1;
        for r in 0..rows {
            tmp[r] = layout.rows[r].constant - z[r] + u[r];
        }
        let rhs = -(&c / rho) - layout.adjoint(&tmp, m);
        y = chol.solve(&rhs);
        ay = layout.apply(&y);
        let z_old = std::mem::take(&mut z);
        let mut w: Vec<f64> = (0..rows)
            .map(|r| alpha * ay[r] + (1.0 - alpha) * z_old[r] + u[r])
            .collect();
        let unprojected = w.clone();
        layout.project_all(&mut w);
        z = w;
        for r in 0..rows {
            u[r] = unprojected[r] - z[r];
        }

        if iterations % CHECK_EVERY != 0 && iterations != cfg.max_iters {
            continue;
        }
        let diff: Vec<f64> = (0..rows).map(|r| ay[r] - z[r]).collect();
        let rp = norm(&diff) / (1.0 + norm(&ay).max(norm(&z)));
        let dz: Vec<f64> = (0..rows).map(|r| z[r] - z_old[r]).collect();
        let rd = rho * layout.adjoint(&dz, m).norm() / (1.0 + c_norm);
        let objective = c.dot(&y);
        let bound = dual_bound(&layout, &c, &u, rho, m);
        stats = (rp, rd, bound);
        let gap = (objective - bound).abs() / (1.0 + objective.abs());
        if rp <= cfg.tol && rd <= cfg.tol && gap <= cfg.gap_tol {
            min_eig = relative_min_eigenvalue(&layout, &ay);
            if min_eig >= -cfg.tol {
                converged = true;
                break;
            }
        }
        // Keep the residuals balanced, but only occasionally and finitely
        // often: unbounded penalty changes can make the iteration diverge on
        // problems without interior. The factorization is ρ-free.
        if iterations % ADAPT_EVERY == 0 && adaptations < MAX_ADAPTATIONS {
            if rp > ADAPT_RATIO * rd {
                rho *= 2.0;
                u.iter_mut().for_each(|x| *x /= 2.0);
                adaptations += 1;
            } else if rd > ADAPT_RATIO * rp {
                rho /= 2.0;
                u.iter_mut().for_each(|x| *x *= 2.0);
                adaptations += 1;
            }
        }
    }
    if !converged {
        min_eig = relative_min_eigenvalue(&layout, &ay);
    }
    let values: Vec<f64> = y.iter().copied().collect();
    let objective = p.objective_value(&values);
    let (rp, rd, bound) = stats;
    Ok(SdpSolution {
        moments: p.to_moments(&values),
        objective,
        diagnostics: Diagnostics {
            backend: "builtin".into(),
            iterations,
            converged,
            primal_residual: rp,
            dual_residual: rd,
            objective,
            dual_bound: bound,
            gap: objective - bound,
            rho,
            min_eigenvalue: min_eig,
            free_vars: m,
            blocks: p.blocks.len(),
        },
    })
}

/// `−⟨Λ, g⟩ − ‖c − L^T Λ‖₁` with `Λ = −ρU`.
fn dual_bound(layout: &Layout, c: &DVector<f64>, u: &[f64], rho: f64, m: usize) -> f64 {
    let lambda: Vec<f64> = u.iter().map(|x| -rho * x).collect();
    let lg: f64 = layout
        .rows
        .iter()
        .zip(&lambda)
        .map(|(r, l)| r.constant * l)
        .sum();
    let residual = c - layout.adjoint(&lambda, m);
    -lg - residual.iter().map(|x| x.abs()).sum::<f64>()
}

pub(super) fn external_diagnostics(p: &SdpProblem, values: &[f64]) -> Diagnostics {
    let layout = Layout::new(p);
    let y = DVector::from_column_slice(values);
    let ay = layout.apply(&y);
    let min_eig = relative_min_eigenvalue(&layout, &ay);
    let objective = p.objective_value(values);
    Diagnostics {
        backend: "external-file".into(),
        iterations: 0,
        converged: true,
        primal_residual: min_eig.min(0.0).abs(),
        dual_residual: f64::NAN,
        objective,
        dual_bound: f64::NAN,
        gap: f64::NAN,
        rho: f64::NAN,
        min_eigenvalue: min_eig,
        free_vars: p.sets.len(),
        blocks: p.blocks.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::flow_lp::{build_flow_lp, solve_lp};
    use crate::instance::LayeredInstance;
    use crate::sdp::assemble;
    use crate::Scalar;

    #[test]
    fn pack_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 5.0, 6.0, 3.0, 6.0, 9.0]);
        let mut v = vec![0.0; 6];
        pack(&m, &mut v);
        assert_eq!(unpack(&v, 3), m);
        assert!((norm(&v) - m.norm()).abs() < 1e-12);
    }

    #[test]
    fn projection_clips() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let mut v = vec![0.0; 3];
        pack(&m, &mut v);
        project(&mut v, 2);
        let p = unpack(&v, 2);
        assert!((p[(0, 0)] - 1.5).abs() < 1e-12 && (p[(0, 1)] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn single_edge_value_is_cost() {
        let li = LayeredInstance::detect(fixtures::single_edge(5)).unwrap();
        let cs = build_flow_lp(&li);
        for t in 0..2 {
            let p = assemble(&cs, t).unwrap();
            let sol = solve_builtin(&p, &SolverConfig::default()).unwrap();
            assert!(sol.diagnostics.converged, "{:?}", sol.diagnostics);
            assert!((sol.objective - 5.0).abs() < 1e-6, "{}", sol.objective);
        }
    }

    #[test]
    fn level_zero_matches_lp_on_two_routes() {
        let li = LayeredInstance::detect(fixtures::two_routes()).unwrap();
        let cs = build_flow_lp(&li);
        let lp = solve_lp(&cs).objective.to_f64();
        let sol = solve_builtin(&assemble(&cs, 0).unwrap(), &SolverConfig::default()).unwrap();
        assert!(sol.diagnostics.converged);
        assert!((sol.objective - lp).abs() < 1e-5);
        assert!(sol.diagnostics.dual_bound <= sol.objective + 1e-6);
    }

    #[test]
    fn saturated_levels_converge() {
        // With 4 variables every level from 1 up has the full domain, and
        // the flow equalities leave the lift without interior.
        let li = LayeredInstance::detect(fixtures::two_hop_path()).unwrap();
        let cs = build_flow_lp(&li);
        for t in 1..=4 {
            let sol = solve_builtin(&assemble(&cs, t).unwrap(), &SolverConfig::default()).unwrap();
            assert!(sol.diagnostics.converged, "t = {t}: {:?}", sol.diagnostics);
            assert!(
                (sol.objective - 2.0).abs() < 1e-5,
                "t = {t}: {}",
                sol.objective
            );
        }
    }

    #[test]
    fn deterministic() {
        let li = LayeredInstance::detect(fixtures::two_routes()).unwrap();
        let p = assemble(&build_flow_lp(&li), 1).unwrap();
        let cfg = SolverConfig {
            seed: 7,
            ..SolverConfig::default()
        };
        let a = solve_builtin(&p, &cfg).unwrap();
        let b = solve_builtin(&p, &cfg).unwrap();
        assert_eq!(a.moments, b.moments);
        assert_eq!(a.diagnostics, b.diagnostics);
    }
}
