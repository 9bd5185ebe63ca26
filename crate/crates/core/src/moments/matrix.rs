use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::{count_sets_up_to, sets_up_to, IndexSet, MomentVector, DOMAIN_LIMIT};
use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

/// Dense symmetric matrix indexed by sets, entry `(I, J)` a function of `I ∪ J`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrix<T> {
    index: Vec<IndexSet>,
    values: Vec<T>,
}

/// Outcome of a PSD test. `min_value` is the smallest eigenvalue (float) or
/// the most negative pivot / smallest positive pivot seen (exact).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsdOutcome {
    pub psd: bool,
    pub min_value: f64,
    pub rank: usize,
}

impl<T: Scalar> MomentMatrix<T> {
    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn index(&self) -> &[IndexSet] {
        &self.index
    }

    pub fn at(&self, r: usize, c: usize) -> &T {
        &self.values[r * self.index.len() + c]
    }

    pub fn entry(&self, i: &IndexSet, j: &IndexSet) -> Option<&T> {
        let r = self.index.iter().position(|s| s == i)?;
        let c = self.index.iter().position(|s| s == j)?;
        Some(self.at(r, c))
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.to_f64().abs())
            .fold(0.0, f64::max)
    }

    /// Principal submatrix on the given rows (by position).
    pub fn principal(&self, rows: &[usize]) -> MomentMatrix<T> {
        let mut values = Vec::with_capacity(rows.len() * rows.len());
        for &r in rows {
            for &c in rows {
                values.push(self.at(r, c).clone());
            }
        }
        MomentMatrix {
            index: rows.iter().map(|&r| self.index[r].clone()).collect(),
            values,
        }
    }

    /// Exact test on the rational backend; eigenvalue test with relative
    /// tolerance `tol · max(1, max|entry|)` on the float backend.
    pub fn psd(&self, tol: f64) -> PsdOutcome {
        if T::EXACT {
            exact_psd(self.dim(), self.values.clone())
        } else {
            float_psd(self.dim(), &self.values, tol)
        }
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |r, c| self.at(r, c).to_f64())
    }
}

fn check_index_budget(n: usize, d: usize) -> Result<()> {
    let count = count_sets_up_to(n, d);
    if count > DOMAIN_LIMIT {
        return Err(Error::Guard {
            what: "moment matrix dimension",
            limit: DOMAIN_LIMIT,
            actual: count,
        });
    }
    Ok(())
}

/// `M_d(y)` over all sets of size `<= d`.
pub fn moment_matrix<T: Scalar>(y: &MomentVector<T>, d: usize) -> Result<MomentMatrix<T>> {
    check_index_budget(y.num_vars(), d)?;
    moment_matrix_on(y, sets_up_to(y.num_vars(), d))
}

/// Moment matrix over an explicit row index.
pub fn moment_matrix_on<T: Scalar>(
    y: &MomentVector<T>,
    index: Vec<IndexSet>,
) -> Result<MomentMatrix<T>> {
    build(index, |set| y.get(set).cloned())
}

/// `M_d((a; β) ∗ y)`, evaluating the shift only where the matrix needs it.
pub fn shifted_matrix<T: Scalar>(
    y: &MomentVector<T>,
    a: &[(usize, Rational)],
    beta: &Rational,
    d: usize,
) -> Result<MomentMatrix<T>> {
    check_index_budget(y.num_vars(), d)?;
    let coeffs: Vec<(usize, T)> = a.iter().map(|(i, c)| (*i, T::from_rational(c))).collect();
    let b = T::from_rational(beta);
    build(sets_up_to(y.num_vars(), d), |set| {
        let mut acc = T::zero() - b.clone() * y.get(set)?.clone();
        for (i, c) in &coeffs {
            acc = acc + c.clone() * y.get(&set.with(*i))?.clone();
        }
        Ok(acc)
    })
}

fn build<T: Scalar>(
    index: Vec<IndexSet>,
    mut value: impl FnMut(&IndexSet) -> Result<T>,
) -> Result<MomentMatrix<T>> {
    let n = index.len();
    let mut cache: HashMap<IndexSet, T> = HashMap::new();
    let mut values = vec![T::zero(); n * n];
    for r in 0..n {
        for c in r..n {
            let key = index[r].union(&index[c]);
            let v = match cache.get(&key) {
                Some(v) => v.clone(),
                None => {
                    let v = value(&key)?;
                    cache.insert(key, v.clone());
                    v
                }
            };
            values[c * n + r] = v.clone();
            values[r * n + c] = v;
        }
    }
    Ok(MomentMatrix { index, values })
}

/// Exact PSD test by symmetric pivoting on positive diagonal entries.
///
/// A negative diagonal rejects. When every remaining diagonal is zero the
/// matrix is PSD iff the remaining block is zero. Zero entries are skipped
/// in the Schur updates, which keeps low-rank moment matrices cheap.
pub fn exact_psd<T: Scalar>(n: usize, mut a: Vec<T>) -> PsdOutcome {
    let zero = T::zero();
    let mut active: Vec<usize> = (0..n).collect();
    let mut rank = 0;
    let mut min_pivot = f64::INFINITY;
    loop {
        let mut pivot = None;
        for (pos, &i) in active.iter().enumerate() {
            let d = &a[i * n + i];
            if *d < zero {
                return PsdOutcome {
                    psd: false,
                    min_value: d.to_f64(),
                    rank,
                };
            }
            if pivot.is_none() && *d > zero {
                pivot = Some(pos);
            }
        }
        let Some(pos) = pivot else {
            for &i in &active {
                for &j in &active {
                    if a[i * n + j] != zero {
                        // A zero diagonal with a nonzero off-diagonal in its
                        // row admits a negative 2x2 minor.
                        return PsdOutcome {
                            psd: false,
                            min_value: -a[i * n + j].to_f64().abs(),
                            rank,
                        };
                    }
                }
            }
            return PsdOutcome {
                psd: true,
                min_value: if rank < n { 0.0 } else { min_pivot },
                rank,
            };
        };
        let p = active.swap_remove(pos);
        let d = a[p * n + p].clone();
        min_pivot = min_pivot.min(d.to_f64());
        rank += 1;
        let nz: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| a[i * n + p] != zero)
            .collect();
        for (k, &i) in nz.iter().enumerate() {
            let f = a[i * n + p].clone() / d.clone();
            for &j in &nz[k..] {
                let v = a[i * n + j].clone() - f.clone() * a[p * n + j].clone();
                a[j * n + i] = v.clone();
                a[i * n + j] = v;
            }
        }
    }
}

/// Float PSD test: `λ_min >= −tol · max(1, max|entry|)`.
pub fn float_psd<T: Scalar>(n: usize, values: &[T], tol: f64) -> PsdOutcome {
    if n == 0 {
        return PsdOutcome {
            psd: true,
            min_value: 0.0,
            rank: 0,
        };
    }
    let m = DMatrix::from_fn(n, n, |r, c| values[r * n + c].to_f64());
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let eig = SymmetricEigen::new(m);
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let rank = eig.eigenvalues.iter().filter(|&&l| l > tol * scale).count();
    PsdOutcome {
        psd: min >= -tol * scale,
        min_value: min,
        rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{from_distribution, point_moments};
    use crate::scalar::{int, rat};

    #[test]
    fn all_ones_point() {
        let y = point_moments(0, &[true]).unwrap();
        let m = moment_matrix(&y, 1).unwrap();
        assert_eq!(m.dim(), 2);
        assert!((0..2).all(|r| (0..2).all(|c| *m.at(r, c) == int(1))));
        let out = m.psd(0.0);
        assert!(out.psd);
        assert_eq!(out.rank, 1);
    }

    #[test]
    fn two_point_matrix() {
        let y = from_distribution(
            2,
            0,
            &[
                (rat(1, 2), vec![true, false]),
                (rat(1, 2), vec![false, true]),
            ],
        )
        .unwrap();
        let m = moment_matrix(&y, 1).unwrap();
        assert_eq!(
            m.index(),
            &[
                IndexSet::empty(),
                IndexSet::singleton(0),
                IndexSet::singleton(1)
            ]
        );
        assert_eq!(
            *m.entry(&IndexSet::singleton(0), &IndexSet::singleton(1))
                .unwrap(),
            int(0)
        );
        assert_eq!(m.psd(0.0).rank, 2);
        assert!(m.to_f64().is_symmetric_like());
    }

    trait SymLike {
        fn is_symmetric_like(&self) -> bool;
    }
    impl SymLike for DMatrix<f64> {
        fn is_symmetric_like(&self) -> bool {
            (self - self.transpose()).amax() == 0.0
        }
    }

    #[test]
    fn exact_rejects_indefinite() {
        // [[1, 2], [2, 1]] has eigenvalue -1.
        let out = exact_psd(2, vec![int(1), int(2), int(2), int(1)]);
        assert!(!out.psd);
        // Zero diagonal with nonzero off-diagonal.
        let out = exact_psd(2, vec![int(0), int(1), int(1), int(0)]);
        assert!(!out.psd);
        assert!(exact_psd(2, vec![int(0); 4]).psd);
        let out = exact_psd(
            3,
            vec![
                int(2),
                int(1),
                int(0),
                int(1),
                int(2),
                int(1),
                int(0),
                int(1),
                int(2),
            ],
        );
        assert!(out.psd && out.rank == 3);
    }

    #[test]
    fn float_agrees_with_exact_on_small_cases() {
        let cases: Vec<Vec<Rational>> = vec![
            vec![int(1), int(2), int(2), int(1)],
            vec![int(1), int(1), int(1), int(1)],
            vec![int(4), int(-2), int(-2), int(1)],
            vec![int(1), rat(1, 2), rat(1, 2), int(0)],
        ];
        for c in cases {
            let f: Vec<f64> = c.iter().map(Scalar::to_f64).collect();
            assert_eq!(exact_psd(2, c).psd, float_psd(2, &f, 1e-9).psd);
        }
    }

    #[test]
    fn shifted_matrix_matches_shift() {
        let y = from_distribution(
            2,
            1,
            &[
                (rat(1, 3), vec![true, false]),
                (rat(2, 3), vec![false, true]),
            ],
        )
        .unwrap();
        let a = [(0, int(-1)), (1, int(-1))];
        let m = shifted_matrix(&y, &a, &int(-1), 1).unwrap();
        let z = crate::moments::shift(&a, &int(-1), &y);
        let m2 = moment_matrix(&z, 1).unwrap();
        assert_eq!(m, m2);
    }
}
