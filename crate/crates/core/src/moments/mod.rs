//! Moment vectors and the operations of the lifted algebra.
//!
//! A [`MomentVector`] maps index sets `I ⊆ [n]` to values `y_I`. Entries that
//! were never set are undefined rather than zero: every lookup of an absent
//! entry is a [`Error::MissingEntry`], because inclusion-exclusion sums that
//! silently read zeros produce plausible garbage.

mod certify;
mod decompose;
mod index_set;
mod io;
mod matrix;
mod ops;

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

pub use certify::{certify, BlockReport, CertifyReport};
pub use decompose::{decompose, Component, DecomposeOptions, Decomposition};
pub use index_set::{count_sets_up_to, sets_up_to, IndexSet};
pub use io::{format_moments, parse_moments, parse_moments_partial};
pub use matrix::{moment_matrix, moment_matrix_on, shifted_matrix, MomentMatrix, PsdOutcome};
pub use ops::{
    condition, conditioned_domain, inversion_check, normalize_condition, shift,
    shift_commutes_check, CheckOutcome,
};

/// Largest number of entries a complete vector may have before enumeration
/// is refused.
pub const DOMAIN_LIMIT: u128 = 4_000_000;

/// Largest variable count for operations over all `2^n` assignments.
pub const ATOM_VARS_LIMIT: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector<T> {
    level: usize,
    num_vars: usize,
    entries: BTreeMap<IndexSet, T>,
}

impl<T: Scalar> MomentVector<T> {
    /// An empty vector; fill with [`MomentVector::insert`].
    pub fn new(num_vars: usize, level: usize) -> Self {
        MomentVector {
            level,
            num_vars,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        num_vars: usize,
        level: usize,
        entries: impl IntoIterator<Item = (IndexSet, T)>,
    ) -> Result<Self> {
        let mut y = MomentVector::new(num_vars, level);
        for (set, value) in entries {
            y.insert(set, value)?;
        }
        Ok(y)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest `|I|` a level-`t` vector must define: `min(2t + 2, n)`.
    pub fn required_size(&self) -> usize {
        (2 * self.level + 2).min(self.num_vars)
    }

    pub fn insert(&mut self, set: IndexSet, value: T) -> Result<()> {
        if let Some(i) = set.max_element() {
            if i >= self.num_vars {
                return Err(Error::Dimension {
                    expected: self.num_vars,
                    actual: i + 1,
                });
            }
        }
        self.entries.insert(set, value);
        Ok(())
    }

    pub fn get(&self, set: &IndexSet) -> Result<&T> {
        self.entries
            .get(set)
            .ok_or_else(|| Error::MissingEntry(set.clone()))
    }

    pub fn try_get(&self, set: &IndexSet) -> Option<&T> {
        self.entries.get(set)
    }

    pub fn contains(&self, set: &IndexSet) -> bool {
        self.entries.contains_key(set)
    }

    /// `y_∅`.
    pub fn mass(&self) -> Result<&T> {
        self.get(&IndexSet::empty())
    }

    /// `y_{{i}}`.
    pub fn singleton(&self, i: usize) -> Result<&T> {
        self.get(&IndexSet::singleton(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&IndexSet, &T)> {
        self.entries.iter()
    }

    pub fn sets(&self) -> impl Iterator<Item = &IndexSet> {
        self.entries.keys()
    }

    pub fn with_level(mut self, level: usize) -> Self {
        self.level = level;
        self
    }

    /// If the defined sets are exactly all sets of size `<= m`, returns `m`.
    pub fn graded_size(&self) -> Option<usize> {
        let m = self.entries.keys().next_back().map_or(0, |s| s.len());
        if self.entries.is_empty() {
            return None;
        }
        (self.entries.len() as u128 == count_sets_up_to(self.num_vars, m)).then_some(m)
    }

    /// Errors unless every `|I| <= required_size()` is defined.
    pub fn check_complete(&self) -> Result<()> {
        let d = self.required_size();
        if let Some(m) = self.graded_size() {
            if m >= d {
                return Ok(());
            }
        }
        let count = count_sets_up_to(self.num_vars, d);
        if count > DOMAIN_LIMIT {
            return Err(Error::Guard {
                what: "moment domain size",
                limit: DOMAIN_LIMIT,
                actual: count,
            });
        }
        for set in sets_up_to(self.num_vars, d) {
            self.get(&set)?;
        }
        Ok(())
    }

    /// Entries with `|I| <= max_size`, relabelled to `level`.
    pub fn restrict(&self, level: usize, max_size: usize) -> Self {
        MomentVector {
            level,
            num_vars: self.num_vars,
            entries: self
                .entries
                .iter()
                .filter(|(s, _)| s.len() <= max_size)
                .map(|(s, v)| (s.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> MomentVector<U> {
        MomentVector {
            level: self.level,
            num_vars: self.num_vars,
            entries: self
                .entries
                .iter()
                .map(|(s, v)| (s.clone(), f(v)))
                .collect(),
        }
    }

    pub fn to_f64(&self) -> MomentVector<f64> {
        self.map(|v| v.to_f64())
    }

    pub fn scaled(&self, c: &T) -> Self {
        self.map(|v| v.clone() * c.clone())
    }

    /// Largest `|self_I - other_I|` over sets defined in both, with the
    /// number of sets compared.
    pub fn max_deviation(&self, other: &MomentVector<T>) -> (f64, usize) {
        let mut worst = 0.0f64;
        let mut compared = 0;
        for (set, a) in &self.entries {
            if let Some(b) = other.entries.get(set) {
                compared += 1;
                worst = worst.max((a.clone() - b.clone()).abs().to_f64());
            }
        }
        (worst, compared)
    }

    /// Objective `Σ c_i y_{{i}}`.
    pub fn linear_value(&self, objective: &[Rational]) -> Result<T> {
        let mut acc = T::zero();
        for (i, c) in objective.iter().enumerate() {
            if !c.is_zero() {
                acc = acc + T::from_rational(c) * self.singleton(i)?.clone();
            }
        }
        Ok(acc)
    }
}

/// Moment vector of a distribution over 0/1 points:
/// `y_I = Σ_{x : I ⊆ supp(x)} p_x`, defined on all `|I| <= min(2t+2, n)`.
pub fn from_distribution(
    num_vars: usize,
    level: usize,
    atoms: &[(Rational, Vec<bool>)],
) -> Result<MomentVector<Rational>> {
    let mut total = Rational::zero();
    for (p, x) in atoms {
        if *p < Rational::zero() {
            return Err(Error::Precondition(format!("negative probability {p}")));
        }
        if x.len() != num_vars {
            return Err(Error::Dimension {
                expected: num_vars,
                actual: x.len(),
            });
        }
        total += p;
    }
    if total != num_traits::One::one() {
        return Err(Error::Precondition(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    let d = (2 * level + 2).min(num_vars);
    let count = count_sets_up_to(num_vars, d);
    if count > DOMAIN_LIMIT {
        return Err(Error::Guard {
            what: "moment domain size",
            limit: DOMAIN_LIMIT,
            actual: count,
        });
    }
    let mut entries: BTreeMap<IndexSet, Rational> = sets_up_to(num_vars, d)
        .into_iter()
        .map(|s| (s, Rational::zero()))
        .collect();
    for (p, x) in atoms {
        if p.is_zero() {
            continue;
        }
        let support: Vec<usize> = (0..num_vars).filter(|&i| x[i]).collect();
        for set in sets_up_to(support.len(), d) {
            let mapped = IndexSet::new(set.iter().map(|k| support[k]));
            *entries.get_mut(&mapped).expect("graded domain") += p;
        }
    }
    Ok(MomentVector {
        level,
        num_vars,
        entries,
    })
}

/// `y_I = Π_{i ∈ I} x_i`: the moment vector of a single point.
pub fn point_moments(level: usize, x: &[bool]) -> Result<MomentVector<Rational>> {
    from_distribution(x.len(), level, &[(num_traits::One::one(), x.to_vec())])
}

/// Atom masses `y_x = y_{supp(x), -[n]∖supp(x)}` for every `x ∈ {0,1}^n`,
/// indexed by bitmask (bit `i` is `x_i`).
///
/// Needs every `I ⊆ [n]` defined. Runs the fast superset Möbius transform.
pub fn mobius_atoms<T: Scalar>(y: &MomentVector<T>) -> Result<Vec<T>> {
    let n = y.num_vars;
    if n > ATOM_VARS_LIMIT {
        return Err(Error::Guard {
            what: "variables for atom enumeration",
            limit: ATOM_VARS_LIMIT as u128,
            actual: n as u128,
        });
    }
    let size = 1usize << n;
    let mut a = Vec::with_capacity(size);
    for mask in 0..size as u64 {
        a.push(y.get(&IndexSet::from_mask(mask))?.clone());
    }
    for bit in 0..n {
        for mask in 0..size {
            if mask >> bit & 1 == 0 {
                let hi = a[mask | 1 << bit].clone();
                a[mask] = a[mask].clone() - hi;
            }
        }
    }
    Ok(a)
}

/// Inverse of [`mobius_atoms`]: `y_I = Σ_{x ⊇ I} y_x` on every `I ⊆ [n]`.
pub fn from_atoms<T: Scalar>(
    num_vars: usize,
    level: usize,
    atoms: &[T],
) -> Result<MomentVector<T>> {
    if num_vars > ATOM_VARS_LIMIT {
        return Err(Error::Guard {
            what: "variables for atom enumeration",
            limit: ATOM_VARS_LIMIT as u128,
            actual: num_vars as u128,
        });
    }
    let size = 1usize << num_vars;
    if atoms.len() != size {
        return Err(Error::Dimension {
            expected: size,
            actual: atoms.len(),
        });
    }
    let mut a = atoms.to_vec();
    for bit in 0..num_vars {
        for mask in 0..size {
            if mask >> bit & 1 == 0 {
                let hi = a[mask | 1 << bit].clone();
                a[mask] = a[mask].clone() + hi;
            }
        }
    }
    let entries = a
        .into_iter()
        .enumerate()
        .map(|(mask, v)| (IndexSet::from_mask(mask as u64), v))
        .collect();
    Ok(MomentVector {
        level,
        num_vars,
        entries,
    })
}

/// The 0/1 point encoded by an atom bitmask.
pub fn mask_to_point(num_vars: usize, mask: u64) -> Vec<bool> {
    (0..num_vars).map(|i| mask >> i & 1 == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    fn half_half() -> MomentVector<Rational> {
        from_distribution(
            2,
            1,
            &[
                (rat(1, 2), vec![true, false]),
                (rat(1, 2), vec![false, true]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn point_vector_is_product() {
        let y = point_moments(2, &[true, false, true]).unwrap();
        assert_eq!(y.graded_size(), Some(3));
        assert_eq!(*y.get(&IndexSet::new([0, 2])).unwrap(), int(1));
        assert_eq!(*y.get(&IndexSet::new([0, 1])).unwrap(), int(0));
        let zero = point_moments(1, &[false, false]).unwrap();
        assert!(zero.iter().all(|(s, v)| s.is_empty() == (*v == int(1))));
    }

    #[test]
    fn distribution_validation() {
        assert!(from_distribution(1, 0, &[(rat(1, 2), vec![true])]).is_err());
        assert!(from_distribution(1, 0, &[(int(2), vec![true]), (int(-1), vec![false])]).is_err());
        assert!(from_distribution(2, 0, &[(int(1), vec![true])]).is_err());
    }

    #[test]
    fn missing_entries_are_errors() {
        let y = half_half().restrict(0, 1);
        assert!(matches!(
            y.get(&IndexSet::new([0, 1])),
            Err(Error::MissingEntry(_))
        ));
        assert!(y.with_level(1).check_complete().is_err());
    }

    #[test]
    fn atoms_of_two_point_distribution() {
        let y = half_half();
        let atoms = mobius_atoms(&y).unwrap();
        assert_eq!(atoms, vec![int(0), rat(1, 2), rat(1, 2), int(0)]);
        assert_eq!(from_atoms(2, 1, &atoms).unwrap(), y);
    }

    #[test]
    fn atom_guard() {
        let y: MomentVector<Rational> = MomentVector::new(21, 0);
        assert!(matches!(mobius_atoms(&y), Err(Error::Guard { .. })));
    }

    #[test]
    fn linear_value_uses_singletons() {
        let y = half_half();
        assert_eq!(y.linear_value(&[int(3), int(5)]).unwrap(), int(4));
    }
}
