use serde::Serialize;

use super::{IndexSet, MomentVector};
use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};
use num_traits::Zero;

/// `(a; β) ∗ y`: `z_I = Σ_i a_i y_{I ∪ {i}} − β y_I`, on every `I` of `y`'s
/// domain whose required entries exist.
pub fn shift<T: Scalar>(
    a: &[(usize, Rational)],
    beta: &Rational,
    y: &MomentVector<T>,
) -> MomentVector<T> {
    let coeffs: Vec<(usize, T)> = a
        .iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| (*i, T::from_rational(c)))
        .collect();
    let b = T::from_rational(beta);
    let mut z = MomentVector::new(y.num_vars(), y.level());
    'sets: for (set, y_i) in y.iter() {
        let mut acc = T::zero() - b.clone() * y_i.clone();
        for (i, c) in &coeffs {
            match y.try_get(&set.with(*i)) {
                Some(v) => acc = acc + c.clone() * v.clone(),
                None => continue 'sets,
            }
        }
        z.entries.insert(set.clone(), acc);
    }
    z
}

/// `𝒯 ⊖ S`: sets `I` with `I ∪ J` defined for every `J ⊆ S`.
pub fn conditioned_domain<T: Scalar>(y: &MomentVector<T>, s: &IndexSet) -> Vec<IndexSet> {
    if let Some(m) = y.graded_size() {
        // Downward closed: I ∪ S defined implies every I ∪ J is.
        return y
            .sets()
            .filter(|i| i.union(s).len() <= m)
            .cloned()
            .collect();
    }
    let subsets: Vec<IndexSet> = s.subsets().collect();
    y.sets()
        .filter(|i| subsets.iter().all(|j| y.contains(&i.union(j))))
        .cloned()
        .collect()
}

fn signed_subsets(set: &IndexSet) -> Vec<(IndexSet, bool)> {
    set.subsets()
        .map(|h| {
            let odd = h.len() % 2 == 1;
            (h, odd)
        })
        .collect()
}

/// `{y}_{X, −S∖X}`: `z_I = Σ_{H ⊆ S∖X} (−1)^{|H|} y_{I ∪ X ∪ H}` on `𝒯 ⊖ S`.
pub fn condition<T: Scalar>(
    y: &MomentVector<T>,
    x: &IndexSet,
    s: &IndexSet,
) -> Result<MomentVector<T>> {
    if !x.is_subset(s) {
        return Err(Error::Precondition(format!("{x} is not a subset of {s}")));
    }
    if s.len() >= 32 {
        return Err(Error::Guard {
            what: "conditioning set size",
            limit: 31,
            actual: s.len() as u128,
        });
    }
    let domain = conditioned_domain(y, s);
    if domain.is_empty() {
        return Err(Error::Precondition(format!(
            "domain too small to condition on {s}"
        )));
    }
    let terms = signed_subsets(&s.minus(x));
    let mut z = MomentVector::new(y.num_vars(), y.level());
    for set in domain {
        let base = set.union(x);
        let mut acc = T::zero();
        for (h, odd) in &terms {
            let v = y.get(&base.union(h))?.clone();
            acc = if *odd { acc - v } else { acc + v };
        }
        z.entries.insert(set, acc);
    }
    Ok(z)
}

/// `{y}_{X, −S∖X} / z_∅`, or `None` when `z_∅` is zero (within `tol` on the
/// float backend).
pub fn normalize_condition<T: Scalar>(
    y: &MomentVector<T>,
    x: &IndexSet,
    s: &IndexSet,
    tol: f64,
) -> Result<Option<MomentVector<T>>> {
    let z = condition(y, x, s)?;
    let mass = z.mass()?.clone();
    let positive = if T::EXACT {
        mass > T::zero()
    } else {
        mass.to_f64() > tol
    };
    if !positive {
        return Ok(None);
    }
    Ok(Some(z.map(|v| v.clone() / mass.clone())))
}

/// Result of an entrywise identity check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub holds: bool,
    pub max_deviation: f64,
    pub compared: usize,
}

fn compare<T: Scalar>(lhs: &MomentVector<T>, rhs: &MomentVector<T>, tol: f64) -> CheckOutcome {
    let mut exact = true;
    let mut worst = 0.0f64;
    let mut compared = 0;
    for (set, a) in lhs.iter() {
        if let Some(b) = rhs.try_get(set) {
            compared += 1;
            if a != b {
                exact = false;
                worst = worst.max((a.clone() - b.clone()).abs().to_f64());
            }
        }
    }
    let holds = if T::EXACT { exact } else { worst <= tol };
    CheckOutcome {
        holds,
        max_deviation: worst,
        compared,
    }
}

/// `y = Σ_{X ⊆ S} {y}_{X, −S∖X}` entrywise on `𝒯 ⊖ S`.
pub fn inversion_check<T: Scalar>(
    y: &MomentVector<T>,
    s: &IndexSet,
    tol: f64,
) -> Result<CheckOutcome> {
    let mut sum: Option<MomentVector<T>> = None;
    for x in s.subsets() {
        let z = condition(y, &x, s)?;
        sum = Some(match sum {
            None => z,
            Some(acc) => {
                let mut acc = acc;
                for (set, v) in z.iter() {
                    let cur = acc.entries.get_mut(set).expect("same domain");
                    *cur = cur.clone() + v.clone();
                }
                acc
            }
        });
    }
    Ok(compare(&sum.expect("S has at least one subset"), y, tol))
}

/// `(a; β) ∗ {y}_{X,−S∖X} = {(a; β) ∗ y}_{X,−S∖X}` on the sets where both
/// sides are defined.
pub fn shift_commutes_check<T: Scalar>(
    y: &MomentVector<T>,
    x: &IndexSet,
    s: &IndexSet,
    a: &[(usize, Rational)],
    beta: &Rational,
    tol: f64,
) -> Result<CheckOutcome> {
    let lhs = shift(a, beta, &condition(y, x, s)?);
    let rhs = condition(&shift(a, beta, y), x, s)?;
    Ok(compare(&lhs, &rhs, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::from_distribution;
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
    fn shift_of_point_and_split() {
        let y = crate::moments::point_moments(1, &[true]).unwrap();
        let z = shift(&[(0, int(1))], &int(0), &y);
        assert_eq!(*z.mass().unwrap(), int(1));

        let z = shift(&[(0, int(-1)), (1, int(-1))], &int(-1), &half_half());
        assert_eq!(*z.mass().unwrap(), int(0));
    }

    #[test]
    fn shift_domain_shrinks_by_one() {
        let y = half_half().restrict(0, 1).with_level(0);
        let z = shift(&[(0, int(1))], &int(0), &y);
        assert_eq!(z.len(), 2);
        assert!(z.contains(&IndexSet::singleton(0)));
        assert!(!z.contains(&IndexSet::singleton(1)));
    }

    #[test]
    fn condition_examples() {
        let y = half_half();
        let s1 = IndexSet::singleton(0);
        let z = condition(&y, &IndexSet::empty(), &s1).unwrap();
        assert_eq!(*z.mass().unwrap(), int(1) - rat(1, 2));
        let s = IndexSet::new([0, 1]);
        let z = condition(&y, &s1, &s).unwrap();
        assert_eq!(*z.get(&IndexSet::singleton(1)).unwrap(), int(0));
        assert_eq!(*z.mass().unwrap(), rat(1, 2));
        assert!(condition(&y, &IndexSet::singleton(1), &s1).is_err());
    }

    #[test]
    fn normalized_condition_is_conditional_distribution() {
        let y = half_half();
        let w = normalize_condition(&y, &IndexSet::singleton(0), &IndexSet::singleton(0), 0.0)
            .unwrap()
            .unwrap();
        assert_eq!(*w.mass().unwrap(), int(1));
        assert_eq!(*w.singleton(0).unwrap(), int(1));
        assert_eq!(*w.singleton(1).unwrap(), int(0));

        let p = crate::moments::point_moments(1, &[true, false]).unwrap();
        let none =
            normalize_condition(&p, &IndexSet::empty(), &IndexSet::singleton(0), 0.0).unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn identities_on_small_vector() {
        let y = half_half();
        assert!(
            inversion_check(&y, &IndexSet::new([0, 1]), 0.0)
                .unwrap()
                .holds
        );
        assert!(inversion_check(&y, &IndexSet::empty(), 0.0).unwrap().holds);
        let out = shift_commutes_check(
            &y,
            &IndexSet::singleton(0),
            &IndexSet::singleton(0),
            &[(0, int(-1)), (1, int(-1))],
            &int(-1),
            0.0,
        )
        .unwrap();
        assert!(out.holds && out.compared > 0);
    }
}
