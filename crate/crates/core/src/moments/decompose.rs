use super::ops::normalize_condition;
use super::{sets_up_to, IndexSet, MomentVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest `|S|` accepted; the weights need all `2^|S|` subsets of `S`.
pub const DECOMPOSE_SET_LIMIT: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecomposeOptions {
    /// Weights at or below this are treated as zero (float backend only).
    pub tol: f64,
    /// Skip the `y_I = 0` check for `I ⊆ S, |I| = k+1` when there are more
    /// such sets than this; the caller then vouches for the precondition.
    pub precondition_cap: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            tol: 0.0,
            precondition_cap: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Component<T> {
    pub weight: T,
    pub assignment: IndexSet,
    pub vector: MomentVector<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition<T> {
    pub set: IndexSet,
    pub k: usize,
    pub components: Vec<Component<T>>,
    /// Assignments whose weight came out negative, i.e. `y` is not in the lift.
    pub negative_weights: Vec<(IndexSet, f64)>,
    /// Total weight of components dropped as numerically zero.
    pub dropped_mass: f64,
    pub precondition_checked: bool,
}

impl<T: Scalar> Decomposition<T> {
    pub fn total_weight(&self) -> T {
        self.components
            .iter()
            .fold(T::zero(), |acc, c| acc + c.weight.clone())
    }

    /// `Σ λ_X w^X` on the components' common domain.
    pub fn reconstruct(&self) -> Option<MomentVector<T>> {
        let first = self.components.first()?;
        let mut out = first.vector.scaled(&first.weight);
        for c in &self.components[1..] {
            let mut next = MomentVector::new(out.num_vars(), out.level());
            for (set, v) in out.iter() {
                if let Some(w) = c.vector.try_get(set) {
                    next.entries
                        .insert(set.clone(), v.clone() + c.weight.clone() * w.clone());
                }
            }
            out = next;
        }
        Some(out)
    }
}

/// Writes `y` as `Σ_X λ_X w^X` over assignments `X ⊆ S` with `λ_X > 0`,
/// where `λ_X = {y}_{X,−S∖X}(∅)` and `w^X` is the normalized conditioning.
///
/// Requires `k <= t` and `y_I = 0` for every `I ⊆ S` with `|I| = k + 1`.
pub fn decompose<T: Scalar>(
    y: &MomentVector<T>,
    s: &IndexSet,
    k: usize,
    opts: DecomposeOptions,
) -> Result<Decomposition<T>> {
    if k > y.level() {
        return Err(Error::Precondition(format!(
            "k = {k} exceeds the level {}",
            y.level()
        )));
    }
    if s.len() > DECOMPOSE_SET_LIMIT {
        return Err(Error::Guard {
            what: "decomposition set size",
            limit: DECOMPOSE_SET_LIMIT as u128,
            actual: s.len() as u128,
        });
    }

    let members: Vec<usize> = s.iter().collect();
    let checks = binomial(members.len(), k + 1);
    let precondition_checked = checks <= opts.precondition_cap as u128;
    if precondition_checked {
        for set in s.subsets_of_size(k + 1) {
            if let Some(v) = y.try_get(&set) {
                if !v.eq_tol(&T::zero(), opts.tol) {
                    return Err(Error::Precondition(format!(
                        "y{set} = {} is nonzero but |{set} ∩ S| > k = {k}",
                        v.format_value()
                    )));
                }
            }
        }
    }

    // λ_X for every X ⊆ S at once: Möbius transform over S's subsets.
    let size = 1usize << members.len();
    let mut lambda = Vec::with_capacity(size);
    for mask in 0..size as u64 {
        let set = IndexSet::new(
            (0..members.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| members[b]),
        );
        lambda.push(y.get(&set)?.clone());
    }
    for bit in 0..members.len() {
        for mask in 0..size {
            if mask >> bit & 1 == 0 {
                let hi = lambda[mask | 1 << bit].clone();
                lambda[mask] = lambda[mask].clone() - hi;
            }
        }
    }

    let mut components = Vec::new();
    let mut negative_weights = Vec::new();
    let mut dropped_mass = 0.0;
    for (mask, weight) in lambda.into_iter().enumerate() {
        let x = IndexSet::new(
            (0..members.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| members[b]),
        );
        let positive = if T::EXACT {
            weight > T::zero()
        } else {
            weight.to_f64() > opts.tol
        };
        if !positive {
            if weight.to_f64() < -opts.tol || (T::EXACT && weight < T::zero()) {
                negative_weights.push((x, weight.to_f64()));
            } else {
                dropped_mass += weight.to_f64();
            }
            continue;
        }
        let mut vector =
            normalize_condition(y, &x, s, opts.tol)?.expect("positive weight normalizes");
        extend_component(&mut vector, y, &x, s, k, &weight);
        components.push(Component {
            weight,
            assignment: x,
            vector,
        });
    }
    Ok(Decomposition {
        set: s.clone(),
        k,
        components,
        negative_weights,
        dropped_mass,
        precondition_checked,
    })
}

/// Fills in the entries of `w^X` that conditioning leaves undefined but that
/// level `t − k` needs: `w^X` is 0 on `S∖X` and 1 on `X`, so `w^X_I` depends
/// only on `I∖S`, and by the precondition only terms with at most `k` ones
/// on `S` survive in its inclusion–exclusion sum.
fn extend_component<T: Scalar>(
    w: &mut MomentVector<T>,
    y: &MomentVector<T>,
    x: &IndexSet,
    s: &IndexSet,
    k: usize,
    lambda: &T,
) {
    let n = y.num_vars();
    let level = y.level() - k;
    let rest = s.minus(x);
    let flips: Vec<IndexSet> = rest.subsets().filter(|f| x.len() + f.len() <= k).collect();
    for set in sets_up_to(n, (2 * level + 2).min(n)) {
        if w.try_get(&set).is_some() {
            continue;
        }
        let value = if set.intersects(&rest) {
            Some(T::zero())
        } else {
            let base = set.minus(s).union(x);
            flips.iter().try_fold(T::zero(), |acc, f| {
                let v = y.try_get(&base.union(f))?.clone();
                Some(if f.len() % 2 == 0 { acc + v } else { acc - v })
            })
        };
        if let Some(v) = value {
            w.entries.insert(set, v / lambda.clone());
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::from_distribution;
    use crate::scalar::{int, rat};

    #[test]
    fn recovers_two_atoms() {
        let y = from_distribution(
            3,
            1,
            &[
                (rat(1, 3), vec![true, false, true]),
                (rat(2, 3), vec![false, true, true]),
            ],
        )
        .unwrap();
        let d = decompose(&y, &IndexSet::singleton(0), 1, DecomposeOptions::default()).unwrap();
        assert_eq!(d.components.len(), 2);
        assert_eq!(d.total_weight(), int(1));
        let on = d
            .components
            .iter()
            .find(|c| c.assignment.len() == 1)
            .unwrap();
        assert_eq!(on.weight, rat(1, 3));
        assert_eq!(*on.vector.singleton(1).unwrap(), int(0));
        assert_eq!(*on.vector.singleton(2).unwrap(), int(1));
        let back = d.reconstruct().unwrap();
        let (dev, compared) = back.max_deviation(&y);
        assert_eq!(dev, 0.0);
        assert!(compared > 0);
    }

    #[test]
    fn precondition_reported() {
        let y = from_distribution(2, 1, &[(int(1), vec![true, true])]).unwrap();
        let err =
            decompose(&y, &IndexSet::new([0, 1]), 1, DecomposeOptions::default()).unwrap_err();
        assert!(err.to_string().contains("{0,1}"));
        assert!(decompose(&y, &IndexSet::new([0, 1]), 2, DecomposeOptions::default()).is_err());
    }

    #[test]
    fn components_cover_the_lower_level() {
        // At most one of x0, x1, x2 is 1, so k = 1 and the components live
        // at level t − 1 with every set of size ≤ 2t defined.
        let atoms = [
            (rat(1, 4), vec![true, false, false, true, true, false]),
            (rat(1, 4), vec![false, true, false, false, true, true]),
            (rat(1, 2), vec![false, false, false, true, false, true]),
        ];
        let y = from_distribution(6, 1, &atoms).unwrap();
        let s = IndexSet::new([0, 1, 2]);
        let d = decompose(&y, &s, 1, DecomposeOptions::default()).unwrap();
        assert_eq!(d.components.len(), 3);
        for c in &d.components {
            assert!(sets_up_to(6, 2)
                .iter()
                .all(|set| c.vector.try_get(set).is_some()));
            let (p, _) = atoms
                .iter()
                .find(|(_, x)| s.iter().all(|i| x[i] == c.assignment.contains(i)))
                .unwrap();
            assert_eq!(c.weight, *p);
        }
        let (dev, _) = d.reconstruct().unwrap().max_deviation(&y);
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(2, 3), 0);
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }
}
