use proptest::prelude::*;

use dst_lasserre::moments::{
    condition, format_moments, from_atoms, from_distribution, inversion_check, mobius_atoms,
    moment_matrix, normalize_condition, parse_moments, shift, shift_commutes_check, IndexSet,
    MomentVector,
};
use dst_lasserre::scalar::{int, rat};
use dst_lasserre::{Rational, Scalar};

/// A distribution over up to four 0/1 points in `n` dimensions.
fn distribution() -> impl Strategy<Value = (usize, Vec<(Rational, Vec<bool>)>)> {
    (2usize..=6).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((1i64..=6, prop::collection::vec(any::<bool>(), n)), 1..=4),
        )
            .prop_map(|(n, raw)| {
                let total: i64 = raw.iter().map(|(w, _)| w).sum();
                (
                    n,
                    raw.into_iter().map(|(w, x)| (rat(w, total), x)).collect(),
                )
            })
    })
}

/// Full-level vector: every subset of `[n]` is in the domain.
fn full(n: usize, atoms: &[(Rational, Vec<bool>)]) -> MomentVector<Rational> {
    from_distribution(n, n.saturating_sub(1) / 2, atoms).unwrap()
}

fn subset_of(n: usize) -> impl Strategy<Value = IndexSet> {
    prop::collection::vec(any::<bool>(), n)
        .prop_map(|bits| IndexSet::new((0..bits.len()).filter(|&i| bits[i]).collect::<Vec<_>>()))
}

fn mask_of(x: &[bool]) -> usize {
    x.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| 1 << i)
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn atoms_round_trip((n, atoms) in distribution()) {
        let y = full(n, &atoms);
        let masses = mobius_atoms(&y).unwrap();
        let back = from_atoms(n, y.level(), &masses).unwrap();
        prop_assert_eq!(&back, &y);
        let mut expected = vec![Rational::from_i64(0); 1 << n];
        for (p, x) in &atoms {
            expected[mask_of(x)] += p.clone();
        }
        prop_assert_eq!(masses, expected);
    }

    #[test]
    fn conditioning_mass_and_cancellation(
        (n, atoms, s, pick) in distribution().prop_flat_map(|(n, a)| (Just(n), Just(a), subset_of(n.min(3)), subset_of(n.min(3))))
    ) {
        let y = full(n, &atoms);
        let x = IndexSet::new(pick.iter().filter(|&i| s.contains(i)).collect::<Vec<_>>());
        let z = condition(&y, &x, &s).unwrap();
        let zero_part = s.minus(&x);
        // z_∅ is the mass of atoms that are 1 on X and 0 on S∖X.
        let mass: Rational = atoms
            .iter()
            .filter(|(_, pt)| x.iter().all(|i| pt[i]) && zero_part.iter().all(|i| !pt[i]))
            .fold(Rational::from_i64(0), |acc, (p, _)| acc + p.clone());
        prop_assert_eq!(z.mass().unwrap(), &mass);
        for (set, v) in z.iter() {
            if set.intersects(&zero_part) {
                prop_assert_eq!(v, &Rational::from_i64(0));
            }
        }
        if let Some(w) = normalize_condition(&y, &x, &s, 0.0).unwrap() {
            prop_assert_eq!(w.mass().unwrap(), &Rational::from_i64(1));
            for (set, v) in w.iter() {
                if set.is_subset(&x) {
                    prop_assert_eq!(v, &Rational::from_i64(1));
                }
            }
        } else {
            prop_assert_eq!(mass, Rational::from_i64(0));
        }
    }

    #[test]
    fn inversion_is_exact(
        (n, atoms, s, level) in distribution().prop_flat_map(|(n, a)| (Just(n), Just(a), subset_of(n.min(4)), 0usize..=2))
    ) {
        let y = from_distribution(n, level, &atoms).unwrap();
        // Keep S small enough for the domain at this level.
        let s = IndexSet::new(s.iter().take(level + 1).collect::<Vec<_>>());
        let r = inversion_check(&y, &s, 0.0).unwrap();
        prop_assert!(r.holds);
        prop_assert_eq!(r.max_deviation, 0.0);
    }

    #[test]
    fn shift_commutes_with_conditioning(
        (n, atoms, s, pick, coeffs, beta) in distribution().prop_flat_map(|(n, a)| (
            Just(n),
            Just(a),
            subset_of(n.min(3)),
            subset_of(n.min(3)),
            prop::collection::vec(-3i64..=3, n),
            -3i64..=3,
        ))
    ) {
        let y = full(n, &atoms);
        let x = IndexSet::new(pick.iter().filter(|&i| s.contains(i)).collect::<Vec<_>>());
        let a: Vec<(usize, Rational)> = coeffs.iter().enumerate().filter(|(_, &c)| c != 0).map(|(i, &c)| (i, int(c))).collect();
        let r = shift_commutes_check(&y, &x, &s, &a, &int(beta), 0.0).unwrap();
        prop_assert!(r.holds);
        // On a point, the shift is the slack times the point's moments.
        if atoms.len() == 1 {
            let pt = &atoms[0].1;
            let slack: Rational = a.iter().filter(|(i, _)| pt[*i]).fold(-int(beta), |acc, (_, c)| acc + c.clone());
            let z = shift(&a, &int(beta), &y);
            for (set, v) in z.iter() {
                let expect = if set.iter().all(|i| pt[i]) { slack.clone() } else { Rational::from_i64(0) };
                prop_assert_eq!(v, &expect);
            }
        }
    }

    #[test]
    fn distributions_have_psd_moment_matrices((n, atoms) in distribution(), level in 0usize..=2) {
        let y = from_distribution(n, level, &atoms).unwrap();
        let m = moment_matrix(&y, (level + 1).min(n)).unwrap();
        prop_assert!(m.psd(0.0).psd);
        // Monotone along inclusions.
        for (set, v) in y.iter() {
            for i in set.iter() {
                let smaller = set.minus(&IndexSet::singleton(i));
                prop_assert!(v <= y.get(&smaller).unwrap());
            }
        }
    }

    #[test]
    fn moment_file_round_trips((n, atoms) in distribution(), level in 0usize..=2) {
        let y = from_distribution(n, level, &atoms).unwrap();
        let text = format_moments(&y);
        let back: MomentVector<Rational> = parse_moments(&text).unwrap();
        prop_assert_eq!(&back, &y);
        prop_assert_eq!(format_moments(&back), text);
        let f: MomentVector<f64> = parse_moments(&format_moments(&y.to_f64())).unwrap();
        prop_assert_eq!(f, y.to_f64());
    }

    #[test]
    fn negative_mass_breaks_psd(n in 2usize..=4, bad in 1usize..4) {
        // Moments of a signed combination: +2 on the empty point, −1 on a
        // nonempty one. Some principal minor must go negative.
        let bad = bad.min(n);
        let mut masses = vec![Rational::from_i64(0); 1 << n];
        masses[0] = Rational::from_i64(2);
        masses[(1 << bad) - 1] = Rational::from_i64(-1);
        let y = from_atoms(n, n, &masses).unwrap();
        prop_assert!(!moment_matrix(&y, n).unwrap().psd(0.0).psd);
    }
}
