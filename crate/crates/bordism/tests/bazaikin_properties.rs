use std::collections::BTreeSet;

use bordism::bazaikin::{canonical_tuples, census, homeomorphic, BazaikinTuple, Decision};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

fn random_odd(rng: &mut StdRng, bound: i64) -> i64 {
    2 * rng.gen_range(-(bound / 2) - 1..=bound / 2) + 1
}

/// First valid tuple drawn from a seeded stream.
fn valid_tuple(seed: u64) -> BazaikinTuple {
    let mut rng = StdRng::seed_from_u64(seed);
    loop {
        let mut q = [0i64; 6];
        for x in q.iter_mut().take(5) {
            *x = random_odd(&mut rng, 21);
        }
        q[5] = -q[..5].iter().sum::<i64>();
        let t = BazaikinTuple::new(q);
        if t.validate().is_ok() {
            return t;
        }
    }
}

fn brute_sigma(q: &[i64; 6], k: usize) -> i128 {
    (0u32..64)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..6).filter(|i| m >> i & 1 == 1).map(|i| q[i] as i128).product::<i128>())
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn invariants_ignore_order_and_sign(seed in any::<u64>(), shuffle in any::<u64>()) {
        let t = valid_tuple(seed);
        let mut q = t.q;
        q.shuffle(&mut StdRng::seed_from_u64(shuffle));
        let permuted = BazaikinTuple::new(q);
        let inv = t.invariants().unwrap();
        prop_assert_eq!(permuted.invariants().unwrap(), inv);
        prop_assert_eq!(t.negate().invariants().unwrap(), inv);
        prop_assert_eq!(t.chern_classes().unwrap(), permuted.negate().chern_classes().unwrap());
        prop_assert_eq!(inv.sigma3, 8 * inv.s as i128);
        prop_assert!(inv.s % 6 == 1 || inv.s % 6 == 5);
        let expect = if inv.s % 5 == 0 { Decision::Undecided(25) } else { Decision::Yes };
        prop_assert_eq!(homeomorphic(&t, &permuted).unwrap(), expect);
    }

    #[test]
    fn recurrence_matches_subset_expansion(seed in any::<u64>()) {
        let t = valid_tuple(seed);
        let e = t.sigma();
        for k in 0..=6 {
            prop_assert_eq!(e[k], brute_sigma(&t.q, k));
        }
    }

    #[test]
    fn validation_rejects_bad_s(q in proptest::array::uniform5(-10i64..10)) {
        let odd = q.map(|x| 2 * x + 1);
        let t = BazaikinTuple::new([odd[0], odd[1], odd[2], odd[3], odd[4], -odd.iter().sum::<i64>()]);
        if let Ok(s) = t.validate() {
            prop_assert!(s % 6 == 1 || s % 6 == 5);
            prop_assert_eq!(brute_sigma(&t.q, 3).abs(), 8 * s as i128);
        }
    }
}

#[test]
fn census_matches_brute_enumeration() {
    let bound = 7i64;
    let odds: Vec<i64> = (-bound..=bound).filter(|x| x.rem_euclid(2) == 1).collect();
    let mut brute = BTreeSet::new();
    let n = odds.len();
    for code in 0..n.pow(5) {
        let mut q = [0i64; 6];
        let mut c = code;
        for x in q.iter_mut().take(5) {
            *x = odds[c % n];
            c /= n;
        }
        q[5] = -q[..5].iter().sum::<i64>();
        if q[5].abs() > bound {
            continue;
        }
        let t = BazaikinTuple::new(q);
        if t.validate().is_ok() {
            brute.insert(t.canonical());
        }
    }
    let listed: BTreeSet<_> = canonical_tuples(bound as u64).into_iter().collect();
    assert_eq!(listed, brute);
}

#[test]
fn decisions_form_an_equivalence_on_decided_pairs() {
    let r = census(15);
    let all: Vec<BazaikinTuple> = r.classes.iter().flat_map(|c| c.members.iter().copied()).collect();
    let n = all.len();
    let d: Vec<Vec<Decision>> = all.iter().map(|a| all.iter().map(|b| homeomorphic(a, b).unwrap()).collect()).collect();
    for i in 0..n {
        assert_ne!(d[i][i], Decision::No);
        for j in 0..n {
            assert_eq!(d[i][j], d[j][i]);
            if d[i][j] != Decision::Yes {
                continue;
            }
            for k in 0..n {
                if d[j][k].is_decided() && d[i][k].is_decided() {
                    assert_eq!(d[j][k], d[i][k], "transitivity at {i} {j} {k}");
                }
            }
        }
    }
}

#[test]
fn census_counts_grow_with_bound() {
    let mut last = 0;
    for b in [5, 7, 9, 11, 13, 15] {
        let r = census(b);
        assert!(r.classes.len() >= last);
        last = r.classes.len();
    }
}
