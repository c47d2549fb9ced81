//! Integer invariants of Bazaikin parameter tuples and the homeomorphism
//! decision built on them.
//!
//! A tuple `q = (q₀, …, q₅)` of odd integers with zero sum determines the
//! space; its classifying data are the elementary symmetric polynomials
//! `σ₂, σ₃` and the residues of `σ₄, σ₅` modulo `s = σ₃ / 8` (with the sign of
//! `q` chosen so that `σ₃ > 0`).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on homeomorphism types sharing one invariant vector when `5 | s`.
pub const UNDECIDED_BOUND: u32 = 25;
/// Upper bound on smooth structures per homeomorphism type.
pub const DIFFEOMORPHISM_BOUND: u32 = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum Invalid {
    #[error("entries must all be odd")]
    NotAllOdd,
    #[error("entries must sum to zero (sum is {0})")]
    NonzeroSum(i64),
    #[error("σ3 = {0} is not divisible by 8")]
    SigmaNotDivisibleBy8(i128),
    #[error("s = {0} is not ±1 mod 6")]
    SNotPlusMinusOneMod6(i128),
}

#[derive(Debug, Error)]
pub enum TupleParseError {
    #[error("expected 6 comma-separated integers, got {0:?}")]
    Shape(String),
    #[error("bad integer {0:?}")]
    Int(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BazaikinTuple {
    pub q: [i64; 6],
}

impl FromStr for BazaikinTuple {
    type Err = TupleParseError;
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = text.trim().trim_matches(|c| c == '(' || c == ')').split(',').collect();
        if parts.len() != 6 {
            return Err(TupleParseError::Shape(text.into()));
        }
        let mut q = [0i64; 6];
        for (slot, p) in q.iter_mut().zip(parts) {
            *slot = p.trim().parse().map_err(|_| TupleParseError::Int(p.into()))?;
        }
        Ok(BazaikinTuple { q })
    }
}

impl fmt::Display for BazaikinTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.q.iter().map(|x| x.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Elementary symmetric polynomials `e₀, …, e₆` by expanding `∏ (1 + qᵢ t)`.
pub fn elementary_symmetric(q: &[i64; 6]) -> [i128; 7] {
    let mut e = [0i128; 7];
    e[0] = 1;
    for (i, &x) in q.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += e[k - 1] * x as i128;
        }
    }
    e
}

impl BazaikinTuple {
    pub fn new(q: [i64; 6]) -> Self {
        BazaikinTuple { q }
    }

    pub fn sigma(&self) -> [i128; 7] {
        elementary_symmetric(&self.q)
    }

    pub fn negate(&self) -> Self {
        BazaikinTuple { q: self.q.map(|x| -x) }
    }

    /// Checks the defining conditions; returns `s`.
    pub fn validate(&self) -> Result<u64, Invalid> {
        if self.q.iter().any(|x| x.rem_euclid(2) == 0) {
            return Err(Invalid::NotAllOdd);
        }
        let sum: i64 = self.q.iter().sum();
        if sum != 0 {
            return Err(Invalid::NonzeroSum(sum));
        }
        let s3 = self.sigma()[3];
        if s3 % 8 != 0 {
            return Err(Invalid::SigmaNotDivisibleBy8(s3));
        }
        let s = (s3 / 8).abs();
        if s % 6 != 1 && s % 6 != 5 {
            return Err(Invalid::SNotPlusMinusOneMod6(s));
        }
        Ok(s as u64)
    }

    /// Sorted descending with the sign chosen so that `σ₃ > 0`.
    pub fn canonical(&self) -> Self {
        let mut t = if self.sigma()[3] < 0 { self.negate() } else { *self };
        t.q.sort_unstable_by(|a, b| b.cmp(a));
        t
    }

    pub fn invariants(&self) -> Result<InvariantVector, Invalid> {
        let s = self.validate()?;
        let e = self.canonical().sigma();
        let m = s as i128;
        Ok(InvariantVector {
            s,
            sigma2: e[2],
            sigma3: e[3],
            sigma4_mod_s: e[4].rem_euclid(m) as u64,
            sigma5_mod_s: e[5].rem_euclid(m) as u64,
        })
    }

    /// Chern-class coefficients `(c₂, c₃, c₄, c₅)` of the associated bundle,
    /// in multiples of the powers of the degree-2 generator.
    pub fn chern_classes(&self) -> Result<[i128; 4], Invalid> {
        self.validate()?;
        let e = self.canonical().sigma();
        Ok([e[2], e[3], e[4], e[5]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InvariantVector {
    pub s: u64,
    pub sigma2: i128,
    pub sigma3: i128,
    pub sigma4_mod_s: u64,
    pub sigma5_mod_s: u64,
}

impl InvariantVector {
    /// Whether the residues alone cannot decide the homeomorphism type.
    pub fn five_divides_s(&self) -> bool {
        self.s % 5 == 0
    }
}

impl fmt::Display for InvariantVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "s={} σ2={} σ3={} σ4≡{} σ5≡{} (mod s)",
            self.s, self.sigma2, self.sigma3, self.sigma4_mod_s, self.sigma5_mod_s
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Yes,
    No,
    /// At most this many homeomorphism types share the data.
    Undecided(u32),
}

impl Decision {
    pub fn is_decided(&self) -> bool {
        !matches!(self, Decision::Undecided(_))
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Yes => write!(f, "Yes"),
            Decision::No => write!(f, "No"),
            Decision::Undecided(b) => write!(f, "Undecided({b})"),
        }
    }
}

/// Homeomorphism decision from invariants. Disagreement in `s`, `σ₂` or `σ₃`
/// is decisive; agreement or residue disagreement only decides when `5 ∤ s`.
pub fn decide(a: &InvariantVector, b: &InvariantVector) -> Decision {
    if a.s != b.s || a.sigma2 != b.sigma2 || a.sigma3 != b.sigma3 {
        return Decision::No;
    }
    if a.five_divides_s() {
        return Decision::Undecided(UNDECIDED_BOUND);
    }
    if a == b {
        Decision::Yes
    } else {
        Decision::No
    }
}

pub fn homeomorphic(a: &BazaikinTuple, b: &BazaikinTuple) -> Result<Decision, Invalid> {
    Ok(decide(&a.invariants()?, &b.invariants()?))
}

/// Whether two tuples give isomorphic restricted bundles over the 6-skeleton
/// (equal `c₂` and `c₃`).
pub fn same_low_chern(a: &BazaikinTuple, b: &BazaikinTuple) -> Result<bool, Invalid> {
    let (x, y) = (a.chern_classes()?, b.chern_classes()?);
    Ok(x[0] == y[0] && x[1] == y[1])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusClass {
    pub representative: BazaikinTuple,
    pub invariants: InvariantVector,
    pub members: Vec<BazaikinTuple>,
    /// `None` when the class is one homeomorphism type; otherwise the bound.
    pub undecided_bound: Option<u32>,
    pub diffeomorphism_bound: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusReport {
    pub bound: u64,
    pub tuples: usize,
    pub classes: Vec<CensusClass>,
}

impl CensusReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("representative\ts\tsigma2\tsigma3\tsigma4_mod_s\tsigma5_mod_s\tmembers\tstatus\n");
        for c in &self.classes {
            let i = &c.invariants;
            let status = match c.undecided_bound {
                Some(b) => format!("Undecided({b})"),
                None => "decided".to_string(),
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                c.representative, i.s, i.sigma2, i.sigma3, i.sigma4_mod_s, i.sigma5_mod_s, c.members.len(), status
            ));
        }
        out.push_str(&format!(
            "# {} tuples, {} classes; each homeomorphism type carries at most {} smooth structures\n",
            self.tuples,
            self.classes.len(),
            DIFFEOMORPHISM_BOUND
        ));
        out
    }
}

/// All valid canonical tuples with `max |qᵢ| ≤ bound`, sorted.
pub fn canonical_tuples(bound: u64) -> Vec<BazaikinTuple> {
    let b = bound as i64;
    let odds: Vec<i64> = (-b..=b).filter(|x| x.rem_euclid(2) == 1).rev().collect();
    // Shard on the largest entry; within a shard entries are non-increasing.
    let mut found: Vec<BazaikinTuple> = (0..odds.len())
        .into_par_iter()
        .flat_map_iter(|first| {
            let mut local = Vec::new();
            let mut cur = [0i64; 6];
            cur[0] = odds[first];
            fill(&odds, first, 1, &mut cur, odds[first], &mut local);
            local
        })
        .collect();
    found.sort_unstable();
    found.dedup();
    found
}

fn fill(odds: &[i64], from: usize, depth: usize, cur: &mut [i64; 6], sum: i64, out: &mut Vec<BazaikinTuple>) {
    if depth == 6 {
        if sum == 0 {
            let t = BazaikinTuple { q: *cur };
            if t.validate().is_ok() && t.canonical() == t {
                out.push(t);
            }
        }
        return;
    }
    let remaining = (6 - depth) as i64;
    for i in from..odds.len() {
        let x = odds[i];
        // Remaining entries are ≤ x and ≥ the smallest odd value.
        if sum + remaining * x < 0 {
            break;
        }
        if sum + x + (remaining - 1) * odds[odds.len() - 1] > 0 {
            continue;
        }
        cur[depth] = x;
        fill(odds, i, depth + 1, cur, sum + x, out);
    }
}

pub fn census(bound: u64) -> CensusReport {
    let tuples = canonical_tuples(bound);
    let mut groups: BTreeMap<InvariantVector, Vec<BazaikinTuple>> = BTreeMap::new();
    for t in &tuples {
        let inv = t.invariants().expect("enumerated tuples are valid");
        groups.entry(inv).or_default().push(*t);
    }
    let classes = groups
        .into_iter()
        .map(|(inv, members)| CensusClass {
            representative: members[0],
            invariants: inv,
            undecided_bound: inv.five_divides_s().then_some(UNDECIDED_BOUND),
            diffeomorphism_bound: DIFFEOMORPHISM_BOUND,
            members,
        })
        .collect();
    CensusReport { bound, tuples: tuples.len(), classes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_sigma(q: &[i64; 6], k: usize) -> i128 {
        (0u32..64)
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..6).filter(|i| m >> i & 1 == 1).map(|i| q[i] as i128).product::<i128>())
            .sum()
    }

    #[test]
    fn standard_example() {
        let t: BazaikinTuple = "1,1,1,1,1,-5".parse().unwrap();
        assert_eq!(brute_sigma(&t.q, 3), -40);
        assert_eq!(brute_sigma(&t.q, 2), -15);
        assert_eq!(t.validate(), Ok(5));
        let inv = t.invariants().unwrap();
        assert_eq!((inv.s, inv.sigma2, inv.sigma3), (5, -15, 40));
        assert_eq!(t.chern_classes().unwrap()[0], -15);
        assert_eq!(homeomorphic(&t, &t).unwrap(), Decision::Undecided(25));
    }

    #[test]
    fn validation_failures() {
        assert_eq!(BazaikinTuple::new([1, 1, 1, 1, 1, 1]).validate(), Err(Invalid::NonzeroSum(6)));
        assert_eq!(BazaikinTuple::new([2, 1, 1, 1, -1, -4]).validate(), Err(Invalid::NotAllOdd));
        let t = BazaikinTuple::new([1, 1, 1, 1, -1, -3]);
        assert_eq!(brute_sigma(&t.q, 3), -8);
        assert_eq!(t.validate(), Ok(1));
        assert_eq!(t.invariants().unwrap().sigma2, -7);
        assert_eq!(homeomorphic(&t, &t).unwrap(), Decision::Yes);
    }

    #[test]
    fn recurrence_matches_expansion() {
        let t = BazaikinTuple::new([7, -3, 5, -9, 1, -1]);
        let e = t.sigma();
        for k in 0..=6 {
            assert_eq!(e[k], brute_sigma(&t.q, k));
        }
    }

    #[test]
    fn canonical_form() {
        let t = BazaikinTuple::new([1, -5, 1, 1, 1, 1]);
        assert_eq!(t.canonical().q, [5, -1, -1, -1, -1, -1]);
        assert_eq!(t.negate().canonical(), t.canonical());
    }

    #[test]
    fn census_small() {
        let r = census(5);
        let rep = BazaikinTuple::new([1, 1, 1, 1, 1, -5]).canonical();
        let class = r.classes.iter().find(|c| c.members.contains(&rep)).unwrap();
        assert_eq!(class.undecided_bound, Some(25));
        for c in &r.classes {
            for m in &c.members {
                assert_eq!(m.canonical(), *m);
            }
        }
        assert!(census(7).classes.len() >= r.classes.len());
        assert_eq!(census(5), r);
    }

    #[test]
    fn residue_witness_gives_no() {
        // Equal (σ2, σ3) but different σ4 residue with 5 ∤ s.
        let r = census(15);
        let mut by_low: BTreeMap<(u64, i128), Vec<&CensusClass>> = BTreeMap::new();
        for c in &r.classes {
            by_low.entry((c.invariants.s, c.invariants.sigma2)).or_default().push(c);
        }
        let pair = by_low
            .values()
            .filter(|v| v.len() > 1 && !v[0].invariants.five_divides_s())
            .find_map(|v| {
                v.iter().skip(1).find(|c| c.invariants.sigma4_mod_s != v[0].invariants.sigma4_mod_s).map(|c| (v[0], *c))
            })
            .expect("a witness pair exists at bound 15");
        let (a, b) = (pair.0.representative, pair.1.representative);
        assert!(same_low_chern(&a, &b).unwrap());
        assert_eq!(homeomorphic(&a, &b).unwrap(), Decision::No);
    }
}
