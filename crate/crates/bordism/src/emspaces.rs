//! Unstable mod-2 cohomology of products of Eilenberg–MacLane spaces
//! K(ℤ,n) and complex projective spaces, with the Steenrod action.
//!
//! H*(K(ℤ,n);F₂) is polynomial on the classes Sq^I l_n for admissible I with
//! excess below n and last entry above 1; H*(CP^m;F₂) is F₂[x]/(x^{m+1}).
//! A class here is a single monomial in these generators across factors.
//! Operations act through the Cartan formula; on a generator, Sq^j·Sq^I is
//! Adem-normalised and each admissible result is evaluated by instability.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fplin::Prime;
use crate::steenrod::{adem_normalize, admissible_monomials, excess, Generator, Monomial, SteenrodElement};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmError {
    #[error("operation of the mod-{0} algebra cannot act on mod-2 classes")]
    WrongPrime(Prime),
    #[error("factor {0} is not a {1} factor")]
    WrongFactor(usize, &'static str),
    #[error("`{0}` is not a valid generator of K(Z,{1})")]
    NotAGenerator(String, u32),
}

/// One factor of a product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceFactor {
    /// K(ℤ, n).
    EilenbergMacLane { n: u32 },
    /// CP^m, or CP^∞ when `top` is `None`.
    ProjectiveSpace { top: Option<u32> },
}

/// Exponent data of a class on one factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactorPart {
    /// Generator `Sq^I l_n` (keyed by I) to its exponent.
    Em(BTreeMap<Monomial, u32>),
    /// Power of x.
    Proj(u32),
}

/// A monomial class in the cohomology of a product space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnstableClass {
    parts: Vec<FactorPart>,
}

impl UnstableClass {
    pub fn parts(&self) -> &[FactorPart] {
        &self.parts
    }
}

/// A mod-2 sum of classes.
pub type Combination = BTreeSet<UnstableClass>;

fn toggle(set: &mut Combination, c: UnstableClass) {
    if !set.remove(&c) {
        set.insert(c);
    }
}

/// Admissible I with e(I) < n and last entry > 1, plus the empty word, such
/// that `n + deg(I) ≤ max_deg`, sorted by degree then monomial order.
pub fn km_generators(n: u32, max_deg: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in 0..=max_deg.saturating_sub(n) {
        for m in admissible_monomials(Prime::Two, d) {
            if m.sequence().last().is_some_and(|&l| l == 1) {
                continue;
            }
            if excess(&m) < n {
                out.push(m);
            }
        }
    }
    out
}

/// Value of `Sq^J l_n` for admissible J: zero, or a power of a generator.
fn evaluate_on_fundamental(j: &Monomial, n: u32) -> Option<(Monomial, u32)> {
    let seq = j.sequence();
    if seq.is_empty() {
        return Some((j.clone(), 1));
    }
    if *seq.last().unwrap() == 1 {
        // Sq¹ kills the reduction of an integral class.
        return None;
    }
    let e = excess(j);
    match e.cmp(&n) {
        std::cmp::Ordering::Less => Some((j.clone(), 1)),
        std::cmp::Ordering::Equal => {
            let tail = Monomial::from_sequence(Prime::Two, seq[1..].to_vec()).unwrap();
            evaluate_on_fundamental(&tail, n).map(|(g, k)| (g, 2 * k))
        }
        std::cmp::Ordering::Greater => None,
    }
}

/// A product of Eilenberg–MacLane spaces and projective spaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductSpace {
    pub factors: Vec<SpaceFactor>,
}

impl ProductSpace {
    pub fn new(factors: Vec<SpaceFactor>) -> Self {
        ProductSpace { factors }
    }

    /// K(ℤ,5) × CP², the ambient space of H*(B;F₂).
    pub fn kz5_cp2() -> Self {
        Self::new(vec![
            SpaceFactor::EilenbergMacLane { n: 5 },
            SpaceFactor::ProjectiveSpace { top: Some(2) },
        ])
    }

    pub fn one(&self) -> UnstableClass {
        UnstableClass {
            parts: self
                .factors
                .iter()
                .map(|f| match f {
                    SpaceFactor::EilenbergMacLane { .. } => FactorPart::Em(BTreeMap::new()),
                    SpaceFactor::ProjectiveSpace { .. } => FactorPart::Proj(0),
                })
                .collect(),
        }
    }

    /// The generator `Sq^I l_n` on an Eilenberg–MacLane factor.
    pub fn em_generator(&self, factor: usize, i: &[u32]) -> Result<UnstableClass, EmError> {
        let n = match self.factors.get(factor) {
            Some(SpaceFactor::EilenbergMacLane { n }) => *n,
            _ => return Err(EmError::WrongFactor(factor, "K(Z,n)")),
        };
        let m = Monomial::from_sequence(Prime::Two, i.to_vec())
            .filter(|m| excess(m) < n && m.sequence().last().is_none_or(|&l| l > 1))
            .ok_or_else(|| EmError::NotAGenerator(format!("{i:?}"), n))?;
        let mut c = self.one();
        if let FactorPart::Em(map) = &mut c.parts[factor] {
            map.insert(m, 1);
        }
        Ok(c)
    }

    /// The class x^e on a projective factor (zero beyond the truncation).
    pub fn x_power(&self, factor: usize, e: u32) -> Result<Option<UnstableClass>, EmError> {
        match self.factors.get(factor) {
            Some(SpaceFactor::ProjectiveSpace { top }) => {
                if top.is_some_and(|t| e > t) {
                    return Ok(None);
                }
                let mut c = self.one();
                c.parts[factor] = FactorPart::Proj(e);
                Ok(Some(c))
            }
            _ => Err(EmError::WrongFactor(factor, "projective")),
        }
    }

    pub fn degree(&self, c: &UnstableClass) -> u32 {
        self.factors
            .iter()
            .zip(&c.parts)
            .map(|(f, p)| match (f, p) {
                (SpaceFactor::EilenbergMacLane { n }, FactorPart::Em(map)) => {
                    map.iter().map(|(m, &e)| e * (n + m.degree())).sum::<u32>()
                }
                (SpaceFactor::ProjectiveSpace { .. }, FactorPart::Proj(e)) => 2 * e,
                _ => unreachable!(),
            })
            .sum()
    }

    /// Product of two classes; `None` when it vanishes by truncation.
    pub fn mul(&self, a: &UnstableClass, b: &UnstableClass) -> Option<UnstableClass> {
        let mut parts = Vec::with_capacity(a.parts.len());
        for ((f, pa), pb) in self.factors.iter().zip(&a.parts).zip(&b.parts) {
            parts.push(match (pa, pb) {
                (FactorPart::Em(x), FactorPart::Em(y)) => {
                    let mut m = x.clone();
                    for (g, &e) in y {
                        *m.entry(g.clone()).or_insert(0) += e;
                    }
                    FactorPart::Em(m)
                }
                (FactorPart::Proj(x), FactorPart::Proj(y)) => {
                    let e = x + y;
                    if let SpaceFactor::ProjectiveSpace { top: Some(t) } = f {
                        if e > *t {
                            return None;
                        }
                    }
                    FactorPart::Proj(e)
                }
                _ => unreachable!(),
            });
        }
        Some(UnstableClass { parts })
    }

    /// Product of two sums of classes.
    pub fn mul_comb(&self, a: &Combination, b: &Combination) -> Combination {
        let mut out = Combination::new();
        for x in a {
            for y in b {
                if let Some(p) = self.mul(x, y) {
                    toggle(&mut out, p);
                }
            }
        }
        out
    }

    /// Single-factor generators of a class, listed with multiplicity.
    fn atoms(&self, c: &UnstableClass) -> Vec<UnstableClass> {
        let mut out = Vec::new();
        for (fi, p) in c.parts.iter().enumerate() {
            match p {
                FactorPart::Em(map) => {
                    for (g, &e) in map {
                        let mut a = self.one();
                        if let FactorPart::Em(m) = &mut a.parts[fi] {
                            m.insert(g.clone(), 1);
                        }
                        out.extend(std::iter::repeat_n(a, e as usize));
                    }
                }
                FactorPart::Proj(e) => {
                    let mut a = self.one();
                    a.parts[fi] = FactorPart::Proj(1);
                    out.extend(std::iter::repeat_n(a, *e as usize));
                }
            }
        }
        out
    }

    /// Sq^j applied to a single generator.
    fn sq_atom(&self, j: u32, atom: &UnstableClass) -> Combination {
        let mut out = Combination::new();
        if j == 0 {
            out.insert(atom.clone());
            return out;
        }
        for (fi, p) in atom.parts.iter().enumerate() {
            match p {
                FactorPart::Proj(1) => {
                    // Sq²x = x², everything else vanishes.
                    if j == 2 {
                        if let Ok(Some(c)) = self.x_power(fi, 2) {
                            out.insert(c);
                        }
                    }
                    return out;
                }
                FactorPart::Em(map) if !map.is_empty() => {
                    let SpaceFactor::EilenbergMacLane { n } = self.factors[fi] else { unreachable!() };
                    let (g, _) = map.iter().next().unwrap();
                    let mut word = vec![Generator::Sq(j)];
                    word.extend(g.letters());
                    let normal = adem_normalize(Prime::Two, &word).expect("mod-2 word");
                    for (m, _) in normal.terms() {
                        if let Some((gen, e)) = evaluate_on_fundamental(m, n) {
                            let mut c = self.one();
                            if let FactorPart::Em(mm) = &mut c.parts[fi] {
                                mm.insert(gen, e);
                            }
                            toggle(&mut out, c);
                        }
                    }
                    return out;
                }
                _ => {}
            }
        }
        out
    }

    /// Sq^k of a class via the Cartan formula over its generator factors.
    pub fn sq(&self, k: u32, c: &UnstableClass) -> Combination {
        // Partial products indexed by the amount of k used so far.
        let mut layers: Vec<Combination> = vec![Combination::new(); k as usize + 1];
        layers[0].insert(self.one());
        for atom in self.atoms(c) {
            let d = self.degree(&atom);
            let mut next: Vec<Combination> = vec![Combination::new(); k as usize + 1];
            for used in 0..=k {
                if layers[used as usize].is_empty() {
                    continue;
                }
                for j in 0..=(k - used).min(d) {
                    let s = self.sq_atom(j, &atom);
                    if s.is_empty() {
                        continue;
                    }
                    for part in &layers[used as usize] {
                        for t in &s {
                            if let Some(p) = self.mul(part, t) {
                                toggle(&mut next[(used + j) as usize], p);
                            }
                        }
                    }
                }
            }
            layers = next;
        }
        layers.swap_remove(k as usize)
    }

    pub fn sq_comb(&self, k: u32, c: &Combination) -> Combination {
        let mut out = Combination::new();
        for x in c {
            for y in self.sq(k, x) {
                toggle(&mut out, y);
            }
        }
        out
    }

    /// Action of a mod-2 Steenrod element on a class.
    pub fn act(&self, op: &SteenrodElement, c: &UnstableClass) -> Result<Combination, EmError> {
        if op.prime() != Prime::Two {
            return Err(EmError::WrongPrime(op.prime()));
        }
        let mut out = Combination::new();
        for (m, _) in op.terms() {
            let mut cur: Combination = [c.clone()].into_iter().collect();
            for &i in m.sequence().iter().rev() {
                cur = self.sq_comb(i, &cur);
            }
            for y in cur {
                toggle(&mut out, y);
            }
        }
        Ok(out)
    }

    pub fn act_comb(&self, op: &SteenrodElement, c: &Combination) -> Result<Combination, EmError> {
        let mut out = Combination::new();
        for x in c {
            for y in self.act(op, x)? {
                toggle(&mut out, y);
            }
        }
        Ok(out)
    }

    /// Monomial basis in each degree `0..=max_deg`.
    pub fn product_basis(&self, max_deg: u32) -> Vec<Vec<UnstableClass>> {
        let mut atoms: Vec<(UnstableClass, u32)> = Vec::new();
        for (fi, f) in self.factors.iter().enumerate() {
            match f {
                SpaceFactor::EilenbergMacLane { n } => {
                    for g in km_generators(*n, max_deg) {
                        let c = self.em_generator(fi, g.sequence()).unwrap();
                        let d = self.degree(&c);
                        atoms.push((c, d));
                    }
                }
                SpaceFactor::ProjectiveSpace { .. } => {
                    if let Ok(Some(c)) = self.x_power(fi, 1) {
                        atoms.push((c, 2));
                    }
                }
            }
        }
        let mut by_degree: Vec<BTreeSet<UnstableClass>> = vec![BTreeSet::new(); max_deg as usize + 1];
        fn rec(
            space: &ProductSpace,
            atoms: &[(UnstableClass, u32)],
            start: usize,
            cur: UnstableClass,
            deg: u32,
            max: u32,
            out: &mut [BTreeSet<UnstableClass>],
        ) {
            out[deg as usize].insert(cur.clone());
            for i in start..atoms.len() {
                let (a, d) = &atoms[i];
                if deg + d > max {
                    continue;
                }
                if let Some(next) = space.mul(&cur, a) {
                    rec(space, atoms, i, next, deg + d, max, out);
                }
            }
        }
        rec(self, &atoms, 0, self.one(), 0, max_deg, &mut by_degree);
        by_degree
            .into_iter()
            .map(|s| {
                let mut v: Vec<UnstableClass> = s.into_iter().collect();
                v.sort_by(|a, b| self.basis_order(a, b));
                v
            })
            .collect()
    }

    /// Display order: projective exponents ascending, then the rest.
    pub fn basis_order(&self, a: &UnstableClass, b: &UnstableClass) -> std::cmp::Ordering {
        let key = |c: &UnstableClass| {
            c.parts
                .iter()
                .filter_map(|p| match p {
                    FactorPart::Proj(e) => Some(*e),
                    _ => None,
                })
                .collect::<Vec<_>>()
        };
        key(a).cmp(&key(b)).then_with(|| a.cmp(b))
    }

    pub fn name(&self, c: &UnstableClass) -> String {
        let mut pieces = Vec::new();
        for (f, p) in self.factors.iter().zip(&c.parts) {
            if let FactorPart::Proj(e) = p {
                match e {
                    0 => {}
                    1 => pieces.push("x".to_string()),
                    e => pieces.push(format!("x^{e}")),
                }
            }
            let _ = f;
        }
        for (f, p) in self.factors.iter().zip(&c.parts) {
            if let (SpaceFactor::EilenbergMacLane { n }, FactorPart::Em(map)) = (f, p) {
                for (g, &e) in map {
                    let base = if g.is_unit() { format!("l{n}") } else { format!("{g}l{n}") };
                    pieces.push(if e == 1 { base } else { format!("({base})^{e}") });
                }
            }
        }
        if pieces.is_empty() {
            "1".to_string()
        } else {
            pieces.join("*")
        }
    }

    pub fn comb_name(&self, c: &Combination) -> String {
        if c.is_empty() {
            return "0".into();
        }
        let mut v: Vec<&UnstableClass> = c.iter().collect();
        v.sort_by(|a, b| self.basis_order(a, b));
        v.iter().map(|x| self.name(x)).collect::<Vec<_>>().join(" + ")
    }
}

/// One row of a fixture table of named classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedClass {
    pub degree: u32,
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EmTableFile {
    provenance: String,
    prime: u32,
    n: u32,
    max_degree: u32,
    classes: Vec<NamedClass>,
}

/// Mod-3 cohomology of K(ℤ,5) through degree 14, read from fixture data
/// rather than computed (the mod-3 unstable conditions are not rederived).
pub fn kz5_mod3_table() -> Vec<NamedClass> {
    let file: EmTableFile = serde_json::from_str(include_str!("../fixtures/kz5_mod3.json"))
        .expect("bundled K(Z,5) mod-3 table is valid");
    debug_assert_eq!((file.prime, file.n, file.max_degree), (3, 5, 14));
    file.classes
}

impl fmt::Display for SpaceFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceFactor::EilenbergMacLane { n } => write!(f, "K(Z,{n})"),
            SpaceFactor::ProjectiveSpace { top: Some(m) } => write!(f, "CP^{m}"),
            SpaceFactor::ProjectiveSpace { top: None } => write!(f, "CP^inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(space: &ProductSpace, v: &[UnstableClass]) -> Vec<String> {
        v.iter().map(|c| space.name(c)).collect()
    }

    #[test]
    fn kz5_generators_low_degrees() {
        let g = km_generators(5, 8);
        let by_deg = |d| g.iter().filter(|m| 5 + m.degree() == d).map(|m| m.to_string()).collect::<Vec<_>>();
        assert_eq!(by_deg(5), vec!["1"]);
        assert_eq!(by_deg(6), Vec::<String>::new());
        assert_eq!(by_deg(7), vec!["Sq2"]);
        assert_eq!(by_deg(8), vec!["Sq3"]);
    }

    #[test]
    fn instability_and_projective_squares() {
        let s = ProductSpace::kz5_cp2();
        let l5 = s.em_generator(0, &[]).unwrap();
        let sq5 = s.sq(5, &l5);
        assert_eq!(s.comb_name(&sq5), "(l5)^2");
        assert!(s.sq(6, &l5).is_empty());
        assert!(s.sq(1, &l5).is_empty());
        let x = s.x_power(1, 1).unwrap().unwrap();
        assert_eq!(s.comb_name(&s.sq(2, &x)), "x^2");
        let x2 = s.x_power(1, 2).unwrap().unwrap();
        // Sq²(x²) = 2x³ = 0, and x³ = 0 in CP² anyway.
        assert!(s.sq(2, &x2).is_empty());
        assert!(s.x_power(1, 3).unwrap().is_none());
    }

    #[test]
    fn sq2_sq2_on_l5_vanishes() {
        let s = ProductSpace::kz5_cp2();
        let sq2l5 = s.em_generator(0, &[2]).unwrap();
        assert!(s.sq(2, &sq2l5).is_empty());
        let op = adem_normalize(Prime::Two, &[Generator::Sq(2), Generator::Sq(2)]).unwrap();
        let l5 = s.em_generator(0, &[]).unwrap();
        assert!(s.act(&op, &l5).unwrap().is_empty());
    }

    #[test]
    fn product_bases() {
        let s = ProductSpace::kz5_cp2();
        let b = s.product_basis(9);
        assert_eq!(names(&s, &b[7]), vec!["Sq2l5", "x*l5"]);
        assert_eq!(names(&s, &b[9]), vec!["Sq4l5", "x*Sq2l5", "x^2*l5"]);
        let cp2 = ProductSpace::new(vec![SpaceFactor::ProjectiveSpace { top: Some(2) }]);
        let b = cp2.product_basis(6);
        assert!(b[6].is_empty());
        assert_eq!(b[4].len(), 1);
    }

    #[test]
    fn wrong_prime_rejected() {
        let s = ProductSpace::kz5_cp2();
        let l5 = s.em_generator(0, &[]).unwrap();
        let beta = SteenrodElement::generator(Generator::Beta);
        assert_eq!(s.act(&beta, &l5), Err(EmError::WrongPrime(Prime::Three)));
    }

    #[test]
    fn mod3_table_matches_degrees() {
        let t = kz5_mod3_table();
        let degs: Vec<u32> = t.iter().map(|c| c.degree).collect();
        assert_eq!(degs, vec![5, 9, 10, 13, 14, 14]);
    }
}
