//! The mod-2 and mod-3 Steenrod algebras in the admissible basis.
//!
//! A monomial is stored by its exponent sequence: `(i₁,…,i_r)` for
//! `Sq^{i₁}⋯Sq^{i_r}` at p = 2, and `(ε₀,s₁,ε₁,…,s_k,ε_k)` for
//! `β^{ε₀}P^{s₁}β^{ε₁}⋯P^{s_k}β^{ε_k}` at p = 3 (the unit is the empty
//! sequence, and a lone Bockstein is `(1)`). Products are reduced to
//! admissible form with the Adem relations; binomial coefficients mod p come
//! from Lucas' theorem. Left multiplication of an admissible monomial by a
//! single generator is memoised in a process-wide cache.
//!
//! Monomials are ordered lexicographically on exponent sequences, larger
//! first, with a longer sequence preceding any of its prefixes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use once_cell::sync::Lazy;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fplin::{FpVector, Prime, Subspace};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SteenrodError {
    #[error("generator {0} does not belong to the mod-{1} Steenrod algebra")]
    WrongPrime(Generator, Prime),
    #[error("subalgebra {0:?} is only defined at p = 2")]
    SubalgebraNeedsPrimeTwo(Subalgebra),
    #[error("cannot parse Steenrod word `{0}`")]
    Parse(String),
}

/// A single algebra generator as it appears in a (possibly non-admissible) word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Generator {
    Sq(u32),
    Beta,
    P(u32),
}

impl Generator {
    pub fn prime(self) -> Prime {
        match self {
            Generator::Sq(_) => Prime::Two,
            _ => Prime::Three,
        }
    }

    pub fn degree(self) -> u32 {
        match self {
            Generator::Sq(i) => i,
            Generator::Beta => 1,
            Generator::P(i) => 4 * i,
        }
    }

    /// Parses `Sq4`, `P1`, `b` (or `beta`).
    pub fn parse(s: &str) -> Result<Self, SteenrodError> {
        let bad = || SteenrodError::Parse(s.to_string());
        if s == "b" || s == "beta" || s == "β" {
            Ok(Generator::Beta)
        } else if let Some(rest) = s.strip_prefix("Sq") {
            rest.parse().map(Generator::Sq).map_err(|_| bad())
        } else if let Some(rest) = s.strip_prefix('P') {
            rest.parse().map(Generator::P).map_err(|_| bad())
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Sq(i) => write!(f, "Sq{i}"),
            Generator::Beta => write!(f, "b"),
            Generator::P(i) => write!(f, "P{i}"),
        }
    }
}

/// Which algebra a computation runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subalgebra {
    Full,
    A1,
    A2,
}

impl Subalgebra {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "a" => Some(Subalgebra::Full),
            "a1" | "a(1)" => Some(Subalgebra::A1),
            "a2" | "a(2)" => Some(Subalgebra::A2),
            _ => None,
        }
    }

    /// Multiplicative generators, in the fixed order used for word bases.
    /// For the full algebras the list runs up to `max_degree`.
    pub fn generators(self, prime: Prime, max_degree: u32) -> Result<Vec<Generator>, SteenrodError> {
        match (prime, self) {
            (Prime::Two, Subalgebra::A1) => Ok(vec![Generator::Sq(1), Generator::Sq(2)]),
            (Prime::Two, Subalgebra::A2) => {
                Ok(vec![Generator::Sq(1), Generator::Sq(2), Generator::Sq(4)])
            }
            (Prime::Two, Subalgebra::Full) => {
                let mut g = Vec::new();
                let mut i = 1;
                while i <= max_degree.max(1) {
                    g.push(Generator::Sq(i));
                    i *= 2;
                }
                Ok(g)
            }
            (Prime::Three, Subalgebra::Full) => {
                let mut g = vec![Generator::Beta];
                let mut i = 1;
                while 4 * i <= max_degree.max(4) {
                    g.push(Generator::P(i));
                    i *= 3;
                }
                Ok(g)
            }
            (Prime::Three, sub) => Err(SteenrodError::SubalgebraNeedsPrimeTwo(sub)),
        }
    }

    /// Top nonzero degree for the finite subalgebras.
    pub fn top_degree(self) -> Option<u32> {
        match self {
            Subalgebra::A1 => Some(6),
            Subalgebra::A2 => Some(23),
            Subalgebra::Full => None,
        }
    }
}

/// An admissible monomial, identified by its exponent sequence.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial {
    prime: Prime,
    seq: Vec<u32>,
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.prime.cmp(&other.prime).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Monomial {
    pub fn unit(prime: Prime) -> Self {
        Monomial { prime, seq: Vec::new() }
    }

    /// `Sq^{i₁}⋯Sq^{i_r}`; panics if the sequence is not admissible.
    pub fn sq(exponents: &[u32]) -> Self {
        let m = Monomial { prime: Prime::Two, seq: exponents.to_vec() };
        assert!(m.is_admissible(), "Sq{exponents:?} is not admissible");
        m
    }

    /// From an exponent sequence in the module's convention; validates admissibility.
    pub fn from_sequence(prime: Prime, seq: Vec<u32>) -> Option<Self> {
        let m = Monomial { prime, seq };
        m.is_admissible().then_some(m)
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn sequence(&self) -> &[u32] {
        &self.seq
    }

    pub fn is_unit(&self) -> bool {
        self.seq.is_empty()
    }

    pub fn degree(&self) -> u32 {
        match self.prime {
            Prime::Two => self.seq.iter().sum(),
            Prime::Three => self
                .seq
                .iter()
                .enumerate()
                .map(|(i, &e)| if i % 2 == 0 { e } else { 4 * e })
                .sum(),
        }
    }

    pub fn is_admissible(&self) -> bool {
        match self.prime {
            Prime::Two => {
                self.seq.iter().all(|&i| i > 0) && self.seq.windows(2).all(|w| w[0] >= 2 * w[1])
            }
            Prime::Three => {
                let s = &self.seq;
                if s.is_empty() {
                    return true;
                }
                if s.len() % 2 == 0 || s.iter().step_by(2).any(|&e| e > 1) {
                    return false;
                }
                if s.len() == 1 {
                    return s[0] == 1;
                }
                // s[1], s[3], … are the P exponents, s[2], s[4], … the ε's between them.
                let powers: Vec<u32> = s.iter().skip(1).step_by(2).copied().collect();
                if powers.iter().any(|&p| p == 0) {
                    return false;
                }
                powers.windows(2).enumerate().all(|(j, w)| w[0] >= 3 * w[1] + s[2 * j + 2])
            }
        }
    }

    /// The generator word spelled by this monomial.
    pub fn letters(&self) -> Vec<Generator> {
        match self.prime {
            Prime::Two => self.seq.iter().map(|&i| Generator::Sq(i)).collect(),
            Prime::Three => {
                let mut out = Vec::new();
                for (i, &e) in self.seq.iter().enumerate() {
                    if i % 2 == 0 {
                        if e == 1 {
                            out.push(Generator::Beta);
                        }
                    } else {
                        out.push(Generator::P(e));
                    }
                }
                out
            }
        }
    }

    /// Inverse of [`letters`](Self::letters) for an admissible word.
    fn from_letters(prime: Prime, letters: &[Generator]) -> Self {
        match prime {
            Prime::Two => Monomial {
                prime,
                seq: letters
                    .iter()
                    .map(|g| match g {
                        Generator::Sq(i) => *i,
                        _ => unreachable!(),
                    })
                    .collect(),
            },
            Prime::Three => {
                let mut seq = vec![0];
                for g in letters {
                    match g {
                        Generator::Beta => *seq.last_mut().unwrap() = 1,
                        Generator::P(s) => {
                            seq.push(*s);
                            seq.push(0);
                        }
                        Generator::Sq(_) => unreachable!(),
                    }
                }
                if seq == [0] {
                    seq.clear();
                }
                Monomial { prime, seq }
            }
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.seq.is_empty() {
            return write!(f, "1");
        }
        for g in self.letters() {
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Excess `2i₁ − Σi_j` of a mod-2 admissible monomial (0 for the unit).
pub fn excess(m: &Monomial) -> u32 {
    debug_assert_eq!(m.prime, Prime::Two);
    match m.seq.first() {
        None => 0,
        Some(&first) => 2 * first - m.seq.iter().sum::<u32>(),
    }
}

/// A homogeneous F_p-linear combination of admissible monomials.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SteenrodElement {
    prime: Prime,
    degree: u32,
    terms: BTreeMap<Monomial, u8>,
}

impl SteenrodElement {
    pub fn zero(prime: Prime, degree: u32) -> Self {
        SteenrodElement { prime, degree, terms: BTreeMap::new() }
    }

    pub fn unit(prime: Prime) -> Self {
        Self::from_monomial(Monomial::unit(prime))
    }

    pub fn from_monomial(m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        let (prime, degree) = (m.prime, m.degree());
        terms.insert(m, 1);
        SteenrodElement { prime, degree, terms }
    }

    pub fn generator(g: Generator) -> Self {
        let prime = g.prime();
        match g {
            Generator::Sq(0) | Generator::P(0) => Self::unit(prime),
            _ => Self::from_monomial(Monomial::from_letters(prime, &[g])),
        }
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, u8)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: &Monomial) -> u8 {
        self.terms.get(m).copied().unwrap_or(0)
    }

    pub fn leading_monomial(&self) -> Option<&Monomial> {
        self.terms.keys().next()
    }

    pub fn add_term(&mut self, m: Monomial, c: u8) {
        let p = self.prime.value() as u8;
        let c = c % p;
        if c == 0 {
            return;
        }
        debug_assert_eq!(m.degree(), self.degree);
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let n = (*o.get() + c) % p;
                if n == 0 {
                    o.remove();
                } else {
                    *o.get_mut() = n;
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &SteenrodElement, c: u8) {
        if other.is_zero() {
            return;
        }
        assert_eq!(self.degree, other.degree, "adding elements of different degrees");
        for (m, &k) in &other.terms {
            self.add_term(m.clone(), k * c);
        }
    }

    pub fn scaled(&self, c: u8) -> SteenrodElement {
        let mut out = SteenrodElement::zero(self.prime, self.degree);
        out.add_scaled(self, c);
        out
    }

    /// Product `self · other`, reduced to admissible form.
    pub fn mul(&self, other: &SteenrodElement) -> SteenrodElement {
        assert_eq!(self.prime, other.prime);
        let mut out = SteenrodElement::zero(self.prime, self.degree + other.degree);
        for (m, &c) in &self.terms {
            let mut acc = other.clone();
            for g in m.letters().into_iter().rev() {
                acc = left_mul_element(g, &acc);
            }
            out.add_scaled(&acc, c);
        }
        out
    }

    /// Coordinates against an ordered list of monomials (missing ones ignored).
    pub fn to_vector(&self, index: &HashMap<Monomial, usize>, len: usize) -> FpVector {
        let mut v = FpVector::zero(self.prime, len);
        for (m, &c) in &self.terms {
            let i = *index.get(m).expect("monomial outside the indexed basis");
            v.set(i, c);
        }
        v
    }
}

impl fmt::Display for SteenrodElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, &c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if c != 1 {
                write!(f, "{c}")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for SteenrodElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// `C(n, k) mod p` by Lucas' theorem; zero when `k < 0` or `k > n`.
pub fn binom_mod(n: i64, k: i64, p: u32) -> u8 {
    if k < 0 || n < 0 || k > n {
        return 0;
    }
    let p = p as i64;
    let (mut n, mut k) = (n, k);
    let mut acc: i64 = 1;
    while n > 0 || k > 0 {
        let (ni, ki) = (n % p, k % p);
        if ki > ni {
            return 0;
        }
        // Digits are below 3, so a direct small binomial is exact.
        let c = match (ni, ki) {
            (_, 0) => 1,
            (a, 1) => a,
            (2, 2) => 1,
            _ => unreachable!(),
        };
        acc = acc * c % p;
        n /= p;
        k /= p;
    }
    acc as u8
}

type LetterCache = HashMap<(Generator, Monomial), Arc<SteenrodElement>>;

static LEFT_MUL_CACHE: Lazy<RwLock<LetterCache>> = Lazy::new(|| RwLock::new(HashMap::new()));

fn sign3(exp: u32) -> u8 {
    if exp % 2 == 0 {
        1
    } else {
        2
    }
}

/// `g · m` for a single generator and an admissible monomial.
fn left_mul(g: Generator, m: &Monomial) -> Arc<SteenrodElement> {
    let key = (g, m.clone());
    if let Some(hit) = LEFT_MUL_CACHE.read().get(&key) {
        return hit.clone();
    }
    let value = Arc::new(compute_left_mul(g, m));
    LEFT_MUL_CACHE.write().entry(key).or_insert(value).clone()
}

fn left_mul_element(g: Generator, x: &SteenrodElement) -> SteenrodElement {
    let mut out = SteenrodElement::zero(x.prime, x.degree + g.degree());
    for (m, &c) in &x.terms {
        out.add_scaled(&left_mul(g, m), c);
    }
    out
}

fn compute_left_mul(g: Generator, m: &Monomial) -> SteenrodElement {
    let prime = m.prime;
    let degree = g.degree() + m.degree();
    let letters = m.letters();
    let prepend = || {
        let mut w = vec![g];
        w.extend_from_slice(&letters);
        SteenrodElement::from_monomial(Monomial::from_letters(prime, &w))
    };
    match g {
        Generator::Sq(0) | Generator::P(0) => SteenrodElement::from_monomial(m.clone()),
        Generator::Sq(a) => {
            let b = match letters.first() {
                None => return prepend(),
                Some(Generator::Sq(b)) => *b,
                Some(_) => unreachable!(),
            };
            if a >= 2 * b {
                return prepend();
            }
            let rest = Monomial::from_letters(prime, &letters[1..]);
            let mut out = SteenrodElement::zero(prime, degree);
            for j in 0..=a / 2 {
                if binom_mod((b - 1 - j) as i64, (a - 2 * j) as i64, 2) == 0 {
                    continue;
                }
                let inner = left_mul(Generator::Sq(j), &rest);
                out.add_scaled(&left_mul_element(Generator::Sq(a + b - j), &inner), 1);
            }
            out
        }
        Generator::Beta => match letters.first() {
            Some(Generator::Beta) => SteenrodElement::zero(prime, degree),
            _ => prepend(),
        },
        Generator::P(a) => match letters.first() {
            None => prepend(),
            Some(Generator::P(b)) => {
                let b = *b;
                if a >= 3 * b {
                    return prepend();
                }
                let rest = Monomial::from_letters(prime, &letters[1..]);
                let mut out = SteenrodElement::zero(prime, degree);
                for j in 0..=a / 3 {
                    let c = binom_mod(2 * (b - j) as i64 - 1, (a - 3 * j) as i64, 3);
                    if c == 0 {
                        continue;
                    }
                    let c = c * sign3(a + j) % 3;
                    let inner = left_mul(Generator::P(j), &rest);
                    out.add_scaled(&left_mul_element(Generator::P(a + b - j), &inner), c);
                }
                out
            }
            Some(Generator::Beta) => {
                let b = match letters.get(1) {
                    None => return prepend(),
                    Some(Generator::P(b)) => *b,
                    Some(_) => unreachable!(),
                };
                if a > 3 * b {
                    return prepend();
                }
                let rest = Monomial::from_letters(prime, &letters[2..]);
                let mut out = SteenrodElement::zero(prime, degree);
                for j in 0..=a / 3 {
                    let inner = left_mul(Generator::P(j), &rest);
                    let c1 = binom_mod(2 * (b - j) as i64, (a - 3 * j) as i64, 3);
                    if c1 != 0 {
                        let t = left_mul_element(Generator::P(a + b - j), &inner);
                        let t = left_mul_element(Generator::Beta, &t);
                        out.add_scaled(&t, c1 * sign3(a + j) % 3);
                    }
                    let c2 = binom_mod(2 * (b - j) as i64 - 1, (a - 3 * j) as i64 - 1, 3);
                    if c2 != 0 {
                        let t = left_mul_element(Generator::Beta, &inner);
                        let t = left_mul_element(Generator::P(a + b - j), &t);
                        out.add_scaled(&t, c2 * sign3(a + j + 1) % 3);
                    }
                }
                out
            }
            Some(Generator::Sq(_)) => unreachable!(),
        },
    }
}

/// Reduces a word of generators to admissible normal form.
pub fn adem_normalize(prime: Prime, word: &[Generator]) -> Result<SteenrodElement, SteenrodError> {
    if let Some(g) = word.iter().find(|g| g.prime() != prime) {
        return Err(SteenrodError::WrongPrime(*g, prime));
    }
    let mut acc = SteenrodElement::unit(prime);
    for &g in word.iter().rev() {
        acc = left_mul_element(g, &acc);
    }
    Ok(acc)
}

/// Parses a word such as `Sq2 Sq3` or `P1 b` (whitespace or `*` separated).
pub fn parse_word(s: &str) -> Result<Vec<Generator>, SteenrodError> {
    s.split(|c: char| c.is_whitespace() || c == '*')
        .filter(|t| !t.is_empty())
        .map(Generator::parse)
        .collect()
}

/// All admissible monomials of a degree, in monomial order.
pub fn admissible_monomials(prime: Prime, degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    match prime {
        Prime::Two => {
            fn rec(rem: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
                if rem == 0 {
                    out.push(Monomial { prime: Prime::Two, seq: cur.clone() });
                    return;
                }
                for i in (1..=rem.min(max)).rev() {
                    cur.push(i);
                    rec(rem - i, i / 2, cur, out);
                    cur.pop();
                }
            }
            rec(degree, degree, &mut Vec::new(), &mut out);
        }
        Prime::Three => {
            // cur = [ε₀, s₁, ε₁, …]; `max` bounds the next P exponent.
            fn rec(rem: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
                if rem == 0 {
                    let mut seq = cur.clone();
                    if seq == [0] {
                        seq.clear();
                    }
                    out.push(Monomial { prime: Prime::Three, seq });
                }
                for s in 1..=max.min(rem / 4) {
                    for e in 0..=1u32 {
                        if 4 * s + e > rem {
                            continue;
                        }
                        cur.push(s);
                        cur.push(e);
                        rec(rem - 4 * s - e, (s - e) / 3, cur, out);
                        cur.pop();
                        cur.pop();
                    }
                }
            }
            for e0 in 0..=1u32 {
                if e0 > degree {
                    continue;
                }
                let mut cur = vec![e0];
                rec(degree - e0, u32::MAX, &mut cur, &mut out);
            }
        }
    }
    out.sort();
    out
}

/// A basis of the chosen (sub)algebra in one degree.
///
/// For the full algebra these are the admissible monomials. For A(1) and
/// A(2) the degree piece is generally not spanned by monomials (for example
/// `Sq²Sq¹Sq² = Sq⁵ + Sq⁴Sq¹` in A(1)), so the basis is the reduced echelon
/// form of the span, each element led by a distinct monomial.
pub fn algebra_basis(prime: Prime, sub: Subalgebra, degree: u32) -> Result<Vec<SteenrodElement>, SteenrodError> {
    if sub == Subalgebra::Full {
        return Ok(admissible_monomials(prime, degree)
            .into_iter()
            .map(SteenrodElement::from_monomial)
            .collect());
    }
    if prime != Prime::Two {
        return Err(SteenrodError::SubalgebraNeedsPrimeTwo(sub));
    }
    let table = AlgebraTable::get(prime, sub, degree)?;
    let Some(piece) = table.pieces.get(degree as usize) else { return Ok(Vec::new()) };
    let monos = &piece.ambient;
    let rows: Vec<FpVector> = piece.vectors.clone();
    let m = crate::fplin::FpMatrix::from_vectors(prime, monos.len(), rows);
    let (ech, pivots) = m.row_reduce();
    Ok((0..pivots.len())
        .map(|r| {
            let mut e = SteenrodElement::zero(prime, degree);
            for (c, v) in ech.row(r).iter_nonzero() {
                e.add_term(monos[c].clone(), v);
            }
            e
        })
        .collect())
}

/// Whether an element lies in the subalgebra.
pub fn in_subalgebra(x: &SteenrodElement, sub: Subalgebra) -> Result<bool, SteenrodError> {
    if sub == Subalgebra::Full || x.is_zero() {
        return Ok(true);
    }
    let table = AlgebraTable::get(x.prime, sub, x.degree)?;
    Ok(table.coordinates(x).is_some())
}

/// One term of a Cartan expansion `op(ab) = Σ ± left(a)·right(b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CartanPair {
    pub left: SteenrodElement,
    pub right: SteenrodElement,
    /// When set, the term carries the sign `(−1)^{|a|}` (Bockstein rule).
    pub graded_sign: bool,
}

/// Cartan expansion of `Sq^k` (p = 2) or `P^k` (p = 3).
pub fn cartan_pairs(prime: Prime, k: u32) -> Vec<CartanPair> {
    let op = |i: u32| match prime {
        Prime::Two => SteenrodElement::generator(Generator::Sq(i)),
        Prime::Three => SteenrodElement::generator(Generator::P(i)),
    };
    (0..=k)
        .map(|i| CartanPair { left: op(i), right: op(k - i), graded_sign: false })
        .collect()
}

/// The derivation rule `β(ab) = (βa)b + (−1)^{|a|} a(βb)`.
pub fn bockstein_pairs() -> Vec<CartanPair> {
    let b = SteenrodElement::generator(Generator::Beta);
    let one = SteenrodElement::unit(Prime::Three);
    vec![
        CartanPair { left: b.clone(), right: one.clone(), graded_sign: false },
        CartanPair { left: one, right: b, graded_sign: true },
    ]
}

/// How a word-basis element was produced: the unit, or `generator · lower`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipe {
    Unit,
    Left { generator: usize, lower: usize },
}

/// One graded piece of an [`AlgebraTable`].
#[derive(Debug, Clone)]
pub struct AlgebraPiece {
    /// Admissible monomials of this degree (ambient coordinates).
    pub ambient: Vec<Monomial>,
    ambient_index: HashMap<Monomial, usize>,
    /// Basis elements, as ambient vectors.
    pub vectors: Vec<FpVector>,
    pub recipes: Vec<Recipe>,
    /// Echelon form of `vector ⊕ unit` rows for coordinate extraction.
    coords: Subspace,
}

/// A graded algebra (A(1), A(2), or a degree-truncated full algebra) with a
/// *word basis*: in each degree, basis elements are chosen greedily from
/// products `generator · (lower basis element)`. Every basis element thus
/// has a recipe for acting on a module through generator matrices alone.
#[derive(Debug)]
pub struct AlgebraTable {
    pub prime: Prime,
    pub sub: Subalgebra,
    pub generators: Vec<Generator>,
    pub pieces: Vec<AlgebraPiece>,
    /// `products[d1][i][d2][j]`, filled for `d1 + d2 ≤ max_degree`.
    products: Vec<Vec<Vec<Vec<FpVector>>>>,
}

type TableCache = HashMap<(Prime, Subalgebra), Arc<AlgebraTable>>;
static TABLES: Lazy<RwLock<TableCache>> = Lazy::new(|| RwLock::new(HashMap::new()));

impl AlgebraTable {
    /// Cached table covering at least `max_degree`.
    pub fn get(prime: Prime, sub: Subalgebra, max_degree: u32) -> Result<Arc<AlgebraTable>, SteenrodError> {
        let want = match sub.top_degree() {
            Some(top) => top,
            None => max_degree,
        };
        if let Some(t) = TABLES.read().get(&(prime, sub)) {
            if t.max_degree() >= want {
                return Ok(t.clone());
            }
        }
        let table = Arc::new(Self::build(prime, sub, want)?);
        let mut w = TABLES.write();
        let entry = w.entry((prime, sub)).or_insert_with(|| table.clone());
        if entry.max_degree() < want {
            *entry = table.clone();
        }
        Ok(entry.clone())
    }

    pub fn max_degree(&self) -> u32 {
        self.pieces.len() as u32 - 1
    }

    pub fn dim(&self, degree: u32) -> usize {
        self.pieces.get(degree as usize).map_or(0, |p| p.vectors.len())
    }

    pub fn total_dim(&self) -> usize {
        self.pieces.iter().map(|p| p.vectors.len()).sum()
    }

    pub fn build(prime: Prime, sub: Subalgebra, max_degree: u32) -> Result<Self, SteenrodError> {
        let generators = sub.generators(prime, max_degree)?;
        let mut pieces: Vec<AlgebraPiece> = Vec::new();
        for d in 0..=max_degree {
            let ambient = admissible_monomials(prime, d);
            let ambient_index: HashMap<Monomial, usize> =
                ambient.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
            let n = ambient.len();
            let mut span = Subspace::new(prime, n);
            let mut vectors = Vec::new();
            let mut recipes = Vec::new();
            if d == 0 {
                let v = FpVector::unit(prime, 1, 0);
                span.insert(&v);
                vectors.push(v);
                recipes.push(Recipe::Unit);
            } else {
                for (gi, g) in generators.iter().enumerate() {
                    let gd = g.degree();
                    if gd > d {
                        continue;
                    }
                    let lower = &pieces[(d - gd) as usize];
                    for (li, lv) in lower.vectors.iter().enumerate() {
                        let mut x = SteenrodElement::zero(prime, d - gd);
                        for (c, v) in lv.iter_nonzero() {
                            x.add_term(lower.ambient[c].clone(), v);
                        }
                        let prod = left_mul_element(*g, &x);
                        let v = prod.to_vector(&ambient_index, n);
                        if span.insert(&v) {
                            vectors.push(v);
                            recipes.push(Recipe::Left { generator: gi, lower: li });
                        }
                    }
                }
            }
            let k = vectors.len();
            let mut coords = Subspace::new(prime, n + k);
            for (i, v) in vectors.iter().enumerate() {
                coords.insert(&v.concat(&FpVector::unit(prime, k, i)));
            }
            pieces.push(AlgebraPiece { ambient, ambient_index, vectors, recipes, coords });
        }
        let mut table = AlgebraTable { prime, sub, generators, pieces, products: Vec::new() };
        table.fill_products();
        Ok(table)
    }

    fn element(&self, degree: u32, i: usize) -> SteenrodElement {
        let piece = &self.pieces[degree as usize];
        let mut x = SteenrodElement::zero(self.prime, degree);
        for (c, v) in piece.vectors[i].iter_nonzero() {
            x.add_term(piece.ambient[c].clone(), v);
        }
        x
    }

    /// Basis element `i` of a degree as a Steenrod element.
    pub fn basis_element(&self, degree: u32, i: usize) -> SteenrodElement {
        self.element(degree, i)
    }

    /// Coordinates of `x` in the word basis, or `None` if `x` is outside the algebra.
    pub fn coordinates(&self, x: &SteenrodElement) -> Option<FpVector> {
        let piece = self.pieces.get(x.degree as usize)?;
        let n = piece.ambient.len();
        let k = piece.vectors.len();
        let v = x.to_vector(&piece.ambient_index, n).concat(&FpVector::zero(self.prime, k));
        let mut w = v;
        piece.coords.reduce(&mut w);
        if w.slice(0, n).is_zero() {
            let mut c = w.slice(n, n + k);
            c.scale(self.prime.neg(1));
            Some(c)
        } else {
            None
        }
    }

    fn fill_products(&mut self) {
        let top = self.max_degree();
        let mut products = Vec::new();
        for d1 in 0..=top {
            let mut by_i = Vec::new();
            for i in 0..self.dim(d1) {
                let a = self.element(d1, i);
                let mut by_d2 = Vec::new();
                for d2 in 0..=(top - d1) {
                    let row: Vec<FpVector> = (0..self.dim(d2))
                        .map(|j| {
                            let prod = a.mul(&self.element(d2, j));
                            self.coordinates(&prod).expect("subalgebra closed under products")
                        })
                        .collect();
                    by_d2.push(row);
                }
                by_i.push(by_d2);
            }
            products.push(by_i);
        }
        self.products = products;
    }

    /// Coordinates of `basis(d1,i) · basis(d2,j)` in degree `d1 + d2`.
    pub fn product(&self, d1: u32, i: usize, d2: u32, j: usize) -> &FpVector {
        &self.products[d1 as usize][i][d2 as usize][j]
    }

    pub fn label(&self, degree: u32, i: usize) -> String {
        self.element(degree, i).to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Generator::*;

    fn sq(e: &[u32]) -> SteenrodElement {
        SteenrodElement::from_monomial(Monomial::sq(e))
    }

    fn n2(w: &[Generator]) -> SteenrodElement {
        adem_normalize(Prime::Two, w).unwrap()
    }

    #[test]
    fn adem_examples() {
        assert!(n2(&[Sq(1), Sq(1)]).is_zero());
        assert_eq!(n2(&[Sq(2), Sq(2)]), sq(&[3, 1]));
        let mut e = sq(&[5]);
        e.add_scaled(&sq(&[4, 1]), 1);
        assert_eq!(n2(&[Sq(2), Sq(3)]), e);
    }

    /// Sq^a Sq^b through the Adem sum written out directly.
    fn adem_oracle(a: u32, b: u32) -> SteenrodElement {
        let mut out = SteenrodElement::zero(Prime::Two, a + b);
        for j in 0..=a / 2 {
            let mut num: u64 = 1;
            let n = (b - 1 - j) as u64;
            let k = (a - 2 * j) as u64;
            if k > n {
                continue;
            }
            for t in 0..k {
                num = num * (n - t) / (t + 1);
            }
            if num % 2 == 1 {
                let m = if j == 0 { vec![a + b] } else { vec![a + b - j, j] };
                out.add_scaled(&sq(&m), 1);
            }
        }
        out
    }

    #[test]
    fn adem_pairs_match_integer_binomials() {
        for b in 1..8 {
            for a in 1..2 * b {
                assert_eq!(n2(&[Sq(a), Sq(b)]), adem_oracle(a, b), "Sq{a}Sq{b}");
            }
        }
    }

    #[test]
    fn mod3_relations() {
        let p = Prime::Three;
        assert!(adem_normalize(p, &[Beta, Beta]).unwrap().is_zero());
        // P¹P¹ = 2P².
        let pp = adem_normalize(p, &[P(1), P(1)]).unwrap();
        let p2 = SteenrodElement::generator(P(2));
        assert_eq!(pp, p2.scaled(2));
        // P¹βP¹ = βP² + P²β.
        let x = adem_normalize(p, &[P(1), Beta, P(1)]).unwrap();
        let mut e = adem_normalize(p, &[Beta, P(2)]).unwrap();
        e.add_scaled(&adem_normalize(p, &[P(2), Beta]).unwrap(), 1);
        assert_eq!(x, e);
    }

    #[test]
    fn mixed_primes_rejected() {
        assert!(adem_normalize(Prime::Two, &[Sq(1), Beta]).is_err());
        assert!(adem_normalize(Prime::Three, &[P(1), Sq(2)]).is_err());
    }

    #[test]
    fn excess_examples() {
        assert_eq!(excess(&Monomial::sq(&[1])), 1);
        assert_eq!(excess(&Monomial::sq(&[4, 2, 1])), 1);
        assert_eq!(excess(&Monomial::sq(&[2, 1])), 1);
        assert_eq!(excess(&Monomial::unit(Prime::Two)), 0);
    }

    #[test]
    fn degree_three_basis() {
        let b = algebra_basis(Prime::Two, Subalgebra::Full, 3).unwrap();
        assert_eq!(b, vec![sq(&[3]), sq(&[2, 1])]);
    }

    #[test]
    fn degree_zero_is_unit() {
        for sub in [Subalgebra::Full, Subalgebra::A1, Subalgebra::A2] {
            let b = algebra_basis(Prime::Two, sub, 0).unwrap();
            assert_eq!(b, vec![SteenrodElement::unit(Prime::Two)]);
        }
        let b = algebra_basis(Prime::Three, Subalgebra::Full, 0).unwrap();
        assert_eq!(b, vec![SteenrodElement::unit(Prime::Three)]);
    }

    #[test]
    fn subalgebra_dimensions() {
        let a1 = AlgebraTable::get(Prime::Two, Subalgebra::A1, 0).unwrap();
        assert_eq!(a1.total_dim(), 8);
        let dims: Vec<usize> = (0..=6).map(|d| a1.dim(d)).collect();
        assert_eq!(dims, vec![1, 1, 1, 2, 1, 1, 1]);
        let a2 = AlgebraTable::get(Prime::Two, Subalgebra::A2, 0).unwrap();
        assert_eq!(a2.total_dim(), 64);
        assert_eq!(a2.dim(23), 1);
        assert_eq!(a2.max_degree(), 23);
    }

    #[test]
    fn subalgebra_oracle_by_word_products() {
        // Multiply every word of length ≤ 6 in Sq¹, Sq² and span the results.
        let mut span: HashMap<u32, Subspace> = HashMap::new();
        let mut words: Vec<Vec<Generator>> = vec![vec![]];
        for _ in 0..6 {
            let mut next = Vec::new();
            for w in &words {
                for g in [Sq(1), Sq(2)] {
                    let mut w2 = w.clone();
                    w2.push(g);
                    next.push(w2);
                }
            }
            words.extend(next.iter().cloned());
            words.sort();
            words.dedup();
        }
        for w in &words {
            let x = n2(w);
            if x.is_zero() {
                continue;
            }
            let monos = admissible_monomials(Prime::Two, x.degree());
            let idx: HashMap<Monomial, usize> =
                monos.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
            span.entry(x.degree())
                .or_insert_with(|| Subspace::new(Prime::Two, monos.len()))
                .insert(&x.to_vector(&idx, monos.len()));
        }
        let total: usize = span.values().map(|s| s.dim()).sum();
        assert_eq!(total, 8);
    }

    #[test]
    fn full_closure_matches_admissible_count() {
        let t = AlgebraTable::build(Prime::Two, Subalgebra::Full, 16).unwrap();
        for d in 0..=16 {
            assert_eq!(t.dim(d), admissible_monomials(Prime::Two, d).len(), "degree {d}");
        }
        let t3 = AlgebraTable::build(Prime::Three, Subalgebra::Full, 20).unwrap();
        for d in 0..=20 {
            assert_eq!(t3.dim(d), admissible_monomials(Prime::Three, d).len(), "degree {d}");
        }
    }

    #[test]
    fn mod3_admissible_low_degrees() {
        let names = |d| {
            admissible_monomials(Prime::Three, d)
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(names(1), vec!["b"]);
        assert_eq!(names(4), vec!["P1"]);
        assert_eq!(names(5), vec!["bP1", "P1b"]);
        assert_eq!(names(6), vec!["bP1b"]);
        assert!(names(2).is_empty());
    }

    #[test]
    fn lucas() {
        assert_eq!(binom_mod(4, 2, 2), 0);
        assert_eq!(binom_mod(5, 1, 2), 1);
        assert_eq!(binom_mod(6, 3, 3), 2); // 20 mod 3
        assert_eq!(binom_mod(2, 5, 3), 0);
    }

    #[test]
    fn cartan_small() {
        let c = cartan_pairs(Prime::Two, 2);
        assert_eq!(c.len(), 3);
        assert_eq!(c[1].left, sq(&[1]));
        assert_eq!(c[1].right, sq(&[1]));
        assert_eq!(cartan_pairs(Prime::Two, 0).len(), 1);
        let b = bockstein_pairs();
        assert!(b[1].graded_sign && !b[0].graded_sign);
    }

    #[test]
    fn membership() {
        assert!(in_subalgebra(&sq(&[3]), Subalgebra::A1).unwrap());
        assert!(!in_subalgebra(&sq(&[4]), Subalgebra::A1).unwrap());
        assert!(in_subalgebra(&sq(&[4]), Subalgebra::A2).unwrap());
        let mut e = sq(&[5]);
        e.add_scaled(&sq(&[4, 1]), 1);
        assert!(in_subalgebra(&e, Subalgebra::A1).unwrap());
        assert!(!in_subalgebra(&sq(&[5]), Subalgebra::A1).unwrap());
    }
}
