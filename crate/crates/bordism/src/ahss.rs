//! Topological Atiyah–Hirzebruch spectral sequence ledger.
//!
//! Pages are tables of finitely generated abelian groups indexed by `(p, q)`
//! with `E₂^{p,q} = H_p(X; π_q(E))`. The engine computes E₂ by cyclic-summand
//! arithmetic, applies the two differentials that are determined by Steenrod
//! operations (the `Sq²` rule on rows 0 → 1 → 2 and the `Sq²Sq¹` rule on ko's
//! row 2 → 4), and replays differentials asserted in scenario files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fplin::{FpMatrix, FpVector, Prime};
use crate::modbuild::{ModuleError, ModulePresentation};
use crate::steenrod::Generator;

#[derive(Debug, Error)]
pub enum AhssError {
    #[error("cannot parse group {0:?}")]
    Parse(String),
    #[error("assertion {name}: {message}")]
    Assertion { name: String, message: String },
    #[error("differential d{page} from {from:?} to {to:?} has the wrong bidegree")]
    Bidegree { page: u32, from: (u32, u32), to: (u32, u32) },
    #[error("module degree {degree} is not available (reliability)")]
    Reliability { degree: u32 },
    #[error("rule inconsistency at {position:?}: {message}")]
    Rule { position: (u32, u32), message: String },
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error(transparent)]
    Module(#[from] ModuleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

// ---------------------------------------------------------------------------
// Finitely generated abelian groups

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Splits `n ≥ 2` into prime powers.
fn primary_parts(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut q = 1;
            while n % p == 0 {
                n /= p;
                q *= p;
            }
            out.push(q);
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn prime_of(q: u64) -> u64 {
    primary_parts(q).first().map_or(q, |&x| {
        let mut p = 2;
        while x % p != 0 {
            p += 1;
        }
        p
    })
}

/// A finitely generated abelian group as a multiset of cyclic orders, kept
/// in primary form (`0` is an infinite cyclic summand).
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct FgAbelianGroup {
    orders: Vec<u64>,
}

impl TryFrom<Vec<u64>> for FgAbelianGroup {
    type Error = AhssError;
    fn try_from(v: Vec<u64>) -> Result<Self, AhssError> {
        FgAbelianGroup::new(&v)
    }
}

impl From<FgAbelianGroup> for Vec<u64> {
    fn from(g: FgAbelianGroup) -> Self {
        g.orders
    }
}

impl FgAbelianGroup {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `Z_n` summands for each entry (`0` for `Z`, `1` is ignored).
    pub fn new(orders: &[u64]) -> Result<Self, AhssError> {
        let mut out = Vec::new();
        for &n in orders {
            match n {
                0 => out.push(0),
                1 => {}
                n => out.extend(primary_parts(n)),
            }
        }
        out.sort_by_key(|&n| if n == 0 { u64::MAX } else { n });
        Ok(FgAbelianGroup { orders: out })
    }

    pub fn cyclic(n: u64) -> Self {
        Self::new(&[n]).expect("valid order")
    }

    pub fn integers() -> Self {
        Self::cyclic(0)
    }

    pub fn orders(&self) -> &[u64] {
        &self.orders
    }

    pub fn is_zero(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.orders.iter().filter(|&&n| n == 0).count()
    }

    /// `None` when infinite.
    pub fn order(&self) -> Option<u128> {
        self.orders.iter().try_fold(1u128, |acc, &n| if n == 0 { None } else { Some(acc * n as u128) })
    }

    pub fn torsion(&self) -> Self {
        FgAbelianGroup { orders: self.orders.iter().copied().filter(|&n| n != 0).collect() }
    }

    /// The `p`-primary torsion part.
    pub fn p_part(&self, p: u64) -> Self {
        FgAbelianGroup { orders: self.orders.iter().copied().filter(|&n| n != 0 && prime_of(n) == p).collect() }
    }

    /// Number of cyclic summands of order exactly `n`.
    pub fn count(&self, n: u64) -> usize {
        self.orders.iter().filter(|&&m| m == n).count()
    }

    pub fn sum(&self, other: &Self) -> Self {
        let mut v = self.orders.clone();
        v.extend_from_slice(&other.orders);
        Self::new(&v).expect("orders already valid")
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut v = Vec::new();
        for &a in &self.orders {
            for &b in &other.orders {
                v.push(gcd(a, b));
            }
        }
        Self::new(&v).expect("gcd of valid orders")
    }

    pub fn tor(&self, other: &Self) -> Self {
        let mut v = Vec::new();
        for &a in &self.orders {
            for &b in &other.orders {
                if a != 0 && b != 0 {
                    v.push(gcd(a, b));
                }
            }
        }
        Self::new(&v).expect("gcd of valid orders")
    }

    /// Dimension of `G ⊗ F_p`.
    pub fn mod_p_rank(&self, p: u64) -> usize {
        self.orders.iter().filter(|&&n| n == 0 || n % p == 0).count()
    }

    /// Removes a cyclic summand of order `n` (image of a differential in the
    /// target). Fails unless the choice is forced.
    fn quotient_by_cyclic(&self, n: u64) -> Result<Self, String> {
        if let Some(i) = self.orders.iter().position(|&m| m == n) {
            let mut v = self.orders.clone();
            v.remove(i);
            return Ok(FgAbelianGroup { orders: v });
        }
        let p = prime_of(n);
        let candidates: Vec<usize> =
            (0..self.orders.len()).filter(|&i| self.orders[i] != 0 && prime_of(self.orders[i]) == p && self.orders[i] > n).collect();
        match candidates.as_slice() {
            [i] => {
                let mut v = self.orders.clone();
                v[*i] /= n;
                Self::new(&v).map_err(|e| e.to_string())
            }
            [] => Err(format!("no summand of order divisible by {n} in {self}")),
            _ => Err(format!("quotient of {self} by Z{n} is not determined by orders alone")),
        }
    }

    /// Kernel of a surjection onto `Z_n` (source of a differential).
    fn kernel_onto_cyclic(&self, n: u64) -> Result<Self, String> {
        if let Some(i) = self.orders.iter().position(|&m| m == n) {
            let mut v = self.orders.clone();
            v.remove(i);
            return Ok(FgAbelianGroup { orders: v });
        }
        let p = prime_of(n);
        let candidates: Vec<usize> = (0..self.orders.len())
            .filter(|&i| self.orders[i] == 0 || (prime_of(self.orders[i]) == p && self.orders[i] > n))
            .collect();
        match candidates.as_slice() {
            [i] => {
                let mut v = self.orders.clone();
                if v[*i] != 0 {
                    v[*i] /= n;
                }
                Self::new(&v).map_err(|e| e.to_string())
            }
            [] => Err(format!("{self} has no quotient Z{n}")),
            _ => Err(format!("kernel of {self} → Z{n} is not determined by orders alone")),
        }
    }

    /// Parses `"Z + Z2^3 + Z3^2 + Z5 + Zs"` style input (`⊕`, `+` or `,`
    /// separators; `0` for the zero group; `s` substituted by `s_value`).
    pub fn parse(text: &str, s_value: Option<u64>) -> Result<Self, AhssError> {
        let t = text.trim();
        if t == "0" || t.is_empty() {
            return Ok(Self::zero());
        }
        let mut orders = Vec::new();
        for part in t.split(['⊕', '+', ',']) {
            let part = part.trim();
            let rest = part.strip_prefix('Z').ok_or_else(|| AhssError::Parse(text.into()))?;
            let (base, exp) = match rest.split_once('^') {
                Some((b, e)) => (b, e.trim().parse::<usize>().map_err(|_| AhssError::Parse(text.into()))?),
                None => (rest, 1),
            };
            let base = base.trim().trim_start_matches('_');
            let n = match base {
                "" => 0,
                "s" => s_value.ok_or_else(|| AhssError::Parse(format!("{text}: s is not set")))?,
                b => b.parse::<u64>().map_err(|_| AhssError::Parse(text.into()))?,
            };
            orders.extend(std::iter::repeat(n).take(exp));
        }
        Self::new(&orders)
    }
}

impl fmt::Display for FgAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.orders.is_empty() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        let mut i = 0;
        while i < self.orders.len() {
            let n = self.orders[i];
            let mut j = i;
            while j < self.orders.len() && self.orders[j] == n {
                j += 1;
            }
            let base = if n == 0 { "Z".to_string() } else { format!("Z{n}") };
            parts.push(if j - i > 1 { format!("{base}^{}", j - i) } else { base });
            i = j;
        }
        write!(f, "{}", parts.join(" ⊕ "))
    }
}

impl fmt::Debug for FgAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

// ---------------------------------------------------------------------------
// Tables

/// A degree-indexed table of groups; degrees absent from the map are zero
/// up to `known_through` and unknown beyond.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedGroups {
    pub groups: BTreeMap<u32, FgAbelianGroup>,
    pub known_through: u32,
}

impl GradedGroups {
    pub fn get(&self, d: u32) -> Option<FgAbelianGroup> {
        (d <= self.known_through).then(|| self.groups.get(&d).cloned().unwrap_or_default())
    }

    fn from_text(map: &BTreeMap<u32, String>, known_through: u32, s: Option<u64>) -> Result<Self, AhssError> {
        let mut groups = BTreeMap::new();
        for (&d, t) in map {
            let g = FgAbelianGroup::parse(t, s)?;
            if !g.is_zero() {
                groups.insert(d, g);
            }
        }
        Ok(GradedGroups { groups, known_through })
    }
}

/// `π_i(MO⟨8⟩)` for `i ≤ 14`.
pub fn mo8_coefficients() -> GradedGroups {
    let text = ["Z", "Z2", "Z2", "Z24", "0", "0", "Z2", "0", "Z + Z2", "Z2^2", "Z6", "0", "Z", "Z3", "Z2"];
    table(&text)
}

/// `π_i(ko)` for `i ≤ 14`.
pub fn ko_coefficients() -> GradedGroups {
    let text = ["Z", "Z2", "Z2", "0", "Z", "0", "0", "0", "Z", "Z2", "Z2", "0", "Z", "0", "0"];
    table(&text)
}

fn table(text: &[&str]) -> GradedGroups {
    let map = text.iter().enumerate().map(|(i, t)| (i as u32, t.to_string())).collect();
    GradedGroups::from_text(&map, text.len() as u32 - 1, None).expect("static table parses")
}

/// `H^i(B; Z)` for `i ≤ 15` (valid for `s ≡ ±1 mod 6`).
pub fn base_cohomology(s: u64) -> Result<GradedGroups, AhssError> {
    if gcd(s, 6) != 1 {
        return Err(AhssError::Scenario(format!("the cohomology table needs s coprime to 6, got {s}")));
    }
    let mut map = BTreeMap::new();
    for (i, t) in [
        (0, "Z"),
        (2, "Z"),
        (4, "Z"),
        (6, "Zs"),
        (8, "Z2 + Zs"),
        (10, "Zs + Z2^2 + Z3"),
        (12, "Zs + Z2^3 + Z3"),
        (14, "Zs + Z2^3 + Z3^2 + Z5"),
        (15, "Z2"),
    ] {
        map.insert(i, t.to_string());
    }
    GradedGroups::from_text(&map, 15, Some(s))
}

/// Integral homology from integral cohomology by universal coefficients:
/// `H_p` has the free part of `H^p` and the torsion of `H^{p+1}`.
pub fn homology_from_cohomology(h: &GradedGroups) -> GradedGroups {
    let top = h.known_through.saturating_sub(1);
    let mut groups = BTreeMap::new();
    for p in 0..=top {
        let free = h.get(p).unwrap().rank();
        let g = FgAbelianGroup::new(&vec![0; free]).unwrap().sum(&h.get(p + 1).unwrap().torsion());
        if !g.is_zero() {
            groups.insert(p, g);
        }
    }
    GradedGroups { groups, known_through: top }
}

/// `H_*(Mη; Z)` through degree 14 via the Thom isomorphism.
pub fn thom_homology(s: u64) -> Result<GradedGroups, AhssError> {
    Ok(homology_from_cohomology(&base_cohomology(s)?))
}

// ---------------------------------------------------------------------------
// Pages

/// One page: groups by `(p, q)`; missing positions inside the known region
/// are zero, positions outside it are unknown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AhssPage {
    pub page: u32,
    pub entries: BTreeMap<(u32, u32), FgAbelianGroup>,
    pub p_max: u32,
    pub q_max: u32,
}

impl AhssPage {
    pub fn get(&self, p: u32, q: u32) -> Option<FgAbelianGroup> {
        (p <= self.p_max && q <= self.q_max).then(|| self.entries.get(&(p, q)).cloned().unwrap_or_default())
    }

    fn set(&mut self, p: u32, q: u32, g: FgAbelianGroup) {
        if g.is_zero() {
            self.entries.remove(&(p, q));
        } else {
            self.entries.insert((p, q), g);
        }
    }

    /// Nonzero entries with `p + q = n`, increasing `p`.
    pub fn row(&self, n: u32) -> Vec<(u32, FgAbelianGroup)> {
        self.entries.iter().filter(|(k, _)| k.0 + k.1 == n).map(|(k, g)| (k.0, g.clone())).collect()
    }

    /// Whether every entry of total degree `n` is known.
    pub fn row_known(&self, n: u32) -> bool {
        n <= self.p_max && n <= self.q_max
            || (0..=n).all(|p| p <= self.p_max && n - p <= self.q_max)
    }

    /// Product of the orders in total degree `n` (`None` if infinite or unknown).
    pub fn row_order(&self, n: u32) -> Option<u128> {
        if !self.row_known(n) {
            return None;
        }
        self.row(n).iter().try_fold(1u128, |acc, (_, g)| g.order().map(|o| acc * o))
    }
}

/// `E₂^{p,q} = H_p ⊗ π_q ⊕ Tor(H_{p−1}, π_q)`.
pub fn e2_page(homology: &GradedGroups, coefficients: &GradedGroups) -> AhssPage {
    let mut page = AhssPage { page: 2, entries: BTreeMap::new(), p_max: homology.known_through, q_max: coefficients.known_through };
    for p in 0..=homology.known_through {
        for q in 0..=coefficients.known_through {
            let pi = coefficients.get(q).unwrap();
            let mut g = homology.get(p).unwrap().tensor(&pi);
            if p > 0 {
                g = g.sum(&homology.get(p - 1).unwrap().tor(&pi));
            }
            page.set(p, q, g);
        }
    }
    page
}

/// Mod-2 homology as the dual of a cohomology module: the dual of an
/// operation `θ : H^{p−d} → H^p` is `θ_* : H_p → H_{p−d}`, `v ↦ A v`.
struct DualModule<'a> {
    module: &'a ModulePresentation,
}

impl DualModule<'_> {
    fn dim(&self, p: u32) -> Result<usize, AhssError> {
        if !self.module.known(p) {
            return Err(AhssError::Reliability { degree: p });
        }
        Ok(self.module.dim(p))
    }

    /// Matrix of the dual of `ops` (applied left to right in cohomology)
    /// from `H_p` to `H_{p−d}`, as rows = basis of `H_p`.
    fn dual(&self, ops: &[Generator], p: u32) -> Result<FpMatrix, AhssError> {
        let d: u32 = ops.iter().map(|g| g.degree()).sum();
        let lo = p.checked_sub(d).ok_or(AhssError::Reliability { degree: 0 })?;
        self.dim(p)?;
        self.dim(lo)?;
        // Cohomology map H^{lo} → H^p as a composite of generator actions.
        let mut m = FpMatrix::identity(Prime::Two, self.module.dim(lo));
        let mut deg = lo;
        for g in ops.iter().rev() {
            let a = self
                .module
                .action(*g, deg)?
                .ok_or(AhssError::Reliability { degree: deg + g.degree() })?;
            m = m.mul(&a).expect("shapes agree");
            deg += g.degree();
        }
        Ok(m.transpose())
    }
}

/// Result of a rule application: the new page plus the ranks used.
#[derive(Debug, Clone)]
pub struct RuleReport {
    pub differentials: Vec<AppliedDifferential>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedDifferential {
    pub page: u32,
    pub source: (u32, u32),
    pub target: (u32, u32),
    /// Image as a list of cyclic orders.
    pub image: Vec<u64>,
    pub origin: String,
}

/// Applies the `Sq²` rule: `d₂ : E^{p+2,0} → E^{p,1}` is reduction mod 2
/// followed by the dual of `Sq²`, and `d₂ : E^{p+2,1} → E^{p,2}` is the dual
/// of `Sq²`. Requires `π₁ = π₂ = Z/2`. Row-2 entries only lose the incoming
/// image; their own `d₂` into row 3 is not governed here unless `π₃ = 0`.
pub fn apply_sq2_rule(e2: &AhssPage, module: &ModulePresentation) -> Result<(AhssPage, RuleReport), AhssError> {
    let dual = DualModule { module };
    let mut e3 = e2.clone();
    e3.page = 3;
    let mut report = RuleReport { differentials: Vec::new(), notes: Vec::new() };
    let p_max = e2.p_max;
    for q in [1u32, 2] {
        let g = e2.get(0, q).unwrap_or_default();
        if !(g.orders() == [2]) {
            return Err(AhssError::Rule { position: (0, q), message: format!("rule needs π{q} = Z2, found {g}") });
        }
    }
    // Incoming and outgoing ranks on rows 0, 1, 2.
    let mut rank_in: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut rank_out: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for p in 2..=p_max {
        // Row 0 → row 1: restricted to the image of reduction mod 2.
        let red = reduction_image(&dual, e2, p)?;
        if !red.is_empty() {
            let sq2 = dual.dual(&[Generator::Sq(2)], p)?;
            let images: Vec<FpVector> = red.iter().map(|v| sq2.row_combination(v)).collect();
            let r = FpMatrix::from_vectors(Prime::Two, sq2.num_cols(), images).rank();
            if r > 0 {
                *rank_out.entry((p, 0)).or_default() += r;
                *rank_in.entry((p - 2, 1)).or_default() += r;
            }
        }
        // Row 1 → row 2.
        let sq2 = dual.dual(&[Generator::Sq(2)], p)?;
        let r = sq2.rank();
        if r > 0 {
            *rank_out.entry((p, 1)).or_default() += r;
            *rank_in.entry((p - 2, 2)).or_default() += r;
        }
    }
    for (&(p, q), &r) in &rank_out {
        let src = e2.get(p, q).unwrap();
        let mut g = src.clone();
        for _ in 0..r {
            g = g.kernel_onto_cyclic(2).map_err(|m| AhssError::Rule { position: (p, q), message: m })?;
        }
        e3.set(p, q, g);
        report.differentials.push(AppliedDifferential {
            page: 2,
            source: (p, q),
            target: (p - 2, q + 1),
            image: vec![2; r],
            origin: if q == 0 { "reduction then dual Sq2".into() } else { "dual Sq2".into() },
        });
    }
    for (&(p, q), &r) in &rank_in {
        let mut g = e3.get(p, q).unwrap();
        for _ in 0..r {
            g = g.quotient_by_cyclic(2).map_err(|m| AhssError::Rule { position: (p, q), message: m })?;
        }
        e3.set(p, q, g);
    }
    if e2.get(0, 3).map_or(false, |g| !g.is_zero()) {
        report.notes.push("row 2 → row 3 d2 is not determined by the rule; row-2 entries are upper bounds".into());
    }
    Ok((e3, report))
}

/// Basis of the image of `H_p(Z) ⊗ Z/2 → H_p(Z/2)`, identified with the
/// kernel of the dual `Sq¹`. Errors if the dimensions disagree (which would
/// signal higher 2-torsion in degree `p − 1`).
fn reduction_image(dual: &DualModule, e2: &AhssPage, p: u32) -> Result<Vec<FpVector>, AhssError> {
    let h = e2.get(p, 0).unwrap_or_default();
    let want = h.mod_p_rank(2);
    if want == 0 {
        return Ok(Vec::new());
    }
    let dim = dual.dim(p)?;
    let ker = if p == 0 {
        (0..dim).map(|i| FpVector::unit(Prime::Two, dim, i)).collect()
    } else {
        dual.dual(&[Generator::Sq(1)], p)?.left_kernel()
    };
    if ker.len() != want {
        return Err(AhssError::Rule {
            position: (p, 0),
            message: format!("reduction image has dimension {want} but the dual Sq1 kernel has {}", ker.len()),
        });
    }
    Ok(ker)
}

/// Applies ko's `d₃ : E₃^{p+3,2} → E₃^{p,4}`, the dual of `Sq²Sq¹`, on a
/// page produced by [`apply_sq2_rule`] for ko coefficients (`π₃ = 0`).
pub fn apply_ko_d3_rule(e3: &AhssPage, module: &ModulePresentation) -> Result<(AhssPage, RuleReport), AhssError> {
    let dual = DualModule { module };
    if e3.get(0, 3).map_or(true, |g| !g.is_zero()) || e3.get(0, 4).map_or(true, |g| g.rank() != 1) {
        return Err(AhssError::Rule { position: (0, 4), message: "rule needs ko coefficients (π3 = 0, π4 = Z)".into() });
    }
    let mut e4 = e3.clone();
    e4.page = 4;
    let mut report = RuleReport { differentials: Vec::new(), notes: Vec::new() };
    for p in 0..=e3.p_max.saturating_sub(3) {
        let src = p + 3;
        let m = dual.dual(&[Generator::Sq(2), Generator::Sq(1)], src)?;
        // Well defined on E₃: vanishes on the image of the incoming d₂.
        if src + 2 <= e3.p_max {
            let sq2 = dual.dual(&[Generator::Sq(2)], src + 2)?;
            let comp = sq2.mul(&m).expect("shapes agree");
            if !comp.is_zero() {
                return Err(AhssError::Rule { position: (src, 2), message: "Sq2Sq1 dual does not vanish on d2 boundaries".into() });
            }
        }
        let r = m.rank();
        if r == 0 {
            continue;
        }
        // Image lies in the reduction of order-2 classes of H_p.
        let sq1 = if p > 0 { Some(dual.dual(&[Generator::Sq(1)], p)?) } else { None };
        if let Some(sq1) = sq1 {
            if !m.mul(&sq1).expect("shapes agree").is_zero() {
                return Err(AhssError::Rule { position: (p, 4), message: "image is not a reduction".into() });
            }
        }
        let mut g = e4.get(p, 4).unwrap();
        let mut s = e4.get(src, 2).unwrap();
        for _ in 0..r {
            g = g.quotient_by_cyclic(2).map_err(|m| AhssError::Rule { position: (p, 4), message: m })?;
            s = s.kernel_onto_cyclic(2).map_err(|m| AhssError::Rule { position: (src, 2), message: m })?;
        }
        e4.set(p, 4, g);
        e4.set(src, 2, s);
        report.differentials.push(AppliedDifferential {
            page: 3,
            source: (src, 2),
            target: (p, 4),
            image: vec![2; r],
            origin: "dual Sq2Sq1".into(),
        });
    }
    Ok((e4, report))
}

// ---------------------------------------------------------------------------
// Scenarios

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coefficients {
    Mo8,
    Ko,
    Table(BTreeMap<u32, String>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assertion {
    pub page: u32,
    pub source: (u32, u32),
    pub target: (u32, u32),
    /// Image as cyclic orders, e.g. `[2]` or `[3, 3]`.
    #[serde(default)]
    pub image: Vec<u64>,
    /// Shorthand for `rank` copies of `Z/prime` when `image` is empty.
    #[serde(default)]
    pub rank: usize,
    #[serde(default = "default_prime")]
    pub prime: u64,
    /// Why the differential is there.
    #[serde(default)]
    pub basis: String,
    /// Assumed rather than established.
    #[serde(default)]
    pub completion: bool,
}

fn default_prime() -> u64 {
    2
}

impl Assertion {
    pub fn new(page: u32, source: (u32, u32), target: (u32, u32), image: &[u64]) -> Self {
        Assertion {
            page,
            source,
            target,
            image: image.to_vec(),
            rank: 0,
            prime: 2,
            basis: String::new(),
            completion: false,
        }
    }

    pub fn image_orders(&self) -> Vec<u64> {
        if self.image.is_empty() {
            vec![self.prime; self.rank]
        } else {
            self.image.clone()
        }
    }

    fn label(&self) -> String {
        format!("d{} {:?} -> {:?}", self.page, self.source, self.target)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Claim {
    pub degree: u32,
    pub total_order: u128,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub name: String,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
    #[serde(default)]
    pub claims: Vec<Claim>,
}

/// Expected entries at this page or later refer to the end of the replay.
pub const INFINITY_PAGE: u32 = 99;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpectedEntry {
    pub page: u32,
    pub position: (u32, u32),
    pub group: String,
}

/// Expected E₂ rows, for flagging: `rows[n]` lists `(p, group)` for the
/// stated range of `p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpectedRow {
    pub degree: u32,
    #[serde(default)]
    pub p_min: u32,
    pub entries: BTreeMap<u32, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub s: u64,
    /// Integral homology by degree; `None` means the bundled Thom homology.
    #[serde(default)]
    pub homology: Option<BTreeMap<u32, String>>,
    #[serde(default)]
    pub homology_known_through: Option<u32>,
    pub coefficients: Coefficients,
    /// Builtin module name for the Steenrod rules ("Meta2") or a path.
    #[serde(default)]
    pub sq2_module: Option<String>,
    #[serde(default)]
    pub ko_d3: bool,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
    #[serde(default)]
    pub claims: Vec<Claim>,
    #[serde(default)]
    pub expected: Vec<ExpectedEntry>,
    #[serde(default)]
    pub expected_e2_rows: Vec<ExpectedRow>,
    #[serde(default)]
    pub branches: Vec<Branch>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, AhssError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn from_json(text: &str) -> Result<Self, AhssError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn mo8_meta() -> Self {
        Self::from_json(include_str!("../fixtures/scenario_mo8_meta.json")).expect("bundled scenario parses")
    }

    pub fn ko_meta() -> Self {
        Self::from_json(include_str!("../fixtures/scenario_ko_meta.json")).expect("bundled scenario parses")
    }

    pub fn homology(&self) -> Result<GradedGroups, AhssError> {
        match &self.homology {
            None => thom_homology(self.s),
            Some(map) => GradedGroups::from_text(map, self.homology_known_through.unwrap_or(0), Some(self.s)),
        }
    }

    pub fn coefficients(&self) -> Result<GradedGroups, AhssError> {
        match &self.coefficients {
            Coefficients::Mo8 => Ok(mo8_coefficients()),
            Coefficients::Ko => Ok(ko_coefficients()),
            Coefficients::Table(map) => {
                GradedGroups::from_text(map, map.keys().max().copied().unwrap_or(0), Some(self.s))
            }
        }
    }

    fn module(&self) -> Result<Option<ModulePresentation>, AhssError> {
        match self.sq2_module.as_deref() {
            None => Ok(None),
            Some(name) if crate::modbuild::BUILTIN_NAMES.contains(&name) => {
                Ok(Some(crate::modbuild::builtin(name, 7, 0)?))
            }
            Some(path) => Ok(Some(ModulePresentation::load(Path::new(path))?)),
        }
    }
}

/// One check in a replay report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchReport {
    pub name: String,
    pub checks: Vec<CheckLine>,
    pub completions: Vec<String>,
    /// Final rows by degree, rendered.
    pub final_rows: BTreeMap<u32, Vec<(u32, String)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayReport {
    pub scenario: String,
    pub s: u64,
    pub e2_rows: BTreeMap<u32, Vec<(u32, String)>>,
    pub flags: Vec<String>,
    pub rule_differentials: Vec<AppliedDifferential>,
    pub notes: Vec<String>,
    pub checks: Vec<CheckLine>,
    pub branches: Vec<BranchReport>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.branches.iter().all(|b| b.checks.iter().all(|c| c.passed))
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "scenario {} (s = {})", self.scenario, self.s);
        for (n, row) in &self.e2_rows {
            let cells: Vec<String> = row.iter().map(|(p, g)| format!("E2^({p},{}) = {g}", n - p)).collect();
            let _ = writeln!(out, "  p+q = {n}: {}", cells.join(", "));
        }
        for d in &self.rule_differentials {
            let _ = writeln!(out, "  rule d{} {:?} -> {:?} image {:?} ({})", d.page, d.source, d.target, d.image, d.origin);
        }
        for f in &self.flags {
            let _ = writeln!(out, "  flag: {f}");
        }
        for n in &self.notes {
            let _ = writeln!(out, "  note: {n}");
        }
        for c in &self.checks {
            let _ = writeln!(out, "  [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
        }
        for b in &self.branches {
            let _ = writeln!(out, "  branch {}", b.name);
            for c in &b.completions {
                let _ = writeln!(out, "    assumed: {c}");
            }
            for c in &b.checks {
                let _ = writeln!(out, "    [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
            }
        }
        out
    }
}

fn render_rows(page: &AhssPage, degrees: &[u32]) -> BTreeMap<u32, Vec<(u32, String)>> {
    degrees.iter().map(|&n| (n, page.row(n).into_iter().map(|(p, g)| (p, g.to_string())).collect())).collect()
}

/// Applies asserted differentials page by page on top of `start`. Pages
/// below `start.page` are accepted only away from the rows a rule already
/// settled (`ruled_rows` lists `(page, source row)` pairs).
pub fn apply_assertions(start: &AhssPage, assertions: &[Assertion]) -> Result<AhssPage, AhssError> {
    apply_assertions_ruled(start, assertions, &[])
}

fn apply_assertions_ruled(
    start: &AhssPage,
    assertions: &[Assertion],
    ruled_rows: &[(u32, u32)],
) -> Result<AhssPage, AhssError> {
    let mut sorted: Vec<&Assertion> = assertions.iter().collect();
    sorted.sort_by_key(|a| (a.page, a.source, a.target));
    let mut page = start.clone();
    for a in sorted {
        let name = a.label();
        let (p, q) = a.source;
        let ok = a.page >= 2 && p >= a.page && a.target == (p - a.page, q + a.page - 1);
        if !ok {
            return Err(AhssError::Bidegree { page: a.page, from: a.source, to: a.target });
        }
        let fail = |m: String| AhssError::Assertion { name: name.clone(), message: m };
        if ruled_rows.contains(&(a.page, q)) {
            return Err(fail("this differential is already determined by a Steenrod rule".into()));
        }
        let mut src = page.get(p, q).ok_or_else(|| fail("source outside the known region".into()))?;
        let mut tgt = page.get(a.target.0, a.target.1).ok_or_else(|| fail("target outside the known region".into()))?;
        let image = FgAbelianGroup::new(&a.image_orders()).map_err(|e| fail(e.to_string()))?;
        if image.is_zero() {
            continue;
        }
        for &n in image.orders() {
            if n == 0 {
                return Err(fail("infinite image is not supported".into()));
            }
            src = src.kernel_onto_cyclic(n).map_err(|m| fail(format!("source {:?}: {m}", a.source)))?;
            tgt = tgt.quotient_by_cyclic(n).map_err(|m| fail(format!("target {:?}: {m}", a.target)))?;
        }
        page.set(p, q, src);
        page.set(a.target.0, a.target.1, tgt);
        page.page = page.page.max(a.page + 1);
    }
    Ok(page)
}

/// Runs a scenario: E₂, rules, base assertions, then each branch.
pub fn replay(sc: &Scenario) -> Result<ReplayReport, AhssError> {
    let homology = sc.homology()?;
    let coeffs = sc.coefficients()?;
    let e2 = e2_page(&homology, &coeffs);
    let mut degrees: Vec<u32> = sc.expected_e2_rows.iter().map(|r| r.degree).collect();
    degrees.extend(sc.claims.iter().map(|c| c.degree));
    degrees.extend(sc.branches.iter().flat_map(|b| b.claims.iter().map(|c| c.degree)));
    degrees.sort_unstable();
    degrees.dedup();
    let mut report = ReplayReport {
        scenario: sc.name.clone(),
        s: sc.s,
        e2_rows: render_rows(&e2, &degrees),
        flags: Vec::new(),
        rule_differentials: Vec::new(),
        notes: Vec::new(),
        checks: Vec::new(),
        branches: Vec::new(),
    };
    // Compare E₂ rows with the expected table.
    for row in &sc.expected_e2_rows {
        let mut mismatches = Vec::new();
        for p in row.p_min..=row.degree {
            let q = row.degree - p;
            let Some(got) = e2.get(p, q) else { continue };
            match row.entries.get(&p) {
                Some(text) => {
                    let want = FgAbelianGroup::parse(text, Some(sc.s))?;
                    if want != got {
                        mismatches.push(format!("E2^({p},{q}) = {got}, table says {want}"));
                    }
                }
                None if !got.is_zero() => {
                    report.flags.push(format!("E2^({p},{q}) = {got} is nonzero but absent from the table"));
                }
                None => {}
            }
        }
        for p in 0..row.p_min {
            if let Some(g) = e2.get(p, row.degree - p).filter(|g| !g.is_zero()) {
                report.notes.push(format!("E2^({p},{}) = {g} lies outside the table's range p ≥ {}", row.degree - p, row.p_min));
            }
        }
        report.checks.push(CheckLine {
            name: format!("E2 row p+q = {}", row.degree),
            passed: mismatches.is_empty(),
            detail: if mismatches.is_empty() { "matches the table".into() } else { mismatches.join("; ") },
        });
    }
    // Rules.
    let mut page = e2.clone();
    let mut ruled_rows = Vec::new();
    if let Some(m) = sc.module()? {
        ruled_rows.extend([(2, 0), (2, 1)]);
        let (e3, r) = apply_sq2_rule(&page, &m)?;
        report.rule_differentials.extend(r.differentials);
        report.notes.extend(r.notes);
        page = e3;
        if sc.ko_d3 {
            let (e4, r) = apply_ko_d3_rule(&page, &m)?;
            report.rule_differentials.extend(r.differentials);
            ruled_rows.push((3, 2));
            page = e4;
        }
    }
    let ruled = page.clone();
    let base = apply_assertions_ruled(&ruled, &sc.assertions, &ruled_rows)?;
    check_expected(&sc.expected, &e2, &ruled, &base, sc.s, &mut report.checks)?;
    for c in &sc.claims {
        report.checks.push(claim_check(&base, c));
    }
    for b in &sc.branches {
        let fin = apply_assertions_ruled(&base, &b.assertions, &ruled_rows)?;
        let mut checks = Vec::new();
        for c in &b.claims {
            checks.push(claim_check(&fin, c));
        }
        report.branches.push(BranchReport {
            name: b.name.clone(),
            checks,
            completions: b
                .assertions
                .iter()
                .filter(|a| a.completion)
                .map(|a| format!("{} image {:?}: {}", a.label(), a.image_orders(), a.basis))
                .collect(),
            final_rows: render_rows(&fin, &degrees),
        });
    }
    Ok(report)
}

fn check_expected(
    expected: &[ExpectedEntry],
    e2: &AhssPage,
    ruled: &AhssPage,
    base: &AhssPage,
    s: u64,
    checks: &mut Vec<CheckLine>,
) -> Result<(), AhssError> {
    for e in expected {
        let page = match e.page {
            2 => e2,
            p if p <= ruled.page => ruled,
            _ => base,
        };
        let want = FgAbelianGroup::parse(&e.group, Some(s))?;
        let got = page.get(e.position.0, e.position.1);
        checks.push(CheckLine {
            name: if e.page >= INFINITY_PAGE {
                format!("E∞^{:?}", e.position)
            } else {
                format!("E{}^{:?}", e.page, e.position)
            },
            passed: got.as_ref() == Some(&want),
            detail: format!("computed {}, expected {want}", got.map_or("unknown".into(), |g| g.to_string())),
        });
    }
    Ok(())
}

fn claim_check(page: &AhssPage, c: &Claim) -> CheckLine {
    let got = page.row_order(c.degree);
    CheckLine {
        name: format!("order in degree {}", c.degree),
        passed: got == Some(c.total_order),
        detail: format!(
            "E∞ product {}, claimed {} {}",
            got.map_or("unknown/infinite".into(), |o| o.to_string()),
            c.total_order,
            c.description
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_arithmetic() {
        let g = FgAbelianGroup::parse("Z2^3 + Z3^2 + Z5 + Zs", Some(7)).unwrap();
        assert_eq!(g.to_string(), "Z2^3 ⊕ Z3^2 ⊕ Z5 ⊕ Z7");
        assert_eq!(g.order(), Some(8 * 9 * 5 * 7));
        let z6 = FgAbelianGroup::cyclic(6);
        assert_eq!(z6, FgAbelianGroup::parse("Z2+Z3", None).unwrap());
        assert_eq!(FgAbelianGroup::integers().tensor(&z6), z6);
        assert!(FgAbelianGroup::integers().tor(&z6).is_zero());
        assert_eq!(FgAbelianGroup::cyclic(4).tor(&FgAbelianGroup::cyclic(6)), FgAbelianGroup::cyclic(2));
        assert_eq!(FgAbelianGroup::cyclic(24).tensor(&FgAbelianGroup::cyclic(7)), FgAbelianGroup::zero());
    }

    #[test]
    fn ambiguous_quotients_are_refused() {
        let g = FgAbelianGroup::new(&[2, 4]).unwrap();
        assert_eq!(g.quotient_by_cyclic(2).unwrap(), FgAbelianGroup::cyclic(4));
        let h = FgAbelianGroup::new(&[4, 8]).unwrap();
        assert!(h.quotient_by_cyclic(2).is_err());
        assert_eq!(FgAbelianGroup::cyclic(8).quotient_by_cyclic(2).unwrap(), FgAbelianGroup::cyclic(4));
        assert_eq!(FgAbelianGroup::integers().kernel_onto_cyclic(2).unwrap(), FgAbelianGroup::integers());
    }

    #[test]
    fn thom_homology_table() {
        let h = thom_homology(7).unwrap();
        assert_eq!(h.get(13).unwrap().to_string(), "Z2^3 ⊕ Z3^2 ⊕ Z5 ⊕ Z7");
        assert_eq!(h.get(9).unwrap().to_string(), "Z2^2 ⊕ Z3 ⊕ Z7");
        assert_eq!(h.get(14).unwrap(), FgAbelianGroup::cyclic(2));
        assert_eq!(h.get(5).unwrap(), FgAbelianGroup::cyclic(7));
        assert!(h.get(15).is_none());
        assert!(base_cohomology(9).is_err());
    }

    #[test]
    fn e2_examples() {
        let e2 = e2_page(&thom_homology(7).unwrap(), &mo8_coefficients());
        assert_eq!(e2.get(5, 8).unwrap(), FgAbelianGroup::cyclic(7));
        assert_eq!(e2.get(13, 0).unwrap().to_string(), "Z2^3 ⊕ Z3^2 ⊕ Z5 ⊕ Z7");
        assert_eq!(e2.get(0, 13).unwrap(), FgAbelianGroup::cyclic(3));
        assert!(e2.get(15, 0).is_none());
    }

    #[test]
    fn trivial_coefficients_give_homology() {
        let h = thom_homology(11).unwrap();
        let mut m = BTreeMap::new();
        m.insert(0, "Z".to_string());
        let c = GradedGroups::from_text(&m, 5, None).unwrap();
        let e2 = e2_page(&h, &c);
        for p in 0..=14 {
            assert_eq!(e2.get(p, 0).unwrap(), h.get(p).unwrap());
            assert!(e2.get(p, 3).unwrap().is_zero());
        }
    }

    #[test]
    fn assertion_bidegree_is_checked() {
        let e2 = e2_page(&thom_homology(7).unwrap(), &mo8_coefficients());
        let bad = Assertion::new(2, (12, 2), (10, 2), &[2]);
        assert!(matches!(apply_assertions(&e2, &[bad]), Err(AhssError::Bidegree { .. })));
        let good = Assertion::new(2, (12, 2), (10, 3), &[2]);
        let after = apply_assertions(&e2, &[good]).unwrap();
        assert_eq!(after.get(10, 3).unwrap().to_string(), "Z2 ⊕ Z3");
        let wrong = Assertion::new(2, (12, 2), (3, 10), &[2]);
        assert!(apply_assertions(&e2, &[wrong]).is_err());
        // Z2 in (10, 3) is gone after two hits: the second names the assertion.
        let twice = [Assertion::new(2, (12, 2), (10, 3), &[2]), Assertion::new(3, (13, 1), (10, 3), &[2, 2])];
        match apply_assertions(&e2, &twice) {
            Err(AhssError::Assertion { name, .. }) => assert_eq!(name, "d3 (13, 1) -> (10, 3)"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bundled_scenarios_pass() {
        let mo8 = replay(&Scenario::mo8_meta()).unwrap();
        assert!(mo8.passed(), "{}", mo8.to_text());
        assert_eq!(mo8.branches.len(), 4);
        assert!(mo8.flags.is_empty());
        let ko = replay(&Scenario::ko_meta()).unwrap();
        assert!(ko.passed(), "{}", ko.to_text());
    }

    #[test]
    fn replay_ignores_assertion_order() {
        let mut sc = Scenario::mo8_meta();
        let forward = replay(&sc).unwrap();
        for b in &mut sc.branches {
            b.assertions.reverse();
        }
        let backward = replay(&sc).unwrap();
        for (f, b) in forward.branches.iter().zip(&backward.branches) {
            assert_eq!(f.final_rows, b.final_rows);
        }
    }

    #[test]
    fn rule_rows_cannot_be_reasserted() {
        let mut sc = Scenario::mo8_meta();
        sc.assertions.push(Assertion::new(2, (13, 0), (11, 1), &[2]));
        assert!(matches!(replay(&sc), Err(AhssError::Assertion { .. })));
    }

    #[test]
    fn missing_table_entry_is_flagged() {
        let mut sc = Scenario::mo8_meta();
        sc.expected_e2_rows[1].entries.remove(&7);
        let r = replay(&sc).unwrap();
        assert_eq!(r.flags.len(), 1);
        assert!(r.flags[0].contains("(7,6)"));
    }

    #[test]
    fn wrong_claim_fails() {
        let mut sc = Scenario::mo8_meta();
        sc.branches[0].claims[0].total_order += 1;
        assert!(!replay(&sc).unwrap().passed());
    }

    #[test]
    fn non_coprime_s_is_rejected() {
        let mut sc = Scenario::mo8_meta();
        sc.s = 9;
        assert!(replay(&sc).is_err());
    }
}
