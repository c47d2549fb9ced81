//! Graded modules over the Steenrod algebra, given by a named basis and the
//! action matrices of the algebra generators (Sq¹, Sq², Sq⁴ at p = 2;
//! β, P¹, P³ at p = 3).
//!
//! Action matrices use the row convention: row `i` of the matrix for a
//! generator at source degree `n` is the image of basis element `i` of
//! degree `n`. A module may be *truncated* at a degree D, meaning it is only
//! known through D; actions landing above D are unknown and stored as `None`.
//!
//! # File format
//!
//! ```json
//! { "prime": 2, "truncation": 15,
//!   "basis": [{"name": "U", "degree": 0}, …],
//!   "actions": {"Sq1": [[targets of element 0], [targets of element 1], …], …},
//!   "products": {"x": {"degree": 2, "images": [[…], …]}} }
//! ```
//!
//! Basis entries are listed in nondecreasing degree. A target is a global
//! basis index (coefficient 1) or a pair `[index, coefficient]`. A `null`
//! truncation means the module is known in every degree. Generators missing
//! from `actions` act by zero. `products`
//! (optional) records multiplication by ring classes, used for Thom twists.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emspaces::{Combination, ProductSpace, UnstableClass};
use crate::fplin::{Coordinates, FpMatrix, FpVector, Prime, Subspace};
use crate::steenrod::{adem_normalize, AlgebraTable, Generator, Recipe, SteenrodElement, SteenrodError, Subalgebra};

#[derive(Debug, Error)]
pub enum ModuleError {
    #[error("closure dimension in degree {degree} is {found}, expected {expected}")]
    DimensionMismatch { degree: u32, expected: usize, found: usize },
    #[error("relation {relation} fails on basis element {element} (degree {degree})")]
    Relation { relation: String, element: String, degree: u32 },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("module has no action for generator {0}")]
    MissingGenerator(Generator),
    #[error("labelled class {0} is not in the closure or is dependent")]
    BadLabel(String),
    #[error("Stiefel-Whitney data needs multiplication by `{0}`, which the base module lacks")]
    MissingProduct(String),
    #[error("k = {0} is not 7 or 15 mod 24")]
    BadK(i64),
    #[error(transparent)]
    Steenrod(#[from] SteenrodError),
    #[error("io error")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Multiplication by a fixed ring class of some degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multiplier {
    pub degree: u32,
    /// Per source degree; `None` when the target is above the truncation.
    pub matrices: Vec<Option<FpMatrix>>,
}

/// A finitely presented graded module over a Steenrod algebra.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModulePresentation {
    pub prime: Prime,
    truncation: Option<u32>,
    names: Vec<Vec<String>>,
    actions: BTreeMap<Generator, Vec<Option<FpMatrix>>>,
    products: BTreeMap<String, Multiplier>,
}

impl ModulePresentation {
    /// Assembles a module from per-degree names and a closure producing the
    /// image of each basis element under each generator.
    pub fn from_fn(
        prime: Prime,
        truncation: Option<u32>,
        names: Vec<Vec<String>>,
        generators: &[Generator],
        mut image: impl FnMut(Generator, u32, usize) -> FpVector,
    ) -> Self {
        let mut m = ModulePresentation { prime, truncation, names, actions: BTreeMap::new(), products: BTreeMap::new() };
        for &g in generators {
            let mats = (0..=m.top_degree())
                .map(|n| {
                    let t = n + g.degree();
                    if !m.known(t) {
                        return None;
                    }
                    let rows = (0..m.dim(n)).map(|i| image(g, n, i)).collect();
                    Some(FpMatrix::from_vectors(prime, m.dim(t), rows))
                })
                .collect();
            m.actions.insert(g, mats);
        }
        m
    }

    pub fn standard_generators(prime: Prime) -> Vec<Generator> {
        match prime {
            Prime::Two => vec![Generator::Sq(1), Generator::Sq(2), Generator::Sq(4)],
            Prime::Three => vec![Generator::Beta, Generator::P(1), Generator::P(3)],
        }
    }

    pub fn truncation(&self) -> Option<u32> {
        self.truncation
    }

    /// Highest degree with a stored basis (possibly empty).
    pub fn top_degree(&self) -> u32 {
        self.names.len().saturating_sub(1) as u32
    }

    /// Whether the module is known in degree `t`.
    pub fn known(&self, t: u32) -> bool {
        self.truncation.is_none_or(|d| t <= d)
    }

    /// Degree bound for reliable computations: the truncation, if any.
    pub fn reliable_through(&self) -> u32 {
        self.truncation.unwrap_or(u32::MAX)
    }

    pub fn dim(&self, n: u32) -> usize {
        self.names.get(n as usize).map_or(0, Vec::len)
    }

    pub fn total_dim(&self) -> usize {
        self.names.iter().map(Vec::len).sum()
    }

    pub fn names(&self, n: u32) -> &[String] {
        self.names.get(n as usize).map_or(&[], Vec::as_slice)
    }

    pub fn name(&self, n: u32, i: usize) -> &str {
        &self.names[n as usize][i]
    }

    /// Degree and index of a named basis element.
    pub fn find(&self, name: &str) -> Option<(u32, usize)> {
        for (n, v) in self.names.iter().enumerate() {
            if let Some(i) = v.iter().position(|s| s == name) {
                return Some((n as u32, i));
            }
        }
        None
    }

    pub fn generators(&self) -> Vec<Generator> {
        self.actions.keys().copied().collect()
    }

    /// Matrix of a generator out of degree `n`: `None` if unknown (above the
    /// truncation); a zero matrix if the generator is absent but every target
    /// is trivially zero.
    pub fn action(&self, g: Generator, n: u32) -> Result<Option<FpMatrix>, ModuleError> {
        let t = n + g.degree();
        if !self.known(t) {
            return Ok(None);
        }
        match self.actions.get(&g) {
            Some(mats) => Ok(Some(
                mats.get(n as usize)
                    .cloned()
                    .flatten()
                    .unwrap_or_else(|| FpMatrix::zero(self.prime, self.dim(n), self.dim(t))),
            )),
            None if self.dim(n) == 0 || self.dim(t) == 0 => {
                Ok(Some(FpMatrix::zero(self.prime, self.dim(n), self.dim(t))))
            }
            None => Err(ModuleError::MissingGenerator(g)),
        }
    }

    /// Image of a vector in degree `n` under a generator.
    pub fn act(&self, g: Generator, n: u32, v: &FpVector) -> Result<Option<FpVector>, ModuleError> {
        Ok(self.action(g, n)?.map(|m| m.row_combination(v)))
    }

    /// Image of a named element under a generator, as a readable sum.
    pub fn act_named(&self, g: Generator, name: &str) -> Option<String> {
        let (n, i) = self.find(name)?;
        let v = FpVector::unit(self.prime, self.dim(n), i);
        let w = self.act(g, n, &v).ok()??;
        Some(self.describe(n + g.degree(), &w))
    }

    /// Human-readable form of a vector in degree `n`.
    pub fn describe(&self, n: u32, v: &FpVector) -> String {
        let terms: Vec<String> = v
            .iter_nonzero()
            .map(|(i, c)| match c {
                1 => self.names[n as usize][i].clone(),
                2 => format!("-{}", self.names[n as usize][i]),
                c => format!("{c}{}", self.names[n as usize][i]),
            })
            .collect();
        if terms.is_empty() {
            "0".into()
        } else {
            terms.join(" + ")
        }
    }

    /// Degrees whose outgoing actions leave the known range.
    pub fn boundary_unsafe_degrees(&self) -> Vec<u32> {
        let Some(d) = self.truncation else { return Vec::new() };
        (0..=self.top_degree())
            .filter(|&n| self.dim(n) > 0 && self.actions.keys().any(|g| n + g.degree() > d))
            .collect()
    }

    pub fn multiplier(&self, name: &str) -> Option<&Multiplier> {
        self.products.get(name)
    }

    pub fn set_multiplier(&mut self, name: &str, m: Multiplier) {
        self.products.insert(name.to_string(), m);
    }

    /// Shifts every label by appending a suffix (used for Thom classes).
    fn with_suffix(&self, suffix: &str) -> Vec<Vec<String>> {
        self.names
            .iter()
            .map(|v| {
                v.iter()
                    .map(|s| if s == "1" { suffix.to_string() } else { format!("{s}{suffix}") })
                    .collect()
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), ModuleError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, ModuleError> {
        Ok(serde_json::to_string_pretty(&ModuleFile::from_module(self))?)
    }

    /// Loads a module and runs the full relation sweep.
    pub fn load(path: &Path) -> Result<Self, ModuleError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ModuleError> {
        let file: ModuleFile = serde_json::from_str(text)?;
        let m = file.into_module()?;
        relation_sweep(&m)?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Target {
    One(usize),
    Scaled(usize, u8),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BasisEntry {
    name: String,
    degree: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProductEntry {
    degree: u32,
    images: Vec<Vec<Target>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModuleFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
    prime: Prime,
    truncation: Option<u32>,
    basis: Vec<BasisEntry>,
    actions: BTreeMap<String, Vec<Vec<Target>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    products: BTreeMap<String, ProductEntry>,
}

impl ModuleFile {
    fn from_module(m: &ModulePresentation) -> Self {
        let mut offsets = Vec::new();
        let mut basis = Vec::new();
        for n in 0..=m.top_degree() {
            offsets.push(basis.len());
            for s in m.names(n) {
                basis.push(BasisEntry { name: s.clone(), degree: n });
            }
        }
        let encode = |mats: &Vec<Option<FpMatrix>>, shift: u32| {
            let mut out = Vec::new();
            for n in 0..=m.top_degree() {
                for i in 0..m.dim(n) {
                    let row = mats.get(n as usize).and_then(|x| x.as_ref());
                    let targets = match row {
                        None => Vec::new(),
                        Some(mat) => mat
                            .row(i)
                            .iter_nonzero()
                            .map(|(j, c)| {
                                let idx = offsets[(n + shift) as usize] + j;
                                if c == 1 {
                                    Target::One(idx)
                                } else {
                                    Target::Scaled(idx, c)
                                }
                            })
                            .collect(),
                    };
                    out.push(targets);
                }
            }
            out
        };
        let actions = m.actions.iter().map(|(g, mats)| (g.to_string(), encode(mats, g.degree()))).collect();
        let products = m
            .products
            .iter()
            .map(|(k, mult)| (k.clone(), ProductEntry { degree: mult.degree, images: encode(&mult.matrices, mult.degree) }))
            .collect();
        ModuleFile { provenance: None, prime: m.prime, truncation: m.truncation, basis, actions, products }
    }

    fn into_module(self) -> Result<ModulePresentation, ModuleError> {
        let schema = |s: String| ModuleError::Schema(s);
        let prime = self.prime;
        let mut names: Vec<Vec<String>> = Vec::new();
        let mut location = Vec::new();
        let mut last = 0;
        for (k, b) in self.basis.iter().enumerate() {
            if b.degree < last {
                return Err(schema(format!("basis entry {k} ({}) is out of degree order", b.name)));
            }
            if self.truncation.is_some_and(|d| b.degree > d) {
                return Err(schema(format!("basis entry {} lies above the truncation", b.name)));
            }
            last = b.degree;
            while names.len() <= b.degree as usize {
                names.push(Vec::new());
            }
            location.push((b.degree, names[b.degree as usize].len()));
            names[b.degree as usize].push(b.name.clone());
        }
        if let Some(d) = self.truncation {
            while names.len() <= d as usize {
                names.push(Vec::new());
            }
        }
        if names.is_empty() {
            names.push(Vec::new());
        }
        let mut m = ModulePresentation { prime, truncation: self.truncation, names, actions: BTreeMap::new(), products: BTreeMap::new() };
        let decode = |label: &str, shift: u32, lists: &[Vec<Target>], m: &ModulePresentation| {
            if lists.len() != location.len() {
                return Err(schema(format!("{label}: expected {} source lists, found {}", location.len(), lists.len())));
            }
            let mut mats: Vec<Option<FpMatrix>> = (0..=m.top_degree())
                .map(|n| {
                    let t = n + shift;
                    m.known(t).then(|| FpMatrix::zero(prime, m.dim(n), m.dim(t)))
                })
                .collect();
            for (src, targets) in lists.iter().enumerate() {
                let (n, i) = location[src];
                for t in targets {
                    let (idx, c) = match *t {
                        Target::One(j) => (j, 1),
                        Target::Scaled(j, c) => (j, c),
                    };
                    let &(tn, tj) = location
                        .get(idx)
                        .ok_or_else(|| schema(format!("{label}: target index {idx} out of range")))?;
                    if tn != n + shift {
                        return Err(schema(format!(
                            "{label}: {} (degree {n}) maps to {} of degree {tn}",
                            m.names[n as usize][i], m.names[tn as usize][tj]
                        )));
                    }
                    let Some(mat) = mats[n as usize].as_mut() else {
                        return Err(schema(format!("{label}: action out of {} lands above the truncation", m.names[n as usize][i])));
                    };
                    let old = mat.get(i, tj);
                    mat.set(i, tj, (old + c) % prime.value() as u8);
                }
            }
            Ok(mats)
        };
        for (gname, lists) in &self.actions {
            let g = Generator::parse(gname)?;
            if g.prime() != prime {
                return Err(schema(format!("generator {gname} does not belong to the mod-{prime} algebra")));
            }
            let mats = decode(gname, g.degree(), lists, &m)?;
            m.actions.insert(g, mats);
        }
        for (pname, entry) in &self.products {
            let mats = decode(pname, entry.degree, &entry.images, &m)?;
            m.products.insert(pname.clone(), Multiplier { degree: entry.degree, matrices: mats });
        }
        for g in ModulePresentation::standard_generators(prime) {
            m.actions.entry(g).or_insert_with(Vec::new);
        }
        Ok(m)
    }
}

/// The action of every word-basis element of an algebra on a module.
#[derive(Debug)]
pub struct AlgebraAction {
    pub table: Arc<AlgebraTable>,
    /// `acts[d][k][n]`: element k of degree d out of module degree n.
    acts: Vec<Vec<Vec<Option<FpMatrix>>>>,
}

impl AlgebraAction {
    pub fn new(module: &ModulePresentation, table: Arc<AlgebraTable>) -> Result<Self, ModuleError> {
        let p = module.prime;
        let top = module.top_degree();
        let mut acts: Vec<Vec<Vec<Option<FpMatrix>>>> = Vec::new();
        let mut gen_cache: BTreeMap<(usize, u32), Option<FpMatrix>> = BTreeMap::new();
        for d in 0..=table.max_degree() {
            let piece = &table.pieces[d as usize];
            let mut per_elem = Vec::new();
            for recipe in &piece.recipes {
                let mats: Vec<Option<FpMatrix>> = match *recipe {
                    Recipe::Unit => (0..=top).map(|n| Some(FpMatrix::identity(p, module.dim(n)))).collect(),
                    Recipe::Left { generator, lower } => {
                        let g = table.generators[generator];
                        let ld = d - g.degree();
                        let mut out = Vec::new();
                        for n in 0..=top {
                            let Some(low) = &acts[ld as usize][lower][n as usize] else {
                                out.push(None);
                                continue;
                            };
                            let key = (generator, n + ld);
                            if !gen_cache.contains_key(&key) {
                                let a = if n + ld <= top || module.known(n + ld) {
                                    module.action(g, n + ld)?
                                } else {
                                    None
                                };
                                gen_cache.insert(key, a);
                            }
                            out.push(gen_cache[&key].as_ref().map(|a| low.mul(a).expect("shapes agree")));
                        }
                        out
                    }
                };
                per_elem.push(mats);
            }
            acts.push(per_elem);
        }
        Ok(AlgebraAction { table, acts })
    }

    /// Matrix of basis element `k` of degree `d` out of module degree `n`.
    pub fn get(&self, d: u32, k: usize, n: u32) -> Option<&FpMatrix> {
        self.acts.get(d as usize)?.get(k)?.get(n as usize)?.as_ref()
    }

    /// Matrix of an arbitrary algebra element out of degree `n`.
    pub fn element(&self, x: &SteenrodElement, n: u32, module: &ModulePresentation) -> Option<FpMatrix> {
        let c = self.table.coordinates(x)?;
        let d = x.degree();
        let mut out = FpMatrix::zero(module.prime, module.dim(n), module.dim(n + d));
        for (k, coef) in c.iter_nonzero() {
            let m = self.get(d, k, n)?;
            for r in 0..out.num_rows() {
                let mut row = out.row(r).clone();
                row.add_scaled(m.row(r), coef);
                for (j, v) in row.entries().into_iter().enumerate() {
                    out.set(r, j, v);
                }
            }
        }
        Some(out)
    }
}

/// The algebra a module's relations are checked over.
pub fn natural_algebra(module: &ModulePresentation) -> Result<Arc<AlgebraTable>, ModuleError> {
    let top = module.truncation.unwrap_or(module.top_degree()).min(module.top_degree().max(1) + 24);
    let sub = match module.prime {
        Prime::Two if module.generators().iter().all(|g| matches!(g, Generator::Sq(1 | 2 | 4))) => Subalgebra::A2,
        _ => Subalgebra::Full,
    };
    Ok(AlgebraTable::get(module.prime, sub, top)?)
}

/// Checks `g·b` against its Adem normal form for every generator `g` and
/// word-basis element `b`, on every module degree where both sides are known.
/// This covers every Adem relation among the stored generators: Sq¹Sq¹ = 0,
/// Sq²Sq² = Sq³Sq¹, ββ = 0, and so on. Returns the number of checks made.
pub fn relation_sweep(module: &ModulePresentation) -> Result<usize, ModuleError> {
    let table = natural_algebra(module)?;
    let action = AlgebraAction::new(module, table.clone())?;
    let mut checks = 0;
    let top = module.top_degree();
    for (gi, &g) in table.generators.iter().enumerate() {
        let _ = gi;
        let gel = SteenrodElement::generator(g);
        for d in 0..=table.max_degree() {
            if d + g.degree() > table.max_degree() {
                continue;
            }
            for k in 0..table.dim(d) {
                let prod = gel.mul(&table.basis_element(d, k));
                let c = table.coordinates(&prod).expect("closed under products");
                for n in 0..=top {
                    let t = n + d + g.degree();
                    if !module.known(t) || module.dim(n) == 0 {
                        continue;
                    }
                    let (Some(lhs_b), Some(ag)) = (action.get(d, k, n), module.action(g, n + d)?) else {
                        continue;
                    };
                    let lhs = lhs_b.mul(&ag).expect("shapes");
                    let mut rhs = FpMatrix::zero(module.prime, module.dim(n), module.dim(t));
                    for (j, coef) in c.iter_nonzero() {
                        let m = action.get(d + g.degree(), j, n).expect("known degree");
                        let mut rows = Vec::new();
                        for r in 0..rhs.num_rows() {
                            let mut row = rhs.row(r).clone();
                            row.add_scaled(m.row(r), coef);
                            rows.push(row);
                        }
                        rhs = FpMatrix::from_vectors(module.prime, module.dim(t), rows);
                    }
                    checks += 1;
                    if lhs != rhs {
                        let r = (0..lhs.num_rows()).find(|&r| lhs.row(r) != rhs.row(r)).unwrap();
                        let b = table.label(d, k);
                        let relation = if b == "1" {
                            format!("{g} = {}", prod)
                        } else {
                            format!("{g}*({b}) = {}", if prod.is_zero() { "0".to_string() } else { prod.to_string() })
                        };
                        return Err(ModuleError::Relation {
                            relation,
                            element: module.name(n, r).to_string(),
                            degree: n,
                        });
                    }
                }
            }
        }
    }
    Ok(checks)
}

/// One generator in degree 0, all actions zero.
pub fn trivial_module(prime: Prime) -> ModulePresentation {
    let names = vec![vec!["1".to_string()]];
    ModulePresentation::from_fn(prime, None, names, &ModulePresentation::standard_generators(prime), |_, _, _| {
        FpVector::zero(prime, 0)
    })
}

/// Stiefel–Whitney data of η as coefficients of powers of x, plus the mod-3
/// residue of p₁ (as a multiple of x²).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwClassList {
    /// `w[2i] = c` means `w_{2i} = c·x^i`; absent degrees vanish.
    pub w: BTreeMap<u32, u8>,
    pub p1_mod3: u8,
}

impl SwClassList {
    pub fn trivial() -> Self {
        SwClassList { w: BTreeMap::new(), p1_mod3: 0 }
    }

    /// `w(η) = (1 + x)^{-k}` mod 2 with x³ = 0, and `p₁ ≡ −k x²` mod 3.
    ///
    /// For k ≡ 7 or 15 (mod 24) this gives `w₂ = x` and `w₄ = 0`
    /// (`w₄ = k(k+1)/2 · x²`, and `k(k+1)/2` is even for both residues), so
    /// the mod-2 Thom twist does not depend on k.
    pub fn for_k(k: i64) -> Result<Self, ModuleError> {
        if !matches!(k.rem_euclid(24), 7 | 15) {
            return Err(ModuleError::BadK(k));
        }
        let mut w = BTreeMap::new();
        // (1+x)^{-k} = Σ_i (−1)^i C(k+i−1, i) x^i; mod 2 the sign drops out.
        for i in 1..=2u32 {
            let c = binom_i64(k + i as i64 - 1, i as i64).rem_euclid(2) as u8;
            if c != 0 {
                w.insert(2 * i, c);
            }
        }
        assert_eq!(w.get(&2), Some(&1), "w2 must equal x");
        assert!(!w.contains_key(&4), "w4 must vanish");
        Ok(SwClassList { w, p1_mod3: Prime::Three.reduce(-k) })
    }
}

fn binom_i64(n: i64, k: i64) -> i64 {
    let mut r: i64 = 1;
    for t in 0..k {
        r = r * (n - t) / (t + 1);
    }
    r
}

/// The Thom module: basis `b·U` with `Sq^k(bU) = Σ_i Sq^i(b)·w_{k−i}·U`.
pub fn thom_twist(base: &ModulePresentation, sw: &SwClassList) -> Result<ModulePresentation, ModuleError> {
    if base.prime != Prime::Two {
        return Err(ModuleError::Schema("thom_twist works over F2".into()));
    }
    let p = base.prime;
    if sw.w.keys().any(|&d| d > 0) && base.multiplier("x").is_none() {
        return Err(ModuleError::MissingProduct("x".into()));
    }
    let table = AlgebraTable::get(p, Subalgebra::A2, 0)?;
    let action = AlgebraAction::new(base, table)?;
    // x^i·(vector in degree n), or None when unknown.
    let times_x_power = |i: u32, n: u32, v: &FpVector| -> Option<FpVector> {
        let mut cur = v.clone();
        for s in 0..i {
            let m = base.multiplier("x")?.matrices.get((n + 2 * s) as usize)?.as_ref()?;
            cur = m.row_combination(&cur);
        }
        Some(cur)
    };
    let names = base.with_suffix("U");
    let generators = base.generators();
    let mut result = ModulePresentation::from_fn(p, base.truncation, names, &generators, |g, n, idx| {
        let Generator::Sq(k) = g else { unreachable!() };
        let t = n + k;
        let mut out = FpVector::zero(p, base.dim(t));
        let v = FpVector::unit(p, base.dim(n), idx);
        for i in 0..=k {
            let wdeg = k - i;
            let coef = if wdeg == 0 { 1 } else { sw.w.get(&wdeg).copied().unwrap_or(0) };
            if coef == 0 {
                continue;
            }
            let sq = SteenrodElement::generator(Generator::Sq(i));
            let Some(m) = action.element(&sq, n, base) else { continue };
            let sqv = m.row_combination(&v);
            if let Some(img) = times_x_power(wdeg / 2, n + i, &sqv) {
                out.add_scaled(&img, coef);
            }
        }
        out
    });
    result.products = base.products.clone();
    Ok(result)
}

/// How a labelled class of H*(B;F₂) is spelled: a product of factors.
#[derive(Debug, Clone, Copy)]
enum Factor {
    X(u32),
    /// `Sq^I u`.
    U(&'static [u32]),
    /// `Sq^I v`.
    V(&'static [u32]),
}

/// The labelled basis of H*(B;F₂) through degree 15.
const HB2_LABELS: &[(u32, &str, &[Factor])] = {
    use Factor::*;
    &[
        (0, "1", &[]),
        (2, "x", &[X(1)]),
        (4, "x^2", &[X(2)]),
        (7, "u", &[U(&[])]),
        (8, "Sq1u", &[U(&[1])]),
        (9, "ux", &[U(&[]), X(1)]),
        (9, "v", &[V(&[])]),
        (10, "Sq2Sq1u", &[U(&[2, 1])]),
        (10, "xSq1u", &[X(1), U(&[1])]),
        (11, "ux^2", &[U(&[]), X(2)]),
        (11, "vx", &[V(&[]), X(1)]),
        (11, "Sq4u", &[U(&[4])]),
        (12, "x^2Sq1u", &[X(2), U(&[1])]),
        (12, "xSq2Sq1u", &[X(1), U(&[2, 1])]),
        (12, "Sq5u", &[U(&[5])]),
        (13, "vx^2", &[V(&[]), X(2)]),
        (13, "xSq4u", &[X(1), U(&[4])]),
        (13, "Sq6u", &[U(&[6])]),
        (14, "u^2", &[U(&[]), U(&[])]),
        (14, "x^2Sq2Sq1u", &[X(2), U(&[2, 1])]),
        (14, "xSq5u", &[X(1), U(&[5])]),
        (14, "Sq6Sq1u", &[U(&[6, 1])]),
        (15, "x^2Sq4u", &[X(2), U(&[4])]),
        (15, "xSq6u", &[X(1), U(&[6])]),
        (15, "uSq1u", &[U(&[]), U(&[1])]),
        (15, "Sq7Sq1u", &[U(&[7, 1])]),
    ]
};

/// Expected dimensions of H^n(B;F₂) for n = 0..=15.
pub const HB2_DIMS: [usize; 16] = [1, 0, 1, 0, 1, 0, 0, 1, 1, 2, 2, 3, 3, 3, 4, 4];

/// H*(B;F₂) realised inside H*(K(ℤ,5)×CP²;F₂), with ambient data kept for
/// inspection.
#[derive(Debug, Clone)]
pub struct HbMod2 {
    pub module: ModulePresentation,
    pub space: ProductSpace,
    /// Ambient expression of every labelled basis element, per degree.
    pub classes: Vec<Vec<Combination>>,
    /// Closure dimension per degree (before comparison with the table).
    pub closure_dims: Vec<usize>,
}

struct Ambient {
    space: ProductSpace,
    basis: Vec<Vec<UnstableClass>>,
    index: Vec<BTreeMap<UnstableClass, usize>>,
}

impl Ambient {
    fn new(max: u32) -> Self {
        let space = ProductSpace::kz5_cp2();
        let basis = space.product_basis(max);
        let index = basis.iter().map(|v| v.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect()).collect();
        Ambient { space, basis, index }
    }

    fn vec(&self, d: u32, c: &Combination) -> FpVector {
        let mut v = FpVector::zero(Prime::Two, self.basis[d as usize].len());
        for x in c {
            v.add_at(self.index[d as usize][x], 1);
        }
        v
    }

    fn comb(&self, d: u32, v: &FpVector) -> Combination {
        v.iter_nonzero().map(|(i, _)| self.basis[d as usize][i].clone()).collect()
    }
}

/// Builds H*(B;F₂) through `max_deg ≤ 15` as the sub-ring of
/// H*(K(ℤ,5)×CP²;F₂) generated by x, u = Sq²l₅ + x·l₅, v = Sq⁴l₅ + x²·l₅
/// and closed under Sq¹, Sq², Sq⁴, Sq⁸. Fails if any closure dimension
/// differs from `HB2_DIMS`.
pub fn build_hb_mod2(max_deg: u32) -> Result<HbMod2, ModuleError> {
    let max_deg = max_deg.min(15);
    let amb = Ambient::new(max_deg);
    let s = &amb.space;
    let one: Combination = [s.one()].into_iter().collect();
    let x: Combination = [s.x_power(1, 1).unwrap().unwrap()].into_iter().collect();
    let l5 = s.em_generator(0, &[]).unwrap();
    let mut u: Combination = [s.em_generator(0, &[2]).unwrap()].into_iter().collect();
    u.extend(s.mul(&x.iter().next().unwrap().clone(), &l5));
    let mut v: Combination = [s.em_generator(0, &[4]).unwrap()].into_iter().collect();
    v.extend(s.mul(&s.x_power(1, 2).unwrap().unwrap(), &l5));

    // Closure under products and squares.
    let mut spans: Vec<Subspace> =
        (0..=max_deg).map(|d| Subspace::new(Prime::Two, amb.basis[d as usize].len())).collect();
    for (d, c) in [(0, &one), (2, &x), (7, &u), (9, &v)] {
        if d <= max_deg {
            spans[d as usize].insert(&amb.vec(d, c));
        }
    }
    loop {
        let before: usize = spans.iter().map(Subspace::dim).sum();
        for d in 0..=max_deg {
            let rows: Vec<FpVector> = spans[d as usize].rows().to_vec();
            for r in &rows {
                let c = amb.comb(d, r);
                for k in [1, 2, 4, 8] {
                    if d + k <= max_deg {
                        let img = s.sq_comb(k, &c);
                        spans[(d + k) as usize].insert(&amb.vec(d + k, &img));
                    }
                }
                for d2 in d..=max_deg - d {
                    let others: Vec<FpVector> = spans[d2 as usize].rows().to_vec();
                    for o in &others {
                        let prod = s.mul_comb(&c, &amb.comb(d2, o));
                        spans[(d + d2) as usize].insert(&amb.vec(d + d2, &prod));
                    }
                }
            }
        }
        let after: usize = spans.iter().map(Subspace::dim).sum();
        if after == before {
            break;
        }
    }
    let closure_dims: Vec<usize> = spans.iter().map(Subspace::dim).collect();
    for d in 0..=max_deg {
        let expected = HB2_DIMS[d as usize];
        if closure_dims[d as usize] != expected {
            return Err(ModuleError::DimensionMismatch { degree: d, expected, found: closure_dims[d as usize] });
        }
    }

    // Evaluate the labels.
    let sq_word = |word: &[u32], c: &Combination| -> Combination {
        let w: Vec<Generator> = word.iter().map(|&i| Generator::Sq(i)).collect();
        let op = adem_normalize(Prime::Two, &w).expect("mod-2 word");
        s.act_comb(&op, c).expect("mod-2 op")
    };
    let mut names: Vec<Vec<String>> = vec![Vec::new(); max_deg as usize + 1];
    let mut classes: Vec<Vec<Combination>> = vec![Vec::new(); max_deg as usize + 1];
    for &(d, label, factors) in HB2_LABELS {
        if d > max_deg {
            continue;
        }
        let mut acc = one.clone();
        for f in factors {
            let piece = match f {
                Factor::X(e) => [s.x_power(1, *e).unwrap().unwrap()].into_iter().collect(),
                Factor::U(w) => sq_word(w, &u),
                Factor::V(w) => sq_word(w, &v),
            };
            acc = s.mul_comb(&acc, &piece);
        }
        names[d as usize].push(label.to_string());
        classes[d as usize].push(acc);
    }
    let mut coords = Vec::new();
    for d in 0..=max_deg {
        let vecs: Vec<FpVector> = classes[d as usize].iter().map(|c| amb.vec(d, c)).collect();
        let mut check = Subspace::new(Prime::Two, amb.basis[d as usize].len());
        for (v, name) in vecs.iter().zip(&names[d as usize]) {
            if !spans[d as usize].contains(v) || !check.insert(v) {
                return Err(ModuleError::BadLabel(name.clone()));
            }
        }
        coords.push(Coordinates::new(Prime::Two, amb.basis[d as usize].len(), &vecs));
    }

    let image = |op: &dyn Fn(&Combination) -> Combination, n: u32, i: usize, shift: u32| -> FpVector {
        let img = op(&classes[n as usize][i]);
        coords[(n + shift) as usize]
            .of(&amb.vec(n + shift, &img))
            .expect("closure is stable")
    };
    let mut module = ModulePresentation::from_fn(
        Prime::Two,
        Some(max_deg),
        names,
        &ModulePresentation::standard_generators(Prime::Two),
        |g, n, i| {
            let Generator::Sq(k) = g else { unreachable!() };
            image(&|c| s.sq_comb(k, c), n, i, k)
        },
    );
    let xm = Multiplier {
        degree: 2,
        matrices: (0..=max_deg)
            .map(|n| {
                (n + 2 <= max_deg).then(|| {
                    let rows = (0..module.dim(n)).map(|i| image(&|c| s.mul_comb(c, &x), n, i, 2)).collect();
                    FpMatrix::from_vectors(Prime::Two, module.dim(n + 2), rows)
                })
            })
            .collect(),
    };
    module.set_multiplier("x", xm);
    Ok(HbMod2 { module, space: amb.space.clone(), classes, closure_dims })
}

/// H*(Mη;F₂) through degree 15.
pub fn build_meta_mod2(k: i64) -> Result<ModulePresentation, ModuleError> {
    let hb = build_hb_mod2(15)?;
    thom_twist(&hb.module, &SwClassList::for_k(k)?)
}

/// H*(B;F₃) through degree 14, with the free parameter `m` in
/// `P¹βz₉ = −βz₁₃ + m·x²βz₉`.
pub fn build_hb_mod3(m: u8) -> ModulePresentation {
    build_mod3(m, None)
}

/// H*(Mη;F₃) through degree 14: `P¹U = −k·x²U`, `βU = 0`.
pub fn build_meta_mod3(k_mod3: u8, m: u8) -> ModulePresentation {
    build_mod3(m, Some(k_mod3 % 3))
}

fn build_mod3(m: u8, thom_k: Option<u8>) -> ModulePresentation {
    let p = Prime::Three;
    let labels: [&[&str]; 15] = [
        &["1"],
        &[],
        &["x"],
        &[],
        &["x^2"],
        &[],
        &[],
        &[],
        &[],
        &["z9"],
        &["bz9"],
        &["xz9"],
        &["xbz9"],
        &["z13", "x^2z9"],
        &["bz13", "x^2bz9"],
    ];
    let mut names: Vec<Vec<String>> = labels.iter().map(|v| v.iter().map(|s| s.to_string()).collect()).collect();
    let m = m % 3;
    let neg_k = thom_k.map(|k| p.neg(k)).unwrap_or(0);
    // Images on H*(B), as (target name, coefficient) lists.
    let base_image = |g: Generator, name: &str| -> Vec<(&'static str, u8)> {
        match (g, name) {
            (Generator::Beta, "z9") => vec![("bz9", 1)],
            (Generator::Beta, "xz9") => vec![("xbz9", 1)],
            (Generator::Beta, "z13") => vec![("bz13", 1)],
            (Generator::Beta, "x^2z9") => vec![("x^2bz9", 1)],
            (Generator::P(1), "z9") => vec![("z13", 1)],
            (Generator::P(1), "bz9") => vec![("bz13", 2), ("x^2bz9", m)],
            _ => vec![],
        }
    };
    // Multiplying by x² (for the P¹U term), within degrees ≤ 14.
    let times_x2 = |name: &str| -> Option<&'static str> {
        match name {
            "1" => Some("x^2"),
            "z9" => Some("x^2z9"),
            "bz9" => Some("x^2bz9"),
            _ => None,
        }
    };
    let lookup = |names: &Vec<Vec<String>>, target: &str| -> (usize, usize) {
        for (d, v) in names.iter().enumerate() {
            if let Some(i) = v.iter().position(|s| s == target) {
                return (d, i);
            }
        }
        panic!("unknown class {target}")
    };
    let base_names = names.clone();
    let module = ModulePresentation::from_fn(
        p,
        Some(14),
        names.clone(),
        &ModulePresentation::standard_generators(p),
        |g, n, i| {
            let t = n + g.degree();
            let mut v = FpVector::zero(p, base_names.get(t as usize).map_or(0, Vec::len));
            let name = base_names[n as usize][i].as_str();
            for (target, c) in base_image(g, name) {
                let (_, j) = lookup(&base_names, target);
                v.add_at(j, c);
            }
            if thom_k.is_some() && g == Generator::P(1) {
                if let Some(target) = times_x2(name) {
                    let (_, j) = lookup(&base_names, target);
                    v.add_at(j, neg_k);
                }
            }
            v
        },
    );
    if thom_k.is_some() {
        for v in names.iter_mut() {
            for s in v.iter_mut() {
                *s = if s == "1" { "U".into() } else { format!("{s}U") };
            }
        }
        return ModulePresentation { names, ..module };
    }
    module
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 6] = ["trivial2", "trivial3", "HB2", "Meta2", "HB3", "Meta3"];

/// A bundled module by name. `k` is the Pontryagin parameter (used by the
/// Thom modules) and `m` the free parameter of the mod-3 builders.
pub fn builtin(name: &str, k: i64, m: u8) -> Result<ModulePresentation, ModuleError> {
    match name {
        "trivial2" => Ok(trivial_module(Prime::Two)),
        "trivial3" => Ok(trivial_module(Prime::Three)),
        "HB2" => Ok(build_hb_mod2(15)?.module),
        "Meta2" => build_meta_mod2(k),
        "HB3" => Ok(build_hb_mod3(m % 3)),
        "Meta3" => {
            SwClassList::for_k(k)?;
            Ok(build_meta_mod3(k.rem_euclid(3) as u8, m % 3))
        }
        other => Err(ModuleError::Schema(format!("unknown builtin module {other:?}; known: {}", BUILTIN_NAMES.join(", ")))),
    }
}
