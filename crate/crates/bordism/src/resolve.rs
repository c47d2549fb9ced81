//! Minimal free resolutions over A(1), A(2) and the degree-truncated full
//! mod-3 Steenrod algebra, and the Ext charts they produce.
//!
//! The resolution is built degree by degree in the internal degree `t`; for
//! each `t` the stages `s = 0, 1, …` are extended in turn. In stage `s` and
//! degree `t` the free module has basis `a·g` (generator `g`, word-basis
//! element `a` of degree `t − |g|`), and `d(a·g) = a·d(g)` is evaluated with
//! the algebra's product table. New generators are adjoined for a complement
//! of the image inside the kernel of the previous differential, so the
//! number of stage-`s` generators of degree `t` is `dim Ext^{s,t}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fplin::{FpMatrix, FpVector, Prime, Subspace};
use crate::modbuild::{AlgebraAction, ModuleError, ModulePresentation};
use crate::steenrod::{AlgebraTable, SteenrodElement, SteenrodError, Subalgebra};

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("t_max = {t_max} exceeds the module truncation {truncation}")]
    Reliability { t_max: u32, truncation: u32 },
    #[error("charts are not comparable: {0}")]
    Incompatible(String),
    #[error("chart parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("resolution check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Module(#[from] ModuleError),
    #[error(transparent)]
    Steenrod(#[from] SteenrodError),
}

/// One stage of a resolution: generator degrees and their differentials.
#[derive(Debug, Clone, Default)]
pub struct Stage {
    pub degrees: Vec<u32>,
    /// `d(g)` as a vector in the previous stage (or the module) in degree `|g|`.
    pub differentials: Vec<FpVector>,
}

impl Stage {
    fn count_upto(&self, t: u32) -> usize {
        self.degrees.partition_point(|&d| d <= t)
    }
}

/// A minimal resolution through `s_max` and internal degree `t_max`.
#[derive(Debug)]
pub struct Resolution {
    pub prime: Prime,
    pub subalgebra: Subalgebra,
    pub module: ModulePresentation,
    pub table: Arc<AlgebraTable>,
    pub s_max: u32,
    pub t_max: u32,
    action: AlgebraAction,
    stages: Vec<Stage>,
}

/// Where each generator's block starts in a free module in degree `t`.
#[derive(Debug, Clone)]
struct Layout {
    starts: Vec<usize>,
    total: usize,
}

impl Resolution {
    pub fn stage(&self, s: u32) -> &Stage {
        &self.stages[s as usize]
    }

    /// Block layout of stage `s` in degree `t` (generators of degree ≤ t).
    fn layout(&self, s: u32, t: u32) -> Layout {
        let st = &self.stages[s as usize];
        let mut starts = Vec::new();
        let mut total = 0;
        for &d in &st.degrees[..st.count_upto(t)] {
            starts.push(total);
            total += self.alg_dim(t - d);
        }
        Layout { starts, total }
    }

    fn alg_dim(&self, d: u32) -> usize {
        if d > self.table.max_degree() {
            0
        } else {
            self.table.dim(d)
        }
    }

    /// Dimension of the target of `d_s` in degree `t`.
    fn target_dim(&self, s: u32, t: u32) -> usize {
        if s == 0 {
            self.module.dim(t)
        } else {
            self.layout(s - 1, t).total
        }
    }

    /// `a·d(g)` for basis element `k` of degree `e` and stage-`s` generator `g`.
    fn act_on_boundary(&self, s: u32, g: usize, e: u32, k: usize) -> FpVector {
        let st = &self.stages[s as usize];
        let tg = st.degrees[g];
        let t = tg + e;
        let dg = &st.differentials[g];
        if s == 0 {
            return match self.action.get(e, k, tg) {
                Some(m) => m.row_combination(dg),
                None => FpVector::zero(self.prime, self.module.dim(t)),
            };
        }
        let src = self.layout(s - 1, tg);
        let dst = self.layout(s - 1, t);
        let prev = &self.stages[s as usize - 1];
        let mut out = FpVector::zero(self.prime, dst.total);
        for (pos, c) in dg.iter_nonzero() {
            let h = src.starts.partition_point(|&x| x <= pos) - 1;
            let j = pos - src.starts[h];
            let e2 = tg - prev.degrees[h];
            if e + e2 > self.table.max_degree() {
                continue;
            }
            let prod = self.table.product(e, k, e2, j);
            let base = dst.starts[h];
            for (q, c2) in prod.iter_nonzero() {
                out.add_at(base + q, self.prime.reduce((c as i64) * (c2 as i64)));
            }
        }
        out
    }

    /// Matrix of `d_s` in degree `t` over the first `count` generators.
    fn matrix_for(&self, s: u32, t: u32, count: usize) -> FpMatrix {
        let st = &self.stages[s as usize];
        let cols = self.target_dim(s, t);
        let jobs: Vec<(usize, u32, usize)> = (0..count)
            .flat_map(|g| {
                let e = t - st.degrees[g];
                (0..self.alg_dim(e)).map(move |k| (g, e, k))
            })
            .collect();
        let rows: Vec<FpVector> = jobs.par_iter().map(|&(g, e, k)| self.act_on_boundary(s, g, e, k)).collect();
        FpMatrix::from_vectors(self.prime, cols, rows)
    }

    /// Matrix of `d_s: F_s → F_{s−1}` (or `→ M` for s = 0) in degree `t`.
    pub fn differential_matrix(&self, s: u32, t: u32) -> FpMatrix {
        self.matrix_for(s, t, self.stages[s as usize].count_upto(t))
    }

    /// `d(g)` as a list of (previous-stage generator, algebra element).
    pub fn boundary_entries(&self, s: u32, g: usize) -> Vec<(usize, SteenrodElement)> {
        assert!(s > 0, "stage 0 maps to the module");
        let st = &self.stages[s as usize];
        let tg = st.degrees[g];
        let layout = self.layout(s - 1, tg);
        let prev = &self.stages[s as usize - 1];
        let mut out = Vec::new();
        for (h, &start) in layout.starts.iter().enumerate() {
            let e = tg - prev.degrees[h];
            let mut x = SteenrodElement::zero(self.prime, e);
            for j in 0..self.alg_dim(e) {
                let c = st.differentials[g].get(start + j);
                if c != 0 {
                    x.add_scaled(&self.table.basis_element(e, j), c);
                }
            }
            if !x.is_zero() {
                out.push((h, x));
            }
        }
        out
    }

    /// Human-readable name of stage-0 generator `g`: its image in the module.
    pub fn cover_name(&self, g: usize) -> String {
        let st = &self.stages[0];
        self.module.describe(st.degrees[g], &st.differentials[g])
    }

    pub fn chart(&self) -> ExtChart {
        let mut chart = ExtChart::new(self.prime, self.s_max, self.t_max);
        for (s, st) in self.stages.iter().enumerate() {
            for &t in &st.degrees {
                *chart.dims.entry((s as u32, t)).or_insert(0) += 1;
            }
        }
        if is_trivial(&self.module) {
            chart.attach_aliases(&standard_aliases(self.prime, self.subalgebra));
        } else {
            for g in 0..self.stages[0].degrees.len() {
                let t = self.stages[0].degrees[g];
                chart.aliases.entry((0, t)).or_default().push(self.cover_name(g));
            }
        }
        chart
    }

    /// Recomputes every differential and checks d∘d = 0, exactness
    /// (rank d_s = dim ker d_{s−1} in each degree) and minimality (no
    /// boundary has a unit coefficient). Returns the number of checks.
    pub fn verify(&self) -> Result<usize, ResolveError> {
        let mut checks = 0;
        for t in 0..=self.t_max {
            let mats: Vec<FpMatrix> = (0..=self.s_max).map(|s| self.differential_matrix(s, t)).collect();
            // Stage 0 surjects onto the module.
            if mats[0].rank() != self.module.dim(t) {
                return Err(ResolveError::Check(format!("d0 is not onto in degree {t}")));
            }
            for s in 1..=self.s_max as usize {
                let prod = mats[s].mul(&mats[s - 1]).map_err(|e| ResolveError::Check(e.to_string()))?;
                if !prod.is_zero() {
                    return Err(ResolveError::Check(format!("d∘d ≠ 0 at s = {s}, t = {t}")));
                }
                let ker = mats[s - 1].num_rows() - mats[s - 1].rank();
                if mats[s].rank() != ker {
                    return Err(ResolveError::Check(format!("not exact at s = {}, t = {t}", s - 1)));
                }
                checks += 2;
            }
        }
        for s in 1..=self.s_max {
            let st = &self.stages[s as usize];
            for g in 0..st.degrees.len() {
                for (h, x) in self.boundary_entries(s, g) {
                    if x.degree() == 0 {
                        return Err(ResolveError::Check(format!(
                            "generator {g} of stage {s} hits generator {h} with a unit coefficient"
                        )));
                    }
                    checks += 1;
                }
            }
        }
        Ok(checks)
    }
}

fn is_trivial(m: &ModulePresentation) -> bool {
    m.total_dim() == 1 && m.dim(0) == 1
}

/// The algebra table used to resolve over `sub` at prime `p` through `t_max`.
pub fn algebra_for(prime: Prime, sub: Subalgebra, t_max: u32) -> Result<Arc<AlgebraTable>, ResolveError> {
    Ok(AlgebraTable::get(prime, sub, t_max)?)
}

/// Computes a minimal resolution of `m` through homological degree `s_max`
/// and internal degree `t_max`.
pub fn minimal_resolution(
    m: &ModulePresentation,
    sub: Subalgebra,
    s_max: u32,
    t_max: u32,
) -> Result<Resolution, ResolveError> {
    if let Some(d) = m.truncation() {
        if t_max > d {
            return Err(ResolveError::Reliability { t_max, truncation: d });
        }
    }
    let table = algebra_for(m.prime, sub, t_max)?;
    let action = AlgebraAction::new(m, table.clone())?;
    let mut r = Resolution {
        prime: m.prime,
        subalgebra: sub,
        module: m.clone(),
        table,
        s_max,
        t_max,
        action,
        stages: vec![Stage::default(); s_max as usize + 1],
    };
    for t in 0..=t_max {
        let mut prev_full: Option<FpMatrix> = None;
        for s in 0..=s_max {
            let existing = r.stages[s as usize].count_upto(t.saturating_sub(1));
            let existing = if t == 0 { 0 } else { existing };
            let old = r.matrix_for(s, t, existing);
            let cols = old.num_cols();
            let kernel: Vec<FpVector> = match &prev_full {
                None => (0..cols).map(|i| FpVector::unit(r.prime, cols, i)).collect(),
                Some(d) => d.left_kernel(),
            };
            let mut image = Subspace::new(r.prime, cols);
            for row in old.rows() {
                image.insert(row);
            }
            let mut rows = old.into_rows();
            for k in kernel {
                if image.insert(&k) {
                    let st = &mut r.stages[s as usize];
                    st.degrees.push(t);
                    st.differentials.push(k.clone());
                    rows.push(k);
                }
            }
            prev_full = Some(FpMatrix::from_vectors(r.prime, cols, rows));
        }
    }
    Ok(r)
}

/// Dimensions of Ext^{s,t} with named positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtChart {
    pub prime: Prime,
    pub s_max: u32,
    /// Reliability bound: entries with `t > t_max` are unknown.
    pub t_max: u32,
    dims: BTreeMap<(u32, u32), usize>,
    aliases: BTreeMap<(u32, u32), Vec<String>>,
}

impl ExtChart {
    pub fn new(prime: Prime, s_max: u32, t_max: u32) -> Self {
        ExtChart { prime, s_max, t_max, dims: BTreeMap::new(), aliases: BTreeMap::new() }
    }

    /// `None` outside the computed region (unknown, not zero).
    pub fn get(&self, s: u32, t: u32) -> Option<usize> {
        (s <= self.s_max && t <= self.t_max).then(|| self.dims.get(&(s, t)).copied().unwrap_or(0))
    }

    pub fn set(&mut self, s: u32, t: u32, dim: usize) {
        if dim == 0 {
            self.dims.remove(&(s, t));
        } else {
            self.dims.insert((s, t), dim);
        }
    }

    /// Nonzero entries in (s, t) order.
    pub fn nonzero(&self) -> impl Iterator<Item = ((u32, u32), usize)> + '_ {
        self.dims.iter().map(|(&k, &v)| (k, v))
    }

    pub fn aliases(&self, s: u32, t: u32) -> &[String] {
        self.aliases.get(&(s, t)).map_or(&[], Vec::as_slice)
    }

    /// Position of a named class, if attached.
    pub fn find_alias(&self, name: &str) -> Option<(u32, u32)> {
        self.aliases.iter().find(|(_, v)| v.iter().any(|a| a == name)).map(|(&k, _)| k)
    }

    pub fn attach_aliases(&mut self, table: &[(u32, u32, &str)]) {
        for &(s, t, name) in table {
            if self.get(s, t).is_some_and(|d| d > 0) {
                self.aliases.entry((s, t)).or_default().push(name.to_string());
            }
        }
    }

    /// Restricts to a smaller region (e.g. a stem bound).
    pub fn restricted(&self, keep: impl Fn(u32, u32) -> bool) -> ExtChart {
        let mut c = self.clone();
        c.dims.retain(|&(s, t), _| keep(s, t));
        c.aliases.retain(|&(s, t), _| keep(s, t));
        c
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("# prime={} s_max={} t_max={}\ns\tt\tdim\taliases\n", self.prime, self.s_max, self.t_max);
        for (&(s, t), &d) in &self.dims {
            let _ = writeln!(out, "{s}\t{t}\t{d}\t{}", self.aliases(s, t).join(","));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<ExtChart, ResolveError> {
        let err = |line: usize, message: &str| ResolveError::Parse { line, message: message.to_string() };
        let mut lines = text.lines().enumerate();
        let (_, head) = lines.next().ok_or_else(|| err(1, "empty document"))?;
        let mut fields = BTreeMap::new();
        for kv in head.trim_start_matches('#').split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| err(1, "bad header"))?;
            fields.insert(k, v.parse::<u32>().map_err(|_| err(1, "bad header value"))?);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| err(1, "missing header field"));
        let prime = Prime::try_from(get("prime")?).map_err(|_| err(1, "bad prime"))?;
        let mut chart = ExtChart::new(prime, get("s_max")?, get("t_max")?);
        for (i, line) in lines {
            if i == 1 && line.starts_with("s\t") {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() < 3 {
                return Err(err(i + 1, "expected s, t, dim"));
            }
            let num = |x: &str| x.parse::<u32>().map_err(|_| err(i + 1, "bad number"));
            let (s, t, d) = (num(parts[0])?, num(parts[1])?, num(parts[2])? as usize);
            chart.set(s, t, d);
            if let Some(a) = parts.get(3).filter(|a| !a.is_empty()) {
                chart.aliases.insert((s, t), a.split(',').map(str::to_string).collect());
            }
        }
        Ok(chart)
    }

    /// One dot per generator at (t − s, s), stacked horizontally when the
    /// dimension exceeds one.
    pub fn to_svg(&self) -> String {
        let cell = 30;
        let stems = self.t_max + 1;
        let width = (stems + 1) * cell;
        let height = (self.s_max + 2) * cell;
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
        );
        let _ = writeln!(out, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
        for n in 0..stems {
            let x = (n + 1) * cell;
            let _ = writeln!(out, "<text x=\"{x}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{n}</text>", height - 4);
        }
        for (&(s, t), &d) in &self.dims {
            let n = t - s;
            let cx = (n + 1) * cell;
            let cy = height - (s + 1) * cell;
            for i in 0..d {
                let off = i as i64 * 6 - (d as i64 - 1) * 3;
                let title = self.aliases(s, t).join(",");
                let _ = writeln!(
                    out,
                    "<circle data-stem=\"{n}\" data-s=\"{s}\" cx=\"{}\" cy=\"{cy}\" r=\"3\"><title>{title}</title></circle>",
                    cx as i64 + off
                );
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Positions where two charts differ, within their common region.
pub fn chart_diff(a: &ExtChart, b: &ExtChart) -> Result<Vec<String>, ResolveError> {
    if a.prime != b.prime {
        return Err(ResolveError::Incompatible(format!("primes {} and {}", a.prime, b.prime)));
    }
    let s_max = a.s_max.min(b.s_max);
    let t_max = a.t_max.min(b.t_max);
    let mut keys: Vec<(u32, u32)> = a.dims.keys().chain(b.dims.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    Ok(keys
        .into_iter()
        .filter(|&(s, t)| s <= s_max && t <= t_max)
        .filter_map(|(s, t)| {
            let (x, y) = (a.get(s, t).unwrap_or(0), b.get(s, t).unwrap_or(0));
            (x != y).then(|| format!("(s={s}, t={t}): {x} vs {y}"))
        })
        .collect())
}

/// Named classes by (s, t) for the trivial module.
pub fn standard_aliases(prime: Prime, sub: Subalgebra) -> Vec<(u32, u32, &'static str)> {
    match (prime, sub) {
        (Prime::Two, Subalgebra::A1) => vec![(1, 1, "h0"), (1, 2, "h1"), (3, 7, "v"), (4, 12, "ω")],
        (Prime::Two, _) => vec![
            (1, 1, "h0"),
            (1, 2, "h1"),
            (1, 4, "h2"),
            (2, 8, "h2^2"),
            (3, 11, "c0"),
            (3, 15, "τ"),
            (4, 12, "ω"),
            (4, 18, "d0"),
        ],
        (Prime::Three, _) => vec![
            (1, 1, "a0"),
            (1, 4, "h10"),
            (1, 12, "h11"),
            (2, 9, "Π0h0"),
            (2, 12, "b0"),
            (2, 13, "a0h11"),
            (3, 13, "a0b0"),
            (3, 14, "a0^2h11"),
            (3, 16, "b0h10"),
        ],
    }
}

/// Printable name of the class of the trivial module at (s, t), used to
/// label E₁ terms. Positions without a known name get `e[s,t]`.
pub fn class_name(prime: Prime, sub: Subalgebra, s: u32, t: u32) -> String {
    let tower = |base: &str, k: u32| -> String {
        let unit = if prime == Prime::Two { "h0" } else { "a0" };
        match (k, base.is_empty()) {
            (0, _) => base.to_string(),
            (1, _) => format!("{unit}{base}"),
            (k, _) => format!("{unit}^{k}{base}"),
        }
    };
    if t == s {
        return tower("", s);
    }
    let bases: &[(u32, u32, &str)] = match (prime, sub) {
        (Prime::Two, Subalgebra::A1) => &[(1, 2, "h1"), (2, 4, "h1^2"), (3, 7, "v"), (4, 12, "ω"), (5, 14, "h1ω"), (6, 16, "h1^2ω")],
        (Prime::Two, _) => &[
            (1, 2, "h1"),
            (2, 4, "h1^2"),
            (1, 4, "h2"),
            (2, 8, "h2^2"),
            (3, 11, "c0"),
            (4, 12, "ω"),
            (4, 13, "h1c0"),
            (5, 14, "h1ω"),
            (6, 16, "h1^2ω"),
            (5, 16, "h2ω"),
            (3, 15, "τ"),
            (4, 18, "d0"),
        ],
        (Prime::Three, _) => &[
            (1, 4, "h10"),
            (1, 12, "h11"),
            (2, 9, "Π0h0"),
            (2, 12, "b0"),
            (3, 16, "b0h10"),
        ],
    };
    // Exact matches first, then h0/a0-multiples of a named class.
    let mut best: Option<String> = None;
    for &(bs, bt, name) in bases {
        if bs <= s && t >= bt && t - bt == s - bs {
            let k = s - bs;
            let candidate = tower(name, k);
            if k == 0 {
                return candidate;
            }
            best.get_or_insert(candidate);
        }
    }
    best.unwrap_or_else(|| format!("e[{s},{t}]"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modbuild::trivial_module;

    #[test]
    fn class_names() {
        assert_eq!(class_name(Prime::Two, Subalgebra::A2, 0, 0), "");
        assert_eq!(class_name(Prime::Two, Subalgebra::A2, 2, 2), "h0^2");
        assert_eq!(class_name(Prime::Two, Subalgebra::A2, 3, 6), "h0^2h2");
        assert_eq!(class_name(Prime::Two, Subalgebra::A2, 5, 17), "h0^2τ");
        assert_eq!(class_name(Prime::Three, Subalgebra::Full, 3, 13), "a0b0");
        assert_eq!(class_name(Prime::Two, Subalgebra::A2, 3, 18), "e[3,18]");
    }

    #[test]
    fn a1_stage_one_generators() {
        let r = minimal_resolution(&trivial_module(Prime::Two), Subalgebra::A1, 2, 8).unwrap();
        assert_eq!(r.stage(1).degrees, vec![1, 2]);
        assert_eq!(r.stage(0).degrees, vec![0]);
        r.verify().unwrap();
    }

    #[test]
    fn a2_stage_one_generators() {
        let r = minimal_resolution(&trivial_module(Prime::Two), Subalgebra::A2, 1, 10).unwrap();
        assert_eq!(r.stage(1).degrees, vec![1, 2, 4]);
    }

    #[test]
    fn a1_named_classes() {
        let r = minimal_resolution(&trivial_module(Prime::Two), Subalgebra::A1, 4, 12).unwrap();
        let c = r.chart();
        assert_eq!(c.get(1, 2), Some(1));
        assert_eq!(c.get(3, 7), Some(1));
        assert_eq!(c.get(4, 12), Some(1));
        assert_eq!(c.get(5, 12), None);
        assert_eq!(c.find_alias("ω"), Some((4, 12)));
        for s in 0..=4 {
            assert_eq!(c.get(s, s), Some(1));
        }
    }

    #[test]
    fn truncation_is_enforced() {
        let m = crate::modbuild::build_hb_mod3(0);
        assert!(matches!(
            minimal_resolution(&m, Subalgebra::Full, 2, 20),
            Err(ResolveError::Reliability { .. })
        ));
    }

    #[test]
    fn tsv_round_trip_and_diff() {
        let r = minimal_resolution(&trivial_module(Prime::Two), Subalgebra::A1, 4, 12).unwrap();
        let c = r.chart();
        let back = ExtChart::from_tsv(&c.to_tsv()).unwrap();
        assert_eq!(back, c);
        assert!(chart_diff(&c, &c).unwrap().is_empty());
        let mut d = c.clone();
        d.set(2, 9, 1);
        assert_eq!(chart_diff(&c, &d).unwrap().len(), 1);
        let empty = ExtChart::new(Prime::Two, 3, 3);
        assert_eq!(empty.to_tsv().lines().count(), 2);
    }

    #[test]
    fn svg_dots_match_chart() {
        let r = minimal_resolution(&trivial_module(Prime::Two), Subalgebra::A1, 4, 12).unwrap();
        let c = r.chart();
        let svg = c.to_svg();
        let mut dots: Vec<(u32, u32)> = svg
            .lines()
            .filter(|l| l.starts_with("<circle"))
            .map(|l| {
                let grab = |key: &str| {
                    let i = l.find(key).unwrap() + key.len();
                    l[i..].split('"').next().unwrap().parse::<u32>().unwrap()
                };
                (grab("data-stem=\""), grab("data-s=\""))
            })
            .collect();
        dots.sort_unstable();
        let mut expect: Vec<(u32, u32)> =
            c.nonzero().flat_map(|((s, t), d)| std::iter::repeat_n((t - s, s), d)).collect();
        expect.sort_unstable();
        assert_eq!(dots, expect);
    }

    #[test]
    fn mod3_low_degrees() {
        let r = minimal_resolution(&trivial_module(Prime::Three), Subalgebra::Full, 2, 10).unwrap();
        let c = r.chart();
        assert_eq!(c.get(1, 1), Some(1));
        assert_eq!(c.get(1, 4), Some(1));
        assert_eq!(c.get(2, 9), Some(1));
        r.verify().unwrap();
    }
}
