//! Exact linear algebra over F₂ and F₃.
//!
//! Vectors over F₂ are bit-packed into `u64` words; vectors over F₃ use one
//! byte per entry. Row reduction always picks the leftmost pivot column and,
//! within a column, the first eligible row, so every result is a deterministic
//! function of the input.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinAlgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("prime mismatch: {0} vs {1}")]
    PrimeMismatch(Prime, Prime),
    #[error("unsupported prime {0}")]
    UnsupportedPrime(u32),
}

/// One of the two prime fields the toolkit works over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Prime {
    Two,
    Three,
}

impl Prime {
    pub fn value(self) -> u32 {
        match self {
            Prime::Two => 2,
            Prime::Three => 3,
        }
    }

    pub fn reduce(self, a: i64) -> u8 {
        a.rem_euclid(self.value() as i64) as u8
    }

    pub fn inv(self, a: u8) -> u8 {
        debug_assert!(a != 0 && (a as u32) < self.value());
        // 1⁻¹ = 1, and 2⁻¹ = 2 over F₃.
        a
    }

    pub fn neg(self, a: u8) -> u8 {
        if a == 0 {
            0
        } else {
            (self.value() as u8) - a
        }
    }
}

impl TryFrom<u32> for Prime {
    type Error = LinAlgError;
    fn try_from(p: u32) -> Result<Self, Self::Error> {
        match p {
            2 => Ok(Prime::Two),
            3 => Ok(Prime::Three),
            other => Err(LinAlgError::UnsupportedPrime(other)),
        }
    }
}

impl From<Prime> for u32 {
    fn from(p: Prime) -> u32 {
        p.value()
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Store {
    Bits(Vec<u64>),
    Bytes(Vec<u8>),
}

/// A vector over F_p of fixed length.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FpVector {
    prime: Prime,
    len: usize,
    store: Store,
}

impl FpVector {
    pub fn zero(prime: Prime, len: usize) -> Self {
        let store = match prime {
            Prime::Two => Store::Bits(vec![0; len.div_ceil(64)]),
            Prime::Three => Store::Bytes(vec![0; len]),
        };
        FpVector { prime, len, store }
    }

    /// Builds a vector from integer entries, reducing them mod p.
    pub fn from_entries(prime: Prime, entries: &[i64]) -> Self {
        let mut v = Self::zero(prime, entries.len());
        for (i, &e) in entries.iter().enumerate() {
            v.set(i, prime.reduce(e));
        }
        v
    }

    pub fn unit(prime: Prime, len: usize, i: usize) -> Self {
        let mut v = Self::zero(prime, len);
        v.set(i, 1);
        v
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        debug_assert!(i < self.len);
        match &self.store {
            Store::Bits(w) => ((w[i / 64] >> (i % 64)) & 1) as u8,
            Store::Bytes(b) => b[i],
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: u8) {
        debug_assert!(i < self.len);
        match &mut self.store {
            Store::Bits(w) => {
                let mask = 1u64 << (i % 64);
                if value & 1 == 1 {
                    w[i / 64] |= mask;
                } else {
                    w[i / 64] &= !mask;
                }
            }
            Store::Bytes(b) => b[i] = value % 3,
        }
    }

    /// Adds `c` to entry `i`.
    #[inline]
    pub fn add_at(&mut self, i: usize, c: u8) {
        match &mut self.store {
            Store::Bits(w) => {
                if c & 1 == 1 {
                    w[i / 64] ^= 1u64 << (i % 64);
                }
            }
            Store::Bytes(b) => b[i] = (b[i] + c) % 3,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.store {
            Store::Bits(w) => w.iter().all(|&x| x == 0),
            Store::Bytes(b) => b.iter().all(|&x| x == 0),
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &FpVector, c: u8) {
        debug_assert_eq!(self.len, other.len);
        if c == 0 {
            return;
        }
        match (&mut self.store, &other.store) {
            (Store::Bits(a), Store::Bits(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x ^= *y;
                }
            }
            (Store::Bytes(a), Store::Bytes(b)) => {
                for (x, &y) in a.iter_mut().zip(b) {
                    *x = (*x + c * y) % 3;
                }
            }
            _ => panic!("prime mismatch in add_scaled"),
        }
    }

    /// Like [`add_scaled`](Self::add_scaled) but only touches entries from
    /// `start` on; the caller guarantees `other` vanishes before `start`.
    fn add_scaled_from(&mut self, other: &FpVector, c: u8, start: usize) {
        if c == 0 {
            return;
        }
        match (&mut self.store, &other.store) {
            (Store::Bits(a), Store::Bits(b)) => {
                for k in start / 64..a.len() {
                    a[k] ^= b[k];
                }
            }
            (Store::Bytes(a), Store::Bytes(b)) => {
                for k in start..a.len() {
                    a[k] = (a[k] + c * b[k]) % 3;
                }
            }
            _ => panic!("prime mismatch in add_scaled"),
        }
    }

    pub fn scale(&mut self, c: u8) {
        match &mut self.store {
            Store::Bits(w) => {
                if c & 1 == 0 {
                    w.iter_mut().for_each(|x| *x = 0);
                }
            }
            Store::Bytes(b) => b.iter_mut().for_each(|x| *x = (*x * c) % 3),
        }
    }

    /// Index of the first nonzero entry at or after `from`.
    pub fn first_nonzero_from(&self, from: usize) -> Option<usize> {
        if from >= self.len {
            return None;
        }
        match &self.store {
            Store::Bits(w) => {
                let mut k = from / 64;
                let mut word = w[k] & (!0u64 << (from % 64));
                loop {
                    if word != 0 {
                        return Some(k * 64 + word.trailing_zeros() as usize);
                    }
                    k += 1;
                    if k >= w.len() {
                        return None;
                    }
                    word = w[k];
                }
            }
            Store::Bytes(b) => b[from..].iter().position(|&x| x != 0).map(|i| i + from),
        }
    }

    pub fn first_nonzero(&self) -> Option<usize> {
        self.first_nonzero_from(0)
    }

    /// Nonzero entries as `(index, value)` pairs in increasing index order.
    pub fn iter_nonzero(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        let mut next = self.first_nonzero();
        std::iter::from_fn(move || {
            let i = next?;
            next = self.first_nonzero_from(i + 1);
            Some((i, self.get(i)))
        })
    }

    pub fn count_nonzero(&self) -> usize {
        match &self.store {
            Store::Bits(w) => w.iter().map(|x| x.count_ones() as usize).sum(),
            Store::Bytes(b) => b.iter().filter(|&&x| x != 0).count(),
        }
    }

    pub fn entries(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn dot(&self, other: &FpVector) -> u8 {
        debug_assert_eq!(self.len, other.len);
        match (&self.store, &other.store) {
            (Store::Bits(a), Store::Bits(b)) => {
                let ones: u32 = a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum();
                (ones & 1) as u8
            }
            (Store::Bytes(a), Store::Bytes(b)) => {
                let s: u32 = a.iter().zip(b).map(|(&x, &y)| x as u32 * y as u32).sum();
                (s % 3) as u8
            }
            _ => panic!("prime mismatch in dot"),
        }
    }

    /// Concatenation `self ⊕ other`.
    pub fn concat(&self, other: &FpVector) -> FpVector {
        let mut v = FpVector::zero(self.prime, self.len + other.len);
        for (i, c) in self.iter_nonzero() {
            v.set(i, c);
        }
        for (i, c) in other.iter_nonzero() {
            v.set(self.len + i, c);
        }
        v
    }

    /// Entries `range.start..range.end` as a new vector.
    pub fn slice(&self, start: usize, end: usize) -> FpVector {
        let mut v = FpVector::zero(self.prime, end - start);
        for (i, c) in self.iter_nonzero() {
            if i >= start && i < end {
                v.set(i - start, c);
            }
        }
        v
    }
}

impl fmt::Debug for FpVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.len {
            write!(f, "{}", self.get(i))?;
        }
        write!(f, "]")
    }
}

/// A dense matrix over F_p stored as a list of row vectors.
#[derive(Clone, PartialEq, Eq)]
pub struct FpMatrix {
    prime: Prime,
    cols: usize,
    rows: Vec<FpVector>,
}

impl FpMatrix {
    pub fn zero(prime: Prime, rows: usize, cols: usize) -> Self {
        FpMatrix {
            prime,
            cols,
            rows: (0..rows).map(|_| FpVector::zero(prime, cols)).collect(),
        }
    }

    pub fn identity(prime: Prime, n: usize) -> Self {
        let mut m = Self::zero(prime, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds a matrix from integer rows; entries are reduced mod p.
    pub fn from_rows(prime: Prime, rows: &[Vec<i64>]) -> Result<Self, LinAlgError> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            if r.len() != cols {
                return Err(LinAlgError::DimensionMismatch { expected: cols, found: r.len() });
            }
            out.push(FpVector::from_entries(prime, r));
        }
        Ok(FpMatrix { prime, cols, rows: out })
    }

    pub fn from_vectors(prime: Prime, cols: usize, rows: Vec<FpVector>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == cols && r.prime() == prime));
        FpMatrix { prime, cols, rows }
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.rows[r].get(c)
    }

    pub fn set(&mut self, r: usize, c: usize, value: u8) {
        self.rows[r].set(c, value)
    }

    pub fn row(&self, r: usize) -> &FpVector {
        &self.rows[r]
    }

    pub fn rows(&self) -> &[FpVector] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<FpVector> {
        self.rows
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(FpVector::is_zero)
    }

    pub fn transpose(&self) -> FpMatrix {
        let mut t = FpMatrix::zero(self.prime, self.cols, self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            for (c, v) in row.iter_nonzero() {
                t.set(c, r, v);
            }
        }
        t
    }

    /// `M·x` for a column vector `x`.
    pub fn mul_vec(&self, x: &FpVector) -> Result<FpVector, LinAlgError> {
        if x.len() != self.cols {
            return Err(LinAlgError::DimensionMismatch { expected: self.cols, found: x.len() });
        }
        let mut out = FpVector::zero(self.prime, self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            out.set(r, row.dot(x));
        }
        Ok(out)
    }

    /// `xᵀ·M` for a row vector `x`, i.e. the combination of rows.
    pub fn row_combination(&self, x: &FpVector) -> FpVector {
        let mut out = FpVector::zero(self.prime, self.cols);
        for (r, c) in x.iter_nonzero() {
            out.add_scaled(&self.rows[r], c);
        }
        out
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &FpMatrix) -> Result<FpMatrix, LinAlgError> {
        if other.num_rows() != self.cols {
            return Err(LinAlgError::DimensionMismatch {
                expected: self.cols,
                found: other.num_rows(),
            });
        }
        let rows = self.rows.iter().map(|r| other.row_combination(r)).collect();
        Ok(FpMatrix { prime: self.prime, cols: other.cols, rows })
    }

    /// Reduced row-echelon form and its pivot columns.
    pub fn row_reduce(&self) -> (FpMatrix, Vec<usize>) {
        let mut m = self.clone();
        let pivots = m.row_reduce_in_place();
        (m, pivots)
    }

    fn row_reduce_in_place(&mut self) -> Vec<usize> {
        let p = self.prime;
        let n = self.rows.len();
        let mut pivots = Vec::new();
        let mut next = 0;
        let mut col = 0;
        while next < n && col < self.cols {
            // Leftmost column with a nonzero entry among unprocessed rows.
            let mut best: Option<(usize, usize)> = None;
            for r in next..n {
                if let Some(c) = self.rows[r].first_nonzero_from(col) {
                    if best.is_none_or(|(bc, _)| c < bc) {
                        best = Some((c, r));
                        if c == col {
                            break;
                        }
                    }
                }
            }
            let Some((c, r)) = best else { break };
            self.rows[next..=r].rotate_right(1);
            let lead = self.rows[next].get(c);
            self.rows[next].scale(p.inv(lead));
            let pivot_row = self.rows[next].clone();
            for (i, row) in self.rows.iter_mut().enumerate() {
                if i != next {
                    let e = row.get(c);
                    if e != 0 {
                        row.add_scaled(&pivot_row, p.neg(e));
                    }
                }
            }
            pivots.push(c);
            next += 1;
            col = c + 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut sub = Subspace::new(self.prime, self.cols);
        self.rows.iter().filter(|r| sub.insert(r)).count()
    }

    /// Basis of `{v : M·v = 0}`: one vector per free column, with that free
    /// variable set to 1 and the others to 0.
    pub fn kernel_basis(&self) -> Vec<FpVector> {
        let p = self.prime;
        let (ech, pivots) = self.row_reduce();
        let mut is_pivot = vec![None; self.cols];
        for (r, &c) in pivots.iter().enumerate() {
            is_pivot[c] = Some(r);
        }
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if is_pivot[free].is_some() {
                continue;
            }
            let mut v = FpVector::unit(p, self.cols, free);
            for (r, &c) in pivots.iter().enumerate() {
                let e = ech.get(r, free);
                if e != 0 {
                    v.set(c, p.neg(e));
                }
            }
            basis.push(v);
        }
        basis
    }

    /// Basis of `{v : v·M = 0}` (combinations of rows that vanish), found by
    /// reducing the augmented rows `[row_i | e_i]` in order.
    pub fn left_kernel(&self) -> Vec<FpVector> {
        let n = self.rows.len();
        let mut sub = Subspace::new(self.prime, self.cols + n);
        let mut out = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            let mut w = r.concat(&FpVector::unit(self.prime, n, i));
            sub.reduce(&mut w);
            if let Some(c) = sub.insert_reduced(w) {
                if c >= self.cols {
                    let row = &sub.rows()[sub.row_for_pivot(c).unwrap()];
                    out.push(row.slice(self.cols, self.cols + n));
                }
            }
        }
        out
    }

    /// A solution of `M·x = b` with all free variables zero, if one exists.
    pub fn solve(&self, b: &FpVector) -> Result<Option<FpVector>, LinAlgError> {
        if b.len() != self.rows.len() {
            return Err(LinAlgError::DimensionMismatch { expected: self.rows.len(), found: b.len() });
        }
        let p = self.prime;
        // Augment with b as the last column and reduce.
        let mut aug = FpMatrix::zero(p, self.rows.len(), self.cols + 1);
        for (r, row) in self.rows.iter().enumerate() {
            for (c, v) in row.iter_nonzero() {
                aug.set(r, c, v);
            }
            aug.set(r, self.cols, b.get(r));
        }
        let pivots = aug.row_reduce_in_place();
        if pivots.last() == Some(&self.cols) {
            return Ok(None);
        }
        let mut x = FpVector::zero(p, self.cols);
        for (r, &c) in pivots.iter().enumerate() {
            x.set(c, aug.get(r, self.cols));
        }
        Ok(Some(x))
    }
}

impl fmt::Debug for FpMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FpMatrix(p={}, {}x{})", self.prime, self.rows.len(), self.cols)?;
        for r in &self.rows {
            writeln!(f, "  {r:?}")?;
        }
        Ok(())
    }
}

/// An incrementally built subspace in echelon form.
///
/// Each stored row has a distinct pivot column and vanishes to the left of
/// it; `reduce` clears a vector's pivot-column entries in increasing order.
/// Optionally tracks, for each stored row, its expression in terms of the
/// inserted vectors.
#[derive(Clone, Debug)]
pub struct Subspace {
    prime: Prime,
    dim: usize,
    rows: Vec<FpVector>,
    pivot_of_col: Vec<Option<usize>>,
}

impl Subspace {
    pub fn new(prime: Prime, dim: usize) -> Self {
        Subspace { prime, dim, rows: Vec::new(), pivot_of_col: vec![None; dim] }
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[FpVector] {
        &self.rows
    }

    pub fn pivots(&self) -> Vec<usize> {
        (0..self.dim).filter(|&c| self.pivot_of_col[c].is_some()).collect()
    }

    pub fn is_pivot(&self, col: usize) -> bool {
        self.pivot_of_col[col].is_some()
    }

    /// Reduces `v` in place modulo the subspace.
    pub fn reduce(&self, v: &mut FpVector) {
        let mut from = 0;
        while let Some(c) = v.first_nonzero_from(from) {
            if let Some(r) = self.pivot_of_col[c] {
                let e = v.get(c);
                v.add_scaled_from(&self.rows[r], self.prime.neg(e), c);
            }
            from = c + 1;
        }
    }

    /// Reduces `v` and records which stored rows were subtracted, with
    /// coefficients: `v_original = v_reduced + Σ coef·row`.
    pub fn reduce_tracking(&self, v: &mut FpVector) -> Vec<(usize, u8)> {
        let mut used = Vec::new();
        let mut from = 0;
        while let Some(c) = v.first_nonzero_from(from) {
            if let Some(r) = self.pivot_of_col[c] {
                let e = v.get(c);
                v.add_scaled_from(&self.rows[r], self.prime.neg(e), c);
                used.push((r, e));
            }
            from = c + 1;
        }
        used
    }

    pub fn contains(&self, v: &FpVector) -> bool {
        let mut w = v.clone();
        self.reduce(&mut w);
        w.is_zero()
    }

    /// Adds `v` to the span; returns whether the dimension grew.
    pub fn insert(&mut self, v: &FpVector) -> bool {
        let mut w = v.clone();
        self.reduce(&mut w);
        self.insert_reduced(w).is_some()
    }

    /// Inserts an already reduced vector, returning its pivot column.
    pub fn insert_reduced(&mut self, mut w: FpVector) -> Option<usize> {
        let c = w.first_nonzero()?;
        let lead = w.get(c);
        w.scale(self.prime.inv(lead));
        self.pivot_of_col[c] = Some(self.rows.len());
        self.rows.push(w);
        Some(c)
    }

    /// Index into [`rows`](Self::rows) of the row with pivot `col`.
    pub fn row_for_pivot(&self, col: usize) -> Option<usize> {
        self.pivot_of_col[col]
    }
}

/// Coordinates with respect to a fixed list of (independent) vectors.
#[derive(Clone, Debug)]
pub struct Coordinates {
    prime: Prime,
    ambient: usize,
    count: usize,
    echelon: Subspace,
}

impl Coordinates {
    /// Panics if `vectors` are dependent.
    pub fn new(prime: Prime, ambient: usize, vectors: &[FpVector]) -> Self {
        let count = vectors.len();
        let mut echelon = Subspace::new(prime, ambient + count);
        for (i, v) in vectors.iter().enumerate() {
            let grew = echelon.insert(&v.concat(&FpVector::unit(prime, count, i)));
            assert!(grew, "coordinate basis is not independent");
        }
        Coordinates { prime, ambient, count, echelon }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// `c` with `v = Σ c_i·vectors[i]`, or `None` if `v` is outside the span.
    pub fn of(&self, v: &FpVector) -> Option<FpVector> {
        let mut w = v.concat(&FpVector::zero(self.prime, self.count));
        self.echelon.reduce(&mut w);
        if w.first_nonzero().is_some_and(|i| i < self.ambient) {
            return None;
        }
        let mut c = w.slice(self.ambient, self.ambient + self.count);
        c.scale(self.prime.neg(1));
        Some(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(p: Prime, rows: &[&[i64]]) -> FpMatrix {
        FpMatrix::from_rows(p, &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Exhaustive rank of a small matrix: log_p of the row-span size.
    fn brute_rank(a: &FpMatrix) -> usize {
        let p = a.prime().value() as usize;
        let n = a.num_rows();
        let mut span = std::collections::HashSet::new();
        let mut coeffs = vec![0u8; n];
        loop {
            let mut v = FpVector::zero(a.prime(), a.num_cols());
            for (r, &c) in coeffs.iter().enumerate() {
                v.add_scaled(a.row(r), c);
            }
            span.insert(v.entries());
            let mut k = 0;
            loop {
                if k == n {
                    let mut size = span.len();
                    let mut rank = 0;
                    while size > 1 {
                        size /= p;
                        rank += 1;
                    }
                    return rank;
                }
                coeffs[k] += 1;
                if (coeffs[k] as usize) < p {
                    break;
                }
                coeffs[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn identity_pivots() {
        let (e, piv) = FpMatrix::identity(Prime::Two, 3).row_reduce();
        assert_eq!(piv, vec![0, 1, 2]);
        assert_eq!(e, FpMatrix::identity(Prime::Two, 3));
    }

    #[test]
    fn zero_matrix_has_no_pivots() {
        let (_, piv) = FpMatrix::zero(Prime::Two, 2, 4).row_reduce();
        assert!(piv.is_empty());
    }

    #[test]
    fn singular_two_by_two_over_f3() {
        // det = 1 - 4 = -3 = 0 mod 3, so the second row is twice the first.
        let a = m(Prime::Three, &[&[1, 2], &[2, 1]]);
        assert_eq!(brute_rank(&a), 1);
        let (e, piv) = a.row_reduce();
        assert_eq!(piv, vec![0]);
        assert_eq!(e.row(0).entries(), vec![1, 2]);
        assert!(e.row(1).is_zero());
        assert_eq!(a.rank(), 1);
    }

    #[test]
    fn left_kernel_annihilates_rows() {
        let m = FpMatrix::from_rows(Prime::Three, &[vec![1, 2, 0], vec![2, 1, 0], vec![0, 0, 1], vec![1, 2, 1]]).unwrap();
        let k = m.left_kernel();
        assert_eq!(k.len(), 4 - m.rank());
        for v in &k {
            assert!(m.transpose().mul_vec(v).unwrap().is_zero());
        }
    }

    #[test]
    fn kernel_of_identity_and_zero() {
        assert!(FpMatrix::identity(Prime::Three, 4).kernel_basis().is_empty());
        assert_eq!(FpMatrix::zero(Prime::Two, 2, 3).kernel_basis().len(), 3);
    }

    #[test]
    fn kernel_matches_exhaustive_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let rows: Vec<Vec<i64>> =
                (0..6).map(|_| (0..6).map(|_| rng.gen_range(0..2)).collect()).collect();
            let a = FpMatrix::from_rows(Prime::Two, &rows).unwrap();
            let mut null = 0usize;
            for bits in 0u32..64 {
                let v = FpVector::from_entries(
                    Prime::Two,
                    &(0..6).map(|i| ((bits >> i) & 1) as i64).collect::<Vec<_>>(),
                );
                if a.mul_vec(&v).unwrap().is_zero() {
                    null += 1;
                }
            }
            let k = a.kernel_basis();
            assert_eq!(1usize << k.len(), null);
            for v in &k {
                assert!(a.mul_vec(v).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn solve_cases() {
        let id = FpMatrix::identity(Prime::Two, 3);
        let b = FpVector::from_entries(Prime::Two, &[1, 0, 1]);
        assert_eq!(id.solve(&b).unwrap(), Some(b.clone()));
        let z = FpMatrix::zero(Prime::Three, 2, 2);
        let b = FpVector::from_entries(Prime::Three, &[0, 2]);
        assert_eq!(z.solve(&b).unwrap(), None);
        assert!(matches!(
            z.solve(&FpVector::zero(Prime::Three, 3)),
            Err(LinAlgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn solve_consistent_random_system() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let rows: Vec<Vec<i64>> =
                (0..5).map(|_| (0..7).map(|_| rng.gen_range(0..2)).collect()).collect();
            let a = FpMatrix::from_rows(Prime::Two, &rows).unwrap();
            let x0 = FpVector::from_entries(
                Prime::Two,
                &(0..7).map(|_| rng.gen_range(0..2)).collect::<Vec<_>>(),
            );
            let b = a.mul_vec(&x0).unwrap();
            let x = a.solve(&b).unwrap().expect("consistent");
            assert_eq!(a.mul_vec(&x).unwrap(), b);
        }
    }

    #[test]
    fn brute_rank_agrees_on_small_f3() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..30 {
            let rows: Vec<Vec<i64>> =
                (0..3).map(|_| (0..4).map(|_| rng.gen_range(0..3)).collect()).collect();
            let a = FpMatrix::from_rows(Prime::Three, &rows).unwrap();
            assert_eq!(a.rank(), brute_rank(&a));
            assert_eq!(a.row_reduce().1.len(), a.rank());
        }
    }

    #[test]
    fn subspace_tracking_reconstructs() {
        let p = Prime::Three;
        let mut s = Subspace::new(p, 3);
        s.insert(&FpVector::from_entries(p, &[1, 2, 0]));
        s.insert(&FpVector::from_entries(p, &[0, 1, 1]));
        let v = FpVector::from_entries(p, &[2, 1, 2]);
        let mut w = v.clone();
        let used = s.reduce_tracking(&mut w);
        let mut back = w.clone();
        for (r, c) in used {
            back.add_scaled(&s.rows()[r], c);
        }
        assert_eq!(back, v);
    }
}
