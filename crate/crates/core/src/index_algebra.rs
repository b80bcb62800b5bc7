//! Index lists over a (k,n) signature.
//!
//! An [`IndexList`] is a strictly increasing list of indices in `[0, d)`,
//! stored as a bitmask. Coefficients of a grade-s multivector are stored in
//! the lexicographic order produced by [`enumerate_grade`].

use std::cmp::Ordering;
use std::fmt;
use std::sync::OnceLock;

use crate::error::{domain, Error, Result};

/// Largest supported dimension k+n.
pub const MAX_DIM: usize = 16;

/// Count of temporal (`k`, metric −1) and spatial (`n`, metric +1)
/// dimensions. Temporal indices come first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Signature {
    k: usize,
    n: usize,
}

impl Signature {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        let d = k + n;
        if d == 0 || d > MAX_DIM {
            return domain(format!("signature ({k},{n}): k+n must be in 1..={MAX_DIM}"));
        }
        Ok(Signature { k, n })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.k + self.n
    }

    /// Diagonal metric entry Δ_ii as a float.
    #[inline]
    pub fn delta(&self, i: usize) -> f64 {
        if i < self.k {
            -1.0
        } else {
            1.0
        }
    }

    /// Δ_II for a whole list, as a float.
    #[inline]
    pub fn delta_of(&self, list: IndexList) -> f64 {
        let temporal = (list.0 & ((1u32 << self.k) - 1)).count_ones();
        if temporal.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.dim() {
            return domain(format!("index {i} out of range for d = {}", self.dim()));
        }
        Ok(())
    }

    pub fn check_list(&self, list: IndexList) -> Result<()> {
        match list.last() {
            Some(i) if i >= self.dim() => domain(format!("index list {list} out of range for d = {}", self.dim())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k, self.n)
    }
}

/// Strictly increasing list of distinct indices, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct IndexList(u32);

impl IndexList {
    pub const EMPTY: IndexList = IndexList(0);

    /// Builds a list from strictly increasing indices.
    pub fn new(indices: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        let mut prev: Option<usize> = None;
        for &i in indices {
            if i >= MAX_DIM {
                return domain(format!("index {i} exceeds the supported dimension"));
            }
            if let Some(p) = prev {
                if i <= p {
                    return domain(format!("index list {indices:?} is not strictly increasing"));
                }
            }
            mask |= 1 << i;
            prev = Some(i);
        }
        Ok(IndexList(mask))
    }

    pub fn single(i: usize) -> Self {
        assert!(i < MAX_DIM, "index {i} exceeds the supported dimension");
        IndexList(1 << i)
    }

    pub fn pair(i: usize, j: usize) -> Result<Self> {
        Self::new(&[i, j])
    }

    pub fn from_mask(mask: u32) -> Self {
        IndexList(mask)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        i < 32 && self.0 & (1 << i) != 0
    }

    pub fn is_disjoint(self, other: IndexList) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset_of(self, other: IndexList) -> bool {
        self.0 & !other.0 == 0
    }

    /// Set difference `self ∖ other`.
    pub fn without(self, other: IndexList) -> IndexList {
        IndexList(self.0 & !other.0)
    }

    /// Set union; only meaningful as a sorted merge when disjoint.
    pub fn union(self, other: IndexList) -> IndexList {
        IndexList(self.0 | other.0)
    }

    pub fn last(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(31 - self.0.leading_zeros() as usize)
        }
    }

    pub fn iter(self) -> Indices {
        Indices(self.0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

/// Ascending iterator over the indices of an [`IndexList`].
pub struct Indices(u32);

impl Iterator for Indices {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Indices {}

impl Ord for IndexList {
    /// Lexicographic order on the index sequences.
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for IndexList {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for IndexList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for IndexList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Non-decreasing list of indices; repeats allowed.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct SymIndexList(Vec<usize>);

impl SymIndexList {
    pub fn new(indices: &[usize]) -> Result<Self> {
        if indices.windows(2).any(|w| w[1] < w[0]) {
            return domain(format!("index list {indices:?} is not non-decreasing"));
        }
        if indices.iter().any(|&i| i >= MAX_DIM) {
            return domain(format!("index list {indices:?} exceeds the supported dimension"));
        }
        Ok(SymIndexList(indices.to_vec()))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Distinct permutations of the list, in lexicographic order.
    pub fn distinct_permutations(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = self.0.clone();
        loop {
            out.push(cur.clone());
            if !next_permutation(&mut cur) {
                break;
            }
        }
        out
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// σ(I,J): sign of the permutation sorting the concatenation (I,J), or 0
/// when the lists share an index.
#[inline]
pub fn sigma(i: IndexList, j: IndexList) -> i8 {
    if !i.is_disjoint(j) {
        return 0;
    }
    // each element of J is passed by every larger element of I
    let mut inversions = 0u32;
    for b in j.iter() {
        inversions += (i.0 >> b).count_ones();
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// σ(I,J) as a float.
#[inline]
pub fn sigma_f(i: IndexList, j: IndexList) -> f64 {
    sigma(i, j) as f64
}

/// σ on raw sorted sequences, with range checking against `sig`.
pub fn sigma_checked(i: &[usize], j: &[usize], sig: Signature) -> Result<i8> {
    for &x in i.iter().chain(j) {
        sig.check_index(x)?;
    }
    Ok(sigma(IndexList::new(i)?, IndexList::new(j)?))
}

/// ε(I,J): the sorted merge of disjoint lists.
pub fn epsilon(i: IndexList, j: IndexList) -> Result<IndexList> {
    if !i.is_disjoint(j) {
        return domain(format!("epsilon of overlapping lists {i} and {j}"));
    }
    Ok(i.union(j))
}

/// All indices of `[0, d)` not in `list`.
pub fn complement(list: IndexList, sig: Signature) -> IndexList {
    let full = (1u32 << sig.dim()) - 1;
    IndexList(full & !list.0)
}

/// Δ_II: product of the diagonal metric entries over `list`.
pub fn metric_delta(list: IndexList, sig: Signature) -> i8 {
    if sig.delta_of(list) < 0.0 {
        -1
    } else {
        1
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for t in 0..k {
        acc = acc * (n - t) / (t + 1);
    }
    acc
}

struct Tables {
    by_grade: Vec<Vec<IndexList>>,
    rank: Vec<u16>,
}

fn tables(d: usize) -> &'static Tables {
    #[allow(clippy::declare_interior_mutable_const)]
    const INIT: OnceLock<Tables> = OnceLock::new();
    static TABLES: [OnceLock<Tables>; MAX_DIM + 1] = [INIT; MAX_DIM + 1];
    TABLES[d].get_or_init(|| {
        let mut by_grade: Vec<Vec<IndexList>> = vec![Vec::new(); d + 1];
        for mask in 0u32..(1u32 << d) {
            by_grade[mask.count_ones() as usize].push(IndexList(mask));
        }
        let mut rank = vec![0u16; 1 << d];
        for lists in by_grade.iter_mut() {
            lists.sort();
            for (pos, l) in lists.iter().enumerate() {
                rank[l.0 as usize] = pos as u16;
            }
        }
        Tables { by_grade, rank }
    })
}

/// Canonical basis of grade `s` in dimension `d`, borrowed from a cache.
///
/// # Panics
/// If `s > d` or `d > MAX_DIM`.
pub fn grade_basis(d: usize, s: usize) -> &'static [IndexList] {
    &tables(d).by_grade[s]
}

/// Position of `list` within the canonical order of its grade.
#[inline]
pub fn rank_of(d: usize, list: IndexList) -> usize {
    tables(d).rank[list.0 as usize] as usize
}

/// All grade-s index lists in lexicographic order.
pub fn enumerate_grade(s: usize, sig: Signature) -> Result<Vec<IndexList>> {
    if s > sig.dim() {
        return Err(Error::Domain(format!("grade {s} exceeds dimension {}", sig.dim())));
    }
    Ok(grade_basis(sig.dim(), s).to_vec())
}

/// All non-decreasing lists of length `s`, in lexicographic order.
pub fn enumerate_sym_grade(s: usize, sig: Signature) -> Vec<SymIndexList> {
    fn go(start: usize, d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<SymIndexList>) {
        if left == 0 {
            out.push(SymIndexList(cur.clone()));
            return;
        }
        for i in start..d {
            cur.push(i);
            go(i, d, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, sig.dim(), s, &mut Vec::new(), &mut out);
    out
}
