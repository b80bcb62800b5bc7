//! Rank-2 tensors over `w_ij = e_i ⊗ e_j`, the ⊙ and ⊘ products, the
//! stress-energy-momentum tensor and the rank-3 moment tensor `v ⊠ S`.

use std::fmt;

use crate::error::{domain, Result};
use crate::index_algebra::{binomial, grade_basis, rank_of, sigma_f, IndexList, Signature, SymIndexList};
use crate::multivector::{dot, left_interior, right_interior, wedge, Multivector};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct Rank2Tensor {
    sig: Signature,
    comps: Vec<C64>,
}

impl Rank2Tensor {
    pub fn zeros(sig: Signature) -> Self {
        let d = sig.dim();
        Rank2Tensor { sig, comps: vec![ZERO; d * d] }
    }

    pub fn from_fn(sig: Signature, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let d = sig.dim();
        let mut t = Self::zeros(sig);
        for i in 0..d {
            for j in 0..d {
                t.comps[i * d + j] = f(i, j);
            }
        }
        t
    }

    /// The symmetric basis element `u_J`: the sum of `w` over the distinct
    /// permutations of `J`.
    pub fn sym_basis(sig: Signature, list: &SymIndexList) -> Result<Self> {
        if list.len() != 2 {
            return domain("rank-2 symmetric basis needs a list of length 2");
        }
        let mut t = Self::zeros(sig);
        for p in list.distinct_permutations() {
            sig.check_index(p[0])?;
            sig.check_index(p[1])?;
            t.add_at(p[0], p[1], C64::new(1.0, 0.0));
        }
        Ok(t)
    }

    pub fn sig(&self) -> Signature {
        self.sig
    }

    pub fn dim(&self) -> usize {
        self.sig.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.comps[i * self.dim() + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        let d = self.dim();
        self.comps[i * d + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: C64) {
        let d = self.dim();
        self.comps[i * d + j] += v;
    }

    pub fn comps(&self) -> &[C64] {
        &self.comps
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.sig, |i, j| self.get(j, i))
    }

    pub fn scale(&self, c: f64) -> Self {
        Rank2Tensor { sig: self.sig, comps: self.comps.iter().map(|x| x * c).collect() }
    }

    pub fn add(&self, other: &Rank2Tensor) -> Self {
        assert_eq!(self.sig, other.sig, "tensor signature mismatch");
        Rank2Tensor { sig: self.sig, comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest `|T_ij − T_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                worst = worst.max((self.get(i, j) - self.get(j, i)).norm());
            }
        }
        worst
    }

    pub fn max_diff(&self, other: &Rank2Tensor) -> f64 {
        self.comps.iter().zip(&other.comps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl fmt::Debug for Rank2Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.dim();
        writeln!(f, "Rank2Tensor{} [", self.sig)?;
        for i in 0..d {
            let row: Vec<String> = (0..d).map(|j| format!("{}", self.get(i, j))).collect();
            writeln!(f, "  {}", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Components over `w_{i,I} = e_i ⊗ e_I` with `I` a sorted pair.
#[derive(Clone, PartialEq)]
pub struct Rank3MomentTensor {
    sig: Signature,
    comps: Vec<C64>,
}

impl Rank3MomentTensor {
    pub fn zeros(sig: Signature) -> Self {
        let d = sig.dim();
        Rank3MomentTensor { sig, comps: vec![ZERO; d * binomial(d, 2)] }
    }

    pub fn sig(&self) -> Signature {
        self.sig
    }

    fn width(&self) -> usize {
        binomial(self.sig.dim(), 2)
    }

    /// Component on `w_{m,I}`; zero unless `I` is a pair.
    pub fn get(&self, m: usize, pair: IndexList) -> C64 {
        if pair.len() != 2 {
            return ZERO;
        }
        self.comps[m * self.width() + rank_of(self.sig.dim(), pair)]
    }

    pub fn add_at(&mut self, m: usize, pair: IndexList, v: C64) {
        let w = self.width();
        self.comps[m * w + rank_of(self.sig.dim(), pair)] += v;
    }

    pub fn comps(&self) -> &[C64] {
        &self.comps
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &Rank3MomentTensor) -> f64 {
        self.comps.iter().zip(&other.comps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl fmt::Debug for Rank3MomentTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rank3MomentTensor{} {{", self.sig)?;
        let d = self.sig.dim();
        for m in 0..d {
            for &p in grade_basis(d, 2) {
                let c = self.get(m, p);
                if c != ZERO {
                    write!(f, " w[{m},{p}]: {c}")?;
                }
            }
        }
        write!(f, " }}")
    }
}

fn check_pair(a: &Multivector, b: &Multivector) -> Result<()> {
    if a.sig() != b.sig() {
        return domain("tensor product of multivectors with different signatures");
    }
    if a.grade() != b.grade() || a.grade() == 0 {
        return domain(format!("tensor product needs equal grades >= 1, got {} and {}", a.grade(), b.grade()));
    }
    Ok(())
}

fn scaled_basis(sig: Signature, i: usize) -> Multivector {
    let mut e = Multivector::zeros(sig, 1);
    e.set(IndexList::single(i), C64::new(sig.delta(i), 0.0));
    e
}

/// `(a ⊙ b)_ij = (Δ_ii e_i ⌋ a) · (b ⌊ Δ_jj e_j)`.
pub fn odot(a: &Multivector, b: &Multivector) -> Result<Rank2Tensor> {
    check_pair(a, b)?;
    let sig = a.sig();
    let d = sig.dim();
    let mut left = Vec::with_capacity(d);
    let mut right = Vec::with_capacity(d);
    for i in 0..d {
        let e = scaled_basis(sig, i);
        left.push(left_interior(&e, a)?);
        right.push(right_interior(b, &e)?);
    }
    Ok(Rank2Tensor::from_fn(sig, |i, j| dot(&left[i], &right[j])))
}

/// `(a ⊘ b)_ij = (Δ_ii e_i ∧ a) · (b ∧ Δ_jj e_j)`.
pub fn owedge(a: &Multivector, b: &Multivector) -> Result<Rank2Tensor> {
    check_pair(a, b)?;
    let sig = a.sig();
    let d = sig.dim();
    if a.grade() == d {
        return Ok(Rank2Tensor::zeros(sig));
    }
    let mut left = Vec::with_capacity(d);
    let mut right = Vec::with_capacity(d);
    for i in 0..d {
        let e = scaled_basis(sig, i);
        left.push(wedge(&e, a)?);
        right.push(wedge(b, &e)?);
    }
    Ok(Rank2Tensor::from_fn(sig, |i, j| dot(&left[i], &right[j])))
}

/// `T = −½ (F ⊙ F + F ⊘ F)`.
pub fn stress_tensor(f: &Multivector) -> Result<Rank2Tensor> {
    let sum = odot(f, f)?.add(&owedge(f, f)?);
    Ok(sum.scale(-0.5))
}

/// The stress tensor from its explicit diagonal and off-diagonal component
/// sums, without going through the interior and exterior products.
pub fn stress_components(f: &Multivector) -> Result<Rank2Tensor> {
    let r = f.grade();
    if r == 0 {
        return domain("stress tensor needs a field of grade >= 1");
    }
    let sig = f.sig();
    let d = sig.dim();
    let mut t = Rank2Tensor::zeros(sig);
    let sign_r = if (r - 1).is_multiple_of(2) { 0.5 } else { -0.5 };
    for i in 0..d {
        let mut without = ZERO;
        let mut with = ZERO;
        for (l, c) in f.iter() {
            let term = sig.delta_of(l) * c * c;
            if l.contains(i) {
                with += term;
            } else {
                without += term;
            }
        }
        t.set(i, i, sign_r * sig.delta(i) * (without - with));
    }
    for &l in grade_basis(d, r - 1) {
        let dl = sig.delta_of(l);
        for i in 0..d {
            if l.contains(i) {
                continue;
            }
            let ei = IndexList::single(i);
            let fi = f.get(l.union(ei)) * sigma_f(l, ei);
            if fi == ZERO {
                continue;
            }
            for j in 0..d {
                if j == i || l.contains(j) {
                    continue;
                }
                let ej = IndexList::single(j);
                let fj = f.get(l.union(ej)) * sigma_f(ej, l);
                t.add_at(i, j, -dl * fi * fj);
            }
        }
    }
    Ok(t)
}

/// `v ⊠ S`: components `M[j][ε(i,l)] = Σ v_i S_jl σ(i,l)`.
pub fn boxwedge(v: &Multivector, s: &Rank2Tensor) -> Result<Rank3MomentTensor> {
    if v.grade() != 1 {
        return domain(format!("boxwedge needs a vector, got grade {}", v.grade()));
    }
    if v.sig() != s.sig() {
        return domain("boxwedge of objects with different signatures");
    }
    let scale = s.max_abs().max(1.0);
    if s.asymmetry() > 1e-12 * scale {
        return domain(format!("boxwedge needs a symmetric tensor (asymmetry {:e})", s.asymmetry()));
    }
    let sig = v.sig();
    let d = sig.dim();
    let mut m = Rank3MomentTensor::zeros(sig);
    let vc = v.coeffs();
    for (i, &vi) in vc.iter().enumerate() {
        if vi == ZERO {
            continue;
        }
        let ei = IndexList::single(i);
        for l in 0..d {
            if l == i {
                continue;
            }
            let el = IndexList::single(l);
            let pair = ei.union(el);
            let sg = sigma_f(ei, el);
            for j in 0..d {
                let c = s.get(j, l);
                if c != ZERO {
                    m.add_at(j, pair, sg * vi * c);
                }
            }
        }
    }
    Ok(m)
}

/// `e_m × M`: the bivector `Σ_I Δ_mm M[m][I] e_I`.
pub fn contract_first(m: usize, t: &Rank3MomentTensor) -> Result<Multivector> {
    let sig = t.sig();
    sig.check_index(m)?;
    let mut out = Multivector::zeros(sig, 2);
    let dm = sig.delta(m);
    for &p in grade_basis(sig.dim(), 2) {
        out.set(p, dm * t.get(m, p));
    }
    Ok(out)
}
