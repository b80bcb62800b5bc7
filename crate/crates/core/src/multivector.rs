//! Grade-s multivectors with complex coefficients.
//!
//! Blade conventions:
//! - `e_I ∧ e_J = σ(I,J) e_{ε(I,J)}`
//! - `e_J ⌋ e_I = Δ_JJ σ(I∖J, J) e_{I∖J}` when `J ⊆ I`, else 0
//! - `w ⌊ v = (−1)^{q(s+q)} v ⌋ w` with `q = gr v`, `s = gr w`
//! - `a · b = Σ_I Δ_II a_I b_I`, no conjugation

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{domain, Result};
use crate::index_algebra::{binomial, grade_basis, rank_of, sigma_f, IndexList, Signature};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct Multivector {
    sig: Signature,
    grade: usize,
    coeffs: Vec<C64>,
}

impl Multivector {
    /// # Panics
    /// If `grade` exceeds the dimension.
    pub fn zeros(sig: Signature, grade: usize) -> Self {
        assert!(grade <= sig.dim(), "grade {grade} exceeds dimension {}", sig.dim());
        Multivector { sig, grade, coeffs: vec![ZERO; binomial(sig.dim(), grade)] }
    }

    pub fn new(sig: Signature, grade: usize, coeffs: Vec<C64>) -> Result<Self> {
        if grade > sig.dim() {
            return domain(format!("grade {grade} exceeds dimension {}", sig.dim()));
        }
        let want = binomial(sig.dim(), grade);
        if coeffs.len() != want {
            return domain(format!(
                "grade-{grade} multivector in d = {} needs {want} coefficients, got {}",
                sig.dim(),
                coeffs.len()
            ));
        }
        Ok(Multivector { sig, grade, coeffs })
    }

    pub fn from_real(sig: Signature, grade: usize, coeffs: &[f64]) -> Result<Self> {
        Self::new(sig, grade, coeffs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Unit blade `e_I`.
    pub fn blade(sig: Signature, list: IndexList) -> Result<Self> {
        sig.check_list(list)?;
        let mut m = Self::zeros(sig, list.len());
        m.coeffs[rank_of(sig.dim(), list)] = C64::new(1.0, 0.0);
        Ok(m)
    }

    /// Basis vector `e_i`.
    pub fn basis_vector(sig: Signature, i: usize) -> Result<Self> {
        sig.check_index(i)?;
        Self::blade(sig, IndexList::single(i))
    }

    /// Grade-1 multivector with real components `v_i`.
    pub fn vector(sig: Signature, v: &[f64]) -> Result<Self> {
        Self::from_real(sig, 1, v)
    }

    pub fn scalar(sig: Signature, c: C64) -> Self {
        Multivector { sig, grade: 0, coeffs: vec![c] }
    }

    pub fn sig(&self) -> Signature {
        self.sig
    }

    pub fn grade(&self) -> usize {
        self.grade
    }

    pub fn dim(&self) -> usize {
        self.sig.dim()
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn basis(&self) -> &'static [IndexList] {
        grade_basis(self.sig.dim(), self.grade)
    }

    /// Coefficient on `e_I`; zero if `I` has a different grade.
    pub fn get(&self, list: IndexList) -> C64 {
        if list.len() != self.grade || list.last().is_some_and(|i| i >= self.dim()) {
            return ZERO;
        }
        self.coeffs[rank_of(self.dim(), list)]
    }

    /// # Panics
    /// If `list` has the wrong grade or is out of range.
    pub fn set(&mut self, list: IndexList, value: C64) {
        assert_eq!(list.len(), self.grade, "grade mismatch in set");
        let d = self.dim();
        self.coeffs[rank_of(d, list)] = value;
    }

    pub fn add_at(&mut self, list: IndexList, value: C64) {
        let d = self.dim();
        self.coeffs[rank_of(d, list)] += value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (IndexList, C64)> + '_ {
        self.basis().iter().copied().zip(self.coeffs.iter().copied())
    }

    pub fn conj(&self) -> Self {
        Multivector { sig: self.sig, grade: self.grade, coeffs: self.coeffs.iter().map(|c| c.conj()).collect() }
    }

    pub fn scale(&self, c: C64) -> Self {
        Multivector { sig: self.sig, grade: self.grade, coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    /// Real part of every coefficient, as a multivector.
    pub fn re(&self) -> Self {
        Multivector {
            sig: self.sig,
            grade: self.grade,
            coeffs: self.coeffs.iter().map(|c| C64::new(c.re, 0.0)).collect(),
        }
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: C64, other: &Multivector) {
        assert!(self.sig == other.sig && self.grade == other.grade, "axpy shape mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
    }

    /// Scalar value of a grade-0 multivector.
    pub fn scalar_part(&self) -> C64 {
        if self.grade == 0 {
            self.coeffs[0]
        } else {
            ZERO
        }
    }
}

impl fmt::Debug for Multivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Multivector{}[grade {}]{{", self.sig, self.grade)?;
        let mut first = true;
        for (l, c) in self.iter() {
            if c != ZERO {
                if !first {
                    write!(f, ", ")?;
                }
                write!(f, "{l}: {c}")?;
                first = false;
            }
        }
        write!(f, "}}")
    }
}

fn same_shape(a: &Multivector, b: &Multivector) {
    assert!(
        a.sig == b.sig && a.grade == b.grade,
        "multivector shape mismatch: {}/{} vs {}/{}",
        a.sig,
        a.grade,
        b.sig,
        b.grade
    );
}

impl Add for &Multivector {
    type Output = Multivector;
    fn add(self, rhs: &Multivector) -> Multivector {
        same_shape(self, rhs);
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &Multivector {
    type Output = Multivector;
    fn sub(self, rhs: &Multivector) -> Multivector {
        same_shape(self, rhs);
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&Multivector> for Multivector {
    fn add_assign(&mut self, rhs: &Multivector) {
        same_shape(self, rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&Multivector> for Multivector {
    fn sub_assign(&mut self, rhs: &Multivector) {
        same_shape(self, rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

impl Neg for &Multivector {
    type Output = Multivector;
    fn neg(self) -> Multivector {
        self.scale_re(-1.0)
    }
}

impl Mul<C64> for &Multivector {
    type Output = Multivector;
    fn mul(self, c: C64) -> Multivector {
        self.scale(c)
    }
}

impl Mul<f64> for &Multivector {
    type Output = Multivector;
    fn mul(self, c: f64) -> Multivector {
        self.scale_re(c)
    }
}

fn check_sig(a: &Multivector, b: &Multivector) -> Result<()> {
    if a.sig != b.sig {
        return domain(format!("signature mismatch {} vs {}", a.sig, b.sig));
    }
    Ok(())
}

/// Exterior product.
pub fn wedge(a: &Multivector, b: &Multivector) -> Result<Multivector> {
    check_sig(a, b)?;
    let d = a.dim();
    if a.grade + b.grade > d {
        return domain(format!("wedge of grades {} and {} exceeds d = {d}", a.grade, b.grade));
    }
    let mut out = Multivector::zeros(a.sig, a.grade + b.grade);
    for (li, ca) in a.iter() {
        if ca == ZERO {
            continue;
        }
        for (lj, cb) in b.iter() {
            if !li.is_disjoint(lj) || cb == ZERO {
                continue;
            }
            out.coeffs[rank_of(d, li.union(lj))] += sigma_f(li, lj) * ca * cb;
        }
    }
    Ok(out)
}

/// Metric dot product `Σ Δ_II a_I b_I`; zero across grades.
///
/// # Panics
/// On signature mismatch.
pub fn dot(a: &Multivector, b: &Multivector) -> C64 {
    assert_eq!(a.sig, b.sig, "dot of multivectors with different signatures");
    if a.grade != b.grade {
        return ZERO;
    }
    let sig = a.sig;
    a.iter().zip(&b.coeffs).map(|((l, x), y)| sig.delta_of(l) * x * y).sum()
}

/// Left interior product `a ⌋ b`, of grade `gr b − gr a`.
pub fn left_interior(a: &Multivector, b: &Multivector) -> Result<Multivector> {
    check_sig(a, b)?;
    if a.grade > b.grade {
        return domain(format!("left interior of grade {} into grade {}", a.grade, b.grade));
    }
    let sig = a.sig;
    let d = sig.dim();
    let mut out = Multivector::zeros(sig, b.grade - a.grade);
    for (lj, ca) in a.iter() {
        if ca == ZERO {
            continue;
        }
        let dj = sig.delta_of(lj);
        for (li, cb) in b.iter() {
            if cb == ZERO || !lj.is_subset_of(li) {
                continue;
            }
            let rest = li.without(lj);
            out.coeffs[rank_of(d, rest)] += dj * sigma_f(rest, lj) * ca * cb;
        }
    }
    Ok(out)
}

/// Right interior product `a ⌊ b`, of grade `gr a − gr b`.
pub fn right_interior(a: &Multivector, b: &Multivector) -> Result<Multivector> {
    check_sig(a, b)?;
    if b.grade > a.grade {
        return domain(format!("right interior of grade {} from grade {}", b.grade, a.grade));
    }
    let q = b.grade;
    let s = a.grade;
    let out = left_interior(b, a)?;
    if (q * (s + q)) % 2 == 1 {
        Ok(-&out)
    } else {
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s13() -> Signature {
        Signature::new(1, 3).unwrap()
    }

    fn e(i: usize) -> Multivector {
        Multivector::basis_vector(s13(), i).unwrap()
    }

    fn b(v: &[usize]) -> Multivector {
        Multivector::blade(s13(), IndexList::new(v).unwrap()).unwrap()
    }

    #[test]
    fn wedge_examples() {
        assert_eq!(wedge(&e(0), &e(1)).unwrap(), b(&[0, 1]));
        assert_eq!(wedge(&e(1), &e(0)).unwrap(), -&b(&[0, 1]));
        assert!(wedge(&e(0), &b(&[0, 1])).unwrap().is_zero());
        assert!(wedge(&b(&[0, 1, 2]), &b(&[1, 3])).is_err());
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&b(&[0, 1]), &b(&[0, 1])), C64::new(-1.0, 0.0));
        assert_eq!(dot(&b(&[0, 1]), &b(&[1, 2])), ZERO);
        assert_eq!(dot(&(&e(1) * 2.0), &(&e(1) * 3.0)), C64::new(6.0, 0.0));
        assert_eq!(dot(&e(1), &b(&[1, 2])), ZERO);
    }

    #[test]
    fn left_interior_examples() {
        // Δ_00 σ((1),(0)) = (−1)(−1)
        assert_eq!(left_interior(&e(0), &b(&[0, 1])).unwrap(), e(1));
        assert!(left_interior(&e(2), &b(&[0, 1])).unwrap().is_zero());
        let s = left_interior(&b(&[0, 1]), &b(&[0, 1])).unwrap();
        assert_eq!(s.grade(), 0);
        assert_eq!(s.scalar_part(), C64::new(-1.0, 0.0));
        assert!(left_interior(&b(&[0, 1]), &e(0)).is_err());
    }

    #[test]
    fn right_interior_examples() {
        assert_eq!(right_interior(&b(&[0, 1]), &e(0)).unwrap(), -&e(1));
        assert!(right_interior(&b(&[0, 1]), &e(2)).unwrap().is_zero());
        let x = b(&[1, 3]);
        assert_eq!(right_interior(&x, &x).unwrap().scalar_part(), dot(&x, &x));
        assert!(right_interior(&e(0), &b(&[0, 1])).is_err());
    }

    #[test]
    fn vector_right_interior_rule() {
        // e_I ⌊ e_j = Δ_jj σ(j, I∖j) e_{I∖j}
        let x = right_interior(&b(&[0, 2, 3]), &e(2)).unwrap();
        assert_eq!(x, -&b(&[0, 3]));
        let y = right_interior(&b(&[0, 2, 3]), &e(0)).unwrap();
        assert_eq!(y, -&b(&[2, 3]));
    }

    #[test]
    fn constructor_validation() {
        assert!(Multivector::new(s13(), 2, vec![ZERO; 5]).is_err());
        assert!(Multivector::new(s13(), 5, vec![]).is_err());
        assert!(Multivector::basis_vector(s13(), 4).is_err());
    }
}
