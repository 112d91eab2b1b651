//! Finite Grassmann algebras with monomials stored as generator bitmasks.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_GENERATORS: usize = 64;

/// Sign of θ_a · θ_b relative to the canonical monomial θ_{a∪b}; `None` if they share a generator.
#[inline]
pub fn merge_sign(a: u64, b: u64) -> Option<bool> {
    if a & b != 0 {
        return None;
    }
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        rest &= rest - 1;
        let above = if j >= 63 { 0 } else { a >> (j + 1) };
        swaps += above.count_ones();
    }
    Some(swaps % 2 == 1)
}

/// Parity of the permutation that sorts `seq` (entries distinct).
pub fn permutation_is_odd(seq: &[usize]) -> bool {
    let mut inversions = 0usize;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannElement<S = f64> {
    generator_count: usize,
    terms: BTreeMap<u64, S>,
}

impl<S: Scalar> GrassmannElement<S> {
    pub fn zero(generator_count: usize) -> Self {
        assert!(generator_count <= MAX_GENERATORS, "at most 64 generators");
        Self { generator_count, terms: BTreeMap::new() }
    }

    pub fn scalar(generator_count: usize, c: S) -> Self {
        let mut out = Self::zero(generator_count);
        out.add_term(0, c);
        out
    }

    pub fn one(generator_count: usize) -> Self {
        Self::scalar(generator_count, S::one())
    }

    pub fn generator(generator_count: usize, i: usize) -> Self {
        assert!(i < generator_count, "generator index out of range");
        let mut out = Self::zero(generator_count);
        out.add_term(1u64 << i, S::one());
        out
    }

    /// The monomial θ_{i₁}⋯θ_{i_k} in the given (not necessarily sorted) order.
    pub fn monomial(generator_count: usize, indices: &[usize], c: S) -> Self {
        let mut mask = 0u64;
        for &i in indices {
            assert!(i < generator_count, "generator index out of range");
            if mask & (1 << i) != 0 {
                return Self::zero(generator_count);
            }
            mask |= 1 << i;
        }
        let c = if permutation_is_odd(indices) { -c } else { c };
        let mut out = Self::zero(generator_count);
        out.add_term(mask, c);
        out
    }

    pub fn generator_count(&self) -> usize {
        self.generator_count
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, &S)> {
        self.terms.iter().map(|(k, v)| (*k, v))
    }

    pub fn coefficient(&self, mask: u64) -> S {
        self.terms.get(&mask).cloned().unwrap_or_else(S::zero)
    }

    pub fn scalar_part(&self) -> S {
        self.coefficient(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn top_mask(&self) -> u64 {
        if self.generator_count == 64 {
            u64::MAX
        } else {
            (1u64 << self.generator_count) - 1
        }
    }

    pub fn add_term(&mut self, mask: u64, c: S) {
        debug_assert!(mask & !self.top_mask() == 0);
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&mask) {
            Some(v) => {
                let s = v.clone() + c;
                if s.is_zero() {
                    self.terms.remove(&mask);
                } else {
                    *v = s;
                }
            }
            None => {
                self.terms.insert(mask, c);
            }
        }
    }

    /// Common parity of all monomials (0 even, 1 odd), `None` if mixed. Zero is even.
    pub fn parity(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(|m| m.count_ones() % 2);
        let first = match it.next() {
            Some(p) => p,
            None => return Some(0),
        };
        if it.all(|p| p == first) {
            Some(first)
        } else {
            None
        }
    }

    pub fn is_even(&self) -> bool {
        self.parity() == Some(0)
    }

    pub fn is_odd(&self) -> bool {
        !self.terms.is_empty() && self.parity() == Some(1)
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = Self::zero(self.generator_count);
        for (m, v) in &self.terms {
            out.add_term(*m, v.clone() * c.clone());
        }
        out
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (m, v) in &other.terms {
            out.add_term(*m, v.clone());
        }
        Ok(out)
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = Self::zero(self.generator_count);
        for (ma, va) in &self.terms {
            for (mb, vb) in &other.terms {
                if let Some(odd) = merge_sign(*ma, *mb) {
                    let c = va.clone() * vb.clone();
                    out.add_term(ma | mb, if odd { -c } else { c });
                }
            }
        }
        Ok(out)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.generator_count != other.generator_count {
            return Err(Error::DimensionMismatch {
                left: self.generator_count,
                right: other.generator_count,
            });
        }
        Ok(())
    }

    /// exp of an even element; the nilpotent series terminates after ⌊n/2⌋ terms.
    pub fn exp_even(&self) -> Result<Self> {
        if !self.is_even() {
            return Err(Error::Parity("exp_even needs an even element"));
        }
        let b = self.scalar_part();
        let mut nil = self.clone();
        nil.terms.remove(&0);
        let mut sum = Self::one(self.generator_count);
        let mut power = Self::one(self.generator_count);
        for k in 1..=(self.generator_count / 2) as u64 {
            power = power.multiply(&nil)?.scale(&S::one().div_u64(k));
            if power.is_zero() {
                break;
            }
            sum = sum.try_add(&power)?;
        }
        Ok(sum.scale(&b.exp()?))
    }

    /// Top coefficient read in the order `ordering` (θ_{o₁}⋯θ_{o_n} integrates to 1).
    pub fn berezin(&self, ordering: &[usize]) -> Result<S> {
        let mut seen = 0u64;
        for &i in ordering {
            if i >= self.generator_count || seen & (1 << i) != 0 {
                return Err(Error::IncompleteOrdering { expected: self.generator_count });
            }
            seen |= 1 << i;
        }
        if ordering.len() != self.generator_count {
            return Err(Error::IncompleteOrdering { expected: self.generator_count });
        }
        let c = self.coefficient(self.top_mask());
        Ok(if permutation_is_odd(ordering) { -c } else { c })
    }

    /// Integrate out the generators `gens` only: each monomial θ_g θ_rest (θ_g in the given order,
    /// written on the left) maps to θ_rest. Generator count is unchanged.
    pub fn berezin_partial(&self, gens: &[usize]) -> Result<Self> {
        let mut g = 0u64;
        for &i in gens {
            if i >= self.generator_count || g & (1 << i) != 0 {
                return Err(Error::Invalid("berezin_partial: repeated or out-of-range generator".into()));
            }
            g |= 1 << i;
        }
        let flip = permutation_is_odd(gens);
        let mut out = Self::zero(self.generator_count);
        for (m, v) in &self.terms {
            if m & g != g {
                continue;
            }
            let rest = m & !g;
            let odd = merge_sign(g, rest).expect("disjoint") ^ flip;
            out.add_term(rest, if odd { -v.clone() } else { v.clone() });
        }
        Ok(out)
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T) -> GrassmannElement<T> {
        let mut out = GrassmannElement::<T>::zero(self.generator_count);
        for (m, v) in &self.terms {
            out.add_term(*m, f(v));
        }
        out
    }
}

impl GrassmannElement<f64> {
    /// Largest coefficient difference against `other` (missing monomials count as 0).
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for (m, v) in &self.terms {
            worst = worst.max((v - other.coefficient(*m)).abs());
        }
        for (m, v) in &other.terms {
            if !self.terms.contains_key(m) {
                worst = worst.max(v.abs());
            }
        }
        worst
    }
}

impl<S: Scalar> Add for &GrassmannElement<S> {
    type Output = GrassmannElement<S>;
    fn add(self, rhs: Self) -> GrassmannElement<S> {
        self.try_add(rhs).expect("generator count mismatch")
    }
}

impl<S: Scalar> Sub for &GrassmannElement<S> {
    type Output = GrassmannElement<S>;
    fn sub(self, rhs: Self) -> GrassmannElement<S> {
        self.try_add(&-rhs).expect("generator count mismatch")
    }
}

impl<S: Scalar> Neg for &GrassmannElement<S> {
    type Output = GrassmannElement<S>;
    fn neg(self) -> GrassmannElement<S> {
        self.scale(&-S::one())
    }
}

impl<S: Scalar> Mul for &GrassmannElement<S> {
    type Output = GrassmannElement<S>;
    fn mul(self, rhs: Self) -> GrassmannElement<S> {
        self.multiply(rhs).expect("generator count mismatch")
    }
}

/// Coefficient array indexed by monomial mask, for hot loops over few generators.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrassmann {
    generator_count: usize,
    coeffs: Vec<f64>,
}

pub const DENSE_MAX_GENERATORS: usize = 16;

impl DenseGrassmann {
    pub fn zero(generator_count: usize) -> Self {
        assert!(generator_count <= DENSE_MAX_GENERATORS, "dense storage holds at most 16 generators");
        Self { generator_count, coeffs: vec![0.0; 1 << generator_count] }
    }

    pub fn scalar(generator_count: usize, c: f64) -> Self {
        let mut out = Self::zero(generator_count);
        out.coeffs[0] = c;
        out
    }

    pub fn from_sparse(e: &GrassmannElement<f64>) -> Self {
        let mut out = Self::zero(e.generator_count);
        for (m, v) in &e.terms {
            out.coeffs[*m as usize] = *v;
        }
        out
    }

    pub fn to_sparse(&self) -> GrassmannElement<f64> {
        let mut out = GrassmannElement::zero(self.generator_count);
        for (m, v) in self.coeffs.iter().enumerate() {
            out.add_term(m as u64, *v);
        }
        out
    }

    pub fn generator_count(&self) -> usize {
        self.generator_count
    }

    pub fn coefficient(&self, mask: u64) -> f64 {
        self.coeffs[mask as usize]
    }

    /// Adds c·θ_{i₁}⋯θ_{i_k}, indices in the given order.
    pub fn add_monomial(&mut self, indices: &[usize], c: f64) {
        let mut mask = 0usize;
        for &i in indices {
            if mask & (1 << i) != 0 {
                return;
            }
            mask |= 1 << i;
        }
        self.coeffs[mask] += if permutation_is_odd(indices) { -c } else { c };
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.coeffs {
            *v *= c;
        }
    }

    fn support(&self) -> Vec<usize> {
        (0..self.coeffs.len()).filter(|m| self.coeffs[*m] != 0.0).collect()
    }

    pub fn multiply(&self, other: &Self) -> Self {
        assert_eq!(self.generator_count, other.generator_count, "generator count mismatch");
        let mut out = Self::zero(self.generator_count);
        let sb = other.support();
        for ma in self.support() {
            let va = self.coeffs[ma];
            for &mb in &sb {
                if let Some(odd) = merge_sign(ma as u64, mb as u64) {
                    let c = va * other.coeffs[mb];
                    out.coeffs[ma | mb] += if odd { -c } else { c };
                }
            }
        }
        out
    }

    pub fn exp_even(&self) -> Result<Self> {
        if self.coeffs.iter().enumerate().any(|(m, v)| *v != 0.0 && m.count_ones() % 2 == 1) {
            return Err(Error::Parity("exp_even needs an even element"));
        }
        let b = self.coeffs[0];
        let mut nil = self.clone();
        nil.coeffs[0] = 0.0;
        let mut sum = Self::scalar(self.generator_count, 1.0);
        let mut power = sum.clone();
        for k in 1..=self.generator_count / 2 {
            power = power.multiply(&nil);
            power.scale(1.0 / k as f64);
            if power.coeffs.iter().all(|v| *v == 0.0) {
                break;
            }
            for (s, p) in sum.coeffs.iter_mut().zip(&power.coeffs) {
                *s += p;
            }
        }
        sum.scale(num_traits::Float::exp(b));
        Ok(sum)
    }

    /// Same convention as [`GrassmannElement::berezin`].
    pub fn berezin(&self, ordering: &[usize]) -> Result<f64> {
        let mut seen = 0u64;
        for &i in ordering {
            if i >= self.generator_count || seen & (1 << i) != 0 {
                return Err(Error::IncompleteOrdering { expected: self.generator_count });
            }
            seen |= 1 << i;
        }
        if ordering.len() != self.generator_count {
            return Err(Error::IncompleteOrdering { expected: self.generator_count });
        }
        let c = *self.coeffs.last().expect("nonempty");
        Ok(if permutation_is_odd(ordering) { -c } else { c })
    }
}

/// The even element Q = Σ_{i<j} q_ij θ_iθ_j.
pub fn quadratic_form<S: Scalar>(dim: usize, entry: impl Fn(usize, usize) -> S) -> GrassmannElement<S> {
    let mut q = GrassmannElement::zero(dim);
    for i in 0..dim {
        for j in i + 1..dim {
            q.add_term((1 << i) | (1 << j), entry(i, j));
        }
    }
    q
}

/// ∫ exp(−Q) over the canonical ordering. Normalized so block-diag(λ₁J, …, λ_nJ) with
/// J = [[0,−1],[1,0]] gives λ₁⋯λ_n; in general this is (−1)^n times the standard Pfaffian.
pub fn fermionic_gaussian_with<S: Scalar>(dim: usize, entry: impl Fn(usize, usize) -> S) -> Result<S> {
    if dim % 2 == 1 {
        return Err(Error::OddDimension(dim));
    }
    let q = quadratic_form(dim, entry);
    let order: Vec<usize> = (0..dim).collect();
    (-&q).exp_even()?.berezin(&order)
}

pub const SKEW_TOL: f64 = 1e-12;

fn check_skew(q: &DMatrix<f64>) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::DimensionMismatch { left: q.nrows(), right: q.ncols() });
    }
    let residual = (q + q.transpose()).amax();
    let scale = q.amax().max(1.0);
    if residual > SKEW_TOL * scale {
        return Err(Error::NotSkew { residual });
    }
    Ok(())
}

pub fn fermionic_gaussian(q: &DMatrix<f64>) -> Result<f64> {
    check_skew(q)?;
    fermionic_gaussian_with(q.nrows(), |i, j| q[(i, j)])
}

pub fn fermionic_gaussian_rational(q: &[Vec<BigRational>]) -> Result<BigRational> {
    let n = q.len();
    for (i, row) in q.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch { left: n, right: row.len() });
        }
        for j in 0..n {
            if row[j] != -q[j][i].clone() {
                return Err(Error::NotSkew { residual: f64::NAN });
            }
        }
    }
    fermionic_gaussian_with(n, |i, j| q[i][j].clone())
}

/// Standard Pfaffian by expansion along the first row.
pub fn pfaffian_combinatorial(q: &DMatrix<f64>) -> Result<f64> {
    check_skew(q)?;
    let n = q.nrows();
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    let idx: Vec<usize> = (0..n).collect();
    Ok(pf_rec(q, &idx))
}

fn pf_rec(q: &DMatrix<f64>, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let first = idx[0];
    let mut total = 0.0;
    let mut rest = vec![0usize; idx.len() - 2];
    for k in 1..idx.len() {
        let a = q[(first, idx[k])];
        if a == 0.0 {
            continue;
        }
        let mut w = 0;
        for (t, &i) in idx.iter().enumerate().skip(1) {
            if t != k {
                rest[w] = i;
                w += 1;
            }
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * a * pf_rec(q, &rest);
    }
    total
}
