//! Polynomial functions on maps ℝ^{0|δ} → ℝᵐ (δ = 1, 2), the operators d_i, Δ, 𝓛_v, ι_ψ, I_w,
//! and concordance as Δ-exactness.
//!
//! Generators are x^j, the odd d_i x^j and, for δ = 2, the even d₂d₁x^j. In text they are written
//! `x1`, `D1x1`, `D2x1`, `D21x1` (variables counted from 1).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::grassmann::merge_sign;

/// x-exponents, d₂d₁x-exponents and the odd generators as a bitmask; bit (i−1)·m + j is d_i x^j.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub x: Vec<u32>,
    pub dd: Vec<u32>,
    pub odd: u64,
}

impl Monomial {
    pub fn one(m: usize) -> Self {
        Self { x: vec![0; m], dd: vec![0; m], odd: 0 }
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }

    /// Polynomial degree Σ|I|.
    pub fn degree(&self) -> u32 {
        2 * self.dd.iter().sum::<u32>() + self.odd.count_ones()
    }

    pub fn parity(&self) -> u32 {
        self.odd.count_ones() % 2
    }

    /// How often each base variable occurs, over all factors.
    pub fn variables(&self) -> Vec<u32> {
        let m = self.m();
        (0..m)
            .map(|j| {
                let odd = (0..2).filter(|d| self.odd & (1 << (d * m + j)) != 0).count() as u32;
                self.x[j] + self.dd[j] + odd
            })
            .collect()
    }

    fn times(&self, other: &Self) -> Option<(Self, bool)> {
        let odd = merge_sign(self.odd, other.odd)?;
        let add = |a: &[u32], b: &[u32]| a.iter().zip(b).map(|(p, q)| p + q).collect();
        Some((Self { x: add(&self.x, &other.x), dd: add(&self.dd, &other.dd), odd: self.odd | other.odd }, odd))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.odd
            .count_ones()
            .cmp(&other.odd.count_ones())
            .then_with(|| other.x.cmp(&self.x))
            .then_with(|| other.dd.cmp(&self.dd))
            .then_with(|| self.odd.cmp(&other.odd))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    X(usize),
    /// d_i x^j with direction i ∈ {1, …, δ}.
    D(usize, usize),
    /// d₂d₁x^j.
    DD(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperPolynomial {
    delta: usize,
    m: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl SuperPolynomial {
    pub fn zero(delta: usize, m: usize) -> Self {
        assert!((1..=2).contains(&delta), "δ must be 1 or 2");
        assert!(m >= 1 && delta * m <= 64, "unsupported number of variables");
        Self { delta, m, terms: BTreeMap::new() }
    }

    pub fn constant(delta: usize, m: usize, c: BigRational) -> Self {
        let mut p = Self::zero(delta, m);
        p.add_term(Monomial::one(m), c);
        p
    }

    pub fn one(delta: usize, m: usize) -> Self {
        Self::constant(delta, m, BigRational::one())
    }

    pub fn generator(delta: usize, m: usize, g: Generator) -> Result<Self> {
        let mut mono = Monomial::one(m);
        match g {
            Generator::X(j) if j < m => mono.x[j] = 1,
            Generator::D(i, j) if j < m && (1..=delta).contains(&i) => mono.odd = 1 << ((i - 1) * m + j),
            Generator::DD(j) if j < m && delta == 2 => mono.dd[j] = 1,
            _ => return Err(Error::Invalid(format!("generator {g:?} not available for δ = {delta}, m = {m}"))),
        }
        let mut p = Self::zero(delta, m);
        p.add_term(mono, BigRational::one());
        Ok(p)
    }

    pub fn x(delta: usize, m: usize, j: usize) -> Self {
        Self::generator(delta, m, Generator::X(j)).expect("variable in range")
    }

    pub fn from_terms(delta: usize, m: usize, terms: impl IntoIterator<Item = (Monomial, BigRational)>) -> Self {
        let mut p = Self::zero(delta, m);
        for (mono, c) in terms {
            p.add_term(mono, c);
        }
        p
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, mono: &Monomial) -> BigRational {
        self.terms.get(mono).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn add_term(&mut self, mono: Monomial, c: BigRational) {
        assert_eq!(mono.m(), self.m);
        if c.is_zero() {
            return;
        }
        use alloc::collections::btree_map::Entry;
        match self.terms.entry(mono) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn compatible(&self, other: &Self) {
        assert!(self.delta == other.delta && self.m == other.m, "mismatched algebras");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.compatible(other);
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-BigRational::one()))
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::zero(self.delta, self.m);
        if !c.is_zero() {
            for (k, v) in &self.terms {
                out.terms.insert(k.clone(), v * c);
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.compatible(other);
        let mut out = Self::zero(self.delta, self.m);
        for (ma, va) in &self.terms {
            for (mb, vb) in &other.terms {
                if let Some((mono, odd)) = ma.times(mb) {
                    let c = va * vb;
                    out.add_term(mono, if odd { -c } else { c });
                }
            }
        }
        out
    }

    /// Degree of every term if all agree.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(Monomial::degree);
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn is_even(&self) -> bool {
        self.terms.keys().all(|k| k.parity() == 0)
    }

    pub fn is_odd(&self) -> bool {
        self.terms.keys().all(|k| k.parity() == 1)
    }

    /// The grading involution, −id ∈ O(δ): odd monomials change sign.
    pub fn grading_involution(&self) -> Self {
        let mut out = self.clone();
        for (k, v) in out.terms.iter_mut() {
            if k.parity() == 1 {
                *v = -v.clone();
            }
        }
        out
    }

    /// Dilation r·f = r^k f on the degree-k part.
    pub fn rg_scale(&self, r: &BigRational) -> Self {
        let mut out = Self::zero(self.delta, self.m);
        for (k, v) in &self.terms {
            let mut c = v.clone();
            for _ in 0..k.degree() {
                c *= r;
            }
            out.add_term(k.clone(), c);
        }
        out
    }

    /// True when only x-variables occur.
    pub fn is_base_function(&self) -> bool {
        self.terms.keys().all(|k| k.odd == 0 && k.dd.iter().all(|e| *e == 0))
    }

    fn mono(&self, mono: Monomial) -> Self {
        let mut p = Self::zero(self.delta, self.m);
        p.add_term(mono, BigRational::one());
        p
    }
}

/// Graded derivation of the given parity, determined by its values on generators.
fn derive(p: &SuperPolynomial, parity: u32, on: &dyn Fn(Generator) -> SuperPolynomial) -> SuperPolynomial {
    let (delta, m) = (p.delta, p.m);
    let mut out = SuperPolynomial::zero(delta, m);
    for (mono, c) in &p.terms {
        for j in 0..m {
            if mono.x[j] > 0 {
                let mut rest = mono.clone();
                rest.x[j] -= 1;
                out = out.add(&on(Generator::X(j)).mul(&p.mono(rest)).scale(&(c * q(mono.x[j] as i64))));
            }
            if mono.dd[j] > 0 {
                let mut rest = mono.clone();
                rest.dd[j] -= 1;
                out = out.add(&on(Generator::DD(j)).mul(&p.mono(rest)).scale(&(c * q(mono.dd[j] as i64))));
            }
        }
        let mut bits = mono.odd;
        let mut k = 0u32;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let below = mono.odd & ((1u64 << b) - 1);
            let above = mono.odd & !((1u64 << b) | below);
            let prefix = Monomial { x: mono.x.clone(), dd: mono.dd.clone(), odd: below };
            let suffix = Monomial { x: vec![0; m], dd: vec![0; m], odd: above };
            let g = Generator::D(b / m + 1, b % m);
            let mut term = p.mono(prefix).mul(&on(g)).mul(&p.mono(suffix)).scale(c);
            if parity == 1 && k % 2 == 1 {
                term = term.scale(&-BigRational::one());
            }
            out = out.add(&term);
            k += 1;
        }
    }
    out
}

/// The odd derivation d_i (1 ≤ i ≤ δ).
pub fn apply_d(i: usize, p: &SuperPolynomial) -> Result<SuperPolynomial> {
    let (delta, m) = (p.delta, p.m);
    if !(1..=delta).contains(&i) {
        return Err(Error::Invalid(format!("direction {i} outside 1..={delta}")));
    }
    Ok(derive(p, 1, &|g| match g {
        Generator::X(j) => SuperPolynomial::generator(delta, m, Generator::D(i, j)).expect("in range"),
        Generator::D(k, j) if k != i => {
            // d_i d_k x with {i, k} = {1, 2}; canonical name d₂d₁x
            let dd = SuperPolynomial::generator(delta, m, Generator::DD(j)).expect("δ = 2");
            if i == 1 {
                dd.scale(&-BigRational::one())
            } else {
                dd
            }
        }
        _ => SuperPolynomial::zero(delta, m),
    }))
}

/// Δ = d_δ ∘ ⋯ ∘ d₁.
pub fn apply_delta(p: &SuperPolynomial) -> SuperPolynomial {
    let mut out = p.clone();
    for i in 1..=p.delta {
        out = apply_d(i, &out).expect("valid direction");
    }
    out
}

/// d_I = d_{i_k}⋯d_{i_1} for I = {i_1 < ⋯ < i_k}, given as a bitmask over directions.
fn apply_d_set(dirs: u32, p: &SuperPolynomial) -> SuperPolynomial {
    let mut out = p.clone();
    for i in 1..=p.delta {
        if dirs & (1 << (i - 1)) != 0 {
            out = apply_d(i, &out).expect("valid direction");
        }
    }
    out
}

/// A vector field Σ v^j ∂/∂x^j on ℝᵐ with polynomial coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorField {
    pub components: Vec<SuperPolynomial>,
}

impl VectorField {
    pub fn new(components: Vec<SuperPolynomial>) -> Result<Self> {
        if components.iter().any(|c| !c.is_base_function()) {
            return Err(Error::Invalid("vector field coefficients must be functions of x only".into()));
        }
        if components.len() != components.first().map(|c| c.m).unwrap_or(0) {
            return Err(Error::Invalid("need one coefficient per base variable".into()));
        }
        Ok(Self { components })
    }

    /// ∂/∂x^j.
    pub fn partial(delta: usize, m: usize, j: usize) -> Self {
        let components = (0..m)
            .map(|k| if k == j { SuperPolynomial::one(delta, m) } else { SuperPolynomial::zero(delta, m) })
            .collect();
        Self { components }
    }

    /// Σ x^j ∂/∂x^j.
    pub fn euler(delta: usize, m: usize) -> Self {
        Self { components: (0..m).map(|j| SuperPolynomial::x(delta, m, j)).collect() }
    }

    fn check(&self, p: &SuperPolynomial) -> Result<()> {
        match self.components.first() {
            Some(c) if c.delta == p.delta && c.m == p.m => Ok(()),
            _ => Err(Error::Invalid("vector field and polynomial live over different algebras".into())),
        }
    }
}

fn bit_dirs(delta: usize, g: Generator) -> Option<(u32, usize)> {
    match g {
        Generator::X(j) => Some((0, j)),
        Generator::D(i, j) => Some((1 << (i - 1), j)),
        Generator::DD(j) if delta == 2 => Some((3, j)),
        _ => None,
    }
}

/// Even derivation 𝓛_v: d_I x^j ↦ d_I(v^j).
pub fn apply_l(v: &VectorField, p: &SuperPolynomial) -> Result<SuperPolynomial> {
    v.check(p)?;
    let delta = p.delta;
    Ok(derive(p, 0, &|g| {
        let (dirs, j) = bit_dirs(delta, g).expect("generator of this algebra");
        apply_d_set(dirs, &v.components[j])
    }))
}

/// Odd derivation ι_{ψ,k}: d_I x^j ↦ (−1)^{#{i ∈ I : i > k}} d_{I∖k}(ψ^j) when k ∈ I, else 0.
pub fn apply_iota(k: usize, psi: &VectorField, p: &SuperPolynomial) -> Result<SuperPolynomial> {
    psi.check(p)?;
    let (delta, m) = (p.delta, p.m);
    if !(1..=delta).contains(&k) {
        return Err(Error::Invalid(format!("direction {k} outside 1..={delta}")));
    }
    let kb = 1u32 << (k - 1);
    Ok(derive(p, 1, &|g| {
        let (dirs, j) = bit_dirs(delta, g).expect("generator of this algebra");
        if dirs & kb == 0 {
            return SuperPolynomial::zero(delta, m);
        }
        let rest = apply_d_set(dirs & !kb, &psi.components[j]);
        if (dirs >> k).count_ones() % 2 == 1 {
            rest.scale(&-BigRational::one())
        } else {
            rest
        }
    }))
}

/// I_w: d_δ⋯d₁x^j ↦ w^j, every other generator ↦ 0; parity δ mod 2.
pub fn apply_iw(w: &VectorField, p: &SuperPolynomial) -> Result<SuperPolynomial> {
    w.check(p)?;
    let (delta, m) = (p.delta, p.m);
    let full = (1u32 << delta) - 1;
    Ok(derive(p, (delta % 2) as u32, &|g| {
        let (dirs, j) = bit_dirs(delta, g).expect("generator of this algebra");
        if dirs == full {
            w.components[j].clone()
        } else {
            SuperPolynomial::zero(delta, m)
        }
    }))
}

/// [d_k, [d_{k−1}, …, [d₁, I_w]…]] applied to p.
pub fn nested_commutator(k: usize, w: &VectorField, p: &SuperPolynomial) -> Result<SuperPolynomial> {
    if k == 0 {
        return apply_iw(w, p);
    }
    let inner_parity = (p.delta + k - 1) % 2;
    let a = apply_d(k, &nested_commutator(k - 1, w, p)?)?;
    let b = nested_commutator(k - 1, w, &apply_d(k, p)?)?;
    Ok(if inner_parity == 1 { a.add(&b) } else { a.sub(&b) })
}

/// Monomials with polynomial degree ≤ cap and every exponent ≤ cap.
pub fn monomial_basis(delta: usize, m: usize, cap: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let odd_bits = delta * m;
    let mut xs = vec![0u32; m];
    loop {
        let mut dds = vec![0u32; m];
        loop {
            let dd_deg = 2 * dds.iter().sum::<u32>();
            if dd_deg <= cap {
                for odd in 0u64..(1 << odd_bits) {
                    if dd_deg + odd.count_ones() <= cap {
                        out.push(Monomial { x: xs.clone(), dd: dds.clone(), odd });
                    }
                }
            }
            if delta == 1 || !bump(&mut dds, cap / 2) {
                break;
            }
        }
        if !bump(&mut xs, cap) {
            break;
        }
    }
    out.sort();
    out
}

fn bump(v: &mut [u32], max: u32) -> bool {
    for e in v.iter_mut() {
        if *e < max {
            *e += 1;
            return true;
        }
        *e = 0;
    }
    false
}

#[derive(Clone, Debug)]
pub struct CartanReport {
    pub checked: usize,
    /// (monomial, left side, 𝓛_w of it) for the first mismatch.
    pub counterexample: Option<(Monomial, SuperPolynomial, SuperPolynomial)>,
}

impl CartanReport {
    pub fn holds(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// [d_δ, …, [d₁, I_w]…] = 𝓛_w on every basis monomial of degree ≤ cap.
pub fn check_cartan(delta: usize, w: &VectorField, cap: u32) -> Result<CartanReport> {
    let m = w.components.len();
    let mut checked = 0;
    for mono in monomial_basis(delta, m, cap) {
        let p = SuperPolynomial::from_terms(delta, m, [(mono.clone(), BigRational::one())]);
        let lhs = nested_commutator(delta, w, &p)?;
        let rhs = apply_l(w, &p)?;
        checked += 1;
        if lhs != rhs {
            return Ok(CartanReport { checked, counterexample: Some((mono, lhs, rhs)) });
        }
    }
    Ok(CartanReport { checked, counterexample: None })
}

/// Monomials of the given degree whose variable multiset is `vars`.
pub fn block_basis(delta: usize, vars: &[u32], degree: u32) -> Vec<Monomial> {
    let m = vars.len();
    let mut out = Vec::new();
    let mut cur = Monomial::one(m);
    fill_block(delta, vars, degree, 0, &mut cur, &mut out);
    out.sort();
    out
}

fn fill_block(delta: usize, vars: &[u32], degree: u32, j: usize, cur: &mut Monomial, out: &mut Vec<Monomial>) {
    let m = vars.len();
    if j == m {
        if cur.degree() == degree {
            out.push(cur.clone());
        }
        return;
    }
    let masks: &[u32] = if delta == 2 { &[0, 1, 2, 3] } else { &[0, 1] };
    for &dirs in masks {
        let n_odd = dirs.count_ones();
        if n_odd > vars[j] {
            continue;
        }
        let free = vars[j] - n_odd;
        let dd_max = if delta == 2 { free } else { 0 };
        for dd in 0..=dd_max {
            cur.x[j] = free - dd;
            cur.dd[j] = dd;
            let saved = cur.odd;
            for i in 0..delta {
                if dirs & (1 << i) != 0 {
                    cur.odd |= 1 << (i * m + j);
                }
            }
            if cur.degree() <= degree {
                fill_block(delta, vars, degree, j + 1, cur, out);
            }
            cur.odd = saved;
        }
    }
    cur.x[j] = 0;
    cur.dd[j] = 0;
}

/// A linear functional vanishing on Δ of every monomial in one (degree, variables) block
/// but not on the target: proof the target is not Δ-exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub degree: u32,
    pub variables: Vec<u32>,
    pub functional: Vec<(Monomial, BigRational)>,
    pub pairing: BigRational,
}

impl Certificate {
    pub fn pair(&self, p: &SuperPolynomial) -> BigRational {
        self.functional.iter().map(|(k, v)| v * p.coefficient(k)).fold(BigRational::zero(), |a, b| a + b)
    }

    /// Re-checks the certificate against the operator.
    pub fn verify(&self, delta: usize, target: &SuperPolynomial) -> bool {
        if self.pairing.is_zero() || self.pair(target) != self.pairing {
            return false;
        }
        if self.degree < delta as u32 {
            return true;
        }
        block_basis(delta, &self.variables, self.degree - delta as u32).into_iter().all(|u| {
            let p = SuperPolynomial::from_terms(delta, self.variables.len(), [(u, BigRational::one())]);
            self.pair(&apply_delta(&p)).is_zero()
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Concordance {
    Witness(SuperPolynomial),
    Infeasible(Certificate),
}

fn split_blocks(p: &SuperPolynomial) -> BTreeMap<(u32, Vec<u32>), Vec<(Monomial, BigRational)>> {
    let mut blocks: BTreeMap<(u32, Vec<u32>), Vec<(Monomial, BigRational)>> = BTreeMap::new();
    for (k, v) in p.terms() {
        blocks.entry((k.degree(), k.variables())).or_default().push((k.clone(), v.clone()));
    }
    blocks
}

/// Solves Δe = target exactly, block by block; free unknowns are set to zero.
pub fn solve_delta(target: &SuperPolynomial) -> Concordance {
    let (delta, m) = (target.delta, target.m);
    let mut witness = SuperPolynomial::zero(delta, m);
    for ((degree, vars), entries) in split_blocks(target) {
        let rows_target: BTreeMap<Monomial, BigRational> = entries.into_iter().collect();
        if degree < delta as u32 {
            let functional: Vec<(Monomial, BigRational)> =
                rows_target.keys().next().map(|k| (k.clone(), BigRational::one())).into_iter().collect();
            let pairing = rows_target.values().next().cloned().unwrap_or_else(BigRational::zero);
            return Concordance::Infeasible(Certificate { degree, variables: vars, functional, pairing });
        }
        let unknowns = block_basis(delta, &vars, degree - delta as u32);
        let images: Vec<SuperPolynomial> = unknowns
            .iter()
            .map(|u| apply_delta(&SuperPolynomial::from_terms(delta, m, [(u.clone(), BigRational::one())])))
            .collect();
        let rows = block_basis(delta, &vars, degree);
        match solve_exact(&rows, &images, &rows_target) {
            Ok(sol) => {
                for (u, c) in unknowns.into_iter().zip(sol) {
                    witness.add_term(u, c);
                }
            }
            Err((functional, pairing)) => {
                return Concordance::Infeasible(Certificate { degree, variables: vars, functional, pairing });
            }
        }
    }
    Concordance::Witness(witness)
}

type Functional = (Vec<(Monomial, BigRational)>, BigRational);

/// Exact Gauss–Jordan on A x = b with A's columns the `images` expressed in `rows`.
/// On failure returns y with yᵀA = 0 and yᵀb ≠ 0.
fn solve_exact(
    rows: &[Monomial],
    images: &[SuperPolynomial],
    b: &BTreeMap<Monomial, BigRational>,
) -> core::result::Result<Vec<BigRational>, Functional> {
    let (nr, nc) = (rows.len(), images.len());
    // augmented [A | b | I]
    let width = nc + 1 + nr;
    let mut a: Vec<Vec<BigRational>> = rows
        .iter()
        .enumerate()
        .map(|(r, mono)| {
            let mut row = vec![BigRational::zero(); width];
            for (c, img) in images.iter().enumerate() {
                row[c] = img.coefficient(mono);
            }
            row[nc] = b.get(mono).cloned().unwrap_or_else(BigRational::zero);
            row[nc + 1 + r] = BigRational::one();
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..nc {
        let Some(p) = (r..nr).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        let inv = a[r][c].recip();
        for v in a[r].iter_mut() {
            *v *= &inv;
        }
        for i in 0..nr {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                let pivot_row = a[r].clone();
                for (v, pv) in a[i].iter_mut().zip(&pivot_row) {
                    if !pv.is_zero() {
                        *v -= &f * pv;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == nr {
            break;
        }
    }
    for i in r..nr {
        if !a[i][nc].is_zero() {
            let functional = rows
                .iter()
                .zip(&a[i][nc + 1..])
                .filter(|(_, v)| !v.is_zero())
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            return Err((functional, a[i][nc].clone()));
        }
    }
    let mut x = vec![BigRational::zero(); nc];
    for (i, c) in pivots.into_iter().enumerate() {
        x[c] = a[i][nc].clone();
    }
    Ok(x)
}

/// Decides whether E₊ and E₋ are concordant, i.e. E₊ − E₋ = Δe.
pub fn concordance_solve(e_plus: &SuperPolynomial, e_minus: &SuperPolynomial, degree_cap: u32) -> Result<Concordance> {
    if e_plus.delta != e_minus.delta || e_plus.m != e_minus.m {
        return Err(Error::Invalid("E₊ and E₋ belong to different algebras".into()));
    }
    for (name, e) in [("E+", e_plus), ("E-", e_minus)] {
        if !e.is_even() {
            return Err(Error::Invalid(format!("{name} is not even")));
        }
        for i in 1..=e.delta {
            if !apply_d(i, e)?.is_zero() {
                return Err(Error::Invalid(format!("{name} is not d{i}-closed")));
            }
        }
        if e.max_degree() > degree_cap {
            return Err(Error::Invalid(format!("{name} has degree {} above the cap {degree_cap}", e.max_degree())));
        }
    }
    Ok(solve_delta(&e_plus.sub(e_minus)))
}

// --- text syntax ---

fn fmt_rational(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn fmt_monomial(k: &Monomial) -> String {
    let m = k.m();
    let mut parts = Vec::new();
    let pw = |name: String, e: u32| if e == 1 { name } else { format!("{name}^{e}") };
    for j in 0..m {
        if k.x[j] > 0 {
            parts.push(pw(format!("x{}", j + 1), k.x[j]));
        }
    }
    for j in 0..m {
        if k.dd[j] > 0 {
            parts.push(pw(format!("D21x{}", j + 1), k.dd[j]));
        }
    }
    let mut bits = k.odd;
    while bits != 0 {
        let b = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        parts.push(format!("D{}x{}", b / m + 1, b % m + 1));
    }
    parts.join("*")
}

impl fmt::Display for SuperPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (n, (k, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            match (n, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let mono = fmt_monomial(k);
            if mono.is_empty() {
                f.write_str(&fmt_rational(&a))?;
            } else if a.is_one() {
                f.write_str(&mono)?;
            } else {
                write!(f, "{}*{}", fmt_rational(&a), mono)?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (j, c) in self.components.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            if *c == SuperPolynomial::one(c.delta, c.m) {
                write!(f, "d/dx{}", j + 1)?;
            } else {
                write!(f, "({})*d/dx{}", c, j + 1)?;
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Partial(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((start, Tok::Plus)),
            b'-' => out.push((start, Tok::Minus)),
            b'*' => out.push((start, Tok::Star)),
            b'^' => out.push((start, Tok::Caret)),
            b'(' => out.push((start, Tok::LParen)),
            b')' => out.push((start, Tok::RParen)),
            b'/' => out.push((start, Tok::Slash)),
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n: BigInt = text[start..i].parse().map_err(|_| Error::Parse { pos: start, msg: "bad number".into() })?;
                out.push((start, Tok::Num(n)));
                continue;
            }
            b'd' if text[i..].starts_with("d/dx") => {
                i += 4;
                let s = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let j: usize = text[s..i].parse().map_err(|_| Error::Parse { pos: start, msg: "expected d/dx<index>".into() })?;
                if j == 0 {
                    return Err(Error::Parse { pos: start, msg: "variables are numbered from 1".into() });
                }
                out.push((start, Tok::Partial(j - 1)));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            _ => return Err(Error::Parse { pos: start, msg: format!("unexpected character {:?}", c as char) }),
        }
        i += 1;
    }
    Ok(out)
}

/// Directions and variable of `x3`, `D1x2`, `D21x1`, `Dx1` (= D1x1); variables from 1.
fn parse_ident(id: &str) -> Option<(Vec<usize>, usize)> {
    let (dirs, var) = if let Some(rest) = id.strip_prefix('D') {
        let xpos = rest.find('x')?;
        let dirs: Vec<usize> = if xpos == 0 {
            vec![1]
        } else {
            rest[..xpos].chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect::<Option<_>>()?
        };
        (dirs, &rest[xpos + 1..])
    } else {
        (Vec::new(), id.strip_prefix('x')?)
    };
    let j: usize = var.parse().ok()?;
    (j >= 1).then_some((dirs, j - 1))
}

pub fn max_variable(text: &str) -> Result<usize> {
    let mut m = 0;
    for (pos, t) in tokenize(text)? {
        match t {
            Tok::Ident(id) => {
                let (_, j) = parse_ident(&id).ok_or(Error::Parse { pos, msg: format!("unknown symbol {id}") })?;
                m = m.max(j + 1);
            }
            Tok::Partial(j) => m = m.max(j + 1),
            _ => {}
        }
    }
    Ok(m)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    at: usize,
    delta: usize,
    m: usize,
    end: usize,
}

/// A parsed expression: polynomial part plus, for vector fields, coefficients of each ∂/∂x^j.
#[derive(Clone)]
struct Expr {
    poly: SuperPolynomial,
    field: Vec<SuperPolynomial>,
}

impl Expr {
    fn scalar(p: SuperPolynomial, m: usize) -> Self {
        let z = SuperPolynomial::zero(p.delta, p.m);
        Self { poly: p, field: vec![z; m] }
    }

    fn is_field(&self) -> bool {
        self.field.iter().any(|c| !c.is_zero())
    }

    fn add(&self, o: &Self) -> Self {
        Self { poly: self.poly.add(&o.poly), field: self.field.iter().zip(&o.field).map(|(a, b)| a.add(b)).collect() }
    }

    fn neg(&self) -> Self {
        let minus = -BigRational::one();
        Self { poly: self.poly.scale(&minus), field: self.field.iter().map(|c| c.scale(&minus)).collect() }
    }
}

impl Parser<'_> {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|t| t.0).unwrap_or(self.end)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.pos(), msg: msg.into() })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut neg = false;
        match self.peek() {
            Some(Tok::Minus) => {
                neg = true;
                self.at += 1;
            }
            Some(Tok::Plus) => self.at += 1,
            _ => {}
        }
        let mut acc = self.term()?;
        if neg {
            acc = acc.neg();
        }
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    acc = acc.add(&self.term()?.neg());
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        while let Some(Tok::Star) = self.peek() {
            self.at += 1;
            let f = self.factor()?;
            acc = match (acc.is_field(), f.is_field()) {
                (true, true) => return self.err("product of two vector fields"),
                (false, false) => Expr::scalar(acc.poly.mul(&f.poly), self.m),
                (true, false) => self.times_field(&f.poly, &acc)?,
                (false, true) => self.times_field(&acc.poly, &f)?,
            };
        }
        Ok(acc)
    }

    fn times_field(&self, c: &SuperPolynomial, f: &Expr) -> Result<Expr> {
        if !c.is_base_function() || !f.poly.is_zero() {
            return self.err("vector field coefficients must be functions of x");
        }
        let z = SuperPolynomial::zero(self.delta, self.m);
        Ok(Expr { poly: z, field: f.field.iter().map(|v| c.mul(v)).collect() })
    }

    fn exponent(&mut self) -> Result<u32> {
        if let Some(Tok::Caret) = self.peek() {
            self.at += 1;
            match self.peek() {
                Some(Tok::Num(n)) => {
                    let e = u32::try_from(n.clone()).or_else(|_| self.err("exponent too large"))?;
                    self.at += 1;
                    Ok(e)
                }
                _ => self.err("expected exponent"),
            }
        } else {
            Ok(1)
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let (delta, m) = (self.delta, self.m);
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.at += 1;
                let mut c = BigRational::from_integer(n);
                if let Some(Tok::Slash) = self.peek() {
                    self.at += 1;
                    match self.peek().cloned() {
                        Some(Tok::Num(d)) if !d.is_zero() => {
                            self.at += 1;
                            c /= BigRational::from_integer(d);
                        }
                        _ => return self.err("expected nonzero denominator"),
                    }
                }
                Ok(Expr::scalar(SuperPolynomial::constant(delta, m, c), m))
            }
            Some(Tok::Ident(id)) => {
                let Some((dirs, j)) = parse_ident(&id) else { return self.err(format!("unknown symbol {id}")) };
                if j >= m {
                    return self.err(format!("variable x{} beyond m = {m}", j + 1));
                }
                if dirs.iter().any(|d| *d < 1 || *d > delta) {
                    return self.err(format!("{id}: directions must lie in 1..={delta}"));
                }
                self.at += 1;
                let mut g = SuperPolynomial::x(delta, m, j);
                for &d in dirs.iter().rev() {
                    g = apply_d(d, &g)?;
                }
                let e = self.exponent()?;
                let mut p = SuperPolynomial::one(delta, m);
                for _ in 0..e {
                    p = p.mul(&g);
                }
                Ok(Expr::scalar(p, m))
            }
            Some(Tok::Partial(j)) => {
                if j >= m {
                    return self.err(format!("d/dx{} beyond m = {m}", j + 1));
                }
                self.at += 1;
                let mut e = Expr::scalar(SuperPolynomial::zero(delta, m), m);
                e.field[j] = SuperPolynomial::one(delta, m);
                Ok(e)
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let e = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.at += 1;
                        Ok(e)
                    }
                    _ => self.err("expected ')'"),
                }
            }
            _ => self.err("expected a number, generator or '('"),
        }
    }
}

fn parse_expr(delta: usize, m: usize, text: &str) -> Result<Expr> {
    if !(1..=2).contains(&delta) {
        return Err(Error::Invalid("δ must be 1 or 2".into()));
    }
    let toks = tokenize(text)?;
    let mut p = Parser { toks: &toks, at: 0, delta, m: m.max(1), end: text.len() };
    let e = p.expr()?;
    if p.at != toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

/// Parses the text syntax into an element over m variables.
pub fn parse(delta: usize, m: usize, text: &str) -> Result<SuperPolynomial> {
    let e = parse_expr(delta, m, text)?;
    if e.is_field() {
        return Err(Error::Parse { pos: 0, msg: "expected an element, found a vector field".into() });
    }
    Ok(e.poly)
}

/// Parses `d/dx1`, `x1*d/dx1 + x2^2*d/dx2`, ….
pub fn parse_vector_field(delta: usize, m: usize, text: &str) -> Result<VectorField> {
    let e = parse_expr(delta, m, text)?;
    if !e.poly.is_zero() {
        return Err(Error::Parse { pos: 0, msg: "expected a vector field Σ v^j*d/dxj".into() });
    }
    VectorField::new(e.field)
}
