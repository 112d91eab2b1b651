//! Metric jets, Levi-Civita data and the Grassmann biforms built from them.
//!
//! Index conventions: `Γ_ijk = ½(∂_i g_kj + ∂_j g_ki − ∂_k g_ij)` (symmetric in i, j),
//! `Γ^k_ij = g^{kl} Γ_ijl`, and
//! `R_ijkl = ½(∂_j∂_k g_il + ∂_i∂_l g_jk − ∂_i∂_k g_jl − ∂_j∂_l g_ik) + g_mp(Γ^m_jk Γ^p_il − Γ^m_ik Γ^p_jl)`,
//! so that `R_θφθφ = sin²θ` on the unit sphere.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grassmann::GrassmannElement;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub periodic: Vec<bool>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, periodic: Vec<bool>) -> Self {
        assert!(lo.len() == hi.len() && hi.len() == periodic.len());
        Self { lo, hi, periodic }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn length(&self, a: usize) -> f64 {
        self.hi[a] - self.lo[a]
    }

    pub fn scale(&self) -> f64 {
        (0..self.dim()).map(|a| self.length(a)).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let tol = 1e-12 * self.scale().max(1.0);
        x.len() == self.dim()
            && (0..self.dim())
                .all(|a| self.periodic[a] || (x[a] >= self.lo[a] - tol && x[a] <= self.hi[a] + tol))
    }

    /// Reduce periodic coordinates into [lo, hi).
    pub fn wrap(&self, x: &mut [f64]) {
        for a in 0..self.dim() {
            if self.periodic[a] {
                let l = self.length(a);
                let mut t = (x[a] - self.lo[a]) % l;
                if t < 0.0 {
                    t += l;
                }
                if t >= l {
                    t -= l;
                }
                x[a] = self.lo[a] + t;
            }
        }
    }

    /// Coordinate distance respecting periodic axes.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.dim() {
            let mut d = (x[a] - y[a]).abs();
            if self.periodic[a] {
                let l = self.length(a);
                d %= l;
                d = d.min(l - d);
            }
            s += d * d;
        }
        s.sqrt()
    }
}

/// g together with ∂_k g (`dg[k]`) and ∂_k∂_l g (`ddg[k*n + l]`).
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub ddg: Vec<DMatrix<f64>>,
    /// Set when a finite-difference stencil had to turn one-sided near the domain boundary.
    pub one_sided: bool,
}

impl MetricJet {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn flat(n: usize) -> Self {
        Self {
            g: DMatrix::identity(n, n),
            dg: vec![DMatrix::zeros(n, n); n],
            ddg: vec![DMatrix::zeros(n, n); n * n],
            one_sided: false,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            g: &self.g * c,
            dg: self.dg.iter().map(|m| m * c).collect(),
            ddg: self.ddg.iter().map(|m| m * c).collect(),
            one_sided: self.one_sided,
        }
    }

    /// Block-diagonal jet of a product metric; `a` depends on the first coordinates only.
    pub fn block_diag(a: &MetricJet, b: &MetricJet) -> Self {
        let (na, nb) = (a.dim(), b.dim());
        let n = na + nb;
        let embed = |ma: Option<&DMatrix<f64>>, mb: Option<&DMatrix<f64>>| {
            let mut m = DMatrix::zeros(n, n);
            if let Some(ma) = ma {
                m.view_mut((0, 0), (na, na)).copy_from(ma);
            }
            if let Some(mb) = mb {
                m.view_mut((na, na), (nb, nb)).copy_from(mb);
            }
            m
        };
        let g = embed(Some(&a.g), Some(&b.g));
        let dg = (0..n)
            .map(|k| if k < na { embed(Some(&a.dg[k]), None) } else { embed(None, Some(&b.dg[k - na])) })
            .collect();
        let mut ddg = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                ddg.push(if k < na && l < na {
                    embed(Some(&a.ddg[k * na + l]), None)
                } else if k >= na && l >= na {
                    embed(None, Some(&b.ddg[(k - na) * nb + (l - na)]))
                } else {
                    DMatrix::zeros(n, n)
                });
            }
        }
        Self { g, dg, ddg, one_sided: a.one_sided || b.one_sided }
    }
}

pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;
    fn metric(&self, x: &[f64]) -> DMatrix<f64>;
    /// Closed-form jet, if the field has one.
    fn jet(&self, _x: &[f64]) -> Option<MetricJet> {
        None
    }
}

pub trait ScalarField: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference { step: f64 },
}

pub const DEFAULT_FD_FACTOR: f64 = 1e-5;

#[derive(Clone)]
pub struct ChartMetric {
    pub field: Arc<dyn MetricField>,
    pub domain: Domain,
    pub mode: DerivativeMode,
}

impl core::fmt::Debug for ChartMetric {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ChartMetric").field("domain", &self.domain).field("mode", &self.mode).finish()
    }
}

impl ChartMetric {
    /// Uses the field's closed-form jet when it has one, otherwise central differences.
    pub fn new(field: Arc<dyn MetricField>, domain: Domain) -> Self {
        assert_eq!(field.dim(), domain.dim());
        let probe: Vec<f64> = (0..domain.dim()).map(|a| 0.5 * (domain.lo[a] + domain.hi[a])).collect();
        let mode = if field.jet(&probe).is_some() {
            DerivativeMode::Analytic
        } else {
            DerivativeMode::FiniteDifference { step: DEFAULT_FD_FACTOR * domain.scale() }
        };
        Self { field, domain, mode }
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        Ok(self.field.metric(x))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { point: x.to_vec() })
        }
    }

    pub fn jet(&self, x: &[f64]) -> Result<MetricJet> {
        self.check(x)?;
        match self.mode {
            DerivativeMode::Analytic => self
                .field
                .jet(x)
                .ok_or_else(|| Error::Invalid("metric has no closed-form jet".into())),
            DerivativeMode::FiniteDifference { step } => Ok(self.fd_jet(x, step)),
        }
    }

    fn fd_jet(&self, x: &[f64], h: f64) -> MetricJet {
        let n = self.dim();
        let mut one_sided = false;
        let stencils: Vec<Stencil> = (0..n)
            .map(|a| {
                let s = Stencil::for_axis(&self.domain, x, a, h);
                one_sided |= s.one_sided;
                s
            })
            .collect();
        let eval = |offsets: &[(usize, f64)]| {
            let mut y = x.to_vec();
            for &(a, o) in offsets {
                y[a] += o;
            }
            self.field.metric(&y)
        };
        let g = self.field.metric(x);
        let mut dg = Vec::with_capacity(n);
        for (a, s) in stencils.iter().enumerate() {
            let mut m = DMatrix::zeros(n, n);
            for &(o, w) in &s.first {
                m += eval(&[(a, o)]) * w;
            }
            dg.push(m);
        }
        let mut ddg = vec![DMatrix::zeros(n, n); n * n];
        for a in 0..n {
            for b in a..n {
                let mut m = DMatrix::zeros(n, n);
                if a == b {
                    for &(o, w) in &stencils[a].second {
                        m += eval(&[(a, o)]) * w;
                    }
                } else {
                    for &(oa, wa) in &stencils[a].first {
                        for &(ob, wb) in &stencils[b].first {
                            m += eval(&[(a, oa), (b, ob)]) * (wa * wb);
                        }
                    }
                }
                ddg[a * n + b] = m.clone();
                ddg[b * n + a] = m;
            }
        }
        MetricJet { g, dg, ddg, one_sided }
    }
}

struct Stencil {
    first: Vec<(f64, f64)>,
    second: Vec<(f64, f64)>,
    one_sided: bool,
}

impl Stencil {
    fn for_axis(domain: &Domain, x: &[f64], a: usize, h: f64) -> Self {
        let (room_lo, room_hi) = if domain.periodic[a] {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (x[a] - domain.lo[a], domain.hi[a] - x[a])
        };
        if room_lo >= h && room_hi >= h {
            return Self::centered(h);
        }
        let forward = room_hi >= room_lo;
        let s = h.min(room_lo.max(room_hi) / 3.0);
        let dir = if forward { 1.0 } else { -1.0 };
        Self {
            first: vec![(0.0, -1.5 / s * dir), (s * dir, 2.0 / s * dir), (2.0 * s * dir, -0.5 / s * dir)],
            second: vec![
                (0.0, 2.0 / (s * s)),
                (s * dir, -5.0 / (s * s)),
                (2.0 * s * dir, 4.0 / (s * s)),
                (3.0 * s * dir, -1.0 / (s * s)),
            ],
            one_sided: true,
        }
    }

    fn centered(s: f64) -> Self {
        Self {
            first: vec![(-s, -0.5 / s), (s, 0.5 / s)],
            second: vec![(-s, 1.0 / (s * s)), (0.0, -2.0 / (s * s)), (s, 1.0 / (s * s))],
            one_sided: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CurvatureFrame {
    pub x: Vec<f64>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub det_g: f64,
    /// Γ_ijk at `[(i*n + j)*n + k]`.
    pub gamma_first: Vec<f64>,
    /// Γ^k_ij at `[(k*n + i)*n + j]`.
    pub gamma_second: Vec<f64>,
    /// R_ijkl at `[((i*n + j)*n + k)*n + l]`.
    pub riemann: Vec<f64>,
    pub one_sided: bool,
}

impl CurvatureFrame {
    pub fn from_jet(x: &[f64], jet: &MetricJet) -> Result<Self> {
        let n = jet.dim();
        let g = jet.g.clone();
        let chol = g.clone().cholesky().ok_or_else(|| Error::Invalid("metric is not positive definite".into()))?;
        let det_g = chol.determinant();
        let g_inv = chol.inverse();
        let (gamma_first, gamma_second) = christoffel_from_jet(jet, &g_inv);
        let idx3 = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        let mut riemann = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let dd = |a: usize, b: usize, r: usize, c: usize| jet.ddg[a * n + b][(r, c)];
                        let mut r = 0.5 * (dd(j, k, i, l) + dd(i, l, j, k) - dd(i, k, j, l) - dd(j, l, i, k));
                        for m in 0..n {
                            for p in 0..n {
                                r += g[(m, p)]
                                    * (gamma_second[idx3(m, j, k)] * gamma_second[idx3(p, i, l)]
                                        - gamma_second[idx3(m, i, k)] * gamma_second[idx3(p, j, l)]);
                            }
                        }
                        riemann[((i * n + j) * n + k) * n + l] = r;
                    }
                }
            }
        }
        Ok(Self { x: x.to_vec(), g, g_inv, det_g, gamma_first, gamma_second, riemann, one_sided: jet.one_sided })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn gamma1(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.gamma_first[(i * n + j) * n + k]
    }

    pub fn gamma2(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.dim();
        self.gamma_second[(k * n + i) * n + j]
    }

    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.dim();
        self.riemann[((i * n + j) * n + k) * n + l]
    }

    /// Largest violation of R_ijkl = −R_jikl = −R_ijlk = R_klij.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.r(i, j, k, l);
                        worst = worst
                            .max((r + self.r(j, i, k, l)).abs())
                            .max((r + self.r(i, j, l, k)).abs())
                            .max((r - self.r(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn bianchi_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let s = self.r(i, j, k, l) + self.r(i, k, l, j) + self.r(i, l, j, k);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Hess_ij = ∂_i∂_j h − Γ^k_ij ∂_k h from a potential's coordinate derivatives.
    pub fn covariant_hessian(&self, grad: &[f64], hess: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            let mut v = 0.5 * (hess[(i, j)] + hess[(j, i)]);
            for (k, dk) in grad.iter().enumerate() {
                v -= self.gamma2(k, i, j) * dk;
            }
            v
        })
    }

    pub fn gradient_norm_sq(&self, grad: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += grad[i] * self.g_inv[(i, j)] * grad[j];
            }
        }
        s
    }
}

/// (Γ_ijk, Γ^k_ij) from the first derivatives in `jet`.
pub fn christoffel_from_jet(jet: &MetricJet, g_inv: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = jet.dim();
    let mut first = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                first[(i * n + j) * n + k] = 0.5 * (jet.dg[i][(k, j)] + jet.dg[j][(k, i)] - jet.dg[k][(i, j)]);
            }
        }
    }
    let mut second = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += g_inv[(k, l)] * first[(i * n + j) * n + l];
                }
                second[(k * n + i) * n + j] = s;
            }
        }
    }
    (first, second)
}

pub fn curvature_frame(chart: &ChartMetric, x: &[f64]) -> Result<CurvatureFrame> {
    CurvatureFrame::from_jet(x, &chart.jet(x)?)
}

pub fn christoffel(chart: &ChartMetric, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let jet = chart.jet(x)?;
    let g_inv = jet.g.clone().try_inverse().ok_or_else(|| Error::Invalid("singular metric".into()))?;
    Ok(christoffel_from_jet(&jet, &g_inv))
}

pub fn riemann(chart: &ChartMetric, x: &[f64]) -> Result<Vec<f64>> {
    Ok(curvature_frame(chart, x)?.riemann)
}

pub fn hessian_form(chart: &ChartMetric, h: &dyn ScalarField, x: &[f64]) -> Result<DMatrix<f64>> {
    let frame = curvature_frame(chart, x)?;
    Ok(frame.covariant_hessian(&h.gradient(x), &h.hessian(x)))
}

pub fn gradient_norm_sq(chart: &ChartMetric, h: &dyn ScalarField, x: &[f64]) -> Result<f64> {
    let g = chart.metric(x)?;
    let g_inv = g.try_inverse().ok_or_else(|| Error::Invalid("singular metric".into()))?;
    let d = h.gradient(x);
    let n = d.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += d[i] * g_inv[(i, j)] * d[j];
        }
    }
    Ok(s)
}

/// Generator index of φ₁^i in the interleaved layout φ₁¹, φ₂¹, …, φ₁ⁿ, φ₂ⁿ.
#[inline]
pub const fn phi1(i: usize) -> usize {
    2 * i
}

#[inline]
pub const fn phi2(i: usize) -> usize {
    2 * i + 1
}

/// Σ R_ijkl φ₁^i φ₂^j φ₁^k φ₂^l over 2n generators.
pub fn curvature_biform(frame: &CurvatureFrame) -> GrassmannElement<f64> {
    let n = frame.dim();
    let mut out = GrassmannElement::zero(2 * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if k == i {
                    continue;
                }
                for l in 0..n {
                    if l == j {
                        continue;
                    }
                    let r = frame.r(i, j, k, l);
                    if r != 0.0 {
                        let m = GrassmannElement::monomial(2 * n, &[phi1(i), phi2(j), phi1(k), phi2(l)], r);
                        out = &out + &m;
                    }
                }
            }
        }
    }
    out
}

/// Σ H_ij φ₁^i φ₂^j over 2n generators.
pub fn hessian_biform(h: &DMatrix<f64>) -> GrassmannElement<f64> {
    let n = h.nrows();
    let mut out = GrassmannElement::zero(2 * n);
    for i in 0..n {
        for j in 0..n {
            let m = GrassmannElement::monomial(2 * n, &[phi1(i), phi2(j)], h[(i, j)]);
            out = &out + &m;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Round;
    impl MetricField for Round {
        fn dim(&self) -> usize {
            2
        }
        fn metric(&self, x: &[f64]) -> DMatrix<f64> {
            let s = x[0].sin();
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, s * s])
        }
    }

    struct Conformal;
    impl Conformal {
        fn u(x: &[f64]) -> (f64, [f64; 2]) {
            (0.3 * x[0] + 0.2 * x[1] * x[1], [0.3, 0.4 * x[1]])
        }
    }
    impl MetricField for Conformal {
        fn dim(&self) -> usize {
            2
        }
        fn metric(&self, x: &[f64]) -> DMatrix<f64> {
            DMatrix::identity(2, 2) * (2.0 * Self::u(x).0).exp()
        }
    }

    fn sphere_chart() -> ChartMetric {
        ChartMetric::new(
            Arc::new(Round),
            Domain::new(vec![0.0, 0.0], vec![core::f64::consts::PI, 2.0 * core::f64::consts::PI], vec![false, true]),
        )
    }

    #[test]
    fn flat_metric_has_no_connection() {
        let jet = MetricJet::flat(3);
        let f = CurvatureFrame::from_jet(&[0.0; 3], &jet).unwrap();
        assert!(f.gamma_second.iter().all(|v| *v == 0.0));
        assert!(f.riemann.iter().all(|v| *v == 0.0));
        assert!(curvature_biform(&f).is_zero());
    }

    #[test]
    fn round_sphere_values() {
        let chart = sphere_chart();
        let th = 1.1;
        let f = curvature_frame(&chart, &[th, 0.4]).unwrap();
        assert!((f.gamma2(0, 1, 1) + th.sin() * th.cos()).abs() < 1e-8);
        assert!((f.gamma2(1, 0, 1) - th.cos() / th.sin()).abs() < 1e-8);
        assert!((f.r(0, 1, 0, 1) - th.sin().powi(2)).abs() < 1e-5);
        assert!(f.symmetry_residual() < 1e-6);
        assert!(f.bianchi_residual() < 1e-6);
    }

    #[test]
    fn conformal_christoffel_closed_form() {
        let chart = ChartMetric::new(
            Arc::new(Conformal),
            Domain::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![false, false]),
        );
        let x = [0.2, -0.35];
        let (_, g2) = christoffel(&chart, &x).unwrap();
        let (_, du) = Conformal::u(&x);
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let want = d(i, k) * du[j] + d(j, k) * du[i] - d(i, j) * du[k];
                    assert!((g2[(k * 2 + i) * 2 + j] - want).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn outside_domain_and_one_sided_flag() {
        let chart = sphere_chart();
        assert!(matches!(curvature_frame(&chart, &[-0.5, 0.0]), Err(Error::OutsideDomain { .. })));
        let near = curvature_frame(&chart, &[1e-6, 0.0]).unwrap();
        assert!(near.one_sided);
        let inner = curvature_frame(&chart, &[1.0, 0.0]).unwrap();
        assert!(!inner.one_sided);
        // the periodic axis never needs a one-sided stencil
        let edge = curvature_frame(&chart, &[1.0, 2.0 * core::f64::consts::PI]).unwrap();
        assert!(!edge.one_sided);
    }

    #[test]
    fn gradient_norm_examples() {
        struct Height;
        impl ScalarField for Height {
            fn value(&self, x: &[f64]) -> f64 {
                x[0].cos()
            }
            fn gradient(&self, x: &[f64]) -> Vec<f64> {
                vec![-x[0].sin(), 0.0]
            }
            fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
                DMatrix::from_row_slice(2, 2, &[-x[0].cos(), 0.0, 0.0, 0.0])
            }
        }
        let chart = sphere_chart();
        let th = 0.7;
        let v = gradient_norm_sq(&chart, &Height, &[th, 1.0]).unwrap();
        assert!((v - th.sin().powi(2)).abs() < 1e-14);
        let hs = hessian_form(&chart, &Height, &[core::f64::consts::FRAC_PI_2, 0.3]).unwrap();
        // at the equator: Hess_θθ = 0, Hess_φφ = −Γ^θ_φφ ∂_θ h = (sin cos)(−sin) → 0
        assert!(hs.amax() < 1e-8);
    }

    #[test]
    fn biform_of_sphere_frame() {
        let chart = sphere_chart();
        let th = 0.9;
        let f = curvature_frame(&chart, &[th, 0.0]).unwrap();
        let b = curvature_biform(&f);
        // only the top monomial survives in n = 2; coefficient 2·R_θφθφ in canonical order
        assert_eq!(b.len(), 1);
        assert!((b.coefficient(0b1111) - 2.0 * f.r(0, 1, 0, 1)).abs() < 1e-12);
    }
}
