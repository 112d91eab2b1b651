//! The 0|2 sigma model: component-field action, Euler density, partition function.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{
    christoffel_from_jet, curvature_biform, curvature_frame, hessian_biform, phi1, phi2, CurvatureFrame, MetricJet,
    ScalarField,
};
use crate::grassmann::{DenseGrassmann, GrassmannElement, DENSE_MAX_GENERATORS};
use crate::manifolds::{integrate, ManifoldSpec, MorseFunction};
use crate::morse::{find_critical_points, CriticalPoint, DEFAULT_SEED_DENSITY};
use crate::quadrature::{effective_count, Executor};

/// Value, gradient and coordinate Hessian of the potential at a point.
#[derive(Clone, Debug)]
pub struct PotentialJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

impl PotentialJet {
    pub fn of(h: &dyn ScalarField, x: &[f64]) -> Self {
        Self { value: h.value(x), grad: h.gradient(x), hess: h.hessian(x) }
    }

    pub fn zero(n: usize) -> Self {
        Self { value: 0.0, grad: vec![0.0; n], hess: DMatrix::zeros(n, n) }
    }
}

/// (x, F, λ) plus the potential; φ₁, φ₂ are the Grassmann generators φ₁^i = 2i, φ₂^i = 2i + 1.
#[derive(Clone, Debug)]
pub struct ComponentField {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub lambda: f64,
    pub potential: PotentialJet,
}

#[derive(Clone, Copy, Debug)]
pub struct ActionConventions {
    /// Multiplies the curvature term; anything but +1 is a deliberate fault.
    pub curvature_sign: f64,
}

impl Default for ActionConventions {
    fn default() -> Self {
        Self { curvature_sign: 1.0 }
    }
}

fn gmono(n: usize, idx: &[usize], c: f64) -> GrassmannElement {
    GrassmannElement::monomial(2 * n, idx, c)
}

/// S = ½g(F,F) − λ⟨F,∇h⟩ + ½R(φ₁,φ₂,φ₁,φ₂) + λΣ Hess_ij φ₁^iφ₂^j.
pub fn action_geometric(frame: &CurvatureFrame, cf: &ComponentField) -> Result<GrassmannElement> {
    action_geometric_with(frame, cf, ActionConventions::default())
}

pub fn action_geometric_with(frame: &CurvatureFrame, cf: &ComponentField, conv: ActionConventions) -> Result<GrassmannElement> {
    let n = frame.dim();
    check_dims(n, cf)?;
    let (f, lam) = (&cf.f, cf.lambda);
    let mut s0 = 0.0;
    for i in 0..n {
        for j in 0..n {
            s0 += 0.5 * frame.g[(i, j)] * f[i] * f[j];
        }
        s0 -= lam * cf.potential.grad[i] * f[i];
    }
    let mut s = GrassmannElement::scalar(2 * n, s0);
    s = &s + &curvature_biform(frame).scale(&(0.5 * conv.curvature_sign));
    let hess = frame.covariant_hessian(&cf.potential.grad, &cf.potential.hess);
    s = &s + &hessian_biform(&hess).scale(&lam);
    Ok(s)
}

fn check_dims(n: usize, cf: &ComponentField) -> Result<()> {
    for len in [cf.x.len(), cf.f.len(), cf.potential.grad.len(), cf.potential.hess.nrows()] {
        if len != n {
            return Err(Error::DimensionMismatch { left: n, right: len });
        }
    }
    if 2 * n > 64 {
        return Err(Error::Invalid("at most 32 dimensions".into()));
    }
    Ok(())
}

/// Raw coordinate expansion of ½‖TΦ‖² − Φ*h·λ in (x, φ₁, φ₂, E) with E^k = F^k + Γ^k_ij φ₁^iφ₂^j.
pub fn action_coordinate(jet: &MetricJet, cf: &ComponentField) -> Result<GrassmannElement> {
    let n = jet.dim();
    check_dims(n, cf)?;
    let g_inv = jet.g.clone().try_inverse().ok_or_else(|| Error::Invalid("singular metric".into()))?;
    let (_, gamma) = christoffel_from_jet(jet, &g_inv);
    let gens = 2 * n;
    let p1 = |i: usize| GrassmannElement::generator(gens, phi1(i));
    let p2 = |i: usize| GrassmannElement::generator(gens, phi2(i));
    let e: Vec<GrassmannElement> = (0..n)
        .map(|k| {
            let mut v = GrassmannElement::scalar(gens, cf.f[k]);
            for i in 0..n {
                for j in 0..n {
                    v = &v + &gmono(n, &[phi1(i), phi2(j)], gamma[(k * n + i) * n + j]);
                }
            }
            v
        })
        .collect();
    let mut t = GrassmannElement::zero(gens);
    for i in 0..n {
        for j in 0..n {
            t = &t + &(&e[i] * &e[j]).scale(&jet.g[(i, j)]);
            for k in 0..n {
                let dk = jet.dg[k][(i, j)];
                if dk != 0.0 {
                    t = &t - &(&(&p1(k) * &e[i]) * &p2(j)).scale(&dk);
                    t = &t + &(&(&p2(k) * &p1(i)) * &e[j]).scale(&dk);
                    t = &t + &(&(&e[k] * &p1(i)) * &p2(j)).scale(&dk);
                }
                for l in 0..n {
                    let dkl = jet.ddg[k * n + l][(i, j)];
                    if dkl != 0.0 {
                        t = &t + &gmono(n, &[phi2(l), phi1(k), phi1(i), phi2(j)], dkl);
                    }
                }
            }
        }
    }
    let mut pot = GrassmannElement::zero(gens);
    for k in 0..n {
        pot = &pot + &e[k].scale(&cf.potential.grad[k]);
        for l in 0..n {
            pot = &pot + &gmono(n, &[phi2(l), phi1(k)], cf.potential.hess[(k, l)]);
        }
    }
    Ok(&t.scale(&0.5) - &pot.scale(&cf.lambda))
}

/// φ₁¹⋯φ₁ⁿ φ₂¹⋯φ₂ⁿ, the top-monomial order fixed by χ(S²) = 2.
pub fn calibrated_ordering(n: usize) -> Vec<usize> {
    (0..n).map(phi1).chain((0..n).map(phi2)).collect()
}

/// Pfaffian density against chart Lebesgue measure, before the (2π)^{−n/2}.
pub fn euler_density(frame: &CurvatureFrame) -> Result<f64> {
    let n = frame.dim();
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    let top = curvature_biform(frame).scale(&-0.5).exp_even()?.berezin(&calibrated_ordering(n))?;
    Ok(top / frame.det_g.sqrt())
}

/// det g^{−1/2}·e^{−λ²‖∇h‖²/2}, what remains of the F-integral after normalization.
pub fn reduce_auxiliary_field(frame: &CurvatureFrame, grad: &[f64], lambda: f64) -> f64 {
    (-0.5 * lambda * lambda * frame.gradient_norm_sq(grad)).exp() / frame.det_g.sqrt()
}

/// Top coefficient of exp(iλ·HB − ½CB); odd powers of HB cannot reach the top degree.
pub fn fermionic_top(frame: &CurvatureFrame, hess: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let n = frame.dim();
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    if 2 * n <= DENSE_MAX_GENERATORS {
        fermionic_top_dense(frame, hess, lambda)
    } else {
        fermionic_top_sparse(frame, hess, lambda)
    }
}

fn top_series<E>(
    base: E,
    hb: &E,
    n: usize,
    lambda: f64,
    mul: impl Fn(&E, &E) -> Result<E>,
    top: impl Fn(&E) -> Result<f64>,
    scale: impl Fn(E, f64) -> E,
) -> Result<f64> {
    let mut total = top(&base)?;
    if lambda != 0.0 {
        let mut p = base;
        let mut lk = 1.0;
        for k in 1..=n {
            p = scale(mul(hb, &p)?, 1.0 / k as f64);
            lk *= lambda;
            if k % 2 == 0 {
                let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * lk * top(&p)?;
            }
        }
    }
    Ok(total)
}

pub fn fermionic_top_sparse(frame: &CurvatureFrame, hess: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let n = frame.dim();
    let order = calibrated_ordering(n);
    let base = curvature_biform(frame).scale(&-0.5).exp_even()?;
    top_series(
        base,
        &hessian_biform(hess),
        n,
        lambda,
        |a, b| a.multiply(b),
        |e| e.berezin(&order),
        |e, c| e.scale(&c),
    )
}

fn fermionic_top_dense(frame: &CurvatureFrame, hess: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let n = frame.dim();
    let order = calibrated_ordering(n);
    let mut cb = DenseGrassmann::zero(2 * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let r = frame.r(i, j, k, l);
                    if k != i && l != j && r != 0.0 {
                        cb.add_monomial(&[phi1(i), phi2(j), phi1(k), phi2(l)], -0.5 * r);
                    }
                }
            }
        }
    }
    let mut hb = DenseGrassmann::zero(2 * n);
    for i in 0..n {
        for j in 0..n {
            hb.add_monomial(&[phi1(i), phi2(j)], hess[(i, j)]);
        }
    }
    top_series(
        cb.exp_even()?,
        &hb,
        n,
        lambda,
        |a, b| Ok(a.multiply(b)),
        |e| e.berezin(&order),
        |mut e, c| {
            e.scale(c);
            e
        },
    )
}

pub fn partition_integrand(frame: &CurvatureFrame, h: &PotentialJet, lambda: f64) -> Result<f64> {
    let hess = frame.covariant_hessian(&h.grad, &h.hess);
    Ok(reduce_auxiliary_field(frame, &h.grad, lambda) * fermionic_top(frame, &hess, lambda)?)
}

/// Partition integrand at a chart point of `spec`.
pub fn integrand_at(spec: &ManifoldSpec, h: &MorseFunction, chart: usize, x: &[f64], lambda: f64) -> Result<f64> {
    let frame = curvature_frame(&spec.charts[chart].metric, x)?;
    partition_integrand(&frame, &PotentialJet::of(h.fields[chart].as_ref(), x), lambda)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolutionPolicy {
    pub base: Vec<usize>,
    pub adaptive: bool,
}

impl ResolutionPolicy {
    pub fn fixed(base: Vec<usize>) -> Self {
        Self { base, adaptive: false }
    }

    pub fn adaptive(base: Vec<usize>) -> Self {
        Self { base, adaptive: true }
    }
}

/// Points per bump width chosen by the adaptive policy, and the least accepted.
pub const POINTS_PER_WIDTH: f64 = 8.0;
pub const MIN_POINTS_PER_WIDTH: f64 = 4.0;

/// Per-axis inverse bump width κ_a = max(1, sup √((H g⁻¹ H)_aa)), sampled on each integration box.
pub fn localization_scale(spec: &ManifoldSpec, h: &MorseFunction) -> Result<Vec<f64>> {
    let n = spec.dim;
    let m: usize = if n <= 2 { 24 } else { 6 };
    let mut kappa = vec![1.0f64; n];
    for (c, ch) in spec.charts.iter().enumerate() {
        let Some(bx) = &ch.integration else { continue };
        let total = m.pow(n as u32);
        let mut x = vec![0.0; n];
        for mut i in 0..total {
            for a in (0..n).rev() {
                let k = i % m;
                i /= m;
                x[a] = bx.lo[a] + (k as f64 + 0.5) / m as f64 * bx.length(a);
            }
            let g = ch.metric.metric(&x)?;
            let Some(g_inv) = g.try_inverse() else { continue };
            let hh = h.fields[c].hessian(&x);
            let w = &hh * g_inv * &hh;
            for a in 0..n {
                let v = w[(a, a)].max(0.0).sqrt();
                if v.is_finite() {
                    kappa[a] = kappa[a].max(v);
                }
            }
        }
    }
    Ok(kappa)
}

fn axis_lengths(spec: &ManifoldSpec) -> Vec<f64> {
    (0..spec.dim)
        .map(|a| spec.charts.iter().filter_map(|c| c.integration.as_ref()).map(|b| b.length(a)).fold(0.0, f64::max))
        .collect()
}

/// Node counts for coupling λ; refuses when the bump would get fewer than four points.
pub fn resolve_resolution(spec: &ManifoldSpec, h: &MorseFunction, lambda: f64, policy: &ResolutionPolicy) -> Result<Vec<usize>> {
    if policy.base.len() != spec.dim {
        return Err(Error::DimensionMismatch { left: spec.dim, right: policy.base.len() });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Invalid("lambda must be finite and non-negative".into()));
    }
    let mut res = policy.base.clone();
    if lambda == 0.0 {
        return Ok(res);
    }
    let kappa = localization_scale(spec, h)?;
    let len = axis_lengths(spec);
    for a in 0..spec.dim {
        let cells = lambda * kappa[a] * len[a];
        if policy.adaptive {
            res[a] = res[a].max((POINTS_PER_WIDTH * cells).ceil() as usize);
        } else if (effective_count(res[a]) as f64) < MIN_POINTS_PER_WIDTH * cells {
            return Err(Error::Resolution {
                axis: a,
                have: res[a],
                need: (MIN_POINTS_PER_WIDTH * cells).ceil() as usize,
                lambda,
            });
        }
    }
    Ok(res)
}

#[derive(Clone, Debug)]
pub struct PartitionResult {
    pub lambda: f64,
    pub value: f64,
    pub resolution: Vec<usize>,
    pub error_bound: f64,
    pub per_chart: Vec<(usize, f64)>,
}

pub fn normalization(n: usize) -> f64 {
    (2.0 * PI).powf(-(n as f64) / 2.0)
}

/// Z_X(g, λh) = (2π)^{−n/2} ∫ partition_integrand.
pub fn partition_function(
    spec: &ManifoldSpec,
    h: &MorseFunction,
    lambda: f64,
    policy: &ResolutionPolicy,
    exec: &dyn Executor,
) -> Result<PartitionResult> {
    if spec.dim % 2 == 1 {
        return Err(Error::OddDimension(spec.dim));
    }
    let res = resolve_resolution(spec, h, lambda, policy)?;
    let f = |c: usize, x: &[f64]| integrand_at(spec, h, c, x, lambda).unwrap_or(f64::NAN);
    let int = integrate(spec, &res, &f, exec)?;
    if !int.value.is_finite() {
        return Err(Error::Invalid("partition integrand is not finite on the grid".into()));
    }
    let nrm = normalization(spec.dim);
    Ok(PartitionResult {
        lambda,
        value: nrm * int.value,
        resolution: int.resolution,
        error_bound: nrm * int.error_bound,
        per_chart: int.per_chart.into_iter().map(|(c, v)| (c, nrm * v)).collect(),
    })
}

/// (2π)^{−n/2} ∫ euler_density over the integration charts, with λ = 0 and no potential.
pub fn euler_integral(spec: &ManifoldSpec, resolution: &[usize], exec: &dyn Executor) -> Result<PartitionResult> {
    let f = |c: usize, x: &[f64]| {
        curvature_frame(&spec.charts[c].metric, x).and_then(|fr| euler_density(&fr)).unwrap_or(f64::NAN)
    };
    if spec.dim % 2 == 1 {
        return Err(Error::OddDimension(spec.dim));
    }
    let int = integrate(spec, resolution, &f, exec)?;
    if !int.value.is_finite() {
        return Err(Error::Invalid("Euler density is not finite on the grid".into()));
    }
    let nrm = normalization(spec.dim);
    Ok(PartitionResult {
        lambda: 0.0,
        value: nrm * int.value,
        resolution: int.resolution,
        error_bound: nrm * int.error_bound,
        per_chart: int.per_chart.into_iter().map(|(c, v)| (c, nrm * v)).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct Sweep {
    pub results: Vec<PartitionResult>,
    /// max |Z(λ) − Z(λ₀)| with λ₀ the first coupling in the list.
    pub max_spread: f64,
}

pub fn lambda_sweep(
    spec: &ManifoldSpec,
    h: &MorseFunction,
    lambdas: &[f64],
    policy: &ResolutionPolicy,
    exec: &dyn Executor,
) -> Result<Sweep> {
    let mut results = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        results.push(partition_function(spec, h, l, policy, exec)?);
    }
    let z0 = results.first().map(|r| r.value).unwrap_or(0.0);
    let max_spread = results.iter().map(|r| (r.value - z0).abs()).fold(0.0, f64::max);
    Ok(Sweep { results, max_spread })
}

/// P(a, x), the regularized lower incomplete gamma function, by its power series.
fn lower_gamma_regularized(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    // log Γ(a+1) for integer or half-integer a
    let half = (a - a.floor()).abs() > 1e-12;
    let (mut lg, mut b) = if half { (0.5 * PI.ln() - 2f64.ln(), 1.5) } else { (0.0, 1.0) };
    while b <= a + 1e-9 {
        lg += b.ln();
        b += 1.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= x / (a + k);
        sum += term;
        if term < 1e-17 * sum || k > 10_000.0 {
            break;
        }
        k += 1.0;
    }
    (a * x.ln() - x - lg).exp() * sum
}

/// P(χ²_n ≤ t).
pub fn chi_square_cdf(n: usize, t: f64) -> f64 {
    if n % 2 == 0 {
        let y = 0.5 * t;
        let mut term = 1.0;
        let mut s = 0.0;
        for k in 0..n / 2 {
            if k > 0 {
                term *= y / k as f64;
            }
            s += term;
        }
        1.0 - (-y).exp() * s
    } else {
        lower_gamma_regularized(0.5 * n as f64, 0.5 * t)
    }
}

pub const LOCAL_RADIUS: f64 = 1.0;

/// Flat-model contribution of one critical point over U_p = {‖H_p x‖ ≤ 1}:
/// sgn(det H)·P(χ²_n ≤ λ²), which tends to sgn(det H) as λ → ∞.
pub fn local_index_contribution(cp: &CriticalPoint, lambda: f64) -> Result<f64> {
    if !cp.morse_ok || cp.det.abs() <= crate::morse::TOL_MORSE {
        return Err(Error::DegenerateCritical { chart: cp.chart, point: cp.coords.clone(), det: cp.det });
    }
    let n = cp.hessian.nrows();
    Ok(cp.sign as f64 * chi_square_cdf(n, lambda * lambda * LOCAL_RADIUS * LOCAL_RADIUS))
}

/// Fraction of ∫|integrand| within geodesic distance `radius` of the critical set.
pub fn localization_mass(
    spec: &ManifoldSpec,
    h: &MorseFunction,
    lambda: f64,
    radius: f64,
    policy: &ResolutionPolicy,
    exec: &dyn Executor,
) -> Result<f64> {
    let geo = spec.geodesic.clone().ok_or_else(|| Error::Invalid(alloc::format!("{}: no geodesic distance", spec.name)))?;
    let crit: Vec<CriticalPoint> = find_critical_points(spec, h, DEFAULT_SEED_DENSITY)?;
    let res = resolve_resolution(spec, h, lambda, policy)?;
    let near = |c: usize, x: &[f64]| {
        let p = spec.charts[c].map.to_ambient(x);
        crit.iter().any(|cp| geo(&p, &cp.ambient) < radius)
    };
    let all = |c: usize, x: &[f64]| integrand_at(spec, h, c, x, lambda).map(f64::abs).unwrap_or(f64::NAN);
    let inside = |c: usize, x: &[f64]| if near(c, x) { all(c, x) } else { 0.0 };
    let total = integrate(spec, &res, &all, exec)?.value;
    let local = integrate(spec, &res, &inside, exec)?.value;
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Invalid("integrand mass is not positive".into()));
    }
    Ok(local / total)
}
