//! Critical points of Morse functions on catalog manifolds and the Hopf index of ∇h.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::manifolds::{ManifoldSpec, MorseFunction};

pub const TOL_GRAD: f64 = 1e-10;
pub const TOL_MORSE: f64 = 1e-8;
pub const DEDUP_FACTOR: f64 = 1e-4;
pub const NEWTON_MAX_STEPS: usize = 50;
pub const DEFAULT_SEED_DENSITY: usize = 8;

#[derive(Clone, Debug)]
pub struct CriticalPoint {
    pub chart: usize,
    pub coords: Vec<f64>,
    pub ambient: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    /// Coordinate Hessian; equals the covariant one since ∂h = 0 here.
    pub hessian: DMatrix<f64>,
    pub det: f64,
    pub sign: i32,
    pub morse_ok: bool,
}

impl CriticalPoint {
    /// Number of negative Hessian eigenvalues.
    pub fn morse_index(&self) -> usize {
        self.hessian.clone().symmetric_eigenvalues().iter().filter(|v| **v < 0.0).count()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton on the coordinate gradient. Directions along which the chart degenerates
/// (zero Hessian singular values) are dropped by solving in the least-squares sense.
fn newton(spec: &ManifoldSpec, h: &MorseFunction, chart: usize, seed: &[f64]) -> Option<Vec<f64>> {
    let dom = &spec.charts[chart].metric.domain;
    let f = &h.fields[chart];
    let max_step = 0.25 * dom.scale();
    let mut x = seed.to_vec();
    for _ in 0..NEWTON_MAX_STEPS {
        let g = f.gradient(&x);
        let gn = norm(&g);
        if !gn.is_finite() {
            return None;
        }
        if gn < TOL_GRAD {
            return Some(x);
        }
        let hess = f.hessian(&x);
        let scale = hess.amax().max(1e-300);
        let rhs = -DVector::from_column_slice(&g);
        let dx = hess.svd(true, true).solve(&rhs, 1e-12 * scale).ok()?;
        let len = dx.norm();
        if !len.is_finite() || len == 0.0 {
            return None;
        }
        let dx = if len > max_step { dx * (max_step / len) } else { dx };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let mut y: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + t * d).collect();
            dom.wrap(&mut y);
            if dom.contains(&y) && norm(&f.gradient(&y)) < gn {
                x = y;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (norm(&f.gradient(&x)) < TOL_GRAD).then_some(x)
}

fn seed_grid(lo: &[f64], hi: &[f64], density: usize) -> Vec<Vec<f64>> {
    let n = lo.len();
    let total = density.pow(n as u32);
    (0..total)
        .map(|mut i| {
            let mut x = vec![0.0; n];
            for a in (0..n).rev() {
                let k = i % density;
                i /= density;
                x[a] = lo[a] + (k as f64 + 0.5) / density as f64 * (hi[a] - lo[a]);
            }
            x
        })
        .collect()
}

/// Zeros of ∇h found from a `seed_density`^n grid in every chart, kept only in the chart that
/// owns them, deduplicated and sorted by decreasing h.
pub fn find_critical_points(spec: &ManifoldSpec, h: &MorseFunction, seed_density: usize) -> Result<Vec<CriticalPoint>> {
    if h.fields.len() != spec.charts.len() {
        return Err(Error::DimensionMismatch { left: spec.charts.len(), right: h.fields.len() });
    }
    if seed_density == 0 {
        return Err(Error::Invalid("seed density must be positive".into()));
    }
    let mut found: Vec<(usize, Vec<f64>)> = Vec::new();
    for (c, chart) in spec.charts.iter().enumerate() {
        let dom = &chart.metric.domain;
        let r_dedup = DEDUP_FACTOR * dom.scale();
        for seed in seed_grid(&dom.lo, &dom.hi, seed_density) {
            let Some(x) = newton(spec, h, c, &seed) else { continue };
            if (spec.owner)(&chart.map.to_ambient(&x)) != c {
                continue;
            }
            if found.iter().any(|(c2, y)| *c2 == c && dom.distance(&x, y) < r_dedup) {
                continue;
            }
            found.push((c, x));
        }
    }
    let mut out = Vec::with_capacity(found.len());
    for (c, x) in found {
        let f = &h.fields[c];
        let hess = f.hessian(&x);
        let hess = (&hess + hess.transpose()) * 0.5;
        let det = hess.determinant();
        let morse_ok = det.abs() > TOL_MORSE;
        if !morse_ok {
            return Err(Error::DegenerateCritical { chart: c, point: x, det });
        }
        out.push(CriticalPoint {
            chart: c,
            ambient: spec.charts[c].map.to_ambient(&x),
            value: f.value(&x),
            gradient_norm: norm(&f.gradient(&x)),
            sign: if det > 0.0 { 1 } else { -1 },
            coords: x,
            hessian: hess,
            det,
            morse_ok,
        });
    }
    out.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.chart.cmp(&b.chart))
            .then_with(|| a.coords.partial_cmp(&b.coords).unwrap_or(core::cmp::Ordering::Equal))
    });
    Ok(out)
}

pub fn hopf_index_of(points: &[CriticalPoint]) -> i64 {
    points.iter().map(|p| p.sign as i64).sum()
}

pub fn hopf_index(spec: &ManifoldSpec, h: &MorseFunction) -> Result<i64> {
    Ok(hopf_index_of(&find_critical_points(spec, h, DEFAULT_SEED_DENSITY)?))
}
