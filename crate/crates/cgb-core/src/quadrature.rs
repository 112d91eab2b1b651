//! Gauss–Legendre rules and a reduction whose rounding does not depend on how blocks are scheduled.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;


/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

pub const SINGLE_RULE_MAX: usize = 32;
pub const PANEL_ORDER: usize = 16;

/// Number of nodes actually used for a requested count: a single rule up to 32 points,
/// otherwise whole 16-point panels.
pub fn effective_count(requested: usize) -> usize {
    if requested <= SINGLE_RULE_MAX {
        requested
    } else {
        requested.div_ceil(PANEL_ORDER) * PANEL_ORDER
    }
}

/// Gauss–Legendre nodes on [a, b], composite for large counts.
pub fn rule_on(a: f64, b: f64, requested: usize) -> (Vec<f64>, Vec<f64>) {
    let n = effective_count(requested);
    let (panels, order) = if n <= SINGLE_RULE_MAX { (1, n) } else { (n / PANEL_ORDER, PANEL_ORDER) };
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for k in 0..order {
            nodes.push(lo + 0.5 * h * (x[k] + 1.0));
            weights.push(0.5 * h * w[k]);
        }
    }
    (nodes, weights)
}

/// Block length of the fixed-shape reduction.
pub const BLOCK: usize = 2048;

/// Recursive halving sum; the tree depends only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        let mut s = 0.0;
        for x in v {
            s += x;
        }
        return s;
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Runs one closure per block; implementations may run blocks concurrently but must return
/// results in block order.
pub trait Executor: Sync {
    fn map_blocks(&self, blocks: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_blocks(&self, blocks: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64> {
        (0..blocks).map(f).collect()
    }
}

/// Σ_{i<n} term(i) with blockwise pairwise summation.
pub fn reduce(n: usize, exec: &dyn Executor, term: &(dyn Fn(usize) -> f64 + Sync)) -> f64 {
    let blocks = n.div_ceil(BLOCK);
    let partial = exec.map_blocks(blocks, &|b| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        let vals: Vec<f64> = (lo..hi).map(term).collect();
        pairwise_sum(&vals)
    });
    pairwise_sum(&partial)
}
