use std::f64::consts::PI;

use cgb_core::manifolds::{integrate, quadrature_grid, sphere, torus, POLAR_CAP};
use cgb_core::quadrature::{reduce, rule_on, Executor, Sequential, BLOCK};
use proptest::prelude::*;

#[test]
fn refinement_converges_at_least_fourfold() {
    let s = sphere(1.0);
    // ∫ sin θ · e^{cos θ} cos²φ over the integration box, exactly
    let exact = PI * ((POLAR_CAP.cos()).exp() - (-(POLAR_CAP.cos())).exp());
    let f = |_c: usize, x: &[f64]| x[0].sin() * x[0].cos().exp() * x[1].cos().powi(2);
    let mut prev = f64::INFINITY;
    for n in [2usize, 4, 8] {
        let v = integrate(&s, &[n, 2 * n], &f, &Sequential).unwrap().value;
        let err = (v - exact).abs();
        assert!(err * 4.0 <= prev, "n={n}: {err:e} after {prev:e}");
        prev = err;
    }
    assert!(prev < 1e-6);
}

#[test]
fn area_error_bounds_are_honest() {
    for r in [0.5, 1.0, 2.0] {
        let s = sphere(r);
        let area = |c: usize, x: &[f64]| s.charts[c].metric.metric(x).unwrap().determinant().sqrt();
        for res in [[8, 16], [16, 32], [32, 64], [64, 128], [128, 256]] {
            let i = integrate(&s, &res, &area, &Sequential).unwrap();
            let exact = 4.0 * PI * r * r;
            assert!((i.value - exact).abs() <= i.error_bound, "r={r} {res:?}: {} vs bound {}", i.value - exact, i.error_bound);
        }
        let i = integrate(&s, &[128, 256], &area, &Sequential).unwrap();
        assert!((i.value - 4.0 * PI * r * r).abs() < 1e-6);
    }
    let t = torus(2.0, 1.0);
    let area = |c: usize, x: &[f64]| t.charts[c].metric.metric(x).unwrap().determinant().sqrt();
    let i = integrate(&t, &[64, 64], &area, &Sequential).unwrap();
    assert!((i.value - 4.0 * PI * PI * 2.0).abs() < 1e-6);
    assert!((i.value - 8.0 * PI * PI).abs() <= i.error_bound.max(1e-12));
}

#[test]
fn grid_descriptor_and_size() {
    let s = sphere(1.0);
    let g = quadrature_grid(&s, &[128, 256]).unwrap();
    assert_eq!(g.descriptor(), "128x256");
    assert_eq!(g.len(), 128 * 256);
    assert!(quadrature_grid(&s, &[1, 256]).is_err());
    assert!(quadrature_grid(&s, &[16, 16, 16]).is_err());
}

/// Runs blocks in reverse, like an executor that finishes them in a different order.
struct Reversed;

impl Executor for Reversed {
    fn map_blocks(&self, blocks: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64> {
        let mut v: Vec<f64> = (0..blocks).rev().map(f).collect();
        v.reverse();
        v
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reduction_independent_of_schedule(n in 1usize..(5 * BLOCK), seed in 0u64..1000) {
        let term = |i: usize| ((i as f64 + seed as f64) * 0.731).sin() * 1e3f64.powi((i % 7) as i32 - 3);
        prop_assert_eq!(reduce(n, &Sequential, &term).to_bits(), reduce(n, &Reversed, &term).to_bits());
    }

    #[test]
    fn rules_integrate_low_degree_exactly(n in 2usize..80, a in -3.0f64..0.0, len in 0.1f64..4.0) {
        let b = a + len;
        let (x, w) = rule_on(a, b, n);
        prop_assert_eq!(x.len(), w.len());
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x * x).sum();
        let exact = (b.powi(4) - a.powi(4)) / 4.0;
        prop_assert!((s - exact).abs() < 1e-11 * (1.0 + exact.abs()));
        prop_assert!(x.iter().all(|v| *v > a && *v < b));
    }
}
