//! The component action three ways: covariant form, coordinate expansion, and a direct
//! superspace computation (Taylor-expand g(Φ), h(Φ) in the odd coordinates θ₁, θ₂ and
//! integrate them out).

use cgb_core::geometry::{phi1, phi2, CurvatureFrame, MetricJet};
use cgb_core::grassmann::GrassmannElement;
use cgb_core::sigma::{action_coordinate, action_geometric, action_geometric_with, ActionConventions, ComponentField, PotentialJet};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

fn random_jet(rng: &mut ChaCha8Rng, n: usize) -> MetricJet {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let g = &a * a.transpose() + DMatrix::identity(n, n) * n as f64;
    let dg = (0..n).map(|_| sym(rng, n)).collect();
    let mut ddg = vec![DMatrix::zeros(n, n); n * n];
    for k in 0..n {
        for l in k..n {
            let m = sym(rng, n);
            ddg[k * n + l] = m.clone();
            ddg[l * n + k] = m;
        }
    }
    MetricJet { g, dg, ddg, one_sided: false }
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> ComponentField {
    ComponentField {
        x: vec![0.0; n],
        f: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        lambda: rng.gen_range(0.0..3.0),
        potential: PotentialJet {
            value: rng.gen_range(-1.0..1.0),
            grad: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            hess: sym(rng, n),
        },
    }
}

/// Γ^k_ij straight from the textbook formula.
fn christoffel(jet: &MetricJet) -> Vec<f64> {
    let n = jet.dim();
    let gi = jet.g.clone().try_inverse().unwrap();
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += 0.5 * gi[(k, l)] * (jet.dg[i][(j, l)] + jet.dg[j][(i, l)] - jet.dg[l][(i, j)]);
                }
                out[(k * n + i) * n + j] = s;
            }
        }
    }
    out
}

/// ∂/∂θ from the left.
fn left_derivative(e: &GrassmannElement, gen: usize) -> GrassmannElement {
    let bit = 1u64 << gen;
    let mut out = GrassmannElement::zero(e.generator_count());
    for (m, c) in e.terms() {
        if m & bit == 0 {
            continue;
        }
        let sign = if (m & (bit - 1)).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        out.add_term(m & !bit, sign * c);
    }
    out
}

fn superspace_action(jet: &MetricJet, cf: &ComponentField) -> GrassmannElement {
    let n = jet.dim();
    let gens = 2 * n + 2;
    let (t1, t2) = (2 * n, 2 * n + 1);
    let gen = |i| GrassmannElement::generator(gens, i);
    let c = |v: f64| GrassmannElement::scalar(gens, v);
    let gamma = christoffel(jet);
    let theta12 = &gen(t1) * &gen(t2);
    // Φ^k − x^k
    let delta: Vec<GrassmannElement> = (0..n)
        .map(|k| {
            let mut e = c(cf.f[k]);
            for i in 0..n {
                for j in 0..n {
                    e = &e + &(&gen(phi1(i)) * &gen(phi2(j))).scale(&gamma[(k * n + i) * n + j]);
                }
            }
            &(&(&gen(t1) * &gen(phi1(k))) + &(&gen(t2) * &gen(phi2(k)))) + &(&theta12 * &e)
        })
        .collect();
    let d1: Vec<_> = delta.iter().map(|d| left_derivative(d, t1)).collect();
    let d2: Vec<_> = delta.iter().map(|d| left_derivative(d, t2)).collect();
    let mut lag = GrassmannElement::zero(gens);
    for i in 0..n {
        for j in 0..n {
            let mut gij = c(jet.g[(i, j)]);
            for k in 0..n {
                gij = &gij + &delta[k].scale(&jet.dg[k][(i, j)]);
                for l in 0..n {
                    gij = &gij + &(&delta[k] * &delta[l]).scale(&(0.5 * jet.ddg[k * n + l][(i, j)]));
                }
            }
            lag = &lag + &(&(&gij * &d1[i]) * &d2[j]).scale(&0.5);
        }
    }
    let mut pot = c(cf.potential.value);
    for k in 0..n {
        pot = &pot + &delta[k].scale(&cf.potential.grad[k]);
        for l in 0..n {
            pot = &pot + &(&delta[k] * &delta[l]).scale(&(0.5 * cf.potential.hess[(k, l)]));
        }
    }
    lag = &lag - &pot.scale(&cf.lambda);
    lag.berezin_partial(&[t1, t2]).unwrap()
}

/// Same element over 2n + 2 generators (θ's unused).
fn widen(e: &GrassmannElement, gens: usize) -> GrassmannElement {
    let mut out = GrassmannElement::zero(gens);
    for (m, c) in e.terms() {
        out.add_term(m, *c);
    }
    out
}

fn scale_of(e: &GrassmannElement) -> f64 {
    e.terms().map(|(_, c)| c.abs()).fold(1.0, f64::max)
}

#[test]
fn three_routes_agree_on_random_jets() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [2usize, 3] {
        for trial in 0..100 {
            let jet = random_jet(&mut rng, n);
            let cf = random_field(&mut rng, n);
            let frame = CurvatureFrame::from_jet(&cf.x, &jet).unwrap();
            let geo = action_geometric(&frame, &cf).unwrap();
            let coord = action_coordinate(&jet, &cf).unwrap();
            let tol = 1e-9 * scale_of(&coord);
            let d = geo.max_abs_diff(&coord);
            assert!(d < tol, "n={n} trial {trial}: geometric vs coordinate differ by {d:e}");
            let sup = superspace_action(&jet, &cf);
            let d = widen(&coord, 2 * n + 2).max_abs_diff(&sup);
            assert!(d < tol, "n={n} trial {trial}: coordinate vs superspace differ by {d:e}");
        }
    }
}

#[test]
fn flipped_curvature_sign_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let jet = random_jet(&mut rng, 2);
    let cf = random_field(&mut rng, 2);
    let frame = CurvatureFrame::from_jet(&cf.x, &jet).unwrap();
    let bad = action_geometric_with(&frame, &cf, ActionConventions { curvature_sign: -1.0 }).unwrap();
    assert!(bad.max_abs_diff(&action_coordinate(&jet, &cf).unwrap()) > 1e-3);
}

#[test]
fn flat_metric_action_is_textbook() {
    // g = δ: S = ½|F|² − λ(∂h·F − Σ ∂_k∂_l h φ₁^k φ₂^l)
    let jet = MetricJet::flat(2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cf = random_field(&mut rng, 2);
    let s = action_coordinate(&jet, &cf).unwrap();
    let mut expect = GrassmannElement::scalar(4, 0.0);
    let mut s0 = 0.0;
    for k in 0..2 {
        s0 += 0.5 * cf.f[k] * cf.f[k] - cf.lambda * cf.potential.grad[k] * cf.f[k];
        for l in 0..2 {
            let m = GrassmannElement::monomial(4, &[phi1(k), phi2(l)], cf.lambda * cf.potential.hess[(k, l)]);
            expect = &expect + &m;
        }
    }
    expect = &expect + &GrassmannElement::scalar(4, s0);
    assert!(s.max_abs_diff(&expect) < 1e-13);
}
