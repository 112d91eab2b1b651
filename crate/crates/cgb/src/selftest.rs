//! Fast invariant suite behind `cgb selftest`.

use cgb_core::efts::{self, apply_d, apply_delta, check_cartan, Concordance, SuperPolynomial, VectorField};
use cgb_core::geometry::{curvature_frame, CurvatureFrame, MetricJet};
use cgb_core::grassmann::{fermionic_gaussian, fermionic_gaussian_rational, GrassmannElement};
use cgb_core::manifolds::{by_name, catalog, sphere};
use cgb_core::morse::{find_critical_points, hopf_index_of};
use cgb_core::quadrature::{reduce, Executor, Sequential, BLOCK};
use cgb_core::scalar::rational;
use cgb_core::sigma::{
    action_coordinate, action_geometric_with, euler_density, euler_integral, partition_integrand, ActionConventions,
    ComponentField, PotentialJet,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::Rayon;
use crate::manifest::Backend;

#[derive(Clone, Debug)]
pub struct Check {
    pub group: &'static str,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Copy, Debug)]
pub struct Options {
    pub seed: u64,
    pub backend: Backend,
    /// Flips the curvature sign in the covariant action; the two-route check must then fail.
    pub inject_sign_fault: bool,
}

fn sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

fn random_jet(rng: &mut ChaCha8Rng, n: usize) -> MetricJet {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
    let g = &a * a.transpose() + DMatrix::identity(n, n);
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

fn check(group: &'static str, name: &'static str, r: Result<String, String>) -> Check {
    match r {
        Ok(detail) => Check { group, name, pass: true, detail },
        Err(detail) => Check { group, name, pass: false, detail },
    }
}

fn block_gaussian(backend: Backend, rng: &mut ChaCha8Rng) -> Result<String, String> {
    for n in 1..=6usize {
        match backend {
            Backend::Float => {
                let lams: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
                let mut q = DMatrix::zeros(2 * n, 2 * n);
                for (i, l) in lams.iter().enumerate() {
                    q[(2 * i, 2 * i + 1)] = -l;
                    q[(2 * i + 1, 2 * i)] = *l;
                }
                let want: f64 = lams.iter().product();
                let got = fermionic_gaussian(&q).map_err(|e| e.to_string())?;
                if (got - want).abs() > 8.0 * f64::EPSILON * want {
                    return Err(format!("n={n}: {got} vs {want}"));
                }
            }
            Backend::Rational => {
                let mut q = vec![vec![rational(0, 1); 2 * n]; 2 * n];
                let mut want = rational(1, 1);
                for i in 0..n {
                    let l = rational(rng.gen_range(1..20), rng.gen_range(1..7));
                    q[2 * i][2 * i + 1] = -l.clone();
                    q[2 * i + 1][2 * i] = l.clone();
                    want *= l;
                }
                let got = fermionic_gaussian_rational(&q).map_err(|e| e.to_string())?;
                if got != want {
                    return Err(format!("n={n}: {got} vs {want}"));
                }
            }
        }
    }
    Ok(match backend {
        Backend::Float => "n ≤ 6 to rounding".into(),
        Backend::Rational => "n ≤ 6 exact".into(),
    })
}

fn pf_squared(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0f64;
    for k in 0..30 {
        let size = 2 * (1 + k % 6);
        let mut q = DMatrix::zeros(size, size);
        for i in 0..size {
            for j in i + 1..size {
                let v: f64 = rng.gen_range(-1.0..1.0);
                q[(i, j)] = v;
                q[(j, i)] = -v;
            }
        }
        let pf = fermionic_gaussian(&q).map_err(|e| e.to_string())?;
        let det = q.clone().lu().determinant();
        worst = worst.max((pf * pf - det).abs() / det.abs().max(1e-300));
    }
    if worst < 1e-8 {
        Ok(format!("max rel. error {worst:.1e}"))
    } else {
        Err(format!("max rel. error {worst:.1e}"))
    }
}

fn exp_inverse(rng: &mut ChaCha8Rng) -> Result<String, String> {
    for _ in 0..20 {
        let mut a = GrassmannElement::zero(6);
        for _ in 0..4 {
            let m: u64 = rng.gen_range(1..64);
            if m.count_ones() % 2 == 0 {
                a.add_term(m, rational(rng.gen_range(-5..6), rng.gen_range(1..5)));
            }
        }
        let e = a.exp_even().map_err(|e| e.to_string())?;
        let f = (-&a).exp_even().map_err(|e| e.to_string())?;
        if e.multiply(&f).map_err(|e| e.to_string())? != GrassmannElement::one(6) {
            return Err("exp(a)·exp(−a) ≠ 1".into());
        }
    }
    Ok("exact".into())
}

fn sphere_golden() -> Result<String, String> {
    let s = sphere(1.0);
    let t = 0.7f64;
    let f = curvature_frame(&s.charts[0].metric, &[t, 1.0]).map_err(|e| e.to_string())?;
    let r = f.r(0, 1, 0, 1) - t.sin().powi(2);
    let g = f.gamma2(0, 1, 1) + t.sin() * t.cos();
    if r.abs() < 1e-12 && g.abs() < 1e-12 {
        Ok("R_θφθφ = sin²θ, Γ^θ_φφ = −sinθcosθ".into())
    } else {
        Err(format!("R off by {r:e}, Γ off by {g:e}"))
    }
}

fn catalog_symmetries(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut worst = 0.0f64;
    for spec in catalog() {
        for chart in &spec.charts {
            let d = &chart.metric.domain;
            for _ in 0..20 {
                let x: Vec<f64> = (0..d.dim())
                    .map(|a| {
                        let m = if d.periodic[a] { 0.0 } else { 0.02 * d.length(a) };
                        rng.gen_range(d.lo[a] + m..d.hi[a] - m)
                    })
                    .collect();
                let f = curvature_frame(&chart.metric, &x).map_err(|e| e.to_string())?;
                worst = worst.max(f.symmetry_residual()).max(f.bianchi_residual());
            }
        }
    }
    if worst < 1e-10 {
        Ok(format!("max residual {worst:.1e}"))
    } else {
        Err(format!("max residual {worst:.1e}"))
    }
}

fn two_route(rng: &mut ChaCha8Rng, fault: bool) -> Result<String, String> {
    let conv = ActionConventions { curvature_sign: if fault { -1.0 } else { 1.0 } };
    let mut worst = 0.0f64;
    for n in [2usize, 3] {
        for _ in 0..20 {
            let jet = random_jet(rng, n);
            let cf = ComponentField {
                x: vec![0.0; n],
                f: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                lambda: rng.gen_range(0.0..3.0),
                potential: PotentialJet { value: 0.0, grad: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), hess: sym(rng, n) },
            };
            let frame = CurvatureFrame::from_jet(&cf.x, &jet).map_err(|e| e.to_string())?;
            let a = action_geometric_with(&frame, &cf, conv).map_err(|e| e.to_string())?;
            let b = action_coordinate(&jet, &cf).map_err(|e| e.to_string())?;
            worst = worst.max(a.max_abs_diff(&b));
        }
    }
    if worst < 1e-9 {
        Ok(format!("max coefficient gap {worst:.1e}"))
    } else {
        Err(format!("max coefficient gap {worst:.1e}"))
    }
}

fn reduction(rng: &mut ChaCha8Rng) -> Result<String, String> {
    for n in [2usize, 4] {
        for _ in 0..10 {
            let frame = CurvatureFrame::from_jet(&vec![0.0; n], &random_jet(rng, n)).map_err(|e| e.to_string())?;
            let e = euler_density(&frame).map_err(|e| e.to_string())?;
            let pot = PotentialJet { value: 0.0, grad: vec![0.5; n], hess: sym(rng, n) };
            let z = partition_integrand(&frame, &pot, 0.0).map_err(|e| e.to_string())?;
            if (z - e).abs() > 1e-12 * e.abs().max(1.0) {
                return Err(format!("n={n}: {z} vs {e}"));
            }
        }
    }
    Ok("λ = 0 integrand = Euler density".into())
}

fn sphere_z(exec: &dyn Executor) -> Result<String, String> {
    let z = euler_integral(&sphere(1.0), &[32, 64], exec).map_err(|e| e.to_string())?.value;
    if (z - 2.0).abs() < 1e-3 {
        Ok(format!("Z = {z:.9}"))
    } else {
        Err(format!("Z = {z}"))
    }
}

fn hopf_catalog() -> Result<String, String> {
    let mut specs = catalog();
    specs.push(by_name("sphere-perturbed", &[]).map_err(|e| e.to_string())?);
    let mut count = 0;
    for spec in specs {
        for h in &spec.morse_catalog {
            if h.name == "zero" {
                continue;
            }
            let density = if spec.dim > 2 { 4 } else { 8 };
            let pts = find_critical_points(&spec, h, density).map_err(|e| e.to_string())?;
            let idx = hopf_index_of(&pts);
            if idx != spec.euler_char {
                return Err(format!("{}/{}: index {idx}, χ = {}", spec.name, h.name, spec.euler_char));
            }
            count += 1;
        }
    }
    Ok(format!("{count} (manifold, h) pairs"))
}

fn d_relations() -> Result<String, String> {
    for m in [1usize, 2] {
        for k in efts::monomial_basis(2, m, 3) {
            let p = SuperPolynomial::from_terms(2, m, [(k, rational(1, 1))]);
            let d1 = apply_d(1, &p).map_err(|e| e.to_string())?;
            let d2 = apply_d(2, &p).map_err(|e| e.to_string())?;
            let ok = apply_d(1, &d1).map_err(|e| e.to_string())?.is_zero()
                && apply_d(2, &d2).map_err(|e| e.to_string())?.is_zero()
                && apply_d(1, &d2).map_err(|e| e.to_string())?.add(&apply_d(2, &d1).map_err(|e| e.to_string())?).is_zero();
            if !ok {
                return Err(format!("fails on {p}"));
            }
        }
    }
    Ok("d_i² = 0, d₁d₂ = −d₂d₁".into())
}

fn cartan() -> Result<String, String> {
    let mut checked = 0;
    for delta in [1usize, 2] {
        for w in [VectorField::partial(delta, 1, 0), VectorField::euler(delta, 1), VectorField::euler(delta, 2)] {
            let r = check_cartan(delta, &w, 3).map_err(|e| e.to_string())?;
            if let Some((k, lhs, rhs)) = r.counterexample {
                return Err(format!("δ={delta} w={w}: {k:?} gives {lhs} vs {rhs}"));
            }
            checked += r.checked;
        }
    }
    Ok(format!("{checked} monomials"))
}

fn concordance() -> Result<String, String> {
    let t = efts::parse(2, 1, "2*x1*D21x1 - 2*D1x1*D2x1").map_err(|e| e.to_string())?;
    let x2 = efts::parse(2, 1, "x1^2").map_err(|e| e.to_string())?;
    if apply_delta(&x2) != t {
        return Err("Δ(x²) mismatch".into());
    }
    match efts::concordance_solve(&t, &SuperPolynomial::zero(2, 1), 2).map_err(|e| e.to_string())? {
        Concordance::Witness(e) if apply_delta(&e) == t => {}
        other => return Err(format!("unexpected {other:?}")),
    }
    let one = SuperPolynomial::one(1, 1);
    match efts::concordance_solve(&one, &SuperPolynomial::zero(1, 1), 0).map_err(|e| e.to_string())? {
        Concordance::Infeasible(c) if c.verify(1, &one) => Ok("witness for Δ(x²), certificate for 1".into()),
        other => Err(format!("unexpected {other:?}")),
    }
}

fn parallel_reduce() -> Result<String, String> {
    let n = 9 * BLOCK + 3;
    let term = |i: usize| ((i as f64) * 0.123).sin() * (1.0 + (i % 13) as f64).ln();
    let s = reduce(n, &Sequential, &term).to_bits();
    for t in [1, 2, 4] {
        if reduce(n, &Rayon::new(Some(t))?, &term).to_bits() != s {
            return Err(format!("{t} threads differ"));
        }
    }
    Ok("1, 2, 4 threads bitwise equal".into())
}

pub fn run(opts: Options, exec: &dyn Executor) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    vec![
        check("grassmann", "block-diagonal Gaussian = ∏λ", block_gaussian(opts.backend, &mut rng)),
        check("grassmann", "Pf² = det", pf_squared(&mut rng)),
        check("grassmann", "exp(a)·exp(−a) = 1", exp_inverse(&mut rng)),
        check("geometry", "round sphere golden values", sphere_golden()),
        check("geometry", "Riemann symmetries and Bianchi", catalog_symmetries(&mut rng)),
        check("sigma", "two-route action", two_route(&mut rng, opts.inject_sign_fault)),
        check("sigma", "λ = 0 reduction", reduction(&mut rng)),
        check("sigma", "Z(S²) = 2", sphere_z(exec)),
        check("morse", "Hopf index = χ", hopf_catalog()),
        check("efts", "d relations", d_relations()),
        check("efts", "Cartan identity", cartan()),
        check("efts", "concordance", concordance()),
        check("exec", "parallel reduction", parallel_reduce()),
    ]
}
