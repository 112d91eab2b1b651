//! Acceptance run: one PASS/FAIL line per criterion, each at its stated tolerance and time budget.
//! Runs without the libtest harness so the lines always reach the output, one criterion after
//! another so that their timings do not overlap.

use std::time::{Duration, Instant};

use cgb_core::efts::{
    apply_d, apply_delta, check_cartan, concordance_solve, monomial_basis, parse_vector_field, Concordance, Monomial,
    SuperPolynomial, VectorField,
};
use cgb_core::geometry::{CurvatureFrame, MetricJet};
use cgb_core::grassmann::fermionic_gaussian;
use cgb_core::manifolds::{by_name, flat_torus, s2xs2, sphere, torus, ManifoldSpec, CATALOG_NAMES};
use cgb_core::morse::{find_critical_points, hopf_index_of, CriticalPoint};
use cgb_core::quadrature::Sequential;
use cgb_core::sigma::{
    action_coordinate, action_geometric, euler_integral, local_index_contribution, localization_mass,
    partition_function, ComponentField, PotentialJet, ResolutionPolicy,
};
use nalgebra::DMatrix;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_block = 0.0f64;
    for n in 1..=6 {
        let lams: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for (i, l) in lams.iter().enumerate() {
            m[(2 * i, 2 * i + 1)] = -l;
            m[(2 * i + 1, 2 * i)] = *l;
        }
        let expect: f64 = lams.iter().product();
        let got = match fermionic_gaussian(&m) {
            Ok(v) => v,
            Err(e) => return outcome(false, format!("n = {n}: {e}")),
        };
        worst_block = worst_block.max((got - expect).abs() / (expect.abs() * f64::EPSILON));
    }
    let mut worst_det = 0.0f64;
    for k in 0..100 {
        let size = 2 * (1 + k % 6);
        let mut m = DMatrix::zeros(size, size);
        for i in 0..size {
            for j in i + 1..size {
                let v: f64 = rng.gen_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        let pf = fermionic_gaussian(&m).unwrap_or(f64::NAN);
        let det = m.clone().lu().determinant();
        worst_det = worst_det.max((pf * pf - det).abs() / det.abs());
    }
    let pass = worst_block <= 16.0 && worst_det < 1e-8;
    outcome(pass, format!("block-diagonal error {worst_block:.1} ulp, max |Pf²−det|/|det| = {worst_det:.1e}"))
}

fn z_zero(spec: &ManifoldSpec, res: &[usize]) -> Result<f64, String> {
    let h = spec.morse("zero").map_err(|e| e.to_string())?;
    partition_function(spec, h, 0.0, &ResolutionPolicy::fixed(res.to_vec()), &Sequential)
        .map(|r| r.value)
        .map_err(|e| e.to_string())
}

fn criterion_2() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    let t = Instant::now();
    let surfaces = [
        (sphere(1.0), 2.0, "S²"),
        (torus(2.0, 1.0), 0.0, "T²"),
        (by_name("ellipsoid", &[1.0, 1.2, 0.8]).expect("ellipsoid"), 2.0, "ellipsoid"),
    ];
    for (spec, chi, label) in &surfaces {
        match z_zero(spec, &[128, 256]) {
            Ok(z) => {
                pass &= (z - chi).abs() < 1e-3;
                parts.push(format!("{label} {z:.6}"));
            }
            Err(e) => return outcome(false, format!("{label}: {e}")),
        }
    }
    let t_surf = t.elapsed();
    pass &= t_surf < Duration::from_secs(5);
    let t = Instant::now();
    let z4 = match euler_integral(&s2xs2(), &[24; 4], &Sequential) {
        Ok(r) => r.value,
        Err(e) => return outcome(false, format!("S²×S²: {e}")),
    };
    let t4 = t.elapsed();
    pass &= (z4 - 4.0).abs() < 1e-2 && t4 < Duration::from_secs(60);
    parts.push(format!("S²×S² {z4:.5} ({:.1} s + {:.1} s)", t_surf.as_secs_f64(), t4.as_secs_f64()));
    outcome(pass, parts.join(", "))
}

fn sorted_signs(mut pts: Vec<CriticalPoint>) -> Vec<i32> {
    pts.sort_by(|a, b| a.value.total_cmp(&b.value));
    pts.iter().map(|p| p.sign).collect()
}

fn criterion_3() -> Outcome {
    let mut pairs = 0;
    for name in CATALOG_NAMES {
        let spec = by_name(name, &[]).expect("catalog name resolves");
        let density = if spec.dim > 2 { 4 } else { 8 };
        for h in spec.morse_catalog.iter().filter(|h| h.name != "zero") {
            let pts = match find_critical_points(&spec, h, density) {
                Ok(p) => p,
                Err(e) => return outcome(false, format!("{}/{}: {e}", spec.name, h.name)),
            };
            if hopf_index_of(&pts) != spec.euler_char {
                return outcome(false, format!("{}/{}: index {} vs χ {}", spec.name, h.name, hopf_index_of(&pts), spec.euler_char));
            }
            pairs += 1;
        }
    }
    let s = sphere(1.0);
    let s_signs = sorted_signs(find_critical_points(&s, s.morse("height").unwrap(), 8).unwrap_or_default());
    let t = torus(2.0, 1.0);
    let t_signs = sorted_signs(find_critical_points(&t, t.morse("height").unwrap(), 8).unwrap_or_default());
    let pass = s_signs == [1, 1] && t_signs == [1, -1, -1, 1];
    outcome(pass, format!("{pairs} pairs, S² signs {s_signs:?}, torus signs {t_signs:?}"))
}

fn criterion_4() -> Outcome {
    let lambdas = [0.0, 1.0, 2.0, 5.0, 10.0];
    let mut parts = Vec::new();
    let mut pass = true;
    for (spec, h, base) in [(sphere(1.0), "height", vec![64, 128]), (flat_torus(), "cos+cos", vec![64, 64])] {
        let hf = spec.morse(h).unwrap();
        let policy = ResolutionPolicy::adaptive(base);
        let mut dev = 0.0f64;
        for &l in &lambdas {
            match partition_function(&spec, hf, l, &policy, &Sequential) {
                Ok(r) => dev = dev.max((r.value - spec.euler_char as f64).abs()),
                Err(e) => return outcome(false, format!("{} at λ = {l}: {e}", spec.name)),
            }
        }
        pass &= dev < 1e-2;
        parts.push(format!("{} max dev {dev:.1e}", spec.name));
    }
    let res = [128, 256];
    let z = euler_integral(&sphere(1.0), &res, &Sequential).map(|r| r.value);
    let zp = by_name("sphere-perturbed", &[]).map_err(|e| e.to_string()).and_then(|s| {
        euler_integral(&s, &res, &Sequential).map(|r| r.value).map_err(|e| e.to_string())
    });
    match (z, zp) {
        (Ok(z), Ok(zp)) => {
            pass &= (z - zp).abs() < 1e-2;
            parts.push(format!("(1+0.3 sinθ)g shifts Z(0) by {:.1e}", (z - zp).abs()));
        }
        _ => return outcome(false, "perturbed metric integral failed"),
    }
    outcome(pass, parts.join(", "))
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

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for n in [2usize, 3] {
        for _ in 0..100 {
            let jet = random_jet(&mut rng, n);
            let cf = ComponentField {
                x: vec![0.0; n],
                f: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                lambda: rng.gen_range(0.0..3.0),
                potential: PotentialJet {
                    value: rng.gen_range(-1.0..1.0),
                    grad: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    hess: sym(&mut rng, n),
                },
            };
            let r = CurvatureFrame::from_jet(&cf.x, &jet)
                .and_then(|fr| Ok((action_geometric(&fr, &cf)?, action_coordinate(&jet, &cf)?)));
            let (geo, coord) = match r {
                Ok(p) => p,
                Err(e) => return outcome(false, e.to_string()),
            };
            let scale = coord.terms().map(|(_, c)| c.abs()).fold(1.0, f64::max);
            worst = worst.max(geo.max_abs_diff(&coord) / scale);
        }
    }
    outcome(worst < 1e-9, format!("200 jets, max relative coefficient gap {worst:.1e}"))
}

fn mono(delta: usize, m: usize, k: &Monomial) -> SuperPolynomial {
    SuperPolynomial::from_terms(delta, m, [(k.clone(), q(1, 1))])
}

fn random_poly(rng: &mut ChaCha8Rng, delta: usize, m: usize, parity: u32) -> SuperPolynomial {
    let basis: Vec<Monomial> = monomial_basis(delta, m, 3).into_iter().filter(|k| k.parity() == parity).collect();
    let count = rng.gen_range(1..=4);
    SuperPolynomial::from_terms(
        delta,
        m,
        (0..count).map(|_| (basis[rng.gen_range(0..basis.len())].clone(), q(rng.gen_range(-6..=6), rng.gen_range(1..=4)))),
    )
}

fn criterion_6() -> Outcome {
    let mut relations = 0;
    for delta in [1usize, 2] {
        for m in [1usize, 2] {
            for k in monomial_basis(delta, m, 3) {
                let p = mono(delta, m, &k);
                let ok = (1..=delta).all(|i| apply_d(i, &p).and_then(|d| apply_d(i, &d)).map(|z| z.is_zero()).unwrap_or(false))
                    && (delta == 1
                        || apply_d(1, &apply_d(2, &p).unwrap())
                            .unwrap()
                            .add(&apply_d(2, &apply_d(1, &p).unwrap()).unwrap())
                            .is_zero());
                if !ok {
                    return outcome(false, format!("d relation fails on {p}"));
                }
                relations += 1;
            }
        }
    }
    let mut cartan = 0;
    for delta in [1usize, 2] {
        for m in [1usize, 2] {
            let mut ws = vec![VectorField::partial(delta, m, 0), VectorField::euler(delta, m)];
            if m == 2 {
                ws.push(parse_vector_field(delta, m, "x1*x2*d/dx1 + x2^2*d/dx2").unwrap());
            }
            for w in &ws {
                match check_cartan(delta, w, 3) {
                    Ok(r) if r.holds() => cartan += r.checked,
                    Ok(r) => return outcome(false, format!("Cartan fails for {w}: {:?}", r.counterexample)),
                    Err(e) => return outcome(false, e.to_string()),
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..50 {
        let delta = rng.gen_range(1..=2usize);
        let m = rng.gen_range(1..=2usize);
        let parity = (delta % 2) as u32;
        let e = random_poly(&mut rng, delta, m, parity);
        let minus = SuperPolynomial::constant(delta, m, q(rng.gen_range(-3..=3), 1));
        let plus = minus.add(&apply_delta(&e));
        let cap = plus.max_degree().max(minus.max_degree());
        match concordance_solve(&plus, &minus, cap) {
            Ok(Concordance::Witness(w)) if apply_delta(&w) == plus.sub(&minus) => {}
            other => return outcome(false, format!("round trip {trial} failed: {other:?}")),
        }
    }
    let infeasible = match concordance_solve(&SuperPolynomial::one(1, 1), &SuperPolynomial::zero(1, 1), 0) {
        Ok(Concordance::Infeasible(c)) => c.verify(1, &SuperPolynomial::one(1, 1)),
        _ => false,
    };
    outcome(
        infeasible,
        format!("{relations} monomials for d, {cartan} Cartan checks, 50 round trips, constant certified infeasible"),
    )
}

fn criterion_7() -> Outcome {
    let s = sphere(1.0);
    let h = s.morse("height").unwrap();
    let mass = match localization_mass(&s, h, 10.0, 0.5, &ResolutionPolicy::adaptive(vec![64, 128]), &Sequential) {
        Ok(m) => m,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut count = 0;
    while count < 20 {
        let n = if count % 2 == 0 { 2 } else { 4 };
        let hess = sym(&mut rng, n) * 3.0;
        let det = hess.determinant();
        if det.abs() < 1e-3 {
            continue;
        }
        let cp = CriticalPoint {
            chart: 0,
            coords: vec![0.0; n],
            ambient: vec![0.0; n],
            value: 0.0,
            gradient_norm: 0.0,
            hessian: hess,
            det,
            sign: if det > 0.0 { 1 } else { -1 },
            morse_ok: true,
        };
        let c = local_index_contribution(&cp, 10.0).unwrap_or(f64::NAN);
        worst = worst.max((c - det.signum()).abs());
        count += 1;
    }
    outcome(mass >= 0.99 && worst < 1e-6, format!("mass within 0.5 = {mass:.5}, max |local − sgn det| = {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 7] = [
        ("1 Pfaffian identities", criterion_1, Duration::from_secs(1)),
        ("2 Euler characteristic integrals", criterion_2, Duration::from_secs(65)),
        ("3 Hopf index", criterion_3, Duration::from_secs(1)),
        ("4 coupling and metric independence", criterion_4, Duration::from_secs(120)),
        ("5 covariant vs coordinate action", criterion_5, Duration::from_secs(10)),
        ("6 superfunction algebra", criterion_6, Duration::from_secs(5)),
        ("7 localization", criterion_7, Duration::from_secs(60)),
    ];
    let mut failed = Vec::new();
    for (name, run, budget) in criteria {
        let t = Instant::now();
        let o = run();
        let took = t.elapsed();
        let pass = o.pass && took < budget;
        println!("{} criterion {name}: {} [{:.2} s of {} s]", if pass { "PASS" } else { "FAIL" }, o.detail, took.as_secs_f64(), budget.as_secs());
        if !pass {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
