use cgb_core::manifolds::{by_name, catalog, s2xs2, sphere, torus, ManifoldSpec};
use cgb_core::morse::{find_critical_points, hopf_index, hopf_index_of, CriticalPoint, DEFAULT_SEED_DENSITY};
use cgb_core::Error;

fn all_specs() -> Vec<ManifoldSpec> {
    let mut v = catalog();
    v.push(by_name("sphere-perturbed", &[]).unwrap());
    v.push(by_name("ellipsoid-perturbed", &[]).unwrap());
    v
}

fn morse_pairs() -> Vec<(ManifoldSpec, String)> {
    let mut out = Vec::new();
    for s in all_specs() {
        for name in s.morse_names() {
            if name != "zero" {
                out.push((s.clone(), name.to_string()));
            }
        }
    }
    out
}

fn seed_for(spec: &ManifoldSpec) -> usize {
    if spec.dim > 2 {
        4
    } else {
        DEFAULT_SEED_DENSITY
    }
}

fn same_set(a: &[CriticalPoint], b: &[CriticalPoint]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(p, q)| {
            p.sign == q.sign && p.ambient.iter().zip(&q.ambient).all(|(x, y)| (x - y).abs() < 1e-8)
        })
}

#[test]
fn hopf_index_is_euler_characteristic() {
    for (spec, name) in morse_pairs() {
        let h = spec.morse(&name).unwrap();
        let pts = find_critical_points(&spec, h, seed_for(&spec)).unwrap();
        assert_eq!(hopf_index_of(&pts), spec.euler_char, "{}/{name}", spec.name);
        for p in &pts {
            assert!(p.gradient_norm < 1e-10 && p.morse_ok);
        }
    }
}

#[test]
fn classical_sign_tables() {
    let s = sphere(1.0);
    let pts = find_critical_points(&s, s.morse("height").unwrap(), 8).unwrap();
    assert_eq!(pts.iter().map(|p| p.sign).collect::<Vec<_>>(), [1, 1]);
    let t = torus(2.0, 1.0);
    let pts = find_critical_points(&t, t.morse("height").unwrap(), 8).unwrap();
    assert_eq!(pts.iter().map(|p| p.sign).collect::<Vec<_>>(), [1, -1, -1, 1]);
    assert_eq!(pts.iter().map(|p| p.morse_index()).collect::<Vec<_>>(), [2, 1, 1, 0]);
    let heights: Vec<f64> = pts.iter().map(|p| p.value).collect();
    for (got, want) in heights.iter().zip([3.0, 1.0, -1.0, -3.0]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn product_of_spheres() {
    let p = s2xs2();
    let pts = find_critical_points(&p, p.morse("height").unwrap(), 4).unwrap();
    assert_eq!(pts.len(), 4);
    assert!(pts.iter().all(|c| c.sign == 1));
    assert_eq!(hopf_index_of(&pts), 4);
    assert_eq!(pts.iter().map(|c| c.morse_index()).collect::<Vec<_>>(), [4, 2, 2, 0]);
}

#[test]
fn seed_density_stability() {
    for (spec, name) in morse_pairs() {
        let h = spec.morse(&name).unwrap();
        let k = seed_for(&spec);
        let a = find_critical_points(&spec, h, k).unwrap();
        let b = find_critical_points(&spec, h, 2 * k).unwrap();
        assert!(same_set(&a, &b), "{}/{name}: {} vs {} points", spec.name, a.len(), b.len());
    }
}

#[test]
fn metric_rescaling_changes_nothing() {
    for (spec, name) in morse_pairs() {
        let scaled = spec.with_scaled_metric(2.0);
        let k = seed_for(&spec);
        let a = find_critical_points(&spec, spec.morse(&name).unwrap(), k).unwrap();
        let b = find_critical_points(&scaled, scaled.morse(&name).unwrap(), k).unwrap();
        assert!(same_set(&a, &b), "{}/{name}", spec.name);
    }
}

#[test]
fn negated_function_has_same_index() {
    for (spec, name) in morse_pairs() {
        let h = spec.morse(&name).unwrap();
        let k = seed_for(&spec);
        let a = hopf_index_of(&find_critical_points(&spec, h, k).unwrap());
        let b = hopf_index_of(&find_critical_points(&spec, &h.negated(), k).unwrap());
        assert_eq!(a, b, "{}/{name}", spec.name);
    }
}

#[test]
fn degenerate_function_is_reported() {
    let s = sphere(1.0);
    assert!(matches!(hopf_index(&s, s.morse("zero").unwrap()), Err(Error::DegenerateCritical { .. })));
}
