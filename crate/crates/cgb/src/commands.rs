use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cgb_core::efts::{self, Concordance, SuperPolynomial};
use cgb_core::manifolds::{resolution_descriptor, ManifoldSpec};
use cgb_core::morse::find_critical_points;
use cgb_core::quadrature::Executor;
use cgb_core::sigma::{euler_integral, partition_function, PartitionResult, ResolutionPolicy};
use serde_json::{json, Value};

use crate::manifest::{Backend, RunManifest};
use crate::selftest;

/// Exit statuses: 0 pass, 1 tolerance (or check) failure, 2 usage or configuration error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
        }
    }
}

pub const USAGE_EXIT: u8 = 2;
pub const CSV_HEADER: &str = "# cgb-sweep v1";
pub const CSV_COLUMNS: &str = "lambda,Z,error_bound,resolution";

type Outcome = Result<Status, String>;

fn io<T>(r: std::io::Result<T>) -> Result<T, String> {
    r.map_err(|e| format!("i/o: {e}"))
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn float_only(m: &RunManifest, what: &str) -> Result<(), String> {
    if m.backend == Backend::Rational {
        return Err(format!("the rational backend applies to selftest only, not {what}"));
    }
    Ok(())
}

fn prepare(m: &RunManifest, what: &str) -> Result<ManifoldSpec, String> {
    m.validate()?;
    float_only(m, what)?;
    m.spec()
}

/// (2π)^{−n/2}∫Pf over the manifold against its known Euler characteristic.
pub fn cmd_pfaffian(m: &RunManifest, exec: &dyn Executor, out: &mut dyn Write) -> Outcome {
    let spec = prepare(m, "pfaffian")?;
    let res = m.base_resolution(&spec);
    let r = euler_integral(&spec, &res, exec).map_err(|e| e.to_string())?;
    let abs_error = (r.value - spec.euler_char as f64).abs();
    let pass = abs_error < m.tolerance;
    let v = json!({
        "manifold": spec.name,
        "chi_known": spec.euler_char,
        "chi_computed": r.value,
        "abs_error": abs_error,
        "error_bound": r.error_bound,
        "resolution": resolution_descriptor(&r.resolution),
        "tolerance": m.tolerance,
        "pass": pass,
    });
    let text = pretty(&v);
    io(out.write_all(text.as_bytes()))?;
    if let Some(p) = &m.out {
        write_file(Path::new(p), &text)?;
    }
    Ok(Status::from_pass(pass))
}

fn fmt_coords(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(", "))
}

/// Critical points of h and their signed count.
pub fn cmd_index(m: &RunManifest, out: &mut dyn Write) -> Outcome {
    let spec = prepare(m, "index")?;
    let name = m.morse_name(&spec);
    let h = spec.morse(&name).map_err(|e| e.to_string())?;
    let density = if spec.dim > 2 { 4 } else { 8 };
    let pts = find_critical_points(&spec, h, density).map_err(|e| e.to_string())?;
    let index: i64 = pts.iter().map(|p| p.sign as i64).sum();
    io(writeln!(out, "{} / {}: {} critical points", spec.name, name, pts.len()))?;
    io(writeln!(out, "{:<16} {:<40} {:>5} {:>10} {:>14}", "chart", "coords", "sign", "|grad h|", "det Hess"))?;
    for p in &pts {
        io(writeln!(
            out,
            "{:<16} {:<40} {:>+5} {:>10.1e} {:>14.6e}",
            spec.charts[p.chart].name,
            fmt_coords(&p.coords),
            p.sign,
            p.gradient_norm,
            p.det
        ))?;
    }
    let pass = index == spec.euler_char;
    io(writeln!(out, "index = {index}, chi = {} : {}", spec.euler_char, if pass { "PASS" } else { "FAIL" }))?;
    if let Some(path) = &m.out {
        let points: Vec<Value> = pts
            .iter()
            .map(|p| {
                json!({
                    "chart": spec.charts[p.chart].name,
                    "coords": p.coords,
                    "value": p.value,
                    "sign": p.sign,
                    "gradient_norm": p.gradient_norm,
                    "det_hessian": p.det,
                    "morse_index": p.morse_index(),
                })
            })
            .collect();
        let v = json!({
            "manifold": spec.name,
            "morse": name,
            "chi_known": spec.euler_char,
            "index": index,
            "points": points,
            "pass": pass,
        });
        write_file(Path::new(path), &pretty(&v))?;
    }
    Ok(Status::from_pass(pass))
}

fn policy(m: &RunManifest, spec: &ManifoldSpec) -> ResolutionPolicy {
    let base = m.base_resolution(spec);
    if m.resolution.adaptive {
        ResolutionPolicy::adaptive(base)
    } else {
        ResolutionPolicy::fixed(base)
    }
}

fn run_sweep(m: &RunManifest, spec: &ManifoldSpec, morse: &str, exec: &dyn Executor) -> Result<Vec<PartitionResult>, String> {
    let h = spec.morse(morse).map_err(|e| e.to_string())?;
    let pol = policy(m, spec);
    m.lambdas
        .iter()
        .map(|&l| partition_function(spec, h, l, &pol, exec).map_err(|e| format!("{} at lambda = {l}: {e}", spec.name)))
        .collect()
}

pub fn csv_row(r: &PartitionResult) -> String {
    format!("{},{:e},{:e},{}", r.lambda, r.value, r.error_bound, resolution_descriptor(&r.resolution))
}

fn rows_json(rs: &[PartitionResult]) -> Vec<Value> {
    rs.iter()
        .map(|r| {
            json!({
                "lambda": r.lambda,
                "Z": r.value,
                "error_bound": r.error_bound,
                "resolution": resolution_descriptor(&r.resolution),
            })
        })
        .collect()
}

/// Path of the JSON summary written next to a CSV output.
pub fn summary_path(csv: &str) -> PathBuf {
    Path::new(csv).with_extension("json")
}

/// Z(λ) over the manifest's couplings; passes when every value is within tolerance of χ
/// (and of the comparison manifold's value, if one is given).
pub fn cmd_sweep(m: &RunManifest, exec: &dyn Executor, out: &mut dyn Write) -> Outcome {
    let spec = prepare(m, "sweep")?;
    if m.lambdas.is_empty() {
        return Err("empty lambda list".into());
    }
    let morse = m.morse_name(&spec);
    let rows = run_sweep(m, &spec, &morse, exec)?;
    let chi = spec.euler_char as f64;
    let max_deviation = rows.iter().map(|r| (r.value - chi).abs()).fold(0.0, f64::max);
    let mut pass = max_deviation < m.tolerance;
    let mut csv = format!("{CSV_HEADER}\n{CSV_COLUMNS}\n");
    for r in &rows {
        csv.push_str(&csv_row(r));
        csv.push('\n');
    }
    let compare = match &m.compare {
        None => Value::Null,
        Some(c) => {
            let other = c.resolve()?;
            let b = run_sweep(m, &other, &morse, exec)?;
            let ab = rows.iter().zip(&b).map(|(x, y)| (x.value - y.value).abs()).fold(0.0, f64::max);
            pass &= ab < m.tolerance;
            json!({ "manifold": other.name, "max_ab_deviation": ab, "results": rows_json(&b) })
        }
    };
    let summary = json!({
        "manifold": spec.name,
        "morse": morse,
        "chi_known": spec.euler_char,
        "max_deviation": max_deviation,
        "tolerance": m.tolerance,
        "pass": pass,
        "results": rows_json(&rows),
        "compare": compare,
    });
    match &m.out {
        Some(p) => {
            write_file(Path::new(p), &csv)?;
            write_file(&summary_path(p), &pretty(&summary))?;
            io(out.write_all(csv.as_bytes()))?;
            io(writeln!(out, "max_deviation = {max_deviation:e} : {}", if pass { "PASS" } else { "FAIL" }))?;
        }
        None => {
            io(out.write_all(csv.as_bytes()))?;
            let line = serde_json::to_string(&summary).expect("json serializes");
            io(writeln!(out, "# summary {line}"))?;
        }
    }
    Ok(Status::from_pass(pass))
}

pub fn cmd_selftest(m: &RunManifest, inject_sign_fault: bool, exec: &dyn Executor, out: &mut dyn Write) -> Outcome {
    let opts = selftest::Options { seed: m.seed, backend: m.backend, inject_sign_fault };
    let checks = selftest::run(opts, exec);
    io(writeln!(out, "{:<10} {:<34} {:<6} detail", "group", "check", "result"))?;
    for c in &checks {
        io(writeln!(out, "{:<10} {:<34} {:<6} {}", c.group, c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail))?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    io(writeln!(out, "{} passed, {failed} failed", checks.len() - failed))?;
    Ok(Status::from_pass(failed == 0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EftsOp {
    Delta,
    Cartan,
    Concordance,
}

#[derive(Clone, Debug)]
pub struct EftsArgs {
    pub op: EftsOp,
    pub inputs: Vec<String>,
    pub delta: usize,
    /// Number of base variables; 0 infers it from the inputs.
    pub vars: usize,
    /// Degree cap; `None` uses 3 for cartan and the inputs' degree for concordance.
    pub cap: Option<u32>,
}

pub fn cmd_efts(a: &EftsArgs, out: &mut dyn Write) -> Outcome {
    if !(1..=2).contains(&a.delta) {
        return Err("--delta must be 1 or 2".into());
    }
    let need = match a.op {
        EftsOp::Delta | EftsOp::Cartan => 1,
        EftsOp::Concordance => 2,
    };
    if a.inputs.len() != need {
        return Err(format!("expected {need} argument(s), got {}", a.inputs.len()));
    }
    let mut m = a.vars;
    if m == 0 {
        for s in &a.inputs {
            m = m.max(efts::max_variable(s).map_err(|e| e.to_string())?);
        }
        m = m.max(1);
    }
    let parse = |s: &str| efts::parse(a.delta, m, s).map_err(|e| format!("{s:?}: {e}"));
    match a.op {
        EftsOp::Delta => {
            let p = parse(&a.inputs[0])?;
            io(writeln!(out, "{}", efts::apply_delta(&p)))?;
            Ok(Status::Pass)
        }
        EftsOp::Cartan => {
            let w = efts::parse_vector_field(a.delta, m, &a.inputs[0]).map_err(|e| format!("{:?}: {e}", a.inputs[0]))?;
            let r = efts::check_cartan(a.delta, &w, a.cap.unwrap_or(3)).map_err(|e| e.to_string())?;
            match &r.counterexample {
                None => io(writeln!(out, "PASS ({} monomials, w = {w})", r.checked))?,
                Some((k, lhs, rhs)) => {
                    let mono = SuperPolynomial::from_terms(a.delta, m, [(k.clone(), num_rational::BigRational::from_integer(1.into()))]);
                    io(writeln!(out, "FAIL on {mono}: nested commutator gives {lhs}, L_w gives {rhs}"))?
                }
            }
            Ok(Status::from_pass(r.holds()))
        }
        EftsOp::Concordance => {
            let (p, q) = (parse(&a.inputs[0])?, parse(&a.inputs[1])?);
            let cap = a.cap.unwrap_or(p.max_degree().max(q.max_degree()));
            match efts::concordance_solve(&p, &q, cap).map_err(|e| e.to_string())? {
                Concordance::Witness(e) => {
                    io(writeln!(out, "CONCORDANT"))?;
                    io(writeln!(out, "witness e = {e}"))?;
                    Ok(Status::Pass)
                }
                Concordance::Infeasible(c) => {
                    io(writeln!(out, "INFEASIBLE"))?;
                    let f = SuperPolynomial::from_terms(a.delta, m, c.functional.clone());
                    io(writeln!(
                        out,
                        "certificate: functional {f} (degree {}) vanishes on the image of Delta and pairs to {} with E+ - E-",
                        c.degree, c.pairing
                    ))?;
                    Ok(Status::Fail)
                }
            }
        }
    }
}
