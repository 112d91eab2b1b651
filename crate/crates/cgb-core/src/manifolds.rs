//! Catalog of closed test manifolds given by explicit charts, and tensor Gauss–Legendre
//! integration over them.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{ChartMetric, Domain, MetricField, MetricJet, ScalarField};
use crate::quadrature::{effective_count, reduce, rule_on, Executor};
#[allow(unused_imports)]
use num_traits::Float;

/// Half-width of the excised polar caps of (θ, φ) charts.
pub const POLAR_CAP: f64 = 1e-4;
/// Polar angle below which a point is owned by the rotated chart.
const OWNER_ANGLE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Trig {
    One,
    Sin,
    Cos,
}

impl Trig {
    fn eval(self, order: usize, t: f64) -> f64 {
        match self {
            Trig::One => {
                if order == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Trig::Sin => [t.sin(), t.cos(), -t.sin(), -t.cos()][order % 4],
            Trig::Cos => [t.cos(), -t.sin(), -t.cos(), t.sin()][order % 4],
        }
    }
}

/// Map into ℝ^N whose components are sums of products of one trig factor per chart axis.
#[derive(Clone, Debug)]
pub struct TrigEmbedding {
    pub dim: usize,
    pub components: Vec<Vec<(f64, Vec<Trig>)>>,
}

impl TrigEmbedding {
    fn derivative(&self, x: &[f64], orders: &[usize]) -> Vec<f64> {
        self.components
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|(amp, fs)| {
                        let mut v = *amp;
                        for (a, f) in fs.iter().enumerate() {
                            v *= f.eval(orders[a], x[a]);
                        }
                        v
                    })
                    .sum()
            })
            .collect()
    }

    fn partial(&self, x: &[f64], axes: &[usize]) -> Vec<f64> {
        let mut orders = vec![0; self.dim];
        for &a in axes {
            orders[a] += 1;
        }
        self.derivative(x, &orders)
    }

    pub fn point(&self, x: &[f64]) -> Vec<f64> {
        self.derivative(x, &vec![0; self.dim])
    }

    /// Ellipsoid chart: polar axis along z, or along x when `rotated`.
    pub fn spheroid(a: f64, b: f64, c: f64, rotated: bool) -> Self {
        use Trig::*;
        let components = if rotated {
            vec![vec![(a, vec![Cos, One])], vec![(b, vec![Sin, Cos])], vec![(c, vec![Sin, Sin])]]
        } else {
            vec![vec![(a, vec![Sin, Cos])], vec![(b, vec![Sin, Sin])], vec![(c, vec![Cos, One])]]
        };
        Self { dim: 2, components }
    }

    /// Torus of revolution about the z axis, coordinates (u, v).
    pub fn torus(big_r: f64, r: f64) -> Self {
        use Trig::*;
        Self {
            dim: 2,
            components: vec![
                vec![(big_r, vec![Cos, One]), (r, vec![Cos, Cos])],
                vec![(big_r, vec![Sin, One]), (r, vec![Sin, Cos])],
                vec![(r, vec![One, Sin])],
            ],
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Induced metric of an embedding, with closed-form jets.
pub struct EmbeddedMetric(pub Arc<TrigEmbedding>);

impl MetricField for EmbeddedMetric {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.0.dim;
        let d: Vec<Vec<f64>> = (0..n).map(|i| self.0.partial(x, &[i])).collect();
        DMatrix::from_fn(n, n, |i, j| dot(&d[i], &d[j]))
    }

    fn jet(&self, x: &[f64]) -> Option<MetricJet> {
        let e = &self.0;
        let n = e.dim;
        let d1: Vec<Vec<f64>> = (0..n).map(|i| e.partial(x, &[i])).collect();
        let mut d2 = Vec::with_capacity(n * n);
        let mut d3 = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                d2.push(e.partial(x, &[i, j]));
                for k in 0..n {
                    d3.push(e.partial(x, &[i, j, k]));
                }
            }
        }
        let d2 = |i: usize, j: usize| &d2[i * n + j];
        let d3 = |i: usize, j: usize, k: usize| &d3[(i * n + j) * n + k];
        let g = DMatrix::from_fn(n, n, |i, j| dot(&d1[i], &d1[j]));
        let dg = (0..n)
            .map(|k| DMatrix::from_fn(n, n, |i, j| dot(d2(i, k), &d1[j]) + dot(&d1[i], d2(j, k))))
            .collect();
        let mut ddg = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                ddg.push(DMatrix::from_fn(n, n, |i, j| {
                    dot(d3(i, k, l), &d1[j])
                        + dot(d2(i, k), d2(j, l))
                        + dot(d2(i, l), d2(j, k))
                        + dot(&d1[i], d3(j, k, l))
                }));
            }
        }
        Some(MetricJet { g, dg, ddg, one_sided: false })
    }
}

/// diag(r², r² sin²θ) in (θ, φ).
pub struct RoundSphere {
    pub r: f64,
}

impl MetricField for RoundSphere {
    fn dim(&self) -> usize {
        2
    }

    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let (r2, s) = (self.r * self.r, x[0].sin());
        DMatrix::from_row_slice(2, 2, &[r2, 0.0, 0.0, r2 * s * s])
    }

    fn jet(&self, x: &[f64]) -> Option<MetricJet> {
        let r2 = self.r * self.r;
        let t = x[0];
        let z = DMatrix::zeros(2, 2);
        let mut dg0 = z.clone();
        dg0[(1, 1)] = r2 * (2.0 * t).sin();
        let mut dd00 = z.clone();
        dd00[(1, 1)] = 2.0 * r2 * (2.0 * t).cos();
        Some(MetricJet {
            g: self.metric(x),
            dg: vec![dg0, z.clone()],
            ddg: vec![dd00, z.clone(), z.clone(), z],
            one_sided: false,
        })
    }
}

pub struct FlatMetric(pub usize);

impl MetricField for FlatMetric {
    fn dim(&self) -> usize {
        self.0
    }
    fn metric(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.0, self.0)
    }
    fn jet(&self, _x: &[f64]) -> Option<MetricJet> {
        Some(MetricJet::flat(self.0))
    }
}

/// c(x)·g(x). Jets are closed-form when `analytic` and the base has them.
pub struct ConformalMetric {
    pub base: Arc<dyn MetricField>,
    pub factor: Arc<dyn ScalarField>,
    pub analytic: bool,
}

impl MetricField for ConformalMetric {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        self.base.metric(x) * self.factor.value(x)
    }

    fn jet(&self, x: &[f64]) -> Option<MetricJet> {
        if !self.analytic {
            return None;
        }
        let b = self.base.jet(x)?;
        let n = b.dim();
        let c = self.factor.value(x);
        let dc = self.factor.gradient(x);
        let ddc = self.factor.hessian(x);
        let dg = (0..n).map(|k| &b.g * dc[k] + &b.dg[k] * c).collect();
        let mut ddg = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                ddg.push(&b.g * ddc[(k, l)] + &b.dg[l] * dc[k] + &b.dg[k] * dc[l] + &b.ddg[k * n + l] * c);
            }
        }
        Some(MetricJet { g: &b.g * c, dg, ddg, one_sided: false })
    }
}

/// Block-diagonal product of two metrics.
pub struct ProductMetric {
    pub a: Arc<dyn MetricField>,
    pub b: Arc<dyn MetricField>,
}

impl MetricField for ProductMetric {
    fn dim(&self) -> usize {
        self.a.dim() + self.b.dim()
    }

    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let na = self.a.dim();
        let (ga, gb) = (self.a.metric(&x[..na]), self.b.metric(&x[na..]));
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        g.view_mut((0, 0), (na, na)).copy_from(&ga);
        g.view_mut((na, na), (n - na, n - na)).copy_from(&gb);
        g
    }

    fn jet(&self, x: &[f64]) -> Option<MetricJet> {
        let na = self.a.dim();
        Some(MetricJet::block_diag(&self.a.jet(&x[..na])?, &self.b.jet(&x[na..])?))
    }
}

/// One component of an embedding, as a function on the chart.
pub struct AmbientCoordinate {
    pub embedding: Arc<TrigEmbedding>,
    pub component: usize,
}

impl ScalarField for AmbientCoordinate {
    fn value(&self, x: &[f64]) -> f64 {
        self.embedding.point(x)[self.component]
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.embedding.dim).map(|i| self.embedding.partial(x, &[i])[self.component]).collect()
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.embedding.dim;
        DMatrix::from_fn(n, n, |i, j| self.embedding.partial(x, &[i, j])[self.component])
    }
}

pub struct Zero(pub usize);

impl ScalarField for Zero {
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.0]
    }
    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.0, self.0)
    }
}

/// cos(2πu) + cos(2πv).
pub struct CosCos;

impl ScalarField for CosCos {
    fn value(&self, x: &[f64]) -> f64 {
        (2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![-2.0 * PI * (2.0 * PI * x[0]).sin(), -2.0 * PI * (2.0 * PI * x[1]).sin()]
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let k = 4.0 * PI * PI;
        DMatrix::from_row_slice(2, 2, &[-k * (2.0 * PI * x[0]).cos(), 0.0, 0.0, -k * (2.0 * PI * x[1]).cos()])
    }
}

/// 1 + amp·sinθ on a (θ, φ) chart.
pub struct SinThetaFactor {
    pub amp: f64,
}

impl ScalarField for SinThetaFactor {
    fn value(&self, x: &[f64]) -> f64 {
        1.0 + self.amp * x[0].sin()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![self.amp * x[0].cos(), 0.0]
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[-self.amp * x[0].sin(), 0.0, 0.0, 0.0])
    }
}

/// 1 + amp·√(1 − z²) read through the rotated chart, where z is the original polar coordinate.
/// Only values are meaningful; the chart using it differentiates numerically.
struct RotatedSinThetaFactor {
    amp: f64,
}

impl ScalarField for RotatedSinThetaFactor {
    fn value(&self, x: &[f64]) -> f64 {
        let z = x[0].sin() * x[1].sin();
        1.0 + self.amp * (1.0 - z * z).max(0.0).sqrt()
    }
    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        vec![f64::NAN; 2]
    }
    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(2, 2, f64::NAN)
    }
}

/// h₁(x[..na]) + h₂(x[na..]).
pub struct SumField {
    pub a: Arc<dyn ScalarField>,
    pub b: Arc<dyn ScalarField>,
    pub split: usize,
}

impl ScalarField for SumField {
    fn value(&self, x: &[f64]) -> f64 {
        self.a.value(&x[..self.split]) + self.b.value(&x[self.split..])
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.a.gradient(&x[..self.split]);
        g.extend(self.b.gradient(&x[self.split..]));
        g
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let (ha, hb) = (self.a.hessian(&x[..self.split]), self.b.hessian(&x[self.split..]));
        let n = ha.nrows() + hb.nrows();
        let mut h = DMatrix::zeros(n, n);
        h.view_mut((0, 0), (ha.nrows(), ha.nrows())).copy_from(&ha);
        h.view_mut((ha.nrows(), ha.nrows()), (hb.nrows(), hb.nrows())).copy_from(&hb);
        h
    }
}

pub struct Negated(pub Arc<dyn ScalarField>);

impl ScalarField for Negated {
    fn value(&self, x: &[f64]) -> f64 {
        -self.0.value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.0.gradient(x).into_iter().map(|v| -v).collect()
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        -self.0.hessian(x)
    }
}

pub trait ChartMap: Send + Sync {
    /// A point of some ambient space identifying the chart point across charts.
    fn to_ambient(&self, x: &[f64]) -> Vec<f64>;
}

impl ChartMap for TrigEmbedding {
    fn to_ambient(&self, x: &[f64]) -> Vec<f64> {
        self.point(x)
    }
}

struct AngleMap {
    period: f64,
}

impl ChartMap for AngleMap {
    fn to_ambient(&self, x: &[f64]) -> Vec<f64> {
        let w = 2.0 * PI / self.period;
        x.iter().flat_map(|t| [(w * t).cos(), (w * t).sin()]).collect()
    }
}

struct ProductMap {
    a: Arc<dyn ChartMap>,
    b: Arc<dyn ChartMap>,
    split: usize,
}

impl ChartMap for ProductMap {
    fn to_ambient(&self, x: &[f64]) -> Vec<f64> {
        let mut p = self.a.to_ambient(&x[..self.split]);
        p.extend(self.b.to_ambient(&x[self.split..]));
        p
    }
}

#[derive(Clone)]
pub struct Chart {
    pub name: String,
    pub metric: ChartMetric,
    pub map: Arc<dyn ChartMap>,
    /// Box integrated by quadrature; `None` for charts used only to locate critical points.
    pub integration: Option<Domain>,
    /// Excised parts of the chart domain, folded into the error bound.
    pub caps: Vec<Domain>,
}

impl core::fmt::Debug for Chart {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Chart").field("name", &self.name).field("integration", &self.integration).finish()
    }
}

#[derive(Clone)]
pub struct MorseFunction {
    pub name: String,
    /// One evaluator per chart, in chart coordinates.
    pub fields: Vec<Arc<dyn ScalarField>>,
}

impl MorseFunction {
    pub fn negated(&self) -> Self {
        Self {
            name: format!("-{}", self.name),
            fields: self.fields.iter().map(|f| Arc::new(Negated(f.clone())) as Arc<dyn ScalarField>).collect(),
        }
    }
}

type Owner = Arc<dyn Fn(&[f64]) -> usize + Send + Sync>;
type Geodesic = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ManifoldSpec {
    pub name: String,
    pub dim: usize,
    pub charts: Vec<Chart>,
    pub euler_char: i64,
    pub morse_catalog: Vec<MorseFunction>,
    pub ambient_dim: usize,
    /// Partition of the manifold among charts, as a function of the ambient point.
    pub owner: Owner,
    pub geodesic: Option<Geodesic>,
}

impl core::fmt::Debug for ManifoldSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ManifoldSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("charts", &self.charts)
            .field("euler_char", &self.euler_char)
            .finish()
    }
}

impl ManifoldSpec {
    pub fn morse(&self, name: &str) -> Result<&MorseFunction> {
        self.morse_catalog
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn morse_names(&self) -> Vec<&str> {
        self.morse_catalog.iter().map(|m| m.name.as_str()).collect()
    }

    /// Same manifold and functions with every metric multiplied by `c`.
    pub fn with_scaled_metric(&self, c: f64) -> Self {
        let mut out = self.clone();
        for ch in &mut out.charts {
            let analytic = matches!(ch.metric.mode, crate::geometry::DerivativeMode::Analytic);
            let field = Arc::new(ConformalMetric {
                base: ch.metric.field.clone(),
                factor: Arc::new(ConstantField { c, dim: self.dim }),
                analytic,
            });
            ch.metric = ChartMetric { field, domain: ch.metric.domain.clone(), mode: ch.metric.mode };
        }
        out
    }
}

struct ConstantField {
    c: f64,
    dim: usize,
}

impl ScalarField for ConstantField {
    fn value(&self, _x: &[f64]) -> f64 {
        self.c
    }
    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }
    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }
}

fn theta_phi_domain() -> Domain {
    Domain::new(vec![0.0, 0.0], vec![PI, 2.0 * PI], vec![false, true])
}

fn polar_caps() -> (Domain, Vec<Domain>) {
    let e = POLAR_CAP;
    let integration = Domain::new(vec![e, 0.0], vec![PI - e, 2.0 * PI], vec![false, true]);
    let caps = vec![
        Domain::new(vec![0.0, 0.0], vec![e, 2.0 * PI], vec![false, true]),
        Domain::new(vec![PI - e, 0.0], vec![PI, 2.0 * PI], vec![false, true]),
    ];
    (integration, caps)
}

/// Sphere-like surface with semi-axes (a, b, c). `round` selects the closed-form
/// round metric for the main chart; `amp ≠ 0` multiplies the metric by 1 + amp·sinθ.
fn spheroid(name: String, a: f64, b: f64, c: f64, round: bool, amp: f64) -> ManifoldSpec {
    let main_emb = Arc::new(TrigEmbedding::spheroid(a, b, c, false));
    let rot_emb = Arc::new(TrigEmbedding::spheroid(a, b, c, true));
    let mut main_field: Arc<dyn MetricField> =
        if round { Arc::new(RoundSphere { r: a }) } else { Arc::new(EmbeddedMetric(main_emb.clone())) };
    let mut rot_field: Arc<dyn MetricField> = Arc::new(EmbeddedMetric(rot_emb.clone()));
    if amp != 0.0 {
        main_field = Arc::new(ConformalMetric { base: main_field, factor: Arc::new(SinThetaFactor { amp }), analytic: true });
        rot_field = Arc::new(ConformalMetric {
            base: rot_field,
            factor: Arc::new(RotatedSinThetaFactor { amp }),
            analytic: false,
        });
    }
    let (integration, caps) = polar_caps();
    let charts = vec![
        Chart {
            name: "theta-phi".into(),
            metric: ChartMetric::new(main_field, theta_phi_domain()),
            map: main_emb.clone(),
            integration: Some(integration),
            caps,
        },
        Chart {
            name: "rotated".into(),
            metric: ChartMetric::new(rot_field, theta_phi_domain()),
            map: rot_emb.clone(),
            integration: None,
            caps: vec![],
        },
    ];
    let height = MorseFunction {
        name: "height".into(),
        fields: vec![
            Arc::new(AmbientCoordinate { embedding: main_emb, component: 2 }),
            Arc::new(AmbientCoordinate { embedding: rot_emb, component: 2 }),
        ],
    };
    let zero = MorseFunction { name: "zero".into(), fields: vec![Arc::new(Zero(2)), Arc::new(Zero(2))] };
    let owner: Owner = Arc::new(move |p: &[f64]| if (p[2] / c).abs() > OWNER_ANGLE.cos() { 1 } else { 0 });
    let geodesic: Option<Geodesic> = if round && a == b && b == c && amp == 0.0 {
        Some(Arc::new(move |p: &[f64], q: &[f64]| a * (dot(p, q) / (a * a)).clamp(-1.0, 1.0).acos()))
    } else {
        None
    };
    ManifoldSpec {
        name,
        dim: 2,
        charts,
        euler_char: 2,
        morse_catalog: vec![height, zero],
        ambient_dim: 3,
        owner,
        geodesic,
    }
}

pub fn sphere(r: f64) -> ManifoldSpec {
    spheroid("sphere".into(), r, r, r, true, 0.0)
}

pub fn perturbed_sphere(r: f64, amp: f64) -> ManifoldSpec {
    spheroid("sphere-perturbed".into(), r, r, r, true, amp)
}

pub fn ellipsoid(a: f64, b: f64, c: f64) -> ManifoldSpec {
    spheroid("ellipsoid".into(), a, b, c, false, 0.0)
}

pub fn perturbed_ellipsoid(a: f64, b: f64, c: f64, amp: f64) -> ManifoldSpec {
    spheroid("ellipsoid-perturbed".into(), a, b, c, false, amp)
}

/// Torus of revolution; "height" is the x coordinate, i.e. the torus stands on its rim.
pub fn torus(big_r: f64, r: f64) -> ManifoldSpec {
    let emb = Arc::new(TrigEmbedding::torus(big_r, r));
    let dom = Domain::new(vec![0.0, 0.0], vec![2.0 * PI, 2.0 * PI], vec![true, true]);
    let chart = Chart {
        name: "u-v".into(),
        metric: ChartMetric::new(Arc::new(EmbeddedMetric(emb.clone())), dom.clone()),
        map: Arc::new(AngleMap { period: 2.0 * PI }),
        integration: Some(dom),
        caps: vec![],
    };
    ManifoldSpec {
        name: "torus".into(),
        dim: 2,
        charts: vec![chart],
        euler_char: 0,
        morse_catalog: vec![
            MorseFunction { name: "height".into(), fields: vec![Arc::new(AmbientCoordinate { embedding: emb, component: 0 })] },
            MorseFunction { name: "zero".into(), fields: vec![Arc::new(Zero(2))] },
        ],
        ambient_dim: 4,
        owner: Arc::new(|_p: &[f64]| 0),
        geodesic: None,
    }
}

/// ℝ²/ℤ² with the Euclidean metric.
pub fn flat_torus() -> ManifoldSpec {
    let dom = Domain::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![true, true]);
    let chart = Chart {
        name: "u-v".into(),
        metric: ChartMetric::new(Arc::new(FlatMetric(2)), dom.clone()),
        map: Arc::new(AngleMap { period: 1.0 }),
        integration: Some(dom),
        caps: vec![],
    };
    let geodesic: Geodesic = Arc::new(|p: &[f64], q: &[f64]| {
        let mut s = 0.0;
        for a in 0..2 {
            let tp = p[2 * a + 1].atan2(p[2 * a]);
            let tq = q[2 * a + 1].atan2(q[2 * a]);
            let mut d = ((tp - tq) / (2.0 * PI)).abs() % 1.0;
            d = d.min(1.0 - d);
            s += d * d;
        }
        s.sqrt()
    });
    ManifoldSpec {
        name: "flat-torus".into(),
        dim: 2,
        charts: vec![chart],
        euler_char: 0,
        morse_catalog: vec![
            MorseFunction { name: "cos+cos".into(), fields: vec![Arc::new(CosCos)] },
            MorseFunction { name: "zero".into(), fields: vec![Arc::new(Zero(2))] },
        ],
        ambient_dim: 4,
        owner: Arc::new(|_p: &[f64]| 0),
        geodesic: Some(geodesic),
    }
}

fn concat_domain(a: &Domain, b: &Domain) -> Domain {
    let cat = |x: &[f64], y: &[f64]| x.iter().chain(y).copied().collect::<Vec<_>>();
    let periodic = a.periodic.iter().chain(&b.periodic).copied().collect();
    Domain::new(cat(&a.lo, &b.lo), cat(&a.hi, &b.hi), periodic)
}

/// Riemannian product; charts, metrics and Morse functions are assembled blockwise.
pub fn product(a: &ManifoldSpec, b: &ManifoldSpec) -> ManifoldSpec {
    let na = a.dim;
    let mut charts = Vec::new();
    for ca in &a.charts {
        for cb in &b.charts {
            let field = Arc::new(ProductMetric { a: ca.metric.field.clone(), b: cb.metric.field.clone() });
            let metric = ChartMetric::new(field, concat_domain(&ca.metric.domain, &cb.metric.domain));
            let integration = match (&ca.integration, &cb.integration) {
                (Some(ia), Some(ib)) => Some(concat_domain(ia, ib)),
                _ => None,
            };
            let mut caps = Vec::new();
            if integration.is_some() {
                for cap in &ca.caps {
                    caps.push(concat_domain(cap, &cb.metric.domain));
                }
                for cap in &cb.caps {
                    caps.push(concat_domain(&ca.metric.domain, cap));
                }
            }
            charts.push(Chart {
                name: format!("{}*{}", ca.name, cb.name),
                metric,
                map: Arc::new(ProductMap { a: ca.map.clone(), b: cb.map.clone(), split: na }),
                integration,
                caps,
            });
        }
    }
    let mut morse_catalog = Vec::new();
    for ma in &a.morse_catalog {
        if let Ok(mb) = b.morse(&ma.name) {
            let mut fields: Vec<Arc<dyn ScalarField>> = Vec::new();
            for fa in &ma.fields {
                for fb in &mb.fields {
                    fields.push(Arc::new(SumField { a: fa.clone(), b: fb.clone(), split: na }));
                }
            }
            morse_catalog.push(MorseFunction { name: ma.name.clone(), fields });
        }
    }
    let (oa, ob, split) = (a.owner.clone(), b.owner.clone(), a.ambient_dim);
    let nb_charts = b.charts.len();
    let owner: Owner = Arc::new(move |p: &[f64]| oa(&p[..split]) * nb_charts + ob(&p[split..]));
    let geodesic: Option<Geodesic> = match (&a.geodesic, &b.geodesic) {
        (Some(ga), Some(gb)) => {
            let (ga, gb) = (ga.clone(), gb.clone());
            Some(Arc::new(move |p: &[f64], q: &[f64]| {
                let da = ga(&p[..split], &q[..split]);
                let db = gb(&p[split..], &q[split..]);
                (da * da + db * db).sqrt()
            }))
        }
        _ => None,
    };
    ManifoldSpec {
        name: format!("{}x{}", a.name, b.name),
        dim: a.dim + b.dim,
        charts,
        euler_char: a.euler_char * b.euler_char,
        morse_catalog,
        ambient_dim: a.ambient_dim + b.ambient_dim,
        owner,
        geodesic,
    }
}

pub fn s2xs2() -> ManifoldSpec {
    let s = sphere(1.0);
    let mut p = product(&s, &s);
    p.name = "s2xs2".into();
    p
}

/// The default catalog: S²(1), ellipsoid(1, 1.2, 0.8), T²(2, 1), flat T², S²×S².
pub fn catalog() -> Vec<ManifoldSpec> {
    vec![sphere(1.0), ellipsoid(1.0, 1.2, 0.8), torus(2.0, 1.0), flat_torus(), s2xs2()]
}

pub const CATALOG_NAMES: [&str; 7] =
    ["sphere", "ellipsoid", "torus", "flat-torus", "s2xs2", "sphere-perturbed", "ellipsoid-perturbed"];

/// Look up a catalog manifold; `params` overrides the default shape parameters in order.
pub fn by_name(name: &str, params: &[f64]) -> Result<ManifoldSpec> {
    let p = |i: usize, d: f64| params.get(i).copied().unwrap_or(d);
    let positive = |v: &[f64]| {
        if v.iter().all(|x| *x > 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(Error::Invalid(format!("{name}: shape parameters must be positive")))
        }
    };
    match name {
        "sphere" => {
            positive(&[p(0, 1.0)])?;
            Ok(sphere(p(0, 1.0)))
        }
        "sphere-perturbed" => {
            positive(&[p(0, 1.0)])?;
            Ok(perturbed_sphere(p(0, 1.0), p(1, 0.3)))
        }
        "ellipsoid" => {
            positive(&[p(0, 1.0), p(1, 1.2), p(2, 0.8)])?;
            Ok(ellipsoid(p(0, 1.0), p(1, 1.2), p(2, 0.8)))
        }
        "ellipsoid-perturbed" => {
            positive(&[p(0, 1.0), p(1, 1.2), p(2, 0.8)])?;
            Ok(perturbed_ellipsoid(p(0, 1.0), p(1, 1.2), p(2, 0.8), p(3, 0.3)))
        }
        "torus" => {
            let (big, small) = (p(0, 2.0), p(1, 1.0));
            positive(&[big, small])?;
            if small >= big {
                return Err(Error::Invalid("torus: need R > r".into()));
            }
            Ok(torus(big, small))
        }
        "flat-torus" => Ok(flat_torus()),
        "s2xs2" => Ok(s2xs2()),
        _ => Err(Error::UnknownName(name.to_string())),
    }
}

/// Tensor Gauss–Legendre grid over one chart's integration box.
#[derive(Clone, Debug)]
pub struct ChartGrid {
    pub chart: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
}

impl ChartGrid {
    pub fn new(chart: usize, bx: &Domain, resolution: &[usize]) -> Self {
        let (nodes, weights) = (0..bx.dim()).map(|a| rule_on(bx.lo[a], bx.hi[a], resolution[a])).unzip();
        Self { chart, nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().map(|v| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes point `i` (last axis fastest) into `x` and returns its weight.
    pub fn point(&self, mut i: usize, x: &mut [f64]) -> f64 {
        let mut w = 1.0;
        for a in (0..self.nodes.len()).rev() {
            let m = self.nodes[a].len();
            let k = i % m;
            i /= m;
            x[a] = self.nodes[a][k];
            w *= self.weights[a][k];
        }
        w
    }

    pub fn points(&self) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
        (0..self.len()).map(move |i| {
            let mut x = vec![0.0; self.nodes.len()];
            let w = self.point(i, &mut x);
            (x, w)
        })
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub charts: Vec<ChartGrid>,
    /// Node counts actually used per axis.
    pub resolution: Vec<usize>,
    /// Coordinate measure of the excised caps.
    pub cap_measure: f64,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.charts.iter().map(|c| c.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn descriptor(&self) -> String {
        resolution_descriptor(&self.resolution)
    }
}

pub fn resolution_descriptor(r: &[usize]) -> String {
    let parts: Vec<String> = r.iter().map(|n| n.to_string()).collect();
    parts.join("x")
}

fn box_measure(d: &Domain) -> f64 {
    (0..d.dim()).map(|a| d.length(a)).product()
}

pub fn quadrature_grid(spec: &ManifoldSpec, resolution: &[usize]) -> Result<QuadratureGrid> {
    if resolution.len() != spec.dim {
        return Err(Error::DimensionMismatch { left: spec.dim, right: resolution.len() });
    }
    if let Some(a) = resolution.iter().position(|n| *n < 2) {
        return Err(Error::Invalid(format!("resolution must be at least 2 per axis (axis {a})")));
    }
    let mut charts = Vec::new();
    let mut cap_measure = 0.0;
    for (id, ch) in spec.charts.iter().enumerate() {
        if let Some(bx) = &ch.integration {
            charts.push(ChartGrid::new(id, bx, resolution));
            cap_measure += ch.caps.iter().map(box_measure).sum::<f64>();
        }
    }
    Ok(QuadratureGrid {
        charts,
        resolution: resolution.iter().map(|n| effective_count(*n)).collect(),
        cap_measure,
    })
}

#[derive(Clone, Debug)]
pub struct Integral {
    pub value: f64,
    pub error_bound: f64,
    /// (chart id, contribution); contributions sum to `value`.
    pub per_chart: Vec<(usize, f64)>,
    pub resolution: Vec<usize>,
}

pub type Integrand<'a> = &'a (dyn Fn(usize, &[f64]) -> f64 + Sync);

fn sum_grid(grid: &QuadratureGrid, f: Integrand<'_>, exec: &dyn Executor) -> Vec<(usize, f64)> {
    grid.charts
        .iter()
        .map(|cg| {
            let dim = cg.nodes.len();
            let term = |i: usize| {
                let mut x = [0.0f64; 8];
                let w = cg.point(i, &mut x[..dim]);
                w * f(cg.chart, &x[..dim])
            };
            (cg.chart, reduce(cg.len(), exec, &term))
        })
        .collect()
}

/// sup |f| over a few sample points in each cap, doubled.
fn cap_bound(spec: &ManifoldSpec, f: Integrand<'_>) -> f64 {
    let mut total = 0.0;
    for (id, ch) in spec.charts.iter().enumerate() {
        if ch.integration.is_none() {
            continue;
        }
        for cap in &ch.caps {
            let dim = cap.dim();
            let counts: Vec<usize> = (0..dim).map(|a| if cap.length(a) < 1e-2 { 2 } else { 6 }).collect();
            let total_pts: usize = counts.iter().product();
            let mut sup = 0.0f64;
            let mut x = vec![0.0; dim];
            for mut i in 0..total_pts {
                for a in (0..dim).rev() {
                    let k = i % counts[a];
                    i /= counts[a];
                    x[a] = if counts[a] == 2 {
                        // interior half-point and the cap's inner edge, skipping the pole itself
                        let inner = if cap.lo[a] == 0.0 { cap.hi[a] } else { cap.lo[a] };
                        let outer = if cap.lo[a] == 0.0 { cap.lo[a] } else { cap.hi[a] };
                        if k == 0 {
                            0.5 * (inner + outer)
                        } else {
                            inner
                        }
                    } else {
                        cap.lo[a] + (k as f64 + 0.5) / counts[a] as f64 * cap.length(a)
                    };
                }
                let v = f(id, &x);
                sup = if v.is_finite() { sup.max(v.abs()) } else { f64::INFINITY };
            }
            total += 2.0 * sup * box_measure(cap);
        }
    }
    total
}

/// ∫ f over the integration charts. The error bound adds the difference against a grid with
/// half as many nodes per axis to the cap bound.
pub fn integrate(spec: &ManifoldSpec, resolution: &[usize], f: Integrand<'_>, exec: &dyn Executor) -> Result<Integral> {
    let grid = quadrature_grid(spec, resolution)?;
    let per_chart = sum_grid(&grid, f, exec);
    let coarse_res: Vec<usize> = resolution.iter().map(|n| (n.div_ceil(2)).max(2)).collect();
    let coarse = quadrature_grid(spec, &coarse_res)?;
    let coarse_value: f64 = sum_grid(&coarse, f, exec).iter().map(|(_, v)| v).sum();
    let value: f64 = per_chart.iter().map(|(_, v)| v).sum();
    let err = (value - coarse_value).abs() + cap_bound(spec, f);
    Ok(Integral { value, error_bound: err, per_chart, resolution: grid.resolution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::curvature_frame;
    use crate::quadrature::Sequential;

    #[test]
    fn catalog_euler_characteristics() {
        let chis: Vec<i64> = catalog().iter().map(|m| m.euler_char).collect();
        assert_eq!(chis, vec![2, 2, 0, 0, 4]);
        assert!(by_name("klein-bottle", &[]).is_err());
    }

    #[test]
    fn sphere_area_and_sin_integral() {
        let s = sphere(1.3);
        let area = |c: usize, x: &[f64]| s.charts[c].metric.metric(x).unwrap().determinant().sqrt();
        let a = integrate(&s, &[128, 256], &area, &Sequential).unwrap();
        let exact = 4.0 * PI * 1.3 * 1.3;
        assert!((a.value - exact).abs() < 1e-6);
        assert!((a.value - exact).abs() <= a.error_bound);
        let sin = |_c: usize, x: &[f64]| x[0].sin();
        let u = integrate(&sphere(1.0), &[128, 256], &sin, &Sequential).unwrap();
        // the caps remove 2π(1 − cos ε)·2 ≈ 2πε²
        assert!((u.value - 4.0 * PI).abs() < 1e-9 + 2.0 * PI * POLAR_CAP * POLAR_CAP);
    }

    #[test]
    fn torus_total_curvature_vanishes() {
        let t = torus(2.0, 1.0);
        let f = |c: usize, x: &[f64]| {
            let fr = curvature_frame(&t.charts[c].metric, x).unwrap();
            fr.r(0, 1, 0, 1) / fr.det_g.sqrt()
        };
        let v = integrate(&t, &[64, 64], &f, &Sequential).unwrap();
        assert!(v.value.abs() < 1e-8);
        let area = |c: usize, x: &[f64]| t.charts[c].metric.metric(x).unwrap().determinant().sqrt();
        let a = integrate(&t, &[32, 32], &area, &Sequential).unwrap();
        assert!((a.value - 4.0 * PI * PI * 2.0).abs() < 1e-9);
    }

    #[test]
    fn small_resolution_rejected() {
        assert!(quadrature_grid(&sphere(1.0), &[1, 8]).is_err());
        assert!(quadrature_grid(&sphere(1.0), &[8]).is_err());
    }

    #[test]
    fn product_grid_shape() {
        let p = s2xs2();
        assert_eq!(p.charts.len(), 4);
        let g = quadrature_grid(&p, &[4, 4, 4, 4]).unwrap();
        assert_eq!(g.charts.len(), 1);
        assert_eq!(g.len(), 256);
        assert!(g.charts[0].points().all(|(_, w)| w > 0.0));
    }
}
