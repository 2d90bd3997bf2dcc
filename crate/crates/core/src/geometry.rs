//! Domains, Lipschitz boundary functions, the maps `Φ_η`, Whitney covers and
//! rigid charts for polygon vertices.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vecops::{dist, norm};

/// Closed-form boundary profiles in one variable.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    /// `slope * |x - center|`
    Abs { center: f64, slope: f64 },
    /// `amplitude * sin(frequency * x)`
    Sine { amplitude: f64, frequency: f64 },
}

impl Formula {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            Formula::Abs { center, slope } => slope * (x - center).abs(),
            Formula::Sine { amplitude, frequency } => amplitude * (frequency * x).sin(),
        }
    }

    fn lipschitz(&self) -> f64 {
        match *self {
            Formula::Abs { slope, .. } => slope.abs(),
            Formula::Sine { amplitude, frequency } => (amplitude * frequency).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LipschitzKind {
    /// `slope · x' + intercept`; works for any `n - 1`.
    Affine { slope: Vec<f64>, intercept: f64 },
    /// Linear interpolation between knots; constant continuation outside.
    PiecewiseLinear { xs: Vec<f64>, ys: Vec<f64> },
    Analytic(Formula),
    /// McShane extension of another function from its native interval.
    McShane { inner: Box<LipschitzFn>, a: f64, b: f64, fa: f64, fb: f64 },
}

/// A boundary function `f: R^{n-1} -> R` with a known Lipschitz bound `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzFn {
    pub kind: LipschitzKind,
    pub lipschitz_constant: f64,
    pub native_interval: Option<(f64, f64)>,
}

impl LipschitzFn {
    /// `f ≡ 0` on `R^{n-1}`.
    pub fn zero(n: usize) -> Self {
        Self::affine(vec![0.0; n.saturating_sub(1).max(1)], 0.0)
    }

    pub fn affine(slope: Vec<f64>, intercept: f64) -> Self {
        let m = norm(&slope);
        LipschitzFn {
            kind: LipschitzKind::Affine { slope, intercept },
            lipschitz_constant: m,
            native_interval: None,
        }
    }

    /// Piecewise-linear interpolant through `(xs, ys)`, `xs` strictly increasing.
    pub fn piecewise_linear(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::InvalidInput(
                "piecewise-linear function needs at least two matching knots".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("knots must be strictly increasing".into()));
        }
        let m = xs
            .windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max);
        let interval = (xs[0], xs[xs.len() - 1]);
        Ok(LipschitzFn {
            kind: LipschitzKind::PiecewiseLinear { xs, ys },
            lipschitz_constant: m,
            native_interval: Some(interval),
        })
    }

    pub fn analytic(formula: Formula) -> Self {
        LipschitzFn {
            lipschitz_constant: formula.lipschitz(),
            kind: LipschitzKind::Analytic(formula),
            native_interval: None,
        }
    }

    /// Restrict the function to a native interval (used before McShane extension).
    pub fn on_interval(mut self, a: f64, b: f64) -> Self {
        self.native_interval = Some((a, b));
        self
    }

    #[inline]
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz_constant
    }

    /// Evaluate `f(x')`.
    pub fn eval(&self, xp: &[f64]) -> f64 {
        match &self.kind {
            LipschitzKind::Affine { slope, intercept } => {
                intercept + slope.iter().zip(xp).map(|(a, b)| a * b).sum::<f64>()
            }
            LipschitzKind::PiecewiseLinear { xs, ys } => pl_eval(xs, ys, xp[0]),
            LipschitzKind::Analytic(formula) => formula.eval(xp[0]),
            LipschitzKind::McShane { inner, a, b, fa, fb } => {
                let m = self.lipschitz_constant;
                let x = xp[0];
                if x < *a {
                    fa + m * (a - x)
                } else if x > *b {
                    fb + m * (x - b)
                } else {
                    inner.eval(xp)
                }
            }
        }
    }

    #[inline]
    pub fn eval1(&self, x: f64) -> f64 {
        self.eval(&[x])
    }

    /// Largest sampled difference quotient on `[a, b]` with `samples` points.
    pub fn sampled_lipschitz(&self, a: f64, b: f64, samples: usize) -> f64 {
        let h = (b - a) / (samples.max(2) - 1) as f64;
        let vals: Vec<f64> = (0..samples.max(2)).map(|i| self.eval1(a + h * i as f64)).collect();
        vals.windows(2).map(|w| (w[1] - w[0]).abs() / h).fold(0.0, f64::max)
    }

    /// Conservative bounds `(min, max)` of `f` on `[a, b]` (one variable).
    pub fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        if let LipschitzKind::Affine { .. } = self.kind {
            let (fa, fb) = (self.eval1(a), self.eval1(b));
            return (fa.min(fb), fa.max(fb));
        }
        let n = 65;
        let h = (b - a) / (n - 1) as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let v = self.eval1(a + h * i as f64);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let slack = 0.5 * h * self.lipschitz_constant;
        (lo - slack, hi + slack)
    }
}

fn pl_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// Extend a one-variable `M`-Lipschitz function from its native interval to all of `R`
/// with `f̃(x) = min_y f(y) + M|x - y|`.
///
/// For `x` inside the interval the minimum is attained at `y = x`; outside it is
/// attained at the nearest endpoint, which is what `eval` uses.
pub fn mcshane_extend(f: &LipschitzFn, m: f64) -> Result<LipschitzFn> {
    let (a, b) = f
        .native_interval
        .ok_or_else(|| Error::InvalidInput("function has no native interval".into()))?;
    if !(b > a) || m < 0.0 || !m.is_finite() {
        return Err(Error::InvalidInput(format!("bad interval [{a}, {b}] or M = {m}")));
    }
    let observed = match &f.kind {
        LipschitzKind::PiecewiseLinear { xs, ys } => xs
            .windows(2)
            .zip(ys.windows(2))
            .filter(|(x, _)| x[1] > a && x[0] < b)
            .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max),
        _ => f.sampled_lipschitz(a, b, 4097),
    };
    if observed > m * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "sampled difference quotient {observed} exceeds M = {m}"
        )));
    }
    Ok(LipschitzFn {
        kind: LipschitzKind::McShane {
            fa: f.eval1(a),
            fb: f.eval1(b),
            inner: Box::new(f.clone()),
            a,
            b,
        },
        lipschitz_constant: m,
        native_interval: None,
    })
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidInput("box corners have mismatched dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(Error::InvalidInput(format!("box {lo:?}..{hi:?} has no volume")));
        }
        Ok(BoxRegion { lo, hi })
    }

    pub fn unit(n: usize) -> Self {
        BoxRegion { lo: vec![0.0; n], hi: vec![1.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Scale about the origin.
    pub fn scaled(&self, tau: f64) -> Self {
        BoxRegion {
            lo: self.lo.iter().map(|v| v * tau).collect(),
            hi: self.hi.iter().map(|v| v * tau).collect(),
        }
    }
}

/// Which side of the graph an epigraph-type domain describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `D = {x_n > f(x')}`
    Upper,
    /// `D₋ = {x_n < f(x')}`
    Lower,
}

/// Bounded window used to truncate an epigraph.
#[derive(Clone, Debug, PartialEq)]
pub enum EpiWindow {
    /// The side of the graph intersected with a box.
    Box(BoxRegion),
    /// Points over `x' ∈ [lo', hi']` within vertical distance `height` of the graph.
    Band { lo: Vec<f64>, hi: Vec<f64>, height: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind {
    Box(BoxRegion),
    /// Box inside `{x_n > 0}`; the graph is `f ≡ 0`.
    HalfSpaceTrunc(BoxRegion),
    Epigraph { f: LipschitzFn, window: EpiWindow, side: Side },
    /// Planar wedge `{x₁ > 0, x₂ > αx₁}` truncated to the parallelogram
    /// `φ([0, width] × [0, height])`, `φ(x₁, x₂) = (x₁, x₂ + αx₁)`; the lower side
    /// is `φ([0, width] × [-height, 0])`.
    Angular { alpha: f64, width: f64, height: f64, side: Side },
    /// Counter-clockwise, strictly convex vertex list.
    ConvexPolygon(Vec<[f64; 2]>),
}

/// A bounded region of `R^n` with a membership predicate.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub kind: DomainKind,
    pub n: usize,
}

impl Domain {
    pub fn unit_square() -> Self {
        Domain::boxed(BoxRegion::unit(2))
    }

    pub fn boxed(b: BoxRegion) -> Self {
        Domain { n: b.dim(), kind: DomainKind::Box(b) }
    }

    pub fn half_space_trunc(b: BoxRegion) -> Result<Self> {
        if b.lo[b.dim() - 1] < 0.0 {
            return Err(Error::InvalidInput("half-space truncation must satisfy x_n >= 0".into()));
        }
        Ok(Domain { n: b.dim(), kind: DomainKind::HalfSpaceTrunc(b) })
    }

    pub fn epigraph(f: LipschitzFn, window: EpiWindow, side: Side) -> Result<Self> {
        let n = match &window {
            EpiWindow::Box(b) => b.dim(),
            EpiWindow::Band { lo, hi, height } => {
                if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
                    return Err(Error::InvalidInput("band window has no extent".into()));
                }
                if !(*height > 0.0) {
                    return Err(Error::InvalidInput("band height must be positive".into()));
                }
                lo.len() + 1
            }
        };
        Ok(Domain { n, kind: DomainKind::Epigraph { f, window, side } })
    }

    pub fn angular(alpha: f64, width: f64, height: f64, side: Side) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput("angular window needs positive width/height".into()));
        }
        Ok(Domain { n: 2, kind: DomainKind::Angular { alpha, width, height, side } })
    }

    pub fn convex_polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        validate_polygon(&vertices)?;
        Ok(Domain { n: 2, kind: DomainKind::ConvexPolygon(vertices) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// The boundary graph `f` for epigraph-type domains.
    pub fn graph(&self) -> Option<LipschitzFn> {
        match &self.kind {
            DomainKind::HalfSpaceTrunc(b) => Some(LipschitzFn::zero(b.dim())),
            DomainKind::Epigraph { f, .. } => Some(f.clone()),
            DomainKind::Angular { alpha, .. } => Some(LipschitzFn::affine(vec![*alpha], 0.0)),
            _ => None,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.kind {
            DomainKind::Box(b) => b.contains(x),
            DomainKind::HalfSpaceTrunc(b) => b.contains(x) && x[b.dim() - 1] > 0.0,
            DomainKind::Epigraph { f, window, side } => {
                let n = x.len();
                let g = f.eval(&x[..n - 1]);
                let t = x[n - 1] - g;
                let on_side = match side {
                    Side::Upper => t > 0.0,
                    Side::Lower => t < 0.0,
                };
                on_side
                    && match window {
                        EpiWindow::Box(b) => b.contains(x),
                        EpiWindow::Band { lo, hi, height } => {
                            x[..n - 1].iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v >= a && v <= b)
                                && t.abs() <= *height
                        }
                    }
            }
            DomainKind::Angular { alpha, width, height, side } => {
                let t = x[1] - alpha * x[0];
                x[0] >= 0.0
                    && x[0] <= *width
                    && match side {
                        Side::Upper => t > 0.0 && t <= *height,
                        Side::Lower => t < 0.0 && t >= -*height,
                    }
            }
            DomainKind::ConvexPolygon(v) => polygon_contains(v, x),
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounding_box(&self) -> BoxRegion {
        match &self.kind {
            DomainKind::Box(b) | DomainKind::HalfSpaceTrunc(b) => b.clone(),
            DomainKind::Epigraph { f, window, side } => match window {
                EpiWindow::Box(b) => b.clone(),
                EpiWindow::Band { lo, hi, height } => {
                    let (fmin, fmax) = if lo.len() == 1 {
                        f.range_on(lo[0], hi[0])
                    } else {
                        corner_range(f, lo, hi)
                    };
                    let (a, b) = match side {
                        Side::Upper => (fmin, fmax + height),
                        Side::Lower => (fmin - height, fmax),
                    };
                    let mut l = lo.clone();
                    let mut h = hi.clone();
                    l.push(a);
                    h.push(b);
                    BoxRegion { lo: l, hi: h }
                }
            },
            DomainKind::Angular { alpha, width, height, side } => {
                let ys = [0.0, alpha * width];
                let (ylo, yhi) = (ys[0].min(ys[1]), ys[0].max(ys[1]));
                let (a, b) = match side {
                    Side::Upper => (ylo, yhi + height),
                    Side::Lower => (ylo - height, yhi),
                };
                BoxRegion { lo: vec![0.0, a], hi: vec![*width, b] }
            }
            DomainKind::ConvexPolygon(v) => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for p in v {
                    for d in 0..2 {
                        lo[d] = lo[d].min(p[d]);
                        hi[d] = hi[d].max(p[d]);
                    }
                }
                BoxRegion { lo, hi }
            }
        }
    }

    /// Exact volume where a closed form is available.
    pub fn exact_volume(&self) -> Option<f64> {
        match &self.kind {
            DomainKind::Box(b) | DomainKind::HalfSpaceTrunc(b) => Some(b.volume()),
            DomainKind::Angular { width, height, .. } => Some(width * height),
            DomainKind::ConvexPolygon(v) => Some(polygon_area(v)),
            DomainKind::Epigraph { f, window, side } => match window {
                EpiWindow::Band { lo, hi, height } => {
                    Some(lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>() * height)
                }
                EpiWindow::Box(b) if b.dim() == 2 => {
                    if let LipschitzKind::Affine { slope, intercept } = &f.kind {
                        Some(affine_box_area(slope[0], *intercept, b, *side))
                    } else {
                        None
                    }
                }
                _ => None,
            },
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            DomainKind::Box(_) => "box".into(),
            DomainKind::HalfSpaceTrunc(_) => "half-space truncation".into(),
            DomainKind::Epigraph { side: Side::Upper, .. } => "epigraph D".into(),
            DomainKind::Epigraph { side: Side::Lower, .. } => "subgraph D-".into(),
            DomainKind::Angular { side: Side::Upper, .. } => "angular domain D".into(),
            DomainKind::Angular { side: Side::Lower, .. } => "angular domain D-".into(),
            DomainKind::ConvexPolygon(_) => "convex polygon".into(),
        }
    }

    /// Image of the domain under `x -> tau x` (boxes and polygons only).
    pub fn scaled(&self, tau: f64) -> Result<Self> {
        match &self.kind {
            DomainKind::Box(b) => Ok(Domain::boxed(b.scaled(tau))),
            DomainKind::HalfSpaceTrunc(b) => Domain::half_space_trunc(b.scaled(tau)),
            DomainKind::ConvexPolygon(v) => {
                Domain::convex_polygon(v.iter().map(|p| [p[0] * tau, p[1] * tau]).collect())
            }
            _ => Err(Error::InvalidInput(format!("scaling not supported for {}", self.name()))),
        }
    }
}

fn corner_range(f: &LipschitzFn, lo: &[f64], hi: &[f64]) -> (f64, f64) {
    // affine in several variables: extremes sit at corners
    let k = lo.len();
    let mut fmin = f64::INFINITY;
    let mut fmax = f64::NEG_INFINITY;
    for mask in 0..(1usize << k) {
        let p: Vec<f64> = (0..k).map(|d| if mask >> d & 1 == 1 { hi[d] } else { lo[d] }).collect();
        let v = f.eval(&p);
        fmin = fmin.min(v);
        fmax = fmax.max(v);
    }
    let diam = dist(lo, hi);
    if matches!(f.kind, LipschitzKind::Affine { .. }) {
        (fmin, fmax)
    } else {
        (fmin - f.lipschitz() * diam, fmax + f.lipschitz() * diam)
    }
}

/// Area of `{x ∈ b : ±(x₂ − (s x₁ + c)) > 0}` by integrating the clipped height.
fn affine_box_area(s: f64, c: f64, b: &BoxRegion, side: Side) -> f64 {
    let (x0, x1, y0, y1) = (b.lo[0], b.hi[0], b.lo[1], b.hi[1]);
    // piecewise-linear in x: integrate exactly over breakpoints
    let mut bps = vec![x0, x1];
    if s != 0.0 {
        for y in [y0, y1] {
            let x = (y - c) / s;
            if x > x0 && x < x1 {
                bps.push(x);
            }
        }
    }
    bps.sort_by(f64::total_cmp);
    let height = |x: f64| {
        let g = (s * x + c).clamp(y0, y1);
        match side {
            Side::Upper => y1 - g,
            Side::Lower => g - y0,
        }
    };
    bps.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (height(w[0]) + height(w[1]))).sum()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn validate_polygon(v: &[[f64; 2]]) -> Result<()> {
    if v.len() < 3 {
        return Err(Error::InvalidPolygon("fewer than three vertices".into()));
    }
    let n = v.len();
    let scale = v.iter().map(|p| p[0].abs().max(p[1].abs())).fold(1.0, f64::max);
    for j in 0..n {
        let c = cross(v[(j + n - 1) % n], v[j], v[(j + 1) % n]);
        if c <= 1e-12 * scale * scale {
            return Err(Error::InvalidPolygon(format!(
                "vertex {j} is not strictly convex counter-clockwise (turn = {c:e})"
            )));
        }
    }
    // a strictly convex turn sequence can still wind twice
    let total: f64 = (0..n)
        .map(|j| {
            let p = v[(j + n - 1) % n];
            let q = v[(j + 1) % n];
            PI - interior_angle(p, v[j], q)
        })
        .sum();
    if (total - 2.0 * PI).abs() > 1e-9 {
        return Err(Error::InvalidPolygon("vertex list winds more than once".into()));
    }
    Ok(())
}

fn interior_angle(prev: [f64; 2], v: [f64; 2], next: [f64; 2]) -> f64 {
    let a = [next[0] - v[0], next[1] - v[1]];
    let b = [prev[0] - v[0], prev[1] - v[1]];
    let c = a[0] * b[1] - a[1] * b[0];
    let d = a[0] * b[0] + a[1] * b[1];
    c.atan2(d)
}

fn polygon_contains(v: &[[f64; 2]], x: &[f64]) -> bool {
    let p = [x[0], x[1]];
    let n = v.len();
    (0..n).all(|j| cross(v[j], v[(j + 1) % n], p) >= 0.0)
}

pub fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|j| v[j][0] * v[(j + 1) % n][1] - v[(j + 1) % n][0] * v[j][1]).sum::<f64>()
}

/// Rigid change of coordinates `x -> R x + t` with `R` orthogonal (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct Isometry {
    pub rot: Vec<f64>,
    pub shift: Vec<f64>,
    pub n: usize,
}

impl Isometry {
    pub fn identity(n: usize) -> Self {
        let mut rot = vec![0.0; n * n];
        for i in 0..n {
            rot[i * n + i] = 1.0;
        }
        Isometry { rot, shift: vec![0.0; n], n }
    }

    pub fn translation(shift: Vec<f64>) -> Self {
        let mut iso = Isometry::identity(shift.len());
        iso.shift = shift;
        iso
    }

    /// Counter-clockwise planar rotation by `theta` followed by a shift.
    pub fn rotation2(theta: f64, shift: [f64; 2]) -> Self {
        let (s, c) = theta.sin_cos();
        Isometry { rot: vec![c, -s, s, c], shift: shift.to_vec(), n: 2 }
    }

    pub fn from_parts(rot: Vec<f64>, shift: Vec<f64>) -> Result<Self> {
        let n = shift.len();
        if rot.len() != n * n {
            return Err(Error::InvalidInput("rotation matrix size mismatch".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let d: f64 = (0..n).map(|k| rot[i * n + k] * rot[j * n + k]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                if (d - e).abs() > 1e-10 {
                    return Err(Error::InvalidInput("matrix is not orthogonal".into()));
                }
            }
        }
        Ok(Isometry { rot, shift, n })
    }

    /// A random proper rotation and shift in `[-1, 1]^n`.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let shift: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if n == 2 {
            let theta = rng.random_range(0.0..2.0 * PI);
            let mut iso = Isometry::rotation2(theta, [0.0, 0.0]);
            iso.shift = shift;
            return iso;
        }
        let m = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let qr = m.qr();
        let mut q = qr.q();
        if q.determinant() < 0.0 {
            q.column_mut(0).neg_mut();
        }
        let rot = (0..n * n).map(|k| q[(k / n, k % n)]).collect();
        Isometry { rot, shift, n }
    }

    #[inline]
    pub fn rotate(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            out[i] = (0..n).map(|k| self.rot[i * n + k] * v[k]).sum();
        }
    }

    #[inline]
    pub fn rotate_inverse(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            out[i] = (0..n).map(|k| self.rot[k * n + i] * v[k]).sum();
        }
    }

    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.rotate(x, out);
        for (o, t) in out.iter_mut().zip(&self.shift) {
            *o += t;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = y.iter().zip(&self.shift).map(|(a, b)| a - b).collect();
        let mut out = vec![0.0; self.n];
        self.rotate_inverse(&d, &mut out);
        out
    }

    pub fn inverse(&self) -> Self {
        let n = self.n;
        let rot: Vec<f64> = (0..n * n).map(|k| self.rot[(k % n) * n + k / n]).collect();
        let mut shift = vec![0.0; n];
        let neg: Vec<f64> = self.shift.iter().map(|v| -v).collect();
        let inv = Isometry { rot, shift: vec![0.0; n], n };
        inv.rotate(&neg, &mut shift);
        Isometry { shift, ..inv }
    }

    pub fn is_identity(&self) -> bool {
        *self == Isometry::identity(self.n)
    }
}

/// Direction of a `Φ` map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiDirection {
    /// `Φ_η : D₋ → D`, `(x', f + η(f − x_n))`.
    Forward,
    /// `Φ*_η : D → D`, `(x', f + η(x_n − f))`.
    GraphSide,
}

/// The bi-Lipschitz maps `Φ_η` built on a boundary graph.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiMap {
    pub f: LipschitzFn,
    pub eta: f64,
    pub direction: PhiDirection,
}

impl PhiMap {
    pub fn new(f: LipschitzFn, eta: f64, direction: PhiDirection) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
        }
        Ok(PhiMap { f, eta, direction })
    }

    /// Evaluate the map; the forward map requires `x_n <= f(x')`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        let g = self.f.eval(&x[..n - 1]);
        let mut y = x.to_vec();
        match self.direction {
            PhiDirection::Forward => {
                if x[n - 1] > g {
                    return Err(Error::domain(x, "D- (below the graph)"));
                }
                y[n - 1] = g + self.eta * (g - x[n - 1]);
            }
            PhiDirection::GraphSide => y[n - 1] = g + self.eta * (x[n - 1] - g),
        }
        Ok(y)
    }

    /// Inverse map; for the forward direction this sends `D` back to `D₋`.
    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = y.len();
        let g = self.f.eval(&y[..n - 1]);
        let mut x = y.to_vec();
        match self.direction {
            PhiDirection::Forward => {
                if y[n - 1] < g {
                    return Err(Error::domain(y, "D (above the graph)"));
                }
                x[n - 1] = g + (g - y[n - 1]) / self.eta;
            }
            PhiDirection::GraphSide => x[n - 1] = g + (y[n - 1] - g) / self.eta,
        }
        Ok(x)
    }

    /// Jacobian determinant: `−η` forward, `η` on the graph side.
    pub fn jacobian_det(&self) -> f64 {
        match self.direction {
            PhiDirection::Forward => -self.eta,
            PhiDirection::GraphSide => self.eta,
        }
    }
}

/// Bound on `|∇Φ_η|` (Frobenius): `√(n−1+η²+(1+η)²M²)`; the inverse uses `1/η`.
pub fn phi_gradient_norm(n: usize, eta: f64, m: f64, inverse: bool) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
    }
    let e = if inverse { 1.0 / eta } else { eta };
    Ok(((n as f64 - 1.0) + e * e + (1.0 + e) * (1.0 + e) * m * m).sqrt())
}

/// `|x − y| / |Φ_λ⁻¹(x) − y|` for `x, y` above the graph; `0` when `x = y`.
pub fn lemma_a1_ratio(f: &LipschitzFn, lambda: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    for p in [x, y] {
        if p[n - 1] <= f.eval(&p[..n - 1]) {
            return Err(Error::domain(p, "D (strictly above the graph)"));
        }
    }
    if x == y {
        return Ok(0.0);
    }
    let map = PhiMap::new(f.clone(), lambda, PhiDirection::Forward)?;
    let xt = map.inverse(x)?;
    Ok(dist(x, y) / dist(&xt, y))
}

/// Explicit bound on `sup |x − y| / |Φ_λ⁻¹(x) − y|` from the two-case argument:
/// either `y'` is far from `x'` relative to `|Φ_λ⁻¹(x) − y|`, or `y` lies in a
/// narrow vertical cone above `Φ_λ⁻¹(x)` where the graph separates the points.
pub fn lemma_a1_bound(m: f64, lambda: f64) -> f64 {
    let eps = if m > 0.0 { (0.5f64).min(1.0 / (2.0 * m * (1.0 + lambda))) } else { 0.5 };
    let c3 = 1.0 / lambda - eps / (1.0 - eps * eps).sqrt() * m * (1.0 + 1.0 / lambda);
    let cone = if c3 > 0.0 { 1.0 / (c3 * (1.0 - eps * eps).sqrt()) } else { f64::INFINITY };
    1.0f64.max(1.0 / eps).max(cone)
}

/// Shape of a Whitney cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CellShape {
    Cube,
    /// Image of a square under `(x₁, x₂) ↦ (x₁, x₂ + αx₁)`.
    Parallelogram { alpha: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Lower-left corner in world coordinates.
    pub anchor: [f64; 2],
    pub side: f64,
    pub shape: CellShape,
    pub generation: i32,
    /// Cell sticks out of the truncation window.
    pub clipped: bool,
}

impl Cell {
    /// Coordinates in which the cell is the square `[anchor, anchor + side]²`.
    #[inline]
    fn pre(&self, x: &[f64]) -> [f64; 2] {
        match self.shape {
            CellShape::Cube => [x[0], x[1]],
            CellShape::Parallelogram { alpha } => [x[0], x[1] - alpha * x[0]],
        }
    }

    #[inline]
    fn pre_anchor(&self) -> [f64; 2] {
        self.pre(&self.anchor)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let p = self.pre(x);
        let a = self.pre_anchor();
        (0..2).all(|d| p[d] >= a[d] && p[d] <= a[d] + self.side)
    }

    pub fn contains_open(&self, x: &[f64], tol: f64) -> bool {
        let p = self.pre(x);
        let a = self.pre_anchor();
        (0..2).all(|d| p[d] > a[d] + tol && p[d] < a[d] + self.side - tol)
    }

    /// Doubled cell: centered for cubes, towards the positive axes for parallelograms.
    pub fn doubled_contains(&self, x: &[f64]) -> bool {
        let p = self.pre(x);
        let a = self.pre_anchor();
        let (lo, hi) = match self.shape {
            CellShape::Cube => (-0.5 * self.side, 1.5 * self.side),
            CellShape::Parallelogram { .. } => (0.0, 2.0 * self.side),
        };
        (0..2).all(|d| p[d] >= a[d] + lo && p[d] <= a[d] + hi)
    }

    /// Corners of the doubled cell in world coordinates, counter-clockwise.
    pub fn doubled_corners(&self) -> [[f64; 2]; 4] {
        let (lo, hi) = match self.shape {
            CellShape::Cube => (-0.5 * self.side, 1.5 * self.side),
            CellShape::Parallelogram { .. } => (0.0, 2.0 * self.side),
        };
        let a = self.pre_anchor();
        let pre = [[lo, lo], [hi, lo], [hi, hi], [lo, hi]];
        pre.map(|o| self.world([a[0] + o[0], a[1] + o[1]]))
    }

    fn world(&self, p: [f64; 2]) -> [f64; 2] {
        match self.shape {
            CellShape::Cube => p,
            CellShape::Parallelogram { alpha } => [p[0], p[1] + alpha * p[0]],
        }
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        let a = self.pre_anchor();
        let s = self.side;
        [[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]].map(|o| self.world([a[0] + o[0], a[1] + o[1]]))
    }

    pub fn center(&self) -> [f64; 2] {
        let a = self.pre_anchor();
        self.world([a[0] + 0.5 * self.side, a[1] + 0.5 * self.side])
    }

    /// Point of the cell for unit-square coordinates `(u, v)`.
    pub fn point(&self, u: f64, v: f64) -> [f64; 2] {
        let a = self.pre_anchor();
        self.world([a[0] + u * self.side, a[1] + v * self.side])
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }
}

#[derive(Clone, Debug)]
pub struct WhitneyCover {
    pub cells: Vec<Cell>,
    /// Measured overlap constant of the doubled cells.
    pub c1: usize,
    /// Measured graph-reach constant.
    pub c2: f64,
    pub graph: LipschitzFn,
    /// Smallest admitted cell side; the layer below it is left uncovered.
    pub min_side: f64,
}

impl WhitneyCover {
    /// Index of the owning cell, ties broken towards the earliest cell in the
    /// (generation, anchor) order the cells are stored in.
    pub fn owner(&self, x: &[f64]) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(x))
    }

    pub fn m(&self) -> f64 {
        self.graph.lipschitz()
    }
}

/// Build a Whitney cover of a truncated epigraph (dyadic cubes) or of a truncated
/// angular domain (parallelograms). Only `n = 2` is supported.
pub fn build_whitney_cover(domain: &Domain, min_side: f64) -> Result<WhitneyCover> {
    if domain.dim() != 2 {
        return Err(Error::Parameter("Whitney covers are built for n = 2 only".into()));
    }
    if !(min_side > 0.0) {
        return Err(Error::Parameter("min_side must be positive".into()));
    }
    let (cells, graph) = match &domain.kind {
        DomainKind::HalfSpaceTrunc(b) => (cube_cover(&LipschitzFn::zero(2), domain, b, min_side), LipschitzFn::zero(2)),
        DomainKind::Epigraph { f, window, side: Side::Upper } => {
            let b = match window {
                EpiWindow::Box(b) => b.clone(),
                EpiWindow::Band { .. } => domain.bounding_box(),
            };
            (cube_cover(f, domain, &b, min_side), f.clone())
        }
        DomainKind::Angular { alpha, width, height, side: Side::Upper } => (
            parallelogram_cover(*alpha, *width, *height, min_side),
            LipschitzFn::affine(vec![*alpha], 0.0),
        ),
        _ => {
            return Err(Error::Parameter(format!(
                "Whitney covers need a truncated epigraph or angular domain, got {}",
                domain.name()
            )))
        }
    };
    if cells.is_empty() {
        return Err(Error::Cover("no admissible cell; min_side too large for the window".into()));
    }
    let c2 = cells.iter().map(|c| graph_reach(c, &graph)).fold(1.0, f64::max);
    let mut cover = WhitneyCover { cells, c1: 0, c2, graph, min_side };
    cover.c1 = measure_overlap(&cover, domain, 100_000, 0x5eed);
    Ok(cover)
}

fn cube_cover(f: &LipschitzFn, domain: &Domain, window: &BoxRegion, min_side: f64) -> Vec<Cell> {
    let ext = (window.hi[0] - window.lo[0]).max(window.hi[1] - window.lo[1]);
    let mut side = 2f64.powi(ext.log2().ceil() as i32);
    let mut todo: Vec<[f64; 2]> = Vec::new();
    let i0 = (window.lo[0] / side).floor() as i64;
    let i1 = (window.hi[0] / side).ceil() as i64;
    let j0 = (window.lo[1] / side).floor() as i64;
    let j1 = (window.hi[1] / side).ceil() as i64;
    for i in i0..i1 {
        for j in j0..j1 {
            todo.push([i as f64 * side, j as f64 * side]);
        }
    }
    let mut cells = Vec::new();
    while !todo.is_empty() && side >= min_side * (1.0 - 1e-12) {
        let mut next = Vec::new();
        for a in todo {
            let (inside, outside) = window_overlap(domain, a, side);
            if inside == 0 {
                continue;
            }
            // doubled cube strictly above the graph?
            let lo = a[1] - 0.5 * side;
            let (_, fmax) = f.range_on(a[0] - 0.5 * side, a[0] + 1.5 * side);
            if lo > fmax {
                cells.push(Cell {
                    anchor: a,
                    side,
                    shape: CellShape::Cube,
                    generation: side.log2().round() as i32,
                    clipped: outside > 0,
                });
            } else {
                let h = 0.5 * side;
                for o in [[0.0, 0.0], [h, 0.0], [0.0, h], [h, h]] {
                    next.push([a[0] + o[0], a[1] + o[1]]);
                }
            }
        }
        todo = next;
        side *= 0.5;
    }
    sort_cells(&mut cells);
    cells
}

/// Counts of 9×9 cell samples inside and outside the window region.
fn window_overlap(domain: &Domain, a: [f64; 2], side: f64) -> (usize, usize) {
    let mut inside = 0;
    let mut outside = 0;
    for i in 0..9 {
        for j in 0..9 {
            let p = [a[0] + side * (i as f64 + 0.5) / 9.0, a[1] + side * (j as f64 + 0.5) / 9.0];
            if domain.contains(&p) {
                inside += 1;
            } else {
                outside += 1;
            }
        }
    }
    (inside, outside)
}

fn parallelogram_cover(alpha: f64, width: f64, height: f64, min_side: f64) -> Vec<Cell> {
    let mut cells = Vec::new();
    let mut k = (height.log2().ceil() as i32) - 1;
    loop {
        let a = 2f64.powi(k);
        if a < min_side * (1.0 - 1e-12) {
            break;
        }
        if a < height {
            let count = (width / a).ceil() as i64;
            for i in 0..count {
                let x1 = i as f64 * a;
                let clipped = x1 + a > width + 1e-12 || 2.0 * a > height + 1e-12;
                cells.push(Cell {
                    anchor: [x1, a + alpha * x1],
                    side: a,
                    shape: CellShape::Parallelogram { alpha },
                    generation: k,
                    clipped,
                });
            }
        }
        k -= 1;
    }
    sort_cells(&mut cells);
    cells
}

fn sort_cells(cells: &mut [Cell]) {
    cells.sort_by(|a, b| {
        b.generation
            .cmp(&a.generation)
            .then(a.anchor[0].total_cmp(&b.anchor[0]))
            .then(a.anchor[1].total_cmp(&b.anchor[1]))
    });
}

/// Smallest `c ≥ 1` for which the `c`-scaled cell (about its center) meets the graph.
fn graph_reach(cell: &Cell, f: &LipschitzFn) -> f64 {
    let meets = |c: f64| -> bool {
        let ctr = cell.center();
        let h = 0.5 * c * cell.side;
        match cell.shape {
            CellShape::Cube => {
                let (fmin, fmax) = f.range_on(ctr[0] - h, ctr[0] + h);
                fmin <= ctr[1] + h && fmax >= ctr[1] - h
            }
            CellShape::Parallelogram { alpha } => {
                // in sheared coordinates the graph is the axis
                let t = ctr[1] - alpha * ctr[0];
                t - h <= 0.0
            }
        }
    };
    let mut hi = 2.0;
    while !meets(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    let mut lo = 1.0;
    if meets(lo) {
        return 1.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn measure_overlap(cover: &WhitneyCover, domain: &Domain, samples: usize, seed: u64) -> usize {
    let bb = domain.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0;
    for _ in 0..samples {
        let x = [rng.random_range(bb.lo[0]..bb.hi[0]), rng.random_range(bb.lo[1]..bb.hi[1])];
        let count = cover.cells.iter().filter(|c| c.doubled_contains(&x)).count();
        worst = worst.max(count);
    }
    worst
}

/// Outcome of checking a cover against the Whitney properties.
#[derive(Clone, Debug, Default)]
pub struct CoverCheck {
    /// Largest number of cells whose interiors share a sampled point.
    pub max_interior_overlap: usize,
    /// Fraction of sampled points (at least `min_side` from the graph) owned by no cell.
    pub uncovered_fraction: f64,
    /// Doubled cells that leave `D`.
    pub doubled_outside: usize,
    pub c1: usize,
    /// Samples violating `a/2 ≤ |x_n − f| ≤ c₂√n(2+M)a`.
    pub distance_violations: usize,
    pub distance_samples: usize,
    /// Smallest and largest observed `|x_n − f| / a`.
    pub ratio_range: (f64, f64),
}

impl CoverCheck {
    pub fn passed(&self, c1_cap: usize) -> bool {
        self.max_interior_overlap <= 1
            && self.uncovered_fraction == 0.0
            && self.doubled_outside == 0
            && self.c1 <= c1_cap
            && self.distance_violations == 0
    }
}

/// Check disjointness, coverage, doubled-cell inclusion, overlap and the distance
/// bounds with `per_cell` random points in every cell.
pub fn check_whitney_cover(cover: &WhitneyCover, domain: &Domain, per_cell: usize, seed: u64) -> CoverCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = &cover.graph;
    let m = f.lipschitz();
    let upper = cover.c2 * 2f64.sqrt() * (2.0 + m);
    let mut out = CoverCheck { c1: cover.c1, ratio_range: (f64::INFINITY, 0.0), ..Default::default() };

    for cell in &cover.cells {
        for _ in 0..per_cell {
            let p = cell.point(rng.random::<f64>(), rng.random::<f64>());
            let d = (p[1] - f.eval1(p[0])).abs();
            let r = d / cell.side;
            out.ratio_range.0 = out.ratio_range.0.min(r);
            out.ratio_range.1 = out.ratio_range.1.max(r);
            if d < 0.5 * cell.side * (1.0 - 1e-12) || d > upper * cell.side {
                out.distance_violations += 1;
            }
            out.distance_samples += 1;
        }
        // doubled cell must stay strictly above the graph
        let corners = cell.doubled_corners();
        let above = match cell.shape {
            CellShape::Cube => {
                let (_, fmax) = f.range_on(corners[0][0], corners[1][0]);
                corners[0][1] > fmax
            }
            CellShape::Parallelogram { alpha } => corners[0][1] - alpha * corners[0][0] > 0.0,
        };
        if !above {
            out.doubled_outside += 1;
        }
    }

    let bb = domain.bounding_box();
    let trials = 20_000;
    let mut uncovered = 0;
    let mut counted = 0;
    for _ in 0..trials {
        let x = [rng.random_range(bb.lo[0]..bb.hi[0]), rng.random_range(bb.lo[1]..bb.hi[1])];
        let interior = cover.cells.iter().filter(|c| c.contains_open(&x, 1e-12)).count();
        out.max_interior_overlap = out.max_interior_overlap.max(interior);
        if domain.contains(&x) && x[1] - f.eval1(x[0]) >= cover.min_side * (2.0 + m) * 2.0 {
            counted += 1;
            if cover.owner(&x).is_none() {
                uncovered += 1;
            }
        }
    }
    out.uncovered_fraction = if counted > 0 { uncovered as f64 / counted as f64 } else { 0.0 };
    out
}

/// Local chart at a polygon vertex or boundary point.
#[derive(Clone, Debug)]
pub struct ChartMap {
    /// `T(x) = R(x − v)`; sends the boundary piece to the graph of `αx₁`.
    pub iso: Isometry,
    pub alpha: f64,
    pub radius: f64,
    /// Interior angle at the vertex (`π` for edge charts).
    pub angle: f64,
}

/// Rigid chart at vertex `j` of a convex polygon: the vertex goes to the origin,
/// the outgoing edge onto the ray along `(1, α)` and the incoming edge onto the
/// positive `x₂` axis, so the polygon becomes locally `{x₁ > 0, αx₁ < x₂}`.
pub fn rigid_chart_map(domain: &Domain, j: usize) -> Result<ChartMap> {
    let v = match &domain.kind {
        DomainKind::ConvexPolygon(v) => v,
        _ => return Err(Error::InvalidPolygon(format!("{} is not a polygon", domain.name()))),
    };
    let n = v.len();
    if j >= n {
        return Err(Error::InvalidInput(format!("vertex index {j} out of range")));
    }
    let (p, c, q) = (v[(j + n - 1) % n], v[j], v[(j + 1) % n]);
    let theta = interior_angle(p, c, q);
    if !(theta > 1e-12 && theta < PI - 1e-12) {
        return Err(Error::InvalidPolygon(format!("vertex {j} is degenerate (angle {theta})")));
    }
    let alpha = 1.0 / theta.tan();
    let e = [q[0] - c[0], q[1] - c[1]];
    let from = e[1].atan2(e[0]);
    let to = alpha.atan();
    let rot = Isometry::rotation2(to - from, [0.0, 0.0]);
    let mut shift = vec![0.0; 2];
    rot.rotate(&[-c[0], -c[1]], &mut shift);
    let iso = Isometry { shift, ..rot };

    let mut r = f64::INFINITY;
    for (i, w) in v.iter().enumerate() {
        if i != j {
            r = r.min(dist(w, &c));
        }
    }
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        if i == j || (i + 1) % n == j {
            continue;
        }
        r = r.min(point_segment_distance(c, a, b));
    }
    Ok(ChartMap { iso, alpha, radius: 0.45 * r, angle: theta })
}

/// Chart at a point `c` on edge `i` (from vertex `i` to `i + 1`): the edge goes
/// to the `x₁` axis with the interior above it.
pub fn edge_chart_map(domain: &Domain, i: usize, t: f64) -> Result<ChartMap> {
    let v = match &domain.kind {
        DomainKind::ConvexPolygon(v) => v,
        _ => return Err(Error::InvalidPolygon(format!("{} is not a polygon", domain.name()))),
    };
    let n = v.len();
    if i >= n || !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidInput("edge index or parameter out of range".into()));
    }
    let (a, b) = (v[i], v[(i + 1) % n]);
    let c = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    let from = (b[1] - a[1]).atan2(b[0] - a[0]);
    let rot = Isometry::rotation2(-from, [0.0, 0.0]);
    let mut shift = vec![0.0; 2];
    rot.rotate(&[-c[0], -c[1]], &mut shift);
    let mut r = dist(&c, &a).min(dist(&c, &b));
    for k in 0..n {
        if k != i {
            r = r.min(point_segment_distance(c, v[k], v[(k + 1) % n]).max(0.0));
        }
    }
    Ok(ChartMap { iso: Isometry { shift, ..rot }, alpha: 0.0, radius: 0.45 * r, angle: PI })
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    dist(&p, &[a[0] + t * ab[0], a[1] + t * ab[1]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_mcshane(f: &LipschitzFn, m: f64, x: f64) -> f64 {
        let (a, b) = f.native_interval.unwrap();
        (0..=20_000)
            .map(|i| a + (b - a) * i as f64 / 20_000.0)
            .map(|y| f.eval1(y) + m * (x - y).abs())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn mcshane_examples() {
        let zero = LipschitzFn::affine(vec![0.0], 0.0).on_interval(0.0, 1.0);
        let e = mcshane_extend(&zero, 0.0).unwrap();
        for x in [-3.0, 0.5, 7.0] {
            assert_eq!(e.eval1(x), 0.0);
        }
        let id = LipschitzFn::affine(vec![1.0], 0.0).on_interval(0.0, 1.0);
        let e = mcshane_extend(&id, 1.0).unwrap();
        assert_eq!(e.eval1(2.0), 2.0);
        assert!((e.eval1(2.0) - brute_mcshane(&id, 1.0, 2.0)).abs() < 1e-12);

        let tent = LipschitzFn::analytic(Formula::Abs { center: 0.5, slope: 1.0 }).on_interval(0.0, 1.0);
        let e = mcshane_extend(&tent, 1.0).unwrap();
        assert!((e.eval1(-1.0) - 1.5).abs() < 1e-15);
        assert!((e.eval1(-1.0) - brute_mcshane(&tent, 1.0, -1.0)).abs() < 1e-9);
    }

    #[test]
    fn mcshane_rejects_steep_function() {
        let f = LipschitzFn::affine(vec![2.0], 0.0).on_interval(0.0, 1.0);
        assert!(matches!(mcshane_extend(&f, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn phi_examples() {
        let flat = PhiMap::new(LipschitzFn::zero(2), 1.0, PhiDirection::Forward).unwrap();
        let y = flat.apply(&[0.3, -0.2]).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-15 && (y[1] - 0.2).abs() < 1e-15);
        let slope = PhiMap::new(LipschitzFn::affine(vec![0.5], 0.0), 2.0, PhiDirection::Forward).unwrap();
        assert_eq!(slope.apply(&[1.0, 0.0]).unwrap(), vec![1.0, 1.5]);
        assert_eq!(slope.apply(&[1.0, 0.5]).unwrap(), vec![1.0, 0.5]);
        assert!(matches!(slope.apply(&[1.0, 0.7]), Err(Error::Domain { .. })));
        assert_eq!(slope.jacobian_det(), -2.0);
    }

    #[test]
    fn gradient_norms() {
        assert!((phi_gradient_norm(2, 1.0, 0.0, false).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((phi_gradient_norm(2, 1.0, 0.0, true).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((phi_gradient_norm(3, 2.0, 1.0, false).unwrap() - 15f64.sqrt()).abs() < 1e-14);
        assert!(matches!(phi_gradient_norm(2, 0.0, 1.0, false), Err(Error::Parameter(_))));
    }

    #[test]
    fn lemma_a1_examples() {
        let f = LipschitzFn::zero(2);
        assert_eq!(lemma_a1_ratio(&f, 1.0, &[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        let r = lemma_a1_ratio(&f, 1.0, &[0.0, 1.0], &[0.0, 2.0]).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn half_space_cover_rows() {
        let d = Domain::half_space_trunc(BoxRegion::unit(2)).unwrap();
        let cover = build_whitney_cover(&d, 1.0 / 64.0).unwrap();
        for c in &cover.cells {
            // side equals distance from the axis
            assert_eq!(c.anchor[1], c.side);
            assert_eq!(c.side, 2f64.powi(c.generation));
        }
        assert!((cover.c2 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn angular_cover_parallelograms() {
        let d = Domain::angular(1.0, 1.0, 1.0, Side::Upper).unwrap();
        let cover = build_whitney_cover(&d, 1.0 / 32.0).unwrap();
        for c in &cover.cells {
            let s = c.side;
            let corners = c.corners();
            let base = [[0.0, 0.0], [1.0, 1.0], [1.0, 2.0], [0.0, 1.0]];
            for (k, b) in base.iter().enumerate() {
                assert!((corners[k][0] - c.anchor[0] - s * b[0]).abs() < 1e-14);
                assert!((corners[k][1] - c.anchor[1] - s * b[1]).abs() < 1e-14);
            }
        }
        assert!((cover.c2 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn square_vertex_chart() {
        let sq = Domain::convex_polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let chart = rigid_chart_map(&sq, 0).unwrap();
        assert!(chart.alpha.abs() < 1e-15);
        assert!((chart.angle - PI / 2.0).abs() < 1e-15);
        assert_eq!(chart.iso.apply(&[0.0, 0.0]), vec![0.0, 0.0]);
        let inside = chart.iso.apply(&[0.2, 0.1]);
        assert!(inside[0] > 0.0 && inside[1] > chart.alpha * inside[0]);
        assert!((chart.radius - 0.45).abs() < 1e-15);
    }

    #[test]
    fn collinear_vertex_rejected() {
        let r = Domain::convex_polygon(vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(r, Err(Error::InvalidPolygon(_))));
    }

    #[test]
    fn trapezoid_area() {
        let b = BoxRegion::unit(2);
        let d = Domain::epigraph(LipschitzFn::affine(vec![0.5], 0.0), EpiWindow::Box(b), Side::Upper).unwrap();
        assert!((d.exact_volume().unwrap() - 0.75).abs() < 1e-15);
    }
}
