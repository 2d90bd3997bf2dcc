//! Reflection-type extension operators across a Lipschitz graph and across the
//! edge of a planar wedge, their coefficients, and measured operator norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::geometry::{BoxRegion, Domain, DomainKind, EpiWindow, LipschitzFn, Side};
use crate::quadrature::{integrate_pairs, make_grid, Grid, PairKernel};
use crate::seminorms::{gagliardo, lp_norm, projected, projected_raw_between, FracParams, RATIO_GUARD};
use crate::vecops::abs_pow;

/// Which `δ` formula to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaVariant {
    /// `δ = 1 / (2 c₂ √n (2 + M))`
    #[default]
    TwoPlusM,
    /// `δ = 1 / (2 c₂ √n (1 + M))`
    OnePlusM,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtVariant {
    Epigraph,
    Angular { alpha: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtensionCoeffs {
    pub m_lip: f64,
    pub delta: f64,
    pub lambda: f64,
    pub mu: f64,
    pub k: f64,
    pub l: f64,
    pub m: f64,
    pub q: f64,
    pub variant: ExtVariant,
}

pub fn delta_for(m_lip: f64, n: usize, c2: f64, variant: DeltaVariant) -> f64 {
    let base = match variant {
        DeltaVariant::TwoPlusM => 2.0 + m_lip,
        DeltaVariant::OnePlusM => 1.0 + m_lip,
    };
    1.0 / (2.0 * c2 * (n as f64).sqrt() * base)
}

pub fn solve_coefficients(m_lip: f64, n: usize, c2: f64, variant: DeltaVariant) -> Result<ExtensionCoeffs> {
    if !(m_lip >= 0.0) || !m_lip.is_finite() {
        return Err(Error::Parameter(format!("Lipschitz constant must be finite and >= 0, got {m_lip}")));
    }
    if !(c2 >= 1.0) {
        return Err(Error::Parameter(format!("c2 must be >= 1, got {c2}")));
    }
    if n < 2 {
        return Err(Error::Parameter(format!("n must be at least 2, got {n}")));
    }
    let delta = delta_for(m_lip, n, c2, variant);
    assert!(delta > 0.0 && delta <= 0.5, "delta out of range: {delta}");
    ExtensionCoeffs::with_delta(m_lip, delta)
}

impl ExtensionCoeffs {
    /// Coefficients for a prescribed `δ ∈ (0, ½]`: `λ = 1 − δ`, `μ = 1 + δ`.
    pub fn with_delta(m_lip: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(Error::Parameter(format!("delta must lie in (0, 1/2], got {delta}")));
        }
        let (lambda, mu) = (1.0 - delta, 1.0 + delta);
        let mut c = ExtensionCoeffs::from_lambda_mu(lambda, mu)?;
        c.m_lip = m_lip;
        c.delta = delta;
        Ok(c)
    }

    /// The unique solution of the reflection conditions for `0 ≤ λ < μ`.
    pub fn from_lambda_mu(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda >= 0.0 && mu > lambda) {
            return Err(Error::Parameter(format!("need 0 <= lambda < mu, got {lambda}, {mu}")));
        }
        let d = mu - lambda;
        Ok(ExtensionCoeffs {
            m_lip: 0.0,
            delta: 0.5 * d,
            lambda,
            mu,
            k: (1.0 + mu) / d,
            l: -(1.0 + lambda) / d,
            m: -lambda * (1.0 + mu) / d,
            q: mu * (1.0 + lambda) / d,
            variant: ExtVariant::Epigraph,
        })
    }

    pub fn angular(mut self, alpha: f64) -> Self {
        self.variant = ExtVariant::Angular { alpha };
        self
    }

    /// `[k + ℓ − 1, m + q − 1, λk + m, μℓ + q]`, plus `αk(1+λ) + αℓ(1+μ)` for the
    /// angular variant.
    pub fn residuals(&self) -> Vec<f64> {
        let mut r = vec![
            self.k + self.l - 1.0,
            self.m + self.q - 1.0,
            self.lambda * self.k + self.m,
            self.mu * self.l + self.q,
        ];
        if let ExtVariant::Angular { alpha } = self.variant {
            r.push(alpha * self.k * (1.0 + self.lambda) + alpha * self.l * (1.0 + self.mu));
        }
        r
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals().iter().fold(0.0, |a, r| a.max(r.abs()))
    }

    /// Weight of the extra wedge term, `αk(1+λ)`.
    pub fn alpha_weight(&self) -> f64 {
        match self.variant {
            ExtVariant::Angular { alpha } => alpha * self.k * (1.0 + self.lambda),
            ExtVariant::Epigraph => 0.0,
        }
    }
}

/// The reflected pair `(Φ_λ x, Φ_μ x)` for `x` below the graph.
fn reflect(f: &LipschitzFn, c: &ExtensionCoeffs, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let g = f.eval(&x[..n - 1]);
    let mut a = x.to_vec();
    let mut b = x.to_vec();
    a[n - 1] = g + c.lambda * (g - x[n - 1]);
    b[n - 1] = g + c.mu * (g - x[n - 1]);
    (a, b)
}

/// The extension `E(u)` across the graph of `f`; `u` is used on `{x_n ≥ f(x')}`.
pub struct EpigraphExtension<U> {
    pub u: U,
    pub f: LipschitzFn,
    pub coeffs: ExtensionCoeffs,
    /// When set, composed points must lie in this domain (or on the graph).
    pub field_domain: Option<Domain>,
}

fn check_composed(dom: &Option<Domain>, f: &LipschitzFn, z: &[f64]) -> Result<()> {
    if let Some(d) = dom {
        let n = z.len();
        let on_graph = z[n - 1] == f.eval(&z[..n - 1]);
        if !on_graph && !d.contains(z) {
            return Err(Error::domain(z, d.name()));
        }
    }
    Ok(())
}

impl<U: VectorField> EpigraphExtension<U> {
    pub fn new(u: U, f: LipschitzFn, coeffs: ExtensionCoeffs) -> Self {
        EpigraphExtension { u, f, coeffs, field_domain: None }
    }

    pub fn with_field_domain(mut self, d: Domain) -> Self {
        self.field_domain = Some(d);
        self
    }

    pub fn try_eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        if x[n - 1] >= self.f.eval(&x[..n - 1]) {
            return Ok(self.u.eval(x));
        }
        let c = &self.coeffs;
        let (a, b) = reflect(&self.f, c, x);
        check_composed(&self.field_domain, &self.f, &a)?;
        check_composed(&self.field_domain, &self.f, &b)?;
        let (ua, ub) = (self.u.eval(&a), self.u.eval(&b));
        let mut out: Vec<f64> = (0..n - 1).map(|i| c.k * ua[i] + c.l * ub[i]).collect();
        out.push(c.m * ua[n - 1] + c.q * ub[n - 1]);
        Ok(out)
    }
}

impl<U: VectorField> VectorField for EpigraphExtension<U> {
    fn dim(&self) -> usize {
        self.u.dim()
    }

    /// Writes NaN when a composed point leaves the field domain; quadrature
    /// then reports the pair.
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self.try_eval(x) {
            Ok(v) => out[..v.len()].copy_from_slice(&v),
            Err(_) => out[..self.dim()].fill(f64::NAN),
        }
    }
}

/// The wedge extension across `x₂ = αx₁` (planar, `x₁ > 0`).
pub struct AngularExtension<U> {
    pub u: U,
    pub alpha: f64,
    pub coeffs: ExtensionCoeffs,
    /// Drops the `αk(1+λ)(u₂^λ − u₂^μ)` term from the first component.
    pub drop_alpha_term: bool,
    pub field_domain: Option<Domain>,
    graph: LipschitzFn,
}

impl<U: VectorField> AngularExtension<U> {
    pub fn new(u: U, alpha: f64, coeffs: ExtensionCoeffs) -> Self {
        AngularExtension {
            u,
            alpha,
            coeffs: coeffs.angular(alpha),
            drop_alpha_term: false,
            field_domain: None,
            graph: LipschitzFn::affine(vec![alpha], 0.0),
        }
    }

    pub fn without_alpha_term(mut self) -> Self {
        self.drop_alpha_term = true;
        self
    }

    pub fn with_field_domain(mut self, d: Domain) -> Self {
        self.field_domain = Some(d);
        self
    }

    pub fn try_eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 2 || self.u.dim() != 2 {
            return Err(Error::InvalidInput("the wedge extension is planar".into()));
        }
        if x[0] < 0.0 {
            return Err(Error::domain(x, "{x1 >= 0}"));
        }
        if x[1] >= self.alpha * x[0] {
            return Ok(self.u.eval(x));
        }
        let c = &self.coeffs;
        let (a, b) = reflect(&self.graph, c, x);
        check_composed(&self.field_domain, &self.graph, &a)?;
        check_composed(&self.field_domain, &self.graph, &b)?;
        let (ua, ub) = (self.u.eval(&a), self.u.eval(&b));
        let w = if self.drop_alpha_term { 0.0 } else { self.alpha * c.k * (1.0 + c.lambda) };
        Ok(vec![c.k * ua[0] + w * ua[1] + c.l * ub[0] - w * ub[1], c.m * ua[1] + c.q * ub[1]])
    }
}

impl<U: VectorField> VectorField for AngularExtension<U> {
    fn dim(&self) -> usize {
        2
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self.try_eval(x) {
            Ok(v) => out[..2].copy_from_slice(&v),
            Err(_) => out[..2].fill(f64::NAN),
        }
    }
}

/// Terms of the mixed-pair decomposition at `x` below and `y` above the graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixedTerms {
    /// `(E(u)(x) − u(y))·(x − y)`
    pub lhs: f64,
    /// `k(u^λ − u(y))·(x−y) + ℓ(u^μ − u(y))·(x−y) + (m−k)(u_n^λ − u_n^μ)(x_n − y_n)`
    pub first: f64,
    /// `k(u^λ − u(y))·(Φ_λx − y) + ℓ(u^μ − u(y))·(Φ_μx − y) + (k−m)(u_n^λ − u_n^μ)(y_n − f(x'))`
    pub second: f64,
    /// The three correction terms that cancel.
    pub corrections: [f64; 3],
    /// Sum of absolute values of all terms involved, for relative checks.
    pub scale: f64,
}

impl MixedTerms {
    pub fn correction_sum(&self) -> f64 {
        self.corrections.iter().sum()
    }

    /// Largest of the three identity defects, relative to `scale`.
    pub fn defect(&self) -> f64 {
        let s = self.scale.max(f64::MIN_POSITIVE);
        let a = (self.lhs - self.first).abs();
        let b = (self.lhs - (self.second + self.correction_sum())).abs();
        let c = self.correction_sum().abs();
        a.max(b).max(c) / s
    }
}

pub fn mixed_terms<U: VectorField>(ext: &EpigraphExtension<U>, x: &[f64], y: &[f64]) -> Result<MixedTerms> {
    let n = x.len();
    let f = &ext.f;
    let c = &ext.coeffs;
    let fx = f.eval(&x[..n - 1]);
    if !(x[n - 1] < fx) {
        return Err(Error::domain(x, "D- (strictly below the graph)"));
    }
    if !(y[n - 1] >= f.eval(&y[..n - 1])) {
        return Err(Error::domain(y, "D (above the graph)"));
    }
    let (a, b) = reflect(f, c, x);
    let (ua, ub, uy) = (ext.u.eval(&a), ext.u.eval(&b), ext.u.eval(y));
    let ex = ext.try_eval(x)?;
    let dot = |v: &[f64], w: &[f64], z: &[f64]| -> f64 { (0..n).map(|i| (v[i] - w[i]) * z[i]).sum() };
    let xy: Vec<f64> = (0..n).map(|i| x[i] - y[i]).collect();
    let ay: Vec<f64> = (0..n).map(|i| a[i] - y[i]).collect();
    let by: Vec<f64> = (0..n).map(|i| b[i] - y[i]).collect();
    let lhs = dot(&ex, &uy, &xy);
    let dn = ua[n - 1] - ub[n - 1];
    let t1 = c.k * dot(&ua, &uy, &xy);
    let t2 = c.l * dot(&ub, &uy, &xy);
    let t3 = (c.m - c.k) * dn * (x[n - 1] - y[n - 1]);
    let s1 = c.k * dot(&ua, &uy, &ay);
    let s2 = c.l * dot(&ub, &uy, &by);
    let s3 = (c.k - c.m) * dn * (y[n - 1] - fx);
    let t = x[n - 1] - fx;
    let corrections = [
        c.k * (ua[n - 1] - uy[n - 1]) * (t - c.lambda * (fx - x[n - 1])),
        c.l * (ub[n - 1] - uy[n - 1]) * (t - c.mu * (fx - x[n - 1])),
        (c.k - c.m) * dn * (fx - x[n - 1]),
    ];
    let scale = [lhs, t1, t2, t3, s1, s2, s3, corrections[0], corrections[1], corrections[2]]
        .iter()
        .map(|v| v.abs())
        .sum();
    Ok(MixedTerms { lhs, first: t1 + t2 + t3, second: s1 + s2 + s3, corrections, scale })
}

/// The lower window matched to `d` so that `Φ_λ` and `Φ_μ` (with `λ < μ`) map it
/// into `d`: the band depth is divided by `μ`.
pub fn lower_window(d: &Domain, mu: f64) -> Result<Domain> {
    // keep the deepest reflected point strictly inside against rounding
    let shrink = (1.0 - 1e-9) / mu;
    match &d.kind {
        DomainKind::HalfSpaceTrunc(b) => {
            let k = b.dim() - 1;
            if b.lo[k] != 0.0 {
                return Err(Error::InvalidInput("half-space window must touch the boundary".into()));
            }
            let mut lo = b.lo.clone();
            let hi = {
                let mut h = b.hi.clone();
                h[k] = 0.0;
                h
            };
            lo[k] = -b.hi[k] * shrink;
            Ok(Domain::boxed(BoxRegion::new(lo, hi)?))
        }
        DomainKind::Epigraph { f, window: EpiWindow::Band { lo, hi, height }, side: Side::Upper } => Domain::epigraph(
            f.clone(),
            EpiWindow::Band { lo: lo.clone(), hi: hi.clone(), height: height * shrink },
            Side::Lower,
        ),
        DomainKind::Angular { alpha, width, height, side: Side::Upper } => {
            Domain::angular(*alpha, *width, height * shrink, Side::Lower)
        }
        _ => Err(Error::InvalidInput(format!(
            "no matched lower window for {}; use a half-space box, an upper band epigraph or an upper wedge",
            d.name()
        ))),
    }
}

/// Every active quadrature node of `grid` must have composed points inside the field domain.
fn validate_nodes<F: Fn(&[f64]) -> Result<Vec<f64>>>(grid: &Grid, eval: F) -> Result<()> {
    let mut x = vec![0.0; grid.n];
    for i in 0..grid.len() {
        for k in 0..grid.nodes_per_cell() {
            if grid.node_active(i, k) {
                grid.node(i, k, &mut x);
                eval(&x)?;
            }
        }
    }
    Ok(())
}

/// The three terms of `[E u]^p_X(D ∪ D₋) = [u]^p_X(D) + [E u]^p_X(D₋) + 2 I_mix`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntSplit {
    pub upper: f64,
    pub lower: f64,
    pub mixed: f64,
}

impl IntSplit {
    pub fn total(&self) -> f64 {
        self.upper + self.lower + 2.0 * self.mixed
    }
}

#[derive(Clone, Debug)]
pub struct ExtensionNormRatio {
    pub split: IntSplit,
    /// `[E u]_X` on the joined window.
    pub extended: f64,
    pub u_x: f64,
    /// `|u|_W(D)` (epigraph) or `‖u‖_{Lᵖ}(D)` (wedge).
    pub context: f64,
    /// `[E u]_X / ([u]_X + (1+M)^{2+n/2p} M |u|_W)` or `[E u]_X / ([u]_X + ‖u‖_{Lᵖ})`.
    pub ratio: Option<f64>,
    /// `[E u]^p_X / ([u]^p_X + (1+M)^{n/2+2p} M^p |u|^p_W)`; the wedge uses `[u]^p_X + ‖u‖^p_{Lᵖ}`.
    pub ratio_power: Option<f64>,
}

/// Which extension to measure.
pub enum ExtensionKind {
    Epigraph,
    Angular { drop_alpha_term: bool },
}

/// Measure `E` on the window `domain` (`D`) and its matched lower window, grid size `h`.
pub fn extension_norm_ratio(
    u: &dyn VectorField,
    domain: &Domain,
    coeffs: &ExtensionCoeffs,
    kind: ExtensionKind,
    h: f64,
    params: FracParams,
) -> Result<ExtensionNormRatio> {
    let lower = lower_window(domain, coeffs.mu)?;
    let gu = make_grid(domain, h)?;
    let gl = make_grid(&lower, h)?;
    match kind {
        ExtensionKind::Epigraph => {
            let f = domain
                .graph()
                .ok_or_else(|| Error::InvalidInput(format!("{} has no boundary graph", domain.name())))?;
            let ext = EpigraphExtension::new(u, f, *coeffs).with_field_domain(domain.clone());
            validate_nodes(&gl, |x| ext.try_eval(x))?;
            let split = split_terms(&ext, u, &gu, &gl, params)?;
            let u_w = gagliardo(u, &gu, params)?.value;
            finish(split, params, u_w, Some(coeffs.m_lip))
        }
        ExtensionKind::Angular { drop_alpha_term } => {
            let alpha = match &domain.kind {
                DomainKind::Angular { alpha, .. } => *alpha,
                _ => return Err(Error::InvalidInput("the wedge extension needs an angular domain".into())),
            };
            let mut ext = AngularExtension::new(u, alpha, *coeffs).with_field_domain(domain.clone());
            ext.drop_alpha_term = drop_alpha_term;
            validate_nodes(&gl, |x| ext.try_eval(x))?;
            let split = split_terms(&ext, u, &gu, &gl, params)?;
            let lp = lp_norm(u, &gu, params.p)?;
            finish(split, params, lp, None)
        }
    }
}

fn split_terms(ext: &dyn VectorField, u: &dyn VectorField, gu: &Grid, gl: &Grid, params: FracParams) -> Result<IntSplit> {
    Ok(IntSplit {
        upper: projected(u, gu, params)?.raw,
        lower: projected(ext, gl, params)?.raw,
        mixed: projected_raw_between(ext, gl, gu, params)?,
    })
}

fn finish(split: IntSplit, params: FracParams, context: f64, m_lip: Option<f64>) -> Result<ExtensionNormRatio> {
    let p = params.p;
    let n = params.n as f64;
    let u_x = split.upper.max(0.0).powf(1.0 / p);
    let extended = split.total().max(0.0).powf(1.0 / p);
    let (den, den_p) = match m_lip {
        Some(m) => (
            u_x + (1.0 + m).powf(2.0 + n / (2.0 * p)) * m * context,
            split.upper + (1.0 + m).powf(n / 2.0 + 2.0 * p) * m.powf(p) * context.powf(p),
        ),
        None => (u_x + context, split.upper + context.powf(p)),
    };
    Ok(ExtensionNormRatio {
        extended,
        u_x,
        context,
        ratio: (den > RATIO_GUARD).then(|| extended / den),
        ratio_power: (den_p > RATIO_GUARD).then(|| split.total() / den_p),
        split,
    })
}

/// `|(u₂^λ(x) − u₂^μ(x))(x₁ − y₁)|^p / |x − y|^{2+p+ps}` for `x` below the edge.
struct IiNewKernel<'a> {
    u: &'a dyn VectorField,
    graph: LipschitzFn,
    lambda: f64,
    mu: f64,
    params: FracParams,
}

impl PairKernel for IiNewKernel<'_> {
    fn node_dim(&self) -> usize {
        1
    }

    fn prepare(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let g = self.graph.eval(&x[..1]);
        out[0] = if x[1] < g {
            let a = [x[0], g + self.lambda * (g - x[1])];
            let b = [x[0], g + self.mu * (g - x[1])];
            self.u.eval(&a)[1] - self.u.eval(&b)[1]
        } else {
            0.0
        };
        Ok(())
    }

    fn pair(&self, x: &[f64], vx: &[f64], y: &[f64], _vy: &[f64], d: f64) -> f64 {
        let FracParams { s, p, .. } = self.params;
        abs_pow(vx[0] * (x[0] - y[0]), p) / d.powf(2.0 + p + p * s)
    }

    fn symmetric(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub struct IiNew {
    pub value: f64,
    /// `([u]_X + ‖u‖_{Lᵖ})^p` on `D`.
    pub norm_p: f64,
    pub ratio: Option<f64>,
}

/// The wedge-specific mixed term over `D₋ × D`, relative to `‖u‖^p_X(D)`.
pub fn ii_new_ratio(u: &dyn VectorField, domain: &Domain, coeffs: &ExtensionCoeffs, h: f64, params: FracParams) -> Result<IiNew> {
    let alpha = match &domain.kind {
        DomainKind::Angular { alpha, side: Side::Upper, .. } => *alpha,
        _ => return Err(Error::InvalidInput("II_new needs an upper angular domain".into())),
    };
    if params.n != 2 || u.dim() != 2 {
        return Err(Error::InvalidInput("II_new is planar".into()));
    }
    let lower = lower_window(domain, coeffs.mu.max(coeffs.lambda))?;
    let gu = make_grid(domain, h)?;
    let gl = make_grid(&lower, h)?;
    let k = IiNewKernel { u, graph: LipschitzFn::affine(vec![alpha], 0.0), lambda: coeffs.lambda, mu: coeffs.mu, params };
    let value = integrate_pairs(&gl, &gu, &k)?;
    let norm = projected(u, &gu, params)?.value + lp_norm(u, &gu, params.p)?;
    let norm_p = norm.powf(params.p);
    Ok(IiNew { value, norm_p, ratio: (norm_p > RATIO_GUARD).then(|| value / norm_p) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{field_library, FieldSpec, RigidMotion};

    #[test]
    fn hand_case() {
        let c = ExtensionCoeffs::with_delta(0.0, 0.5).unwrap();
        assert_eq!((c.lambda, c.mu, c.k, c.l, c.m, c.q), (0.5, 1.5, 2.5, -1.5, -1.25, 2.25));
        assert!(c.max_residual() == 0.0);
    }

    #[test]
    fn delta_zero_slope() {
        let c = solve_coefficients(0.0, 2, 1.0, DeltaVariant::TwoPlusM).unwrap();
        assert!((c.delta - 1.0 / (4.0 * 2f64.sqrt())).abs() < 1e-16);
        assert!(c.max_residual() < 1e-14);
    }

    #[test]
    fn reflected_value() {
        let c = ExtensionCoeffs::with_delta(0.0, 0.5).unwrap();
        let u = field_library(&FieldSpec::Power { component: 1, axis: 1, exponent: 1.0 }, 2).unwrap();
        let e = EpigraphExtension::new(u, LipschitzFn::zero(2), c);
        let v = e.try_eval(&[0.0, -1.0]).unwrap();
        assert!((v[1] - 2.75).abs() < 1e-15);
    }

    #[test]
    fn constants_and_identity() {
        let c = solve_coefficients(1.0, 2, 3.0, DeltaVariant::TwoPlusM).unwrap();
        let b = RigidMotion::new(vec![0.0], vec![0.3, -1.7]).unwrap();
        let f = LipschitzFn::affine(vec![0.5], 0.1);
        let e = EpigraphExtension::new(&b, f.clone(), c);
        for x in [[0.2, -0.4], [0.7, 3.0], [-1.0, -5.0]] {
            let v = e.try_eval(&x).unwrap();
            assert!((v[0] - 0.3).abs() < 1e-14 && (v[1] + 1.7).abs() < 1e-14);
        }
        let a = AngularExtension::new(&b, 1.0, c);
        let v = a.try_eval(&[0.5, -0.2]).unwrap();
        assert!((v[0] - 0.3).abs() < 1e-14 && (v[1] + 1.7).abs() < 1e-14);
    }

    #[test]
    fn mixed_identity() {
        let c = solve_coefficients(0.5, 2, 3.0, DeltaVariant::TwoPlusM).unwrap();
        let u = field_library(&FieldSpec::RandomTrig { seed: 3, modes: 4 }, 2).unwrap();
        let e = EpigraphExtension::new(u, LipschitzFn::affine(vec![0.5], 0.0), c);
        let t = mixed_terms(&e, &[0.3, -0.4], &[0.6, 0.9]).unwrap();
        assert!(t.defect() < 1e-13, "{t:?}");
    }

    #[test]
    fn lower_windows() {
        let d = Domain::half_space_trunc(BoxRegion::unit(2)).unwrap();
        let l = lower_window(&d, 1.25).unwrap();
        assert!(l.contains(&[0.5, -0.79]) && !l.contains(&[0.5, -0.81]));
    }
}
