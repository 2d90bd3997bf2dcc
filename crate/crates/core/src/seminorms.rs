//! Scalar functionals: Gagliardo and projected seminorms, `Lᵖ` norms, the
//! Hardy-type boundary integral, the peridynamic energy, the cutoff product
//! ratio and the boundary-layer integral profile.

use crate::error::{Error, Result};
use crate::fields::{CutoffProduct, ScalarField, VectorField, ZeroExtended};
use crate::geometry::{BoxRegion, Domain, DomainKind, EpiWindow, LipschitzFn, PhiDirection, PhiMap, Side};
use crate::quadrature::{integrate_cells, integrate_pairs, make_grid, slope, Grid, PairKernel};
use crate::vecops::abs_pow;

/// Fractional order `s ∈ (0, 1)`, integrability `p ∈ (1, ∞)` and dimension `n ≥ 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracParams {
    pub s: f64,
    pub p: f64,
    pub n: usize,
}

/// Position of `ps` relative to one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsRegime {
    Below,
    Critical,
    Above,
}

impl FracParams {
    pub fn new(s: f64, p: f64, n: usize) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Parameter(format!("s must lie in (0, 1), got {s}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Parameter(format!("p must lie in (1, inf), got {p}")));
        }
        if n < 2 {
            return Err(Error::Parameter(format!("n must be at least 2, got {n}")));
        }
        Ok(FracParams { s, p, n })
    }

    pub fn regime(&self) -> PsRegime {
        let ps = self.p * self.s;
        if (ps - 1.0).abs() < 1e-12 {
            PsRegime::Critical
        } else if ps < 1.0 {
            PsRegime::Below
        } else {
            PsRegime::Above
        }
    }

    /// `n + ps`
    pub fn gagliardo_exponent(&self) -> f64 {
        self.n as f64 + self.p * self.s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeminormResult {
    /// The `p`-th root of `raw`.
    pub value: f64,
    pub raw: f64,
    pub h: f64,
    pub params: FracParams,
}

impl SeminormResult {
    fn new(raw: f64, h: f64, params: FracParams) -> Self {
        SeminormResult { value: raw.max(0.0).powf(1.0 / params.p), raw, h, params }
    }
}

fn check_dims(u: &dyn VectorField, grid: &Grid, params: &FracParams) -> Result<()> {
    if u.dim() != grid.n || params.n != grid.n {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: field {}, grid {}, params {}",
            u.dim(),
            grid.n,
            params.n
        )));
    }
    Ok(())
}

/// `|u(x) − u(y)|^p / |x − y|^{n+ps}`
pub struct GagliardoKernel<'a> {
    pub u: &'a dyn VectorField,
    pub params: FracParams,
}

impl PairKernel for GagliardoKernel<'_> {
    fn node_dim(&self) -> usize {
        self.params.n
    }

    fn prepare(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.u.eval_into(x, out);
        Ok(())
    }

    #[inline]
    fn pair(&self, _x: &[f64], ux: &[f64], _y: &[f64], uy: &[f64], d: f64) -> f64 {
        let q: f64 = ux.iter().zip(uy).map(|(a, b)| (b - a) * (b - a)).sum();
        let num = if self.params.p == 2.0 { q } else { q.powf(0.5 * self.params.p) };
        num / d.powf(self.params.gagliardo_exponent())
    }
}

/// Form of the projected integrand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectedForm {
    /// `|(u(y) − u(x))·(y − x)/|y − x||^p / |x − y|^{n+ps}`
    Normalized,
    /// `|(u(y) − u(x))·(y − x)|^p / |x − y|^{n+(s+1)p}`
    Unnormalized,
}

/// Projected difference quotient kernel.
pub struct ProjectedKernel<'a> {
    pub u: &'a dyn VectorField,
    pub params: FracParams,
    pub form: ProjectedForm,
}

impl PairKernel for ProjectedKernel<'_> {
    fn node_dim(&self) -> usize {
        self.params.n
    }

    fn prepare(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.u.eval_into(x, out);
        Ok(())
    }

    #[inline]
    fn pair(&self, x: &[f64], ux: &[f64], y: &[f64], uy: &[f64], d: f64) -> f64 {
        let mut dot = 0.0;
        let mut q = 0.0;
        for k in 0..ux.len() {
            let a = uy[k] - ux[k];
            dot += a * (y[k] - x[k]);
            q += a * a;
        }
        let FracParams { s, p, n } = self.params;
        match self.form {
            ProjectedForm::Normalized => {
                let t = dot / d;
                // Cauchy–Schwarz, restored against rounding
                let t2 = (t * t).min(q);
                let num = if p == 2.0 { t2 } else { t2.powf(0.5 * p) };
                num / d.powf(n as f64 + p * s)
            }
            ProjectedForm::Unnormalized => abs_pow(dot, p) / d.powf(n as f64 + (s + 1.0) * p),
        }
    }
}

/// `ρ(ξ) |(u(y) − u(x))·ξ|² / |ξ|⁴` with `ρ(ξ) = |ξ|^{−n−2(s−1)}`.
struct PeriKernel<'a> {
    u: &'a dyn VectorField,
    n: usize,
    s: f64,
}

impl PairKernel for PeriKernel<'_> {
    fn node_dim(&self) -> usize {
        self.n
    }

    fn prepare(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.u.eval_into(x, out);
        Ok(())
    }

    fn pair(&self, x: &[f64], ux: &[f64], y: &[f64], uy: &[f64], d: f64) -> f64 {
        let dot: f64 = (0..self.n).map(|k| (uy[k] - ux[k]) * (y[k] - x[k])).sum();
        let rho = d.powf(-(self.n as f64) - 2.0 * (self.s - 1.0));
        let d2 = d * d;
        rho * dot * dot / (d2 * d2)
    }
}

/// `|u|_{W^{s,p}}` on the grid's domain.
pub fn gagliardo(u: &dyn VectorField, grid: &Grid, params: FracParams) -> Result<SeminormResult> {
    check_dims(u, grid, &params)?;
    let raw = integrate_pairs(grid, grid, &GagliardoKernel { u, params })?;
    Ok(SeminormResult::new(raw, grid.h, params))
}

/// `[u]_{X^{s,p}}` on the grid's domain (normalized form).
pub fn projected(u: &dyn VectorField, grid: &Grid, params: FracParams) -> Result<SeminormResult> {
    projected_form(u, grid, params, ProjectedForm::Normalized)
}

pub fn projected_form(u: &dyn VectorField, grid: &Grid, params: FracParams, form: ProjectedForm) -> Result<SeminormResult> {
    check_dims(u, grid, &params)?;
    let raw = integrate_pairs(grid, grid, &ProjectedKernel { u, params, form })?;
    Ok(SeminormResult::new(raw, grid.h, params))
}

/// Raw projected `p`-power over `grid_x × grid_y`.
pub fn projected_raw_between(u: &dyn VectorField, gx: &Grid, gy: &Grid, params: FracParams) -> Result<f64> {
    integrate_pairs(gx, gy, &ProjectedKernel { u, params, form: ProjectedForm::Normalized })
}

/// `‖u‖_{Lᵖ}`
pub fn lp_norm(u: &dyn VectorField, grid: &Grid, p: f64) -> Result<f64> {
    let n = u.dim();
    let raw = integrate_cells(grid, |x| {
        let mut v = vec![0.0; n];
        u.eval_into(x, &mut v);
        let q: f64 = v.iter().map(|a| a * a).sum();
        Ok(if p == 2.0 { q } else { q.powf(0.5 * p) })
    })?;
    Ok(raw.powf(1.0 / p))
}

/// `W_ρ(u)` for `ρ(ξ) = |ξ|^{−n−2(s−1)}`.
pub fn perienergy(u: &dyn VectorField, grid: &Grid, s: f64) -> Result<f64> {
    FracParams::new(s, 2.0, grid.n)?;
    integrate_pairs(grid, grid, &PeriKernel { u, n: grid.n, s })
}

/// Point where the graph-side maps leave the field's domain.
fn star_points(f: &LipschitzFn, eta: f64, x: &[f64]) -> Result<Vec<f64>> {
    PhiMap::new(f.clone(), eta, PhiDirection::GraphSide)?.apply(x)
}

/// `∫_D |u_n(Φ*_λ x) − u_n(Φ*_μ x)|^p / |x_n − f(x')|^{ps} dx` over the grid's domain.
///
/// When `field_domain` is given, every composed point must lie in it.
pub fn hardy_lhs(
    u: &dyn VectorField,
    f: &LipschitzFn,
    lambda: f64,
    mu: f64,
    grid: &Grid,
    params: FracParams,
    field_domain: Option<&Domain>,
) -> Result<f64> {
    check_dims(u, grid, &params)?;
    let n = params.n;
    let (pl, pm) = (
        PhiMap::new(f.clone(), lambda, PhiDirection::GraphSide)?,
        PhiMap::new(f.clone(), mu, PhiDirection::GraphSide)?,
    );
    integrate_cells(grid, |x| {
        let t = x[n - 1] - f.eval(&x[..n - 1]);
        let xl = pl.apply(x)?;
        let xm = pm.apply(x)?;
        if let Some(dom) = field_domain {
            for z in [&xl, &xm] {
                if !dom.contains(z) {
                    return Err(Error::domain(z, dom.name()));
                }
            }
        }
        let a = u.eval(&xl)[n - 1];
        let b = u.eval(&xm)[n - 1];
        Ok(abs_pow(a - b, params.p) / t.abs().powf(params.p * params.s))
    })
}

#[derive(Clone, Debug)]
pub struct HardyRatio {
    pub lhs: f64,
    /// `[u]^p_X` on the (possibly enlarged) window.
    pub denominator: f64,
    /// `None` when the denominator vanishes (rigid fields).
    pub ratio: Option<f64>,
    pub window: Domain,
    pub enlargements: usize,
}

/// Below this, `[u]^p_X` counts as zero and the ratio is flagged.
pub const RATIO_GUARD: f64 = 1e-14;

/// Double the window in the `x_n` direction away from the graph.
pub fn enlarge_window(d: &Domain) -> Result<Domain> {
    match &d.kind {
        DomainKind::HalfSpaceTrunc(b) => {
            let mut hi = b.hi.clone();
            let k = b.dim() - 1;
            hi[k] = b.lo[k] + 2.0 * (b.hi[k] - b.lo[k]);
            Domain::half_space_trunc(BoxRegion::new(b.lo.clone(), hi)?)
        }
        DomainKind::Epigraph { f, window, side } => {
            let window = match window {
                EpiWindow::Band { lo, hi, height } => EpiWindow::Band { lo: lo.clone(), hi: hi.clone(), height: 2.0 * height },
                EpiWindow::Box(b) => {
                    let k = b.dim() - 1;
                    let (mut lo, mut hi) = (b.lo.clone(), b.hi.clone());
                    let ext = b.hi[k] - b.lo[k];
                    match side {
                        Side::Upper => hi[k] += ext,
                        Side::Lower => lo[k] -= ext,
                    }
                    EpiWindow::Box(BoxRegion::new(lo, hi)?)
                }
            };
            Domain::epigraph(f.clone(), window, *side)
        }
        DomainKind::Angular { alpha, width, height, side } => Domain::angular(*alpha, *width, 2.0 * height, *side),
        _ => Err(Error::InvalidInput(format!("cannot enlarge {}", d.name()))),
    }
}

/// `hardy_lhs / [u]^p_X`, with the window for `[u]_X` grown (factor 2, at most
/// three times) until it holds every composed point.
pub fn hardy_ratio(
    u: &dyn VectorField,
    lambda: f64,
    mu: f64,
    domain: &Domain,
    h: f64,
    params: FracParams,
) -> Result<HardyRatio> {
    let f = domain
        .graph()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no boundary graph", domain.name())))?;
    let grid = make_grid(domain, h)?;
    let mut window = domain.clone();
    let mut enlargements = 0;
    loop {
        let outside = (0..grid.len()).any(|i| {
            let x = grid.center(i);
            [lambda, mu]
                .iter()
                .any(|&eta| star_points(&f, eta, x).map_or(true, |z| !window.contains(&z)))
        });
        if !outside {
            break;
        }
        if enlargements == 3 {
            return Err(Error::domain(grid.center(0), "Hardy window after 3 enlargements"));
        }
        window = enlarge_window(&window)?;
        enlargements += 1;
    }
    let lhs = hardy_lhs(u, &f, lambda, mu, &grid, params, Some(&window))?;
    let wgrid = if enlargements == 0 { grid } else { make_grid(&window, h)? };
    let denominator = projected(u, &wgrid, params)?.raw;
    let ratio = (denominator >= RATIO_GUARD).then(|| lhs / denominator);
    Ok(HardyRatio { lhs, denominator, ratio, window, enlargements })
}

#[derive(Clone, Debug)]
pub struct ProductRatio {
    pub product: f64,
    pub u_lp: f64,
    pub u_x: f64,
    pub psi_norm: f64,
    pub ratio: Option<f64>,
}

/// `[ψu]_X(Ω̃) / (‖ψ‖_{W^{1,∞}} (‖u‖_{Lᵖ(Ω)} + [u]_X(Ω)))` with `ψu` extended by zero
/// outside `Ω` (`grid_u`'s domain); `grid_ext` covers `Ω̃`.
pub fn product_ratio(
    psi: &dyn ScalarField,
    psi_norm: f64,
    u: &dyn VectorField,
    grid_u: &Grid,
    grid_ext: &Grid,
    params: FracParams,
) -> Result<ProductRatio> {
    let prod = ZeroExtended { inner: CutoffProduct { inner: u, cutoff: psi }, domain: grid_u.domain.clone() };
    let product = projected(&prod, grid_ext, params)?.value;
    let u_lp = lp_norm(u, grid_u, params.p)?;
    let u_x = projected(u, grid_u, params)?.value;
    let den = psi_norm * (u_lp + u_x);
    let ratio = (den > RATIO_GUARD).then(|| product / den);
    Ok(ProductRatio { product, u_lp, u_x, psi_norm, ratio })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; q];
    let mut ws = vec![0.0; q];
    for i in 0..q {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pq = if q == 1 { x } else { p1 };
            let pq1 = if q == 1 { 1.0 } else { p0 };
            dp = q as f64 * (x * pq - pq1) / (x * x - 1.0);
            let dx = pq / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// Tensor Gauss–Legendre integration of `g` over the box `[lo, hi]`, each
/// axis split into `sub` panels.
fn box_quadrature<G: FnMut(&[f64]) -> f64>(lo: &[f64], hi: &[f64], gl: &(Vec<f64>, Vec<f64>), sub: usize, g: &mut G) -> f64 {
    let n = lo.len();
    let q = gl.0.len();
    let per_axis = q * sub;
    let total = per_axis.pow(n as u32);
    let mut acc = 0.0;
    let mut y = vec![0.0; n];
    for mut r in 0..total {
        let mut w = 1.0;
        for d in 0..n {
            let k = r % per_axis;
            r /= per_axis;
            let (panel, node) = (k / q, k % q);
            let width = (hi[d] - lo[d]) / sub as f64;
            let a = lo[d] + panel as f64 * width;
            y[d] = a + 0.5 * width * (gl.0[node] + 1.0);
            w *= 0.5 * width * gl.1[node];
        }
        acc += w * g(&y);
    }
    acc
}

/// Options of the boundary-layer profile quadrature.
#[derive(Clone, Copy, Debug)]
pub struct A2Options {
    /// Truncation: `|y' − z'| ≤ T`, `0 < y_n − f(y') ≤ T`.
    pub truncation: f64,
    /// Gauss points per axis and panel.
    pub points: usize,
    pub panels: usize,
}

impl Default for A2Options {
    fn default() -> Self {
        A2Options { truncation: 64.0, points: 8, panels: 2 }
    }
}

/// `(|z_n − f(z')|, I(z))` with `I(z) = ∫_D |z − y|^p / |Φ_λ⁻¹(z) − y|^{n+p+ps} dy`.
///
/// The integral is taken in the coordinates `(y', t = y_n − f(y'))` (unit
/// Jacobian) over dyadic shells around `(z', 0)` starting at a quarter of the
/// boundary distance.
pub fn lemma_a2_profile(
    f: &LipschitzFn,
    lambda: f64,
    params: FracParams,
    zs: &[Vec<f64>],
    opts: A2Options,
) -> Result<Vec<(f64, f64)>> {
    let n = params.n;
    let map = PhiMap::new(f.clone(), lambda, PhiDirection::Forward)?;
    let gl = gauss_legendre(opts.points);
    let expo = n as f64 + params.p + params.p * params.s;
    let mut out = Vec::with_capacity(zs.len());
    for z in zs {
        if z.len() != n {
            return Err(Error::InvalidInput("profile point has the wrong dimension".into()));
        }
        let a = z[n - 1] - f.eval(&z[..n - 1]);
        if !(a > 0.0) {
            return Err(Error::domain(z, "D (strictly above the graph)"));
        }
        let zt = map.inverse(z)?;
        let mut yw = vec![0.0; n];
        let mut g = |c: &[f64]| {
            yw[..n - 1].copy_from_slice(&c[..n - 1]);
            yw[n - 1] = f.eval(&c[..n - 1]) + c[n - 1];
            let num: f64 = z.iter().zip(&yw).map(|(p, q)| (p - q) * (p - q)).sum();
            let den: f64 = zt.iter().zip(&yw).map(|(p, q)| (p - q) * (p - q)).sum();
            num.powf(0.5 * params.p) / den.powf(0.5 * expo)
        };
        let zc = &z[..n - 1];
        let shell_box = |r: f64| -> (Vec<f64>, Vec<f64>) {
            let mut lo: Vec<f64> = zc.iter().map(|v| v - r).collect();
            let mut hi: Vec<f64> = zc.iter().map(|v| v + r).collect();
            lo.push(0.0);
            hi.push(r);
            (lo, hi)
        };
        let mut r = 0.25 * a;
        let (lo, hi) = shell_box(r);
        let mut total = box_quadrature(&lo, &hi, &gl, opts.panels, &mut g);
        while r < opts.truncation {
            let r2 = (2.0 * r).min(opts.truncation);
            let (ilo, ihi) = shell_box(r);
            let (olo, ohi) = shell_box(r2);
            // slab decomposition of the outer box minus the inner box
            for d in 0..n {
                let pieces: [(f64, f64); 2] = if d == n - 1 {
                    [(ihi[d], ohi[d]), (0.0, 0.0)]
                } else {
                    [(olo[d], ilo[d]), (ihi[d], ohi[d])]
                };
                for (a0, b0) in pieces {
                    if b0 <= a0 {
                        continue;
                    }
                    let mut lo = olo.clone();
                    let mut hi = ohi.clone();
                    lo[..d].copy_from_slice(&ilo[..d]);
                    hi[..d].copy_from_slice(&ihi[..d]);
                    lo[d] = a0;
                    hi[d] = b0;
                    total += box_quadrature(&lo, &hi, &gl, opts.panels, &mut g);
                }
            }
            r = r2;
        }
        out.push((a, total));
    }
    Ok(out)
}

/// Least-squares slope of `log I` against `log dist`.
pub fn profile_slope(profile: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = profile.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = profile.iter().map(|p| p.1.ln()).collect();
    slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{field_library, FieldSpec, RigidMotion};

    fn p2() -> FracParams {
        FracParams::new(0.5, 2.0, 2).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(FracParams::new(1.0, 2.0, 2).is_err());
        assert!(FracParams::new(0.5, 1.0, 2).is_err());
        assert!(FracParams::new(0.5, 2.0, 1).is_err());
        assert_eq!(p2().regime(), PsRegime::Critical);
        assert_eq!(FracParams::new(0.3, 2.0, 2).unwrap().regime(), PsRegime::Below);
    }

    #[test]
    fn constant_and_rigid() {
        let g = make_grid(&Domain::unit_square(), 1.0 / 8.0).unwrap();
        let c = field_library(&FieldSpec::Constant { value: vec![1.0, -2.0] }, 2).unwrap();
        assert_eq!(gagliardo(&c, &g, p2()).unwrap().raw, 0.0);
        let r = RigidMotion::new(vec![1.3], vec![0.2, 0.1]).unwrap();
        let w = gagliardo(&r, &g, p2()).unwrap().raw;
        let x = projected(&r, &g, p2()).unwrap().raw;
        assert!(w > 0.0 && (x / w).sqrt() < 1e-8);
    }

    #[test]
    fn lp_examples() {
        let g = make_grid(&Domain::unit_square(), 1.0 / 16.0).unwrap();
        let c = field_library(&FieldSpec::Constant { value: vec![1.0, 0.0] }, 2).unwrap();
        assert!((lp_norm(&c, &g, 2.0).unwrap() - 1.0).abs() < 1e-14);
        let id = field_library(&FieldSpec::Identity, 2).unwrap();
        let v = lp_norm(&id, &g, 2.0).unwrap();
        assert!((v - (2.0f64 / 3.0).sqrt()).abs() < 0.005 * v);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((i - 2.0 / 15.0).abs() < 1e-14);
    }
}
