//! Rigid-motion projections, Gram matrices of the quadratic forms behind the
//! seminorms, eigenvalue estimates of the Korn and Korn–Poincaré constants, and
//! the Galerkin peridynamic solve.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{rigid_generators, BasisSet, RigidMotion, VectorField};
use crate::geometry::BoxRegion;
use crate::quadrature::{integrate_pairs, slope, Grid, PairKernel, PairPlan};
use crate::seminorms::{gagliardo, projected, FracParams};
use crate::vecops::{abs_pow, tree_reduce};

/// Mass-matrix condition numbers above this reject the basis.
pub const CONDITION_CAP: f64 = 1e12;
/// Relative eigenvalue threshold used by the deflation checks.
const DEFLATION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantName {
    C1,
    C2,
    KornPoincare,
    Hardy,
    ExtNorm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Eig,
    Irls,
    RandomSearch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub name: ConstantName,
    pub value: f64,
    pub h: f64,
    pub degree: usize,
    pub method: Method,
    /// Relative change under refinement, when measured.
    pub error_indicator: Option<f64>,
    /// Random-search values only bound the constant from below.
    pub lower_bound: bool,
}

/// `(A, b)` minimizing `‖u − (Ax + b)‖_{Lᵖ}` on the grid.
#[derive(Clone, Debug)]
pub struct LpProjection {
    pub rigid: RigidMotion,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn cell_samples(u: &dyn VectorField, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n;
    let mut vals = vec![0.0; grid.len() * n];
    for i in 0..grid.len() {
        u.eval_into(grid.center(i), &mut vals[i * n..(i + 1) * n]);
    }
    let vols = (0..grid.len()).map(|i| grid.volume(i)).collect();
    (vals, vols)
}

fn centroid(grid: &Grid) -> Vec<f64> {
    let mut c = vec![0.0; grid.n];
    let mut v = 0.0;
    for i in 0..grid.len() {
        let w = grid.volume(i);
        v += w;
        for (d, x) in grid.center(i).iter().enumerate() {
            c[d] += w * x;
        }
    }
    c.iter().map(|x| x / v).collect()
}

fn combine_rigid(gens: &[RigidMotion], c: &[f64]) -> RigidMotion {
    let n = gens[0].n;
    let mut r = RigidMotion::zero(n);
    for (g, &a) in gens.iter().zip(c) {
        let scaled = RigidMotion { n, skew: g.skew.iter().map(|v| v * a).collect(), b: g.b.iter().map(|v| v * a).collect() };
        r = r.add(&scaled);
    }
    r
}

/// Least squares (`p = 2`) or IRLS fit of a rigid motion in `Lᵖ`.
pub fn rigid_project_lp(u: &dyn VectorField, grid: &Grid, p: f64) -> Result<LpProjection> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Parameter(format!("p must lie in (1, inf), got {p}")));
    }
    let n = grid.n;
    let gens = rigid_generators(n, &centroid(grid));
    let g = gens.len();
    let (vals, vols) = cell_samples(u, grid);
    // generator values at every center
    let mut gv = vec![0.0; grid.len() * g * n];
    for i in 0..grid.len() {
        for (k, r) in gens.iter().enumerate() {
            r.eval_into(grid.center(i), &mut gv[(i * g + k) * n..(i * g + k + 1) * n]);
        }
    }
    let residual_at = |c: &[f64], i: usize| -> f64 {
        let mut s = 0.0;
        for d in 0..n {
            let mut r = vals[i * n + d];
            for k in 0..g {
                r -= c[k] * gv[(i * g + k) * n + d];
            }
            s += r * r;
        }
        s.sqrt()
    };
    let objective = |c: &[f64]| -> f64 { (0..grid.len()).map(|i| vols[i] * abs_pow(residual_at(c, i), p)).sum() };
    let weighted_ls = |w: &[f64]| -> Result<Vec<f64>> {
        let mut a = DMatrix::<f64>::zeros(g, g);
        let mut b = DVector::<f64>::zeros(g);
        for i in 0..grid.len() {
            for k in 0..g {
                for l in 0..g {
                    let mut s = 0.0;
                    for d in 0..n {
                        s += gv[(i * g + k) * n + d] * gv[(i * g + l) * n + d];
                    }
                    a[(k, l)] += w[i] * s;
                }
                let mut s = 0.0;
                for d in 0..n {
                    s += gv[(i * g + k) * n + d] * vals[i * n + d];
                }
                b[k] += w[i] * s;
            }
        }
        let ch = Cholesky::new(a).ok_or_else(|| Error::Resolution("rigid fit normal equations are singular".into()))?;
        Ok(ch.solve(&b).iter().copied().collect())
    };
    let mut c = weighted_ls(&vols)?;
    let mut iterations = 0;
    let mut converged = true;
    if p != 2.0 {
        converged = false;
        let mut f = objective(&c);
        while iterations < 200 {
            iterations += 1;
            let w: Vec<f64> = (0..grid.len()).map(|i| vols[i] * residual_at(&c, i).max(1e-12).powf(p - 2.0)).collect();
            let cand = weighted_ls(&w)?;
            let mut step: Vec<f64> = cand.iter().zip(&c).map(|(a, b)| a - b).collect();
            let mut next: Vec<f64> = c.iter().zip(&step).map(|(a, s)| a + s).collect();
            let mut fn_ = objective(&next);
            let mut halvings = 0;
            while fn_ > f && halvings < 40 {
                for s in step.iter_mut() {
                    *s *= 0.5;
                }
                next = c.iter().zip(&step).map(|(a, s)| a + s).collect();
                fn_ = objective(&next);
                halvings += 1;
            }
            let change = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            if fn_ <= f {
                c = next;
                f = fn_;
            }
            if change < 1e-8 {
                converged = true;
                break;
            }
        }
    }
    let residual = objective(&c).powf(1.0 / p);
    Ok(LpProjection { rigid: combine_rigid(&gens, &c), residual, iterations, converged })
}

/// `(u(x) − u(y))·(v(x) − v(y)) / |x − y|^{n+2s}` for a list of fields at once:
/// node data holds every field; the result matrix is accumulated by the caller.
struct FieldsKernel<'a> {
    fields: &'a [&'a dyn VectorField],
    n: usize,
}

impl FieldsKernel<'_> {
    fn node_values(&self, x: &[f64], out: &mut [f64]) {
        for (k, f) in self.fields.iter().enumerate() {
            f.eval_into(x, &mut out[k * self.n..(k + 1) * self.n]);
        }
    }
}

/// `⟨u, v⟩_W` for every pair of the given fields (`p = 2`), by one quadrature pass
/// per entry of the upper triangle.
pub fn gagliardo_bilinear(fields: &[&dyn VectorField], grid: &Grid, s: f64) -> Result<DMatrix<f64>> {
    let m = fields.len();
    let n = grid.n;
    let kf = FieldsKernel { fields, n };
    let mut out = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            struct Entry<'a> {
                k: &'a FieldsKernel<'a>,
                a: usize,
                b: usize,
                m: usize,
                beta: f64,
            }
            impl PairKernel for Entry<'_> {
                fn node_dim(&self) -> usize {
                    self.m * self.k.n
                }
                fn prepare(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
                    self.k.node_values(x, out);
                    Ok(())
                }
                fn pair(&self, _x: &[f64], vx: &[f64], _y: &[f64], vy: &[f64], d: f64) -> f64 {
                    let n = self.k.n;
                    let mut s = 0.0;
                    for c in 0..n {
                        s += (vx[self.a * n + c] - vy[self.a * n + c]) * (vx[self.b * n + c] - vy[self.b * n + c]);
                    }
                    s / d.powf(self.beta)
                }
            }
            let e = Entry { k: &kf, a, b, m, beta: n as f64 + 2.0 * s };
            let v = integrate_pairs(grid, grid, &e)?;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// Minimizer over skew `A` of `|u − Ax|_{W^{s,p}}` (translations do not change
/// the seminorm).
#[derive(Clone, Debug)]
pub struct SeminormProjection {
    pub rigid: RigidMotion,
    /// `inf_r |u − r|^p_{W^{s,p}}` (raw `p`-power).
    pub raw: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn rigid_project_seminorm(u: &dyn VectorField, grid: &Grid, params: FracParams) -> Result<SeminormProjection> {
    let n = grid.n;
    let c = centroid(grid);
    let rots: Vec<RigidMotion> = rigid_generators(n, &c).into_iter().skip(n).collect();
    let nr = rots.len();
    let mut fields: Vec<&dyn VectorField> = vec![u];
    for r in &rots {
        fields.push(r);
    }
    let b = gagliardo_bilinear(&fields, grid, params.s)?;
    let h = b.view((1, 1), (nr, nr)).into_owned();
    let g = b.view((1, 0), (nr, 1)).into_owned();
    let mut a: Vec<f64> = match Cholesky::new(h) {
        Some(ch) => ch.solve(&g).iter().copied().collect(),
        None => vec![0.0; nr],
    };
    let eval = |a: &[f64]| -> Result<f64> {
        let w = minus_rotation_eval(u, &rots, a);
        Ok(gagliardo(&w, grid, params)?.raw)
    };
    let mut iterations = 0;
    let mut converged = true;
    let mut raw = eval(&a)?;
    if params.p != 2.0 {
        converged = false;
        // Newton steps with central finite differences, backtracking on increase
        let scale = 1.0 + a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let eps = 1e-4 * scale;
        while iterations < 100 {
            iterations += 1;
            let mut step = vec![0.0; nr];
            for k in 0..nr {
                let mut ap = a.clone();
                let mut am = a.clone();
                ap[k] += eps;
                am[k] -= eps;
                let (fp, fm) = (eval(&ap)?, eval(&am)?);
                let grad = (fp - fm) / (2.0 * eps);
                let curv = (fp - 2.0 * raw + fm) / (eps * eps);
                step[k] = if curv > 0.0 { -grad / curv } else { -grad };
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand: Vec<f64> = a.iter().zip(&step).map(|(x, s)| x + t * s).collect();
                let f = eval(&cand)?;
                if f <= raw {
                    a = cand;
                    raw = f;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            let change = t * step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            if !accepted || change < 1e-8 {
                converged = true;
                break;
            }
        }
    }
    let rigid = RigidMotion { n, skew: a.clone(), b: vec![0.0; n] };
    Ok(SeminormProjection { rigid, raw, iterations, converged })
}

/// `u − Σ a_k r_k`
struct MinusRotation<'a> {
    u: &'a dyn VectorField,
    rots: &'a [RigidMotion],
    a: &'a [f64],
}

impl VectorField for MinusRotation<'_> {
    fn dim(&self) -> usize {
        self.u.dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        self.u.eval_into(x, out);
        let mut tmp = vec![0.0; n];
        for (r, &c) in self.rots.iter().zip(self.a) {
            r.eval_into(x, &mut tmp);
            for d in 0..n {
                out[d] -= c * tmp[d];
            }
        }
    }
}

fn minus_rotation_eval<'a>(u: &'a dyn VectorField, rots: &'a [RigidMotion], a: &'a [f64]) -> MinusRotation<'a> {
    MinusRotation { u, rots, a }
}

/// The three `p = 2` forms on a basis.
#[derive(Clone)]
pub struct GramForms {
    pub basis: Arc<BasisSet>,
    pub w: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub h: f64,
    pub params: FracParams,
}

impl std::fmt::Debug for GramForms {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GramForms")
            .field("len", &self.len())
            .field("degree", &self.basis.degree)
            .field("h", &self.h)
            .field("params", &self.params)
            .finish()
    }
}

struct BasisNodes<'a> {
    basis: &'a BasisSet,
}

impl PairKernel for BasisNodes<'_> {
    fn node_dim(&self) -> usize {
        self.basis.len() * self.basis.n
    }
    fn prepare(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.basis.eval_all(x, out);
        Ok(())
    }
    fn pair(&self, _: &[f64], _: &[f64], _: &[f64], _: &[f64], _: f64) -> f64 {
        0.0
    }
}

/// `G += Rᵀ R` for a row-major `rows × m` matrix `R`.
fn add_gram(g: &mut [f64], r: &[f64], rows: usize, m: usize) {
    if rows == 0 {
        return;
    }
    // SAFETY: slices sized rows*m and m*m with the strides given
    unsafe {
        matrixmultiply::dgemm(
            m,
            rows,
            m,
            1.0,
            r.as_ptr(),
            1,
            m as isize,
            r.as_ptr(),
            m as isize,
            1,
            1.0,
            g.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

fn symmetrize(v: Vec<f64>, m: usize) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(m, m, &v);
    (&a + a.transpose()) * 0.5
}

/// Gram matrices of `|·|²_W`, `[·]²_X` and `‖·‖²_{L²}` on the basis.
pub fn assemble_gram(basis: Arc<BasisSet>, grid: &Grid, params: FracParams) -> Result<GramForms> {
    if params.p != 2.0 {
        return Err(Error::Parameter("Gram forms need p = 2".into()));
    }
    if basis.n != grid.n || params.n != grid.n {
        return Err(Error::InvalidInput("basis, grid and params dimensions differ".into()));
    }
    let n = grid.n;
    let m = basis.len();
    let beta = n as f64 + 2.0 * params.s;
    let plan = PairPlan::new(grid, grid, true)?;
    let nodes = BasisNodes { basis: &basis };
    let parts = plan.map(|batch| {
        let (vx, vy) = crate::quadrature::prepare_nodes(&nodes, batch)?;
        let stride = m * n;
        let pairs = batch.pairs.len();
        let mut rw = vec![0.0; pairs * n * m];
        let mut rx = vec![0.0; pairs * m];
        for (t, p) in batch.pairs.iter().enumerate() {
            let (x, y) = (batch.x(p.ix), batch.y(p.iy));
            let ax = &vx[p.ix as usize * stride..(p.ix as usize + 1) * stride];
            let ay = &vy[p.iy as usize * stride..(p.iy as usize + 1) * stride];
            let sw = (p.w / p.d.powf(beta)).sqrt();
            if !sw.is_finite() {
                return Err(Error::NonFinite { x: x.to_vec(), y: y.to_vec() });
            }
            let e: Vec<f64> = (0..n).map(|c| (y[c] - x[c]) / p.d).collect();
            for i in 0..m {
                let mut proj = 0.0;
                for c in 0..n {
                    let diff = ay[i * n + c] - ax[i * n + c];
                    rw[(t * n + c) * m + i] = sw * diff;
                    proj += diff * e[c];
                }
                rx[t * m + i] = sw * proj;
            }
        }
        let mut gw = vec![0.0; m * m];
        let mut gx = vec![0.0; m * m];
        add_gram(&mut gw, &rw, pairs * n, m);
        add_gram(&mut gx, &rx, pairs, m);
        Ok((gw, gx))
    })?;
    let (gw, gx) = tree_reduce(parts, |(mut a, mut b), (c, d)| {
        for (u, v) in a.iter_mut().zip(&c) {
            *u += v;
        }
        for (u, v) in b.iter_mut().zip(&d) {
            *u += v;
        }
        (a, b)
    })
    .unwrap_or((vec![0.0; m * m], vec![0.0; m * m]));
    let mut mass = vec![0.0; m * m];
    let mut vals = vec![0.0; m * n];
    let mut rows = vec![0.0; n * m];
    for i in 0..grid.len() {
        basis.eval_all(grid.center(i), &mut vals);
        let sv = grid.volume(i).sqrt();
        for k in 0..m {
            for c in 0..n {
                rows[c * m + k] = sv * vals[k * n + c];
            }
        }
        add_gram(&mut mass, &rows, n, m);
    }
    let forms = GramForms {
        basis,
        w: symmetrize(gw, m),
        x: symmetrize(gx, m),
        mass: symmetrize(mass, m),
        h: grid.h,
        params,
    };
    let cond = forms.mass_condition();
    if !(cond < CONDITION_CAP) {
        return Err(Error::BasisRejected(format!("mass matrix condition number {cond:.3e} exceeds {CONDITION_CAP:.0e}")));
    }
    Ok(forms)
}

fn select(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

impl GramForms {
    pub fn len(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn mass_condition(&self) -> f64 {
        let e = SymmetricEigen::new(self.mass.clone()).eigenvalues;
        let (lo, hi) = e.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// The forms of the nested sub-basis of degree `degree`.
    pub fn restrict(&self, degree: usize) -> GramForms {
        let (sub, idx) = self.basis.restrict(degree);
        GramForms {
            basis: Arc::new(sub),
            w: select(&self.w, &idx, &idx),
            x: select(&self.x, &idx, &idx),
            mass: select(&self.mass, &idx, &idx),
            h: self.h,
            params: self.params,
        }
    }

    fn cosine_idx(&self) -> Vec<usize> {
        (0..self.basis.cosine_len()).collect()
    }

    fn rigid_idx(&self) -> Vec<usize> {
        self.basis.rigid_range().collect()
    }

    /// Coefficient-space map `Z` (`N × cosine_len`) sending a cosine combination
    /// to its mass-orthogonal complement of the rigid span.
    fn deflation(&self) -> Result<DMatrix<f64>> {
        let c = self.cosine_idx();
        let r = self.rigid_idx();
        let nb = self.len();
        let mut z = DMatrix::zeros(nb, c.len());
        for (j, &i) in c.iter().enumerate() {
            z[(i, j)] = 1.0;
        }
        if !r.is_empty() {
            let mrr = select(&self.mass, &r, &r);
            let mrc = select(&self.mass, &r, &c);
            let ch = Cholesky::new(mrr).ok_or_else(|| Error::BasisRejected("rigid block of the mass matrix is singular".into()))?;
            let p = ch.solve(&mrc);
            for (a, &i) in r.iter().enumerate() {
                for j in 0..c.len() {
                    z[(i, j)] = -p[(a, j)];
                }
            }
        }
        Ok(z)
    }

    /// `vᵀ W v / vᵀ (X + M) v`
    pub fn korn2_ratio(&self, v: &DVector<f64>) -> f64 {
        let num = v.dot(&(&self.w * v));
        let den = v.dot(&(&self.x * v)) + v.dot(&(&self.mass * v));
        num / den
    }
}

/// Largest `λ` with `A v = λ B v`, `B` symmetric positive definite, and its eigenvector.
pub fn max_generalized_eig(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let ch = Cholesky::new(b.clone()).ok_or_else(|| Error::BasisRejected("quotient denominator is not positive definite".into()))?;
    let l = ch.l();
    let y = l.solve_lower_triangular(a).ok_or_else(|| Error::BasisRejected("triangular solve failed".into()))?;
    let c = l.solve_lower_triangular(&y.transpose()).ok_or_else(|| Error::BasisRejected("triangular solve failed".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let (k, lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bk, bv), (i, &v)| if v > bv { (i, v) } else { (bk, bv) });
    let w = eig.eigenvectors.column(k).into_owned();
    let v = l.transpose().solve_upper_triangular(&w).ok_or_else(|| Error::BasisRejected("triangular solve failed".into()))?;
    Ok((lam, v))
}

/// Options of the `C₂` estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Korn2Method {
    Eig,
    RandomSearch { samples: usize, seed: u64 },
}

/// An eigen-estimate with the maximizing coefficient vector (full basis).
#[derive(Clone, Debug)]
pub struct EigEstimate {
    pub estimate: ConstantEstimate,
    pub lambda: f64,
    pub coeffs: DVector<f64>,
}

pub fn estimate_korn2_constant(forms: &GramForms, method: Korn2Method) -> Result<EigEstimate> {
    let nb = forms.len();
    match method {
        Korn2Method::Eig => {
            let den = &forms.x + &forms.mass;
            let (lambda, v) = max_generalized_eig(&forms.w, &den)?;
            Ok(EigEstimate {
                estimate: ConstantEstimate {
                    name: ConstantName::C2,
                    value: lambda,
                    h: forms.h,
                    degree: forms.degree(),
                    method: Method::Eig,
                    error_indicator: None,
                    lower_bound: false,
                },
                lambda,
                coeffs: v,
            })
        }
        Korn2Method::RandomSearch { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut best = (f64::NEG_INFINITY, DVector::zeros(nb));
            for _ in 0..samples {
                let v = random_unit(&mut rng, nb);
                let r = forms.korn2_ratio(&v);
                if r > best.0 {
                    best = (r, v);
                }
            }
            Ok(EigEstimate {
                estimate: ConstantEstimate {
                    name: ConstantName::C2,
                    value: best.0,
                    h: forms.h,
                    degree: forms.degree(),
                    method: Method::RandomSearch,
                    error_indicator: None,
                    lower_bound: true,
                },
                lambda: best.0,
                coeffs: best.1,
            })
        }
    }
}

pub fn random_unit<R: Rng>(rng: &mut R, m: usize) -> DVector<f64> {
    loop {
        // Box–Muller normal samples give a uniform direction
        let v = DVector::from_fn(m, |_, _| {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            (-2.0 * (1.0 - a).ln()).sqrt() * (std::f64::consts::TAU * b).cos()
        });
        let nv = v.norm();
        if nv > 1e-12 {
            return v / nv;
        }
    }
}

/// Random search for `|u|^p_W / ([u]^p_X + ‖u‖^p_{Lᵖ})` over unit combinations of
/// the basis, for any `p` (a lower bound for `C₂`).
pub fn korn2_random_search(basis: Arc<BasisSet>, grid: &Grid, params: FracParams, samples: usize, seed: u64) -> Result<ConstantEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..samples {
        let v = random_unit(&mut rng, basis.len());
        let u = basis.combination(v.iter().copied().collect());
        let w = gagliardo(&u, grid, params)?.raw;
        let x = projected(&u, grid, params)?.raw;
        let l = crate::seminorms::lp_norm(&u, grid, params.p)?.powf(params.p);
        best = best.max(w / (x + l));
    }
    Ok(ConstantEstimate {
        name: ConstantName::C2,
        value: best,
        h: grid.h,
        degree: basis.degree,
        method: Method::RandomSearch,
        error_indicator: None,
        lower_bound: true,
    })
}

/// Quotient on the rigid-deflated cosine span: numerator form vs `[·]²_X`.
fn deflated_eig(forms: &GramForms, numerator: &DMatrix<f64>, name: ConstantName) -> Result<EigEstimate> {
    if forms.basis.cosine_len() == 0 {
        return Err(Error::BasisRejected("nothing left after removing rigid motions".into()));
    }
    let z = forms.deflation()?;
    let xz = z.transpose() * &forms.x * &z;
    let xz = (&xz + xz.transpose()) * 0.5;
    let tr = xz.trace();
    let min_eig = SymmetricEigen::new(xz.clone()).eigenvalues.min();
    if !(min_eig > DEFLATION_TOL * tr) {
        return Err(Error::BasisRejected(format!(
            "projected form is singular on the deflated span (min eigenvalue {min_eig:.3e}, trace {tr:.3e})"
        )));
    }
    let (lambda, v) = max_generalized_eig(numerator, &xz)?;
    let coeffs = &z * v;
    Ok(EigEstimate {
        estimate: ConstantEstimate {
            name,
            value: lambda,
            h: forms.h,
            degree: forms.degree(),
            method: Method::Eig,
            error_indicator: None,
            lower_bound: false,
        },
        lambda,
        coeffs,
    })
}

/// `C₁`: largest `inf_r |u − r|²_W / [u]²_X` on the span (modulo rigid motions).
pub fn estimate_korn1_constant(forms: &GramForms) -> Result<EigEstimate> {
    let z = forms.deflation()?;
    let n = forms.basis.n;
    let rig = forms.rigid_idx();
    // rotations carry the only part of the rigid span seen by |·|_W
    let rot: Vec<usize> = rig.iter().copied().skip(n).collect();
    let wz = z.transpose() * &forms.w * &z;
    let num = if rot.is_empty() {
        wz
    } else {
        let wrr = select(&forms.w, &rot, &rot);
        let all: Vec<usize> = (0..forms.len()).collect();
        let wzr = z.transpose() * select(&forms.w, &all, &rot);
        let ch = Cholesky::new(wrr).ok_or_else(|| Error::BasisRejected("rotation block of the W form is singular".into()))?;
        let corr = &wzr * ch.solve(&wzr.transpose());
        wz - corr
    };
    let num = (&num + num.transpose()) * 0.5;
    deflated_eig(forms, &num, ConstantName::C1)
}

/// Korn–Poincaré: `C² = max min_r ‖u − r‖²_{L²} / [u]²_X`; the estimate is `C`.
pub fn korn_poincare_constant(forms: &GramForms) -> Result<EigEstimate> {
    let z = forms.deflation()?;
    let num = z.transpose() * &forms.mass * &z;
    let num = (&num + num.transpose()) * 0.5;
    let mut e = deflated_eig(forms, &num, ConstantName::KornPoincare)?;
    e.estimate.value = e.lambda.max(0.0).sqrt();
    Ok(e)
}

#[derive(Clone, Debug)]
pub struct ScalingFit {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    /// Fitted exponent of `C(τ) ∝ τ^e`.
    pub exponent: f64,
}

/// Korn–Poincaré constants on `τ`-scaled copies of a box.
///
/// With `scale_h` the grid size is `τh`, which makes the discrete problems exact
/// dilates of each other; otherwise every copy is meshed with the same `h`.
pub fn korn_poincare_scaling(
    region: &BoxRegion,
    taus: &[f64],
    h: f64,
    scale_h: bool,
    depth: usize,
    degree: usize,
    params: FracParams,
) -> Result<ScalingFit> {
    let mut values = Vec::new();
    for &tau in taus {
        let r = region.scaled(tau);
        let dom = crate::geometry::Domain::boxed(r.clone());
        let hh = if scale_h { h * tau } else { h };
        let grid = Grid::new(&dom, hh, crate::geometry::Isometry::identity(r.dim()), depth)?;
        let basis = Arc::new(BasisSet::cosine(r, degree, true));
        let forms = assemble_gram(basis, &grid, params)?;
        values.push(korn_poincare_constant(&forms)?.estimate.value);
    }
    let lx: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    Ok(ScalingFit { taus: taus.to_vec(), values, exponent: slope(&lx, &ly) })
}

#[derive(Clone, Debug)]
pub struct PeriSolution {
    pub coeffs: DVector<f64>,
    /// `W_ρ(u) − ∫ f·u` at the minimizer.
    pub energy: f64,
    /// `|2 G_X c − F| / |F|` (zero when `F = 0`).
    pub residual: f64,
    pub load: DVector<f64>,
    pub forms: GramForms,
}

impl PeriSolution {
    pub fn energy_of(&self, c: &DVector<f64>) -> f64 {
        c.dot(&(&self.forms.x * c)) - self.load.dot(c)
    }

    pub fn field(&self) -> crate::fields::BasisCombination {
        self.forms.basis.combination(self.coeffs.iter().copied().collect())
    }
}

/// Galerkin minimizer of `W_ρ(u) − ∫ f·u` with `ρ(ξ) = |ξ|^{−n−2(s−1)}` over a basis
/// whose members vanish on `omega`.
pub fn solve_peridynamic(f: &dyn VectorField, omega: &BoxRegion, basis: Arc<BasisSet>, grid: &Grid, s: f64) -> Result<PeriSolution> {
    let n = grid.n;
    let params = FracParams::new(s, 2.0, n)?;
    // the constraint must hold on omega
    let mut vals = vec![0.0; basis.len() * n];
    let steps = 8usize;
    for k in 0..steps.pow(n as u32) {
        let mut r = k;
        let x: Vec<f64> = (0..n)
            .map(|d| {
                let i = r % steps;
                r /= steps;
                omega.lo[d] + (omega.hi[d] - omega.lo[d]) * (i as f64 + 0.5) / steps as f64
            })
            .collect();
        basis.eval_all(&x, &mut vals);
        if vals.iter().any(|v| v.abs() > 1e-14) {
            return Err(Error::Constraint(format!("basis does not vanish on omega at {x:?}")));
        }
    }
    let forms = assemble_gram(basis.clone(), grid, params)?;
    let m = basis.len();
    let mut load = DVector::zeros(m);
    let mut fv = vec![0.0; n];
    for i in 0..grid.len() {
        let x = grid.center(i);
        f.eval_into(x, &mut fv);
        basis.eval_all(x, &mut vals);
        let w = grid.volume(i);
        for k in 0..m {
            let mut s = 0.0;
            for d in 0..n {
                s += fv[d] * vals[k * n + d];
            }
            load[k] += w * s;
        }
    }
    let tr = forms.x.trace();
    let min_eig = SymmetricEigen::new(forms.x.clone()).eigenvalues.min();
    if !(min_eig > DEFLATION_TOL * tr) {
        return Err(Error::Constraint(format!(
            "projected form is singular on the constrained span (min eigenvalue {min_eig:.3e}); a rigid motion is admissible"
        )));
    }
    let ch = Cholesky::new(&forms.x * 2.0).ok_or_else(|| Error::Constraint("projected form is not positive definite".into()))?;
    let coeffs = ch.solve(&load);
    let lnorm = load.norm();
    let residual = if lnorm > 0.0 { (&forms.x * &coeffs * 2.0 - &load).norm() / lnorm } else { 0.0 };
    let energy = coeffs.dot(&(&forms.x * &coeffs)) - load.dot(&coeffs);
    Ok(PeriSolution { coeffs, energy, residual, load, forms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{field_library, FieldSpec, StripCutoff};
    use crate::geometry::{Domain, Isometry};
    use crate::quadrature::make_grid;

    fn grid(h: f64, depth: usize) -> Grid {
        Grid::new(&Domain::unit_square(), h, Isometry::identity(2), depth).unwrap()
    }

    #[test]
    fn lp_rigid_recovered() {
        let g = grid(0.125, 1);
        let r = RigidMotion::new(vec![0.7], vec![0.2, -0.4]).unwrap();
        let pr = rigid_project_lp(&r, &g, 2.0).unwrap();
        assert!(pr.residual < 1e-10);
        assert!((pr.rigid.skew[0] - 0.7).abs() < 1e-8 && (pr.rigid.b[1] + 0.4).abs() < 1e-8);
        let pr3 = rigid_project_lp(&r, &g, 3.0).unwrap();
        assert!(pr3.residual < 1e-10 && pr3.converged);
    }

    #[test]
    fn identity_centroid() {
        let g = grid(0.125, 1);
        let u = field_library(&FieldSpec::Identity, 2).unwrap();
        let pr = rigid_project_lp(&u, &g, 2.0).unwrap();
        assert!(pr.rigid.skew[0].abs() < 1e-12);
        assert!((pr.rigid.b[0] - 0.5).abs() < 1e-12 && (pr.rigid.b[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gram_consistency() {
        let g = grid(0.125, 2);
        let p = FracParams::new(0.5, 2.0, 2).unwrap();
        let basis = Arc::new(BasisSet::cosine(BoxRegion::unit(2), 2, true));
        let f = assemble_gram(basis.clone(), &g, p).unwrap();
        let tr = f.x.trace();
        for i in basis.rigid_range() {
            assert!(f.x[(i, i)].abs() <= 1e-10 * tr);
        }
        let u = basis.member(3);
        let w = gagliardo(&u, &g, p).unwrap().raw;
        assert!((f.w[(3, 3)] - w).abs() <= 1e-12 * w);
        let x = projected(&u, &g, p).unwrap().raw;
        assert!((f.x[(3, 3)] - x).abs() <= 1e-12 * x);
    }

    #[test]
    fn korn1_top_vector() {
        let g = grid(0.125, 2);
        let p = FracParams::new(0.5, 2.0, 2).unwrap();
        let basis = Arc::new(BasisSet::cosine(BoxRegion::unit(2), 2, true));
        let f = assemble_gram(basis.clone(), &g, p).unwrap();
        let e = estimate_korn1_constant(&f).unwrap();
        let u = basis.combination(e.coeffs.iter().copied().collect());
        let num = rigid_project_seminorm(&u, &g, p).unwrap().raw;
        let den = projected(&u, &g, p).unwrap().raw;
        assert!(((num / den) - e.lambda).abs() < 1e-8 * e.lambda, "{} vs {}", num / den, e.lambda);
    }

    #[test]
    fn perisolve_zero_load() {
        let g = make_grid(&Domain::unit_square(), 0.125).unwrap();
        let cut = Arc::new(StripCutoff { axis: 0, start: 0.2, width: 0.3 });
        let basis = Arc::new(BasisSet::cosine(BoxRegion::unit(2), 1, true).with_cutoff(cut));
        let zero = RigidMotion::zero(2);
        let omega = BoxRegion::new(vec![0.0, 0.0], vec![0.2, 1.0]).unwrap();
        let sol = solve_peridynamic(&zero, &omega, basis, &g, 0.5).unwrap();
        assert!(sol.coeffs.iter().all(|c| *c == 0.0));
    }
}
