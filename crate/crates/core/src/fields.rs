//! Vector fields, infinitesimal rigid motions, the analytic test-field library,
//! cosine Galerkin bases and smooth partitions of unity.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoxRegion, Domain, DomainKind, Isometry};
use crate::vecops::dist;

/// A map `x ↦ u(x) ∈ R^n`. Evaluation is pure.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }
}

pub type FieldRef = Arc<dyn VectorField>;

/// A real-valued function, used for cutoffs.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
}

impl<F: VectorField + ?Sized> VectorField for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).eval_into(x, out)
    }
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).eval_into(x, out)
    }
}

/// `x ↦ Ax + b` with `A` skew, stored through its strictly upper entries
/// `A₁₂, A₁₃, …, A₂₃, …` in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidMotion {
    pub n: usize,
    pub skew: Vec<f64>,
    pub b: Vec<f64>,
}

impl RigidMotion {
    pub fn new(skew: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = b.len();
        if skew.len() != n * (n - 1) / 2 {
            return Err(Error::InvalidInput(format!(
                "need {} skew entries for n = {n}, got {}",
                n * (n - 1) / 2,
                skew.len()
            )));
        }
        Ok(RigidMotion { n, skew, b })
    }

    pub fn zero(n: usize) -> Self {
        RigidMotion { n, skew: vec![0.0; n * (n - 1) / 2], b: vec![0.0; n] }
    }

    /// Dense `A`, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                a[i * n + j] = self.skew[k];
                a[j * n + i] = -self.skew[k];
                k += 1;
            }
        }
        a
    }

    pub fn add(&self, other: &RigidMotion) -> RigidMotion {
        RigidMotion {
            n: self.n,
            skew: self.skew.iter().zip(&other.skew).map(|(a, b)| a + b).collect(),
            b: self.b.iter().zip(&other.b).map(|(a, b)| a + b).collect(),
        }
    }

    /// Coefficient vector `(skew…, b…)`.
    pub fn coeffs(&self) -> Vec<f64> {
        self.skew.iter().chain(&self.b).copied().collect()
    }

    pub fn from_coeffs(n: usize, c: &[f64]) -> Self {
        let k = n * (n - 1) / 2;
        RigidMotion { n, skew: c[..k].to_vec(), b: c[k..k + n].to_vec() }
    }
}

/// Same as [`RigidMotion::new`].
pub fn make_rigid(skew: Vec<f64>, b: Vec<f64>) -> Result<RigidMotion> {
    RigidMotion::new(skew, b)
}

impl VectorField for RigidMotion {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        out[..n].copy_from_slice(&self.b);
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                let a = self.skew[k];
                out[i] += a * x[j];
                out[j] -= a * x[i];
                k += 1;
            }
        }
    }
}

/// The `n(n+1)/2` generators of the rigid motions: translations `e_d`, then
/// rotations `E_ij (x − c)` about `c`.
pub fn rigid_generators(n: usize, center: &[f64]) -> Vec<RigidMotion> {
    let k = n * (n - 1) / 2;
    let mut out = Vec::with_capacity(k + n);
    for d in 0..n {
        let mut b = vec![0.0; n];
        b[d] = 1.0;
        out.push(RigidMotion { n, skew: vec![0.0; k], b });
    }
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            let mut skew = vec![0.0; k];
            skew[idx] = 1.0;
            let mut b = vec![0.0; n];
            // A(x − c) = Ax − Ac
            b[i] = -center[j];
            b[j] = center[i];
            out.push(RigidMotion { n, skew, b });
            idx += 1;
        }
    }
    out
}

fn default_one() -> f64 {
    1.0
}

fn default_modes() -> usize {
    4
}

/// Named analytic fields, as they appear in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    /// `x ↦ x`
    Identity,
    /// `x ↦ scale · x`
    Dilation { scale: f64 },
    /// `(amount · x₂, 0, …)`
    Shear {
        #[serde(default = "default_one")]
        amount: f64,
    },
    /// `∇ exp(−|x − c|² / w²)`
    GradientBump { center: Vec<f64>, width: f64 },
    /// `sin(π ξ·x)` in one component.
    TrigMode { component: usize, freqs: Vec<f64> },
    /// Sum of random sine modes with seeded amplitudes, frequencies and phases.
    RandomTrig {
        seed: u64,
        #[serde(default = "default_modes")]
        modes: usize,
    },
    /// `x_axis^exponent` in one component, zero elsewhere.
    Power { component: usize, axis: usize, exponent: f64 },
    Constant { value: Vec<f64> },
    Rigid { skew: Vec<f64>, shift: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
struct TrigTerm {
    component: usize,
    amp: f64,
    freq: Vec<f64>,
    phase: f64,
}

/// A field from the analytic library.
#[derive(Clone, Debug, PartialEq)]
pub struct LibraryField {
    pub spec: FieldSpec,
    n: usize,
    terms: Vec<TrigTerm>,
}

/// Build a library field in dimension `n`.
pub fn field_library(spec: &FieldSpec, n: usize) -> Result<LibraryField> {
    let bad = |msg: String| Err(Error::InvalidInput(msg));
    let mut terms = Vec::new();
    match spec {
        FieldSpec::GradientBump { center, width } => {
            if center.len() != n || !(*width > 0.0) {
                return bad(format!("gradient-bump needs a {n}-dim center and positive width"));
            }
        }
        FieldSpec::TrigMode { component, freqs } => {
            if *component >= n || freqs.len() != n {
                return bad(format!("trig-mode needs component < {n} and {n} frequencies"));
            }
        }
        FieldSpec::Power { component, axis, .. } => {
            if *component >= n || *axis >= n {
                return bad(format!("power component/axis must be < {n}"));
            }
        }
        FieldSpec::Constant { value } if value.len() != n => {
            return bad(format!("constant needs {n} entries"));
        }
        FieldSpec::Rigid { skew, shift } => {
            RigidMotion::new(skew.clone(), shift.clone())?;
            if shift.len() != n {
                return bad(format!("rigid shift needs {n} entries"));
            }
        }
        FieldSpec::RandomTrig { seed, modes } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for component in 0..n {
                for _ in 0..*modes {
                    let amp = rng.random_range(-1.0..1.0);
                    let freq = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                    let phase = rng.random_range(0.0..2.0 * PI);
                    terms.push(TrigTerm { component, amp, freq, phase });
                }
            }
        }
        _ => {}
    }
    Ok(LibraryField { spec: spec.clone(), n, terms })
}

impl VectorField for LibraryField {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let out = &mut out[..n];
        out.fill(0.0);
        match &self.spec {
            FieldSpec::Identity => out.copy_from_slice(&x[..n]),
            FieldSpec::Dilation { scale } => {
                for d in 0..n {
                    out[d] = scale * x[d];
                }
            }
            FieldSpec::Shear { amount } => out[0] = amount * x[1],
            FieldSpec::GradientBump { center, width } => {
                let w2 = width * width;
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                let g = (-r2 / w2).exp();
                for d in 0..n {
                    out[d] = -2.0 * (x[d] - center[d]) / w2 * g;
                }
            }
            FieldSpec::TrigMode { component, freqs } => {
                let t: f64 = freqs.iter().zip(x).map(|(k, v)| k * v).sum();
                out[*component] = (PI * t).sin();
            }
            FieldSpec::RandomTrig { .. } => {
                for t in &self.terms {
                    let arg: f64 = t.freq.iter().zip(x).map(|(k, v)| k * v).sum();
                    out[t.component] += t.amp * (PI * arg + t.phase).sin();
                }
            }
            FieldSpec::Power { component, axis, exponent } => {
                let v = x[*axis];
                out[*component] = if exponent.fract() == 0.0 && exponent.abs() < 64.0 {
                    v.powi(*exponent as i32)
                } else {
                    v.powf(*exponent)
                };
            }
            FieldSpec::Constant { value } => out.copy_from_slice(value),
            FieldSpec::Rigid { skew, shift } => {
                RigidMotion { n, skew: skew.clone(), b: shift.clone() }.eval_into(x, out)
            }
        }
    }
}

/// Samples on a tensor grid with multilinear interpolation (clamped at the edges).
#[derive(Clone, Debug)]
pub struct GridField {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
    /// Node values, first axis fastest, `n` components per node.
    pub values: Vec<f64>,
}

impl GridField {
    /// Sample `u` at the `counts` nodes spanning `[lo, hi]`.
    pub fn sample(u: &dyn VectorField, lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let n = lo.len();
        if counts.len() != n || counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidInput("grid field needs at least two nodes per axis".into()));
        }
        let total: usize = counts.iter().product();
        let mut values = vec![0.0; total * n];
        let mut x = vec![0.0; n];
        for idx in 0..total {
            let mut r = idx;
            for d in 0..n {
                let i = r % counts[d];
                r /= counts[d];
                x[d] = lo[d] + (hi[d] - lo[d]) * i as f64 / (counts[d] - 1) as f64;
            }
            u.eval_into(&x, &mut values[idx * n..(idx + 1) * n]);
        }
        Ok(GridField { lo, hi, counts, values })
    }
}

impl VectorField for GridField {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for d in 0..n {
            let cells = (self.counts[d] - 1) as f64;
            let t = ((x[d] - self.lo[d]) / (self.hi[d] - self.lo[d]) * cells).clamp(0.0, cells);
            let i = (t.floor() as usize).min(self.counts[d] - 2);
            base[d] = i;
            frac[d] = t - i as f64;
        }
        out[..n].fill(0.0);
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = 0;
            let mut stride = 1;
            for d in 0..n {
                let bit = corner >> d & 1;
                w *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
                idx += (base[d] + bit) * stride;
                stride *= self.counts[d];
            }
            if w != 0.0 {
                for c in 0..n {
                    out[c] += w * self.values[idx * n + c];
                }
            }
        }
    }
}

/// `Σ c_i u_i`
#[derive(Clone)]
pub struct Combination {
    pub terms: Vec<(f64, FieldRef)>,
    n: usize,
}

impl Combination {
    pub fn new(terms: Vec<(f64, FieldRef)>) -> Result<Self> {
        let n = terms
            .first()
            .map(|t| t.1.dim())
            .ok_or_else(|| Error::InvalidInput("empty combination".into()))?;
        if terms.iter().any(|t| t.1.dim() != n) {
            return Err(Error::InvalidInput("combination of fields with different dimensions".into()));
        }
        Ok(Combination { terms, n })
    }
}

impl VectorField for Combination {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; self.n];
        out[..self.n].fill(0.0);
        for (c, u) in &self.terms {
            u.eval_into(x, &mut tmp);
            for d in 0..self.n {
                out[d] += c * tmp[d];
            }
        }
    }
}

/// `y ↦ R u(T⁻¹ y)` for an isometry `T = (R, t)`; the push-forward under a rigid
/// change of coordinates.
pub struct Transformed<U> {
    pub inner: U,
    pub iso: Isometry,
}

impl<U: VectorField> VectorField for Transformed<U> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        let x = self.iso.apply_inverse(y);
        let v = self.inner.eval(&x);
        self.iso.rotate(&v, out);
    }
}

/// `x ↦ u(x / τ)`
pub struct Scaled<U> {
    pub inner: U,
    pub tau: f64,
}

impl<U: VectorField> VectorField for Scaled<U> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let y: Vec<f64> = x.iter().map(|v| v / self.tau).collect();
        self.inner.eval_into(&y, out);
    }
}

/// `x ↦ ψ(x) u(x)`
pub struct CutoffProduct<U, P> {
    pub inner: U,
    pub cutoff: P,
}

impl<U: VectorField, P: ScalarField> VectorField for CutoffProduct<U, P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let psi = self.cutoff.value(x);
        let n = self.dim();
        if psi == 0.0 {
            out[..n].fill(0.0);
            return;
        }
        self.inner.eval_into(x, out);
        for v in &mut out[..n] {
            *v *= psi;
        }
    }
}

/// `u` on the domain, `0` outside it.
pub struct ZeroExtended<U> {
    pub inner: U,
    pub domain: Domain,
}

impl<U: VectorField> VectorField for ZeroExtended<U> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        if self.domain.contains(x) {
            self.inner.eval_into(x, out);
        } else {
            out[..self.dim()].fill(0.0);
        }
    }
}

/// Tensor-product cosine modes on a box, optionally followed by the rigid
/// generators and optionally multiplied by a cutoff.
#[derive(Clone)]
pub struct BasisSet {
    pub n: usize,
    pub degree: usize,
    pub region: BoxRegion,
    pub with_rigid: bool,
    pub cutoff: Option<Arc<dyn ScalarField>>,
    /// Multi-indices of the cosine modes (constant mode excluded).
    modes: Vec<Vec<usize>>,
    rigid: Vec<RigidMotion>,
}

impl BasisSet {
    pub fn cosine(region: BoxRegion, degree: usize, with_rigid: bool) -> Self {
        let n = region.dim();
        let total = (degree + 1).pow(n as u32);
        let modes: Vec<Vec<usize>> = (1..total)
            .map(|mut r| {
                (0..n)
                    .map(|_| {
                        let i = r % (degree + 1);
                        r /= degree + 1;
                        i
                    })
                    .collect()
            })
            .collect();
        let rigid = if with_rigid { rigid_generators(n, &region.center()) } else { Vec::new() };
        BasisSet { n, degree, region, with_rigid, cutoff: None, modes, rigid }
    }

    /// The sub-basis of modes with every index `≤ degree` (rigid generators kept),
    /// with the positions of its members in `self`.
    pub fn restrict(&self, degree: usize) -> (BasisSet, Vec<usize>) {
        let n = self.n;
        let mut modes = Vec::new();
        let mut idx = Vec::new();
        for (m, mode) in self.modes.iter().enumerate() {
            if mode.iter().all(|&i| i <= degree) {
                modes.push(mode.clone());
                idx.extend((0..n).map(|c| m * n + c));
            }
        }
        idx.extend(self.rigid_range());
        let sub = BasisSet { degree: degree.min(self.degree), modes, ..self.clone() };
        (sub, idx)
    }

    pub fn with_cutoff(mut self, cutoff: Arc<dyn ScalarField>) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    /// Number of cosine members (`n` per mode).
    pub fn cosine_len(&self) -> usize {
        self.modes.len() * self.n
    }

    pub fn len(&self) -> usize {
        self.cosine_len() + self.rigid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index range of the rigid generators (translations first, then rotations).
    pub fn rigid_range(&self) -> std::ops::Range<usize> {
        self.cosine_len()..self.len()
    }

    pub fn rigid_generators(&self) -> &[RigidMotion] {
        &self.rigid
    }

    /// Evaluate every member at `x`: `out[i * n + c]` is component `c` of member `i`.
    pub fn eval_all(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let k = self.degree + 1;
        let mut cosines = vec![0.0; n * k];
        for d in 0..n {
            let t = PI * (x[d] - self.region.lo[d]) / (self.region.hi[d] - self.region.lo[d]);
            for i in 0..k {
                cosines[d * k + i] = (i as f64 * t).cos();
            }
        }
        let chi = self.cutoff.as_ref().map_or(1.0, |c| c.value(x));
        out[..self.len() * n].fill(0.0);
        for (m, mode) in self.modes.iter().enumerate() {
            let mut v = chi;
            for d in 0..n {
                v *= cosines[d * k + mode[d]];
            }
            for c in 0..n {
                out[(m * n + c) * n + c] = v;
            }
        }
        let off = self.cosine_len();
        for (r, g) in self.rigid.iter().enumerate() {
            let slot = &mut out[(off + r) * n..(off + r + 1) * n];
            g.eval_into(x, slot);
            if chi != 1.0 {
                for v in slot.iter_mut() {
                    *v *= chi;
                }
            }
        }
    }

    pub fn member(self: &Arc<Self>, i: usize) -> BasisMember {
        BasisMember { basis: self.clone(), index: i }
    }

    pub fn combination(self: &Arc<Self>, coeffs: Vec<f64>) -> BasisCombination {
        BasisCombination { basis: self.clone(), coeffs }
    }
}

pub struct BasisMember {
    basis: Arc<BasisSet>,
    index: usize,
}

impl VectorField for BasisMember {
    fn dim(&self) -> usize {
        self.basis.n
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.basis.n;
        let mut all = vec![0.0; self.basis.len() * n];
        self.basis.eval_all(x, &mut all);
        out[..n].copy_from_slice(&all[self.index * n..(self.index + 1) * n]);
    }
}

pub struct BasisCombination {
    basis: Arc<BasisSet>,
    pub coeffs: Vec<f64>,
}

impl VectorField for BasisCombination {
    fn dim(&self) -> usize {
        self.basis.n
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.basis.n;
        let mut all = vec![0.0; self.basis.len() * n];
        self.basis.eval_all(x, &mut all);
        out[..n].fill(0.0);
        for (i, c) in self.coeffs.iter().enumerate() {
            for d in 0..n {
                out[d] += c * all[i * n + d];
            }
        }
    }
}

/// `exp(−1/(1 − t²))` for `|t| < 1`, else `0`.
#[inline]
pub fn bump_profile(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// What part of the boundary a cutoff ball is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallRole {
    Vertex(usize),
    Edge(usize),
    Interior,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    /// Radius of the covering ball.
    pub radius: f64,
    /// Radius of the bump support, strictly smaller than `radius`.
    pub support: f64,
    pub role: BallRole,
}

impl Ball {
    #[inline]
    fn bump(&self, x: &[f64]) -> f64 {
        bump_profile(dist(x, &self.center) / self.support)
    }

    /// Margin `β = radius − support`.
    pub fn margin(&self) -> f64 {
        self.radius - self.support
    }
}

/// Smooth partition of unity `φ_j = b_j / Σ_k b_k` built from radial bumps.
#[derive(Clone, Debug)]
pub struct Partition {
    pub balls: Vec<Ball>,
    /// `‖b_j‖_{W^{1,∞}}` of the raw bump (1D profile sampling).
    pub raw_norms: Vec<f64>,
    /// `‖φ_j‖_{W^{1,∞}}` of the normalized cutoff, sampled on the domain.
    pub norms: Vec<f64>,
    pub min_sum: f64,
}

/// Radii for [`cutoff_partition`].
#[derive(Clone, Copy, Debug)]
pub struct CutoffRadii {
    pub ball: f64,
    pub support: f64,
}

/// Smallest admissible value of `Σ b_k` on the sampled domain.
pub const PARTITION_GAP: f64 = 1e-4;

impl Partition {
    /// Normalize the given bumps on `domain`; fails if some sample of the
    /// domain (boundary included) is not covered.
    pub fn from_balls(balls: Vec<Ball>, domain: &Domain) -> Result<Self> {
        if balls.is_empty() {
            return Err(Error::Cover("no balls".into()));
        }
        if let Some(b) = balls.iter().find(|b| !(b.support > 0.0 && b.support < b.radius)) {
            return Err(Error::Cover(format!("support {} must lie strictly inside radius {}", b.support, b.radius)));
        }
        let samples = domain_samples(domain, 64);
        let mut min_sum = f64::INFINITY;
        for x in &samples {
            let s: f64 = balls.iter().map(|b| b.bump(x)).sum();
            if s < PARTITION_GAP {
                return Err(Error::Cover(format!("partition gap at {x:?} (sum of bumps {s:e})")));
            }
            min_sum = min_sum.min(s);
        }
        let raw_norms = balls.iter().map(|b| raw_bump_norm(b.support)).collect();
        let mut part = Partition { balls, raw_norms, norms: Vec::new(), min_sum };
        part.norms = part.sampled_norms(&samples, domain);
        Ok(part)
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// `φ_j(x)`; zero where no bump is active.
    pub fn value(&self, j: usize, x: &[f64]) -> f64 {
        let bj = self.balls[j].bump(x);
        if bj == 0.0 {
            return 0.0;
        }
        let s: f64 = self.balls.iter().map(|b| b.bump(x)).sum();
        bj / s
    }

    pub fn sum(&self, x: &[f64]) -> f64 {
        let b: Vec<f64> = self.balls.iter().map(|b| b.bump(x)).collect();
        let s: f64 = b.iter().sum();
        if s == 0.0 {
            return 0.0;
        }
        b.iter().map(|v| v / s).sum()
    }

    fn sampled_norms(&self, samples: &[Vec<f64>], domain: &Domain) -> Vec<f64> {
        let bb = domain.bounding_box();
        let h = 1e-6 * bb.lo.iter().zip(&bb.hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        (0..self.len())
            .map(|j| {
                let mut sup = 0.0f64;
                let mut lip = 0.0f64;
                for x in samples {
                    let v = self.value(j, x);
                    sup = sup.max(v.abs());
                    let mut g2 = 0.0;
                    for d in 0..x.len() {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[d] += h;
                        xm[d] -= h;
                        let g = (self.value(j, &xp) - self.value(j, &xm)) / (2.0 * h);
                        g2 += g * g;
                    }
                    lip = lip.max(g2.sqrt());
                }
                sup + lip
            })
            .collect()
    }

    pub fn member(self: &Arc<Self>, j: usize) -> PartitionMember {
        PartitionMember { partition: self.clone(), index: j }
    }
}

/// `sup |b| + sup |b'|` for the profile scaled to support radius `rho`.
pub fn raw_bump_norm(rho: f64) -> f64 {
    let samples = 20_000;
    let mut sup = 0.0f64;
    let mut lip = 0.0f64;
    for i in 0..samples {
        let t = i as f64 / samples as f64;
        let g = bump_profile(t);
        sup = sup.max(g);
        let dg = if t < 1.0 { g * 2.0 * t / ((1.0 - t * t) * (1.0 - t * t)) } else { 0.0 };
        lip = lip.max(dg);
    }
    sup + lip / rho
}

pub struct PartitionMember {
    partition: Arc<Partition>,
    index: usize,
}

impl PartitionMember {
    pub fn ball(&self) -> &Ball {
        &self.partition.balls[self.index]
    }

    pub fn norm(&self) -> f64 {
        self.partition.norms[self.index]
    }
}

impl ScalarField for PartitionMember {
    fn value(&self, x: &[f64]) -> f64 {
        self.partition.value(self.index, x)
    }
}

/// Constant scalar, e.g. `ψ ≡ 1`.
pub struct ConstantScalar(pub f64);

impl ScalarField for ConstantScalar {
    fn value(&self, _x: &[f64]) -> f64 {
        self.0
    }
}

impl<S: ScalarField + ?Sized> ScalarField for &S {
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

impl<S: ScalarField + ?Sized> ScalarField for Arc<S> {
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

/// Cutoff that vanishes on `{x_axis ≤ a}` and is `1` on `{x_axis ≥ a + w}`, with
/// a smooth transition (used to constrain Galerkin bases on a strip).
pub struct StripCutoff {
    pub axis: usize,
    pub start: f64,
    pub width: f64,
}

impl ScalarField for StripCutoff {
    fn value(&self, x: &[f64]) -> f64 {
        let t = (x[self.axis] - self.start) / self.width;
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            let a = (-1.0 / t).exp();
            let b = (-1.0 / (1.0 - t)).exp();
            a / (a + b)
        }
    }
}

/// Partition of unity for a convex polygon: one ball per vertex, balls along the
/// edges and an interior lattice, all with the same covering and support radii.
pub fn cutoff_partition(domain: &Domain, radii: CutoffRadii) -> Result<Partition> {
    let v = match &domain.kind {
        DomainKind::ConvexPolygon(v) => v.clone(),
        DomainKind::Box(b) if b.dim() == 2 => vec![
            [b.lo[0], b.lo[1]],
            [b.hi[0], b.lo[1]],
            [b.hi[0], b.hi[1]],
            [b.lo[0], b.hi[1]],
        ],
        _ => return Err(Error::InvalidInput(format!("cutoff partition needs a polygon, got {}", domain.name()))),
    };
    let CutoffRadii { ball: r, support: rho } = radii;
    if !(rho > 0.0 && rho < r) {
        return Err(Error::Cover(format!("support radius {rho} must lie in (0, {r})")));
    }
    let mut balls = Vec::new();
    let nv = v.len();
    for (j, p) in v.iter().enumerate() {
        balls.push(Ball { center: p.to_vec(), radius: r, support: rho, role: BallRole::Vertex(j) });
    }
    let step = 0.5 * rho;
    for i in 0..nv {
        let (a, b) = (v[i], v[(i + 1) % nv]);
        let len = dist(&a, &b);
        let count = (len / step).ceil() as usize;
        for k in 1..count {
            let t = k as f64 / count as f64;
            let c = vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            // skip centers already served by a vertex ball
            if dist(&c, &a) < step || dist(&c, &b) < step {
                continue;
            }
            balls.push(Ball { center: c, radius: r, support: rho, role: BallRole::Edge(i) });
        }
    }
    let bb = domain.bounding_box();
    let nx = ((bb.hi[0] - bb.lo[0]) / step).ceil() as usize;
    let ny = ((bb.hi[1] - bb.lo[1]) / step).ceil() as usize;
    for i in 0..=nx {
        for j in 0..=ny {
            let c = vec![bb.lo[0] + i as f64 * step, bb.lo[1] + j as f64 * step];
            if domain.contains(&c) && boundary_distance(&v, &c) >= step {
                balls.push(Ball { center: c, radius: r, support: rho, role: BallRole::Interior });
            }
        }
    }
    Partition::from_balls(balls, domain)
}

fn boundary_distance(v: &[[f64; 2]], x: &[f64]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            let ab = [b[0] - a[0], b[1] - a[1]];
            let l2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = (((x[0] - a[0]) * ab[0] + (x[1] - a[1]) * ab[1]) / l2).clamp(0.0, 1.0);
            dist(x, &[a[0] + t * ab[0], a[1] + t * ab[1]])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Tensor samples of the domain's bounding box kept by its predicate, plus the
/// boundary of the box (clamped onto the region when it is a polygon).
fn domain_samples(domain: &Domain, per_axis: usize) -> Vec<Vec<f64>> {
    let bb = domain.bounding_box();
    let n = domain.dim();
    let total = (per_axis + 1).pow(n as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut r = idx;
        let x: Vec<f64> = (0..n)
            .map(|d| {
                let i = r % (per_axis + 1);
                r /= per_axis + 1;
                bb.lo[d] + (bb.hi[d] - bb.lo[d]) * i as f64 / per_axis as f64
            })
            .collect();
        if domain.contains(&x) {
            out.push(x);
        }
    }
    if let DomainKind::ConvexPolygon(v) = &domain.kind {
        let nv = v.len();
        for i in 0..nv {
            let (a, b) = (v[i], v[(i + 1) % nv]);
            for k in 0..per_axis {
                let t = k as f64 / per_axis as f64;
                out.push(vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rigid_sign_convention() {
        let r = make_rigid(vec![1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(r.eval(&[1.0, 0.0]), vec![0.0, -1.0]);
        let m = r.matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m[i * 2 + j] + m[j * 2 + i], 0.0);
            }
        }
        let t = make_rigid(vec![0.0], vec![2.0, -1.0]).unwrap();
        assert_eq!(t.eval(&[5.0, 7.0]), vec![2.0, -1.0]);
    }

    #[test]
    fn library_examples() {
        let id = field_library(&FieldSpec::Identity, 2).unwrap();
        assert_eq!(id.eval(&[0.25, 0.5]), vec![0.25, 0.5]);
        let sh = field_library(&FieldSpec::Shear { amount: 1.0 }, 2).unwrap();
        assert_eq!(sh.eval(&[0.0, 1.0]), vec![1.0, 0.0]);
        let a = field_library(&FieldSpec::RandomTrig { seed: 7, modes: 3 }, 2).unwrap();
        let b = field_library(&FieldSpec::RandomTrig { seed: 7, modes: 3 }, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.eval(&[0.3, 0.9]), b.eval(&[0.3, 0.9]));
    }

    #[test]
    fn grid_field_reproduces_affine_fields() {
        let id = field_library(&FieldSpec::Identity, 2).unwrap();
        let g = GridField::sample(&id, vec![0.0, 0.0], vec![1.0, 1.0], vec![5, 7]).unwrap();
        let v = g.eval(&[0.37, 0.81]);
        assert!((v[0] - 0.37).abs() < 1e-14 && (v[1] - 0.81).abs() < 1e-14);
    }

    #[test]
    fn rigid_generators_rotate_about_center() {
        let g = rigid_generators(2, &[0.5, 0.5]);
        assert_eq!(g.len(), 3);
        assert_eq!(g[2].eval(&[0.5, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn single_ball_partition_is_one() {
        let d = Domain::unit_square();
        let ball = Ball { center: vec![0.5, 0.5], radius: 2.0, support: 1.5, role: BallRole::Interior };
        let p = Partition::from_balls(vec![ball], &d).unwrap();
        assert_eq!(p.value(0, &[0.1, 0.9]), 1.0);
    }

    #[test]
    fn one_dimensional_bumps_sum_to_one() {
        let d = Domain::boxed(BoxRegion::new(vec![0.0], vec![1.0]).unwrap());
        let balls = vec![
            Ball { center: vec![0.0], radius: 0.8, support: 0.7, role: BallRole::Vertex(0) },
            Ball { center: vec![1.0], radius: 0.8, support: 0.7, role: BallRole::Vertex(1) },
        ];
        let p = Partition::from_balls(balls, &d).unwrap();
        for i in 0..=100 {
            let x = [i as f64 / 100.0];
            assert!((p.sum(&x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn square_partition_margin() {
        let p = cutoff_partition(&Domain::unit_square(), CutoffRadii { ball: 0.3, support: 0.25 }).unwrap();
        let v = p.balls.iter().find(|b| b.role == BallRole::Vertex(0)).unwrap();
        assert!((v.margin() - 0.05).abs() < 1e-15);
        assert!(p.norms.iter().all(|n| n.is_finite() && *n > 0.0));
    }

    #[test]
    fn partition_gap_detected() {
        let d = Domain::unit_square();
        let ball = Ball { center: vec![0.0, 0.0], radius: 0.3, support: 0.2, role: BallRole::Vertex(0) };
        assert!(matches!(Partition::from_balls(vec![ball], &d), Err(Error::Cover(_))));
    }
}
