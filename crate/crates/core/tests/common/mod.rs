//! Independent reference values for the integration tests.
#![allow(dead_code)]

use fracorn::seminorms::gauss_legendre;
use fracorn::VectorField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Composite Gauss–Legendre on `[a, b]` with geometric panels toward `a`.
pub fn graded<F: FnMut(f64) -> f64>(a: f64, b: f64, levels: usize, mut f: F) -> f64 {
    let (x, w) = gauss_legendre(16);
    let mut total = 0.0;
    let mut hi = b;
    for lvl in 0..=levels {
        let lo = if lvl == levels { a } else { a + 0.5 * (hi - a) };
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (xi, wi) in x.iter().zip(&w) {
            total += wi * r * f(c + r * xi);
        }
        hi = lo;
    }
    total
}

/// `∬_{Q×Q} g(x − y) dx dy` over the unit square for `g` even in each
/// coordinate and homogeneous-singular at 0: the difference `z = x − y` has
/// density `(1 − |z₁|)(1 − |z₂|)` on `[−1, 1]²`; each triangle of `[0, 1]²` is
/// mapped to a square (Duffy) so the singularity becomes a power of the radius.
pub fn unit_square_difference_integral<G: Fn(f64, f64) -> f64>(g: G) -> f64 {
    let tri = |swap: bool| {
        graded(0.0, 1.0, 40, |a| {
            graded(0.0, 1.0, 0, |t| {
                let (z1, z2) = if swap { (a * t, a) } else { (a, a * t) };
                a * (1.0 - z1) * (1.0 - z2) * g(z1, z2)
            })
        })
    };
    4.0 * (tri(false) + tri(true))
}

/// Exact `|id|^p_{W^{s,2}}` on the unit square.
pub fn identity_oracle(s: f64) -> f64 {
    unit_square_difference_integral(|a, b| (a * a + b * b).powf(-s))
}

/// Exact `|(x₂, 0)|²_{W^{s,2}}` on the unit square.
pub fn shear_oracle(s: f64) -> f64 {
    unit_square_difference_integral(|a, b| b * b * (a * a + b * b).powf(-1.0 - s))
}

/// Exact projected `[(x₂, 0)]²_{X^{s,2}}` on the unit square.
pub fn shear_projected_oracle(s: f64) -> f64 {
    unit_square_difference_integral(|a, b| a * a * b * b * (a * a + b * b).powf(-2.0 - s))
}

/// Midpoint double loop over `m × m` points of each of two axis-aligned boxes.
pub fn brute_pairs(
    lo_x: [f64; 2],
    hi_x: [f64; 2],
    lo_y: [f64; 2],
    hi_y: [f64; 2],
    m: usize,
    mut g: impl FnMut(&[f64; 2], &[f64; 2]) -> f64,
) -> f64 {
    let pts = |lo: [f64; 2], hi: [f64; 2]| -> (Vec<[f64; 2]>, f64) {
        let dx = (hi[0] - lo[0]) / m as f64;
        let dy = (hi[1] - lo[1]) / m as f64;
        let mut v = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                v.push([lo[0] + (i as f64 + 0.5) * dx, lo[1] + (j as f64 + 0.5) * dy]);
            }
        }
        (v, dx * dy)
    };
    let (px, wx) = pts(lo_x, hi_x);
    let (py, wy) = pts(lo_y, hi_y);
    let mut total = 0.0;
    for x in &px {
        for y in &py {
            total += g(x, y);
        }
    }
    total * wx * wy
}

/// Gagliardo and projected integrands for `p`, `s` in two dimensions.
pub fn gagliardo_pair(u: &dyn VectorField, s: f64, p: f64) -> impl Fn(&[f64; 2], &[f64; 2]) -> f64 + '_ {
    move |x, y| {
        let (ux, uy) = (u.eval(x), u.eval(y));
        let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        let q = (ux[0] - uy[0]).powi(2) + (ux[1] - uy[1]).powi(2);
        q.powf(0.5 * p) / d.powf(2.0 + p * s)
    }
}

pub fn projected_pair(u: &dyn VectorField, s: f64, p: f64) -> impl Fn(&[f64; 2], &[f64; 2]) -> f64 + '_ {
    move |x, y| {
        let (ux, uy) = (u.eval(x), u.eval(y));
        let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        let t = ((uy[0] - ux[0]) * (y[0] - x[0]) + (uy[1] - ux[1]) * (y[1] - x[1])) / d;
        t.abs().powf(p) / d.powf(2.0 + p * s)
    }
}

/// Monte-Carlo estimate of a pair integral over the unit square with its
/// standard error.
pub fn monte_carlo_unit_square(samples: usize, seed: u64, g: impl Fn(&[f64; 2], &[f64; 2]) -> f64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let y = [rng.random::<f64>(), rng.random::<f64>()];
        let v = g(&x, &y);
        sum += v;
        sum2 += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    (mean, ((sum2 / n - mean * mean) / n).sqrt())
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
