//! Browser bindings: Whitney covers, extension fields across a graph and the
//! boundary-layer profile, each exposed as a flat `Float64Array`.

use fracorn::extension::{solve_coefficients, DeltaVariant, EpigraphExtension};
use fracorn::fields::field_library;
use fracorn::geometry::{build_whitney_cover, check_whitney_cover, EpiWindow, Formula, Side};
use fracorn::seminorms::{lemma_a2_profile, profile_slope, A2Options};
use fracorn::{Domain, FieldSpec, FracParams, LipschitzFn, Result, VectorField};
use wasm_bindgen::prelude::*;

fn tent(slope: f64) -> LipschitzFn {
    LipschitzFn::analytic(Formula::Abs { center: 0.5, slope })
}

fn domain(kind: &str, param: f64) -> Result<Domain> {
    match kind {
        "wedge" => Domain::angular(param, 1.0, 1.0, Side::Upper),
        _ => Domain::epigraph(tent(param), EpiWindow::Band { lo: vec![0.0], hi: vec![1.0], height: 1.0 }, Side::Upper),
    }
}

/// A Whitney cover: 9 numbers per cell (four corners, then the generation).
#[wasm_bindgen]
pub struct CoverView {
    cells: Vec<f64>,
    c1: usize,
    c2: f64,
    passed: bool,
}

#[wasm_bindgen]
impl CoverView {
    #[wasm_bindgen(getter)]
    pub fn cells(&self) -> Vec<f64> {
        self.cells.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn c1(&self) -> usize {
        self.c1
    }

    #[wasm_bindgen(getter)]
    pub fn c2(&self) -> f64 {
        self.c2
    }

    #[wasm_bindgen(getter)]
    pub fn passed(&self) -> bool {
        self.passed
    }

    pub fn count(&self) -> usize {
        self.cells.len() / 9
    }
}

pub fn cover_view(kind: &str, param: f64, min_side: f64) -> Result<CoverView> {
    let d = domain(kind, param)?;
    let cover = build_whitney_cover(&d, min_side.max(1.0 / 256.0))?;
    let check = check_whitney_cover(&cover, &d, 20, 1);
    let mut cells = Vec::with_capacity(cover.cells.len() * 9);
    for c in &cover.cells {
        for p in c.corners() {
            cells.extend(p);
        }
        cells.push(c.generation as f64);
    }
    Ok(CoverView { cells, c1: check.c1, c2: cover.c2, passed: check.passed(12) })
}

/// `kind` is `"epigraph"` (graph `param · |x − ½|`) or `"wedge"` (slope `param`).
#[wasm_bindgen]
pub fn whitney_cover(kind: &str, param: f64, min_side: f64) -> std::result::Result<CoverView, String> {
    cover_view(kind, param, min_side).map_err(|e| e.to_string())
}

/// `res × res` samples of `E u` over `[0, 1] × [−1, 1]`, row-major from the top;
/// `component` 0 or 1 picks a coordinate, anything else the magnitude.
pub fn extension_samples(slope: f64, seed: u64, component: u32, res: usize) -> Result<Vec<f64>> {
    let f = tent(slope);
    let u = field_library(&FieldSpec::RandomTrig { seed, modes: 3 }, 2)?;
    let coeffs = solve_coefficients(f.lipschitz(), 2, 3.0, DeltaVariant::TwoPlusM)?;
    let ext = EpigraphExtension::new(u, f, coeffs);
    let res = res.clamp(2, 512);
    let mut out = Vec::with_capacity(res * res);
    let mut v = [0.0; 2];
    for i in 0..res {
        let y = 1.0 - 2.0 * i as f64 / (res - 1) as f64;
        for j in 0..res {
            let x = j as f64 / (res - 1) as f64;
            ext.eval_into(&[x, y], &mut v);
            out.push(match component {
                0 => v[0],
                1 => v[1],
                _ => v[0].hypot(v[1]),
            });
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn extension_field(slope: f64, seed: u64, component: u32, res: usize) -> std::result::Result<Vec<f64>, String> {
    extension_samples(slope, seed, component, res).map_err(|e| e.to_string())
}

/// The boundary-layer integral `I(z)` at `points` heights over a flat boundary.
#[wasm_bindgen]
pub struct Profile {
    distances: Vec<f64>,
    values: Vec<f64>,
    slope: f64,
}

#[wasm_bindgen]
impl Profile {
    #[wasm_bindgen(getter)]
    pub fn distances(&self) -> Vec<f64> {
        self.distances.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// Fitted slope of `log I` against `log dist`; the expected value is `−ps`.
    #[wasm_bindgen(getter)]
    pub fn slope(&self) -> f64 {
        self.slope
    }
}

pub fn profile(s: f64, p: f64, lambda: f64, points: usize) -> Result<Profile> {
    let params = FracParams::new(s, p, 2)?;
    let points = points.clamp(2, 40);
    let zs: Vec<Vec<f64>> = (0..points)
        .map(|k| vec![0.0, 10f64.powf(-3.0 + 2.0 * k as f64 / (points - 1) as f64)])
        .collect();
    let prof = lemma_a2_profile(&LipschitzFn::zero(2), lambda, params, &zs, A2Options::default())?;
    Ok(Profile {
        distances: prof.iter().map(|q| q.0).collect(),
        values: prof.iter().map(|q| q.1).collect(),
        slope: profile_slope(&prof),
    })
}

#[wasm_bindgen]
pub fn boundary_profile(s: f64, p: f64, lambda: f64, points: usize) -> std::result::Result<Profile, String> {
    profile(s, p, lambda, points).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covers_hold_their_invariants() {
        for (kind, param) in [("epigraph", 0.0), ("epigraph", 1.5), ("wedge", 0.5), ("wedge", 2.0)] {
            let v = cover_view(kind, param, 1.0 / 32.0).unwrap();
            assert!(v.count() > 10 && v.passed, "{kind} {param}");
            assert_eq!(v.cells().len(), 9 * v.count());
        }
    }

    #[test]
    fn extension_is_the_field_above_and_finite_below() {
        let res = 33;
        let mag = extension_samples(1.0, 4, 2, res).unwrap();
        assert_eq!(mag.len(), res * res);
        assert!(mag.iter().all(|v| v.is_finite()));
        let u = field_library(&FieldSpec::RandomTrig { seed: 4, modes: 3 }, 2).unwrap();
        let top = u.eval(&[0.0, 1.0]);
        let first = extension_samples(1.0, 4, 0, res).unwrap()[0];
        assert_eq!(first, top[0]);
    }

    #[test]
    fn profile_slope_is_near_minus_ps() {
        let pr = profile(0.5, 2.0, 0.9, 9).unwrap();
        assert!((pr.slope() + 1.0).abs() < 0.15, "{}", pr.slope());
        assert_eq!(pr.distances().len(), 9);
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(profile(1.5, 2.0, 0.9, 5).is_err());
        assert!(cover_view("wedge", f64::NAN, 0.1).is_err());
    }
}
