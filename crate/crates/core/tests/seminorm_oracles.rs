mod common;

use common::*;
use fracorn::fields::{field_library, GridField};
use fracorn::geometry::BoxRegion;
use fracorn::quadrature::convergence_study;
use fracorn::seminorms::{gagliardo, lp_norm, projected, projected_raw_between};
use fracorn::{make_grid, Domain, FieldSpec, FracParams};

fn params(s: f64, p: f64) -> FracParams {
    FracParams::new(s, p, 2).unwrap()
}

fn field(spec: FieldSpec) -> fracorn::fields::LibraryField {
    field_library(&spec, 2).unwrap()
}

#[test]
fn identity_matches_closed_form() {
    let id = field(FieldSpec::Identity);
    // the quadrature error decays like h^(2-2s) at worst
    for (s, tol) in [(0.3, 2e-3), (0.5, 1e-2), (0.7, 5e-2)] {
        let exact = identity_oracle(s);
        let mut last = f64::INFINITY;
        for h in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0] {
            let g = make_grid(&Domain::unit_square(), h).unwrap();
            let err = rel(gagliardo(&id, &g, params(s, 2.0)).unwrap().raw, exact);
            assert!(err < last, "s={s} h={h}: error {err} did not shrink");
            last = err;
        }
        assert!(last < tol, "s={s}: {last}");
    }
}

#[test]
fn extrapolated_identity_is_close() {
    let id = field(FieldSpec::Identity);
    let exact = identity_oracle(0.5);
    let table = convergence_study(&[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], |h| {
        Ok(gagliardo(&id, &make_grid(&Domain::unit_square(), h)?, params(0.5, 2.0))?.raw)
    })
    .unwrap();
    assert!(table.monotone);
    assert!(rel(table.extrapolate, exact) < 4e-3, "{}", table.extrapolate);
    assert!(table.order > 0.5 && table.order < 1.5, "{}", table.order);
}

#[test]
fn shear_matches_closed_forms() {
    let sh = field(FieldSpec::Shear { amount: 1.0 });
    let g = make_grid(&Domain::unit_square(), 1.0 / 32.0).unwrap();
    let w = gagliardo(&sh, &g, params(0.5, 2.0)).unwrap().raw;
    let x = projected(&sh, &g, params(0.5, 2.0)).unwrap().raw;
    assert!(rel(w, shear_oracle(0.5)) < 1e-2, "{w}");
    assert!(rel(x, shear_projected_oracle(0.5)) < 2e-2, "{x} vs {}", shear_projected_oracle(0.5));
}

#[test]
fn random_field_agrees_with_monte_carlo() {
    // s = 0.3 keeps the Monte-Carlo variance finite
    let u = field(FieldSpec::RandomTrig { seed: 11, modes: 3 });
    let g = make_grid(&Domain::unit_square(), 1.0 / 32.0).unwrap();
    for p in [2.0, 3.0] {
        let q = gagliardo(&u, &g, params(0.3, p)).unwrap().raw;
        let (mc, se) = monte_carlo_unit_square(400_000, 5, gagliardo_pair(&u, 0.3, p));
        assert!((q - mc).abs() < 4.0 * se + 3e-3 * mc, "p={p}: {q} vs {mc} ± {se}");
        let xq = projected(&u, &g, params(0.3, p)).unwrap().raw;
        let (xmc, xse) = monte_carlo_unit_square(400_000, 6, projected_pair(&u, 0.3, p));
        assert!((xq - xmc).abs() < 4.0 * xse + 3e-3 * xmc, "p={p}: {xq} vs {xmc} ± {xse}");
    }
}

#[test]
fn separated_boxes_match_double_loop() {
    let u = field(FieldSpec::RandomTrig { seed: 2, modes: 3 });
    let a = Domain::boxed(BoxRegion::new(vec![0.0, 0.0], vec![0.4, 1.0]).unwrap());
    let b = Domain::boxed(BoxRegion::new(vec![0.6, 0.0], vec![1.0, 1.0]).unwrap());
    let (ga, gb) = (make_grid(&a, 1.0 / 40.0).unwrap(), make_grid(&b, 1.0 / 40.0).unwrap());
    let p = params(0.5, 2.0);
    let lib = projected_raw_between(&u, &ga, &gb, p).unwrap();
    let brute = brute_pairs([0.0, 0.0], [0.4, 1.0], [0.6, 0.0], [1.0, 1.0], 48, projected_pair(&u, 0.5, 2.0));
    assert!(rel(lib, brute) < 1e-3, "{lib} vs {brute}");
}

#[test]
fn sampled_field_tracks_the_analytic_one() {
    let u = field(FieldSpec::GradientBump { center: vec![0.4, 0.6], width: 0.5 });
    let s = GridField::sample(&u, vec![0.0, 0.0], vec![1.0, 1.0], vec![129, 129]).unwrap();
    let g = make_grid(&Domain::unit_square(), 1.0 / 16.0).unwrap();
    let p = params(0.5, 2.0);
    let (a, b) = (gagliardo(&u, &g, p).unwrap().raw, gagliardo(&s, &g, p).unwrap().raw);
    assert!(rel(b, a) < 1e-2, "{a} vs {b}");
    assert!(rel(lp_norm(&s, &g, 2.0).unwrap(), lp_norm(&u, &g, 2.0).unwrap()) < 1e-3);
}
