use std::sync::Arc;

use fracorn::acceptance::with_threads;
use fracorn::fields::{field_library, Combination, Scaled, Transformed};
use fracorn::geometry::Isometry;
use fracorn::seminorms::{gagliardo, perienergy, projected};
use fracorn::{make_grid, Domain, FieldRef, FieldSpec, FracParams, Grid, RigidMotion};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn trig(seed: u64) -> FieldRef {
    Arc::new(field_library(&FieldSpec::RandomTrig { seed, modes: 2 }, 2).unwrap())
}

fn coarse() -> Grid {
    Grid::new(&Domain::unit_square(), 1.0 / 8.0, Isometry::identity(2), 2).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn frac() -> impl Strategy<Value = FracParams> {
    (0.1f64..0.9, prop_oneof![Just(2.0), 1.5f64..4.0]).prop_map(|(s, p)| FracParams::new(s, p, 2).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn rigid_motions_do_not_change_the_projected_seminorm(
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b0 in -3.0f64..3.0,
        b1 in -3.0f64..3.0,
        p in frac(),
    ) {
        let g = coarse();
        let u = trig(seed);
        let r: FieldRef = Arc::new(RigidMotion::new(vec![a], vec![b0, b1]).unwrap());
        let v = Combination::new(vec![(1.0, u.clone()), (1.0, r)]).unwrap();
        let (x0, x1) = (projected(&u, &g, p).unwrap().raw, projected(&v, &g, p).unwrap().raw);
        prop_assert!(rel(x1, x0) < 1e-9, "{} vs {}", x0, x1);
    }

    #[test]
    fn projected_never_exceeds_gagliardo(seed in any::<u64>(), p in frac()) {
        let g = coarse();
        let u = trig(seed);
        let (w, x) = (gagliardo(&u, &g, p).unwrap().raw, projected(&u, &g, p).unwrap().raw);
        prop_assert!(x <= w && x >= 0.0);
    }

    #[test]
    fn seminorms_are_p_homogeneous(seed in any::<u64>(), c in -4.0f64..4.0, p in frac()) {
        prop_assume!(c.abs() > 1e-3);
        let g = coarse();
        let u = trig(seed);
        let cu = Combination::new(vec![(c, u.clone())]).unwrap();
        let f = c.abs().powf(p.p);
        prop_assert!(rel(gagliardo(&cu, &g, p).unwrap().raw, f * gagliardo(&u, &g, p).unwrap().raw) < 1e-12);
        prop_assert!(rel(projected(&cu, &g, p).unwrap().raw, f * projected(&u, &g, p).unwrap().raw) < 1e-12);
    }

    #[test]
    fn isometries_preserve_both_seminorms(seed in any::<u64>(), iso_seed in any::<u64>(), p in frac()) {
        let iso = Isometry::random(2, &mut ChaCha8Rng::seed_from_u64(iso_seed));
        let sq = Domain::unit_square();
        let base = coarse();
        let moved = Grid::new(&sq, 1.0 / 8.0, iso.clone(), 2).unwrap();
        let u = trig(seed);
        let tu = Transformed { inner: u.clone(), iso };
        prop_assert!(rel(gagliardo(&tu, &moved, p).unwrap().raw, gagliardo(&u, &base, p).unwrap().raw) < 1e-10);
        prop_assert!(rel(projected(&tu, &moved, p).unwrap().raw, projected(&u, &base, p).unwrap().raw) < 1e-10);
    }

    #[test]
    fn dilation_scales_by_the_homogeneity_exponent(seed in any::<u64>(), tau in 0.5f64..2.0, p in frac()) {
        // the grid is dilated with the domain, so the sums match term by term
        let u = trig(seed);
        let small = make_grid(&Domain::unit_square(), 1.0 / 8.0).unwrap();
        let big = make_grid(&Domain::unit_square().scaled(tau).unwrap(), tau / 8.0).unwrap();
        let su = Scaled { inner: u.clone(), tau };
        let factor = tau.powf(2.0 - p.p * p.s);
        prop_assert!(rel(gagliardo(&su, &big, p).unwrap().raw, factor * gagliardo(&u, &small, p).unwrap().raw) < 1e-10);
    }

    #[test]
    fn peridynamic_energy_is_the_quadratic_projected_form(seed in any::<u64>(), s in 0.1f64..0.9) {
        let g = coarse();
        let u = trig(seed);
        let w = perienergy(&u, &g, s).unwrap();
        let x = projected(&u, &g, FracParams::new(s, 2.0, 2).unwrap()).unwrap().raw;
        prop_assert!(rel(w, x) < 1e-12);
    }
}

#[test]
fn sums_do_not_depend_on_the_thread_count() {
    let g = make_grid(&Domain::unit_square(), 1.0 / 16.0).unwrap();
    let u = trig(7);
    let p = FracParams::new(0.6, 2.5, 2).unwrap();
    let run = |t| with_threads(t, || (gagliardo(&u, &g, p).unwrap().raw, projected(&u, &g, p).unwrap().raw)).unwrap();
    let one = run(1);
    for t in [2, 3, 8] {
        let other = run(t);
        assert_eq!(one.0.to_bits(), other.0.to_bits());
        assert_eq!(one.1.to_bits(), other.1.to_bits());
    }
}

#[test]
fn constants_have_zero_seminorms() {
    let g = coarse();
    let c = field_library(&FieldSpec::Constant { value: vec![3.0, -1.0] }, 2).unwrap();
    let p = FracParams::new(0.5, 2.0, 2).unwrap();
    assert_eq!(gagliardo(&c, &g, p).unwrap().raw, 0.0);
    assert_eq!(projected(&c, &g, p).unwrap().raw, 0.0);
}
