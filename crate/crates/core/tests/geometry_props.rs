use fracorn::geometry::{
    build_whitney_cover, check_whitney_cover, lemma_a1_bound, lemma_a1_ratio, mcshane_extend, polygon_area, BoxRegion,
    EpiWindow, Isometry, PhiDirection, PhiMap, Side,
};
use fracorn::{make_grid, Domain, LipschitzFn};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph() -> impl Strategy<Value = LipschitzFn> {
    prop::collection::vec(-0.3f64..0.3, 9).prop_map(|ys| {
        let xs: Vec<f64> = (0..9).map(|i| -2.0 + 0.5 * i as f64).collect();
        LipschitzFn::piecewise_linear(xs, ys).unwrap()
    })
}

fn point_above(f: &LipschitzFn, x: f64, t: f64) -> Vec<f64> {
    vec![x, f.eval1(x) + t]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn isometry_round_trip(seed in any::<u64>(), x in prop::array::uniform3(-5.0f64..5.0)) {
        let iso = Isometry::random(3, &mut ChaCha8Rng::seed_from_u64(seed));
        let back = iso.apply_inverse(&iso.apply(&x));
        for d in 0..3 {
            prop_assert!((back[d] - x[d]).abs() < 1e-12);
        }
        let (a, b) = (iso.apply(&x), iso.apply(&[0.0, 0.0, 0.0]));
        let d0 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d1 = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        prop_assert!((d0 - d1).abs() < 1e-12 * (1.0 + d0));
    }

    #[test]
    fn phi_maps_invert(f in graph(), eta in 0.1f64..3.0, x in -1.5f64..1.5, t in 0.001f64..2.0) {
        let above = point_above(&f, x, t);
        let below = vec![x, f.eval1(x) - t];
        let fwd = PhiMap::new(f.clone(), eta, PhiDirection::Forward).unwrap();
        let y = fwd.apply(&below).unwrap();
        prop_assert!(y[1] >= f.eval1(x));
        let z = fwd.inverse(&y).unwrap();
        prop_assert!((z[1] - below[1]).abs() < 1e-12 * (1.0 + t));
        let side = PhiMap::new(f.clone(), eta, PhiDirection::GraphSide).unwrap();
        let w = side.inverse(&side.apply(&above).unwrap()).unwrap();
        prop_assert!((w[1] - above[1]).abs() < 1e-12 * (1.0 + t / eta));
        prop_assert!(fwd.apply(&above).is_err());
    }

    #[test]
    fn lemma_a1_ratio_stays_below_its_bound(
        f in graph(),
        lambda in 0.5f64..0.99,
        x in -1.5f64..1.5, tx in 1e-4f64..1.0,
        y in -1.5f64..1.5, ty in 1e-4f64..1.0,
    ) {
        let m = f.lipschitz();
        let r = lemma_a1_ratio(&f, lambda, &point_above(&f, x, tx), &point_above(&f, y, ty)).unwrap();
        prop_assert!(r <= lemma_a1_bound(m, lambda) * (1.0 + 1e-12), "{} > {}", r, lemma_a1_bound(m, lambda));
    }

    #[test]
    fn mcshane_extension_keeps_values_and_constant(f in graph(), x in -6.0f64..6.0, y in -6.0f64..6.0) {
        let m = f.lipschitz();
        let g = mcshane_extend(&f.clone().on_interval(-1.0, 1.0), m).unwrap();
        prop_assert!((g.eval1(x) - g.eval1(y)).abs() <= m * (x - y).abs() * (1.0 + 1e-12) + 1e-15);
        if x.abs() <= 1.0 {
            prop_assert_eq!(g.eval1(x), f.eval1(x));
        }
    }

    #[test]
    fn grid_volume_matches_the_box(w in 0.3f64..2.0, hgt in 0.3f64..2.0, x0 in -1.0f64..1.0) {
        let b = BoxRegion::new(vec![x0, 0.0], vec![x0 + w, hgt]).unwrap();
        let g = make_grid(&Domain::boxed(b.clone()), 1.0 / 16.0).unwrap();
        // clipped boundary cells are measured by stratified sampling (32 strata per axis)
        let slack = 2.0 * (w + hgt) * (1.0 / 16.0) / 32.0;
        prop_assert!((g.total_volume() - b.volume()).abs() < slack);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn whitney_covers_of_random_graphs(f in graph(), seed in any::<u64>()) {
        let window = EpiWindow::Box(BoxRegion::new(vec![-1.0, -0.5], vec![1.0, 1.0]).unwrap());
        let d = Domain::epigraph(f, window, Side::Upper).unwrap();
        let cover = build_whitney_cover(&d, 1.0 / 32.0).unwrap();
        let check = check_whitney_cover(&cover, &d, 30, seed);
        prop_assert!(check.passed(12), "{:?}", check);
    }
}

#[test]
fn wedge_cover_and_volume() {
    for alpha in [0.5, 1.0, 2.0] {
        let d = Domain::angular(alpha, 1.0, 1.0, Side::Upper).unwrap();
        assert!((d.exact_volume().unwrap() - 1.0).abs() < 1e-12);
        let g = make_grid(&d, 1.0 / 32.0).unwrap();
        assert!((g.total_volume() - 1.0).abs() < 5e-3, "alpha {alpha}: {}", g.total_volume());
        let cover = build_whitney_cover(&d, 1.0 / 64.0).unwrap();
        let check = check_whitney_cover(&cover, &d, 50, 3);
        assert!(check.passed(12), "alpha {alpha}: {check:?}");
    }
}

#[test]
fn polygon_area_of_a_unit_square() {
    let v = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    assert_eq!(polygon_area(&v), 1.0);
    let d = Domain::convex_polygon(v.to_vec()).unwrap();
    assert!(d.contains(&[0.5, 0.5]) && !d.contains(&[1.5, 0.5]));
}

#[test]
fn rejects_bad_input() {
    assert!(BoxRegion::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    assert!(LipschitzFn::piecewise_linear(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    assert!(Domain::convex_polygon(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
    assert!(PhiMap::new(LipschitzFn::zero(2), 0.0, PhiDirection::Forward).is_err());
    let f = LipschitzFn::affine(vec![2.0], 0.0).on_interval(0.0, 1.0);
    assert!(mcshane_extend(&f, 1.0).is_err());
}
