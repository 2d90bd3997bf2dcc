use std::sync::Arc;

use fracorn::extension::{
    extension_norm_ratio, lower_window, mixed_terms, solve_coefficients, AngularExtension, DeltaVariant,
    EpigraphExtension, ExtensionCoeffs, ExtensionKind,
};
use fracorn::fields::{field_library, Combination};
use fracorn::geometry::Side;
use fracorn::{Domain, FieldRef, FieldSpec, FracParams, LipschitzFn, RigidMotion, VectorField};
use proptest::prelude::*;

fn graph() -> impl Strategy<Value = LipschitzFn> {
    prop::collection::vec(-0.5f64..0.5, 7).prop_map(|ys| {
        let xs: Vec<f64> = (0..7).map(|i| -1.5 + 0.5 * i as f64).collect();
        LipschitzFn::piecewise_linear(xs, ys).unwrap()
    })
}

fn trig(seed: u64) -> FieldRef {
    Arc::new(field_library(&FieldSpec::RandomTrig { seed, modes: 3 }, 2).unwrap())
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn coefficients_solve_the_reflection_conditions(lambda in 0.0f64..2.0, gap in 1e-3f64..2.0) {
        let c = ExtensionCoeffs::from_lambda_mu(lambda, lambda + gap).unwrap();
        let scale = c.k.abs().max(c.l.abs()).max(c.m.abs()).max(c.q.abs());
        prop_assert!(c.max_residual() <= 8.0 * f64::EPSILON * scale * (1.0 + lambda + gap));
    }

    #[test]
    fn delta_lies_in_range(m in 0.0f64..50.0, c2 in 1.0f64..10.0, n in 2usize..5) {
        for v in [DeltaVariant::TwoPlusM, DeltaVariant::OnePlusM] {
            let c = solve_coefficients(m, n, c2, v).unwrap();
            prop_assert!(c.delta > 0.0 && c.delta <= 0.5);
            prop_assert!(c.lambda < 1.0 && c.mu > 1.0);
            prop_assert!((c.mu - c.lambda - 2.0 * c.delta).abs() < 1e-15);
        }
    }

    #[test]
    fn extension_is_the_identity_above_the_graph(f in graph(), seed in any::<u64>(), x in -1.0f64..1.0, t in 0.0f64..1.0) {
        let u = trig(seed);
        let c = solve_coefficients(f.lipschitz(), 2, 3.0, DeltaVariant::TwoPlusM).unwrap();
        let e = EpigraphExtension::new(u.clone(), f.clone(), c);
        let p = [x, f.eval1(x) + t];
        prop_assert_eq!(e.try_eval(&p).unwrap(), u.eval(&p));
    }

    #[test]
    fn rigid_motions_extend_to_themselves(
        f in graph(), a in -2.0f64..2.0, b in prop::array::uniform2(-2.0f64..2.0),
        x in -1.0f64..1.0, t in 1e-6f64..1.0,
    ) {
        let r = RigidMotion::new(vec![a], b.to_vec()).unwrap();
        let c = solve_coefficients(f.lipschitz(), 2, 3.0, DeltaVariant::TwoPlusM).unwrap();
        let e = EpigraphExtension::new(r.clone(), f.clone(), c);
        let p = [x, f.eval1(x) - t];
        prop_assert!(close(&e.try_eval(&p).unwrap(), &r.eval(&p), 1e-12));
    }

    #[test]
    fn extension_is_linear(f in graph(), s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0f64..3.0, x in -1.0f64..1.0, t in 1e-6f64..1.0) {
        let (u, v) = (trig(s1), trig(s2));
        let w = Combination::new(vec![(a, u.clone()), (1.0, v.clone())]).unwrap();
        let c = solve_coefficients(f.lipschitz(), 2, 3.0, DeltaVariant::TwoPlusM).unwrap();
        let p = [x, f.eval1(x) - t];
        let eu = EpigraphExtension::new(u, f.clone(), c).try_eval(&p).unwrap();
        let ev = EpigraphExtension::new(v, f.clone(), c).try_eval(&p).unwrap();
        let ew = EpigraphExtension::new(w, f.clone(), c).try_eval(&p).unwrap();
        let lin: Vec<f64> = eu.iter().zip(&ev).map(|(p, q)| a * p + q).collect();
        prop_assert!(close(&ew, &lin, 1e-12 * (1.0 + c.k.abs())));
    }

    #[test]
    fn extension_is_continuous_across_the_graph(f in graph(), seed in any::<u64>(), x in -1.0f64..1.0) {
        let u = trig(seed);
        let c = solve_coefficients(f.lipschitz(), 2, 1.0, DeltaVariant::TwoPlusM).unwrap();
        let e = EpigraphExtension::new(u.clone(), f.clone(), c);
        let on = u.eval(&[x, f.eval1(x)]);
        let eps = 1e-7;
        let below = e.try_eval(&[x, f.eval1(x) - eps]).unwrap();
        // |∇u| is bounded by the sum of the mode amplitudes times frequencies (< 3 · 2π · 2)
        let bound = 40.0 * eps * (c.k.abs() + c.l.abs() + c.m.abs() + c.q.abs()) * (1.0 + c.mu);
        prop_assert!(on.iter().zip(&below).all(|(p, q)| (p - q).abs() <= bound));
    }

    #[test]
    fn mixed_pair_identities_hold(f in graph(), seed in any::<u64>(), a in -1.0f64..1.0, b in -1.0f64..1.0, t in 1e-3f64..0.5, r in 0.0f64..1.0) {
        let c = solve_coefficients(f.lipschitz(), 2, 3.0, DeltaVariant::TwoPlusM).unwrap();
        let e = EpigraphExtension::new(trig(seed), f.clone(), c);
        let m = mixed_terms(&e, &[a, f.eval1(a) - t], &[b, f.eval1(b) + r]).unwrap();
        prop_assert!(m.defect() < 1e-12, "{:?}", m);
    }

    #[test]
    fn wedge_without_the_alpha_term_is_the_affine_graph_extension(
        alpha in 0.1f64..3.0, seed in any::<u64>(), x0 in 0.0f64..1.0, t in 1e-6f64..1.0,
    ) {
        let c = solve_coefficients(alpha, 2, 3.0, DeltaVariant::TwoPlusM).unwrap();
        let u = trig(seed);
        let wedge = AngularExtension::new(u.clone(), alpha, c).without_alpha_term();
        let epi = EpigraphExtension::new(u.clone(), LipschitzFn::affine(vec![alpha], 0.0), c);
        let x = [x0, alpha * x0 - t];
        prop_assert_eq!(wedge.try_eval(&x).unwrap(), epi.try_eval(&x).unwrap());
        // the full wedge extension adds w (u₂(Φ_λx) − u₂(Φ_μx)) to the first component
        let full = AngularExtension::new(u.clone(), alpha, c).try_eval(&x).unwrap();
        let g = alpha * x0;
        let (ua, ub) = (u.eval(&[x0, g + c.lambda * t]), u.eval(&[x0, g + c.mu * t]));
        let w = alpha * c.k * (1.0 + c.lambda);
        let plain = wedge.try_eval(&x).unwrap();
        prop_assert!((full[0] - plain[0] - w * (ua[1] - ub[1])).abs() < 1e-12 * (1.0 + w.abs()));
        prop_assert_eq!(full[1], plain[1]);
    }
}

#[test]
fn alpha_term_changes_only_the_lower_window() {
    let params = FracParams::new(0.5, 2.0, 2).unwrap();
    let d = Domain::angular(1.0, 1.0, 1.0, Side::Upper).unwrap();
    let c = solve_coefficients(1.0, 2, 3.0, DeltaVariant::TwoPlusM).unwrap();
    let u = field_library(&FieldSpec::Shear { amount: 1.0 }, 2).unwrap();
    let keep = extension_norm_ratio(&u, &d, &c, ExtensionKind::Angular { drop_alpha_term: false }, 1.0 / 16.0, params).unwrap();
    let drop = extension_norm_ratio(&u, &d, &c, ExtensionKind::Angular { drop_alpha_term: true }, 1.0 / 16.0, params).unwrap();
    assert_eq!(keep.split.upper, drop.split.upper);
    assert_eq!(keep.context, drop.context);
    assert!(keep.ratio.unwrap().is_finite() && drop.ratio.unwrap().is_finite());
    // the shear (x₂, 0) has u₂ ≡ 0, so the extra term vanishes
    assert_eq!(keep.split.lower, drop.split.lower);

    let v = field_library(&FieldSpec::Power { component: 1, axis: 1, exponent: 2.0 }, 2).unwrap();
    let keep = extension_norm_ratio(&v, &d, &c, ExtensionKind::Angular { drop_alpha_term: false }, 1.0 / 16.0, params).unwrap();
    let drop = extension_norm_ratio(&v, &d, &c, ExtensionKind::Angular { drop_alpha_term: true }, 1.0 / 16.0, params).unwrap();
    assert_eq!(keep.split.upper, drop.split.upper);
    assert_ne!(keep.split.lower, drop.split.lower);
}

#[test]
fn lower_window_matches_the_reach_of_the_reflection() {
    let c = solve_coefficients(0.0, 2, 3.0, DeltaVariant::TwoPlusM).unwrap();
    let d = Domain::half_space_trunc(fracorn::geometry::BoxRegion::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()).unwrap();
    let low = lower_window(&d, c.mu).unwrap();
    let bb = low.bounding_box();
    // shrunk by a relative 1e-9 so that reflected nodes stay strictly inside
    assert!((bb.lo[1] + 1.0 / c.mu).abs() < 1e-8, "{:?}", bb);
    // every reflected point of the lower window lands in the closed upper box
    let e = EpigraphExtension::new(field_library(&FieldSpec::Identity, 2).unwrap(), LipschitzFn::zero(2), c)
        .with_field_domain(d.clone());
    assert!(e.try_eval(&[0.5, bb.lo[1] + 1e-9]).is_ok());
    assert!(e.try_eval(&[0.5, bb.lo[1] - 0.1]).is_err());
}
