use std::sync::Arc;

use fracorn::fields::{field_library, rigid_generators, BasisSet, Combination};
use fracorn::geometry::{BoxRegion, Isometry};
use fracorn::korn::{
    assemble_gram, estimate_korn1_constant, estimate_korn2_constant, korn_poincare_constant, max_generalized_eig,
    random_unit, rigid_project_lp, rigid_project_seminorm, Korn2Method,
};
use fracorn::seminorms::gagliardo;
use fracorn::{Domain, FieldRef, FieldSpec, FracParams, Grid, RigidMotion, VectorField};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(h: f64) -> Grid {
    Grid::new(&Domain::unit_square(), h, Isometry::identity(2), 2).unwrap()
}

fn lp_objective(u: &dyn VectorField, g: &Grid, p: f64, r: &RigidMotion) -> f64 {
    (0..g.len())
        .map(|i| {
            let (a, b) = (u.eval(g.center(i)), r.eval(g.center(i)));
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            g.volume(i) * d.powf(p)
        })
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Zooming grid search over `(A₁₂, b₁, b₂)` around a starting motion.
fn grid_search(u: &dyn VectorField, g: &Grid, p: f64, start: &RigidMotion) -> (f64, RigidMotion) {
    let mut best = (lp_objective(u, g, p, start), start.clone());
    let mut radius = 0.5;
    for _ in 0..14 {
        let c = best.1.coeffs();
        let steps = 7;
        for i in 0..steps {
            for j in 0..steps {
                for k in 0..steps {
                    let t = |m: usize| radius * (2.0 * m as f64 / (steps - 1) as f64 - 1.0);
                    let r = RigidMotion::from_coeffs(2, &[c[0] + t(i), c[1] + t(j), c[2] + t(k)]);
                    let v = lp_objective(u, g, p, &r);
                    if v < best.0 {
                        best = (v, r);
                    }
                }
            }
        }
        radius *= 0.5;
    }
    best
}

#[test]
fn irls_matches_grid_search_for_p3() {
    let g = grid(1.0 / 16.0);
    for seed in [1, 2, 3] {
        let u = field_library(&FieldSpec::RandomTrig { seed, modes: 3 }, 2).unwrap();
        let fit = rigid_project_lp(&u, &g, 3.0).unwrap();
        assert!(fit.converged);
        let lsq = rigid_project_lp(&u, &g, 2.0).unwrap();
        let (oracle, r) = grid_search(&u, &g, 3.0, &lsq.rigid);
        assert!(fit.residual <= oracle * (1.0 + 1e-7), "seed {seed}: {} > {oracle}", fit.residual);
        assert!((fit.residual - oracle).abs() < 1e-6 * oracle);
        for (a, b) in fit.rigid.coeffs().iter().zip(r.coeffs()) {
            assert!((a - b).abs() < 1e-3, "seed {seed}: {:?} vs {:?}", fit.rigid, r);
        }
    }
}

#[test]
fn least_squares_residual_is_orthogonal_to_rigid_motions() {
    let g = grid(1.0 / 16.0);
    let u = field_library(&FieldSpec::RandomTrig { seed: 4, modes: 3 }, 2).unwrap();
    let fit = rigid_project_lp(&u, &g, 2.0).unwrap();
    for gen in rigid_generators(2, &[0.5, 0.5]) {
        let ip: f64 = (0..g.len())
            .map(|i| {
                let x = g.center(i);
                let (a, r, e) = (u.eval(x), fit.rigid.eval(x), gen.eval(x));
                g.volume(i) * ((a[0] - r[0]) * e[0] + (a[1] - r[1]) * e[1])
            })
            .sum();
        assert!(ip.abs() < 1e-12, "{ip}");
    }
}

#[test]
fn rigid_fit_recovers_a_rigid_field() {
    let g = grid(1.0 / 16.0);
    let r = RigidMotion::new(vec![0.7], vec![-0.3, 1.1]).unwrap();
    for p in [2.0, 3.0] {
        let fit = rigid_project_lp(&r, &g, p).unwrap();
        assert!(fit.residual < 1e-9, "p={p}: {}", fit.residual);
    }
}

#[test]
fn seminorm_projection_beats_every_sampled_rotation() {
    let g = grid(1.0 / 16.0);
    let p = FracParams::new(0.5, 2.5, 2).unwrap();
    let u: FieldRef = Arc::new(field_library(&FieldSpec::RandomTrig { seed: 8, modes: 3 }, 2).unwrap());
    let best = rigid_project_seminorm(&u, &g, p).unwrap();
    for k in 0..41 {
        let a = -2.0 + 0.1 * k as f64;
        let r: FieldRef = Arc::new(RigidMotion::new(vec![a], vec![0.0, 0.0]).unwrap());
        let v = Combination::new(vec![(1.0, u.clone()), (-1.0, r)]).unwrap();
        assert!(best.raw <= gagliardo(&v, &g, p).unwrap().raw * (1.0 + 1e-9));
    }
}

#[test]
fn gram_constants_are_consistent() {
    let g = grid(1.0 / 16.0);
    let p = FracParams::new(0.5, 2.0, 2).unwrap();
    let basis = Arc::new(BasisSet::cosine(BoxRegion::unit(2), 3, true));
    let forms = assemble_gram(basis, &g, p).unwrap();
    let eig = estimate_korn2_constant(&forms, Korn2Method::Eig).unwrap();
    let search = estimate_korn2_constant(&forms, Korn2Method::RandomSearch { samples: 500, seed: 1 }).unwrap();
    assert!(search.lambda <= eig.lambda * (1.0 + 1e-10));
    assert!((forms.korn2_ratio(&eig.coeffs) - eig.lambda).abs() < 1e-9 * eig.lambda);
    let lower = forms.restrict(2);
    assert!(estimate_korn2_constant(&lower, Korn2Method::Eig).unwrap().lambda <= eig.lambda * (1.0 + 1e-12));
    let c1 = estimate_korn1_constant(&forms).unwrap();
    let kp = korn_poincare_constant(&forms).unwrap();
    assert!(c1.lambda >= 1.0 - 1e-9, "the W form dominates the projected one: {}", c1.lambda);
    assert!(kp.estimate.value > 0.0 && (kp.estimate.value.powi(2) - kp.lambda).abs() < 1e-12 * kp.lambda);
}

fn spd(seed: u64, m: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    &q * q.transpose() + DMatrix::identity(m, m) * 0.1
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn generalized_eigenpairs(sa in any::<u64>(), sb in any::<u64>(), sv in any::<u64>(), m in 2usize..9) {
        let (a, b) = (spd(sa, m), spd(sb, m));
        let (lam, v) = max_generalized_eig(&a, &b).unwrap();
        let res = &a * &v - (&b * &v) * lam;
        prop_assert!(res.norm() < 1e-8 * (a.norm() + lam.abs() * b.norm()) * v.norm());
        let mut rng = ChaCha8Rng::seed_from_u64(sv);
        for _ in 0..20 {
            let w: DVector<f64> = random_unit(&mut rng, m);
            prop_assert!(w.dot(&(&a * &w)) <= lam * w.dot(&(&b * &w)) * (1.0 + 1e-10));
        }
    }
}
