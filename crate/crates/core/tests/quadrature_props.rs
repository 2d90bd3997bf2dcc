use fracorn::geometry::Isometry;
use fracorn::quadrature::{convergence_study, double_integral, integrate_cells, reduce_ordered, PairKernelSpec};
use fracorn::{Domain, Grid};
use proptest::prelude::*;

fn unit(h: f64, depth: usize) -> Grid {
    Grid::new(&Domain::unit_square(), h, Isometry::identity(2), depth).unwrap()
}

#[test]
fn only_coincident_subcells_are_dropped() {
    // a constant integrand loses exactly the coincident sub-cell pairs: N · (h 2^-L)^4
    for (h, depth) in [(1.0 / 8.0, 0), (1.0 / 8.0, 2), (1.0 / 16.0, 3)] {
        let g = unit(h, depth);
        let one = double_integral(&g, &g, &PairKernelSpec::new(-2.0, |_, _| 1.0)).unwrap();
        let sub = h / f64::from(1u32 << depth);
        let expected = 1.0 - (g.len() as f64) * f64::from(1u32 << (2 * depth)) * sub.powi(4);
        assert!((one - expected).abs() < 1e-13, "h={h} L={depth}: {one} vs {expected}");
    }
}

#[test]
fn asymmetric_kernels_are_not_folded() {
    let g = unit(1.0 / 8.0, 2);
    let spec = PairKernelSpec::new(-2.0, |x, _| x[0]).asymmetric();
    let v = double_integral(&g, &g, &spec).unwrap();
    assert!((v - 0.5).abs() < 1e-3, "{v}");
    let w = double_integral(&g, &g, &PairKernelSpec::new(-2.0, |_, y| y[0]).asymmetric()).unwrap();
    assert!((v - w).abs() < 1e-12);
}

#[test]
fn cell_integrals_are_exact_for_linear_functions() {
    let g = unit(1.0 / 16.0, 2);
    let v = integrate_cells(&g, |x| Ok(3.0 * x[0] - x[1] + 2.0)).unwrap();
    assert!((v - 3.0).abs() < 1e-13);
}

#[test]
fn convergence_study_needs_a_geometric_sequence() {
    assert!(convergence_study(&[0.1, 0.05], Ok).is_err());
    assert!(convergence_study(&[0.1, 0.05, 0.02], Ok).is_err());
}

proptest! {
    #[test]
    fn convergence_study_recovers_a_power_law(order in 0.3f64..2.5, c in -5.0f64..5.0, limit in -3.0f64..3.0) {
        prop_assume!(c.abs() > 1e-2);
        let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
        let t = convergence_study(&hs, |h| Ok(limit + c * h.powf(order))).unwrap();
        prop_assert!((t.order - order).abs() < 1e-6);
        prop_assert!((t.fitted_order - order).abs() < 1e-6);
        prop_assert!((t.extrapolate - limit).abs() < 1e-9 * (1.0 + c.abs()));
        prop_assert!(t.monotone);
    }

    #[test]
    fn ordered_reduction_is_the_plain_sum_for_integers(v in prop::collection::vec(-1000i64..1000, 1..200)) {
        let total: i64 = v.iter().sum();
        prop_assert_eq!(reduce_ordered(v, |a, b| a + b), Some(total));
    }
}
