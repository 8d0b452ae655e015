//! Property tests for the invariants that hold across random models.

use proptest::prelude::*;
use seasonal_lv::fixedpoints::{autonomous_positive_equilibrium, fixed_point_census, FixedPointKind, PositiveSearchOptions};
use seasonal_lv::flow::{flow_autonomous, lv_jacobian, logistic_solution, DEFAULT_TOL};
use seasonal_lv::linalg::{norm_inf, Mat3, Vec3};
use seasonal_lv::poincare::{conjugacy_residual, poincare_map};
use seasonal_lv::quad::adaptive_simpson;
use seasonal_lv::simplex::sample_portrait;
use seasonal_lv::{ModelParams, ModelSpec};

fn matrix() -> impl Strategy<Value = [[f64; 3]; 3]> {
    prop::array::uniform3(prop::array::uniform3(0.2f64..2.0)).prop_map(|mut a| {
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = row[i].max(0.5);
        }
        a
    })
}

fn seasons() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.5f64..2.0, 0.05f64..1.0, 0.3f64..0.95, 0.5f64..4.0)
}

fn spec_from(a: [[f64; 3]; 3], (b, mu, phi, omega): (f64, f64, f64, f64)) -> Option<ModelSpec> {
    ModelSpec::new(ModelParams { a, b, mu, phi, omega }).ok()
}

fn interior_point() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(0.01f64..1.0).prop_map(Vec3::from)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn rho_hat_is_the_logistic_integral(a in matrix(), s in seasons()) {
        let Some(spec) = spec_from(a, s) else { return Ok(()) };
        let c = spec.constants();
        let q = adaptive_simpson(|t| logistic_solution(spec.b(), c.l * c.rho_star, t), 0.0, spec.good_season(), 1e-12);
        prop_assert!((q - c.rho_hat).abs() <= 1e-8);
    }

    #[test]
    fn rho_star_is_the_logistic_fixed_point(a in matrix(), s in seasons()) {
        let Some(spec) = spec_from(a, s) else { return Ok(()) };
        let rho = spec.constants().rho_star;
        prop_assert!((spec.logistic_map(rho) - rho).abs() <= 1e-10);
    }

    #[test]
    fn l_and_rho_star_increase_with_phi(a in matrix(), s in seasons(), dphi in 0.001f64..0.05) {
        let (b, mu, phi, omega) = s;
        let (Some(lo), Some(hi)) = (spec_from(a, s), spec_from(a, (b, mu, phi + dphi, omega))) else {
            return Ok(());
        };
        prop_assert!(hi.constants().l > lo.constants().l);
        prop_assert!(hi.constants().rho_star > lo.constants().rho_star);
    }

    #[test]
    fn flow_stays_interior(a in matrix(), x in interior_point(), t in 0.1f64..30.0) {
        let m = Mat3::from_fn(|i, j| a[i][j]);
        let y = flow_autonomous(&m, 1.0, &x, t, DEFAULT_TOL, false).unwrap().state;
        prop_assert!(y.min() > 0.0, "{y:?}");
    }

    #[test]
    fn variational_matches_finite_differences(a in matrix(), x in interior_point(), t in 0.1f64..5.0) {
        let m = Mat3::from_fn(|i, j| a[i][j]);
        let base = flow_autonomous(&m, 1.0, &x, t, DEFAULT_TOL, true).unwrap();
        let w = base.jacobian.unwrap();
        let h = 1e-6;
        let mut fd = Mat3::zeros();
        for j in 0..3 {
            let mut e = Vec3::zeros();
            e[j] = h;
            let plus = flow_autonomous(&m, 1.0, &(x + e), t, DEFAULT_TOL, false).unwrap().state;
            let minus = flow_autonomous(&m, 1.0, &(x - e), t, DEFAULT_TOL, false).unwrap().state;
            fd.set_column(j, &((plus - minus) / (2.0 * h)));
        }
        prop_assert!(norm_inf(&(w - fd)) <= 1e-4, "{}", norm_inf(&(w - fd)));
    }

    #[test]
    fn variational_at_equilibrium_is_exponential(a in matrix(), t in 0.1f64..5.0) {
        let m = Mat3::from_fn(|i, j| a[i][j]);
        let Ok(Some(x)) = autonomous_positive_equilibrium(&m, 1.0) else { return Ok(()) };
        let w = flow_autonomous(&m, 1.0, &x, t, DEFAULT_TOL, true).unwrap().jacobian.unwrap();
        let e = (lv_jacobian(&m, 1.0, &x) * t).exp();
        prop_assert!(norm_inf(&(w - e)) <= 1e-7, "{}", norm_inf(&(w - e)));
    }

    #[test]
    fn poincare_map_is_injective(a in matrix(), s in seasons(), x in interior_point(), y in interior_point()) {
        prop_assume!((x - y).amax() > 1e-6);
        let Some(spec) = spec_from(a, s) else { return Ok(()) };
        let px = poincare_map(&spec, &x, DEFAULT_TOL).unwrap();
        let py = poincare_map(&spec, &y, DEFAULT_TOL).unwrap();
        prop_assert!((px - py).amax() > 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn conjugacy_holds_for_random_models(a in matrix(), s in seasons(), x in interior_point(), k in 1usize..=50) {
        let Some(spec) = spec_from(a, s) else { return Ok(()) };
        let res = conjugacy_residual(&spec, &x, k, DEFAULT_TOL).unwrap();
        prop_assert!(res <= 1e-6, "{res}");
    }

    #[test]
    fn positive_fixed_points_obey_the_index_law(a in matrix(), s in seasons()) {
        let Some(spec) = spec_from(a, s) else { return Ok(()) };
        let census = fixed_point_census(&spec, &PositiveSearchOptions::default()).unwrap();
        for fp in &census.fixed_points {
            prop_assert!(fp.residual <= 1e-9, "{:?}", fp);
            if fp.kind != FixedPointKind::Positive {
                continue;
            }
            let smallest = fp.eigenvalues[0];
            prop_assert!(smallest.im == 0.0 && smallest.re > 0.0 && smallest.re < 1.0, "{smallest}");
            if fp.warnings.is_empty() {
                prop_assert_eq!(fp.index as f64, spec.det().signum());
            }
        }
        if let Ok(Some(x_hat)) = autonomous_positive_equilibrium(spec.a(), spec.b()) {
            let expect = x_hat * spec.constants().rho_star;
            prop_assert!(census
                .fixed_points
                .iter()
                .any(|fp| fp.kind == FixedPointKind::Positive && fp.location == expect));
        }
    }

    #[test]
    fn portraits_are_reproducible(seed in any::<u64>()) {
        let spec = ModelSpec::new(ModelParams::may_leonard(1.2, 0.5, 1.0, 0.5, 0.5, 1.0)).unwrap();
        let a = sample_portrait(&spec, 3, 200, seed, DEFAULT_TOL).unwrap();
        let b = sample_portrait(&spec, 3, 200, seed, DEFAULT_TOL).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
