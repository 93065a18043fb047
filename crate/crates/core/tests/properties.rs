use std::sync::Arc;

use matdist_core::builtin::{build_law, AgingPair, Graded, Implant, LawParams, BUILTIN_NAMES};
use matdist_core::classify::classify_dims;
use matdist_core::distributions::{fiber_report, FiberDims};
use matdist_core::grid::{BodyPoint, Grid};
use matdist_core::isomorph::{find_isomorphism, membership_test};
use matdist_core::law::{jet, jet_central_difference, ConstitutiveLaw};
use matdist_core::mat3::Mat3;
use matdist_core::remodel::{classify_growth, GrowthClass, RemodelingProcess, DEFAULT_TAU_TR};
use matdist_core::sampling::AnalysisConfig;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = BodyPoint> {
    (-0.4f64..4.5, prop::array::uniform3(-1.8f64..1.8)).prop_map(|(t, x)| BodyPoint::new(t, x))
}

fn generator() -> impl Strategy<Value = Mat3> {
    prop::array::uniform9(-0.6f64..0.6).prop_map(|a| Mat3::from_row_major(&a))
}

/// A builtin law with randomized parameters.
fn any_law() -> impl Strategy<Value = Arc<dyn ConstitutiveLaw>> {
    prop_oneof![Just(0usize), Just(1), Just(2), Just(3), Just(4), Just(5)]
        .prop_flat_map(|k| (Just(k), 0.1f64..2.0))
        .prop_map(|(k, s)| {
            let name = BUILTIN_NAMES[k];
            let mut params = LawParams::new();
            match name {
                "aging_pair" => {
                    params.insert("rate".into(), vec![s]);
                }
                "graded" => {
                    params.insert("a".into(), vec![s]);
                }
                "implant" => {
                    params.insert("kappa".into(), vec![0.25 * s]);
                }
                _ => {}
            }
            build_law(name, &params).unwrap()
        })
}

fn dims_of(law: &dyn ConstitutiveLaw, p: BodyPoint, cfg: &AnalysisConfig) -> FiberDims {
    fiber_report(law, p.t, p.x, cfg).unwrap().dims
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dual_jets_match_central_differences(law in any_law(), p in point(), g in generator()) {
        let f = g.expm();
        let exact = jet(law.as_ref(), p.t, &p.x, &f).unwrap();
        let approx = jet_central_difference(law.as_ref(), p.t, &p.x, &f).unwrap();
        let pairs = exact.d_t.iter().zip(&approx.d_t)
            .chain(exact.d_x.iter().flatten().zip(approx.d_x.iter().flatten()))
            .chain(exact.d_f.iter().flatten().zip(approx.d_f.iter().flatten()));
        for (a, b) in pairs {
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{} vs {}", a, b);
        }
        prop_assert_eq!(exact.value, approx.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn structural_invariants_hold(law in any_law(), p in point()) {
        let d = dims_of(law.as_ref(), p, &AnalysisConfig::default());
        prop_assert!(d.invariant_violations().is_empty(), "{:?}", d.invariant_violations());
    }

    #[test]
    fn deleting_columns_never_grows_the_kernel(law in any_law(), p in point()) {
        let d = dims_of(law.as_ref(), p, &AnalysisConfig::default());
        prop_assert!(d.dim_state_t <= d.dim_full);
        prop_assert!(d.dim_particle_x <= d.dim_full);
        prop_assert!(d.dim_isotropy <= d.dim_state_t.min(d.dim_particle_x));
    }

    #[test]
    fn dims_are_stable_under_more_samples(law in any_law(), p in point()) {
        let base = AnalysisConfig::default();
        let doubled = AnalysisConfig { n_f: 2 * base.n_f, ..base.clone() };
        let (a, b) = (dims_of(law.as_ref(), p, &base), dims_of(law.as_ref(), p, &doubled));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn classification_respects_implications(law in any_law(), t0 in 0.0f64..2.0, x1 in -1.5f64..1.5) {
        let cfg = AnalysisConfig { n_f: 24, ..AnalysisConfig::default() };
        let grid = Grid::t_x1([t0, t0 + 1.0], 2, [x1 - 0.5, x1 + 0.5], 3, 0.1, -0.2);
        let dims: Vec<FiberDims> = grid.points.iter().map(|&p| dims_of(law.as_ref(), p, &cfg)).collect();
        let report = classify_dims(&dims, &cfg).unwrap();
        prop_assert!(report.implication_violations().is_empty(), "{:?}", report.implication_violations());
    }

    #[test]
    fn growth_class_is_stable_under_refinement(a in prop_oneof![-0.5f64..-0.01, 0.01f64..0.5], n in 4usize..12) {
        let build = |m: usize| {
            let dt = 1.0 / m as f64;
            let ts: Vec<f64> = (0..=m).map(|k| k as f64 * dt).collect();
            let p = ts.iter().map(|&t| Mat3::scaled_identity((a * t).exp())).collect();
            RemodelingProcess::new([0.0; 3], ts, p, 1.0, None).unwrap()
        };
        let coarse = classify_growth(&build(n), DEFAULT_TAU_TR).unwrap().overall;
        let fine = classify_growth(&build(2 * n), DEFAULT_TAU_TR).unwrap().overall;
        let expected = if a < 0.0 { GrowthClass::Growth } else { GrowthClass::Resorption };
        prop_assert_eq!(coarse, Some(expected));
        prop_assert_eq!(fine, Some(expected));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn implant_isomorphisms_compose(x in -1.5f64..1.5, y in -1.5f64..1.5, z in -1.5f64..1.5) {
        let law = Implant::default();
        let cfg = AnalysisConfig { n_f: 20, ..AnalysisConfig::default() };
        let (px, py, pz) = (
            BodyPoint::new(0.0, [x, 0.0, 0.0]),
            BodyPoint::new(0.0, [y, 0.0, 0.0]),
            BodyPoint::new(0.0, [z, 0.0, 0.0]),
        );
        let xy = find_isomorphism(&law, px, py, &cfg).unwrap();
        let yz = find_isomorphism(&law, py, pz, &cfg).unwrap();
        prop_assert!(xy.residual <= cfg.tau_iso);
        let r = membership_test(&law, px, pz, &(yz.p * xy.p), cfg.n_validation, &cfg).unwrap();
        prop_assert!(r <= 1e-5, "composition residual {}", r);
        let inv = xy.p.inverse().unwrap();
        let back = membership_test(&law, py, px, &inv, cfg.n_validation, &cfg).unwrap();
        prop_assert!(back <= 1e-5);
    }
}

#[test]
fn aging_and_graded_are_not_uniform_at_some_point() {
    let cfg = AnalysisConfig::default();
    let aging = dims_of(&AgingPair::default(), BodyPoint::new(1.0, [0.0; 3]), &cfg);
    assert_eq!(aging.dim_base, 3);
    let graded = dims_of(
        &Graded::default(),
        BodyPoint::new(0.0, [1.0, 0.0, 0.0]),
        &cfg,
    );
    assert_eq!(graded.dim_base, 3);
}
