mod support;

use proptest::prelude::*;
use support::panels::{uid, with_clone};
use synthctl_core::estimator::{fit, NelderMeadSettings, SolverSettings};
use synthctl_core::inference::{ratio_ranking, run_placebos, PlaceboSettings};
use synthctl_core::panel::save_panel;
use synthctl_core::simulate::{generate, FactorModelConfig};

fn quick() -> SolverSettings {
    SolverSettings {
        outer_starts: 2,
        outer: NelderMeadSettings {
            max_evals: 150,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn small(seed: u64) -> FactorModelConfig {
    FactorModelConfig {
        n_units: 7,
        seed,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn covariate_rescaling_leaves_weights_unchanged(seed in 0u64..1000, exp in -8i32..8) {
        let sim = generate(&small(seed)).unwrap();
        let factor = 2f64.powi(exp);
        let scaled = sim.panel.with_scaled_covariate("x1", factor);
        let a = fit(&sim.panel, &sim.design, &sim.spec, &quick()).unwrap();
        let b = fit(&scaled, &sim.design, &sim.spec, &quick()).unwrap();
        prop_assert_eq!(&a.w, &b.w);
        prop_assert_eq!(&a.v, &b.v);
    }

    #[test]
    fn donor_listing_order_is_irrelevant(seed in 0u64..1000) {
        let sim = generate(&small(seed)).unwrap();
        let mut reversed = sim.design.clone();
        reversed.donors.reverse();
        let settings = PlaceboSettings { solver: quick(), filter_k: None };
        let a = run_placebos(&sim.panel, &sim.design, &sim.spec, &settings).unwrap();
        let b = run_placebos(&sim.panel, &reversed, &sim.spec, &settings).unwrap();
        prop_assert_eq!(a.p_value, b.p_value);
        prop_assert_eq!(a.rank, b.rank);
        for (x, y) in a.results().iter().zip(b.results()) {
            prop_assert_eq!(&x.stats, &y.stats);
        }
        prop_assert_eq!(ratio_ranking(&a), ratio_ranking(&b));
    }

    #[test]
    fn reruns_are_byte_identical(seed in 0u64..1000) {
        let render = || {
            let sim = generate(&small(seed)).unwrap();
            let settings = PlaceboSettings { solver: quick(), filter_k: None };
            let study = run_placebos(&sim.panel, &sim.design, &sim.spec, &settings).unwrap();
            let mut out = Vec::new();
            save_panel(&sim.panel, &mut out).unwrap();
            synthctl_core::inference::write_unit_stats(&study, &mut out).unwrap();
            synthctl_core::inference::write_gap_paths(&study, &mut out).unwrap();
            out
        };
        prop_assert_eq!(render(), render());
    }
}

#[test]
fn clone_treated_has_zero_gap_path() {
    let sim = generate(&small(5)).unwrap();
    let panel = with_clone(&sim.panel, &sim.design.treated, &uid("u04"));
    let settings = PlaceboSettings {
        solver: quick(),
        filter_k: None,
    };
    let study = run_placebos(&panel, &sim.design, &sim.spec, &settings).unwrap();
    assert!(study.treated.gap.max_abs() < 1e-6);
    assert_eq!(study.n_units(), 7);
}

#[test]
fn large_effect_ranks_treated_first() {
    for seed in 0..5 {
        let sim = generate(&FactorModelConfig {
            n_units: 10,
            noise_std: 0.05,
            effect: 2.0,
            treated_is_convex: true,
            seed,
            ..Default::default()
        })
        .unwrap();
        let settings = PlaceboSettings {
            solver: quick(),
            filter_k: None,
        };
        let study = run_placebos(&sim.panel, &sim.design, &sim.spec, &settings).unwrap();
        assert!(ratio_ranking(&study)[0].treated, "seed {seed}");
        assert_eq!(study.rank, 1, "seed {seed}");
    }
}
