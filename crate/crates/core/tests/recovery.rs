mod support;

use support::panels::{uid, with_clone};
use synthctl_core::diagnostics::gap_series;
use synthctl_core::estimator::{fit, SolverSettings};
use synthctl_core::simulate::{generate, FactorModelConfig};

#[test]
fn clone_donor_takes_all_weight_across_seeds() {
    for seed in 0..20u64 {
        let sim = generate(&FactorModelConfig {
            n_units: 8,
            seed,
            ..Default::default()
        })
        .unwrap();
        let source = uid(&format!("u{:02}", 2 + seed % 7));
        let panel = with_clone(&sim.panel, &sim.design.treated, &source);
        let f = fit(&panel, &sim.design, &sim.spec, &SolverSettings::default()).unwrap();
        let w = f.weight_of(&source).unwrap();
        assert!(w >= 0.999, "seed {seed}: weight {w}");
        assert!(f.pre_mspe <= 1e-12, "seed {seed}: pre_mspe {}", f.pre_mspe);
        let gap = gap_series(&f, &panel).unwrap();
        assert!(gap.max_abs() < 1e-6, "seed {seed}");
    }
}

fn convex(noise: f64, seed: u64, effect: f64) -> FactorModelConfig {
    FactorModelConfig {
        n_units: 4,
        n_factors: 3,
        n_covariates: 3,
        noise_std: noise,
        covariate_noise_std: Some(noise / 10.0),
        treated_is_convex: true,
        effect,
        seed,
        ..Default::default()
    }
}

#[test]
fn noiseless_convex_treated_is_recovered_exactly() {
    for seed in 0..10 {
        let sim = generate(&convex(0.0, seed, 0.0)).unwrap();
        let f = fit(&sim.panel, &sim.design, &sim.spec, &SolverSettings::default()).unwrap();
        for (d, w) in f.weights() {
            let truth = sim.truth.weight_of(d).unwrap();
            assert!((w - truth).abs() < 1e-4, "seed {seed} {d}: {w} vs {truth}");
        }
    }
}

#[test]
fn noisy_convex_treated_is_recovered_within_tolerance() {
    for seed in 0..10 {
        let sim = generate(&convex(0.005, seed, 0.0)).unwrap();
        let f = fit(&sim.panel, &sim.design, &sim.spec, &SolverSettings::default()).unwrap();
        for (d, w) in f.weights() {
            let truth = sim.truth.weight_of(d).unwrap();
            assert!((w - truth).abs() < 0.05, "seed {seed} {d}: {w} vs {truth}");
        }
    }
}

#[test]
fn gaps_track_injected_effect() {
    let effect = 0.4;
    for seed in 0..5 {
        let sim = generate(&convex(0.0, seed, effect)).unwrap();
        let f = fit(&sim.panel, &sim.design, &sim.spec, &SolverSettings::default()).unwrap();
        let gap = gap_series(&f, &sim.panel).unwrap();
        let pre = sim.design.pre_period;
        for (t, g) in gap.gap.times().zip(&gap.gap.values) {
            let expected = if pre.contains(t) { 0.0 } else { effect };
            assert!((g - expected).abs() < 1e-5, "seed {seed} t {t}: {g}");
        }
    }
}

#[test]
fn constant_shift_moves_only_post_gaps() {
    let sim = generate(&FactorModelConfig {
        n_units: 10,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let settings = SolverSettings::default();
    let base = fit(&sim.panel, &sim.design, &sim.spec, &settings).unwrap();
    let shifted_panel =
        sim.panel
            .with_outcome_shift(&sim.design.treated, &sim.design.post_period, 1.5);
    let shifted = fit(&shifted_panel, &sim.design, &sim.spec, &settings).unwrap();
    assert_eq!(base.w, shifted.w);
    let g0 = gap_series(&base, &sim.panel).unwrap();
    let g1 = gap_series(&shifted, &shifted_panel).unwrap();
    for (t, (a, b)) in g0.gap.times().zip(g0.gap.values.iter().zip(&g1.gap.values)) {
        let d = if sim.design.post_period.contains(t) { 1.5 } else { 0.0 };
        assert!((b - a - d).abs() < 1e-12);
    }
}
