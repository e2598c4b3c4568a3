use synthctl_core::estimator::{NelderMeadSettings, SolverSettings};
use synthctl_core::inference::{run_placebos, PlaceboSettings};
use synthctl_core::simulate::{generate, power_study, replication_seed, FactorModelConfig};

fn settings() -> PlaceboSettings {
    PlaceboSettings {
        solver: SolverSettings {
            outer_starts: 2,
            outer: NelderMeadSettings {
                max_evals: 150,
                ..Default::default()
            },
            ..Default::default()
        },
        filter_k: None,
    }
}

fn design(effect_in_sd: f64) -> FactorModelConfig {
    FactorModelConfig {
        n_units: 10,
        noise_std: 0.2,
        effect: effect_in_sd * 0.2,
        seed: 42,
        ..Default::default()
    }
}

#[test]
fn single_replication_reports_its_indicators() {
    let cfg = design(1.0);
    let study = power_study(&cfg, 1, &[0.1, 0.5, 1.0], &settings()).unwrap();
    let sim = generate(&FactorModelConfig {
        seed: replication_seed(42, 0),
        ..cfg
    })
    .unwrap();
    let direct = run_placebos(&sim.panel, &sim.design, &sim.spec, &settings()).unwrap();
    for row in &study.rows {
        let hit = if direct.p_value <= row.alpha + 1e-12 { 1.0 } else { 0.0 };
        assert_eq!(row.rejection_rate, hit);
        assert_eq!(row.mean_rank, direct.rank as f64);
    }
}

#[test]
fn power_study_is_deterministic() {
    let a = power_study(&design(2.0), 6, &[0.2], &settings()).unwrap();
    let b = power_study(&design(2.0), 6, &[0.2], &settings()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn power_grows_with_effect_size() {
    let rates: Vec<f64> = [0.0, 1.0, 2.0, 3.0]
        .iter()
        .map(|e| power_study(&design(*e), 30, &[0.2], &settings()).unwrap().rows[0].rejection_rate)
        .collect();
    assert!(rates.windows(2).all(|w| w[1] >= w[0]), "{rates:?}");
    assert!(rates[3] > rates[0]);
}
