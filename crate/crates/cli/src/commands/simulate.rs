use super::{load_config, note};
use crate::config::{DataConfig, DesignConfig, PredictorConfig, StudyConfig};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::OutDir;
use crate::Cli;
use std::io::Write;
use std::path::PathBuf;
use synthctl_core::panel::{save_panel, PredictorEntry};
use synthctl_core::simulate::{generate, Simulation};

/// A config that runs `fit`/`placebo` on the generated panel.
fn study_config(sim: &Simulation, base: &StudyConfig) -> StudyConfig {
    let d = &sim.design;
    StudyConfig {
        data: Some(DataConfig {
            panel: PathBuf::from("panel.csv"),
            rate_panel: false,
        }),
        design: Some(DesignConfig {
            treated: d.treated.to_string(),
            treatment_time: d.treatment_time.0,
            pre: [d.pre_period.start.0, d.pre_period.end.0],
            post: [d.post_period.start.0, d.post_period.end.0],
            donors: None,
        }),
        predictors: sim
            .spec
            .entries()
            .iter()
            .map(|e| match e {
                PredictorEntry::CovariateMean { covariate } => PredictorConfig {
                    covariate: Some(covariate.clone()),
                    lag: None,
                    label: None,
                },
                PredictorEntry::OutcomeLag { time } => PredictorConfig {
                    covariate: None,
                    lag: Some(time.0),
                    label: None,
                },
            })
            .collect(),
        solver: base.solver,
        placebo: base.placebo,
        simulate: None,
        power: Default::default(),
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let loaded = load_config(cli, false)?;
    let base = loaded.as_ref().map(|l| l.config.clone()).unwrap_or_default();
    let mut model = base.simulate.unwrap_or_default();
    if let Some(seed) = cli.seed {
        model.seed = seed;
    }
    note(cli, format!("generating {} units x {} periods", model.n_units, model.n_pre + model.n_post));
    let sim = generate(&model)?;

    let mut panel_bytes = Vec::new();
    save_panel(&sim.panel, &mut panel_bytes)?;
    let study = study_config(&sim, &base);
    let study_text =
        toml::to_string(&study).map_err(|e| CliError::Config(format!("study config: {e}")))?;

    let mut out = OutDir::create(&cli.out)?;
    out.write("panel.csv", |w| w.write_all(&panel_bytes))?;
    out.write_json("truth.json", &sim.truth)?;
    out.write_json("model.json", &model)?;
    out.write("study.toml", |w| w.write_all(study_text.as_bytes()))?;
    out.write_json(
        "manifest.json",
        &RunManifest::new(
            "simulate",
            loaded.as_ref().map(|l| l.bytes.as_slice()),
            None,
            Some(model.seed),
        ),
    )?;
    println!(
        "simulated {} units, treated `{}`, effect {}",
        model.n_units, sim.truth.treated, model.effect
    );
    println!("wrote {} files to {}", out.written().len(), cli.out.display());
    Ok(())
}

