use super::{load_config, note};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::OutDir;
use crate::Cli;
use serde::Serialize;
use synthctl_core::simulate::{power_study, FactorModelConfig, PowerRow};

#[derive(Serialize)]
struct PowerSummary<'a> {
    command: &'static str,
    model: &'a FactorModelConfig,
    replications: usize,
    failures: &'a [(usize, String)],
    rows: &'a [PowerRow],
    top_share: f64,
    ratio_top_rate: f64,
    envelope_rate: f64,
}

pub fn run(cli: &Cli, replications: Option<usize>) -> Result<(), CliError> {
    let loaded = load_config(cli, false)?;
    let base = loaded.as_ref().map(|l| l.config.clone()).unwrap_or_default();
    let mut model = base.simulate.unwrap_or_default();
    if let Some(seed) = cli.seed {
        model.seed = seed;
    }
    let reps = replications.unwrap_or(base.power.replications);
    if reps == 0 {
        return Err(CliError::Config("replications must be at least 1".into()));
    }
    let settings = base.placebo_settings()?;
    note(cli, format!("power study: {reps} replications of {} units", model.n_units));

    let study = power_study(&model, reps, &base.power.alpha, &settings)?;
    if study.replications.is_empty() {
        return Err(CliError::Estimation(format!(
            "every replication failed, first: {:?}",
            study.failures.first()
        )));
    }

    let mut out = OutDir::create(&cli.out)?;
    out.write("power.csv", |w| study.write_csv(w))?;
    out.write("replications.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        for r in &study.replications {
            c.serialize(r)?;
        }
        c.flush().map_err(csv::Error::from)
    })?;
    out.write_json(
        "summary.json",
        &PowerSummary {
            command: "power",
            model: &model,
            replications: reps,
            failures: &study.failures,
            rows: &study.rows,
            top_share: base.power.top_share,
            ratio_top_rate: study.ratio_top_share(base.power.top_share),
            envelope_rate: study.envelope_share(),
        },
    )?;
    out.write_json(
        "manifest.json",
        &RunManifest::new(
            "power",
            loaded.as_ref().map(|l| l.bytes.as_slice()),
            None,
            Some(model.seed),
        ),
    )?;

    for row in &study.rows {
        println!(
            "alpha {:.3}: rejection rate {:.3}, mean rank {:.2}",
            row.alpha, row.rejection_rate, row.mean_rank
        );
    }
    println!(
        "treated in top {:.0}% of ratios: {:.3}",
        100.0 * base.power.top_share,
        study.ratio_top_share(base.power.top_share)
    );
    if !study.failures.is_empty() {
        eprintln!("warning: {} replications failed", study.failures.len());
    }
    Ok(())
}
