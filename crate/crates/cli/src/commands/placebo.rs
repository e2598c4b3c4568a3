use super::{load_config, note, read_bytes};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::OutDir;
use crate::Cli;
use serde::Serialize;
use synthctl_core::diagnostics::FitReport;
use synthctl_core::inference::{self, run_placebos, StudySummary};

#[derive(Serialize)]
struct PlaceboSummary {
    command: &'static str,
    #[serde(flatten)]
    study: StudySummary,
    filter_k: Option<f64>,
    seed: u64,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let loaded = load_config(cli, true)?.expect("required");
    let study = loaded.config.study(&loaded.dir)?;
    let settings = loaded.config.placebo_settings()?;
    note(
        cli,
        format!("placebo study: `{}` plus up to {} placebos", study.design.treated, study.design.donors.len()),
    );

    let result = run_placebos(&study.panel, &study.design, &study.spec, &settings)?;
    let report = FitReport::from_rows(
        result.results().into_iter().map(|r| r.stats.clone()).collect(),
        Vec::new(),
    );

    let mut out = OutDir::create(&cli.out)?;
    out.write("unit_stats.csv", |w| inference::write_unit_stats(&result, w))?;
    out.write("ratio_ranking.csv", |w| inference::write_ratio_ranking(&result, w))?;
    out.write("gap_paths.csv", |w| inference::write_gap_paths(&result, w))?;
    out.write("fit_summary.csv", |w| report.write_summary_csv(w))?;
    out.write("failures.csv", |w| inference::write_failures(&result, w))?;
    out.write_json(
        "summary.json",
        &PlaceboSummary {
            command: "placebo",
            study: result.summary(),
            filter_k: settings.filter_k,
            seed: settings.solver.seed,
        },
    )?;
    let input = read_bytes(&study.panel_path)?;
    out.write_json(
        "manifest.json",
        &RunManifest::new("placebo", Some(&loaded.bytes), Some(&input), Some(settings.solver.seed)),
    )?;

    for f in &result.failures {
        eprintln!("warning: placebo `{}` failed: {}", f.unit, f.error);
    }
    println!(
        "placebo study `{}`: rank {} of {}, p-value {:.3}",
        result.treated.unit,
        result.rank,
        result.n_units(),
        result.p_value
    );
    println!("wrote {} files to {}", out.written().len(), cli.out.display());
    Ok(())
}
