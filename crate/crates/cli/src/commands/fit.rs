use super::{load_config, note, read_bytes};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::OutDir;
use crate::tables::{self, BalanceRow};
use crate::Cli;
use serde::Serialize;
use synthctl_core::diagnostics::{fit_report, gap_series, UnitStats};
use synthctl_core::estimator::fit;
use synthctl_core::panel::{Exclusion, UnitId};

#[derive(Serialize)]
struct WeightEntry<'a> {
    unit: &'a UnitId,
    weight: f64,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    command: &'static str,
    treated: &'a UnitId,
    donors: &'a [UnitId],
    excluded: &'a [Exclusion],
    predictors: &'a [BalanceRow],
    weights: Vec<WeightEntry<'a>>,
    pre_mspe: f64,
    inner_loss: f64,
    stats: &'a UnitStats,
    seed: u64,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let loaded = load_config(cli, true)?.expect("required");
    let study = loaded.config.study(&loaded.dir)?;
    let settings = loaded.config.solver.settings()?;
    note(cli, format!("fitting `{}` on {} donors", study.design.treated, study.design.donors.len()));

    let f = fit(&study.panel, &study.design, &study.spec, &settings)?;
    let report = fit_report(std::slice::from_ref(&f), &study.panel)
        .map_err(|e| CliError::Estimation(e.to_string()))?;
    let stats = report
        .rows
        .first()
        .ok_or_else(|| CliError::Estimation(format!("fit statistics failed: {:?}", report.failures)))?;
    let gap = gap_series(&f, &study.panel).map_err(|e| CliError::Data(e.to_string()))?;
    let balance = tables::balance_rows(&f);

    let mut out = OutDir::create(&cli.out)?;
    out.write("balance_table.csv", |w| tables::write_balance_table(&balance, w))?;
    out.write("weights_table.csv", |w| tables::write_weights_table(&f, w))?;
    out.write("weights.csv", |w| tables::write_weights(&f, w))?;
    out.write("predictors.csv", |w| tables::write_predictors(&balance, w))?;
    out.write("paths.csv", |w| tables::write_paths(&f, &gap, &study.panel, w))?;
    out.write("fit_report.csv", |w| report.write_csv(w))?;
    out.write_json(
        "summary.json",
        &FitSummary {
            command: "fit",
            treated: &f.design.treated,
            donors: f.donor_order(),
            excluded: &f.excluded,
            predictors: &balance,
            weights: f.weights().map(|(unit, weight)| WeightEntry { unit, weight }).collect(),
            pre_mspe: f.pre_mspe,
            inner_loss: f.inner_loss,
            stats,
            seed: settings.seed,
        },
    )?;
    let input = read_bytes(&study.panel_path)?;
    out.write_json(
        "manifest.json",
        &RunManifest::new("fit", Some(&loaded.bytes), Some(&input), Some(settings.seed)),
    )?;

    for e in &f.excluded {
        eprintln!("warning: donor `{}` excluded ({:?})", e.unit, e.reason);
    }
    println!(
        "fit `{}`: pre-period RMSE {:.4}, {} of {} donors weighted",
        f.design.treated,
        stats.pre_rmse,
        tables::displayed_weights(&f).len(),
        f.donor_order().len()
    );
    println!("wrote {} files to {}", out.written().len(), cli.out.display());
    Ok(())
}
