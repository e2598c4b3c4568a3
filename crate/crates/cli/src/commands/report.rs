//! Human-readable view of a finished run directory.

use crate::error::CliError;
use crate::tables::render;
use std::path::Path;

fn read_csv(path: &Path) -> Result<Option<(Vec<String>, Vec<Vec<String>>)>, CliError> {
    if !path.exists() {
        return Ok(None);
    }
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::io(path.display(), e))?;
    let headers = r
        .headers()
        .map_err(|e| CliError::io(path.display(), e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::io(path.display(), e))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Some((headers, rows)))
}

fn round3(cell: &str) -> String {
    match cell.parse::<f64>() {
        Ok(v) if cell.contains('.') || cell.contains('e') => format!("{v:.3}"),
        _ => cell.to_string(),
    }
}

fn section(dir: &Path, file: &str, title: &str, round: bool) -> Result<bool, CliError> {
    let Some((headers, mut rows)) = read_csv(&dir.join(file))? else {
        return Ok(false);
    };
    if round {
        for r in &mut rows {
            for c in r.iter_mut() {
                *c = round3(c);
            }
        }
    }
    println!("{title}\n{}", render(&headers, &rows));
    Ok(true)
}

pub fn run(dir: &Path) -> Result<(), CliError> {
    let summary_path = dir.join("summary.json");
    let text = std::fs::read_to_string(&summary_path)
        .map_err(|e| CliError::io(summary_path.display(), e))?;
    let summary: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", summary_path.display())))?;
    let command = summary["command"].as_str().unwrap_or("unknown");
    println!("run: {command} ({})\n", dir.display());

    match command {
        "fit" => {
            section(dir, "balance_table.csv", "Predictor balance", false)?;
            section(dir, "weights_table.csv", "Donor weights", false)?;
            section(dir, "fit_report.csv", "Fit statistics", true)?;
        }
        "placebo" => {
            let p = &summary["p_value"];
            let rank = &summary["rank"];
            let n = &summary["n_units"];
            println!(
                "treated `{}`: rank {rank} of {n}, p-value {:.3}\n",
                summary["treated"].as_str().unwrap_or("?"),
                p.as_f64().unwrap_or(f64::NAN)
            );
            section(dir, "ratio_ranking.csv", "Post/pre RMSE ratios", true)?;
            section(dir, "fit_summary.csv", "Fit statistics across units", true)?;
            if let Some((_, rows)) = read_csv(&dir.join("failures.csv"))? {
                for r in rows {
                    println!("failed: {}", r.join(": "));
                }
            }
        }
        "power" => {
            section(dir, "power.csv", "Rejection rates", true)?;
            println!(
                "treated in top share of ratios: {}",
                summary["ratio_top_rate"]
            );
        }
        other => {
            return Err(CliError::Data(format!("no report layout for `{other}` runs")));
        }
    }
    Ok(())
}
