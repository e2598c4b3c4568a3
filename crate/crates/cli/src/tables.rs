//! Fit output tables. Display tables round to 3 decimals; machine tables
//! keep full precision.

use serde::Serialize;
use std::io::Write;
use synthctl_core::diagnostics::GapSeries;
use synthctl_core::estimator::SynthFit;
use synthctl_core::numeric::mean;
use synthctl_core::panel::{PanelDataset, UnitId};

/// Donor weights below this are shown as absent in the display table.
pub const WEIGHT_DISPLAY_MIN: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceRow {
    pub predictor: String,
    pub v_weight: f64,
    pub treated: f64,
    pub synthetic: f64,
    /// Mean over the donor pool.
    pub sample_mean: f64,
}

pub fn balance_rows(fit: &SynthFit) -> Vec<BalanceRow> {
    let m = &fit.matrices;
    let synthetic = fit.synthetic_predictors();
    (0..m.n_predictors())
        .map(|i| {
            let row: Vec<f64> = m.raw_x0.row(i).iter().copied().collect();
            BalanceRow {
                predictor: m.labels[i].clone(),
                v_weight: fit.v.as_slice()[i],
                treated: m.raw_x1[i],
                synthetic: synthetic[i],
                sample_mean: mean(&row),
            }
        })
        .collect()
}

/// `predictor,treated,synthetic,sample_mean`, 3 decimals.
pub fn write_balance_table<W: Write>(rows: &[BalanceRow], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["predictor", "treated", "synthetic", "sample_mean"])?;
    for r in rows {
        w.write_record([
            r.predictor.clone(),
            format!("{:.3}", r.treated),
            format!("{:.3}", r.synthetic),
            format!("{:.3}", r.sample_mean),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Full-precision predictor table including the predictor weights.
pub fn write_predictors<W: Write>(rows: &[BalanceRow], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Donors at or above [`WEIGHT_DISPLAY_MIN`], by unit label.
pub fn displayed_weights(fit: &SynthFit) -> Vec<(UnitId, f64)> {
    let mut shown: Vec<(UnitId, f64)> = fit
        .weights()
        .filter(|(_, w)| *w >= WEIGHT_DISPLAY_MIN)
        .map(|(u, w)| (u.clone(), w))
        .collect();
    shown.sort_by(|a, b| a.0.cmp(&b.0));
    shown
}

/// `weight,unit`, 3 decimals, suppressed weights left out.
pub fn write_weights_table<W: Write>(fit: &SynthFit, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["weight", "unit"])?;
    for (unit, weight) in displayed_weights(fit) {
        w.write_record([format!("{weight:.3}"), unit.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `unit,weight` for every donor, full precision.
pub fn write_weights<W: Write>(fit: &SynthFit, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["unit", "weight"])?;
    for (unit, weight) in fit.weights() {
        w.write_record([unit.to_string(), weight.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `time,actual,synthetic,gap` over pre ∪ post.
pub fn write_paths<W: Write>(
    fit: &SynthFit,
    gap: &GapSeries,
    panel: &PanelDataset,
    sink: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["time", "actual", "synthetic", "gap"])?;
    for (k, t) in fit.window().iter().enumerate() {
        let actual = panel.outcome(&fit.design.treated, t).unwrap_or(f64::NAN);
        w.write_record([
            t.to_string(),
            actual.to_string(),
            fit.synthetic_path.values[k].to_string(),
            gap.gap.values[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Left-aligned first column, right-aligned rest.
pub fn render(headers: &[String], rows: &[Vec<String>]) -> String {
    let n = headers.len();
    let mut width: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(n) {
            width[i] = width[i].max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate().take(n) {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = width[i] - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(headers);
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}
