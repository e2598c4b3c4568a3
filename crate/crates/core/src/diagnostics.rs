//! Gap paths and fit statistics: RMSE, MAE and the RMSE-observations
//! standard deviation ratio (RSR).
//!
//! RSR over a window of T observations is
//!
//! ```text
//! RSR = sqrt( (1/T) Σ (ŷ_t - y_t)² ) / sqrt( (1/(T-1)) Σ (y_t - ȳ)² )
//! ```
//!
//! i.e. the RMSE over the sample standard deviation of the actual series.
//! Values below one mean the synthetic unit misses by less than the treated
//! unit's own variation.

use crate::estimator::SynthFit;
use crate::numeric::{compensated_sum, mean};
use crate::panel::{PanelDataset, Series, StudyDesign, TimeRange, UnitId};
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("window {0} has too few observations")]
    EmptyWindow(String),
    #[error("series does not cover window {0}")]
    WindowOutOfRange(String),
    #[error("actual series has zero variance over {0}")]
    DegenerateVariance(String),
    #[error("`{0}` has missing outcomes in the study window")]
    MissingOutcome(UnitId),
    #[error("no fits to report")]
    NoFits,
}

fn windows<'a>(
    actual: &'a Series,
    synthetic: &'a Series,
    window: &TimeRange,
    min_len: usize,
) -> Result<(&'a [f64], &'a [f64]), DiagnosticsError> {
    if window.is_empty() || window.len() < min_len {
        return Err(DiagnosticsError::EmptyWindow(window.to_string()));
    }
    let out = || DiagnosticsError::WindowOutOfRange(window.to_string());
    Ok((
        actual.window(window).ok_or_else(out)?,
        synthetic.window(window).ok_or_else(out)?,
    ))
}

/// RMSE of aligned value slices (1/T convention).
pub fn rmse_values(actual: &[f64], synthetic: &[f64]) -> f64 {
    let ss = compensated_sum(actual.iter().zip(synthetic).map(|(y, s)| (s - y) * (s - y)));
    (ss / actual.len() as f64).sqrt()
}

pub fn mae_values(actual: &[f64], synthetic: &[f64]) -> f64 {
    compensated_sum(actual.iter().zip(synthetic).map(|(y, s)| (s - y).abs())) / actual.len() as f64
}

/// RSR of aligned value slices; `None` when the actual series is constant.
pub fn rsr_values(actual: &[f64], synthetic: &[f64]) -> Option<f64> {
    let t = actual.len();
    if t < 2 {
        return None;
    }
    let ybar = mean(actual);
    let ss = compensated_sum(actual.iter().map(|y| (y - ybar) * (y - ybar)));
    let sd = (ss / (t - 1) as f64).sqrt();
    (sd > 0.0).then(|| rmse_values(actual, synthetic) / sd)
}

pub fn rmse(actual: &Series, synthetic: &Series, window: &TimeRange) -> Result<f64, DiagnosticsError> {
    let (a, s) = windows(actual, synthetic, window, 1)?;
    Ok(rmse_values(a, s))
}

pub fn mae(actual: &Series, synthetic: &Series, window: &TimeRange) -> Result<f64, DiagnosticsError> {
    let (a, s) = windows(actual, synthetic, window, 1)?;
    Ok(mae_values(a, s))
}

pub fn rsr(actual: &Series, synthetic: &Series, window: &TimeRange) -> Result<f64, DiagnosticsError> {
    let (a, s) = windows(actual, synthetic, window, 2)?;
    rsr_values(a, s).ok_or_else(|| DiagnosticsError::DegenerateVariance(window.to_string()))
}

/// Treated-minus-synthetic outcome over the study window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSeries {
    pub unit: UnitId,
    pub gap: Series,
}

impl GapSeries {
    pub fn max_abs(&self) -> f64 {
        self.gap.values.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

pub fn gap_series(fit: &SynthFit, panel: &PanelDataset) -> Result<GapSeries, DiagnosticsError> {
    let treated = &fit.design.treated;
    let actual = panel
        .outcome_series(treated, &fit.window())
        .ok_or_else(|| DiagnosticsError::MissingOutcome(treated.clone()))?;
    let gap = actual
        .values
        .iter()
        .zip(&fit.synthetic_path.values)
        .map(|(y, s)| y - s)
        .collect();
    Ok(GapSeries {
        unit: treated.clone(),
        gap: Series::new(actual.start, gap),
    })
}

/// Per-unit fit statistics. `None` marks a statistic that is undefined for
/// this unit; the reason is kept in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitStats {
    pub unit: UnitId,
    pub pre_rmse: f64,
    pub post_rmse: f64,
    pub pre_mae: f64,
    pub rsr: Option<f64>,
    /// post_rmse / pre_rmse, only when pre_rmse > 0.
    pub ratio: Option<f64>,
    /// rsr < 1.
    pub well_fit: Option<bool>,
    pub notes: Vec<String>,
}

pub fn unit_stats(
    unit: &UnitId,
    actual: &Series,
    synthetic: &Series,
    design: &StudyDesign,
) -> Result<UnitStats, DiagnosticsError> {
    let pre = design.pre_period;
    let post = design.post_period;
    let pre_rmse = rmse(actual, synthetic, &pre)?;
    let post_rmse = rmse(actual, synthetic, &post)?;
    let pre_mae = mae(actual, synthetic, &pre)?;
    let mut notes = Vec::new();
    let rsr = match rsr(actual, synthetic, &pre) {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    let ratio = if pre_rmse > 0.0 {
        Some(post_rmse / pre_rmse)
    } else {
        notes.push("pre-period RMSE is zero; ratio undefined".into());
        None
    };
    Ok(UnitStats {
        unit: unit.clone(),
        pre_rmse,
        post_rmse,
        pre_mae,
        rsr,
        ratio,
        well_fit: rsr.map(|r| r < 1.0),
        notes,
    })
}

pub fn fit_stats(fit: &SynthFit, panel: &PanelDataset) -> Result<UnitStats, DiagnosticsError> {
    let treated = &fit.design.treated;
    let actual = panel
        .outcome_series(treated, &fit.window())
        .ok_or_else(|| DiagnosticsError::MissingOutcome(treated.clone()))?;
    unit_stats(treated, &actual, &fit.synthetic_path, &fit.design)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl ColumnSummary {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            count: values.len(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: mean(values),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    PreRmse,
    PostRmse,
    PreMae,
    Rsr,
    Ratio,
}

impl Statistic {
    pub const ALL: [Statistic; 5] = [
        Statistic::PreRmse,
        Statistic::PostRmse,
        Statistic::PreMae,
        Statistic::Rsr,
        Statistic::Ratio,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Statistic::PreRmse => "pre_rmse",
            Statistic::PostRmse => "post_rmse",
            Statistic::PreMae => "pre_mae",
            Statistic::Rsr => "rsr",
            Statistic::Ratio => "ratio",
        }
    }

    fn pick(&self, s: &UnitStats) -> Option<f64> {
        match self {
            Statistic::PreRmse => Some(s.pre_rmse),
            Statistic::PostRmse => Some(s.post_rmse),
            Statistic::PreMae => Some(s.pre_mae),
            Statistic::Rsr => s.rsr,
            Statistic::Ratio => s.ratio,
        }
    }
}

/// Fit statistics for a set of units, sorted by unit label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub rows: Vec<UnitStats>,
    /// Units whose statistics could not be computed at all.
    pub failures: Vec<(UnitId, String)>,
}

impl FitReport {
    pub fn from_rows(mut rows: Vec<UnitStats>, mut failures: Vec<(UnitId, String)>) -> Self {
        rows.sort_by(|a, b| a.unit.cmp(&b.unit));
        failures.sort();
        Self { rows, failures }
    }

    /// Defined values of one statistic in unit order, ready for a histogram.
    pub fn values(&self, stat: Statistic) -> Vec<f64> {
        self.rows.iter().filter_map(|r| stat.pick(r)).collect()
    }

    pub fn summary(&self, stat: Statistic) -> Option<ColumnSummary> {
        ColumnSummary::of(&self.values(stat))
    }

    pub fn row(&self, unit: &UnitId) -> Option<&UnitStats> {
        self.rows.iter().find(|r| &r.unit == unit)
    }

    /// `unit,pre_rmse,post_rmse,pre_mae,rsr,ratio,well_fit`
    pub fn write_csv<W: Write>(&self, sink: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        write_stats_rows(&mut w, &self.rows)?;
        w.flush()?;
        Ok(())
    }

    /// `stat,count,min,max,mean`, one row per statistic.
    pub fn write_summary_csv<W: Write>(&self, sink: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["stat", "count", "min", "max", "mean"])?;
        for stat in Statistic::ALL {
            match self.summary(stat) {
                Some(s) => w.write_record([
                    stat.name().to_string(),
                    s.count.to_string(),
                    s.min.to_string(),
                    s.max.to_string(),
                    s.mean.to_string(),
                ])?,
                None => w.write_record([stat.name(), "0", "", "", ""])?,
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn write_stats_rows<W: Write>(
    w: &mut csv::Writer<W>,
    rows: &[UnitStats],
) -> csv::Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    w.write_record(["unit", "pre_rmse", "post_rmse", "pre_mae", "rsr", "ratio", "well_fit"])?;
    for r in rows {
        w.write_record([
            r.unit.to_string(),
            r.pre_rmse.to_string(),
            r.post_rmse.to_string(),
            r.pre_mae.to_string(),
            opt(r.rsr),
            opt(r.ratio),
            r.well_fit.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    Ok(())
}

/// Statistics for each fit, computed on the shared pre/post windows of its
/// own design. A unit whose statistics fail is listed under `failures`
/// without aborting the report.
pub fn fit_report(fits: &[SynthFit], panel: &PanelDataset) -> Result<FitReport, DiagnosticsError> {
    if fits.is_empty() {
        return Err(DiagnosticsError::NoFits);
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for fit in fits {
        match fit_stats(fit, panel) {
            Ok(s) => rows.push(s),
            Err(e) => failures.push((fit.design.treated.clone(), e.to_string())),
        }
    }
    Ok(FitReport::from_rows(rows, failures))
}
