//! In-space placebo inference.
//!
//! Every usable donor is refit as if it had been treated at the same date,
//! with the real treated unit removed from its donor pool. The treated
//! unit's post-period RMSE is then ranked against the placebo distribution:
//!
//! ```text
//! rank    = #{units u : post_rmse(u) >= post_rmse(treated)}   (treated counted)
//! p_value = rank / N                                         (N = fitted units)
//! ```

use crate::diagnostics::{self, gap_series, fit_stats, DiagnosticsError, GapSeries, UnitStats};
use crate::estimator::{fit, EstimatorError, SolverSettings, SynthFit};
use crate::panel::{PanelDataset, PredictorSpec, StudyDesign, TimeIndex, UnitId};
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("treated fit failed: {0}")]
    StudyFailure(#[source] EstimatorError),
    #[error("{failed} of {attempted} placebo fits failed")]
    DegenerateStudy { failed: usize, attempted: usize },
    #[error("placebo inference needs at least 2 usable donors, found {0}")]
    TooFewDonors(usize),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// Multiplier used when the pre-fit filter is switched on without an
/// explicit threshold.
pub const DEFAULT_FILTER_K: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlaceboSettings {
    pub solver: SolverSettings,
    /// Drop placebos whose pre-period RMSE exceeds `k` times the treated
    /// unit's. Off by default.
    pub filter_k: Option<f64>,
}

/// One successfully fitted unit, treated or placebo.
#[derive(Debug, Clone)]
pub struct PlaceboResult {
    pub unit: UnitId,
    pub fit: SynthFit,
    pub stats: UnitStats,
    pub gap: GapSeries,
}

impl PlaceboResult {
    fn from_fit(fit: SynthFit, panel: &PanelDataset) -> Result<Self, DiagnosticsError> {
        let stats = fit_stats(&fit, panel)?;
        let gap = gap_series(&fit, panel)?;
        Ok(Self {
            unit: fit.design.treated.clone(),
            fit,
            stats,
            gap,
        })
    }

    pub fn pre_rmse(&self) -> f64 {
        self.stats.pre_rmse
    }

    pub fn post_rmse(&self) -> f64 {
        self.stats.post_rmse
    }

    pub fn ratio(&self) -> Option<f64> {
        self.stats.ratio
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PlaceboFailure {
    pub unit: UnitId,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct PlaceboStudy {
    pub treated: PlaceboResult,
    /// Retained placebos in unit-label order.
    pub placebos: Vec<PlaceboResult>,
    pub failures: Vec<PlaceboFailure>,
    /// Placebos dropped by the pre-fit filter.
    pub filtered: Vec<UnitId>,
    pub rank: usize,
    pub p_value: f64,
    /// Same count over placebos only, `None` without placebos.
    pub alt_p_value: Option<f64>,
}

impl PlaceboStudy {
    /// Fitted units entering the p-value, treated first.
    pub fn n_units(&self) -> usize {
        1 + self.placebos.len()
    }

    /// Treated and retained placebos in unit-label order.
    pub fn results(&self) -> Vec<&PlaceboResult> {
        let mut all: Vec<&PlaceboResult> = self.placebos.iter().collect();
        all.push(&self.treated);
        all.sort_by(|a, b| a.unit.cmp(&b.unit));
        all
    }

    pub fn summary(&self) -> StudySummary {
        StudySummary {
            treated: self.treated.unit.clone(),
            n_units: self.n_units(),
            rank: self.rank,
            p_value: self.p_value,
            alt_p_value: self.alt_p_value,
            treated_pre_rmse: self.treated.pre_rmse(),
            treated_post_rmse: self.treated.post_rmse(),
            treated_ratio: self.treated.ratio(),
            ratio_rank: ratio_rank_of_treated(self),
            failures: self.failures.clone(),
            filtered: self.filtered.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub treated: UnitId,
    pub n_units: usize,
    pub rank: usize,
    pub p_value: f64,
    pub alt_p_value: Option<f64>,
    pub treated_pre_rmse: f64,
    pub treated_post_rmse: f64,
    pub treated_ratio: Option<f64>,
    pub ratio_rank: usize,
    pub failures: Vec<PlaceboFailure>,
    pub filtered: Vec<UnitId>,
}

/// Rank (1 = largest) and p-value of `treated` among `treated ∪ others`,
/// counting ties against the treated unit.
pub fn permutation_p_value(treated: f64, others: &[f64]) -> (usize, f64) {
    let rank = 1 + others.iter().filter(|x| **x >= treated).count();
    (rank, rank as f64 / (others.len() + 1) as f64)
}

fn placebo_design(
    design: &StudyDesign,
    pool: &[UnitId],
    unit: &UnitId,
) -> Result<StudyDesign, EstimatorError> {
    let donors = pool.iter().filter(|d| *d != unit).cloned().collect();
    Ok(design.reassigned(unit.clone(), donors)?)
}

/// Fits the treated unit and one placebo per usable donor.
pub fn run_placebos(
    panel: &PanelDataset,
    design: &StudyDesign,
    spec: &PredictorSpec,
    settings: &PlaceboSettings,
) -> Result<PlaceboStudy, InferenceError> {
    let treated_fit =
        fit(panel, design, spec, &settings.solver).map_err(InferenceError::StudyFailure)?;
    let pool = treated_fit.design.donors.clone();
    if pool.len() < 2 {
        return Err(InferenceError::TooFewDonors(pool.len()));
    }
    let treated = PlaceboResult::from_fit(treated_fit, panel)?;

    let outcomes: Vec<Result<PlaceboResult, PlaceboFailure>> = pool
        .par_iter()
        .map(|unit| {
            let failure = |e: String| PlaceboFailure {
                unit: unit.clone(),
                error: e,
            };
            let d = placebo_design(design, &pool, unit).map_err(|e| failure(e.to_string()))?;
            let f = fit(panel, &d, spec, &settings.solver).map_err(|e| failure(e.to_string()))?;
            PlaceboResult::from_fit(f, panel).map_err(|e| failure(e.to_string()))
        })
        .collect();

    let attempted = outcomes.len();
    let mut placebos = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => placebos.push(r),
            Err(f) => failures.push(f),
        }
    }
    if 2 * failures.len() > attempted {
        return Err(InferenceError::DegenerateStudy {
            failed: failures.len(),
            attempted,
        });
    }

    let mut filtered = Vec::new();
    if let Some(k) = settings.filter_k {
        let limit = k * treated.pre_rmse();
        placebos.retain(|p| {
            let keep = p.pre_rmse() <= limit;
            if !keep {
                filtered.push(p.unit.clone());
            }
            keep
        });
    }
    placebos.sort_by(|a, b| a.unit.cmp(&b.unit));
    failures.sort();

    let others: Vec<f64> = placebos.iter().map(|p| p.post_rmse()).collect();
    let (rank, p_value) = permutation_p_value(treated.post_rmse(), &others);
    let alt_p_value = (!others.is_empty())
        .then(|| others.iter().filter(|x| **x >= treated.post_rmse()).count() as f64 / others.len() as f64);

    Ok(PlaceboStudy {
        treated,
        placebos,
        failures,
        filtered,
        rank,
        p_value,
        alt_p_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEntry {
    pub unit: UnitId,
    pub ratio: Option<f64>,
    pub treated: bool,
}

fn by_ratio(a: &RatioEntry, b: &RatioEntry) -> Ordering {
    match (a.ratio, b.ratio) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| a.unit.cmp(&b.unit))
}

/// Units by descending post/pre RMSE ratio; undefined ratios last, ties by
/// label.
pub fn ratio_ranking(study: &PlaceboStudy) -> Vec<RatioEntry> {
    let mut entries: Vec<RatioEntry> = study
        .results()
        .into_iter()
        .map(|r| RatioEntry {
            unit: r.unit.clone(),
            ratio: r.ratio(),
            treated: r.unit == study.treated.unit,
        })
        .collect();
    entries.sort_by(by_ratio);
    entries
}

/// 1-based position of the treated unit in [`ratio_ranking`].
pub fn ratio_rank_of_treated(study: &PlaceboStudy) -> usize {
    ratio_ranking(study)
        .iter()
        .position(|e| e.treated)
        .map_or(0, |i| i + 1)
}

/// One gap series per fitted unit, unit-label order.
pub fn gap_paths(study: &PlaceboStudy) -> Vec<&GapSeries> {
    study.results().into_iter().map(|r| &r.gap).collect()
}

/// Whether the treated gap stays inside the placebo envelope in sup norm:
/// its largest absolute gap over the study window does not exceed the
/// largest placebo one.
pub fn within_gap_envelope(study: &PlaceboStudy) -> bool {
    let bound = study
        .placebos
        .iter()
        .map(|p| p.gap.max_abs())
        .fold(0.0, f64::max);
    study.treated.gap.max_abs() <= bound
}

/// Per-unit stats table followed by a `rank,p_value` footer.
pub fn write_unit_stats<W: Write>(study: &PlaceboStudy, sink: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(sink);
    let rows: Vec<UnitStats> = study.results().into_iter().map(|r| r.stats.clone()).collect();
    diagnostics::write_stats_rows(&mut w, &rows)?;
    w.write_record(["rank", "p_value"])?;
    w.write_record([study.rank.to_string(), study.p_value.to_string()])?;
    w.flush()?;
    Ok(())
}

/// `rank,unit,ratio,treated`
pub fn write_ratio_ranking<W: Write>(study: &PlaceboStudy, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["rank", "unit", "ratio", "treated"])?;
    for (i, e) in ratio_ranking(study).iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            e.unit.to_string(),
            e.ratio.map(|r| r.to_string()).unwrap_or_default(),
            e.treated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `unit,time,gap`
pub fn write_gap_paths<W: Write>(study: &PlaceboStudy, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["unit", "time", "gap"])?;
    for g in gap_paths(study) {
        for (t, v) in g.gap.times().zip(&g.gap.values) {
            w.write_record([g.unit.to_string(), t.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `unit,error`
pub fn write_failures<W: Write>(study: &PlaceboStudy, sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["unit", "error"])?;
    for f in &study.failures {
        w.write_record([f.unit.as_str(), &f.error])?;
    }
    for u in &study.filtered {
        w.write_record([u.as_str(), "excluded by pre-fit filter"])?;
    }
    w.flush()?;
    Ok(())
}

/// Shared time axis of a study.
pub fn study_times(study: &PlaceboStudy) -> Vec<TimeIndex> {
    study.treated.gap.gap.times().collect()
}
