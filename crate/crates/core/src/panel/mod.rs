//! Balanced panel data model: units observed over a contiguous run of
//! periods, with one outcome and any number of named covariates.

mod io;
mod restrict;

pub use io::{load_panel, save_panel, LoadOptions};
pub use restrict::{restrict, screen_covariates, Exclusion, ExclusionReason, Restricted};

use serde::Serialize;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("line {line}: cannot parse `{value}` in column `{column}`")]
    ParseError {
        line: u64,
        column: String,
        value: String,
    },
    #[error("duplicate row for unit `{unit}` at time {time}")]
    DuplicateCell { unit: UnitId, time: TimeIndex },
    #[error("times are not contiguous: {missing} is absent")]
    NonContiguousTimes { missing: TimeIndex },
    #[error("panel has no rows")]
    EmptyPanel,
    #[error("unit label must be non-empty")]
    EmptyUnitId,
    #[error("outcome {value} for `{unit}` at {time} is outside [0, 1] in a rate panel")]
    RateOutOfRange {
        unit: UnitId,
        time: TimeIndex,
        value: f64,
    },
    #[error("non-finite value for `{unit}` at {time}")]
    NonFinite { unit: UnitId, time: TimeIndex },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid study design: {0}")]
    InvalidDesign(String),
    #[error("invalid predictor spec: {0}")]
    InvalidSpec(String),
    #[error("treated unit `{unit}` has no outcome at {time}")]
    TreatedIncomplete { unit: UnitId, time: TimeIndex },
    #[error("treated unit `{unit}` has no observed `{covariate}` in the pre-period")]
    TreatedMissingCovariate { unit: UnitId, covariate: String },
    #[error("every donor was excluded from the pool")]
    EmptyDonorPool,
}

/// Label of a panel unit (e.g. a state name).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct UnitId(String);

impl UnitId {
    pub fn new(label: impl Into<String>) -> Result<Self, PanelError> {
        let label = label.into();
        if label.trim().is_empty() {
            return Err(PanelError::EmptyUnitId);
        }
        Ok(Self(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An integer period, a calendar year in most uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct TimeIndex(pub i64);

impl fmt::Display for TimeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Inclusive range of periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TimeRange {
    pub start: TimeIndex,
    pub end: TimeIndex,
}

impl TimeRange {
    pub fn new(start: i64, end: i64) -> Result<Self, PanelError> {
        if start > end {
            return Err(PanelError::InvalidDesign(format!(
                "time range {start}..={end} is empty"
            )));
        }
        Ok(Self {
            start: TimeIndex(start),
            end: TimeIndex(end),
        })
    }

    pub fn len(&self) -> usize {
        (self.end.0 - self.start.0 + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains(&self, t: TimeIndex) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn contains_range(&self, other: &TimeRange) -> bool {
        self.contains(other.start) && self.contains(other.end)
    }

    pub fn iter(&self) -> impl Iterator<Item = TimeIndex> {
        (self.start.0..=self.end.0).map(TimeIndex)
    }

    /// Position of `t` within the range.
    pub fn offset(&self, t: TimeIndex) -> Option<usize> {
        self.contains(t).then(|| (t.0 - self.start.0) as usize)
    }
}

impl fmt::Display for TimeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// A fully observed series over a contiguous run of periods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub start: TimeIndex,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(start: TimeIndex, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    pub fn span(&self) -> Option<TimeRange> {
        (!self.values.is_empty()).then(|| TimeRange {
            start: self.start,
            end: TimeIndex(self.start.0 + self.values.len() as i64 - 1),
        })
    }

    pub fn times(&self) -> impl Iterator<Item = TimeIndex> + '_ {
        (0..self.values.len()).map(move |i| TimeIndex(self.start.0 + i as i64))
    }

    pub fn get(&self, t: TimeIndex) -> Option<f64> {
        let off = t.0 - self.start.0;
        (off >= 0)
            .then(|| self.values.get(off as usize).copied())
            .flatten()
    }

    /// Values restricted to `window`, or `None` if the series does not cover it.
    pub fn window(&self, window: &TimeRange) -> Option<&[f64]> {
        let span = self.span()?;
        if !span.contains_range(window) {
            return None;
        }
        let a = (window.start.0 - self.start.0) as usize;
        Some(&self.values[a..a + window.len()])
    }
}

/// One named covariate, stored unit-major like the outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariate {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

/// Balanced unit x time panel. Units are sorted by label; times are a
/// gap-free range. Cells are `None` when missing.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    units: Vec<UnitId>,
    times: TimeRange,
    outcome: Vec<Option<f64>>,
    covariates: Vec<Covariate>,
    rate_panel: bool,
}

impl PanelDataset {
    /// Builds a panel from unit-major cell vectors (`units.len() * times.len()`
    /// entries each). Units are re-sorted by label.
    pub fn new(
        units: Vec<UnitId>,
        times: TimeRange,
        outcome: Vec<Option<f64>>,
        covariates: Vec<Covariate>,
        rate_panel: bool,
    ) -> Result<Self, PanelError> {
        if units.is_empty() {
            return Err(PanelError::EmptyPanel);
        }
        let n_t = times.len();
        let cells = units.len() * n_t;
        if outcome.len() != cells {
            return Err(PanelError::Shape(format!(
                "outcome has {} cells, expected {cells}",
                outcome.len()
            )));
        }
        for (i, c) in covariates.iter().enumerate() {
            if c.values.len() != cells {
                return Err(PanelError::Shape(format!(
                    "covariate `{}` has {} cells, expected {cells}",
                    c.name,
                    c.values.len()
                )));
            }
            if c.name.is_empty() || matches!(c.name.as_str(), "unit" | "time" | "outcome") {
                return Err(PanelError::Shape(format!("invalid covariate name `{}`", c.name)));
            }
            if covariates[..i].iter().any(|o| o.name == c.name) {
                return Err(PanelError::DuplicateColumn(c.name.clone()));
            }
        }

        let mut order: Vec<usize> = (0..units.len()).collect();
        order.sort_by(|&a, &b| units[a].cmp(&units[b]));
        for w in order.windows(2) {
            if units[w[0]] == units[w[1]] {
                return Err(PanelError::Shape(format!("unit `{}` listed twice", units[w[0]])));
            }
        }
        let permute = |cells: &[Option<f64>]| -> Vec<Option<f64>> {
            order
                .iter()
                .flat_map(|&u| cells[u * n_t..(u + 1) * n_t].iter().copied())
                .collect()
        };
        let panel = Self {
            units: order.iter().map(|&u| units[u].clone()).collect(),
            times,
            outcome: permute(&outcome),
            covariates: covariates
                .iter()
                .map(|c| Covariate {
                    name: c.name.clone(),
                    values: permute(&c.values),
                })
                .collect(),
            rate_panel,
        };
        panel.check_cells()?;
        Ok(panel)
    }

    fn check_cells(&self) -> Result<(), PanelError> {
        for (u, unit) in self.units.iter().enumerate() {
            for (k, t) in self.times.iter().enumerate() {
                let idx = u * self.times.len() + k;
                let non_finite = |v: Option<f64>| v.is_some_and(|x| !x.is_finite());
                if non_finite(self.outcome[idx])
                    || self.covariates.iter().any(|c| non_finite(c.values[idx]))
                {
                    return Err(PanelError::NonFinite {
                        unit: unit.clone(),
                        time: t,
                    });
                }
                if let Some(y) = self.outcome[idx] {
                    if self.rate_panel && !(0.0..=1.0).contains(&y) {
                        return Err(PanelError::RateOutOfRange {
                            unit: unit.clone(),
                            time: t,
                            value: y,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn units(&self) -> &[UnitId] {
        &self.units
    }

    pub fn times(&self) -> TimeRange {
        self.times
    }

    pub fn covariates(&self) -> &[Covariate] {
        &self.covariates
    }

    pub fn covariate_names(&self) -> impl Iterator<Item = &str> {
        self.covariates.iter().map(|c| c.name.as_str())
    }

    pub fn is_rate_panel(&self) -> bool {
        self.rate_panel
    }

    pub fn unit_index(&self, unit: &UnitId) -> Option<usize> {
        self.units.binary_search(unit).ok()
    }

    pub fn contains_unit(&self, unit: &UnitId) -> bool {
        self.unit_index(unit).is_some()
    }

    fn cell(&self, unit: &UnitId, t: TimeIndex) -> Option<usize> {
        let u = self.unit_index(unit)?;
        let k = self.times.offset(t)?;
        Some(u * self.times.len() + k)
    }

    pub fn outcome(&self, unit: &UnitId, t: TimeIndex) -> Option<f64> {
        self.cell(unit, t).and_then(|i| self.outcome[i])
    }

    pub fn covariate(&self, name: &str, unit: &UnitId, t: TimeIndex) -> Option<f64> {
        let cov = self.covariates.iter().find(|c| c.name == name)?;
        self.cell(unit, t).and_then(|i| cov.values[i])
    }

    pub fn has_covariate(&self, name: &str) -> bool {
        self.covariates.iter().any(|c| c.name == name)
    }

    /// Outcome path of `unit` over `window`; `None` if any cell is missing.
    pub fn outcome_series(&self, unit: &UnitId, window: &TimeRange) -> Option<Series> {
        let values = window
            .iter()
            .map(|t| self.outcome(unit, t))
            .collect::<Option<Vec<f64>>>()?;
        Some(Series::new(window.start, values))
    }

    /// Times within `window` at which `unit`'s outcome is missing.
    pub fn missing_outcomes(&self, unit: &UnitId, window: &TimeRange) -> Vec<TimeIndex> {
        window
            .iter()
            .filter(|&t| self.outcome(unit, t).is_none())
            .collect()
    }

    /// Sub-panel with the given units (in any order) over `window`.
    pub fn subset(&self, units: &[UnitId], window: TimeRange) -> Result<Self, PanelError> {
        if !self.times.contains_range(&window) {
            return Err(PanelError::InvalidDesign(format!(
                "window {window} is outside panel times {}",
                self.times
            )));
        }
        let mut rows = Vec::with_capacity(units.len());
        for unit in units {
            rows.push(self.unit_index(unit).ok_or_else(|| {
                PanelError::InvalidDesign(format!("unit `{unit}` is not in the panel"))
            })?);
        }
        let n_t = self.times.len();
        let k0 = self.times.offset(window.start).unwrap_or(0);
        let take = |cells: &[Option<f64>]| -> Vec<Option<f64>> {
            rows.iter()
                .flat_map(|&u| cells[u * n_t + k0..u * n_t + k0 + window.len()].iter().copied())
                .collect()
        };
        Self::new(
            units.to_vec(),
            window,
            take(&self.outcome),
            self.covariates
                .iter()
                .map(|c| Covariate {
                    name: c.name.clone(),
                    values: take(&c.values),
                })
                .collect(),
            self.rate_panel,
        )
    }

    /// Copy with one covariate multiplied by `factor`.
    pub fn with_scaled_covariate(&self, name: &str, factor: f64) -> Self {
        let mut out = self.clone();
        if let Some(c) = out.covariates.iter_mut().find(|c| c.name == name) {
            for v in c.values.iter_mut().flatten() {
                *v *= factor;
            }
        }
        out
    }

    /// Copy with `delta` added to `unit`'s outcomes inside `window`.
    pub fn with_outcome_shift(&self, unit: &UnitId, window: &TimeRange, delta: f64) -> Self {
        let mut out = self.clone();
        for t in window.iter() {
            if let Some(i) = self.cell(unit, t) {
                if let Some(y) = out.outcome[i].as_mut() {
                    *y += delta;
                }
            }
        }
        out
    }
}

/// Treated unit, intervention date, windows and donor pool.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyDesign {
    pub treated: UnitId,
    pub treatment_time: TimeIndex,
    pub pre_period: TimeRange,
    pub post_period: TimeRange,
    pub donors: Vec<UnitId>,
}

impl StudyDesign {
    pub fn new(
        treated: UnitId,
        treatment_time: TimeIndex,
        pre_period: TimeRange,
        post_period: TimeRange,
        donors: Vec<UnitId>,
    ) -> Result<Self, PanelError> {
        let design = Self {
            treated,
            treatment_time,
            pre_period,
            post_period,
            donors,
        };
        design.validate()?;
        Ok(design)
    }

    /// Design treating `treated`, with every other panel unit as a donor.
    pub fn with_all_donors(
        panel: &PanelDataset,
        treated: UnitId,
        pre_period: TimeRange,
        post_period: TimeRange,
    ) -> Result<Self, PanelError> {
        let donors = panel
            .units()
            .iter()
            .filter(|u| **u != treated)
            .cloned()
            .collect();
        Self::new(treated, post_period.start, pre_period, post_period, donors)
    }

    pub fn validate(&self) -> Result<(), PanelError> {
        let bad = |msg: String| Err(PanelError::InvalidDesign(msg));
        if self.donors.is_empty() {
            return bad("donor pool is empty".into());
        }
        if self.donors.contains(&self.treated) {
            return bad(format!("treated unit `{}` is in the donor pool", self.treated));
        }
        let mut sorted = self.donors.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("donor `{}` listed twice", w[0]));
        }
        if self.pre_period.end.0 != self.treatment_time.0 - 1 {
            return bad(format!(
                "pre-period must end at {}, got {}",
                self.treatment_time.0 - 1,
                self.pre_period.end
            ));
        }
        if self.post_period.start != self.treatment_time {
            return bad(format!(
                "post-period must start at {}, got {}",
                self.treatment_time, self.post_period.start
            ));
        }
        if self.pre_period.len() < 2 {
            return bad("pre-period needs at least two periods".into());
        }
        Ok(())
    }

    /// pre ∪ post as one contiguous range.
    pub fn window(&self) -> TimeRange {
        TimeRange {
            start: self.pre_period.start,
            end: self.post_period.end,
        }
    }

    /// Same windows with a different treated unit and pool.
    pub fn reassigned(&self, treated: UnitId, donors: Vec<UnitId>) -> Result<Self, PanelError> {
        Self::new(
            treated,
            self.treatment_time,
            self.pre_period,
            self.post_period,
            donors,
        )
    }
}

/// One predictor row of X1/X0.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorEntry {
    /// Pre-period mean of a covariate.
    CovariateMean { covariate: String },
    /// Outcome at one pre-period time.
    OutcomeLag { time: TimeIndex },
}

impl PredictorEntry {
    pub fn default_label(&self) -> String {
        match self {
            PredictorEntry::CovariateMean { covariate } => format!("mean {covariate}"),
            PredictorEntry::OutcomeLag { time } => format!("outcome {time}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictorSpec {
    entries: Vec<PredictorEntry>,
    labels: Vec<String>,
}

impl PredictorSpec {
    pub fn new(entries: Vec<PredictorEntry>) -> Result<Self, PanelError> {
        if entries.is_empty() {
            return Err(PanelError::InvalidSpec("at least one predictor is required".into()));
        }
        let labels = entries.iter().map(PredictorEntry::default_label).collect();
        Ok(Self { entries, labels })
    }

    /// Replaces display labels; `labels` must match the entry count.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, PanelError> {
        if labels.len() != self.entries.len() {
            return Err(PanelError::InvalidSpec(format!(
                "{} labels for {} predictors",
                labels.len(),
                self.entries.len()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn entries(&self) -> &[PredictorEntry] {
        &self.entries
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Covariates referenced by `CovariateMean` entries, in entry order.
    pub fn covariates(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter_map(|e| match e {
            PredictorEntry::CovariateMean { covariate } => Some(covariate.as_str()),
            PredictorEntry::OutcomeLag { .. } => None,
        })
    }

    pub fn validate(&self, design: &StudyDesign, panel: &PanelDataset) -> Result<(), PanelError> {
        for entry in &self.entries {
            match entry {
                PredictorEntry::CovariateMean { covariate } => {
                    if !panel.has_covariate(covariate) {
                        return Err(PanelError::InvalidSpec(format!(
                            "unknown covariate `{covariate}`"
                        )));
                    }
                }
                PredictorEntry::OutcomeLag { time } => {
                    if !design.pre_period.contains(*time) {
                        return Err(PanelError::InvalidSpec(format!(
                            "outcome lag {time} is outside the pre-period {}",
                            design.pre_period
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
