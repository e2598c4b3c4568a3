//! Survey microdata -> weighted status completion rates per unit-year.
//!
//! A unit-year's rate is the weight-share of respondents inside the age
//! window who hold a high school diploma or an alternative credential:
//! `Σ w·cred / Σ w`. Cells with no eligible weight are missing.

use crate::numeric::order_free_sum;
use crate::panel::{PanelDataset, TimeIndex, TimeRange, UnitId};
use std::collections::BTreeMap;
use std::io::Read;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: invalid {column} `{value}`")]
    Parse {
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error("invalid age window {min}..={max}")]
    InvalidWindow { min: u32, max: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroRecord {
    pub unit: UnitId,
    pub time: TimeIndex,
    pub age: u32,
    pub has_credential: bool,
    pub weight: f64,
}

/// Inclusive age bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgeWindow {
    min_age: u32,
    max_age: u32,
}

impl AgeWindow {
    pub fn new(min_age: u32, max_age: u32) -> Result<Self, AggregateError> {
        if min_age > max_age {
            return Err(AggregateError::InvalidWindow {
                min: min_age,
                max: max_age,
            });
        }
        Ok(Self { min_age, max_age })
    }

    pub fn contains(&self, age: u32) -> bool {
        self.min_age <= age && age <= self.max_age
    }

    pub fn min_age(&self) -> u32 {
        self.min_age
    }

    pub fn max_age(&self) -> u32 {
        self.max_age
    }
}

impl Default for AgeWindow {
    /// Young adults, 18 through 24.
    fn default() -> Self {
        Self {
            min_age: 18,
            max_age: 24,
        }
    }
}

/// Weighted share holding a credential. Weight totals are summed in sorted
/// order with compensation, so any permutation of `records` gives the same
/// bits.
fn weighted_rate<'a, I>(eligible: I) -> Option<f64>
where
    I: IntoIterator<Item = &'a MicroRecord>,
{
    let mut credentialed = Vec::new();
    let mut total = Vec::new();
    for r in eligible {
        total.push(r.weight);
        if r.has_credential {
            credentialed.push(r.weight);
        }
    }
    let denom = order_free_sum(&mut total);
    if !(denom > 0.0) {
        return None;
    }
    let rate = order_free_sum(&mut credentialed) / denom;
    Some(rate.clamp(0.0, 1.0))
}

pub fn status_completion_rate(
    records: &[MicroRecord],
    unit: &UnitId,
    time: TimeIndex,
    window: AgeWindow,
) -> Option<f64> {
    weighted_rate(
        records
            .iter()
            .filter(|r| &r.unit == unit && r.time == time && window.contains(r.age)),
    )
}

/// Number of records inside the age window per unit-year.
pub fn eligible_counts(
    records: &[MicroRecord],
    window: AgeWindow,
) -> BTreeMap<(UnitId, TimeIndex), usize> {
    let mut counts = BTreeMap::new();
    for r in records.iter().filter(|r| window.contains(r.age)) {
        *counts.entry((r.unit.clone(), r.time)).or_insert(0) += 1;
    }
    counts
}

/// Rate panel over `units` x `times`; duplicate unit labels are collapsed.
pub fn build_outcome_panel(
    records: &[MicroRecord],
    units: &[UnitId],
    times: TimeRange,
    window: AgeWindow,
) -> PanelDataset {
    let mut groups: BTreeMap<(&UnitId, TimeIndex), Vec<&MicroRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| window.contains(r.age)) {
        groups.entry((&r.unit, r.time)).or_default().push(r);
    }
    let mut units = units.to_vec();
    units.sort();
    units.dedup();
    let outcome = units
        .iter()
        .flat_map(|u| times.iter().map(move |t| (u, t)))
        .map(|(u, t)| {
            groups
                .get(&(u, t))
                .and_then(|g| weighted_rate(g.iter().copied()))
        })
        .collect();
    PanelDataset::new(units, times, outcome, Vec::new(), true)
        .expect("sorted unique units and in-range rates always form a valid panel")
}

/// Reads `unit,time,age,has_credential,weight` records.
pub fn load_microdata<R: Read>(source: R) -> Result<Vec<MicroRecord>, AggregateError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AggregateError::MissingColumn(name.to_string()))
    };
    let (cu, ct, ca, cc, cw) = (
        col("unit")?,
        col("time")?,
        col("age")?,
        col("has_credential")?,
        col("weight")?,
    );
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |column: &'static str, value: &str| AggregateError::Parse {
            line,
            column,
            value: value.to_string(),
        };
        let unit = UnitId::new(&record[cu]).map_err(|_| bad("unit", &record[cu]))?;
        let time = record[ct]
            .parse::<i64>()
            .map_err(|_| bad("time", &record[ct]))?;
        let age = record[ca]
            .parse::<u32>()
            .map_err(|_| bad("age", &record[ca]))?;
        let has_credential = match &record[cc] {
            "1" => true,
            "0" => false,
            other => return Err(bad("has_credential", other)),
        };
        let weight = record[cw]
            .parse::<f64>()
            .ok()
            .filter(|w| w.is_finite() && *w >= 0.0)
            .ok_or_else(|| bad("weight", &record[cw]))?;
        out.push(MicroRecord {
            unit,
            time: TimeIndex(time),
            age,
            has_credential,
            weight,
        });
    }
    Ok(out)
}
