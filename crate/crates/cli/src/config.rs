//! Study config file (TOML).
//!
//! ```toml
//! [data]
//! panel = "panel.csv"          # relative to the config file
//! rate_panel = true
//!
//! [design]
//! treated = "AK"
//! treatment_time = 1982
//! pre = [1977, 1981]
//! post = [1982, 1991]
//! donors = ["CT", "DE"]        # optional, default: every other unit
//!
//! [[predictors]]
//! covariate = "log_gsp"
//! label = "Log of Gross State Product"
//!
//! [[predictors]]
//! lag = 1977
//!
//! [solver]
//! outer_starts = 16
//! seed = 0
//!
//! [placebo]
//! filter = false
//! filter_k = 5.0
//! ```
//!
//! `[simulate]` takes the factor-model fields and `[power]` the
//! replication count and alpha grid.

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use synthctl_core::estimator::{InnerSettings, NelderMeadSettings, SolverSettings};
use synthctl_core::inference::{PlaceboSettings, DEFAULT_FILTER_K};
use synthctl_core::panel::{
    load_panel, LoadOptions, PanelDataset, PredictorEntry, PredictorSpec, StudyDesign, TimeIndex,
    TimeRange, UnitId,
};
use synthctl_core::simulate::FactorModelConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predictors: Vec<PredictorConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub placebo: PlaceboConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<FactorModelConfig>,
    #[serde(default)]
    pub power: PowerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub panel: PathBuf,
    #[serde(default)]
    pub rate_panel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub treated: String,
    pub treatment_time: i64,
    pub pre: [i64; 2],
    pub post: [i64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub donors: Option<Vec<String>>,
}

/// Exactly one of `covariate` and `lag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub outer_starts: usize,
    pub seed: u64,
    pub max_outer_evals: usize,
    pub inner_max_iter: usize,
    pub inner_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            outer_starts: s.outer_starts,
            seed: s.seed,
            max_outer_evals: s.outer.max_evals,
            inner_max_iter: s.inner.max_iter,
            inner_tol: s.inner.tol,
        }
    }
}

impl SolverConfig {
    pub fn settings(&self) -> Result<SolverSettings, CliError> {
        if !(self.inner_tol.is_finite() && self.inner_tol > 0.0) {
            return Err(CliError::Config("solver.inner_tol must be positive".into()));
        }
        if self.max_outer_evals == 0 || self.inner_max_iter == 0 {
            return Err(CliError::Config("solver iteration budgets must be positive".into()));
        }
        Ok(SolverSettings {
            outer_starts: self.outer_starts,
            seed: self.seed,
            outer: NelderMeadSettings {
                max_evals: self.max_outer_evals,
                ..Default::default()
            },
            inner: InnerSettings {
                max_iter: self.inner_max_iter,
                tol: self.inner_tol,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlaceboConfig {
    pub filter: bool,
    pub filter_k: f64,
}

impl Default for PlaceboConfig {
    fn default() -> Self {
        Self {
            filter: false,
            filter_k: DEFAULT_FILTER_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    pub replications: usize,
    pub alpha: Vec<f64>,
    /// Share of top ratio positions counted as a hit.
    pub top_share: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            replications: 100,
            alpha: vec![0.05, 0.1, 0.2],
            top_share: 0.1,
        }
    }
}

/// A panel plus a validated design and predictor set.
pub struct Study {
    pub panel: PanelDataset,
    pub design: StudyDesign,
    pub spec: PredictorSpec,
    pub panel_path: PathBuf,
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads and parses `path`; also returns the raw bytes for digests.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = Self::parse(text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.check()?;
        Ok((config, bytes))
    }

    /// Checks everything that does not need the panel.
    pub fn check(&self) -> Result<(), CliError> {
        self.solver.settings()?;
        if self.placebo.filter && !(self.placebo.filter_k.is_finite() && self.placebo.filter_k > 0.0) {
            return Err(CliError::Config("placebo.filter_k must be positive".into()));
        }
        if let Some(sim) = &self.simulate {
            sim.validate()?;
        }
        if self.power.alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(CliError::Config("power.alpha values must lie in [0, 1]".into()));
        }
        if !(self.power.top_share > 0.0 && self.power.top_share <= 1.0) {
            return Err(CliError::Config("power.top_share must lie in (0, 1]".into()));
        }
        self.predictor_spec()?;
        Ok(())
    }

    pub fn placebo_settings(&self) -> Result<PlaceboSettings, CliError> {
        Ok(PlaceboSettings {
            solver: self.solver.settings()?,
            filter_k: self.placebo.filter.then_some(self.placebo.filter_k),
        })
    }

    pub fn predictor_spec(&self) -> Result<Option<PredictorSpec>, CliError> {
        if self.predictors.is_empty() {
            return Ok(None);
        }
        let mut entries = Vec::new();
        let mut labels = Vec::new();
        for (i, p) in self.predictors.iter().enumerate() {
            let entry = match (&p.covariate, p.lag) {
                (Some(c), None) => PredictorEntry::CovariateMean {
                    covariate: c.clone(),
                },
                (None, Some(t)) => PredictorEntry::OutcomeLag { time: TimeIndex(t) },
                _ => {
                    return Err(CliError::Config(format!(
                        "predictors[{i}] needs exactly one of `covariate` and `lag`"
                    )))
                }
            };
            labels.push(p.label.clone().unwrap_or_else(|| entry.default_label()));
            entries.push(entry);
        }
        Ok(Some(PredictorSpec::new(entries)?.with_labels(labels)?))
    }

    /// Loads the panel and validates design and predictors against it.
    pub fn study(&self, config_dir: &Path) -> Result<Study, CliError> {
        let data = self
            .data
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [data] section".into()))?;
        let d = self
            .design
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [design] section".into()))?;
        let spec = self
            .predictor_spec()?
            .ok_or_else(|| CliError::Config("no [[predictors]] given".into()))?;

        let panel_path = config_dir.join(&data.panel);
        let file = std::fs::File::open(&panel_path)
            .map_err(|e| CliError::io(panel_path.display(), e))?;
        let panel = load_panel(
            std::io::BufReader::new(file),
            LoadOptions {
                rate_panel: data.rate_panel,
            },
        )
        .map_err(|e| CliError::Data(format!("{}: {e}", panel_path.display())))?;

        let config_err = |e: synthctl_core::panel::PanelError| CliError::Config(e.to_string());
        let treated = UnitId::new(d.treated.clone()).map_err(config_err)?;
        if !panel.contains_unit(&treated) {
            return Err(CliError::Config(format!("treated unit `{treated}` is not in the panel")));
        }
        let pre = TimeRange::new(d.pre[0], d.pre[1]).map_err(config_err)?;
        let post = TimeRange::new(d.post[0], d.post[1]).map_err(config_err)?;
        if !panel.times().contains_range(&TimeRange { start: pre.start, end: post.end }) {
            return Err(CliError::Config(format!(
                "study window {}..={} is outside panel times {}",
                pre.start,
                post.end,
                panel.times()
            )));
        }
        let donors = match &d.donors {
            Some(list) => list
                .iter()
                .map(|u| UnitId::new(u.clone()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(config_err)?,
            None => panel.units().iter().filter(|u| **u != treated).cloned().collect(),
        };
        let design = StudyDesign::new(treated, TimeIndex(d.treatment_time), pre, post, donors)
            .map_err(config_err)?;
        spec.validate(&design, &panel).map_err(config_err)?;
        Ok(Study {
            panel,
            design,
            spec,
            panel_path,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
[data]
panel = "panel.csv"
rate_panel = true

[design]
treated = "AK"
treatment_time = 1982
pre = [1977, 1981]
post = [1982, 1991]

[[predictors]]
covariate = "income"
label = "Income"

[[predictors]]
lag = 1977

[solver]
outer_starts = 4
seed = 9

[placebo]
filter = true
"#;

    #[test]
    fn parses_full_config() {
        let c = StudyConfig::parse(FULL).unwrap();
        c.check().unwrap();
        assert_eq!(c.solver.outer_starts, 4);
        assert_eq!(c.solver.max_outer_evals, 400);
        let spec = c.predictor_spec().unwrap().unwrap();
        assert_eq!(spec.labels(), &["Income".to_string(), "outcome 1977".to_string()]);
        assert_eq!(c.placebo_settings().unwrap().filter_k, Some(5.0));
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = FULL.replace("rate_panel", "rate_panle");
        assert!(matches!(StudyConfig::parse(&bad), Err(CliError::Config(_))));
        assert!(StudyConfig::parse("[solver]\nouter_start = 3\n").is_err());
    }

    #[test]
    fn rejects_ambiguous_predictor() {
        let c = StudyConfig::parse("[[predictors]]\ncovariate = \"x\"\nlag = 3\n").unwrap();
        assert!(matches!(c.check(), Err(CliError::Config(_))));
    }

    #[test]
    fn round_trips_through_toml() {
        let c = StudyConfig::parse(FULL).unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(StudyConfig::parse(&text).unwrap(), c);
    }
}
