//! Seeded linear factor-model panels with known ground truth, and size/power
//! studies of the placebo test on them.
//!
//! ```text
//! y_u(t) = λ_uᵀ f_t + ε_ut          ε ~ N(0, noise_std²)
//! x_uc(t) = β_cᵀ λ_u + η_uct        η ~ N(0, covariate_noise_std²)
//! ```
//!
//! The first factor is the constant 1 (a unit-specific level); the others
//! are iid N(0, 1) per period. Loadings are iid U(0, 1). Unit "u01" is the
//! treated unit; the effect is added to its outcomes from the treatment
//! time on.

use crate::inference::{ratio_rank_of_treated, run_placebos, within_gap_envelope, PlaceboSettings};
use crate::panel::{
    Covariate, PanelDataset, PanelError, PredictorEntry, PredictorSpec, StudyDesign, TimeIndex,
    TimeRange, UnitId,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorModelConfig {
    pub n_units: usize,
    pub n_pre: usize,
    pub n_post: usize,
    /// Includes the constant factor.
    pub n_factors: usize,
    pub noise_std: f64,
    /// Added to the treated unit's outcome in every post period.
    pub effect: f64,
    /// Build the treated unit's loadings as a Dirichlet(1) mix of the
    /// donors' instead of drawing them independently.
    pub treated_is_convex: bool,
    pub n_covariates: usize,
    /// Noise std of covariate observations; `None` reuses `noise_std`.
    pub covariate_noise_std: Option<f64>,
    /// Add the first and last pre-period outcomes to the covariate-mean
    /// predictors.
    pub lag_predictors: bool,
    pub seed: u64,
    /// Label of the first period.
    pub start_time: i64,
}

impl Default for FactorModelConfig {
    fn default() -> Self {
        Self {
            n_units: 20,
            n_pre: 5,
            n_post: 10,
            n_factors: 3,
            noise_std: 0.1,
            effect: 0.0,
            treated_is_convex: false,
            n_covariates: 2,
            covariate_noise_std: None,
            lag_predictors: true,
            seed: 0,
            start_time: 1,
        }
    }
}

impl FactorModelConfig {
    pub fn validate(&self) -> Result<(), SimulateError> {
        let bad = |m: &str| Err(SimulateError::InvalidConfig(m.into()));
        if self.n_units < 3 {
            return bad("n_units must be at least 3");
        }
        if self.n_pre < 2 {
            return bad("n_pre must be at least 2");
        }
        if self.n_post < 1 {
            return bad("n_post must be at least 1");
        }
        if self.n_factors < 1 {
            return bad("n_factors must be at least 1");
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad("noise_std must be finite and non-negative");
        }
        if let Some(s) = self.covariate_noise_std {
            if !(s.is_finite() && s >= 0.0) {
                return bad("covariate_noise_std must be finite and non-negative");
            }
        }
        if !self.effect.is_finite() {
            return bad("effect must be finite");
        }
        Ok(())
    }

    pub fn treatment_time(&self) -> TimeIndex {
        TimeIndex(self.start_time + self.n_pre as i64)
    }

    pub fn pre_period(&self) -> TimeRange {
        TimeRange {
            start: TimeIndex(self.start_time),
            end: TimeIndex(self.start_time + self.n_pre as i64 - 1),
        }
    }

    pub fn post_period(&self) -> TimeRange {
        TimeRange {
            start: self.treatment_time(),
            end: TimeIndex(self.start_time + (self.n_pre + self.n_post) as i64 - 1),
        }
    }
}

/// What the generator knows and the estimator has to find.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTruth {
    pub treated: UnitId,
    /// Donor labels, aligned with `generating_weights`.
    pub donors: Vec<UnitId>,
    pub generating_weights: Option<Vec<f64>>,
    /// Effect per post period.
    pub effect_path: Vec<f64>,
    pub treatment_time: TimeIndex,
}

impl SimTruth {
    pub fn weight_of(&self, unit: &UnitId) -> Option<f64> {
        let j = self.donors.iter().position(|d| d == unit)?;
        self.generating_weights.as_ref().map(|w| w[j])
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub panel: PanelDataset,
    pub design: StudyDesign,
    pub spec: PredictorSpec,
    pub truth: SimTruth,
}

pub fn unit_label(i: usize) -> UnitId {
    UnitId::new(format!("u{:02}", i + 1)).expect("non-empty label")
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws one panel together with its study design and predictor set.
pub fn generate(config: &FactorModelConfig) -> Result<Simulation, SimulateError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_units;
    let k = config.n_factors;
    let n_t = config.n_pre + config.n_post;

    let mut loadings: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| rng.random::<f64>()).collect())
        .collect();
    let generating_weights = config.treated_is_convex.then(|| {
        let mut w: Vec<f64> = (1..n).map(|_| Exp1.sample(&mut rng)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        loadings[0] = (0..k)
            .map(|f| w.iter().zip(&loadings[1..]).map(|(w, l)| w * l[f]).sum())
            .collect();
        w
    });

    let factors: Vec<Vec<f64>> = (0..n_t)
        .map(|_| {
            (0..k)
                .map(|f| if f == 0 { 1.0 } else { normal(&mut rng) })
                .collect()
        })
        .collect();
    let betas: Vec<Vec<f64>> = (0..config.n_covariates)
        .map(|_| (0..k).map(|_| normal(&mut rng)).collect())
        .collect();

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut outcome = Vec::with_capacity(n * n_t);
    for lam in &loadings {
        for f in &factors {
            outcome.push(Some(dot(lam, f) + config.noise_std * normal(&mut rng)));
        }
    }
    for t in config.n_pre..n_t {
        if let Some(y) = outcome[t].as_mut() {
            *y += config.effect;
        }
    }
    let cov_noise = config.covariate_noise_std.unwrap_or(config.noise_std);
    let covariates = betas
        .iter()
        .enumerate()
        .map(|(c, beta)| {
            let mut values = Vec::with_capacity(n * n_t);
            for lam in &loadings {
                let level = dot(beta, lam);
                for _ in 0..n_t {
                    values.push(Some(level + cov_noise * normal(&mut rng)));
                }
            }
            Covariate {
                name: format!("x{}", c + 1),
                values,
            }
        })
        .collect::<Vec<_>>();

    let units: Vec<UnitId> = (0..n).map(unit_label).collect();
    let times = TimeRange {
        start: TimeIndex(config.start_time),
        end: TimeIndex(config.start_time + n_t as i64 - 1),
    };
    let panel = PanelDataset::new(units.clone(), times, outcome, covariates, false)?;
    let design = StudyDesign::new(
        units[0].clone(),
        config.treatment_time(),
        config.pre_period(),
        config.post_period(),
        units[1..].to_vec(),
    )?;
    let mut entries: Vec<PredictorEntry> = (0..config.n_covariates)
        .map(|c| PredictorEntry::CovariateMean {
            covariate: format!("x{}", c + 1),
        })
        .collect();
    if config.lag_predictors || entries.is_empty() {
        let pre = config.pre_period();
        entries.push(PredictorEntry::OutcomeLag { time: pre.start });
        entries.push(PredictorEntry::OutcomeLag { time: pre.end });
    }
    let spec = PredictorSpec::new(entries)?;

    Ok(Simulation {
        panel,
        design,
        spec,
        truth: SimTruth {
            treated: units[0].clone(),
            donors: units[1..].to_vec(),
            generating_weights,
            effect_path: vec![config.effect; config.n_post],
            treatment_time: config.treatment_time(),
        },
    })
}

/// Seed of replication `index`: the master seed's ChaCha stream `index`.
pub fn replication_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Per-replication outcome of a power study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub n_units: usize,
    pub rank: usize,
    pub p_value: f64,
    /// Treated position in the ratio ranking, 1 = largest.
    pub ratio_rank: usize,
    pub within_envelope: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub alpha: f64,
    pub rejection_rate: f64,
    pub mean_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerStudy {
    pub rows: Vec<PowerRow>,
    pub replications: Vec<Replication>,
    /// (replication index, error) for studies that could not be run.
    pub failures: Vec<(usize, String)>,
}

impl PowerStudy {
    /// Share of successful replications whose treated unit is within the
    /// top `share` of post/pre ratios (at least the single top position).
    pub fn ratio_top_share(&self, share: f64) -> f64 {
        self.fraction(|r| r.ratio_rank <= ((share * r.n_units as f64).ceil() as usize).max(1))
    }

    pub fn envelope_share(&self) -> f64 {
        self.fraction(|r| r.within_envelope)
    }

    fn fraction(&self, pred: impl Fn(&Replication) -> bool) -> f64 {
        if self.replications.is_empty() {
            return f64::NAN;
        }
        self.replications.iter().filter(|r| pred(r)).count() as f64 / self.replications.len() as f64
    }

    /// `alpha,rejection_rate,mean_rank`
    pub fn write_csv<W: std::io::Write>(&self, sink: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `replications` independent generate + placebo studies. Replication
/// `i` uses `replication_seed(config.seed, i)` as generator seed.
pub fn power_study(
    config: &FactorModelConfig,
    replications: usize,
    alpha_grid: &[f64],
    settings: &PlaceboSettings,
) -> Result<PowerStudy, SimulateError> {
    config.validate()?;
    if replications == 0 {
        return Err(SimulateError::InvalidConfig("replications must be at least 1".into()));
    }
    let outcomes: Vec<Result<Replication, (usize, String)>> = (0..replications)
        .into_par_iter()
        .map(|index| {
            let seed = replication_seed(config.seed, index as u64);
            let cfg = FactorModelConfig { seed, ..*config };
            let sim = generate(&cfg).map_err(|e| (index, e.to_string()))?;
            let study = run_placebos(&sim.panel, &sim.design, &sim.spec, settings)
                .map_err(|e| (index, e.to_string()))?;
            Ok(Replication {
                index,
                seed,
                n_units: study.n_units(),
                rank: study.rank,
                p_value: study.p_value,
                ratio_rank: ratio_rank_of_treated(&study),
                within_envelope: within_gap_envelope(&study),
            })
        })
        .collect();

    let mut reps = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => reps.push(r),
            Err(f) => failures.push(f),
        }
    }
    let done = reps.len() as f64;
    let mean_rank = reps.iter().map(|r| r.rank as f64).sum::<f64>() / done;
    let rows = alpha_grid
        .iter()
        .map(|&alpha| PowerRow {
            alpha,
            // the small slack keeps p = k/N from missing alpha = k/N by roundoff
            rejection_rate: reps.iter().filter(|r| r.p_value <= alpha + 1e-12).count() as f64 / done,
            mean_rank,
        })
        .collect();
    Ok(PowerStudy {
        rows,
        replications: reps,
        failures,
    })
}
