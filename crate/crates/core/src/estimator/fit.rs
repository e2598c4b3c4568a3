use super::nelder_mead;
use super::{
    build_matrices, solve_w_with, EstimatorError, InnerSettings, PredictorMatrices, SolverSettings,
    VWeights, WWeights,
};
use crate::numeric::normalize_simplex;
use crate::panel::{
    restrict, screen_covariates, Exclusion, PanelDataset, PredictorSpec, Series, StudyDesign,
    TimeRange, UnitId,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

/// Candidate losses closer than this are treated as ties.
const TIE_TOL: f64 = 1e-12;

/// Σ_j w_j y_j, accumulated in donor order.
fn combine(w: &[f64], values: impl Iterator<Item = f64>) -> f64 {
    w.iter().zip(values).map(|(w, y)| w * y).sum()
}

fn mspe(actual: &[f64], synthetic: &[f64]) -> f64 {
    let n = actual.len() as f64;
    actual
        .iter()
        .zip(synthetic)
        .map(|(a, s)| (a - s) * (a - s))
        .sum::<f64>()
        / n
}

/// Everything needed to evaluate the pre-period MSPE for a given `v`.
pub struct OuterProblem<'a> {
    mats: &'a PredictorMatrices,
    treated_pre: Vec<f64>,
    /// Pre-period outcomes, one row per period, one column per donor.
    donor_pre: DMatrix<f64>,
    inner: InnerSettings,
}

#[derive(Debug, Clone)]
pub struct OuterEval {
    pub w: WWeights,
    pub inner_loss: f64,
    pub pre_mspe: f64,
}

impl<'a> OuterProblem<'a> {
    pub fn new(
        panel: &PanelDataset,
        design: &StudyDesign,
        mats: &'a PredictorMatrices,
        inner: InnerSettings,
    ) -> Result<Self, EstimatorError> {
        let pre = design.pre_period;
        let series = |unit: &UnitId| {
            panel.outcome_series(unit, &pre).ok_or_else(|| {
                EstimatorError::Panel(crate::panel::PanelError::InvalidDesign(format!(
                    "`{unit}` has missing pre-period outcomes"
                )))
            })
        };
        let treated_pre = series(&design.treated)?.values;
        let mut donor_pre = DMatrix::zeros(pre.len(), mats.n_donors());
        for (j, donor) in mats.donor_order.iter().enumerate() {
            for (k, y) in series(donor)?.values.into_iter().enumerate() {
                donor_pre[(k, j)] = y;
            }
        }
        Ok(Self {
            mats,
            treated_pre,
            donor_pre,
            inner,
        })
    }

    pub fn evaluate(&self, v: &VWeights) -> Result<OuterEval, EstimatorError> {
        let (w, inner_loss) = solve_w_with(self.mats, v, &self.inner)?;
        let synthetic: Vec<f64> = (0..self.treated_pre.len())
            .map(|k| combine(w.as_slice(), self.donor_pre.row(k).iter().copied()))
            .collect();
        Ok(OuterEval {
            pre_mspe: mspe(&self.treated_pre, &synthetic),
            w,
            inner_loss,
        })
    }
}

/// Pre-period MSPE of the synthetic unit built with `w(v)`.
pub fn outer_loss(
    v: &VWeights,
    panel: &PanelDataset,
    design: &StudyDesign,
    mats: &PredictorMatrices,
) -> Result<f64, EstimatorError> {
    OuterProblem::new(panel, design, mats, InnerSettings::default())?
        .evaluate(v)
        .map(|e| e.pre_mspe)
}

/// Outcome of one local search.
#[derive(Debug, Clone, Serialize)]
pub struct StartTrace {
    pub start: Vec<f64>,
    /// Final loss, `None` if the start never produced a finite value.
    pub loss: Option<f64>,
    pub evals: usize,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VOptimum {
    pub v: VWeights,
    pub w: WWeights,
    pub inner_loss: f64,
    pub pre_mspe: f64,
    pub mats: PredictorMatrices,
    pub starts: Vec<StartTrace>,
}

fn to_simplex(u: &[f64]) -> VWeights {
    let mut v: Vec<f64> = u.iter().map(|x| x.abs()).collect();
    normalize_simplex(&mut v);
    VWeights::from_raw(v)
}

/// Equal weights, each vertex, then `count` seeded Dirichlet(1) draws.
fn starting_points(p: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut starts = vec![vec![1.0 / p as f64; p]];
    for k in 0..p {
        let mut e = vec![0.0; p];
        e[k] = 1.0;
        starts.push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        let mut draw: Vec<f64> = (0..p).map(|_| Exp1.sample(&mut rng)).collect();
        normalize_simplex(&mut draw);
        starts.push(draw);
    }
    starts
}

/// Chooses predictor weights by multi-start Nelder-Mead over the simplex
/// (parametrized as v = |u| / Σ|u|). `panel` must already be restricted to
/// usable donors.
pub fn optimize_v(
    panel: &PanelDataset,
    design: &StudyDesign,
    spec: &PredictorSpec,
    settings: &SolverSettings,
) -> Result<VOptimum, EstimatorError> {
    let mats = build_matrices(panel, design, spec)?;
    let problem = OuterProblem::new(panel, design, &mats, settings.inner)?;
    let p = mats.n_predictors();

    if p == 1 {
        let v = VWeights::equal(1);
        let eval = problem.evaluate(&v)?;
        return Ok(VOptimum {
            v,
            w: eval.w,
            inner_loss: eval.inner_loss,
            pre_mspe: eval.pre_mspe,
            starts: vec![StartTrace {
                start: vec![1.0],
                loss: Some(eval.pre_mspe),
                evals: 1,
                trace: vec![eval.pre_mspe],
            }],
            mats,
        });
    }

    let starts = starting_points(p, settings.outer_starts, settings.seed);
    let runs: Vec<(StartTrace, Option<(VWeights, OuterEval)>, Option<String>)> = starts
        .into_par_iter()
        .map(|start| {
            let mut last_error = None;
            let result = nelder_mead::minimize(
                |u| match problem.evaluate(&to_simplex(u)) {
                    Ok(e) => e.pre_mspe,
                    Err(err) => {
                        last_error = Some(err.to_string());
                        f64::INFINITY
                    }
                },
                &start,
                &settings.outer,
            );
            let best = result
                .f
                .is_finite()
                .then(|| {
                    let v = to_simplex(&result.x);
                    problem.evaluate(&v).ok().map(|e| (v, e))
                })
                .flatten();
            let trace = StartTrace {
                start,
                loss: best.as_ref().map(|(_, e)| e.pre_mspe),
                evals: result.evals,
                trace: result.trace,
            };
            (trace, best, last_error)
        })
        .collect();

    let mut chosen: Option<(VWeights, OuterEval)> = None;
    let mut traces = Vec::with_capacity(runs.len());
    let mut last_error = None;
    for (trace, candidate, err) in runs {
        if err.is_some() {
            last_error = err;
        }
        if let Some((v, e)) = candidate {
            let better = chosen
                .as_ref()
                .is_none_or(|(_, b)| e.pre_mspe < b.pre_mspe - TIE_TOL);
            if better {
                chosen = Some((v, e));
            }
        }
        traces.push(trace);
    }
    let (v, eval) = chosen.ok_or_else(|| EstimatorError::OptimizationFailure {
        starts: traces.len(),
        last_error: last_error.unwrap_or_else(|| "no finite loss".into()),
    })?;
    Ok(VOptimum {
        v,
        w: eval.w,
        inner_loss: eval.inner_loss,
        pre_mspe: eval.pre_mspe,
        mats,
        starts: traces,
    })
}

/// A fitted synthetic control.
#[derive(Debug, Clone)]
pub struct SynthFit {
    pub design: StudyDesign,
    pub spec: PredictorSpec,
    pub matrices: PredictorMatrices,
    pub v: VWeights,
    pub w: WWeights,
    /// Synthetic outcome over pre ∪ post.
    pub synthetic_path: Series,
    pub inner_loss: f64,
    pub pre_mspe: f64,
    /// Donors dropped before fitting.
    pub excluded: Vec<Exclusion>,
    pub starts: Vec<StartTrace>,
}

impl SynthFit {
    pub fn donor_order(&self) -> &[UnitId] {
        &self.matrices.donor_order
    }

    pub fn window(&self) -> TimeRange {
        self.design.window()
    }

    pub fn weight_of(&self, unit: &UnitId) -> Option<f64> {
        self.donor_order()
            .iter()
            .position(|u| u == unit)
            .map(|j| self.w.as_slice()[j])
    }

    /// (donor, weight) pairs in donor order.
    pub fn weights(&self) -> impl Iterator<Item = (&UnitId, f64)> {
        self.donor_order()
            .iter()
            .zip(self.w.as_slice().iter().copied())
    }

    /// Synthetic predictor values in raw (unscaled) units.
    pub fn synthetic_predictors(&self) -> Vec<f64> {
        (0..self.matrices.n_predictors())
            .map(|i| combine(self.w.as_slice(), self.matrices.raw_x0.row(i).iter().copied()))
            .collect()
    }
}

/// restrict → build matrices → optimize v → synthetic path.
pub fn fit(
    panel: &PanelDataset,
    design: &StudyDesign,
    spec: &PredictorSpec,
    settings: &SolverSettings,
) -> Result<SynthFit, EstimatorError> {
    spec.validate(design, panel)?;
    let restricted = screen_covariates(restrict(panel, design)?, design, spec)?;
    let donors: Vec<UnitId> = restricted.donors(design).cloned().collect();
    let design = design.reassigned(design.treated.clone(), donors)?;
    let panel = &restricted.panel;

    let opt = optimize_v(panel, &design, spec, settings)?;
    let window = design.window();
    let donor_paths = opt
        .mats
        .donor_order
        .iter()
        .map(|d| {
            panel.outcome_series(d, &window).ok_or_else(|| {
                EstimatorError::Shape(format!("donor `{d}` has missing outcomes"))
            })
        })
        .collect::<Result<Vec<Series>, _>>()?;
    let synthetic: Vec<f64> = (0..window.len())
        .map(|k| combine(opt.w.as_slice(), donor_paths.iter().map(|s| s.values[k])))
        .collect();

    Ok(SynthFit {
        design,
        spec: spec.clone(),
        matrices: opt.mats,
        v: opt.v,
        w: opt.w,
        synthetic_path: Series::new(window.start, synthetic),
        inner_loss: opt.inner_loss,
        pre_mspe: opt.pre_mspe,
        excluded: restricted.excluded,
        starts: opt.starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::tests::uid;
    use crate::panel::{Covariate, PredictorEntry, TimeIndex};

    /// Treated "T" plus donors; "D2" is an exact clone of T when `clone` is set.
    fn panel(clone: bool) -> PanelDataset {
        let times = TimeRange::new(1, 8).unwrap();
        let paths: Vec<(&str, Vec<f64>, f64)> = vec![
            ("T", (0..8).map(|k| 0.50 + 0.02 * k as f64).collect(), 3.0),
            ("D1", (0..8).map(|k| 0.40 + 0.01 * k as f64).collect(), 1.0),
            (
                "D2",
                if clone {
                    (0..8).map(|k| 0.50 + 0.02 * k as f64).collect()
                } else {
                    (0..8).map(|k| 0.60 + 0.03 * k as f64).collect()
                },
                if clone { 3.0 } else { 5.0 },
            ),
            ("D3", (0..8).map(|k| 0.55 - 0.01 * k as f64).collect(), 2.0),
        ];
        let units = paths.iter().map(|(u, _, _)| uid(u)).collect();
        let outcome = paths
            .iter()
            .flat_map(|(_, ys, _)| ys.iter().map(|y| Some(*y)))
            .collect();
        let cov = paths
            .iter()
            .flat_map(|(_, _, c)| (0..8).map(move |k| Some(c + 0.1 * k as f64)))
            .collect();
        PanelDataset::new(
            units,
            times,
            outcome,
            vec![Covariate {
                name: "x".into(),
                values: cov,
            }],
            true,
        )
        .unwrap()
    }

    fn design() -> StudyDesign {
        StudyDesign::new(
            uid("T"),
            TimeIndex(5),
            TimeRange::new(1, 4).unwrap(),
            TimeRange::new(5, 8).unwrap(),
            vec![uid("D1"), uid("D2"), uid("D3")],
        )
        .unwrap()
    }

    fn spec() -> PredictorSpec {
        PredictorSpec::new(vec![
            PredictorEntry::CovariateMean {
                covariate: "x".into(),
            },
            PredictorEntry::OutcomeLag { time: TimeIndex(1) },
            PredictorEntry::OutcomeLag { time: TimeIndex(4) },
        ])
        .unwrap()
    }

    #[test]
    fn clone_donor_gets_all_weight() {
        let f = fit(&panel(true), &design(), &spec(), &SolverSettings::default()).unwrap();
        assert!(f.weight_of(&uid("D2")).unwrap() >= 0.999);
        assert!(f.pre_mspe <= 1e-12);
        assert!(f.inner_loss <= 1e-10);
    }

    #[test]
    fn synthetic_path_is_weighted_donor_sum() {
        let p = panel(false);
        let f = fit(&p, &design(), &spec(), &SolverSettings::default()).unwrap();
        for (k, t) in f.window().iter().enumerate() {
            let expected: f64 = f
                .weights()
                .map(|(d, w)| w * p.outcome(d, t).unwrap())
                .sum();
            assert_eq!(f.synthetic_path.values[k], expected);
        }
        assert!(f.pre_mspe >= 0.0);
    }

    #[test]
    fn outer_loss_matches_direct_recomputation() {
        let p = panel(false);
        let d = design();
        let mats = build_matrices(&p, &d, &spec()).unwrap();
        let v = VWeights::new(vec![0.2, 0.3, 0.5]).unwrap();
        let loss = outer_loss(&v, &p, &d, &mats).unwrap();
        let (w, _) = super::super::solve_w(&mats, &v).unwrap();
        let direct: f64 = d
            .pre_period
            .iter()
            .map(|t| {
                let synth: f64 = mats
                    .donor_order
                    .iter()
                    .zip(w.as_slice())
                    .map(|(u, w)| w * p.outcome(u, t).unwrap())
                    .sum();
                (p.outcome(&uid("T"), t).unwrap() - synth).powi(2)
            })
            .sum::<f64>()
            / 4.0;
        assert!((loss - direct).abs() < 1e-15);
    }

    #[test]
    fn single_predictor_skips_search() {
        let spec = PredictorSpec::new(vec![PredictorEntry::OutcomeLag { time: TimeIndex(4) }]).unwrap();
        let opt = optimize_v(&panel(false), &design(), &spec, &SolverSettings::default()).unwrap();
        assert_eq!(opt.v.as_slice(), &[1.0]);
        assert_eq!(opt.starts.len(), 1);
    }

    #[test]
    fn search_never_worse_than_equal_weights() {
        let p = panel(false);
        let d = design();
        let s = PredictorSpec::new(vec![
            PredictorEntry::CovariateMean {
                covariate: "x".into(),
            },
            PredictorEntry::OutcomeLag { time: TimeIndex(2) },
        ])
        .unwrap();
        let opt = optimize_v(&p, &d, &s, &SolverSettings::default()).unwrap();
        let mats = build_matrices(&p, &d, &s).unwrap();
        let at_equal = outer_loss(&VWeights::equal(2), &p, &d, &mats).unwrap();
        assert!(opt.pre_mspe <= at_equal);
        assert_eq!(opt.starts.len(), 1 + 2 + 16);
    }

    #[test]
    fn fit_is_deterministic() {
        let p = panel(false);
        let settings = SolverSettings {
            seed: 99,
            ..Default::default()
        };
        let a = fit(&p, &design(), &spec(), &settings).unwrap();
        let b = fit(&p, &design(), &spec(), &settings).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.v, b.v);
        assert_eq!(a.synthetic_path, b.synthetic_path);
        assert_eq!(a.pre_mspe.to_bits(), b.pre_mspe.to_bits());
    }
}
