//! Synthetic control estimation for comparative case studies.
//!
//! The crate covers the whole pipeline: survey microdata aggregation into a
//! panel, nested W/V weight optimization, in-space placebo inference, fit
//! diagnostics (RMSE, MAE, RSR) and a seeded factor-model simulator used to
//! check size and power of the placebo test.

pub mod aggregate;
pub mod diagnostics;
pub mod estimator;
pub mod inference;
pub mod numeric;
pub mod panel;
pub mod simulate;

pub use aggregate::{build_outcome_panel, status_completion_rate, AgeWindow, MicroRecord};
pub use diagnostics::{
    fit_report, gap_series, mae, rmse, rsr, DiagnosticsError, FitReport, GapSeries, UnitStats,
};
pub use estimator::{
    build_matrices, fit, optimize_v, outer_loss, solve_w, EstimatorError, PredictorMatrices,
    SolverSettings, SynthFit, VWeights, WWeights,
};
pub use inference::{
    gap_paths, ratio_ranking, run_placebos, InferenceError, PlaceboResult, PlaceboSettings,
    PlaceboStudy,
};
pub use panel::{
    load_panel, restrict, save_panel, LoadOptions, PanelDataset, PanelError, PredictorEntry,
    PredictorSpec, Series, StudyDesign, TimeIndex, TimeRange, UnitId,
};
pub use simulate::{generate, power_study, FactorModelConfig, PowerStudy, SimTruth, Simulation};
