use super::EstimatorError;
use crate::numeric::{mean, sample_std};
use crate::panel::{PanelDataset, PredictorEntry, PredictorSpec, StudyDesign, UnitId};
use nalgebra::{DMatrix, DVector};

/// Treated predictor vector and donor predictor matrix, one row per
/// predictor and one column per donor. Rows are divided by their cross-unit
/// sample standard deviation (`scale`).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorMatrices {
    pub x1: DVector<f64>,
    pub x0: DMatrix<f64>,
    pub scale: Vec<f64>,
    /// Donor columns, sorted by label.
    pub donor_order: Vec<UnitId>,
    /// Unscaled predictor values, for balance tables.
    pub raw_x1: DVector<f64>,
    pub raw_x0: DMatrix<f64>,
    pub labels: Vec<String>,
}

impl PredictorMatrices {
    pub fn n_predictors(&self) -> usize {
        self.x1.len()
    }

    pub fn n_donors(&self) -> usize {
        self.x0.ncols()
    }

    /// Builds matrices directly from standardized values (no panel involved).
    pub fn from_parts(x1: DVector<f64>, x0: DMatrix<f64>) -> Result<Self, EstimatorError> {
        let (p, m) = x0.shape();
        if p == 0 || m == 0 || x1.len() != p {
            return Err(EstimatorError::Shape(format!(
                "x1 has {} rows, x0 is {p}x{m}",
                x1.len()
            )));
        }
        Ok(Self {
            raw_x1: x1.clone(),
            raw_x0: x0.clone(),
            x1,
            x0,
            scale: vec![1.0; p],
            donor_order: (0..m)
                .map(|j| UnitId::new(format!("d{j}")).expect("non-empty label"))
                .collect(),
            labels: (0..p).map(|i| format!("x{i}")).collect(),
        })
    }
}

fn predictor_value(
    panel: &PanelDataset,
    design: &StudyDesign,
    entry: &PredictorEntry,
    unit: &UnitId,
) -> Option<f64> {
    match entry {
        PredictorEntry::CovariateMean { covariate } => {
            let observed: Vec<f64> = design
                .pre_period
                .iter()
                .filter_map(|t| panel.covariate(covariate, unit, t))
                .collect();
            (!observed.is_empty()).then(|| mean(&observed))
        }
        PredictorEntry::OutcomeLag { time } => panel.outcome(unit, *time),
    }
}

/// Assembles X1/X0 for `design`. `panel` should already be restricted; any
/// donor the panel lacks is an error here. Covariate means average only the
/// observed pre-period values.
pub fn build_matrices(
    panel: &PanelDataset,
    design: &StudyDesign,
    spec: &PredictorSpec,
) -> Result<PredictorMatrices, EstimatorError> {
    design.validate()?;
    spec.validate(design, panel)?;
    let mut donors = design.donors.clone();
    donors.sort();
    let p = spec.len();
    let m = donors.len();

    let value = |entry: &PredictorEntry, unit: &UnitId, row: usize| {
        predictor_value(panel, design, entry, unit).ok_or_else(|| EstimatorError::MissingPredictor {
            unit: unit.clone(),
            predictor: spec.labels()[row].clone(),
        })
    };

    let mut raw_x1 = DVector::zeros(p);
    let mut raw_x0 = DMatrix::zeros(p, m);
    for (i, entry) in spec.entries().iter().enumerate() {
        raw_x1[i] = value(entry, &design.treated, i)?;
        for (j, donor) in donors.iter().enumerate() {
            raw_x0[(i, j)] = value(entry, donor, i)?;
        }
    }

    let mut scale = Vec::with_capacity(p);
    for i in 0..p {
        let row: Vec<f64> = std::iter::once(raw_x1[i])
            .chain(raw_x0.row(i).iter().copied())
            .collect();
        match sample_std(&row) {
            Some(s) if s > 0.0 && s.is_finite() => scale.push(s),
            _ => {
                return Err(EstimatorError::DegeneratePredictor {
                    predictor: spec.labels()[i].clone(),
                })
            }
        }
    }
    let x1 = DVector::from_fn(p, |i, _| raw_x1[i] / scale[i]);
    let x0 = DMatrix::from_fn(p, m, |i, j| raw_x0[(i, j)] / scale[i]);
    Ok(PredictorMatrices {
        x1,
        x0,
        scale,
        donor_order: donors,
        raw_x1,
        raw_x0,
        labels: spec.labels().to_vec(),
    })
}
