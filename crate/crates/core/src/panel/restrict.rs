//! Narrowing a panel to one study: treated + usable donors over pre ∪ post.

use super::{PanelDataset, PanelError, PredictorSpec, StudyDesign, UnitId};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExclusionReason {
    NotInPanel,
    MissingOutcome { times: Vec<super::TimeIndex> },
    MissingCovariate { covariate: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub unit: UnitId,
    #[serde(flatten)]
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Restricted {
    pub panel: PanelDataset,
    /// Donors from the design that did not make it into `panel`.
    pub excluded: Vec<Exclusion>,
}

impl Restricted {
    /// Donors that survived, in design order.
    pub fn donors<'a>(&'a self, design: &'a StudyDesign) -> impl Iterator<Item = &'a UnitId> {
        design
            .donors
            .iter()
            .filter(|d| self.excluded.iter().all(|e| &e.unit != *d))
    }
}

/// Keeps the treated unit and every donor whose outcome is fully observed
/// over pre ∪ post; other donors are dropped and reported. The result spans
/// exactly the study window.
pub fn restrict(panel: &PanelDataset, design: &StudyDesign) -> Result<Restricted, PanelError> {
    design.validate()?;
    let window = design.window();
    if !panel.times().contains_range(&window) {
        return Err(PanelError::InvalidDesign(format!(
            "study window {window} is outside panel times {}",
            panel.times()
        )));
    }
    if !panel.contains_unit(&design.treated) {
        return Err(PanelError::InvalidDesign(format!(
            "treated unit `{}` is not in the panel",
            design.treated
        )));
    }
    if let Some(&time) = panel.missing_outcomes(&design.treated, &window).first() {
        return Err(PanelError::TreatedIncomplete {
            unit: design.treated.clone(),
            time,
        });
    }

    let mut kept = vec![design.treated.clone()];
    let mut excluded = Vec::new();
    for donor in &design.donors {
        if !panel.contains_unit(donor) {
            excluded.push(Exclusion {
                unit: donor.clone(),
                reason: ExclusionReason::NotInPanel,
            });
            continue;
        }
        let missing = panel.missing_outcomes(donor, &window);
        if missing.is_empty() {
            kept.push(donor.clone());
        } else {
            excluded.push(Exclusion {
                unit: donor.clone(),
                reason: ExclusionReason::MissingOutcome { times: missing },
            });
        }
    }
    if kept.len() == 1 {
        return Err(PanelError::EmptyDonorPool);
    }
    Ok(Restricted {
        panel: panel.subset(&kept, window)?,
        excluded,
    })
}

/// Drops donors with no observed pre-period value for a covariate the predictor set
/// averages. Applied after [`restrict`]; appends to its exclusion list.
pub fn screen_covariates(
    restricted: Restricted,
    design: &StudyDesign,
    spec: &PredictorSpec,
) -> Result<Restricted, PanelError> {
    let Restricted {
        panel,
        mut excluded,
    } = restricted;
    let pre = design.pre_period;
    let observed = |name: &str, unit: &UnitId| {
        pre.iter()
            .any(|t| panel.covariate(name, unit, t).is_some())
    };
    for name in spec.covariates() {
        if !observed(name, &design.treated) {
            return Err(PanelError::TreatedMissingCovariate {
                unit: design.treated.clone(),
                covariate: name.to_string(),
            });
        }
    }
    let mut kept = vec![design.treated.clone()];
    for donor in panel.units().iter().filter(|u| **u != design.treated) {
        match spec.covariates().find(|name| !observed(name, donor)) {
            Some(name) => excluded.push(Exclusion {
                unit: donor.clone(),
                reason: ExclusionReason::MissingCovariate {
                    covariate: name.to_string(),
                },
            }),
            None => kept.push(donor.clone()),
        }
    }
    if kept.len() == 1 {
        return Err(PanelError::EmptyDonorPool);
    }
    let panel = if kept.len() == panel.units().len() {
        panel
    } else {
        panel.subset(&kept, panel.times())?
    };
    Ok(Restricted { panel, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::tests::{toy_panel, uid};
    use crate::panel::{Covariate, PredictorEntry, TimeIndex, TimeRange};

    fn design(donors: &[&str]) -> StudyDesign {
        StudyDesign::new(
            uid("A"),
            TimeIndex(1979),
            TimeRange::new(1977, 1978).unwrap(),
            TimeRange::new(1979, 1981).unwrap(),
            donors.iter().map(|d| uid(d)).collect(),
        )
        .unwrap()
    }

    fn with_hole(unit: &str, year: i64) -> PanelDataset {
        let p = toy_panel();
        let units = p.units().to_vec();
        let times = p.times();
        let outcome = units
            .iter()
            .flat_map(|u| times.iter().map(move |t| (u, t)))
            .map(|(u, t)| {
                if u.as_str() == unit && t.0 == year {
                    None
                } else {
                    p.outcome(u, t)
                }
            })
            .collect();
        PanelDataset::new(units, times, outcome, p.covariates().to_vec(), true).unwrap()
    }

    #[test]
    fn complete_panel_keeps_all_units() {
        let r = restrict(&toy_panel(), &design(&["B", "C"])).unwrap();
        assert_eq!(r.panel.units().len(), 3);
        assert!(r.excluded.is_empty());
    }

    #[test]
    fn donor_with_missing_post_outcome_is_dropped() {
        let r = restrict(&with_hole("C", 1981), &design(&["B", "C"])).unwrap();
        assert_eq!(r.panel.units(), &[uid("A"), uid("B")]);
        assert_eq!(
            r.excluded,
            vec![Exclusion {
                unit: uid("C"),
                reason: ExclusionReason::MissingOutcome {
                    times: vec![TimeIndex(1981)]
                },
            }]
        );
    }

    #[test]
    fn incomplete_treated_is_an_error() {
        let err = restrict(&with_hole("A", 1978), &design(&["B", "C"])).unwrap_err();
        assert!(matches!(err, PanelError::TreatedIncomplete { time: TimeIndex(1978), .. }));
    }

    #[test]
    fn all_donors_dropped_is_an_error() {
        let err = restrict(&with_hole("B", 1977), &design(&["B"])).unwrap_err();
        assert!(matches!(err, PanelError::EmptyDonorPool));
    }

    #[test]
    fn restrict_is_idempotent() {
        let p = with_hole("C", 1980);
        let d = design(&["B", "C", "Z"]);
        let once = restrict(&p, &d).unwrap();
        let twice = restrict(&once.panel, &d).unwrap();
        assert_eq!(once.panel, twice.panel);
        assert_eq!(once.excluded.len(), 2);
    }

    #[test]
    fn donor_without_covariate_is_screened() {
        let p = toy_panel();
        let n = p.units().len() * p.times().len();
        let mut values = p.covariates()[0].values.clone();
        // B is the second unit; blank its covariate entirely
        for v in &mut values[5..10] {
            *v = None;
        }
        let p = PanelDataset::new(
            p.units().to_vec(),
            p.times(),
            (0..n).map(|i| p.outcome(&p.units()[i / 5], TimeIndex(1977 + (i % 5) as i64))).collect(),
            vec![Covariate {
                name: "income".into(),
                values,
            }],
            true,
        )
        .unwrap();
        let d = design(&["B", "C"]);
        let spec = PredictorSpec::new(vec![PredictorEntry::CovariateMean {
            covariate: "income".into(),
        }])
        .unwrap();
        let r = screen_covariates(restrict(&p, &d).unwrap(), &d, &spec).unwrap();
        assert_eq!(r.panel.units(), &[uid("A"), uid("C")]);
        assert_eq!(r.donors(&d).collect::<Vec<_>>(), vec![&uid("C")]);
    }
}
