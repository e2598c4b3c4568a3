use synthctl_core::panel::{Covariate, PanelDataset, UnitId};

/// Copy of `panel` where `target`'s outcomes and covariates are replaced by
/// `source`'s.
pub fn with_clone(panel: &PanelDataset, target: &UnitId, source: &UnitId) -> PanelDataset {
    fn pick<'a>(u: &'a UnitId, target: &UnitId, source: &'a UnitId) -> &'a UnitId {
        if u == target {
            source
        } else {
            u
        }
    }
    let units = panel.units().to_vec();
    let times = panel.times();
    let outcome = units
        .iter()
        .flat_map(|u| times.iter().map(move |t| panel.outcome(pick(u, target, source), t)))
        .collect();
    let covariates = panel
        .covariates()
        .iter()
        .map(|c| Covariate {
            name: c.name.clone(),
            values: units
                .iter()
                .flat_map(|u| times.iter().map(move |t| panel.covariate(&c.name, pick(u, target, source), t)))
                .collect(),
        })
        .collect();
    PanelDataset::new(units.clone(), times, outcome, covariates, panel.is_rate_panel()).unwrap()
}

pub fn uid(s: &str) -> UnitId {
    UnitId::new(s).unwrap()
}
