use super::{note, read_bytes};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::OutDir;
use crate::{AggregateArgs, Cli};
use std::collections::BTreeSet;
use synthctl_core::aggregate::{build_outcome_panel, eligible_counts, load_microdata, AgeWindow};
use synthctl_core::panel::{save_panel, TimeRange, UnitId};

fn parse_times(raw: &str) -> Result<TimeRange, CliError> {
    let bad = || CliError::Config(format!("--times expects `first:last`, got `{raw}`"));
    let (a, b) = raw.split_once(':').ok_or_else(bad)?;
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().parse().map_err(|_| bad())?;
    TimeRange::new(a, b).map_err(|e| CliError::Config(e.to_string()))
}

pub fn run(cli: &Cli, args: &AggregateArgs) -> Result<(), CliError> {
    let window = AgeWindow::new(args.min_age, args.max_age)?;
    let explicit_times = args.times.as_deref().map(parse_times).transpose()?;
    let explicit_units = args
        .units
        .as_ref()
        .map(|us| us.iter().map(|u| UnitId::new(u.trim())).collect::<Result<Vec<_>, _>>())
        .transpose()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let bytes = read_bytes(&args.input)?;
    let records = load_microdata(bytes.as_slice())
        .map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;
    note(cli, format!("read {} microdata records", records.len()));

    let units = match explicit_units {
        Some(u) => u,
        None => records
            .iter()
            .map(|r| r.unit.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let times = match explicit_times {
        Some(t) => t,
        None => {
            let lo = records.iter().map(|r| r.time.0).min();
            let hi = records.iter().map(|r| r.time.0).max();
            match (lo, hi) {
                (Some(lo), Some(hi)) => TimeRange::new(lo, hi)?,
                _ => return Err(CliError::Data("microdata has no records".into())),
            }
        }
    };
    if units.is_empty() {
        return Err(CliError::Config("no units to aggregate".into()));
    }

    let panel = build_outcome_panel(&records, &units, times, window);
    let counts = eligible_counts(&records, window);

    let mut out = OutDir::create(&cli.out)?;
    out.write("panel.csv", |w| save_panel(&panel, w))?;
    out.write("cell_counts.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["unit", "time", "records"])?;
        for u in panel.units() {
            for t in times.iter() {
                let n = counts.get(&(u.clone(), t)).copied().unwrap_or(0);
                c.write_record([u.to_string(), t.to_string(), n.to_string()])?;
            }
        }
        c.flush().map_err(csv::Error::from)
    })?;
    out.write_json(
        "manifest.json",
        &RunManifest::new("aggregate", None, Some(&bytes), None),
    )?;

    println!("unit,time,records");
    let mut missing = Vec::new();
    for u in panel.units() {
        for t in times.iter() {
            let n = counts.get(&(u.clone(), t)).copied().unwrap_or(0);
            println!("{u},{t},{n}");
            if panel.outcome(u, t).is_none() {
                missing.push(format!("{u}@{t}"));
            }
        }
    }
    if !missing.is_empty() {
        eprintln!("warning: {} empty cells: {}", missing.len(), missing.join(" "));
    }
    println!("wrote {} files to {}", out.written().len(), cli.out.display());
    Ok(())
}
