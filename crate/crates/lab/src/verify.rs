//! Post-hoc verification of a run directory from its files alone.

use std::path::Path;

use crate::diagnostics::{check_bounds, BoundCheck, BoundContext};
use crate::io::{list_snapshots, read_csv, read_snapshot, IoError, ScenarioConfig};

/// Relative tolerance between the kinetic energy of a stored snapshot and
/// the CSV row at the same time. Both come from the same coefficients, so
/// only rounding separates them.
pub const SNAPSHOT_ENERGY_TOL: f64 = 1e-10;

/// Replays every bound check on the persisted CSV and compares stored
/// snapshots with the CSV rows they belong to.
pub fn verify_run(dir: &Path) -> Result<Vec<BoundCheck>, IoError> {
    let scenario = ScenarioConfig::load(&dir.join("config.json"))?;
    let law = scenario.law.build()?;
    let grid = scenario.grid()?;
    let csv_path = dir.join(&scenario.output.csv);
    let records = read_csv(&csv_path)?;
    let ctx = BoundContext { rtol: scenario.solver.rtol, law, volume: grid.volume() };
    let mut checks =
        check_bounds(&records, &ctx).map_err(|e| IoError::Corrupt { path: csv_path.clone(), reason: e.to_string() })?;
    let snapshots = list_snapshots(dir)?;
    if !snapshots.is_empty() {
        let mut worst = 0.0f64;
        for prefix in &snapshots {
            let (meta, field) = read_snapshot(prefix)?;
            let row = records.iter().find(|r| r.time == meta.time).ok_or_else(|| IoError::Corrupt {
                path: prefix.clone(),
                reason: format!("no diagnostics row at snapshot time {}", meta.time),
            })?;
            let h = field.grid.cell_volume();
            let energy = 0.5 * h * field.components.iter().flatten().map(|x| x * x).sum::<f64>();
            let scale = energy.max(row.kinetic_energy);
            if scale > 0.0 {
                worst = worst.max((energy - row.kinetic_energy).abs() / scale);
            }
        }
        checks.push(BoundCheck {
            name: "snapshot kinetic energy matches CSV (relative)".into(),
            value: worst,
            bound: SNAPSHOT_ENERGY_TOL,
            passed: worst <= SNAPSHOT_ENERGY_TOL,
        });
    }
    Ok(checks)
}

/// Plain-text table of checks.
pub fn format_checks(checks: &[BoundCheck]) -> String {
    let mut out = format!("{:<58} {:>14} {:>14} {:>14}  result\n", "check", "value", "bound", "slack");
    for c in checks {
        out += &format!(
            "{:<58} {:>14.6e} {:>14.6e} {:>14.6e}  {}\n",
            c.name,
            c.value,
            c.bound,
            c.slack(),
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    out
}
