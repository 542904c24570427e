//! Scenario configuration, diagnostics CSV and field snapshots.
//!
//! A run directory holds `config.json` (a copy of the scenario), the
//! diagnostics CSV, `run.json` (outcome and counters) and, optionally,
//! `snapshots/` with one raw little-endian `f64` file per velocity component
//! and a JSON sidecar next to each.

use std::fs;
use std::path::{Path, PathBuf};

use activated_euler_core::{ConstitutiveLaw, LawError, LawKind, LawParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::DiagnosticsRecord;
use crate::fft::Transform;
use crate::grid::Grid;
use crate::presets;
use crate::solver::{SolverConfig, Trajectory, DEFAULT_OMEGAS};
use crate::spectral::{velocity_field, SpectralError, SpectralVelocity, VectorField};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid law: {0}")]
    Law(#[from] LawError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.to_path_buf(), source }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawName {
    Sharp,
    Regularized,
    TwoActivation,
    ActivatedNavierStokes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    pub kind: LawName,
    pub m: f64,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Regularisation index of the regularised law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
}

impl LawSection {
    pub fn build(&self) -> Result<ConstitutiveLaw, IoError> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| IoError::Config(format!("law.{name} is required for law kind {:?}", self.kind)))
        };
        let params = LawParams {
            m: self.m,
            cap: self.cap.unwrap_or(f64::INFINITY),
            a: self.a.unwrap_or(0.25),
            sigma: self.sigma.unwrap_or(1.0),
            nu: self.nu.unwrap_or(0.0),
            m_lower: self.m_lower.unwrap_or(0.0),
            nu_tilde: self.nu_tilde.unwrap_or(0.0),
        };
        let kind = match self.kind {
            LawName::Sharp => {
                need(self.cap, "M")?;
                need(self.a, "a")?;
                LawKind::SharpEuler
            }
            LawName::Regularized => {
                need(self.cap, "M")?;
                need(self.a, "a")?;
                let n = self.n.ok_or_else(|| IoError::Config("law.n is required for the regularized law".into()))?;
                LawKind::RegularizedEuler { n }
            }
            LawName::TwoActivation => {
                need(self.cap, "M")?;
                need(self.a, "a")?;
                need(self.m_lower, "m_lower")?;
                need(self.nu, "nu")?;
                LawKind::TwoActivation
            }
            LawName::ActivatedNavierStokes => {
                need(self.nu, "nu")?;
                need(self.nu_tilde, "nu_tilde")?;
                LawKind::ActivatedNavierStokes { r: need(self.r, "r")? }
            }
        };
        Ok(ConstitutiveLaw::new(kind, params)?)
    }

    pub fn from_law(law: &ConstitutiveLaw) -> Self {
        let p = law.params();
        let mut out = Self {
            kind: LawName::Sharp,
            m: p.m,
            cap: Some(p.cap),
            a: Some(p.a),
            sigma: Some(p.sigma),
            nu: None,
            m_lower: None,
            nu_tilde: None,
            r: None,
            n: None,
        };
        match law.kind() {
            LawKind::SharpEuler => {}
            LawKind::RegularizedEuler { n } => {
                out.kind = LawName::Regularized;
                out.n = Some(n);
            }
            LawKind::TwoActivation => {
                out.kind = LawName::TwoActivation;
                out.nu = Some(p.nu);
                out.m_lower = Some(p.m_lower);
            }
            LawKind::ActivatedNavierStokes { r } => {
                out = Self {
                    kind: LawName::ActivatedNavierStokes,
                    m: p.m,
                    cap: None,
                    a: None,
                    sigma: None,
                    nu: Some(p.nu),
                    m_lower: None,
                    nu_tilde: Some(p.nu_tilde),
                    r: Some(r),
                    n: None,
                };
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

fn default_dt_init() -> f64 {
    1e-3
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub eps: f64,
    pub t_end: f64,
    #[serde(default = "default_dt_init")]
    pub dt_init: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub safety_margin: f64,
    #[serde(default)]
    pub snapshot_every: Option<f64>,
    /// Galerkin modes; defaults to the regularisation index of the
    /// regularised law, else the full dealiased band.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub omegas: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    TaylorGreen,
    RandomBand,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub preset: PresetName,
    /// Target `||D v0||_inf / m`; for `file`, omitted keeps the stored scale.
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// `[k_min, k_max]` in integer wavenumber units.
    #[serde(default)]
    pub band: Option<[f64; 2]>,
    /// Snapshot prefix (`.../snap_0003`) for the `file` preset.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

fn default_csv() -> String {
    "diagnostics.csv".into()
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_true")]
    pub snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, csv: default_csv(), snapshots: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub law: LawSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(file_err(path))?;
        Self::parse(&text).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialise")
    }

    pub fn grid(&self) -> Result<Grid, IoError> {
        Ok(Grid::new(self.grid.d, self.grid.l, self.grid.n)?)
    }

    /// Validated solver configuration.
    pub fn solver_config(&self) -> Result<SolverConfig, IoError> {
        let law = self.law.build()?;
        let grid = self.grid()?;
        let s = &self.solver;
        let mut cfg = SolverConfig {
            law,
            eps: s.eps,
            n: 0,
            grid,
            t_end: s.t_end,
            dt_init: s.dt_init,
            rtol: s.rtol,
            atol: s.atol,
            safety_margin: s.safety_margin,
            snapshot_every: s.snapshot_every,
            omegas: s.omegas.clone().unwrap_or_else(|| DEFAULT_OMEGAS.to_vec()),
        };
        cfg.n = match (s.n, law.kind()) {
            (Some(n), _) => n,
            (None, LawKind::RegularizedEuler { n }) => (n as usize).min(cfg.capacity()),
            (None, _) => cfg.capacity(),
        };
        cfg.validate().map_err(|e| IoError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// The initial velocity described by the `initial` section.
    pub fn initial_velocity(&self) -> Result<SpectralVelocity, IoError> {
        let grid = self.grid()?;
        let m = self.law.m;
        let init = &self.initial;
        let strain = |amp: Option<f64>| {
            amp.map(|a| a * m).ok_or_else(|| IoError::Config("initial.amplitude is required".into()))
        };
        Ok(match init.preset {
            PresetName::TaylorGreen => presets::taylor_green(&grid, strain(init.amplitude)?)?,
            PresetName::RandomBand => {
                let [lo, hi] = init.band.unwrap_or([1.0, 4.0]);
                if !(lo >= 0.0 && hi >= lo) {
                    return Err(IoError::Config(format!("initial.band = [{lo}, {hi}] is not an interval")));
                }
                presets::random_band(&grid, lo, hi, init.seed, strain(init.amplitude)?)?
            }
            PresetName::File => {
                let path = init
                    .path
                    .as_ref()
                    .ok_or_else(|| IoError::Config("initial.path is required for the file preset".into()))?;
                let (meta, field) = read_snapshot(path)?;
                if field.grid != grid {
                    return Err(IoError::Config(format!(
                        "snapshot grid d = {}, L = {}, N = {} differs from the configured grid",
                        meta.d, meta.l, meta.n
                    )));
                }
                presets::from_field(&field, init.amplitude.map(|a| a * m))?
            }
        })
    }
}

/// One diagnostics CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub time: f64,
    pub kinetic_energy: f64,
    #[serde(rename = "dissipation_S")]
    pub dissipation_s: f64,
    pub dissipation_eps: f64,
    #[serde(rename = "Dv_max")]
    pub dv_max: f64,
    #[serde(rename = "stress_L1")]
    pub stress_l1: f64,
    #[serde(rename = "stress_L2a")]
    pub stress_l2a: f64,
    pub activation_fraction: f64,
}

pub const CSV_HEADER: &str =
    "time,kinetic_energy,dissipation_S,dissipation_eps,Dv_max,stress_L1,stress_L2a,activation_fraction";

impl From<&DiagnosticsRecord> for CsvRow {
    fn from(r: &DiagnosticsRecord) -> Self {
        Self {
            time: r.time,
            kinetic_energy: r.kinetic_energy,
            dissipation_s: r.dissipation_s,
            dissipation_eps: r.dissipation_eps,
            dv_max: r.dv_max,
            stress_l1: r.stress_l1,
            stress_l2a: r.stress_l2a,
            activation_fraction: r.activation_fraction,
        }
    }
}

impl From<CsvRow> for DiagnosticsRecord {
    fn from(r: CsvRow) -> Self {
        Self {
            time: r.time,
            kinetic_energy: r.kinetic_energy,
            dissipation_s: r.dissipation_s,
            dissipation_eps: r.dissipation_eps,
            dv_max: r.dv_max,
            stress_l1: r.stress_l1,
            stress_l2a: r.stress_l2a,
            activation_fraction: r.activation_fraction,
            ..Default::default()
        }
    }
}

pub fn write_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<(), IoError> {
    let csv_err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in records {
        w.serialize(CsvRow::from(r)).map_err(csv_err)?;
    }
    w.flush().map_err(file_err(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>, IoError> {
    let csv_err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(IoError::Corrupt {
            path: path.to_path_buf(),
            reason: format!("unexpected header `{}`", header.join(",")),
        });
    }
    let mut out = Vec::new();
    for row in r.deserialize::<CsvRow>() {
        out.push(row.map_err(csv_err)?.into());
    }
    if out.is_empty() {
        return Err(IoError::Corrupt { path: path.to_path_buf(), reason: "no rows".into() });
    }
    Ok(out)
}

/// Sidecar of one snapshot component file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub time: f64,
    pub component: usize,
    pub law: LawSection,
}

/// `{prefix}_v{component}.bin` and `.json`.
pub fn snapshot_paths(prefix: &Path, component: usize) -> (PathBuf, PathBuf) {
    let base = prefix.as_os_str().to_string_lossy();
    (PathBuf::from(format!("{base}_v{component}.bin")), PathBuf::from(format!("{base}_v{component}.json")))
}

pub fn write_snapshot(prefix: &Path, time: f64, field: &VectorField, law: &ConstitutiveLaw) -> Result<(), IoError> {
    let g = field.grid;
    for (component, data) in field.components.iter().enumerate() {
        let (bin, json) = snapshot_paths(prefix, component);
        let bytes: Vec<u8> = data.iter().flat_map(|x| x.to_le_bytes()).collect();
        fs::write(&bin, bytes).map_err(file_err(&bin))?;
        let meta =
            SnapshotMeta { d: g.d(), l: g.length(), n: g.size(), time, component, law: LawSection::from_law(law) };
        let text = serde_json::to_string_pretty(&meta).expect("metadata serialises");
        fs::write(&json, text).map_err(file_err(&json))?;
    }
    Ok(())
}

/// Reads every component of a snapshot.
pub fn read_snapshot(prefix: &Path) -> Result<(SnapshotMeta, VectorField), IoError> {
    let read_meta = |json: &Path| -> Result<SnapshotMeta, IoError> {
        let text = fs::read_to_string(json).map_err(file_err(json))?;
        serde_json::from_str(&text).map_err(|source| IoError::Json { path: json.to_path_buf(), source })
    };
    let (_, json0) = snapshot_paths(prefix, 0);
    let meta = read_meta(&json0)?;
    let grid = Grid::new(meta.d, meta.l, meta.n)
        .map_err(|e| IoError::Corrupt { path: json0.clone(), reason: e.to_string() })?;
    let mut components = Vec::with_capacity(meta.d);
    for component in 0..meta.d {
        let (bin, json) = snapshot_paths(prefix, component);
        let m = read_meta(&json)?;
        if m.component != component || m.time != meta.time || (m.d, m.l, m.n) != (meta.d, meta.l, meta.n) {
            return Err(IoError::Corrupt { path: json, reason: "sidecar disagrees with component 0".into() });
        }
        let bytes = fs::read(&bin).map_err(file_err(&bin))?;
        if bytes.len() != 8 * grid.points() {
            return Err(IoError::Corrupt {
                path: bin,
                reason: format!("{} bytes, expected {}", bytes.len(), 8 * grid.points()),
            });
        }
        components.push(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect());
    }
    Ok((meta, VectorField { grid, components }))
}

/// Snapshot prefixes in a run directory, in time order.
pub fn list_snapshots(dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    let snap_dir = dir.join("snapshots");
    if !snap_dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut prefixes: Vec<PathBuf> = fs::read_dir(&snap_dir)
        .map_err(file_err(&snap_dir))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_suffix("_v0.json").map(|p| snap_dir.join(p))
        })
        .collect();
    prefixes.sort();
    Ok(prefixes)
}

/// Outcome summary stored as `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub completed: bool,
    pub failure: Option<String>,
    pub final_time: f64,
    pub modes: usize,
    pub band: usize,
    pub accepted_steps: usize,
    pub rejected_error: usize,
    pub rejected_domain: usize,
    pub rejected_guard: usize,
    pub rhs_evaluations: u64,
    pub dv0_max: f64,
    pub dv0_eps_max: f64,
    pub dvn_max: f64,
    pub truncation_loss: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialise");
    fs::write(path, text + "\n").map_err(file_err(path))
}

pub fn create_dir(dir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(file_err(dir))
}

/// Writes config copy, CSV, snapshots and summary of a finished (or
/// failed) trajectory.
pub fn write_run(dir: &Path, scenario: &ScenarioConfig, traj: &Trajectory) -> Result<(), IoError> {
    create_dir(dir)?;
    let cfg_path = dir.join("config.json");
    fs::write(&cfg_path, scenario.to_json() + "\n").map_err(file_err(&cfg_path))?;
    write_csv(&dir.join(&scenario.output.csv), &traj.records)?;
    if scenario.output.snapshots {
        let snap_dir = dir.join("snapshots");
        create_dir(&snap_dir)?;
        let mut t = Transform::new(&traj.config.grid);
        for (i, snap) in traj.snapshots.iter().enumerate() {
            let v = SpectralVelocity::new(traj.basis.clone(), snap.c.clone())?;
            let field = velocity_field(&mut t, &v.spectrum());
            write_snapshot(&snap_dir.join(format!("snap_{i:04}")), snap.time, &field, &traj.config.law)?;
        }
    }
    let summary = RunSummary {
        completed: traj.completed(),
        failure: traj.failure.as_ref().map(|e| e.to_string()),
        final_time: traj.final_time(),
        modes: traj.basis.len(),
        band: traj.basis.band(),
        accepted_steps: traj.stats.accepted,
        rejected_error: traj.stats.rejected_error,
        rejected_domain: traj.stats.rejected_domain,
        rejected_guard: traj.stats.rejected_guard,
        rhs_evaluations: traj.stats.evaluations,
        dv0_max: traj.initial.dv0_max,
        dv0_eps_max: traj.initial.dv0_eps_max,
        dvn_max: traj.initial.dvn_max,
        truncation_loss: traj.initial.truncation_loss,
    };
    write_json(&dir.join("run.json"), &summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "law": {"kind": "regularized", "m": 1.0, "M": 4.0, "a": 0.25, "n": 10},
        "grid": {"d": 2, "L": 6.283185307179586, "N": 16},
        "solver": {"eps": 0.0, "t_end": 0.1},
        "initial": {"preset": "taylor_green", "amplitude": 0.5}
    }"#;

    #[test]
    fn config_round_trip_and_defaults() {
        let cfg = ScenarioConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.output, OutputSection::default());
        let back = ScenarioConfig::parse(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let sc = cfg.solver_config().unwrap();
        assert_eq!(sc.n, 10);
        assert_eq!(sc.rtol, 1e-8);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = SAMPLE.replace("\"t_end\"", "\"t_final\": 1.0, \"t_end\"");
        assert!(ScenarioConfig::parse(&bad).is_err());
    }

    #[test]
    fn activation_ordering_is_a_config_error() {
        let bad = SAMPLE.replace("\"m\": 1.0", "\"m\": 2.5");
        let cfg = ScenarioConfig::parse(&bad).unwrap();
        let err = cfg.solver_config().unwrap_err().to_string();
        assert!(err.contains("0 < m < M - 2"), "{err}");
    }
}
