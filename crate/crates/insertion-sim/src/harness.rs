//! Config-driven batch experiment runner: offset-sign combinations crossed
//! with axis-lock ablation rows, repeated with seeded jitter, reported as
//! fixed-width success matrices plus CSV/JSON artifacts on disk.

use crate::calibration::Calibration;
use crate::catalog::Catalog;
use crate::error::ExperimentError;
use crate::simulator::{
    insertability_limits, run_trial, InsertabilityLimits, TrialSpec, TrialStatus,
};
use crate::trajectory::{GraspOrientation, PressController, SpiralDirection, SpiralParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// The eight offset-sign combinations in fixed column order: signs of the
/// x, y, and yaw offsets.
pub const SIGN_COMBOS: [[f64; 3]; 8] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0],
    [-1.0, 1.0, 1.0],
    [-1.0, -1.0, 1.0],
    [1.0, 1.0, -1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, -1.0],
];

pub const SIGN_LABELS: [&str; 8] = ["+++", "+-+", "-++", "--+", "++-", "+--", "-+-", "---"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Square,
    Triangle,
    SquareLateral,
    WellplateLid,
    PetriLid,
    PlungeSweep,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Square,
        Scenario::Triangle,
        Scenario::SquareLateral,
        Scenario::WellplateLid,
        Scenario::PetriLid,
        Scenario::PlungeSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Square => "square",
            Scenario::Triangle => "triangle",
            Scenario::SquareLateral => "square-lateral",
            Scenario::WellplateLid => "wellplate-lid",
            Scenario::PetriLid => "petri-lid",
            Scenario::PlungeSweep => "plunge-sweep",
        }
    }
}

/// One matrix row: an axis-lock pattern evaluated at an offset magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowSpec {
    /// Lock flags in axis order x, y, z, yaw (true = locked rigid).
    pub locks: [bool; 4],
    /// Offset magnitudes: mm, mm, degrees.
    pub magnitudes: [f64; 3],
}

/// Everything needed to run one scenario's trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioPreset {
    pub object: String,
    pub site: String,
    pub spiral: SpiralParams,
    pub press: PressController,
    pub orientation: GraspOrientation,
    pub rows: Vec<RowSpec>,
}

const ALL_ENABLED: [bool; 4] = [false, false, false, false];
const X_LOCKED: [bool; 4] = [true, false, false, false];
const Y_LOCKED: [bool; 4] = [false, true, false, false];
const Z_LOCKED: [bool; 4] = [false, false, true, false];
const YAW_LOCKED: [bool; 4] = [false, false, false, true];
const X_YAW_LOCKED: [bool; 4] = [true, false, false, true];
const ALL_LOCKED: [bool; 4] = [true, true, true, true];
const ONLY_Z_FREE: [bool; 4] = [true, true, false, true];

fn spiral(r_start: f64, r_end: f64, laps: u32, direction: SpiralDirection) -> SpiralParams {
    SpiralParams {
        r_start,
        r_end,
        laps,
        duration: 1.0,
        x_offset: 0.0,
        y_offset: 0.0,
        direction,
        z_ref: 20.0,
    }
}

impl Scenario {
    /// Reference parameters for this scenario: spiral shape, pressing force,
    /// offset magnitudes, and the ablation rows explored for it.
    pub fn preset(self) -> Option<ScenarioPreset> {
        let preset = match self {
            Scenario::Square => ScenarioPreset {
                object: "square_prism".into(),
                site: "square_base".into(),
                spiral: spiral(5.0, 18.0, 12, SpiralDirection::Ccw),
                press: PressController::new(11.0),
                orientation: GraspOrientation::Vertical,
                rows: [
                    ALL_ENABLED,
                    X_LOCKED,
                    YAW_LOCKED,
                    X_YAW_LOCKED,
                    Y_LOCKED,
                    Z_LOCKED,
                    ALL_LOCKED,
                ]
                .into_iter()
                .map(|locks| RowSpec {
                    locks,
                    magnitudes: [4.0, 4.0, 8.0],
                })
                .collect(),
            },
            Scenario::Triangle => ScenarioPreset {
                object: "triangular_prism".into(),
                site: "triangular_base".into(),
                spiral: spiral(7.0, 26.0, 8, SpiralDirection::Ccw),
                press: PressController::new(12.0),
                orientation: GraspOrientation::Vertical,
                rows: [ALL_ENABLED, YAW_LOCKED, X_LOCKED, X_YAW_LOCKED]
                    .into_iter()
                    .map(|locks| RowSpec {
                        locks,
                        magnitudes: [4.0, 4.0, 15.0],
                    })
                    .collect(),
            },
            Scenario::SquareLateral => ScenarioPreset {
                object: "square_prism".into(),
                site: "square_base".into(),
                spiral: spiral(5.0, 18.0, 12, SpiralDirection::Cw),
                press: PressController::new(11.0),
                orientation: GraspOrientation::Lateral,
                rows: [ALL_ENABLED, YAW_LOCKED, X_LOCKED, X_YAW_LOCKED]
                    .into_iter()
                    .map(|locks| RowSpec {
                        locks,
                        magnitudes: [4.0, 4.0, 8.0],
                    })
                    .collect(),
            },
            Scenario::WellplateLid => {
                let mut rows: Vec<RowSpec> = [2.0, 4.0, 6.0]
                    .into_iter()
                    .map(|m| RowSpec {
                        locks: ALL_ENABLED,
                        magnitudes: [m, m, m],
                    })
                    .collect();
                rows.extend(
                    [
                        Y_LOCKED,
                        Z_LOCKED,
                        X_LOCKED,
                        YAW_LOCKED,
                        X_YAW_LOCKED,
                        ONLY_Z_FREE,
                    ]
                    .into_iter()
                    .map(|locks| RowSpec {
                        locks,
                        magnitudes: [6.0, 6.0, 6.0],
                    }),
                );
                ScenarioPreset {
                    object: "wellplate_lid".into(),
                    site: "wellplate".into(),
                    spiral: spiral(7.0, 16.0, 8, SpiralDirection::Ccw),
                    press: PressController::new(8.0),
                    orientation: GraspOrientation::Vertical,
                    rows,
                }
            }
            Scenario::PetriLid => ScenarioPreset {
                object: "petri_lid".into(),
                site: "petri_dish".into(),
                spiral: spiral(7.0, 16.0, 8, SpiralDirection::Ccw),
                press: PressController::new(8.0),
                orientation: GraspOrientation::Vertical,
                rows: vec![RowSpec {
                    locks: ALL_ENABLED,
                    magnitudes: [6.0, 6.0, 6.0],
                }],
            },
            Scenario::PlungeSweep => return None,
        };
        Some(preset)
    }
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

fn default_repetitions() -> usize {
    5
}

fn default_jitter() -> [f64; 2] {
    [0.25, 0.5]
}

fn default_steps() -> usize {
    2000
}

/// Batch experiment description. Loadable from TOML; every field except the
/// scenario has a scenario-derived or documented default.
///
/// Repetitions only differ when jitter is nonzero: the simulator is
/// deterministic, so repeated cells are perturbed draws around the nominal
/// offsets, seeded per (seed, row, cell, repetition).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Matrix rows; defaults to the scenario preset rows.
    pub rows: Option<Vec<RowSpec>>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Normal jitter std-dev on the initial offsets: mm, degrees.
    #[serde(default = "default_jitter")]
    pub jitter: [f64; 2],
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub write_traces: bool,
    /// Worker threads; `None` uses the default pool.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        ExperimentConfig {
            scenario,
            rows: None,
            repetitions: default_repetitions(),
            jitter: default_jitter(),
            seed: 0,
            output_dir: None,
            write_traces: false,
            workers: None,
            steps: default_steps(),
        }
    }

    /// Deterministic single-shot variant: one repetition, no jitter.
    pub fn deterministic(scenario: Scenario) -> Self {
        ExperimentConfig {
            repetitions: 1,
            jitter: [0.0, 0.0],
            ..Self::new(scenario)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        Ok(toml::from_str(text)?)
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.repetitions < 1 {
            return Err(ExperimentError::InvalidConfig(
                "repetitions must be at least 1".into(),
            ));
        }
        if let Some(rows) = &self.rows {
            if rows.is_empty() {
                return Err(ExperimentError::InvalidConfig(
                    "rows must be non-empty".into(),
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Success matrix
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CellResult {
    pub successes: u32,
    pub repetitions: u32,
    /// Trials that ended in a solver failure (tallied separately; they also
    /// count as failures in `successes`).
    pub numerical_failures: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub locks: [bool; 4],
    pub magnitudes: [f64; 3],
    pub cells: [CellResult; 8],
}

impl MatrixRow {
    pub fn lock_label(&self) -> String {
        self.locks
            .iter()
            .map(|locked| if *locked { "-" } else { "\u{2713}" })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessMatrix {
    pub scenario: String,
    pub rows: Vec<MatrixRow>,
}

impl SuccessMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("lock_x,lock_y,lock_z,lock_yaw,mag_x,mag_y,mag_yaw");
        for label in SIGN_LABELS {
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        for row in &self.rows {
            let locks: Vec<&str> = row
                .locks
                .iter()
                .map(|l| if *l { "locked" } else { "free" })
                .collect();
            let _ = write!(
                out,
                "{},{},{},{},{},{},{}",
                locks[0],
                locks[1],
                locks[2],
                locks[3],
                row.magnitudes[0],
                row.magnitudes[1],
                row.magnitudes[2]
            );
            for cell in &row.cells {
                let _ = write!(out, ",{}/{}", cell.successes, cell.repetitions);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, ExperimentError> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 15 {
                return Err(ExperimentError::InvalidConfig(format!(
                    "matrix CSV line {i} has {} fields",
                    fields.len()
                )));
            }
            let mut locks = [false; 4];
            for (k, f) in fields[..4].iter().enumerate() {
                locks[k] = match *f {
                    "locked" => true,
                    "free" => false,
                    other => {
                        return Err(ExperimentError::InvalidConfig(format!(
                            "bad lock flag '{other}'"
                        )))
                    }
                };
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| {
                    ExperimentError::InvalidConfig(format!("bad number '{s}': {e}"))
                })
            };
            let magnitudes = [parse(fields[4])?, parse(fields[5])?, parse(fields[6])?];
            let mut cells = [CellResult::default(); 8];
            for (k, f) in fields[7..].iter().enumerate() {
                let (a, b) = f.split_once('/').ok_or_else(|| {
                    ExperimentError::InvalidConfig(format!("bad cell '{f}'"))
                })?;
                cells[k] = CellResult {
                    successes: a.parse().map_err(|_| {
                        ExperimentError::InvalidConfig(format!("bad cell '{f}'"))
                    })?,
                    repetitions: b.parse().map_err(|_| {
                        ExperimentError::InvalidConfig(format!("bad cell '{f}'"))
                    })?,
                    numerical_failures: 0,
                };
            }
            rows.push(MatrixRow {
                locks,
                magnitudes,
                cells,
            });
        }
        Ok(SuccessMatrix {
            scenario: String::new(),
            rows,
        })
    }
}

/// Fixed-width text rendering: one row per lock pattern, the eight sign
/// columns in canonical order.
pub fn render_matrix(m: &SuccessMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", m.scenario);
    let _ = writeln!(
        out,
        "{:<12} {:<14} {}",
        "x y z yaw",
        "offsets",
        SIGN_LABELS
            .iter()
            .map(|l| format!("{l:>5}"))
            .collect::<String>()
    );
    for row in &m.rows {
        let mags = format!(
            "{},{},{}",
            row.magnitudes[0], row.magnitudes[1], row.magnitudes[2]
        );
        let cells: String = row
            .cells
            .iter()
            .map(|c| format!("{:>5}", format!("{}/{}", c.successes, c.repetitions)))
            .collect();
        let _ = writeln!(out, "{:<12} {:<14} {}", row.lock_label(), mags, cells);
    }
    out
}

// ---------------------------------------------------------------------------
// Experiment execution
// ---------------------------------------------------------------------------

/// One trial's summary for the JSON artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSummary {
    pub row: usize,
    pub cell: usize,
    pub combo: String,
    pub repetition: usize,
    pub seed: u64,
    pub offsets: [f64; 3],
    pub locks: [bool; 4],
    pub status: TrialStatus,
    pub success_time: Option<f64>,
    pub max_force: f64,
    pub steps_recorded: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub matrix: Option<SuccessMatrix>,
    pub limits: Option<Vec<(String, InsertabilityLimits)>>,
    pub summaries: Vec<TrialSummary>,
    /// Total trials per terminal status.
    pub status_totals: BTreeMap<String, u32>,
}

impl ExperimentReport {
    pub fn total_trials(&self) -> u32 {
        self.status_totals.values().sum()
    }
}

/// Derives a per-trial seed from the experiment seed and the trial's matrix
/// coordinates (splitmix64 over the packed index).
fn trial_seed(base: u64, row: usize, cell: usize, rep: usize) -> u64 {
    let mut z = base
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(((row as u64) << 32) ^ ((cell as u64) << 16) ^ rep as u64)
        .wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn status_name(status: TrialStatus) -> &'static str {
    match status {
        TrialStatus::Success => "success",
        TrialStatus::NoInsertion => "no-insertion",
        TrialStatus::Dropped => "dropped",
        TrialStatus::ForceAbort => "force-abort",
        TrialStatus::NumericalFailure => "numerical-failure",
    }
}

/// Runs the full matrix (rows x 8 sign combinations x repetitions), writes
/// artifacts when an output directory is configured, and returns the report.
/// Trials run in parallel; results are keyed by index so worker count never
/// changes the outcome.
pub fn run_experiment(
    cal: &Calibration,
    catalog: &Catalog,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;

    if cfg.scenario == Scenario::PlungeSweep {
        let report = run_plunge_sweep(cal, catalog)?;
        if let Some(dir) = &cfg.output_dir {
            write_limits_artifacts(dir, &report)?;
        }
        return Ok(report);
    }

    let preset = cfg.scenario.preset().expect("matrix scenario has preset");
    let rows = cfg.rows.clone().unwrap_or_else(|| preset.rows.clone());
    if rows.is_empty() {
        return Err(ExperimentError::InvalidConfig("rows must be non-empty".into()));
    }

    let mut jobs = Vec::new();
    for (ri, row) in rows.iter().enumerate() {
        for (ci, signs) in SIGN_COMBOS.iter().enumerate() {
            for rep in 0..cfg.repetitions {
                let offsets = [
                    signs[0] * row.magnitudes[0],
                    signs[1] * row.magnitudes[1],
                    signs[2] * row.magnitudes[2],
                ];
                let spec = TrialSpec {
                    object: preset.object.clone(),
                    site: preset.site.clone(),
                    offsets,
                    axis_locks: row.locks,
                    spiral: preset.spiral,
                    press: preset.press,
                    orientation: preset.orientation,
                    seed: trial_seed(cfg.seed, ri, ci, rep),
                    jitter: cfg.jitter,
                    steps: cfg.steps,
                };
                jobs.push((ri, ci, rep, spec));
            }
        }
    }

    let run_all = || -> Result<Vec<_>, ExperimentError> {
        jobs.par_iter()
            .map(|(ri, ci, rep, spec)| {
                let outcome = run_trial(cal, catalog, spec)?;
                Ok((*ri, *ci, *rep, spec.clone(), outcome))
            })
            .collect()
    };
    let results = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| ExperimentError::InvalidConfig(format!("thread pool: {e}")))?
            .install(run_all),
        None => run_all(),
    }?;

    let mut matrix = SuccessMatrix {
        scenario: cfg.scenario.name().to_string(),
        rows: rows
            .iter()
            .map(|r| MatrixRow {
                locks: r.locks,
                magnitudes: r.magnitudes,
                cells: [CellResult::default(); 8],
            })
            .collect(),
    };
    let mut summaries = Vec::with_capacity(results.len());
    let mut status_totals: BTreeMap<String, u32> = BTreeMap::new();

    for (ri, ci, rep, spec, outcome) in &results {
        let cell = &mut matrix.rows[*ri].cells[*ci];
        cell.repetitions += 1;
        if outcome.succeeded() {
            cell.successes += 1;
        }
        if outcome.status == TrialStatus::NumericalFailure {
            cell.numerical_failures += 1;
        }
        *status_totals
            .entry(status_name(outcome.status).to_string())
            .or_default() += 1;
        summaries.push(TrialSummary {
            row: *ri,
            cell: *ci,
            combo: SIGN_LABELS[*ci].to_string(),
            repetition: *rep,
            seed: spec.seed,
            offsets: spec.offsets,
            locks: spec.axis_locks,
            status: outcome.status,
            success_time: outcome.success_time,
            max_force: outcome.max_force,
            steps_recorded: outcome.trace.len(),
        });
    }

    let report = ExperimentReport {
        matrix: Some(matrix),
        limits: None,
        summaries,
        status_totals,
    };

    if let Some(dir) = &cfg.output_dir {
        write_matrix_artifacts(dir, cfg, &report, &results)?;
    }
    Ok(report)
}

/// Insertion-limit sweep over the cataloged task pairs.
pub fn run_plunge_sweep(
    cal: &Calibration,
    catalog: &Catalog,
) -> Result<ExperimentReport, ExperimentError> {
    let presses = [
        ("square", 11.0),
        ("triangle", 12.0),
        ("wellplate_lid", 8.0),
        ("petri_lid", 8.0),
    ];
    let limits: Vec<(String, InsertabilityLimits)> = presses
        .par_iter()
        .map(|(pair, force)| {
            let (object, site) = catalog.pair(pair).map_err(crate::error::TrialError::from)?;
            let lims = insertability_limits(cal, object, site, &PressController::new(*force));
            Ok::<_, ExperimentError>((pair.to_string(), lims))
        })
        .collect::<Result<_, _>>()?;
    Ok(ExperimentReport {
        matrix: None,
        limits: Some(limits),
        summaries: Vec::new(),
        status_totals: BTreeMap::new(),
    })
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

fn io_err(path: &Path, source: std::io::Error) -> ExperimentError {
    ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_matrix_artifacts(
    dir: &Path,
    cfg: &ExperimentConfig,
    report: &ExperimentReport,
    results: &[(usize, usize, usize, TrialSpec, crate::simulator::TrialOutcome)],
) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let matrix = report.matrix.as_ref().expect("matrix scenario");

    let text_path = dir.join("matrix.txt");
    fs::write(&text_path, render_matrix(matrix)).map_err(|e| io_err(&text_path, e))?;

    let csv_path = dir.join("matrix.csv");
    fs::write(&csv_path, matrix.to_csv()).map_err(|e| io_err(&csv_path, e))?;

    let summaries_path = dir.join("summaries.json");
    let json = serde_json::to_string_pretty(&report.summaries).expect("serializable");
    fs::write(&summaries_path, json).map_err(|e| io_err(&summaries_path, e))?;

    if cfg.write_traces {
        let traces = dir.join("traces");
        fs::create_dir_all(&traces).map_err(|e| io_err(&traces, e))?;
        for (ri, ci, rep, _spec, outcome) in results {
            let name = format!("trial_r{ri}_c{ci}_k{rep}");
            let csv = traces.join(format!("{name}.csv"));
            let mut buf = Vec::new();
            outcome.trace.write_csv(&mut buf).map_err(|e| io_err(&csv, e))?;
            fs::write(&csv, buf).map_err(|e| io_err(&csv, e))?;
            let json_path = traces.join(format!("{name}.json"));
            let summary = serde_json::json!({
                "status": status_name(outcome.status),
                "success_time": outcome.success_time,
                "max_force": outcome.max_force,
                "steps": outcome.trace.len(),
            });
            fs::write(&json_path, serde_json::to_string_pretty(&summary).unwrap())
                .map_err(|e| io_err(&json_path, e))?;
        }
    }
    Ok(())
}

fn write_limits_artifacts(dir: &Path, report: &ExperimentReport) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let limits = report.limits.as_ref().expect("sweep report");
    let mut text = String::from("pair,geometric_deg,compliant_deg\n");
    for (name, lims) in limits {
        let _ = writeln!(text, "{name},{},{}", lims.geometric_deg, lims.compliant_deg);
    }
    let path = dir.join("limits.csv");
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(())
}
