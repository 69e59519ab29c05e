//! Run reports: structured per-policy results with built-in expectations,
//! serialized as versioned JSON or as one CSV file per table.
//!
//! Reports contain no timestamps and only ordered containers, so the same
//! (scenario, seed) pair always serializes to identical bytes.

use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::screen::IntensityMap;
use crate::state::Ket;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: ScenarioEcho,
    pub policies: BTreeMap<String, PolicyReport>,
    pub expectations: Vec<Expectation>,
    pub all_passed: bool,
}

impl RunReport {
    pub fn new(
        scenario: ScenarioEcho,
        policies: BTreeMap<String, PolicyReport>,
        expectations: Vec<Expectation>,
    ) -> Self {
        let all_passed = expectations.iter().all(|e| e.pass);
        Self {
            schema_version: SCHEMA_VERSION,
            scenario,
            policies,
            expectations,
            all_passed,
        }
    }

    pub fn to_json(&self) -> String {
        let mut json =
            serde_json::to_string_pretty(self).expect("report serialization is infallible");
        json.push('\n');
        json
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioEcho {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    pub seed: u64,
}

/// One numeric check with its tolerance; `pass` is |actual − expected| ≤
/// tolerance, so a zero tolerance demands exact equality.
#[derive(Clone, Debug, Serialize)]
pub struct Expectation {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Expectation {
    pub fn check(name: impl Into<String>, expected: f64, actual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            expected,
            actual,
            tolerance,
            pass: (actual - expected).abs() <= tolerance,
        }
    }

    /// Boolean check encoded as 1/0 with zero tolerance.
    pub fn flag(name: impl Into<String>, expected: bool, actual: bool) -> Self {
        Self::check(name, f64::from(expected), f64::from(actual), 0.0)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PolicyReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginals: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditional_states: Option<BTreeMap<String, Vec<KetTerm>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrodiction: Option<RetrodictionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity: Option<BTreeMap<String, IntensityTable>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<BTreeMap<String, FrequencyStat>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<BranchRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub martingale: Option<Vec<MartingaleRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatch_curve: Option<Vec<MismatchRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instability: Option<InstabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plate_samples: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub scalars: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KetTerm {
    pub label: String,
    pub re: f64,
    pub im: f64,
}

pub fn ket_terms(ket: &Ket) -> Vec<KetTerm> {
    ket.terms()
        .map(|(label, amp)| KetTerm {
            label: label.to_string(),
            re: amp.re,
            im: amp.im,
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RetrodictionSummary {
    pub forced: BTreeMap<String, Vec<String>>,
    pub joint_required: Vec<String>,
    pub missing_from_initial: Vec<String>,
    pub contradiction: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IntensityTable {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility: Option<f64>,
    pub positions: Vec<f64>,
    pub values: Vec<f64>,
}

impl IntensityTable {
    pub fn from_map(map: &IntensityMap) -> Self {
        Self {
            mean: map.mean(),
            min: map.min(),
            max: map.max(),
            visibility: crate::screen::visibility(map).ok(),
            positions: map.positions.clone(),
            values: map.values.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FrequencyStat {
    pub count: u64,
    pub trials: u64,
    pub frequency: f64,
    /// Binomial standard error of the measured frequency.
    pub stderr: f64,
}

impl FrequencyStat {
    pub fn new(count: u64, trials: u64) -> Self {
        let frequency = count as f64 / trials as f64;
        Self {
            count,
            trials,
            frequency,
            stderr: (frequency * (1.0 - frequency) / trials as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchRow {
    pub label: String,
    pub weight: f64,
    pub perturbed_a: u64,
    pub perturbed_b: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleRow {
    pub step: usize,
    pub eigenstate: usize,
    pub mean: f64,
    pub sem: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MismatchRow {
    pub delay: f64,
    pub fraction: f64,
    pub stderr: f64,
    /// Closed-form parity law (1 − e^{−2·rate·delay})/2.
    pub expected: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstabilityReport {
    pub adversarial_increment: f64,
    pub adversarial_diagnosis: String,
    pub baseline_steps: u64,
    pub perturbation_scale: f64,
    pub perturbation_step_index: u64,
    pub perturbation_diagnosis: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmitFormat {
    Json,
    Csv,
}

impl EmitFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(EmitFormat::Json),
            "csv" => Ok(EmitFormat::Csv),
            other => Err(Error::InvalidParameter(format!(
                "unknown format `{other}` (expected json or csv)"
            ))),
        }
    }
}

/// Writes the report under `dir`: a single `report.json`, or one CSV file
/// per table. Returns the paths written.
pub fn emit(report: &RunReport, format: EmitFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match format {
        EmitFormat::Json => {
            let path = dir.join("report.json");
            std::fs::write(&path, report.to_json()).map_err(|e| Error::io(&path, e))?;
            Ok(vec![path])
        }
        EmitFormat::Csv => emit_csv(report, dir),
    }
}

/// 17 significant digits: enough to reconstruct every f64 exactly.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(
    dir: &Path,
    name: &str,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    writeln!(file, "{header}").map_err(|e| Error::io(&path, e))?;
    for row in rows {
        writeln!(file, "{row}").map_err(|e| Error::io(&path, e))?;
    }
    Ok(path)
}

fn emit_csv(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();

    // Outcome probabilities are state-level and identical across policies;
    // emit the first table present.
    if let Some(probs) = report
        .policies
        .values()
        .find_map(|p| p.probabilities.as_ref())
    {
        written.push(write_csv(
            dir,
            "probabilities.csv",
            "outcome,probability",
            probs.iter().map(|(k, v)| format!("{k},{}", fmt(*v))),
        )?);
    }

    for (policy, section) in &report.policies {
        if let Some(maps) = &section.intensity {
            for (key, table) in maps {
                written.push(write_csv(
                    dir,
                    &format!("intensity_{policy}_{key}.csv"),
                    "x,intensity",
                    table
                        .positions
                        .iter()
                        .zip(&table.values)
                        .map(|(x, v)| format!("{},{}", fmt(*x), fmt(*v))),
                )?);
            }
        }
        if let Some(samples) = &section.plate_samples {
            for (key, xs) in samples {
                written.push(write_csv(
                    dir,
                    &format!("samples_{policy}_{key}.csv"),
                    "x",
                    xs.iter().map(|x| fmt(*x)),
                )?);
            }
        }
    }

    let frequency_rows: Vec<String> = report
        .policies
        .iter()
        .flat_map(|(policy, section)| {
            section.frequencies.iter().flat_map(move |freqs| {
                freqs.iter().map(move |(label, stat)| {
                    format!(
                        "{policy},{label},{},{},{},{}",
                        stat.count,
                        stat.trials,
                        fmt(stat.frequency),
                        fmt(stat.stderr)
                    )
                })
            })
        })
        .collect();
    if !frequency_rows.is_empty() {
        written.push(write_csv(
            dir,
            "frequencies.csv",
            "policy,label,count,trials,frequency,stderr",
            frequency_rows,
        )?);
    }

    if let Some(rows) = report
        .policies
        .values()
        .find_map(|p| p.martingale.as_ref())
    {
        written.push(write_csv(
            dir,
            "martingale.csv",
            "step,eigenstate,mean,sem",
            rows.iter().map(|r| {
                format!("{},{},{},{}", r.step, r.eigenstate, fmt(r.mean), fmt(r.sem))
            }),
        )?);
    }

    if let Some(rows) = report
        .policies
        .values()
        .find_map(|p| p.mismatch_curve.as_ref())
    {
        written.push(write_csv(
            dir,
            "mismatch.csv",
            "delay,fraction,stderr,expected",
            rows.iter().map(|r| {
                format!(
                    "{},{},{},{}",
                    fmt(r.delay),
                    fmt(r.fraction),
                    fmt(r.stderr),
                    fmt(r.expected)
                )
            }),
        )?);
    }

    written.push(write_csv(
        dir,
        "expectations.csv",
        "name,expected,actual,tolerance,pass",
        report.expectations.iter().map(|e| {
            format!(
                "{},{},{},{},{}",
                e.name,
                fmt(e.expected),
                fmt(e.actual),
                fmt(e.tolerance),
                e.pass
            )
        }),
    )?);

    Ok(written)
}
