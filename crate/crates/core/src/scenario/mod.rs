//! Named scenario construction, collapse-policy comparison runs, and
//! report emission.
//!
//! Each scenario has a fixed parameter table with defaults; overrides are
//! validated by name. A run executes the scenario under the requested
//! policies, evaluates the built-in expectations at pinned tolerances, and
//! packs everything into a [`RunReport`].

mod report;
mod runners;

pub use report::{
    emit, ket_terms, BranchRow, EmitFormat, Expectation, FrequencyStat, InstabilityReport,
    IntensityTable, KetTerm, MartingaleRow, MismatchRow, PolicyReport, RetrodictionSummary,
    RunReport, ScenarioEcho, SCHEMA_VERSION,
};

use serde::Deserialize;
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::measure::CollapsePolicy;
use crate::screen::{DEFAULT_GRID_POINTS, DEFAULT_WAVENUMBER};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScenarioName {
    Hardy,
    MzHistories,
    WhichWay,
    TripleInterference,
    RdmDelay,
    CslEnsemble,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 6] = [
        ScenarioName::Hardy,
        ScenarioName::MzHistories,
        ScenarioName::WhichWay,
        ScenarioName::TripleInterference,
        ScenarioName::RdmDelay,
        ScenarioName::CslEnsemble,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Hardy => "hardy",
            ScenarioName::MzHistories => "mz-histories",
            ScenarioName::WhichWay => "which-way",
            ScenarioName::TripleInterference => "triple-interference",
            ScenarioName::RdmDelay => "rdm-delay",
            ScenarioName::CslEnsemble => "csl-ensemble",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|s| s.as_str() == name)
            .copied()
            .ok_or_else(|| Error::UnknownScenario(name.to_string()))
    }

    pub fn summary(&self) -> &'static str {
        match self {
            ScenarioName::Hardy => {
                "path-entangled pair: detector-port probabilities, frame-ordered \
                 conditionals, and the retrodiction consistency check"
            }
            ScenarioName::MzHistories => {
                "Mach-Zehnder with phase plates: coherent output fringes versus the \
                 definite-history mixture on a crossing screen"
            }
            ScenarioName::WhichWay => {
                "split packet feeding a detector avalanche: disjoint perturbation \
                 sets, cross-branch amplitude, and threshold selection statistics"
            }
            ScenarioName::TripleInterference => {
                "three crossing packets with a removable axial beam: blocked-path \
                 detection versus the pattern background, per policy"
            }
            ScenarioName::RdmDelay => {
                "simultaneous-jump pair read with a relative delay: correlation \
                 mismatch fraction versus the Poisson parity law"
            }
            ScenarioName::CslEnsemble => {
                "stochastic localization ensemble: outcome frequencies, martingale \
                 checkpoints, and noise-instability diagnostics"
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub help: &'static str,
}

const fn param(name: &'static str, default: f64, help: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        default,
        help,
    }
}

const MZ_PARAMS: &[ParamSpec] = &[
    param("phi_c", 0.0, "phase shift on arm c (radians)"),
    param("phi_d", FRAC_PI_2, "phase shift on arm d (radians)"),
    param("kappa0", DEFAULT_WAVENUMBER, "transverse wavenumber of the crossing beams"),
    param("grid_points", DEFAULT_GRID_POINTS as f64, "screen sample points"),
];

const WHICH_WAY_PARAMS: &[ParamSpec] = &[
    param("phi", 0.0, "path-length phase on packet a (radians)"),
    param("n_initial", 3.0, "particles perturbed when packet a enters"),
    param("growth", 2.0, "per-step multiplication of each perturbed set"),
    param("steps", 21.0, "amplification steps"),
    param("arrival_step", 2.0, "step at which packet b reaches the detector"),
    param("late_seed", 3.0, "particles perturbed when packet b arrives"),
    param("n_macro", 1e6, "macroscopic threshold count"),
    param("trials", 1e4, "threshold-collapse repetitions"),
];

const TRIPLE_PARAMS: &[ParamSpec] = &[
    param("theta1", 0.0, "phase shift on packet a (radians)"),
    param("theta3", 0.0, "phase shift on packet c (radians)"),
    param("kappa0", DEFAULT_WAVENUMBER, "transverse wavenumber of the oblique beams"),
    param("grid_points", DEFAULT_GRID_POINTS as f64, "plate sample points"),
    param("trials", 1e4, "blocking-detector sampling trials"),
    param("mc_samples", 0.0, "plate impacts to sample per pattern (0 = off)"),
];

const RDM_PARAMS: &[ParamSpec] = &[
    param("rate", 1.0, "jump events per unit time"),
    param("delay", 0.5, "read-out delay between the two particles"),
    param("trials", 1e5, "trials per delay point"),
    param("grid_points", 10.0, "delay sweep points"),
    param("grid_step", 0.125, "delay sweep spacing"),
];

const CSL_PARAMS: &[ParamSpec] = &[
    param("lambda", 1.0, "collapse strength (1/time)"),
    param("dt", 1e-3, "integration step"),
    param("eps_conv", 1e-4, "eigenstate selection threshold"),
    param("max_steps", 2e5, "step budget per trajectory"),
    param("n_traj", 1e4, "ensemble size"),
];

/// Parameter table (names, defaults, one-line help) for a scenario.
pub fn parameter_specs(name: ScenarioName) -> &'static [ParamSpec] {
    match name {
        ScenarioName::Hardy => &[],
        ScenarioName::MzHistories => MZ_PARAMS,
        ScenarioName::WhichWay => WHICH_WAY_PARAMS,
        ScenarioName::TripleInterference => TRIPLE_PARAMS,
        ScenarioName::RdmDelay => RDM_PARAMS,
        ScenarioName::CslEnsemble => CSL_PARAMS,
    }
}

/// A validated scenario: defaults merged with overrides, plus the run seed.
#[derive(Clone, Debug)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub parameters: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn echo(&self) -> ScenarioEcho {
        ScenarioEcho {
            name: self.name.as_str().to_string(),
            parameters: self.parameters.clone(),
            seed: self.seed,
        }
    }
}

/// JSON form of a scenario spec, as accepted on the command line via
/// `--config`. Field names match [`ScenarioSpec`].
#[derive(Clone, Debug, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Merges overrides into the scenario's defaults, rejecting unknown
/// parameter names.
pub fn build(name: &str, overrides: &BTreeMap<String, f64>, seed: u64) -> Result<ScenarioSpec> {
    let name = ScenarioName::parse(name)?;
    let specs = parameter_specs(name);
    let mut parameters: BTreeMap<String, f64> =
        specs.iter().map(|p| (p.name.to_string(), p.default)).collect();
    for (key, value) in overrides {
        if !parameters.contains_key(key) {
            return Err(Error::UnknownParameter {
                scenario: name.as_str().to_string(),
                param: key.clone(),
            });
        }
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "parameter `{key}` is not finite"
            )));
        }
        parameters.insert(key.clone(), *value);
    }
    Ok(ScenarioSpec {
        name,
        parameters,
        seed,
    })
}

/// Typed access to merged parameters.
pub(crate) struct Params<'a>(&'a BTreeMap<String, f64>);

impl Params<'_> {
    pub fn get(&self, name: &str) -> f64 {
        *self
            .0
            .get(name)
            .unwrap_or_else(|| panic!("parameter `{name}` missing from merged defaults"))
    }

    pub fn count(&self, name: &str) -> Result<u64> {
        let v = self.get(name);
        if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
            return Err(Error::InvalidParameter(format!(
                "parameter `{name}` = {v} must be a nonnegative integer"
            )));
        }
        Ok(v as u64)
    }

    pub fn positive_count(&self, name: &str) -> Result<u64> {
        let v = self.count(name)?;
        if v == 0 {
            return Err(Error::InvalidParameter(format!(
                "parameter `{name}` must be positive"
            )));
        }
        Ok(v)
    }
}

/// Runs the scenario under each requested policy and assembles the report.
pub fn run(spec: &ScenarioSpec, policies: &[CollapsePolicy]) -> Result<RunReport> {
    if policies.is_empty() {
        return Err(Error::InvalidParameter("no policies requested".into()));
    }
    let params = Params(&spec.parameters);
    let (sections, expectations) = match spec.name {
        ScenarioName::Hardy => runners::run_hardy(&params, policies)?,
        ScenarioName::MzHistories => runners::run_mz_histories(&params, policies)?,
        ScenarioName::WhichWay => runners::run_which_way(&params, spec.seed, policies)?,
        ScenarioName::TripleInterference => {
            runners::run_triple_interference(&params, spec.seed, policies)?
        }
        ScenarioName::RdmDelay => runners::run_rdm_delay(&params, spec.seed, policies)?,
        ScenarioName::CslEnsemble => runners::run_csl_ensemble(&params, spec.seed, policies)?,
    };
    Ok(RunReport::new(spec.echo(), sections, expectations))
}
