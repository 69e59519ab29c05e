//! Toy continuous-localization dynamics over a finite eigenbasis.
//!
//! Each trajectory integrates the pure-collapse Itô unraveling
//!
//!   c_i <- c_i · [1 + √λ (a_i − ⟨A⟩) dW − (λ/2)(a_i − ⟨A⟩)² dt],
//!
//! followed by renormalization, where ⟨A⟩ = Σ a_i |c_i|². The noisy term
//! picks the eigenstate; the drift pins it. A step whose multiplier turns
//! nonpositive on a populated component (or whose norm degenerates) has
//! left the physical manifold and is reported as such — the integrator's
//! documented instability under coarse or adversarial noise.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::ensemble;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug)]
pub struct SseParams {
    /// Collapse strength, 1/time.
    pub lambda: f64,
    pub dt: f64,
    /// Spectrum of the collapse operator.
    pub eigenvalues: Vec<f64>,
    pub max_steps: usize,
    /// A trajectory has selected an eigenstate once some |c_i|² reaches
    /// 1 − eps_conv.
    pub eps_conv: f64,
}

impl SseParams {
    pub fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 || self.dt <= 0.0 {
            return Err(Error::InvalidParameter(
                "lambda and dt must be positive".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.eps_conv) || self.eps_conv == 0.0 {
            return Err(Error::InvalidParameter(
                "eps_conv must lie in (0, 0.5)".into(),
            ));
        }
        if self.eigenvalues.len() < 2 {
            return Err(Error::InvalidParameter(
                "need at least two eigenvalues".into(),
            ));
        }
        Ok(())
    }
}

impl Default for SseParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            dt: 1e-3,
            eigenvalues: vec![1.0, -1.0],
            max_steps: 200_000,
            eps_conv: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SseState {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl SseState {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Self {
            amplitudes,
            time: 0.0,
        }
    }

    /// Unequal two-state superposition (1/√3, √2/√3).
    pub fn one_third_two_thirds() -> Self {
        let s3 = 3f64.sqrt();
        Self::new(vec![
            Complex64::new(1.0 / s3, 0.0),
            Complex64::new(2f64.sqrt() / s3, 0.0),
        ])
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    fn expectation(&self, eigenvalues: &[f64]) -> f64 {
        self.amplitudes
            .iter()
            .zip(eigenvalues)
            .map(|(c, a)| a * c.norm_sqr())
            .sum::<f64>()
            / self.norm_sqr()
    }
}

/// Noise increments of one trajectory, recorded verbatim for replay.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSequence {
    pub increments: Vec<f64>,
}

impl NoiseSequence {
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for dw in &self.increments {
            writeln!(file, "{dw:.16e}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut increments = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            increments.push(trimmed.parse::<f64>().map_err(|e| {
                Error::InvalidParameter(format!("bad noise value `{trimmed}`: {e}"))
            })?);
        }
        Ok(Self { increments })
    }

    /// Flat little-endian f64 record.
    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::with_capacity(self.increments.len() * 8);
        for dw in &self.increments {
            bytes.extend_from_slice(&dw.to_le_bytes());
        }
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        BufReader::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::InvalidParameter(format!(
                "binary noise record length {} is not a multiple of 8",
                bytes.len()
            )));
        }
        let increments = bytes
            .chunks_exact(8)
            .map(|chunk| f64::from_le_bytes(chunk.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self { increments })
    }
}

/// One Euler step of the unraveling with explicit renormalization.
pub fn sse_step(state: &SseState, params: &SseParams, dw: f64) -> Result<SseState> {
    let mean = state.expectation(&params.eigenvalues);
    let sqrt_lambda = params.lambda.sqrt();
    let mut next = Vec::with_capacity(state.amplitudes.len());
    for (c, a) in state.amplitudes.iter().zip(&params.eigenvalues) {
        let centered = a - mean;
        let bracket =
            1.0 + sqrt_lambda * centered * dw - 0.5 * params.lambda * centered * centered * params.dt;
        if c.norm_sqr() > 1e-24 && bracket <= 0.0 {
            // The linearized weight crossed zero: the step left the
            // physical manifold.
            return Err(Error::NonPhysical { step: 0 });
        }
        next.push(c * bracket);
    }
    let norm_sqr: f64 = next.iter().map(|c| c.norm_sqr()).sum();
    if !(norm_sqr.is_finite() && norm_sqr > 0.0) {
        return Err(Error::NonPhysical { step: 0 });
    }
    let scale = 1.0 / norm_sqr.sqrt();
    for c in &mut next {
        *c *= scale;
    }
    Ok(SseState {
        amplitudes: next,
        time: state.time + params.dt,
    })
}

/// Smallest-|dW| increment that drives a populated component's multiplier
/// to zero, scaled past the root; `None` for eigenstates, where no
/// increment can do harm.
pub fn adversarial_increment(state: &SseState, params: &SseParams) -> Option<f64> {
    let mean = state.expectation(&params.eigenvalues);
    let sqrt_lambda = params.lambda.sqrt();
    state
        .amplitudes
        .iter()
        .zip(&params.eigenvalues)
        .filter(|(c, a)| c.norm_sqr() > 1e-12 && (*a - mean).abs() > 1e-12)
        .map(|(_, a)| {
            let centered = a - mean;
            let slope = sqrt_lambda * centered;
            let drift = 0.5 * params.lambda * centered * centered * params.dt;
            // Root of 1 + slope·dW − drift, pushed 50% further out.
            1.5 * (drift - 1.0) / slope
        })
        .min_by(|x, y| x.abs().total_cmp(&y.abs()))
}

#[derive(Clone, Debug)]
pub struct TrajectoryRun {
    /// Index of the selected eigenstate.
    pub outcome: usize,
    /// Steps taken until selection.
    pub steps: usize,
    pub final_state: SseState,
    pub noise: Option<NoiseSequence>,
    /// Worst |Σ|c|² − 1| observed after renormalized steps.
    pub max_norm_error: f64,
    /// |c_i|² snapshots at the requested checkpoint steps (frozen at the
    /// final value once the trajectory has terminated).
    pub checkpoints: Vec<Vec<f64>>,
}

fn integrate(
    initial: &SseState,
    params: &SseParams,
    mut next_dw: impl FnMut() -> Option<f64>,
    record_noise: bool,
    checkpoints: &[usize],
) -> Result<TrajectoryRun> {
    params.validate()?;
    if initial.amplitudes.len() != params.eigenvalues.len() {
        return Err(Error::InvalidParameter(format!(
            "state dimension {} does not match spectrum size {}",
            initial.amplitudes.len(),
            params.eigenvalues.len()
        )));
    }

    let mut state = initial.clone();
    let mut noise = record_noise.then(Vec::new);
    let mut max_norm_error = 0.0f64;
    let mut recorded = Vec::with_capacity(checkpoints.len());
    let mut checkpoint_iter = checkpoints.iter().peekable();

    let mut step = 0usize;
    let (outcome, steps) = loop {
        while checkpoint_iter.peek() == Some(&&step) {
            recorded.push(state.probabilities());
            checkpoint_iter.next();
        }
        if step >= params.max_steps {
            return Err(Error::MaxStepsExceeded(params.max_steps));
        }
        let Some(dw) = next_dw() else {
            return Err(Error::MaxStepsExceeded(step));
        };
        state = sse_step(&state, params, dw).map_err(|e| match e {
            Error::NonPhysical { .. } => Error::NonPhysical { step: step + 1 },
            other => other,
        })?;
        if let Some(noise) = noise.as_mut() {
            noise.push(dw);
        }
        step += 1;
        max_norm_error = max_norm_error.max((state.norm_sqr() - 1.0).abs());

        let probs = state.probabilities();
        let (winner, best) = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty spectrum");
        if *best >= 1.0 - params.eps_conv {
            break (winner, step);
        }
    };

    // Post-selection checkpoints hold the frozen outcome weights.
    let final_probs = state.probabilities();
    for _ in checkpoint_iter {
        recorded.push(final_probs.clone());
    }

    Ok(TrajectoryRun {
        outcome,
        steps,
        final_state: state,
        noise: noise.map(|increments| NoiseSequence { increments }),
        max_norm_error,
        checkpoints: recorded,
    })
}

/// Integrates with Gaussian noise dW ~ N(0, dt) until an eigenstate is
/// selected, recording the noise stream for bit-exact replay.
pub fn run_trajectory(
    initial: &SseState,
    params: &SseParams,
    rng: &mut RngStream,
) -> Result<TrajectoryRun> {
    let sqrt_dt = params.dt.sqrt();
    integrate(
        initial,
        params,
        || Some(rng.standard_normal() * sqrt_dt),
        true,
        &[],
    )
}

/// Deterministic replay of a recorded noise sequence.
pub fn replay_trajectory(
    initial: &SseState,
    params: &SseParams,
    noise: &NoiseSequence,
) -> Result<TrajectoryRun> {
    let mut iter = noise.increments.iter().copied();
    integrate(initial, params, || iter.next(), true, &[])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SseDiagnosis {
    Ok,
    NonPhysicalAtStep(usize),
    /// The sequence ran out (or max_steps elapsed) without selecting an
    /// eigenstate.
    Diverged,
}

/// Classifies a noise sequence by deterministic replay.
pub fn detect_nonphysical(
    noise: &NoiseSequence,
    initial: &SseState,
    params: &SseParams,
) -> SseDiagnosis {
    match replay_trajectory(initial, params, noise) {
        Ok(_) => SseDiagnosis::Ok,
        Err(Error::NonPhysical { step }) => SseDiagnosis::NonPhysicalAtStep(step),
        Err(_) => SseDiagnosis::Diverged,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationReport {
    /// Zero-based index of the perturbed increment.
    pub step_index: usize,
    pub scale: f64,
    pub diagnosis: SseDiagnosis,
}

/// Scans scale factors (ascending) and increment positions for the
/// smallest single-increment scaling that flips an ok sequence to a
/// non-physical or diverging one.
pub fn perturbation_search(
    noise: &NoiseSequence,
    initial: &SseState,
    params: &SseParams,
    scales: &[f64],
) -> Option<PerturbationReport> {
    for &scale in scales {
        for idx in 0..noise.increments.len() {
            let mut perturbed = noise.clone();
            perturbed.increments[idx] *= scale;
            match detect_nonphysical(&perturbed, initial, params) {
                SseDiagnosis::Ok => {}
                diagnosis => {
                    return Some(PerturbationReport {
                        step_index: idx,
                        scale,
                        diagnosis,
                    })
                }
            }
        }
    }
    None
}

#[derive(Clone, Debug)]
pub struct MartingaleCheckpoint {
    pub step: usize,
    /// Ensemble mean of |c_i|² per eigenstate.
    pub mean: Vec<f64>,
    /// Standard error of that mean.
    pub sem: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub n_trajectories: u64,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub martingale: Vec<MartingaleCheckpoint>,
    /// Error label -> number of trajectories that failed that way.
    pub failures: BTreeMap<String, u64>,
    pub mean_steps: f64,
    pub max_norm_error: f64,
}

/// Runs `n_traj` independent trajectories (one RNG substream each) and
/// aggregates outcome frequencies plus the checkpointed ensemble means of
/// |c_i|² — the martingale diagnostic behind the Born statistics.
pub fn ensemble_stats(
    initial: &SseState,
    params: &SseParams,
    n_traj: u64,
    rng: &RngStream,
    checkpoints: &[usize],
) -> Result<EnsembleStats> {
    params.validate()?;
    if n_traj == 0 {
        return Err(Error::InvalidParameter("zero trajectories".into()));
    }
    let sqrt_dt = params.dt.sqrt();
    let runs = ensemble::map_indexed(n_traj, |i| {
        let mut stream = rng.substream(i);
        integrate(
            initial,
            params,
            || Some(stream.standard_normal() * sqrt_dt),
            false,
            checkpoints,
        )
    });

    let dim = params.eigenvalues.len();
    let mut counts = vec![0u64; dim];
    let mut failures: BTreeMap<String, u64> = BTreeMap::new();
    let mut total_steps = 0u64;
    let mut max_norm_error = 0.0f64;
    let mut succeeded = Vec::with_capacity(runs.len());
    for run in runs {
        match run {
            Ok(run) => {
                counts[run.outcome] += 1;
                total_steps += run.steps as u64;
                max_norm_error = max_norm_error.max(run.max_norm_error);
                succeeded.push(run);
            }
            Err(e) => {
                let label = match e {
                    Error::NonPhysical { .. } => "nonphysical".to_string(),
                    Error::MaxStepsExceeded(_) => "max-steps".to_string(),
                    other => return Err(other),
                };
                *failures.entry(label).or_insert(0) += 1;
            }
        }
    }
    if succeeded.is_empty() {
        return Err(Error::MaxStepsExceeded(params.max_steps));
    }

    let n = succeeded.len() as f64;
    let mut martingale = Vec::with_capacity(checkpoints.len());
    for (k, &step) in checkpoints.iter().enumerate() {
        let mut mean = vec![0.0; dim];
        for run in &succeeded {
            for (m, p) in mean.iter_mut().zip(&run.checkpoints[k]) {
                *m += p;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut sem = vec![0.0; dim];
        if succeeded.len() > 1 {
            for run in &succeeded {
                for ((s, p), m) in sem.iter_mut().zip(&run.checkpoints[k]).zip(&mean) {
                    *s += (p - m) * (p - m);
                }
            }
            for s in &mut sem {
                *s = (*s / (n - 1.0) / n).sqrt();
            }
        }
        martingale.push(MartingaleCheckpoint { step, mean, sem });
    }

    let frequencies = counts
        .iter()
        .map(|&c| c as f64 / n_traj as f64)
        .collect();
    Ok(EnsembleStats {
        n_trajectories: n_traj,
        counts,
        frequencies,
        martingale,
        failures,
        mean_steps: total_steps as f64 / n,
        max_norm_error,
    })
}
