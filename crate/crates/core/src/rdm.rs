//! Random-discontinuous-motion sampling: a particle occupies one position
//! per instant, drawn from the squared-amplitude weights, and an entangled
//! pair jumps between its two joint configurations in a precisely
//! simultaneous way. Reading the two particles with a relative delay
//! mixes in trials where an odd number of jumps happened in between,
//! which is the correlation-violation statistic.

use std::collections::BTreeMap;

use crate::ensemble;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One of the pair's two legal joint position assignments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointConfiguration {
    pub config_id: u8,
    pub positions: (String, String),
}

#[derive(Clone, Debug)]
pub struct RdmConfig {
    /// Jump events per unit time.
    pub jump_rate: f64,
    pub duration: f64,
    /// Sampling step for recorded trajectories (much smaller than 1/rate).
    pub tick: f64,
    pub configs: [JointConfiguration; 2],
}

impl Default for RdmConfig {
    fn default() -> Self {
        Self {
            jump_rate: 1.0,
            duration: 10.0,
            tick: 1e-3,
            configs: [
                JointConfiguration {
                    config_id: 0,
                    positions: ("x1".into(), "x2".into()),
                },
                JointConfiguration {
                    config_id: 1,
                    positions: ("x3".into(), "x4".into()),
                },
            ],
        }
    }
}

/// Weighted position draw (inverse CDF over positions in lexicographic
/// order). Weights must sum to 1.
pub fn sample_position(
    weights: &BTreeMap<String, f64>,
    rng: &mut RngStream,
) -> Result<String> {
    let total: f64 = weights.values().sum();
    if (total - 1.0).abs() > 1e-12 || weights.values().any(|w| *w < 0.0) {
        return Err(Error::BadWeights(total));
    }
    let u = rng.uniform();
    let mut acc = 0.0;
    for (position, w) in weights {
        acc += w;
        if u < acc {
            return Ok(position.clone());
        }
    }
    weights
        .iter()
        .rev()
        .find(|(_, w)| **w > 0.0)
        .map(|(p, _)| p.clone())
        .ok_or(Error::BadWeights(total))
}

#[derive(Clone, Debug)]
pub struct RdmTrajectory {
    /// (time, joint configuration) at every tick.
    pub samples: Vec<(f64, JointConfiguration)>,
    /// Exact number of jump events inside the run.
    pub toggle_count: u64,
}

/// Simulates the pair's jump process: the joint configuration toggles at
/// exponential event times, and both particles switch together at every
/// event.
pub fn run_entangled(config: &RdmConfig, rng: &mut RngStream) -> RdmTrajectory {
    assert!(config.tick > 0.0 && config.jump_rate >= 0.0);
    let ticks = (config.duration / config.tick).round() as u64;
    let mut samples = Vec::with_capacity(ticks as usize + 1);
    let mut current: u8 = 0;
    let mut toggle_count = 0u64;
    let mut next_event = if config.jump_rate > 0.0 {
        rng.exponential(config.jump_rate)
    } else {
        f64::INFINITY
    };
    for tick in 0..=ticks {
        let t = tick as f64 * config.tick;
        while next_event <= t {
            current ^= 1;
            toggle_count += 1;
            next_event += rng.exponential(config.jump_rate);
        }
        samples.push((t, config.configs[current as usize].clone()));
    }
    RdmTrajectory {
        samples,
        toggle_count,
    }
}

/// Parity of the number of jump events inside a window of the given
/// length: `true` when the configurations read at the window's two ends
/// differ.
pub fn toggle_parity(rate: f64, window: f64, rng: &mut RngStream) -> bool {
    if rate <= 0.0 || window <= 0.0 {
        return false;
    }
    let mut t = rng.exponential(rate);
    let mut toggles = 0u64;
    while t <= window {
        toggles += 1;
        t += rng.exponential(rate);
    }
    toggles % 2 == 1
}

/// Fraction of trials in which particle one read at time t and particle
/// two read at t + delay come from different configurations. Estimates
/// P(odd number of jumps in the delay window) = (1 − e^{−2·rate·delay})/2.
pub fn mismatch_fraction(
    config: &RdmConfig,
    delay: f64,
    trials: u64,
    rng: &RngStream,
) -> Result<f64> {
    if delay < 0.0 {
        return Err(Error::InvalidParameter(format!("negative delay {delay}")));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("zero trials".into()));
    }
    let rate = config.jump_rate;
    let mismatches: u64 = ensemble::map_indexed(trials, |i| {
        let mut stream = rng.substream(i);
        u64::from(toggle_parity(rate, delay, &mut stream))
    })
    .into_iter()
    .sum();
    Ok(mismatches as f64 / trials as f64)
}
