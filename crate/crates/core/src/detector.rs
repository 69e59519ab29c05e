//! Branch-resolved detector amplification.
//!
//! A split single-particle packet entangles with growing sets of detector
//! particles: the branch where packet one entered perturbs set A, the
//! branch where packet two entered perturbs set B, and the two sets are
//! disjoint. Counts, not per-particle kets, carry the state — the
//! amplitudes are symmetric under particle exchange, so (amplitude, N, K)
//! per branch is lossless and keeps macroscopic populations simulable.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::state::Ket;

/// Which packet a branch belongs to: the early packet perturbs pool A,
/// the late one perturbs pool B.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PacketRole {
    Early,
    Late,
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub label: String,
    pub amplitude: Complex64,
    pub role: PacketRole,
    /// Particles of set A perturbed in this branch.
    pub perturbed_a: u64,
    /// Particles of set B perturbed in this branch.
    pub perturbed_b: u64,
}

impl Branch {
    /// The count this branch's own packet is responsible for.
    pub fn own_count(&self) -> u64 {
        match self.role {
            PacketRole::Early => self.perturbed_a,
            PacketRole::Late => self.perturbed_b,
        }
    }

    fn check_disjoint(&self) -> Result<()> {
        let cross = match self.role {
            PacketRole::Early => self.perturbed_b,
            PacketRole::Late => self.perturbed_a,
        };
        if cross != 0 {
            return Err(Error::InvalidParameter(format!(
                "branch `{}` carries perturbations from both packets",
                self.label
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ChainConfig {
    /// Mode name of the packet that reaches the detector first.
    pub early_mode: String,
    /// Particles perturbed when the early packet enters.
    pub n_initial: u64,
    /// Amplification step at which the late packet arrives.
    pub arrival_step: u64,
    /// Particles the late packet perturbs on arrival.
    pub late_seed: u64,
    pub pool_a: u64,
    pub pool_b: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            early_mode: "a".into(),
            n_initial: 3,
            arrival_step: 2,
            late_seed: 3,
            pool_a: 1_000_000_000_000,
            pool_b: 1_000_000_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainState {
    branches: Vec<Branch>,
    pub config: ChainConfig,
    step: u64,
    /// Own-count of every branch after each completed step (step 0 first).
    history: Vec<Vec<u64>>,
}

impl ChainState {
    /// Validating constructor; rejects branches carrying perturbations
    /// from both packets.
    pub fn try_new(branches: Vec<Branch>, config: ChainConfig) -> Result<Self> {
        if branches.is_empty() || branches.len() > 2 {
            return Err(Error::UnsupportedTopology(branches.len()));
        }
        for branch in &branches {
            branch.check_disjoint()?;
        }
        let history = vec![branches.iter().map(Branch::own_count).collect()];
        Ok(Self {
            branches,
            config,
            step: 0,
            history,
        })
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn branch(&self, label: &str) -> Option<&Branch> {
        self.branches.iter().find(|b| b.label == label)
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.amplitude.norm_sqr()).sum()
    }
}

/// Entangles a split photon with the first detector particles: the early
/// packet's branch starts with `n_initial` perturbed A-particles, the late
/// packet's branch with none (it has not arrived yet).
pub fn seed(photon: &Ket, config: &ChainConfig) -> Result<ChainState> {
    let support = photon.support(0.0);
    if support.len() > 2 {
        return Err(Error::UnsupportedTopology(support.len()));
    }
    let subsystems = photon.subsystems();
    if subsystems.len() != 1 {
        return Err(Error::UnsupportedTopology(subsystems.len()));
    }
    let subsystem = subsystems.into_iter().next().expect("one subsystem");

    let mut branches = Vec::with_capacity(support.len());
    let modes = photon.modes_of(&subsystem);
    if support.len() == 2 && !modes.contains(&config.early_mode) {
        return Err(Error::InvalidParameter(format!(
            "early mode `{}` not among the photon packets",
            config.early_mode
        )));
    }
    for label in &support {
        let mode = label.mode(&subsystem).expect("single subsystem").to_string();
        let early = support.len() == 1 || mode == config.early_mode;
        branches.push(Branch {
            label: mode,
            amplitude: photon.amplitude(label),
            role: if early { PacketRole::Early } else { PacketRole::Late },
            perturbed_a: if early { config.n_initial } else { 0 },
            perturbed_b: 0,
        });
    }
    branches.sort_by(|a, b| a.label.cmp(&b.label));
    ChainState::try_new(branches, config.clone())
}

/// Runs `steps` amplification steps: each branch's own perturbed set
/// multiplies by `growth` per step (rounded up); amplitudes never change.
/// The late packet's set starts at its arrival step.
pub fn amplify(state: &ChainState, steps: u64, growth: f64) -> Result<ChainState> {
    if growth <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "growth multiplier {growth} must exceed 1"
        )));
    }
    let mut next = state.clone();
    for _ in 0..steps {
        next.step += 1;
        for branch in &mut next.branches {
            match branch.role {
                PacketRole::Early => {
                    branch.perturbed_a = grow(branch.perturbed_a, growth);
                    if branch.perturbed_a > next.config.pool_a {
                        return Err(Error::PoolExhausted { step: next.step });
                    }
                }
                PacketRole::Late => {
                    if next.step == next.config.arrival_step {
                        branch.perturbed_b = next.config.late_seed;
                    } else if next.step > next.config.arrival_step {
                        branch.perturbed_b = grow(branch.perturbed_b, growth);
                    }
                    if branch.perturbed_b > next.config.pool_b {
                        return Err(Error::PoolExhausted { step: next.step });
                    }
                }
            }
        }
        next.history
            .push(next.branches.iter().map(Branch::own_count).collect());
    }
    Ok(next)
}

fn grow(count: u64, growth: f64) -> u64 {
    (count as f64 * growth).ceil() as u64
}

/// Amplitude of any configuration with perturbed particles from both
/// packets in the same branch. The state invariant makes this identically
/// zero; the function exists as an executable witness.
pub fn cross_branch_amplitude(state: &ChainState) -> Complex64 {
    state
        .branches
        .iter()
        .filter(|b| b.perturbed_a > 0 && b.perturbed_b > 0)
        .map(|b| b.amplitude)
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseReport {
    pub selected: String,
    /// First amplification step at which any branch went macroscopic.
    pub steps_to_threshold: u64,
    pub final_perturbed_a: u64,
    pub final_perturbed_b: u64,
    /// The losing packet's perturbation count in the surviving branch;
    /// zero by the disjointness invariant.
    pub losing_perturbed: u64,
}

/// Once a branch's perturbed set is macroscopic, selects a branch with
/// Born weight |amplitude|² and discards the other. The report shows that
/// the losing packet left no perturbation behind.
pub fn threshold_collapse(
    state: &ChainState,
    n_macro: u64,
    rng: &mut RngStream,
) -> Result<CollapseReport> {
    let steps_to_threshold = state
        .history
        .iter()
        .position(|counts| counts.iter().any(|&c| c >= n_macro))
        .ok_or(Error::NotMacroscopic)? as u64;

    let total = state.total_weight();
    let u = rng.uniform() * total;
    let mut acc = 0.0;
    let mut winner = state.branches.last().expect("nonempty");
    for branch in &state.branches {
        acc += branch.amplitude.norm_sqr();
        if u < acc {
            winner = branch;
            break;
        }
    }
    Ok(CollapseReport {
        selected: winner.label.clone(),
        steps_to_threshold,
        final_perturbed_a: winner.perturbed_a,
        final_perturbed_b: winner.perturbed_b,
        losing_perturbed: match winner.role {
            PacketRole::Early => winner.perturbed_b,
            PacketRole::Late => winner.perturbed_a,
        },
    })
}
