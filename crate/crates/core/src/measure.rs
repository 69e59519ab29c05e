//! Born probabilities, outcome sampling, and the Lüders post-measurement
//! rule, with a policy switch so every scenario runs both with and without
//! collapse.

use num_complex::Complex64;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::state::{BasisLabel, Ket};

/// Partition of one subsystem's modes into named outcome classes.
///
/// Degenerate outcomes (classes with several modes) follow the Lüders
/// projection rule, not a re-preparation.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservablePartition {
    pub subsystem: String,
    classes: BTreeMap<String, BTreeSet<String>>,
}

impl ObservablePartition {
    pub fn new<I, O, M>(subsystem: impl Into<String>, classes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (O, Vec<M>)>,
        O: Into<String>,
        M: Into<String>,
    {
        let subsystem = subsystem.into();
        let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for (outcome, modes) in classes {
            let outcome = outcome.into();
            let mut set = BTreeSet::new();
            for mode in modes {
                let mode = mode.into();
                if !seen.insert(mode.clone()) {
                    return Err(Error::BadPartition(format!(
                        "mode `{mode}` appears in two outcome classes"
                    )));
                }
                set.insert(mode);
            }
            if set.is_empty() {
                return Err(Error::BadPartition(format!(
                    "outcome `{outcome}` has an empty class"
                )));
            }
            if map.insert(outcome.clone(), set).is_some() {
                return Err(Error::BadPartition(format!(
                    "outcome `{outcome}` declared twice"
                )));
            }
        }
        if map.is_empty() {
            return Err(Error::BadPartition("partition has no outcomes".into()));
        }
        Ok(Self { subsystem, classes: map })
    }

    /// One outcome per mode, named after the mode itself.
    pub fn by_mode<I, M>(subsystem: impl Into<String>, modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = M>,
        M: Into<String>,
    {
        Self::new(
            subsystem,
            modes.into_iter().map(|m| {
                let m = m.into();
                (m.clone(), vec![m])
            }),
        )
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    pub fn class(&self, outcome: &str) -> Option<&BTreeSet<String>> {
        self.classes.get(outcome)
    }

    fn outcome_of_mode(&self, mode: &str) -> Option<&str> {
        self.classes
            .iter()
            .find(|(_, modes)| modes.contains(mode))
            .map(|(o, _)| o.as_str())
    }

    fn check_exhaustive(&self, ket: &Ket) -> Result<()> {
        let modes = ket.modes_of(&self.subsystem);
        if modes.is_empty() {
            return Err(Error::BadPartition(format!(
                "state has no subsystem `{}`",
                self.subsystem
            )));
        }
        for mode in &modes {
            if self.outcome_of_mode(mode).is_none() {
                return Err(Error::BadPartition(format!(
                    "mode `{}:{mode}` not covered by any outcome class",
                    self.subsystem
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollapsePolicy {
    /// Measurement replaces the state by the Lüders projection of the
    /// observed outcome.
    Collapse,
    /// Measurement reports an outcome but leaves every branch of the
    /// wave-function in place.
    UnitaryOnly,
}

impl CollapsePolicy {
    pub fn key(&self) -> &'static str {
        match self {
            CollapsePolicy::Collapse => "collapse",
            CollapsePolicy::UnitaryOnly => "unitary",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementOutcome {
    pub outcome: String,
    pub probability: f64,
    pub post_state: Ket,
}

/// Outcome probabilities: the squared norm of the projection onto each
/// class, normalized by the state's total weight.
pub fn born_probabilities(ket: &Ket, partition: &ObservablePartition) -> Result<BTreeMap<String, f64>> {
    partition.check_exhaustive(ket)?;
    let total = ket.norm_sqr();
    let mut probs: BTreeMap<String, f64> =
        partition.outcomes().map(|o| (o.to_string(), 0.0)).collect();
    for (label, amp) in ket.terms() {
        let mode = label.mode(&partition.subsystem).ok_or_else(|| {
            Error::BadPartition(format!(
                "term |{label}⟩ lacks subsystem `{}`",
                partition.subsystem
            ))
        })?;
        let outcome = partition
            .outcome_of_mode(mode)
            .expect("exhaustiveness checked above");
        *probs.get_mut(outcome).unwrap() += amp.norm_sqr() / total;
    }
    Ok(probs)
}

/// Joint probabilities over several subsystems, keyed by concatenated
/// outcome labels in partition order.
pub fn born_joint(
    ket: &Ket,
    partitions: &[&ObservablePartition],
) -> Result<BTreeMap<String, f64>> {
    for p in partitions {
        p.check_exhaustive(ket)?;
    }
    let total = ket.norm_sqr();
    let mut probs: BTreeMap<String, f64> = BTreeMap::new();
    for (label, amp) in ket.terms() {
        let mut key = String::new();
        for p in partitions {
            let mode = label.mode(&p.subsystem).ok_or_else(|| {
                Error::BadPartition(format!("term |{label}⟩ lacks subsystem `{}`", p.subsystem))
            })?;
            key.push_str(p.outcome_of_mode(mode).expect("checked exhaustive"));
        }
        *probs.entry(key).or_insert(0.0) += amp.norm_sqr() / total;
    }
    Ok(probs)
}

/// Lüders rule: projection onto the outcome class, renormalized.
pub fn collapse(ket: &Ket, partition: &ObservablePartition, outcome: &str) -> Result<Ket> {
    let class = partition
        .class(outcome)
        .ok_or_else(|| Error::ImpossibleOutcome(outcome.to_string()))?;
    let projected: Vec<_> = ket
        .terms()
        .filter(|(label, _)| {
            label
                .mode(&partition.subsystem)
                .is_some_and(|m| class.contains(m))
        })
        .map(|(label, amp)| (label.clone(), amp))
        .collect();
    let projected = Ket::new(projected).map_err(|_| Error::ImpossibleOutcome(outcome.to_string()))?;
    projected
        .normalized()
        .map_err(|_| Error::ImpossibleOutcome(outcome.to_string()))
}

/// Projection onto the outcome class without renormalization. Returns
/// `None` when the outcome has no weight.
pub fn project(ket: &Ket, partition: &ObservablePartition, outcome: &str) -> Option<Ket> {
    let class = partition.class(outcome)?;
    let projected: Vec<_> = ket
        .terms()
        .filter(|(label, _)| {
            label
                .mode(&partition.subsystem)
                .is_some_and(|m| class.contains(m))
        })
        .map(|(label, amp)| (label.clone(), amp))
        .collect();
    Ket::new(projected).ok()
}

/// Partial projection on one subsystem: the normalized conditional state
/// of the remaining subsystems after observing `outcome`.
pub fn conditional_state(
    ket: &Ket,
    partition: &ObservablePartition,
    outcome: &str,
) -> Result<Ket> {
    let projected = collapse(ket, partition, outcome)?;
    let subsystem = &partition.subsystem;

    // Group by the rest-label; each group holds the measured subsystem's
    // amplitude vector over its surviving modes.
    let mut groups: BTreeMap<BasisLabel, BTreeMap<String, Complex64>> = BTreeMap::new();
    for (label, amp) in projected.terms() {
        let mode = label
            .mode(subsystem)
            .expect("projection keeps the measured subsystem")
            .to_string();
        let rest = label.without(subsystem);
        if rest.is_empty() {
            return Err(Error::EmptyState);
        }
        groups.entry(rest).or_default().insert(mode, amp);
    }

    // The remainder is well-defined only when every group's measured-factor
    // vector points the same way (i.e. the projected state factorizes).
    let reference = groups.values().next().expect("projected state nonempty");
    let ref_norm = reference.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let mut terms = Vec::with_capacity(groups.len());
    for (rest, vector) in &groups {
        // Component along the reference direction, and residual off it.
        let overlap: Complex64 = reference
            .iter()
            .filter_map(|(m, a)| vector.get(m).map(|b| a.conj() * b))
            .sum::<Complex64>()
            / ref_norm;
        let v_norm_sqr: f64 = vector.values().map(|a| a.norm_sqr()).sum();
        let residual = (v_norm_sqr - overlap.norm_sqr()).max(0.0);
        if residual > 1e-12 * v_norm_sqr {
            return Err(Error::EntangledRemainder(subsystem.clone()));
        }
        terms.push((rest.clone(), overlap));
    }
    Ket::new(terms)?.normalized()
}

/// Draws an outcome with Born weights (inverse CDF over outcomes in
/// lexicographic order) and forms the post-measurement state per policy.
pub fn sample(
    ket: &Ket,
    partition: &ObservablePartition,
    policy: CollapsePolicy,
    rng: &mut RngStream,
) -> Result<MeasurementOutcome> {
    let probs = born_probabilities(ket, partition)?;
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut chosen: Option<(&String, f64)> = None;
    for (outcome, p) in &probs {
        acc += p;
        if u < acc {
            chosen = Some((outcome, *p));
            break;
        }
    }
    // Rounding can leave acc fractionally below 1; fall back to the last
    // outcome with nonzero probability.
    let (outcome, probability) = chosen.unwrap_or_else(|| {
        let (o, p) = probs
            .iter()
            .rev()
            .find(|(_, p)| **p > 0.0)
            .expect("born probabilities sum to 1");
        (o, *p)
    });
    let post_state = match policy {
        CollapsePolicy::Collapse => collapse(ket, partition, outcome)?,
        CollapsePolicy::UnitaryOnly => ket.clone(),
    };
    Ok(MeasurementOutcome {
        outcome: outcome.clone(),
        probability,
        post_state,
    })
}

/// Per-mode probabilities of one subsystem (marginal over the rest).
pub fn mode_marginals(ket: &Ket, subsystem: &str) -> Result<BTreeMap<String, f64>> {
    let partition = ObservablePartition::by_mode(subsystem, ket.modes_of(subsystem))?;
    born_probabilities(ket, &partition)
}
