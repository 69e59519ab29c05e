//! Measurement-ordering analysis and the retrodiction-consistency checker.
//!
//! A moving observer only reorders which events (optical elements,
//! measurements) happen first; no kinematics is computed. Each ordering
//! conditions the not-yet-measured subsystem on an observed outcome, and
//! the report combines the path assignments forced with probability 1
//! across orderings into joint labels, flagging any combination absent
//! from the initial wave-function.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::measure::{born_probabilities, conditional_state, ObservablePartition};
use crate::optics::{apply_element, Element};
use crate::state::{BasisLabel, Ket};

/// Conditional probability this close to 1 counts as "forced".
pub const FORCED_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub enum OrderedEvent {
    Apply(Element),
    Measure(ObservablePartition),
}

/// A named sequence of element applications and subsystem measurements.
#[derive(Clone, Debug)]
pub struct MeasurementOrdering {
    pub name: String,
    events: Vec<OrderedEvent>,
}

impl MeasurementOrdering {
    pub fn new(name: impl Into<String>, events: Vec<OrderedEvent>) -> Result<Self> {
        let mut measured: BTreeSet<&str> = BTreeSet::new();
        let mut applied: Vec<&Element> = Vec::new();
        for event in &events {
            match event {
                OrderedEvent::Measure(p) => {
                    if !measured.insert(&p.subsystem) {
                        return Err(Error::InvalidCircuit(format!(
                            "subsystem `{}` measured twice in one ordering",
                            p.subsystem
                        )));
                    }
                }
                OrderedEvent::Apply(element) => {
                    if applied.contains(&element) {
                        return Err(Error::InvalidCircuit(
                            "the same element appears twice in one ordering".into(),
                        ));
                    }
                    applied.push(element);
                }
            }
        }
        Ok(Self {
            name: name.into(),
            events,
        })
    }

    pub fn events(&self) -> &[OrderedEvent] {
        &self.events
    }

    pub fn measured_subsystems(&self) -> Vec<&str> {
        self.events
            .iter()
            .filter_map(|e| match e {
                OrderedEvent::Measure(p) => Some(p.subsystem.as_str()),
                OrderedEvent::Apply(_) => None,
            })
            .collect()
    }
}

/// Result of running one ordering under fixed conditioning outcomes.
#[derive(Clone, Debug)]
pub struct OrderedRun {
    /// Conditional state of whatever is left unmeasured; `None` once every
    /// subsystem has been measured away.
    pub residual: Option<Ket>,
    /// Product of the conditional probabilities of the conditioned
    /// outcomes along the sequence.
    pub probability: f64,
}

/// Runs the event sequence, alternating unitary elements with conditional
/// collapse on the supplied outcomes, and returns the final conditional
/// state with its path probability.
pub fn evolve_ordered(
    initial: &Ket,
    ordering: &MeasurementOrdering,
    outcomes: &BTreeMap<String, String>,
) -> Result<OrderedRun> {
    let mut state = Some(initial.clone());
    let mut probability = 1.0;
    for event in &ordering.events {
        let current = state.take().ok_or_else(|| {
            Error::InvalidCircuit(format!(
                "ordering `{}` has events after the last subsystem was measured",
                ordering.name
            ))
        })?;
        match event {
            OrderedEvent::Apply(element) => {
                state = Some(apply_element(&current, element)?);
            }
            OrderedEvent::Measure(partition) => {
                let outcome = outcomes
                    .get(&partition.subsystem)
                    .ok_or_else(|| Error::MissingOutcome(partition.subsystem.clone()))?;
                let probs = born_probabilities(&current, partition)?;
                let p = probs
                    .get(outcome)
                    .copied()
                    .ok_or_else(|| Error::ImpossibleOutcome(outcome.clone()))?;
                if p <= 0.0 {
                    return Err(Error::ImpossibleOutcome(outcome.clone()));
                }
                probability *= p;
                let remaining = current.subsystems().len();
                state = if remaining > 1 {
                    Some(conditional_state(&current, partition, outcome)?)
                } else {
                    None
                };
            }
        }
    }
    Ok(OrderedRun {
        residual: state,
        probability,
    })
}

/// Marginal probability of one subsystem's outcome under an ordering:
/// the sum of joint path probabilities over the other measured
/// subsystems' outcomes.
pub fn marginal_probability(
    initial: &Ket,
    ordering: &MeasurementOrdering,
    subsystem: &str,
    outcome: &str,
) -> Result<f64> {
    let partitions: Vec<&ObservablePartition> = ordering
        .events
        .iter()
        .filter_map(|e| match e {
            OrderedEvent::Measure(p) => Some(p),
            OrderedEvent::Apply(_) => None,
        })
        .collect();
    let free: Vec<&ObservablePartition> = partitions
        .iter()
        .copied()
        .filter(|p| p.subsystem != subsystem)
        .collect();
    if partitions.len() == free.len() {
        return Err(Error::MissingOutcome(subsystem.to_string()));
    }

    let mut total = 0.0;
    let mut combo = vec![0usize; free.len()];
    loop {
        let mut outcomes: BTreeMap<String, String> =
            BTreeMap::from([(subsystem.to_string(), outcome.to_string())]);
        for (slot, partition) in combo.iter().zip(&free) {
            let label = partition.outcomes().nth(*slot).expect("slot in range");
            outcomes.insert(partition.subsystem.clone(), label.to_string());
        }
        match evolve_ordered(initial, ordering, &outcomes) {
            Ok(run) => total += run.probability,
            Err(Error::ImpossibleOutcome(_)) => {}
            Err(e) => return Err(e),
        }

        // Advance the mixed-radix counter over free outcomes.
        let mut idx = 0;
        loop {
            if idx == free.len() {
                return Ok(total);
            }
            combo[idx] += 1;
            if combo[idx] < free[idx].outcomes().count() {
                break;
            }
            combo[idx] = 0;
            idx += 1;
        }
    }
}

/// Per-ordering conditional supports and the joint labels their forced
/// path assignments would require of the initial state.
#[derive(Clone, Debug)]
pub struct RetrodictionReport {
    pub conditional_supports: BTreeMap<String, BTreeSet<BasisLabel>>,
    /// Subsystem -> modes forced with conditional probability 1.
    pub forced: BTreeMap<String, BTreeSet<String>>,
    pub joint_required: BTreeSet<BasisLabel>,
    pub missing_from_initial: BTreeSet<BasisLabel>,
    pub contradiction: bool,
}

/// Evolves each ordering up to and including its first measurement, takes
/// the modes of the unmeasured subsystems that are forced with probability
/// 1, combines forced assignments across orderings into joint labels, and
/// flags those with zero amplitude in the initial state.
pub fn retrodiction_report(
    initial: &Ket,
    orderings: &[MeasurementOrdering],
    outcomes: &BTreeMap<String, String>,
) -> Result<RetrodictionReport> {
    let mut conditional_supports = BTreeMap::new();
    let mut forced: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();

    for ordering in orderings {
        let Some(residual) = first_measurement_residual(initial, ordering, outcomes)? else {
            conditional_supports.insert(ordering.name.clone(), BTreeSet::new());
            continue;
        };
        conditional_supports.insert(ordering.name.clone(), residual.support(1e-12));
        for subsystem in residual.subsystems() {
            let marginals = crate::measure::mode_marginals(&residual, &subsystem)?;
            for (mode, p) in marginals {
                if p >= 1.0 - FORCED_TOLERANCE {
                    forced.entry(subsystem.clone()).or_default().insert(mode);
                }
            }
        }
    }

    let joint_required = cartesian_labels(&forced)?;
    let support = initial.support(0.0);
    let missing_from_initial: BTreeSet<BasisLabel> = joint_required
        .iter()
        .filter(|joint| !support.iter().any(|label| label.extends(joint)))
        .cloned()
        .collect();
    let contradiction = !missing_from_initial.is_empty();
    Ok(RetrodictionReport {
        conditional_supports,
        forced,
        joint_required,
        missing_from_initial,
        contradiction,
    })
}

/// Runs an ordering through its first measurement and returns the
/// conditional state of the rest (None if nothing remains or the ordering
/// never measures).
fn first_measurement_residual(
    initial: &Ket,
    ordering: &MeasurementOrdering,
    outcomes: &BTreeMap<String, String>,
) -> Result<Option<Ket>> {
    let mut state = initial.clone();
    for event in &ordering.events {
        match event {
            OrderedEvent::Apply(element) => state = apply_element(&state, element)?,
            OrderedEvent::Measure(partition) => {
                let outcome = outcomes
                    .get(&partition.subsystem)
                    .ok_or_else(|| Error::MissingOutcome(partition.subsystem.clone()))?;
                if state.subsystems().len() <= 1 {
                    return Ok(None);
                }
                return conditional_state(&state, partition, outcome).map(Some);
            }
        }
    }
    Ok(None)
}

/// All joint labels formed by picking one forced mode per subsystem.
fn cartesian_labels(forced: &BTreeMap<String, BTreeSet<String>>) -> Result<BTreeSet<BasisLabel>> {
    if forced.is_empty() {
        return Ok(BTreeSet::new());
    }
    let mut labels = vec![BasisLabel::new::<_, String, String>([])?];
    for (subsystem, modes) in forced {
        let mut next = Vec::with_capacity(labels.len() * modes.len());
        for label in &labels {
            for mode in modes {
                next.push(label.with_mode(subsystem, mode.clone()));
            }
        }
        labels = next;
    }
    Ok(labels.into_iter().collect())
}

// ---------------------------------------------------------------------------
// Canonical orderings for the two-particle interferometer.
// ---------------------------------------------------------------------------

/// Detector-port partition for one particle of the entangled pair; outcome
/// labels carry the particle's sign suffix (c+/d+ or c-/d-).
pub fn detector_partition(particle: &str) -> ObservablePartition {
    let suffix = particle.strip_prefix('p').unwrap_or(particle);
    ObservablePartition::new(
        particle,
        [
            (format!("c{suffix}"), vec!["c"]),
            (format!("d{suffix}"), vec!["d"]),
        ],
    )
    .expect("static partition is valid")
}

/// The lab ordering (both splitters, then both detections) and the two
/// boosted orderings in which one detection precedes the other side's
/// splitter.
pub fn hardy_orderings() -> Vec<MeasurementOrdering> {
    use crate::optics::{hardy_beam_splitter, PARTICLE_MINUS, PARTICLE_PLUS};
    let bs = |p: &str| OrderedEvent::Apply(Element::BeamSplitter(hardy_beam_splitter(p)));
    let measure = |p: &str| OrderedEvent::Measure(detector_partition(p));
    vec![
        MeasurementOrdering::new(
            "lab",
            vec![
                bs(PARTICLE_PLUS),
                bs(PARTICLE_MINUS),
                measure(PARTICLE_PLUS),
                measure(PARTICLE_MINUS),
            ],
        )
        .expect("static ordering is valid"),
        MeasurementOrdering::new(
            "frame-plus",
            vec![
                bs(PARTICLE_PLUS),
                measure(PARTICLE_PLUS),
                bs(PARTICLE_MINUS),
                measure(PARTICLE_MINUS),
            ],
        )
        .expect("static ordering is valid"),
        MeasurementOrdering::new(
            "frame-minus",
            vec![
                bs(PARTICLE_MINUS),
                measure(PARTICLE_MINUS),
                bs(PARTICLE_PLUS),
                measure(PARTICLE_PLUS),
            ],
        )
        .expect("static ordering is valid"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ObservablePartition;
    use crate::optics::{
        hardy_beam_splitter, hardy_initial, BeamSplitter, ReflectionWiring, PARTICLE_MINUS,
        PARTICLE_PLUS,
    };
    use crate::rng::RngStream;
    use crate::state::ket1;
    use num_complex::Complex64;

    fn measure(particle: &str) -> OrderedEvent {
        OrderedEvent::Measure(detector_partition(particle))
    }

    fn lab_ordering() -> MeasurementOrdering {
        hardy_orderings().remove(0)
    }

    fn frame_plus_ordering() -> MeasurementOrdering {
        hardy_orderings().remove(1)
    }

    fn frame_minus_ordering() -> MeasurementOrdering {
        hardy_orderings().remove(2)
    }

    fn dd_outcomes() -> BTreeMap<String, String> {
        BTreeMap::from([
            (PARTICLE_PLUS.to_string(), "d+".to_string()),
            (PARTICLE_MINUS.to_string(), "d-".to_string()),
        ])
    }

    #[test]
    fn early_detection_in_the_boosted_frame_forces_the_far_path() {
        let report =
            first_measurement_residual(&hardy_initial(), &frame_plus_ordering(), &dd_outcomes())
                .unwrap()
                .unwrap();
        let u = Ket::basis(BasisLabel::single(PARTICLE_MINUS, "u"));
        assert!(report.equal_up_to_global_phase(&u, 1e-12));

        let report =
            first_measurement_residual(&hardy_initial(), &frame_minus_ordering(), &dd_outcomes())
                .unwrap()
                .unwrap();
        let u = Ket::basis(BasisLabel::single(PARTICLE_PLUS, "u"));
        assert!(report.equal_up_to_global_phase(&u, 1e-12));
    }

    #[test]
    fn lab_ordering_joint_dd_probability_is_one_twelfth() {
        let run = evolve_ordered(&hardy_initial(), &lab_ordering(), &dd_outcomes()).unwrap();
        assert!(run.residual.is_none());
        assert!((run.probability - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn joint_probabilities_are_ordering_invariant() {
        for plus in ["c+", "d+"] {
            for minus in ["c-", "d-"] {
                let outcomes = BTreeMap::from([
                    (PARTICLE_PLUS.to_string(), plus.to_string()),
                    (PARTICLE_MINUS.to_string(), minus.to_string()),
                ]);
                let p_lab = evolve_ordered(&hardy_initial(), &lab_ordering(), &outcomes)
                    .unwrap()
                    .probability;
                for ordering in [frame_plus_ordering(), frame_minus_ordering()] {
                    let p = evolve_ordered(&hardy_initial(), &ordering, &outcomes)
                        .unwrap()
                        .probability;
                    assert!(
                        (p - p_lab).abs() < 1e-12,
                        "{plus},{minus} under {}",
                        ordering.name
                    );
                }
            }
        }
    }

    #[test]
    fn marginal_detection_probability_is_frame_independent() {
        for ordering in [lab_ordering(), frame_plus_ordering(), frame_minus_ordering()] {
            let p = marginal_probability(&hardy_initial(), &ordering, PARTICLE_PLUS, "d+")
                .unwrap();
            assert!(
                (p - 1.0 / 6.0).abs() < 1e-12,
                "marginal {p} under {}",
                ordering.name
            );
        }
    }

    #[test]
    fn joint_dd_conditioning_exposes_the_missing_component() {
        let orderings = [frame_plus_ordering(), frame_minus_ordering()];
        let report = retrodiction_report(&hardy_initial(), &orderings, &dd_outcomes()).unwrap();
        assert!(report.contradiction);
        let uu = BasisLabel::new([(PARTICLE_PLUS, "u"), (PARTICLE_MINUS, "u")]).unwrap();
        assert!(report.joint_required.contains(&uu));
        assert_eq!(report.missing_from_initial.len(), 1);
        assert!(report.missing_from_initial.contains(&uu));
    }

    #[test]
    fn joint_cc_conditioning_forces_nothing() {
        let outcomes = BTreeMap::from([
            (PARTICLE_PLUS.to_string(), "c+".to_string()),
            (PARTICLE_MINUS.to_string(), "c-".to_string()),
        ]);
        let orderings = [frame_plus_ordering(), frame_minus_ordering()];
        let report = retrodiction_report(&hardy_initial(), &orderings, &outcomes).unwrap();
        assert!(!report.contradiction);
        assert!(report.forced.is_empty());
        // Both conditional supports keep two paths open.
        for support in report.conditional_supports.values() {
            assert_eq!(support.len(), 2);
        }
    }

    #[test]
    fn product_input_never_contradicts() {
        let product = ket1(PARTICLE_PLUS, [("u", Complex64::new(0.6, 0.0)), ("v", Complex64::new(0.8, 0.0))])
            .unwrap()
            .tensor(
                &ket1(
                    PARTICLE_MINUS,
                    [
                        ("u", Complex64::new(0.8, 0.0)),
                        ("v", Complex64::new(0.6, 0.0)),
                    ],
                )
                .unwrap(),
            )
            .unwrap();
        for plus in ["c+", "d+"] {
            for minus in ["c-", "d-"] {
                let outcomes = BTreeMap::from([
                    (PARTICLE_PLUS.to_string(), plus.to_string()),
                    (PARTICLE_MINUS.to_string(), minus.to_string()),
                ]);
                let orderings = [frame_plus_ordering(), frame_minus_ordering()];
                let report = retrodiction_report(&product, &orderings, &outcomes).unwrap();
                assert!(!report.contradiction, "{plus},{minus}");
            }
        }
    }

    #[test]
    fn adding_an_ordering_never_deletes_a_missing_label() {
        let one = [frame_plus_ordering()];
        let both = [frame_plus_ordering(), frame_minus_ordering()];
        let first = retrodiction_report(&hardy_initial(), &one, &dd_outcomes()).unwrap();
        let second = retrodiction_report(&hardy_initial(), &both, &dd_outcomes()).unwrap();
        for missing in &first.missing_from_initial {
            assert!(
                second
                    .missing_from_initial
                    .iter()
                    .any(|label| label.extends(missing)),
                "label {missing} vanished"
            );
        }
    }

    /// Randomized two-particle scenarios: joint outcome probabilities agree
    /// across measurement orderings to 1e-12.
    #[test]
    fn ordering_invariance_over_random_scenarios() {
        let mut rng = RngStream::new(808);
        for trial in 0..100 {
            let terms: Vec<_> = ["u", "v"]
                .iter()
                .flat_map(|p| ["u", "v"].iter().map(move |m| (*p, *m)))
                .map(|(p, m)| {
                    (
                        BasisLabel::new([(PARTICLE_PLUS, p), (PARTICLE_MINUS, m)]).unwrap(),
                        Complex64::new(rng.standard_normal(), rng.standard_normal()),
                    )
                })
                .collect();
            let initial = Ket::new(terms).unwrap().normalized().unwrap();

            let mut random_bs = |particle: &str| {
                let wiring = if rng.uniform() < 0.5 {
                    ReflectionWiring::Straight
                } else {
                    ReflectionWiring::Crossed
                };
                OrderedEvent::Apply(Element::BeamSplitter(
                    BeamSplitter::new(particle, ("u", "v"), ("c", "d"), rng.uniform(), wiring)
                        .unwrap(),
                ))
            };
            let bs_plus = random_bs(PARTICLE_PLUS);
            let bs_minus = random_bs(PARTICLE_MINUS);

            let lab = MeasurementOrdering::new(
                "lab",
                vec![
                    bs_plus.clone(),
                    bs_minus.clone(),
                    measure(PARTICLE_PLUS),
                    measure(PARTICLE_MINUS),
                ],
            )
            .unwrap();
            let alt = MeasurementOrdering::new(
                "alt",
                vec![
                    bs_plus.clone(),
                    measure(PARTICLE_PLUS),
                    bs_minus.clone(),
                    measure(PARTICLE_MINUS),
                ],
            )
            .unwrap();
            let alt2 = MeasurementOrdering::new(
                "alt2",
                vec![
                    bs_minus,
                    measure(PARTICLE_MINUS),
                    bs_plus,
                    measure(PARTICLE_PLUS),
                ],
            )
            .unwrap();

            for plus in ["c+", "d+"] {
                for minus in ["c-", "d-"] {
                    let outcomes = BTreeMap::from([
                        (PARTICLE_PLUS.to_string(), plus.to_string()),
                        (PARTICLE_MINUS.to_string(), minus.to_string()),
                    ]);
                    let prob = |ordering: &MeasurementOrdering| {
                        match evolve_ordered(&initial, ordering, &outcomes) {
                            Ok(run) => run.probability,
                            Err(Error::ImpossibleOutcome(_)) => 0.0,
                            Err(e) => panic!("unexpected error: {e}"),
                        }
                    };
                    let p0 = prob(&lab);
                    assert!((prob(&alt) - p0).abs() < 1e-12, "trial {trial}");
                    assert!((prob(&alt2) - p0).abs() < 1e-12, "trial {trial}");
                }
            }
        }
    }

    #[test]
    fn double_measurement_of_a_subsystem_is_rejected() {
        let events = vec![measure(PARTICLE_PLUS), measure(PARTICLE_PLUS)];
        assert!(matches!(
            MeasurementOrdering::new("bad", events),
            Err(Error::InvalidCircuit(_))
        ));
    }

    #[test]
    fn impossible_conditioning_is_reported() {
        // After conditioning d+ in the plus frame, the minus particle is on
        // path u; asking for outcome v has zero probability.
        let ordering = MeasurementOrdering::new(
            "probe",
            vec![
                OrderedEvent::Apply(Element::BeamSplitter(hardy_beam_splitter(PARTICLE_PLUS))),
                measure(PARTICLE_PLUS),
                OrderedEvent::Measure(
                    ObservablePartition::by_mode(PARTICLE_MINUS, ["u", "v"]).unwrap(),
                ),
            ],
        )
        .unwrap();
        let outcomes = BTreeMap::from([
            (PARTICLE_PLUS.to_string(), "d+".to_string()),
            (PARTICLE_MINUS.to_string(), "v".to_string()),
        ]);
        assert!(matches!(
            evolve_ordered(&hardy_initial(), &ordering, &outcomes),
            Err(Error::ImpossibleOutcome(_))
        ));
    }
}
