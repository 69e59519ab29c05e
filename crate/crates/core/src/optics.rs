//! Beam splitters, phase shifters, and mirrors as staged unitaries on
//! named modes, plus the canonical interferometer setups used throughout
//! the test scenarios.
//!
//! Conventions: a beam splitter of reflectivity R transmits with real
//! amplitude √(1−R) and reflects with amplitude i√R; a mirror relabels a
//! mode and multiplies its amplitude by exactly i. Port wiring is explicit
//! per element because the geometry, not the algebra, decides which input
//! reflects toward which output.

use num_complex::Complex64;
use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::state::{BasisLabel, Ket};

/// Where the first input's reflected amplitude goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReflectionWiring {
    /// in.0 reflects to out.0 (and in.1 to out.1).
    Straight,
    /// in.0 reflects to out.1 (and in.1 to out.0).
    Crossed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamSplitter {
    pub subsystem: String,
    pub in_modes: (String, String),
    pub out_modes: (String, String),
    pub reflectivity: f64,
    pub wiring: ReflectionWiring,
}

impl BeamSplitter {
    pub fn new(
        subsystem: impl Into<String>,
        in_modes: (impl Into<String>, impl Into<String>),
        out_modes: (impl Into<String>, impl Into<String>),
        reflectivity: f64,
        wiring: ReflectionWiring,
    ) -> Result<Self> {
        let in_modes = (in_modes.0.into(), in_modes.1.into());
        let out_modes = (out_modes.0.into(), out_modes.1.into());
        if in_modes.0 == in_modes.1 || out_modes.0 == out_modes.1 {
            return Err(Error::InvalidCircuit(
                "beam splitter ports must name two distinct modes".into(),
            ));
        }
        if !(0.0..=1.0).contains(&reflectivity) {
            return Err(Error::InvalidCircuit(format!(
                "reflectivity {reflectivity} outside [0, 1]"
            )));
        }
        Ok(Self {
            subsystem: subsystem.into(),
            in_modes,
            out_modes,
            reflectivity,
            wiring,
        })
    }

    /// 2x2 transfer matrix, rows indexed by out mode, columns by in mode.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let t = Complex64::new((1.0 - self.reflectivity).sqrt(), 0.0);
        let r = Complex64::new(0.0, self.reflectivity.sqrt());
        match self.wiring {
            ReflectionWiring::Straight => [[r, t], [t, r]],
            ReflectionWiring::Crossed => [[t, r], [r, t]],
        }
    }

    /// Max deviation of U†U from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let m = self.matrix();
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let dot: Complex64 = (0..2).map(|k| m[k][i].conj() * m[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - expected).norm());
            }
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseShifter {
    pub subsystem: String,
    pub mode: String,
    pub phase: f64,
}

impl PhaseShifter {
    pub fn new(subsystem: impl Into<String>, mode: impl Into<String>, phase: f64) -> Self {
        Self {
            subsystem: subsystem.into(),
            mode: mode.into(),
            phase,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mirror {
    pub subsystem: String,
    pub from: String,
    pub to: String,
}

impl Mirror {
    pub fn new(subsystem: impl Into<String>, from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            subsystem: subsystem.into(),
            from: from.into(),
            to: to.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    BeamSplitter(BeamSplitter),
    PhaseShifter(PhaseShifter),
    Mirror(Mirror),
}

impl Element {
    pub fn subsystem(&self) -> &str {
        match self {
            Element::BeamSplitter(b) => &b.subsystem,
            Element::PhaseShifter(p) => &p.subsystem,
            Element::Mirror(m) => &m.subsystem,
        }
    }

    /// Modes this element reads or writes, for stage-disjointness checks.
    fn touched_modes(&self) -> BTreeSet<(&str, &str)> {
        match self {
            Element::BeamSplitter(b) => BTreeSet::from([
                (b.subsystem.as_str(), b.in_modes.0.as_str()),
                (b.subsystem.as_str(), b.in_modes.1.as_str()),
                (b.subsystem.as_str(), b.out_modes.0.as_str()),
                (b.subsystem.as_str(), b.out_modes.1.as_str()),
            ]),
            Element::PhaseShifter(p) => {
                BTreeSet::from([(p.subsystem.as_str(), p.mode.as_str())])
            }
            Element::Mirror(m) => BTreeSet::from([
                (m.subsystem.as_str(), m.from.as_str()),
                (m.subsystem.as_str(), m.to.as_str()),
            ]),
        }
    }
}

/// Applies one element to a ket.
///
/// A beam splitter requires at least one of its input modes in the state's
/// support (the other port may carry vacuum); phase shifters and mirrors
/// addressing absent modes act as the identity.
pub fn apply_element(ket: &Ket, element: &Element) -> Result<Ket> {
    match element {
        Element::BeamSplitter(bs) => apply_beam_splitter(ket, bs),
        Element::PhaseShifter(ps) => {
            let phase = Complex64::from_polar(1.0, ps.phase);
            let terms = ket.terms().map(|(label, amp)| {
                if label.mode(&ps.subsystem) == Some(ps.mode.as_str()) {
                    (label.clone(), amp * phase)
                } else {
                    (label.clone(), amp)
                }
            });
            Ket::new(terms.collect::<Vec<_>>())
        }
        Element::Mirror(m) => {
            let occupied = ket
                .terms()
                .any(|(l, _)| l.mode(&m.subsystem) == Some(m.to.as_str()));
            let addressed = ket
                .terms()
                .any(|(l, _)| l.mode(&m.subsystem) == Some(m.from.as_str()));
            if occupied && addressed {
                return Err(Error::ModeClash(format!(
                    "mirror {}:{} -> {}: target mode already populated",
                    m.subsystem, m.from, m.to
                )));
            }
            let i = Complex64::new(0.0, 1.0);
            let terms = ket.terms().map(|(label, amp)| {
                if label.mode(&m.subsystem) == Some(m.from.as_str()) {
                    (label.with_mode(&m.subsystem, m.to.clone()), amp * i)
                } else {
                    (label.clone(), amp)
                }
            });
            Ket::new(terms.collect::<Vec<_>>())
        }
    }
}

fn apply_beam_splitter(ket: &Ket, bs: &BeamSplitter) -> Result<Ket> {
    let (in0, in1) = (&bs.in_modes.0, &bs.in_modes.1);
    let (out0, out1) = (&bs.out_modes.0, &bs.out_modes.1);
    let m = bs.matrix();

    let mut any_input = false;
    for (label, _) in ket.terms() {
        match label.mode(&bs.subsystem) {
            Some(mode) if mode == in0 || mode == in1 => any_input = true,
            Some(mode) if (mode == out0 || mode == out1) && mode != in0 && mode != in1 => {
                return Err(Error::ModeClash(format!(
                    "beam splitter output mode {}:{mode} already populated",
                    bs.subsystem
                )));
            }
            _ => {}
        }
    }
    if !any_input {
        return Err(Error::ModeMissing(format!(
            "beam splitter inputs {}:{in0}/{in1} not in the state",
            bs.subsystem
        )));
    }

    let mut terms = Vec::with_capacity(ket.num_terms() * 2);
    for (label, amp) in ket.terms() {
        let col = match label.mode(&bs.subsystem) {
            Some(mode) if mode == in0 => 0,
            Some(mode) if mode == in1 => 1,
            _ => {
                terms.push((label.clone(), amp));
                continue;
            }
        };
        terms.push((label.with_mode(&bs.subsystem, out0.clone()), m[0][col] * amp));
        terms.push((label.with_mode(&bs.subsystem, out1.clone()), m[1][col] * amp));
    }
    Ket::new(terms)
}

/// A staged sequence of elements; elements within one stage must touch
/// disjoint modes.
#[derive(Clone, Debug)]
pub struct OpticalCircuit {
    stages: Vec<Vec<Element>>,
}

impl OpticalCircuit {
    pub fn new(stages: Vec<Vec<Element>>) -> Result<Self> {
        for (idx, stage) in stages.iter().enumerate() {
            let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
            for element in stage {
                for (s, m) in element.touched_modes() {
                    if !seen.insert((s.to_string(), m.to_string())) {
                        return Err(Error::InvalidCircuit(format!(
                            "stage {idx}: mode {s}:{m} touched by two elements"
                        )));
                    }
                }
            }
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[Vec<Element>] {
        &self.stages
    }

    /// Applies the circuit stage by stage, returning every intermediate
    /// state (final state last).
    pub fn evolve(&self, input: &Ket) -> Result<Vec<Ket>> {
        let mut states = Vec::with_capacity(self.stages.len());
        let mut current = input.clone();
        for stage in &self.stages {
            for element in stage {
                current = apply_element(&current, element)?;
            }
            states.push(current.clone());
        }
        Ok(states)
    }

    /// Final state only.
    pub fn output(&self, input: &Ket) -> Result<Ket> {
        Ok(self
            .evolve(input)?
            .pop()
            .unwrap_or_else(|| input.clone()))
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// ---------------------------------------------------------------------------
// Two-particle path-entangled interferometer (subsystems "p+" and "p-",
// paths u/v in, detector ports c/d out).
// ---------------------------------------------------------------------------

pub const PARTICLE_PLUS: &str = "p+";
pub const PARTICLE_MINUS: &str = "p-";

/// Which side's beam splitter(s) to apply in the two-particle setup.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HardySide {
    PlusOnly,
    MinusOnly,
    Both,
}

/// Initial path-entangled pair: (i|u+,v-⟩ + |v+,v-⟩ + i|v+,u-⟩)/√3.
/// The |u+,u-⟩ component is absent by construction.
pub fn hardy_initial() -> Ket {
    let s = 1.0 / 3f64.sqrt();
    let label = |p: &str, m: &str| BasisLabel::new([(PARTICLE_PLUS, p), (PARTICLE_MINUS, m)]);
    Ket::new([
        (label("u", "v").unwrap(), c(0.0, s)),
        (label("v", "v").unwrap(), c(s, 0.0)),
        (label("v", "u").unwrap(), c(0.0, s)),
    ])
    .unwrap()
}

/// 50/50 splitter for one particle: u transmits to c and reflects to d,
/// v reflects to c and transmits to d.
pub fn hardy_beam_splitter(particle: &str) -> BeamSplitter {
    BeamSplitter::new(particle, ("u", "v"), ("c", "d"), 0.5, ReflectionWiring::Crossed)
        .expect("static wiring is valid")
}

/// Applies only the requested beam splitter(s) to the entangled input.
pub fn hardy_frame_partial(input: &Ket, side: HardySide) -> Result<Ket> {
    let bs_plus = Element::BeamSplitter(hardy_beam_splitter(PARTICLE_PLUS));
    let bs_minus = Element::BeamSplitter(hardy_beam_splitter(PARTICLE_MINUS));
    match side {
        HardySide::PlusOnly => apply_element(input, &bs_plus),
        HardySide::MinusOnly => apply_element(input, &bs_minus),
        HardySide::Both => apply_element(&apply_element(input, &bs_plus)?, &bs_minus),
    }
}

// ---------------------------------------------------------------------------
// Mach-Zehnder interferometer (subsystem "photon"): input a, internal arms
// c/d with phase shifters, outputs e/f. Stage relabeling carries the path
// phases, so no mirrors appear here.
// ---------------------------------------------------------------------------

pub const MZ_PHOTON: &str = "photon";

pub fn mach_zehnder_circuit(phi_c: f64, phi_d: f64) -> OpticalCircuit {
    let bs1 = BeamSplitter::new(
        MZ_PHOTON,
        ("a", "a'"),
        ("c", "d"),
        0.5,
        ReflectionWiring::Straight,
    )
    .unwrap();
    let bs2 = BeamSplitter::new(
        MZ_PHOTON,
        ("c", "d"),
        ("e", "f"),
        0.5,
        ReflectionWiring::Straight,
    )
    .unwrap();
    OpticalCircuit::new(vec![
        vec![Element::BeamSplitter(bs1)],
        vec![
            Element::PhaseShifter(PhaseShifter::new(MZ_PHOTON, "c", phi_c)),
            Element::PhaseShifter(PhaseShifter::new(MZ_PHOTON, "d", phi_d)),
        ],
        vec![Element::BeamSplitter(bs2)],
    ])
    .unwrap()
}

pub fn mach_zehnder_input() -> Ket {
    Ket::basis(BasisLabel::single(MZ_PHOTON, "a"))
}

/// Closed-form Mach-Zehnder output: ie^{iα}(sin β |e⟩ + cos β |f⟩) with
/// α = (φ_d + φ_c)/2 and β = (φ_d − φ_c)/2.
pub fn mach_zehnder_closed_form(phi_c: f64, phi_d: f64) -> Ket {
    let alpha = (phi_d + phi_c) / 2.0;
    let beta = (phi_d - phi_c) / 2.0;
    let lead = c(0.0, 1.0) * Complex64::from_polar(1.0, alpha);
    // A vanishing sin or cos just drops that port's term.
    Ket::new([
        (BasisLabel::single(MZ_PHOTON, "e"), lead * beta.sin()),
        (BasisLabel::single(MZ_PHOTON, "f"), lead * beta.cos()),
    ])
    .expect("sin and cos cannot both vanish")
}

// ---------------------------------------------------------------------------
// Which-way splitter (subsystem "signal"): a 50/50 splitter sends a
// reflected packet a via one mirror and a transmitted packet b via three
// retarding mirrors onto the same detector track, giving
// -(e^{iφ}|a⟩ + i|b⟩)/√2.
// ---------------------------------------------------------------------------

pub const SIGNAL: &str = "signal";

pub fn which_way_circuit(phi: f64) -> OpticalCircuit {
    let bs = BeamSplitter::new(
        SIGNAL,
        ("s", "s'"),
        ("a0", "b0"),
        0.5,
        ReflectionWiring::Straight,
    )
    .unwrap();
    OpticalCircuit::new(vec![
        vec![Element::BeamSplitter(bs)],
        vec![
            Element::Mirror(Mirror::new(SIGNAL, "a0", "a")),
            Element::Mirror(Mirror::new(SIGNAL, "b0", "b1")),
        ],
        vec![Element::Mirror(Mirror::new(SIGNAL, "b1", "b2"))],
        vec![Element::Mirror(Mirror::new(SIGNAL, "b2", "b"))],
        vec![Element::PhaseShifter(PhaseShifter::new(SIGNAL, "a", phi))],
    ])
    .unwrap()
}

pub fn which_way_input() -> Ket {
    Ket::basis(BasisLabel::single(SIGNAL, "s"))
}

/// Final split-packet state of the which-way setup.
pub fn which_way_state(phi: f64) -> Ket {
    which_way_circuit(phi)
        .output(&which_way_input())
        .expect("static circuit evolves")
}

// ---------------------------------------------------------------------------
// Triple-packet interferometer (subsystem "photon"): a 1/3 splitter and a
// 50/50 splitter fan the source packet into three equal copies a, b, c
// that cross in one region. Packet c is reflected once, so a π/2 plate
// compensates; the result is -(e^{iθ1}|a⟩ + |b⟩ + e^{iθ3}|c⟩)/√3.
// ---------------------------------------------------------------------------

pub fn triple_interference_circuit(theta_1: f64, theta_3: f64) -> OpticalCircuit {
    let bs = BeamSplitter::new(
        MZ_PHOTON,
        ("s", "s'"),
        ("c", "t"),
        1.0 / 3.0,
        ReflectionWiring::Straight,
    )
    .unwrap();
    let bs_prime = BeamSplitter::new(
        MZ_PHOTON,
        ("t", "t'"),
        ("a0", "b0"),
        0.5,
        ReflectionWiring::Straight,
    )
    .unwrap();
    OpticalCircuit::new(vec![
        vec![Element::BeamSplitter(bs)],
        vec![Element::BeamSplitter(bs_prime)],
        vec![
            Element::Mirror(Mirror::new(MZ_PHOTON, "a0", "a")),
            Element::Mirror(Mirror::new(MZ_PHOTON, "b0", "b1")),
        ],
        vec![Element::Mirror(Mirror::new(MZ_PHOTON, "b1", "b"))],
        // Compensator for the once-reflected packet c.
        vec![Element::PhaseShifter(PhaseShifter::new(
            MZ_PHOTON,
            "c",
            FRAC_PI_2,
        ))],
        vec![
            Element::PhaseShifter(PhaseShifter::new(MZ_PHOTON, "a", theta_1)),
            Element::PhaseShifter(PhaseShifter::new(MZ_PHOTON, "c", theta_3)),
        ],
    ])
    .unwrap()
}

pub fn triple_interference_input() -> Ket {
    Ket::basis(BasisLabel::single(MZ_PHOTON, "s"))
}

pub fn triple_interference_state(theta_1: f64, theta_3: f64) -> Ket {
    triple_interference_circuit(theta_1, theta_3)
        .output(&triple_interference_input())
        .expect("static circuit evolves")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use std::f64::consts::PI;

    fn pair(p: &str, m: &str) -> BasisLabel {
        BasisLabel::new([(PARTICLE_PLUS, p), (PARTICLE_MINUS, m)]).unwrap()
    }

    #[test]
    fn beam_splitter_matrix_is_unitary_for_random_reflectivities() {
        let mut rng = RngStream::new(17);
        for _ in 0..100 {
            let r = rng.uniform();
            for wiring in [ReflectionWiring::Straight, ReflectionWiring::Crossed] {
                let bs = BeamSplitter::new("p", ("x", "y"), ("w", "z"), r, wiring).unwrap();
                assert!(bs.unitarity_defect() < 1e-12);
            }
        }
    }

    /// Both splitters on the entangled pair input produce amplitudes
    /// (-3, i, i, -1)/(2√3) on (cc, cd, dc, dd).
    #[test]
    fn both_splitters_give_detector_port_amplitudes() {
        let out = hardy_frame_partial(&hardy_initial(), HardySide::Both).unwrap();
        let k = 1.0 / (2.0 * 3f64.sqrt());
        let expected = [
            ("c", "c", Complex64::new(-3.0 * k, 0.0)),
            ("c", "d", Complex64::new(0.0, k)),
            ("d", "c", Complex64::new(0.0, k)),
            ("d", "d", Complex64::new(-k, 0.0)),
        ];
        assert_eq!(out.num_terms(), 4);
        for (p, m, amp) in expected {
            assert!(
                (out.amplitude(&pair(p, m)) - amp).norm() < 1e-12,
                "term {p},{m}"
            );
        }
        // Overlap with the joint d+,d- port.
        let dd = Ket::basis(pair("d", "d"));
        assert!((out.inner(&dd) - Complex64::new(-k, 0.0)).norm() < 1e-12);
    }

    /// Plus-side-only evolution: amplitudes -1/√6, 2i/√6, i/√6 on
    /// (c+,u-), (c+,v-), (d+,u-); the d+,v- port cancels.
    #[test]
    fn plus_side_only_partial_state() {
        let out = hardy_frame_partial(&hardy_initial(), HardySide::PlusOnly).unwrap();
        let s6 = 6f64.sqrt();
        assert_eq!(out.num_terms(), 3);
        assert!((out.amplitude(&pair("c", "u")) - Complex64::new(-1.0 / s6, 0.0)).norm() < 1e-12);
        assert!((out.amplitude(&pair("c", "v")) - Complex64::new(0.0, 2.0 / s6)).norm() < 1e-12);
        assert!((out.amplitude(&pair("d", "u")) - Complex64::new(0.0, 1.0 / s6)).norm() < 1e-12);
        assert_eq!(out.amplitude(&pair("d", "v")), Complex64::new(0.0, 0.0));
    }

    /// Minus-side-only evolution mirrors the plus side with roles swapped.
    #[test]
    fn minus_side_only_partial_state() {
        let out = hardy_frame_partial(&hardy_initial(), HardySide::MinusOnly).unwrap();
        let s6 = 6f64.sqrt();
        assert_eq!(out.num_terms(), 3);
        assert!((out.amplitude(&pair("u", "c")) - Complex64::new(-1.0 / s6, 0.0)).norm() < 1e-12);
        assert!((out.amplitude(&pair("v", "c")) - Complex64::new(0.0, 2.0 / s6)).norm() < 1e-12);
        assert!((out.amplitude(&pair("u", "d")) - Complex64::new(0.0, 1.0 / s6)).norm() < 1e-12);
    }

    #[test]
    fn partial_evolution_on_wrong_alphabet_reports_missing_modes() {
        let wrong = crate::state::ket1("p+", [("x", Complex64::new(1.0, 0.0))])
            .unwrap();
        assert!(matches!(
            hardy_frame_partial(&wrong, HardySide::PlusOnly),
            Err(Error::ModeMissing(_))
        ));
    }

    #[test]
    fn phase_shifter_zero_is_identity_and_inverts_exactly() {
        let input = hardy_initial();
        let zero = Element::PhaseShifter(PhaseShifter::new(PARTICLE_PLUS, "u", 0.0));
        assert_eq!(apply_element(&input, &zero).unwrap(), input);

        let fwd = Element::PhaseShifter(PhaseShifter::new(PARTICLE_PLUS, "u", 0.7));
        let back = Element::PhaseShifter(PhaseShifter::new(PARTICLE_PLUS, "u", -0.7));
        let round = apply_element(&apply_element(&input, &fwd).unwrap(), &back).unwrap();
        for (label, amp) in input.terms() {
            assert!((round.amplitude(label) - amp).norm() < 1e-14);
        }
    }

    #[test]
    fn mirror_relabels_and_multiplies_by_i() {
        let input = crate::state::ket1("p", [("b", Complex64::new(1.0, 0.0))]).unwrap();
        let m = Element::Mirror(Mirror::new("p", "b", "b'"));
        let out = apply_element(&input, &m).unwrap();
        assert_eq!(
            out.amplitude(&BasisLabel::single("p", "b'")),
            Complex64::new(0.0, 1.0)
        );
        assert_eq!(out.num_terms(), 1);
    }

    #[test]
    fn two_fifty_fifty_splitters_compose_to_swap_with_phase() {
        let bs = BeamSplitter::new("p", ("x", "y"), ("x", "y"), 0.5, ReflectionWiring::Crossed)
            .unwrap();
        let e = Element::BeamSplitter(bs);
        let x = Ket::basis(BasisLabel::single("p", "x"));
        let once = apply_element(&x, &e).unwrap();
        let twice = apply_element(&once, &e).unwrap();
        // |x⟩ -> i|y⟩ overall.
        assert!(
            (twice.amplitude(&BasisLabel::single("p", "y")) - Complex64::new(0.0, 1.0)).norm()
                < 1e-12
        );
        assert!(twice.amplitude(&BasisLabel::single("p", "x")).norm() < 1e-12);
    }

    #[test]
    fn mach_zehnder_matches_closed_form_on_a_phase_grid() {
        for i in 0..8 {
            for j in 0..8 {
                let (phi_c, phi_d) = (i as f64 * PI / 4.0, j as f64 * PI / 4.0);
                let out = mach_zehnder_circuit(phi_c, phi_d)
                    .output(&mach_zehnder_input())
                    .unwrap();
                let reference = mach_zehnder_closed_form(phi_c, phi_d);
                for (label, amp) in reference.terms() {
                    assert!(
                        (out.amplitude(label) - amp).norm() < 1e-12,
                        "phi_c={phi_c} phi_d={phi_d} label={label}"
                    );
                }
                assert!((out.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mach_zehnder_antisymmetric_point_sends_all_light_to_e() {
        // phi_c = 0, phi_d = pi gives beta = pi/2: output exactly -|e⟩.
        let out = mach_zehnder_circuit(0.0, PI)
            .output(&mach_zehnder_input())
            .unwrap();
        assert!(
            (out.amplitude(&BasisLabel::single(MZ_PHOTON, "e")) - Complex64::new(-1.0, 0.0))
                .norm()
                < 1e-12
        );
        assert!(out.amplitude(&BasisLabel::single(MZ_PHOTON, "f")).norm() < 1e-12);
    }

    #[test]
    fn mach_zehnder_balanced_point_sends_all_light_to_f() {
        let out = mach_zehnder_circuit(0.0, 0.0)
            .output(&mach_zehnder_input())
            .unwrap();
        assert!(
            (out.amplitude(&BasisLabel::single(MZ_PHOTON, "f")) - Complex64::new(0.0, 1.0))
                .norm()
                < 1e-12
        );
        assert!(out.amplitude(&BasisLabel::single(MZ_PHOTON, "e")).norm() < 1e-12);
    }

    #[test]
    fn which_way_state_is_minus_phase_a_minus_i_b_over_sqrt2() {
        let phi = 0.42;
        let out = which_way_state(phi);
        let inv = 1.0 / 2f64.sqrt();
        let expected_a = -Complex64::from_polar(inv, phi);
        let expected_b = Complex64::new(0.0, -inv);
        assert!(
            (out.amplitude(&BasisLabel::single(SIGNAL, "a")) - expected_a).norm() < 1e-12
        );
        assert!(
            (out.amplitude(&BasisLabel::single(SIGNAL, "b")) - expected_b).norm() < 1e-12
        );
        assert_eq!(out.num_terms(), 2);
    }

    #[test]
    fn triple_interference_state_matches_reference_form() {
        let (t1, t3) = (0.3, -0.8);
        let out = triple_interference_state(t1, t3);
        let s = -1.0 / 3f64.sqrt();
        let expected = Ket::new([
            (
                BasisLabel::single(MZ_PHOTON, "a"),
                Complex64::from_polar(1.0, t1) * s,
            ),
            (BasisLabel::single(MZ_PHOTON, "b"), Complex64::new(s, 0.0)),
            (
                BasisLabel::single(MZ_PHOTON, "c"),
                Complex64::from_polar(1.0, t3) * s,
            ),
        ])
        .unwrap();
        assert!(out.equal_up_to_global_phase(&expected, 1e-12));
        // The construction above lands on the reference form exactly, not
        // just up to phase.
        for (label, amp) in expected.terms() {
            assert!((out.amplitude(label) - amp).norm() < 1e-12, "label {label}");
        }
    }

    #[test]
    fn stage_states_are_all_returned() {
        let circuit = triple_interference_circuit(0.0, 0.0);
        let states = circuit.evolve(&triple_interference_input()).unwrap();
        assert_eq!(states.len(), circuit.stages().len());
        for state in &states {
            assert!((state.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stage_with_overlapping_elements_is_rejected() {
        let ps1 = Element::PhaseShifter(PhaseShifter::new("p", "a", 0.1));
        let ps2 = Element::PhaseShifter(PhaseShifter::new("p", "a", 0.2));
        assert!(matches!(
            OpticalCircuit::new(vec![vec![ps1, ps2]]),
            Err(Error::InvalidCircuit(_))
        ));
    }

    /// Randomized circuits on up to 6 modes preserve the norm.
    #[test]
    fn random_circuits_preserve_norm() {
        let mut rng = RngStream::new(7777);
        for trial in 0..1000 {
            let n_modes = 2 + (rng.uniform() * 5.0) as usize; // 2..=6
            let mut modes: Vec<String> = (0..n_modes).map(|i| format!("m{i}")).collect();
            let terms: Vec<_> = modes
                .iter()
                .map(|m| {
                    (
                        BasisLabel::single("p", m.clone()),
                        Complex64::new(rng.standard_normal(), rng.standard_normal()),
                    )
                })
                .collect();
            let mut state = Ket::new(terms).unwrap();
            let input_norm = state.norm();

            let mut fresh = 0usize;
            for _ in 0..8 {
                let pick = (rng.uniform() * 3.0) as usize;
                let element = match pick {
                    0 => {
                        let i = (rng.uniform() * modes.len() as f64) as usize;
                        let mut j = (rng.uniform() * modes.len() as f64) as usize;
                        if j == i {
                            j = (j + 1) % modes.len();
                        }
                        let wiring = if rng.uniform() < 0.5 {
                            ReflectionWiring::Straight
                        } else {
                            ReflectionWiring::Crossed
                        };
                        Element::BeamSplitter(
                            BeamSplitter::new(
                                "p",
                                (modes[i].clone(), modes[j].clone()),
                                (modes[i].clone(), modes[j].clone()),
                                rng.uniform(),
                                wiring,
                            )
                            .unwrap(),
                        )
                    }
                    1 => {
                        let i = (rng.uniform() * modes.len() as f64) as usize;
                        Element::PhaseShifter(PhaseShifter::new(
                            "p",
                            modes[i].clone(),
                            rng.uniform() * PI * 2.0,
                        ))
                    }
                    _ => {
                        let i = (rng.uniform() * modes.len() as f64) as usize;
                        fresh += 1;
                        let to = format!("f{trial}_{fresh}");
                        let m = Element::Mirror(Mirror::new("p", modes[i].clone(), to.clone()));
                        modes[i] = to;
                        m
                    }
                };
                state = apply_element(&state, &element).unwrap();
            }
            assert!(
                (state.norm() - input_norm).abs() < 1e-12,
                "trial {trial}: norm drifted"
            );
        }
    }
}
