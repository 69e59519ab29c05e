//! Per-scenario execution: physics, statistics, and built-in expectations.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

use super::report::{
    ket_terms, BranchRow, Expectation, FrequencyStat, InstabilityReport, IntensityTable,
    MartingaleRow, MismatchRow, PolicyReport, RetrodictionSummary,
};
use super::Params;
use crate::csl;
use crate::detector;
use crate::ensemble;
use crate::error::{Error, Result};
use crate::frames;
use crate::measure::{self, CollapsePolicy, ObservablePartition};
use crate::optics::{self, HardySide, MZ_PHOTON, PARTICLE_MINUS, PARTICLE_PLUS};
use crate::rdm;
use crate::rng::RngStream;
use crate::screen;
use crate::state::{BasisLabel, Ket};

type Sections = BTreeMap<String, PolicyReport>;
type RunnerOut = (Sections, Vec<Expectation>);

/// Largest amplitude deviation between a computed ket and a reference.
fn max_amplitude_deviation(computed: &Ket, reference: &Ket) -> f64 {
    let mut worst = 0.0f64;
    for (label, amp) in reference.terms() {
        worst = worst.max((computed.amplitude(label) - amp).norm());
    }
    for (label, amp) in computed.terms() {
        worst = worst.max((reference.amplitude(label) - amp).norm());
    }
    worst
}

fn binomial_4_sigma(p: f64, trials: u64) -> f64 {
    4.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Tolerance for visibility read off a sampled pattern: the true extremes
/// can fall up to half a grid step away, costing O((2π/N)²) of contrast.
/// On the default grid the fringe extremes land on sample points and the
/// floor applies.
fn grid_visibility_tolerance(grid_points: usize) -> f64 {
    (TAU / grid_points as f64).powi(2).max(1e-10)
}

fn retrodiction_summary(report: &frames::RetrodictionReport) -> RetrodictionSummary {
    RetrodictionSummary {
        forced: report
            .forced
            .iter()
            .map(|(s, modes)| (s.clone(), modes.iter().cloned().collect()))
            .collect(),
        joint_required: report.joint_required.iter().map(|l| l.to_string()).collect(),
        missing_from_initial: report
            .missing_from_initial
            .iter()
            .map(|l| l.to_string())
            .collect(),
        contradiction: report.contradiction,
    }
}

// ---------------------------------------------------------------------------
// hardy
// ---------------------------------------------------------------------------

pub(super) fn run_hardy(_params: &Params, policies: &[CollapsePolicy]) -> Result<RunnerOut> {
    let initial = optics::hardy_initial();
    let after_both = optics::hardy_frame_partial(&initial, HardySide::Both)?;
    let partition_plus = frames::detector_partition(PARTICLE_PLUS);
    let partition_minus = frames::detector_partition(PARTICLE_MINUS);
    let probabilities = measure::born_joint(&after_both, &[&partition_plus, &partition_minus])?;

    let orderings = frames::hardy_orderings();
    let mut marginals = BTreeMap::new();
    for ordering in &orderings {
        let p = frames::marginal_probability(&initial, ordering, PARTICLE_PLUS, "d+")?;
        marginals.insert(format!("p(d+)[{}]", ordering.name), p);
    }

    // Boosted-frame conditionals: which path the unmeasured particle is
    // forced onto when the far detector fires first.
    let plus_partial = optics::hardy_frame_partial(&initial, HardySide::PlusOnly)?;
    let minus_partial = optics::hardy_frame_partial(&initial, HardySide::MinusOnly)?;
    let forced_minus = measure::conditional_state(&plus_partial, &partition_plus, "d+")?;
    let forced_plus = measure::conditional_state(&minus_partial, &partition_minus, "d-")?;
    let p_u_minus = measure::mode_marginals(&forced_minus, PARTICLE_MINUS)?
        .get("u")
        .copied()
        .unwrap_or(0.0);
    let p_u_plus = measure::mode_marginals(&forced_plus, PARTICLE_PLUS)?
        .get("u")
        .copied()
        .unwrap_or(0.0);

    let joint_dd = BTreeMap::from([
        (PARTICLE_PLUS.to_string(), "d+".to_string()),
        (PARTICLE_MINUS.to_string(), "d-".to_string()),
    ]);
    let retro = frames::retrodiction_report(&initial, &orderings, &joint_dd)?;
    let uu = BasisLabel::new([(PARTICLE_PLUS, "u"), (PARTICLE_MINUS, "u")])?;
    let uu_amplitude = initial.amplitude(&uu).norm();

    let mut expectations = vec![
        Expectation::check("hardy: p(c+c-)", 0.75, probabilities["c+c-"], 1e-12),
        Expectation::check("hardy: p(c+d-)", 1.0 / 12.0, probabilities["c+d-"], 1e-12),
        Expectation::check("hardy: p(d+c-)", 1.0 / 12.0, probabilities["d+c-"], 1e-12),
        Expectation::check("hardy: p(d+d-)", 1.0 / 12.0, probabilities["d+d-"], 1e-12),
        Expectation::check("hardy: p(u- | d+, frame-plus)", 1.0, p_u_minus, 1e-10),
        Expectation::check("hardy: p(u+ | d-, frame-minus)", 1.0, p_u_plus, 1e-10),
        Expectation::flag(
            "hardy: retrodiction contradiction for joint (d+,d-)",
            true,
            retro.contradiction,
        ),
        Expectation::check("hardy: initial u+,u- amplitude", 0.0, uu_amplitude, 0.0),
    ];
    for ordering in &orderings {
        expectations.push(Expectation::check(
            format!("hardy: marginal p(d+) [{}]", ordering.name),
            1.0 / 6.0,
            marginals[&format!("p(d+)[{}]", ordering.name)],
            1e-12,
        ));
    }

    let mut sections = Sections::new();
    for policy in policies {
        let mut section = PolicyReport {
            probabilities: Some(probabilities.clone()),
            marginals: Some(marginals.clone()),
            ..PolicyReport::default()
        };
        if *policy == CollapsePolicy::Collapse {
            section.conditional_states = Some(BTreeMap::from([
                ("frame-plus given d+".to_string(), ket_terms(&forced_minus)),
                ("frame-minus given d-".to_string(), ket_terms(&forced_plus)),
            ]));
            section.retrodiction = Some(retrodiction_summary(&retro));
            section.scalars.insert("p(u-|d+)".to_string(), p_u_minus);
            section.scalars.insert("p(u+|d-)".to_string(), p_u_plus);
        }
        sections.insert(policy.key().to_string(), section);
    }
    Ok((sections, expectations))
}

// ---------------------------------------------------------------------------
// mz-histories
// ---------------------------------------------------------------------------

pub(super) fn run_mz_histories(params: &Params, policies: &[CollapsePolicy]) -> Result<RunnerOut> {
    let phi_c = params.get("phi_c");
    let phi_d = params.get("phi_d");
    let kappa0 = params.get("kappa0");
    let grid_points = params.positive_count("grid_points")? as usize;
    if kappa0 <= 0.0 {
        return Err(Error::InvalidParameter("kappa0 must be positive".into()));
    }

    let circuit = optics::mach_zehnder_circuit(phi_c, phi_d);
    let final_state = circuit.output(&optics::mach_zehnder_input())?;
    let closed_form = optics::mach_zehnder_closed_form(phi_c, phi_d);
    let closed_form_deviation = max_amplitude_deviation(&final_state, &closed_form);

    // Output packets cross at +/- kappa0; the grid spans both beat periods.
    let wavenumbers = BTreeMap::from([("e".to_string(), kappa0), ("f".to_string(), -kappa0)]);
    let grid = screen::uniform_grid(TAU / kappa0, grid_points);
    let coherent_components = screen::components_from_ket(&final_state, MZ_PHOTON, &wavenumbers)?;
    let coherent_map = screen::intensity_pattern(&coherent_components, &grid);
    let coherent_visibility = screen::visibility(&coherent_map)?;

    // Definite-history mixture: each trial ends in one output packet with
    // its Born weight, and single packets make featureless patches.
    let output_partition = ObservablePartition::by_mode(MZ_PHOTON, final_state.modes_of(MZ_PHOTON))?;
    let weights = measure::born_probabilities(&final_state, &output_partition)?;
    let branches: Vec<(f64, Vec<screen::PlaneWaveComponent>)> = weights
        .iter()
        .map(|(mode, weight)| {
            (
                *weight,
                vec![screen::PlaneWaveComponent::new(
                    Complex64::new(1.0, 0.0),
                    wavenumbers[mode],
                    0.0,
                )],
            )
        })
        .collect();
    let mixture_map = screen::mixture_intensity(&branches, &grid)?;
    let mixture_visibility = screen::visibility(&mixture_map)?;

    let beta = (phi_d - phi_c) / 2.0;
    let expected_visibility = (2.0 * beta).sin().abs();

    let expectations = vec![
        Expectation::check(
            "mz: circuit output matches the closed form",
            0.0,
            closed_form_deviation,
            1e-12,
        ),
        Expectation::check(
            "mz: coherent fringe visibility",
            expected_visibility,
            coherent_visibility,
            grid_visibility_tolerance(grid_points),
        ),
        Expectation::check(
            "mz: definite-history mixture visibility",
            0.0,
            mixture_visibility,
            1e-10,
        ),
    ];

    let mut sections = Sections::new();
    for policy in policies {
        let mut section = PolicyReport {
            probabilities: Some(weights.clone()),
            conditional_states: Some(BTreeMap::from([(
                "final".to_string(),
                ket_terms(&final_state),
            )])),
            ..PolicyReport::default()
        };
        match policy {
            CollapsePolicy::UnitaryOnly => {
                section.intensity = Some(BTreeMap::from([(
                    "coherent".to_string(),
                    IntensityTable::from_map(&coherent_map),
                )]));
                section.visibility = Some(BTreeMap::from([(
                    "coherent".to_string(),
                    coherent_visibility,
                )]));
            }
            CollapsePolicy::Collapse => {
                section.intensity = Some(BTreeMap::from([(
                    "mixture".to_string(),
                    IntensityTable::from_map(&mixture_map),
                )]));
                section.visibility = Some(BTreeMap::from([(
                    "mixture".to_string(),
                    mixture_visibility,
                )]));
            }
        }
        sections.insert(policy.key().to_string(), section);
    }
    Ok((sections, expectations))
}

// ---------------------------------------------------------------------------
// which-way
// ---------------------------------------------------------------------------

pub(super) fn run_which_way(
    params: &Params,
    seed: u64,
    policies: &[CollapsePolicy],
) -> Result<RunnerOut> {
    let phi = params.get("phi");
    let growth = params.get("growth");
    let config = detector::ChainConfig {
        early_mode: "a".into(),
        n_initial: params.positive_count("n_initial")?,
        arrival_step: params.positive_count("arrival_step")?,
        late_seed: params.positive_count("late_seed")?,
        ..detector::ChainConfig::default()
    };
    let steps = params.count("steps")?;
    let n_macro = params.positive_count("n_macro")?;
    let trials = params.positive_count("trials")?;

    let photon = optics::which_way_state(phi);
    let inv = 1.0 / 2f64.sqrt();
    let reference = Ket::new([
        (
            BasisLabel::single(optics::SIGNAL, "a"),
            -Complex64::from_polar(inv, phi),
        ),
        (
            BasisLabel::single(optics::SIGNAL, "b"),
            Complex64::new(0.0, -inv),
        ),
    ])?;
    let packet_deviation = max_amplitude_deviation(&photon, &reference);

    let seeded = detector::seed(&photon, &config)?;
    let amplified = detector::amplify(&seeded, steps, growth)?;
    let branch_a = amplified
        .branch("a")
        .ok_or_else(|| Error::InvalidParameter("packet a missing".into()))?;
    let branch_b = amplified
        .branch("b")
        .ok_or_else(|| Error::InvalidParameter("packet b missing".into()))?;
    let early_count = branch_a.perturbed_a;
    let late_count = branch_b.perturbed_b;
    let max_cross_product = amplified
        .branches()
        .iter()
        .map(|b| b.perturbed_a as u128 * b.perturbed_b as u128)
        .max()
        .unwrap_or(0);
    let cross_amplitude = detector::cross_branch_amplitude(&amplified).norm();
    let weight_a = branch_a.amplitude.norm_sqr();

    let root = RngStream::new(seed);
    let reports = ensemble::map_indexed(trials, |i| {
        let mut rng = root.substream(i);
        detector::threshold_collapse(&amplified, n_macro, &mut rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let count_a = reports.iter().filter(|r| r.selected == "a").count() as u64;
    let max_losing = reports.iter().map(|r| r.losing_perturbed).max().unwrap_or(0);
    let steps_to_threshold = reports.first().map(|r| r.steps_to_threshold).unwrap_or(0);

    let expectations = vec![
        Expectation::check(
            "which-way: split packet matches the reference state",
            0.0,
            packet_deviation,
            1e-12,
        ),
        Expectation::check("which-way: branch-a weight", 0.5, weight_a, 1e-12),
        Expectation::flag(
            "which-way: early perturbed set is macroscopic",
            true,
            early_count >= n_macro,
        ),
        Expectation::flag(
            "which-way: late perturbed set is macroscopic",
            true,
            late_count >= n_macro,
        ),
        Expectation::check(
            "which-way: largest N*K over branches",
            0.0,
            max_cross_product as f64,
            0.0,
        ),
        Expectation::check(
            "which-way: cross-branch amplitude",
            0.0,
            cross_amplitude,
            0.0,
        ),
        Expectation::check(
            "which-way: losing-branch count over all runs",
            0.0,
            max_losing as f64,
            0.0,
        ),
        Expectation::check(
            "which-way: branch-a selection frequency",
            0.5,
            count_a as f64 / trials as f64,
            binomial_4_sigma(0.5, trials),
        ),
    ];

    let branch_rows: Vec<BranchRow> = amplified
        .branches()
        .iter()
        .map(|b| BranchRow {
            label: b.label.clone(),
            weight: b.amplitude.norm_sqr(),
            perturbed_a: b.perturbed_a,
            perturbed_b: b.perturbed_b,
        })
        .collect();

    let mut sections = Sections::new();
    for policy in policies {
        let mut section = PolicyReport {
            branches: Some(branch_rows.clone()),
            ..PolicyReport::default()
        };
        section
            .scalars
            .insert("cross_branch_amplitude".to_string(), cross_amplitude);
        match policy {
            CollapsePolicy::Collapse => {
                section.frequencies = Some(BTreeMap::from([
                    ("a".to_string(), FrequencyStat::new(count_a, trials)),
                    (
                        "b".to_string(),
                        FrequencyStat::new(trials - count_a, trials),
                    ),
                ]));
                section
                    .scalars
                    .insert("steps_to_threshold".to_string(), steps_to_threshold as f64);
                section
                    .scalars
                    .insert("max_losing_perturbed".to_string(), max_losing as f64);
            }
            CollapsePolicy::UnitaryOnly => {
                // No selection: both branches persist with their counts.
                section
                    .scalars
                    .insert("surviving_branches".to_string(), branch_rows.len() as f64);
            }
        }
        sections.insert(policy.key().to_string(), section);
    }
    Ok((sections, expectations))
}

// ---------------------------------------------------------------------------
// triple-interference
// ---------------------------------------------------------------------------

pub(super) fn run_triple_interference(
    params: &Params,
    seed: u64,
    policies: &[CollapsePolicy],
) -> Result<RunnerOut> {
    let theta_1 = params.get("theta1");
    let theta_3 = params.get("theta3");
    let kappa0 = params.get("kappa0");
    let grid_points = params.positive_count("grid_points")? as usize;
    let trials = params.positive_count("trials")?;
    let mc_samples = params.count("mc_samples")?;
    if kappa0 <= 0.0 {
        return Err(Error::InvalidParameter("kappa0 must be positive".into()));
    }

    let state = optics::triple_interference_state(theta_1, theta_3);
    let s = -1.0 / 3f64.sqrt();
    let reference = Ket::new([
        (
            BasisLabel::single(MZ_PHOTON, "a"),
            Complex64::from_polar(1.0, theta_1) * s,
        ),
        (BasisLabel::single(MZ_PHOTON, "b"), Complex64::new(s, 0.0)),
        (
            BasisLabel::single(MZ_PHOTON, "c"),
            Complex64::from_polar(1.0, theta_3) * s,
        ),
    ])?;
    let packet_deviation = max_amplitude_deviation(&state, &reference);

    let partition = ObservablePartition::new(
        MZ_PHOTON,
        [("click", vec!["b"]), ("no-click", vec!["a", "c"])],
    )?;
    let probabilities = measure::born_probabilities(&state, &partition)?;
    let p_click = probabilities["click"];

    // Packet b flies along the plate normal (kappa = 0); a and c cross it
    // obliquely.
    let wavenumbers = BTreeMap::from([
        ("a".to_string(), -kappa0),
        ("b".to_string(), 0.0),
        ("c".to_string(), kappa0),
    ]);
    let grid = screen::uniform_grid(TAU / kappa0, grid_points);

    let three_beam =
        screen::intensity_pattern(&screen::components_from_ket(&state, MZ_PHOTON, &wavenumbers)?, &grid);
    // Per-trial expected plate dose on no-click trials: the projected
    // branch without renormalization (trial fraction times the collapsed
    // pattern), i.e. the three-beam pattern with the background removed.
    let no_click_projected = measure::project(&state, &partition, "no-click")
        .ok_or_else(|| Error::ImpossibleOutcome("no-click".into()))?;
    let no_click_map = screen::intensity_pattern(
        &screen::components_from_ket(&no_click_projected, MZ_PHOTON, &wavenumbers)?,
        &grid,
    );
    let click_map = three_beam.zero_like();

    let amp_b_sqr = state
        .amplitude(&BasisLabel::single(MZ_PHOTON, "b"))
        .norm_sqr();
    let background_removed = three_beam.mean() - no_click_map.mean();
    let no_click_visibility = screen::visibility(&no_click_map)?;

    let root = RngStream::new(seed);
    let outcomes = ensemble::map_indexed(trials, |i| {
        let mut rng = root.substream(i);
        measure::sample(&state, &partition, CollapsePolicy::Collapse, &mut rng)
            .map(|o| o.outcome == "click")
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let clicks = outcomes.iter().filter(|c| **c).count() as u64;

    let expectations = vec![
        Expectation::check(
            "triple: packet state matches the reference form",
            0.0,
            packet_deviation,
            1e-12,
        ),
        Expectation::check("triple: p(click)", 1.0 / 3.0, p_click, 1e-12),
        Expectation::check(
            "triple: sampled click frequency",
            1.0 / 3.0,
            clicks as f64 / trials as f64,
            binomial_4_sigma(1.0 / 3.0, trials),
        ),
        Expectation::check(
            "triple: plate intensity on click trials",
            0.0,
            click_map.max(),
            0.0,
        ),
        Expectation::check(
            "triple: no-click pattern visibility",
            1.0,
            no_click_visibility,
            grid_visibility_tolerance(grid_points),
        ),
        Expectation::check(
            "triple: background removed by the no-click collapse",
            amp_b_sqr,
            background_removed,
            1e-10,
        ),
        Expectation::check(
            "triple: three-beam plate mean under the unitary policy",
            1.0,
            three_beam.mean(),
            1e-10,
        ),
    ];

    let mut sections = Sections::new();
    for policy in policies {
        let mut section = PolicyReport {
            probabilities: Some(probabilities.clone()),
            ..PolicyReport::default()
        };
        match policy {
            CollapsePolicy::Collapse => {
                section.intensity = Some(BTreeMap::from([
                    ("click".to_string(), IntensityTable::from_map(&click_map)),
                    ("noclick".to_string(), IntensityTable::from_map(&no_click_map)),
                ]));
                section.frequencies = Some(BTreeMap::from([
                    ("click".to_string(), FrequencyStat::new(clicks, trials)),
                    (
                        "no-click".to_string(),
                        FrequencyStat::new(trials - clicks, trials),
                    ),
                ]));
                section
                    .scalars
                    .insert("plate_mean_noclick".to_string(), no_click_map.mean());
                section
                    .scalars
                    .insert("background_removed".to_string(), background_removed);
                section.scalars.insert(
                    "plate_mean_discrepancy_vs_unitary".to_string(),
                    three_beam.mean() - no_click_map.mean(),
                );
                if mc_samples > 0 {
                    let mut rng = root.substream(trials + 1);
                    section.plate_samples = Some(BTreeMap::from([(
                        "noclick".to_string(),
                        screen::sample_positions(&no_click_map, mc_samples as usize, &mut rng)?,
                    )]));
                }
            }
            CollapsePolicy::UnitaryOnly => {
                section.intensity = Some(BTreeMap::from([(
                    "threebeam".to_string(),
                    IntensityTable::from_map(&three_beam),
                )]));
                section
                    .scalars
                    .insert("plate_mean".to_string(), three_beam.mean());
                if mc_samples > 0 {
                    let mut rng = root.substream(trials + 2);
                    section.plate_samples = Some(BTreeMap::from([(
                        "threebeam".to_string(),
                        screen::sample_positions(&three_beam, mc_samples as usize, &mut rng)?,
                    )]));
                }
            }
        }
        sections.insert(policy.key().to_string(), section);
    }
    Ok((sections, expectations))
}

// ---------------------------------------------------------------------------
// rdm-delay
// ---------------------------------------------------------------------------

pub(super) fn run_rdm_delay(
    params: &Params,
    seed: u64,
    policies: &[CollapsePolicy],
) -> Result<RunnerOut> {
    let rate = params.get("rate");
    let delay = params.get("delay");
    let trials = params.positive_count("trials")?;
    let grid_points = params.positive_count("grid_points")?;
    let grid_step = params.get("grid_step");
    if rate <= 0.0 || delay < 0.0 || grid_step <= 0.0 {
        return Err(Error::InvalidParameter(
            "rate and grid_step must be positive, delay nonnegative".into(),
        ));
    }

    let config = rdm::RdmConfig {
        jump_rate: rate,
        ..rdm::RdmConfig::default()
    };
    let parity_law = |d: f64| (1.0 - (-2.0 * rate * d).exp()) / 2.0;

    let root = RngStream::new(seed);
    let zero_delay = rdm::mismatch_fraction(&config, 0.0, trials, &root.substream(1_000_000))?;
    let at_delay = rdm::mismatch_fraction(&config, delay, trials, &root.substream(1_000_001))?;

    let mut curve = Vec::with_capacity(grid_points as usize);
    for k in 0..grid_points {
        let d = grid_step * k as f64;
        let fraction = rdm::mismatch_fraction(&config, d, trials, &root.substream(k))?;
        let expected = parity_law(d);
        curve.push(MismatchRow {
            delay: d,
            fraction,
            stderr: (fraction * (1.0 - fraction) / trials as f64).sqrt().max(
                // At the exact-zero point the plug-in estimate degenerates.
                (expected * (1.0 - expected) / trials as f64).sqrt(),
            ),
            expected,
        });
    }
    let monotone = curve.windows(2).all(|pair| {
        pair[1].fraction >= pair[0].fraction - 4.0 * (pair[0].stderr + pair[1].stderr)
    });

    let expectations = vec![
        Expectation::check("rdm: zero-delay mismatch", 0.0, zero_delay, 0.0),
        Expectation::check(
            "rdm: mismatch at the configured delay",
            parity_law(delay),
            at_delay,
            binomial_4_sigma(parity_law(delay), trials),
        ),
        Expectation::flag(
            "rdm: mismatch nondecreasing across the delay sweep",
            true,
            monotone,
        ),
    ];

    // The jump model has no collapse policy of its own; the same results
    // appear under every requested policy key.
    let mut sections = Sections::new();
    for policy in policies {
        let mut section = PolicyReport {
            mismatch_curve: Some(curve.clone()),
            ..PolicyReport::default()
        };
        section.scalars.insert("rate".to_string(), rate);
        section
            .scalars
            .insert("mismatch_at_zero_delay".to_string(), zero_delay);
        section
            .scalars
            .insert("mismatch_at_delay".to_string(), at_delay);
        sections.insert(policy.key().to_string(), section);
    }
    Ok((sections, expectations))
}

// ---------------------------------------------------------------------------
// csl-ensemble
// ---------------------------------------------------------------------------

const MARTINGALE_CHECKPOINTS: [usize; 7] = [0, 250, 500, 1000, 2000, 4000, 8000];

pub(super) fn run_csl_ensemble(
    params: &Params,
    seed: u64,
    policies: &[CollapsePolicy],
) -> Result<RunnerOut> {
    let sse = csl::SseParams {
        lambda: params.get("lambda"),
        dt: params.get("dt"),
        eigenvalues: vec![1.0, -1.0],
        max_steps: params.positive_count("max_steps")? as usize,
        eps_conv: params.get("eps_conv"),
    };
    let n_traj = params.positive_count("n_traj")?;
    let initial = csl::SseState::one_third_two_thirds();
    let weights = initial.probabilities();

    let root = RngStream::new(seed);
    let stats = csl::ensemble_stats(&initial, &sse, n_traj, &root, &MARTINGALE_CHECKPOINTS)?;
    let failures: u64 = stats.failures.values().sum();

    let martingale_ok = stats.martingale.iter().all(|cp| {
        cp.mean
            .iter()
            .zip(&cp.sem)
            .zip(&weights)
            .all(|((mean, sem), w)| (mean - w).abs() <= 4.0 * sem + 1e-12)
    });

    // Instability exhibits: a constructed increment that breaks the very
    // first step, and a recorded healthy run broken by scaling one of its
    // increments by 50.
    let adversarial = csl::adversarial_increment(&initial, &sse)
        .ok_or_else(|| Error::InvalidParameter("initial state is an eigenstate".into()))?;
    let adversarial_diagnosis = csl::detect_nonphysical(
        &csl::NoiseSequence {
            increments: vec![adversarial],
        },
        &initial,
        &sse,
    );
    let mut baseline_rng = root.substream(n_traj + 1);
    let baseline = csl::run_trajectory(&initial, &sse, &mut baseline_rng)?;
    let baseline_noise = baseline.noise.expect("trajectory records noise");
    let baseline_ok =
        csl::detect_nonphysical(&baseline_noise, &initial, &sse) == csl::SseDiagnosis::Ok;
    let perturbation = csl::perturbation_search(&baseline_noise, &initial, &sse, &[50.0]);

    let expectations = vec![
        Expectation::check(
            "csl: trajectories that failed to converge",
            0.0,
            failures as f64,
            0.0,
        ),
        Expectation::check(
            "csl: eigenstate-0 frequency",
            weights[0],
            stats.frequencies[0],
            binomial_4_sigma(weights[0], n_traj),
        ),
        Expectation::check(
            "csl: eigenstate-1 frequency",
            weights[1],
            stats.frequencies[1],
            binomial_4_sigma(weights[1], n_traj),
        ),
        Expectation::check(
            "csl: worst per-step norm error",
            0.0,
            stats.max_norm_error,
            1e-9,
        ),
        Expectation::flag(
            "csl: martingale checkpoints within 4 SEM",
            true,
            martingale_ok,
        ),
        Expectation::flag(
            "csl: adversarial increment flagged at step 1",
            true,
            adversarial_diagnosis == csl::SseDiagnosis::NonPhysicalAtStep(1),
        ),
        Expectation::flag(
            "csl: recorded run breaks under a single 50x increment",
            true,
            baseline_ok
                && perturbation
                    .as_ref()
                    .is_some_and(|p| p.diagnosis != csl::SseDiagnosis::Ok),
        ),
    ];

    let martingale_rows: Vec<MartingaleRow> = stats
        .martingale
        .iter()
        .flat_map(|cp| {
            cp.mean.iter().zip(&cp.sem).enumerate().map(|(i, (m, s))| MartingaleRow {
                step: cp.step,
                eigenstate: i,
                mean: *m,
                sem: *s,
            })
        })
        .collect();
    let frequencies: BTreeMap<String, FrequencyStat> = stats
        .counts
        .iter()
        .enumerate()
        .map(|(i, &count)| (format!("eigenstate-{i}"), FrequencyStat::new(count, n_traj)))
        .collect();
    let instability = InstabilityReport {
        adversarial_increment: adversarial,
        adversarial_diagnosis: format!("{adversarial_diagnosis:?}"),
        baseline_steps: baseline.steps as u64,
        perturbation_scale: 50.0,
        perturbation_step_index: perturbation.as_ref().map(|p| p.step_index as u64).unwrap_or(0),
        perturbation_diagnosis: perturbation
            .as_ref()
            .map(|p| format!("{:?}", p.diagnosis))
            .unwrap_or_else(|| "NotFound".to_string()),
    };

    // The localization dynamics is itself the collapse mechanism; the same
    // ensemble appears under every requested policy key.
    let mut sections = Sections::new();
    for policy in policies {
        let mut section = PolicyReport {
            frequencies: Some(frequencies.clone()),
            martingale: Some(martingale_rows.clone()),
            instability: Some(instability.clone()),
            ..PolicyReport::default()
        };
        section
            .scalars
            .insert("mean_steps".to_string(), stats.mean_steps);
        section
            .scalars
            .insert("max_norm_error".to_string(), stats.max_norm_error);
        sections.insert(policy.key().to_string(), section);
    }
    Ok((sections, expectations))
}
