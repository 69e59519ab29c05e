//! Interference-pattern intensity on a sensitive plate.
//!
//! The plate is one-dimensional and the crossing packets are scalar plane
//! waves, so a pattern is fully described by each component's complex
//! amplitude and transverse wavenumber. Coherent superpositions sum
//! amplitudes pointwise; "many definite trials" sum intensities instead.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::state::Ket;

/// Default transverse wavenumber scale.
pub const DEFAULT_WAVENUMBER: f64 = TAU;
/// Default number of plate sample points over one pattern period.
pub const DEFAULT_GRID_POINTS: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct PlaneWaveComponent {
    pub amplitude: Complex64,
    /// Transverse wavenumber in radians per unit plate length.
    pub wavenumber: f64,
    pub phase: f64,
}

impl PlaneWaveComponent {
    pub fn new(amplitude: Complex64, wavenumber: f64, phase: f64) -> Self {
        Self {
            amplitude,
            wavenumber,
            phase,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntensityMap {
    pub positions: Vec<f64>,
    pub values: Vec<f64>,
}

impl IntensityMap {
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_like(&self) -> Self {
        Self {
            positions: self.positions.clone(),
            values: vec![0.0; self.values.len()],
        }
    }
}

/// Endpoint-exclusive uniform grid over [0, length). Spanning whole beat
/// periods this way makes discrete spatial means match the analytic ones.
pub fn uniform_grid(length: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| length * i as f64 / points as f64)
        .collect()
}

/// I(x) = |Σ_j amp_j e^{i(κ_j x + phase_j)}|² on the grid.
pub fn intensity_pattern(components: &[PlaneWaveComponent], grid: &[f64]) -> IntensityMap {
    let values = grid
        .iter()
        .map(|&x| {
            let field: Complex64 = components
                .iter()
                .map(|c| c.amplitude * Complex64::from_polar(1.0, c.wavenumber * x + c.phase))
                .sum();
            field.norm_sqr()
        })
        .collect();
    IntensityMap {
        positions: grid.to_vec(),
        values,
    }
}

/// Incoherent combination: the weighted pointwise sum of each branch's
/// own pattern. Weights must be nonnegative and sum to 1.
pub fn mixture_intensity(
    branches: &[(f64, Vec<PlaneWaveComponent>)],
    grid: &[f64],
) -> Result<IntensityMap> {
    let total: f64 = branches.iter().map(|(w, _)| *w).sum();
    if (total - 1.0).abs() > 1e-12 || branches.iter().any(|(w, _)| *w < 0.0) {
        return Err(Error::BadWeights(total));
    }
    let mut values = vec![0.0; grid.len()];
    for (weight, components) in branches {
        let pattern = intensity_pattern(components, grid);
        for (acc, v) in values.iter_mut().zip(&pattern.values) {
            *acc += weight * v;
        }
    }
    Ok(IntensityMap {
        positions: grid.to_vec(),
        values,
    })
}

/// (max − min) / (max + min); zero for featureless maps.
pub fn visibility(map: &IntensityMap) -> Result<f64> {
    if map.is_empty() {
        return Err(Error::ZeroIntensity);
    }
    let (max, min) = (map.max(), map.min());
    if max <= 0.0 {
        return Err(Error::ZeroIntensity);
    }
    Ok((max - min) / (max + min))
}

/// Draws `n` plate positions from the normalized intensity distribution
/// (the accumulation of single-particle impacts over many trials).
pub fn sample_positions(map: &IntensityMap, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let total: f64 = map.values.iter().sum();
    if map.is_empty() || total <= 0.0 {
        return Err(Error::ZeroIntensity);
    }
    let cdf: Vec<f64> = map
        .values
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v / total;
            Some(*acc)
        })
        .collect();
    Ok((0..n)
        .map(|_| {
            let u = rng.uniform();
            let idx = cdf.partition_point(|&c| c < u).min(map.positions.len() - 1);
            map.positions[idx]
        })
        .collect())
}

/// Turns one subsystem's packet amplitudes into plane-wave components via
/// a mode -> wavenumber assignment. The ket may be unnormalized (e.g. a
/// projected branch weighted by its trial fraction).
pub fn components_from_ket(
    ket: &Ket,
    subsystem: &str,
    wavenumbers: &BTreeMap<String, f64>,
) -> Result<Vec<PlaneWaveComponent>> {
    let mut components = Vec::with_capacity(ket.num_terms());
    for (label, amp) in ket.terms() {
        let mode = label.mode(subsystem).ok_or_else(|| {
            Error::InvalidParameter(format!("term |{label}⟩ lacks subsystem `{subsystem}`"))
        })?;
        let kappa = wavenumbers.get(mode).ok_or_else(|| {
            Error::InvalidParameter(format!("no wavenumber assigned to mode `{mode}`"))
        })?;
        components.push(PlaneWaveComponent::new(amp, *kappa, 0.0));
    }
    Ok(components)
}
