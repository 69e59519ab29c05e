//! Sparse complex state vectors over labeled tensor-product bases.
//!
//! Basis states are labeled by (subsystem, mode) pairs rather than flat
//! strings, so one subsystem of an entangled pair can be measured or
//! relabeled on its own. Kets are immutable values; every operation is
//! pure and returns a fresh state.

use num_complex::Complex64;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// Stored amplitudes below this magnitude are dropped. Small enough to
/// absorb rounding dust while keeping exact zeros exact.
pub const DROP_TOLERANCE: f64 = 1e-14;

/// One basis state: a mode assignment for each named subsystem.
///
/// Factors are kept sorted by subsystem name, so two labels are equal
/// exactly when they assign the same modes to the same subsystems.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisLabel {
    factors: BTreeMap<String, String>,
}

impl BasisLabel {
    pub fn new<I, S, M>(factors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, M)>,
        S: Into<String>,
        M: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (subsystem, mode) in factors {
            let subsystem = subsystem.into();
            if map.insert(subsystem.clone(), mode.into()).is_some() {
                return Err(Error::DuplicateSubsystem(subsystem));
            }
        }
        Ok(Self { factors: map })
    }

    pub fn single(subsystem: impl Into<String>, mode: impl Into<String>) -> Self {
        Self {
            factors: BTreeMap::from([(subsystem.into(), mode.into())]),
        }
    }

    pub fn mode(&self, subsystem: &str) -> Option<&str> {
        self.factors.get(subsystem).map(String::as_str)
    }

    pub fn subsystems(&self) -> impl Iterator<Item = &str> {
        self.factors.keys().map(String::as_str)
    }

    pub fn factors(&self) -> impl Iterator<Item = (&str, &str)> {
        self.factors
            .iter()
            .map(|(s, m)| (s.as_str(), m.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Disjoint union of two labels; errors if a subsystem appears in both.
    pub fn merged(&self, other: &Self) -> Result<Self> {
        let mut factors = self.factors.clone();
        for (subsystem, mode) in &other.factors {
            if factors.insert(subsystem.clone(), mode.clone()).is_some() {
                return Err(Error::SubsystemClash(subsystem.clone()));
            }
        }
        Ok(Self { factors })
    }

    /// Copy with one subsystem's mode replaced (inserting it if absent).
    pub fn with_mode(&self, subsystem: &str, mode: impl Into<String>) -> Self {
        let mut factors = self.factors.clone();
        factors.insert(subsystem.to_string(), mode.into());
        Self { factors }
    }

    /// Copy with one subsystem's factor removed.
    pub fn without(&self, subsystem: &str) -> Self {
        let mut factors = self.factors.clone();
        factors.remove(subsystem);
        Self { factors }
    }

    /// Restriction to a subset of subsystems.
    pub fn restricted(&self, subsystems: &BTreeSet<String>) -> Self {
        Self {
            factors: self
                .factors
                .iter()
                .filter(|(s, _)| subsystems.contains(*s))
                .map(|(s, m)| (s.clone(), m.clone()))
                .collect(),
        }
    }

    /// Does this label agree with `partial` on every subsystem `partial`
    /// names?
    pub fn extends(&self, partial: &Self) -> bool {
        partial
            .factors
            .iter()
            .all(|(s, m)| self.factors.get(s) == Some(m))
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (subsystem, mode) in &self.factors {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{subsystem}:{mode}")?;
            first = false;
        }
        Ok(())
    }
}

/// Sparse superposition: a map from basis labels to complex amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    terms: BTreeMap<BasisLabel, Complex64>,
}

impl Ket {
    /// Builds a ket from (label, amplitude) terms. Duplicate labels are
    /// summed; terms below [`DROP_TOLERANCE`] are dropped. The result is
    /// not normalized.
    pub fn new<I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BasisLabel, Complex64)>,
    {
        let mut map: BTreeMap<BasisLabel, Complex64> = BTreeMap::new();
        for (label, amplitude) in terms {
            *map.entry(label).or_insert(Complex64::new(0.0, 0.0)) += amplitude;
        }
        map.retain(|_, a| a.norm() >= DROP_TOLERANCE);
        if map.is_empty() {
            return Err(Error::EmptyState);
        }
        Ok(Self { terms: map })
    }

    /// Single basis state with amplitude 1.
    pub fn basis(label: BasisLabel) -> Self {
        Self {
            terms: BTreeMap::from([(label, Complex64::new(1.0, 0.0))]),
        }
    }

    pub fn amplitude(&self, label: &BasisLabel) -> Complex64 {
        self.terms
            .get(label)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisLabel, Complex64)> {
        self.terms.iter().map(|(l, a)| (l, *a))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Tensor product; the two kets must address disjoint subsystems.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (la, aa) in &self.terms {
            for (lb, ab) in &other.terms {
                terms.push((la.merged(lb)?, aa * ab));
            }
        }
        Ket::new(terms)
    }

    /// Inner product, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.terms
            .iter()
            .filter_map(|(l, a)| other.terms.get(l).map(|b| a.conj() * b))
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm < DROP_TOLERANCE {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    /// Multiplies every amplitude by `factor` without re-filtering terms.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(l, a)| (l.clone(), a * factor))
                .collect(),
        }
    }

    /// True when the two normalized kets agree up to an overall phase:
    /// |⟨self|other⟩| ≥ 1 − tol.
    pub fn equal_up_to_global_phase(&self, other: &Self, tol: f64) -> bool {
        self.inner(other).norm() >= 1.0 - tol
    }

    /// Labels carrying amplitude of magnitude strictly above `tol`.
    pub fn support(&self, tol: f64) -> BTreeSet<BasisLabel> {
        self.terms
            .iter()
            .filter(|(_, a)| a.norm() > tol)
            .map(|(l, _)| l.clone())
            .collect()
    }

    /// All subsystem names appearing in any term.
    pub fn subsystems(&self) -> BTreeSet<String> {
        self.terms
            .keys()
            .flat_map(|l| l.subsystems().map(str::to_string))
            .collect()
    }

    /// Modes the given subsystem takes across the support.
    pub fn modes_of(&self, subsystem: &str) -> BTreeSet<String> {
        self.terms
            .keys()
            .filter_map(|l| l.mode(subsystem).map(str::to_string))
            .collect()
    }
}

impl fmt::Display for Ket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (label, amp) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i)|{label}⟩", amp.re, amp.im)?;
            first = false;
        }
        Ok(())
    }
}

/// Shorthand for a one-subsystem ket over (mode, amplitude) pairs.
pub fn ket1<I, M>(subsystem: &str, terms: I) -> Result<Ket>
where
    I: IntoIterator<Item = (M, Complex64)>,
    M: Into<String>,
{
    Ket::new(
        terms
            .into_iter()
            .map(|(mode, amp)| (BasisLabel::single(subsystem, mode), amp)),
    )
}
