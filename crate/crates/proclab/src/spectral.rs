//! Exact diagonalization of finite time-independent Hamiltonians and a
//! census of their energy-gap structure.
//!
//! A [`Spectrum`] holds the distinct energies `E_n` and the Hermitian
//! eigenprojectors `P_n` with `H = Σ_n E_n P_n`. Numerically degenerate
//! eigenvalues are merged by single-linkage clustering at a caller-chosen
//! tolerance, so that dephasing maps built downstream treat a degenerate
//! level as one block.
//!
//! The [`GapCensus`] counts ordered energy-gap pairs `E_m - E_n` (both
//! signs, `m ≠ n`) inside a sliding window of width `ε`; the window maximum
//! `N(ε)` is the combinatorial factor entering every finite-time bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Relative Hermiticity tolerance for Hamiltonian validation.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// A finite-dimensional time-independent Hamiltonian.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    matrix: CMat,
    dim: usize,
}

impl Hamiltonian {
    /// Validates Hermiticity to `1e-12` relative to the largest entry.
    pub fn new(matrix: CMat) -> Result<Self> {
        let dim = matrix.nrows();
        if matrix.ncols() != dim || dim == 0 {
            return Err(Error::DimensionMismatch(format!(
                "Hamiltonian must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = linalg::max_abs(&matrix).max(1.0);
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > HERMITICITY_TOL * scale {
            return Err(Error::NotHermitian {
                max_asymmetry: defect,
                tol: HERMITICITY_TOL * scale,
            });
        }
        Ok(Self { matrix, dim })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Spectral range max(E) - min(E) of the raw eigenvalues.
    pub fn spectral_range(&self) -> f64 {
        let (vals, _) = linalg::eigh(&self.matrix);
        vals.last().unwrap() - vals.first().unwrap()
    }

    /// Affine rescaling of the energies so the spectrum spans `[0, 1]`
    /// (identity for an already flat spectrum). Returns the rescaled
    /// Hamiltonian together with the original (offset, scale).
    pub fn normalized_to_unit_range(&self) -> (Hamiltonian, f64, f64) {
        let (vals, _) = linalg::eigh(&self.matrix);
        let lo = *vals.first().unwrap();
        let range = vals.last().unwrap() - lo;
        if range <= 0.0 {
            return (self.clone(), lo, 1.0);
        }
        let shifted = self.matrix.clone().map(|z| z / linalg::c(range, 0.0))
            - CMat::identity(self.dim, self.dim).map(|z| z * linalg::c(lo / range, 0.0));
        (
            Hamiltonian::new(shifted).expect("rescaling preserves Hermiticity"),
            lo,
            range,
        )
    }
}

/// Eigendecomposition of a Hamiltonian into distinct levels.
#[derive(Clone, Debug)]
pub struct Spectrum {
    energies: Vec<f64>,
    projectors: Vec<CMat>,
    degeneracy_tol: f64,
    total_dim: usize,
}

impl Spectrum {
    /// Sorted distinct energies, strictly increasing.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Hermitian projectors onto each level, aligned with `energies`.
    pub fn projectors(&self) -> &[CMat] {
        &self.projectors
    }

    /// Number of distinct levels `d_H`.
    pub fn num_levels(&self) -> usize {
        self.energies.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn degeneracy_tol(&self) -> f64 {
        self.degeneracy_tol
    }

    pub fn spectral_range(&self) -> f64 {
        if self.energies.len() < 2 {
            0.0
        } else {
            self.energies.last().unwrap() - self.energies.first().unwrap()
        }
    }

    /// Smallest positive gap between distinct energies; zero for a single
    /// level.
    pub fn min_gap(&self) -> f64 {
        self.energies
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NAN, f64::min)
            .max(0.0)
    }

    /// Resolution below which two gap values are treated as resonant when
    /// taking infinite-window limits.
    pub fn gap_resolution(&self) -> f64 {
        (1e-9 * self.spectral_range()).max(1e-13)
    }

    /// The evolution unitary exp(-i H dt) assembled from the levels.
    pub fn evolution(&self, dt: f64) -> CMat {
        let mut u = CMat::zeros(self.total_dim, self.total_dim);
        for (e, p) in self.energies.iter().zip(&self.projectors) {
            let phase = linalg::c(0.0, -e * dt).exp();
            u += p.map(|z| z * phase);
        }
        u
    }

    /// Dephasing in the energy eigenbasis, `$(σ) = Σ_n P_n σ P_n`.
    pub fn dephase(&self, sigma: &CMat) -> CMat {
        let mut out = CMat::zeros(self.total_dim, self.total_dim);
        for p in &self.projectors {
            out += p * sigma * p;
        }
        out
    }

    /// Reconstruction `Σ_n E_n P_n`.
    pub fn reconstruct(&self) -> CMat {
        let mut h = CMat::zeros(self.total_dim, self.total_dim);
        for (e, p) in self.energies.iter().zip(&self.projectors) {
            h += p.map(|z| z * linalg::c(*e, 0.0));
        }
        h
    }
}

/// Default clustering tolerance: `1e-9` of the spectral range.
pub fn default_degeneracy_tol(h: &Hamiltonian) -> f64 {
    (1e-9 * h.spectral_range()).max(1e-13)
}

/// Diagonalize a Hamiltonian, clustering numerically degenerate eigenvalues.
///
/// Eigenvalues whose consecutive spacing is at most `degeneracy_tol` are
/// merged into one level (single linkage), and the level energy is the mean
/// of the cluster. Postcondition: `Σ_n E_n P_n` reproduces the input to
/// `1e-9 · ‖H‖`.
pub fn diagonalize(h: &Hamiltonian, degeneracy_tol: f64) -> Result<Spectrum> {
    if !(degeneracy_tol > 0.0) {
        return Err(Error::Config(format!(
            "degeneracy tolerance must be positive, got {degeneracy_tol}"
        )));
    }
    let (vals, vecs) = linalg::eigh(h.matrix());
    let d = h.dim();

    let mut energies = Vec::new();
    let mut projectors = Vec::new();
    let mut start = 0usize;
    for i in 1..=d {
        let boundary = i == d || vals[i] - vals[i - 1] > degeneracy_tol;
        if boundary {
            let cluster = start..i;
            let mean = vals[cluster.clone()].iter().sum::<f64>() / (i - start) as f64;
            let mut p = CMat::zeros(d, d);
            for k in cluster {
                let v = vecs.column(k);
                p += v * v.adjoint();
            }
            // exact Hermitization of the accumulated projector
            let p = (&p + p.adjoint()).scale(0.5);
            energies.push(mean);
            projectors.push(p);
            start = i;
        }
    }

    let spectrum = Spectrum {
        energies,
        projectors,
        degeneracy_tol,
        total_dim: d,
    };

    // completeness and reconstruction guards
    let mut sum = CMat::zeros(d, d);
    for p in &spectrum.projectors {
        sum += p;
    }
    let id = CMat::identity(d, d);
    if linalg::max_abs_diff(&sum, &id) > 1e-10 {
        return Err(Error::DimensionMismatch(
            "projectors do not resolve the identity".into(),
        ));
    }
    let scale = linalg::max_abs(h.matrix()).max(1.0);
    if linalg::max_abs_diff(&spectrum.reconstruct(), h.matrix()) > 1e-9 * scale {
        return Err(Error::DimensionMismatch(
            "spectral reconstruction residual too large".into(),
        ));
    }
    Ok(spectrum)
}

/// Census of the ordered energy-gap structure at window width `epsilon`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapCensus {
    /// Window width used for the census (energy units).
    pub epsilon: f64,
    /// `N(ε)`: the maximum number of ordered gaps in any window of width ε.
    pub n_epsilon: usize,
    /// Maximum degeneracy of a single gap value, the `ε → 0⁺` limit.
    pub max_gap_degeneracy: usize,
    /// Smallest positive gap between distinct levels.
    pub min_gap: f64,
    /// Number of distinct levels `d_H`.
    pub num_levels: usize,
    /// True when the spectrum has fewer than two distinct levels.
    pub degenerate_spectrum: bool,
}

/// All ordered gaps `E_m - E_n` for `m ≠ n` (both signs), sorted.
fn ordered_gaps(energies: &[f64]) -> Vec<f64> {
    let mut gaps = Vec::with_capacity(energies.len() * energies.len());
    for (i, &em) in energies.iter().enumerate() {
        for (j, &en) in energies.iter().enumerate() {
            if i != j {
                gaps.push(em - en);
            }
        }
    }
    gaps.sort_by(f64::total_cmp);
    gaps
}

/// Maximum count of gaps in any closed window `[E, E + epsilon]`. Anchoring
/// windows at each gap value is exact for a finite gap set.
fn window_max(gaps: &[f64], epsilon: f64) -> usize {
    let slack = 1e-12 * gaps.iter().fold(1.0f64, |a, g| a.max(g.abs()));
    let mut best = 0usize;
    for (i, &g0) in gaps.iter().enumerate() {
        // gaps are sorted; count entries in [g0, g0 + epsilon]
        let count = gaps[i..]
            .iter()
            .take_while(|&&g| g <= g0 + epsilon + slack)
            .count();
        best = best.max(count);
    }
    best
}

/// Count multiplicities of numerically equal gap values and return the max.
fn max_degeneracy(gaps: &[f64], resolution: f64) -> usize {
    let mut best = 0usize;
    let mut i = 0usize;
    while i < gaps.len() {
        let mut j = i + 1;
        while j < gaps.len() && gaps[j] - gaps[j - 1] <= resolution {
            j += 1;
        }
        best = best.max(j - i);
        i = j;
    }
    best
}

/// Census of the gap structure of a spectrum.
///
/// `N(ε)` is evaluated by sliding a closed window of width `ε` over the
/// sorted multiset of ordered-pair gaps; only windows anchored at a gap
/// value need checking.
pub fn gap_census(s: &Spectrum, epsilon: f64) -> Result<GapCensus> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!(
            "census window must be positive, got {epsilon}"
        )));
    }
    let d_h = s.num_levels();
    if d_h < 2 {
        return Ok(GapCensus {
            epsilon,
            n_epsilon: 0,
            max_gap_degeneracy: 0,
            min_gap: 0.0,
            num_levels: d_h,
            degenerate_spectrum: true,
        });
    }
    let gaps = ordered_gaps(s.energies());
    Ok(GapCensus {
        epsilon,
        n_epsilon: window_max(&gaps, epsilon),
        max_gap_degeneracy: max_degeneracy(&gaps, s.gap_resolution()),
        min_gap: s.min_gap(),
        num_levels: d_h,
        degenerate_spectrum: false,
    })
}
