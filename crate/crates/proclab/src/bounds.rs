//! Right-hand sides of the equilibration bounds and numerical verification
//! of the proof identities.
//!
//! The bound expressions are pure arithmetic in a handful of factors: the
//! per-step phase-average norms `g`, the entrywise maxima `s`, the POVM
//! norms of the composed instrument tails, and the minimum effective
//! dimension along the chain. Campaign code evaluates the factors and the
//! measured left-hand sides elsewhere; this module owns the formulas, the
//! identity checks, and the [`BoundReport`] record that ties a verified
//! instance to its inputs.

use serde::{Deserialize, Serialize};

use crate::channels::{dephasing_channel, povm_norm, KrausMap};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::process::{dephased_purity, intermediate_state};
use crate::spectral::{GapCensus, Spectrum};
use crate::timeavg::{g_factor, TimeWindows};

/// Relative slack floor: a bound instance counts as violated when
/// `rhs - lhs < -1e-9 · max(1, rhs)`.
pub const SLACK_TOL: f64 = 1e-9;

/// One verified bound instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Enough provenance to replay the instance: ensemble, seed, index,
    /// dimensions, windows, whatever the producing campaign chooses.
    pub inputs_digest: String,
}

impl BoundReport {
    pub fn new(bound_name: impl Into<String>, lhs: f64, rhs: f64, digest: impl Into<String>) -> Self {
        Self {
            bound_name: bound_name.into(),
            lhs,
            rhs,
            slack: rhs - lhs,
            inputs_digest: digest.into(),
        }
    }

    pub fn holds(&self) -> bool {
        self.slack >= -SLACK_TOL * self.rhs.abs().max(1.0)
    }
}

/// Squared POVM norms of the composed instrument tails
/// `A_k $ A_{k-1} $ ... $ A_{j+1}` for each stage `j = 0..k-1`, realized as
/// explicit Kraus compositions on the full SE space.
pub fn stage_povm_norms_sq(
    s: &Spectrum,
    instruments: &[KrausMap],
    d_e: usize,
) -> Result<Vec<f64>> {
    let k = instruments.len();
    if k == 0 {
        return Err(Error::EmptySet("instrument chain".into()));
    }
    let deph = dephasing_channel(s);
    let ext: Vec<KrausMap> = instruments
        .iter()
        .map(|a| a.extend_with_identity(d_e))
        .collect();
    let mut norms = vec![0.0; k];
    // build A_k $ ... $ A_{j+1} from the top down
    let mut tail = ext[k - 1].clone();
    norms[k - 1] = povm_norm(&tail).powi(2);
    for j in (0..k - 1).rev() {
        tail = tail.compose(&deph)?.compose(&ext[j])?;
        norms[j] = povm_norm(&tail).powi(2);
    }
    Ok(norms)
}

/// Infinite-window bound: `max_j (2^k - 1) ‖A_{k:...:j+1}‖² / d_eff_j` over
/// the per-stage POVM norms and effective dimensions.
pub fn infinite_time_rhs(povm_norms_sq: &[f64], d_effs: &[f64], k: usize) -> Result<f64> {
    if povm_norms_sq.is_empty() || povm_norms_sq.len() != d_effs.len() {
        return Err(Error::EmptySet(format!(
            "stage lists of lengths {} and {}",
            povm_norms_sq.len(),
            d_effs.len()
        )));
    }
    let factor = (2f64).powi(k as i32) - 1.0;
    Ok(povm_norms_sq
        .iter()
        .zip(d_effs.iter())
        .map(|(&n, &d)| factor * n / d)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// The six-term two-step finite-time bound,
///
/// `(g1 g2 ‖A2‖² + g1 ‖A21‖² + g2 ‖A2‖² + 4 g1 s2 ‖A21‖² + 4 g2 s1 ‖A2‖²
///   + 2 sqrt(g1 g2 ‖A2‖² ‖A21‖²)) / d_eff_min`.
///
/// With `yz_min_replacement` the final cross term is replaced by the smaller
/// of its effective-dimension form and `8 s1 s2`, which restores the exact
/// infinite-window limit.
#[allow(clippy::too_many_arguments)]
pub fn k2_rhs(
    g1: f64,
    g2: f64,
    s1: f64,
    s2: f64,
    norm_a2_sq: f64,
    norm_a21_sq: f64,
    deff_min: f64,
    yz_min_replacement: bool,
) -> f64 {
    let base = g1 * g2 * norm_a2_sq
        + g1 * norm_a21_sq
        + g2 * norm_a2_sq
        + 4.0 * g1 * s2 * norm_a21_sq
        + 4.0 * g2 * s1 * norm_a2_sq;
    let yz_scaled = 2.0 * (g1 * g2 * norm_a2_sq * norm_a21_sq).sqrt();
    if yz_min_replacement {
        base / deff_min + (yz_scaled / deff_min).min(8.0 * s1 * s2)
    } else {
        (base + yz_scaled) / deff_min
    }
}

/// The 49-term three-step bound, term for term.
pub fn k3_rhs(gs: [f64; 3], ss: [f64; 3], norms_sq: [f64; 3], deff_min: f64) -> f64 {
    let [g1, g2, g3] = gs;
    let [s1, s2, s3] = ss;
    // norms_sq = [ ‖A3‖², ‖A_{3:2}‖², ‖A_{3:1}‖² ]
    let [na3, na32, na31] = norms_sq;
    let bracket = (1.0 + g1 + g2 + g1 * g2) * g3 * na3
        + (g1 + 1.0) * g2 * na32
        + g1 * na31
        + 2.0
            * ((2.0 * s2 + 2.0 * s3) * g1 * na31
                + (2.0 * s1 + 2.0 * s3) * g2 * na32
                + (2.0 * s1 + 2.0 * s2) * g3 * na3
                + g1 * g2 * (2.0 * s3) * na32
                + g1 * g3 * (2.0 * s2) * na3
                + g2 * g3 * (2.0 * s1) * na3
                + ((g1 * g2 * na31 * na32).sqrt()
                    + (g1 * g3 * na31 * na3).sqrt()
                    + (g2 * g3 * na32 * na3).sqrt())
                + 2.0 * g1 * (2.0 * s2) * (2.0 * s3) * na31
                + 2.0 * g2 * (2.0 * s1) * (2.0 * s3) * na32
                + 2.0 * g3 * (2.0 * s1) * (2.0 * s2) * na3
                + 3.0 * (g1 * g2 * g3 * na31 * na32 * na3).sqrt());
    bracket / deff_min
}

/// Envelope constant `C_k(ε, T_min) = 2^{3k-1} g^k` with
/// `g = N(ε)(1 + 8 log₂(d_H) / (ε T_min))`.
pub fn ck_numerator(census: &GapCensus, tw: &TimeWindows, epsilon: f64, k: usize) -> Result<f64> {
    let g = g_factor(census, tw.t_min(), epsilon)?;
    Ok((2f64).powi(3 * k as i32 - 1) * g.powi(k as i32))
}

/// Coarse envelope bound `C_k(ε, T_min) / d_eff_min`.
pub fn ck_rhs(
    census: &GapCensus,
    tw: &TimeWindows,
    epsilon: f64,
    k: usize,
    deff_min: f64,
) -> Result<f64> {
    Ok(ck_numerator(census, tw, epsilon, k)? / deff_min)
}

/// Distinguishability bound `S(M) sqrt(C_k) / (2 sqrt(d_eff_min))` for an
/// instrument set with `total_outcomes` combined outcomes.
pub fn diamond_bound_rhs(total_outcomes: usize, ck_numerator: f64, deff_min: f64) -> f64 {
    total_outcomes as f64 * ck_numerator.sqrt() / (2.0 * deff_min.sqrt())
}

/// Advisory report on the regime conditions: windows long enough that no
/// gap cluster dominates, and few enough times that the observable stays
/// coarse.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionsReport {
    /// Required window scale `log₂(d_H) / ε`.
    pub window_threshold: f64,
    /// `T_ℓ / threshold` per window.
    pub window_margins: Vec<f64>,
    pub windows_ok: bool,
    /// Allowed step budget `(1/3) log₂(d_eff_min)`.
    pub k_limit: f64,
    /// `k_limit / k`.
    pub k_margin: f64,
    pub k_ok: bool,
}

/// Evaluate both regime conditions with their margins. Advisory only.
pub fn conditions_check(
    census: &GapCensus,
    tw: &TimeWindows,
    k: usize,
    deff_min: f64,
    epsilon: f64,
) -> Result<ConditionsReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    let d_h = census.num_levels.max(2) as f64;
    let window_threshold = d_h.log2() / epsilon;
    let window_margins: Vec<f64> = tw.windows().iter().map(|&t| t / window_threshold).collect();
    let windows_ok = window_margins.iter().all(|&m| m >= 1.0);
    let k_limit = deff_min.log2() / 3.0;
    let k_margin = k_limit / k as f64;
    Ok(ConditionsReport {
        window_threshold,
        window_margins,
        windows_ok,
        k_limit,
        k_margin,
        k_ok: (k as f64) < k_limit,
    })
}

/// Which dephasing-or-identity slot sits left of each instrument above the
/// summed projector, and which earlier slot carries a second projector sum.
#[derive(Clone, Debug)]
pub struct GeneralTermPattern {
    /// 1-based position of the outer projector sum.
    pub j: usize,
    /// For positions `j+1 ..= k`: `true` inserts dephasing, `false` the
    /// identity.
    pub tail_dephasings: Vec<bool>,
    /// Optional earlier position (1-based, `< j`) carrying an inner summed
    /// projector; every other earlier slot dephases.
    pub inner_projector: Option<usize>,
}

impl GeneralTermPattern {
    /// Single-sum pattern with dephasing everywhere above the projector.
    pub fn single(j: usize, k: usize) -> Self {
        Self {
            j,
            tail_dephasings: vec![true; k - j],
            inner_projector: None,
        }
    }

    /// Double-sum pattern with the inner projector at position `i < j`.
    pub fn double(i: usize, j: usize, k: usize) -> Self {
        Self {
            j,
            tail_dephasings: vec![true; k - j],
            inner_projector: Some(i),
        }
    }
}

/// Verify the summed-projector identity: the explicit sum
/// `Σ |tr[A_k D_k ... A_j P_{n_j m_j} A_{j-1} S_{j-1} ... A_1 S_1 (ρ)]|²`
/// over off-diagonal projector indices never exceeds
/// `‖A_{k:...:j}‖² · tr[$(A_{j-1}(ω_{j-1}))²]`.
pub fn verify_general_term(
    s: &Spectrum,
    rho: &CMat,
    instruments: &[KrausMap],
    pattern: &GeneralTermPattern,
) -> Result<BoundReport> {
    let k = instruments.len();
    let d_h = s.num_levels();
    if pattern.j < 1 || pattern.j > k {
        return Err(Error::Config(format!(
            "projector position {} outside 1..={k}",
            pattern.j
        )));
    }
    if pattern.tail_dephasings.len() != k - pattern.j {
        return Err(Error::Config(format!(
            "{} tail slots for positions {}..={k}",
            pattern.tail_dephasings.len(),
            pattern.j + 1
        )));
    }
    if let Some(i) = pattern.inner_projector {
        if i < 1 || i >= pattern.j {
            return Err(Error::Config(format!(
                "inner projector position {i} must precede {}",
                pattern.j
            )));
        }
    }
    if d_h > 8 {
        return Err(Error::CapExceeded {
            terms: (d_h as u128).pow(4),
            cap: 8u128.pow(4),
        });
    }
    let d_se = s.total_dim();
    let d_e = d_se / instruments[0].dim_in();
    let ext: Vec<KrausMap> = instruments
        .iter()
        .map(|a| a.extend_with_identity(d_e))
        .collect();

    let project = |sigma: &CMat, n: usize, m: usize| -> CMat {
        &s.projectors()[n] * sigma * &s.projectors()[m]
    };

    // LHS: explicit summation over the off-diagonal projector indices
    let mut lhs = 0.0f64;
    let inner_pairs: Vec<(usize, usize)> = match pattern.inner_projector {
        Some(_) => (0..d_h)
            .flat_map(|n| (0..d_h).map(move |m| (n, m)))
            .filter(|&(n, m)| n != m)
            .collect(),
        None => vec![(0, 0)], // sentinel, unused
    };
    for &(ni, mi) in &inner_pairs {
        for nj in 0..d_h {
            for mj in 0..d_h {
                if nj == mj {
                    continue;
                }
                let mut sigma = rho.clone();
                for pos in 1..pattern.j {
                    sigma = match pattern.inner_projector {
                        Some(i) if i == pos => project(&sigma, ni, mi),
                        _ => s.dephase(&sigma),
                    };
                    sigma = ext[pos - 1].apply(&sigma)?;
                }
                sigma = ext[pattern.j - 1].apply(&project(&sigma, nj, mj))?;
                for (slot, &deph) in pattern.tail_dephasings.iter().enumerate() {
                    if deph {
                        sigma = s.dephase(&sigma);
                    }
                    sigma = ext[pattern.j + slot].apply(&sigma)?;
                }
                lhs += crate::linalg::trace(&sigma).norm_sqr();
            }
        }
        if pattern.inner_projector.is_none() {
            break;
        }
    }

    // RHS: POVM norm of the tail composition times the dephased purity of
    // the all-dephased chain state below the projector
    let mut tail = ext[pattern.j - 1].clone();
    for (slot, &deph) in pattern.tail_dephasings.iter().enumerate() {
        let next = &ext[pattern.j + slot];
        if deph {
            tail = next.compose(&dephasing_channel(s))?.compose(&tail)?;
        } else {
            tail = next.compose(&tail)?;
        }
    }
    let norm_sq = povm_norm(&tail).powi(2);
    let sigma_pre = if pattern.j == 1 {
        rho.clone()
    } else {
        let omega = intermediate_state(s, rho, &instruments[..pattern.j - 2])?;
        ext[pattern.j - 2].apply(&omega)?
    };
    let rhs = norm_sq * dephased_purity(&sigma_pre, s);

    let digest = format!(
        "general_term j={} inner={:?} tails={:?} k={k} d_H={d_h}",
        pattern.j, pattern.inner_projector, pattern.tail_dephasings
    );
    Ok(BoundReport::new("general_term", lhs, rhs, digest))
}
