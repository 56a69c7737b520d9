//! Operational distances between processes, geometric measures, and
//! classicality diagnostics.
//!
//! All distances here are maximizations over explicit finite tester sets:
//! `D_M(Υ, Ω) = (1/2) max_{A ∈ M} Σ_x |⟨A_x⟩_{Υ-Ω}|`. A geometric measure
//! is the distance to the nearest member of a candidate set of processes;
//! the classicality defect probes whether ignoring one time step equals
//! summing over its outcomes in a fixed basis.

use rayon::prelude::*;

use crate::comb::LegOp;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::process::{
    build_process, build_tester, expectation, InstrumentSet, ProcessTensor, Tester, TesterRecipe,
};
use crate::channels::KrausMap;
use crate::spectral::Spectrum;
use crate::timeavg::TimeWindows;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A restricted set of processes defining a geometric measure.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    processes: Vec<ProcessTensor>,
    label: String,
}

impl CandidateSet {
    pub fn new(processes: Vec<ProcessTensor>, label: impl Into<String>) -> Result<Self> {
        let first = processes
            .first()
            .ok_or_else(|| Error::EmptySet("candidate set".into()))?;
        let legs = first.choi().legs().to_vec();
        for p in &processes {
            if p.choi().legs() != legs.as_slice() {
                return Err(Error::LegMismatch(
                    "candidates must share one leg structure".into(),
                ));
            }
        }
        Ok(Self {
            processes,
            label: label.into(),
        })
    }

    pub fn processes(&self) -> &[ProcessTensor] {
        &self.processes
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Operational diamond distance over a finite instrument set:
/// half the best total-variation distinguishability achievable with the
/// available testers.
pub fn operational_diamond(
    p: &ProcessTensor,
    q: &ProcessTensor,
    set: &InstrumentSet,
) -> Result<f64> {
    if set.testers.is_empty() {
        return Err(Error::EmptySet("instrument set".into()));
    }
    let mut best = 0.0f64;
    for tester in &set.testers {
        let mut total = 0.0f64;
        for (_, op) in tester.outcomes() {
            let diff = expectation(p, op)? - expectation(q, op)?;
            total += diff.norm();
        }
        best = best.max(total);
    }
    Ok(0.5 * best)
}

/// Minimum operational distance from `p` to the candidate set; returns the
/// value together with the index of the minimizing candidate.
pub fn geometric_measure(
    p: &ProcessTensor,
    candidates: &CandidateSet,
    set: &InstrumentSet,
) -> Result<(f64, usize)> {
    let mut best = f64::INFINITY;
    let mut arg = 0usize;
    for (idx, lambda) in candidates.processes.iter().enumerate() {
        let d = operational_diamond(p, lambda, set)?;
        if d < best {
            best = d;
            arg = idx;
        }
    }
    Ok((best, arg))
}

fn projective_outcomes(basis: &CMat) -> Vec<(String, KrausMap)> {
    let d = basis.nrows();
    (0..d)
        .map(|x| {
            let v = basis.column(x);
            let proj = v * v.adjoint();
            (format!("x={x}"), KrausMap::new(vec![proj]).expect("projector is CP"))
        })
        .collect()
}

fn dephasing_in_basis(basis: &CMat) -> KrausMap {
    let d = basis.nrows();
    let ops: Vec<CMat> = (0..d)
        .map(|x| {
            let v = basis.column(x);
            v * v.adjoint()
        })
        .collect();
    KrausMap::new(ops).expect("basis projectors form a channel")
}

/// Maximum violation of the consistency condition that marginalizing a time
/// step quantum mechanically (inserting the identity instrument) equals
/// marginalizing it classically (dephasing in the given basis), over all
/// insertion times and outcome strings at the other times. Zero exactly for
/// processes whose statistics are classical in those bases.
pub fn classicality_defect(p: &ProcessTensor, bases: &[CMat]) -> Result<f64> {
    let k = p.k();
    if bases.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} bases for a {k}-step process",
            bases.len()
        )));
    }
    let d_s = p.d_s();
    for b in bases {
        if b.nrows() != d_s || b.ncols() != d_s {
            return Err(Error::DimensionMismatch(format!(
                "basis is {}x{}, system dimension is {d_s}",
                b.nrows(),
                b.ncols()
            )));
        }
        let defect = crate::linalg::max_abs_diff(&(b.adjoint() * b), &crate::linalg::identity(d_s));
        if defect > 1e-9 {
            return Err(Error::NotAState(format!(
                "basis columns are not orthonormal, defect {defect:.3e}"
            )));
        }
    }

    let mut worst = 0.0f64;
    for slot in 0..k {
        let mut steps_dephase: Vec<Vec<(String, KrausMap)>> = Vec::with_capacity(k);
        let mut steps_identity: Vec<Vec<(String, KrausMap)>> = Vec::with_capacity(k);
        for (j, basis) in bases.iter().enumerate() {
            if j == slot {
                steps_dephase.push(vec![("deph".into(), dephasing_in_basis(basis))]);
                steps_identity.push(vec![("id".into(), KrausMap::identity(d_s))]);
            } else {
                let outs = projective_outcomes(basis);
                steps_dephase.push(outs.clone());
                steps_identity.push(outs);
            }
        }
        let t_dephase = build_tester(&TesterRecipe::product(steps_dephase), d_s)?;
        let t_identity = build_tester(&TesterRecipe::product(steps_identity), d_s)?;
        for ((_, op_d), (_, op_i)) in t_dephase.outcomes().iter().zip(t_identity.outcomes()) {
            let diff = expectation(p, op_d)? - expectation(p, op_i)?;
            worst = worst.max(diff.norm());
        }
    }
    Ok(worst)
}

/// The per-slot marginalization testers behind [`classicality_defect`], one
/// tester per insertion slot and outcome string holding the dephasing and
/// identity variants as its two outcomes. Useful as an instrument set when
/// relating defects of two processes to their operational distance.
pub fn classicality_instrument_set(bases: &[CMat], d_s: usize) -> Result<InstrumentSet> {
    let k = bases.len();
    let mut testers = Vec::new();
    for slot in 0..k {
        let mut steps_dephase: Vec<Vec<(String, KrausMap)>> = Vec::with_capacity(k);
        let mut steps_identity: Vec<Vec<(String, KrausMap)>> = Vec::with_capacity(k);
        for (j, basis) in bases.iter().enumerate() {
            if j == slot {
                steps_dephase.push(vec![("deph".into(), dephasing_in_basis(basis))]);
                steps_identity.push(vec![("id".into(), KrausMap::identity(d_s))]);
            } else {
                let outs = projective_outcomes(basis);
                steps_dephase.push(outs.clone());
                steps_identity.push(outs);
            }
        }
        let t_dephase = build_tester(&TesterRecipe::product(steps_dephase), d_s)?;
        let t_identity = build_tester(&TesterRecipe::product(steps_identity), d_s)?;
        for ((ld, op_d), (li, op_i)) in t_dephase.outcomes().iter().zip(t_identity.outcomes()) {
            testers.push(Tester::from_outcomes(
                vec![
                    (format!("slot{slot},{ld}"), op_d.clone()),
                    (format!("slot{slot},{li}"), op_i.clone()),
                ],
                1,
                k,
            )?);
        }
    }
    InstrumentSet::new(testers)
}

/// Monte Carlo estimate of the time-averaged operational distance between
/// the process at uniformly drawn intervals and its equilibrium
/// counterpart. Returns the sample mean and its standard error; sampling is
/// reproducible through per-sample counter streams of the seeded generator,
/// independent of worker count.
#[allow(clippy::too_many_arguments)]
pub fn time_averaged_distance(
    s: &Spectrum,
    rho: &CMat,
    omega: &ProcessTensor,
    set: &InstrumentSet,
    tw: &TimeWindows,
    samples: usize,
    seed: u64,
    d_s: usize,
    d_e: usize,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::Config("need at least one Monte Carlo sample".into()));
    }
    let k = tw.k();
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|idx| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64 + 1);
            let dts: Vec<f64> = tw.windows().iter().map(|&t| rng.gen::<f64>() * t).collect();
            debug_assert_eq!(dts.len(), k);
            let upsilon = build_process(s, rho, &dts, d_s, d_e)?;
            operational_diamond(&upsilon, omega, set)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (samples.max(2) - 1) as f64;
    Ok((mean, (var / samples as f64).sqrt()))
}

impl Tester {
    /// Assemble a tester directly from outcome operators; used for
    /// diagnostic sets whose outcomes are not generated by one instrument.
    pub fn from_outcomes(
        outcomes: Vec<(String, LegOp)>,
        ancilla_dim: usize,
        k: usize,
    ) -> Result<Tester> {
        let first = outcomes
            .first()
            .ok_or_else(|| Error::EmptySet("tester outcomes".into()))?;
        let mut total = first.1.clone();
        for (_, op) in outcomes.iter().skip(1) {
            total = total.add(op)?;
        }
        Ok(Tester::from_parts(total, outcomes, ancilla_dim, k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;
    use crate::process::build_equilibrium;
    use crate::spectral::{diagonalize, Hamiltonian};
    use approx::assert_abs_diff_eq;

    fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    fn rand_state(rng: &mut ChaCha8Rng, d: usize) -> CMat {
        let g = rand_mat(rng, d, d);
        let w = &g * g.adjoint();
        let t = crate::linalg::trace(&w).re;
        w.map(|z| z / c(t, 0.0))
    }

    fn rand_unitary(rng: &mut ChaCha8Rng, d: usize) -> CMat {
        rand_mat(rng, d, d).qr().q()
    }

    fn rand_spectrum(rng: &mut ChaCha8Rng, d: usize) -> Spectrum {
        let g = rand_mat(rng, d, d);
        let h = Hamiltonian::new((&g + g.adjoint()).scale(0.5)).unwrap();
        let (hn, _, _) = h.normalized_to_unit_range();
        diagonalize(&hn, crate::spectral::default_degeneracy_tol(&hn)).unwrap()
    }

    fn projective_set(rng: &mut ChaCha8Rng, d_s: usize, k: usize, n_testers: usize) -> InstrumentSet {
        let testers = (0..n_testers)
            .map(|_| {
                let steps = (0..k)
                    .map(|_| projective_outcomes(&rand_unitary(rng, d_s)))
                    .collect();
                build_tester(&TesterRecipe::product(steps), d_s).unwrap()
            })
            .collect();
        InstrumentSet::new(testers).unwrap()
    }

    #[test]
    fn distance_vanishes_on_equal_processes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = rand_spectrum(&mut rng, 4);
        let rho = rand_state(&mut rng, 4);
        let p = build_process(&s, &rho, &[0.4, 1.1], 2, 2).unwrap();
        let set = projective_set(&mut rng, 2, 2, 2);
        assert!(operational_diamond(&p, &p, &set).unwrap() < 1e-12);
    }

    #[test]
    fn trivial_tester_cannot_distinguish() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = rand_spectrum(&mut rng, 4);
        let rho = rand_state(&mut rng, 4);
        let p = build_process(&s, &rho, &[0.7], 2, 2).unwrap();
        let q = build_equilibrium(&s, &rho, 1, 2, 2).unwrap();
        let trivial = build_tester(
            &TesterRecipe::single(vec![KrausMap::identity(2)]),
            2,
        )
        .unwrap();
        let set = InstrumentSet::new(vec![trivial]).unwrap();
        assert!(operational_diamond(&p, &q, &set).unwrap() < 1e-12);
    }

    #[test]
    fn qubit_one_step_closed_form() {
        // S alone (trivial environment), H = ω|1><1|, ρ = |+><+|, probed in
        // the |±> basis: the distinguishability is |cos(ω Δt)| / 2
        let omega = 0.9;
        let h = Hamiltonian::new(CMat::from_fn(2, 2, |i, j| {
            if i == 1 && j == 1 {
                c(omega, 0.0)
            } else {
                c(0.0, 0.0)
            }
        }))
        .unwrap();
        let s = diagonalize(&h, 1e-9).unwrap();
        let rho = CMat::from_fn(2, 2, |_, _| c(0.5, 0.0));
        let q = build_equilibrium(&s, &rho, 1, 2, 1).unwrap();
        let sq = 1.0 / (2.0f64).sqrt();
        let basis = CMat::from_fn(2, 2, |i, j| {
            // columns |+>, |->
            if j == 0 {
                c(sq, 0.0)
            } else if i == 0 {
                c(sq, 0.0)
            } else {
                c(-sq, 0.0)
            }
        });
        let tester = build_tester(
            &TesterRecipe::product(vec![projective_outcomes(&basis)]),
            2,
        )
        .unwrap();
        let set = InstrumentSet::new(vec![tester]).unwrap();
        for dt in [0.3, 0.9, 2.2] {
            let p = build_process(&s, &rho, &[dt], 2, 1).unwrap();
            let d = operational_diamond(&p, &q, &set).unwrap();
            assert_abs_diff_eq!(d, (omega * dt).cos().abs() / 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn pseudometric_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = rand_spectrum(&mut rng, 4);
        let set = projective_set(&mut rng, 2, 2, 2);
        let mut procs = Vec::new();
        for _ in 0..3 {
            let rho = rand_state(&mut rng, 4);
            let dts = vec![rng.gen::<f64>() * 3.0, rng.gen::<f64>() * 3.0];
            procs.push(build_process(&s, &rho, &dts, 2, 2).unwrap());
        }
        let d01 = operational_diamond(&procs[0], &procs[1], &set).unwrap();
        let d10 = operational_diamond(&procs[1], &procs[0], &set).unwrap();
        assert_abs_diff_eq!(d01, d10, epsilon = 1e-14);
        let d02 = operational_diamond(&procs[0], &procs[2], &set).unwrap();
        let d12 = operational_diamond(&procs[1], &procs[2], &set).unwrap();
        assert!(d02 <= d01 + d12 + 1e-10, "triangle inequality violated");
        assert!((0.0..=1.0 + 1e-9).contains(&d01));
    }

    #[test]
    fn distance_monotone_in_instrument_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = rand_spectrum(&mut rng, 4);
        let rho = rand_state(&mut rng, 4);
        let p = build_process(&s, &rho, &[0.8, 1.9], 2, 2).unwrap();
        let q = build_equilibrium(&s, &rho, 2, 2, 2).unwrap();
        let small = projective_set(&mut rng, 2, 2, 1);
        let mut testers = small.testers.clone();
        testers.extend(projective_set(&mut rng, 2, 2, 2).testers);
        let large = InstrumentSet::new(testers).unwrap();
        let d_small = operational_diamond(&p, &q, &small).unwrap();
        let d_large = operational_diamond(&p, &q, &large).unwrap();
        assert!(d_large >= d_small - 1e-14);
    }

    #[test]
    fn geometric_measure_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = rand_spectrum(&mut rng, 4);
        let rho = rand_state(&mut rng, 4);
        let p = build_process(&s, &rho, &[0.5, 1.2], 2, 2).unwrap();
        let om = build_equilibrium(&s, &rho, 2, 2, 2).unwrap();
        let set = projective_set(&mut rng, 2, 2, 2);

        // p belongs to the candidate set: measure zero at the right index
        let cands = CandidateSet::new(vec![om.clone(), p.clone()], "contains-p").unwrap();
        let (val, idx) = geometric_measure(&p, &cands, &set).unwrap();
        assert!(val < 1e-12);
        assert_eq!(idx, 1);

        // singleton candidate set reduces to the plain distance
        let singleton = CandidateSet::new(vec![om.clone()], "equilibrium").unwrap();
        let (val2, _) = geometric_measure(&p, &singleton, &set).unwrap();
        assert_abs_diff_eq!(
            val2,
            operational_diamond(&p, &om, &set).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn geometric_measure_difference_bounded_by_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = rand_spectrum(&mut rng, 4);
        let set = projective_set(&mut rng, 2, 2, 2);
        for _ in 0..10 {
            let rho = rand_state(&mut rng, 4);
            let dts1 = vec![rng.gen::<f64>() * 3.0, rng.gen::<f64>() * 3.0];
            let p = build_process(&s, &rho, &dts1, 2, 2).unwrap();
            let om = build_equilibrium(&s, &rho, 2, 2, 2).unwrap();
            let mut cands = Vec::new();
            for _ in 0..3 {
                let r2 = rand_state(&mut rng, 4);
                let dts = vec![rng.gen::<f64>() * 3.0, rng.gen::<f64>() * 3.0];
                cands.push(build_process(&s, &r2, &dts, 2, 2).unwrap());
            }
            let cset = CandidateSet::new(cands, "random").unwrap();
            let (ep, _) = geometric_measure(&p, &cset, &set).unwrap();
            let (eo, _) = geometric_measure(&om, &cset, &set).unwrap();
            let d = operational_diamond(&p, &om, &set).unwrap();
            assert!(
                (ep - eo).abs() <= d + 1e-10,
                "measure difference {} exceeds distance {d}",
                (ep - eo).abs()
            );
        }
    }

    #[test]
    fn classical_process_has_zero_defect() {
        // diagonal Hamiltonian, diagonal state, computational bases: all
        // operators commute and the statistics are classical by construction
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = Hamiltonian::new(CMat::from_fn(4, 4, |i, j| {
            if i == j {
                c(0.3 * i as f64 + 0.1, 0.0)
            } else {
                c(0.0, 0.0)
            }
        }))
        .unwrap();
        let s = diagonalize(&h, 1e-9).unwrap();
        let probs: Vec<f64> = {
            let raw: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() + 0.1).collect();
            let tot: f64 = raw.iter().sum();
            raw.into_iter().map(|p| p / tot).collect()
        };
        let rho = CMat::from_fn(4, 4, |i, j| {
            if i == j {
                c(probs[i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let p = build_process(&s, &rho, &[0.9, 1.7], 2, 2).unwrap();
        let defect = classicality_defect(&p, &[identity(2), identity(2)]).unwrap();
        assert!(defect < 1e-10, "classical process shows defect {defect}");
    }

    #[test]
    fn coherent_process_has_positive_defect() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = rand_spectrum(&mut rng, 4);
        let rho = rand_state(&mut rng, 4);
        let p = build_process(&s, &rho, &[0.6, 1.3], 2, 2).unwrap();
        let defect = classicality_defect(&p, &[identity(2), identity(2)]).unwrap();
        assert!(defect > 1e-4, "generic coherent process looks classical");
    }

    #[test]
    fn defect_difference_bounded_by_induced_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = rand_spectrum(&mut rng, 4);
        let rho = rand_state(&mut rng, 4);
        let p = build_process(&s, &rho, &[0.8, 2.1], 2, 2).unwrap();
        let om = build_equilibrium(&s, &rho, 2, 2, 2).unwrap();
        let bases = vec![identity(2), rand_unitary(&mut rng, 2)];
        let dp = classicality_defect(&p, &bases).unwrap();
        let dom = classicality_defect(&om, &bases).unwrap();
        let induced = classicality_instrument_set(&bases, 2).unwrap();
        let d = operational_diamond(&p, &om, &induced).unwrap();
        assert!(
            (dp - dom).abs() <= 2.0 * d + 1e-10,
            "defect difference {} exceeds 2x distance {d}",
            (dp - dom).abs()
        );
    }

    #[test]
    fn time_averaged_distance_zero_for_degenerate_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = Hamiltonian::new(identity(4)).unwrap();
        let s = diagonalize(&h, 1e-9).unwrap();
        let rho = rand_state(&mut rng, 4);
        let om = build_equilibrium(&s, &rho, 1, 2, 2).unwrap();
        let set = projective_set(&mut rng, 2, 1, 2);
        let tw = TimeWindows::uniform(5.0, 1).unwrap();
        let (mean, se) =
            time_averaged_distance(&s, &rho, &om, &set, &tw, 16, 7, 2, 2).unwrap();
        assert!(mean < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn time_averaged_distance_reproducible_and_converging() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = rand_spectrum(&mut rng, 4);
        let rho = rand_state(&mut rng, 4);
        let om = build_equilibrium(&s, &rho, 1, 2, 2).unwrap();
        let set = projective_set(&mut rng, 2, 1, 2);
        let tw = TimeWindows::uniform(20.0, 1).unwrap();
        let (m1, se1) = time_averaged_distance(&s, &rho, &om, &set, &tw, 64, 3, 2, 2).unwrap();
        let (m2, _) = time_averaged_distance(&s, &rho, &om, &set, &tw, 64, 3, 2, 2).unwrap();
        assert_abs_diff_eq!(m1, m2, epsilon = 0.0); // bitwise reproducible
        let (_, se4) = time_averaged_distance(&s, &rho, &om, &set, &tw, 256, 3, 2, 2).unwrap();
        // quadrupling samples should halve the standard error, within noise
        let ratio = se1 / se4.max(1e-30);
        assert!(
            (1.0..4.0).contains(&ratio),
            "standard error scaling off: {se1} -> {se4}"
        );
    }

    #[test]
    fn induced_set_outcome_ops_match_defect_probes() {
        // the induced testers evaluate to the same expectation differences
        // the defect maximizes over
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = rand_spectrum(&mut rng, 4);
        let rho = rand_state(&mut rng, 4);
        let p = build_process(&s, &rho, &[0.5, 1.0], 2, 2).unwrap();
        let bases = vec![identity(2), identity(2)];
        let set = classicality_instrument_set(&bases, 2).unwrap();
        let mut best = 0.0f64;
        for tester in &set.testers {
            let a = expectation(&p, &tester.outcomes()[0].1).unwrap();
            let b = expectation(&p, &tester.outcomes()[1].1).unwrap();
            best = best.max((a - b).norm());
        }
        let defect = classicality_defect(&p, &bases).unwrap();
        assert_abs_diff_eq!(best, defect, epsilon = 1e-12);
    }
}
