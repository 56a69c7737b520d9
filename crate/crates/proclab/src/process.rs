//! Process tensors, testers, and multitime expectation values.
//!
//! A k-step process on a system S coupled to an environment E is the Choi
//! state `Υ = tr_E[U_k * ... * U_1 * ρ]`, a positive operator on the 2k-1
//! legs `(k^i, (k-1)^o, (k-1)^i, ..., 1^o, 1^i)`: at each intervention time
//! the process emits a state on `j^i` and accepts the instrument's output on
//! `j^o`; after the final instrument everything is traced out. Replacing
//! every unitary step by dephasing in the energy eigenbasis gives the
//! equilibrium process `Ω`, the infinite-time average of `Υ` over all
//! interval lengths.
//!
//! A [`Tester`] is the Choi state of a multitime instrument, possibly
//! carrying quantum memory through an ancilla W threaded between the times.
//! Expectation values follow the multitime Born rule `tr[Υ A^T]`, evaluated
//! here as the total link of the two combs.
//!
//! Everything in this module is cross-checked against
//! [`sequential_expectation`], which evolves the global state by plain
//! matrix arithmetic and never touches the comb machinery.

use crate::channels::KrausMap;
use crate::comb::{Leg, LegOp};
use crate::error::{Error, Result};
use crate::linalg::{self, c, C64, CMat};
use crate::spectral::Spectrum;

/// Positivity floor for process tensors.
pub const PSD_FLOOR: f64 = -1e-10;
/// Tolerance for trace and causality conditions.
pub const COMB_TOL: f64 = 1e-9;

/// Canonical leg order of a k-step process on system dimension `d_s`:
/// `(k^i, (k-1)^o, (k-1)^i, ..., 1^o, 1^i)`.
pub fn canonical_legs(k: usize, d_s: usize) -> Vec<(Leg, usize)> {
    let mut legs = vec![(Leg::SysIn(k as u32), d_s)];
    for j in (1..k).rev() {
        legs.push((Leg::SysOut(j as u32), d_s));
        legs.push((Leg::SysIn(j as u32), d_s));
    }
    legs
}

/// Choi state of a k-step process with the bookkeeping of its construction.
#[derive(Clone, Debug)]
pub struct ProcessTensor {
    op: LegOp,
    k: usize,
    d_s: usize,
    d_e: usize,
}

impl ProcessTensor {
    /// Wrap an operator already on the canonical legs.
    pub fn from_op(op: LegOp, k: usize, d_s: usize, d_e: usize) -> Result<Self> {
        let want = canonical_legs(k, d_s);
        let aligned = op.permuted(&want.iter().map(|&(l, _)| l).collect::<Vec<_>>())?;
        if aligned.legs() != want.as_slice() {
            return Err(Error::LegMismatch(format!(
                "process tensor legs {:?} do not match the canonical {k}-step layout",
                op.legs()
            )));
        }
        Ok(Self {
            op: aligned,
            k,
            d_s,
            d_e,
        })
    }

    pub fn choi(&self) -> &LegOp {
        &self.op
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn d_e(&self) -> usize {
        self.d_e
    }

    /// Total trace; equals `d_s^{k-1}` for a valid process.
    pub fn trace(&self) -> C64 {
        self.op.trace()
    }

    /// Entrywise max distance to another process on the same legs.
    pub fn distance_to(&self, other: &ProcessTensor) -> Result<f64> {
        self.op.distance_to(&other.op)
    }

    /// Positivity, trace normalization, and the trace-out causality chain:
    /// tracing the final input leg must leave `1_{(k-1)^o} ⊗ Υ'` with `Υ'`
    /// the (k-1)-step process, recursively down to the unit scalar.
    pub fn validate(&self) -> Result<()> {
        let min = linalg::min_eigenvalue(self.op.mat());
        if min < PSD_FLOOR {
            return Err(Error::NotPositive(min));
        }
        let want_trace = (self.d_s as f64).powi(self.k as i32 - 1);
        let tr = self.trace();
        if (tr - c(want_trace, 0.0)).norm() > COMB_TOL * want_trace.max(1.0) {
            return Err(Error::NotAState(format!(
                "process trace {tr} differs from d_s^(k-1) = {want_trace}"
            )));
        }

        let mut current = self.op.clone();
        for j in (1..=self.k).rev() {
            let reduced = current.partial_trace(&[Leg::SysIn(j as u32)])?;
            if j == 1 {
                // the last reduction is the scalar tr[ρ] = 1
                let val = reduced.trace();
                if (val - c(1.0, 0.0)).norm() > COMB_TOL {
                    return Err(Error::NotAState(format!(
                        "causality chain terminates at {val}, expected 1"
                    )));
                }
                break;
            }
            let out_leg = Leg::SysOut(j as u32 - 1);
            let rest = reduced.partial_trace(&[out_leg])?;
            let rebuilt = LegOp::identity_on(vec![(out_leg, self.d_s)])
                .link(&rest.scale(c(1.0 / self.d_s as f64, 0.0)))?;
            if reduced.distance_to(&rebuilt)? > COMB_TOL {
                return Err(Error::NotAState(format!(
                    "causality violated after tracing leg {}i",
                    j
                )));
            }
            current = rest.scale(c(1.0 / self.d_s as f64, 0.0));
        }
        Ok(())
    }
}

fn check_state(rho: &CMat, dim: usize, what: &str) -> Result<()> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {dim}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let tr = linalg::trace(rho);
    if (tr - c(1.0, 0.0)).norm() > 1e-9 {
        return Err(Error::NotAState(format!("{what} has trace {tr}")));
    }
    let min = linalg::min_eigenvalue(rho);
    if min < PSD_FLOOR * linalg::max_abs(rho).max(1.0) {
        return Err(Error::NotAState(format!(
            "{what} has negative eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

enum Step<'a> {
    Unitary(f64),
    Dephase(&'a Spectrum),
}

/// Choi state of one global evolution step as a leg operator; for the final
/// step the outgoing environment leg is traced immediately, which keeps the
/// link chain small.
fn step_op(
    s: &Spectrum,
    step: &Step<'_>,
    j: usize,
    k: usize,
    d_s: usize,
    d_e: usize,
) -> Result<LegOp> {
    let out_legs = [(Leg::SysIn(j as u32), d_s), (Leg::Env(j as u32), d_e)];
    let in_legs = [
        (Leg::SysOut(j as u32 - 1), d_s),
        (Leg::Env(j as u32 - 1), d_e),
    ];
    let kraus: Vec<CMat> = match step {
        Step::Unitary(dt) => vec![s.evolution(*dt)],
        Step::Dephase(sp) => sp.projectors().to_vec(),
    };
    let op = LegOp::from_kraus(&kraus, &out_legs, &in_legs)?;
    if j == k {
        op.partial_trace(&[Leg::Env(j as u32)])
    } else {
        Ok(op)
    }
}

fn build_chain(
    s: &Spectrum,
    rho: &CMat,
    steps: &[Step<'_>],
    d_s: usize,
    d_e: usize,
) -> Result<ProcessTensor> {
    let k = steps.len();
    if k == 0 {
        return Err(Error::EmptySet("evolution steps".into()));
    }
    if d_s * d_e != s.total_dim() {
        return Err(Error::DimensionMismatch(format!(
            "d_s * d_e = {} does not factor the global dimension {}",
            d_s * d_e,
            s.total_dim()
        )));
    }
    check_state(rho, d_s * d_e, "initial state")?;

    let mut acc = LegOp::from_matrix(
        vec![(Leg::SysOut(0), d_s), (Leg::Env(0), d_e)],
        rho.clone(),
    )?;
    for (idx, step) in steps.iter().enumerate() {
        let op = step_op(s, step, idx + 1, k, d_s, d_e)?;
        acc = op.link(&acc)?;
    }
    let order: Vec<Leg> = canonical_legs(k, d_s).iter().map(|&(l, _)| l).collect();
    ProcessTensor::from_op(acc.permuted(&order)?, k, d_s, d_e)
}

/// Assemble the process tensor `Υ = tr_E[U_k * ... * U_1 * ρ]` for the given
/// evolution intervals.
pub fn build_process(
    s: &Spectrum,
    rho: &CMat,
    dts: &[f64],
    d_s: usize,
    d_e: usize,
) -> Result<ProcessTensor> {
    let steps: Vec<Step> = dts.iter().map(|&dt| Step::Unitary(dt)).collect();
    build_chain(s, rho, &steps, d_s, d_e)
}

/// Assemble the equilibrium process `Ω = tr_E[$ * ... * $ * ρ]`: every
/// unitary step replaced by dephasing, time independent by construction.
pub fn build_equilibrium(
    s: &Spectrum,
    rho: &CMat,
    k: usize,
    d_s: usize,
    d_e: usize,
) -> Result<ProcessTensor> {
    let steps: Vec<Step> = (0..k).map(|_| Step::Dephase(s)).collect();
    build_chain(s, rho, &steps, d_s, d_e)
}

/// Multitime Born rule: `tr[Υ A^T]`, the total link of the process with a
/// tester (or single outcome) on matching legs.
pub fn expectation(p: &ProcessTensor, tester_op: &LegOp) -> Result<C64> {
    p.choi().pair(tester_op)
}

/// One concrete instrument sequence, the input of the sequential oracle:
/// `k` CP maps on S⊗W, an initial ancilla state, and a final ancilla weight.
#[derive(Clone, Debug)]
pub struct InstrumentChain {
    pub maps: Vec<KrausMap>,
    pub ancilla_dim: usize,
    pub initial_ancilla: CMat,
    pub final_weight: CMat,
}

impl InstrumentChain {
    /// A memoryless chain: trivial one-dimensional ancilla.
    pub fn memoryless(maps: Vec<KrausMap>) -> Self {
        Self {
            maps,
            ancilla_dim: 1,
            initial_ancilla: linalg::identity(1),
            final_weight: linalg::identity(1),
        }
    }

    pub fn k(&self) -> usize {
        self.maps.len()
    }
}

/// Independent oracle: evolve `ρ ⊗ w₀` on S⊗E⊗W by direct matrix
/// arithmetic, alternating global unitaries with the chain's instruments,
/// then read out `tr[(1_SE ⊗ F) σ]`.
pub fn sequential_expectation(
    s: &Spectrum,
    rho: &CMat,
    chain: &InstrumentChain,
    dts: &[f64],
    d_s: usize,
    d_e: usize,
) -> Result<C64> {
    if dts.len() != chain.maps.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} intervals for {} instruments",
            dts.len(),
            chain.maps.len()
        )));
    }
    sequential_value(s, rho, chain, Some(dts), d_s, d_e)
}

/// The same readout on the equilibrium chain: every unitary replaced by
/// dephasing. Independent of any interval choice.
pub fn equilibrium_sequential_expectation(
    s: &Spectrum,
    rho: &CMat,
    chain: &InstrumentChain,
    d_s: usize,
    d_e: usize,
) -> Result<C64> {
    sequential_value(s, rho, chain, None, d_s, d_e)
}

fn sequential_value(
    s: &Spectrum,
    rho: &CMat,
    chain: &InstrumentChain,
    dts: Option<&[f64]>,
    d_s: usize,
    d_e: usize,
) -> Result<C64> {
    let d_se = d_s * d_e;
    if d_se != s.total_dim() {
        return Err(Error::DimensionMismatch(format!(
            "d_s * d_e = {d_se} does not factor the global dimension {}",
            s.total_dim()
        )));
    }
    if rho.nrows() != d_se {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} does not match SE dimension {d_se}",
            rho.nrows()
        )));
    }
    let d_w = chain.ancilla_dim;
    for m in &chain.maps {
        if m.dim_in() != d_s * d_w || m.dim_out() != d_s * d_w {
            return Err(Error::DimensionMismatch(format!(
                "instrument acts on dimension {}, expected S⊗W = {}",
                m.dim_in(),
                d_s * d_w
            )));
        }
    }

    let mut sigma = rho.kronecker(&chain.initial_ancilla);
    for (j, m) in chain.maps.iter().enumerate() {
        match dts {
            Some(ts) => {
                let u = s.evolution(ts[j]).kronecker(&linalg::identity(d_w));
                sigma = &u * sigma * u.adjoint();
            }
            None => {
                let mut next = CMat::zeros(d_se * d_w, d_se * d_w);
                for p in s.projectors() {
                    let pw = p.kronecker(&linalg::identity(d_w));
                    next += &pw * &sigma * &pw;
                }
                sigma = next;
            }
        }
        let mut next = CMat::zeros(d_se * d_w, d_se * d_w);
        for key in m.kraus_ops() {
            let k_full = linalg::embed_sw(key, d_s, d_e, d_w);
            next += &k_full * &sigma * k_full.adjoint();
        }
        sigma = next;
    }
    let weight = linalg::identity(d_se).kronecker(&chain.final_weight);
    Ok(linalg::trace(&(weight * sigma)))
}

/// Outcome-labeled description of a multitime instrument: per-time CP maps
/// on S⊗W whose per-step sums are deterministic on the reachable subspace,
/// an initial ancilla state, and a final ancilla POVM.
#[derive(Clone, Debug)]
pub struct TesterRecipe {
    pub steps: Vec<Vec<(String, KrausMap)>>,
    pub ancilla_dim: usize,
    pub initial_ancilla: CMat,
    pub final_povm: Vec<(String, CMat)>,
}

impl TesterRecipe {
    /// Memoryless recipe from per-time outcome lists of maps on S.
    pub fn product(steps: Vec<Vec<(String, KrausMap)>>) -> Self {
        Self {
            steps,
            ancilla_dim: 1,
            initial_ancilla: linalg::identity(1),
            final_povm: vec![(String::new(), linalg::identity(1))],
        }
    }

    /// Single-outcome memoryless recipe (one CP map per time).
    pub fn single(maps: Vec<KrausMap>) -> Self {
        Self::product(
            maps.into_iter()
                .map(|m| vec![(String::new(), m)])
                .collect(),
        )
    }

    pub fn k(&self) -> usize {
        self.steps.len()
    }

    /// Number of outcome combinations including the final POVM.
    pub fn num_outcomes(&self) -> usize {
        self.steps.iter().map(Vec::len).product::<usize>() * self.final_povm.len()
    }

    /// The concrete chain of one outcome, for the sequential oracle.
    pub fn chain(&self, outcome: &[usize], povm_idx: usize) -> Result<InstrumentChain> {
        if outcome.len() != self.steps.len() {
            return Err(Error::DimensionMismatch(format!(
                "outcome string length {} for {} times",
                outcome.len(),
                self.steps.len()
            )));
        }
        let mut maps = Vec::with_capacity(outcome.len());
        for (j, &x) in outcome.iter().enumerate() {
            let step = self
                .steps[j]
                .get(x)
                .ok_or_else(|| Error::LevelOutOfRange {
                    index: x,
                    levels: self.steps[j].len(),
                })?;
            maps.push(step.1.clone());
        }
        let f = self
            .final_povm
            .get(povm_idx)
            .ok_or_else(|| Error::LevelOutOfRange {
                index: povm_idx,
                levels: self.final_povm.len(),
            })?;
        Ok(InstrumentChain {
            maps,
            ancilla_dim: self.ancilla_dim,
            initial_ancilla: self.initial_ancilla.clone(),
            final_weight: f.1.clone(),
        })
    }

    /// All outcome index strings paired with a final POVM index.
    pub fn outcome_indices(&self) -> Vec<(Vec<usize>, usize)> {
        let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
        for step in &self.steps {
            let mut next = Vec::with_capacity(combos.len() * step.len());
            for base in &combos {
                for x in 0..step.len() {
                    let mut ext = base.clone();
                    ext.push(x);
                    next.push(ext);
                }
            }
            combos = next;
        }
        let mut out = Vec::with_capacity(combos.len() * self.final_povm.len());
        for combo in combos {
            for y in 0..self.final_povm.len() {
                out.push((combo.clone(), y));
            }
        }
        out
    }
}

/// Choi state of a multitime instrument with outcome resolution.
#[derive(Clone, Debug)]
pub struct Tester {
    op: LegOp,
    outcomes: Vec<(String, LegOp)>,
    ancilla_dim: usize,
    k: usize,
}

impl Tester {
    /// Assemble from an already-summed operator and its outcome list.
    pub(crate) fn from_parts(
        op: LegOp,
        outcomes: Vec<(String, LegOp)>,
        ancilla_dim: usize,
        k: usize,
    ) -> Self {
        Self {
            op,
            outcomes,
            ancilla_dim,
            k,
        }
    }

    pub fn op(&self) -> &LegOp {
        &self.op
    }

    pub fn outcomes(&self) -> &[(String, LegOp)] {
        &self.outcomes
    }

    pub fn num_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Tester causality smoke check: the summed tester must assign total
    /// probability one to a valid process.
    pub fn check_normalized(&self, p: &ProcessTensor) -> Result<()> {
        let total = expectation(p, &self.op)?;
        if (total - c(1.0, 0.0)).norm() > COMB_TOL {
            return Err(Error::NotAState(format!(
                "summed tester gives total probability {total}"
            )));
        }
        Ok(())
    }
}

/// Build the tester Choi states from a recipe: per outcome, the link chain
/// of the initial ancilla, the per-time instrument Chois, and the final
/// ancilla POVM, with the outgoing system leg at the last time traced out.
pub fn build_tester(recipe: &TesterRecipe, d_s: usize) -> Result<Tester> {
    let k = recipe.k();
    if k == 0 {
        return Err(Error::EmptySet("tester steps".into()));
    }
    let d_w = recipe.ancilla_dim;
    for step in &recipe.steps {
        if step.is_empty() {
            return Err(Error::EmptySet("instrument outcomes at one time".into()));
        }
        for (_, m) in step {
            if m.dim_in() != d_s * d_w || m.dim_out() != d_s * d_w {
                return Err(Error::DimensionMismatch(format!(
                    "instrument acts on {}, expected S⊗W = {}",
                    m.dim_in(),
                    d_s * d_w
                )));
            }
        }
    }
    let mut povm_sum = CMat::zeros(d_w, d_w);
    for (_, f) in &recipe.final_povm {
        povm_sum += f;
    }
    if linalg::max_abs_diff(&povm_sum, &linalg::identity(d_w)) > 1e-9 {
        return Err(Error::NotAState(
            "final ancilla POVM does not resolve the identity".into(),
        ));
    }

    let w0 = LegOp::from_matrix(vec![(Leg::Mem(0), d_w)], recipe.initial_ancilla.clone())?;

    // per-time Choi states, outcome by outcome; the final time composes the
    // trace over the outgoing system leg into the Kraus operators
    let mut step_chois: Vec<Vec<LegOp>> = Vec::with_capacity(k);
    for (j, step) in recipe.steps.iter().enumerate() {
        let time = (j + 1) as u32;
        let mut per_outcome = Vec::with_capacity(step.len());
        for (_, m) in step {
            let choi = if j + 1 == k {
                let traced: Vec<CMat> = m
                    .kraus_ops()
                    .iter()
                    .flat_map(|kop| {
                        (0..d_s).map(move |sel| {
                            let mut bra = CMat::zeros(d_w, d_s * d_w);
                            for w in 0..d_w {
                                bra[(w, sel * d_w + w)] = c(1.0, 0.0);
                            }
                            bra * kop
                        })
                    })
                    .collect();
                LegOp::from_kraus(
                    &traced,
                    &[(Leg::Mem(time), d_w)],
                    &[(Leg::SysIn(time), d_s), (Leg::Mem(time - 1), d_w)],
                )?
            } else {
                LegOp::from_kraus(
                    m.kraus_ops(),
                    &[(Leg::SysOut(time), d_s), (Leg::Mem(time), d_w)],
                    &[(Leg::SysIn(time), d_s), (Leg::Mem(time - 1), d_w)],
                )?
            };
            per_outcome.push(choi);
        }
        step_chois.push(per_outcome);
    }

    let povm_ops: Vec<LegOp> = recipe
        .final_povm
        .iter()
        .map(|(_, f)| LegOp::from_matrix(vec![(Leg::Mem(k as u32), d_w)], f.transpose()))
        .collect::<Result<_>>()?;

    // depth-first over outcome strings, sharing chain prefixes
    let canonical: Vec<Leg> = canonical_legs(k, d_s).iter().map(|&(l, _)| l).collect();
    let mut outcomes: Vec<(String, LegOp)> = Vec::with_capacity(recipe.num_outcomes());
    let mut stack: Vec<(usize, Vec<usize>, LegOp)> = vec![(0, Vec::new(), w0)];
    while let Some((depth, combo, acc)) = stack.pop() {
        if depth == k {
            for (y, fop) in povm_ops.iter().enumerate() {
                let finished = fop.link(&acc)?.permuted(&canonical)?;
                let mut label_parts: Vec<String> = combo
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| {
                        let name = &recipe.steps[j][x].0;
                        if name.is_empty() {
                            format!("x{}={}", j + 1, x)
                        } else {
                            name.clone()
                        }
                    })
                    .collect();
                if recipe.final_povm.len() > 1 || !recipe.final_povm[y].0.is_empty() {
                    let name = &recipe.final_povm[y].0;
                    label_parts.push(if name.is_empty() {
                        format!("w={y}")
                    } else {
                        name.clone()
                    });
                }
                outcomes.push((label_parts.join(","), finished));
            }
            continue;
        }
        for (x, choi) in step_chois[depth].iter().enumerate().rev() {
            let mut ext = combo.clone();
            ext.push(x);
            stack.push((depth + 1, ext, choi.link(&acc)?));
        }
    }

    let mut total = outcomes[0].1.clone();
    for (_, op) in outcomes.iter().skip(1) {
        total = total.add(op)?;
    }
    Ok(Tester {
        op: total,
        outcomes,
        ancilla_dim: d_w,
        k,
    })
}

/// A finite collection of testers defining an operational distance.
#[derive(Clone, Debug)]
pub struct InstrumentSet {
    pub testers: Vec<Tester>,
}

impl InstrumentSet {
    pub fn new(testers: Vec<Tester>) -> Result<Self> {
        if testers.is_empty() {
            return Err(Error::EmptySet("instrument set".into()));
        }
        Ok(Self { testers })
    }

    /// Total combined number of outcomes over all testers.
    pub fn total_outcomes(&self) -> usize {
        self.testers.iter().map(Tester::num_outcomes).sum()
    }
}

/// Intermediate equilibrium state `ω_{j} = $ A_{j-1} $ ... A_1 $(ρ)` for the
/// alternating dephase/instrument chain; with no instruments this is `$(ρ)`.
/// Instruments act on S and are extended by the identity on E.
pub fn intermediate_state(
    s: &Spectrum,
    rho: &CMat,
    instruments: &[KrausMap],
) -> Result<CMat> {
    let d_se = s.total_dim();
    if rho.nrows() != d_se || rho.ncols() != d_se {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, global dimension is {d_se}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let mut acc = s.dephase(rho);
    for a in instruments {
        let d_e = d_se / a.dim_in();
        if a.dim_in() * d_e != d_se || a.dim_in() != a.dim_out() {
            return Err(Error::DimensionMismatch(format!(
                "instrument on dimension {} does not divide {d_se}",
                a.dim_in()
            )));
        }
        let ext = a.extend_with_identity(d_e);
        acc = s.dephase(&ext.apply(&acc)?);
    }
    Ok(acc)
}

/// Purity of the dephased operator, `tr[$(σ)²]`, without renormalization.
/// This is the quantity the proof identities bound directly.
pub fn dephased_purity(sigma: &CMat, s: &Spectrum) -> f64 {
    let d = s.dephase(sigma);
    linalg::trace(&(&d * &d)).re
}

/// Effective dimension `d_eff[σ] = 1 / tr[$(σ)²]`, reported for the
/// renormalized state when the input trace is below one.
pub fn effective_dimension(sigma: &CMat, s: &Spectrum) -> Result<f64> {
    let tr = linalg::trace(sigma).re;
    if tr.abs() < 1e-14 {
        return Err(Error::ZeroTrace);
    }
    let normalized = sigma.map(|z| z / c(tr, 0.0));
    Ok(1.0 / dephased_purity(&normalized, s))
}

/// One evaluated stage of the effective-dimension census.
#[derive(Clone, Debug)]
pub struct DeffStage {
    pub label: String,
    pub d_eff: f64,
    /// Set when the stage had zero trace and was skipped.
    pub skipped: bool,
}

/// Report of the minimum effective dimension over the stages of both the
/// process chain and its equilibrium counterpart.
#[derive(Clone, Debug)]
pub struct DeffMinReport {
    pub value: f64,
    pub stages: Vec<DeffStage>,
}

/// Smallest effective dimension at any stage: the undisturbed chain
/// `ρ, A_1(ρ), A_2 A_1(ρ), ...` and the equilibrium chain
/// `ω_1 = $(ρ), A_1(ω_1), A_2(ω_2), ...`, both up to stage k-1.
/// Trace-decreasing intermediates are renormalized before evaluation;
/// zero-trace stages are skipped and flagged.
pub fn d_eff_min(s: &Spectrum, rho: &CMat, instruments: &[KrausMap]) -> Result<DeffMinReport> {
    let k = instruments.len();
    let d_se = s.total_dim();
    let mut stages: Vec<DeffStage> = Vec::new();
    let push = |label: String, sigma: &CMat, stages: &mut Vec<DeffStage>| {
        match effective_dimension(sigma, s) {
            Ok(v) => stages.push(DeffStage {
                label,
                d_eff: v,
                skipped: false,
            }),
            Err(Error::ZeroTrace) => stages.push(DeffStage {
                label,
                d_eff: f64::INFINITY,
                skipped: true,
            }),
            Err(_) => unreachable!("effective_dimension only fails on zero trace"),
        }
    };

    push("rho".into(), rho, &mut stages);
    if k >= 2 {
        // undisturbed chain
        let mut u = rho.clone();
        for (j, a) in instruments.iter().take(k - 1).enumerate() {
            let d_e = d_se / a.dim_in();
            u = a.extend_with_identity(d_e).apply(&u)?;
            push(format!("A{}..A1(rho)", j + 1), &u, &mut stages);
        }
        // equilibrium chain
        let mut w = s.dephase(rho);
        push("omega1".into(), &w, &mut stages);
        for (j, a) in instruments.iter().take(k - 1).enumerate() {
            let d_e = d_se / a.dim_in();
            let post = a.extend_with_identity(d_e).apply(&w)?;
            push(format!("A{}(omega{})", j + 1, j + 1), &post, &mut stages);
            w = s.dephase(&post);
        }
    }
    let value = stages
        .iter()
        .filter(|st| !st.skipped)
        .map(|st| st.d_eff)
        .fold(f64::INFINITY, f64::min);
    if !value.is_finite() {
        return Err(Error::ZeroTrace);
    }
    Ok(DeffMinReport { value, stages })
}
