//! Calculus of completely positive maps.
//!
//! Kraus and Choi representations with the leg convention fixed globally as
//! (output ⊗ input), the two-leg link product, POVM norms, and the specific
//! channels everything downstream is made of: unitary evolution under a
//! spectrum, dephasing in the energy eigenbasis, and the eigenpair
//! projections `P_n (·) P_m`.

use crate::error::{Error, Result};
use crate::linalg::{self, C64, CMat};
use crate::spectral::Spectrum;

/// Tolerance for POVM-element and trace-preservation checks.
const MAP_TOL: f64 = 1e-10;

/// A CP map in operator-sum form, `A(σ) = Σ_α K_α σ K_α†`.
#[derive(Clone, Debug)]
pub struct KrausMap {
    kraus_ops: Vec<CMat>,
    dim_in: usize,
    dim_out: usize,
    trace_preserving: bool,
}

impl KrausMap {
    /// Validates that all Kraus operators share one shape and that the POVM
    /// element `Σ K†K` does not exceed the identity.
    pub fn new(kraus_ops: Vec<CMat>) -> Result<Self> {
        let first = kraus_ops
            .first()
            .ok_or_else(|| Error::EmptySet("Kraus list".into()))?;
        let (dim_out, dim_in) = (first.nrows(), first.ncols());
        for k in &kraus_ops {
            if k.nrows() != dim_out || k.ncols() != dim_in {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operators disagree: {}x{} vs {}x{}",
                    k.nrows(),
                    k.ncols(),
                    dim_out,
                    dim_in
                )));
            }
        }
        let povm = povm_element_of(&kraus_ops);
        let (vals, _) = linalg::eigh(&povm);
        let max = vals.last().copied().unwrap_or(0.0);
        let min = vals.first().copied().unwrap_or(0.0);
        if max > 1.0 + MAP_TOL || min < -MAP_TOL {
            return Err(Error::NotAState(format!(
                "POVM element eigenvalues must lie in [0, 1], got [{min:.3e}, {max:.3e}]"
            )));
        }
        let id = linalg::identity(dim_in);
        let trace_preserving = linalg::max_abs_diff(&povm, &id) <= MAP_TOL;
        Ok(Self {
            kraus_ops,
            dim_in,
            dim_out,
            trace_preserving,
        })
    }

    /// Identity channel on dimension `d`.
    pub fn identity(d: usize) -> Self {
        Self::new(vec![linalg::identity(d)]).expect("identity is a valid channel")
    }

    pub fn kraus_ops(&self) -> &[CMat] {
        &self.kraus_ops
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// Direct operator-sum application.
    pub fn apply(&self, sigma: &CMat) -> Result<CMat> {
        if sigma.nrows() != self.dim_in || sigma.ncols() != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "state is {}x{}, map expects {}",
                sigma.nrows(),
                sigma.ncols(),
                self.dim_in
            )));
        }
        let mut out = CMat::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus_ops {
            out += k * sigma * k.adjoint();
        }
        Ok(out)
    }

    /// POVM element `Σ K†K`.
    pub fn povm_element(&self) -> PovmElement {
        PovmElement {
            matrix: povm_element_of(&self.kraus_ops),
        }
    }

    /// Kraus list of the composition `self ∘ other`.
    pub fn compose(&self, other: &KrausMap) -> Result<KrausMap> {
        if other.dim_out != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "composition: inner dimensions {} and {} differ",
                other.dim_out, self.dim_in
            )));
        }
        let mut ops = Vec::with_capacity(self.kraus_ops.len() * other.kraus_ops.len());
        for a in &self.kraus_ops {
            for b in &other.kraus_ops {
                ops.push(a * b);
            }
        }
        KrausMap::new(ops)
    }

    /// The same map acting on `S ⊗ 1_E`.
    pub fn extend_with_identity(&self, d_e: usize) -> KrausMap {
        let ops = self
            .kraus_ops
            .iter()
            .map(|k| linalg::embed_s(k, d_e))
            .collect();
        KrausMap::new(ops).expect("extension preserves validity")
    }
}

fn povm_element_of(kraus: &[CMat]) -> CMat {
    let d = kraus[0].ncols();
    let mut a = CMat::zeros(d, d);
    for k in kraus {
        a += k.adjoint() * k;
    }
    (&a + a.adjoint()).scale(0.5)
}

/// A POVM element, Hermitian with spectrum in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct PovmElement {
    matrix: CMat,
}

impl PovmElement {
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Largest eigenvalue; for a Hermitian positive element this is the
    /// largest singular value.
    pub fn norm(&self) -> f64 {
        linalg::hermitian_operator_norm(&self.matrix)
    }
}

/// Choi state of a linear map with leg order (output ⊗ input).
///
/// CP maps carry `positivity_checked = true`; the non-CP eigenpair
/// projections `P_n (·) P_m` for `n ≠ m` share this container with the check
/// disabled.
#[derive(Clone, Debug)]
pub struct ChoiMatrix {
    matrix: CMat,
    dim_out: usize,
    dim_in: usize,
    positivity_checked: bool,
}

impl ChoiMatrix {
    /// Wrap a Choi matrix of a CP map; fails if the smallest eigenvalue is
    /// below `-1e-10`.
    pub fn new_cp(matrix: CMat, dim_out: usize, dim_in: usize) -> Result<Self> {
        Self::check_dims(&matrix, dim_out, dim_in)?;
        let min = linalg::min_eigenvalue(&matrix);
        if min < -MAP_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self {
            matrix,
            dim_out,
            dim_in,
            positivity_checked: true,
        })
    }

    /// Wrap the Choi matrix of a general (not necessarily CP) linear map.
    pub fn new_linear(matrix: CMat, dim_out: usize, dim_in: usize) -> Result<Self> {
        Self::check_dims(&matrix, dim_out, dim_in)?;
        Ok(Self {
            matrix,
            dim_out,
            dim_in,
            positivity_checked: false,
        })
    }

    fn check_dims(matrix: &CMat, dim_out: usize, dim_in: usize) -> Result<()> {
        let d = dim_out * dim_in;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix is {}x{}, legs require {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn is_positivity_checked(&self) -> bool {
        self.positivity_checked
    }

    /// Partial trace over the output leg; equals `1_in` for TP maps.
    pub fn input_marginal(&self) -> CMat {
        let mut out = CMat::zeros(self.dim_in, self.dim_in);
        for i in 0..self.dim_in {
            for j in 0..self.dim_in {
                let mut acc = C64::default();
                for x in 0..self.dim_out {
                    acc += self.matrix[(x * self.dim_in + i, x * self.dim_in + j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    pub fn is_trace_preserving(&self) -> bool {
        linalg::max_abs_diff(&self.input_marginal(), &linalg::identity(self.dim_in)) <= MAP_TOL
    }
}

/// Choi state of a Kraus map, `A[(x,i),(y,j)] = Σ_α K_α[x,i] K̄_α[y,j]`.
pub fn kraus_to_choi(m: &KrausMap) -> ChoiMatrix {
    let (d_out, d_in) = (m.dim_out, m.dim_in);
    let dim = d_out * d_in;
    let mut mat = CMat::zeros(dim, dim);
    for k in m.kraus_ops() {
        for x in 0..d_out {
            for i in 0..d_in {
                let kxi = k[(x, i)];
                if kxi == C64::default() {
                    continue;
                }
                for y in 0..d_out {
                    for j in 0..d_in {
                        mat[(x * d_in + i, y * d_in + j)] += kxi * k[(y, j)].conj();
                    }
                }
            }
        }
    }
    ChoiMatrix {
        matrix: mat,
        dim_out: d_out,
        dim_in: d_in,
        positivity_checked: true,
    }
}

/// Apply a map through its Choi state, `A(σ) = tr_in[(1_out ⊗ σᵀ) A]`.
pub fn apply_choi(c: &ChoiMatrix, sigma: &CMat) -> Result<CMat> {
    if sigma.nrows() != c.dim_in || sigma.ncols() != c.dim_in {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, Choi input leg is {}",
            sigma.nrows(),
            sigma.ncols(),
            c.dim_in
        )));
    }
    let mut out = CMat::zeros(c.dim_out, c.dim_out);
    for x in 0..c.dim_out {
        for y in 0..c.dim_out {
            let mut acc = C64::default();
            for i in 0..c.dim_in {
                for j in 0..c.dim_in {
                    acc += c.matrix[(x * c.dim_in + i, y * c.dim_in + j)] * sigma[(i, j)];
                }
            }
            out[(x, y)] = acc;
        }
    }
    Ok(out)
}

/// Two-leg link product `A * B`: the Choi state of the composition `A ∘ B`.
///
/// `A`'s input leg must match `B`'s output leg; the contraction is
/// `tr_shared[(1 ⊗ A^{T_shared})(B ⊗ 1)]`, which in components reads
/// `(A*B)[(x,i),(y,j)] = Σ_{u,s} A[(x,u),(y,s)] B[(u,i),(s,j)]`.
pub fn link_product(a: &ChoiMatrix, b: &ChoiMatrix) -> Result<ChoiMatrix> {
    if a.dim_in != b.dim_out {
        return Err(Error::LegMismatch(format!(
            "link: A input leg {} differs from B output leg {}",
            a.dim_in, b.dim_out
        )));
    }
    let (d2, d1, d0) = (a.dim_out, a.dim_in, b.dim_in);
    let dim = d2 * d0;
    let mut mat = CMat::zeros(dim, dim);
    for x in 0..d2 {
        for i in 0..d0 {
            for y in 0..d2 {
                for j in 0..d0 {
                    let mut acc = C64::default();
                    for u in 0..d1 {
                        for s in 0..d1 {
                            acc += a.matrix[(x * d1 + u, y * d1 + s)]
                                * b.matrix[(u * d0 + i, s * d0 + j)];
                        }
                    }
                    mat[(x * d0 + i, y * d0 + j)] = acc;
                }
            }
        }
    }
    Ok(ChoiMatrix {
        matrix: mat,
        dim_out: d2,
        dim_in: d0,
        positivity_checked: a.positivity_checked && b.positivity_checked,
    })
}

/// POVM norm: largest eigenvalue of `Σ K†K`. Equals one for TP maps.
pub fn povm_norm(m: &KrausMap) -> f64 {
    m.povm_element().norm()
}

/// Unitary evolution channel `U(·) = e^{-iHdt} (·) e^{iHdt}` from a spectrum.
pub fn unitary_channel(s: &Spectrum, dt: f64) -> KrausMap {
    KrausMap::new(vec![s.evolution(dt)]).expect("evolution operator is unitary")
}

/// Dephasing channel `$(·) = Σ_n P_n (·) P_n` in the energy eigenbasis.
pub fn dephasing_channel(s: &Spectrum) -> KrausMap {
    KrausMap::new(s.projectors().to_vec()).expect("projectors form a valid channel")
}

/// Choi state of the eigenpair projection `P_nm(·) = P_n (·) P_m`; CP only
/// on the diagonal `n = m`.
pub fn eigenpair_projection(s: &Spectrum, n: usize, m: usize) -> Result<ChoiMatrix> {
    let d_h = s.num_levels();
    if n >= d_h || m >= d_h {
        return Err(Error::LevelOutOfRange {
            index: n.max(m),
            levels: d_h,
        });
    }
    let d = s.total_dim();
    let pn = &s.projectors()[n];
    let pm = &s.projectors()[m];
    let mut mat = CMat::zeros(d * d, d * d);
    for x in 0..d {
        for i in 0..d {
            let left = pn[(x, i)];
            if left == C64::default() {
                continue;
            }
            for y in 0..d {
                for j in 0..d {
                    // Choi of σ -> P_n σ P_m: entries P_n[x,i] · conj(P_m[y,j])
                    mat[(x * d + i, y * d + j)] = left * pm[(y, j)].conj();
                }
            }
        }
    }
    if n == m {
        ChoiMatrix::new_cp(mat, d, d)
    } else {
        ChoiMatrix::new_linear(mat, d, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, identity, max_abs_diff};
    use crate::spectral::{diagonalize, Hamiltonian};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

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

    /// Random CP trace-nonincreasing map with `n` Kraus operators.
    fn rand_cp(rng: &mut ChaCha8Rng, d: usize, n: usize) -> KrausMap {
        let raw: Vec<CMat> = (0..n).map(|_| rand_mat(rng, d, d)).collect();
        let a = povm_element_of(&raw);
        let norm = crate::linalg::hermitian_operator_norm(&a);
        let scale = c(1.0 / (norm.sqrt() * 1.01), 0.0);
        KrausMap::new(raw.into_iter().map(|k| k.map(|z| z * scale)).collect()).unwrap()
    }

    fn spectrum_of(energies: &[f64]) -> crate::spectral::Spectrum {
        let d = energies.len();
        let h = Hamiltonian::new(CMat::from_fn(d, d, |i, j| {
            if i == j {
                c(energies[i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        }))
        .unwrap();
        diagonalize(&h, 1e-9).unwrap()
    }

    #[test]
    fn identity_choi_is_unnormalized_bell_state() {
        let choi = kraus_to_choi(&KrausMap::identity(2));
        // |ψ+><ψ+| with ψ+ = Σ_i |ii>, trace 2
        assert_abs_diff_eq!(crate::linalg::trace(choi.matrix()).re, 2.0, epsilon = 1e-12);
        for x in 0..2usize {
            for i in 0..2usize {
                for y in 0..2usize {
                    for j in 0..2usize {
                        let want = if x == i && y == j { 1.0 } else { 0.0 };
                        assert_abs_diff_eq!(
                            choi.matrix()[(x * 2 + i, y * 2 + j)].re,
                            want,
                            epsilon = 1e-12
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn single_kraus_rank_one_choi() {
        let mut k = CMat::zeros(2, 2);
        k[(0, 1)] = c(1.0, 0.0); // K = |0><1|
        let choi = kraus_to_choi(&KrausMap::new(vec![k]).unwrap());
        assert_abs_diff_eq!(crate::linalg::trace(choi.matrix()).re, 1.0, epsilon = 1e-12);
        let (vals, _) = crate::linalg::eigh(choi.matrix());
        assert!(vals.iter().filter(|v| v.abs() > 1e-12).count() == 1);
    }

    #[test]
    fn choi_application_matches_kraus_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..8 {
            let m = rand_cp(&mut rng, 2, 2);
            let choi = kraus_to_choi(&m);
            // basis of input matrices E_ij
            for i in 0..2 {
                for j in 0..2 {
                    let mut e = CMat::zeros(2, 2);
                    e[(i, j)] = c(1.0, 0.0);
                    let via_choi = apply_choi(&choi, &e).unwrap();
                    let via_kraus = m.apply(&e).unwrap();
                    assert!(max_abs_diff(&via_choi, &via_kraus) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn identity_choi_acts_trivially() {
        let choi = kraus_to_choi(&KrausMap::identity(3));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sigma = rand_state(&mut rng, 3);
        let out = apply_choi(&choi, &sigma).unwrap();
        assert!(max_abs_diff(&out, &sigma) < 1e-12);
    }

    #[test]
    fn dephasing_kills_coherence() {
        let s = spectrum_of(&[0.0, 1.0]);
        let choi = kraus_to_choi(&dephasing_channel(&s));
        let mut off = CMat::zeros(2, 2);
        off[(0, 1)] = c(1.0, 0.0);
        let out = apply_choi(&choi, &off).unwrap();
        assert!(crate::linalg::max_abs(&out) < 1e-12);
    }

    #[test]
    fn link_with_identity_is_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = rand_cp(&mut rng, 3, 2);
        let a = kraus_to_choi(&m);
        let id = kraus_to_choi(&KrausMap::identity(3));
        let left = link_product(&id, &a).unwrap();
        assert!(max_abs_diff(left.matrix(), a.matrix()) < 1e-12);
        let id_in = kraus_to_choi(&KrausMap::identity(3));
        let right = link_product(&a, &id_in).unwrap();
        assert!(max_abs_diff(right.matrix(), a.matrix()) < 1e-12);
    }

    #[test]
    fn link_matches_composed_kraus() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..6 {
            let a = rand_cp(&mut rng, 2, 2);
            let b = rand_cp(&mut rng, 2, 3);
            let linked = link_product(&kraus_to_choi(&a), &kraus_to_choi(&b)).unwrap();
            let composed = kraus_to_choi(&a.compose(&b).unwrap());
            assert!(max_abs_diff(linked.matrix(), composed.matrix()) < 1e-10);
        }
    }

    #[test]
    fn link_trivial_shared_leg_is_tensor_product() {
        // contracting over a one-dimensional shared space reduces the link
        // product to a Kronecker product of the two Choi matrices
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let rho = rand_state(&mut rng, 2);
        let sigma = rand_state(&mut rng, 3);
        // A: trivial -> H_rho (a prepared state), B: H_sigma -> trivial
        let a = ChoiMatrix::new_cp(rho.clone(), 2, 1).unwrap();
        let b = ChoiMatrix::new_cp(sigma.clone(), 1, 3).unwrap();
        let tensor = link_product(&a, &b).unwrap();
        assert!(max_abs_diff(tensor.matrix(), &rho.kronecker(&sigma)) < 1e-12);
    }

    #[test]
    fn link_associative_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..5 {
            let a = kraus_to_choi(&rand_cp(&mut rng, 2, 2));
            let b = kraus_to_choi(&rand_cp(&mut rng, 2, 2));
            let cm = kraus_to_choi(&rand_cp(&mut rng, 2, 2));
            let left = link_product(&link_product(&a, &b).unwrap(), &cm).unwrap();
            let right = link_product(&a, &link_product(&b, &cm).unwrap()).unwrap();
            assert!(max_abs_diff(left.matrix(), right.matrix()) < 1e-9);
        }
    }

    #[test]
    fn link_preserves_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..5 {
            let a = kraus_to_choi(&rand_cp(&mut rng, 3, 2));
            let b = kraus_to_choi(&rand_cp(&mut rng, 3, 2));
            let linked = link_product(&a, &b).unwrap();
            assert!(crate::linalg::min_eigenvalue(linked.matrix()) > -1e-10);
        }
    }

    #[test]
    fn povm_norm_is_one_for_tp_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        // a random unitary channel is TP
        let g = rand_mat(&mut rng, 3, 3);
        let qr = g.qr();
        let q = qr.q();
        let m = KrausMap::new(vec![q]).unwrap();
        assert!(m.is_trace_preserving());
        assert_abs_diff_eq!(povm_norm(&m), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn povm_norm_scaled_identity() {
        let m = KrausMap::new(vec![identity(3).map(|z| z * c(0.5, 0.0))]).unwrap();
        assert_abs_diff_eq!(povm_norm(&m), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn povm_norm_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..5 {
            let m = rand_cp(&mut rng, 4, 3);
            let a = m.povm_element();
            // power iteration oracle on the Hermitian positive element
            let mut v = CMat::from_fn(4, 1, |_, _| c(rng.gen::<f64>() + 0.1, rng.gen::<f64>()));
            let mut lambda = 0.0f64;
            for _ in 0..2000 {
                let w = a.matrix() * &v;
                let n = w.norm();
                lambda = n / v.norm();
                v = w.map(|z| z / c(n, 0.0));
            }
            assert_abs_diff_eq!(povm_norm(&m), lambda, epsilon = 1e-10);
        }
    }

    #[test]
    fn unitary_channel_properties() {
        let s = spectrum_of(&[0.0, 0.7, 1.3]);
        // dt = 0 is the identity channel
        let u0 = unitary_channel(&s, 0.0);
        assert!(max_abs_diff(&u0.kraus_ops()[0], &identity(3)) < 1e-12);
        // a single-gap recurrence returns to the identity action
        let s2 = spectrum_of(&[0.0, 0.5]);
        let u = unitary_channel(&s2, 2.0 * std::f64::consts::PI / 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let sigma = rand_state(&mut rng, 2);
        assert!(max_abs_diff(&u.apply(&sigma).unwrap(), &sigma) < 1e-10);
        // unitarity at a generic time
        let u = unitary_channel(&s, 0.37);
        let k = &u.kraus_ops()[0];
        assert!(max_abs_diff(&(k.adjoint() * k), &identity(3)) < 1e-10);
    }

    #[test]
    fn dephasing_is_idempotent_and_tp() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let g = rand_mat(&mut rng, 4, 4);
        let h = Hamiltonian::new((&g + g.adjoint()).scale(0.5)).unwrap();
        let s = diagonalize(&h, 1e-9).unwrap();
        let deph = dephasing_channel(&s);
        assert!(deph.is_trace_preserving());
        for _ in 0..20 {
            let sigma = rand_state(&mut rng, 4);
            let once = deph.apply(&sigma).unwrap();
            let twice = deph.apply(&once).unwrap();
            assert!(max_abs_diff(&once, &twice) < 1e-12);
        }
    }

    #[test]
    fn fully_degenerate_dephasing_is_identity() {
        let s = {
            let h = Hamiltonian::new(identity(3)).unwrap();
            diagonalize(&h, 1e-9).unwrap()
        };
        let deph = dephasing_channel(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let sigma = rand_state(&mut rng, 3);
        assert!(max_abs_diff(&deph.apply(&sigma).unwrap(), &sigma) < 1e-12);
    }

    #[test]
    fn eigenpair_projections_resolve_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let g = rand_mat(&mut rng, 3, 3);
        let h = Hamiltonian::new((&g + g.adjoint()).scale(0.5)).unwrap();
        let s = diagonalize(&h, 1e-9).unwrap();
        let d_h = s.num_levels();
        let sigma = rand_state(&mut rng, 3);

        // Σ_{n,m} P_nm = identity map
        let mut total = CMat::zeros(3, 3);
        for n in 0..d_h {
            for m in 0..d_h {
                total += apply_choi(&eigenpair_projection(&s, n, m).unwrap(), &sigma).unwrap();
            }
        }
        assert!(max_abs_diff(&total, &sigma) < 1e-10);

        // Σ_n P_nn = dephasing
        let mut diag = CMat::zeros(3, 3);
        for n in 0..d_h {
            diag += apply_choi(&eigenpair_projection(&s, n, n).unwrap(), &sigma).unwrap();
        }
        assert!(max_abs_diff(&diag, &s.dephase(&sigma)) < 1e-10);

        // Σ_{n≠m} P_nm = identity - dephasing
        let mut off = CMat::zeros(3, 3);
        for n in 0..d_h {
            for m in 0..d_h {
                if n != m {
                    off += apply_choi(&eigenpair_projection(&s, n, m).unwrap(), &sigma).unwrap();
                }
            }
        }
        let want = &sigma - s.dephase(&sigma);
        assert!(max_abs_diff(&off, &want) < 1e-10);

        // diagonal projections are CP with single Kraus P_n
        let c00 = eigenpair_projection(&s, 0, 0).unwrap();
        assert!(c00.is_positivity_checked());
        let direct = kraus_to_choi(&KrausMap::new(vec![s.projectors()[0].clone()]).unwrap());
        assert!(max_abs_diff(c00.matrix(), direct.matrix()) < 1e-12);

        // out-of-range index errors
        assert!(eigenpair_projection(&s, d_h, 0).is_err());
    }

    #[test]
    fn tp_choi_input_marginal_is_identity() {
        let s = spectrum_of(&[0.0, 0.4, 1.0]);
        let choi = kraus_to_choi(&unitary_channel(&s, 1.3));
        assert!(choi.is_trace_preserving());
    }

    #[test]
    fn dephasing_invariance_of_dephased_purity() {
        // enabling identity for effective dimension: $($σ) = $(σ)
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        let g = rand_mat(&mut rng, 4, 4);
        let h = Hamiltonian::new((&g + g.adjoint()).scale(0.5)).unwrap();
        let s = diagonalize(&h, 1e-9).unwrap();
        let sigma = rand_state(&mut rng, 4);
        let once = s.dephase(&sigma);
        let twice = s.dephase(&once);
        assert!(max_abs_diff(&once, &twice) < 1e-12);
    }
}
