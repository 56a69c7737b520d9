//! Dense complex linear algebra helpers shared by every module.
//!
//! All operators in this crate are small dense matrices over `Complex64`;
//! the workhorse type is [`CMat`]. Hermitian eigendecompositions go through
//! nalgebra's symmetric eigensolver after explicit re-Hermitization.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Shorthand complex constructor.
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest entry magnitude; zero for empty matrices.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Max-entry distance between two matrices of equal shape.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Max |M - M†|, the Hermiticity defect.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

pub fn trace(m: &CMat) -> C64 {
    let mut t = C64::default();
    for i in 0..m.nrows().min(m.ncols()) {
        t += m[(i, i)];
    }
    t
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order together with the matching
/// orthonormal eigenvector columns. The input is symmetrized first so that
/// floating-point asymmetry of order machine epsilon cannot poison the
/// solver.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigh expects a square matrix");
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let se = nalgebra::SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        vecs.set_column(new_col, &se.eigenvectors.column(old_col));
    }
    (vals, vecs)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMat) -> f64 {
    let (vals, _) = eigh(m);
    vals.first().copied().unwrap_or(0.0)
}

/// Operator norm (largest singular value) of a Hermitian matrix, i.e. the
/// largest eigenvalue magnitude.
pub fn hermitian_operator_norm(m: &CMat) -> f64 {
    let (vals, _) = eigh(m);
    vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Kahan compensated sum of complex terms; keeps ensemble reductions
/// deterministic and accurate independent of term count.
pub fn kahan_sum<I: IntoIterator<Item = C64>>(terms: I) -> C64 {
    let mut sum = C64::default();
    let mut comp = C64::default();
    for t in terms {
        let y = t - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    sum
}

/// Embed an operator acting on the (S, W) factors into (S, E, W) with the
/// identity on E. Index order within composites is always major-to-minor
/// as listed.
pub fn embed_sw(k_sw: &CMat, d_s: usize, d_e: usize, d_w: usize) -> CMat {
    debug_assert_eq!(k_sw.nrows(), d_s * d_w);
    debug_assert_eq!(k_sw.ncols(), d_s * d_w);
    let d = d_s * d_e * d_w;
    let mut out = CMat::zeros(d, d);
    for s in 0..d_s {
        for w in 0..d_w {
            for sp in 0..d_s {
                for wp in 0..d_w {
                    let v = k_sw[(s * d_w + w, sp * d_w + wp)];
                    if v != C64::default() {
                        for e in 0..d_e {
                            out[((s * d_e + e) * d_w + w, (sp * d_e + e) * d_w + wp)] = v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Embed an operator on S into (S, E): K ⊗ 1_E.
pub fn embed_s(k_s: &CMat, d_e: usize) -> CMat {
    k_s.kronecker(&identity(d_e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigh_recovers_diagonal() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(3.0, 0.0),
            c(-1.0, 0.0),
            c(2.0, 0.0),
        ]));
        let (vals, vecs) = eigh(&m);
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[2], 3.0, epsilon = 1e-12);
        // eigenvector columns reconstruct the input
        let mut rec = CMat::zeros(3, 3);
        for i in 0..3 {
            let v = vecs.column(i);
            rec += (v * v.adjoint()).scale(vals[i]);
        }
        assert!(max_abs_diff(&rec, &m) < 1e-12);
    }

    #[test]
    fn eigh_hermitian_reconstruction() {
        let m = CMat::from_fn(5, 5, |i, j| c((i * j) as f64, i as f64 - j as f64));
        let h = (&m + m.adjoint()).scale(0.5);
        let (vals, vecs) = eigh(&h);
        let mut rec = CMat::zeros(5, 5);
        for i in 0..5 {
            let v = vecs.column(i);
            rec += (v * v.adjoint()).scale(vals[i]);
        }
        assert!(max_abs_diff(&rec, &h) < 1e-10 * max_abs(&h).max(1.0));
    }

    #[test]
    fn embed_sw_matches_kronecker_when_w_trivial() {
        let k = CMat::from_fn(2, 2, |i, j| c(i as f64 + 1.0, j as f64));
        let direct = embed_s(&k, 3);
        let via = embed_sw(&k, 2, 3, 1);
        assert!(max_abs_diff(&direct, &via) < 1e-15);
    }

    #[test]
    fn kahan_recovers_small_increments() {
        // 1.0 followed by 2^20 increments of 2^-60: the naive sum stays at
        // 1.0, the compensated sum resolves the total exactly.
        let eps = (2.0f64).powi(-60);
        let terms = std::iter::once(c(1.0, 0.0)).chain((0..1 << 20).map(|_| c(eps, 0.0)));
        let s = kahan_sum(terms);
        assert_abs_diff_eq!(s.re, 1.0 + eps * (1 << 20) as f64, epsilon = 1e-16);
    }
}
