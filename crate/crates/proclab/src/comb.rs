//! Labeled-leg operators and the link product.
//!
//! Processes, testers, and the Choi states of intermediate maps all live on
//! tensor products of named Hilbert-space factors ("legs"). A [`LegOp`] is a
//! dense matrix on such a product together with an ordered list of
//! `(leg, dimension)` pairs; the composite row (and column) index runs
//! major-to-minor over the listed legs.
//!
//! The central operation is [`LegOp::link`]: matrix multiplication on shared
//! legs and tensor product on disjoint ones,
//!
//! `(A * B)[(a,b),(a',b')] = Σ_{s,s'} A[(a,s),(a',s')] B[(s,b),(s',b')]`,
//!
//! which composes Choi states without ever leaving the Choi picture. Linking
//! a channel's Choi with a state applies the channel; linking two processes
//! over all common legs evaluates the multitime Born rule.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{kahan_sum, max_abs_diff, C64, CMat};

/// A named Hilbert-space factor.
///
/// `SysIn(j)`/`SysOut(j)` are the open system legs at intervention time `j`
/// (the state handed to, and returned by, an instrument). `Env(j)` is the
/// environment factor after evolution step `j`, and `Mem(j)` the tester's
/// memory ancilla after step `j`; both are internal and contracted away in
/// finished objects.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Leg {
    SysIn(u32),
    SysOut(u32),
    Env(u32),
    Mem(u32),
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Leg::SysIn(j) => write!(f, "{j}i"),
            Leg::SysOut(j) => write!(f, "{j}o"),
            Leg::Env(j) => write!(f, "E{j}"),
            Leg::Mem(j) => write!(f, "W{j}"),
        }
    }
}

/// Dense operator on an ordered tensor product of labeled legs.
#[derive(Clone, Debug)]
pub struct LegOp {
    legs: Vec<(Leg, usize)>,
    mat: CMat,
}

fn total_dim(legs: &[(Leg, usize)]) -> usize {
    legs.iter().map(|&(_, d)| d).product()
}

impl LegOp {
    /// Wrap an existing matrix. The matrix must be square with dimension
    /// equal to the product of the leg dimensions.
    pub fn from_matrix(legs: Vec<(Leg, usize)>, mat: CMat) -> Result<Self> {
        let dim = total_dim(&legs);
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "legs give dimension {dim} but matrix is {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        for (i, &(l, _)) in legs.iter().enumerate() {
            if legs[i + 1..].iter().any(|&(m, _)| m == l) {
                return Err(Error::DuplicateLeg(l.to_string()));
            }
        }
        Ok(Self { legs, mat })
    }

    /// Choi state of a CP map with the given Kraus operators, as an operator
    /// on `out_legs ++ in_legs`:
    ///
    /// `M[(x_out, x_in), (y_out, y_in)] = Σ_α K_α[x_out, x_in] K̄_α[y_out, y_in]`.
    pub fn from_kraus(
        kraus: &[CMat],
        out_legs: &[(Leg, usize)],
        in_legs: &[(Leg, usize)],
    ) -> Result<Self> {
        let d_out = total_dim(out_legs);
        let d_in = total_dim(in_legs);
        for k in kraus {
            if k.nrows() != d_out || k.ncols() != d_in {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator is {}x{}, legs require {}x{}",
                    k.nrows(),
                    k.ncols(),
                    d_out,
                    d_in
                )));
            }
        }
        let dim = d_out * d_in;
        let mut mat = CMat::zeros(dim, dim);
        for k in kraus {
            // vec(K)[(x_out, x_in)] with x_out major
            for xo in 0..d_out {
                for xi in 0..d_in {
                    let kxi = k[(xo, xi)];
                    if kxi == C64::default() {
                        continue;
                    }
                    let row = xo * d_in + xi;
                    for yo in 0..d_out {
                        for yi in 0..d_in {
                            let col = yo * d_in + yi;
                            mat[(row, col)] += kxi * k[(yo, yi)].conj();
                        }
                    }
                }
            }
        }
        let mut legs = out_legs.to_vec();
        legs.extend_from_slice(in_legs);
        Self::from_matrix(legs, mat)
    }

    /// Identity operator on the given legs.
    pub fn identity_on(legs: Vec<(Leg, usize)>) -> Self {
        let dim = total_dim(&legs);
        Self {
            legs,
            mat: CMat::identity(dim, dim),
        }
    }

    pub fn legs(&self) -> &[(Leg, usize)] {
        &self.legs
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn leg_dim(&self, leg: Leg) -> Option<usize> {
        self.legs.iter().find(|&&(l, _)| l == leg).map(|&(_, d)| d)
    }

    pub fn has_leg(&self, leg: Leg) -> bool {
        self.leg_dim(leg).is_some()
    }

    pub fn trace(&self) -> C64 {
        crate::linalg::trace(&self.mat)
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            legs: self.legs.clone(),
            mat: self.mat.clone().map(|z| z * factor),
        }
    }

    /// Entrywise sum with another operator carrying the same legs (any
    /// order; the other operand is aligned first).
    pub fn add(&self, other: &LegOp) -> Result<Self> {
        let aligned = other.permuted(&self.legs.iter().map(|&(l, _)| l).collect::<Vec<_>>())?;
        if aligned.legs != self.legs {
            return Err(Error::LegMismatch(format!(
                "cannot add operators on legs {:?} and {:?}",
                self.legs, other.legs
            )));
        }
        Ok(Self {
            legs: self.legs.clone(),
            mat: &self.mat + &aligned.mat,
        })
    }

    /// Map from a composite index in `self.legs` layout to the composite
    /// index in `target` layout, where `target` is a permutation of the legs.
    fn index_map_to(&self, target: &[(Leg, usize)]) -> Vec<usize> {
        // strides of each leg in the current layout
        let n = self.legs.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.legs[i + 1].1;
        }
        // for each target position, the source stride
        let tgt_strides: Vec<usize> = target
            .iter()
            .map(|&(l, _)| {
                let pos = self.legs.iter().position(|&(m, _)| m == l).unwrap();
                strides[pos]
            })
            .collect();
        let dim = self.dim();
        let mut map = vec![0usize; dim];
        for (new_idx, slot) in map.iter_mut().enumerate() {
            let mut rem = new_idx;
            let mut old = 0usize;
            for (t, &(_, d)) in target.iter().enumerate().rev() {
                old += (rem % d) * tgt_strides[t];
                rem /= d;
            }
            *slot = old;
        }
        map
    }

    /// Reorder legs; acts simultaneously on rows and columns.
    pub fn permuted(&self, order: &[Leg]) -> Result<Self> {
        if order.len() != self.legs.len() {
            return Err(Error::LegMismatch(format!(
                "permutation lists {} legs, operator has {}",
                order.len(),
                self.legs.len()
            )));
        }
        let mut target = Vec::with_capacity(order.len());
        for &l in order {
            let d = self
                .leg_dim(l)
                .ok_or_else(|| Error::MissingLeg(l.to_string()))?;
            target.push((l, d));
        }
        if target == self.legs {
            return Ok(self.clone());
        }
        let map = self.index_map_to(&target);
        let dim = self.dim();
        let mut mat = CMat::zeros(dim, dim);
        for i in 0..dim {
            let oi = map[i];
            for j in 0..dim {
                mat[(i, j)] = self.mat[(oi, map[j])];
            }
        }
        Ok(Self { legs: target, mat })
    }

    /// Trace out the listed legs.
    pub fn partial_trace(&self, drop: &[Leg]) -> Result<Self> {
        for &l in drop {
            if !self.has_leg(l) {
                return Err(Error::MissingLeg(l.to_string()));
            }
        }
        let kept: Vec<(Leg, usize)> = self
            .legs
            .iter()
            .copied()
            .filter(|(l, _)| !drop.contains(l))
            .collect();
        let dropped: Vec<(Leg, usize)> = self
            .legs
            .iter()
            .copied()
            .filter(|(l, _)| drop.contains(l))
            .collect();
        // view in (kept ++ dropped) order, then sum the diagonal of the
        // dropped block
        let mut order: Vec<Leg> = kept.iter().map(|&(l, _)| l).collect();
        order.extend(dropped.iter().map(|&(l, _)| l));
        let arranged = self.permuted(&order)?;
        let dk = total_dim(&kept);
        let dd = total_dim(&dropped);
        let mut mat = CMat::zeros(dk, dk);
        for i in 0..dk {
            for j in 0..dk {
                let mut acc = C64::default();
                for t in 0..dd {
                    acc += arranged.mat[(i * dd + t, j * dd + t)];
                }
                mat[(i, j)] = acc;
            }
        }
        Ok(Self { legs: kept, mat })
    }

    /// Link product: contract all legs shared with `other`, tensor the rest.
    /// Resulting leg order is (self-only legs) then (other-only legs).
    pub fn link(&self, other: &LegOp) -> Result<Self> {
        let shared: Vec<(Leg, usize)> = self
            .legs
            .iter()
            .copied()
            .filter(|(l, _)| other.has_leg(*l))
            .collect();
        for &(l, d) in &shared {
            let od = other.leg_dim(l).unwrap();
            if od != d {
                return Err(Error::LegMismatch(format!(
                    "shared leg {l} has dimension {d} on one operator and {od} on the other"
                )));
            }
        }
        let a_free: Vec<(Leg, usize)> = self
            .legs
            .iter()
            .copied()
            .filter(|(l, _)| !shared.iter().any(|&(s, _)| s == *l))
            .collect();
        let b_free: Vec<(Leg, usize)> = other
            .legs
            .iter()
            .copied()
            .filter(|(l, _)| !shared.iter().any(|&(s, _)| s == *l))
            .collect();

        let mut a_order: Vec<Leg> = a_free.iter().map(|&(l, _)| l).collect();
        a_order.extend(shared.iter().map(|&(l, _)| l));
        let mut b_order: Vec<Leg> = shared.iter().map(|&(l, _)| l).collect();
        b_order.extend(b_free.iter().map(|&(l, _)| l));
        let a = self.permuted(&a_order)?;
        let b = other.permuted(&b_order)?;

        let fa = total_dim(&a_free);
        let fb = total_dim(&b_free);
        let s = total_dim(&shared);

        // MA[(a,a'),(s,s')] = A[(a,s),(a',s')], MB[(s,s'),(b,b')] = B[(s,b),(s',b')]
        let mut ma = CMat::zeros(fa * fa, s * s);
        for ia in 0..fa {
            for is in 0..s {
                for ja in 0..fa {
                    for js in 0..s {
                        ma[(ia * fa + ja, is * s + js)] = a.mat[(ia * s + is, ja * s + js)];
                    }
                }
            }
        }
        let mut mb = CMat::zeros(s * s, fb * fb);
        for is in 0..s {
            for ib in 0..fb {
                for js in 0..s {
                    for jb in 0..fb {
                        mb[(is * s + js, ib * fb + jb)] = b.mat[(is * fb + ib, js * fb + jb)];
                    }
                }
            }
        }
        let prod = ma * mb;

        let mut legs = a_free.clone();
        legs.extend_from_slice(&b_free);
        let dim = fa * fb;
        let mut mat = CMat::zeros(dim, dim);
        for ia in 0..fa {
            for ib in 0..fb {
                for ja in 0..fa {
                    for jb in 0..fb {
                        mat[(ia * fb + ib, ja * fb + jb)] = prod[(ia * fa + ja, ib * fb + jb)];
                    }
                }
            }
        }
        Self::from_matrix(legs, mat)
    }

    /// Multitime Born rule pairing: `tr[self · otherᵀ]` with both operators
    /// aligned to the same leg order. Equals the total link over all legs,
    /// which must coincide between the two operators.
    pub fn pair(&self, other: &LegOp) -> Result<C64> {
        if self.legs.len() != other.legs.len() {
            return Err(Error::LegMismatch(format!(
                "pairing {} legs with {}",
                self.legs.len(),
                other.legs.len()
            )));
        }
        let order: Vec<Leg> = self.legs.iter().map(|&(l, _)| l).collect();
        let aligned = other.permuted(&order)?;
        if aligned.legs != self.legs {
            return Err(Error::LegMismatch(
                "operators do not share a leg structure".into(),
            ));
        }
        Ok(kahan_sum(
            self.mat.iter().zip(aligned.mat.iter()).map(|(&x, &y)| x * y),
        ))
    }

    /// Max-entry distance to another operator on the same legs.
    pub fn distance_to(&self, other: &LegOp) -> Result<f64> {
        let order: Vec<Leg> = self.legs.iter().map(|&(l, _)| l).collect();
        let aligned = other.permuted(&order)?;
        Ok(max_abs_diff(&self.mat, &aligned.mat))
    }
}
