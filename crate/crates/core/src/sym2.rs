//! Symmetric 2×2 matrices over an exact or certified scalar.
//!
//! Only `a11`, `a12`, `a22` are stored. The Frobenius inner product counts the
//! off-diagonal entry twice: `<X, Y> = x11 y11 + 2 x12 y12 + x22 y22`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::Interval;
use crate::scalar::{Rational, Scalar, Sign};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SymMat2<S> {
    pub a11: S,
    pub a12: S,
    pub a22: S,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Sym2Error {
    #[error("matrices coincide: rank-zero connection")]
    Degenerate,
    #[error("eigenvalues are irrational; use the certified split")]
    IrrationalSpectrum,
}

/// Coordinate axis of a rank-one direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    E1,
    E2,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::E1 => 0,
            Axis::E2 => 1,
        }
    }

    pub fn other(self) -> Axis {
        match self {
            Axis::E1 => Axis::E2,
            Axis::E2 => Axis::E1,
        }
    }
}

/// `A - B = c · n⊗n` with `n` a unit vector; `projector` holds `n⊗n` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOne<S> {
    pub c: S,
    pub projector: SymMat2<S>,
    pub axis: Option<Axis>,
}

impl<S: Scalar> RankOne<S> {
    /// The unit vector `n` when its entries exist in the scalar mode.
    pub fn unit_vector(&self) -> Option<[S; 2]> {
        match self.axis {
            Some(Axis::E1) => return Some([S::one(), S::zero()]),
            Some(Axis::E2) => return Some([S::zero(), S::one()]),
            None => {}
        }
        let n1 = self.projector.a11.try_sqrt()?;
        let n2 = self.projector.a22.try_sqrt()?;
        let n2 = if self.projector.a12.is_certainly_negative() {
            -n2
        } else {
            n2
        };
        Some([n1, n2])
    }
}

impl<S: Scalar> SymMat2<S> {
    pub fn new(a11: S, a12: S, a22: S) -> Self {
        SymMat2 { a11, a12, a22 }
    }

    pub fn diag(a11: S, a22: S) -> Self {
        SymMat2 {
            a11,
            a12: S::zero(),
            a22,
        }
    }

    pub fn zero() -> Self {
        Self::diag(S::zero(), S::zero())
    }

    pub fn identity() -> Self {
        Self::scalar(S::one())
    }

    pub fn scalar(c: S) -> Self {
        Self::diag(c.clone(), c)
    }

    pub fn entry(&self, i: usize, j: usize) -> &S {
        match (i, j) {
            (0, 0) => &self.a11,
            (1, 1) => &self.a22,
            (0, 1) | (1, 0) => &self.a12,
            _ => panic!("index out of range: ({i}, {j})"),
        }
    }

    /// Diagonal entry `x_ii` for `i ∈ {0, 1}`.
    pub fn diag_entry(&self, i: usize) -> &S {
        self.entry(i, i)
    }

    pub fn trace(&self) -> S {
        self.a11.clone() + self.a22.clone()
    }

    pub fn det(&self) -> S {
        self.a11.clone() * self.a22.clone() - self.a12.clone() * self.a12.clone()
    }

    pub fn scale(&self, k: &S) -> Self {
        SymMat2 {
            a11: self.a11.clone() * k.clone(),
            a12: self.a12.clone() * k.clone(),
            a22: self.a22.clone() * k.clone(),
        }
    }

    pub fn inner(&self, other: &Self) -> S {
        let two = S::from_i64(2);
        self.a11.clone() * other.a11.clone()
            + two * self.a12.clone() * other.a12.clone()
            + self.a22.clone() * other.a22.clone()
    }

    pub fn frobenius_sq(&self) -> S {
        self.inner(self)
    }

    pub fn frobenius(&self) -> Interval {
        self.to_interval().frobenius_sq().sqrt()
    }

    pub fn is_diagonal(&self) -> bool {
        self.a12.sign() == Sign::Zero
    }

    pub fn possibly_equal(&self, other: &Self) -> bool {
        self.a11.possibly_equal(&other.a11)
            && self.a12.possibly_equal(&other.a12)
            && self.a22.possibly_equal(&other.a22)
    }

    pub fn possibly_zero(&self) -> bool {
        self.a11.possibly_zero() && self.a12.possibly_zero() && self.a22.possibly_zero()
    }

    pub fn to_interval(&self) -> SymMat2<Interval> {
        SymMat2 {
            a11: self.a11.to_interval(),
            a12: self.a12.to_interval(),
            a22: self.a22.to_interval(),
        }
    }

    pub fn midpoint(&self) -> [[f64; 2]; 2] {
        let (a, b, d) = (
            self.a11.midpoint_f64(),
            self.a12.midpoint_f64(),
            self.a22.midpoint_f64(),
        );
        [[a, b], [b, d]]
    }

    /// `n ⊗ n` for `n = (n1, n2)`.
    pub fn outer(n1: &S, n2: &S) -> Self {
        SymMat2 {
            a11: n1.clone() * n1.clone(),
            a12: n1.clone() * n2.clone(),
            a22: n2.clone() * n2.clone(),
        }
    }

    /// Positive and negative parts `(M₊, M₋)` with `M = M₊ − M₋`.
    ///
    /// Exact when `M` is diagonal or its eigenvalues lie in the scalar field;
    /// otherwise [`Sym2Error::IrrationalSpectrum`] (see [`Self::pos_neg_parts_certified`]).
    pub fn pos_neg_parts(&self) -> Result<(Self, Self), Sym2Error> {
        if self.is_diagonal() {
            return Ok((
                SymMat2::diag(pos(&self.a11), pos(&self.a22)),
                SymMat2::diag(self.a11.neg_part(), self.a22.neg_part()),
            ));
        }
        let two = S::from_i64(2);
        let half_gap = (self.a11.clone() - self.a22.clone()) / two.clone();
        let disc = half_gap.clone() * half_gap + self.a12.clone() * self.a12.clone();
        let root = disc.try_sqrt().ok_or(Sym2Error::IrrationalSpectrum)?;
        let mean = self.trace() / two;
        let hi = mean.clone() + root.clone();
        let lo = mean - root;
        Ok(spectral_split(self, &hi, &lo))
    }

    /// Negative part only; shorthand for `pos_neg_parts().1`.
    pub fn neg_matrix(&self) -> Result<Self, Sym2Error> {
        self.pos_neg_parts().map(|(_, m)| m)
    }

    /// Certified enclosure of the split, valid for every scalar mode.
    pub fn pos_neg_parts_certified(&self) -> (SymMat2<Interval>, SymMat2<Interval>) {
        let m = self.to_interval();
        if m.a12.sign() == Sign::Zero {
            return (
                SymMat2::diag(m.a11.pos_part(), m.a22.pos_part()),
                SymMat2::diag(m.a11.neg_part(), m.a22.neg_part()),
            );
        }
        let half_gap = (m.a11 - m.a22) / Interval::point(2.0);
        let disc = half_gap.sqr() + m.a12.sqr();
        if disc.lo() > 0.0 {
            let root = disc.sqrt();
            let mean = m.trace() / Interval::point(2.0);
            let hi = mean + root;
            let lo = mean - root;
            let gap = hi - lo;
            let id = SymMat2::<Interval>::identity();
            let p_hi = (m.clone() - id.scale(&lo)).scale(&(Interval::ONE / gap));
            let p_lo = (id.scale(&hi) - m.clone()).scale(&(Interval::ONE / gap));
            let plus = p_hi.scale(&hi.pos_part()) + p_lo.scale(&lo.pos_part());
            let minus = p_hi.scale(&hi.neg_part()) + p_lo.scale(&lo.neg_part());
            return (plus, minus);
        }
        // near a multiple of the identity: entrywise enclosure by the spectral radius
        let r = (m.a11.abs().max(&m.a22.abs()) + m.a12.abs()).hi();
        let blob = Interval::new(-r, r);
        let nonneg = Interval::new(0.0, r);
        (
            SymMat2::new(nonneg, blob, nonneg),
            SymMat2::new(nonneg, blob, nonneg),
        )
    }

    /// Factor `self − other = c · n⊗n` when the difference has rank one.
    ///
    /// `Ok(None)` means the difference has full rank. In interval mode a
    /// determinant enclosure containing zero counts as rank one.
    pub fn rank_one_connected(&self, other: &Self) -> Result<Option<RankOne<S>>, Sym2Error> {
        let d = self.clone() - other.clone();
        let zero_entries = [d.a11.sign(), d.a12.sign(), d.a22.sign()]
            .iter()
            .all(|s| *s == Sign::Zero);
        if zero_entries {
            return Err(Sym2Error::Degenerate);
        }
        if !d.det().possibly_zero() {
            return Ok(None);
        }
        let c = d.trace();
        let axis = if d.a12.sign() == Sign::Zero && d.a22.sign() == Sign::Zero {
            Some(Axis::E1)
        } else if d.a12.sign() == Sign::Zero && d.a11.sign() == Sign::Zero {
            Some(Axis::E2)
        } else {
            None
        };
        let projector = match axis {
            Some(Axis::E1) => SymMat2::diag(S::one(), S::zero()),
            Some(Axis::E2) => SymMat2::diag(S::zero(), S::one()),
            None => d.scale(&(S::one() / c.clone())),
        };
        Ok(Some(RankOne { c, projector, axis }))
    }

    /// Squared Frobenius distance from `self` to the segment `[b, c]`.
    pub fn dist_sq_to_segment(&self, b: &Self, c: &Self) -> S {
        if let Some(sq) = S::from_interval(
            self.to_interval()
                .dist_to_segment_enclosure(&b.to_interval(), &c.to_interval())
                .sqr(),
        ) {
            return sq;
        }
        let dir = c.clone() - b.clone();
        let rel = self.clone() - b.clone();
        let len_sq = dir.frobenius_sq();
        if len_sq.sign() == Sign::Zero {
            return rel.frobenius_sq();
        }
        let proj = rel.inner(&dir);
        if !proj.is_certainly_positive() {
            return rel.frobenius_sq();
        }
        if (proj.clone() - len_sq.clone()).is_certainly_nonneg() {
            return (self.clone() - c.clone()).frobenius_sq();
        }
        let theta = proj / len_sq;
        (rel - dir.scale(&theta)).frobenius_sq()
    }

    /// Whether the Frobenius distance from `self` to `[b, c]` is at most `eps`.
    ///
    /// In interval mode the answer is `true` only when certified.
    pub fn in_eps_segment(&self, b: &Self, c: &Self, eps: &S) -> bool {
        assert!(eps.is_certainly_nonneg(), "negative tolerance");
        let d = self.dist_sq_to_segment(b, c);
        (eps.clone() * eps.clone() - d).is_certainly_nonneg()
    }
}

fn pos<S: Scalar>(x: &S) -> S {
    match x.sign() {
        Sign::Positive => x.clone(),
        _ => S::zero(),
    }
}

fn spectral_split<S: Scalar>(m: &SymMat2<S>, hi: &S, lo: &S) -> (SymMat2<S>, SymMat2<S>) {
    if lo.is_certainly_nonneg() {
        return (m.clone(), SymMat2::zero());
    }
    if !hi.is_certainly_positive() {
        return (SymMat2::zero(), -m.clone());
    }
    let gap = hi.clone() - lo.clone();
    let id = SymMat2::<S>::identity();
    // projector onto the top eigenvector: (M − lo·I)/(hi − lo)
    let p_hi = (m.clone() - id.scale(lo)).scale(&(S::one() / gap.clone()));
    let p_lo = (id.scale(hi) - m.clone()).scale(&(S::one() / gap));
    (p_hi.scale(hi), p_lo.scale(&(-lo.clone())))
}

impl SymMat2<Interval> {
    /// Enclosure of the Frobenius distance from any matrix in the box to `[b, c]`.
    ///
    /// Exact per-entry formula when `c − b` is diagonal with one vanishing
    /// entry (an axis-aligned segment); otherwise a projection estimate.
    pub fn dist_to_segment_enclosure(
        &self,
        b: &SymMat2<Interval>,
        c: &SymMat2<Interval>,
    ) -> Interval {
        let dir = c.clone() - b.clone();
        let two = Interval::point(2.0);
        let seg_axis = if dir.a12.sign() == Sign::Zero && dir.a22.sign() == Sign::Zero {
            Some(0)
        } else if dir.a12.sign() == Sign::Zero && dir.a11.sign() == Sign::Zero {
            Some(1)
        } else {
            None
        };
        match seg_axis {
            Some(axis) => {
                let (moving_x, moving_b, moving_c, fixed_x, fixed_s) = if axis == 0 {
                    (self.a11, b.a11, c.a11, self.a22, b.a22)
                } else {
                    (self.a22, b.a22, c.a22, self.a11, b.a11)
                };
                let seg_lo = moving_b.min(&moving_c);
                let seg_hi = moving_b.max(&moving_c);
                // distance of an interval to an interval-valued range [seg_lo, seg_hi]
                let below = (seg_lo - moving_x).pos_part();
                let above = (moving_x - seg_hi).pos_part();
                let along = below.max(&above);
                let off = (self.a12 - b.a12).sqr() * two;
                let fixed = (fixed_x - fixed_s).sqr();
                (along.sqr() + off + fixed).sqrt()
            }
            None => {
                let rel = self.clone() - b.clone();
                let len_sq = dir.frobenius_sq();
                let theta = (rel.inner(&dir) / len_sq)
                    .max(&Interval::ZERO)
                    .min(&Interval::ONE);
                let to_seg = (rel - dir.scale(&theta)).frobenius_sq().sqrt();
                let to_b = (self.clone() - b.clone()).frobenius_sq().sqrt();
                let to_c = (self.clone() - c.clone()).frobenius_sq().sqrt();
                // each of these bounds the true distance from above
                Interval::new(0.0, to_seg.hi().min(to_b.hi()).min(to_c.hi()))
            }
        }
    }
}

impl SymMat2<Rational> {
    pub fn from_ints(a11: i64, a12: i64, a22: i64) -> Self {
        SymMat2::new(
            Rational::from_i64(a11),
            Rational::from_i64(a12),
            Rational::from_i64(a22),
        )
    }
}

impl<S: Scalar> Add for SymMat2<S> {
    type Output = SymMat2<S>;
    fn add(self, rhs: Self) -> Self {
        SymMat2 {
            a11: self.a11 + rhs.a11,
            a12: self.a12 + rhs.a12,
            a22: self.a22 + rhs.a22,
        }
    }
}

impl<S: Scalar> Sub for SymMat2<S> {
    type Output = SymMat2<S>;
    fn sub(self, rhs: Self) -> Self {
        SymMat2 {
            a11: self.a11 - rhs.a11,
            a12: self.a12 - rhs.a12,
            a22: self.a22 - rhs.a22,
        }
    }
}

impl<S: Scalar> Neg for SymMat2<S> {
    type Output = SymMat2<S>;
    fn neg(self) -> Self {
        SymMat2 {
            a11: -self.a11,
            a12: -self.a12,
            a22: -self.a22,
        }
    }
}

impl<S: Scalar> Mul<&S> for &SymMat2<S> {
    type Output = SymMat2<S>;
    fn mul(self, k: &S) -> SymMat2<S> {
        self.scale(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    #[test]
    fn diagonal_split_is_entrywise() {
        let m = SymMat2::diag(q(2, 1), q(-2, 3));
        let (p, n) = m.pos_neg_parts().unwrap();
        assert_eq!(p, SymMat2::diag(q(2, 1), q(0, 1)));
        assert_eq!(n, SymMat2::diag(q(0, 1), q(2, 3)));
        let (p, n) = SymMat2::<Rational>::zero().pos_neg_parts().unwrap();
        assert_eq!(p, SymMat2::zero());
        assert_eq!(n, SymMat2::zero());
    }

    #[test]
    fn swap_matrix_split() {
        let m = SymMat2::from_ints(0, 1, 0);
        let (p, n) = m.pos_neg_parts().unwrap();
        assert_eq!(p, SymMat2::new(q(1, 2), q(1, 2), q(1, 2)));
        assert_eq!(n, SymMat2::new(q(1, 2), q(-1, 2), q(1, 2)));
        assert_eq!(p.det(), q(0, 1));
    }

    #[test]
    fn irrational_spectrum_reported_and_certified() {
        let m = SymMat2::from_ints(1, 1, 0);
        assert_eq!(m.pos_neg_parts(), Err(Sym2Error::IrrationalSpectrum));
        let (p, n) = m.pos_neg_parts_certified();
        let rec = p - n;
        assert!(rec.a11.contains(1.0) && rec.a12.contains(1.0) && rec.a22.contains(0.0));
    }

    #[test]
    fn axis_rank_one_connections() {
        // 2^p = 3: A = diag(0, 1), M = diag(2, 1), B = diag(2, -1)
        let a = SymMat2::from_ints(0, 0, 1);
        let m = SymMat2::from_ints(2, 0, 1);
        let b = SymMat2::from_ints(2, 0, -1);
        let r = a.rank_one_connected(&m).unwrap().unwrap();
        assert_eq!(r.axis, Some(Axis::E1));
        assert_eq!(r.c, q(-2, 1));
        let two_id = SymMat2::from_ints(2, 0, 2);
        let r = two_id.rank_one_connected(&b).unwrap().unwrap();
        assert_eq!(r.axis, Some(Axis::E2));
        assert_eq!(r.unit_vector(), Some([q(0, 1), q(1, 1)]));
        let id = SymMat2::<Rational>::identity();
        assert_eq!(id.rank_one_connected(&SymMat2::zero()), Ok(None));
        assert_eq!(id.rank_one_connected(&id), Err(Sym2Error::Degenerate));
    }

    #[test]
    fn general_direction_factorization() {
        // (3,4)/5 direction scaled by 25
        let d = SymMat2::from_ints(9, 12, 16);
        let r = d.rank_one_connected(&SymMat2::zero()).unwrap().unwrap();
        assert_eq!(r.c, q(25, 1));
        assert_eq!(r.unit_vector(), Some([q(3, 5), q(4, 5)]));
        assert_eq!(d - r.projector.scale(&r.c), SymMat2::zero());
    }

    #[test]
    fn eps_segment_membership() {
        let b = SymMat2::<Rational>::zero();
        let c = SymMat2::from_ints(1, 0, 0);
        let mid = SymMat2::diag(q(1, 2), q(0, 1));
        assert!(mid.in_eps_segment(&b, &c, &q(0, 1)));
        let eps = q(1, 10);
        let x = SymMat2::diag(q(0, 1), eps.clone());
        assert!(x.in_eps_segment(&b, &c, &eps));
        assert!(!x.in_eps_segment(&b, &c, &q(1, 20)));
        assert!(b.in_eps_segment(&b, &b, &q(0, 1)));
        // beyond the endpoint
        let far = SymMat2::from_ints(2, 0, 0);
        assert!(far.in_eps_segment(&b, &c, &q(1, 1)));
        assert!(!far.in_eps_segment(&b, &c, &q(99, 100)));
    }

    #[test]
    fn interval_segment_distance_axis_formula() {
        let b = SymMat2::<Rational>::from_ints(0, 0, 1).to_interval();
        let c = SymMat2::<Rational>::from_ints(2, 0, 1).to_interval();
        let x = SymMat2::new(
            Interval::new(0.5, 3.0),
            Interval::new(-0.1, 0.1),
            Interval::new(1.0, 1.2),
        );
        let d = x.dist_to_segment_enclosure(&b, &c);
        // worst corner: x11 = 3 (1 past the end), x12 = 0.1, x22 = 1.2
        let worst = (1.0f64 + 2.0 * 0.01 + 0.04).sqrt();
        assert!(d.hi() >= worst - 1e-12 && d.hi() <= worst + 1e-12);
    }
}
