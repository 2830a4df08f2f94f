//! Explicit diagonal laminates: the three-atom laminate `ν_{p,k}`, the
//! recursive sequence `ν_p^(m)` built from it, and the staircase schedule.
//!
//! Everything is parametrized by the value `t = 2^p` rather than `p`, so that
//! rational surrogates (`t = 3`, `t = 5/2`, ...) give exact arithmetic while
//! irrational `2^p` runs in interval mode.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::integrand::{DiagL1, Integrand, NegPartPow};
use crate::interval::Interval;
use crate::laminate::{Laminate, LaminateError};
use crate::scalar::{Scalar, Sign};
use crate::sym2::SymMat2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("2^p = {0} must exceed 2 (p > 1)")]
    PRange(String),
    #[error("scale k = {0} must be positive")]
    KNonPositive(String),
    #[error("exponent q = {0} outside [1, 2)")]
    QRange(f64),
    #[error(transparent)]
    Laminate(#[from] LaminateError),
}

/// Matrices and weights of the three-atom laminate at `2^p = two_p`.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct LemmaNParams<S> {
    pub two_p: S,
    pub k: S,
    pub a: SymMat2<S>,
    pub b: SymMat2<S>,
    pub m: SymMat2<S>,
    pub alpha: S,
    pub beta: S,
}

impl<S: Scalar> LemmaNParams<S> {
    pub fn new(two_p: S, k: S) -> Result<Self, ConstructionError> {
        let one = S::one();
        let two = S::from_i64(2);
        if !(two_p.clone() - two.clone()).is_certainly_positive() {
            return Err(ConstructionError::PRange(format!("{two_p:?}")));
        }
        if !k.is_certainly_positive() {
            return Err(ConstructionError::KNonPositive(format!("{k:?}")));
        }
        let tm1 = two_p.clone() - one.clone();
        let tp1 = two_p.clone() + one.clone();
        let a = SymMat2::diag((two_p.clone() - S::from_i64(3)) / tm1.clone(), one.clone());
        let b = SymMat2::diag(two.clone(), -two.clone() / tm1.clone());
        let m = SymMat2::diag(two.clone(), one);
        let alpha = tm1 / tp1.clone();
        let beta = tp1 / (two * two_p.clone());
        Ok(LemmaNParams {
            two_p,
            k,
            a,
            b,
            m,
            alpha,
            beta,
        })
    }

    /// Weights of `kA`, `2k·Id`, `kB`.
    pub fn weights(&self) -> [S; 3] {
        let one = S::one();
        let rest = one.clone() - self.alpha.clone();
        [
            self.alpha.clone(),
            self.beta.clone() * rest.clone(),
            (one - self.beta.clone()) * rest,
        ]
    }

    /// Whether the negative part of `x_11` can be positive (`2^p < 3`).
    pub fn item3_first_applicable(&self) -> bool {
        (S::from_i64(3) - self.two_p.clone()).is_certainly_positive()
    }
}

/// `ν_{p,k} = α δ_{kA} + β(1−α) δ_{2k Id} + (1−β)(1−α) δ_{kB}` built from
/// `δ_{k Id}` by splitting along `e1` and then `e2`.
pub fn lemma_n_laminate<S: Scalar>(two_p: S, k: S) -> Result<Laminate<S>, ConstructionError> {
    lemma_n_on(Laminate::dirac(SymMat2::scalar(k.clone())), two_p, k, 1)
}

/// Replace the atom `k·Id` of `nu` by `ν_{p,k}` (weights scale with it).
fn lemma_n_on<S: Scalar>(
    nu: Laminate<S>,
    two_p: S,
    k: S,
    stage: u32,
) -> Result<Laminate<S>, ConstructionError> {
    let prm = LemmaNParams::new(two_p, k.clone())?;
    let one = S::one();
    let kid = SymMat2::scalar(k.clone());
    let km = prm.m.scale(&k);
    let nu = nu.split_matrix(
        &kid,
        prm.a.scale(&k),
        km.clone(),
        prm.alpha.clone(),
        one.clone(),
        stage,
    )?;
    let two_k = SymMat2::scalar(S::from_i64(2) * k.clone());
    let nu = nu.split_matrix(&km, two_k, prm.b.scale(&k), prm.beta.clone(), one, stage)?;
    Ok(nu)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ItemStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, Serialize)]
pub struct ItemResult {
    pub item: u8,
    pub status: ItemStatus,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaNReport {
    pub p: Interval,
    pub k: Interval,
    pub q: f64,
    pub big_c: Interval,
    pub c1: Interval,
    pub c2: Interval,
    pub items: Vec<ItemResult>,
}

impl LemmaNReport {
    /// No item failed (not-applicable items are allowed).
    pub fn ok(&self) -> bool {
        self.items.iter().all(|i| i.status != ItemStatus::Fail)
    }

    pub fn status(&self, item: u8) -> Vec<ItemStatus> {
        self.items
            .iter()
            .filter(|i| i.item == item)
            .map(|i| i.status)
            .collect()
    }
}

fn item(items: &mut Vec<ItemResult>, n: u8, ok: bool, detail: String) {
    items.push(ItemResult {
        item: n,
        status: if ok {
            ItemStatus::Pass
        } else {
            ItemStatus::Fail
        },
        detail,
    });
}

/// Check the five properties of `ν_{p,k}` and return the constants
/// `C(p) = ∫(|x11|+|x22|)/k` and `c_i(p,q) = ∫(x_ii)_-^q / k^q`.
pub fn verify_lemma_n<S: Scalar>(
    two_p: S,
    k: S,
    q: f64,
) -> Result<LemmaNReport, ConstructionError> {
    if !(1.0..2.0).contains(&q) {
        return Err(ConstructionError::QRange(q));
    }
    let prm = LemmaNParams::new(two_p.clone(), k.clone())?;
    let nu = lemma_n_laminate(two_p.clone(), k.clone())?;
    let unit = lemma_n_laminate(two_p.clone(), S::one())?;
    let ki = k.to_interval();
    let mut items = Vec::new();

    let bary = nu.barycenter();
    item(
        &mut items,
        1,
        bary.possibly_equal(&SymMat2::scalar(k.clone())),
        format!("barycenter {bary:?}"),
    );

    let big_c = nu.moment(&DiagL1) / ki;
    let big_c_unit = unit.moment(&DiagL1);
    item(
        &mut items,
        2,
        big_c.overlaps(&big_c_unit) && big_c.is_positive(),
        format!("C at k: {big_c}, C at k=1: {big_c_unit}"),
    );

    let kq = ki.powf(q);
    let c = [0usize, 1].map(|i| nu.moment(&NegPartPow::new(i, q)) / kq);
    let c_unit = [0usize, 1].map(|i| unit.moment(&NegPartPow::new(i, q)));
    for i in 0..2 {
        if i == 0 && !prm.item3_first_applicable() {
            items.push(ItemResult {
                item: 3,
                status: ItemStatus::NotApplicable,
                detail: format!("c_1 = {}: A_11 >= 0 when 2^p >= 3", c[0]),
            });
            continue;
        }
        item(
            &mut items,
            3,
            c[i].is_positive() && c[i].overlaps(&c_unit[i]),
            format!("c_{} = {}", i + 1, c[i]),
        );
    }

    let mut trail_ok = true;
    for t in &nu.trail {
        for x in [&t.b, &t.c] {
            trail_ok &= x.is_diagonal() && x.trace().is_certainly_positive();
        }
    }
    item(
        &mut items,
        4,
        trail_ok,
        format!("{} trail pairs", nu.trail.len()),
    );

    let w = nu.weight_of(&SymMat2::scalar(S::from_i64(2) * k.clone()));
    let target = S::one() / two_p.clone();
    item(
        &mut items,
        5,
        w.possibly_equal(&target),
        format!("weight {w:?}, 2^-p = {target:?}"),
    );

    Ok(LemmaNReport {
        p: two_p.to_interval().log2(),
        k: ki,
        q,
        big_c,
        c1: c[0],
        c2: c[1],
        items,
    })
}

/// `ν_p^(m)`: start from `δ_Id`; at stage `j` replace the atom `2^{j−1} Id`
/// (weight `2^{−p(j−1)}`) by `ν_{p,2^{j−1}}` at the same weight.
pub fn fundlem_sequence<S: Scalar>(two_p: S, m: u32) -> Result<Laminate<S>, ConstructionError> {
    LemmaNParams::new(two_p.clone(), S::one())?;
    let mut nu = Laminate::dirac(SymMat2::identity());
    let mut k = S::one();
    for j in 1..=m {
        nu = lemma_n_on(nu, two_p.clone(), k.clone(), j)?;
        k = k * S::from_i64(2);
    }
    Ok(nu)
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct MomentRow<S> {
    pub m: u32,
    pub a_direct: S,
    pub a_closed: S,
    pub b_direct: [Interval; 2],
    pub b_closed: [Interval; 2],
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct MomentTable<S> {
    pub q: f64,
    pub big_c: S,
    pub c: [Interval; 2],
    pub rows: Vec<MomentRow<S>>,
}

impl<S: Scalar> MomentTable<S> {
    /// Direct and closed-form values agree on every row.
    pub fn agree(&self) -> bool {
        self.rows.iter().all(|r| {
            r.a_direct.possibly_equal(&r.a_closed)
                && (0..2).all(|i| r.b_direct[i].overlaps(&r.b_closed[i]))
        })
    }

    pub fn a_increment(&self, m: usize) -> S {
        self.rows[m].a_direct.clone() - self.rows[m - 1].a_direct.clone()
    }

    pub fn b_increment(&self, m: usize, i: usize) -> Interval {
        self.rows[m].b_direct[i] - self.rows[m - 1].b_direct[i]
    }

    /// `m,a_m,b_m1,b_m2` with interval endpoints, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,a_lo,a_hi,b1_lo,b1_hi,b2_lo,b2_hi\n");
        for r in &self.rows {
            let a = r.a_direct.to_interval();
            let _ = writeln!(
                s,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.m,
                a.lo(),
                a.hi(),
                r.b_direct[0].lo(),
                r.b_direct[0].hi(),
                r.b_direct[1].lo(),
                r.b_direct[1].hi()
            );
        }
        s
    }
}

fn diag_l1<S: Scalar>(x: &SymMat2<S>) -> S {
    x.a11.abs() + x.a22.abs()
}

/// `a_m = ∫(|x11|+|x22|) dν_p^(m)` and `b_{m,i} = ∫(x_ii)_-^q dν_p^(m)`
/// for `m = 0..=m_max`, both from the atoms and from the closed-form
/// increments `(C−2)(2/2^p)^{m−1}` and `c_i 2^{(q−p)(m−1)}`.
pub fn moment_recursions<S: Scalar>(
    two_p: S,
    q: f64,
    m_max: u32,
) -> Result<MomentTable<S>, ConstructionError> {
    if !(1.0..2.0).contains(&q) {
        return Err(ConstructionError::QRange(q));
    }
    let unit = lemma_n_laminate(two_p.clone(), S::one())?;
    let big_c = unit.moment_with(diag_l1);
    let c = [0usize, 1].map(|i| unit.moment(&NegPartPow::new(i, q)));
    let ratio = S::from_i64(2) / two_p.clone();
    let lambda = Interval::ONE / two_p.to_interval();
    let phis = [NegPartPow::new(0, q), NegPartPow::new(1, q)];

    let mut rows = Vec::with_capacity(m_max as usize + 1);
    let mut nu = Laminate::dirac(SymMat2::identity());
    let mut a_closed = S::from_i64(2);
    let mut b_closed = [Interval::ZERO; 2];
    let mut geo = S::one();
    let mut k = S::one();
    for m in 0..=m_max {
        if m > 0 {
            nu = lemma_n_on(nu, two_p.clone(), k.clone(), m)?;
            k = k * S::from_i64(2);
            a_closed = a_closed + (big_c.clone() - S::from_i64(2)) * geo.clone();
            geo = geo * ratio.clone();
            let e = (Interval::point(q) * Interval::point((m - 1) as f64)).exp2();
            let lam = powi(lambda, m - 1);
            for i in 0..2 {
                b_closed[i] = b_closed[i] + c[i] * lam * e;
            }
        }
        rows.push(MomentRow {
            m,
            a_direct: nu.moment_with(diag_l1),
            a_closed: a_closed.clone(),
            b_direct: [nu.moment(&phis[0] as &dyn Integrand), nu.moment(&phis[1])],
            b_closed,
        });
    }
    Ok(MomentTable { q, big_c, c, rows })
}

fn powi(x: Interval, n: u32) -> Interval {
    (0..n).fold(Interval::ONE, |acc, _| acc * x)
}

/// `κ = 2 / ln 2`.
pub fn kappa() -> Interval {
    Interval::point(2.0) / Interval::ln2()
}

#[derive(Clone, Debug, Serialize)]
pub struct StaircaseLayer {
    pub j: u32,
    /// `p_j = 1 + κ/j`.
    pub p: Interval,
    /// `2^{p_j} = 2 e^{2/j}`.
    pub two_p: Interval,
    /// Barycenter scale `2^{j−1}`.
    pub k: f64,
    pub eps: f64,
    pub item3_first_applicable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StaircaseSchedule {
    pub depth: u32,
    pub layers: Vec<StaircaseLayer>,
}

impl StaircaseSchedule {
    pub fn layer(&self, j: u32) -> &StaircaseLayer {
        &self.layers[j as usize - 1]
    }

    /// `μ_{j,2^{j−1}}`.
    pub fn layer_laminate(&self, j: u32) -> Result<Laminate<Interval>, ConstructionError> {
        let l = self.layer(j);
        lemma_n_laminate(l.two_p, Interval::point(l.k))
    }

    /// `2^{Σ_{m≤j}(1−p_m)}`, certified.
    pub fn decay(&self, j: u32) -> Interval {
        let s: Interval = self.layers[..j as usize]
            .iter()
            .map(|l| Interval::ONE - l.p)
            .sum();
        s.exp2()
    }
}

/// Layers `j = 1..=depth` with `p_j = 1 + 2/(j ln 2)` and
/// `ε_j = min(4^{−j}, ln2·2^{−j−p_j}, trace margin of μ_j / 4)`.
pub fn staircase_schedule(depth: u32) -> StaircaseSchedule {
    assert!(depth >= 1, "depth must be at least 1");
    let kap = kappa();
    let layers = (1..=depth)
        .map(|j| {
            let jf = Interval::point(j as f64);
            let p = Interval::ONE + kap / jf;
            let two_p = Interval::point(2.0) * (Interval::point(2.0) / jf).exp();
            let prm = LemmaNParams::new(two_p, Interval::ONE).expect("2^p_j > 2");
            let tr_min = [prm.a.trace(), prm.b.trace(), prm.m.trace()]
                .iter()
                .map(|t| t.lo())
                .fold(f64::INFINITY, f64::min);
            let eps = (0.25f64)
                .powi(j as i32)
                .min(std::f64::consts::LN_2 * (-(j as f64) - p.hi()).exp2())
                .min(tr_min / 4.0);
            StaircaseLayer {
                j,
                p,
                two_p,
                k: (j as f64 - 1.0).exp2(),
                eps,
                item3_first_applicable: prm.item3_first_applicable(),
            }
        })
        .collect();
    StaircaseSchedule { depth, layers }
}

/// Extremes of the constants over a grid of `p` values.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantsScan {
    pub p_lo: f64,
    pub p_hi: f64,
    pub q: f64,
    pub points: usize,
    /// Upper bound of `C(p)` over the grid.
    pub big_c_sup: f64,
    /// Lower bound of `min(c_1, c_2)` over the grid.
    pub small_c_inf: f64,
}

pub fn constants_scan(
    p_lo: f64,
    p_hi: f64,
    q: f64,
    points: usize,
) -> Result<ConstantsScan, ConstructionError> {
    assert!(points >= 2 && p_lo < p_hi);
    let mut big_c_sup = f64::NEG_INFINITY;
    let mut small_c_inf = f64::INFINITY;
    for n in 0..points {
        let p = p_lo + (p_hi - p_lo) * n as f64 / (points - 1) as f64;
        let r = verify_lemma_n(Interval::two_pow(p), Interval::ONE, q)?;
        big_c_sup = big_c_sup.max(r.big_c.hi());
        let c1 = if r.status(3).contains(&ItemStatus::NotApplicable) {
            f64::INFINITY
        } else {
            r.c1.lo()
        };
        small_c_inf = small_c_inf.min(c1).min(r.c2.lo());
    }
    Ok(ConstantsScan {
        p_lo,
        p_hi,
        q,
        points,
        big_c_sup,
        small_c_inf,
    })
}

/// Sign of `A_11 = (2^p − 3)/(2^p − 1)`.
pub fn a11_sign<S: Scalar>(two_p: S) -> Result<Sign, ConstructionError> {
    Ok(LemmaNParams::new(two_p, S::one())?.a.a11.sign())
}
