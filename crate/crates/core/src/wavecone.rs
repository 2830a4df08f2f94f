//! Wave cone of `𝒜(v)_ij = ∂_ii v_j − ∂_jj v_i`.
//!
//! `v` lies in the cone iff some `ξ ≠ 0` has `ξ_i² v_j = ξ_j² v_i` for all
//! `i, j`, iff the entries of `v` do not change sign.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::interval::Interval;
use crate::scalar::{Rational, Scalar, Sign};

/// Exact sign-consistency test.
pub fn member(v: &[Rational]) -> bool {
    let pos = v.iter().any(|x| x.sign() == Sign::Positive);
    let neg = v.iter().any(|x| x.sign() == Sign::Negative);
    !(pos && neg)
}

/// `max_{i,j} |w_i v_j − w_j v_i|` with `w = ξ²`, exact.
pub fn residual_exact(w: &[Rational], v: &[Rational]) -> Rational {
    let mut best = Rational::zero();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let r = (w[i].clone() * v[j].clone() - w[j].clone() * v[i].clone()).abs();
            if r > best {
                best = r;
            }
        }
    }
    best
}

fn residual_interval(w: &[Interval], v: &[Interval]) -> Interval {
    let mut best = Interval::ZERO;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            best = best.max(&(w[i] * v[j] - w[j] * v[i]).abs());
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct BruteForce {
    pub member: bool,
    /// Smallest residual found (sphere grid and the exact candidate).
    pub residual: f64,
    /// `ξ²` of the best point found.
    pub witness: Vec<f64>,
    /// Certified lower bound of the residual over the whole unit sphere,
    /// `None` when the exact candidate already has residual zero.
    pub floor: Option<f64>,
}

/// Grid search over the unit sphere in the squared coordinates `w = ξ²`
/// (the simplex `Σ w = 1`, `w ≥ 0`), plus the exact candidate
/// `ξ_i = √|v_i|`. A vector is declared a non-member only when interval
/// evaluation on patches covering the simplex certifies a positive floor.
pub fn member_bruteforce(v: &[Rational], resolution: usize) -> BruteForce {
    assert!(resolution >= 8, "resolution must be at least 8");
    let n = v.len();
    assert!(n >= 2, "dimension must be at least 2");
    let vi: Vec<Interval> = v.iter().map(|x| x.to_interval()).collect();

    // exact candidate ξ_i² = |v_i|
    let cand: Vec<Rational> = v.iter().map(|x| x.abs()).collect();
    let total = cand.iter().fold(Rational::zero(), |a, b| a + b.clone());
    if total.is_zero() {
        let mut w = vec![0.0; n];
        w[0] = 1.0;
        return BruteForce {
            member: true,
            residual: 0.0,
            witness: w,
            floor: None,
        };
    }
    let exact = residual_exact(&cand, v);
    let cand_w: Vec<f64> = cand
        .iter()
        .map(|c| (c.clone() / total.clone()).to_f64())
        .collect();
    if exact.is_zero() {
        return BruteForce {
            member: true,
            residual: 0.0,
            witness: cand_w,
            floor: None,
        };
    }

    // sampled minimum on grid vertices
    let mut best = ((exact / total).to_f64(), cand_w);
    for_each_vertex(n, resolution, &mut |w| {
        let wi: Vec<Interval> = w.iter().map(|&x| Interval::point(x)).collect();
        let r = residual_interval(&wi, &vi).mid();
        if r < best.0 {
            best = (r, w.to_vec());
        }
    });

    // certified floor over patches, refined where the bound is not positive
    let mut floor = f64::INFINITY;
    let h = 1.0 / resolution as f64;
    for_each_patch(n, resolution, &mut |lo| {
        floor = floor.min(patch_floor(lo, h, &vi, 6));
    });
    BruteForce {
        member: false,
        residual: best.0,
        witness: best.1,
        floor: Some(floor),
    }
    .certify()
}

impl BruteForce {
    fn certify(mut self) -> Self {
        // a non-positive floor means the search could not separate v from
        // the cone; report it as a member so the disagreement surfaces
        if self.floor.is_some_and(|f| f <= 0.0) {
            self.member = true;
        }
        self
    }
}

/// Lower bound of the residual on the box `[lo, lo + h]^{n−1}` (last
/// coordinate `1 − Σ`), bisecting up to `depth` times.
fn patch_floor(lo: &[f64], h: f64, v: &[Interval], depth: u32) -> f64 {
    let mut w: Vec<Interval> = lo.iter().map(|&a| Interval::new(a, a + h)).collect();
    let sum: Interval = w.iter().copied().sum();
    let last = Interval::ONE - sum;
    if last.hi() < 0.0 {
        return f64::INFINITY;
    }
    w.push(Interval::new(last.lo().max(0.0), last.hi()));
    let r = residual_interval(&w, v).lo();
    if r > 0.0 || depth == 0 {
        return r;
    }
    let k = lo.len();
    let mut out = f64::INFINITY;
    for mask in 0..(1usize << k) {
        let sub: Vec<f64> = (0..k)
            .map(|i| lo[i] + if mask >> i & 1 == 1 { h / 2.0 } else { 0.0 })
            .collect();
        out = out.min(patch_floor(&sub, h / 2.0, v, depth - 1));
    }
    out
}

fn for_each_vertex(n: usize, res: usize, f: &mut dyn FnMut(&[f64])) {
    let mut idx = vec![0usize; n - 1];
    loop {
        let s: usize = idx.iter().sum();
        if s <= res {
            let mut w: Vec<f64> = idx.iter().map(|&i| i as f64 / res as f64).collect();
            w.push((res - s) as f64 / res as f64);
            f(&w);
        }
        if !advance(&mut idx, res) {
            break;
        }
    }
}

fn for_each_patch(n: usize, res: usize, f: &mut dyn FnMut(&[f64])) {
    let mut idx = vec![0usize; n - 1];
    loop {
        let s: usize = idx.iter().sum();
        if s < res {
            let lo: Vec<f64> = idx.iter().map(|&i| i as f64 / res as f64).collect();
            f(&lo);
        }
        if !advance(&mut idx, res - 1) {
            break;
        }
    }
}

fn advance(idx: &mut [usize], max: usize) -> bool {
    for d in idx.iter_mut() {
        if *d < max {
            *d += 1;
            return true;
        }
        *d = 0;
    }
    false
}

/// Random rational vector with entries `a/b`, `|a| ≤ 6`, `1 ≤ b ≤ 6`;
/// half the draws are forced sign-consistent.
pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    let same = rng.gen_bool(0.5);
    let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
    (0..n)
        .map(|_| {
            let a: i64 = rng.gen_range(-6..=6);
            let b: i64 = rng.gen_range(1..=6);
            let a = if same { sign * a.abs() } else { a };
            Rational::ratio(a, b)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct AgreementRow {
    pub v: Vec<String>,
    pub member: bool,
    pub brute: bool,
    pub residual: f64,
    pub floor: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AgreementReport {
    pub n: usize,
    pub trials: usize,
    pub agree: usize,
    pub members: usize,
    pub rows: Vec<AgreementRow>,
}

impl AgreementReport {
    pub fn all_agree(&self) -> bool {
        self.agree == self.trials
    }

    pub fn disagreements(&self) -> Vec<&AgreementRow> {
        self.rows.iter().filter(|r| r.member != r.brute).collect()
    }

    /// `(v, member, residual)` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("v,member,brute,residual,floor\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.17e},{}\n",
                r.v.join(" "),
                r.member,
                r.brute,
                r.residual,
                r.floor.map_or(String::new(), |f| format!("{f:.17e}"))
            ));
        }
        out
    }
}

/// Compares [`member`] and [`member_bruteforce`] on `trials` random vectors.
pub fn agreement_suite(n: usize, trials: usize, seed: u64, resolution: usize) -> AgreementReport {
    assert!(trials >= 1 && n >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vs: Vec<Vec<Rational>> = (0..trials).map(|_| random_vector(&mut rng, n)).collect();
    let rows: Vec<AgreementRow> = vs
        .par_iter()
        .map(|v| {
            let b = member_bruteforce(v, resolution);
            AgreementRow {
                v: v.iter().map(|x| x.to_string()).collect(),
                member: member(v),
                brute: b.member,
                residual: b.residual,
                floor: b.floor,
            }
        })
        .collect();
    let agree = rows.iter().filter(|r| r.member == r.brute).count();
    let members = rows.iter().filter(|r| r.member).count();
    AgreementReport {
        n,
        trials,
        agree,
        members,
        rows,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LatticeReport {
    pub n: usize,
    pub checked: usize,
    pub failures: Vec<String>,
}

/// Cone, permutation and sign invariants over `{−2, …, 2}ⁿ`.
pub fn lattice_invariants(n: usize) -> LatticeReport {
    let scales = [
        Rational::ratio(-3, 2),
        Rational::ratio(-1, 1),
        Rational::zero(),
        Rational::ratio(1, 3),
        Rational::ratio(5, 1),
    ];
    let mut failures = Vec::new();
    let mut checked = 0;
    let count = 5usize.pow(n as u32);
    for code in 0..count {
        let v: Vec<Rational> = (0..n)
            .map(|i| Rational::integer((code / 5usize.pow(i as u32) % 5) as i64 - 2))
            .collect();
        let m = member(&v);
        checked += 1;
        for t in &scales {
            let tv: Vec<Rational> = v.iter().map(|x| x.clone() * t.clone()).collect();
            if m && !member(&tv) {
                failures.push(format!("cone: {v:?} scaled by {t}"));
            }
        }
        for p in permutations(n) {
            let pv: Vec<Rational> = p.iter().map(|&i| v[i].clone()).collect();
            if member(&pv) != m {
                failures.push(format!("permutation {p:?} of {v:?}"));
            }
        }
        let sum = v.iter().fold(Rational::zero(), |a, b| a + b.clone());
        if m && !sum.is_negative() && v.iter().any(|x| x.is_negative()) {
            failures.push(format!("sign: {v:?}"));
        }
    }
    LatticeReport {
        n,
        checked,
        failures,
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerators_cover_the_simplex() {
        let mut n = 0;
        for_each_vertex(3, 8, &mut |w| {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            n += 1;
        });
        assert_eq!(n, 45);
        let mut p = 0;
        for_each_patch(3, 8, &mut |_| p += 1);
        assert_eq!(p, 36);
    }

    #[test]
    fn permutations_count() {
        assert_eq!(permutations(3).len(), 6);
    }
}
