//! Certified functionals of synthesized potentials.
//!
//! Core cells contribute exact atom values times certified areas; frame
//! cells are bounded by interval evaluation of the integrand on sub-boxes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::constructions::{
    staircase_schedule, verify_lemma_n, ConstructionError, StaircaseSchedule,
};
use crate::integrand::{DiagL1, Integrand, NegPartPow};
use crate::interval::Interval;
use crate::laminate::Laminate;
use crate::scalar::Scalar;
use crate::sym2::SymMat2;
use crate::synth::template::Rect;
use crate::synth::{
    staircase_build, CellRecord, PiecewisePotential, RegionTree, Staircase, SynthConfig, SynthError,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("axis index {0} is not 1 or 2")]
    Axis(usize),
    #[error("exponent q = {0} outside [1, 2)")]
    Exponent(f64),
    #[error("atom label {0} matches no atom of the laminate")]
    UnknownAtom(u32),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
}

/// `∫ Φ(D²u)` over the domain.
pub fn hessian_l1(u: &PiecewisePotential, phi: &dyn Integrand) -> Interval {
    u.analyzer().mean(&u.root, phi) * u.domain.area()
}

/// `∫ Φ(D²u)` split by the level of the cell that carries the Hessian.
pub fn hessian_l1_by_level(u: &PiecewisePotential, phi: &dyn Integrand) -> BTreeMap<u32, Interval> {
    let area = u.domain.area();
    u.analyzer()
        .integral_by_level(&u.root, phi)
        .into_iter()
        .map(|(k, v)| (k, v * area))
        .collect()
}

fn neg(i: usize, q: f64) -> Result<NegPartPow, VerifyError> {
    if !(1..=2).contains(&i) {
        return Err(VerifyError::Axis(i));
    }
    if !(1.0..2.0).contains(&q) {
        return Err(VerifyError::Exponent(q));
    }
    Ok(NegPartPow::new(i - 1, q))
}

/// `∫ (∂_ii u)_-^q`, `i ∈ {1, 2}`.
pub fn neg_part_lq(u: &PiecewisePotential, i: usize, q: f64) -> Result<Interval, VerifyError> {
    Ok(hessian_l1(u, &neg(i, q)?))
}

/// `∫_{Ω_r} (∂_ii u)_-^q` over a marked region.
pub fn neg_part_lq_in(
    u: &PiecewisePotential,
    i: usize,
    q: f64,
    region: u32,
) -> Result<Interval, VerifyError> {
    let phi = neg(i, q)?;
    let m = u.analyzer().region_integrals(&u.root, &phi);
    Ok(m.get(&region).copied().unwrap_or(Interval::ZERO) * u.domain.area())
}

/// Certified lower bound of `tr D²u`; `u` is subharmonic when it is `≥ 0`.
pub fn min_trace(u: &PiecewisePotential) -> f64 {
    u.analyzer().min_trace(&u.root)
}

/// Largest deviation of `∇u` from `A x + b` on the boundary of the domain.
/// Exactly zero for synthesized potentials with matching `(A, b)`.
pub fn boundary_check(u: &PiecewisePotential, a: &SymMat2<Interval>, b: [f64; 2]) -> f64 {
    let traces = u.analyzer().boundary_dev(&u.root) * u.scale;
    let base = u.base_matrix();
    let mut dev = traces;
    // separation of the enclosures; zero when they may coincide
    let da = [(base.a11, a.a11), (base.a12, a.a12), (base.a22, a.a22)]
        .iter()
        .map(|(x, y)| (x.lo() - y.hi()).max(y.lo() - x.hi()).max(0.0))
        .fold(0.0, f64::max);
    if da > 0.0 {
        let r = u
            .domain
            .lo
            .iter()
            .chain(u.domain.hi.iter())
            .map(|x| x.abs())
            .fold(0.0, f64::max);
        dev += 2.0 * da * r;
    }
    dev + (u.offset[0] - b[0]).abs().max((u.offset[1] - b[1]).abs())
}

/// Boundary check on a flat cell dump: for every cell edge lying on the
/// domain boundary, the largest coefficient difference between the edge
/// restriction of `∇u` and `A x + b`.
pub fn boundary_check_cells(
    cells: &[CellRecord],
    domain: &Rect,
    a: [[f64; 2]; 2],
    b: [f64; 2],
) -> f64 {
    let mut dev: f64 = 0.0;
    for c in cells {
        for axis in 0..2 {
            let o = 1 - axis;
            for (side, at) in [
                (c.rect.lo[axis], 0.0),
                (c.rect.hi[axis], c.rect.hi[axis] - c.rect.lo[axis]),
            ] {
                if side != domain.lo[axis] && side != domain.hi[axis] {
                    continue;
                }
                // coefficient of (axis offset)^k (other offset)^n
                let coef = |k: usize, n: usize| {
                    if axis == 0 {
                        c.coeffs[k][n]
                    } else {
                        c.coeffs[n][k]
                    }
                };
                let mut x = [0.0; 2];
                x[axis] = side;
                x[o] = c.rect.lo[o];
                for g in 0..2 {
                    // ∂_g u along the edge as a cubic in the other offset
                    let mut got = [0.0; 4];
                    for (n, v) in got.iter_mut().enumerate() {
                        *v = if g == axis {
                            (1..4)
                                .map(|k| k as f64 * coef(k, n) * at.powi(k as i32 - 1))
                                .sum()
                        } else if n < 3 {
                            (n + 1) as f64
                                * (0..4)
                                    .map(|k| coef(k, n + 1) * at.powi(k as i32))
                                    .sum::<f64>()
                        } else {
                            0.0
                        };
                    }
                    let want = [a[g][0] * x[0] + a[g][1] * x[1] + b[g], a[g][o], 0.0, 0.0];
                    for n in 0..4 {
                        dev = dev.max((got[n] - want[n]).abs());
                    }
                }
            }
        }
    }
    dev
}

/// Largest value/gradient mismatch across shared edges (sampled).
pub fn continuity_check(u: &PiecewisePotential) -> f64 {
    u.analyzer().continuity_defect(&u.root)
}

/// Largest ratio of frame-Hessian distance to its trail segment over the
/// allowed tolerance (`≤ 1` passes).
pub fn trail_check(u: &PiecewisePotential) -> f64 {
    u.analyzer().trail_excess(&u.root)
}

/// `sup |∇w_j|` of the perturbations added at level `j`, physical units.
pub fn level_sup_distance(u: &PiecewisePotential) -> BTreeMap<u32, f64> {
    u.analyzer()
        .grad_sup_by_level(&u.root)
        .into_iter()
        .map(|(k, v)| (k, v * u.scale * (1.0 + 1e-12)))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomVerdict {
    pub matrix: SymMat2<Interval>,
    pub weight: Interval,
    pub area: Interval,
    /// `(1 − ε) λ |Ω|`.
    pub bound: Interval,
    pub ok: bool,
}

/// Tagged core area per atom against `(1 − ε) λ_i |Ω|`.
pub fn area_fractions<S: Scalar>(
    u: &PiecewisePotential,
    tree: &RegionTree,
    nu: &Laminate<S>,
    eps: f64,
) -> Result<Vec<AtomVerdict>, VerifyError> {
    let atoms: Vec<_> = nu
        .atoms
        .iter()
        .map(|a| (a.matrix.to_interval(), a.weight.to_interval()))
        .collect();
    let mut found = vec![Interval::ZERO; atoms.len()];
    for (&id, &area) in &tree.atom_areas {
        let m = u.table.get(id);
        let i = atoms
            .iter()
            .position(|(x, _)| x.possibly_equal(m))
            .ok_or(VerifyError::UnknownAtom(id))?;
        found[i] = found[i] + area;
    }
    let total = u.domain.area();
    Ok(atoms
        .into_iter()
        .zip(found)
        .map(|((matrix, weight), area)| {
            let bound = Interval::point(1.0 - eps) * weight * total;
            AtomVerdict {
                ok: area.lo() >= bound.hi(),
                matrix,
                weight,
                area,
                bound,
            }
        })
        .collect())
}

/// One row of a verification report.
#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub functional: String,
    pub region: String,
    pub j: Option<u32>,
    pub q: Option<f64>,
    pub lo: f64,
    pub hi: f64,
    pub verdict: Option<bool>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerificationReport {
    pub rows: Vec<ReportRow>,
}

impl VerificationReport {
    pub fn push(
        &mut self,
        functional: &str,
        region: &str,
        j: Option<u32>,
        q: Option<f64>,
        v: Interval,
        verdict: Option<bool>,
    ) {
        self.rows.push(ReportRow {
            functional: functional.to_string(),
            region: region.to_string(),
            j,
            q,
            lo: v.lo(),
            hi: v.hi(),
            verdict,
        });
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Some(false))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("functional,region,j,q,lo,hi,verdict\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.17e},{:.17e},{}",
                r.functional,
                r.region,
                r.j.map_or(String::new(), |j| j.to_string()),
                r.q.map_or(String::new(), |q| format!("{q}")),
                r.lo,
                r.hi,
                match r.verdict {
                    Some(true) => "pass",
                    Some(false) => "fail",
                    None => "",
                }
            );
        }
        out
    }
}

/// Standard report for a realized laminate.
pub fn realization_report<S: Scalar>(
    u: &PiecewisePotential,
    tree: &RegionTree,
    nu: &Laminate<S>,
    eps: f64,
    phis: &[std::sync::Arc<dyn Integrand>],
) -> Result<VerificationReport, VerifyError> {
    let mut r = VerificationReport::default();
    let bd = boundary_check(u, &nu.barycenter().to_interval(), u.offset);
    r.push(
        "boundary",
        "dOmega",
        None,
        None,
        Interval::point(bd),
        Some(bd == 0.0),
    );
    let tr = trail_check(u);
    r.push(
        "trail_excess",
        "Omega",
        None,
        None,
        Interval::point(tr),
        Some(tr <= 1.0),
    );
    let mt = min_trace(u);
    r.push("min_trace", "Omega", None, None, Interval::point(mt), None);
    for (i, v) in area_fractions(u, tree, nu, eps)?.iter().enumerate() {
        r.push(
            &format!("area_atom{i}"),
            "Omega",
            None,
            None,
            v.area,
            Some(v.ok),
        );
    }
    for phi in phis {
        let total = u.domain.area();
        let got = hessian_l1(u, phi.as_ref()) / total;
        let want = nu.moment(phi.as_ref());
        r.push(
            &format!("mean:{}", phi.name()),
            "Omega",
            None,
            None,
            got,
            None,
        );
        r.push(
            &format!("moment:{}", phi.name()),
            "nu",
            None,
            None,
            want,
            None,
        );
    }
    Ok(r)
}

/// Distance between an enclosure and a target value.
pub fn deviation(got: Interval, want: Interval) -> f64 {
    (got.hi() - want.lo())
        .abs()
        .max((want.hi() - got.lo()).abs())
}

/// Level-wise checks of a staircase build.
#[derive(Clone, Debug, Serialize)]
pub struct StaircaseLevel {
    pub j: u32,
    pub sup_distance: f64,
    pub sup_bound: f64,
    /// `|Ω_j|`.
    pub measure: Interval,
    /// `|Ω_1| ∏_{m<j} 2^{−p_m}`.
    pub product: Interval,
    pub step_ok: bool,
    pub cumulative_ok: bool,
    /// Hessian mass `∫|∂11 u| + |∂22 u|` of cells added at level `j`.
    pub l1: Interval,
    pub l1_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StaircaseReport {
    pub depth: u32,
    pub levels: Vec<StaircaseLevel>,
    /// `16 C_* |Ω₁|` with `C_*` the largest `C(p_j)`.
    pub golden: f64,
    pub min_trace: f64,
    pub hessian_l1: Interval,
}

impl StaircaseReport {
    pub fn sup_ok(&self) -> bool {
        self.levels.iter().all(|l| l.sup_distance <= l.sup_bound)
    }

    pub fn measures_ok(&self) -> bool {
        self.levels.iter().all(|l| l.step_ok && l.cumulative_ok)
    }

    pub fn l1_ok(&self) -> bool {
        self.levels.iter().all(|l| l.l1.hi() <= l.l1_bound)
    }
}

/// Checks of a depth-`J` staircase: level sup-distances, the two-sided
/// region measures (per step `(1 − ε_j) 2^{−p_j} ≤ |Ω_{j+1}|/|Ω_j| ≤ 2^{−p_j} + ε_j`
/// and cumulatively within `[½, 2] · |Ω₁| ∏ 2^{−p_m}`), level Hessian
/// masses against `golden · (j+1)^{−2}`, and the minimum trace.
pub fn verify_staircase(
    schedule: &StaircaseSchedule,
    st: &Staircase,
) -> Result<StaircaseReport, VerifyError> {
    let u = &st.u;
    let sup = level_sup_distance(u);
    let l1 = hessian_l1_by_level(u, &DiagL1);
    let omega1 = st.tree.measure(1);
    let mut c_star: f64 = 0.0;
    for l in &schedule.layers {
        c_star = c_star.max(verify_lemma_n(l.two_p, Interval::ONE, 1.5)?.big_c.hi());
    }
    let golden = 16.0 * c_star * omega1.hi();
    let mut levels = Vec::new();
    let mut product = omega1;
    for j in 1..=schedule.depth {
        let layer = schedule.layer(j);
        let decay = (-layer.p).exp2();
        let (mj, next) = (st.tree.measure(j), st.tree.measure(j + 1));
        let step_ok = next.lo() >= (Interval::point(1.0 - layer.eps) * decay * mj).hi()
            && next.hi() <= ((decay + Interval::point(layer.eps)) * mj).lo();
        let cumulative_ok = mj.lo() >= (product / Interval::point(2.0)).hi()
            && mj.hi() <= (product * Interval::point(2.0)).lo();
        let bound = golden / ((j + 1) as f64).powi(2);
        levels.push(StaircaseLevel {
            j,
            sup_distance: sup.get(&j).copied().unwrap_or(0.0),
            sup_bound: (-(j as f64)).exp2(),
            measure: mj,
            product,
            step_ok,
            cumulative_ok,
            l1: l1.get(&j).copied().unwrap_or(Interval::ZERO),
            l1_bound: bound,
        });
        product = product * decay;
    }
    Ok(StaircaseReport {
        depth: schedule.depth,
        levels,
        golden,
        min_trace: min_trace(u),
        hessian_l1: hessian_l1(u, &DiagL1),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DivergenceRow {
    pub depth: u32,
    pub q: f64,
    pub i: usize,
    /// `∫_{Ω₁} (∂_ii u_J)_-^q`.
    pub value: Interval,
    /// Value minus the value at depth `J − 1`.
    pub increment: Interval,
    /// `Σ_{m<J} (q − p_m)`.
    pub exponent: Interval,
}

#[derive(Clone, Debug, Serialize)]
pub struct DivergenceTable {
    pub rows: Vec<DivergenceRow>,
    /// Least-squares slope of `log₂ increment` against the exponent, per `q`,
    /// over depths `J ≥ 2`.
    pub slopes: Vec<(f64, f64)>,
}

impl DivergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("J,q,i,value_lo,value_hi,inc_lo,inc_hi,exponent_lo,exponent_hi\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.depth,
                r.q,
                r.i,
                r.value.lo(),
                r.value.hi(),
                r.increment.lo(),
                r.increment.hi(),
                r.exponent.lo(),
                r.exponent.hi()
            );
        }
        out.push_str("q,slope\n");
        for (q, s) in &self.slopes {
            let _ = writeln!(out, "{q},{s:.17e}");
        }
        out
    }

    pub fn values(&self, q: f64) -> Vec<&DivergenceRow> {
        self.rows.iter().filter(|r| r.q == q).collect()
    }
}

/// Builds `u_J` for `J = 1..=j_max` and tabulates the negative-part masses
/// over `Ω₁` for each `q`.
pub fn lp_divergence_table(
    j_max: u32,
    q_list: &[f64],
    i: usize,
    rect: Rect,
    config: &SynthConfig,
) -> Result<DivergenceTable, VerifyError> {
    let mut builds = Vec::new();
    for j in 1..=j_max {
        let schedule = staircase_schedule(j);
        builds.push((schedule.clone(), staircase_build(&schedule, rect, config)?));
    }
    let full = staircase_schedule(j_max);
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for &q in q_list {
        let mut prev = Interval::ZERO;
        let mut pts = Vec::new();
        for (schedule, st) in &builds {
            let depth = schedule.depth;
            let value = neg_part_lq_in(&st.u, i, q, 1)?;
            let increment = value - prev;
            prev = value;
            let exponent: Interval = full.layers[..depth as usize - 1]
                .iter()
                .map(|l| Interval::point(q) - l.p)
                .sum();
            if depth >= 2 && increment.lo() > 0.0 {
                pts.push((exponent.mid(), increment.mid().log2()));
            }
            rows.push(DivergenceRow {
                depth,
                q,
                i,
                value,
                increment,
                exponent,
            });
        }
        slopes.push((q, fit_slope(&pts)));
    }
    Ok(DivergenceTable { rows, slopes })
}

/// Least-squares slope; `NaN` with fewer than two points.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
