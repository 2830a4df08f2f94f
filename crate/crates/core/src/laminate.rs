//! Laminates of finite order: finitely supported probability measures on
//! `Sym(2)` built from a Dirac mass by elementary splittings.
//!
//! JSON form (all scalars are `"n/d"` strings in rational mode and
//! `{"lo": f64, "hi": f64}` objects in interval mode):
//!
//! ```text
//! {
//!   "atoms":   [{"weight": S, "matrix": {"a11": S, "a12": S, "a22": S}}, ...],
//!   "trail":   [{"b": Mat, "c": Mat}, ...],
//!   "history": {"root": Mat, "splits": [{"parent": Mat, "b": Mat, "c": Mat,
//!                                        "s": S, "lambda": S, "stage": u32}, ...]}
//! }
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrand::Integrand;
use crate::interval::Interval;
use crate::scalar::{Rational, Scalar, Sign};
use crate::sym2::{Axis, SymMat2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Atom<S> {
    pub weight: S,
    pub matrix: SymMat2<S>,
}

/// A rank-one segment `[b, c]` used by some splitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TrailPair<S> {
    pub b: SymMat2<S>,
    pub c: SymMat2<S>,
}

/// One elementary splitting `parent = s·b + (1−s)·c`, applied to a fraction
/// `lambda` of the parent's mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SplitRecord<S> {
    pub parent: SymMat2<S>,
    pub b: SymMat2<S>,
    pub c: SymMat2<S>,
    pub s: S,
    pub lambda: S,
    /// Construction stage the split belongs to (0 when unused).
    #[serde(default)]
    pub stage: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SplitTree<S> {
    pub root: SymMat2<S>,
    pub splits: Vec<SplitRecord<S>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Laminate<S> {
    pub atoms: Vec<Atom<S>>,
    pub trail: Vec<TrailPair<S>>,
    pub history: SplitTree<S>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaminateError {
    #[error("no atom at index {0}")]
    NoSuchAtom(usize),
    #[error("barycenter mismatch: {parent} != s*{b} + (1-s)*{c}")]
    BarycenterMismatch {
        parent: String,
        b: String,
        c: String,
    },
    #[error("rank violation: {b} - {c} is not rank one")]
    RankViolation { b: String, c: String },
    #[error("weight {name} = {value} outside {range}")]
    WeightOutOfRange {
        name: &'static str,
        value: String,
        range: &'static str,
    },
    #[error("no atom equals the split parent {0}")]
    MissingParent(String),
}

fn show<S: Scalar>(m: &SymMat2<S>) -> String {
    format!("[{:?}, {:?}; {:?}]", m.a11, m.a12, m.a22)
}

/// Check `s ∈ (0,1)`, `λ ∈ (0,1]`, the barycenter identity and the rank-one
/// condition for a single splitting.
pub fn check_split<S: Scalar>(
    parent: &SymMat2<S>,
    b: &SymMat2<S>,
    c: &SymMat2<S>,
    s: &S,
    lambda: &S,
) -> Result<(), LaminateError> {
    let one = S::one();
    if !(s.is_certainly_positive() && (one.clone() - s.clone()).is_certainly_positive()) {
        return Err(LaminateError::WeightOutOfRange {
            name: "s",
            value: format!("{s:?}"),
            range: "(0, 1)",
        });
    }
    if !(lambda.is_certainly_positive() && (one.clone() - lambda.clone()).is_certainly_nonneg()) {
        return Err(LaminateError::WeightOutOfRange {
            name: "lambda",
            value: format!("{lambda:?}"),
            range: "(0, 1]",
        });
    }
    let bary = b.scale(s) + c.scale(&(one - s.clone()));
    if !bary.possibly_equal(parent) {
        return Err(LaminateError::BarycenterMismatch {
            parent: show(parent),
            b: show(b),
            c: show(c),
        });
    }
    match b.rank_one_connected(c) {
        Ok(Some(_)) => Ok(()),
        _ => Err(LaminateError::RankViolation {
            b: show(b),
            c: show(c),
        }),
    }
}

impl<S: Scalar> Laminate<S> {
    pub fn dirac(x: SymMat2<S>) -> Self {
        Laminate {
            atoms: vec![Atom {
                weight: S::one(),
                matrix: x.clone(),
            }],
            trail: Vec::new(),
            history: SplitTree {
                root: x,
                splits: Vec::new(),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn find(&self, x: &SymMat2<S>) -> Option<usize> {
        self.atoms.iter().position(|a| a.matrix.possibly_equal(x))
    }

    pub fn weight_of(&self, x: &SymMat2<S>) -> S {
        self.find(x)
            .map(|i| self.atoms[i].weight.clone())
            .unwrap_or_else(S::zero)
    }

    fn add_mass(&mut self, x: &SymMat2<S>, w: S) {
        match self.find(x) {
            Some(i) => {
                let a = &mut self.atoms[i];
                a.weight = a.weight.clone() + w;
            }
            None => self.atoms.push(Atom {
                weight: w,
                matrix: x.clone(),
            }),
        }
    }

    /// Replace a fraction `lambda` of atom `i` by `s δ_b + (1−s) δ_c`.
    pub fn split(
        &self,
        i: usize,
        b: SymMat2<S>,
        c: SymMat2<S>,
        s: S,
        lambda: S,
    ) -> Result<Self, LaminateError> {
        self.split_staged(i, b, c, s, lambda, 0)
    }

    pub fn split_staged(
        &self,
        i: usize,
        b: SymMat2<S>,
        c: SymMat2<S>,
        s: S,
        lambda: S,
        stage: u32,
    ) -> Result<Self, LaminateError> {
        let atom = self
            .atoms
            .get(i)
            .ok_or(LaminateError::NoSuchAtom(i))?
            .clone();
        check_split(&atom.matrix, &b, &c, &s, &lambda)?;
        let mut out = self.clone();
        let moved = atom.weight.clone() * lambda.clone();
        let rest = atom.weight.clone() - moved.clone();
        if rest.sign() == Sign::Zero || (S::one() - lambda.clone()).sign() == Sign::Zero {
            out.atoms.remove(i);
        } else {
            out.atoms[i].weight = rest;
        }
        out.add_mass(&b, moved.clone() * s.clone());
        out.add_mass(&c, moved * (S::one() - s.clone()));
        let pair = TrailPair {
            b: b.clone(),
            c: c.clone(),
        };
        let known = out.trail.iter().any(|t| {
            (t.b.possibly_equal(&b) && t.c.possibly_equal(&c))
                || (t.b.possibly_equal(&c) && t.c.possibly_equal(&b))
        });
        if !known {
            out.trail.push(pair);
        }
        out.history.splits.push(SplitRecord {
            parent: atom.matrix,
            b,
            c,
            s,
            lambda,
            stage,
        });
        Ok(out)
    }

    /// Split the atom equal to `parent`.
    pub fn split_matrix(
        &self,
        parent: &SymMat2<S>,
        b: SymMat2<S>,
        c: SymMat2<S>,
        s: S,
        lambda: S,
        stage: u32,
    ) -> Result<Self, LaminateError> {
        let i = self
            .find(parent)
            .ok_or_else(|| LaminateError::MissingParent(show(parent)))?;
        self.split_staged(i, b, c, s, lambda, stage)
    }

    pub fn total_mass(&self) -> S {
        self.atoms
            .iter()
            .fold(S::zero(), |acc, a| acc + a.weight.clone())
    }

    pub fn barycenter(&self) -> SymMat2<S> {
        self.atoms
            .iter()
            .fold(SymMat2::zero(), |acc, a| acc + a.matrix.scale(&a.weight))
    }

    /// `∫ Φ dν` as a certified enclosure.
    pub fn moment(&self, phi: &dyn Integrand) -> Interval {
        self.atoms
            .iter()
            .map(|a| a.weight.to_interval() * phi.eval(&a.matrix.to_interval()))
            .sum()
    }

    /// `∫ f dν` for a scalar-valued map in the laminate's own scalar mode.
    pub fn moment_with<F: Fn(&SymMat2<S>) -> S>(&self, f: F) -> S {
        self.atoms
            .iter()
            .fold(S::zero(), |acc, a| acc + a.weight.clone() * f(&a.matrix))
    }

    pub fn to_interval(&self) -> Laminate<Interval> {
        let m = |x: &SymMat2<S>| x.to_interval();
        Laminate {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    weight: a.weight.to_interval(),
                    matrix: m(&a.matrix),
                })
                .collect(),
            trail: self
                .trail
                .iter()
                .map(|t| TrailPair {
                    b: m(&t.b),
                    c: m(&t.c),
                })
                .collect(),
            history: SplitTree {
                root: m(&self.history.root),
                splits: self
                    .history
                    .splits
                    .iter()
                    .map(|r| SplitRecord {
                        parent: m(&r.parent),
                        b: m(&r.b),
                        c: m(&r.c),
                        s: r.s.to_interval(),
                        lambda: r.lambda.to_interval(),
                        stage: r.stage,
                    })
                    .collect(),
            },
        }
    }

    /// Axis of every trail direction when all of them are coordinate axes.
    pub fn trail_axes(&self) -> Option<Vec<Axis>> {
        self.trail
            .iter()
            .map(|t| {
                t.b.rank_one_connected(&t.c)
                    .ok()
                    .flatten()
                    .and_then(|r| r.axis)
            })
            .collect()
    }

    /// Re-check every invariant and replay the history from the root.
    pub fn validate(&self) -> ValidationReport {
        let mut failures = Vec::new();
        for (i, a) in self.atoms.iter().enumerate() {
            if !a.weight.is_certainly_positive() {
                failures.push(format!("atom {i}: weight {:?} not positive", a.weight));
            }
        }
        let mass = self.total_mass();
        let defect = (S::one() - mass.clone()).to_interval();
        if !mass.possibly_equal(&S::one()) {
            failures.push(format!("total mass {mass:?} != 1"));
        }
        for (i, t) in self.trail.iter().enumerate() {
            if !matches!(t.b.rank_one_connected(&t.c), Ok(Some(_))) {
                failures.push(format!(
                    "trail pair {i}: {} - {} not rank one",
                    show(&t.b),
                    show(&t.c)
                ));
            }
        }
        let mut replay = Laminate::dirac(self.history.root.clone());
        let mut first_bad_node = None;
        for (k, r) in self.history.splits.iter().enumerate() {
            match replay.split_matrix(
                &r.parent,
                r.b.clone(),
                r.c.clone(),
                r.s.clone(),
                r.lambda.clone(),
                r.stage,
            ) {
                Ok(next) => replay = next,
                Err(e) => {
                    failures.push(format!("split {k}: {e}"));
                    first_bad_node = Some(k);
                    break;
                }
            }
        }
        if first_bad_node.is_none() && !same_atoms(&replay.atoms, &self.atoms) {
            failures.push("atoms differ from the replayed history".to_string());
        }
        ValidationReport {
            ok: failures.is_empty(),
            mass_defect: defect,
            first_bad_node,
            failures,
        }
    }

    /// Nested form of the history for realization.
    pub fn plan(&self) -> PlanNode<S> {
        let mut root = PlanNode::Leaf(self.history.root.clone());
        for r in &self.history.splits {
            root.apply(r);
        }
        root
    }
}

fn same_atoms<S: Scalar>(a: &[Atom<S>], b: &[Atom<S>]) -> bool {
    a.len() == b.len()
        && a.iter().all(|x| {
            b.iter()
                .any(|y| y.matrix.possibly_equal(&x.matrix) && y.weight.possibly_equal(&x.weight))
        })
}

impl Laminate<Rational> {
    /// Exact `∫ Φ dν` when `Φ` is rational on every atom.
    pub fn moment_exact(&self, phi: &dyn Integrand) -> Option<Rational> {
        let mut acc = Rational::zero();
        for a in &self.atoms {
            acc = acc + a.weight.clone() * phi.eval_exact(&a.matrix)?;
        }
        Some(acc)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub mass_defect: Interval,
    /// Index of the first split that fails to replay.
    pub first_bad_node: Option<usize>,
    pub failures: Vec<String>,
}

/// Realization tree: a leaf carries its matrix; a split node sends a fraction
/// `lambda` of its region to `s δ_b + (1−s) δ_c` and keeps the rest in `rest`.
#[derive(Clone, Debug, PartialEq)]
pub enum PlanNode<S> {
    Leaf(SymMat2<S>),
    Split {
        matrix: SymMat2<S>,
        s: S,
        lambda: S,
        stage: u32,
        b: Box<PlanNode<S>>,
        c: Box<PlanNode<S>>,
        rest: Option<Box<PlanNode<S>>>,
    },
}

impl<S: Scalar> PlanNode<S> {
    pub fn matrix(&self) -> &SymMat2<S> {
        match self {
            PlanNode::Leaf(m) => m,
            PlanNode::Split { matrix, .. } => matrix,
        }
    }

    fn apply(&mut self, r: &SplitRecord<S>) {
        match self {
            PlanNode::Leaf(m) if m.possibly_equal(&r.parent) => {
                let full = (S::one() - r.lambda.clone()).sign() == Sign::Zero;
                *self = PlanNode::Split {
                    matrix: m.clone(),
                    s: r.s.clone(),
                    lambda: r.lambda.clone(),
                    stage: r.stage,
                    b: Box::new(PlanNode::Leaf(r.b.clone())),
                    c: Box::new(PlanNode::Leaf(r.c.clone())),
                    rest: if full {
                        None
                    } else {
                        Some(Box::new(PlanNode::Leaf(m.clone())))
                    },
                };
            }
            PlanNode::Leaf(_) => {}
            PlanNode::Split { b, c, rest, .. } => {
                // the new children of this record never equal its parent, so
                // applying in place cannot cascade
                b.apply(r);
                c.apply(r);
                if let Some(rest) = rest {
                    rest.apply(r);
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            PlanNode::Leaf(_) => 0,
            PlanNode::Split { b, c, rest, .. } => {
                1 + b
                    .depth()
                    .max(c.depth())
                    .max(rest.as_ref().map_or(0, |r| r.depth().saturating_sub(1)))
            }
        }
    }

    /// Flatten back to `(weight, matrix)` pairs.
    pub fn leaves(&self) -> Vec<(S, SymMat2<S>)> {
        let mut out = Vec::new();
        self.collect(S::one(), &mut out);
        out
    }

    fn collect(&self, w: S, out: &mut Vec<(S, SymMat2<S>)>) {
        match self {
            PlanNode::Leaf(m) => out.push((w, m.clone())),
            PlanNode::Split {
                s,
                lambda,
                b,
                c,
                rest,
                ..
            } => {
                let moved = w.clone() * lambda.clone();
                b.collect(moved.clone() * s.clone(), out);
                c.collect(moved * (S::one() - s.clone()), out);
                if let Some(rest) = rest {
                    rest.collect(w * (S::one() - lambda.clone()), out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn m(a: i64, b: i64, c: i64) -> SymMat2<Rational> {
        SymMat2::from_ints(a, b, c)
    }

    #[test]
    fn simple_split_keeps_mass_and_barycenter() {
        let nu = Laminate::dirac(m(0, 0, 0));
        let nu = nu
            .split(0, m(1, 0, 0), m(-1, 0, 0), q(1, 2), q(1, 1))
            .unwrap();
        assert_eq!(nu.len(), 2);
        assert_eq!(nu.total_mass(), Rational::one());
        assert_eq!(nu.barycenter(), m(0, 0, 0));
        assert!(nu.validate().ok);
    }

    #[test]
    fn partial_split_keeps_parent() {
        let nu = Laminate::dirac(m(0, 0, 0));
        let nu = nu
            .split(0, m(1, 0, 0), m(-1, 0, 0), q(1, 2), q(1, 3))
            .unwrap();
        assert_eq!(nu.weight_of(&m(0, 0, 0)), q(2, 3));
        assert_eq!(nu.weight_of(&m(1, 0, 0)), q(1, 6));
        let plan = nu.plan();
        assert_eq!(plan.leaves().len(), 3);
    }

    #[test]
    fn rejects_bad_splits() {
        let nu = Laminate::dirac(m(0, 0, 0));
        let e = nu
            .split(0, m(1, 0, 1), m(-1, 0, -1), q(1, 2), q(1, 1))
            .unwrap_err();
        assert!(matches!(e, LaminateError::RankViolation { .. }));
        let e = nu
            .split(0, m(2, 0, 0), m(-1, 0, 0), q(1, 2), q(1, 1))
            .unwrap_err();
        assert!(matches!(e, LaminateError::BarycenterMismatch { .. }));
        let e = nu
            .split(0, m(1, 0, 0), m(-1, 0, 0), q(1, 2), q(0, 1))
            .unwrap_err();
        assert!(matches!(
            e,
            LaminateError::WeightOutOfRange { name: "lambda", .. }
        ));
        let e = nu
            .split(0, m(1, 0, 0), m(-1, 0, 0), q(1, 1), q(1, 1))
            .unwrap_err();
        assert!(matches!(
            e,
            LaminateError::WeightOutOfRange { name: "s", .. }
        ));
    }

    #[test]
    fn merges_equal_atoms() {
        let nu = Laminate::dirac(m(0, 0, 0));
        let nu = nu
            .split(0, m(1, 0, 0), m(-1, 0, 0), q(1, 2), q(1, 1))
            .unwrap();
        // −1 = ½·1 + ½·(−3) lands half its mass on the existing atom 1
        let j = nu.find(&m(-1, 0, 0)).unwrap();
        let nu = nu
            .split(j, m(1, 0, 0), m(-3, 0, 0), q(1, 2), q(1, 1))
            .unwrap();
        assert_eq!(nu.len(), 2);
        assert_eq!(nu.weight_of(&m(1, 0, 0)), q(3, 4));
        assert!(nu.validate().ok);
        assert_eq!(nu.trail.len(), 2);
    }

    #[test]
    fn tampered_weights_fail_validation() {
        let nu = Laminate::dirac(m(0, 0, 0));
        let mut nu = nu
            .split(0, m(1, 0, 0), m(-1, 0, 0), q(1, 2), q(1, 1))
            .unwrap();
        nu.atoms[0].weight = q(1, 3);
        let r = nu.validate();
        assert!(!r.ok);
        assert!(r.mass_defect.contains(1.0 / 6.0));
    }

    #[test]
    fn json_round_trip() {
        let nu = Laminate::dirac(m(0, 0, 0));
        let nu = nu
            .split(0, m(2, 0, 0), m(-1, 0, 0), q(1, 3), q(1, 1))
            .unwrap();
        let j = serde_json::to_string(&nu).unwrap();
        assert!(j.contains("\"1/3\""));
        let back: Laminate<Rational> = serde_json::from_str(&j).unwrap();
        assert_eq!(back, nu);
    }
}
