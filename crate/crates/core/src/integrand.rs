//! Integrands `Φ: Sym(2) → ℝ` used for laminate moments and Hessian functionals.
//!
//! Every built-in integrand has a certified interval evaluation and is
//! registered by name in [`IntegrandRegistry`], so callers (the CLI, the
//! verifier, the acceptance suite) pick them at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::interval::Interval;
use crate::scalar::{Rational, Scalar};
use crate::sym2::SymMat2;

pub trait Integrand: Send + Sync {
    fn name(&self) -> String;

    /// Certified enclosure of `Φ` over every matrix in the box `x`.
    fn eval(&self, x: &SymMat2<Interval>) -> Interval;

    /// Exact value on a rational matrix, when `Φ` stays rational.
    fn eval_exact(&self, _x: &SymMat2<Rational>) -> Option<Rational> {
        None
    }

    /// Whether `eval` is a certified enclosure rather than an estimate.
    fn certified(&self) -> bool {
        true
    }
}

impl fmt::Debug for dyn Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Integrand({})", self.name())
    }
}

/// `|X|` (Frobenius norm).
pub struct Frobenius;

/// `|x11| + |x22|`.
pub struct DiagL1;

/// `Σ_ij |x_ij|`, off-diagonal counted twice.
pub struct EntryL1;

/// `tr X`.
pub struct Trace;

/// `((x_ii)_-)^q` for a diagonal index `i`.
#[derive(Clone, Copy, Debug)]
pub struct NegPartPow {
    pub index: usize,
    pub q: f64,
}

impl Integrand for Frobenius {
    fn name(&self) -> String {
        "frobenius".into()
    }

    fn eval(&self, x: &SymMat2<Interval>) -> Interval {
        let two = Interval::point(2.0);
        (x.a11.sqr() + two * x.a12.sqr() + x.a22.sqr()).sqrt()
    }

    fn eval_exact(&self, x: &SymMat2<Rational>) -> Option<Rational> {
        x.frobenius_sq().try_sqrt()
    }
}

impl Integrand for DiagL1 {
    fn name(&self) -> String {
        "diag-l1".into()
    }

    fn eval(&self, x: &SymMat2<Interval>) -> Interval {
        x.a11.abs() + x.a22.abs()
    }

    fn eval_exact(&self, x: &SymMat2<Rational>) -> Option<Rational> {
        Some(x.a11.abs() + x.a22.abs())
    }
}

impl Integrand for EntryL1 {
    fn name(&self) -> String {
        "entry-l1".into()
    }

    fn eval(&self, x: &SymMat2<Interval>) -> Interval {
        x.a11.abs() + Interval::point(2.0) * x.a12.abs() + x.a22.abs()
    }

    fn eval_exact(&self, x: &SymMat2<Rational>) -> Option<Rational> {
        Some(x.a11.abs() + x.a12.abs() * Rational::integer(2) + x.a22.abs())
    }
}

impl Integrand for Trace {
    fn name(&self) -> String {
        "trace".into()
    }

    fn eval(&self, x: &SymMat2<Interval>) -> Interval {
        x.a11 + x.a22
    }

    fn eval_exact(&self, x: &SymMat2<Rational>) -> Option<Rational> {
        Some(x.a11.clone() + x.a22.clone())
    }
}

impl NegPartPow {
    pub fn new(index: usize, q: f64) -> Self {
        assert!(index < 2, "diagonal index must be 0 or 1");
        assert!(q >= 1.0, "exponent below 1");
        NegPartPow { index, q }
    }
}

impl Integrand for NegPartPow {
    fn name(&self) -> String {
        format!("neg{}{}:{}", self.index + 1, self.index + 1, self.q)
    }

    fn eval(&self, x: &SymMat2<Interval>) -> Interval {
        x.diag_entry(self.index).neg_part().powf(self.q)
    }

    fn eval_exact(&self, x: &SymMat2<Rational>) -> Option<Rational> {
        let v = x.diag_entry(self.index);
        let neg = v.neg_part();
        if self.q.fract() == 0.0 && self.q <= 16.0 {
            Some(neg.pow(self.q as u32))
        } else if neg.is_zero() {
            Some(Rational::zero())
        } else {
            None
        }
    }
}

/// Best-effort wrapper around an arbitrary closure on midpoints.
pub struct FnIntegrand<F> {
    name: String,
    f: F,
}

impl<F: Fn([[f64; 2]; 2]) -> f64 + Send + Sync> FnIntegrand<F> {
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnIntegrand {
            name: name.into(),
            f,
        }
    }
}

impl<F: Fn([[f64; 2]; 2]) -> f64 + Send + Sync> Integrand for FnIntegrand<F> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn eval(&self, x: &SymMat2<Interval>) -> Interval {
        Interval::point((self.f)(x.midpoint()))
    }

    fn certified(&self) -> bool {
        false
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum IntegrandError {
    #[error("unknown integrand `{0}`; known: {1}")]
    Unknown(String, String),
    #[error("integrand `{0}` needs an exponent q")]
    MissingExponent(String),
    #[error("exponent q = {0} outside [1, 2)")]
    ExponentRange(f64),
}

type Factory = fn(Option<f64>) -> Result<Arc<dyn Integrand>, IntegrandError>;

/// Name → constructor table for integrands.
pub struct IntegrandRegistry {
    factories: BTreeMap<&'static str, Factory>,
}

fn neg_part_factory(
    index: usize,
    name: &'static str,
    q: Option<f64>,
) -> Result<Arc<dyn Integrand>, IntegrandError> {
    let q = q.ok_or_else(|| IntegrandError::MissingExponent(name.to_string()))?;
    if !(1.0..2.0).contains(&q) {
        return Err(IntegrandError::ExponentRange(q));
    }
    Ok(Arc::new(NegPartPow::new(index, q)))
}

impl IntegrandRegistry {
    pub fn empty() -> Self {
        IntegrandRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// The six built-in integrands with certified evaluation.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("frobenius", |_| Ok(Arc::new(Frobenius)));
        r.register("diag-l1", |_| Ok(Arc::new(DiagL1)));
        r.register("entry-l1", |_| Ok(Arc::new(EntryL1)));
        r.register("trace", |_| Ok(Arc::new(Trace)));
        r.register("neg11", |q| neg_part_factory(0, "neg11", q));
        r.register("neg22", |q| neg_part_factory(1, "neg22", q));
        r
    }

    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    /// Resolve `name` (optionally `name:q`, e.g. `neg22:1.5`).
    pub fn resolve(
        &self,
        spec: &str,
        q: Option<f64>,
    ) -> Result<Arc<dyn Integrand>, IntegrandError> {
        let (name, q) = match spec.split_once(':') {
            Some((n, qs)) => (n, qs.parse::<f64>().ok().or(q)),
            None => (spec, q),
        };
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| IntegrandError::Unknown(name.to_string(), self.names().join(", ")))?;
        factory(q)
    }

    /// One instance of every built-in, with neg-part exponent `q`.
    pub fn all_with(&self, q: f64) -> Vec<Arc<dyn Integrand>> {
        self.names()
            .into_iter()
            .filter_map(|n| self.resolve(n, Some(q)).ok())
            .collect()
    }
}

impl Default for IntegrandRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
