//! Points, box domains and evaluable objectives.
//!
//! Every evaluation goes through [`ObjectiveSpec::evaluate`] or
//! [`ObjectiveSpec::gradient`], which take a caller-owned [`EvalCounter`].
//! No counting state lives inside the objective itself, so a single
//! objective can be shared across threads and across independent runs.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Deref, Sub};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point (or direction) in `R^p`. All coordinates are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::usage("vector must have at least one coordinate"));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::usage(format!(
                "non-finite coordinate {bad} in {coords:?}"
            )));
        }
        Ok(Vector(coords))
    }

    /// Skips validation; for results of arithmetic on already-valid vectors.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Vector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// `self + lambda * dir`
    pub fn step(&self, lambda: f64, dir: &[f64]) -> Vector {
        Vector(
            self.0
                .iter()
                .zip(dir)
                .map(|(x, d)| x + lambda * d)
                .collect(),
        )
    }

    pub fn negated(&self) -> Vector {
        Vector(self.0.iter().map(|v| -v).collect())
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Lexicographic order on coordinates, using IEEE total order per entry.
    pub fn lex_cmp(&self, other: &Vector) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;
    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Vector::new(coords)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Axis-aligned box `lower[i] <= x[i] <= upper[i]` with `lower[i] < upper[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoxDomain {
    lower: Vector,
    upper: Vector,
}

#[derive(Deserialize)]
struct RawBox {
    lower: Vector,
    upper: Vector,
}

impl TryFrom<RawBox> for BoxDomain {
    type Error = Error;
    fn try_from(raw: RawBox) -> Result<Self> {
        BoxDomain::new(raw.lower, raw.upper)
    }
}

impl BoxDomain {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.dim() != upper.dim() {
            return Err(Error::usage(format!(
                "box bounds have different lengths ({} vs {})",
                lower.dim(),
                upper.dim()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(upper.iter()).enumerate() {
            if lo >= hi {
                return Err(Error::usage(format!(
                    "box axis {i} is empty or degenerate: [{lo}, {hi}]"
                )));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        BoxDomain::new(Vector::new(vec![lo; dim])?, Vector::new(vec![hi; dim])?)
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let (lo, hi): (Vec<f64>, Vec<f64>) = bounds.iter().copied().unzip();
        BoxDomain::new(Vector::new(lo)?, Vector::new(hi)?)
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn contains_box(&self, other: &BoxDomain) -> bool {
        self.contains(&other.lower) && self.contains(&other.upper)
    }

    /// Component-wise projection onto the box.
    ///
    /// Panics if `x` has the wrong dimension.
    pub fn clamp(&self, x: &[f64]) -> Vector {
        assert_eq!(x.len(), self.dim(), "clamp: dimension mismatch");
        Vector(
            x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect(),
        )
    }

    /// Largest `t >= 0` with `x + t * dir` still inside the box.
    ///
    /// Zero when `x` already sits on a face that `dir` points out of;
    /// infinite when `dir` is the zero vector.
    pub fn max_step_along(&self, x: &[f64], dir: &[f64]) -> f64 {
        let mut t_max = f64::INFINITY;
        for i in 0..self.dim() {
            let d = dir[i];
            let t = if d > 0.0 {
                (self.upper[i] - x[i]) / d
            } else if d < 0.0 {
                (self.lower[i] - x[i]) / d
            } else {
                continue;
            };
            t_max = t_max.min(t.max(0.0));
        }
        t_max
    }

    /// Uniform sample from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        Vector(
            self.lower
                .iter()
                .zip(self.upper.iter())
                .map(|(lo, hi)| rng.gen_range(*lo..=*hi))
                .collect(),
        )
    }
}

/// Component-wise clamp of `x` into `domain`.
pub fn clamp_to_box(x: &Vector, domain: &BoxDomain) -> Result<Vector> {
    if x.dim() != domain.dim() {
        return Err(Error::usage(format!(
            "point has dimension {}, box has {}",
            x.dim(),
            domain.dim()
        )));
    }
    Ok(domain.clamp(x))
}

/// Caller-owned evaluation counters. Safe to share across threads.
#[derive(Debug, Default)]
pub struct EvalCounter {
    f_calls: AtomicU64,
    grad_calls: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub f_calls: u64,
    pub grad_calls: u64,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> EvalCounts {
        EvalCounts {
            f_calls: self.f_calls.load(AtomicOrdering::Relaxed),
            grad_calls: self.grad_calls.load(AtomicOrdering::Relaxed),
        }
    }

    fn bump_f(&self, n: u64) {
        self.f_calls.fetch_add(n, AtomicOrdering::Relaxed);
    }

    fn bump_grad(&self) {
        self.grad_calls.fetch_add(1, AtomicOrdering::Relaxed);
    }
}

impl Sub for EvalCounts {
    type Output = EvalCounts;
    fn sub(self, rhs: EvalCounts) -> EvalCounts {
        EvalCounts {
            f_calls: self.f_calls - rhs.f_calls,
            grad_calls: self.grad_calls - rhs.grad_calls,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    Analytic,
    CentralDifference,
}

/// How gradients are obtained.
///
/// Central differences use the per-axis step `fd_step_scale * (1 + |x_i|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientMethod {
    pub mode: GradientMode,
    pub fd_step_scale: f64,
}

impl Default for GradientMethod {
    fn default() -> Self {
        GradientMethod::analytic()
    }
}

impl GradientMethod {
    pub fn analytic() -> Self {
        GradientMethod {
            mode: GradientMode::Analytic,
            fd_step_scale: f64::EPSILON.sqrt(),
        }
    }

    pub fn central_difference() -> Self {
        GradientMethod {
            mode: GradientMode::CentralDifference,
            ..GradientMethod::analytic()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fd_step_scale > 0.0 && self.fd_step_scale.is_finite()) {
            return Err(Error::usage(format!(
                "fd_step_scale must be positive, got {}",
                self.fd_step_scale
            )));
        }
        Ok(())
    }
}

pub type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type GradientFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A scalar field over a box, with an optional analytic gradient.
#[derive(Clone)]
pub struct ObjectiveSpec {
    name: String,
    domain: BoxDomain,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradientFn>>,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("dimension", &self.dimension())
            .field("domain", &self.domain)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ObjectiveSpec {
    pub fn new<F>(name: impl Into<String>, domain: BoxDomain, value: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ObjectiveSpec {
            name: name.into(),
            domain,
            value: Arc::new(value),
            gradient: None,
        }
    }

    /// Attaches an analytic gradient writing `∇f(x)` into the output slice.
    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same field on a different box of the same dimension.
    pub fn with_domain(mut self, domain: BoxDomain) -> Result<Self> {
        if domain.dim() != self.dimension() {
            return Err(Error::usage(format!(
                "objective `{}` has dimension {}, box override has {}",
                self.name,
                self.dimension(),
                domain.dim()
            )));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::usage(format!(
                "objective `{}` expects dimension {}, got {}",
                self.name,
                self.dimension(),
                x.len()
            )));
        }
        Ok(())
    }

    /// `f(x)`, counted as one function call.
    pub fn evaluate(&self, x: &[f64], counter: &EvalCounter) -> Result<f64> {
        self.check_dim(x)?;
        counter.bump_f(1);
        let value = (self.value)(x);
        if !value.is_finite() {
            return Err(Error::NumericDomain {
                point: x.to_vec(),
                value,
            });
        }
        Ok(value)
    }

    /// `∇f(x)` by the requested method.
    ///
    /// Central differences cost `2p` function calls on top of the single
    /// gradient call that is recorded.
    pub fn gradient(
        &self,
        x: &[f64],
        method: GradientMethod,
        counter: &EvalCounter,
    ) -> Result<Vector> {
        self.check_dim(x)?;
        let mut out = vec![0.0; x.len()];
        match method.mode {
            GradientMode::Analytic => {
                let grad = self.gradient.as_ref().ok_or_else(|| {
                    Error::usage(format!(
                        "objective `{}` has no analytic gradient; use central differences",
                        self.name
                    ))
                })?;
                counter.bump_grad();
                grad(x, &mut out);
            }
            GradientMode::CentralDifference => {
                method.validate()?;
                counter.bump_grad();
                let mut probe = x.to_vec();
                for i in 0..x.len() {
                    let h = method.fd_step_scale * (1.0 + x[i].abs());
                    probe[i] = x[i] + h;
                    let forward_x = probe[i];
                    let forward = self.evaluate(&probe, counter)?;
                    probe[i] = x[i] - h;
                    let backward_x = probe[i];
                    let backward = self.evaluate(&probe, counter)?;
                    probe[i] = x[i];
                    out[i] = (forward - backward) / (forward_x - backward_x);
                }
            }
        }
        if let Some(bad) = out.iter().find(|g| !g.is_finite()) {
            return Err(Error::NumericDomain {
                point: x.to_vec(),
                value: *bad,
            });
        }
        Ok(Vector::from_raw(out))
    }

    /// Compares the analytic gradient against central differences.
    ///
    /// The error at each point is `‖g_analytic − g_fd‖ / max(‖g_analytic‖, 1)`.
    pub fn gradient_check(&self, points: &[Vector], rel_tol: f64) -> Result<CheckReport> {
        if !self.has_gradient() {
            return Err(Error::usage(format!(
                "objective `{}` has no analytic gradient to check",
                self.name
            )));
        }
        let counter = EvalCounter::new();
        let mut checks = Vec::with_capacity(points.len());
        for x in points {
            let analytic = self.gradient(x, GradientMethod::analytic(), &counter)?;
            let numeric = self.gradient(x, GradientMethod::central_difference(), &counter)?;
            let diff: Vec<f64> = analytic
                .iter()
                .zip(numeric.iter())
                .map(|(a, b)| a - b)
                .collect();
            let rel_error = norm(&diff) / analytic.norm().max(1.0);
            checks.push(PointCheck {
                x: x.clone(),
                analytic,
                numeric,
                rel_error,
            });
        }
        let max_rel_error = checks.iter().map(|c| c.rel_error).fold(0.0, f64::max);
        Ok(CheckReport {
            objective: self.name.clone(),
            rel_tol,
            max_rel_error,
            passed: checks.iter().all(|c| c.rel_error <= rel_tol),
            checks,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointCheck {
    pub x: Vector,
    pub analytic: Vector,
    pub numeric: Vector,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub objective: String,
    pub rel_tol: f64,
    pub max_rel_error: f64,
    pub passed: bool,
    pub checks: Vec<PointCheck>,
}
