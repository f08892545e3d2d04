//! Local minimization by projected steepest descent.
//!
//! Each iteration moves along `d = −∇f(x)` with a step chosen either by
//! Armijo backtracking or by a golden-section search of `λ ↦ f(x + λd)`
//! over the part of the ray that stays in the box. Trial points are clamped
//! to the objective's domain before they are evaluated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{dot, EvalCounter, EvalCounts, GradientMethod, ObjectiveSpec, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineSearchMode {
    Armijo,
    ExactSectioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearchParams {
    /// Sufficient-decrease constant, in (0, 1).
    pub c1: f64,
    /// Backtracking factor, in (0, 1).
    pub shrink: f64,
    /// First trial step.
    pub lambda0: f64,
    pub max_backtracks: usize,
    pub mode: LineSearchMode,
    /// Final bracket width of the golden-section search.
    pub section_tol: f64,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        LineSearchParams {
            c1: 1e-4,
            shrink: 0.5,
            lambda0: 1.0,
            max_backtracks: 60,
            mode: LineSearchMode::Armijo,
            section_tol: 1e-10,
        }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return Err(Error::usage(format!(
                "c1 must lie in (0, 1), got {}",
                self.c1
            )));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::usage(format!(
                "shrink must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(Error::usage(format!(
                "lambda0 must be positive, got {}",
                self.lambda0
            )));
        }
        if self.max_backtracks == 0 {
            return Err(Error::usage("max_backtracks must be at least 1"));
        }
        if !(self.section_tol > 0.0) {
            return Err(Error::usage(format!(
                "section_tol must be positive, got {}",
                self.section_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentParams {
    /// Stop once `‖∇f‖` falls to this value.
    pub grad_tol: f64,
    /// Stop once one accepted step lowers `f` by no more than this.
    pub f_tol: f64,
    pub max_iters: usize,
    pub line_search: LineSearchParams,
    pub gradient: GradientMethod,
}

impl Default for DescentParams {
    fn default() -> Self {
        DescentParams {
            grad_tol: 1e-6,
            f_tol: 1e-10,
            max_iters: 10_000,
            line_search: LineSearchParams::default(),
            gradient: GradientMethod::default(),
        }
    }
}

impl DescentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) || !(self.f_tol > 0.0) {
            return Err(Error::usage(format!(
                "descent tolerances must be positive (grad_tol {}, f_tol {})",
                self.grad_tol, self.f_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::usage("max_iters must be at least 1"));
        }
        self.gradient.validate()?;
        self.line_search.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientSmall,
    FChangeSmall,
    MaxIters,
    BacktrackExhausted,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::GradientSmall => "gradient-small",
            Termination::FChangeSmall => "f-change-small",
            Termination::MaxIters => "max-iters",
            Termination::BacktrackExhausted => "backtrack-exhausted",
        }
    }
}

/// One iterate. `lambda` is the step that produced it (0 for the start point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub x: Vector,
    pub f: f64,
    pub grad_norm: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentTrace {
    pub iterates: Vec<TracePoint>,
    pub termination: Termination,
}

impl DescentTrace {
    pub fn accepted_steps(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMinimum {
    pub x: Vector,
    pub f: f64,
    pub grad_norm: f64,
    /// Objective value at the (clamped) start point.
    pub start_f: f64,
    pub trace: DescentTrace,
    /// Counter growth over the descent call.
    pub evals: EvalCounts,
}

impl LocalMinimum {
    pub fn termination(&self) -> Termination {
        self.trace.termination
    }
}

pub fn steepest_direction(g: &[f64]) -> Vector {
    Vector::from_raw(g.iter().map(|v| -v).collect())
}

/// `f_new <= fx + c1 * lambda * slope`, where `slope = ∇f(x)ᵀd`.
pub fn armijo_condition_holds(f_new: f64, fx: f64, lambda: f64, slope: f64, c1: f64) -> bool {
    f_new <= fx + c1 * lambda * slope
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmijoStep {
    pub lambda: f64,
    pub x_new: Vector,
    pub f_new: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArmijoOutcome {
    Accepted(ArmijoStep),
    /// No trial step up to `max_backtracks` shrinks satisfied the condition.
    Exhausted,
}

/// Backtracks `λ = lambda0 · shrinkⁿ`, n = 0, 1, …, until the clamped trial
/// point satisfies the Armijo condition.
#[allow(clippy::too_many_arguments)]
pub fn armijo_backtrack(
    obj: &ObjectiveSpec,
    x: &Vector,
    d: &[f64],
    fx: f64,
    gx: &[f64],
    params: &LineSearchParams,
    counter: &EvalCounter,
) -> Result<ArmijoOutcome> {
    let slope = dot(gx, d);
    if !(slope < 0.0) {
        return Err(Error::usage(format!(
            "armijo_backtrack needs a descent direction, got gᵀd = {slope}"
        )));
    }
    let mut lambda = params.lambda0;
    for n in 0..=params.max_backtracks {
        let trial = obj.domain().clamp(&x.step(lambda, d));
        let f_trial = obj.evaluate(&trial, counter)?;
        if armijo_condition_holds(f_trial, fx, lambda, slope, params.c1) {
            return Ok(ArmijoOutcome::Accepted(ArmijoStep {
                lambda,
                x_new: trial,
                f_new: f_trial,
                backtracks: n,
            }));
        }
        lambda *= params.shrink;
    }
    Ok(ArmijoOutcome::Exhausted)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimizer of `φ(λ) = f(x + λd)` on `[0, lambda_max]`.
///
/// Returns 0 whenever the located point is not strictly better than `x`.
pub fn exact_sectioned_search(
    obj: &ObjectiveSpec,
    x: &Vector,
    d: &[f64],
    lambda_max: f64,
    tol: f64,
    counter: &EvalCounter,
) -> Result<f64> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Ok(0.0);
    }
    let phi = |lambda: f64| obj.evaluate(&obj.domain().clamp(&x.step(lambda, d)), counter);

    let (mut a, mut b) = (0.0, lambda_max);
    let mut c = b - INV_PHI * (b - a);
    let mut e = a + INV_PHI * (b - a);
    let mut fc = phi(c)?;
    let mut fe = phi(e)?;
    while b - a > tol {
        if fc <= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - INV_PHI * (b - a);
            fc = phi(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + INV_PHI * (b - a);
            fe = phi(e)?;
        }
        // interval stopped shrinking in floating point
        if c >= e {
            break;
        }
    }
    let (lambda, f_best) = if fc <= fe { (c, fc) } else { (e, fe) };
    let f0 = phi(0.0)?;
    Ok(if f_best < f0 { lambda } else { 0.0 })
}

/// Zeroes the components of `d` that would push `x` out through an active face.
fn project_direction(obj: &ObjectiveSpec, x: &[f64], d: &mut [f64]) {
    let (lo, hi) = (obj.domain().lower(), obj.domain().upper());
    for i in 0..d.len() {
        if (x[i] <= lo[i] && d[i] < 0.0) || (x[i] >= hi[i] && d[i] > 0.0) {
            d[i] = 0.0;
        }
    }
}

/// Runs steepest descent from `x0` (clamped into the domain).
///
/// Stops on the first of: `‖∇f‖ <= grad_tol`, an accepted step lowering `f`
/// by at most `f_tol`, `max_iters` accepted steps, or a failed line search.
/// In the last case the best iterate so far is returned.
pub fn descend(
    obj: &ObjectiveSpec,
    x0: &Vector,
    params: &DescentParams,
    counter: &EvalCounter,
) -> Result<LocalMinimum> {
    params.validate()?;
    if x0.dim() != obj.dimension() {
        return Err(Error::usage(format!(
            "start point has dimension {}, objective `{}` has {}",
            x0.dim(),
            obj.name(),
            obj.dimension()
        )));
    }
    let before = counter.snapshot();
    let ls = &params.line_search;

    let mut x = obj.domain().clamp(x0);
    let mut fx = obj.evaluate(&x, counter)?;
    let start_f = fx;
    let mut lambda_in = 0.0;
    let mut small_change = false;
    let mut iterates = Vec::new();

    let (grad_norm, termination) = loop {
        let g = obj.gradient(&x, params.gradient, counter)?;
        let gn = g.norm();
        iterates.push(TracePoint {
            x: x.clone(),
            f: fx,
            grad_norm: gn,
            lambda: lambda_in,
        });
        if gn <= params.grad_tol {
            break (gn, Termination::GradientSmall);
        }
        if small_change {
            break (gn, Termination::FChangeSmall);
        }
        if iterates.len() > params.max_iters {
            break (gn, Termination::MaxIters);
        }

        let mut d = steepest_direction(&g).into_inner();
        let step = match ls.mode {
            LineSearchMode::Armijo => match armijo_backtrack(obj, &x, &d, fx, &g, ls, counter)? {
                ArmijoOutcome::Accepted(s) => Some((s.lambda, s.x_new, s.f_new)),
                ArmijoOutcome::Exhausted => None,
            },
            LineSearchMode::ExactSectioned => {
                project_direction(obj, &x, &mut d);
                let lambda_max = obj.domain().max_step_along(&x, &d);
                let lambda =
                    exact_sectioned_search(obj, &x, &d, lambda_max, ls.section_tol, counter)?;
                if lambda > 0.0 {
                    let x_new = obj.domain().clamp(&x.step(lambda, &d));
                    let f_new = obj.evaluate(&x_new, counter)?;
                    Some((lambda, x_new, f_new))
                } else {
                    None
                }
            }
        };
        match step {
            Some((lambda, x_new, f_new)) if f_new < fx => {
                small_change = fx - f_new <= params.f_tol;
                x = x_new;
                fx = f_new;
                lambda_in = lambda;
            }
            _ => break (gn, Termination::BacktrackExhausted),
        }
    };

    Ok(LocalMinimum {
        x,
        f: fx,
        grad_norm,
        start_f,
        trace: DescentTrace {
            iterates,
            termination,
        },
        evals: counter.snapshot() - before,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{lookup, EXAMPLE1, SHUBERT_PENALIZED};
    use crate::objective::BoxDomain;
    use proptest::prelude::*;

    fn line(name: &str, lo: f64, hi: f64, f: fn(f64) -> f64, df: fn(f64) -> f64) -> ObjectiveSpec {
        ObjectiveSpec::new(
            name,
            BoxDomain::from_bounds(&[(lo, hi)]).unwrap(),
            move |x| f(x[0]),
        )
        .with_gradient(move |x, g| g[0] = df(x[0]))
    }

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn steepest_direction_negates() {
        assert_eq!(
            steepest_direction(&[1.0, 2.0]).into_inner(),
            vec![-1.0, -2.0]
        );
        assert_eq!(steepest_direction(&[0.0, 0.0]).into_inner(), vec![0.0, 0.0]);
        let d = steepest_direction(&[2.610_899_414, -0.982_590_993]);
        assert_eq!(d.into_inner(), vec![-2.610_899_414, 0.982_590_993]);
    }

    #[test]
    fn armijo_on_parabola_halves_once() {
        // λ=1 lands on f(-1)=1 > 1 − 4e-4; λ=0.5 lands on 0 <= 0.9998.
        let obj = line("sq", -10.0, 10.0, |x| x * x, |x| 2.0 * x);
        let c = EvalCounter::new();
        let out = armijo_backtrack(
            &obj,
            &v(&[1.0]),
            &[-2.0],
            1.0,
            &[2.0],
            &LineSearchParams::default(),
            &c,
        )
        .unwrap();
        assert_eq!(
            out,
            ArmijoOutcome::Accepted(ArmijoStep {
                lambda: 0.5,
                x_new: v(&[0.0]),
                f_new: 0.0,
                backtracks: 1
            })
        );
    }

    #[test]
    fn armijo_accepts_full_step_on_linear() {
        let obj = line("lin", -10.0, 10.0, |x| x, |_| 1.0);
        let c = EvalCounter::new();
        match armijo_backtrack(
            &obj,
            &v(&[0.0]),
            &[-1.0],
            0.0,
            &[1.0],
            &LineSearchParams::default(),
            &c,
        )
        .unwrap()
        {
            ArmijoOutcome::Accepted(s) => {
                assert_eq!(s.lambda, 1.0);
                assert_eq!(s.backtracks, 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn armijo_rejects_ascent_direction() {
        let obj = line("sq", -10.0, 10.0, |x| x * x, |x| 2.0 * x);
        let c = EvalCounter::new();
        let r = armijo_backtrack(
            &obj,
            &v(&[1.0]),
            &[2.0],
            1.0,
            &[2.0],
            &LineSearchParams::default(),
            &c,
        );
        assert!(matches!(r, Err(Error::Usage(_))));
        let r = armijo_backtrack(
            &obj,
            &v(&[1.0]),
            &[0.0],
            1.0,
            &[2.0],
            &LineSearchParams::default(),
            &c,
        );
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn armijo_exhaustion_is_reported() {
        // gradient claims descent but the field rises in that direction
        let obj = line("liar", -10.0, 10.0, |x| -x, |_| 1.0);
        let c = EvalCounter::new();
        let params = LineSearchParams {
            max_backtracks: 5,
            ..Default::default()
        };
        let r = armijo_backtrack(&obj, &v(&[0.0]), &[-1.0], 0.0, &[1.0], &params, &c).unwrap();
        assert_eq!(r, ArmijoOutcome::Exhausted);
        assert_eq!(c.snapshot().f_calls, 6);
    }

    #[test]
    fn armijo_step_on_example1_satisfies_condition() {
        let obj = lookup(EXAMPLE1).unwrap();
        let c = EvalCounter::new();
        let x = v(&[-1.0, 3.0]);
        let fx = obj.evaluate(&x, &c).unwrap();
        let g = obj.gradient(&x, GradientMethod::analytic(), &c).unwrap();
        let d = steepest_direction(&g);
        let params = LineSearchParams::default();
        let ArmijoOutcome::Accepted(s) =
            armijo_backtrack(&obj, &x, &d, fx, &g, &params, &c).unwrap()
        else {
            panic!("no step accepted");
        };
        let replay = obj
            .evaluate(&obj.domain().clamp(&x.step(s.lambda, &d)), &c)
            .unwrap();
        assert_eq!(replay, s.f_new);
        assert!(armijo_condition_holds(
            replay,
            fx,
            s.lambda,
            g.dot(&d),
            params.c1
        ));
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let obj = line(
            "p",
            -10.0,
            10.0,
            |x| (1.0 - x) * (1.0 - x),
            |x| 2.0 * (x - 1.0),
        );
        let c = EvalCounter::new();
        let tol = 1e-8;
        let lam = exact_sectioned_search(&obj, &v(&[0.0]), &[1.0], 2.0, tol, &c).unwrap();
        assert!((lam - 1.0).abs() <= tol, "{lam}");
    }

    #[test]
    fn golden_section_on_increasing_phi_stays_at_zero() {
        let obj = line("inc", -10.0, 10.0, |x| x, |_| 1.0);
        let c = EvalCounter::new();
        let tol = 1e-8;
        let lam = exact_sectioned_search(&obj, &v(&[0.0]), &[1.0], 3.0, tol, &c).unwrap();
        assert!(lam <= tol, "{lam}");
    }

    #[test]
    fn golden_section_descends_on_example1() {
        let obj = lookup(EXAMPLE1).unwrap();
        let c = EvalCounter::new();
        let x = v(&[-1.0, 3.0]);
        let g = obj.gradient(&x, GradientMethod::analytic(), &c).unwrap();
        let d = steepest_direction(&g);
        let lambda_max = obj.domain().max_step_along(&x, &d);
        let lam = exact_sectioned_search(&obj, &x, &d, lambda_max, 1e-10, &c).unwrap();
        assert!(lam > 0.0);
        let f0 = obj.evaluate(&x, &c).unwrap();
        let f1 = obj.evaluate(&x.step(lam, &d), &c).unwrap();
        assert!(f1 <= f0);
    }

    #[test]
    fn example1_from_minus_one_three() {
        let obj = lookup(EXAMPLE1).unwrap();
        let c = EvalCounter::new();
        let m = descend(&obj, &v(&[-1.0, 3.0]), &DescentParams::default(), &c).unwrap();
        assert!((m.f + 5.1300).abs() <= 1e-3, "{}", m.f);
        assert!(m.x.distance(&[-1.7992, 3.7137]) <= 5e-3, "{}", m.x);
        assert!(m.evals.f_calls > 0 && m.evals.grad_calls > 0);
    }

    #[test]
    fn exact_mode_reaches_same_example1_minimum() {
        let obj = lookup(EXAMPLE1).unwrap();
        let c = EvalCounter::new();
        let params = DescentParams {
            line_search: LineSearchParams {
                mode: LineSearchMode::ExactSectioned,
                ..Default::default()
            },
            ..Default::default()
        };
        let m = descend(&obj, &v(&[-1.0, 3.0]), &params, &c).unwrap();
        assert!((m.f + 5.1300).abs() <= 1e-3, "{}", m.f);
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let obj = ObjectiveSpec::new("bowl", BoxDomain::cube(2, -1.0, 1.0).unwrap(), |x| {
            x[0] * x[0] + x[1] * x[1]
        })
        .with_gradient(|x, g| {
            g[0] = 2.0 * x[0];
            g[1] = 2.0 * x[1];
        });
        let c = EvalCounter::new();
        let m = descend(&obj, &Vector::zeros(2), &DescentParams::default(), &c).unwrap();
        assert_eq!(m.trace.accepted_steps(), 0);
        assert_eq!(m.termination(), Termination::GradientSmall);
    }

    #[test]
    fn max_iters_caps_accepted_steps() {
        let obj = lookup(EXAMPLE1).unwrap();
        let c = EvalCounter::new();
        let params = DescentParams {
            max_iters: 3,
            ..Default::default()
        };
        let m = descend(&obj, &v(&[-1.0, 3.0]), &params, &c).unwrap();
        assert_eq!(m.termination(), Termination::MaxIters);
        assert_eq!(m.trace.accepted_steps(), 3);
    }

    #[test]
    fn start_outside_box_is_clamped() {
        let obj = lookup(EXAMPLE1).unwrap();
        let c = EvalCounter::new();
        let m = descend(&obj, &v(&[40.0, -3.0]), &DescentParams::default(), &c).unwrap();
        assert_eq!(m.trace.iterates[0].x.as_slice(), &[5.0, -3.0]);
        assert!(obj.domain().contains(&m.x));
    }

    #[test]
    fn bad_params_and_dimension_are_usage_errors() {
        let obj = lookup(EXAMPLE1).unwrap();
        let c = EvalCounter::new();
        let bad = DescentParams {
            grad_tol: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            descend(&obj, &v(&[0.0, 0.0]), &bad, &c),
            Err(Error::Usage(_))
        ));
        let bad = DescentParams {
            line_search: LineSearchParams {
                c1: 1.0,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(
            descend(&obj, &v(&[0.0, 0.0]), &bad, &c),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            descend(&obj, &v(&[0.0]), &DescentParams::default(), &c),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn non_finite_value_is_a_numeric_error() {
        let obj = line(
            "hole",
            -2.0,
            2.0,
            |x| if x < -0.5 { f64::NAN } else { x },
            |_| 1.0,
        );
        let c = EvalCounter::new();
        let err = descend(&obj, &v(&[0.0]), &DescentParams::default(), &c).unwrap_err();
        assert!(err.is_numeric(), "{err:?}");
    }

    fn replay_armijo(obj: &ObjectiveSpec, m: &LocalMinimum, c1: f64) {
        let c = EvalCounter::new();
        for pair in m.trace.iterates.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            let g = obj
                .gradient(&prev.x, GradientMethod::analytic(), &c)
                .unwrap();
            let d = steepest_direction(&g);
            let x_new = obj.domain().clamp(&prev.x.step(next.lambda, &d));
            assert_eq!(x_new, next.x);
            let f_new = obj.evaluate(&x_new, &c).unwrap();
            assert!(armijo_condition_holds(
                f_new,
                prev.f,
                next.lambda,
                g.dot(&d),
                c1
            ));
            assert!(next.f < prev.f);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn traces_decrease_and_certify_armijo(x in -5.0f64..5.0, y in -5.0f64..5.0, shubert in any::<bool>()) {
            let obj = lookup(if shubert { SHUBERT_PENALIZED } else { EXAMPLE1 }).unwrap();
            let c = EvalCounter::new();
            let params = DescentParams::default();
            let m = descend(&obj, &v(&[x, y]), &params, &c).unwrap();
            replay_armijo(&obj, &m, params.line_search.c1);
            let again = descend(&obj, &v(&[x, y]), &params, &c).unwrap();
            prop_assert_eq!(&again.trace, &m.trace);
        }

        #[test]
        fn restarting_at_a_minimum_barely_moves(x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let obj = lookup(EXAMPLE1).unwrap();
            let c = EvalCounter::new();
            let params = DescentParams::default();
            let m = descend(&obj, &v(&[x, y]), &params, &c).unwrap();
            let again = descend(&obj, &m.x, &params, &c).unwrap();
            prop_assert!(m.f - again.f <= params.f_tol, "moved by {}", m.f - again.f);
        }
    }
}
