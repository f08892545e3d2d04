//! Built-in test objectives, each with an analytic gradient.

use crate::error::{Error, Result};
use crate::objective::{BoxDomain, ObjectiveSpec};

pub const EXAMPLE1: &str = "example1";
pub const EXAMPLE1_WIDE: &str = "example1-wide";
pub const SHUBERT_PENALIZED: &str = "shubert-penalized";
pub const SHUBERT_PLAIN: &str = "shubert-plain";
pub const SPHERE: &str = "sphere";

/// Center of the quadratic term in the penalized Shubert function; it sits on
/// one of the 18 global minimizers of the plain product.
pub const SHUBERT_PENALTY_CENTER: [f64; 2] = [-1.42513, -0.80032];

/// `x2 sin(x1) - x1 cos(x2)`
pub fn example1_value(x: &[f64]) -> f64 {
    x[1] * x[0].sin() - x[0] * x[1].cos()
}

pub fn example1_gradient(x: &[f64], g: &mut [f64]) {
    g[0] = x[1] * x[0].cos() - x[1].cos();
    g[1] = x[0].sin() + x[0] * x[1].sin();
}

/// One factor of the Shubert product: `sum_{i=1..5} i cos((i+1) t + i)`.
fn shubert_factor(t: f64) -> f64 {
    (1..=5)
        .map(|i| {
            let i = i as f64;
            i * ((i + 1.0) * t + i).cos()
        })
        .sum()
}

fn shubert_factor_deriv(t: f64) -> f64 {
    (1..=5)
        .map(|i| {
            let i = i as f64;
            -i * (i + 1.0) * ((i + 1.0) * t + i).sin()
        })
        .sum()
}

pub fn shubert_plain_value(x: &[f64]) -> f64 {
    shubert_factor(x[0]) * shubert_factor(x[1])
}

pub fn shubert_plain_gradient(x: &[f64], g: &mut [f64]) {
    let (s0, s1) = (shubert_factor(x[0]), shubert_factor(x[1]));
    g[0] = shubert_factor_deriv(x[0]) * s1;
    g[1] = s0 * shubert_factor_deriv(x[1]);
}

/// Shubert product plus `½ ‖x − c‖²` with `c` = [`SHUBERT_PENALTY_CENTER`].
pub fn shubert_penalized_value(x: &[f64]) -> f64 {
    let [c0, c1] = SHUBERT_PENALTY_CENTER;
    shubert_plain_value(x) + 0.5 * ((x[0] - c0).powi(2) + (x[1] - c1).powi(2))
}

pub fn shubert_penalized_gradient(x: &[f64], g: &mut [f64]) {
    shubert_plain_gradient(x, g);
    g[0] += x[0] - SHUBERT_PENALTY_CENTER[0];
    g[1] += x[1] - SHUBERT_PENALTY_CENTER[1];
}

fn square(half_width: f64) -> BoxDomain {
    BoxDomain::cube(2, -half_width, half_width).expect("static box is valid")
}

/// All built-in objectives, in a fixed order.
pub fn builtin_objectives() -> Vec<ObjectiveSpec> {
    let example1 =
        ObjectiveSpec::new(EXAMPLE1, square(5.0), example1_value).with_gradient(example1_gradient);
    let example1_wide = example1
        .clone()
        .with_name(EXAMPLE1_WIDE)
        .with_domain(square(15.0))
        .expect("same dimension");
    vec![
        example1,
        example1_wide,
        ObjectiveSpec::new(SHUBERT_PENALIZED, square(100.0), shubert_penalized_value)
            .with_gradient(shubert_penalized_gradient),
        ObjectiveSpec::new(SHUBERT_PLAIN, square(10.0), shubert_plain_value)
            .with_gradient(shubert_plain_gradient),
        ObjectiveSpec::new(SPHERE, square(5.0), |x| x.iter().map(|v| v * v).sum()).with_gradient(
            |x, g| {
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = 2.0 * xi;
                }
            },
        ),
    ]
}

pub fn builtin_names() -> Vec<String> {
    builtin_objectives()
        .iter()
        .map(|o| o.name().to_string())
        .collect()
}

pub fn lookup(name: &str) -> Result<ObjectiveSpec> {
    builtin_objectives()
        .into_iter()
        .find(|o| o.name() == name)
        .ok_or_else(|| Error::NotFound(name.to_string()))
}
