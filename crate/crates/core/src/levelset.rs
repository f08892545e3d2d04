//! Sampling the level set `{x : f(x) = L}` inside a box.
//!
//! The box is covered by a uniform grid. Every axis-aligned grid edge whose
//! endpoints fall on opposite sides of the level becomes a bracket, and each
//! bracket is bisected down to a point on the level. Nodes are classified as
//! *below* (`f − target < 0`) or *not below* (`f − target >= 0`), so a node
//! that hits the level exactly still produces brackets with its lower
//! neighbours.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{BoxDomain, EvalCounter, GradientMethod, ObjectiveSpec, Vector};

/// Refuse grids larger than this many nodes.
pub const MAX_GRID_NODES: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// Keep every candidate whose gradient norm exceeds `stationary_tol`.
    Descent,
    /// Keep candidates whose gradient is strictly negative in every component.
    LiteralNegative,
}

impl FilterMode {
    pub fn label(self) -> &'static str {
        match self {
            FilterMode::Descent => "descent",
            FilterMode::LiteralNegative => "literal-negative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelSetConfig {
    /// Grid nodes per axis.
    pub grid_resolution: usize,
    /// Bisection stops once `|f − target| <= refine_tol · (1 + |L|)`.
    pub refine_tol: f64,
    pub max_bisections: usize,
    /// The sampled level is `L − level_offset`.
    pub level_offset: f64,
    pub filter_mode: FilterMode,
    /// Gradient norms at or below this count as stationary.
    pub stationary_tol: f64,
    pub gradient: GradientMethod,
}

impl Default for LevelSetConfig {
    fn default() -> Self {
        LevelSetConfig {
            grid_resolution: 200,
            refine_tol: 1e-10,
            max_bisections: 200,
            level_offset: 0.0,
            filter_mode: FilterMode::Descent,
            stationary_tol: 1e-4,
            gradient: GradientMethod::default(),
        }
    }
}

impl LevelSetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_resolution < 2 {
            return Err(Error::usage(format!(
                "grid_resolution must be at least 2, got {}",
                self.grid_resolution
            )));
        }
        if !(self.refine_tol > 0.0) || !(self.stationary_tol > 0.0) {
            return Err(Error::usage("level-set tolerances must be positive"));
        }
        if self.max_bisections == 0 {
            return Err(Error::usage("max_bisections must be at least 1"));
        }
        if !(self.level_offset >= 0.0 && self.level_offset.is_finite()) {
            return Err(Error::usage(format!(
                "level_offset must be non-negative, got {}",
                self.level_offset
            )));
        }
        self.gradient.validate()
    }

    fn residual_tol(&self, level: f64) -> f64 {
        self.refine_tol * (1.0 + level.abs())
    }
}

/// A grid edge whose endpoints lie on opposite sides of the level.
#[derive(Debug, Clone, PartialEq)]
pub struct Bracket {
    pub a: Vector,
    pub b: Vector,
    /// `f(a) − target` and `f(b) − target`.
    pub ha: f64,
    pub hb: f64,
}

/// A refined point on the level set, with its gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCandidate {
    pub x: Vector,
    pub f: f64,
    pub grad: Vector,
    pub grad_norm: f64,
}

/// Uniform grid over a box, nodes ordered row-major (axis 0 slowest).
struct Grid {
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
    nodes: usize,
}

impl Grid {
    fn new(region: &BoxDomain, resolution: usize) -> Result<Self> {
        let dim = region.dim();
        let nodes = (0..dim)
            .try_fold(1usize, |acc, _| acc.checked_mul(resolution))
            .filter(|&n| n <= MAX_GRID_NODES)
            .ok_or_else(|| {
                Error::usage(format!(
                    "grid of {resolution}^{dim} nodes exceeds the limit of {MAX_GRID_NODES}"
                ))
            })?;
        let axes = (0..dim)
            .map(|i| {
                let (lo, hi) = (region.lower()[i], region.upper()[i]);
                let step = (hi - lo) / (resolution - 1) as f64;
                (0..resolution)
                    .map(|k| {
                        if k + 1 == resolution {
                            hi
                        } else {
                            lo + step * k as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let mut strides = vec![1usize; dim];
        for i in (0..dim.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * resolution;
        }
        Ok(Grid {
            axes,
            strides,
            nodes,
        })
    }

    fn index_along(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.axes[axis].len()
    }

    fn point(&self, node: usize) -> Vector {
        Vector::from_raw(
            (0..self.axes.len())
                .map(|i| self.axes[i][self.index_along(node, i)])
                .collect(),
        )
    }
}

/// Evaluates `f` on every node of a `resolution^p` grid over `region`.
///
/// Returns the node coordinates and values in row-major order.
pub(crate) fn evaluate_grid(
    obj: &ObjectiveSpec,
    region: &BoxDomain,
    resolution: usize,
    counter: &EvalCounter,
) -> Result<(Vec<Vector>, Vec<f64>)> {
    if region.dim() != obj.dimension() {
        return Err(Error::usage(format!(
            "region has dimension {}, objective `{}` has {}",
            region.dim(),
            obj.name(),
            obj.dimension()
        )));
    }
    let grid = Grid::new(region, resolution)?;
    let points: Vec<Vector> = (0..grid.nodes)
        .into_par_iter()
        .map(|n| grid.point(n))
        .collect();
    let values = points
        .par_iter()
        .map(|p| obj.evaluate(p, counter))
        .collect::<Result<Vec<f64>>>()?;
    Ok((points, values))
}

/// All grid edges over `region` that cross `level − cfg.level_offset`,
/// in lexicographic grid order (node, then axis).
pub fn bracket_level_crossings(
    obj: &ObjectiveSpec,
    level: f64,
    region: &BoxDomain,
    cfg: &LevelSetConfig,
    counter: &EvalCounter,
) -> Result<Vec<Bracket>> {
    cfg.validate()?;
    if !level.is_finite() {
        return Err(Error::usage(format!("level must be finite, got {level}")));
    }
    let target = level - cfg.level_offset;
    let grid = Grid::new(region, cfg.grid_resolution)?;
    let (points, values) = evaluate_grid(obj, region, cfg.grid_resolution, counter)?;
    let h: Vec<f64> = values.iter().map(|v| v - target).collect();

    let mut brackets = Vec::new();
    for node in 0..grid.nodes {
        for axis in 0..grid.axes.len() {
            if grid.index_along(node, axis) + 1 == cfg.grid_resolution {
                continue;
            }
            let next = node + grid.strides[axis];
            if (h[node] < 0.0) != (h[next] < 0.0) {
                brackets.push(Bracket {
                    a: points[node].clone(),
                    b: points[next].clone(),
                    ha: h[node],
                    hb: h[next],
                });
            }
        }
    }
    Ok(brackets)
}

/// Bisects the segment `[a, b]` down to a point on the level.
///
/// `Ok(None)` means the bisection budget ran out before the residual
/// tolerance was met (e.g. a jump in `f`).
pub fn refine_crossing(
    obj: &ObjectiveSpec,
    level: f64,
    a: &Vector,
    b: &Vector,
    cfg: &LevelSetConfig,
    counter: &EvalCounter,
) -> Result<Option<LevelCandidate>> {
    let target = level - cfg.level_offset;
    let ha = obj.evaluate(a, counter)? - target;
    let hb = obj.evaluate(b, counter)? - target;
    if (ha < 0.0) == (hb < 0.0) {
        return Err(Error::usage(format!(
            "segment {a} .. {b} does not bracket level {target} (h = {ha}, {hb})"
        )));
    }
    let tol = cfg.residual_tol(level);
    let a_below = ha < 0.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let at = |t: f64| {
        Vector::from_raw(
            a.iter()
                .zip(b.iter())
                .map(|(p, q)| p + t * (q - p))
                .collect(),
        )
    };

    let mut found = None;
    if ha.abs() <= tol {
        found = Some((a.clone(), ha));
    } else if hb.abs() <= tol {
        found = Some((b.clone(), hb));
    }
    let mut rounds = 0;
    while found.is_none() && rounds < cfg.max_bisections {
        rounds += 1;
        let t = 0.5 * (lo + hi);
        let m = at(t);
        let hm = obj.evaluate(&m, counter)? - target;
        if hm.abs() <= tol {
            found = Some((m, hm));
        } else if (hm < 0.0) == a_below {
            lo = t;
        } else {
            hi = t;
        }
    }
    let Some((x, hx)) = found else {
        return Ok(None);
    };
    let grad = obj.gradient(&x, cfg.gradient, counter)?;
    Ok(Some(LevelCandidate {
        f: target + hx,
        grad_norm: grad.norm(),
        grad,
        x,
    }))
}

/// Refined, de-duplicated points of the level set inside `region`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub level: f64,
    pub brackets: usize,
    pub candidates: Vec<LevelCandidate>,
}

/// Brackets, refines and de-duplicates the crossings of `level` over `region`.
pub fn compute_level_set(
    obj: &ObjectiveSpec,
    level: f64,
    region: &BoxDomain,
    cfg: &LevelSetConfig,
    counter: &EvalCounter,
) -> Result<LevelSet> {
    let brackets = bracket_level_crossings(obj, level, region, cfg, counter)?;
    let refined = brackets
        .par_iter()
        .map(|br| refine_crossing(obj, level, &br.a, &br.b, cfg, counter))
        .collect::<Result<Vec<_>>>()?;
    let merge_radius = cell_diagonal(region, cfg.grid_resolution) * 1e-3;
    Ok(LevelSet {
        level,
        brackets: brackets.len(),
        candidates: dedup_candidates(refined.into_iter().flatten().collect(), merge_radius),
    })
}

fn cell_diagonal(region: &BoxDomain, resolution: usize) -> f64 {
    (0..region.dim())
        .map(|i| (region.width(i) / (resolution - 1) as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Merges candidates closer than `radius`, keeping the larger gradient norm.
/// The first occurrence's position in the list is kept.
fn dedup_candidates(cands: Vec<LevelCandidate>, radius: f64) -> Vec<LevelCandidate> {
    if !(radius > 0.0) {
        return cands;
    }
    let cell_of =
        |x: &Vector| -> Vec<i64> { x.iter().map(|v| (v / radius).floor() as i64).collect() };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut kept: Vec<LevelCandidate> = Vec::with_capacity(cands.len());

    for cand in cands {
        let home = cell_of(&cand.x);
        let twin = neighbour_cells(&home)
            .filter_map(|cell| buckets.get(&cell))
            .flatten()
            .copied()
            .find(|&k| kept[k].x.distance(&cand.x) < radius);
        match twin {
            Some(k) => {
                if cand.grad_norm > kept[k].grad_norm {
                    kept[k] = cand;
                }
            }
            None => {
                buckets.entry(home).or_default().push(kept.len());
                kept.push(cand);
            }
        }
    }
    kept
}

fn neighbour_cells(home: &[i64]) -> impl Iterator<Item = Vec<i64>> + '_ {
    let count = 3usize.pow(home.len() as u32);
    (0..count).map(move |mut code| {
        home.iter()
            .map(|c| {
                let off = (code % 3) as i64 - 1;
                code /= 3;
                c + off
            })
            .collect()
    })
}

pub fn filter_candidates(cands: &[LevelCandidate], cfg: &LevelSetConfig) -> Vec<LevelCandidate> {
    cands
        .iter()
        .filter(|c| match cfg.filter_mode {
            FilterMode::Descent => c.grad_norm > cfg.stationary_tol,
            FilterMode::LiteralNegative => c.grad.iter().all(|g| *g < 0.0),
        })
        .cloned()
        .collect()
}

/// Steepest first; equal norms ordered by lexicographically smaller point.
pub fn restart_order(a: &LevelCandidate, b: &LevelCandidate) -> Ordering {
    b.grad_norm
        .total_cmp(&a.grad_norm)
        .then_with(|| a.x.lex_cmp(&b.x))
}

/// Sorts candidates into restart preference order.
pub fn rank_candidates(cands: &mut [LevelCandidate]) {
    cands.sort_by(restart_order);
}

/// The candidate of greatest gradient norm.
pub fn select_next_start(cands: &[LevelCandidate]) -> Result<&LevelCandidate> {
    cands
        .iter()
        .min_by(|a, b| restart_order(a, b))
        .ok_or_else(|| Error::usage("select_next_start called with no candidates"))
}

/// True when no candidate has gradient norm above `stationary_tol`
/// (vacuously true for an empty set).
pub fn all_stationary(cands: &[LevelCandidate], cfg: &LevelSetConfig) -> bool {
    cands.iter().all(|c| c.grad_norm <= cfg.stationary_tol)
}
