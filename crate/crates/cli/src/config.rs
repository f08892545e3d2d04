//! Run configuration: an optional TOML file overlaid by command-line flags.
//!
//! Recognised file keys (all optional):
//!
//! ```toml
//! objective = "example1-wide"
//! start = [-1.0, 3.0]
//! box = [-15.0, 15.0, -15.0, 15.0]        # lo1, hi1, lo2, hi2, ...
//! levelset_box = [-5.0, 10.0, -5.0, 10.0]
//! seed = 0
//! grid_resolution = 200
//! filter_mode = "descent"                 # or "literal-negative"
//! max_outer = 50
//! out_dir = "runs/example1"
//! format = "csv"                          # or "jsonl"
//! line_search = "armijo"                  # or "exact-sectioned"
//! gradient = "analytic"                   # or "central-difference"
//! level_offset = 0.0
//! stationary_tol = 1e-4
//! grad_tol = 1e-6
//! ```

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use seqdescent::bench::find_case;
use seqdescent::functions::lookup;
use seqdescent::{
    BoxDomain, FilterMode, GradientMode, LineSearchMode, ObjectiveSpec, SgdConfig, Vector,
};

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SEQDESCENT_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "seqdescent-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterArg {
    Descent,
    LiteralNegative,
}

impl From<FilterArg> for FilterMode {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::Descent => FilterMode::Descent,
            FilterArg::LiteralNegative => FilterMode::LiteralNegative,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub objective: Option<String>,
    pub start: Option<Vec<f64>>,
    #[serde(rename = "box")]
    pub domain: Option<Vec<f64>>,
    pub levelset_box: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub grid_resolution: Option<usize>,
    pub filter_mode: Option<FilterArg>,
    pub max_outer: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<Format>,
    pub line_search: Option<LineSearchMode>,
    pub gradient: Option<GradientMode>,
    pub level_offset: Option<f64>,
    pub stationary_tol: Option<f64>,
    pub grad_tol: Option<f64>,
}

macro_rules! overlay {
    ($hi:ident, $lo:ident; $($field:ident),*) => {
        RunConfig { $($field: $hi.$field.or($lo.$field)),* }
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        let hi = self;
        let lo = base;
        overlay!(hi, lo; objective, start, domain, levelset_box, seed, grid_resolution, filter_mode,
            max_outer, out_dir, format, line_search, gradient, level_offset, stationary_tol, grad_tol)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }

    /// The named objective with any `box` override applied.
    pub fn objective(&self) -> Result<ObjectiveSpec, CliError> {
        let name = self
            .objective
            .as_deref()
            .ok_or_else(|| CliError::Usage("--objective is required".into()))?;
        let obj = lookup(name)?;
        match &self.domain {
            None => Ok(obj),
            Some(flat) => {
                let domain = parse_box(flat)?;
                Ok(obj.with_domain(domain)?)
            }
        }
    }

    pub fn start(&self) -> Result<Option<Vector>, CliError> {
        self.start
            .clone()
            .map(|v| Vector::new(v).map_err(CliError::from))
            .transpose()
    }

    /// Solver settings. Built-in objectives whose domain was not overridden
    /// start from their benchmark preset (level-set region, grid resolution).
    pub fn sgd_config(&self, obj: &ObjectiveSpec) -> Result<SgdConfig, CliError> {
        let mut cfg = SgdConfig::default();
        if self.domain.is_none() {
            if let Ok(case) = find_case(obj.name()) {
                cfg = case.tune(&cfg);
            }
        }
        if let Some(flat) = &self.levelset_box {
            cfg.levelset_region = Some(parse_box(flat)?);
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.grid_resolution {
            cfg.levelset.grid_resolution = v;
        }
        if let Some(v) = self.filter_mode {
            cfg.levelset.filter_mode = v.into();
        }
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = self.line_search {
            cfg.descent.line_search.mode = v;
        }
        if let Some(v) = self.gradient {
            cfg.descent.gradient.mode = v;
            cfg.levelset.gradient.mode = v;
        }
        if let Some(v) = self.level_offset {
            cfg.levelset.level_offset = v;
        }
        if let Some(v) = self.stationary_tol {
            cfg.levelset.stationary_tol = v;
        }
        if let Some(v) = self.grad_tol {
            cfg.descent.grad_tol = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `x1,x2,...`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("`{part}` is not a number in `{s}`")))
        })
        .collect()
}

/// Builds a box from `lo1, hi1, lo2, hi2, ...`.
pub fn parse_box(flat: &[f64]) -> Result<BoxDomain, CliError> {
    if flat.is_empty() || !flat.len().is_multiple_of(2) {
        return Err(CliError::Usage(format!(
            "a box needs lo,hi pairs; got {} numbers",
            flat.len()
        )));
    }
    let bounds: Vec<(f64, f64)> = flat.chunks(2).map(|p| (p[0], p[1])).collect();
    Ok(BoxDomain::from_bounds(&bounds)?)
}
