//! The outer restart loop.
//!
//! ```text
//! x ← start (given, or uniform random from the seed)
//! loop
//!     x* ← descend(x)
//!     C  ← refined level set of f at f(x*)
//!     stop if C is all stationary, or nothing survives the filter
//!     x  ← steepest surviving candidate
//! ```
//!
//! A restart only counts when its descent ends at least `f_tol` below the
//! previous minimum. Otherwise the candidate is discarded and the next one
//! in restart order is tried. The recorded minima are therefore strictly
//! decreasing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descent::{descend, DescentParams, LocalMinimum};
use crate::error::{Error, Result};
use crate::levelset::{
    all_stationary, compute_level_set, filter_candidates, rank_candidates, LevelSet, LevelSetConfig,
};
use crate::objective::{BoxDomain, EvalCounter, EvalCounts, ObjectiveSpec, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub descent: DescentParams,
    pub levelset: LevelSetConfig,
    /// Upper bound on the number of accepted local searches.
    pub max_outer: usize,
    pub seed: u64,
    /// Where level sets are sampled; the objective's domain when absent.
    /// Must lie inside the domain.
    pub levelset_region: Option<BoxDomain>,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            descent: DescentParams::default(),
            levelset: LevelSetConfig::default(),
            max_outer: 50,
            seed: 0,
            levelset_region: None,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 {
            return Err(Error::usage("max_outer must be at least 1"));
        }
        self.descent.validate()?;
        self.levelset.validate()
    }

    fn region_for(&self, obj: &ObjectiveSpec) -> Result<BoxDomain> {
        match &self.levelset_region {
            None => Ok(obj.domain().clone()),
            Some(region) if obj.domain().contains_box(region) => Ok(region.clone()),
            Some(region) => Err(Error::usage(format!(
                "level-set region [{} .. {}] is not inside the domain of `{}`",
                region.lower(),
                region.upper(),
                obj.name()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveTermination {
    AllStationary,
    EmptyCandidateSet,
    MaxOuter,
}

impl SolveTermination {
    pub fn label(self) -> &'static str {
        match self {
            SolveTermination::AllStationary => "all-stationary",
            SolveTermination::EmptyCandidateSet => "empty-candidate-set",
            SolveTermination::MaxOuter => "max-outer",
        }
    }
}

/// What happened after local minimum `k` was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterIteration {
    pub k: usize,
    pub level: f64,
    /// Level-set sizes; zero when the run stopped on `max_outer` first.
    pub brackets: usize,
    pub candidates: usize,
    pub retained: usize,
    /// Candidates whose descent failed to improve on `level`.
    pub rejected: usize,
    pub restart: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub objective: String,
    pub start: Vector,
    /// Local minima in the order found; values strictly decrease.
    pub minima: Vec<LocalMinimum>,
    /// Accepted restart points; `restarts[k]` started `minima[k + 1]`.
    pub restarts: Vec<Vector>,
    pub best: LocalMinimum,
    pub termination: SolveTermination,
    pub local_search_count: usize,
    pub rejected_restarts: usize,
    pub eval_counts: EvalCounts,
    pub seed_used: u64,
    pub levelset_region: BoxDomain,
    pub iterations: Vec<OuterIteration>,
}

impl SolveReport {
    pub fn minima_values(&self) -> Vec<f64> {
        self.minima.iter().map(|m| m.f).collect()
    }
}

/// Hooks for inspecting intermediate results of [`solve_with`].
pub trait SolveObserver {
    fn local_minimum(&mut self, _k: usize, _minimum: &LocalMinimum) {}
    fn level_set(&mut self, _k: usize, _set: &LevelSet) {}
}

/// Observer that ignores everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObserver;

impl SolveObserver for NoObserver {}

/// Uniform point in `domain` from a ChaCha8 stream seeded with `seed`.
pub fn random_init(domain: &BoxDomain, seed: u64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    domain.sample(&mut rng)
}

pub fn solve(obj: &ObjectiveSpec, cfg: &SgdConfig, x0: Option<&Vector>) -> Result<SolveReport> {
    solve_with(obj, cfg, x0, &EvalCounter::new(), &mut NoObserver)
}

pub fn solve_with(
    obj: &ObjectiveSpec,
    cfg: &SgdConfig,
    x0: Option<&Vector>,
    counter: &EvalCounter,
    observer: &mut dyn SolveObserver,
) -> Result<SolveReport> {
    cfg.validate()?;
    let region = cfg.region_for(obj)?;
    let start = match x0 {
        Some(x) if x.dim() != obj.dimension() => {
            return Err(Error::usage(format!(
                "start point has dimension {}, objective `{}` has {}",
                x.dim(),
                obj.name(),
                obj.dimension()
            )))
        }
        Some(x) => obj.domain().clamp(x),
        None => random_init(obj.domain(), cfg.seed),
    };
    let before = counter.snapshot();
    let at = |k: usize| {
        move |e: Error| Error::AtOuterIteration {
            iteration: k,
            source: Box::new(e),
        }
    };

    let first = descend(obj, &start, &cfg.descent, counter).map_err(at(0))?;
    observer.local_minimum(0, &first);
    let mut minima = vec![first];
    let mut restarts = Vec::new();
    let mut iterations = Vec::new();
    let mut rejected_total = 0;

    let termination = loop {
        let k = minima.len() - 1;
        let level = minima[k].f;
        let mut record = OuterIteration {
            k,
            level,
            brackets: 0,
            candidates: 0,
            retained: 0,
            rejected: 0,
            restart: None,
        };
        if minima.len() >= cfg.max_outer {
            iterations.push(record);
            break SolveTermination::MaxOuter;
        }

        let set = compute_level_set(obj, level, &region, &cfg.levelset, counter).map_err(at(k))?;
        observer.level_set(k, &set);
        record.brackets = set.brackets;
        record.candidates = set.candidates.len();
        if set.candidates.is_empty() {
            iterations.push(record);
            break SolveTermination::EmptyCandidateSet;
        }
        if all_stationary(&set.candidates, &cfg.levelset) {
            iterations.push(record);
            break SolveTermination::AllStationary;
        }
        let mut kept = filter_candidates(&set.candidates, &cfg.levelset);
        record.retained = kept.len();
        rank_candidates(&mut kept);

        let mut accepted = None;
        for cand in kept {
            let next = descend(obj, &cand.x, &cfg.descent, counter).map_err(at(k + 1))?;
            if level - next.f >= cfg.descent.f_tol {
                accepted = Some((cand.x, next));
                break;
            }
            record.rejected += 1;
        }
        rejected_total += record.rejected;
        match accepted {
            Some((x, next)) => {
                record.restart = Some(x.clone());
                iterations.push(record);
                observer.local_minimum(k + 1, &next);
                restarts.push(x);
                minima.push(next);
            }
            None => {
                iterations.push(record);
                break SolveTermination::EmptyCandidateSet;
            }
        }
    };

    Ok(SolveReport {
        objective: obj.name().to_string(),
        start,
        best: minima.last().expect("at least one minimum").clone(),
        local_search_count: minima.len(),
        minima,
        restarts,
        termination,
        rejected_restarts: rejected_total,
        eval_counts: counter.snapshot() - before,
        seed_used: cfg.seed,
        levelset_region: region,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{lookup, EXAMPLE1, EXAMPLE1_WIDE, SPHERE};
    use crate::levelset::LevelCandidate;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn random_init_is_seeded_and_inside() {
        let b = BoxDomain::cube(2, -5.0, 5.0).unwrap();
        assert_eq!(random_init(&b, 42), random_init(&b, 42));
        assert_ne!(random_init(&b, 42), random_init(&b, 43));
        assert!(b.contains(&random_init(&b, 7)));
    }

    #[test]
    fn random_init_mean_is_centered() {
        let b = BoxDomain::cube(2, -5.0, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let mut sums = [0.0; 2];
        for _ in 0..n {
            let p = b.sample(&mut rng);
            sums[0] += p[0];
            sums[1] += p[1];
        }
        for s in sums {
            assert!((s / n as f64).abs() < 0.2);
        }
        // per-seed draws from random_init are spread the same way
        let mean: f64 = (0..n as u64).map(|s| random_init(&b, s)[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.2, "{mean}");
    }

    #[test]
    fn convex_bowl_needs_one_search() {
        let obj = lookup(SPHERE).unwrap();
        for seed in 0..5 {
            let cfg = SgdConfig {
                seed,
                ..Default::default()
            };
            let r = solve(&obj, &cfg, None).unwrap();
            assert_eq!(r.local_search_count, 1);
            assert!(matches!(
                r.termination,
                SolveTermination::AllStationary | SolveTermination::EmptyCandidateSet
            ));
            assert!(r.best.f.abs() < 1e-10);
        }
    }

    #[test]
    fn example1_wide_paper_run() {
        let obj = lookup(EXAMPLE1_WIDE).unwrap();
        let cfg = SgdConfig {
            levelset_region: Some(BoxDomain::from_bounds(&[(-5.0, 10.0), (-5.0, 10.0)]).unwrap()),
            ..Default::default()
        };
        let r = solve(&obj, &cfg, Some(&v(&[-1.0, 3.0]))).unwrap();
        let values = r.minima_values();
        assert_eq!(values.len(), 2, "{values:?}");
        assert!((values[0] + 5.1300).abs() <= 1e-3);
        assert!((values[1] + 17.4022).abs() <= 1e-3);
        assert!(r.best.x.distance(&[11.1525, 6.3719]) < 1e-3, "{}", r.best.x);
    }

    #[test]
    fn report_invariants_hold_on_example1() {
        let obj = lookup(EXAMPLE1).unwrap();
        let cfg = SgdConfig::default();
        let r = solve(&obj, &cfg, Some(&v(&[-1.0, 3.0]))).unwrap();
        assert_eq!(r.local_search_count, r.minima.len());
        assert_eq!(r.restarts.len() + 1, r.minima.len());
        assert_eq!(&r.best, r.minima.last().unwrap());
        for w in r.minima.windows(2) {
            assert!(w[1].f < w[0].f);
        }
        let c = EvalCounter::new();
        for (k, x) in r.restarts.iter().enumerate() {
            let level = r.minima[k].f;
            let f = obj.evaluate(x, &c).unwrap();
            assert!(f <= level + cfg.levelset.refine_tol * (1.0 + level.abs()));
        }
        assert!(r.eval_counts.f_calls > 0);
        assert_eq!(r.iterations.len(), r.minima.len());
    }

    #[test]
    fn max_outer_stops_the_loop() {
        let obj = lookup(EXAMPLE1).unwrap();
        let cfg = SgdConfig {
            max_outer: 1,
            ..Default::default()
        };
        let r = solve(&obj, &cfg, Some(&v(&[-1.0, 3.0]))).unwrap();
        assert_eq!(r.termination, SolveTermination::MaxOuter);
        assert_eq!(r.local_search_count, 1);
    }

    #[test]
    fn solve_is_deterministic() {
        let obj = lookup(EXAMPLE1).unwrap();
        let cfg = SgdConfig {
            seed: 11,
            ..Default::default()
        };
        let a = solve(&obj, &cfg, None).unwrap();
        let b = solve(&obj, &cfg, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed_used, 11);
    }

    #[test]
    fn region_outside_domain_is_rejected() {
        let obj = lookup(EXAMPLE1).unwrap();
        let cfg = SgdConfig {
            levelset_region: Some(BoxDomain::cube(2, -6.0, 6.0).unwrap()),
            ..Default::default()
        };
        assert!(matches!(solve(&obj, &cfg, None), Err(Error::Usage(_))));
        assert!(matches!(
            solve(&obj, &SgdConfig::default(), Some(&v(&[1.0]))),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn numeric_errors_carry_the_outer_index() {
        // finite on the start basin, NaN beyond x = 2 where level-set restarts lead
        let obj = ObjectiveSpec::new("trap", BoxDomain::cube(1, -3.0, 3.0).unwrap(), |x| {
            if x[0] > 2.5 {
                f64::NAN
            } else {
                (x[0] * 3.0).cos() * x[0]
            }
        })
        .with_gradient(|x, g| g[0] = (x[0] * 3.0).cos() - 3.0 * x[0] * (x[0] * 3.0).sin());
        let err = solve(&obj, &SgdConfig::default(), Some(&v(&[-1.0]))).unwrap_err();
        assert!(err.is_numeric());
        assert!(matches!(err, Error::AtOuterIteration { .. }));
    }

    #[test]
    fn observer_sees_every_level_set() {
        #[derive(Default)]
        struct Log {
            minima: Vec<f64>,
            sets: Vec<(usize, Vec<LevelCandidate>)>,
        }
        impl SolveObserver for Log {
            fn local_minimum(&mut self, _k: usize, m: &LocalMinimum) {
                self.minima.push(m.f);
            }
            fn level_set(&mut self, k: usize, set: &LevelSet) {
                self.sets.push((k, set.candidates.clone()));
            }
        }
        let obj = lookup(EXAMPLE1).unwrap();
        let mut log = Log::default();
        let r = solve_with(
            &obj,
            &SgdConfig::default(),
            Some(&v(&[-1.0, 3.0])),
            &EvalCounter::new(),
            &mut log,
        )
        .unwrap();
        assert_eq!(log.minima, r.minima_values());
        assert_ne!(r.termination, SolveTermination::MaxOuter);
        assert_eq!(log.sets.len(), r.iterations.len());
        for (k, cands) in &log.sets {
            let level = r.minima[*k].f;
            assert!(cands
                .iter()
                .all(|c| (c.f - level).abs() <= 1e-10 * (1.0 + level.abs())));
        }
    }
}
