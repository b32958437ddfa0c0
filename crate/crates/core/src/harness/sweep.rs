//! Sweeps of finite solves over `n` and the incremental error between
//! consecutive sizes.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::equilibrium::{solve_finite, strain, Configuration, SolverOptions, SolverReport, StrainField};
use crate::error::{parameter, Error, Result};
use crate::harness::fit::{fit_rate, RateFit, RateModel};
use crate::potential::PotentialSpec;

pub const DEFAULT_PROBES: [usize; 5] = [1, 3, 9, 27, 81];

/// Worker cap from `PILEUP_THREADS`, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var("PILEUP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPlan {
    pub potential: PotentialSpec,
    pub n_values: Vec<usize>,
    pub i_probes: Vec<usize>,
    pub solver: SolverOptions,
}

impl SweepPlan {
    pub fn new(
        potential: PotentialSpec,
        n_values: Vec<usize>,
        i_probes: Vec<usize>,
        solver: SolverOptions,
    ) -> Result<Self> {
        let plan = Self { potential, n_values, i_probes, solver };
        plan.validate()?;
        Ok(plan)
    }

    /// A probe is tracked at every `n` whose left half contains it, so small
    /// sizes simply contribute no row for large probes.
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(parameter("n_values is empty"));
        }
        if self.n_values[0] < 2 || self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(parameter("n_values must be strictly increasing and at least 2"));
        }
        if self.i_probes.is_empty() || self.i_probes.contains(&0) {
            return Err(parameter("i_probes must be non-empty positive indices"));
        }
        let top = half(*self.n_values.last().unwrap());
        if let Some(i) = self.i_probes.iter().find(|&&i| i > top) {
            return Err(parameter(format!("probe {i} exceeds ceil(n/2) = {top} for every n")));
        }
        self.solver.validate()
    }

    /// Every size solved by the sweep: each `n` and its double.
    pub fn sizes(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.n_values.iter().flat_map(|&n| [n, 2 * n]).collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

fn half(n: usize) -> usize {
    n.div_ceil(2)
}

/// Summary of one solve inside a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub n: usize,
    pub iterations: usize,
    pub residual_norm: f64,
    pub elapsed_seconds: f64,
    /// `max |eps(i) - eps(n + 1 - i)|`
    pub reversal_error: f64,
    /// `|sum eps|`
    pub sum_error: f64,
}

impl SolveSummary {
    fn new(n: usize, c: &Configuration, rep: &SolverReport) -> Self {
        let e = strain(c);
        let (reversal_error, sum_error) = symmetry_errors(&e);
        Self {
            n,
            iterations: rep.iterations,
            residual_norm: rep.residual_norm,
            elapsed_seconds: rep.elapsed_seconds,
            reversal_error,
            sum_error,
        }
    }
}

/// Reversal asymmetry and net sum of a strain field.
pub fn symmetry_errors(e: &StrainField) -> (f64, f64) {
    let v = e.values();
    let n = v.len();
    let rev = (0..n).map(|i| (v[i] - v[n - 1 - i]).abs()).fold(0.0, f64::max);
    (rev, v.iter().sum::<f64>().abs())
}

type Solved = Arc<(Configuration, SolverReport)>;

/// Finite solves keyed by potential, size and options. Solves are
/// deterministic, so a cached entry is bit-identical to a fresh one.
#[derive(Debug, Default)]
pub struct SolveCache {
    entries: Mutex<BTreeMap<String, Solved>>,
    // held while solving so overlapping requests wait instead of repeating work
    work: Mutex<()>,
}

impl SolveCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(p: &PotentialSpec, n: usize, opts: &SolverOptions) -> String {
        format!("{p}|{n}|{:?}", opts)
    }

    pub fn get(&self, p: &PotentialSpec, n: usize, opts: &SolverOptions) -> Option<Solved> {
        self.entries.lock().unwrap().get(&Self::key(p, n, opts)).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Solves every missing size, at most `workers` at a time.
    pub fn ensure(&self, p: &PotentialSpec, sizes: &[usize], opts: &SolverOptions, workers: usize) -> Result<()> {
        let _busy = self.work.lock().unwrap();
        let missing: Vec<usize> = sizes.iter().copied().filter(|&n| self.get(p, n, opts).is_none()).collect();
        if missing.is_empty() {
            return Ok(());
        }
        // largest first so the long solves start early
        let order: Vec<usize> = missing.iter().rev().copied().collect();
        let next = AtomicUsize::new(0);
        let results: Mutex<BTreeMap<usize, Result<Solved>>> = Mutex::new(BTreeMap::new());
        std::thread::scope(|scope| {
            for _ in 0..workers.clamp(1, order.len()) {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&n) = order.get(k) else { break };
                    let r = solve_finite(p, n, opts).map(Arc::new);
                    results.lock().unwrap().insert(n, r);
                });
            }
        });
        let mut entries = self.entries.lock().unwrap();
        for (n, r) in results.into_inner().unwrap() {
            match r {
                Ok(s) => {
                    entries.insert(Self::key(p, n, opts), s);
                }
                Err(e) => return Err(Error::AtSize { n, source: Box::new(e) }),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementRow {
    pub n: usize,
    pub i: usize,
    pub dn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementTable {
    /// Ordered by `n`, then by probe.
    pub rows: Vec<IncrementRow>,
    /// One entry per solved size, ordered by `n`.
    pub solves: Vec<SolveSummary>,
}

/// `d^n(i) = |eps_n(i) - eps_2n(i)|` for every `n` and every probe in the
/// left half of size `n`.
pub fn incremental_error(plan: &SweepPlan) -> Result<IncrementTable> {
    incremental_error_cached(plan, &SolveCache::new())
}

pub fn incremental_error_cached(plan: &SweepPlan, cache: &SolveCache) -> Result<IncrementTable> {
    plan.validate()?;
    let p = &plan.potential;
    let sizes = plan.sizes();
    cache.ensure(p, &sizes, &plan.solver, worker_count())?;
    let fetch = |n: usize| cache.get(p, n, &plan.solver).expect("solved above");

    let solves = sizes
        .iter()
        .map(|&n| {
            let s = fetch(n);
            SolveSummary::new(n, &s.0, &s.1)
        })
        .collect();
    let mut rows = Vec::new();
    for &n in &plan.n_values {
        let coarse = strain(&fetch(n).0);
        let fine = strain(&fetch(2 * n).0);
        for &i in &plan.i_probes {
            if i <= half(n) {
                rows.push(IncrementRow { n, i, dn: (coarse.get(i) - fine.get(i)).abs() });
            }
        }
    }
    Ok(IncrementTable { rows, solves })
}

/// `d^n(i)` between two given strain fields; the finer one must have twice
/// as many entries.
pub fn increment_between(coarse: &StrainField, fine: &StrainField, probes: &[usize]) -> Result<Vec<IncrementRow>> {
    let n = coarse.n();
    if fine.n() != 2 * n {
        return Err(parameter(format!("expected sizes n and 2n, got {n} and {}", fine.n())));
    }
    Ok(probes
        .iter()
        .filter(|&&i| i >= 1 && i <= half(n))
        .map(|&i| IncrementRow { n, i, dn: (coarse.get(i) - fine.get(i)).abs() })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeFit {
    pub i: usize,
    pub points: usize,
    pub fit: RateFit,
}

/// Rate fit of `n -> d^n(i)` for each probe.
pub fn fit_probes(table: &IncrementTable, probes: &[usize], model: RateModel) -> Result<Vec<ProbeFit>> {
    probes
        .iter()
        .map(|&i| {
            let pts: Vec<(f64, f64)> = table.rows.iter().filter(|r| r.i == i).map(|r| (r.n as f64, r.dn)).collect();
            let fit = fit_rate(&pts, model).map_err(|e| match e {
                Error::FitUndefined(m) => Error::FitUndefined(format!("probe {i}: {m}")),
                e => e,
            })?;
            Ok(ProbeFit { i, points: pts.len(), fit })
        })
        .collect()
}

/// Largest pairwise difference of fitted slopes.
pub fn slope_spread(fits: &[ProbeFit]) -> f64 {
    let lo = fits.iter().map(|f| f.fit.slope).fold(f64::INFINITY, f64::min);
    let hi = fits.iter().map(|f| f.fit.slope).fold(f64::NEG_INFINITY, f64::max);
    if fits.is_empty() {
        0.0
    } else {
        hi - lo
    }
}
