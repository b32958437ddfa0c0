//! The acceptance suite: thirteen quantitative checks shared by the `check`
//! subcommand and the `acceptance` test target.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blayer::{em_tail_check, extract_decay_constant, solve_bl};
use crate::energetics::{
    decaying_strain_energies, illposedness_demo, limit_energy_trunc, phi, phi_lower_bound, renorm_energy,
    renorm_energy_split, sigma_inf, stress_gap_l2,
};
use crate::equilibrium::{energy_total, residual, solve_finite, strain, Configuration, SolverOptions, StrainField};
use crate::error::{parameter, Result};
use crate::harness::fit::{fit_rate, RateModel};
use crate::harness::oracle::brute_force_minimiser;
use crate::harness::sweep::{
    fit_probes, incremental_error_cached, slope_spread, symmetry_errors, SolveCache, SweepPlan,
};
use crate::potential::PotentialSpec;

pub const CRITERIA: u8 = 13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_seconds: f64,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:02} {} {}: {} [{:.2} s]",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed_seconds
        )
    }
}

fn title(id: u8) -> &'static str {
    match id {
        1 => "trivial equilibrium",
        2 => "oracle equivalence",
        3 => "incremental-error rate, a = 2",
        4 => "incremental-error rate, wall",
        5 => "boundary-layer decay constant",
        6 => "energy splitting identity",
        7 => "single-term bounds on phi_k",
        8 => "stress convergence rate",
        9 => "Euler-Maclaurin tail bound",
        10 => "gradient check",
        11 => "reversal symmetry and zero sum",
        12 => "ill-posedness for a < 3/2",
        13 => "energy gap to the limit problem",
        _ => "unknown",
    }
}

fn a2() -> PotentialSpec {
    PotentialSpec::power_law(2.0).expect("a = 2 is admissible")
}

fn both() -> [PotentialSpec; 2] {
    [a2(), PotentialSpec::wall()]
}

const SWEEP_PROBES: [usize; 3] = [1, 9, 81];

fn sweep_sizes() -> Vec<usize> {
    (6..=12).map(|k| 1usize << k).collect()
}

/// Runs criteria, sharing finite solves between them.
#[derive(Debug, Default)]
pub struct Acceptance {
    cache: SolveCache,
    options: SolverOptions,
}

impl Acceptance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn run_all(&self) -> Vec<CriterionOutcome> {
        (1..=CRITERIA).map(|id| self.criterion(id).expect("valid id")).collect()
    }

    pub fn criterion(&self, id: u8) -> Result<CriterionOutcome> {
        if !(1..=CRITERIA).contains(&id) {
            return Err(parameter(format!("criteria are numbered 1..={CRITERIA}, got {id}")));
        }
        let start = Instant::now();
        let body = match id {
            1 => self.c01(),
            2 => self.c02(),
            3 => self.sweep_rate(a2(), RateModel::PowerTimesLog),
            4 => self.sweep_rate(PotentialSpec::wall(), RateModel::PurePower),
            5 => c05(),
            6 => c06(),
            7 => c07(),
            8 => c08(),
            9 => c09(),
            10 => c10(),
            11 => self.c11(),
            12 => c12(),
            _ => self.c13(),
        };
        let elapsed_seconds = start.elapsed().as_secs_f64();
        let (passed, detail) = match body {
            Ok((ok, detail, limit)) => {
                let in_time = limit.is_none_or(|l| elapsed_seconds <= l);
                let detail = match limit {
                    Some(l) if !in_time => format!("{detail}; runtime over the {l} s budget"),
                    _ => detail,
                };
                (ok && in_time, detail)
            }
            Err(e) => (false, format!("error: {e}")),
        };
        Ok(CriterionOutcome { id, title: title(id), passed, detail, elapsed_seconds })
    }

    fn c01(&self) -> Result<Check> {
        let mut worst = 0.0f64;
        let mut slowest = 0.0f64;
        for p in both() {
            let t = Instant::now();
            let (c, _) = solve_finite(&p, 2, &self.options)?;
            slowest = slowest.max(t.elapsed().as_secs_f64());
            worst = worst.max((c.position(1) - 0.5).abs());
        }
        Ok((
            worst <= 1e-12 && slowest < 1e-3,
            format!("|x(1) - 1/2| = {worst:.1e}, slowest solve {:.3} ms", slowest * 1e3),
            None,
        ))
    }

    fn c02(&self) -> Result<Check> {
        let mut worst = 0.0f64;
        for p in both() {
            for n in 3..=5 {
                let (c, _) = solve_finite(&p, n, &self.options)?;
                let oracle = brute_force_minimiser(&p, n)?;
                for (x, y) in c.positions().iter().zip(&oracle) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        Ok((worst <= 1e-8, format!("max coordinate gap to brute force {worst:.1e}"), Some(10.0)))
    }

    fn sweep_rate(&self, p: PotentialSpec, model: RateModel) -> Result<Check> {
        let plan = SweepPlan::new(p, sweep_sizes(), SWEEP_PROBES.to_vec(), self.options)?;
        let table = incremental_error_cached(&plan, &self.cache)?;
        let fits = fit_probes(&table, &SWEEP_PROBES, model)?;
        let spread = slope_spread(&fits);
        let ok = fits.iter().all(|f| (-1.15..=-0.85).contains(&f.fit.slope) && f.fit.r2 >= 0.98) && spread <= 0.1;
        let slopes: Vec<String> =
            fits.iter().map(|f| format!("i={} slope {:.3} r2 {:.4}", f.i, f.fit.slope, f.fit.r2)).collect();
        Ok((ok, format!("{:?} fit: {}; spread {spread:.3}", model, slopes.join(", ")), Some(180.0)))
    }

    fn c11(&self) -> Result<Check> {
        let mut fields: Vec<StrainField> = Vec::new();
        for p in both() {
            for n in 2..=5 {
                fields.push(strain(&solve_finite(&p, n, &self.options)?.0));
            }
            let plan = SweepPlan::new(p, sweep_sizes(), SWEEP_PROBES.to_vec(), self.options)?;
            self.cache.ensure(&p, &plan.sizes(), &self.options, crate::harness::sweep::worker_count())?;
            for n in plan.sizes() {
                fields.push(strain(&self.cache.get(&p, n, &self.options).expect("ensured").0));
            }
        }
        let mut rev = 0.0f64;
        let mut sum_ok = true;
        let mut worst_sum = 0.0f64;
        for e in &fields {
            let (r, s) = symmetry_errors(e);
            rev = rev.max(r);
            worst_sum = worst_sum.max(s / e.n() as f64);
            sum_ok &= s <= 1e-12 * e.n() as f64;
        }
        Ok((
            rev <= 1e-8 && sum_ok,
            format!("{} solves: max reversal error {rev:.1e}, max |sum eps|/n {worst_sum:.1e}", fields.len()),
            None,
        ))
    }

    fn c13(&self) -> Result<Check> {
        let p = a2();
        let (free, trunc) = (1000, 1100);
        let (sol, _) = solve_bl(&p, free, trunc, &self.options)?;
        let sigma = sigma_inf(&p, free, 1e-13)?;
        let limit = limit_energy_trunc(&p, &sol.strains(), 2 * free, &sigma)?;
        let mut gaps = Vec::new();
        for n in [64usize, 256, 1024] {
            let c = match self.cache.get(&p, n, &self.options) {
                Some(s) => s.0.clone(),
                None => solve_finite(&p, n, &self.options)?.0,
            };
            gaps.push((renorm_energy(&p, &strain(&c)) - 2.0 * limit).abs());
        }
        let ok = gaps.windows(2).all(|w| w[1] <= w[0]);
        Ok((
            ok,
            format!("2 E_inf = {:.6}; gaps {:.3e}, {:.3e}, {:.3e}", 2.0 * limit, gaps[0], gaps[1], gaps[2]),
            Some(60.0),
        ))
    }
}

/// (passed, detail, runtime budget in seconds)
type Check = (bool, String, Option<f64>);

fn c05() -> Result<Check> {
    let opts = SolverOptions::default();
    let pi2 = std::f64::consts::PI.powi(2);
    let (s2, _) = solve_bl(&a2(), 1000, 1100, &opts)?;
    let f2 = extract_decay_constant(&s2, 20..=100)?;
    let c2 = 1.0 / pi2;
    let (s3, _) = solve_bl(&PotentialSpec::power_law(3.0)?, 1000, 1100, &opts)?;
    let f3 = extract_decay_constant(&s3, 10..=60)?;
    let c3 = 1.0 / (24.0 * 1.2020569031595942);
    let r2 = (f2.c - c2).abs() / c2;
    let r3 = (f3.c - c3).abs() / c3;
    let ok = (0.9..=1.1).contains(&f2.q) && r2 <= 0.10 && (1.8..=2.2).contains(&f3.q) && r3 <= 0.15;
    Ok((
        ok,
        format!(
            "a=2: q {:.4}, C {:.5} ({:.1}% off 1/pi^2); a=3: q {:.4}, C {:.5} ({:.1}% off)",
            f2.q,
            f2.c,
            100.0 * r2,
            f3.q,
            f3.c,
            100.0 * r3
        ),
        Some(60.0),
    ))
}

/// Uniform strains in `(-0.5, 0.5)` shifted to zero sum.
pub fn random_strain(rng: &mut impl Rng, n: usize) -> StrainField {
    let mut e: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mean = e.iter().sum::<f64>() / n as f64;
    for v in &mut e {
        *v -= mean;
    }
    // remove the rounding left in the sum
    let rest: f64 = e.iter().sum();
    e[n - 1] -= rest;
    StrainField::new(e).expect("feasible by construction")
}

fn c06() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut count = 0;
    for p in both() {
        for n in [4usize, 8, 16, 32] {
            for _ in 0..100 {
                let e = random_strain(&mut rng, n);
                let direct = renorm_energy(&p, &e);
                let split = renorm_energy_split(&p, &e);
                worst = worst.max((direct - split.total()).abs() / (1.0 + direct.abs()));
                count += 1;
            }
        }
    }
    Ok((worst <= 1e-10, format!("{count} strains, max scaled mismatch {worst:.1e}"), Some(5.0)))
}

fn c07() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut lower = 0;
    let mut upper = 0;
    let mut upper_tested = 0;
    for p in both() {
        for _ in 0..10_000 {
            let k: usize = rng.gen_range(1..=50);
            let kf = k as f64;
            let y = rng.gen_range(-kf + 0.01..20.0);
            let value = phi(&p, k, y)?;
            if value < phi_lower_bound(&p, k, y)? {
                lower += 1;
            }
            for delta in [0.5, 0.9] {
                if y >= kf * (delta - 1.0) {
                    upper_tested += 1;
                    if value > 0.5 * y * y * p.d2(kf * delta) {
                        upper += 1;
                    }
                }
            }
        }
    }
    Ok((
        lower == 0 && upper == 0,
        format!("lower-bound violations {lower}/20000, upper-bound violations {upper}/{upper_tested}"),
        Some(1.0),
    ))
}

fn c08() -> Result<Check> {
    let p = a2();
    let pts: Vec<(f64, f64)> =
        (6..=14).map(|k| 1usize << k).map(|n| Ok((n as f64, stress_gap_l2(&p, n)?))).collect::<Result<_>>()?;
    let fit = fit_rate(&pts, RateModel::PurePower)?;
    Ok((
        (-0.6..=-0.4).contains(&fit.slope),
        format!("slope {:.4} (r2 {:.5}) over n = 2^6..2^14", fit.slope, fit.r2),
        Some(30.0),
    ))
}

fn c09() -> Result<Check> {
    let mut violations = 0;
    let mut worst = 0.0f64;
    for a in [2.0, 3.0] {
        let p = PotentialSpec::power_law(a)?;
        for c in [5.0, 10.0, 20.0] {
            let t = em_tail_check(&p, c, 10_000_000)?;
            worst = worst.max((t.approx - t.direct).abs() / t.bound);
            if !t.within_bound() {
                violations += 1;
            }
        }
    }
    Ok((violations == 0, format!("violations {violations}/6, largest error/bound {worst:.3}"), Some(30.0)))
}

/// Largest relative gap between the force residual and central differences
/// of `n E_n` in the rescaled positions.
pub fn gradient_mismatch(p: &PotentialSpec, c: &Configuration) -> f64 {
    let n = c.n();
    let nf = n as f64;
    let r = residual(p, c);
    let x = c.positions();
    let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut worst = 0.0f64;
    for i in 1..n {
        let gap = (x[i] - x[i - 1]).min(x[i + 1] - x[i]) * nf;
        let h = 1e-4 * gap;
        let shifted = |s: f64| {
            let mut y = x.clone();
            y[i] += s / nf;
            nf * energy_total(p, &Configuration::from_positions(&y).expect("small shift keeps order"))
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        worst = worst.max((fd - r[i - 1]).abs() / scale);
    }
    worst
}

/// Random ordered configuration with gaps drawn from `(0.2, 1.8) / n`.
pub fn random_configuration(rng: &mut impl Rng, n: usize) -> Configuration {
    let gaps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.8)).collect();
    let total: f64 = gaps.iter().sum();
    let mut x = Vec::with_capacity(n + 1);
    x.push(0.0);
    let mut acc = 0.0;
    for g in &gaps[..n - 1] {
        acc += g / total;
        x.push(acc);
    }
    x.push(1.0);
    Configuration::from_positions(&x).expect("ordered by construction")
}

fn c10() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for p in both() {
        for n in [4usize, 16, 64] {
            for _ in 0..50 {
                worst = worst.max(gradient_mismatch(&p, &random_configuration(&mut rng, n)));
            }
        }
    }
    Ok((worst <= 1e-6, format!("300 configurations, max relative error {worst:.1e}"), Some(10.0)))
}

fn c12() -> Result<Check> {
    let ns = [100usize, 1000, 10_000];
    let bad = illposedness_demo(&PotentialSpec::power_law(1.2)?, 0.6, &ns)?;
    let good = decaying_strain_energies(&a2(), 0.6, &ns)?;
    let decreasing = bad.windows(2).all(|w| w[1] < w[0]) && bad[2] < bad[0] - 1.0;
    // contrast: increments shrink and the values stay in a band of width < 2
    let d1 = (good[1] - good[0]).abs();
    let d2 = (good[2] - good[1]).abs();
    let spread =
        good.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - good.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let bounded = d2 < d1 && spread < 2.0;
    Ok((
        decreasing && bounded,
        format!(
            "a=1.2: {:.3}, {:.3}, {:.3}; a=2: {:.3}, {:.3}, {:.3}",
            bad[0], bad[1], bad[2], good[0], good[1], good[2]
        ),
        Some(60.0),
    ))
}
