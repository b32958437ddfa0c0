//! The semi-infinite boundary-layer problem, truncated for computation.
//!
//! Particles `y(0) = 0 < y(1) < ...` feel the whole half-lattice. Beyond the
//! free index `I` the lattice is taken rigidly equispaced, explicit
//! interactions run up to `J - 1`, and the remaining tail `j >= J` is
//! replaced by its Euler-Maclaurin integral plus half-term correction.
//!
//! Residual sign convention: entry `i` is the energy gradient
//! `sum_{j != i} V'(y(i) - y(j))` with `V'` extended oddly, the same
//! convention as [`crate::equilibrium::residual`]. At the equispaced guess
//! it is positive: the lattice on the right pushes towards the wall harder
//! than the single wall particle pushes back.

use std::ops::RangeInclusive;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::equilibrium::{ordering_cap, Configuration, SolverOptions, SolverReport};
use crate::error::{domain, parameter, Error, Result};
use crate::harness::fit::linear_regression;
use crate::potential::PotentialSpec;

/// Solution of the truncated boundary-layer system.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLayerSolution {
    free: usize,
    trunc: usize,
    // u(i) = y(i) - i for i = 0..=I; u(j) = u(I) beyond.
    disp: Vec<f64>,
}

impl BoundaryLayerSolution {
    /// Equispaced `y(j) = j`.
    pub fn equispaced(free: usize, trunc: usize) -> Result<Self> {
        check_indices(free, trunc)?;
        Ok(Self { free, trunc, disp: vec![0.0; free + 1] })
    }

    /// Builds `y` from boundary-layer strains `eps(1..=I)`.
    pub fn from_strains(eps: &[f64], trunc: usize) -> Result<Self> {
        let free = eps.len();
        check_indices(free, trunc)?;
        if let Some(e) = eps.iter().find(|&&e| !(e > -1.0)) {
            return Err(domain(format!("strain {e} collapses a gap")));
        }
        let mut disp = Vec::with_capacity(free + 1);
        disp.push(0.0);
        let mut acc = 0.0;
        for &e in eps {
            acc += e;
            disp.push(acc);
        }
        Ok(Self { free, trunc, disp })
    }

    /// Builds from positions `y(0..=I)`; the tail is implied.
    pub fn from_positions(y: &[f64], trunc: usize) -> Result<Self> {
        if y.is_empty() || y[0] != 0.0 {
            return Err(domain("y(0) must be 0"));
        }
        let eps: Vec<f64> = y.windows(2).map(|w| w[1] - w[0] - 1.0).collect();
        Self::from_strains(&eps, trunc)
    }

    /// Last free index `I`.
    pub fn free_len(&self) -> usize {
        self.free
    }

    /// Truncation index `J`.
    pub fn trunc_len(&self) -> usize {
        self.trunc
    }

    /// Displacement `y(j) - j`; constant for `j >= I`.
    pub fn displacement(&self, j: usize) -> f64 {
        self.disp[j.min(self.free)]
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 + self.displacement(j)
    }

    /// `y(0..=J)`.
    pub fn positions(&self) -> Vec<f64> {
        (0..=self.trunc).map(|j| self.y(j)).collect()
    }

    /// `eps_l(i) = y(i) - y(i-1) - 1` for `i = 1..=I`.
    pub fn strains(&self) -> Vec<f64> {
        self.disp.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Rescaled distance `y(k) - y(i)` for `k > i`, without cancellation.
    #[inline]
    fn dist(&self, i: usize, k: usize) -> f64 {
        (k - i) as f64 + (self.displacement(k) - self.displacement(i))
    }
}

fn check_indices(free: usize, trunc: usize) -> Result<()> {
    if free == 0 || trunc <= free {
        return Err(parameter(format!("need 1 <= I < J, got I = {free}, J = {trunc}")));
    }
    Ok(())
}

/// Euler-Maclaurin closure of `sum_{j >= J} V'(y(i) - y(j))`, as a function
/// of `d = y(J) - y(i)`: `V(d) - V'(d)/2`.
#[inline]
fn tail(p: &PotentialSpec, d: f64) -> (f64, f64) {
    let (d1, d2) = p.d1_d2(d);
    (p.v(d) - 0.5 * d1, d1 - 0.5 * d2)
}

/// Residual of the truncated force balance at `i = 1..=I`.
pub fn bl_residual(p: &PotentialSpec, sol: &BoundaryLayerSolution) -> Vec<f64> {
    (1..=sol.free).map(|i| force(p, sol, i)).collect()
}

fn force(p: &PotentialSpec, sol: &BoundaryLayerSolution, i: usize) -> f64 {
    let mut s = 0.0;
    for m in 1..sol.trunc {
        let mut pair = 0.0;
        if m <= i {
            pair += p.d1(sol.dist(i - m, i));
        }
        if i + m < sol.trunc {
            pair -= p.d1(sol.dist(i, i + m));
        }
        s += pair;
    }
    s + tail(p, sol.dist(i, sol.trunc)).0
}

/// Jacobian of [`bl_residual`] with respect to `u(1..=I)`.
fn jacobian(p: &PotentialSpec, sol: &BoundaryLayerSolution) -> DMatrix<f64> {
    let m = sol.free;
    let col = |j: usize| j.min(m);
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for i in 1..=m {
        let r = i - 1;
        for j in 0..sol.trunc {
            if j == i {
                continue;
            }
            let d = if j < i { sol.dist(j, i) } else { sol.dist(i, j) };
            let h = p.d2(d);
            jac[(r, r)] += h;
            if col(j) >= 1 {
                jac[(r, col(j) - 1)] -= h;
            }
        }
        // d = y(J) - y(i) grows with u(I) and shrinks with u(i).
        let dt = tail(p, sol.dist(i, sol.trunc)).1;
        jac[(r, m - 1)] += dt;
        jac[(r, r)] -= dt;
    }
    jac
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton iteration on `u(1..=I)` from the equispaced guess, backtracking on
/// the residual norm and never shrinking a gap below 10% in one step.
pub fn solve_bl(
    p: &PotentialSpec,
    free: usize,
    trunc: usize,
    opts: &SolverOptions,
) -> Result<(BoundaryLayerSolution, SolverReport)> {
    opts.validate()?;
    let start = Instant::now();
    let mut sol = BoundaryLayerSolution::equispaced(free, trunc)?;
    let mut res = bl_residual(p, &sol);
    let mut history = vec![sup_norm(&res)];
    let mut iterations = 0;

    let fail = |iterations, history: Vec<f64>, sol: &BoundaryLayerSolution| Error::NonConvergence {
        iterations,
        residual: *history.last().unwrap(),
        history,
        last_iterate: sol.disp.clone(),
    };

    while *history.last().unwrap() > opts.residual_tol {
        if iterations >= opts.max_iters {
            return Err(fail(iterations, history, &sol));
        }
        iterations += 1;
        let jac = jacobian(p, &sol);
        let rhs = DVector::from_iterator(free, res.iter().map(|r| -r));
        let step = jac.lu().solve(&rhs).ok_or_else(|| domain("singular boundary-layer Jacobian"))?;

        let mut dir = vec![0.0; free + 1];
        dir[1..].copy_from_slice(step.as_slice());
        let mut t = ordering_cap(&sol.disp, &dir);
        let norm0 = l2(&res);
        let mut trial = sol.clone();
        loop {
            for k in 1..=free {
                trial.disp[k] = sol.disp[k] + t * dir[k];
            }
            let gaps_ok = trial.disp.windows(2).all(|w| 1.0 + w[1] - w[0] > 0.0);
            if gaps_ok {
                let r_new = bl_residual(p, &trial);
                let n_new = l2(&r_new);
                if n_new <= (1.0 - 1e-4 * t) * norm0 || sup_norm(&r_new) <= opts.residual_tol {
                    sol = trial;
                    res = r_new;
                    break;
                }
            }
            t *= opts.backtrack_factor;
            if t < 1e-10 {
                return Err(fail(iterations, history, &sol));
            }
        }
        history.push(sup_norm(&res));
    }

    let report = SolverReport {
        iterations,
        residual_norm: *history.last().unwrap(),
        residual_history: history,
        energy_history: Vec::new(),
        energy_noise_floor: 0.0,
        hessian_bandwidth: free.saturating_sub(1),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((sol, report))
}

/// Default `(I, J)` truncation for each potential family.
pub fn default_truncation(p: &PotentialSpec) -> (usize, usize) {
    if p.is_power_law() {
        (1000, 1100)
    } else {
        (200, 220)
    }
}

/// Power-law decay fit `-eps_l(i) ~ C i^-q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub c: f64,
    pub q: f64,
    pub r2: f64,
}

/// Least-squares fit of `log(-eps_l(i)) = log C - q log i` over `window`,
/// which must lie inside `[2, 0.8 I]`.
pub fn extract_decay_constant(sol: &BoundaryLayerSolution, window: RangeInclusive<usize>) -> Result<DecayFit> {
    let (lo, hi) = (*window.start(), *window.end());
    let limit = (0.8 * sol.free as f64).floor() as usize;
    if lo < 2 || hi > limit || hi <= lo {
        return Err(parameter(format!("decay window {lo}..={hi} must lie in [2, {limit}]")));
    }
    let eps = sol.strains();
    let mut xs = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for i in window {
        let e = eps[i - 1];
        if !(e < 0.0) {
            return Err(Error::FitUndefined(format!("eps_l({i}) = {e} is not negative")));
        }
        xs.push((i as f64).ln());
        ys.push((-e).ln());
    }
    let line = linear_regression(&xs, &ys)?;
    Ok(DecayFit { c: line.intercept.exp(), q: -line.slope, r2: line.r2 })
}

/// Default window for the decay fit, `[I/50, I/10]`.
pub fn default_decay_window(free: usize) -> RangeInclusive<usize> {
    (free / 50).max(2)..=(free / 10).max(3)
}

/// Default window for the offset estimate, `[I/2, 9I/10]`.
pub fn default_offset_window(free: usize) -> RangeInclusive<usize> {
    (free / 2).max(1)..=(9 * free / 10).max(1)
}

/// `2 mean_{i in window} (i - y(i))`: the matching offset `p_1` (for
/// `a > 2`) or `p~` (for `a = 2`).
pub fn extract_p1(sol: &BoundaryLayerSolution, window: RangeInclusive<usize>) -> Result<f64> {
    let (lo, hi) = (*window.start(), *window.end());
    if lo < 1 || hi > sol.free || hi < lo {
        return Err(Error::Index(format!("offset window {lo}..={hi} outside 1..={}", sol.free)));
    }
    let sum: f64 = window.map(|i| -sol.displacement(i)).sum();
    Ok(2.0 * sum / (hi - lo + 1) as f64)
}

/// Finite-n configuration built from the boundary layer, mirrored about the
/// midpoint.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub configuration: Configuration,
    /// `s - 1`, where the left half is scaled by `s` so that the mirrored
    /// halves meet.
    pub midpoint_correction: f64,
}

/// `x^(i) = s y(i)/n` on the left half and `1 - x^(n - i)` on the right, with
/// `s = n / (y(h) + y(n - h))`, `h = floor(n/2)`, so the middle gap is the
/// scaled boundary-layer gap.
pub fn predictor_positions(sol: &BoundaryLayerSolution, n: usize) -> Result<Predictor> {
    if n < 2 {
        return Err(parameter("predictor needs n >= 2"));
    }
    let half = n / 2;
    if half > sol.free {
        return Err(Error::Index(format!("n/2 = {half} exceeds the free range I = {}", sol.free)));
    }
    let nf = n as f64;
    // y(h) + y(n - h) = n + u(h) + u(n - h)
    let scale = nf / (nf + (sol.disp[half] + sol.disp[n - half]));
    let mut disp = vec![0.0; n + 1];
    let left = if n.is_multiple_of(2) { half - 1 } else { half };
    for i in 1..=left {
        // s (i + u) - i, grouped to keep small displacements exact
        let d = scale * sol.disp[i] + (scale - 1.0) * i as f64;
        disp[i] = d;
        disp[n - i] = -d;
    }
    Ok(Predictor { configuration: Configuration::from_displacements(disp)?, midpoint_correction: scale - 1.0 })
}

/// Euler-Maclaurin tail estimate against direct summation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCheck {
    /// `-V(c) + V'(c)/2`
    pub approx: f64,
    /// `sum_{k=0}^{kmax} V'(c + k)` plus the integral closure beyond `kmax`.
    pub direct: f64,
    /// `V''(c)/12`
    pub bound: f64,
}

impl TailCheck {
    pub fn within_bound(&self) -> bool {
        (self.approx - self.direct).abs() <= self.bound
    }
}

pub fn em_tail_check(p: &PotentialSpec, c: f64, kmax: usize) -> Result<TailCheck> {
    if !(c > 0.0) {
        return Err(domain("tail offset must be positive"));
    }
    if kmax < 100_000 {
        return Err(parameter("direct tail summation needs kmax >= 1e5"));
    }
    let approx = -p.v(c) + 0.5 * p.d1(c);
    // smallest terms first
    let mut direct = 0.0;
    for k in (0..=kmax).rev() {
        direct += p.d1(c + k as f64);
    }
    let far = c + kmax as f64;
    direct += -p.v(far) - 0.5 * p.d1(far);
    Ok(TailCheck { approx, direct, bound: p.d2(c) / 12.0 })
}
