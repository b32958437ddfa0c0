//! Equilibria of `n + 1` particles pinned at both ends of `[0, 1]`.
//!
//! Internally every configuration is stored through its rescaled
//! displacements `u(i) = n x(i) - i`. Rescaled distances are then
//! `(k - i) + u(k) - u(i)`, which keeps full relative precision in the gaps
//! even when `n` is in the thousands; absolute positions would lose about
//! `log2(n)` bits in every gap.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{domain, parameter, Error, Result};
use crate::linalg::BandedSpd;
use crate::potential::PotentialSpec;

/// Positions `x(0) = 0 < x(1) < ... < x(n) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    n: usize,
    disp: Vec<f64>,
}

impl Configuration {
    pub fn equispaced(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(parameter("need at least one gap (n >= 1)"));
        }
        Ok(Self { n, disp: vec![0.0; n + 1] })
    }

    /// Builds a configuration from absolute positions.
    pub fn from_positions(x: &[f64]) -> Result<Self> {
        if x.len() < 2 {
            return Err(parameter("a configuration needs at least two positions"));
        }
        let n = x.len() - 1;
        if x[0] != 0.0 || x[n] != 1.0 {
            return Err(domain(format!("endpoints must be pinned at 0 and 1, got {} and {}", x[0], x[n])));
        }
        let nf = n as f64;
        let mut disp: Vec<f64> = x.iter().enumerate().map(|(i, &xi)| nf * xi - i as f64).collect();
        disp[0] = 0.0;
        disp[n] = 0.0;
        Self::from_displacements(disp)
    }

    /// Builds a configuration from rescaled displacements `u(0..=n)`; the
    /// endpoints must be zero.
    pub fn from_displacements(disp: Vec<f64>) -> Result<Self> {
        if disp.len() < 2 {
            return Err(parameter("a configuration needs at least two positions"));
        }
        let n = disp.len() - 1;
        if disp[0] != 0.0 || disp[n] != 0.0 {
            return Err(domain("pinned endpoints must have zero displacement"));
        }
        if let Some(i) = (1..=n).find(|&i| !(1.0 + disp[i] - disp[i - 1] > 0.0)) {
            return Err(domain(format!("positions {} and {} coincide or are out of order", i - 1, i)));
        }
        Ok(Self { n, disp })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn displacements(&self) -> &[f64] {
        &self.disp
    }

    pub fn position(&self, i: usize) -> f64 {
        if i == self.n {
            1.0
        } else {
            (i as f64 + self.disp[i]) / self.n as f64
        }
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.position(i)).collect()
    }

    /// Rescaled gap `n [x(i) - x(i-1)]`.
    pub fn gap(&self, i: usize) -> f64 {
        1.0 + self.disp[i] - self.disp[i - 1]
    }
}

/// Strains `eps(1..=n)` of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainField {
    eps: Vec<f64>,
}

impl StrainField {
    /// Validates `eps(i) > -1` and the zero-sum constraint (to `1e-12 n`).
    pub fn new(eps: Vec<f64>) -> Result<Self> {
        if eps.is_empty() {
            return Err(parameter("strain field must be nonempty"));
        }
        if let Some(e) = eps.iter().find(|&&e| !(e > -1.0)) {
            return Err(domain(format!("strain {e} collapses a gap")));
        }
        let sum: f64 = eps.iter().sum();
        if sum.abs() > 1e-12 * eps.len() as f64 {
            return Err(domain(format!("strains must sum to zero, sum = {sum:e}")));
        }
        Ok(Self { eps })
    }

    pub fn n(&self) -> usize {
        self.eps.len()
    }

    /// Zero-based slice: `values()[i - 1]` is `eps(i)`.
    pub fn values(&self) -> &[f64] {
        &self.eps
    }

    pub fn get(&self, i: usize) -> f64 {
        self.eps[i - 1]
    }

    /// `eps(n + 1 - i)`.
    pub fn reversed(&self) -> Self {
        Self { eps: self.eps.iter().rev().copied().collect() }
    }

    pub fn to_configuration(&self) -> Configuration {
        let n = self.eps.len();
        let mut disp = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        disp.push(0.0);
        for &e in &self.eps[..n - 1] {
            acc += e;
            disp.push(acc);
        }
        disp.push(0.0);
        Configuration { n, disp }
    }
}

pub fn strain(c: &Configuration) -> StrainField {
    let eps = (1..=c.n).map(|i| c.disp[i] - c.disp[i - 1]).collect();
    StrainField { eps }
}

/// `rho(i) = 2 / (eps(i) + eps(i + 1) + 2)` for `i = 1..n-1`.
pub fn discrete_density(c: &Configuration) -> Result<Vec<f64>> {
    if c.n < 2 {
        return Err(parameter("discrete density needs n >= 2"));
    }
    Ok((1..c.n).map(|i| 2.0 / (c.disp[i + 1] - c.disp[i - 1] + 2.0)).collect())
}

/// Net force functional `dE_n/dx(i) = -sum_{k != i} V'(n[x(k) - x(i)])`
/// for the free particles `i = 1..n-1`.
pub fn residual(p: &PotentialSpec, c: &Configuration) -> Vec<f64> {
    let g = pair_sums(p, &c.disp, false).1;
    g[1..c.n].to_vec()
}

/// `E_n(x) = (1/n) sum_{i<k} V(n |x(k) - x(i)|)`.
pub fn energy_total(p: &PotentialSpec, c: &Configuration) -> f64 {
    pair_sums(p, &c.disp, true).0 / c.n as f64
}

/// Energy `n E_n` (if requested) and its gradient with respect to every
/// rescaled position, pinned ones included.
fn pair_sums(p: &PotentialSpec, u: &[f64], with_energy: bool) -> (f64, Vec<f64>) {
    let n = u.len() - 1;
    let mut grad = vec![0.0; n + 1];
    let mut energy = 0.0;
    for i in 0..n {
        let ui = u[i];
        let mut gi = 0.0;
        let mut ei = 0.0;
        for k in i + 1..=n {
            let d = (k - i) as f64 + (u[k] - ui);
            let f = p.d1(d);
            gi -= f;
            grad[k] += f;
            if with_energy {
                ei += p.v(d);
            }
        }
        grad[i] += gi;
        energy += ei;
    }
    let energy = if with_energy { energy } else { f64::NAN };
    (energy, grad)
}

fn has_collapsed_gap(u: &[f64]) -> bool {
    u.windows(2).any(|w| !(1.0 + w[1] - w[0] > 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HessianMode {
    /// Dense up to `AUTO_DENSE_LIMIT` unknowns, banded beyond.
    Auto,
    Dense,
    /// Keep interactions within this index distance. Newton then converges
    /// linearly; the residual is always the full force sum.
    Banded(usize),
}

pub const AUTO_DENSE_LIMIT: usize = 1024;
pub const AUTO_BANDWIDTH: usize = 128;

impl HessianMode {
    fn bandwidth(self, unknowns: usize) -> usize {
        match self {
            HessianMode::Dense => unknowns,
            HessianMode::Banded(m) => m.max(1),
            HessianMode::Auto if unknowns <= AUTO_DENSE_LIMIT => unknowns,
            HessianMode::Auto => AUTO_BANDWIDTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Sup-norm tolerance on the force residual.
    pub residual_tol: f64,
    pub max_iters: usize,
    pub backtrack_factor: f64,
    pub hessian: HessianMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { residual_tol: 1e-12, max_iters: 200, backtrack_factor: 0.5, hessian: HessianMode::Auto }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { residual_tol: tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(parameter("residual_tol must be positive"));
        }
        if self.max_iters == 0 {
            return Err(parameter("max_iters must be positive"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(parameter("backtrack_factor must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Diagnostics of a Newton solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub residual_norm: f64,
    /// Residual sup-norm at every iterate, starting with the initial guess.
    pub residual_history: Vec<f64>,
    /// Objective at every accepted iterate (empty for non-variational solves).
    pub energy_history: Vec<f64>,
    /// Rounding floor of the energy evaluation; differences below it are noise.
    pub energy_noise_floor: f64,
    pub hessian_bandwidth: usize,
    pub elapsed_seconds: f64,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest step length in `(0, 1]` along `dir` that keeps every gap at no
/// less than 10% of its current length.
pub(crate) fn ordering_cap(u: &[f64], dir: &[f64]) -> f64 {
    let mut t = 1.0f64;
    for i in 1..u.len() {
        let gap = 1.0 + u[i] - u[i - 1];
        let dg = dir[i] - dir[i - 1];
        if dg < 0.0 {
            t = t.min(0.9 * gap / -dg);
        }
    }
    t
}

fn hessian(p: &PotentialSpec, u: &[f64], bandwidth: usize) -> BandedSpd {
    // Unknowns are u(1..n-1); row r corresponds to particle r + 1.
    let n = u.len() - 1;
    let m = n - 1;
    let mut h = BandedSpd::zeros(m, bandwidth);
    let bw = h.half_bandwidth();
    for i in 0..n {
        // Interactions beyond the band are dropped entirely (also from the
        // diagonal), so the banded matrix is the exact Hessian of the
        // truncated-range energy and stays positive definite.
        let kmax = if bw + 1 >= n { n } else { (i + bw).min(n) };
        for k in i + 1..=kmax {
            let d = (k - i) as f64 + (u[k] - u[i]);
            let h2 = p.d2(d);
            if i >= 1 {
                h.add_lower(i - 1, i - 1, h2);
            }
            if k <= m {
                h.add_lower(k - 1, k - 1, h2);
            }
            if i >= 1 && k <= m {
                h.add_lower(k - 1, i - 1, -h2);
            }
        }
    }
    h
}

/// Damped Newton iteration for the strictly convex energy `n E_n` over the
/// interior displacements, starting from the equispaced configuration.
pub fn solve_finite(p: &PotentialSpec, n: usize, opts: &SolverOptions) -> Result<(Configuration, SolverReport)> {
    opts.validate()?;
    let start = Instant::now();
    let mut u = vec![0.0; n + 1];
    if n == 0 {
        return Err(parameter("need at least one gap (n >= 1)"));
    }
    if n == 1 {
        let report = SolverReport {
            iterations: 0,
            residual_norm: 0.0,
            residual_history: vec![0.0],
            energy_history: vec![p.v(1.0)],
            energy_noise_floor: 0.0,
            hessian_bandwidth: 0,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        };
        return Ok((Configuration { n, disp: u }, report));
    }

    let unknowns = n - 1;
    let bandwidth = opts.hessian.bandwidth(unknowns);
    let (mut energy, mut grad) = pair_sums(p, &u, true);
    let npairs = (n * (n + 1) / 2) as f64;
    let noise_floor = 8.0 * f64::EPSILON * energy * npairs.sqrt();
    let mut residual_history = vec![sup_norm(&grad[1..n])];
    let mut energy_history = vec![energy];

    let mut iterations = 0;
    loop {
        let rnorm = *residual_history.last().unwrap();
        if rnorm <= opts.residual_tol {
            break;
        }
        if iterations >= opts.max_iters {
            return Err(Error::NonConvergence {
                iterations,
                residual: rnorm,
                history: residual_history,
                last_iterate: u,
            });
        }
        iterations += 1;

        let chol = hessian(p, &u, bandwidth).factor()?;
        let step = chol.solve(&grad[1..n]);
        let mut dir = vec![0.0; n + 1];
        for (d, s) in dir[1..n].iter_mut().zip(&step) {
            *d = -s;
        }
        let slope0 = dot(&grad[1..n], &dir[1..n]);
        if !(slope0 < 0.0) {
            // Gradient too small for the direction to be resolved.
            return Err(Error::NonConvergence {
                iterations,
                residual: rnorm,
                history: residual_history,
                last_iterate: u,
            });
        }

        let mut t = ordering_cap(&u, &dir);
        let mut trial = vec![0.0; n + 1];
        loop {
            for i in 1..n {
                trial[i] = u[i] + t * dir[i];
            }
            if !has_collapsed_gap(&trial) {
                let (e_new, g_new) = pair_sums(p, &trial, true);
                let slope = dot(&g_new[1..n], &dir[1..n]);
                // Along the search line the energy is convex, so a
                // non-positive slope at the trial point certifies descent.
                let accept = slope <= 0.0
                    || e_new <= energy
                    || ((e_new - energy).abs() <= noise_floor && sup_norm(&g_new[1..n]) < rnorm);
                if accept {
                    energy = e_new.min(energy);
                    grad = g_new;
                    std::mem::swap(&mut u, &mut trial);
                    break;
                }
            }
            t *= opts.backtrack_factor;
            if t < 1e-14 {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: rnorm,
                    history: residual_history,
                    last_iterate: u,
                });
            }
        }
        residual_history.push(sup_norm(&grad[1..n]));
        energy_history.push(energy);
    }

    let report = SolverReport {
        iterations,
        residual_norm: *residual_history.last().unwrap(),
        residual_history,
        energy_history,
        energy_noise_floor: noise_floor,
        hessian_bandwidth: bandwidth.min(unknowns - 1),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((Configuration { n, disp: u }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn a2() -> PotentialSpec {
        PotentialSpec::power_law(2.0).unwrap()
    }

    #[test]
    fn residual_two_gaps() {
        let p = a2();
        let c = Configuration::from_positions(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(residual(&p, &c), vec![0.0]);

        let c = Configuration::from_positions(&[0.0, 0.4, 1.0]).unwrap();
        let r = residual(&p, &c);
        // V'(0.8) - V'(1.2) = -2 (0.8^-3 - 1.2^-3)
        let expected = -2.0 * (0.8f64.powi(-3) - 1.2f64.powi(-3));
        assert_relative_eq!(r[0], expected, max_relative = 1e-12);
        assert_relative_eq!(r[0], -2.748842592592593, max_relative = 1e-12);
    }

    #[test]
    fn equispaced_residual_is_antisymmetric_boundary_pull() {
        let p = a2();
        let c = Configuration::equispaced(4).unwrap();
        let r = residual(&p, &c);
        assert_eq!(r[1], 0.0);
        assert!(r[0] != 0.0);
        assert_relative_eq!(r[0], -r[2], max_relative = 1e-15);
    }

    #[test]
    fn energy_small_cases() {
        let p = a2();
        assert_relative_eq!(energy_total(&p, &Configuration::equispaced(2).unwrap()), 1.125);
        assert_relative_eq!(energy_total(&p, &Configuration::equispaced(1).unwrap()), 1.0);
        let direct = (4.0 + 3.0 * 0.25 + 2.0 / 9.0 + 1.0 / 16.0) / 4.0;
        assert_relative_eq!(energy_total(&p, &Configuration::equispaced(4).unwrap()), direct, max_relative = 1e-15);
        assert_relative_eq!(direct, 1.2586805555555556, max_relative = 1e-15);
    }

    #[test]
    fn strain_and_density() {
        let c = Configuration::from_positions(&[0.0, 0.4, 1.0]).unwrap();
        let e = strain(&c);
        assert_relative_eq!(e.get(1), -0.2, epsilon = 1e-15);
        assert_relative_eq!(e.get(2), 0.2, epsilon = 1e-15);
        assert_eq!(discrete_density(&c).unwrap(), vec![1.0]);

        let c = Configuration::equispaced(8).unwrap();
        assert!(strain(&c).values().iter().all(|&e| e == 0.0));
        assert!(discrete_density(&c).unwrap().iter().all(|&r| r == 1.0));
        assert!(discrete_density(&Configuration::equispaced(1).unwrap()).is_err());
    }

    #[test]
    fn invalid_configurations() {
        assert!(Configuration::from_positions(&[0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Configuration::from_positions(&[0.0, 0.7, 0.6, 1.0]).is_err());
        assert!(Configuration::from_positions(&[0.1, 0.5, 1.0]).is_err());
        assert!(Configuration::equispaced(0).is_err());
        assert!(StrainField::new(vec![-1.0, 1.0]).is_err());
        assert!(StrainField::new(vec![0.1, 0.1]).is_err());
    }

    #[test]
    fn strain_round_trip() {
        let e = StrainField::new(vec![-0.1, 0.05, 0.05]).unwrap();
        let c = e.to_configuration();
        let back = strain(&c);
        for (a, b) in back.values().iter().zip(e.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(e.reversed().values(), &[0.05, 0.05, -0.1]);
    }

    #[test]
    fn solve_trivial_cases() {
        let opts = SolverOptions::default();
        for p in [a2(), PotentialSpec::wall()] {
            let (c, rep) = solve_finite(&p, 2, &opts).unwrap();
            assert!((c.position(1) - 0.5).abs() <= 1e-12);
            assert!(rep.residual_norm <= 1e-12);
            let (c, rep) = solve_finite(&p, 1, &opts).unwrap();
            assert_eq!(c.positions(), vec![0.0, 1.0]);
            assert_eq!(rep.iterations, 0);
        }
    }

    #[test]
    fn solve_is_symmetric_and_compressed_at_walls() {
        let p = a2();
        let (c, rep) = solve_finite(&p, 64, &SolverOptions::default()).unwrap();
        assert!(rep.iterations <= 20);
        let e = strain(&c);
        let n = c.n();
        for i in 1..=n {
            assert!((e.get(i) - e.get(n + 1 - i)).abs() <= 10.0 * 1e-12 * n as f64);
        }
        // compressed near the wall, strains increase towards the middle
        assert!(e.get(1) < 0.0);
        for i in 1..n / 2 {
            assert!(e.get(i) < e.get(i + 1));
        }
        let rho = discrete_density(&c).unwrap();
        let peak = rho.iter().cloned().fold(0.0, f64::max);
        assert!(peak > 1.03 && peak < 1.08, "peak density {peak}");
        assert!((rho[n / 2 - 1] - 1.0).abs() < 0.01);
    }

    #[test]
    fn banded_mode_reaches_dense_answer() {
        let p = a2();
        let dense = solve_finite(&p, 200, &SolverOptions::default()).unwrap().0;
        let opts = SolverOptions { hessian: HessianMode::Banded(8), ..SolverOptions::default() };
        let (banded, rep) = solve_finite(&p, 200, &opts).unwrap();
        assert_eq!(rep.hessian_bandwidth, 8);
        for (a, b) in dense.displacements().iter().zip(banded.displacements()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn options_are_validated() {
        let bad = SolverOptions { backtrack_factor: 1.0, ..SolverOptions::default() };
        assert!(solve_finite(&a2(), 4, &bad).is_err());
        let bad = SolverOptions { residual_tol: 0.0, ..SolverOptions::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn non_convergence_carries_history() {
        let opts = SolverOptions { max_iters: 1, residual_tol: 1e-300, ..SolverOptions::default() };
        match solve_finite(&a2(), 32, &opts) {
            Err(Error::NonConvergence { history, last_iterate, .. }) => {
                assert!(!history.is_empty());
                assert_eq!(last_iterate.len(), 33);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
