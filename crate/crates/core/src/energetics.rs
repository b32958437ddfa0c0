//! Renormalised energies, their quadratic/linear splitting and the boundary
//! stresses.
//!
//! Window sums `w(j, k) = eps(j+1) + ... + eps(j+k)` are the changes of the
//! rescaled distance between particles `j` and `j + k`; everything here is a
//! sum over such windows evaluated through prefix sums.

use std::sync::OnceLock;

use serde::Serialize;

use crate::blayer::BoundaryLayerSolution;
use crate::equilibrium::StrainField;
use crate::error::{domain, parameter, Error, Result};
use crate::potential::PotentialSpec;

/// `phi_k(y) = V(k + y) - V(k) - V'(k) y`.
pub fn phi(p: &PotentialSpec, k: usize, y: f64) -> Result<f64> {
    check_window(k, y)?;
    Ok(phi_unchecked(p, k as f64, y))
}

fn check_window(k: usize, y: f64) -> Result<()> {
    if k == 0 {
        return Err(parameter("window length must be positive"));
    }
    if !(y > -(k as f64)) {
        return Err(domain(format!("phi_{k} evaluated at y = {y} <= -{k}")));
    }
    Ok(())
}

/// Small windows are evaluated without the cancellation in the defining
/// formula: a binomial series for the power law, quadrature of
/// `int_0^y V''(k + s)(y - s) ds` otherwise.
pub(crate) fn phi_unchecked(p: &PotentialSpec, k: f64, y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let t = y / k;
    if p.is_power_law() {
        let a = p.decay_exponent();
        let h = if t.abs() <= 0.1 {
            // (1 + t)^-a - 1 + a t = sum_{m >= 2} binom(-a, m) t^m
            let mut c = -a;
            let mut tm = t;
            let mut sum = 0.0;
            for m in 2..80 {
                c *= (-a - (m - 1) as f64) / m as f64;
                tm *= t;
                let term = c * tm;
                sum += term;
                if term.abs() <= 1e-18 * sum.abs() {
                    break;
                }
            }
            sum
        } else {
            (-a * t.ln_1p()).exp_m1() + a * t
        };
        return p.v(k) * h;
    }
    if t.abs() <= 0.25 {
        let (nodes, weights) = gauss_legendre();
        let half = 0.5 * y;
        let mut sum = 0.0;
        for (x, w) in nodes.iter().zip(weights) {
            let s = half * (1.0 + x);
            sum += w * p.d2(k + s) * (y - s);
        }
        return sum * half;
    }
    p.v(k + y) - p.v(k) - p.d1(k) * y
}

const GL_POINTS: usize = 12;

fn gauss_legendre() -> &'static ([f64; GL_POINTS], [f64; GL_POINTS]) {
    static RULE: OnceLock<([f64; GL_POINTS], [f64; GL_POINTS])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut x = [0.0; GL_POINTS];
        let mut w = [0.0; GL_POINTS];
        for i in 0..n {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

/// Piecewise quadratic-linear minorant of `phi_k`.
pub fn phi_lower_bound(p: &PotentialSpec, k: usize, y: f64) -> Result<f64> {
    check_window(k, y)?;
    let lam = p.d2(k as f64 + 1.0);
    Ok(if y <= 1.0 { 0.5 * lam * y * y } else { lam * (y - 0.5) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StressKind {
    FiniteN(usize),
    Infinity,
}

/// Boundary stress `sigma(1), sigma(2), ...`; entries past the end are zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressVector {
    pub kind: StressKind,
    pub values: Vec<f64>,
}

impl StressVector {
    /// `sigma(i)`, 1-based.
    pub fn get(&self, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        self.values.get(i - 1).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `l2` distance, zero-padding the shorter vector.
    pub fn l2_distance(&self, other: &StressVector) -> f64 {
        let m = self.len().max(other.len());
        (1..=m).map(|i| (self.get(i) - other.get(i)).powi(2)).sum::<f64>().sqrt()
    }
}

/// `sigma_n(i) = sum_{k=i+1}^{n-i} min(k - i, n - i + 1 - k) |V'(k)|` for
/// `i <= n/2`.
pub fn sigma_n(p: &PotentialSpec, n: usize) -> Result<StressVector> {
    if n < 2 {
        return Err(parameter("sigma_n needs n >= 2"));
    }
    // s0[k] = sum_{m <= k} |V'(m)|, s1[k] = sum_{m <= k} m |V'(m)|
    let mut s0 = vec![0.0; n + 1];
    let mut s1 = vec![0.0; n + 1];
    for k in 1..=n {
        let f = -p.d1(k as f64);
        s0[k] = s0[k - 1] + f;
        s1[k] = s1[k - 1] + k as f64 * f;
    }
    let knee = n.div_ceil(2);
    let values = (1..=n / 2)
        .map(|i| {
            let fi = i as f64;
            let top = n - i;
            let mid = knee.min(top).max(i);
            let rising = (s1[mid] - s1[i]) - fi * (s0[mid] - s0[i]);
            let falling = if top > mid { (n - i + 1) as f64 * (s0[top] - s0[mid]) - (s1[top] - s1[mid]) } else { 0.0 };
            rising + falling
        })
        .collect();
    Ok(StressVector { kind: StressKind::FiniteN(n), values })
}

/// `sigma_inf(i) = sum_{k > i} (k - i) |V'(k)|` for `i = 1..=imax`, each
/// entry to absolute accuracy `tol`.
pub fn sigma_inf(p: &PotentialSpec, imax: usize, tol: f64) -> Result<StressVector> {
    if imax == 0 {
        return Err(parameter("imax must be positive"));
    }
    if !(tol > 0.0) {
        return Err(parameter("tolerance must be positive"));
    }
    let a = p.decay_exponent();
    if p.is_power_law() && !(a > 1.0) {
        return Err(Error::Divergence(format!("sigma_inf needs a > 1, got a = {a}")));
    }

    // Tails beyond the cutoff K: A = sum_{k>K} |V'(k)|, B = sum_{k>K} k |V'(k)|.
    let (cut, tail_a, tail_b) = if p.is_power_law() {
        let mut cut = (2 * imax).max(10_000);
        // Euler-Maclaurin through f''' leaves a remainder of order
        // |f^(5)(K)| / 30240; it enters sigma_inf multiplied by at most K.
        let rem = |s: f64, kk: f64| a * (0..5).map(|m| s + m as f64).product::<f64>() * kk.powf(-s - 5.0) / 30240.0;
        while rem(a, cut as f64) * cut as f64 > 0.1 * tol && cut < 1 << 26 {
            cut *= 2;
        }
        let kk = cut as f64;
        (cut, em_power_tail(a, a + 1.0, kk), em_power_tail(a, a, kk))
    } else {
        // |V'(k)| ~ 4k exp(-2k): by k = imax + 40 the tail is below 1e-30.
        (imax + 40, 0.0, 0.0)
    };

    let mut sigma = tail_b - cut as f64 * tail_a;
    let mut acc = tail_a;
    let mut values = vec![0.0; imax];
    for i in (1..=cut).rev() {
        // acc = A(i), sigma = sigma_inf(i) on entry
        if i <= imax {
            values[i - 1] = sigma;
        }
        acc += -p.d1(i as f64);
        sigma += acc;
    }
    Ok(StressVector { kind: StressKind::Infinity, values })
}

/// `||sigma_inf - sigma_n||_l2` over all `i >= 1`. Entries up to `8n` are
/// summed; beyond that `sigma_inf(i) ~ i^(1-a) / (a-1)` closes the sum.
pub fn stress_gap_l2(p: &PotentialSpec, n: usize) -> Result<f64> {
    let a = p.decay_exponent();
    if p.is_power_law() && !(a > 1.5) {
        return Err(Error::Divergence(format!("sigma_inf is not square summable for a = {a} <= 3/2")));
    }
    let finite = sigma_n(p, n)?;
    let m = 8 * n;
    let inf = sigma_inf(p, m, 1e-14)?;
    let mut sq = 0.0;
    for i in (1..=m).rev() {
        sq += (inf.get(i) - finite.get(i)).powi(2);
    }
    if p.is_power_law() {
        let mf = m as f64 + 0.5;
        sq += mf.powf(3.0 - 2.0 * a) / ((2.0 * a - 3.0) * (a - 1.0).powi(2));
    }
    Ok(sq.sqrt())
}

/// `sum_{k > K} c k^-s` by Euler-Maclaurin through the third derivative.
fn em_power_tail(c: f64, s: f64, kk: f64) -> f64 {
    let f = c * kk.powf(-s);
    let integral = f * kk / (s - 1.0);
    let d1 = -s * f / kk;
    let d3 = -s * (s + 1.0) * (s + 2.0) * f / (kk * kk * kk);
    integral - 0.5 * f - d1 / 12.0 + d3 / 720.0
}

fn prefix(eps: &[f64]) -> Vec<f64> {
    let mut pre = Vec::with_capacity(eps.len() + 1);
    pre.push(0.0);
    let mut acc = 0.0;
    for &e in eps {
        acc += e;
        pre.push(acc);
    }
    pre
}

/// `E_n^1(eps) = sum_k sum_j [V(k + w(j, k)) - V(k)]`; `+inf` if some
/// window collapses.
pub fn renorm_energy(p: &PotentialSpec, e: &StrainField) -> f64 {
    let eps = e.values();
    let n = eps.len();
    let pre = prefix(eps);
    let mut total = 0.0;
    for k in 1..=n {
        let fk = k as f64;
        let vk = p.v(fk);
        for j in 0..=n - k {
            let w = pre[j + k] - pre[j];
            if !(w > -fk) {
                return f64::INFINITY;
            }
            total += p.v(fk + w) - vk;
        }
    }
    total
}

/// Quadratic (Taylor remainder) and linear (stress) parts of `E_n^1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySplit {
    pub q_part: f64,
    pub linear_part: f64,
}

impl EnergySplit {
    pub fn total(&self) -> f64 {
        self.q_part + self.linear_part
    }
}

pub fn renorm_energy_split(p: &PotentialSpec, e: &StrainField) -> EnergySplit {
    let eps = e.values();
    let n = eps.len();
    let pre = prefix(eps);
    let mut q_part = 0.0;
    'outer: for k in 1..=n {
        let fk = k as f64;
        for j in 0..=n - k {
            let w = pre[j + k] - pre[j];
            if !(w > -fk) {
                q_part = f64::INFINITY;
                break 'outer;
            }
            q_part += phi_unchecked(p, fk, w);
        }
    }
    let linear_part = if n >= 2 {
        let sigma = sigma_n(p, n).expect("n >= 2");
        (1..=n / 2).map(|i| sigma.get(i) * (eps[i - 1] + eps[n - i])).sum()
    } else {
        0.0
    };
    EnergySplit { q_part, linear_part }
}

/// Truncated limit energy
/// `sum_{k <= kmax} sum_j phi_k(w(j, k)) + sum_i sigma(i) eps(i)`
/// for a finitely supported strain; windows that miss the support vanish
/// and are skipped.
pub fn limit_energy_trunc(p: &PotentialSpec, e: &[f64], kmax: usize, sigma: &StressVector) -> Result<f64> {
    let support = e.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1);
    if support > sigma.len() {
        return Err(parameter(format!("strain support {support} exceeds the stress vector length {}", sigma.len())));
    }
    if kmax < support {
        return Err(parameter(format!("kmax = {kmax} is shorter than the support {support}")));
    }
    if let Some(v) = e.iter().find(|&&v| !(v >= -1.0)) {
        return Err(domain(format!("strain {v} below -1")));
    }
    let eps = &e[..support];
    let pre = prefix(eps);
    let mut quad = 0.0;
    for k in 1..=kmax {
        let fk = k as f64;
        let mut row = 0.0;
        for j in 0..support {
            let w = pre[(j + k).min(support)] - pre[j];
            if !(w > -fk) {
                return Ok(f64::INFINITY);
            }
            row += phi_unchecked(p, fk, w);
        }
        quad += row;
    }
    let linear: f64 = eps.iter().enumerate().map(|(i, v)| sigma.get(i + 1) * v).sum();
    Ok(quad + linear)
}

/// Force balance of the boundary layer written in displacements:
/// `sum_{j != i} V'(u(i) - u(j) + i - j)`, with `V'` odd, truncated at `J`
/// with the same tail closure as [`crate::blayer::bl_residual`].
pub fn el_residual(p: &PotentialSpec, sol: &BoundaryLayerSolution) -> Vec<f64> {
    let free = sol.free_len();
    let trunc = sol.trunc_len();
    let odd = |z: f64| if z > 0.0 { p.d1(z) } else { -p.d1(-z) };
    (1..=free)
        .map(|i| {
            let ui = sol.displacement(i);
            let term = |j: usize| odd((ui - sol.displacement(j)) + (i as f64 - j as f64));
            // pair j = i - m with j = i + m so the large near-field terms cancel first
            let mut s = 0.0;
            for m in 1..trunc {
                let mut pair = 0.0;
                if m <= i {
                    pair += term(i - m);
                }
                if i + m < trunc {
                    pair += term(i + m);
                }
                s += pair;
            }
            let d = (trunc - i) as f64 + (sol.displacement(trunc) - ui);
            s + p.v(d) - 0.5 * p.d1(d)
        })
        .collect()
}

/// Truncated limit energies of `eps(i) = -i^-b / 2` supported on `1..=N`,
/// one per `N`. Requires a power law with `1 < a < 3/2` and
/// `1/2 < b < 2 - a`, where the energy is unbounded below.
pub fn illposedness_demo(p: &PotentialSpec, b: f64, n_list: &[usize]) -> Result<Vec<f64>> {
    let a = p.decay_exponent();
    if !p.is_power_law() || !(a > 1.0 && a < 1.5) {
        return Err(parameter(format!("ill-posedness needs a power law with 1 < a < 3/2, got {p}")));
    }
    if !(b > 0.5 && b < 2.0 - a) {
        return Err(parameter(format!("b must lie in (1/2, {}), got {b}", 2.0 - a)));
    }
    decaying_strain_energies(p, b, n_list)
}

/// The sequence behind [`illposedness_demo`] without the parameter
/// restriction, for contrast runs. Windows up to `2N` are kept.
pub fn decaying_strain_energies(p: &PotentialSpec, b: f64, n_list: &[usize]) -> Result<Vec<f64>> {
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(parameter("N values must be positive"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(parameter("N values must be increasing"));
    }
    let nmax = *n_list.last().unwrap();
    let sigma = sigma_inf(p, nmax, 1e-12)?;
    n_list
        .iter()
        .map(|&n| {
            let eps: Vec<f64> = (1..=n).map(|i| -0.5 * (i as f64).powf(-b)).collect();
            limit_energy_trunc(p, &eps, 2 * n, &sigma)
        })
        .collect()
}
