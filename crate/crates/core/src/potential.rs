//! Repulsive pair potentials and their derivatives.
//!
//! Two families are built in: the homogeneous power law `V(x) = x^-a`
//! (dislocation dipoles for `a = 2`) and the dislocation-wall potential
//! `V(x) = x coth x - log(2 sinh x)`, whose tails decay exponentially.
//!
//! All evaluations take a strictly positive distance. `V` is even, so callers
//! pass `|x|` and restore the sign of odd derivatives themselves.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, parameter, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    PowerLaw,
    DislocationWall,
}

/// An interaction potential. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PotentialSpec {
    family: Family,
    a: f64,
    // Integer exponents go through `powi`, which is both faster and exact.
    int_exp: Option<i32>,
}

impl PotentialSpec {
    /// `V(x) = x^-a`, requires `a > 1`.
    pub fn power_law(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 1.0) {
            return Err(parameter(format!("power-law exponent must satisfy a > 1, got {a}")));
        }
        let int_exp = (a.fract() == 0.0 && a <= 64.0).then_some(a as i32);
        Ok(Self { family: Family::PowerLaw, a, int_exp })
    }

    /// Power law without the `a > 1` admissibility check. Only for exploring
    /// divergent regimes (the zeta and stress routines reject these).
    pub fn power_law_unchecked(a: f64) -> Self {
        let int_exp = (a.fract() == 0.0 && a.abs() <= 64.0).then_some(a as i32);
        Self { family: Family::PowerLaw, a, int_exp }
    }

    pub fn wall() -> Self {
        Self { family: Family::DislocationWall, a: f64::INFINITY, int_exp: None }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Tail exponent; `+inf` for the wall potential.
    pub fn decay_exponent(&self) -> f64 {
        self.a
    }

    pub fn is_power_law(&self) -> bool {
        self.family == Family::PowerLaw
    }

    /// `V^(order)(x)` for `order` in `0..=3`, with argument checks.
    pub fn eval(&self, order: u32, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(domain(format!("potential evaluated at non-positive distance {x}")));
        }
        match order {
            0 => Ok(self.v(x)),
            1 => Ok(self.d1(x)),
            2 => Ok(self.d2(x)),
            3 => Ok(self.d3(x)),
            _ => Err(domain(format!("derivative order {order} not available (0..=3)"))),
        }
    }

    /// Convexity modulus on `(0, x]`. Both families have `V''` decreasing,
    /// so the infimum is attained at the right end.
    pub fn lambda_modulus(&self, x: f64) -> Result<f64> {
        self.eval(2, x)
    }

    #[inline]
    fn pow_neg_a(&self, x: f64) -> f64 {
        match self.int_exp {
            Some(k) => x.powi(-k),
            None => x.powf(-self.a),
        }
    }

    /// `V(x)`; `x > 0` is not checked.
    #[inline]
    pub fn v(&self, x: f64) -> f64 {
        match self.family {
            Family::PowerLaw => self.pow_neg_a(x),
            Family::DislocationWall => {
                let w = WallTerms::new(x);
                2.0 * x * w.q / w.om - w.log_om()
            }
        }
    }

    /// `V'(x)`; `x > 0` is not checked.
    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        match self.family {
            Family::PowerLaw => -self.a * self.pow_neg_a(x) / x,
            Family::DislocationWall => -x * WallTerms::new(x).csch2(),
        }
    }

    /// `V''(x)`; `x > 0` is not checked.
    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        match self.family {
            Family::PowerLaw => self.a * (self.a + 1.0) * self.pow_neg_a(x) / (x * x),
            Family::DislocationWall => {
                let w = WallTerms::new(x);
                w.csch2() * (2.0 * x * w.coth() - 1.0)
            }
        }
    }

    /// `V'''(x)`; `x > 0` is not checked.
    #[inline]
    pub fn d3(&self, x: f64) -> f64 {
        match self.family {
            Family::PowerLaw => {
                let a = self.a;
                -a * (a + 1.0) * (a + 2.0) * self.pow_neg_a(x) / (x * x * x)
            }
            Family::DislocationWall => {
                let w = WallTerms::new(x);
                let c2 = w.csch2();
                c2 * (4.0 * w.coth() - 4.0 * x - 6.0 * x * c2)
            }
        }
    }

    /// `(V'(x), V''(x))` in one pass.
    #[inline]
    pub fn d1_d2(&self, x: f64) -> (f64, f64) {
        match self.family {
            Family::PowerLaw => {
                let r = self.pow_neg_a(x) / x;
                (-self.a * r, self.a * (self.a + 1.0) * r / x)
            }
            Family::DislocationWall => {
                let w = WallTerms::new(x);
                let c2 = w.csch2();
                (-x * c2, c2 * (2.0 * x * w.coth() - 1.0))
            }
        }
    }
}

/// Hyperbolic functions of `x` written through `q = exp(-2x)`, which stays
/// finite for every `x > 0`.
struct WallTerms {
    q: f64,
    // 1 - q, computed without cancellation for small x
    om: f64,
}

impl WallTerms {
    #[inline]
    fn new(x: f64) -> Self {
        Self { q: (-2.0 * x).exp(), om: -(-2.0 * x).exp_m1() }
    }

    #[inline]
    fn csch2(&self) -> f64 {
        4.0 * self.q / (self.om * self.om)
    }

    #[inline]
    fn coth(&self) -> f64 {
        (1.0 + self.q) / self.om
    }

    #[inline]
    fn log_om(&self) -> f64 {
        if self.q < 0.5 {
            (-self.q).ln_1p()
        } else {
            self.om.ln()
        }
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::PowerLaw => write!(f, "powerlaw:a={}", self.a),
            Family::DislocationWall => write!(f, "wall"),
        }
    }
}

impl FromStr for PotentialSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "wall" {
            return Ok(Self::wall());
        }
        let a = s.strip_prefix("powerlaw:a=").ok_or_else(|| {
            Error::Parse(format!("unknown potential `{s}` (expected `powerlaw:a=<value>` or `wall`)"))
        })?;
        let a: f64 = a.parse().map_err(|_| Error::Parse(format!("bad exponent in `{s}`")))?;
        Self::power_law(a)
    }
}

impl TryFrom<String> for PotentialSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PotentialSpec> for String {
    fn from(p: PotentialSpec) -> String {
        p.to_string()
    }
}

/// Outcome of comparing closed-form derivatives with finite differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Largest relative error for derivative orders 1, 2, 3.
    pub max_rel_error: [f64; 3],
    pub second_derivative_decreasing: bool,
    pub threshold: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.second_derivative_decreasing && self.max_rel_error.iter().all(|&e| e <= self.threshold)
    }
}

pub const DEFAULT_DERIVATIVE_THRESHOLD: f64 = 1e-5;

/// Checks each closed-form derivative of order 1..=3 against a central
/// difference of the derivative one order below, and that `V''` decreases
/// along the sorted grid.
pub fn check_derivatives(p: &PotentialSpec, grid: &[f64], step: f64) -> Result<ValidationReport> {
    check_derivatives_with_threshold(p, grid, step, DEFAULT_DERIVATIVE_THRESHOLD)
}

pub fn check_derivatives_with_threshold(
    p: &PotentialSpec,
    grid: &[f64],
    step: f64,
    threshold: f64,
) -> Result<ValidationReport> {
    if grid.is_empty() {
        return Err(parameter("derivative check needs a nonempty grid"));
    }
    if !(step > 0.0) {
        return Err(parameter("finite-difference step must be positive"));
    }
    if let Some(&x) = grid.iter().find(|&&x| !(x > 2.0 * step)) {
        return Err(domain(format!("grid point {x} too close to the singularity for step {step}")));
    }

    let mut max_rel_error = [0.0f64; 3];
    for &x in grid {
        for order in 1..=3u32 {
            let lower = |t: f64| match order {
                1 => p.v(t),
                2 => p.d1(t),
                _ => p.d2(t),
            };
            let fd = (lower(x + step) - lower(x - step)) / (2.0 * step);
            let exact = p.eval(order, x)?;
            let rel = (exact - fd).abs() / exact.abs();
            let slot = &mut max_rel_error[order as usize - 1];
            *slot = slot.max(rel);
        }
    }

    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let second_derivative_decreasing = sorted.windows(2).all(|w| w[0] == w[1] || p.d2(w[1]) < p.d2(w[0]));

    Ok(ValidationReport { max_rel_error, second_derivative_decreasing, threshold })
}

/// Whether `V''' <= 0` on every grid point, the sign condition behind the
/// Euler-Maclaurin remainder bound.
pub fn third_derivative_nonpositive(p: &PotentialSpec, grid: &[f64]) -> bool {
    grid.iter().all(|&x| p.d3(x) <= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn power_law_closed_forms() {
        let p = PotentialSpec::power_law(2.0).unwrap();
        assert_eq!(p.eval(0, 1.0).unwrap(), 1.0);
        assert_eq!(p.eval(2, 1.0).unwrap(), 6.0);
        assert_eq!(p.lambda_modulus(2.0).unwrap(), 0.375);
        let p3 = PotentialSpec::power_law(3.0).unwrap();
        assert_eq!(p3.lambda_modulus(1.0).unwrap(), 12.0);
    }

    #[test]
    fn wall_matches_finite_differences_of_direct_form() {
        // Direct textbook form, fine at moderate x.
        let direct = |x: f64| x / x.tanh() - (2.0 * x.sinh()).ln();
        let p = PotentialSpec::wall();
        let fd1 = central(direct, 1.0, 1e-6);
        assert_relative_eq!(p.eval(1, 1.0).unwrap(), fd1, max_relative = 1e-8);
        let fd2 = (direct(1.0 + 1e-4) - 2.0 * direct(1.0) + direct(1.0 - 1e-4)) / 1e-8;
        assert_relative_eq!(p.lambda_modulus(1.0).unwrap(), fd2, max_relative = 1e-6);
        assert_relative_eq!(p.v(1.5), direct(1.5), max_relative = 1e-14);
    }

    #[test]
    fn wall_is_finite_far_out() {
        let p = PotentialSpec::wall();
        for x in [30.0, 100.0, 300.0] {
            assert!(p.v(x) > 0.0 && p.v(x).is_finite());
            assert!(p.d1(x) < 0.0);
            assert!(p.d2(x) > 0.0);
        }
        // Leading-order tails.
        let x: f64 = 40.0;
        let q = (-2.0 * x).exp();
        assert_relative_eq!(p.d1(x), -4.0 * x * q, max_relative = 1e-14);
        assert_relative_eq!(p.d2(x), 4.0 * q * (2.0 * x - 1.0), max_relative = 1e-14);
    }

    #[test]
    fn wall_small_distance_is_logarithmic() {
        let p = PotentialSpec::wall();
        let x = 1e-6;
        assert_relative_eq!(p.d1(x), -1.0 / x, max_relative = 1e-9);
        assert_relative_eq!(p.d3(x), -2.0 / (x * x * x), max_relative = 1e-9);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = PotentialSpec::power_law(2.0).unwrap();
        assert!(matches!(p.eval(0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(p.eval(4, 1.0), Err(Error::Domain(_))));
        assert!(matches!(p.lambda_modulus(-1.0), Err(Error::Domain(_))));
        assert!(PotentialSpec::power_law(1.0).is_err());
        assert!(PotentialSpec::power_law(f64::NAN).is_err());
    }

    #[test]
    fn derivative_reports() {
        let p = PotentialSpec::power_law(2.0).unwrap();
        let r = check_derivatives(&p, &[0.5, 1.0, 2.0, 5.0], 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.max_rel_error.iter().all(|&e| e < 1e-6), "{r:?}");

        let r = check_derivatives(&PotentialSpec::wall(), &[0.5, 1.0, 2.0, 5.0, 20.0], 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");

        let p = PotentialSpec::power_law(1.5).unwrap();
        assert!(check_derivatives(&p, &[1.0], 1e-6).unwrap().passed());

        assert!(check_derivatives(&p, &[], 1e-6).is_err());
        assert!(check_derivatives(&p, &[1e-7], 1e-6).is_err());
    }

    #[test]
    fn failing_threshold_gives_failing_report() {
        let p = PotentialSpec::power_law(2.0).unwrap();
        let r = check_derivatives_with_threshold(&p, &[1.0], 1e-1, 1e-12).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["powerlaw:a=2", "powerlaw:a=1.5", "wall"] {
            let p: PotentialSpec = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("powerlaw:a=0.5".parse::<PotentialSpec>().is_err());
        assert!("lj".parse::<PotentialSpec>().is_err());
        assert_eq!(PotentialSpec::wall().decay_exponent(), f64::INFINITY);
    }

    #[test]
    fn third_derivative_sign() {
        let grid: Vec<f64> = (1..200).map(|k| k as f64 * 0.25).collect();
        assert!(third_derivative_nonpositive(&PotentialSpec::power_law(2.0).unwrap(), &grid));
        assert!(third_derivative_nonpositive(&PotentialSpec::wall(), &grid));
    }
}
