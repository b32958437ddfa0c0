//! Closed-form asymptotic predictions: the zeta function, the second moment
//! of the interaction, bulk profiles and strain tails.

use serde::{Deserialize, Serialize};

use crate::error::{domain, parameter, Error, Result};
use crate::potential::PotentialSpec;

/// Riemann zeta for real `a > 1`, to about 1e-12 absolute.
pub fn zeta(a: f64) -> Result<f64> {
    if !(a > 1.0) || !a.is_finite() {
        return Err(Error::Divergence(format!("zeta(a) needs a > 1, got {a}")));
    }
    let cut = (1e-13f64).powf(-1.0 / (a + 1.0)).ceil().clamp(1e4, 1e8) as usize;
    let n = cut as f64;
    // sum_{k >= N} k^-a by Euler-Maclaurin through the third derivative
    let f = n.powf(-a);
    let tail = f * n / (a - 1.0) + 0.5 * f + a * f / (12.0 * n) - a * (a + 1.0) * (a + 2.0) * f / (720.0 * n * n * n);
    let mut sum = tail;
    for k in (1..cut).rev() {
        sum += (k as f64).powf(-a);
    }
    Ok(sum)
}

/// `Z(V) = sum_{k >= 1} V''(k) k^2`, to absolute accuracy `tol`.
pub fn interaction_second_moment(p: &PotentialSpec, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(parameter("tolerance must be positive"));
    }
    let term = |k: f64| p.d2(k) * k * k;
    if p.is_power_law() {
        let a = p.decay_exponent();
        if !(a > 1.0) {
            return Err(Error::Divergence(format!("Z(V) needs a > 1, got {a}")));
        }
        // f(k) = c k^-a with c = a(a+1); the tail after Euler-Maclaurin
        // through f''' is of order f^(5)(N) / 30240.
        let c = a * (a + 1.0);
        let mut n = 1e4;
        let rem = |n: f64| c * (0..5).map(|m| a + m as f64).product::<f64>() * n.powf(-a - 5.0) / 30240.0;
        while rem(n) > 0.1 * tol && n < 1e8 {
            n *= 2.0;
        }
        let f = term(n);
        let tail = c * n.powf(1.0 - a) / (a - 1.0) + 0.5 * f + a * f / (12.0 * n)
            - a * (a + 1.0) * (a + 2.0) * f / (720.0 * n * n * n);
        let mut sum = tail;
        for k in (1..n as usize).rev() {
            sum += term(k as f64);
        }
        return Ok(sum);
    }
    // Exponential decay: stop once the geometric bound on the rest is below tol.
    let mut sum = 0.0;
    let mut k = 1.0;
    loop {
        let f = term(k);
        sum += f;
        let r = term(k + 1.0) / f;
        if r < 1.0 && term(k + 1.0) / (1.0 - r) <= tol {
            return Ok(sum);
        }
        k += 1.0;
        if k > 1e6 {
            return Err(Error::Divergence("Z(V) did not settle".into()));
        }
    }
}

/// `-i^-(a-1) / (Z(V) (a - 1))`; zero for the wall, whose strain decays
/// faster than any power.
pub fn predicted_strain_tail(p: &PotentialSpec, i: usize) -> Result<f64> {
    if i == 0 {
        return Err(parameter("index must be positive"));
    }
    if !p.is_power_law() {
        return Ok(0.0);
    }
    let a = p.decay_exponent();
    let z = interaction_second_moment(p, 1e-13)?;
    Ok(-(i as f64).powf(1.0 - a) / (z * (a - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Sub2,
    Exactly2,
    Super2,
}

impl Regime {
    pub fn of(a: f64) -> Result<Self> {
        if !(a > 1.0) || !a.is_finite() {
            return Err(parameter(format!("bulk profile needs finite a > 1, got {a}")));
        }
        Ok(if a < 2.0 {
            Regime::Sub2
        } else if a == 2.0 {
            Regime::Exactly2
        } else {
            Regime::Super2
        })
    }
}

/// Constants of the outer (bulk) expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkProfileParams {
    pub a: f64,
    pub regime: Regime,
    /// `p_1 .. p_ceil(a-2)`, empty unless `a > 2`.
    pub p_k: Vec<f64>,
    pub p_tilde: f64,
    /// `2 / pi^2`, the coefficient of the `log n / n` term at `a = 2`.
    pub p_tilde_star: f64,
}

fn denom(a: f64) -> Result<f64> {
    Ok(zeta(a)? * (a - 2.0) * (a * a * a - a))
}

impl BulkProfileParams {
    /// `1 < a < 2`: everything is fixed by `a`.
    pub fn sub2(a: f64) -> Result<Self> {
        if Regime::of(a)? != Regime::Sub2 {
            return Err(parameter(format!("a = {a} is not below 2")));
        }
        Ok(Self { a, regime: Regime::Sub2, p_k: Vec::new(), p_tilde: -2.0 / denom(a)?, p_tilde_star: 0.0 })
    }

    /// `a = 2`, with `p_tilde` taken from the boundary layer.
    pub fn exactly2(p_tilde: f64) -> Self {
        let pi2 = std::f64::consts::PI.powi(2);
        Self { a: 2.0, regime: Regime::Exactly2, p_k: Vec::new(), p_tilde, p_tilde_star: 2.0 / pi2 }
    }

    /// `a > 2`, with `ceil(a - 2)` offsets `p_k` and `p_tilde` from the
    /// boundary layer.
    pub fn super2(a: f64, p_k: Vec<f64>, p_tilde: f64) -> Result<Self> {
        if Regime::of(a)? != Regime::Super2 {
            return Err(parameter(format!("a = {a} is not above 2")));
        }
        let want = (a - 2.0).ceil() as usize;
        if p_k.len() != want {
            return Err(parameter(format!("a = {a} needs {want} offsets p_k, got {}", p_k.len())));
        }
        Ok(Self { a, regime: Regime::Super2, p_k, p_tilde, p_tilde_star: 0.0 })
    }
}

/// Truncated bulk expansion `xi(s; n)` for `0 < s < 1`.
pub fn bulk_profile(params: &BulkProfileParams, s: f64, n: usize) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(domain(format!("bulk profile needs 0 < s < 1, got {s}")));
    }
    if n < 2 {
        return Err(parameter("bulk profile needs n >= 2"));
    }
    let nf = n as f64;
    let a = params.a;
    let c = s - 0.5;
    let r = 1.0 - s;
    let out = match params.regime {
        Regime::Sub2 | Regime::Super2 => {
            let e = 2.0 - a;
            let singular = (s.powf(e) - r.powf(e)) / denom(a)?;
            let mut corr = 0.0;
            for (k, pk) in params.p_k.iter().enumerate() {
                corr += c * pk * nf.powi(-(k as i32 + 1));
            }
            corr + (singular + c * params.p_tilde) * nf.powf(1.0 - a)
        }
        Regime::Exactly2 => {
            let pi2 = std::f64::consts::PI.powi(2);
            c * params.p_tilde_star * nf.ln() / nf + ((r.ln() - s.ln()) / pi2 + c * params.p_tilde) / nf
        }
    };
    Ok(s + out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn zeta_closed_forms() {
        assert!((zeta(2.0).unwrap() - PI * PI / 6.0).abs() < 1e-12);
        assert!((zeta(4.0).unwrap() - PI.powi(4) / 90.0).abs() < 1e-12);
        assert!((zeta(3.0).unwrap() - 1.2020569031595942).abs() < 1e-12);
        assert!((zeta(6.0).unwrap() - PI.powi(6) / 945.0).abs() < 1e-12);
        assert!(matches!(zeta(1.0), Err(Error::Divergence(_))));
    }

    #[test]
    fn second_moment_power_law() {
        let p = PotentialSpec::power_law(2.0).unwrap();
        assert!((interaction_second_moment(&p, 1e-12).unwrap() - PI * PI).abs() < 1e-10);
        for a in [1.5, 2.0, 2.5, 3.0] {
            let p = PotentialSpec::power_law(a).unwrap();
            let z = interaction_second_moment(&p, 1e-12).unwrap();
            assert_relative_eq!(z * (a - 1.0), zeta(a).unwrap() * (a * a * a - a), max_relative = 1e-10);
        }
        let bad = PotentialSpec::power_law_unchecked(0.5);
        assert!(interaction_second_moment(&bad, 1e-10).is_err());
    }

    #[test]
    fn second_moment_wall() {
        let z = interaction_second_moment(&PotentialSpec::wall(), 1e-14).unwrap();
        let direct: f64 = (1..=200)
            .rev()
            .map(|k| {
                let k = k as f64;
                PotentialSpec::wall().d2(k) * k * k
            })
            .sum();
        assert!((z - direct).abs() < 1e-13);
        assert!(z > 0.0);
    }

    #[test]
    fn strain_tail_values() {
        let a2 = PotentialSpec::power_law(2.0).unwrap();
        assert_relative_eq!(predicted_strain_tail(&a2, 10).unwrap(), -1.0 / (PI * PI * 10.0), max_relative = 1e-10);
        let a3 = PotentialSpec::power_law(3.0).unwrap();
        assert_relative_eq!(
            predicted_strain_tail(&a3, 10).unwrap(),
            -0.01 / (24.0 * 1.2020569031595942),
            max_relative = 1e-10
        );
        assert_eq!(predicted_strain_tail(&PotentialSpec::wall(), 3).unwrap(), 0.0);
    }

    #[test]
    fn profile_regimes() {
        let sub = BulkProfileParams::sub2(1.5).unwrap();
        let ex = BulkProfileParams::exactly2(0.3);
        let sup = BulkProfileParams::super2(3.0, vec![0.7], -0.2).unwrap();
        for params in [&sub, &ex, &sup] {
            assert_eq!(bulk_profile(params, 0.5, 1000).unwrap(), 0.5);
            let x = bulk_profile(params, 0.2, 1000).unwrap();
            let y = bulk_profile(params, 0.8, 1000).unwrap();
            assert!((x + y - 1.0).abs() < 1e-14);
            assert!(bulk_profile(params, 0.0, 10).is_err());
            assert!(bulk_profile(params, 1.0, 10).is_err());
        }
        assert!(BulkProfileParams::sub2(2.0).is_err());
        assert!(BulkProfileParams::super2(3.5, vec![1.0], 0.0).is_err());
    }

    #[test]
    fn sub2_profile_by_hand() {
        let a: f64 = 1.5;
        let (s, n): (f64, f64) = (0.25, 1e4);
        let d = zeta(a).unwrap() * (a - 2.0) * (a.powi(3) - a);
        let expected = s + (s.powf(0.5) - (1.0 - s).powf(0.5) + 1.0 - 2.0 * s) / d * n.powf(-0.5);
        let got = bulk_profile(&BulkProfileParams::sub2(a).unwrap(), s, 10_000).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-14);
    }
}
