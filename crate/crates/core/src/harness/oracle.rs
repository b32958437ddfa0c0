//! Slow reference minimiser for tiny systems: cyclic coordinate descent, each
//! coordinate minimised exactly by bisection on its own force. Shares no
//! code with the Newton solver or the potential module's derivative forms.

use crate::error::{parameter, Result};
use crate::potential::{Family, PotentialSpec};

fn force_law(p: &PotentialSpec) -> impl Fn(f64) -> f64 {
    let family = p.family();
    let a = p.decay_exponent();
    move |r: f64| match family {
        Family::PowerLaw => -a / r.powf(a + 1.0),
        // d/dr [r coth r - ln sinh r] = -r / sinh(r)^2
        Family::DislocationWall => {
            let s = r.sinh();
            -r / (s * s)
        }
    }
}

/// Positions `x(0..=n)` minimising `E_n`, to roughly `1e-13` per coordinate.
pub fn brute_force_minimiser(p: &PotentialSpec, n: usize) -> Result<Vec<f64>> {
    if !(2..=12).contains(&n) {
        return Err(parameter("brute-force oracle is for 2 <= n <= 12"));
    }
    let dv = force_law(p);
    let nf = n as f64;
    let mut x: Vec<f64> = (0..=n).map(|i| i as f64 / nf).collect();
    // d E_n / d x(i), positive when moving right raises the energy
    let grad = |x: &[f64], i: usize, xi: f64| -> f64 {
        let mut g = 0.0;
        for (k, &xk) in x.iter().enumerate() {
            if k < i {
                g += dv(nf * (xi - xk));
            } else if k > i {
                g -= dv(nf * (xk - xi));
            }
        }
        g
    };
    for _sweep in 0..100_000 {
        let mut moved = 0.0f64;
        for i in 1..n {
            let (mut lo, mut hi) = (x[i - 1], x[i + 1]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if grad(&x, i, mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let new = 0.5 * (lo + hi);
            moved = moved.max((new - x[i]).abs());
            x[i] = new;
        }
        if moved < 1e-15 {
            break;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_gaps_is_the_midpoint() {
        for p in [PotentialSpec::power_law(2.0).unwrap(), PotentialSpec::wall()] {
            let x = brute_force_minimiser(&p, 2).unwrap();
            assert!((x[1] - 0.5).abs() < 1e-15);
        }
        assert!(brute_force_minimiser(&PotentialSpec::wall(), 1).is_err());
    }

    #[test]
    fn minimiser_is_symmetric_and_compressed() {
        let x = brute_force_minimiser(&PotentialSpec::power_law(2.0).unwrap(), 5).unwrap();
        for i in 0..=5 {
            assert!((x[i] + x[5 - i] - 1.0).abs() < 1e-12);
        }
        assert!(x[1] < 0.2);
    }
}
