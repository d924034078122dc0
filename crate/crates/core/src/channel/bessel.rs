//! Bessel functions of the first kind for the orders used by the satellite
//! beam pattern (J1 and J3).
//!
//! Small arguments use the ascending power series, large arguments the
//! Hankel asymptotic expansion. The switch point keeps both branches below
//! 1e-12 absolute error on [0, 50].

use std::f64::consts::PI;

use crate::error::{invalid, Result};

const SERIES_LIMIT: f64 = 12.0;

/// J_order(x) for order 1 or 3 and x >= 0.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    check_order(order)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(invalid(format!("bessel_j expects finite x >= 0, got {x}")));
    }
    Ok(if x < SERIES_LIMIT {
        x.powi(order as i32) * scaled_series(order, x)
    } else {
        hankel(order, x)
    })
}

/// J_order(x) / x^order, finite at the origin.
///
/// At x = 0 this equals 1 / (2^order · order!).
pub fn bessel_j_scaled(order: u32, x: f64) -> Result<f64> {
    check_order(order)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(invalid(format!("bessel_j expects finite x >= 0, got {x}")));
    }
    Ok(if x < SERIES_LIMIT {
        scaled_series(order, x)
    } else {
        hankel(order, x) / x.powi(order as i32)
    })
}

fn check_order(order: u32) -> Result<()> {
    match order {
        1 | 3 => Ok(()),
        _ => Err(invalid(format!("unsupported Bessel order {order} (expected 1 or 3)"))),
    }
}

// sum_k (-1)^k (x/2)^(2k) / (2^n k! (k+n)!)
fn scaled_series(order: u32, x: f64) -> f64 {
    let n = order as f64;
    let mut term = 1.0 / (2f64.powi(order as i32) * factorial(order));
    let q = -(x * x) / 4.0;
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + n));
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) && kf > x {
            break;
        }
    }
    sum
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let chi = x - (order as f64 / 2.0 + 0.25) * PI;
    // t_k = a_k(nu) / x^k, alternating into P (even k) and Q (odd k).
    let mut p = 1.0;
    let mut q = 0.0;
    let mut t: f64 = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = t * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if next.abs() > t.abs() && k > 2 {
            break;
        }
        t = next;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * t;
        } else {
            q += sign * t;
        }
        if t.abs() < 1e-17 {
            break;
        }
    }
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// J_n(x) = (1/π) ∫_0^π cos(nτ − x sin τ) dτ, trapezoid rule on a
    /// periodic integrand (spectrally accurate).
    fn integral_oracle(n: u32, x: f64) -> f64 {
        let steps = 4000;
        let h = PI / steps as f64;
        let f = |tau: f64| (n as f64 * tau - x * tau.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(PI));
        for k in 1..steps {
            s += f(k as f64 * h);
        }
        s * h / PI
    }

    fn series_oracle(n: u32, x: f64) -> f64 {
        // Σ (−1)^k (x/2)^{2k+n} / (k! (k+n)!), 30 terms
        let mut s = 0.0;
        for k in 0..30u32 {
            let num = (x / 2.0).powi((2 * k + n) as i32);
            let den = factorial(k) * factorial(k + n);
            s += if k % 2 == 0 { num / den } else { -num / den };
        }
        s
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn values_at_one() {
        assert!((bessel_j(1, 1.0).unwrap() - 0.4400505857).abs() < 1e-10);
        assert!((bessel_j(3, 1.0).unwrap() - 0.0195633540).abs() < 1e-10);
        assert!((bessel_j(1, 1.0).unwrap() - series_oracle(1, 1.0)).abs() < 1e-15);
        assert!((bessel_j(3, 1.0).unwrap() - series_oracle(3, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn matches_integral_representation_on_grid() {
        for i in 0..=500 {
            let x = i as f64 * 0.1;
            for n in [1, 3] {
                let got = bessel_j(n, x).unwrap();
                let want = integral_oracle(n, x);
                assert!((got - want).abs() < 1e-10, "J{n}({x}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn branches_agree_at_switch() {
        for n in [1, 3] {
            let below = x_pow(n, SERIES_LIMIT) * scaled_series(n, SERIES_LIMIT);
            let above = hankel(n, SERIES_LIMIT);
            assert!((below - above).abs() < 1e-11);
        }
    }

    fn x_pow(n: u32, x: f64) -> f64 {
        x.powi(n as i32)
    }

    #[test]
    fn scaled_limit_at_origin() {
        assert!((bessel_j_scaled(1, 0.0).unwrap() - 0.5).abs() < 1e-16);
        assert!((bessel_j_scaled(3, 0.0).unwrap() - 1.0 / 48.0).abs() < 1e-16);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(bessel_j(2, 1.0).is_err());
        assert!(bessel_j(1, -1.0).is_err());
        assert!(bessel_j(1, f64::NAN).is_err());
    }
}
