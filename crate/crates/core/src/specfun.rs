//! Scalar special functions: Gamma and the modified Bessel function of the
//! second kind for arbitrary real order.
//!
//! K_nu is evaluated from its integral representation
//!     K_nu(x) = (1/2) (x/2)^nu int_0^inf exp(-t - x^2/(4t)) t^(-nu-1) dt
//! with the substitution t = e^u, which makes the integrand decay
//! double-exponentially in both directions so the trapezoid rule converges
//! geometrically. Beyond x = 30 the large-argument asymptotic series takes
//! over to avoid cancellation under the e^{-x} envelope.

use crate::error::{Error, Result};
use crate::quad::CompensatedSum;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_P: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    let mut t = LANCZOS_P[0];
    for (i, p) in LANCZOS_P.iter().enumerate().skip(1) {
        t += p / (x + i as f64);
    }
    t
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && (x - x.round()).abs() < 1e-12
}

/// Gamma function for real arguments, Lanczos approximation with reflection.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("gamma_fn({x})")));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::Domain(format!("gamma_fn pole at {x}")));
    }
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let s = (std::f64::consts::PI * x).sin();
        return Ok(std::f64::consts::PI / (s * gamma_fn(1.0 - x)?));
    }
    let z = x - 1.0;
    let t = lanczos_sum(z);
    let w = z + LANCZOS_G + 0.5;
    Ok((2.0 * std::f64::consts::PI).sqrt() * w.powf(z + 0.5) * (-w).exp() * t)
}

/// Natural log of Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("ln_gamma needs x > 0, got {x}")));
    }
    if x < 0.5 {
        // ln Gamma(x) = ln Gamma(x+1) - ln x
        return Ok(ln_gamma(x + 1.0)? - x.ln());
    }
    let z = x - 1.0;
    let t = lanczos_sum(z);
    let w = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * w.ln() - w + t.ln())
}

/// Order/frequency pair (nu, a) for the rescaled kernel rho^(-nu) K_nu(a rho).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BesselOrder {
    pub nu: f64,
    pub a: f64,
}

impl BesselOrder {
    pub fn new(nu: f64, a: f64) -> Result<Self> {
        if !nu.is_finite() {
            return Err(Error::Domain(format!("Bessel order nu = {nu}")));
        }
        if !(a > 0.0) {
            return Err(Error::Domain(format!("Bessel scale a = {a} must be > 0")));
        }
        Ok(Self { nu, a })
    }
}

/// Crossover between the integral representation and the asymptotic series.
const ASYMPTOTIC_CROSSOVER: f64 = 30.0;
/// Trapezoid step in u = ln t; geometric convergence makes this ample.
const TRAPEZOID_STEP: f64 = 0.15;
/// Log-drop from the integrand peak at which the tails are truncated.
const LOG_CUTOFF: f64 = 45.0;

/// exp(u) + (x^2/4) exp(-u) + nu u, the negative log-integrand.
#[inline]
fn neg_log_integrand(u: f64, nu: f64, q: f64) -> f64 {
    u.exp() + q * (-u).exp() + nu * u
}

/// Trapezoid sum of the u-integral. Returns ln of the integral value.
fn k_integral_ln(nu: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    // peak of the integrand: w^2 + nu w - q = 0
    let w_star = 0.5 * (-nu + (nu * nu + x * x).sqrt());
    let u_star = if w_star > 0.0 { w_star.ln() } else { (q / nu.max(1e-2)).ln() };
    let g0 = neg_log_integrand(u_star, nu, q);
    let mut lo = u_star;
    for _ in 0..90 {
        lo -= 2.0;
        if neg_log_integrand(lo, nu, q) - g0 > LOG_CUTOFF {
            break;
        }
    }
    let mut hi = u_star;
    for _ in 0..90 {
        hi += 2.0;
        if neg_log_integrand(hi, nu, q) - g0 > LOG_CUTOFF {
            break;
        }
    }
    let steps = ((hi - lo) / TRAPEZOID_STEP).ceil() as usize;
    let h = (hi - lo) / steps as f64;
    let mut acc = CompensatedSum::new();
    for i in 0..=steps {
        let u = lo + h * i as f64;
        acc.add((-(neg_log_integrand(u, nu, q) - g0)).exp());
    }
    (h * acc.value()).ln() - g0
}

/// Large-argument asymptotic series for e^x K_nu(x); valid for x > nu-ish.
fn k_asymptotic_scaled(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut acc = CompensatedSum::new();
    acc.add(1.0);
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let num = mu - (2.0 * kf - 1.0) * (2.0 * kf - 1.0);
        term *= num / (8.0 * kf * x);
        if term.abs() > prev {
            break; // asymptotic series: stop at the smallest term
        }
        acc.add(term);
        prev = term.abs();
        if term.abs() < 1e-17 * acc.value().abs() {
            break;
        }
    }
    (std::f64::consts::PI / (2.0 * x)).sqrt() * acc.value()
}

fn k_ln_value(nu: f64, x: f64) -> Result<f64> {
    let nu = nu.abs();
    if !(x > 0.0) {
        return Err(Error::Domain(format!("bessel_k needs x > 0, got {x}")));
    }
    if x > ASYMPTOTIC_CROSSOVER {
        Ok(k_asymptotic_scaled(nu, x).ln() - x)
    } else {
        let ln_integral = k_integral_ln(nu, x);
        Ok(nu * (0.5 * x).ln() - std::f64::consts::LN_2 + ln_integral)
    }
}

/// Modified Bessel function of the second kind, arbitrary real order.
/// Uses the symmetry K_{-nu} = K_nu.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    let ln_k = k_ln_value(nu, x)?;
    if ln_k > 709.0 {
        return Err(Error::Range(format!("bessel_k({nu}, {x}) overflows f64")));
    }
    if ln_k < -745.0 {
        return Err(Error::Range(format!("bessel_k({nu}, {x}) underflows f64")));
    }
    Ok(ln_k.exp())
}

/// Exponentially scaled variant e^x K_nu(x); stable out to enormous x.
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    let nu = nu.abs();
    if !(x > 0.0) {
        return Err(Error::Domain(format!("bessel_k_scaled needs x > 0, got {x}")));
    }
    if x > ASYMPTOTIC_CROSSOVER {
        Ok(k_asymptotic_scaled(nu, x))
    } else {
        let ln_k = nu * (0.5 * x).ln() - std::f64::consts::LN_2 + k_integral_ln(nu, x) + x;
        if ln_k > 709.0 {
            return Err(Error::Range(format!(
                "bessel_k_scaled({nu}, {x}) overflows f64"
            )));
        }
        Ok(ln_k.exp())
    }
}

/// rho^(-nu) K_nu(a rho).
pub fn kscr(nu: f64, a: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("kscr needs rho > 0, got {rho}")));
    }
    if !(a > 0.0) {
        return Err(Error::Domain(format!("kscr needs a > 0, got {a}")));
    }
    let ln_val = k_ln_value(nu, a * rho)? - nu * rho.ln();
    if ln_val > 709.0 {
        return Err(Error::Range(format!("kscr({nu}, {a}, {rho}) overflows f64")));
    }
    Ok(ln_val.exp())
}

/// Exponentially scaled variant e^{a rho} rho^{-nu} K_nu(a rho).
pub fn kscr_scaled(nu: f64, a: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("kscr_scaled needs rho > 0, got {rho}")));
    }
    let kh = bessel_k_scaled(nu, a * rho)?;
    let ln_val = kh.ln() - nu * rho.ln();
    if ln_val > 709.0 {
        return Err(Error::Range(format!(
            "kscr_scaled({nu}, {a}, {rho}) overflows f64"
        )));
    }
    Ok(ln_val.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    /// Closed form for half-integer orders:
    /// K_{n+1/2}(x) = sqrt(pi/(2x)) e^{-x} sum_k (n+k)! / (k! (n-k)! (2x)^k)
    fn k_half_integer(n: usize, x: f64) -> f64 {
        let factorial = |m: usize| (1..=m).map(|j| j as f64).product::<f64>();
        let mut sum = 0.0;
        for k in 0..=n {
            let c = factorial(n + k) / (factorial(k) * factorial(n - k));
            sum += c / (2.0 * x).powi(k as i32);
        }
        (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() * sum
    }

    #[test]
    fn gamma_standard_values() {
        assert!(rel(gamma_fn(0.5).unwrap(), std::f64::consts::PI.sqrt()) < 1e-13);
        assert!(rel(gamma_fn(2.0).unwrap(), 1.0) < 1e-13);
        assert!(
            rel(
                gamma_fn(-0.5).unwrap(),
                -2.0 * std::f64::consts::PI.sqrt()
            ) < 1e-13
        );
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-3.0).is_err());
    }

    #[test]
    fn gamma_recurrence() {
        for &x in &[0.17, 0.9, 1.3, 2.7, 4.2, 6.9, -0.7, -1.3] {
            let lhs = gamma_fn(x + 1.0).unwrap();
            let rhs = x * gamma_fn(x).unwrap();
            assert!(rel(lhs, rhs) < 1e-12, "recurrence failed at x = {x}");
        }
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for &x in &[0.1, 0.5, 1.0, 2.5, 10.0, 30.0] {
            assert!(rel(ln_gamma(x).unwrap().exp(), gamma_fn(x).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn bessel_half_order_closed_form() {
        // K_{1/2}(1) = sqrt(pi/2) / e
        let expected = (std::f64::consts::PI / 2.0).sqrt() * (-1.0f64).exp();
        assert!(rel(bessel_k(0.5, 1.0).unwrap(), expected) < 1e-12);
        // a few more half-integer orders across the argument range
        for &(n, x) in &[(0usize, 0.3), (1, 1.7), (2, 5.0), (3, 12.0), (1, 29.0), (2, 45.0)] {
            let nu = n as f64 + 0.5;
            assert!(
                rel(bessel_k(nu, x).unwrap(), k_half_integer(n, x)) < 2e-13,
                "K_{{{nu}}}({x})"
            );
        }
    }

    #[test]
    fn bessel_symmetry_in_order() {
        for &(nu, x) in &[(1.3, 2.0), (0.5, 0.1), (4.2, 7.0)] {
            assert_eq!(bessel_k(-nu, x).unwrap(), bessel_k(nu, x).unwrap());
        }
    }

    #[test]
    fn bessel_recurrence_grid() {
        // K_{nu+1}(x) - K_{nu-1}(x) = (2 nu / x) K_nu(x), relative 1e-9
        let nus = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0];
        let xs = [0.05, 0.1, 0.3, 1.0, 3.0, 8.0, 15.0, 30.0];
        for &nu in &nus {
            for &x in &xs {
                let lhs = bessel_k(nu + 1.0, x).unwrap() - bessel_k(nu - 1.0, x).unwrap();
                let rhs = 2.0 * nu / x * bessel_k(nu, x).unwrap();
                assert!(
                    rel(lhs, rhs) < 1e-9,
                    "recurrence at nu={nu}, x={x}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn bessel_monotonicity() {
        // strictly decreasing in x
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let x = 0.05 * 1.3f64.powi(i);
            if x > 80.0 {
                break;
            }
            let v = bessel_k(1.3, x).unwrap();
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
        // nondecreasing in nu >= 0
        for &x in &[0.2, 1.0, 5.0] {
            let mut prev = 0.0;
            for i in 0..10 {
                let v = bessel_k(0.5 * i as f64, x).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn bessel_asymptotic_envelopes() {
        // small argument: K_nu(x) ~ (1/2) Gamma(nu) (x/2)^(-nu), within 1% at x = 1e-4
        for &nu in &[0.5, 1.0, 2.3] {
            let x: f64 = 1e-4;
            let approx = 0.5 * gamma_fn(nu).unwrap() * (0.5 * x).powf(-nu);
            assert!(rel(bessel_k(nu, x).unwrap(), approx) < 0.01);
        }
        // x K_1(x) -> 1 as x -> 0
        assert!((1e-6 * bessel_k(1.0, 1e-6).unwrap() - 1.0).abs() < 1e-3);
        // large argument: K_nu(x) ~ sqrt(pi/(2x)) e^{-x}, within 1% at x = 50.
        // The first correction is (4 nu^2 - 1)/(8x), so the envelope itself is
        // only 1%-accurate there for orders below ~1.2.
        for &nu in &[0.5, 1.0] {
            let x = 50.0;
            let approx = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
            assert!(rel(bessel_k(nu, x).unwrap(), approx) < 0.01);
        }
    }

    #[test]
    fn bessel_quadrature_vs_series_at_crossover() {
        // both evaluation branches at the same argument must agree
        for &nu in &[0.5, 1.7, 3.2, 5.0] {
            for &x in &[29.0, 30.0, 31.0] {
                let q = bessel_k_scaled(nu, x).unwrap();
                let s = k_asymptotic_scaled(nu, x);
                assert!(rel(q, s) < 1e-11, "nu={nu}, x={x}: {q} vs {s}");
            }
        }
    }

    #[test]
    fn bessel_reference_values() {
        // frozen from 30-digit evaluation of the defining integral
        let refs = [
            (2.3, 1e-4, 4553052132.1969218299),
            (1.0, 1e-4, 9999.999508686404478),
            (2.3, 50.0, 3.5935292457859581871e-23),
            (5.0, 29.0, 8.9980024458642219518e-14),
            (3.5, 20.0, 7.7367308923737836818e-10),
            (0.75, 0.05, 9.617730166147382196),
            (1.3, 2.0, 0.16082436361104641988),
            (4.5, 1e-8, 1.3159798441812751305e38),
            (1.0, 100.0, 4.6798537356369092866e-45),
        ];
        for &(nu, x, want) in &refs {
            assert!(
                rel(bessel_k(nu, x).unwrap(), want) < 1e-13,
                "K_{nu}({x})"
            );
        }
    }

    #[test]
    fn bessel_scaled_consistency() {
        for &(nu, x) in &[(0.7, 0.5), (2.1, 10.0), (1.0, 100.0)] {
            let k = bessel_k(nu, x);
            let ks = bessel_k_scaled(nu, x).unwrap();
            if let Ok(k) = k {
                assert!(rel(ks, k * x.exp()) < 1e-12);
            }
        }
        // far beyond the f64 range of the unscaled value
        assert!(bessel_k(1.0, 800.0).is_err());
        let ks = bessel_k_scaled(1.0, 800.0).unwrap();
        assert!(rel(ks, (std::f64::consts::PI / 1600.0).sqrt()) < 1e-3);
    }

    #[test]
    fn bessel_domain_errors() {
        assert!(bessel_k(1.0, 0.0).is_err());
        assert!(bessel_k(1.0, -2.0).is_err());
        assert!(kscr(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn kscr_examples() {
        // rho = 1 makes the prefactor 1
        assert!(rel(kscr(0.5, 1.0, 1.0).unwrap(), bessel_k(0.5, 1.0).unwrap()) < 1e-14);
        // composition with the prefactor
        let v = kscr(1.5, 2.0, 3.0).unwrap();
        let expected = 3.0f64.powf(-1.5) * bessel_k(1.5, 6.0).unwrap();
        assert!(rel(v, expected) < 1e-13);
        // small-rho asymptote: 2^(nu-1) Gamma(nu) a^(-nu) rho^(-2 nu)
        let (nu, a, rho): (f64, f64, f64) = (1.2, 0.7, 1e-4);
        let approx =
            2f64.powf(nu - 1.0) * gamma_fn(nu).unwrap() * a.powf(-nu) * rho.powf(-2.0 * nu);
        assert!(rel(kscr(nu, a, rho).unwrap(), approx) < 0.01);
    }
}
