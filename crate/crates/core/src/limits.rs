//! The s -> 1 laboratory: kernel moment and tail integrals, the sphere
//! constant gamma_p, the small-radius ratio of the chordal Bessel integral,
//! and the convergence sweep of the fractional operator toward the classical
//! p-Laplacian.

use crate::error::{Error, Result};
use crate::geometry::HyperPoint;
use crate::kernels::{Kernel, Params};
use crate::operator::{classical_plap, frac_plap_singular, QuadratureSpec, TestFunction};
use crate::quad::{chordal_integral, integrate_geometric};
use crate::specfun::{bessel_k, gamma_fn};
use serde::{Deserialize, Serialize};

/// One point of an s-sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRecord {
    pub s: f64,
    pub value_fractional: f64,
    pub value_classical: f64,
    pub gap: f64,
    pub err: f64,
}

/// c_{n,s,p} int_R^inf K(rho) sinh^{n-1} rho d rho; tends to 0 as s -> 1.
pub fn tail_integral(params: &Params, r: f64) -> Result<f64> {
    let kernel = Kernel::new(*params)?;
    Ok(kernel.constants.c_nsp * kernel.tail_integral_raw(r)?)
}

/// c_{n,s,p} int_0^R rho^{p + beta} K(rho) sinh^{n-1} rho d rho.
/// beta = 0 converges to Gamma((p+n)/2) / (pi^{(n-1)/2} Gamma((p+1)/2)) as
/// s -> 1; beta > 0 converges to 0.
pub fn moment_integral(params: &Params, r: f64, beta: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("moment integral needs R > 0, got {r}")));
    }
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("moment integral needs beta >= 0, got {beta}")));
    }
    let kernel = Kernel::new(*params)?;
    let n = params.n;
    let p = params.p;
    // below rho_1 the integrand is kappa0 rho^{alpha + beta - 1} to relative
    // accuracy O(rho_1^{1+sp}); the closed form carries the whole
    // accumulation of mass toward zero as s -> 1
    let rho_1 = (1e-4f64).min(0.5 * r);
    let expo = params.alpha() + beta;
    let inner = kernel.kappa0()? * rho_1.powf(expo) / expo;
    let mut err: Option<Error> = None;
    let outer = integrate_geometric(
        |rho| match kernel.eval(rho) {
            Ok(v) => v * rho.powf(p + beta) * rho.sinh().powi(n as i32 - 1),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        rho_1,
        r,
        12,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(kernel.constants.c_nsp * (inner + outer))
}

/// The closed-form s -> 1 limit of the beta = 0 moment.
pub fn lemma_moment_limit(n: usize, p: f64) -> Result<f64> {
    let nf = n as f64;
    Ok(std::f64::consts::PI.powf(-0.5 * (nf - 1.0)) * gamma_fn(0.5 * (p + nf))?
        / gamma_fn(0.5 * (p + 1.0))?)
}

/// gamma_p = int_{S^{n-1}} |omega_n|^{p-2} omega_1^2 d omega
///         = pi^{(n-1)/2} Gamma((p-1)/2) / Gamma((p+n)/2).
pub fn gamma_p(n: usize, p: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("gamma_p needs n >= 2, got {n}")));
    }
    if !(p > 1.0) {
        return Err(Error::Domain(format!("gamma_p needs p > 1, got {p}")));
    }
    let nf = n as f64;
    Ok(std::f64::consts::PI.powf(0.5 * (nf - 1.0)) * gamma_fn(0.5 * (p - 1.0))?
        / gamma_fn(0.5 * (p + nf))?)
}

/// The same sphere integral by direct quadrature: the measure factorizes to
/// (|S^{n-2}| / (n-1)) int_{-1}^{1} |t|^{p-2} (1 - t^2)^{(n-1)/2} dt, split
/// at the |t|^{p-2} singularity with graded panels.
pub fn gamma_p_quadrature(n: usize, p: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("gamma_p needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let s_lower = crate::geometry::sphere_area(n - 1); // |S^{n-2}|, with |S^0| = 2
    // t = sin(theta) regularizes the t = 1 endpoint; graded panels handle
    // the |t|^{p-2} singularity at 0
    let half = integrate_geometric(
        |theta: f64| theta.sin().powf(p - 2.0) * theta.cos().powf(nf),
        2f64.powi(-120),
        0.5 * std::f64::consts::PI,
        14,
    )?;
    Ok(s_lower / (nf - 1.0) * 2.0 * half)
}

/// Ratios int_rho^inf r^{-nu} K_{nu+1}(a r) / sqrt(cosh r - cosh rho) dr
/// over rho^{-nu} K_{nu+1}(a rho) for each rho in the sequence; they approach
/// sqrt(pi/2) Gamma(nu + 1/2) / Gamma(nu + 1) as rho -> 0.
pub fn ratio_lemma_check(nu: f64, a: f64, rho_seq: &[f64]) -> Result<Vec<f64>> {
    if !(nu > -0.5) {
        return Err(Error::Domain(format!("ratio check needs nu > -1/2, got {nu}")));
    }
    if !(a > 0.0) {
        return Err(Error::Domain(format!("ratio check needs a > 0, got {a}")));
    }
    let mut out = Vec::with_capacity(rho_seq.len());
    for &rho in rho_seq {
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("ratio check needs rho > 0, got {rho}")));
        }
        let mut err: Option<Error> = None;
        // the chordal helper supplies the sinh r factor; divide it back out
        let small = (1.0 / rho.min(1.0)).ln();
        let r_hi = rho + (60.0 + (2.0 * nu + 3.0) * small) / a.min(1.0) + 5.0;
        let r_scale = (0.25 * rho).min(1.0 / (a + nu.abs() + 1.0));
        let integral = chordal_integral(
            |r| match bessel_k(nu + 1.0, a * r) {
                Ok(k) => r.powf(-nu) * k / r.sinh(),
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            rho,
            r_hi,
            r_scale,
            10,
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        let denom = rho.powf(-nu) * bessel_k(nu + 1.0, a * rho)?;
        out.push(integral / denom);
    }
    Ok(out)
}

/// Closed-form target of the small-radius ratio.
pub fn ratio_lemma_target(nu: f64) -> Result<f64> {
    Ok((0.5 * std::f64::consts::PI).sqrt() * gamma_fn(nu + 0.5)? / gamma_fn(nu + 1.0)?)
}

/// Evaluate the fractional operator across an s-grid against the fixed
/// classical value. Per-point failures are recorded and the sweep continues.
pub fn sweep_s(
    u: &TestFunction,
    x: &HyperPoint,
    n: usize,
    p: f64,
    s_grid: &[f64],
) -> Result<Vec<SweepRecord>> {
    let classical = classical_plap(u, x, n, p)?;
    let mut out = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let params = Params::new(n, s, p)?;
        let quad = QuadratureSpec::default_for(&params);
        match frac_plap_singular(u, x, &params, &quad) {
            Ok(res) => out.push(SweepRecord {
                s,
                value_fractional: res.value,
                value_classical: classical,
                gap: res.value - classical,
                err: res.err_estimate,
            }),
            Err(_) => out.push(SweepRecord {
                s,
                value_fractional: f64::NAN,
                value_classical: classical,
                gap: f64::NAN,
                err: f64::INFINITY,
            }),
        }
    }
    Ok(out)
}

/// Extrapolate sweep values to s = 1 with the model
/// v(s) = v(1) + A (1-s) + B (1-s)^2, by least squares in (1-s).
/// Returns (limit, spread-based error estimate).
pub fn extrapolate_to_one(records: &[SweepRecord]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.value_fractional.is_finite())
        .map(|r| (1.0 - r.s, r.value_fractional))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Numerical(
            "s-extrapolation needs at least 3 finite sweep points".into(),
        ));
    }
    let fit = |data: &[(f64, f64)]| -> f64 {
        // quadratic least squares, evaluated at 0
        let m = data.len() as f64;
        let (mut sx, mut sx2, mut sx3, mut sx4) = (0.0, 0.0, 0.0, 0.0);
        let (mut sy, mut sxy, mut sx2y) = (0.0, 0.0, 0.0);
        for &(x, y) in data {
            sx += x;
            sx2 += x * x;
            sx3 += x * x * x;
            sx4 += x * x * x * x;
            sy += y;
            sxy += x * y;
            sx2y += x * x * y;
        }
        // solve the 3x3 normal equations by Cramer's rule
        let a = [[m, sx, sx2], [sx, sx2, sx3], [sx2, sx3, sx4]];
        let b = [sy, sxy, sx2y];
        let det3 = |m: &[[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det3(&a);
        let mut a0 = a;
        a0[0][0] = b[0];
        a0[1][0] = b[1];
        a0[2][0] = b[2];
        det3(&a0) / d
    };
    let full = fit(&pts);
    // drop the coarsest point for the spread estimate
    let refined = if pts.len() > 3 { fit(&pts[1..]) } else { full };
    Ok((refined, (full - refined).abs()))
}
