//! The singular radial kernel of the fractional p-Laplacian, the Poisson
//! kernel of the extension problem, and all normalizing constants.
//!
//! For odd n the kernel is an exact term sum produced by the symbolic
//! calculus; for even n one square-root-regularized integral of the same
//! term sum remains, handled by the chordal substitution. Exponentially
//! scaled variants remove the e^{-(n-1) rho} envelope so the slow algebraic
//! tail of kernel-weighted integrals can be computed at arbitrarily large
//! radii.

use crate::error::{Error, Result};
use crate::quad::{chordal_integral, gl_integrate, integrate_geometric};
use crate::specfun::{gamma_fn, kscr, ln_gamma};
use crate::termcalc::{apply_D_pow, eval_term_sum_with, Atom, TermSum};
use serde::{Deserialize, Serialize};

/// Operator parameters (n, s, p) with derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub s: f64,
    pub p: f64,
}

impl Params {
    pub fn new(n: usize, s: f64, p: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("kernel parameters need n >= 2, got {n}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("s must lie in (0,1), got {s}")));
        }
        if !(p > 1.0) {
            return Err(Error::Domain(format!("p must exceed 1, got {p}")));
        }
        Ok(Self { n, s, p })
    }

    pub fn sp(&self) -> f64 {
        self.s * self.p
    }

    /// Bessel order (1 + sp) / 2.
    pub fn nu(&self) -> f64 {
        0.5 * (1.0 + self.sp())
    }

    /// Frequency scale (n - 1) / 2.
    pub fn a(&self) -> f64 {
        0.5 * (self.n as f64 - 1.0)
    }

    /// Number of D applications: (n-1)/2 for odd n, n/2 for even n.
    pub fn m(&self) -> u32 {
        if self.n % 2 == 1 {
            ((self.n - 1) / 2) as u32
        } else {
            (self.n / 2) as u32
        }
    }

    pub fn is_odd(&self) -> bool {
        self.n % 2 == 1
    }

    /// Small-radius order p(1 - s) of kernel-weighted p-th moments.
    pub fn alpha(&self) -> f64 {
        self.p * (1.0 - self.s)
    }

    /// Whether the operator definition additionally requires a nonvanishing
    /// gradient at the evaluation point: p <= 2 / (2 - s).
    pub fn gradient_required(&self) -> bool {
        self.p <= 2.0 / (2.0 - self.s)
    }
}

/// The five normalizing constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c1: f64,
    pub c_nsp: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

/// ln of |Gamma(-s)| = Gamma(1-s)/s for s in (0,1).
fn ln_abs_gamma_neg(s: f64) -> Result<f64> {
    Ok(ln_gamma(1.0 - s)? - s.ln())
}

/// Evaluate the Gamma-expression constants in log space.
pub fn constants(params: &Params) -> Result<Constants> {
    let (nf, s, p) = (params.n as f64, params.s, params.p);
    let sp = params.sp();
    let nu = params.nu();
    let ln2 = std::f64::consts::LN_2;
    let ln_pi = std::f64::consts::PI.ln();
    // shared prefactor (p/2) (sqrt(pi)/2) / Gamma((p+1)/2)
    let ln_pref = (0.5 * p).ln() + 0.5 * ln_pi - ln2 - ln_gamma(0.5 * (p + 1.0))?;
    let ln_gn = ln_abs_gamma_neg(s)?;

    let c1 = (ln_pref + s * (2.0 - p) * ln2 - ln_gn).exp();
    let c_nsp =
        (ln_pref + 2.0 * s * ln2 + ln_gamma(0.5 * (nf + sp))? - 0.5 * nf * ln_pi - ln_gn).exp();
    let c2 = (nu * (0.5 * (nf - 1.0)).ln()
        - 0.5 * (nf - 2.0 + sp) * ln2
        - ln_gamma(0.5 * (nf + sp))?)
    .exp();
    let c3 = (ln_pref + 2.0 * s * ln2 + ln_gamma(0.5 * sp)? - ln_gn).exp();
    let c4 = (nu * (0.25 * (nf - 1.0)).ln()
        - 0.5 * (nf - 3.0) * ln2
        - 0.5 * nf * ln_pi
        - ln_gamma(0.5 * sp)?)
    .exp();
    Ok(Constants { c1, c_nsp, c2, c3, c4 })
}

/// Default atom evaluator (the production Bessel route).
fn kscr_atom(atom: &Atom, shift: u32, rho: f64) -> Result<f64> {
    match *atom {
        Atom::Bessel { nu, a, y } => {
            let f = (rho * rho + y * y).sqrt();
            kscr(nu + shift as f64, a, f)
        }
        Atom::Gauss { t } => Ok((-rho * rho / (4.0 * t)).exp()),
    }
}

/// Switch radius above which even-n evaluation goes through the scaled
/// near-diagonal form (hyperbolic functions overflow not far beyond).
const EVEN_SCALED_SWITCH: f64 = 50.0;

/// The singular kernel, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub params: Params,
    pub constants: Constants,
    termsum: TermSum,
}

impl Kernel {
    pub fn new(params: Params) -> Result<Self> {
        let constants = constants(&params)?;
        let atom = Atom::bessel(params.nu(), params.a(), 0.0)?;
        let termsum = apply_D_pow(&TermSum::atom(atom), params.m())?;
        Ok(Self { params, constants, termsum })
    }

    /// Truncation radius for the even-n chordal integral at base radius rho:
    /// the integrated tail decays like e^{-(m + a - 1/2)(r - rho)}, with a
    /// logarithmic allowance for the power-law magnitude at small rho.
    fn r_hi(&self, rho: f64) -> f64 {
        let lambda = self.params.m() as f64 + self.params.a() - 0.5;
        let nu_top = self.params.nu() + self.params.m() as f64;
        let small = (1.0 / rho.min(1.0)).ln();
        rho + (55.0 + (2.0 * nu_top + 1.0) * small) / lambda + 5.0
    }

    fn eval_with<A>(&self, rho: f64, atom_eval: &A) -> Result<f64>
    where
        A: Fn(&Atom, u32, f64) -> Result<f64>,
    {
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("kernel_K needs rho > 0, got {rho}")));
        }
        let c2 = self.constants.c2;
        if self.params.is_odd() {
            Ok(c2 * eval_term_sum_with(&self.termsum, rho, atom_eval)?)
        } else {
            let mut err: Option<Error> = None;
            let integral = chordal_integral(
                |r| match eval_term_sum_with(&self.termsum, r, atom_eval) {
                    Ok(v) => v,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                },
                rho,
                self.r_hi(rho),
                self.r_scale(rho),
                10,
            )?;
            if let Some(e) = err {
                return Err(e);
            }
            Ok(c2 / std::f64::consts::PI.sqrt() * integral)
        }
    }

    /// Resolution hint for the chordal integral: the term sum decays like
    /// e^{-(m + a) r} and varies on the power-law scale rho near zero.
    fn r_scale(&self, rho: f64) -> f64 {
        let decay = self.params.m() as f64 + self.params.a();
        (0.25 * rho).min(1.0 / decay)
    }

    /// Kernel value at rho > 0.
    pub fn eval(&self, rho: f64) -> Result<f64> {
        if !self.params.is_odd() && rho > EVEN_SCALED_SWITCH {
            let scaled = self.eval_scaled(rho)?;
            return Ok(scaled * (-(self.params.n as f64 - 1.0) * rho).exp());
        }
        self.eval_with(rho, &kscr_atom)
    }

    /// Exponentially scaled kernel e^{(n-1) rho} K(rho); finite for all rho.
    pub fn eval_scaled(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("kernel needs rho > 0, got {rho}")));
        }
        let c2 = self.constants.c2;
        let m = self.params.m() as f64;
        let a = self.params.a();
        if self.params.is_odd() {
            // net decay of the term sum is m, so the scaled evaluation
            // carries exactly e^{(m + a) rho} = e^{(n-1) rho}
            return Ok(c2 * crate::termcalc::eval_term_sum_scaled(&self.termsum, rho)?);
        }
        if rho <= EVEN_SCALED_SWITCH {
            let plain = self.eval_with(rho, &kscr_atom)?;
            return Ok(plain * ((self.params.n as f64 - 1.0) * rho).exp());
        }
        // Far regime: with w = r - rho = z^2 the scaled integral becomes
        //   int_0^inf e^{-(m+a-3/4) z^2} [z / sqrt(sinh(z^2/2))] Psi(rho + z^2) dz
        // where Psi is the e^{(m+a) r}-scaled term sum; the e^{rho}
        // prefactors cancel exactly because a - m = -1/2 for even n.
        let lambda = m + a - 0.75;
        let z_hi = (55.0 / lambda).sqrt() + 2.0;
        let mut err: Option<Error> = None;
        let mut integrand = |z: f64| {
            let w = z * z;
            let psi = match crate::termcalc::eval_term_sum_scaled(&self.termsum, rho + w) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    return 0.0;
                }
            };
            let root = if w > 1e-30 {
                z / (0.5 * w).sinh().sqrt()
            } else {
                std::f64::consts::SQRT_2
            };
            (-lambda * w).exp() * root * psi
        };
        let head = z_hi * 2f64.powi(-20);
        let integral =
            gl_integrate(&mut integrand, 0.0, head, 12) + integrate_geometric(&mut integrand, head, z_hi, 12)?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(c2 / std::f64::consts::PI.sqrt() * integral)
    }

    /// Closed-form limit of rho^{n + sp} K(rho) as rho -> 0.
    pub fn kappa0(&self) -> Result<f64> {
        let nu = self.params.nu();
        let m = self.params.m() as f64;
        let a = self.params.a();
        let c2 = self.constants.c2;
        if self.params.is_odd() {
            Ok(c2 * 2f64.powf(nu + m - 1.0) * gamma_fn(nu + m)? * a.powf(-nu))
        } else {
            Ok(c2 * 2f64.powf(nu + m - 1.5) * gamma_fn(nu + m - 0.5)? * a.powf(-nu))
        }
    }

    /// Tail integral int_R^inf K(rho) sinh^{n-1}(rho) d rho (no c_{n,s,p}).
    pub fn tail_integral_raw(&self, r: f64) -> Result<f64> {
        tail_via_sigma(|rho| self.eval_scaled(rho), self.params.sp(), self.params.n, r)
    }

    /// Access to the symbolic form (used by alternative evaluation routes).
    pub fn termsum(&self) -> &TermSum {
        &self.termsum
    }

    /// Kernel evaluated with atom values from the time-integral route
    /// int_0^inf exp(-a^2 t - f^2/(4t)) t^{-nu-1} dt / (2 (2a)^nu) instead of
    /// the Bessel implementation; an independent consistency path.
    pub fn eval_via_time_integral(&self, rho: f64) -> Result<f64> {
        self.eval_with(rho, &time_integral_atom)
    }
}

/// Tail integral int_R^inf W(rho) sinh^{n-1}(rho) d rho for a kernel with
/// scaled evaluator W(rho) e^{(n-1) rho}, via the exact substitution
/// rho = R sigma^{-2/sp}:
///   (2/sp) R^{-sp/2} int_0^1 F(rho(sigma)) d sigma,
/// F(rho) = rho^{1+sp/2} [W e^{(n-1) rho}] (sinh(rho) e^{-rho})^{n-1}.
fn tail_via_sigma<E>(eval_scaled: E, sp: f64, n: usize, r: f64) -> Result<f64>
where
    E: Fn(f64) -> Result<f64>,
{
    if !(r > 0.0) {
        return Err(Error::Domain(format!("tail integral needs R > 0, got {r}")));
    }
    let nf = n as f64;
    let mut err: Option<Error> = None;
    let mut f = |sigma: f64| {
        let rho = r * sigma.powf(-2.0 / sp);
        let scaled = match eval_scaled(rho) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                return 0.0;
            }
        };
        let hs = 0.5 * (-(-2.0 * rho).exp_m1()); // sinh(rho) e^{-rho}
        rho.powf(1.0 + 0.5 * sp) * scaled * hs.powf(nf - 1.0)
    };
    let val = gl_integrate(&mut f, 0.0, 1e-6, 8) + integrate_geometric(&mut f, 1e-6, 1.0, 16)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(2.0 / sp * r.powf(-0.5 * sp) * val)
}

/// Atom evaluation through the time integral; quadrature in u = ln t.
pub(crate) fn time_integral_atom(atom: &Atom, shift: u32, rho: f64) -> Result<f64> {
    match *atom {
        Atom::Bessel { nu, a, y } => {
            let nu_eff = nu + shift as f64;
            let f = (rho * rho + y * y).sqrt();
            let q = 0.25 * f * f;
            let g = |u: f64| (-(a * a * u.exp() + q * (-u).exp() + nu_eff * u)).exp();
            let af = a * f;
            let w_star = (-nu_eff + (nu_eff * nu_eff + af * af).sqrt()) / (2.0 * a * a);
            let u_star = w_star.max(1e-300).ln();
            // seed the adaptive rule with peak-centered segments so it cannot
            // terminate before sampling the maximum
            let tol = 1e-14 * g(u_star);
            let edges = [-40.0, -16.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 30.0];
            let mut val = 0.0;
            for w in edges.windows(2) {
                val += crate::quad::adaptive_simpson(&g, u_star + w[0], u_star + w[1], tol)?;
            }
            Ok(val / (2.0 * (2.0 * a).powf(nu_eff)))
        }
        Atom::Gauss { t } => Ok((-rho * rho / (4.0 * t)).exp()),
    }
}

/// Convenience single evaluation of the singular kernel.
#[allow(non_snake_case)]
pub fn kernel_K(params: &Params, rho: f64) -> Result<f64> {
    Kernel::new(*params)?.eval(rho)
}

/// The Poisson kernel P(rho, y) of the extension problem at fixed y > 0.
#[derive(Debug, Clone)]
pub struct PoissonKernel {
    pub params: Params,
    pub y: f64,
    termsum: TermSum,
    prefactor: f64,
}

impl PoissonKernel {
    pub fn new(params: Params, y: f64) -> Result<Self> {
        if !(y > 0.0) {
            return Err(Error::Domain(format!("Poisson kernel needs y > 0, got {y}")));
        }
        let consts = constants(&params)?;
        let atom = Atom::bessel(params.nu(), params.a(), y)?;
        let termsum = apply_D_pow(&TermSum::atom(atom), params.m())?;
        Ok(Self { params, y, termsum, prefactor: consts.c4 * y.powf(params.sp()) })
    }

    fn r_hi(&self, rho: f64) -> f64 {
        let lambda = self.params.m() as f64 + self.params.a() - 0.5;
        let nu_top = self.params.nu() + self.params.m() as f64;
        let small = (1.0 / rho.min(1.0)).ln();
        rho + (55.0 + (2.0 * nu_top + 1.0) * small) / lambda + 5.0
    }

    pub fn eval(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("poisson_kernel needs rho > 0, got {rho}")));
        }
        if !self.params.is_odd() && rho > EVEN_SCALED_SWITCH {
            let scaled = self.eval_scaled(rho)?;
            return Ok(scaled * (-(self.params.n as f64 - 1.0) * rho).exp());
        }
        if self.params.is_odd() {
            Ok(self.prefactor * crate::termcalc::eval_term_sum(&self.termsum, rho)?)
        } else {
            let mut err: Option<Error> = None;
            let integral = chordal_integral(
                |r| match crate::termcalc::eval_term_sum(&self.termsum, r) {
                    Ok(v) => v,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                },
                rho,
                self.r_hi(rho),
                {
                    let decay = self.params.m() as f64 + self.params.a();
                    (0.25 * rho).min(1.0 / decay).max(0.25 * self.y.min(1.0))
                },
                12,
            )?;
            if let Some(e) = err {
                return Err(e);
            }
            Ok(self.prefactor / std::f64::consts::PI.sqrt() * integral)
        }
    }
}

impl PoissonKernel {
    /// Exponentially scaled Poisson kernel e^{(n-1) rho} P(rho, y).
    pub fn eval_scaled(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("poisson_kernel needs rho > 0, got {rho}")));
        }
        let m = self.params.m() as f64;
        let a = self.params.a();
        if self.params.is_odd() {
            return Ok(self.prefactor
                * crate::termcalc::eval_term_sum_scaled(&self.termsum, rho)?);
        }
        if rho <= EVEN_SCALED_SWITCH {
            let plain = self.eval(rho)?;
            return Ok(plain * ((self.params.n as f64 - 1.0) * rho).exp());
        }
        // same near-diagonal far form as the singular kernel
        let lambda = m + a - 0.75;
        let z_hi = (55.0 / lambda).sqrt() + 2.0;
        let mut err: Option<Error> = None;
        let mut integrand = |z: f64| {
            let w = z * z;
            let psi = match crate::termcalc::eval_term_sum_scaled(&self.termsum, rho + w) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    return 0.0;
                }
            };
            let root = if w > 1e-30 {
                z / (0.5 * w).sinh().sqrt()
            } else {
                std::f64::consts::SQRT_2
            };
            (-lambda * w).exp() * root * psi
        };
        let head = z_hi * 2f64.powi(-20);
        let integral = gl_integrate(&mut integrand, 0.0, head, 12)
            + integrate_geometric(&mut integrand, head, z_hi, 12)?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(self.prefactor / std::f64::consts::PI.sqrt() * integral)
    }

    /// Tail integral int_R^inf P(rho, y) sinh^{n-1}(rho) d rho.
    pub fn tail_integral_raw(&self, r: f64) -> Result<f64> {
        tail_via_sigma(|rho| self.eval_scaled(rho), self.params.sp(), self.params.n, r)
    }
}

/// Convenience single evaluation of the Poisson kernel.
pub fn poisson_kernel(params: &Params, rho: f64, y: f64) -> Result<f64> {
    PoissonKernel::new(*params, y)?.eval(rho)
}
