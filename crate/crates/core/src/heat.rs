//! Closed-form heat kernels on hyperbolic n-space, the heat semigroup as a
//! quadrature operator, and the time-integral identity that converts the
//! semigroup weight into a Bessel kernel.

use crate::error::{Error, Result};
use crate::geometry::{HyperPoint, PolarGrid};
use crate::quad::{chordal_integral, CompensatedSum};
use crate::specfun::kscr;
use crate::termcalc::{apply_D_pow, eval_term_sum, Atom, TermSum};

/// Dimension and derived iteration count for the radial derivative operator:
/// m = (n-1)/2 for odd n, m = n/2 for even n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeatKernelSpec {
    pub n: usize,
    pub m: u32,
}

impl HeatKernelSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::Config("heat kernel needs n >= 1".into()));
        }
        let m = if n % 2 == 1 { (n - 1) / 2 } else { n / 2 } as u32;
        Ok(Self { n, m })
    }

    pub fn is_odd(&self) -> bool {
        self.n % 2 == 1
    }
}

/// The heat kernel at fixed (n, t), reusable across radii.
#[derive(Debug, Clone)]
pub struct HeatKernel {
    spec: HeatKernelSpec,
    t: f64,
    termsum: TermSum,
    prefactor: f64,
}

impl HeatKernel {
    pub fn new(n: usize, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
        }
        let spec = HeatKernelSpec::new(n)?;
        let termsum = apply_D_pow(&TermSum::atom(Atom::gauss(t)?), spec.m)?;
        let m = spec.m as f64;
        let pi = std::f64::consts::PI;
        let prefactor = if spec.is_odd() {
            (2.0 * pi).powf(-m) * (4.0 * pi * t).powf(-0.5) * (-m * m * t).exp()
        } else {
            (2.0 * pi).powf(-(m + 0.5))
                * t.powf(-0.5)
                * (-(2.0 * m - 1.0) * (2.0 * m - 1.0) / 4.0 * t).exp()
        };
        Ok(Self { spec, t, termsum, prefactor })
    }

    /// Truncation radius: the Gaussian atom is dead once r^2/4t grows by ~60
    /// past its value at rho.
    fn r_hi(&self, rho: f64) -> f64 {
        (rho * rho + 240.0 * self.t).sqrt() + 0.1
    }

    /// Variation scale of the integrand near r = rho.
    fn r_scale(&self, rho: f64) -> f64 {
        let diff = (2.0 * self.t / (rho + 1e-300)).min(self.t.sqrt());
        (0.25 * rho).min(diff.max(1e-12)).min(1.0)
    }

    /// Kernel value; rho = 0 by even-order continuation from small radii.
    pub fn eval(&self, rho: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(Error::Domain(format!("heat kernel needs rho >= 0, got {rho}")));
        }
        if rho == 0.0 {
            // p is even in rho: (4 p(h) - p(2h)) / 3 is exact through h^2
            let h = 1e-3 * (1.0f64).min(self.t.sqrt());
            return Ok((4.0 * self.eval(h)? - self.eval(2.0 * h)?) / 3.0);
        }
        if self.spec.is_odd() {
            Ok(self.prefactor * eval_term_sum(&self.termsum, rho)?)
        } else {
            let mut err: Option<Error> = None;
            let integral = chordal_integral(
                |r| match eval_term_sum(&self.termsum, r) {
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
            Ok(self.prefactor * integral)
        }
    }
}

/// Heat kernel p(t, rho) on hyperbolic n-space.
pub fn heat_kernel(n: usize, t: f64, rho: f64) -> Result<f64> {
    HeatKernel::new(n, t)?.eval(rho)
}

/// Result of a semigroup quadrature: the value and the grid's mass defect
/// |sum w p - 1|, which bounds the coverage error for bounded fields.
#[derive(Debug, Clone, Copy)]
pub struct SemigroupValue {
    pub value: f64,
    pub mass_defect: f64,
}

/// e^{t Laplacian} f at the grid center: sum of w p(t, rho) f(xi).
pub fn heat_semigroup<F: FnMut(&HyperPoint) -> f64>(
    mut f: F,
    t: f64,
    grid: &PolarGrid,
) -> Result<SemigroupValue> {
    let hk = HeatKernel::new(grid.n, t)?;
    let area = crate::geometry::sphere_area(grid.n);
    let mut total = CompensatedSum::new();
    let mut mass = CompensatedSum::new();
    for k in 0..grid.radial.nodes.len() {
        let p = hk.eval(grid.radial.nodes[k])?;
        if p == 0.0 {
            continue;
        }
        let mut ang = CompensatedSum::new();
        for j in 0..grid.angular.len() {
            ang.add(grid.angular.weights[j] * f(&grid.point(k, j, 1.0)));
        }
        total.add(grid.radial_measure[k] * p * ang.value());
        mass.add(grid.radial_measure[k] * p * area);
    }
    Ok(SemigroupValue {
        value: total.value(),
        mass_defect: (mass.value() - 1.0).abs(),
    })
}

/// Both sides of the time-integral identity
///   int_0^inf e^{-a^2 t - rho^2/(4t)} t^{-(3+sp)/2} dt
///     = 2 (2a)^{(1+sp)/2} rho^{-(1+sp)/2} K_{(1+sp)/2}(a rho),
/// the left by adaptive quadrature, the right through the Bessel route.
pub fn time_integral_identity(a: f64, s: f64, p: f64, rho: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !(s > 0.0 && s < 1.0) || !(p > 1.0) || !(rho > 0.0) {
        return Err(Error::Domain(format!(
            "time_integral_identity needs a, rho > 0, s in (0,1), p > 1; got a={a}, s={s}, p={p}, rho={rho}"
        )));
    }
    let nu = 0.5 * (1.0 + s * p);
    let scale = 2.0 * (2.0 * a).powf(nu);
    let atom = Atom::bessel(nu, a, 0.0)?;
    let lhs = scale * crate::kernels::time_integral_atom(&atom, 0, rho)?;
    let rhs = scale * kscr(nu, a, rho)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{distance, GridSpec, HyperPoint};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn n3_closed_form() {
        // p(t, rho) = (4 pi t)^{-3/2} (rho / sinh rho) e^{-t - rho^2/(4t)}
        for &t in &[0.1, 1.0, 3.0] {
            let hk = HeatKernel::new(3, t).unwrap();
            for &rho in &[0.05f64, 0.7, 2.0, 6.0] {
                let closed = (4.0 * std::f64::consts::PI * t).powf(-1.5)
                    * (rho / rho.sinh())
                    * (-t - rho * rho / (4.0 * t)).exp();
                assert!(rel(hk.eval(rho).unwrap(), closed) < 1e-13, "t={t}, rho={rho}");
            }
        }
    }

    #[test]
    fn n1_gaussian() {
        let t = 0.8;
        let hk = HeatKernel::new(1, t).unwrap();
        for &rho in &[0.0f64, 0.5, 2.0] {
            let expect = (4.0 * std::f64::consts::PI * t).powf(-0.5)
                * (-rho * rho / (4.0 * t)).exp();
            assert!(rel(hk.eval(rho).unwrap(), expect) < 1e-10);
        }
    }

    #[test]
    fn rho_zero_continuation() {
        // continuous extension at rho = 0 for n = 3 against the closed form
        let t = 0.5;
        let hk = HeatKernel::new(3, t).unwrap();
        let closed = (4.0 * std::f64::consts::PI * t).powf(-1.5) * (-t).exp();
        assert!(rel(hk.eval(0.0).unwrap(), closed) < 1e-9);
        // rho = 0 value is finite for even n too
        assert!(HeatKernel::new(2, 1.0).unwrap().eval(0.0).unwrap() > 0.0);
    }

    fn mass_grid(n: usize, t: f64) -> PolarGrid {
        let r_max = (n as f64 - 1.0) * t + 12.0 * t.sqrt() + 12.0;
        let mut spec = GridSpec::new(n, r_max, 30, 4);
        spec.radial_order = 14;
        PolarGrid::build(&HyperPoint::origin(n), &spec).unwrap()
    }

    #[test]
    fn mass_conservation_samples() {
        for &(n, t) in &[(2usize, 1.0), (3, 5.0), (4, 0.1), (5, 1.0)] {
            let grid = mass_grid(n, t);
            let hk = HeatKernel::new(n, t).unwrap();
            let mass = grid.integrate_radial(|rho| hk.eval(rho).unwrap());
            assert!(
                (mass - 1.0).abs() < 1e-6,
                "mass defect at n={n}, t={t}: {}",
                mass - 1.0
            );
        }
    }

    #[test]
    fn positivity_and_monotone_decay_in_rho() {
        for &n in &[2usize, 3, 4, 5] {
            let hk = HeatKernel::new(n, 0.7).unwrap();
            let mut prev = f64::INFINITY;
            let mut rho = 0.01;
            while rho < 12.0 {
                let v = hk.eval(rho).unwrap();
                assert!(v > 0.0, "n={n}, rho={rho}");
                assert!(v < prev, "n={n}, rho={rho}");
                prev = v;
                rho *= 1.5;
            }
        }
    }

    #[test]
    fn heat_equation_residual() {
        // |dp/dt - (d2p/drho2 + (n-1) coth(rho) dp/drho)| <= 1e-4 |dp/dt|
        for &n in &[2usize, 3] {
            for &t in &[0.2, 0.9, 2.0] {
                for &rho in &[0.2f64, 1.1, 3.0] {
                    let p = |tt: f64, rr: f64| heat_kernel(n, tt, rr).unwrap();
                    let ht = 1e-4 * t;
                    let hr = 1e-4 * rho.max(0.5);
                    let dt = (p(t + ht, rho) - p(t - ht, rho)) / (2.0 * ht);
                    let drr = (p(t, rho + hr) - 2.0 * p(t, rho) + p(t, rho - hr)) / (hr * hr);
                    let dr = (p(t, rho + hr) - p(t, rho - hr)) / (2.0 * hr);
                    let lap = drr + (n as f64 - 1.0) / rho.tanh() * dr;
                    assert!(
                        (dt - lap).abs() <= 1e-4 * dt.abs(),
                        "n={n}, t={t}, rho={rho}: dt={dt}, lap={lap}"
                    );
                }
            }
        }
    }

    #[test]
    fn semigroup_constant_and_zero() {
        let grid = mass_grid(2, 1.0);
        let one = heat_semigroup(|_| 1.0, 1.0, &grid).unwrap();
        assert!((one.value - 1.0).abs() < 1e-6, "{}", one.value);
        assert!(one.mass_defect < 1e-6);
        let zero = heat_semigroup(|_| 0.0, 1.0, &grid).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn semigroup_short_time_recovers_field() {
        let n = 3;
        let o = HyperPoint::origin(n);
        let x = HyperPoint::from_polar(0.8, &[1.0, 0.0, 0.0]);
        let f = |xi: &HyperPoint| (-distance(&o, xi).powi(2)).exp();
        let t: f64 = 1e-3;
        let r_max = 60.0 * t.sqrt();
        let mut spec = GridSpec::new(n, r_max, 24, 8);
        spec.radial_order = 12;
        let grid = PolarGrid::build(&x, &spec).unwrap();
        let w = heat_semigroup(f, t, &grid).unwrap();
        assert!(w.mass_defect < 1e-8, "defect {}", w.mass_defect);
        // w = f + t (Lap f)(x) + O(t^2); here |Lap f| = O(1)
        assert!((w.value - f(&x)).abs() < 6.0 * t, "{} vs {}", w.value, f(&x));
    }

    #[test]
    fn semigroup_bounded_by_sup() {
        let grid = mass_grid(3, 0.5);
        let o = HyperPoint::origin(3);
        let w = heat_semigroup(|xi| 1.0 / (1.0 + distance(&o, xi)), 0.5, &grid).unwrap();
        assert!(w.value.abs() <= 1.0 + 1e-9);
    }

    #[test]
    fn time_integral_identity_reference() {
        // (a, s, p, rho) = (1, 1/2, 2, 1): both sides equal 4 K_1(1)
        let (lhs, rhs) = time_integral_identity(1.0, 0.5, 2.0, 1.0).unwrap();
        let expect = 4.0 * crate::specfun::bessel_k(1.0, 1.0).unwrap();
        assert!(rel(lhs, rhs) < 1e-8, "{lhs} vs {rhs}");
        assert!(rel(rhs, expect) < 1e-13);
        assert!(rel(lhs, 2.407628920788939) < 1e-8);
    }

    #[test]
    fn time_integral_identity_grid() {
        for &a in &[0.5, 1.0, 2.0] {
            for &(s, p) in &[(0.3, 1.5), (0.5, 2.0), (0.9, 3.0)] {
                for &rho in &[0.2, 1.0, 2.0, 4.0] {
                    let (lhs, rhs) = time_integral_identity(a, s, p, rho).unwrap();
                    assert!(
                        rel(lhs, rhs) < 1e-8,
                        "a={a}, s={s}, p={p}, rho={rho}: {lhs} vs {rhs}"
                    );
                }
            }
        }
        // doubling rho: the ratio tracks the Bessel kernel directly
        let (_, r1) = time_integral_identity(1.0, 0.5, 2.0, 1.0).unwrap();
        let (_, r2) = time_integral_identity(1.0, 0.5, 2.0, 2.0).unwrap();
        let k_ratio = kscr(1.0, 1.0, 2.0).unwrap() / kscr(1.0, 1.0, 1.0).unwrap();
        assert!(rel(r2 / r1, k_ratio) < 1e-12);
    }
}
