//! Quadrature plumbing: Gauss-Legendre rules, geometric panel decompositions,
//! compensated summation, and sequence extrapolation.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum with compensation, in slice order.
pub fn compensated_total(values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

fn legendre_nodes(order: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on P_n over [-1, 1].
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss-Legendre nodes and weights on [-1, 1], cached per order.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(order)
        .or_insert_with(|| legendre_nodes(order))
        .clone()
}

/// Integrate `f` over [a, b] with a single Gauss-Legendre rule.
pub fn gl_integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = CompensatedSum::new();
    for (x, w) in nodes.iter().zip(weights.iter()) {
        acc.add(w * f(c + h * x));
    }
    h * acc.value()
}

/// Panel boundaries refined geometrically toward `lo` with ratio 2:
/// lo, 2 lo, 4 lo, ..., hi. Requires 0 < lo < hi.
pub fn geometric_panels(lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Config(format!(
            "geometric_panels needs 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut edges = vec![lo];
    let mut e = lo;
    while e * 2.0 < hi {
        e *= 2.0;
        edges.push(e);
    }
    edges.push(hi);
    Ok(edges.windows(2).map(|w| (w[0], w[1])).collect())
}

/// Integrate over geometric panels with a fixed GL order per panel.
pub fn integrate_geometric<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    order: usize,
) -> Result<f64> {
    let panels = geometric_panels(lo, hi)?;
    let mut acc = CompensatedSum::new();
    for (a, b) in panels {
        acc.add(gl_integrate(&mut f, a, b, order));
    }
    Ok(acc.value())
}

/// Adaptive Simpson on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol || (b - a).abs() < 1e-14 {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(Error::Numerical(
                "adaptive Simpson exceeded recursion depth".into(),
            ));
        }
        let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Radius and sinh from the chordal variable: cosh r = cosh rho + v^2,
/// computed without cancellation near r = rho = 0.
pub fn chordal_radius(rho: f64, v: f64) -> (f64, f64) {
    let c1 = 2.0 * (0.5 * rho).sinh().powi(2) + v * v; // cosh r - 1
    let sinh_r = (c1 * (c1 + 2.0)).sqrt();
    let r = (c1 + sinh_r).ln_1p();
    (r, sinh_r)
}

/// The square-root-regularized integral
///     int_rho^inf [sinh r / sqrt(cosh r - cosh rho)] f(r) dr
/// via the substitution cosh r = cosh rho + v^2, which turns it into
/// 2 int_0^{Vmax} f(r(v)) dv with no endpoint singularity. The caller
/// supplies the truncation radius `r_hi` beyond which f is negligible and a
/// resolution hint `r_scale`: the r-increment over which f varies near rho.
pub fn chordal_integral<F: FnMut(f64) -> f64>(
    mut f: F,
    rho: f64,
    r_hi: f64,
    r_scale: f64,
    order: usize,
) -> Result<f64> {
    if !(rho >= 0.0) || !(r_hi > rho) {
        return Err(Error::Config(format!(
            "chordal_integral needs 0 <= rho < r_hi, got rho={rho}, r_hi={r_hi}"
        )));
    }
    // Vmax = sqrt(cosh r_hi - cosh rho), via the product form
    let v_max = (2.0 * (0.5 * (r_hi + rho)).sinh() * (0.5 * (r_hi - rho)).sinh()).sqrt();
    // chordal image of the resolution scale; panels refine toward v = 0 from
    // there, doubling the covered r-increment roughly once per panel
    let r1 = (rho + r_scale.max(1e-300)).min(0.5 * (rho + r_hi));
    let mut v1 = (2.0 * (0.5 * (r1 + rho)).sinh() * (0.5 * (r1 - rho)).sinh()).sqrt();
    if !(v1 > 0.0) || v1 > 0.125 * v_max {
        v1 = v_max * 0.5f64.powi(24);
    }
    let mut g = |v: f64| {
        let (r, _) = chordal_radius(rho, v);
        f(r)
    };
    let mut total = gl_integrate(&mut g, 0.0, v1, order);
    total += integrate_geometric(&mut g, v1, v_max, order)?;
    Ok(2.0 * total)
}

/// Richardson extrapolation of a sequence v_k = v(h_k) with h_k = h_0 / 2^k,
/// assuming an error expansion in powers `order`, `order + order_step`, ...
/// Returns the extrapolated limit and a spread-based error estimate.
pub fn richardson(values: &[f64], order: f64, order_step: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Config("richardson needs at least 2 values".into()));
    }
    let mut table = values.to_vec();
    let mut last_delta = f64::INFINITY;
    let levels = values.len() - 1;
    for level in 0..levels {
        let q = 2f64.powf(order + level as f64 * order_step);
        for i in 0..(table.len() - 1 - level) {
            table[i] = (q * table[i + 1] - table[i]) / (q - 1.0);
        }
        let head = table.len() - 1 - level;
        if head >= 2 {
            last_delta = (table[0] - table[1]).abs();
        }
    }
    let limit = table[0];
    let err = if last_delta.is_finite() {
        last_delta
    } else {
        (values[values.len() - 1] - limit).abs()
    };
    Ok((limit, err))
}

/// Least-squares fit of samples (x_i, v_i) to the model C (1 + c / x).
/// Returns (C, max relative residual). Used to certify that a compensated
/// asymptotic quantity is constant up to its first-order 1/x correction.
pub fn fit_inverse_radius(xs: &[f64], vals: &[f64]) -> (f64, f64) {
    let (mut s00, mut s01, mut s11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, v) in xs.iter().zip(vals.iter()) {
        let t = 1.0 / x;
        s00 += 1.0;
        s01 += t;
        s11 += t * t;
        b0 += v;
        b1 += v * t;
    }
    let det = s00 * s11 - s01 * s01;
    let c_inf = (s11 * b0 - s01 * b1) / det;
    let cc = (s00 * b1 - s01 * b0) / det;
    let resid = xs
        .iter()
        .zip(vals.iter())
        .map(|(x, v)| ((v - (c_inf + cc / x)) / c_inf).abs())
        .fold(0.0f64, f64::max);
    (c_inf, resid)
}

/// Observed convergence order of a ratio-2 sequence, from the last three
/// entries: log2 of the successive-difference ratio. Returns None when the
/// differences are too small or not decreasing.
pub fn observed_order(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    let d1 = values[n - 2] - values[n - 3];
    let d2 = values[n - 1] - values[n - 2];
    if d2.abs() < 1e-300 || d1.abs() <= d2.abs() {
        return None;
    }
    Some((d1 / d2).abs().log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_exact_for_polynomials() {
        // order-8 rule integrates degree-15 polynomials exactly
        let val = gl_integrate(|x| x.powi(14), -1.0, 1.0, 8);
        assert!((val - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn gl_smooth_integrand() {
        let val = gl_integrate(|x| x.exp(), 0.0, 1.0, 16);
        assert!((val - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn geometric_panels_cover_interval() {
        let panels = geometric_panels(1e-4, 10.0).unwrap();
        assert_eq!(panels.first().unwrap().0, 1e-4);
        assert_eq!(panels.last().unwrap().1, 10.0);
        for w in panels.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
    }

    #[test]
    fn integrate_power_singularity() {
        // integral of x^{-0.9} over (1e-10, 1] = (1 - 1e-1) / 0.1
        let val = integrate_geometric(|x| x.powf(-0.9), 1e-10, 1.0, 12).unwrap();
        let exact = (1.0 - 1e-10f64.powf(0.1)) / 0.1;
        assert!((val - exact).abs() / exact < 1e-12);
    }

    #[test]
    fn simpson_converges() {
        let val = adaptive_simpson(&|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-12).unwrap();
        assert!((val - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn richardson_recovers_limit() {
        // v(h) = 1 + 3h + 2h^2 sampled at h = 1/2^k
        let vals: Vec<f64> = (0..5)
            .map(|k| {
                let h = 0.5f64.powi(k);
                1.0 + 3.0 * h + 2.0 * h * h
            })
            .collect();
        let (lim, _) = richardson(&vals, 1.0, 1.0).unwrap();
        assert!((lim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn observed_order_detects_rate() {
        let vals: Vec<f64> = (0..6)
            .map(|k| {
                let h = 0.5f64.powi(k);
                2.0 + h * h
            })
            .collect();
        let q = observed_order(&vals).unwrap();
        assert!((q - 2.0).abs() < 1e-9);
    }
}
