//! The hyperboloid model of hyperbolic n-space: Minkowski inner product,
//! geodesic distance, exponential map, antipodal reflection, Lorentz maps,
//! and geodesic polar quadrature grids.

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, geometric_panels, CompensatedSum};
use crate::specfun::gamma_fn;
use rand::Rng;
use serde::{Deserialize, Serialize};


/// Raw Minkowski pairing x0 y0 - x1 y1 - ... - xn yn (no clamping);
/// applies to any pair of coordinate vectors, points or tangents.
pub fn minkowski_form(a: &[f64], b: &[f64]) -> f64 {
    lorentz_dot(a, b)
}

fn lorentz_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = a[0] * b[0];
    for i in 1..a.len() {
        s -= a[i] * b[i];
    }
    s
}

/// A point on the upper hyperboloid sheet x0^2 - x1^2 - ... - xn^2 = 1, x0 >= 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint {
    coords: Vec<f64>,
}

impl HyperPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Config("HyperPoint needs n >= 1".into()));
        }
        let c = lorentz_dot(&coords, &coords);
        if (c - 1.0).abs() > 1e-9 || coords[0] < 1.0 - 1e-12 {
            return Err(Error::Domain(format!(
                "point not on hyperboloid: [x,x] = {c}, x0 = {}",
                coords[0]
            )));
        }
        let mut p = Self { coords };
        p.renormalize();
        Ok(p)
    }

    /// The basepoint o = (1, 0, ..., 0).
    pub fn origin(n: usize) -> Self {
        let mut coords = vec![0.0; n + 1];
        coords[0] = 1.0;
        Self { coords }
    }

    /// Point at geodesic polar coordinates (r, omega) about the origin,
    /// omega a unit vector in R^n.
    pub fn from_polar(r: f64, omega: &[f64]) -> Self {
        let mut coords = Vec::with_capacity(omega.len() + 1);
        coords.push(r.cosh());
        let sh = r.sinh();
        coords.extend(omega.iter().map(|w| sh * w));
        let mut p = Self { coords };
        p.renormalize();
        p
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Project back onto the hyperboloid by solving for x0.
    fn renormalize(&mut self) {
        let spatial: f64 = self.coords[1..].iter().map(|x| x * x).sum();
        self.coords[0] = (1.0 + spatial).sqrt();
    }

    /// Constraint residual |[x,x] - 1|, for drift monitoring.
    pub fn constraint_residual(&self) -> f64 {
        (lorentz_dot(&self.coords, &self.coords) - 1.0).abs()
    }
}

/// Tangent vector at a basepoint, Minkowski-orthogonal to it.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: HyperPoint,
    pub vec: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: HyperPoint, vec: Vec<f64>) -> Result<Self> {
        if vec.len() != base.coords.len() {
            return Err(Error::Config("tangent vector dimension mismatch".into()));
        }
        let t = lorentz_dot(&base.coords, &vec);
        // tolerance scales with the coordinate magnitude of far-out points
        let scale = base.coords[0] * base.coords[0];
        if t.abs() > 1e-8 * scale {
            return Err(Error::Domain(format!(
                "vector not tangent to base: [x,v] = {t}"
            )));
        }
        Ok(Self { base, vec })
    }

    /// Squared length in the induced (positive definite) metric, -[v,v].
    pub fn norm_sq(&self) -> f64 {
        -lorentz_dot(&self.vec, &self.vec)
    }
}

/// Minkowski inner product of two hyperboloid points, clamped to >= 1.
pub fn minkowski_inner(x: &HyperPoint, xi: &HyperPoint) -> f64 {
    let c = lorentz_dot(&x.coords, &xi.coords);
    if c < 1.0 {
        // roundoff below the geometric floor
        1.0
    } else {
        c
    }
}

/// Geodesic distance arccosh([x, xi]), computed in a form stable near 0.
pub fn distance(x: &HyperPoint, xi: &HyperPoint) -> f64 {
    let w = minkowski_inner(x, xi) - 1.0;
    (w + (w * (w + 2.0)).sqrt()).ln_1p()
}

/// Geodesic flow: cosh(rho) x + sinh(rho) omega for a unit tangent omega.
pub fn exp_map(x: &HyperPoint, omega: &TangentVector, rho: f64) -> Result<HyperPoint> {
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("exp_map needs rho >= 0, got {rho}")));
    }
    let scale = x.coords[0] * x.coords[0];
    if (omega.norm_sq() - 1.0).abs() > 1e-8 * scale {
        return Err(Error::Domain(format!(
            "exp_map needs a unit tangent vector, |v|^2 = {}",
            omega.norm_sq()
        )));
    }
    if lorentz_dot(&x.coords, &omega.vec).abs() > 1e-8 * scale {
        return Err(Error::Domain("exp_map direction not tangent at x".into()));
    }
    let (ch, sh) = (rho.cosh(), rho.sinh());
    let coords: Vec<f64> = x
        .coords
        .iter()
        .zip(omega.vec.iter())
        .map(|(xc, vc)| ch * xc + sh * vc)
        .collect();
    let mut p = HyperPoint { coords };
    p.renormalize();
    Ok(p)
}

/// Inverse of the exponential map: unit direction and radius of xi about x.
pub fn log_map(x: &HyperPoint, xi: &HyperPoint) -> (TangentVector, f64) {
    let rho = distance(x, xi);
    if rho < 1e-14 {
        let mut v = vec![0.0; x.coords.len()];
        // arbitrary unit tangent; the radius is zero
        let frame = tangent_frame(x);
        v.copy_from_slice(&frame[0].vec);
        return (TangentVector { base: x.clone(), vec: v }, 0.0);
    }
    let ch = rho.cosh();
    let sh = rho.sinh();
    let vec: Vec<f64> = xi
        .coords
        .iter()
        .zip(x.coords.iter())
        .map(|(xic, xc)| (xic - ch * xc) / sh)
        .collect();
    (TangentVector { base: x.clone(), vec }, rho)
}

/// Geodesic reflection of xi through x: 2 [x, xi] x - xi.
pub fn antipode(x: &HyperPoint, xi: &HyperPoint) -> HyperPoint {
    let c = lorentz_dot(&x.coords, &xi.coords);
    let coords: Vec<f64> = x
        .coords
        .iter()
        .zip(xi.coords.iter())
        .map(|(xc, xic)| 2.0 * c * xc - xic)
        .collect();
    let mut p = HyperPoint { coords };
    p.renormalize();
    p
}

/// Minkowski-orthonormal tangent frame at x: n spacelike vectors e_i with
/// [e_i, e_j] = -delta_ij and [x, e_i] = 0.
pub fn tangent_frame(x: &HyperPoint) -> Vec<TangentVector> {
    let dim = x.coords.len();
    let n = dim - 1;
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..dim {
        if frame.len() == n {
            break;
        }
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        // project out the base direction ([x,x] = 1)
        let c = lorentz_dot(&x.coords, &v);
        for (vc, xc) in v.iter_mut().zip(x.coords.iter()) {
            *vc -= c * xc;
        }
        // Gram-Schmidt in the induced metric g(u,v) = -[u,v]
        for f in &frame {
            let g = -lorentz_dot(&v, f);
            for (vc, fc) in v.iter_mut().zip(f.iter()) {
                *vc -= g * fc;
            }
        }
        let norm_sq = -lorentz_dot(&v, &v);
        if norm_sq > 1e-10 {
            let inv = norm_sq.sqrt().recip();
            for vc in v.iter_mut() {
                *vc *= inv;
            }
            frame.push(v);
        }
    }
    frame
        .into_iter()
        .map(|vec| TangentVector { base: x.clone(), vec })
        .collect()
}

/// A Lorentz transformation preserving the upper hyperboloid sheet.
#[derive(Debug, Clone)]
pub struct LorentzMap {
    mat: Vec<Vec<f64>>,
}

impl LorentzMap {
    pub fn identity(n: usize) -> Self {
        let mut mat = vec![vec![0.0; n + 1]; n + 1];
        for (i, row) in mat.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { mat }
    }

    /// Boost of rapidity chi along spatial axis `axis` (1-based coordinate).
    pub fn boost(n: usize, axis: usize, chi: f64) -> Self {
        let mut m = Self::identity(n);
        let (ch, sh) = (chi.cosh(), chi.sinh());
        m.mat[0][0] = ch;
        m.mat[0][axis] = sh;
        m.mat[axis][0] = sh;
        m.mat[axis][axis] = ch;
        m
    }

    /// Random spatial rotation (block-orthogonal on coordinates 1..=n).
    pub fn random_rotation<R: Rng>(n: usize, rng: &mut R) -> Self {
        // Gram-Schmidt on a random Gaussian matrix
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        while rows.len() < n {
            let mut v: Vec<f64> = (0..n).map(|_| normal_sample(rng)).collect();
            for r in &rows {
                let d: f64 = v.iter().zip(r.iter()).map(|(a, b)| a * b).sum();
                for (vc, rc) in v.iter_mut().zip(r.iter()) {
                    *vc -= d * rc;
                }
            }
            let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for vc in v.iter_mut() {
                    *vc /= norm;
                }
                rows.push(v);
            }
        }
        let mut m = Self::identity(n);
        for i in 0..n {
            for j in 0..n {
                m.mat[i + 1][j + 1] = rows[i][j];
            }
        }
        m
    }

    /// Random boost: rotation . axis boost . rotation.
    pub fn random<R: Rng>(n: usize, max_rapidity: f64, rng: &mut R) -> Self {
        let r1 = Self::random_rotation(n, rng);
        let chi = rng.gen_range(-max_rapidity..max_rapidity);
        let b = Self::boost(n, 1, chi);
        let r2 = Self::random_rotation(n, rng);
        r1.compose(&b).compose(&r2)
    }

    pub fn compose(&self, other: &Self) -> Self {
        let d = self.mat.len();
        let mut mat = vec![vec![0.0; d]; d];
        for i in 0..d {
            for k in 0..d {
                let a = self.mat[i][k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    mat[i][j] += a * other.mat[k][j];
                }
            }
        }
        Self { mat }
    }

    pub fn apply(&self, x: &HyperPoint) -> HyperPoint {
        let d = self.mat.len();
        let mut coords = vec![0.0; d];
        for (i, row) in self.mat.iter().enumerate() {
            coords[i] = row.iter().zip(x.coords.iter()).map(|(m, c)| m * c).sum();
        }
        let mut p = HyperPoint { coords };
        p.renormalize();
        p
    }
}

fn normal_sample<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Surface measure of the unit sphere S^{n-1}.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma_fn(n as f64 / 2.0).unwrap()
}

/// Quadrature rule on S^{n-1}: unit directions (in frame coordinates) and
/// weights summing to |S^{n-1}|.
#[derive(Debug, Clone)]
pub struct AngularRule {
    pub dirs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl AngularRule {
    pub fn new(n: usize, order: usize) -> Result<Self> {
        match n {
            2 => Ok(Self::circle(2 * order.max(2))),
            3 => Ok(Self::sphere2(order.max(4))),
            4 | 5 => Ok(Self::product(n, order.max(4))),
            _ => Err(Error::Config(format!(
                "angular rules support n in 2..=5, got {n}"
            ))),
        }
    }

    fn circle(count: usize) -> Self {
        let mut dirs = Vec::with_capacity(count);
        let w = 2.0 * std::f64::consts::PI / count as f64;
        for j in 0..count {
            let th = w * (j as f64 + 0.5);
            dirs.push(vec![th.cos(), th.sin()]);
        }
        Self { dirs, weights: vec![w; count] }
    }

    /// Gauss-Legendre in cos(theta), midpoint in phi.
    fn sphere2(order: usize) -> Self {
        let (cn, cw) = gauss_legendre(order);
        let m = 2 * order;
        let dphi = 2.0 * std::f64::consts::PI / m as f64;
        let mut dirs = Vec::new();
        let mut weights = Vec::new();
        for (c, wc) in cn.iter().zip(cw.iter()) {
            let s = (1.0 - c * c).sqrt();
            for j in 0..m {
                let phi = dphi * (j as f64 + 0.5);
                dirs.push(vec![s * phi.cos(), s * phi.sin(), *c]);
                weights.push(wc * dphi);
            }
        }
        Self { dirs, weights }
    }

    /// Product rule in hyperspherical angles with sin^k weights folded in.
    fn product(n: usize, order: usize) -> Self {
        let (tn, tw) = gauss_legendre(order);
        // theta in [0, pi]
        let theta: Vec<f64> = tn
            .iter()
            .map(|t| 0.5 * std::f64::consts::PI * (t + 1.0))
            .collect();
        let theta_w: Vec<f64> = tw.iter().map(|w| 0.5 * std::f64::consts::PI * w).collect();
        let base = Self::sphere2(order);
        let mut dirs = Vec::new();
        let mut weights = Vec::new();
        match n {
            4 => {
                for (t, wt) in theta.iter().zip(theta_w.iter()) {
                    let (st, ct) = (t.sin(), t.cos());
                    for (d, wd) in base.dirs.iter().zip(base.weights.iter()) {
                        dirs.push(vec![ct, st * d[0], st * d[1], st * d[2]]);
                        weights.push(wt * st * st * wd);
                    }
                }
            }
            5 => {
                for (t1, w1) in theta.iter().zip(theta_w.iter()) {
                    let (s1, c1) = (t1.sin(), t1.cos());
                    for (t2, w2) in theta.iter().zip(theta_w.iter()) {
                        let (s2, c2) = (t2.sin(), t2.cos());
                        for (d, wd) in base.dirs.iter().zip(base.weights.iter()) {
                            dirs.push(vec![
                                c1,
                                s1 * c2,
                                s1 * s2 * d[0],
                                s1 * s2 * d[1],
                                s1 * s2 * d[2],
                            ]);
                            weights.push(w1 * s1.powi(3) * w2 * s2 * s2 * wd);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        Self { dirs, weights }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// Radial quadrature on (rho_min, r_max], geometrically refined toward 0.
#[derive(Debug, Clone)]
pub struct RadialRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RadialRule {
    pub fn graded(rho_min: f64, r_max: f64, order: usize) -> Result<Self> {
        let panels = geometric_panels(rho_min, r_max)?;
        let (gn, gw) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(panels.len() * order);
        let mut weights = Vec::with_capacity(panels.len() * order);
        for (a, b) in panels {
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            for (x, w) in gn.iter().zip(gw.iter()) {
                nodes.push(c + h * x);
                weights.push(h * w);
            }
        }
        Ok(Self { nodes, weights })
    }
}

/// Serializable description of a polar grid.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "R_max")]
    pub r_max: f64,
    pub radial_panels: usize,
    pub angular_order: usize,
    #[serde(default = "default_radial_order")]
    pub radial_order: usize,
}

fn default_radial_order() -> usize {
    12
}

impl GridSpec {
    pub fn new(n: usize, r_max: f64, radial_panels: usize, angular_order: usize) -> Self {
        Self { n, r_max, radial_panels, angular_order, radial_order: 12 }
    }

    pub fn rho_min(&self) -> f64 {
        self.r_max * 0.5f64.powi(self.radial_panels as i32)
    }
}

/// Geodesic polar product grid about a center point: nodes
/// exp(center, omega_j, rho_k) with weights a_j b_k sinh^{n-1}(rho_k).
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub center: HyperPoint,
    pub n: usize,
    pub radial: RadialRule,
    /// Radial weights with the sinh^{n-1} volume factor folded in.
    pub radial_measure: Vec<f64>,
    pub angular: AngularRule,
    /// Directions as ambient (n+1)-vectors, unit spacelike, tangent at center.
    pub dirs_ambient: Vec<Vec<f64>>,
}

impl PolarGrid {
    pub fn build(center: &HyperPoint, spec: &GridSpec) -> Result<Self> {
        let n = spec.n;
        if center.dim() != n {
            return Err(Error::Config(format!(
                "grid dimension {n} does not match center dimension {}",
                center.dim()
            )));
        }
        if !(2..=5).contains(&n) {
            return Err(Error::Config(format!("polar grids support n in 2..=5, got {n}")));
        }
        let radial = RadialRule::graded(spec.rho_min(), spec.r_max, spec.radial_order)?;
        let radial_measure = radial
            .nodes
            .iter()
            .zip(radial.weights.iter())
            .map(|(r, w)| w * r.sinh().powi(n as i32 - 1))
            .collect();
        let angular = AngularRule::new(n, spec.angular_order)?;
        let frame = tangent_frame(center);
        let dirs_ambient = angular
            .dirs
            .iter()
            .map(|d| {
                let mut v = vec![0.0; n + 1];
                for (coef, f) in d.iter().zip(frame.iter()) {
                    for (vc, fc) in v.iter_mut().zip(f.vec.iter()) {
                        *vc += coef * fc;
                    }
                }
                v
            })
            .collect();
        Ok(Self {
            center: center.clone(),
            n,
            radial,
            radial_measure,
            angular,
            dirs_ambient,
        })
    }

    /// Grid node at radial index k, angular index j; sign -1 gives the
    /// antipodal node exp(center, -omega_j, rho_k).
    pub fn point(&self, k: usize, j: usize, sign: f64) -> HyperPoint {
        let rho = self.radial.nodes[k];
        let (ch, sh) = (rho.cosh(), sign * rho.sinh());
        let dir = &self.dirs_ambient[j];
        let coords: Vec<f64> = self
            .center
            .coords
            .iter()
            .zip(dir.iter())
            .map(|(xc, dc)| ch * xc + sh * dc)
            .collect();
        let mut p = HyperPoint { coords };
        p.renormalize();
        p
    }

    /// Integrate a scalar field over the grid: sum of w f(xi).
    pub fn integrate<F: FnMut(&HyperPoint) -> f64>(&self, mut f: F) -> f64 {
        let mut acc = CompensatedSum::new();
        for k in 0..self.radial.nodes.len() {
            let mut ang = CompensatedSum::new();
            for j in 0..self.angular.len() {
                ang.add(self.angular.weights[j] * f(&self.point(k, j, 1.0)));
            }
            acc.add(self.radial_measure[k] * ang.value());
        }
        acc.value()
    }

    /// Integrate a radial profile g(rho) against the full measure,
    /// |S^{n-1}| sum_k w_k sinh^{n-1}(rho_k) g(rho_k).
    pub fn integrate_radial<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        let area = sphere_area(self.n);
        let mut acc = CompensatedSum::new();
        for (rho, w) in self.radial.nodes.iter().zip(self.radial_measure.iter()) {
            acc.add(w * g(*rho));
        }
        area * acc.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_point<R: Rng>(n: usize, rng: &mut R, r_scale: f64) -> HyperPoint {
        let mut omega: Vec<f64> = (0..n).map(|_| normal_sample(rng)).collect();
        let norm: f64 = omega.iter().map(|c| c * c).sum::<f64>().sqrt();
        for c in omega.iter_mut() {
            *c /= norm;
        }
        HyperPoint::from_polar(rng.gen_range(0.0..r_scale), &omega)
    }

    #[test]
    fn inner_product_basics() {
        let o = HyperPoint::origin(3);
        assert_eq!(minkowski_inner(&o, &o), 1.0);
        let p = HyperPoint::new(vec![1.0f64.cosh(), 1.0f64.sinh(), 0.0, 0.0]).unwrap();
        assert!((minkowski_inner(&o, &p) - 1.0f64.cosh()).abs() < 1e-14);
    }

    #[test]
    fn inner_product_boost_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = random_point(3, &mut rng, 2.0);
            let y = random_point(3, &mut rng, 2.0);
            let b = LorentzMap::random(3, 1.0, &mut rng);
            let before = minkowski_inner(&x, &y);
            let after = minkowski_inner(&b.apply(&x), &b.apply(&y));
            assert!((before - after).abs() / before < 1e-10);
        }
    }

    #[test]
    fn distance_basics() {
        let o = HyperPoint::origin(2);
        assert_eq!(distance(&o, &o), 0.0);
        let p = HyperPoint::from_polar(1.0, &[1.0, 0.0]);
        assert!((distance(&o, &p) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn distance_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x = random_point(2, &mut rng, 3.0);
            let y = random_point(2, &mut rng, 3.0);
            let z = random_point(2, &mut rng, 3.0);
            let dxy = distance(&x, &y);
            let dyz = distance(&y, &z);
            let dxz = distance(&x, &z);
            assert!(dxz <= dxy + dyz + 1e-12);
        }
    }

    #[test]
    fn exp_map_basics() {
        let o = HyperPoint::origin(3);
        let frame = tangent_frame(&o);
        let p = exp_map(&o, &frame[0], 0.0).unwrap();
        assert!(distance(&o, &p) < 1e-14);
        let q = exp_map(&o, &frame[0], 1.0).unwrap();
        assert!((q.coords()[0] - 1.0f64.cosh()).abs() < 1e-14);
        assert!((q.coords()[1] - 1.0f64.sinh()).abs() < 1e-14);
    }

    #[test]
    fn exp_map_distance_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let x = random_point(3, &mut rng, 2.0);
            let frame = tangent_frame(&x);
            // random direction in the frame
            let coefs: Vec<f64> = (0..3).map(|_| normal_sample(&mut rng)).collect();
            let norm: f64 = coefs.iter().map(|c| c * c).sum::<f64>().sqrt();
            let mut vec = vec![0.0; 4];
            for (c, f) in coefs.iter().zip(frame.iter()) {
                for (vc, fc) in vec.iter_mut().zip(f.vec.iter()) {
                    *vc += c / norm * fc;
                }
            }
            let omega = TangentVector::new(x.clone(), vec).unwrap();
            let rho = rng.gen_range(0.0..4.0);
            let xi = exp_map(&x, &omega, rho).unwrap();
            assert!((distance(&x, &xi) - rho).abs() < 1e-10);
            let (back, r2) = log_map(&x, &xi);
            assert!((r2 - rho).abs() < 1e-10);
            if rho > 1e-6 {
                for (a, b) in back.vec.iter().zip(omega.vec.iter()) {
                    assert!((a - b).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn exp_map_rejects_bad_directions() {
        let o = HyperPoint::origin(2);
        let bad = TangentVector { base: o.clone(), vec: vec![0.0, 2.0, 0.0] };
        assert!(exp_map(&o, &bad, 1.0).is_err());
    }

    /// Coordinatewise relative closeness; distance() cannot resolve below
    /// sqrt(eps) for near-identical points.
    fn coords_close(a: &HyperPoint, b: &HyperPoint, tol: f64) -> bool {
        a.coords()
            .iter()
            .zip(b.coords().iter())
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
    }

    #[test]
    fn antipode_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = random_point(3, &mut rng, 1.5);
        assert!(coords_close(&antipode(&x, &x), &x, 1e-12));
        for _ in 0..50 {
            let xi = random_point(3, &mut rng, 2.0);
            let t = antipode(&x, &xi);
            assert!((distance(&x, &t) - distance(&x, &xi)).abs() < 1e-10);
            let back = antipode(&x, &t);
            assert!(coords_close(&back, &xi, 1e-10));
            // agreement with exp_map along the reversed direction
            let (omega, rho) = log_map(&x, &xi);
            let mut neg = omega.clone();
            for c in neg.vec.iter_mut() {
                *c = -*c;
            }
            let t2 = exp_map(&x, &neg, rho).unwrap();
            assert!(coords_close(&t, &t2, 1e-9));
        }
    }

    #[test]
    fn constraint_preserved_under_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut x = HyperPoint::origin(3);
        for i in 0..10_000 {
            // keep the excursion bounded so coordinates stay moderate
            if distance(&HyperPoint::origin(3), &x) > 4.0 {
                let (omega, rho) = log_map(&HyperPoint::origin(3), &x);
                x = exp_map(&HyperPoint::origin(3), &omega, rho.min(2.0)).unwrap();
            }
            if i % 2 == 0 {
                let frame = tangent_frame(&x);
                x = exp_map(&x, &frame[i % 3], 0.05).unwrap();
            } else {
                let y = random_point(3, &mut rng, 1.0);
                x = antipode(&y, &x);
            }
            assert!(x.constraint_residual() < 1e-10, "drift at step {i}");
        }
        assert!(x.constraint_residual() < 1e-10);
    }

    #[test]
    fn boost_equivariance_of_distance_and_antipode() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let x = random_point(2, &mut rng, 2.0);
            let xi = random_point(2, &mut rng, 2.0);
            let b = LorentzMap::random(2, 1.2, &mut rng);
            let d0 = distance(&x, &xi);
            let d1 = distance(&b.apply(&x), &b.apply(&xi));
            assert!((d0 - d1).abs() < 1e-10 * (1.0 + d0));
            let t0 = b.apply(&antipode(&x, &xi));
            let t1 = antipode(&b.apply(&x), &b.apply(&xi));
            assert!(coords_close(&t0, &t1, 1e-10));
        }
    }

    #[test]
    fn frame_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for n in 2..=5 {
            let x = random_point(n, &mut rng, 2.0);
            let frame = tangent_frame(&x);
            assert_eq!(frame.len(), n);
            for (i, fi) in frame.iter().enumerate() {
                assert!(lorentz_dot(&x.coords, &fi.vec).abs() < 1e-12);
                for (j, fj) in frame.iter().enumerate() {
                    let g = -lorentz_dot(&fi.vec, &fj.vec);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn angular_rules_low_degree_exact() {
        for n in 2..=5 {
            let rule = AngularRule::new(n, 16).unwrap();
            let area: f64 = rule.weights.iter().sum();
            assert!(
                (area - sphere_area(n)).abs() < 1e-10,
                "area defect for n = {n}: {}",
                (area - sphere_area(n)).abs()
            );
            for i in 0..n {
                let m1: f64 = rule
                    .dirs
                    .iter()
                    .zip(rule.weights.iter())
                    .map(|(d, w)| w * d[i])
                    .sum();
                assert!(m1.abs() < 1e-10, "first moment {i} for n = {n}: {m1}");
                for j in 0..n {
                    let m2: f64 = rule
                        .dirs
                        .iter()
                        .zip(rule.weights.iter())
                        .map(|(d, w)| w * d[i] * d[j])
                        .sum();
                    let expect = if i == j { sphere_area(n) / n as f64 } else { 0.0 };
                    assert!(
                        (m2 - expect).abs() < 1e-10,
                        "second moment ({i},{j}) for n = {n}: {m2} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn ball_volumes() {
        // n = 2, radius 1: 2 pi (cosh 1 - 1)
        let o = HyperPoint::origin(2);
        let spec = GridSpec::new(2, 1.0, 20, 16);
        let grid = PolarGrid::build(&o, &spec).unwrap();
        let vol = grid.integrate(|_| 1.0);
        let exact = 2.0 * std::f64::consts::PI * (1.0f64.cosh() - 1.0);
        assert!((vol - exact).abs() / exact < 1e-10, "{vol} vs {exact}");

        // n = 3, radius 1: pi (sinh 2 - 2)
        let o3 = HyperPoint::origin(3);
        let spec3 = GridSpec::new(3, 1.0, 20, 12);
        let grid3 = PolarGrid::build(&o3, &spec3).unwrap();
        let vol3 = grid3.integrate(|_| 1.0);
        let exact3 = std::f64::consts::PI * (2.0f64.sinh() - 2.0);
        assert!((vol3 - exact3).abs() / exact3 < 1e-10, "{vol3} vs {exact3}");
    }

    #[test]
    fn ball_volume_independent_of_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = random_point(2, &mut rng, 1.5);
        let spec = GridSpec::new(2, 1.0, 18, 16);
        let grid = PolarGrid::build(&x, &spec).unwrap();
        let vol = grid.integrate(|_| 1.0);
        let exact = 2.0 * std::f64::consts::PI * (1.0f64.cosh() - 1.0);
        assert!((vol - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn radial_integration_matches_full() {
        let o = HyperPoint::origin(3);
        let spec = GridSpec::new(3, 2.0, 16, 8);
        let grid = PolarGrid::build(&o, &spec).unwrap();
        let full = grid.integrate(|xi| (-distance(&o, xi).powi(2)).exp());
        let radial = grid.integrate_radial(|rho| (-rho * rho).exp());
        assert!((full - radial).abs() / radial.abs() < 1e-9);
    }

    #[test]
    fn grid_spec_serde_roundtrip() {
        let spec = GridSpec::new(3, 12.0, 30, 16);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"R_max\""));
        let back: GridSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn unsupported_dimension_rejected() {
        let o = HyperPoint::origin(6);
        let spec = GridSpec::new(6, 1.0, 10, 8);
        assert!(PolarGrid::build(&o, &spec).is_err());
    }
}
