//! Exact symbolic calculus for the iterated radial operator
//! D = (-d/d rho) / sinh(rho) applied to Bessel atoms
//! (rho^2 + y^2)^(-nu/2) K_nu(a sqrt(rho^2 + y^2)) and Gaussian atoms
//! exp(-rho^2 / (4t)).
//!
//! The monomial basis {rho^i cosh^j csch^k} is closed under D:
//! differentiating csch introduces cosh csch^2, and the atom rules
//!     -d/d rho [K-atom(f(rho))] = a f'(rho) f(rho) [K-atom shifted up](f)
//! with f' f = rho for f = sqrt(rho^2 + y^2), and
//!     -d/d rho exp(-rho^2/4t) = (rho / 2t) exp(-rho^2/4t)
//! only multiply by rho. Every application is exact; evaluation is the only
//! approximate step.

use crate::error::{Error, Result};
use crate::specfun::{kscr, kscr_scaled};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Coefficients below this magnitude are pruned after merging.
const PRUNE_THRESHOLD: f64 = 1e-300;
/// Bound on iterated applications (covers n <= 17).
pub const MAX_POWER: u32 = 8;

/// The radially symmetric building blocks the calculus acts on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Atom {
    /// (rho^2 + y^2)^(-nu/2) K_nu(a sqrt(rho^2 + y^2)); order shifts are
    /// tracked per term.
    Bessel { nu: f64, a: f64, y: f64 },
    /// exp(-rho^2 / (4 t)).
    Gauss { t: f64 },
}

impl Atom {
    pub fn bessel(nu: f64, a: f64, y: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::Domain(format!("Bessel atom needs a > 0, got {a}")));
        }
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("Bessel atom needs y >= 0, got {y}")));
        }
        if !nu.is_finite() {
            return Err(Error::Domain(format!("Bessel atom order {nu}")));
        }
        Ok(Atom::Bessel { nu, a, y })
    }

    pub fn gauss(t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("Gauss atom needs t > 0, got {t}")));
        }
        Ok(Atom::Gauss { t })
    }
}

/// One monomial term: coeff rho^i cosh^j(rho) csch^k(rho) atom^(shift).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub pow_rho: u32,
    pub pow_cosh: u32,
    pub pow_csch: u32,
    /// Bessel order shift accumulated by atom-rule applications (0 for Gauss).
    pub shift: u32,
}

impl Term {
    pub fn unit() -> Self {
        Term { coeff: 1.0, pow_rho: 0, pow_cosh: 0, pow_csch: 0, shift: 0 }
    }
}

/// A merged sum of terms over a single atom family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSum {
    pub atom: Atom,
    pub terms: Vec<Term>,
}

impl TermSum {
    /// The bare atom: a single unit term.
    pub fn atom(atom: Atom) -> Self {
        TermSum { atom, terms: vec![Term::unit()] }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest Bessel order shift present.
    pub fn max_shift(&self) -> u32 {
        self.terms.iter().map(|t| t.shift).max().unwrap_or(0)
    }

    /// k - j, which D increments by exactly one in every product-rule branch.
    /// Uniform across terms of any sum built from a bare atom.
    pub fn net_decay(&self) -> i64 {
        let d = self
            .terms
            .first()
            .map(|t| t.pow_csch as i64 - t.pow_cosh as i64)
            .unwrap_or(0);
        debug_assert!(self
            .terms
            .iter()
            .all(|t| t.pow_csch as i64 - t.pow_cosh as i64 == d));
        d
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term { coeff: alpha * t.coeff, ..*t })
            .collect();
        TermSum { atom: self.atom, terms }
    }

    pub fn add(&self, other: &TermSum) -> Result<Self> {
        if self.atom != other.atom {
            return Err(Error::Config("cannot add term sums over different atoms".into()));
        }
        let mut all = self.terms.clone();
        all.extend_from_slice(&other.terms);
        Ok(TermSum { atom: self.atom, terms: merge(all) })
    }

    /// Debug dump as a JSON array of {coeff, i, j, k, shift, atom}.
    pub fn to_debug_json(&self) -> String {
        #[derive(Serialize)]
        struct Entry<'a> {
            coeff: f64,
            i: u32,
            j: u32,
            k: u32,
            shift: u32,
            atom: &'a Atom,
        }
        let entries: Vec<Entry> = self
            .terms
            .iter()
            .map(|t| Entry {
                coeff: t.coeff,
                i: t.pow_rho,
                j: t.pow_cosh,
                k: t.pow_csch,
                shift: t.shift,
                atom: &self.atom,
            })
            .collect();
        serde_json::to_string(&entries).expect("term dump serialization")
    }
}

fn merge(terms: Vec<Term>) -> Vec<Term> {
    let mut map: BTreeMap<(u32, u32, u32, u32), f64> = BTreeMap::new();
    for t in terms {
        *map.entry((t.pow_rho, t.pow_cosh, t.pow_csch, t.shift)).or_insert(0.0) += t.coeff;
    }
    map.into_iter()
        .filter(|(_, c)| c.abs() > PRUNE_THRESHOLD)
        .map(|((i, j, k, s), coeff)| Term {
            coeff,
            pow_rho: i,
            pow_cosh: j,
            pow_csch: k,
            shift: s,
        })
        .collect()
}

/// One exact application of D = (-d/d rho) / sinh(rho).
#[allow(non_snake_case)]
pub fn apply_D(ts: &TermSum) -> TermSum {
    let mut out: Vec<Term> = Vec::with_capacity(ts.terms.len() * 4);
    for t in &ts.terms {
        let (c, i, j, k, s) = (t.coeff, t.pow_rho, t.pow_cosh, t.pow_csch, t.shift);
        // product rule on the monomial, then division by sinh
        if i > 0 {
            out.push(Term { coeff: -c * i as f64, pow_rho: i - 1, pow_cosh: j, pow_csch: k + 1, shift: s });
        }
        if j > 0 {
            // d cosh = sinh cancels the 1/sinh
            out.push(Term { coeff: -c * j as f64, pow_rho: i, pow_cosh: j - 1, pow_csch: k, shift: s });
        }
        if k > 0 {
            // d csch = -cosh csch^2
            out.push(Term { coeff: c * k as f64, pow_rho: i, pow_cosh: j + 1, pow_csch: k + 2, shift: s });
        }
        // atom rule
        match ts.atom {
            Atom::Bessel { a, .. } => {
                // -d/d rho of the atom contributes a * rho * (shifted atom)
                out.push(Term { coeff: c * a, pow_rho: i + 1, pow_cosh: j, pow_csch: k + 1, shift: s + 1 });
            }
            Atom::Gauss { t: time } => {
                out.push(Term { coeff: c / (2.0 * time), pow_rho: i + 1, pow_cosh: j, pow_csch: k + 1, shift: s });
            }
        }
    }
    TermSum { atom: ts.atom, terms: merge(out) }
}

/// m-fold composition of D.
#[allow(non_snake_case)]
pub fn apply_D_pow(ts: &TermSum, m: u32) -> Result<TermSum> {
    if m > MAX_POWER {
        return Err(Error::Config(format!(
            "apply_D_pow supports m <= {MAX_POWER}, got {m}"
        )));
    }
    let mut cur = ts.clone();
    for _ in 0..m {
        cur = apply_D(&cur);
    }
    Ok(cur)
}

fn atom_value(atom: &Atom, shift: u32, rho: f64) -> Result<f64> {
    match *atom {
        Atom::Bessel { nu, a, y } => {
            let f = (rho * rho + y * y).sqrt();
            kscr(nu + shift as f64, a, f)
        }
        Atom::Gauss { t } => Ok((-rho * rho / (4.0 * t)).exp()),
    }
}

/// Evaluate a term sum at rho > 0.
pub fn eval_term_sum(ts: &TermSum, rho: f64) -> Result<f64> {
    eval_term_sum_with(ts, rho, &atom_value)
}

/// Evaluate with a caller-supplied atom evaluator (atom, shift, rho) -> value.
/// Lets an alternative scalar route stand in for the Bessel evaluation while
/// the monomial algebra stays identical.
pub fn eval_term_sum_with<A>(ts: &TermSum, rho: f64, atom_eval: &A) -> Result<f64>
where
    A: Fn(&Atom, u32, f64) -> Result<f64>,
{
    if !(rho > 0.0) {
        return Err(Error::Domain(format!(
            "eval_term_sum needs rho > 0, got {rho}"
        )));
    }
    if ts.terms.is_empty() {
        return Ok(0.0);
    }
    let ch = rho.cosh();
    let csch = 1.0 / rho.sinh();
    let mut sum = 0.0;
    for t in &ts.terms {
        let monomial = rho.powi(t.pow_rho as i32)
            * ch.powi(t.pow_cosh as i32)
            * csch.powi(t.pow_csch as i32);
        sum += t.coeff * monomial * atom_eval(&ts.atom, t.shift, rho)?;
    }
    Ok(sum)
}

/// Exponentially scaled evaluation for Bessel atoms: returns
/// e^{(d + a) rho} eval(ts, rho), where d = net_decay(). Every hyperbolic
/// factor is replaced by its e^{+-rho}-normalized version and the atom's
/// argument offset contributes e^{-a (f - rho)} = e^{-a y^2 / (f + rho)},
/// so the result stays in range for arbitrarily large rho.
pub fn eval_term_sum_scaled(ts: &TermSum, rho: f64) -> Result<f64> {
    let (nu0, a, y) = match ts.atom {
        Atom::Bessel { nu, a, y } => (nu, a, y),
        Atom::Gauss { .. } => {
            return Err(Error::Config(
                "scaled evaluation requires a Bessel atom".into(),
            ))
        }
    };
    if !(rho > 0.0) {
        return Err(Error::Domain(format!(
            "eval_term_sum_scaled needs rho > 0, got {rho}"
        )));
    }
    if ts.terms.is_empty() {
        return Ok(0.0);
    }
    let d = ts.net_decay();
    let q = (-2.0 * rho).exp();
    let cosh_hat = 0.5 * (1.0 + q); // cosh(rho) e^{-rho}
    let csch_hat = 2.0 / (-(-2.0 * rho).exp_m1()); // csch(rho) e^{rho}
    let f = (rho * rho + y * y).sqrt();
    let offset = (-a * y * y / (f + rho)).exp(); // e^{-a (f - rho)}
    let mut sum = 0.0;
    for t in &ts.terms {
        debug_assert_eq!(t.pow_csch as i64 - t.pow_cosh as i64, d);
        let monomial = rho.powi(t.pow_rho as i32)
            * cosh_hat.powi(t.pow_cosh as i32)
            * csch_hat.powi(t.pow_csch as i32);
        sum += t.coeff * monomial * kscr_scaled(nu0 + t.shift as f64, a, f)? * offset;
    }
    Ok(sum)
}
