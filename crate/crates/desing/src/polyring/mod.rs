//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! A polynomial lives over a fixed, ordered list of variables; monomials are
//! dense exponent vectors indexed by variable position. Variable names are
//! only needed for parsing and printing.

mod parse;

pub use parse::{parse_ideal, parse_ideal_infer, parse_poly, parse_poly_infer, ParseError};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Rational coefficient.
pub type Coeff = BigRational;

/// Bit set of variable positions.
pub type VarSet = u32;

/// Maximum number of variables in a chart.
pub const MAX_VARS: usize = 24;

/// Rational from a numerator and denominator.
pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Rational from an integer.
pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Prints a rational as `p` or `p/q`.
pub fn fmt_rat(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Iterates the positions set in `mask`.
pub fn members(mask: VarSet) -> impl Iterator<Item = usize> {
    (0..32usize).filter(move |i| mask >> i & 1 == 1)
}

/// Mask with exactly the given position set.
pub fn bit(i: usize) -> VarSet {
    1 << i
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("not divisible: some term has exponent {have} < {need} in variable #{var}")]
    NotDivisible { var: usize, need: u32, have: u32 },
    #[error("exponent overflow")]
    ExponentOverflow,
}

/// Exponent vector over the chart variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExpVec(pub Vec<u32>);

impl ExpVec {
    pub fn zero(n: usize) -> ExpVec {
        ExpVec(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> ExpVec {
        let mut e = vec![0; n];
        e[i] = 1;
        ExpVec(e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn degree(&self) -> u64 {
        self.0.iter().map(|&e| e as u64).sum()
    }

    /// Total degree in the variables of `mask`.
    pub fn degree_in(&self, mask: VarSet) -> u64 {
        members(mask).filter(|&i| i < self.0.len()).map(|i| self.0[i] as u64).sum()
    }

    /// Support of the exponent vector.
    pub fn support(&self) -> VarSet {
        self.0.iter().enumerate().filter(|(_, &e)| e > 0).fold(0, |m, (i, _)| m | bit(i))
    }

    fn checked_add(&self, other: &ExpVec) -> Option<ExpVec> {
        let mut out = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(&other.0) {
            out.push(a.checked_add(*b)?);
        }
        Some(ExpVec(out))
    }

    /// Componentwise minimum.
    pub fn meet(&self, other: &ExpVec) -> ExpVec {
        ExpVec(self.0.iter().zip(&other.0).map(|(a, b)| *a.min(b)).collect())
    }

    /// Componentwise `self >= other`.
    pub fn divides_into(&self, other: &ExpVec) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Restriction to the variables of `mask`; other entries set to zero.
    pub fn restricted(&self, mask: VarSet) -> ExpVec {
        ExpVec(self.0.iter().enumerate().map(|(i, &e)| if mask >> i & 1 == 1 { e } else { 0 }).collect())
    }

    /// Monomial text in declaration order, `1` for the empty monomial.
    pub fn display(&self, vars: &[String]) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| if e == 1 { vars[i].clone() } else { format!("{}^{}", vars[i], e) })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

impl Ord for ExpVec {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for ExpVec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Nonnegative integer or infinity; infinity is greatest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtNat {
    Fin(u64),
    Inf,
}

impl ExtNat {
    pub fn finite(self) -> Option<u64> {
        match self {
            ExtNat::Fin(v) => Some(v),
            ExtNat::Inf => None,
        }
    }
}

impl fmt::Display for ExtNat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtNat::Fin(v) => write!(f, "{v}"),
            ExtNat::Inf => write!(f, "inf"),
        }
    }
}

/// Coordinate stratum: each variable is Zero or Generic; the point is the
/// generic point of the stratum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StratumSpec {
    pub n: usize,
    pub zero: VarSet,
}

impl StratumSpec {
    pub fn new(n: usize, zero: VarSet) -> StratumSpec {
        StratumSpec { n, zero: zero & full_mask(n) }
    }

    /// The chart origin.
    pub fn origin(n: usize) -> StratumSpec {
        StratumSpec { n, zero: full_mask(n) }
    }

    pub fn generic(n: usize) -> StratumSpec {
        StratumSpec { n, zero: 0 }
    }

    pub fn is_zero(&self, v: usize) -> bool {
        self.zero >> v & 1 == 1
    }

    pub fn generic_mask(&self) -> VarSet {
        full_mask(self.n) & !self.zero
    }

    pub fn codim(&self) -> u32 {
        self.zero.count_ones()
    }

    /// All `2^n` strata, ordered by Zero mask.
    pub fn all(n: usize) -> impl Iterator<Item = StratumSpec> {
        (0..(1u64 << n)).map(move |m| StratumSpec { n, zero: m as VarSet })
    }

    /// `{x=y=0}` in declaration order, `{0}` for the origin, `M` for the
    /// whole chart.
    pub fn display(&self, vars: &[String]) -> String {
        if self.zero == full_mask(self.n) {
            return "{0}".to_string();
        }
        if self.zero == 0 {
            return "M".to_string();
        }
        let names: Vec<&str> = members(self.zero).map(|i| vars[i].as_str()).collect();
        format!("{{{}=0}}", names.join("="))
    }
}

/// Mask of the first `n` positions.
pub fn full_mask(n: usize) -> VarSet {
    if n >= 32 {
        VarSet::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// Monomial with nonnegative rational exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FracMono(pub BTreeMap<usize, BigRational>);

impl FracMono {
    pub fn new() -> FracMono {
        FracMono(BTreeMap::new())
    }

    pub fn get(&self, v: usize) -> BigRational {
        self.0.get(&v).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Sum of exponents.
    pub fn total(&self) -> BigRational {
        self.0.values().fold(BigRational::zero(), |a, b| a + b)
    }

    /// Smallest positive integer `m` with `m * exponent` integral for all.
    pub fn common_denominator(&self) -> BigInt {
        self.0.values().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
    }

    pub fn display(&self, vars: &[String]) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .filter(|(_, q)| !q.is_zero())
            .map(|(&v, q)| if q.is_one() { vars[v].clone() } else { format!("{}^{}", vars[v], fmt_rat(q)) })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

impl Default for FracMono {
    fn default() -> Self {
        FracMono::new()
    }
}

/// Polynomial in canonical form: terms sorted ascending by graded
/// lexicographic order, distinct exponents, nonzero coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Poly {
    n: usize,
    terms: Vec<(ExpVec, Coeff)>,
}

impl Poly {
    pub fn zero(n: usize) -> Poly {
        Poly { n, terms: Vec::new() }
    }

    pub fn one(n: usize) -> Poly {
        Poly::constant(n, BigRational::one())
    }

    pub fn constant(n: usize, c: BigRational) -> Poly {
        Poly::from_terms(n, vec![(ExpVec::zero(n), c)])
    }

    pub fn var(n: usize, i: usize) -> Poly {
        Poly::from_terms(n, vec![(ExpVec::unit(n, i), BigRational::one())])
    }

    pub fn monomial(e: ExpVec, c: BigRational) -> Poly {
        let n = e.len();
        Poly::from_terms(n, vec![(e, c)])
    }

    /// Builds the canonical form of an arbitrary term list.
    pub fn from_terms(n: usize, terms: Vec<(ExpVec, Coeff)>) -> Poly {
        let mut map: BTreeMap<ExpVec, Coeff> = BTreeMap::new();
        for (e, c) in terms {
            assert_eq!(e.len(), n, "exponent vector length mismatch");
            let slot = map.entry(e).or_insert_with(BigRational::zero);
            *slot += c;
        }
        let terms = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Poly { n, terms }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(ExpVec, Coeff)] {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Nonzero constant.
    pub fn is_unit_constant(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0.is_empty()
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    /// Variables occurring in some term.
    pub fn support(&self) -> VarSet {
        self.terms.iter().fold(0, |m, (e, _)| m | e.support())
    }

    pub fn neg(&self) -> Poly {
        Poly { n: self.n, terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect() }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.n, other.n, "variable universe mismatch");
        let mut all = self.terms.clone();
        all.extend(other.terms.iter().cloned());
        Poly::from_terms(self.n, all)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.n);
        }
        Poly { n: self.n, terms: self.terms.iter().map(|(e, k)| (e.clone(), k * c)).collect() }
    }

    pub fn try_mul(&self, other: &Poly) -> Result<Poly, PolyError> {
        assert_eq!(self.n, other.n, "variable universe mismatch");
        let mut all = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e = e1.checked_add(e2).ok_or(PolyError::ExponentOverflow)?;
                all.push((e, c1 * c2));
            }
        }
        Ok(Poly::from_terms(self.n, all))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        self.try_mul(other).expect("exponent overflow")
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut acc = Poly::one(self.n);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Multiplies by the monomial `x^e`.
    pub fn mul_mono(&self, e: &ExpVec) -> Poly {
        Poly {
            n: self.n,
            terms: self.terms.iter().map(|(t, c)| (t.checked_add(e).expect("exponent overflow"), c.clone())).collect(),
        }
    }

    /// Minimal total degree (order at the origin).
    pub fn min_degree(&self) -> ExtNat {
        self.order_in(full_mask(self.n))
    }

    fn order_in(&self, zero: VarSet) -> ExtNat {
        self.terms.iter().map(|(e, _)| e.degree_in(zero)).min().map_or(ExtNat::Inf, ExtNat::Fin)
    }

    /// Order at the generic point of the stratum.
    ///
    /// Terms are grouped by their restriction to the Zero variables; every
    /// nonempty group has a nonzero Generic-variable coefficient polynomial
    /// because canonical terms have distinct exponents, so the order is the
    /// minimal Zero-weighted degree over all terms.
    pub fn order_at_stratum(&self, s: &StratumSpec) -> ExtNat {
        self.order_in(s.zero)
    }

    /// Generic order along the coordinate subspace `{x_i = 0, i in I}`.
    pub fn order_along(&self, centre: VarSet) -> ExtNat {
        self.order_in(centre)
    }

    /// Formal partial derivative.
    pub fn diff(&self, v: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e.0[v] > 0)
            .map(|(e, c)| {
                let mut e2 = e.clone();
                let k = e2.0[v];
                e2.0[v] -= 1;
                (e2, c * BigRational::from_integer(BigInt::from(k)))
            })
            .collect();
        Poly::from_terms(self.n, terms)
    }

    /// Logarithmic derivative `v * d/dv`.
    pub fn logdiff(&self, v: usize) -> Poly {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e.0[v] > 0)
            .map(|(e, c)| (e.clone(), c * BigRational::from_integer(BigInt::from(e.0[v]))))
            .collect();
        Poly::from_terms(self.n, terms)
    }

    /// Chart substitution of a blowing-up: `x_j <- x_i * x_j` for `j` in
    /// `centre` other than `i`.
    pub fn blowup_subst(&self, centre: VarSet, i: usize) -> Poly {
        assert!(centre >> i & 1 == 1, "chart variable outside centre");
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mut e2 = e.clone();
                let add: u32 = members(centre).filter(|&j| j != i).map(|j| e.0[j]).sum();
                e2.0[i] = e2.0[i].checked_add(add).expect("exponent overflow");
                (e2, c.clone())
            })
            .collect();
        Poly::from_terms(self.n, terms)
    }

    /// Exact division by `v^k`.
    pub fn divide_exc(&self, v: usize, k: u32) -> Result<Poly, PolyError> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (e, c) in &self.terms {
            if e.0[v] < k {
                return Err(PolyError::NotDivisible { var: v, need: k, have: e.0[v] });
            }
            let mut e2 = e.clone();
            e2.0[v] -= k;
            terms.push((e2, c.clone()));
        }
        Ok(Poly { n: self.n, terms })
    }

    /// Exact division by the monomial `x^e`.
    pub fn divide_mono(&self, e: &ExpVec) -> Result<Poly, PolyError> {
        let mut p = self.clone();
        for (v, &k) in e.0.iter().enumerate() {
            if k > 0 {
                p = p.divide_exc(v, k)?;
            }
        }
        Ok(p)
    }

    /// Sets the variables of `zeroed` to zero.
    pub fn restrict(&self, zeroed: VarSet) -> Poly {
        Poly { n: self.n, terms: self.terms.iter().filter(|(e, _)| e.support() & zeroed == 0).cloned().collect() }
    }

    /// Minimal exponent of `v` over all terms; zero for the zero polynomial.
    pub fn var_content(&self, v: usize) -> u32 {
        self.terms.iter().map(|(e, _)| e.0[v]).min().unwrap_or(0)
    }

    /// Largest exponent of `v`.
    pub fn var_degree(&self, v: usize) -> u32 {
        self.terms.iter().map(|(e, _)| e.0[v]).max().unwrap_or(0)
    }

    /// Componentwise-minimal exponent vector over all terms.
    pub fn mono_content(&self) -> ExpVec {
        mono_content(std::slice::from_ref(self), full_mask(self.n))
    }

    /// Substitutes the polynomial `q` for the variable `v`.
    pub fn substitute(&self, v: usize, q: &Poly) -> Poly {
        let mut acc = Poly::zero(self.n);
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            let k = e2.0[v];
            e2.0[v] = 0;
            let t = Poly::monomial(e2, c.clone()).mul(&q.pow(k));
            acc = acc.add(&t);
        }
        acc
    }

    /// Scales so that the first canonical term has coefficient 1.
    pub fn normalized(&self) -> Poly {
        match self.terms.first() {
            None => self.clone(),
            Some((_, c)) => {
                let inv = c.recip();
                self.scale(&inv)
            }
        }
    }

    /// Value at a rational point.
    pub fn eval(&self, point: &[BigRational]) -> BigRational {
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, &k) in e.0.iter().enumerate() {
                if k > 0 {
                    t *= num_traits::pow(point[i].clone(), k as usize);
                }
            }
            acc += t;
        }
        acc
    }

    /// Text in the polynomial grammar, declaration-order monomials.
    pub fn display(&self, vars: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (e, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let a = c.abs();
            if e.is_empty() {
                out.push_str(&fmt_rat(&a));
            } else {
                if !a.is_one() {
                    out.push_str(&fmt_rat(&a));
                    out.push('*');
                }
                out.push_str(&e.display(vars));
            }
        }
        out
    }

    /// Changes the variable universe to `n` variables, keeping positions.
    pub fn extend_vars(&self, n: usize) -> Poly {
        assert!(n >= self.n);
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| {
                let mut v = e.0.clone();
                v.resize(n, 0);
                (ExpVec(v), c.clone())
            })
            .collect();
        Poly { n, terms }
    }
}

/// Componentwise-minimum exponent vector over all terms of all `ps`,
/// restricted to the `allowed` variables.
pub fn mono_content(ps: &[Poly], allowed: VarSet) -> ExpVec {
    let n = ps.first().map_or(0, |p| p.nvars());
    let mut acc: Option<ExpVec> = None;
    for p in ps {
        for (e, _) in p.terms() {
            acc = Some(match acc {
                None => e.clone(),
                Some(a) => a.meet(e),
            });
        }
    }
    acc.unwrap_or_else(|| ExpVec::zero(n)).restricted(allowed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn p(s: &str, vars: &[String]) -> Poly {
        parse_poly(s, vars).unwrap()
    }

    #[test]
    fn additive_inverse_and_identity() {
        let vars = v(&["x", "y", "z"]);
        let x = p("x", &vars);
        assert!(x.add(&x.neg()).is_zero());
        let f = p("z^2 - x*y^2", &vars);
        assert_eq!(f.mul(&Poly::one(3)), f);
    }

    #[test]
    fn difference_of_squares() {
        let vars = v(&["x", "z"]);
        let a = p("z - x", &vars);
        let b = p("z + x", &vars);
        assert_eq!(a.mul(&b), p("z^2 - x^2", &vars));
    }

    #[test]
    fn order_examples() {
        let vars = v(&["x", "y", "z", "w"]);
        let g = p("z^2*w - x*y^2", &vars);
        assert_eq!(g.order_at_stratum(&StratumSpec::origin(4)), ExtNat::Fin(3));
        assert_eq!(Poly::zero(4).order_at_stratum(&StratumSpec::origin(4)), ExtNat::Inf);
        let vars3 = v(&["x", "y", "z"]);
        let h = p("z^2 - x^2*y^3", &vars3);
        let s = StratumSpec::new(3, 0b110);
        assert_eq!(h.order_at_stratum(&s), ExtNat::Fin(2));
        assert_eq!(h.order_along(0b101), ExtNat::Fin(2));
        let k = p("z^5 - x^4*y^5", &vars3);
        assert_eq!(k.order_along(0b100), ExtNat::Fin(0));
    }

    #[test]
    fn derivative_examples() {
        let vars = v(&["x", "y", "z", "w"]);
        assert_eq!(p("z^4", &vars).diff(2), p("4*z^3", &vars));
        assert_eq!(p("x^3*y", &vars).logdiff(0), p("3*x^3*y", &vars));
        assert_eq!(p("z^2*w - x*y^2", &vars).diff(3), p("z^2", &vars));
    }

    #[test]
    fn blowup_and_divide() {
        let vars = v(&["x", "y", "z", "w"]);
        let g0 = p("z^2*w - x*y^2", &vars);
        let s = g0.blowup_subst(0b1111, 3);
        assert_eq!(s, p("z^2*w^3 - x*y^2*w^3", &vars));
        assert_eq!(s.divide_exc(3, 3).unwrap(), p("z^2 - x*y^2", &vars));
        assert_eq!(g0.blowup_subst(0b1000, 3), g0);
        let g1 = p("z^2 - x*y^2", &vars);
        assert_eq!(g1.blowup_subst(0b1111, 1), p("y^2*z^2 - x*y^3", &vars));
        assert_eq!(g1.divide_exc(3, 0).unwrap(), g1);
        assert!(matches!(g1.divide_exc(3, 1), Err(PolyError::NotDivisible { .. })));
    }

    #[test]
    fn content_and_restrict() {
        let vars = v(&["x", "y", "z"]);
        let f = p("x^2*y^3 - x^2*y^5*z", &vars);
        assert_eq!(mono_content(&[f], 0b011), ExpVec(vec![2, 3, 0]));
        assert!(mono_content(&[Poly::one(3)], 0b111).is_empty());
        let m = p("x^3*y^4", &vars);
        assert_eq!(mono_content(&[m], 0b011), ExpVec(vec![3, 4, 0]));
        let g = p("z^5 - x^4*y^5", &vars);
        assert_eq!(g.restrict(0b100), p("-x^4*y^5", &vars));
        assert_eq!(g.restrict(0), g);
        assert!(p("x*y + y^2", &vars).restrict(0b011).is_zero());
    }

    #[test]
    fn printing() {
        let vars = v(&["x", "y", "z", "w"]);
        assert_eq!(p("z^5*w^4 - x^4*y^5", &vars).display(&vars), "z^5*w^4 - x^4*y^5");
        assert_eq!(p("z^5 - x^3*y^4*w^2", &vars).display(&vars), "z^5 - x^3*y^4*w^2");
        assert_eq!(p("-3/2*x + 2", &vars).display(&vars), "2 - 3/2*x");
        assert_eq!(Poly::zero(4).display(&vars), "0");
    }

    #[test]
    fn stratum_display() {
        let vars = v(&["x", "y", "z", "w"]);
        assert_eq!(StratumSpec::origin(4).display(&vars), "{0}");
        assert_eq!(StratumSpec::new(4, 0b0111).display(&vars), "{x=y=z=0}");
    }
}
