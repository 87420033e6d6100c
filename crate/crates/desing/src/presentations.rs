//! Marked-ideal calculus: presentations, their numeric invariants, the
//! derivative operators, maximal-contact descent and test-morphism
//! transforms.

use crate::polyring::{
    bit, fmt_rat, full_mask, members, parse_poly, ExpVec, ExtNat, FracMono, ParseError, Poly, PolyError, StratumSpec,
    VarSet,
};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use thiserror::Error;

/// Largest assigned multiplicity handled by the derivative closure.
pub const MARK_CAP: i64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PresError {
    #[error("not divisible: {0}")]
    NotDivisible(String),
    #[error("no coordinate maximal-contact variable at stratum {0}")]
    ContactNotFound(String),
    #[error("unsupported input: {0}")]
    UnsupportedInput(String),
    #[error("the tested point leaves the strict transform of the contact subspace")]
    ContactMissed,
}

impl From<PolyError> for PresError {
    fn from(e: PolyError) -> Self {
        PresError::NotDivisible(e.to_string())
    }
}

/// Exceptional hypersurface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Divisor {
    pub id: usize,
    pub birth_year: usize,
}

/// A function with an assigned multiplicity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MarkedFn {
    pub h: Poly,
    pub mu: BigRational,
}

impl MarkedFn {
    pub fn new(h: Poly, mu: BigRational) -> MarkedFn {
        MarkedFn { h, mu }
    }

    /// Elements with mark at most zero impose no condition.
    pub fn is_inert(&self) -> bool {
        !self.mu.is_positive()
    }

    fn active(&self) -> bool {
        !self.is_inert() && !self.h.is_zero()
    }
}

/// A maximal-contact hypersurface `{var * unit = rest}`; a coordinate
/// hyperplane when `rest` is zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Contact {
    pub var: usize,
    pub unit: Poly,
    pub rest: Poly,
}

impl Contact {
    pub fn coordinate(n: usize, var: usize) -> Contact {
        Contact { var, unit: Poly::one(n), rest: Poly::zero(n) }
    }

    pub fn is_coordinate(&self) -> bool {
        self.rest.is_zero()
    }

    /// Restriction of `f` to the contact hypersurface, cleared of the
    /// unit denominator.
    pub fn restrict(&self, f: &Poly) -> Poly {
        if self.rest.is_zero() {
            return f.restrict(bit(self.var));
        }
        let k = f.var_degree(self.var);
        let mut acc = Poly::zero(f.nvars());
        for (e, c) in f.terms() {
            let mut e2 = e.clone();
            let j = e2.0[self.var];
            e2.0[self.var] = 0;
            let t = Poly::monomial(e2, c.clone()).mul(&self.rest.pow(j)).mul(&self.unit.pow(k - j));
            acc = acc.add(&t);
        }
        acc
    }
}

/// A local presentation: contact chain, marked functions and attached
/// exceptional divisors keyed by their chart variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Presentation {
    pub n: usize,
    pub contact: Vec<Contact>,
    pub marked: Vec<MarkedFn>,
    pub exc: BTreeMap<usize, Divisor>,
}

impl Presentation {
    pub fn new(n: usize, marked: Vec<MarkedFn>, exc: BTreeMap<usize, Divisor>) -> Presentation {
        Presentation { n, contact: Vec::new(), marked, exc }
    }

    pub fn contact_mask(&self) -> VarSet {
        self.contact.iter().fold(0, |m, c| m | bit(c.var))
    }

    pub fn exc_mask(&self) -> VarSet {
        self.exc.keys().fold(0, |m, &v| m | bit(v))
    }

    /// Non-contact variables.
    pub fn ambient_mask(&self) -> VarSet {
        full_mask(self.n) & !self.contact_mask()
    }

    fn active(&self) -> impl Iterator<Item = &MarkedFn> {
        self.marked.iter().filter(|m| m.active())
    }

    /// Structured text record.
    pub fn record(&self, vars: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vars: {}", vars.join(", "));
        let cs: Vec<String> = self
            .contact
            .iter()
            .map(|c| {
                if c.is_coordinate() {
                    vars[c.var].clone()
                } else {
                    format!("{} = ({}) / ({})", vars[c.var], c.rest.display(vars), c.unit.display(vars))
                }
            })
            .collect();
        let _ = writeln!(out, "contact: {}", cs.join(", "));
        let ms: Vec<String> =
            self.marked.iter().map(|m| format!("({}, {}/{})", m.h.display(vars), m.mu.numer(), m.mu.denom())).collect();
        let _ = writeln!(out, "marked: {}", ms.join("; "));
        let es: Vec<String> =
            self.exc.iter().map(|(&v, d)| format!("{} -> divisor#{}@{}", vars[v], d.id, d.birth_year)).collect();
        let _ = writeln!(out, "exc: {}", es.join("; "));
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecordError {
    #[error("missing field {0:?}")]
    MissingField(&'static str),
    #[error("malformed {0}: {1:?}")]
    Malformed(&'static str, String),
    #[error("polynomial: {0}")]
    Poly(#[from] ParseError),
}

/// Parses a record produced by [`Presentation::record`].
pub fn parse_record(s: &str) -> Result<(Vec<String>, Presentation), RecordError> {
    let mut fields: HashMap<&str, &str> = HashMap::new();
    for line in s.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once(':').ok_or_else(|| RecordError::Malformed("line", line.to_string()))?;
        fields.insert(k.trim(), v.trim());
    }
    let get = |k: &'static str| fields.get(k).copied().ok_or(RecordError::MissingField(k));
    let vars: Vec<String> = split_list(get("vars")?, ',').map(str::to_string).collect();
    if vars.is_empty() || vars.len() > crate::polyring::MAX_VARS {
        return Err(RecordError::Malformed("vars", get("vars")?.to_string()));
    }
    for (i, v) in vars.iter().enumerate() {
        let ok = v.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !ok || vars[..i].contains(v) {
            return Err(RecordError::Malformed("vars", v.clone()));
        }
    }
    let n = vars.len();
    let idx = |name: &str| {
        vars.iter().position(|v| v == name).ok_or_else(|| RecordError::Malformed("variable", name.to_string()))
    };
    let mut contact = Vec::new();
    for item in split_list(get("contact")?, ',') {
        match item.split_once('=') {
            None => contact.push(Contact::coordinate(n, idx(item)?)),
            Some((v, rhs)) => {
                let (rest, unit) = rhs
                    .trim()
                    .split_once(") / (")
                    .ok_or_else(|| RecordError::Malformed("contact", item.to_string()))?;
                let rest = rest.trim().strip_prefix('(').unwrap_or(rest);
                let unit = unit.trim().strip_suffix(')').unwrap_or(unit);
                contact.push(Contact {
                    var: idx(v.trim())?,
                    unit: parse_poly(unit, &vars)?,
                    rest: parse_poly(rest, &vars)?,
                });
            }
        }
    }
    let mut marked = Vec::new();
    for item in split_list(get("marked")?, ';') {
        let inner = item
            .strip_prefix('(')
            .and_then(|x| x.strip_suffix(')'))
            .ok_or_else(|| RecordError::Malformed("marked", item.to_string()))?;
        let (p, q) = inner.rsplit_once(',').ok_or_else(|| RecordError::Malformed("marked", item.to_string()))?;
        let (num, den) = q.trim().split_once('/').ok_or_else(|| RecordError::Malformed("mark", q.to_string()))?;
        let num: BigInt = num.trim().parse().map_err(|_| RecordError::Malformed("mark", q.to_string()))?;
        let den: BigInt = den.trim().parse().map_err(|_| RecordError::Malformed("mark", q.to_string()))?;
        if den.is_zero() {
            return Err(RecordError::Malformed("mark", q.to_string()));
        }
        marked.push(MarkedFn::new(parse_poly(p, &vars)?, BigRational::new(num, den)));
    }
    let mut exc = BTreeMap::new();
    for item in split_list(get("exc")?, ';') {
        let (v, d) = item.split_once("->").ok_or_else(|| RecordError::Malformed("exc", item.to_string()))?;
        let d = d.trim().strip_prefix("divisor#").ok_or_else(|| RecordError::Malformed("exc", item.to_string()))?;
        let (id, year) = d.split_once('@').ok_or_else(|| RecordError::Malformed("exc", item.to_string()))?;
        let id = id.parse().map_err(|_| RecordError::Malformed("exc", item.to_string()))?;
        let birth_year = year.parse().map_err(|_| RecordError::Malformed("exc", item.to_string()))?;
        exc.insert(idx(v.trim())?, Divisor { id, birth_year });
    }
    Ok((vars, Presentation { n, contact, marked, exc }))
}

fn split_list(s: &str, sep: char) -> impl Iterator<Item = &str> {
    s.split(sep).map(str::trim).filter(|x| !x.is_empty())
}

/// `min ord_s(h) / mu_h`; `None` stands for infinity.
pub fn mu_min(p: &Presentation, s: &StratumSpec) -> Option<BigRational> {
    p.active()
        .filter_map(|m| match m.h.order_at_stratum(s) {
            ExtNat::Inf => None,
            ExtNat::Fin(o) => Some(BigRational::from_integer(BigInt::from(o)) / &m.mu),
        })
        .min()
}

/// `min content_H(h) / mu_h` over the marked functions.
pub fn mu_along_divisor(p: &Presentation, h_var: usize, _s: &StratumSpec) -> BigRational {
    p.active()
        .map(|m| BigRational::from_integer(BigInt::from(m.h.var_content(h_var))) / &m.mu)
        .min()
        .unwrap_or_else(BigRational::zero)
}

/// `mu_min - sum_H mu_H`; `None` stands for infinity.
pub fn nu(p: &Presentation, s: &StratumSpec) -> Option<BigRational> {
    let mu = mu_min(p, s)?;
    let sum = companion(p, s).total();
    Some(mu - sum)
}

/// The exceptional monomial `D = prod x_H^{mu_H}`.
pub fn companion(p: &Presentation, s: &StratumSpec) -> FracMono {
    let mut out = FracMono::new();
    for &v in p.exc.keys() {
        let q = mu_along_divisor(p, v, s);
        if !q.is_zero() {
            out.0.insert(v, q);
        }
    }
    out
}

fn to_u32(q: &BigRational) -> Result<u32, PresError> {
    q.to_integer().to_u32().ok_or_else(|| PresError::UnsupportedInput("exponent out of range".into()))
}

/// Integral monomial `D^m` for the least `m` making it integral.
pub fn integral_power(d: &FracMono, n: usize) -> (ExpVec, BigInt) {
    let m = d.common_denominator();
    let mut e = ExpVec::zero(n);
    for (&v, q) in &d.0 {
        let k = q * BigRational::from_integer(m.clone());
        e.0[v] = k.to_integer().to_u32().expect("exponent out of range");
    }
    (e, m)
}

/// Factors the exceptional monomial out of the marked functions.
pub fn residual(p: &Presentation, s: &StratumSpec) -> Result<Presentation, PresError> {
    let nu_v = nu(p, s).ok_or_else(|| PresError::UnsupportedInput("residual of an infinite value".into()))?;
    let d = companion(p, s);
    let (d_int, m) = integral_power(&d, p.n);
    let m_q = BigRational::from_integer(m.clone());
    let mut out = Vec::new();
    if nu_v.is_zero() {
        out.push(MarkedFn::new(Poly::monomial(d_int, BigRational::one()), m_q));
    } else {
        for mf in p.active() {
            let mut q = BigInt::one();
            for e in d.0.values() {
                q = q.lcm((e * &mf.mu).denom());
            }
            let (h, mark) = if q.is_one() {
                (mf.h.clone(), mf.mu.clone())
            } else {
                let k = q
                    .to_u32()
                    .filter(|&k| k <= POW_CAP && (mf.h.is_monomial() || k <= 8))
                    .ok_or_else(|| PresError::UnsupportedInput("power too large".into()))?;
                (mf.h.pow(k), &mf.mu * BigRational::from_integer(q.clone()))
            };
            let mut g = h;
            for (&v, e) in &d.0 {
                g = g.divide_exc(v, to_u32(&(e * &mark))?)?;
            }
            out.push(MarkedFn::new(g, mark * &nu_v));
        }
        if nu_v < BigRational::one() {
            out.push(MarkedFn::new(Poly::monomial(d_int, BigRational::one()), m_q * (BigRational::one() - &nu_v)));
        }
    }
    Ok(Presentation { n: p.n, contact: p.contact.clone(), marked: out, exc: p.exc.clone() })
}

fn derivatives(f: &Poly, exc: VarSet, ambient: VarSet) -> Vec<Poly> {
    members(ambient)
        .map(|v| if exc >> v & 1 == 1 { f.logdiff(v) } else { f.diff(v) })
        .filter(|g| !g.is_zero())
        .collect()
}

/// Derivatives of `x^e` in the `plain` directions that lower each exponent
/// by nothing, by all but one, or by all of it, with the total order
/// lowered. Every other derivative of the monomial is implied by these.
fn monomial_corners(e: &ExpVec, plain: VarSet) -> Vec<(ExpVec, u64)> {
    let mut out: Vec<(ExpVec, u64)> = vec![(e.clone(), 0)];
    for v in members(plain & e.support()) {
        let a = e.get(v);
        let mut next = Vec::with_capacity(out.len() * 3);
        for (f, k) in &out {
            next.push((f.clone(), *k));
            for drop in [a - 1, a] {
                if drop == 0 {
                    continue;
                }
                let mut g = f.clone();
                g.0[v] -= drop;
                next.push((g, k + drop as u64));
            }
        }
        out = next;
    }
    out.retain(|(_, k)| *k > 0);
    out
}

/// One application of the operator Delta to each element.
pub fn delta(f: &[MarkedFn], exc: VarSet, ambient: VarSet) -> Vec<MarkedFn> {
    let mut out = Vec::new();
    for m in f {
        let mark = &m.mu - BigRational::one();
        out.push(MarkedFn::new(m.h.clone(), mark.clone()));
        for g in derivatives(&m.h, exc, ambient) {
            out.push(MarkedFn::new(g, mark.clone()));
        }
    }
    out
}

/// Union of the first `k` iterates of Delta, deduplicated by normalized
/// function and mark. Inert elements are kept but not expanded further.
pub fn delta_closure(f: &[MarkedFn], k: usize, exc: VarSet, ambient: VarSet) -> Vec<MarkedFn> {
    let mut seen: std::collections::HashSet<(Poly, BigRational)> = Default::default();
    let mut out = Vec::new();
    let mut layer: Vec<MarkedFn> = Vec::new();
    for m in f {
        if seen.insert((m.h.normalized(), m.mu.clone())) {
            out.push(m.clone());
            layer.push(m.clone());
        }
    }
    for _ in 0..k {
        let live: Vec<MarkedFn> = layer.iter().filter(|m| !m.is_inert()).cloned().collect();
        let mut next = Vec::new();
        for m in delta(&live, exc, ambient) {
            if seen.insert((m.h.normalized(), m.mu.clone())) {
                out.push(m.clone());
                next.push(m);
            }
        }
        layer = next;
    }
    out
}

/// Closure of each element under its own derivative budget, keeping for
/// each normalized function only its largest mark.
pub fn coefficient_closure(f: &[MarkedFn], exc: VarSet, ambient: VarSet) -> Result<Vec<MarkedFn>, PresError> {
    let mut best: HashMap<Poly, BigRational> = HashMap::new();
    let mut order: Vec<Poly> = Vec::new();
    let mut queue: VecDeque<(Poly, BigRational)> = VecDeque::new();
    let one = BigRational::one();
    for m in f.iter().filter(|m| m.active()) {
        let (h, mu) = integral_mark(m)?;
        let m = MarkedFn::new(h, mu);
        if m.mu > BigRational::from_integer(BigInt::from(MARK_CAP)) {
            return Err(PresError::UnsupportedInput("assigned multiplicity too large".into()));
        }
        let key = m.h.normalized();
        match best.get(&key) {
            Some(old) if *old >= m.mu => continue,
            Some(_) => {}
            None => order.push(key.clone()),
        }
        best.insert(key.clone(), m.mu.clone());
        queue.push_back((key, m.mu.clone()));
    }
    while let Some((h, mark)) = queue.pop_front() {
        if best.get(&h) != Some(&mark) {
            continue;
        }
        if h.is_monomial() {
            for (e, k) in monomial_corners(&h.terms()[0].0, ambient & !exc) {
                let child = &mark - BigRational::from_integer(BigInt::from(k));
                if !child.is_positive() {
                    continue;
                }
                let key = Poly::monomial(e, one.clone());
                match best.get(&key) {
                    Some(old) if *old >= child => continue,
                    Some(_) => {}
                    None => order.push(key.clone()),
                }
                best.insert(key, child);
            }
            continue;
        }
        let child = &mark - &one;
        if !child.is_positive() {
            continue;
        }
        for g in derivatives(&h, exc, ambient) {
            let key = g.normalized();
            match best.get(&key) {
                Some(old) if *old >= child => continue,
                Some(_) => {}
                None => order.push(key.clone()),
            }
            best.insert(key.clone(), child.clone());
            queue.push_back((key, child.clone()));
        }
    }
    Ok(order
        .into_iter()
        .map(|h| {
            let mu = best[&h].clone();
            MarkedFn::new(h, mu)
        })
        .collect())
}

/// Divides out the Generic-variable monomial content, a unit at `s`.
pub fn strip_units(h: &Poly, s: &StratumSpec) -> Poly {
    let c = h.mono_content().restricted(s.generic_mask());
    if c.is_empty() {
        h.clone()
    } else {
        h.divide_mono(&c).expect("content divides")
    }
}

/// Removes monomial elements implied by another monomial element at `s`.
pub fn prune_dominated(marked: Vec<MarkedFn>, s: &StratumSpec) -> Vec<MarkedFn> {
    let zero = s.zero;
    let mono: Vec<(usize, ExpVec, BigRational)> = marked
        .iter()
        .enumerate()
        .filter(|(_, m)| m.h.is_monomial())
        .map(|(i, m)| (i, m.h.terms()[0].0.restricted(zero), m.mu.clone()))
        .collect();
    let mut drop = vec![false; marked.len()];
    for (a, ea, ma) in &mono {
        for (b, eb, mb) in &mono {
            if a == b || drop[*b] {
                continue;
            }
            let dominated = members(zero).all(|v| {
                BigRational::from_integer(BigInt::from(ea.0[v])) * mb
                    >= BigRational::from_integer(BigInt::from(eb.0[v])) * ma
            });
            if dominated {
                drop[*a] = true;
                break;
            }
        }
    }
    marked.into_iter().enumerate().filter(|(i, _)| !drop[*i]).map(|(_, m)| m).collect()
}

fn is_one(q: &BigRational) -> bool {
    q.is_one()
}

/// Maximal-contact search in the derivative closure.
///
/// Pure hits `v * unit` are preferred in reverse declaration order; when
/// none exists a binomial `c*u*v - m` with `m` free of `v` yields a graph
/// hypersurface.
pub fn find_contact(p: &Presentation, s: &StratumSpec) -> Result<Contact, PresError> {
    let closure = coefficient_closure(&p.marked, p.exc_mask(), p.ambient_mask() & s.zero)?;
    find_contact_in(p, s, &closure, 0)
}

fn find_contact_in(
    p: &Presentation,
    s: &StratumSpec,
    closure: &[MarkedFn],
    avoid: VarSet,
) -> Result<Contact, PresError> {
    let forbidden = p.contact_mask() | p.exc_mask() | avoid;
    let candidates: Vec<usize> = (0..p.n).rev().filter(|&v| s.is_zero(v) && forbidden >> v & 1 == 0).collect();
    let ones: Vec<&MarkedFn> =
        closure.iter().filter(|m| is_one(&m.mu) && m.h.order_at_stratum(s) == ExtNat::Fin(1)).collect();
    for &v in &candidates {
        for m in &ones {
            if m.h.var_content(v) >= 1 {
                let rest = m.h.divide_exc(v, 1)?;
                if rest.order_at_stratum(s) == ExtNat::Fin(0) {
                    return Ok(Contact::coordinate(p.n, v));
                }
            }
        }
    }
    for &v in &candidates {
        for m in &ones {
            if m.h.num_terms() != 2 {
                continue;
            }
            let t = m.h.terms();
            for (a, b) in [(0, 1), (1, 0)] {
                let (ea, ca) = &t[a];
                let (eb, cb) = &t[b];
                if ea.0[v] == 1 && ea.degree_in(s.zero) == 1 && eb.0[v] == 0 {
                    let mut u = ea.clone();
                    u.0[v] = 0;
                    return Ok(Contact {
                        var: v,
                        unit: Poly::monomial(u, ca.clone()),
                        rest: Poly::monomial(eb.clone(), -cb.clone()),
                    });
                }
            }
        }
    }
    Err(PresError::ContactNotFound(format!("{:b}", s.zero)))
}

/// Passes to the contact hypersurface: restricts the derivative closure,
/// dropping inert and vanishing elements.
pub fn descend(p: &Presentation, z: &Contact, s: &StratumSpec) -> Result<Presentation, PresError> {
    let closure = coefficient_closure(&p.marked, p.exc_mask(), p.ambient_mask() & s.zero)?;
    Ok(descend_with(p, z, s, &closure))
}

fn descend_with(p: &Presentation, z: &Contact, s: &StratumSpec, closure: &[MarkedFn]) -> Presentation {
    let mut best: BTreeMap<Poly, BigRational> = BTreeMap::new();
    let mut order = Vec::new();
    for m in closure {
        if m.is_inert() {
            continue;
        }
        let r = z.restrict(&m.h);
        if r.is_zero() {
            continue;
        }
        let key = strip_units(&r, s).normalized();
        match best.get(&key) {
            Some(old) if *old >= m.mu => continue,
            Some(_) => {}
            None => order.push(key.clone()),
        }
        best.insert(key, m.mu.clone());
    }
    let marked: Vec<MarkedFn> = order
        .into_iter()
        .map(|h| {
            let mu = best[&h].clone();
            MarkedFn::new(h, mu)
        })
        .collect();
    let mut contact = p.contact.clone();
    contact.push(z.clone());
    Presentation { n: p.n, contact, marked: prune_dominated(marked, s), exc: p.exc.clone() }
}

/// Finds a contact hypersurface and descends in one pass over the closure.
///
/// Variables in `avoid` are never chosen as contact.
pub fn contact_and_descend(
    p: &Presentation,
    s: &StratumSpec,
    avoid: VarSet,
) -> Result<(Contact, Presentation), PresError> {
    let closure = coefficient_closure(&p.marked, p.exc_mask(), p.ambient_mask() & s.zero)?;
    let z = find_contact_in(p, s, &closure, avoid)?;
    let q = descend_with(p, &z, s, &closure);
    Ok((z, q))
}

/// Test morphisms of the three types.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Morphism {
    AdmissibleBlowup { centre: VarSet, chart_var: usize },
    ProductWithLine,
    ExceptionalBlowup { h0: usize, h1: usize },
}

/// Kinds of morphism, for the refuter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MorphismKind {
    Admissible,
    Line,
    Exceptional,
}

/// Transform of a presentation at the origin of the target chart.
///
/// Type (ii) appends one variable at position `n`. Type (iii) blows up
/// `H0 ∩ H1` and moves to the point on the strict transform of `H1`,
/// which is the origin of the `h0` chart.
pub fn transform(p: &Presentation, m: &Morphism, fresh: Divisor) -> Result<Presentation, PresError> {
    match *m {
        Morphism::AdmissibleBlowup { centre, chart_var } => {
            if centre >> chart_var & 1 == 0 {
                return Err(PresError::UnsupportedInput("chart variable outside centre".into()));
            }
            if p.contact.iter().any(|c| !c.is_coordinate()) {
                return Err(PresError::UnsupportedInput("graph contact under blowing-up".into()));
            }
            let cm = p.contact_mask();
            if cm & !centre != 0 {
                return Err(PresError::UnsupportedInput("centre not inside the contact subspace".into()));
            }
            if cm >> chart_var & 1 == 1 {
                return Err(PresError::ContactMissed);
            }
            let mut marked = Vec::new();
            for mf in &p.marked {
                if mf.is_inert() {
                    marked.push(mf.clone());
                    continue;
                }
                let (h, mu) = integral_mark(mf)?;
                let t = h.blowup_subst(centre, chart_var);
                let k = to_u32(&mu)?;
                let g = t.divide_exc(chart_var, k)?;
                marked.push(MarkedFn::new(g, mu));
            }
            let mut exc = p.exc.clone();
            exc.insert(chart_var, fresh);
            Ok(Presentation { n: p.n, contact: p.contact.clone(), marked, exc })
        }
        Morphism::ProductWithLine => {
            let n = p.n + 1;
            let marked = p.marked.iter().map(|m| MarkedFn::new(m.h.extend_vars(n), m.mu.clone())).collect();
            let contact = p
                .contact
                .iter()
                .map(|c| Contact { var: c.var, unit: c.unit.extend_vars(n), rest: c.rest.extend_vars(n) })
                .collect();
            let mut exc = p.exc.clone();
            exc.insert(p.n, fresh);
            Ok(Presentation { n, contact, marked, exc })
        }
        Morphism::ExceptionalBlowup { h0, h1 } => {
            if !p.exc.contains_key(&h0) || !p.exc.contains_key(&h1) || h0 == h1 {
                return Err(PresError::UnsupportedInput("exceptional blowing-up needs two divisors".into()));
            }
            let centre = bit(h0) | bit(h1);
            let marked = p.marked.iter().map(|m| MarkedFn::new(m.h.blowup_subst(centre, h0), m.mu.clone())).collect();
            let mut exc = p.exc.clone();
            exc.insert(h0, fresh);
            Ok(Presentation { n: p.n, contact: p.contact.clone(), marked, exc })
        }
    }
}

/// Largest power taken when clearing a fractional mark.
const POW_CAP: u32 = 64;

/// Rewrites `(h, p/q)` as `(h^q, p)`.
pub fn integral_mark(mf: &MarkedFn) -> Result<(Poly, BigRational), PresError> {
    if mf.mu.is_integer() {
        return Ok((mf.h.clone(), mf.mu.clone()));
    }
    let q = mf.mu.denom().clone();
    let k = q
        .to_u32()
        .filter(|&k| k <= POW_CAP && (mf.h.is_monomial() || k <= 8))
        .ok_or_else(|| PresError::UnsupportedInput("mark denominator too large".into()))?;
    Ok((mf.h.pow(k), &mf.mu * BigRational::from_integer(q)))
}

/// Whether every marked condition holds at `s`.
pub fn in_locus(p: &Presentation, s: &StratumSpec) -> bool {
    if p.contact_mask() & !s.zero != 0 {
        return false;
    }
    p.active().all(|m| match m.h.order_at_stratum(s) {
        ExtNat::Inf => true,
        ExtNat::Fin(o) => BigRational::from_integer(BigInt::from(o)) >= m.mu,
    })
}

/// Maximal strata (fewest Zero variables) of the equimultiple locus.
pub fn equimultiple_strata(p: &Presentation) -> Result<Vec<StratumSpec>, PresError> {
    if p.marked.iter().any(|m| m.h.num_terms() > 2) {
        return Err(PresError::UnsupportedInput("more than two terms".into()));
    }
    let inside: Vec<StratumSpec> = StratumSpec::all(p.n).filter(|s| in_locus(p, s)).collect();
    Ok(minimal_zero_sets(&inside))
}

/// Strata whose Zero set is minimal under inclusion.
pub fn minimal_zero_sets(strata: &[StratumSpec]) -> Vec<StratumSpec> {
    strata.iter().filter(|s| !strata.iter().any(|t| t.zero != s.zero && t.zero & s.zero == t.zero)).copied().collect()
}

/// Bit pattern of the strata in the equimultiple locus.
fn locus_signature(p: &Presentation) -> Vec<bool> {
    StratumSpec::all(p.n).map(|s| in_locus(p, &s)).collect()
}

/// Bounded search for a morphism sequence separating the equimultiple loci
/// of two presentations. `None` is not a proof of equivalence.
pub fn equivalence_refute(
    p1: &Presentation,
    p2: &Presentation,
    depth: usize,
    kinds: &[MorphismKind],
) -> Option<Vec<Morphism>> {
    struct Node {
        a: Presentation,
        b: Presentation,
        path: Vec<Morphism>,
        seed: Option<(usize, usize)>,
    }
    let mut next_id = 1_000_000usize;
    let mut queue = VecDeque::new();
    queue.push_back(Node { a: p1.clone(), b: p2.clone(), path: Vec::new(), seed: None });
    while let Some(node) = queue.pop_front() {
        if locus_signature(&node.a) != locus_signature(&node.b) {
            return Some(node.path);
        }
        if node.path.len() >= depth {
            continue;
        }
        let mut moves: Vec<(Morphism, Option<(usize, usize)>)> = Vec::new();
        if kinds.contains(&MorphismKind::Admissible) {
            let cm = node.a.contact_mask() | node.b.contact_mask();
            for s in StratumSpec::all(node.a.n) {
                if s.zero == 0 || s.zero & cm != cm || !in_locus(&node.a, &s) {
                    continue;
                }
                for i in members(s.zero) {
                    if cm >> i & 1 == 0 {
                        moves.push((Morphism::AdmissibleBlowup { centre: s.zero, chart_var: i }, None));
                    }
                }
            }
        }
        if kinds.contains(&MorphismKind::Line) && node.a.n < 8 {
            for &h in node.a.exc.keys() {
                moves.push((Morphism::ProductWithLine, Some((node.a.n, h))));
            }
            if node.a.exc.is_empty() {
                moves.push((Morphism::ProductWithLine, None));
            }
        }
        if kinds.contains(&MorphismKind::Exceptional) {
            if let Some((h0, h1)) = node.seed {
                moves.push((Morphism::ExceptionalBlowup { h0, h1 }, Some((h0, h1))));
            }
        }
        for (m, seed) in moves {
            next_id += 1;
            let fresh = Divisor { id: next_id, birth_year: node.path.len() + 1 };
            let ra = transform(&node.a, &m, fresh);
            let rb = transform(&node.b, &m, fresh);
            let mut path = node.path.clone();
            path.push(m.clone());
            match (ra, rb) {
                (Ok(a), Ok(b)) => queue.push_back(Node { a, b, path, seed }),
                (Err(_), Err(_)) => {}
                _ => return Some(path),
            }
        }
    }
    None
}

/// Adjoins the plain first derivatives in every non-contact coordinate.
pub fn plain_derivative_augment(p: &Presentation) -> Presentation {
    let mut marked = p.marked.clone();
    for m in p.active() {
        for v in members(p.ambient_mask()) {
            let g = m.h.diff(v);
            if !g.is_zero() {
                marked.push(MarkedFn::new(g, &m.mu - BigRational::one()));
            }
        }
    }
    Presentation { marked, ..p.clone() }
}

/// Mark printed as `p/q`.
pub fn fmt_mark(q: &BigRational) -> String {
    fmt_rat(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyring::{int, rat};

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn mf(s: &str, v: &[String], mu: BigRational) -> MarkedFn {
        MarkedFn::new(parse_poly(s, v).unwrap(), mu)
    }

    fn div(id: usize, year: usize) -> Divisor {
        Divisor { id, birth_year: year }
    }

    fn pres(marked: Vec<MarkedFn>, exc: &[(usize, Divisor)], n: usize) -> Presentation {
        Presentation::new(n, marked, exc.iter().copied().collect())
    }

    #[test]
    fn mu_min_examples() {
        let v = vars(&["x", "y", "z", "w"]);
        let o = StratumSpec::origin(4);
        let p = pres(vec![mf("x^2*y^3", &v, int(3)), mf("w", &v, int(1))], &[], 4);
        assert_eq!(mu_min(&p, &o), Some(int(1)));
        assert_eq!(mu_min(&pres(vec![], &[], 4), &o), None);
        let q = pres(vec![mf("x^2*y^2", &v, int(3))], &[], 4);
        assert_eq!(mu_min(&q, &o), Some(rat(4, 3)));
    }

    #[test]
    fn mu_along_examples() {
        let v = vars(&["x", "y", "w"]);
        let o = StratumSpec::origin(3);
        let p = pres(vec![mf("x^2*y^2", &v, int(3))], &[(1, div(2, 2))], 3);
        assert_eq!(mu_along_divisor(&p, 1, &o), rat(2, 3));
        let q = pres(vec![mf("w", &v, int(1))], &[(0, div(1, 1))], 3);
        assert_eq!(mu_along_divisor(&q, 0, &o), int(0));
        let r = pres(vec![mf("x^2*y^3", &v, int(2)), mf("x^4", &v, int(2))], &[(0, div(1, 1))], 3);
        assert_eq!(mu_along_divisor(&r, 0, &o), int(1));
    }

    #[test]
    fn nu_and_companion_examples() {
        let v = vars(&["x", "y", "w"]);
        let o = StratumSpec::origin(3);
        let p = pres(vec![mf("x^3*y^4", &v, int(5))], &[(1, div(2, 2)), (0, div(3, 3))], 3);
        assert_eq!(nu(&p, &o), Some(int(0)));
        let q = pres(vec![mf("x^2*y^2", &v, int(3))], &[(1, div(2, 2))], 3);
        assert_eq!(nu(&q, &o), Some(rat(2, 3)));
        let r = pres(vec![mf("x^2*y^2", &v, int(3))], &[], 3);
        assert_eq!(nu(&r, &o), mu_min(&r, &o));
        let c = pres(vec![mf("x^3*y^4*w^2", &v, int(5))], &[(0, div(3, 3)), (1, div(2, 2)), (2, div(4, 4))], 3);
        let d = companion(&c, &o);
        assert_eq!(d.display(&v), "x^3/5*y^4/5*w^2/5");
        assert!(companion(&r, &o).0.is_empty());
        let e = pres(vec![mf("x^2", &v, int(2)), mf("x^3", &v, int(2))], &[(0, div(1, 1))], 3);
        assert_eq!(companion(&e, &o).display(&v), "x");
    }

    #[test]
    fn residual_examples() {
        let v = vars(&["x", "y", "z", "w"]);
        let o = StratumSpec::origin(4);
        let p = pres(vec![mf("x^2*y^2", &v, int(3)), mf("w", &v, int(1))], &[], 4);
        assert_eq!(residual(&p, &o).unwrap().marked, p.marked);
        let q = pres(vec![mf("x^2*y^2", &v, int(3))], &[(1, div(2, 2))], 4);
        let r = residual(&q, &o).unwrap();
        assert_eq!(r.marked, vec![mf("x^2", &v, int(2)), mf("y^2", &v, int(1))]);
        assert_eq!(mu_min(&r, &o), Some(int(1)));
        let s = pres(vec![mf("x^3*y^4", &v, int(5))], &[(0, div(3, 3)), (1, div(2, 2))], 4);
        assert_eq!(residual(&s, &o).unwrap().marked, vec![mf("x^3*y^4", &v, int(5))]);
    }

    #[test]
    fn delta_examples() {
        let v = vars(&["x", "y", "z"]);
        let f = vec![mf("z^2", &v, int(2))];
        let d = delta(&f, 0, 0b100);
        assert_eq!(d, vec![mf("z^2", &v, int(1)), mf("2*z", &v, int(1))]);
        let g = vec![mf("x*y^2", &v, int(3))];
        let d = delta(&g, 0, 0b011);
        assert!(d.contains(&mf("y^2", &v, int(2))));
        let h = vec![mf("x^2*y", &v, int(3))];
        let d = delta(&h, 0b001, 0b011);
        assert_eq!(d, vec![mf("x^2*y", &v, int(2)), mf("2*x^2*y", &v, int(2)), mf("x^2", &v, int(2))]);
    }

    #[test]
    fn delta_closure_examples() {
        let v = vars(&["x", "y", "z"]);
        let f = vec![mf("z^4", &v, int(4))];
        assert_eq!(delta_closure(&f, 0, 0, 0b111), f);
        let c = delta_closure(&f, 3, 0, 0b111);
        assert!(c.iter().any(|m| m.h.normalized() == parse_poly("z", &v).unwrap() && m.mu == int(1)));
        let g = vec![mf("x*y^2", &v, int(3))];
        let c = delta_closure(&g, 2, 0, 0b011);
        for t in ["x", "y"] {
            let p = parse_poly(t, &v).unwrap();
            assert!(c.iter().any(|m| m.h.normalized() == p && m.mu == int(1)));
        }
    }

    #[test]
    fn contact_examples() {
        let v = vars(&["x", "y", "z", "w"]);
        let o = StratumSpec::origin(4);
        let p = pres(vec![mf("z^3 - x^2*y^3", &v, int(3))], &[], 4);
        assert_eq!(find_contact(&p, &o).unwrap().var, 2);
        let q = pres(vec![mf("w", &v, int(1))], &[], 4);
        assert_eq!(find_contact(&q, &o).unwrap().var, 3);
        let all: Vec<(usize, Divisor)> = (0..4).map(|i| (i, div(i + 1, 1))).collect();
        let r = pres(vec![mf("x^2*y^2 - z^2*w^2", &v, int(4))], &all, 4);
        assert!(matches!(find_contact(&r, &o), Err(PresError::ContactNotFound(_))));
    }

    #[test]
    fn graph_contact() {
        let v = vars(&["x", "y", "z"]);
        let o = StratumSpec::origin(3);
        let p = pres(vec![mf("x - y*z", &v, int(1))], &[], 3);
        let c = find_contact(&p, &o).unwrap();
        assert_eq!(c.var, 0);
        assert!(!c.is_coordinate());
        let f = parse_poly("x^2 + z", &v).unwrap();
        assert_eq!(c.restrict(&f), parse_poly("y^2*z^2 + z", &v).unwrap());
    }

    #[test]
    fn descend_examples() {
        let v = vars(&["x", "y", "z"]);
        let o = StratumSpec::origin(3);
        let p = pres(vec![mf("z^3 - x^2*y^3", &v, int(3))], &[], 3);
        let q = descend(&p, &Contact::coordinate(3, 2), &o).unwrap();
        assert!(q.marked.contains(&mf("x^2*y^3", &v, int(3))));
        let r = pres(vec![mf("z", &v, int(1))], &[], 3);
        let q = descend(&r, &Contact::coordinate(3, 2), &o).unwrap();
        assert!(q.marked.is_empty());
        assert_eq!(mu_min(&q, &o), None);
        let s = pres(vec![mf("z^2 - x*y^2", &v, int(2))], &[], 3);
        let q = descend(&s, &Contact::coordinate(3, 2), &o).unwrap();
        let mut got: Vec<MarkedFn> = q.marked.clone();
        got.sort_by(|a, b| a.h.cmp(&b.h));
        let mut want = vec![mf("x*y^2", &v, int(2)), mf("y^2", &v, int(1))];
        want.sort_by(|a, b| a.h.cmp(&b.h));
        assert_eq!(got, want);
    }

    #[test]
    fn transform_examples() {
        let v = vars(&["x", "y", "z"]);
        let p = pres(vec![mf("x^2*y^2", &v, int(3))], &[], 3);
        let t = transform(&p, &Morphism::AdmissibleBlowup { centre: 0b011, chart_var: 0 }, div(9, 1)).unwrap();
        assert_eq!(t.marked, vec![mf("x*y^2", &v, int(3))]);
        assert_eq!(t.exc.get(&0), Some(&div(9, 1)));
        let l = transform(&p, &Morphism::ProductWithLine, div(9, 1)).unwrap();
        assert_eq!(l.n, 4);
        assert_eq!(l.exc.len(), 1);
        assert_eq!(l.marked[0].h.terms(), p.marked[0].h.extend_vars(4).terms());
        let e = pres(vec![mf("x + y^2", &v, int(1))], &[(0, div(1, 1)), (1, div(2, 2))], 3);
        let t = transform(&e, &Morphism::ExceptionalBlowup { h0: 1, h1: 0 }, div(3, 3)).unwrap();
        assert_eq!(t.marked, vec![mf("x*y + y^2", &v, int(1))]);
        let bad = transform(&p, &Morphism::AdmissibleBlowup { centre: 0b001, chart_var: 0 }, div(9, 1));
        assert!(matches!(bad, Err(PresError::NotDivisible(_))));
    }

    #[test]
    fn equimultiple_examples() {
        let v = vars(&["x", "y", "w"]);
        let p = pres(vec![mf("x^2*y^3*w^2", &v, int(5))], &[], 3);
        let mut got: Vec<VarSet> = equimultiple_strata(&p).unwrap().iter().map(|s| s.zero).collect();
        got.sort();
        assert_eq!(got, vec![0b011, 0b110]);
        let e = pres(vec![], &[], 3);
        assert_eq!(equimultiple_strata(&e).unwrap(), vec![StratumSpec::generic(3)]);
        let t = pres(vec![mf("x + y + w", &v, int(1))], &[], 3);
        assert!(equimultiple_strata(&t).is_err());
    }

    #[test]
    fn refuter_reflexive_and_delta() {
        let v = vars(&["x", "y", "z"]);
        let p = pres(vec![mf("z^2 - x*y^2", &v, int(2))], &[(0, div(1, 1))], 3);
        let kinds = [MorphismKind::Admissible, MorphismKind::Line, MorphismKind::Exceptional];
        assert_eq!(equivalence_refute(&p, &p, 2, &kinds), None);
        let mut aug = p.clone();
        aug.marked.extend(delta(&p.marked, p.exc_mask(), p.ambient_mask()));
        assert_eq!(equivalence_refute(&p, &aug, 2, &kinds), None);
        let q = pres(vec![mf("z - x*y^2", &v, int(1))], &[(0, div(1, 1))], 3);
        assert!(equivalence_refute(&p, &q, 1, &kinds).is_some());
    }

    #[test]
    fn record_round_trip() {
        let v = vars(&["x", "y", "z"]);
        let mut p = pres(vec![mf("x^2*y^2", &v, rat(3, 2)), mf("y", &v, int(1))], &[(1, div(2, 2))], 3);
        p.contact.push(Contact::coordinate(3, 2));
        p.contact.push(Contact { var: 0, unit: parse_poly("2", &v).unwrap(), rest: parse_poly("y^2", &v).unwrap() });
        let text = p.record(&v);
        let (v2, q) = parse_record(&text).unwrap();
        assert_eq!(v2, v);
        assert_eq!(q, p);
    }
}
