//! The desingularization invariant `inv` at chart strata, its extension by
//! the divisor history word, and maximum-locus search.

use crate::polyring::{bit, fmt_rat, members, ExtNat, FracMono, StratumSpec, VarSet};
use crate::presentations::{
    companion, contact_and_descend, mu_along_divisor, mu_min, residual, Contact, Divisor, MarkedFn, PresError,
    Presentation,
};
use crate::tower::{ChartId, Tower};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;
use thiserror::Error;

/// Algorithm variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Bm,
    V,
    EvOnBm,
    EvOnV,
}

impl Variant {
    pub fn villamayor_blocks(self) -> bool {
        matches!(self, Variant::V | Variant::EvOnV)
    }

    pub fn ev(self) -> bool {
        matches!(self, Variant::EvOnBm | Variant::EvOnV)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Bm => "bm",
            Variant::V => "v",
            Variant::EvOnBm => "ev-bm",
            Variant::EvOnV => "ev-v",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bm" => Ok(Variant::Bm),
            "v" => Ok(Variant::V),
            "ev-bm" => Ok(Variant::EvOnBm),
            "ev-v" => Ok(Variant::EvOnV),
            _ => Err(format!("unknown variant {s:?}")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InvError {
    #[error(transparent)]
    Pres(#[from] PresError),
    #[error("internal invariant violation: {0}")]
    Internal(String),
}

/// How the inductive construction ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Terminal {
    Zero,
    Infinity,
    None,
}

/// One entry of the flattened invariant; infinity is greatest.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Entry {
    Num(BigRational),
    Inf,
}

/// `(iota, s_1; nu_2, s_2; ...; nu_t, s_t; terminal)`.
///
/// Equality and order ignore `mu_final`.
#[derive(Clone, Debug)]
pub struct InvValue {
    pub iota: ExtNat,
    pub s: Vec<usize>,
    pub nu: Vec<BigRational>,
    pub terminal: Terminal,
    pub mu_final: Option<BigRational>,
}

impl InvValue {
    /// Value at points where the tracked ideal is a unit.
    pub fn unit() -> InvValue {
        InvValue { iota: ExtNat::Fin(0), s: Vec::new(), nu: Vec::new(), terminal: Terminal::None, mu_final: None }
    }

    /// The generic value `(1,0; inf)` of a smooth hypersurface.
    pub fn smooth() -> InvValue {
        InvValue { iota: ExtNat::Fin(1), s: vec![0], nu: Vec::new(), terminal: Terminal::Infinity, mu_final: None }
    }

    pub fn t(&self) -> usize {
        self.s.len()
    }

    pub fn flatten(&self) -> Vec<Entry> {
        let mut out = vec![match self.iota {
            ExtNat::Fin(v) => Entry::Num(BigRational::from_integer(BigInt::from(v))),
            ExtNat::Inf => Entry::Inf,
        }];
        for (k, s) in self.s.iter().enumerate() {
            if k > 0 {
                out.push(Entry::Num(self.nu[k - 1].clone()));
            }
            out.push(Entry::Num(BigRational::from_integer(BigInt::from(*s))));
        }
        match self.terminal {
            Terminal::Zero => out.push(Entry::Num(BigRational::zero())),
            Terminal::Infinity => out.push(Entry::Inf),
            Terminal::None => {}
        }
        out
    }

    /// Value with terminal `mu` attached as a final tiebreaker.
    pub fn with_mu(&self) -> (Vec<Entry>, Option<BigRational>) {
        (self.flatten(), self.mu_final.clone())
    }
}

impl PartialEq for InvValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for InvValue {}

impl std::hash::Hash for InvValue {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.flatten().hash(state);
    }
}

impl Ord for InvValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.flatten().cmp(&other.flatten())
    }
}

impl PartialOrd for InvValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for InvValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut groups: Vec<String> = Vec::new();
        for (k, s) in self.s.iter().enumerate() {
            let head = if k == 0 { self.iota.to_string() } else { fmt_rat(&self.nu[k - 1]) };
            groups.push(format!("{head},{s}"));
        }
        match self.terminal {
            Terminal::Zero => groups.push("0".into()),
            Terminal::Infinity => groups.push("inf".into()),
            Terminal::None => groups.push(self.iota.to_string()),
        }
        write!(f, "({})", groups.join("; "))?;
        if let Some(mu) = &self.mu_final {
            write!(f, " mu={}", fmt_rat(mu))?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed invariant {0:?}")]
pub struct InvParseError(pub String);

fn parse_rat(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            let q = BigRational::new(n, d);
            (!q.is_negative()).then_some(q)
        }
        None => {
            let n: BigInt = s.parse().ok()?;
            (!n.is_negative()).then(|| BigRational::from_integer(n))
        }
    }
}

fn parse_count(s: &str) -> Option<usize> {
    let s = s.trim();
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

impl std::str::FromStr for InvValue {
    type Err = InvParseError;
    fn from_str(src: &str) -> Result<Self, InvParseError> {
        let err = || InvParseError(src.to_string());
        let src_t = src.trim();
        let (body, mu) = match src_t.split_once(" mu=") {
            Some((b, m)) => (b.trim(), Some(parse_rat(m).filter(|q| q.is_positive()).ok_or_else(err)?)),
            None => (src_t, None),
        };
        let inner = body.strip_prefix('(').and_then(|b| b.strip_suffix(')')).ok_or_else(err)?;
        let groups: Vec<&str> = inner.split(';').map(str::trim).collect();
        if groups.len() == 1 {
            let iota = parse_count(groups[0]).ok_or_else(err)?;
            if mu.is_some() {
                return Err(err());
            }
            return Ok(InvValue {
                iota: ExtNat::Fin(iota as u64),
                s: Vec::new(),
                nu: Vec::new(),
                terminal: Terminal::None,
                mu_final: None,
            });
        }
        let mut iota = ExtNat::Fin(0);
        let mut s = Vec::new();
        let mut nu = Vec::new();
        for (k, g) in groups[..groups.len() - 1].iter().enumerate() {
            let (a, b) = g.split_once(',').ok_or_else(err)?;
            if k == 0 {
                let v = parse_count(a).ok_or_else(err)?;
                iota = ExtNat::Fin(v as u64);
            } else {
                let q = parse_rat(a).filter(|q| q.is_positive()).ok_or_else(err)?;
                nu.push(q);
            }
            s.push(parse_count(b).ok_or_else(err)?);
        }
        let terminal = match *groups.last().unwrap() {
            "0" => Terminal::Zero,
            "inf" => Terminal::Infinity,
            _ => return Err(err()),
        };
        if (terminal == Terminal::Zero) != mu.is_some() {
            return Err(err());
        }
        Ok(InvValue { iota, s, nu, terminal, mu_final: mu })
    }
}

/// `inv` extended by the divisor incidence word in creation order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExtInv {
    pub base: InvValue,
    pub j_word: Vec<u8>,
}

impl Ord for ExtInv {
    fn cmp(&self, other: &Self) -> Ordering {
        compare(self, other)
    }
}

impl PartialOrd for ExtInv {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic order: base value first, then the history word.
pub fn compare(a: &ExtInv, b: &ExtInv) -> Ordering {
    a.base.cmp(&b.base).then_with(|| a.j_word.cmp(&b.j_word))
}

/// Data recorded at one level of the construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelTrace {
    pub r: usize,
    /// Birth year of the truncation ending in `nu_r`.
    pub birth: usize,
    /// Divisor ids of the block `E^r`.
    pub block: Vec<usize>,
    /// Contact hypersurface `N_r`.
    pub contact: Option<Contact>,
    /// Birth year of the truncation ending in `s_r`.
    pub birth_inv_r: usize,
    /// Divisors factored into the companion monomial, with `mu_{r+1,H}`.
    pub factored: Vec<(usize, Divisor, BigRational)>,
    /// `mu_{r+1}`; `None` is infinity.
    pub mu: Option<BigRational>,
    /// `nu_{r+1}` before the modification of the EV variants.
    pub nu_raw: Option<BigRational>,
    pub nu: Option<BigRational>,
    pub companion: FracMono,
    pub presentation: Presentation,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InvTrace {
    pub levels: Vec<LevelTrace>,
}

/// Result of one evaluation.
#[derive(Clone, Debug)]
pub struct InvResult {
    pub ext: ExtInv,
    pub trace: InvTrace,
}

fn entry_prefix_eq(full: &[Entry], prefix: &[Entry]) -> bool {
    full.len() >= prefix.len() && full[..prefix.len()] == *prefix
}

/// Earliest year in the history of `(chart, s)` at which the truncated
/// invariant equals `prefix`, the truncation ending in `nu_r` or, when
/// `with_s` is set, in `s_r`. Values only decrease along the history, so
/// the walk stops at the first image whose own birth of the same
/// truncation is recorded.
fn birth_year(
    t: &Tower,
    chart: ChartId,
    s: StratumSpec,
    prefix: &[Entry],
    r: usize,
    with_s: bool,
) -> Result<usize, InvError> {
    let (mut c, mut st) = (chart, s);
    loop {
        let (p, ps) = match t.image(c, st) {
            None => return Ok(t.chart(c).year),
            Some(x) => x,
        };
        let prev = compute_inv(t, p, ps)?;
        if !entry_prefix_eq(&prev.ext.base.flatten(), prefix) {
            return Ok(t.chart(c).year);
        }
        if let Some(l) = prev.trace.levels.iter().find(|l| l.r == r) {
            return Ok(if with_s { l.birth_inv_r } else { l.birth });
        }
        c = p;
        st = ps;
    }
}

fn num(q: &BigRational) -> Entry {
    Entry::Num(q.clone())
}

fn int_entry(k: usize) -> Entry {
    Entry::Num(BigRational::from_integer(BigInt::from(k)))
}

/// Invariant at the generic point of stratum `s` of `chart`, memoized.
pub fn compute_inv(t: &Tower, chart: ChartId, s: StratumSpec) -> Result<Rc<InvResult>, InvError> {
    if let Some(r) = t.memo_get(chart, s) {
        return r;
    }
    let r = compute_inv_uncached(t, chart, s).map(Rc::new);
    t.memo_put(chart, s, r.clone());
    r
}

/// Order of the tracked transform at `s`; zero when it is a unit or
/// identically zero.
pub fn iota_at(t: &Tower, chart: ChartId, s: &StratumSpec) -> u64 {
    match t.chart(chart).gens_weak.iter().map(|g| g.order_at_stratum(s)).min() {
        Some(ExtNat::Fin(v)) => v,
        _ => 0,
    }
}

fn compute_inv_uncached(t: &Tower, chart: ChartId, s: StratumSpec) -> Result<InvResult, InvError> {
    let c = t.chart(chart);
    let variant = t.variant;
    let gens = &c.gens_weak;
    let j_word = t.j_word(chart, &s);
    let mut value = InvValue::unit();
    let iota_v = iota_at(t, chart, &s);
    if iota_v == 0 {
        return Ok(InvResult { ext: ExtInv { base: value, j_word }, trace: InvTrace::default() });
    }
    value.iota = ExtNat::Fin(iota_v);
    let through: BTreeMap<usize, Divisor> =
        c.divisors.iter().filter(|(&v, _)| s.is_zero(v)).map(|(&v, &id)| (v, t.divisor(id))).collect();
    let iota_q = BigRational::from_integer(BigInt::from(iota_v));
    let marked: Vec<MarkedFn> =
        gens.iter().filter(|g| !g.is_zero()).map(|g| MarkedFn::new(g.clone(), iota_q.clone())).collect();
    let mut pres = Presentation::new(t.n(), marked, BTreeMap::new());
    let mut prefix = vec![int_entry(iota_v as usize)];
    let mut remaining = through.clone();
    let mut trace = InvTrace::default();
    let codim = s.codim() as usize;
    let mut r = 0usize;
    let mut e_r = iota_v.to_u64().unwrap_or(u64::MAX);
    loop {
        r += 1;
        if r > codim.max(1) {
            return Err(InvError::Internal(format!("more than {codim} levels")));
        }
        let birth = birth_year(t, chart, s, &prefix, r, false)?;
        let block: BTreeMap<usize, Divisor> =
            remaining.iter().filter(|(_, d)| d.birth_year <= birth).map(|(&v, &d)| (v, d)).collect();
        for v in block.keys() {
            remaining.remove(v);
        }
        value.s.push(block.len());
        prefix.push(int_entry(block.len()));
        let birth_inv_r = if variant.villamayor_blocks() { birth_year(t, chart, s, &prefix, r, true)? } else { birth };
        let exc: BTreeMap<usize, Divisor> = if variant.villamayor_blocks() {
            remaining.iter().filter(|(_, d)| d.birth_year > birth_inv_r).map(|(&v, &d)| (v, d)).collect()
        } else {
            remaining.clone()
        };
        let avoid = remaining.keys().fold(0, |m, &v| m | bit(v));
        let descended = |exc: &BTreeMap<usize, Divisor>| -> Result<(Contact, Presentation), InvError> {
            let mut p = pres.clone();
            p.exc = exc.clone();
            let (z, mut h) = contact_and_descend(&p, &s, avoid)?;
            for &v in block.keys() {
                let xr = z.restrict(&crate::polyring::Poly::var(t.n(), v));
                if !xr.is_zero() {
                    h.marked.push(MarkedFn::new(xr, BigRational::one()));
                }
            }
            Ok((z, h))
        };
        let (z, h) = descended(&exc)?;
        // fractional parts of mu_H over all remaining divisors
        let frac_pres =
            if variant.ev() && exc.len() != remaining.len() { Some(descended(&remaining)?.1) } else { None };
        pres.exc = exc.clone();
        let mu = mu_min(&h, &s);
        let mut level = LevelTrace {
            r,
            birth,
            block: block.values().map(|d| d.id).collect(),
            contact: Some(z.clone()),
            birth_inv_r,
            factored: Vec::new(),
            mu: mu.clone(),
            nu_raw: None,
            nu: None,
            companion: FracMono::new(),
            presentation: h.clone(),
        };
        let mu = match mu {
            None => {
                value.terminal = Terminal::Infinity;
                trace.levels.push(level);
                break;
            }
            Some(m) => m,
        };
        let mut sum = BigRational::zero();
        for (&v, &d) in &exc {
            let q = mu_along_divisor(&h, v, &s);
            sum += &q;
            level.factored.push((v, d, q));
        }
        let frac = remaining.keys().fold(BigRational::zero(), |acc, &v| {
            let q = mu_along_divisor(frac_pres.as_ref().unwrap_or(&h), v, &s);
            acc + &q - q.floor()
        });
        let nu_raw = &mu - &sum;
        if nu_raw.is_negative() {
            return Err(InvError::Internal(format!("negative residual multiplicity {nu_raw}")));
        }
        let mut nu = nu_raw.clone();
        if variant.ev() && &frac + &nu < BigRational::one() {
            nu = BigRational::zero();
        }
        level.nu_raw = Some(nu_raw);
        level.nu = Some(nu.clone());
        level.companion = companion(&h, &s);
        if !integral_after_factorial(e_r, &nu) {
            t.record_violation(format!(
                "chart {} stratum {}: e_r!*nu not integral (e_r={e_r}, nu={})",
                c.name,
                s.display(&t.vars),
                fmt_rat(&nu)
            ));
        }
        e_r = next_e(e_r, &nu);
        trace.levels.push(level);
        if nu.is_zero() {
            value.terminal = Terminal::Zero;
            value.mu_final = Some(mu);
            break;
        }
        value.nu.push(nu.clone());
        prefix.push(num(&nu));
        pres = residual(&h, &s)?;
    }
    Ok(InvResult { ext: ExtInv { base: value, j_word }, trace })
}

const FACTORIAL_CAP: u64 = 60;

fn factorial(e: u64) -> BigInt {
    (1..=e).fold(BigInt::one(), |a, k| a * BigInt::from(k))
}

fn integral_after_factorial(e: u64, nu: &BigRational) -> bool {
    if e > FACTORIAL_CAP {
        return true;
    }
    (nu * BigRational::from_integer(factorial(e))).is_integer()
}

fn next_e(e: u64, nu: &BigRational) -> u64 {
    if e > FACTORIAL_CAP {
        return u64::MAX;
    }
    let f = factorial(e);
    let g = (nu * BigRational::from_integer(f.clone())).to_integer();
    f.max(g).to_u64().unwrap_or(u64::MAX)
}

/// Strata of a chart that take part in centre selection.
pub type Eligible<'a> = &'a dyn Fn(&InvValue) -> bool;

/// Components of the maximum locus of `inv^e` among eligible strata,
/// sorted by decreasing extended value.
pub fn max_locus(t: &Tower, chart: ChartId, eligible: Eligible) -> Result<Vec<(StratumSpec, ExtInv)>, InvError> {
    let mut levels: BTreeMap<u64, Vec<StratumSpec>> = BTreeMap::new();
    for s in StratumSpec::all(t.n()) {
        levels.entry(iota_at(t, chart, &s)).or_default().push(s);
    }
    let mut cands: Vec<(StratumSpec, Rc<InvResult>)> = Vec::new();
    for strata in levels.values().rev() {
        for &s in strata {
            let r = compute_inv(t, chart, s)?;
            if eligible(&r.ext.base) {
                cands.push((s, r));
            }
        }
        if !cands.is_empty() {
            break;
        }
    }
    let best = match cands.iter().map(|(_, r)| r.ext.base.clone()).max() {
        None => return Ok(Vec::new()),
        Some(b) => b,
    };
    let top: Vec<StratumSpec> = cands.iter().filter(|(_, r)| r.ext.base == best).map(|(s, _)| *s).collect();
    let comps = crate::presentations::minimal_zero_sets(&top);
    let mut out: Vec<(StratumSpec, ExtInv)> = comps
        .into_iter()
        .map(|s| (s, compute_inv(t, chart, s).map(|r| r.ext.clone())))
        .map(|(s, r)| r.map(|e| (s, e)))
        .collect::<Result<_, _>>()?;
    out.sort_by(|a, b| compare(&b.1, &a.1).then(a.0.zero.cmp(&b.0.zero)));
    Ok(out)
}

/// Recomputes `mu_{r+1,H}` at a child stratum from the image point by the
/// transformation formulas for the Villamayor block and reports mismatches.
pub fn transform_mu_check(
    prev: &InvTrace,
    now: &InvTrace,
    prev_value: &InvValue,
    now_value: &InvValue,
    centre: VarSet,
    fresh: usize,
) -> Vec<String> {
    let mut out = Vec::new();
    let pf = prev_value.flatten();
    let nf = now_value.flatten();
    for (k, lv) in now.levels.iter().enumerate() {
        let r = k + 1;
        let len = 2 * r;
        if pf.len() < len || nf.len() < len || pf[..len] != nf[..len] {
            break;
        }
        let pl = match prev.levels.get(k) {
            Some(p) => p,
            None => break,
        };
        for (_, d, q) in &lv.factored {
            let predicted = if d.id == fresh {
                let mut acc = BigRational::zero();
                for (v, _, kq) in &pl.factored {
                    if centre >> v & 1 == 1 {
                        acc += kq;
                    }
                }
                match &pl.nu_raw {
                    Some(nu) => acc + nu - BigRational::one(),
                    None => continue,
                }
            } else {
                match pl.factored.iter().find(|(_, kd, _)| kd.id == d.id) {
                    Some((_, _, kq)) => kq.clone(),
                    None => {
                        out.push(format!("level {r}: divisor {} not in the previous block", d.id));
                        continue;
                    }
                }
            };
            if &predicted != q {
                out.push(format!(
                    "level {r}: divisor {} has mu_H {} but the transformation formula gives {}",
                    d.id,
                    fmt_rat(q),
                    fmt_rat(&predicted)
                ));
            }
        }
    }
    out
}

/// Subsets `I` minimal with `sum_{l in I} omega_l >= 1`.
pub fn monomial_components(omega: &FracMono, n: usize) -> Vec<VarSet> {
    let support: VarSet = omega.0.iter().filter(|(_, q)| q.is_positive()).fold(0, |m, (&v, _)| m | bit(v));
    let mut hits: Vec<VarSet> = Vec::new();
    for mask in 1..(1u64 << n) {
        let mask = mask as VarSet;
        if mask & !support != 0 {
            continue;
        }
        let total: BigRational = members(mask).map(|v| omega.get(v)).sum();
        if total >= BigRational::one() {
            hits.push(mask);
        }
    }
    hits.iter().copied().filter(|&m| !hits.iter().any(|&o| o != m && o & m == o)).collect()
}
