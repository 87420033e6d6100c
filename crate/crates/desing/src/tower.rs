//! Blowup atlas: charts, divisor registry, centre selection, blowing-up,
//! run modes and structural checks.

use crate::invariant::{
    compute_inv, iota_at, max_locus, transform_mu_check, ExtInv, InvError, InvResult, InvValue, Terminal, Variant,
};
use crate::polyring::{bit, members, ExpVec, ExtNat, Poly, StratumSpec, VarSet, MAX_VARS};
use crate::presentations::{Contact, Divisor, PresError};
use num_rational::BigRational;
use num_traits::One;
use serde_json::{json, Value};
use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use std::rc::Rc;
use thiserror::Error;

pub type ChartId = usize;

pub const DEFAULT_CHART_LIMIT: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TowerError {
    #[error("unsupported input: {0}")]
    UnsupportedInput(String),
    #[error(transparent)]
    Inv(#[from] InvError),
    #[error("branch variable {var:?} is not in the centre {centre} of chart {chart}")]
    BranchNotInCentre { chart: String, var: String, centre: String },
    #[error("chart {0} has no centre to blow up")]
    NoCentre(String),
    #[error("chart {chart}: maximum locus through {stratum} is not a coordinate subspace")]
    NonCoordinateCentre { chart: String, stratum: String },
}

impl From<PresError> for TowerError {
    fn from(e: PresError) -> Self {
        TowerError::Inv(InvError::Pres(e))
    }
}

/// Run mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Principalize,
    Embedded,
    Weak,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "principalize" => Ok(Mode::Principalize),
            "embedded" => Ok(Mode::Embedded),
            "weak" => Ok(Mode::Weak),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

/// How a chart arose from its parent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Link {
    Root,
    Blowup {
        centre: VarSet,
        chart_var: usize,
        fresh: usize,
    },
    /// Blowing-up of the strict transform itself, a hypersurface.
    Hypersurface {
        fresh: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartStatus {
    Open,
    Blown,
    Done,
    OverBudget,
}

/// A node of the atlas.
#[derive(Clone, Debug)]
pub struct Chart {
    pub id: ChartId,
    pub name: String,
    pub parent: Option<ChartId>,
    pub link: Link,
    pub year: usize,
    /// Chart variable to divisor id.
    pub divisors: BTreeMap<usize, usize>,
    /// Divisor ids of the lineage in creation order.
    pub history: Vec<usize>,
    pub gens_strict: Vec<Poly>,
    pub gens_weak: Vec<Poly>,
    pub gens_total: Vec<Poly>,
    /// Exceptional monomial with `total = monomial * weak`.
    pub exc_monomial: ExpVec,
    pub children: Vec<ChartId>,
    pub centre: Option<VarSet>,
    /// Extended invariant of the selected centre.
    pub centre_inv: Option<ExtInv>,
    pub status: ChartStatus,
}

/// Registered divisor with its printed label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivisorInfo {
    pub div: Divisor,
    pub label: String,
    pub chart: Option<ChartId>,
}

type Memo = HashMap<(ChartId, VarSet), Result<Rc<InvResult>, InvError>>;

/// The year-indexed chart tree.
pub struct Tower {
    pub vars: Vec<String>,
    pub charts: Vec<Chart>,
    pub divisors: Vec<DivisorInfo>,
    pub variant: Variant,
    pub mode: Mode,
    /// [`Tower::run`] stops expanding once the atlas has this many charts.
    pub chart_limit: usize,
    memo: RefCell<Memo>,
    violations: RefCell<Vec<String>>,
}

/// Outcome of [`Tower::run`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StopCondition {
    pub mode: Mode,
    pub reached: bool,
    pub years: usize,
    pub witness: Vec<String>,
}

impl Tower {
    /// Root chart with the given generators and initial divisors.
    pub fn init(
        gens: Vec<Poly>,
        vars: Vec<String>,
        initial_e: &[usize],
        mode: Mode,
        variant: Variant,
    ) -> Result<Tower, TowerError> {
        let n = vars.len();
        if gens.is_empty() || gens.iter().any(|g| g.is_zero()) {
            return Err(TowerError::UnsupportedInput("zero generator".into()));
        }
        if n == 0 || n > MAX_VARS {
            return Err(TowerError::UnsupportedInput("variable count out of range".into()));
        }
        if gens.iter().any(|g| g.num_terms() > 2) {
            return Err(TowerError::UnsupportedInput("generator with more than two terms".into()));
        }
        if gens.iter().any(|g| g.nvars() != n) {
            return Err(TowerError::UnsupportedInput("generator over a different variable list".into()));
        }
        let mut divisors = Vec::new();
        let mut map = BTreeMap::new();
        for (k, &v) in initial_e.iter().enumerate() {
            if v >= n || map.contains_key(&v) {
                return Err(TowerError::UnsupportedInput("bad initial divisor".into()));
            }
            let id = divisors.len();
            divisors.push(DivisorInfo {
                div: Divisor { id, birth_year: 0 },
                label: format!("E{}", k + 1),
                chart: None,
            });
            map.insert(v, id);
        }
        let history = (0..divisors.len()).collect();
        let root = Chart {
            id: 0,
            name: "U".into(),
            parent: None,
            link: Link::Root,
            year: 0,
            divisors: map,
            history,
            gens_strict: gens.clone(),
            gens_weak: gens.clone(),
            gens_total: gens,
            exc_monomial: ExpVec::zero(n),
            children: Vec::new(),
            centre: None,
            centre_inv: None,
            status: ChartStatus::Open,
        };
        Ok(Tower {
            vars,
            charts: vec![root],
            divisors,
            variant,
            mode,
            chart_limit: DEFAULT_CHART_LIMIT,
            memo: RefCell::new(HashMap::new()),
            violations: RefCell::new(Vec::new()),
        })
    }

    pub fn n(&self) -> usize {
        self.vars.len()
    }

    pub fn chart(&self, id: ChartId) -> &Chart {
        &self.charts[id]
    }

    pub fn divisor(&self, id: usize) -> Divisor {
        self.divisors[id].div
    }

    pub fn chart_by_name(&self, name: &str) -> Option<&Chart> {
        self.charts.iter().find(|c| c.name == name)
    }

    pub(crate) fn memo_get(&self, chart: ChartId, s: StratumSpec) -> Option<Result<Rc<InvResult>, InvError>> {
        self.memo.borrow().get(&(chart, s.zero)).cloned()
    }

    pub(crate) fn memo_put(&self, chart: ChartId, s: StratumSpec, r: Result<Rc<InvResult>, InvError>) {
        self.memo.borrow_mut().insert((chart, s.zero), r);
    }

    pub(crate) fn record_violation(&self, msg: String) {
        self.violations.borrow_mut().push(msg);
    }

    /// Assertion failures recorded so far.
    pub fn violations(&self) -> Vec<String> {
        self.violations.borrow().clone()
    }

    /// Image of the generic point of `s` in the parent chart.
    pub fn image(&self, chart: ChartId, s: StratumSpec) -> Option<(ChartId, StratumSpec)> {
        let c = self.chart(chart);
        let parent = c.parent?;
        let zero = match c.link {
            Link::Blowup { centre, chart_var, .. } => {
                if s.is_zero(chart_var) {
                    (s.zero & !centre) | centre
                } else {
                    s.zero
                }
            }
            _ => s.zero,
        };
        Some((parent, StratumSpec::new(self.n(), zero)))
    }

    /// `(chart, s)` followed by its images back to the root.
    pub fn image_path(&self, chart: ChartId, s: StratumSpec) -> Vec<(ChartId, StratumSpec)> {
        let mut out = vec![(chart, s)];
        let mut cur = (chart, s);
        while let Some(p) = self.image(cur.0, cur.1) {
            out.push(p);
            cur = p;
        }
        out
    }

    /// Divisor incidence word of `s` over the chart's history.
    pub fn j_word(&self, chart: ChartId, s: &StratumSpec) -> Vec<u8> {
        let c = self.chart(chart);
        c.history.iter().map(|&id| c.divisors.iter().any(|(&v, &d)| d == id && s.is_zero(v)) as u8).collect()
    }

    pub fn inv(&self, chart: ChartId, s: StratumSpec) -> Result<Rc<InvResult>, TowerError> {
        Ok(compute_inv(self, chart, s)?)
    }

    pub fn inv_at_origin(&self, chart: ChartId) -> Result<InvValue, TowerError> {
        Ok(self.inv(chart, StratumSpec::origin(self.n()))?.ext.base.clone())
    }

    /// Whether a stratum value takes part in centre selection for a mode
    /// phase.
    fn eligible_for(mode: Mode, phase: u8, v: &InvValue) -> bool {
        let iota = match v.iota {
            ExtNat::Fin(k) => k,
            ExtNat::Inf => return false,
        };
        match mode {
            Mode::Embedded if phase == 1 => iota >= 2,
            Mode::Embedded => iota >= 1 && v.s.first().copied().unwrap_or(0) > 0,
            Mode::Weak | Mode::Principalize => iota >= 1 && *v > InvValue::smooth(),
        }
    }

    /// Centre of the chart's next blowing-up: the top component of the
    /// maximum locus of `inv^e` among eligible strata.
    pub fn select_centre(&self, chart: ChartId) -> Result<Option<(StratumSpec, ExtInv)>, TowerError> {
        let phases: &[u8] = if self.mode == Mode::Embedded { &[1, 2] } else { &[1] };
        for &phase in phases {
            let mode = self.mode;
            let el = move |v: &InvValue| Tower::eligible_for(mode, phase, v);
            let comps = max_locus(self, chart, &el)?;
            if comps.is_empty() {
                continue;
            }
            if comps.len() > 1 && comps[0].1 == comps[1].1 {
                self.record_violation(format!(
                    "chart {}: tie between components {} and {}",
                    self.chart(chart).name,
                    comps[0].0.display(&self.vars),
                    comps[1].0.display(&self.vars)
                ));
            }
            self.check_coordinate_centre(chart, &comps[0].0)?;
            return Ok(Some(comps[0].clone()));
        }
        Ok(None)
    }

    /// Fails unless the maximum locus near the generic point of `s` is the
    /// coordinate subspace `s` itself.
    fn check_coordinate_centre(&self, chart: ChartId, s: &StratumSpec) -> Result<(), TowerError> {
        let res = compute_inv(self, chart, *s)?;
        let contacts: Vec<&Contact> = res.trace.levels.iter().filter_map(|l| l.contact.as_ref()).collect();
        let k = contacts.iter().fold(0, |m, c| m | bit(c.var));
        let vanishes = |p: &Poly| p.terms().iter().all(|(e, _)| e.support() & s.zero != 0);
        let ok = k & !s.zero == 0
            && contacts.iter().all(|c| vanishes(&c.rest))
            && (!matches!(res.ext.base.terminal, Terminal::Infinity) || s.zero == k);
        if ok {
            Ok(())
        } else {
            Err(TowerError::NonCoordinateCentre {
                chart: self.chart(chart).name.clone(),
                stratum: s.display(&self.vars),
            })
        }
    }

    /// Components of the maximum locus, best first.
    pub fn components(&self, chart: ChartId) -> Result<Vec<(StratumSpec, ExtInv)>, TowerError> {
        let phases: &[u8] = if self.mode == Mode::Embedded { &[1, 2] } else { &[1] };
        for &phase in phases {
            let mode = self.mode;
            let el = move |v: &InvValue| Tower::eligible_for(mode, phase, v);
            let comps = max_locus(self, chart, &el)?;
            if !comps.is_empty() {
                return Ok(comps);
            }
        }
        Ok(Vec::new())
    }

    fn child_name(&self, parent: ChartId, var: &str) -> String {
        let p = &self.chart(parent).name;
        if p.contains('_') {
            format!("{p}{var}")
        } else {
            format!("{p}_{var}")
        }
    }

    /// Blows up `centre` in `chart`, creating one child chart per centre
    /// variable, and runs the per-year assertions on every child.
    pub fn blow_up(&mut self, chart: ChartId, centre: VarSet) -> Result<Vec<ChartId>, TowerError> {
        let n = self.n();
        let parent = self.chart(chart).clone();
        let year = parent.year + 1;
        let fresh = self.divisors.len();
        self.divisors.push(DivisorInfo {
            div: Divisor { id: fresh, birth_year: year },
            label: format!("H{year}"),
            chart: Some(chart),
        });
        let mu =
            parent.gens_weak.iter().map(|g| g.order_along(centre)).min().and_then(ExtNat::finite).unwrap_or(0) as u32;
        let mut kids = Vec::new();
        for i in members(centre) {
            let mut weak = Vec::new();
            for g in &parent.gens_weak {
                weak.push(g.blowup_subst(centre, i).divide_exc(i, mu).map_err(PresError::from)?);
            }
            let total: Vec<Poly> = parent.gens_total.iter().map(|g| g.blowup_subst(centre, i)).collect();
            let mono = Poly::monomial(parent.exc_monomial.clone(), BigRational::one()).blowup_subst(centre, i);
            let mut exc_monomial = mono.terms()[0].0.clone();
            exc_monomial.0[i] += mu;
            let mut divisors = parent.divisors.clone();
            divisors.insert(i, fresh);
            let mut history = parent.history.clone();
            history.push(fresh);
            let id = self.charts.len();
            let name = self.child_name(chart, &self.vars[i].clone());
            self.charts.push(Chart {
                id,
                name,
                parent: Some(chart),
                link: Link::Blowup { centre, chart_var: i, fresh },
                year,
                divisors,
                history,
                gens_strict: weak.clone(),
                gens_weak: weak,
                gens_total: total,
                exc_monomial,
                children: Vec::new(),
                centre: None,
                centre_inv: None,
                status: ChartStatus::Open,
            });
            kids.push(id);
        }
        let pc = &mut self.charts[chart];
        pc.children = kids.clone();
        pc.centre = Some(centre);
        pc.status = ChartStatus::Blown;
        let _ = n;
        for &k in &kids {
            self.check_child(k)?;
        }
        Ok(kids)
    }

    /// Final year of principalization: the smooth strict transform itself
    /// becomes a divisor and the weak transform becomes the unit ideal.
    fn blow_up_hypersurface(&mut self, chart: ChartId) -> Result<ChartId, TowerError> {
        let parent = self.chart(chart).clone();
        if parent.gens_weak.len() != 1 {
            return Err(TowerError::UnsupportedInput("final hypersurface year needs one generator".into()));
        }
        let year = parent.year + 1;
        let fresh = self.divisors.len();
        self.divisors.push(DivisorInfo {
            div: Divisor { id: fresh, birth_year: year },
            label: format!("H{year}"),
            chart: Some(chart),
        });
        let mut history = parent.history.clone();
        history.push(fresh);
        let id = self.charts.len();
        let name = self.child_name(chart, "X");
        self.charts.push(Chart {
            id,
            name,
            parent: Some(chart),
            link: Link::Hypersurface { fresh },
            year,
            divisors: parent.divisors.clone(),
            history,
            gens_strict: vec![Poly::one(self.n())],
            gens_weak: vec![Poly::one(self.n())],
            gens_total: parent.gens_total.clone(),
            exc_monomial: parent.exc_monomial.clone(),
            children: Vec::new(),
            centre: None,
            centre_inv: None,
            status: ChartStatus::Done,
        });
        let pc = &mut self.charts[chart];
        pc.children = vec![id];
        pc.status = ChartStatus::Blown;
        Ok(id)
    }

    /// Semicontinuity, strict decrease, total/weak consistency and, for the
    /// Villamayor blocks, the transformation formulas for `mu_H`.
    fn check_child(&self, child: ChartId) -> Result<(), TowerError> {
        let c = self.chart(child);
        let (centre, chart_var, fresh) = match c.link {
            Link::Blowup { centre, chart_var, fresh } => (centre, chart_var, fresh),
            _ => return Ok(()),
        };
        let mono = Poly::monomial(c.exc_monomial.clone(), BigRational::one());
        for (w, t) in c.gens_weak.iter().zip(&c.gens_total) {
            if &mono.mul(w) != t {
                self.record_violation(format!("chart {}: total transform is not monomial times weak", c.name));
            }
        }
        for s in StratumSpec::all(self.n()) {
            let (p, ps) = self.image(child, s).expect("child has parent");
            let (i_now, i_prev) = (iota_at(self, child, &s), iota_at(self, p, &ps));
            if i_now != i_prev || i_now == 0 {
                if i_now > i_prev {
                    self.record_violation(format!(
                        "chart {} stratum {}: order {i_now} exceeds {i_prev} at the image",
                        c.name,
                        s.display(&self.vars)
                    ));
                }
                continue;
            }
            let now = compute_inv(self, child, s)?;
            let prev = compute_inv(self, p, ps)?;
            if now.ext.base > prev.ext.base {
                self.record_violation(format!(
                    "chart {} stratum {}: inv {} exceeds {} at the image",
                    c.name,
                    s.display(&self.vars),
                    now.ext.base,
                    prev.ext.base
                ));
            }
            if !s.is_zero(chart_var) {
                continue;
            }
            let a = now.ext.base.with_mu();
            let b = prev.ext.base.with_mu();
            if a >= b {
                self.record_violation(format!(
                    "chart {} stratum {}: no strict decrease over the centre ({} vs {})",
                    c.name,
                    s.display(&self.vars),
                    now.ext.base,
                    prev.ext.base
                ));
            }
            if self.variant == Variant::V {
                for d in transform_mu_check(&prev.trace, &now.trace, &prev.ext.base, &now.ext.base, centre, fresh) {
                    self.record_violation(format!("chart {} stratum {}: {d}", c.name, s.display(&self.vars)));
                }
            }
        }
        Ok(())
    }

    /// One step for an open chart: blow up its centre, or mark it done.
    pub fn step(&mut self, chart: ChartId) -> Result<Vec<ChartId>, TowerError> {
        match self.select_centre(chart)? {
            Some((s, e)) => {
                self.charts[chart].centre_inv = Some(e);
                self.blow_up(chart, s.zero)
            }
            None => {
                if self.mode == Mode::Principalize && !self.weak_is_unit(chart) {
                    if let Err(msg) = self.leaf_structure_check(chart, &StratumSpec::origin(self.n())) {
                        self.record_violation(format!("chart {}: {msg}", self.chart(chart).name));
                    }
                    return Ok(vec![self.blow_up_hypersurface(chart)?]);
                }
                self.charts[chart].status = ChartStatus::Done;
                Ok(Vec::new())
            }
        }
    }

    fn weak_is_unit(&self, chart: ChartId) -> bool {
        self.chart(chart).gens_weak.iter().any(|g| g.is_unit_constant())
    }

    /// Open leaves in creation order.
    pub fn open_leaves(&self) -> Vec<ChartId> {
        self.charts.iter().filter(|c| c.status == ChartStatus::Open).map(|c| c.id).collect()
    }

    /// Runs every chart until the stop condition or the year budget.
    pub fn run(&mut self, max_years: usize) -> Result<StopCondition, TowerError> {
        let mut queue: VecDeque<ChartId> = self.open_leaves().into();
        while let Some(c) = queue.pop_front() {
            if self.chart(c).status != ChartStatus::Open {
                continue;
            }
            if self.chart(c).year >= max_years || self.charts.len() >= self.chart_limit {
                let sel = self.select_centre(c)?;
                let pending = sel.is_some() || (self.mode == Mode::Principalize && !self.weak_is_unit(c));
                if let Some((s, e)) = sel {
                    self.charts[c].centre = Some(s.zero);
                    self.charts[c].centre_inv = Some(e);
                }
                if pending {
                    self.charts[c].status = ChartStatus::OverBudget;
                } else {
                    self.charts[c].status = ChartStatus::Done;
                }
                continue;
            }
            for k in self.step(c)? {
                queue.push_back(k);
            }
        }
        Ok(self.stop_condition())
    }

    /// Follows one branch: at each chart blows up its centre and continues
    /// in the child named by the next branch variable.
    pub fn run_branch(&mut self, branch: &[usize]) -> Result<Vec<ChartId>, TowerError> {
        let mut path = vec![0];
        let mut cur = 0;
        for &v in branch {
            let (s, e) = match self.select_centre(cur)? {
                Some(x) => x,
                None => return Err(TowerError::NoCentre(self.chart(cur).name.clone())),
            };
            if !s.is_zero(v) {
                return Err(TowerError::BranchNotInCentre {
                    chart: self.chart(cur).name.clone(),
                    var: self.vars[v].clone(),
                    centre: s.display(&self.vars),
                });
            }
            self.charts[cur].centre_inv = Some(e);
            let kids = self.blow_up(cur, s.zero)?;
            cur = kids
                .into_iter()
                .find(|&k| matches!(self.chart(k).link, Link::Blowup { chart_var, .. } if chart_var == v))
                .expect("child for branch variable");
            path.push(cur);
        }
        if let Some((s, e)) = self.select_centre(cur)? {
            let c = &mut self.charts[cur];
            c.centre = Some(s.zero);
            c.centre_inv = Some(e);
        }
        Ok(path)
    }

    pub fn stop_condition(&self) -> StopCondition {
        let over: Vec<String> = self
            .charts
            .iter()
            .filter(|c| matches!(c.status, ChartStatus::OverBudget | ChartStatus::Open))
            .map(|c| c.name.clone())
            .collect();
        let years = self.charts.iter().map(|c| c.year).max().unwrap_or(0);
        StopCondition { mode: self.mode, reached: over.is_empty(), years, witness: over }
    }

    /// Leaves of the tree.
    pub fn leaves(&self) -> Vec<ChartId> {
        self.charts.iter().filter(|c| c.children.is_empty()).map(|c| c.id).collect()
    }

    /// Checks that the weak transform at `s` has the normal form
    /// `x_n, x^theta_1 x_{n-1}, ...` with exceptional monomials of
    /// nondecreasing exponents, and returns the exponents.
    pub fn leaf_structure_check(&self, chart: ChartId, s: &StratumSpec) -> Result<Vec<ExpVec>, String> {
        let c = self.chart(chart);
        let exc: VarSet = c.divisors.keys().fold(0, |m, &v| m | bit(v)) & s.zero;
        structure_check(&c.gens_weak, exc, s)
    }

    /// Trace table of every chart, ordered by year then creation.
    pub fn trace_table(&self) -> String {
        let mut ids: Vec<ChartId> = (0..self.charts.len()).collect();
        ids.sort_by_key(|&i| (self.charts[i].year, i));
        self.table_for(&ids)
    }

    /// Trace table restricted to the given charts.
    pub fn table_for(&self, ids: &[ChartId]) -> String {
        let header = ["Year", "Chart", "Strict transform", "Exceptional divisors", "inv", "Centre"];
        let mut rows: Vec<[String; 6]> = Vec::new();
        for &i in ids {
            let c = self.chart(i);
            let strict: Vec<String> = c.gens_strict.iter().map(|g| g.display(&self.vars)).collect();
            let divs: Vec<String> =
                c.divisors.iter().map(|(&v, &d)| format!("{}:{}", self.vars[v], self.divisors[d].label)).collect();
            let inv = match self.inv_at_origin(i) {
                Ok(v) => v.to_string(),
                Err(e) => format!("error: {e}"),
            };
            let centre = match c.centre {
                Some(z) => StratumSpec::new(self.n(), z).display(&self.vars),
                None => "-".into(),
            };
            rows.push([
                c.year.to_string(),
                c.name.clone(),
                strict.join(", "),
                if divs.is_empty() { "-".into() } else { divs.join(", ") },
                inv,
                centre,
            ]);
        }
        let mut w = header.map(str::len);
        for r in &rows {
            for (k, cell) in r.iter().enumerate() {
                w[k] = w[k].max(cell.len());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> =
                cells.iter().enumerate().map(|(k, c)| format!("{:<width$}", c, width = w[k])).collect();
            format!("| {} |\n", parts.join(" | "))
        };
        let mut out = line(&header.map(String::from));
        let sep: Vec<String> = w.iter().map(|&k| "-".repeat(k)).collect();
        out.push_str(&format!("|-{}-|\n", sep.join("-|-")));
        for r in &rows {
            out.push_str(&line(r));
        }
        out
    }

    /// JSON export `{charts, divisors, years}`.
    pub fn to_json(&self) -> Value {
        let charts: Vec<Value> = self
            .charts
            .iter()
            .map(|c| {
                let divs: serde_json::Map<String, Value> =
                    c.divisors.iter().map(|(&v, &d)| (self.vars[v].clone(), json!(self.divisors[d].label))).collect();
                json!({
                    "id": c.id,
                    "name": c.name,
                    "parent": c.parent,
                    "year": c.year,
                    "vars": self.vars,
                    "divisors": divs,
                    "strict": c.gens_strict.iter().map(|g| g.display(&self.vars)).collect::<Vec<_>>(),
                    "weak": c.gens_weak.iter().map(|g| g.display(&self.vars)).collect::<Vec<_>>(),
                    "total": c.gens_total.iter().map(|g| g.display(&self.vars)).collect::<Vec<_>>(),
                    "inv": self.inv_at_origin(c.id).map(|v| v.to_string()).unwrap_or_default(),
                    "centre": c.centre.map(|z| StratumSpec::new(self.n(), z).display(&self.vars)),
                })
            })
            .collect();
        let divisors: Vec<Value> = self
            .divisors
            .iter()
            .map(|d| json!({"id": d.div.id, "label": d.label, "birth_year": d.div.birth_year, "chart": d.chart}))
            .collect();
        let mut years: BTreeMap<usize, Vec<Value>> = BTreeMap::new();
        for c in &self.charts {
            if let Some(z) = c.centre {
                if !c.children.is_empty() {
                    years.entry(c.year + 1).or_default().push(json!({
                        "chart": c.name,
                        "centre": StratumSpec::new(self.n(), z).display(&self.vars),
                    }));
                }
            }
        }
        let years: Vec<Value> = years.into_iter().map(|(y, cs)| json!({"year": y, "centres": cs})).collect();
        json!({"variant": self.variant.name(), "charts": charts, "divisors": divisors, "years": years})
    }

    /// Graphviz export of the chart tree.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph tower {\n");
        for c in &self.charts {
            let g: Vec<String> = c.gens_strict.iter().map(|g| g.display(&self.vars)).collect();
            let _ = writeln!(out, "  c{} [label=\"{}\\n{}\"];", c.id, c.name, g.join(", "));
        }
        for c in &self.charts {
            if let Some(p) = c.parent {
                let label = match c.link {
                    Link::Blowup { chart_var, .. } => self.vars[chart_var].clone(),
                    _ => "X".into(),
                };
                let _ = writeln!(out, "  c{p} -> c{} [label=\"{label}\"];", c.id);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Shape check behind [`Tower::leaf_structure_check`].
pub fn structure_check(gens: &[Poly], exc: VarSet, s: &StratumSpec) -> Result<Vec<ExpVec>, String> {
    let n = s.n;
    let mut rest: Vec<Poly> = gens.iter().filter(|g| !g.is_zero()).cloned().collect();
    if rest.iter().any(|g| g.order_at_stratum(s) == ExtNat::Fin(0)) {
        return Ok(Vec::new());
    }
    let mut used: VarSet = 0;
    let mut thetas: Vec<ExpVec> = Vec::new();
    let mut first = true;
    while !rest.is_empty() {
        let mut best: Option<(usize, usize, ExpVec, Contact)> = None;
        for (k, g) in rest.iter().enumerate() {
            for v in members(s.zero & !exc & !used) {
                if let Some((theta, z)) = leading_shape(g, v, exc, s) {
                    if first && theta.degree() > 0 {
                        continue;
                    }
                    let better = match &best {
                        None => true,
                        Some((_, _, t, _)) => theta.degree() < t.degree(),
                    };
                    if better {
                        best = Some((k, v, theta, z));
                    }
                }
            }
        }
        let (k, v, theta, z) = best.ok_or_else(|| "generator outside the normal form".to_string())?;
        if !first {
            if let Some(prev) = thetas.last() {
                if !(0..n).all(|i| prev.get(i) <= theta.get(i)) {
                    return Err("exponents are not nondecreasing".into());
                }
            }
            thetas.push(theta);
        }
        first = false;
        used |= bit(v);
        rest.remove(k);
        rest = rest.iter().map(|g| z.restrict(g)).filter(|g| !g.is_zero()).collect();
        if rest.iter().any(|g| g.order_at_stratum(s) == ExtNat::Fin(0)) {
            return Err("a generator becomes a unit on the contact subspace".into());
        }
    }
    Ok(thetas)
}

/// `g = c * x^theta * v * u + (terms free of v)` with `x^theta` exceptional
/// and `u` a unit at `s`; returns `theta` and the hypersurface `v = ...`.
fn leading_shape(g: &Poly, v: usize, exc: VarSet, s: &StratumSpec) -> Option<(ExpVec, Contact)> {
    let with: Vec<_> = g.terms().iter().filter(|(e, _)| e.get(v) > 0).collect();
    let without: Vec<_> = g.terms().iter().filter(|(e, _)| e.get(v) == 0).collect();
    if with.len() != 1 {
        return None;
    }
    let (e, c) = with[0];
    if e.get(v) != 1 {
        return None;
    }
    let mut u = e.clone();
    u.0[v] = 0;
    let zero_part = u.restricted(s.zero);
    if zero_part.support() & !exc != 0 {
        return None;
    }
    let theta = zero_part;
    if !without.is_empty() && theta.degree() > 0 {
        let m = Poly::from_terms(s.n, without.iter().map(|(e, c)| (e.clone(), c.clone())).collect());
        if m.divide_mono(&theta).is_err() {
            return None;
        }
    }
    let unit = Poly::monomial(u, c.clone());
    let rest = Poly::from_terms(s.n, without.iter().map(|(e, c)| (e.clone(), -c.clone())).collect());
    Some((theta, Contact { var: v, unit, rest }))
}

/// Parses a comma-separated variable list into indices.
pub fn var_indices(list: &[&str], vars: &[String]) -> Result<Vec<usize>, TowerError> {
    list.iter()
        .map(|name| {
            vars.iter()
                .position(|v| v == name.trim())
                .ok_or_else(|| TowerError::UnsupportedInput(format!("unknown variable {name:?}")))
        })
        .collect()
}

/// Terminal kind at a chart origin, for reports.
pub fn origin_terminal(t: &Tower, chart: ChartId) -> Option<Terminal> {
    t.inv_at_origin(chart).ok().map(|v| v.terminal)
}
