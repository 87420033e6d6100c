//! Front end for the `desing` engine: input assembly, run orchestration,
//! output formats, order-drop reports and golden-table comparison.

pub mod branch;
pub mod family;
pub mod fixture;

use desing::invariant::Variant;
use desing::polyring::{parse_ideal, parse_ideal_infer, ExtNat, ParseError, Poly, StratumSpec};
use desing::tower::{var_indices, ChartId, Mode, Tower, TowerError, DEFAULT_CHART_LIMIT};
use std::fmt::Write as _;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Tower(#[from] TowerError),
    #[error("trace differs from {0}")]
    FixtureMismatch(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Input {
    Ideal(String),
    File(PathBuf),
    Family { template: String, d: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
    Dot,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(Format::Table),
            "json" => Ok(Format::Json),
            "dot" => Ok(Format::Dot),
            _ => Err(format!("unknown format {s:?}")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub input: Input,
    pub vars: Option<Vec<String>>,
    pub exc: Vec<String>,
    pub variant: Variant,
    pub mode: Mode,
    pub max_years: Option<usize>,
    pub format: Format,
    pub branch: Option<String>,
    pub chart_limit: usize,
}

impl RunConfig {
    pub fn new(input: Input) -> RunConfig {
        RunConfig {
            input,
            vars: None,
            exc: Vec::new(),
            variant: Variant::Bm,
            mode: Mode::Embedded,
            max_years: None,
            format: Format::Table,
            branch: None,
            chart_limit: DEFAULT_CHART_LIMIT,
        }
    }

    pub fn d(&self) -> Option<i64> {
        match self.input {
            Input::Family { d, .. } => Some(d),
            _ => None,
        }
    }
}

/// Result of one run.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub output: String,
    pub table: String,
    pub reached: bool,
    pub years: usize,
    pub violations: Vec<String>,
}

const VAR_PRIORITY: [&str; 7] = ["x", "y", "z", "w", "u", "v", "t"];

/// Orders inferred variables as `x, y, z, w, u, v, t`, then alphabetically.
pub fn default_var_order(mut vars: Vec<String>) -> Vec<String> {
    vars.sort_by_key(|v| match VAR_PRIORITY.iter().position(|p| p == v) {
        Some(k) => (k, String::new()),
        None => (VAR_PRIORITY.len(), v.clone()),
    });
    vars
}

/// Ideal source text after family substitution.
pub fn ideal_text(input: &Input) -> Result<String, CliError> {
    match input {
        Input::Ideal(s) => Ok(s.clone()),
        Input::File(p) => {
            let raw = std::fs::read_to_string(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
            let lines: Vec<&str> =
                raw.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
            Ok(lines.join(", "))
        }
        Input::Family { template, d } => {
            if *d < 2 {
                return Err(CliError::Usage("--d must be at least 2".into()));
            }
            family::substitute(template, *d)
        }
    }
}

/// Generators and variable list of the configured input.
pub fn build_ideal(cfg: &RunConfig) -> Result<(Vec<Poly>, Vec<String>), CliError> {
    let text = ideal_text(&cfg.input)?;
    let vars = match &cfg.vars {
        Some(v) => v.clone(),
        None => default_var_order(parse_ideal_infer(&text)?.1),
    };
    if matches!(cfg.input, Input::Family { .. }) && vars.iter().any(|v| v == "d") {
        return Err(CliError::Usage("family parameter d may only occur in exponents".into()));
    }
    Ok((parse_ideal(&text, &vars)?, vars))
}

pub fn build_tower(cfg: &RunConfig) -> Result<Tower, CliError> {
    let (gens, vars) = build_ideal(cfg)?;
    let exc_names: Vec<&str> = cfg.exc.iter().map(String::as_str).collect();
    let exc = var_indices(&exc_names, &vars)?;
    let mut t = Tower::init(gens, vars, &exc, cfg.mode, cfg.variant)?;
    t.chart_limit = cfg.chart_limit;
    Ok(t)
}

fn origin_order(t: &Tower, c: ChartId) -> ExtNat {
    let o = StratumSpec::origin(t.n());
    t.chart(c).gens_strict.iter().map(|g| g.order_at_stratum(&o)).min().unwrap_or(ExtNat::Inf)
}

fn default_max_years(t: &Tower, cfg: &RunConfig) -> usize {
    match cfg.d() {
        Some(d) => 12 * d as usize,
        None => 12 * origin_order(t, 0).finite().unwrap_or(1).max(1) as usize,
    }
}

fn branch_ids(t: &Tower, cfg: &RunConfig, spec: &str) -> Result<Vec<usize>, CliError> {
    let names = branch::expand(spec, cfg.d())?;
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(var_indices(&names, &t.vars)?)
}

/// Runs the configured tower and renders the requested format.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut t = build_tower(cfg)?;
    let (table, reached) = match &cfg.branch {
        Some(spec) => {
            let br = branch_ids(&t, cfg, spec)?;
            let path = t.run_branch(&br)?;
            (t.table_for(&path), true)
        }
        None => {
            let max = cfg.max_years.unwrap_or_else(|| default_max_years(&t, cfg));
            let sc = t.run(max)?;
            (t.trace_table(), sc.reached)
        }
    };
    let output = match cfg.format {
        Format::Table => table.clone(),
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&t.to_json()).expect("json")),
        Format::Dot => t.to_dot(),
    };
    let years = t.charts.iter().map(|c| c.year).max().unwrap_or(0);
    Ok(Outcome { output, table, reached, years, violations: t.violations() })
}

/// Year of the first drop of the origin order below `k` along a branch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DropReport {
    pub text: String,
    pub drop_year: Option<usize>,
    pub complete: bool,
}

/// Order-drop report. Along `--branch` it lists the origin order per
/// year; otherwise it expands every chart whose origin order is at least
/// `k` and reports the deepest year at which the order falls below `k`.
pub fn order_report(cfg: &RunConfig, k: Option<u64>) -> Result<DropReport, CliError> {
    let mut t = build_tower(cfg)?;
    let k = match (k, cfg.d()) {
        (Some(k), _) => k,
        (None, Some(d)) => d as u64,
        (None, None) => origin_order(&t, 0).finite().unwrap_or(0),
    };
    let below = |o: ExtNat| o < ExtNat::Fin(k);
    let mut text = String::new();
    let head = match cfg.d() {
        Some(d) => format!("d={d} variant={} order={k}", cfg.variant.name()),
        None => format!("variant={} order={k}", cfg.variant.name()),
    };
    if let Some(spec) = &cfg.branch {
        let br = branch_ids(&t, cfg, spec)?;
        let path = t.run_branch(&br)?;
        let _ = writeln!(text, "{head} branch");
        let mut drop = None;
        for &c in &path {
            let o = origin_order(&t, c);
            let ch = t.chart(c);
            let _ = writeln!(text, "{:>4}  {:<3}  {}", ch.year, o.to_string(), ch.name);
            if drop.is_none() && ch.year > 0 && below(o) {
                drop = Some(ch.year);
            }
        }
        let _ = match drop {
            Some(y) => writeln!(text, "order drops below {k} in year {y}"),
            None => writeln!(text, "order does not drop below {k} along the branch"),
        };
        return Ok(DropReport { text, drop_year: drop, complete: true });
    }
    let mut per_year: Vec<(usize, usize)> = Vec::new();
    let mut deepest: Option<(usize, String)> = None;
    let mut stack = vec![0];
    let mut complete = true;
    while let Some(c) = stack.pop() {
        let year = t.chart(c).year;
        if per_year.len() <= year {
            per_year.resize(year + 1, (0, 0));
        }
        per_year[year].0 += 1;
        if c != 0 && below(origin_order(&t, c)) {
            per_year[year].1 += 1;
            if deepest.as_ref().is_none_or(|(y, _)| year > *y) {
                deepest = Some((year, t.chart(c).name.clone()));
            }
            continue;
        }
        if t.charts.len() >= cfg.chart_limit {
            complete = false;
            continue;
        }
        stack.extend(t.step(c)?);
    }
    let _ = writeln!(text, "{head} tree");
    let _ = writeln!(text, "year  charts  drops");
    for (y, (n, dr)) in per_year.iter().enumerate() {
        let _ = writeln!(text, "{y:>4}  {n:>6}  {dr:>5}");
    }
    let _ = match &deepest {
        Some((y, name)) => writeln!(text, "deepest drop below {k} in year {y} at {name}"),
        None => writeln!(text, "order does not drop below {k}"),
    };
    if !complete {
        let _ = writeln!(text, "incomplete: chart limit {} reached", cfg.chart_limit);
    }
    Ok(DropReport { text, drop_year: deepest.map(|d| d.0), complete })
}

/// Parses `d1..d2` (inclusive).
pub fn parse_sweep(s: &str) -> Result<std::ops::RangeInclusive<i64>, CliError> {
    let bad = || CliError::Usage(format!("--sweep expects d1..d2, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: i64 = a.trim().parse().map_err(|_| bad())?;
    let b: i64 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn var_priority() {
        let v = default_var_order(vec!["b".into(), "w".into(), "a".into(), "x".into(), "z".into()]);
        assert_eq!(v, ["x", "z", "w", "a", "b"]);
    }

    #[test]
    fn sweep_range() {
        assert_eq!(parse_sweep("5..8").unwrap(), 5..=8);
        assert!(parse_sweep("8..5").is_err());
        assert!(parse_sweep("5-8").is_err());
    }

    #[test]
    fn zero_ideal_is_unsupported() {
        let cfg = RunConfig::new(Input::Ideal("0".into()));
        assert!(matches!(run(&cfg), Err(CliError::Tower(TowerError::UnsupportedInput(_)))));
    }

    #[test]
    fn family_rejects_small_d() {
        let cfg = RunConfig::new(Input::Family { template: "z^d - x^(d-1)".into(), d: 1 });
        assert!(matches!(run(&cfg), Err(CliError::Usage(_))));
    }

    #[test]
    fn branch_report_finds_drop() {
        let mut cfg = RunConfig::new(Input::Ideal("z^2 - x^2*y^3".into()));
        cfg.branch = Some("y,x".into());
        let r = order_report(&cfg, Some(2)).unwrap();
        assert_eq!(r.drop_year, None);
    }
}
