use clap::{ArgGroup, Parser};
use desing::invariant::Variant;
use desing::tower::{Mode, DEFAULT_CHART_LIMIT};
use desing_cli::{fixture, order_report, parse_sweep, run, CliError, Format, Input, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Resolution of singularities of binomial-class ideals by blowing-up.
#[derive(Parser, Debug)]
#[command(name = "desing", version)]
#[command(group(ArgGroup::new("source").required(true).args(["ideal", "input", "family"])))]
struct Args {
    /// Comma-separated generators, e.g. "z^3*w^2 - x^2*y^3".
    #[arg(long)]
    ideal: Option<String>,
    /// File with one generator per line; `#` starts a comment line.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generator template with exponents in d, e.g. "z^d*w^(d-1) - x^(d-1)*y^d".
    #[arg(long)]
    family: Option<String>,
    /// Family parameter.
    #[arg(long)]
    d: Option<i64>,
    /// Variable order, comma-separated.
    #[arg(long, value_delimiter = ',')]
    vars: Option<Vec<String>>,
    /// Variables carrying initial exceptional divisors.
    #[arg(long = "E", value_delimiter = ',')]
    exc: Vec<String>,
    #[arg(long, default_value = "bm", value_parser = ["bm", "v", "ev-bm", "ev-v"])]
    variant: String,
    #[arg(long, default_value = "embedded", value_parser = ["principalize", "embedded", "weak"])]
    mode: String,
    /// Year budget; defaults to 12d for families.
    #[arg(long)]
    max_years: Option<usize>,
    #[arg(long, default_value = "table", value_parser = ["table", "json", "dot"])]
    format: String,
    /// Golden table to compare the trace table against.
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Range d1..d2 of family parameters.
    #[arg(long)]
    sweep: Option<String>,
    /// Print the order-drop report instead of the trace.
    #[arg(long)]
    sweep_report: bool,
    /// Order threshold of the drop report; defaults to d for families.
    #[arg(long)]
    drop_order: Option<u64>,
    /// Follow one branch, e.g. "w,y,x,w^(d-2),(w,x)^2".
    #[arg(long)]
    branch: Option<String>,
    /// Stop expanding once the atlas has this many charts.
    #[arg(long, default_value_t = DEFAULT_CHART_LIMIT)]
    chart_limit: usize,
}

fn config(args: &Args, d: Option<i64>) -> Result<RunConfig, CliError> {
    let input = match (&args.ideal, &args.input, &args.family) {
        (Some(s), _, _) => Input::Ideal(s.clone()),
        (_, Some(p), _) => Input::File(p.clone()),
        (_, _, Some(f)) => {
            let d = d.ok_or_else(|| CliError::Usage("--family needs --d or --sweep".into()))?;
            Input::Family { template: f.clone(), d }
        }
        _ => return Err(CliError::Usage("one of --ideal, --input, --family is required".into())),
    };
    if args.family.is_none() && (args.d.is_some() || args.sweep.is_some()) {
        return Err(CliError::Usage("--d and --sweep need --family".into()));
    }
    let mut cfg = RunConfig::new(input);
    cfg.vars = args.vars.clone();
    cfg.exc = args.exc.clone();
    cfg.variant = args.variant.parse::<Variant>().map_err(CliError::Usage)?;
    cfg.mode = args.mode.parse::<Mode>().map_err(CliError::Usage)?;
    cfg.max_years = args.max_years;
    cfg.format = args.format.parse::<Format>().map_err(CliError::Usage)?;
    cfg.branch = args.branch.clone();
    cfg.chart_limit = args.chart_limit;
    Ok(cfg)
}

fn one(args: &Args, d: Option<i64>, sweep: bool) -> Result<bool, CliError> {
    let cfg = config(args, d)?;
    if args.sweep_report {
        let r = order_report(&cfg, args.drop_order)?;
        print!("{}", r.text);
        return Ok(r.complete);
    }
    let out = run(&cfg)?;
    for v in &out.violations {
        eprintln!("check failed: {v}");
    }
    if sweep {
        println!("d={} years={} reached={}", d.unwrap_or_default(), out.years, out.reached);
    } else {
        print!("{}", out.output);
    }
    if let Some(path) = &args.fixture {
        let golden = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
        let report = fixture::diff(&out.table, &golden);
        if !report.is_empty() {
            for line in &report {
                eprintln!("fixture: {line}");
            }
            return Err(CliError::FixtureMismatch(path.clone()));
        }
    }
    Ok(out.reached)
}

fn main_inner(args: &Args) -> Result<bool, CliError> {
    match &args.sweep {
        Some(s) => {
            let mut all = true;
            for d in parse_sweep(s)? {
                all &= one(args, Some(d), true)?;
            }
            Ok(all)
        }
        None => one(args, args.d, false),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("stop condition not reached within the budget");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
