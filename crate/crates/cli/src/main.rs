//! Batch command-line front end: tabulate kernels, evaluate the operator by
//! any representation, run s-sweeps, and drive the verification suite.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure,
//! 3 verification failure.

use clap::{Args, Parser, Subcommand};
use hyplap::geometry::HyperPoint;
use hyplap::heat::HeatKernel;
use hyplap::kernels::{Kernel, Params, PoissonKernel};
use hyplap::limits::{extrapolate_to_one, sweep_s};
use hyplap::operator::{OperatorContext, QuadratureSpec, TestFunction};
use hyplap::Error as CoreError;
use std::collections::BTreeMap;
use std::io::Write;
use std::process::ExitCode;

mod outfmt;

#[derive(Parser)]
#[command(
    name = "hyplap",
    about = "fractional p-Laplacian on the hyperboloid model",
    version
)]
struct Cli {
    /// Plain-text KEY=VALUE file supplying defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Seed for the randomized verification checks.
    #[arg(long, global = true, default_value_t = 0xA11CE)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ParamArgs {
    /// Dimension n >= 2.
    #[arg(long)]
    n: Option<usize>,
    /// Fractional order s in (0, 1).
    #[arg(long)]
    s: Option<f64>,
    /// Integrability exponent p > 1.
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the singular kernel K(rho) to CSV (rho, K, log_slope).
    Kernel {
        #[command(flatten)]
        params: ParamArgs,
        /// Radial grid start:stop:count.
        #[arg(long, value_name = "A:B:COUNT")]
        rho_grid: Option<String>,
        /// Space the grid geometrically instead of uniformly.
        #[arg(long)]
        log: bool,
    },
    /// Tabulate the Poisson kernel P(rho, y) to CSV (rho, P).
    Poisson {
        #[command(flatten)]
        params: ParamArgs,
        /// Extension height y > 0.
        #[arg(long)]
        y: Option<f64>,
        #[arg(long, value_name = "A:B:COUNT")]
        rho_grid: Option<String>,
        #[arg(long)]
        log: bool,
    },
    /// Tabulate the heat kernel p(t, rho) to CSV (rho, p).
    Heat {
        /// Dimension n >= 1.
        #[arg(long)]
        n: Option<usize>,
        /// Diffusion time t > 0.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_name = "A:B:COUNT")]
        rho_grid: Option<String>,
        #[arg(long)]
        log: bool,
    },
    /// Evaluate the operator at a point by one or all representations (JSON).
    Op {
        #[command(flatten)]
        params: ParamArgs,
        /// Test function: u1 = exp(-d^2), u2 = 1/cosh(d).
        #[arg(long)]
        u: Option<String>,
        /// Representation: singular | semigroup | extension | all.
        #[arg(long)]
        rep: Option<String>,
        /// Geodesic distance of the evaluation point from the pole.
        #[arg(long)]
        r: Option<f64>,
        /// Faster, less accurate quadrature settings.
        #[arg(long)]
        quick: bool,
    },
    /// Sweep s toward 1 and compare with the classical p-Laplacian (CSV).
    Converge {
        /// Dimension n >= 2.
        #[arg(long)]
        n: Option<usize>,
        /// Integrability exponent p > 1.
        #[arg(long)]
        p: Option<f64>,
        /// Test function: u1 | u2.
        #[arg(long)]
        u: Option<String>,
        /// Comma-separated s values.
        #[arg(long)]
        s_grid: Option<String>,
        /// Basepoint distance from the pole.
        #[arg(long)]
        r: Option<f64>,
    },
    /// Run the verification suite; nonzero exit on any failure.
    Verify {
        /// Reduced grids, finishes in well under two minutes.
        #[arg(long)]
        quick: bool,
        /// Run a single check by id (1..=12).
        #[arg(long)]
        only: Option<usize>,
    },
}

fn parse_config(path: &str) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("{path}:{}: expected KEY=VALUE", lineno + 1))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

struct Defaults(BTreeMap<String, String>);

impl Defaults {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| format!("config key {key}: cannot parse {v:?}")),
        }
    }
}

/// start:stop:count, uniform or geometric.
fn parse_grid(spec: &str, log: bool) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid {spec:?} is not start:stop:count"));
    }
    let a: f64 = parts[0].parse().map_err(|_| format!("bad grid start {:?}", parts[0]))?;
    let b: f64 = parts[1].parse().map_err(|_| format!("bad grid stop {:?}", parts[1]))?;
    let count: usize = parts[2].parse().map_err(|_| format!("bad grid count {:?}", parts[2]))?;
    if count < 2 || !(b > a) || (log && !(a > 0.0)) {
        return Err(format!("invalid grid {spec:?}"));
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let f = i as f64 / (count - 1) as f64;
        out.push(if log { a * (b / a).powf(f) } else { a + (b - a) * f });
    }
    Ok(out)
}

fn basepoint(n: usize, r: f64) -> HyperPoint {
    let mut omega = vec![0.0; n];
    omega[0] = 1.0;
    HyperPoint::from_polar(r, &omega)
}

fn test_function(name: &str, n: usize) -> Result<TestFunction, String> {
    match name {
        "u1" => Ok(TestFunction::gauss_bump(HyperPoint::origin(n))),
        "u2" => Ok(TestFunction::inverse_cosh(HyperPoint::origin(n))),
        other => Err(format!("unknown test function {other:?} (expected u1 or u2)")),
    }
}

enum Failure {
    Usage(String),
    Numerical(String),
    Verification,
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Domain(_) | CoreError::Config(_) => Failure::Usage(e.to_string()),
            CoreError::Numerical(_) | CoreError::Range(_) => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<String> for Failure {
    fn from(msg: String) -> Self {
        Failure::Usage(msg)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let defaults = Defaults(match &cli.config {
        Some(path) => parse_config(path)?,
        None => BTreeMap::new(),
    });
    let mut sink = outfmt::Sink::open(cli.out.as_deref())
        .map_err(|e| Failure::Usage(format!("cannot open output: {e}")))?;

    match cli.command {
        Command::Kernel { params, rho_grid, log } => {
            let params = resolve_params(&params, &defaults)?;
            let grid_spec = rho_grid
                .or(defaults.get::<String>("rho-grid")?)
                .unwrap_or_else(|| "0.01:10:200".into());
            let rhos = parse_grid(&grid_spec, log)?;
            let kernel = Kernel::new(params)?;
            let vals: Vec<f64> = rhos
                .iter()
                .map(|&rho| kernel.eval(rho))
                .collect::<Result<_, _>>()
                .map_err(Failure::from)?;
            sink.csv_header(&["rho", "K", "log_slope"]);
            for i in 0..rhos.len() {
                // centered slope of log K against log rho on the grid
                let (lo, hi) = (i.saturating_sub(1), (i + 1).min(rhos.len() - 1));
                let slope = (vals[hi].ln() - vals[lo].ln()) / (rhos[hi].ln() - rhos[lo].ln());
                sink.csv_row(&[rhos[i], vals[i], slope]);
            }
        }
        Command::Poisson { params, y, rho_grid, log } => {
            let params = resolve_params(&params, &defaults)?;
            let y = y
                .or(defaults.get("y")?)
                .ok_or_else(|| "poisson needs --y".to_string())?;
            let grid_spec = rho_grid
                .or(defaults.get::<String>("rho-grid")?)
                .unwrap_or_else(|| "0.01:10:200".into());
            let rhos = parse_grid(&grid_spec, log)?;
            let pk = PoissonKernel::new(params, y)?;
            sink.csv_header(&["rho", "P"]);
            for &rho in &rhos {
                sink.csv_row(&[rho, pk.eval(rho)?]);
            }
        }
        Command::Heat { n, t, rho_grid, log } => {
            let n = n.or(defaults.get("n")?).ok_or_else(|| "heat needs --n".to_string())?;
            let t = t.or(defaults.get("t")?).ok_or_else(|| "heat needs --t".to_string())?;
            let grid_spec = rho_grid
                .or(defaults.get::<String>("rho-grid")?)
                .unwrap_or_else(|| "0:6:121".into());
            let rhos = parse_grid(&grid_spec, log)?;
            let hk = HeatKernel::new(n, t)?;
            sink.csv_header(&["rho", "p"]);
            for &rho in &rhos {
                sink.csv_row(&[rho, hk.eval(rho)?]);
            }
        }
        Command::Op { params, u, rep, r, quick } => {
            let params = resolve_params(&params, &defaults)?;
            let u_name = u.or(defaults.get::<String>("u")?).unwrap_or_else(|| "u2".into());
            let rep = rep.or(defaults.get::<String>("rep")?).unwrap_or_else(|| "all".into());
            let r = r.or(defaults.get("r")?).unwrap_or(1.0);
            let u = test_function(&u_name, params.n)?;
            let x = basepoint(params.n, r);
            let quad = if quick {
                QuadratureSpec::quick_for(&params)
            } else {
                QuadratureSpec::default_for(&params)
            };
            let ctx = OperatorContext::new(&u, &x, params, quad)?;
            let mut records = Vec::new();
            let wanted: Vec<&str> = match rep.as_str() {
                "all" => vec!["singular", "semigroup", "extension"],
                "singular" | "semigroup" | "extension" => vec![rep.as_str()],
                other => return Err(Failure::Usage(format!("unknown representation {other:?}"))),
            };
            for name in wanted {
                let result = match name {
                    "singular" => ctx.singular()?,
                    "semigroup" => ctx.semigroup()?,
                    _ => ctx.extension()?,
                };
                records.push(serde_json::json!({
                    "params": {"n": params.n, "s": params.s, "p": params.p},
                    "u": u_name,
                    "basepoint_r": r,
                    "representation": name,
                    "value": result.value,
                    "err_estimate": result.err_estimate,
                    "diagnostics": result.diagnostics,
                }));
            }
            sink.json(&serde_json::Value::Array(records));
        }
        Command::Converge { n, p, u, s_grid, r } => {
            let n = n.or(defaults.get("n")?).ok_or_else(|| "converge needs --n".to_string())?;
            let p = p.or(defaults.get("p")?).ok_or_else(|| "converge needs --p".to_string())?;
            if n < 2 {
                return Err(Failure::Usage(format!("converge needs n >= 2, got {n}")));
            }
            if !(p > 1.0) {
                return Err(Failure::Usage(format!("converge needs p > 1, got {p}")));
            }
            let u_name = u.or(defaults.get::<String>("u")?).unwrap_or_else(|| "u2".into());
            let r = r.or(defaults.get("r")?).unwrap_or(1.0);
            let grid: Vec<f64> = match s_grid.or(defaults.get::<String>("s-grid")?) {
                Some(spec) => spec
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad s value {t:?}")))
                    .collect::<Result<_, _>>()?,
                None => vec![0.9, 0.95, 0.975, 0.9875, 0.99375],
            };
            let u = test_function(&u_name, n)?;
            let x = basepoint(n, r);
            let records = sweep_s(&u, &x, n, p, &grid)?;
            sink.csv_header(&["s", "value_fractional", "value_classical", "gap", "err"]);
            for rec in &records {
                sink.csv_row(&[rec.s, rec.value_fractional, rec.value_classical, rec.gap, rec.err]);
            }
            if let Ok((limit, err)) = extrapolate_to_one(&records) {
                sink.comment(&format!(
                    "extrapolated s->1 value {limit:.12e} (est err {err:.3e}); classical {:.12e}",
                    records[0].value_classical
                ));
            }
        }
        Command::Verify { quick, only } => {
            let ids: Vec<usize> = match only {
                Some(id) => {
                    if !(1..=12).contains(&id) {
                        return Err(Failure::Usage(format!("check id {id} out of range 1..=12")));
                    }
                    vec![id]
                }
                None => (1..=12).collect(),
            };
            let threads: usize = std::env::var("HYPLAP_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or_else(|| {
                    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
                })
                .max(1);
            let outcomes = run_checks_parallel(&ids, quick, cli.seed, threads);
            let mut all_pass = true;
            for outcome in &outcomes {
                sink.line(&outcome.line());
                all_pass &= outcome.passed;
            }
            let summary = format!(
                "{}/{} checks passed{}",
                outcomes.iter().filter(|o| o.passed).count(),
                outcomes.len(),
                if quick { " (quick grids)" } else { "" }
            );
            sink.line(&summary);
            if !all_pass {
                return Err(Failure::Verification);
            }
        }
    }
    sink.flush().map_err(|e| Failure::Numerical(format!("output write failed: {e}")))?;
    Ok(())
}

/// Run checks on a bounded number of worker threads; results are emitted in
/// check order regardless of completion order.
fn run_checks_parallel(
    ids: &[usize],
    quick: bool,
    seed: u64,
    threads: usize,
) -> Vec<hyplap::verify::CheckOutcome> {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<hyplap::verify::CheckOutcome>>> =
        Mutex::new(vec![None; ids.len()]);
    std::thread::scope(|scope| {
        for _ in 0..threads.min(ids.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= ids.len() {
                    break;
                }
                let outcome = hyplap::verify::run_check(ids[i], quick, seed);
                results.lock().unwrap()[i] = Some(outcome);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|o| o.unwrap()).collect()
}

fn resolve_params(args: &ParamArgs, defaults: &Defaults) -> Result<Params, Failure> {
    let n = args.n.or(defaults.get("n")?).ok_or_else(|| "missing --n".to_string())?;
    let s = args.s.or(defaults.get("s")?).ok_or_else(|| "missing --s".to_string())?;
    let p = args.p.or(defaults.get("p")?).ok_or_else(|| "missing --p".to_string())?;
    Params::new(n, s, p).map_err(Failure::from)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(std::io::stderr(), "usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            let _ = writeln!(std::io::stderr(), "numerical failure: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification) => ExitCode::from(3),
    }
}
