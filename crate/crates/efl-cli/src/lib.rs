//! The `efl` command line: instance generation, coloring, verification,
//! exact search, reordering, nibble simulation and benchmarking.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use efl_core::extremal::extremal_color;
use efl_core::finish::{exact_chromatic_index, ExactConfig, ExactError};
use efl_core::generators::{generate, FamilySpec, SizeLaw};
use efl_core::greedy::{dsatur_line, first_fit};
use efl_core::hypercore::{verify_coloring, EdgeColoring, Hierarchy, LinearHypergraph};
use efl_core::nibble::{nibble_color, pseudorandom_matching, NibbleParams, PrConfig};
use efl_core::ordering::{
    audit_fwd_inequalities, check_outcome, default_iter_cap, reorder, size_order, ReorderOutcome,
};
use efl_core::pipeline::{efl_color, stability_color, sublinear_color};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "efl", about = "Edge coloring of linear hypergraphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    ProjectivePlane,
    Degenerate,
    Complete,
    RandomLinear,
    UniformNearRegular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Pipeline,
    Greedy,
    Dsatur,
    Extremal,
    Exact,
    Stability,
    Sublinear,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Pipeline => "pipeline",
            Algo::Greedy => "greedy",
            Algo::Dsatur => "dsatur",
            Algo::Extremal => "extremal",
            Algo::Exact => "exact",
            Algo::Stability => "stability",
            Algo::Sublinear => "sublinear",
        }
    }
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Write an instance in `.lhg` text form.
    Gen {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        /// Size law such as `2:3,3:1` (random-linear).
        #[arg(long, default_value = "2:1,3:1")]
        sizes: String,
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        kappa: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Color an instance; writes the coloring as JSON.
    Color {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Hierarchy profile as JSON; the desk-scale default otherwise.
        #[arg(long)]
        hier: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
    },
    /// Check a coloring against an instance.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        coloring: PathBuf,
    },
    /// Exact chromatic index by branch and bound.
    Exact {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 24)]
        limit: usize,
        #[arg(long, default_value_t = 50_000_000)]
        budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the reordering procedure and audit its postconditions.
    Order {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long)]
        iter_cap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pseudorandom matching and nibble statistics on a near-regular
    /// uniform instance.
    NibbleSim {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long, default_value_t = 60)]
        d: usize,
        #[arg(long, default_value_t = 0.05)]
        kappa: f64,
        #[arg(long, default_value_t = 0.2)]
        gamma: f64,
        #[arg(long, default_value_t = 10)]
        trials: u64,
        /// Colors for the nibble run; 0 skips it.
        #[arg(long, default_value_t = 0)]
        colors: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Color families over seeds; CSV `family,n,m,algo,seed,colors,proper,wall_ms`.
    Bench {
        /// Comma list of `name:param`, e.g. `projective-plane:3,random-linear:300`.
        #[arg(long)]
        families: String,
        /// Comma list of seeds or a range `a..b`.
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value = "pipeline,dsatur")]
        algos: String,
        /// Write 0 in the wall_ms column so output is reproducible.
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Fail(i32, String);

fn usage(msg: impl Into<String>) -> Fail {
    Fail(EXIT_USAGE, msg.into())
}

type Res = Result<(), Fail>;

/// Runs the command line with the process's stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut io::stdout().lock(), &mut io::stderr().lock())
}

/// Runs the command line, writing primary output to `out` and diagnostics to
/// `err`. Returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let res = match cli.cmd {
        Cmd::Gen { family, q, n, m, sizes, r, d, kappa, seed, out: path } => {
            cmd_gen(family, q, n, m, &sizes, r, d, kappa, seed, path.as_deref(), out)
        }
        Cmd::Color { algo, input, seed, hier, report, out: path, eta, eps } => {
            cmd_color(algo, &input, seed, hier.as_deref(), report.as_deref(), path.as_deref(), eta, eps, out, err)
        }
        Cmd::Verify { input, coloring } => cmd_verify(&input, &coloring, out),
        Cmd::Exact { input, limit, budget, out: path } => cmd_exact(&input, limit, budget, path.as_deref(), out),
        Cmd::Order { input, tau, k, iter_cap, out: path } => cmd_order(&input, tau, k, iter_cap, path.as_deref(), out),
        Cmd::NibbleSim { n, r, d, kappa, gamma, trials, colors, seed, out: path } => {
            cmd_nibble(n, r, d, kappa, gamma, trials, colors, seed, path.as_deref(), out)
        }
        Cmd::Bench { families, seeds, algos, no_timing, out: path } => {
            cmd_bench(&families, &seeds, &algos, no_timing, path.as_deref(), out)
        }
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Res {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(|e| usage(e.to_string())),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn read_instance(p: &Path) -> Result<LinearHypergraph, Fail> {
    let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
    LinearHypergraph::from_lhg(&text, false).map_err(|e| usage(format!("{}: {e}", p.display())))
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, Fail> {
    v.ok_or_else(|| usage(format!("--{flag} is required here")))
}

fn family_spec(
    family: Family,
    q: Option<usize>,
    n: Option<usize>,
    m: Option<usize>,
    sizes: &str,
    r: usize,
    d: Option<usize>,
    kappa: f64,
    seed: Option<u64>,
) -> Result<FamilySpec, Fail> {
    Ok(match family {
        Family::ProjectivePlane => FamilySpec::ProjectivePlane { q: need(q, "q")? },
        Family::Degenerate => FamilySpec::Degenerate { n: need(n, "n")? },
        Family::Complete => FamilySpec::Complete { n: need(n, "n")? },
        Family::RandomLinear => FamilySpec::RandomLinear {
            n: need(n, "n")?,
            sizes: SizeLaw::parse(sizes).map_err(usage)?,
            m: need(m, "m")?,
            seed: need(seed, "seed")?,
        },
        Family::UniformNearRegular => {
            FamilySpec::UniformNearRegular { n: need(n, "n")?, r, d: need(d, "d")?, kappa, seed: need(seed, "seed")? }
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    family: Family,
    q: Option<usize>,
    n: Option<usize>,
    m: Option<usize>,
    sizes: &str,
    r: usize,
    d: Option<usize>,
    kappa: f64,
    seed: Option<u64>,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Res {
    let spec = family_spec(family, q, n, m, sizes, r, d, kappa, seed)?;
    let h = generate(&spec).map_err(|e| usage(e.to_string()))?;
    emit(path, &h.to_lhg(), out)
}

#[derive(Serialize)]
struct SimpleReport {
    algo: &'static str,
    n: usize,
    m: usize,
    colors: usize,
    proper: bool,
}

fn load_hier(p: Option<&Path>) -> Result<Hierarchy, Fail> {
    let Some(p) = p else { return Ok(Hierarchy::default()) };
    let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
    let hier: Hierarchy = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
    hier.validate().map_err(|e| usage(format!("hierarchy: {e}")))?;
    Ok(hier)
}

/// Colors `h` with `algo`, returning the coloring and a JSON report.
fn color_with(
    h: &LinearHypergraph,
    algo: Algo,
    seed: Option<u64>,
    hier: &Hierarchy,
    eta: f64,
    eps: f64,
) -> Result<(EdgeColoring, String), Fail> {
    let simple = |col: &EdgeColoring| {
        to_json(&SimpleReport {
            algo: algo.name(),
            n: h.n(),
            m: h.m(),
            colors: col.num_colors_used(),
            proper: verify_coloring(h, col).is_ok(),
        })
    };
    let col = match algo {
        Algo::Pipeline => {
            let seed = need(seed, "seed")?;
            let (col, rep) = efl_color(h, hier, seed);
            return Ok((col, to_json(&rep)));
        }
        Algo::Stability => {
            let (col, rep) = stability_color(h, hier).map_err(|e| usage(e.to_string()))?;
            return Ok((col, to_json(&rep)));
        }
        Algo::Sublinear => {
            let (col, rep) = sublinear_color(h, eta, eps).map_err(|e| usage(e.to_string()))?;
            return Ok((col, to_json(&rep)));
        }
        Algo::Greedy => first_fit(h, &size_order(h)),
        Algo::Dsatur => dsatur_line(h).0,
        Algo::Extremal => extremal_color(h, hier.delta).map_err(|e| usage(e.to_string()))?,
        Algo::Exact => exact_chromatic_index(h, &ExactConfig::default()).map_err(|e| usage(e.to_string()))?.coloring,
    };
    let rep = simple(&col);
    Ok((col, rep))
}

#[allow(clippy::too_many_arguments)]
fn cmd_color(
    algo: Algo,
    input: &Path,
    seed: Option<u64>,
    hier: Option<&Path>,
    report: Option<&Path>,
    path: Option<&Path>,
    eta: f64,
    eps: f64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Res {
    let h = read_instance(input)?;
    let hier = load_hier(hier)?;
    let (col, rep) = color_with(&h, algo, seed, &hier, eta, eps)?;
    emit(path, &(col.to_json() + "\n"), out)?;
    if let Some(r) = report {
        emit(Some(r), &rep, out)?;
    }
    match verify_coloring(&h, &col) {
        Ok(()) => {
            let _ = writeln!(err, "{} colors on n = {}", col.num_colors_used(), h.n());
            Ok(())
        }
        Err(v) => Err(Fail(EXIT_VERIFY, format!("improper coloring: {v}"))),
    }
}

fn cmd_verify(input: &Path, coloring: &Path, out: &mut dyn Write) -> Res {
    let h = read_instance(input)?;
    let text = fs::read_to_string(coloring).map_err(|e| usage(format!("{}: {e}", coloring.display())))?;
    let col = EdgeColoring::from_json(&text).map_err(|e| usage(format!("{}: {e}", coloring.display())))?;
    match verify_coloring(&h, &col) {
        Ok(()) => emit(None, &format!("proper: {} colors, n = {}\n", col.num_colors_used(), h.n()), out),
        Err(v) => Err(Fail(EXIT_VERIFY, v.to_string())),
    }
}

#[derive(Serialize)]
struct ExactOut {
    chromatic_index: usize,
    lower_bound: usize,
    upper_bound: usize,
    n: usize,
    coloring: EdgeColoring,
}

fn cmd_exact(input: &Path, limit: usize, budget: u64, path: Option<&Path>, out: &mut dyn Write) -> Res {
    let h = read_instance(input)?;
    match exact_chromatic_index(&h, &ExactConfig { limit, node_budget: budget }) {
        Ok(r) => emit(
            path,
            &to_json(&ExactOut {
                chromatic_index: r.chromatic_index,
                lower_bound: r.lower_bound,
                upper_bound: r.upper_bound,
                n: h.n(),
                coloring: r.coloring,
            }),
            out,
        ),
        Err(e @ ExactError::TooLarge { .. }) => Err(usage(e.to_string())),
        Err(e @ ExactError::BudgetExceeded { .. }) => Err(Fail(EXIT_VERIFY, e.to_string())),
    }
}

#[derive(Serialize)]
struct OrderOut {
    outcome: ReorderOutcome,
    postconditions: Result<(), String>,
    audit_rows: usize,
    audit_failures: Vec<usize>,
}

fn cmd_order(input: &Path, tau: f64, k: f64, cap: Option<usize>, path: Option<&Path>, out: &mut dyn Write) -> Res {
    let h = read_instance(input)?;
    let cap = cap.unwrap_or_else(|| default_iter_cap(&h));
    let outcome = reorder(&h, tau, k, cap).map_err(|e| usage(e.to_string()))?;
    let post = check_outcome(&h, &outcome, tau, k);
    let rows = audit_fwd_inequalities(&h, 0.0, 0.0, tau);
    let failures: Vec<usize> = rows.iter().filter(|r| !r.holds).map(|r| r.edge).collect();
    let ok = post.is_ok();
    emit(
        path,
        &to_json(&OrderOut { outcome, postconditions: post, audit_rows: rows.len(), audit_failures: failures }),
        out,
    )?;
    if ok {
        Ok(())
    } else {
        Err(Fail(EXIT_VERIFY, "reorder postconditions failed".into()))
    }
}

#[derive(Serialize)]
struct NibbleSimOut {
    n: usize,
    m: usize,
    gamma: f64,
    kappa: f64,
    window: (f64, f64),
    uncovered: Vec<f64>,
    in_window: usize,
    trials: u64,
    nibble: Option<NibbleSummary>,
}

#[derive(Serialize)]
struct NibbleSummary {
    colors: usize,
    uncolored: usize,
    mini_rounds: usize,
    checked: usize,
    misses: usize,
}

#[allow(clippy::too_many_arguments)]
fn cmd_nibble(
    n: usize,
    r: usize,
    d: usize,
    kappa: f64,
    gamma: f64,
    trials: u64,
    colors: usize,
    seed: u64,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Res {
    let h = generate(&FamilySpec::UniformNearRegular { n, r, d, kappa, seed }).map_err(|e| usage(e.to_string()))?;
    let all: Vec<usize> = (0..n).collect();
    let cfg = PrConfig { retries: 1, ..PrConfig::new(gamma, kappa) };
    let (lo, hi) = (gamma - 4.0 * kappa, gamma + 4.0 * kappa);
    let mut uncovered = Vec::new();
    for t in 0..trials {
        let frac = match pseudorandom_matching(&h, &cfg, std::slice::from_ref(&all), seed.wrapping_add(t)) {
            Ok(pm) => {
                let mut cov = vec![false; n];
                pm.matching.iter().flat_map(|&e| h.edge(e)).for_each(|&v| cov[v] = true);
                cov.iter().filter(|c| !**c).count() as f64 / n as f64
            }
            Err(efl_core::nibble::NibbleError::StatMiss(stats)) => {
                stats.first().map_or(f64::NAN, |s| s.value / s.size.max(1) as f64)
            }
            Err(e) => return Err(usage(e.to_string())),
        };
        uncovered.push(frac);
    }
    let in_window = uncovered.iter().filter(|&&f| f >= lo - 1e-12 && f <= hi + 1e-12).count();
    let nibble = if colors > 0 {
        let edges: Vec<usize> = (0..h.m()).collect();
        let res = nibble_color(
            &h,
            &edges,
            &vec![Vec::new(); colors],
            std::slice::from_ref(&all),
            std::slice::from_ref(&edges),
            &NibbleParams::new(gamma, kappa),
            seed,
        )
        .map_err(|e| usage(e.to_string()))?;
        Some(NibbleSummary {
            colors,
            uncolored: res.uncolored.len(),
            mini_rounds: res.mini_rounds,
            checked: res.checked,
            misses: res.misses.len(),
        })
    } else {
        None
    };
    let report = NibbleSimOut { n, m: h.m(), gamma, kappa, window: (lo, hi), uncovered, in_window, trials, nibble };
    emit(path, &to_json(&report), out)
}

/// Parses a bench family `name:param`; random families take the seed.
fn bench_instance(spec: &str, seed: u64) -> Result<LinearHypergraph, Fail> {
    let (name, param) = spec.split_once(':').ok_or_else(|| usage(format!("family `{spec}` needs `name:param`")))?;
    let p: usize = param.parse().map_err(|_| usage(format!("bad parameter in `{spec}`")))?;
    let fs = match name {
        "projective-plane" => FamilySpec::ProjectivePlane { q: p },
        "degenerate" => FamilySpec::Degenerate { n: p },
        "complete" => FamilySpec::Complete { n: p },
        "random-linear" => FamilySpec::RandomLinear {
            n: p,
            sizes: SizeLaw::parse("2:3,3:2,4:1,6:0.3").expect("valid law"),
            m: 2 * p,
            seed,
        },
        "uniform-near-regular" => FamilySpec::UniformNearRegular { n: p, r: 3, d: (p / 10).max(1), kappa: 0.1, seed },
        _ => return Err(usage(format!("unknown family `{name}`"))),
    };
    generate(&fs).map_err(|e| usage(format!("{spec}: {e}")))
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Fail> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| usage("bad seed range"))?;
        let b: u64 = b.trim().parse().map_err(|_| usage("bad seed range"))?;
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| usage(format!("bad seed `{x}`")))).collect()
}

/// Worker count from `EFL_THREADS`, defaulting to rayon's choice.
pub fn thread_cap() -> Option<usize> {
    std::env::var("EFL_THREADS").ok().and_then(|v| v.parse().ok()).filter(|&t| t > 0)
}

#[derive(Serialize)]
struct BenchRow {
    family: String,
    n: usize,
    m: usize,
    algo: String,
    seed: u64,
    colors: usize,
    proper: bool,
    wall_ms: u128,
}

fn cmd_bench(
    families: &str,
    seeds: &str,
    algos: &str,
    no_timing: bool,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Res {
    let seeds = parse_seeds(seeds)?;
    let algos: Vec<Algo> = algos
        .split(',')
        .map(|a| Algo::from_str(a.trim(), true).map_err(|_| usage(format!("unknown algo `{a}`"))))
        .collect::<Result<_, _>>()?;
    let mut jobs = Vec::new();
    for fam in families.split(',').map(str::trim) {
        for &seed in &seeds {
            for &algo in &algos {
                jobs.push((fam.to_string(), seed, algo));
            }
        }
    }
    let hier = Hierarchy::default();
    let work = || -> Vec<Result<BenchRow, Fail>> {
        jobs.par_iter()
            .map(|(fam, seed, algo)| {
                let h = bench_instance(fam, *seed)?;
                let t = Instant::now();
                let (col, _) = color_with(&h, *algo, Some(*seed), &hier, 0.1, 0.5)?;
                let wall_ms = if no_timing { 0 } else { t.elapsed().as_millis() };
                Ok(BenchRow {
                    family: fam.clone(),
                    n: h.n(),
                    m: h.m(),
                    algo: algo.name().into(),
                    seed: *seed,
                    colors: col.num_colors_used(),
                    proper: verify_coloring(&h, &col).is_ok(),
                    wall_ms,
                })
            })
            .collect()
    };
    let rows = match thread_cap() {
        Some(t) => {
            rayon::ThreadPoolBuilder::new().num_threads(t).build().map_err(|e| usage(e.to_string()))?.install(work)
        }
        None => work(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut all_proper = true;
    for row in rows {
        let row = row?;
        all_proper &= row.proper;
        w.serialize(&row).map_err(|e| usage(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| usage(e.to_string()))?;
    emit(path, &String::from_utf8(bytes).expect("csv is utf-8"), out)?;
    if all_proper {
        Ok(())
    } else {
        Err(Fail(EXIT_VERIFY, "an improper coloring was produced".into()))
    }
}
