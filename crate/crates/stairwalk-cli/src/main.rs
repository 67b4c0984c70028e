//! Command-line entry point: deterministic, file-based access to every
//! computation in the library.  All numeric output is printed with 17
//! significant digits, LF line endings, and sorted rows, so identical
//! invocations are byte-identical.

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stairwalk::dpp_stats::{
    correlation as dpp_correlation, density_profile, number_variance, IntervalSpec, KernelHandle,
};
use stairwalk::harness::{
    default_window, prop1_convergence, prop2_convergence, prop3_convergence, thm3_convergence,
    variance_saturation, ConvergenceReport,
};
use stairwalk::kernel_finite::{
    em_reference, kernel_equal_spacing, kernel_general, KernelQuery,
};
use stairwalk::kernel_limit::{
    continuous_limit_kernel, extended_sine, johansson_kernel, limit_kernel, LimitParams,
    SaturationParams,
};
use stairwalk::model::{validate, GridPoint, ModelParams, PathConfig, ValidatedModel};
use stairwalk::oracle::Oracle;
use stairwalk::tiling::{paths_to_tiling, render_ascii, render_svg, tiling_to_paths, Tiling};
use stairwalk::Error;

#[derive(Parser)]
#[command(
    name = "stairwalk",
    version,
    about = "Determinantal kernels, limits, and tilings of nonintersecting geometric walks",
    propagate_version = true
)]
struct Cli {
    /// Bound internal parallelism to this many threads
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a model config file
    Validate {
        /// Model config JSON ({"n", "k", "l", "alpha", "beta"})
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a kernel on a batch of queries
    Kernel(KernelArgs),
    /// Diagonal kernel values along one line
    Density(DensityArgs),
    /// Joint correlation (determinant) of a point set
    Correlation(CorrelationArgs),
    /// Number variance of the particle count in an interval
    Variance(VarianceArgs),
    /// Sample path configurations from the exact finite measure
    Sample(SampleArgs),
    /// Convert between path configurations and lozenge tilings, render them
    Tile(TileArgs),
    /// Cross-check kernel correlations against the brute-force oracle
    OracleCheck(OracleCheckArgs),
    /// Run a convergence experiment and emit its report
    Converge {
        #[command(subcommand)]
        experiment: ConvergeCmd,
    },
}

/// Selects which kernel a statistics subcommand evaluates.
#[derive(Args, Clone)]
struct KernelSelect {
    /// finite-general | finite-equal | em | limit | sine-ext | continuous | johansson
    /// (falls back to "kernel" in the config file)
    #[arg(long)]
    kernel: Option<String>,
    /// Model config JSON; may also carry "kernel", "query", "tol", "seed"
    #[arg(long)]
    config: Option<PathBuf>,
    /// Symmetry order k (limit, continuous)
    #[arg(long)]
    k: Option<u32>,
    /// Per-step rates for the limiting kernels, comma separated
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    gamma: Option<Vec<f64>>,
    /// Half-angle c in (0, pi] (sine-ext)
    #[arg(long)]
    half_angle: Option<f64>,
    /// Saturation parameter d (johansson)
    #[arg(long)]
    d: Option<f64>,
    /// Numerical tolerance
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct KernelArgs {
    #[command(flatten)]
    select: KernelSelect,
    /// Query "s1,x1,s2,x2" (repeatable); falls back to "query" in the config
    #[arg(long)]
    query: Vec<String>,
    /// Output path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    select: KernelSelect,
    /// Line index s
    #[arg(long)]
    s: i64,
    #[arg(long)]
    x_min: i64,
    #[arg(long)]
    x_max: i64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelationArgs {
    #[command(flatten)]
    select: KernelSelect,
    /// Point "s,x" (repeatable)
    #[arg(long, required = true)]
    point: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VarianceArgs {
    #[command(flatten)]
    select: KernelSelect,
    #[arg(long)]
    s: i64,
    #[arg(long)]
    lo: i64,
    #[arg(long)]
    hi: i64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    count: usize,
    /// RNG seed; falls back to "seed" in the config, then 0
    #[arg(long)]
    seed: Option<u64>,
    /// Truncation height for the exact sampler (default: k_N + N + 8)
    #[arg(long)]
    height_cap: Option<i64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TileArgs {
    #[arg(long)]
    config: PathBuf,
    /// Path-configuration JSON ({"heights": [[..], ..]}) to convert to a tiling
    #[arg(long)]
    paths: Option<PathBuf>,
    /// Tiling JSON to convert back to a path configuration
    #[arg(long)]
    tiling: Option<PathBuf>,
    /// json | svg | ascii (forward conversion only)
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[arg(long)]
    config: PathBuf,
    /// Point "s,x" (repeatable)
    #[arg(long, required = true)]
    point: Vec<String>,
    /// Truncation height for the oracle (default: k_N + N + 8)
    #[arg(long)]
    height_cap: Option<i64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ReportOut {
    /// Write the full report as JSON here
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the report table as CSV here
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ConvergeCmd {
    /// Finite-N convergence to the interpolating kernel
    Thm3 {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        xi: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        /// Queries "s1,x1,s2,x2" joined by ';' (default: built-in window)
        #[arg(long)]
        window: Option<String>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: ReportOut,
    },
    /// Deep-bulk convergence to the extended sine kernel
    Prop1 {
        #[arg(long)]
        k: u32,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        gamma_prefix: Vec<f64>,
        #[arg(long)]
        gamma_bulk: f64,
        #[arg(long)]
        window: Option<String>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        s_list: Vec<usize>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: ReportOut,
    },
    /// Wide-spacing convergence to the single-walker law
    Prop2 {
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        gamma: Vec<f64>,
        #[arg(long)]
        window: Option<String>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        k_list: Vec<u32>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: ReportOut,
    },
    /// Strong-scaling convergence to the saturation kernel
    Prop3 {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        sigma: f64,
        /// Pairs "eta1,eta2" joined by ';'
        #[arg(long)]
        eta_window: String,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        k_list: Vec<u32>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: ReportOut,
    },
    /// Number-variance saturation table
    Variance {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        s_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        l_list: Vec<i64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: ReportOut,
    },
}

/// Extended config file: the model schema plus optional defaults.
struct FileConfig {
    model: Option<ValidatedModel>,
    kernel: Option<String>,
    query: Option<Vec<(i64, i64, i64, i64)>>,
    tol: Option<f64>,
    seed: Option<u64>,
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn read_config(path: &PathBuf) -> Result<FileConfig, (u8, String)> {
    let text = fs::read_to_string(path).map_err(|e| (2u8, format!("{}: {e}", path.display())))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| (2u8, format!("{}: {e}", path.display())))?;
    let model = if v.get("n").is_some() {
        let params: ModelParams = serde_json::from_value(v.clone())
            .map_err(|e| (2u8, format!("{}: {e}", path.display())))?;
        Some(validate(params).map_err(|e| (e.exit_code() as u8, e.to_string()))?)
    } else {
        None
    };
    let query = match v.get("query") {
        None => None,
        Some(q) => {
            let rows: Vec<[i64; 4]> = serde_json::from_value(q.clone())
                .map_err(|e| (2u8, format!("{}: bad query: {e}", path.display())))?;
            Some(rows.iter().map(|r| (r[0], r[1], r[2], r[3])).collect())
        }
    };
    Ok(FileConfig {
        model,
        kernel: v.get("kernel").and_then(|k| k.as_str()).map(String::from),
        query,
        tol: v.get("tol").and_then(|t| t.as_f64()),
        seed: v.get("seed").and_then(|s| s.as_u64()),
    })
}

fn parse_int_tuple(s: &str, n: usize) -> Result<Vec<i64>, String> {
    let parts: Vec<i64> = s
        .split(',')
        .map(|p| p.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad integer list {s:?}: {e}"))?;
    if parts.len() != n {
        return Err(format!("expected {n} comma-separated integers, got {s:?}"));
    }
    Ok(parts)
}

fn parse_window(spec: Option<&str>) -> Result<Vec<(usize, i64, usize, i64)>, String> {
    match spec {
        None => Ok(default_window()),
        Some(text) => text
            .split(';')
            .map(|q| {
                let t = parse_int_tuple(q, 4)?;
                if t[0] < 1 || t[2] < 1 {
                    return Err(format!("window lines must be >= 1 in {q:?}"));
                }
                Ok((t[0] as usize, t[1], t[2] as usize, t[3]))
            })
            .collect(),
    }
}

fn parse_eta_window(text: &str) -> Result<Vec<(f64, f64)>, String> {
    text.split(';')
        .map(|pair| {
            let parts: Vec<f64> = pair
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("bad eta pair {pair:?}: {e}"))?;
            if parts.len() != 2 {
                return Err(format!("expected \"eta1,eta2\", got {pair:?}"));
            }
            Ok((parts[0], parts[1]))
        })
        .collect()
}

fn write_out(out: &Option<PathBuf>, content: &str) -> Result<(), (u8, String)> {
    match out {
        Some(p) => {
            fs::write(p, content).map_err(|e| (2u8, format!("{}: {e}", p.display())))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn resolve_kernel(sel: &KernelSelect, cfg: &Option<FileConfig>) -> Result<String, (u8, String)> {
    sel.kernel
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.kernel.clone()))
        .ok_or((2u8, "no kernel selector (use --kernel or config \"kernel\")".into()))
}

/// Resolve the selector into a kernel handle over integer grid points.  The
/// `continuous` selector reads the line index as a unit-spaced real time; the
/// `johansson` selector reads `x / 1000` as the eta coordinate.
fn build_handle(sel: &KernelSelect, cfg: &Option<FileConfig>) -> Result<KernelHandle, (u8, String)> {
    let name = resolve_kernel(sel, cfg)?;
    let tol = sel
        .tol
        .or(cfg.as_ref().and_then(|c| c.tol))
        .unwrap_or(1e-10);
    let model = cfg.as_ref().and_then(|c| c.model.clone());
    let need_model = || {
        model
            .clone()
            .ok_or((2u8, "this kernel needs --config with a model".to_string()))
    };
    let wrap = |e: &Error| (e.exit_code() as u8, e.to_string());
    match name.as_str() {
        "finite-general" => {
            let m = need_model()?;
            Ok(KernelHandle::new("finite-general", move |p, q| {
                kernel_general(&m, &KernelQuery::new(p.s, p.x, q.s, q.x)).map(|v| v.value)
            }))
        }
        "finite-equal" => {
            let m = need_model()?;
            Ok(KernelHandle::new("finite-equal", move |p, q| {
                kernel_equal_spacing(&m, &KernelQuery::new(p.s, p.x, q.s, q.x), tol)
                    .map(|v| v.value)
            }))
        }
        "em" => {
            let m = need_model()?;
            Ok(KernelHandle::new("em", move |p, q| {
                em_reference(&m, &KernelQuery::new(p.s, p.x, q.s, q.x)).map(|v| v.value)
            }))
        }
        "limit" => {
            let k = sel.k.ok_or((2u8, "limit kernel needs --k".to_string()))?;
            let gamma = sel
                .gamma
                .clone()
                .ok_or((2u8, "limit kernel needs --gamma".to_string()))?;
            let params = LimitParams::new(k, gamma, tol).map_err(|e| wrap(&e))?;
            Ok(KernelHandle::new("limit", move |p, q| {
                limit_kernel(&params, p.s as usize, p.x, q.s as usize, q.x)
            }))
        }
        "sine-ext" => {
            let c = sel.half_angle.or(sel.k.map(|k| PI / k as f64)).ok_or((
                2u8,
                "sine-ext needs --half-angle (or --k for c = pi/k)".to_string(),
            ))?;
            let gamma = sel
                .gamma
                .clone()
                .ok_or((2u8, "sine-ext needs --gamma".to_string()))?;
            Ok(KernelHandle::new("sine-ext", move |p, q| {
                extended_sine(c, &gamma, p.s as usize, p.x, q.s as usize, q.x, tol)
            }))
        }
        "continuous" => {
            let k = sel
                .k
                .ok_or((2u8, "continuous kernel needs --k".to_string()))?;
            // integer grid lines are read as unit-spaced times
            Ok(KernelHandle::new("continuous", move |p, q| {
                continuous_limit_kernel(k, p.s as f64, p.x, q.s as f64, q.x, tol)
            }))
        }
        "johansson" => {
            let d = sel.d.ok_or((2u8, "johansson needs --d".to_string()))?;
            let params = SaturationParams {
                d,
                series_tol: tol.min(1e-14),
            };
            // lattice queries are mapped to eta = x / 1000 on each side
            Ok(KernelHandle::new("johansson", move |p, q| {
                johansson_kernel(p.x as f64 / 1000.0, q.x as f64 / 1000.0, &params)
            }))
        }
        other => Err((2u8, format!("unknown kernel selector {other:?}"))),
    }
}

fn run_kernel(args: &KernelArgs) -> Result<(), (u8, String)> {
    let cfg = args.select.config.as_ref().map(read_config).transpose()?;
    let sel = args.select.clone();
    let name = resolve_kernel(&sel, &cfg)?;
    let handle = build_handle(&sel, &cfg)?;
    let mut queries: Vec<(i64, i64, i64, i64)> = Vec::new();
    for q in &args.query {
        let t = parse_int_tuple(q, 4).map_err(|e| (2u8, e))?;
        queries.push((t[0], t[1], t[2], t[3]));
    }
    if queries.is_empty() {
        if let Some(q) = cfg.as_ref().and_then(|c| c.query.clone()) {
            queries = q;
        }
    }
    if queries.is_empty() {
        return Err((2u8, "no queries given (use --query or config \"query\")".into()));
    }
    queries.sort_unstable();
    let mut out = String::from("s1,x1,s2,x2,K,route,err_estimate\n");
    for &(s1, x1, s2, x2) in &queries {
        // route and error estimate are exposed for the finite routes
        let (value, route, err) = match name.as_str() {
            "finite-general" | "finite-equal" | "em" => {
                let m = cfg
                    .as_ref()
                    .and_then(|c| c.model.clone())
                    .ok_or((2u8, "this kernel needs --config with a model".to_string()))?;
                let q = KernelQuery::new(s1, x1, s2, x2);
                let tol = sel.tol.or(cfg.as_ref().and_then(|c| c.tol)).unwrap_or(1e-10);
                let kv = match name.as_str() {
                    "finite-general" => kernel_general(&m, &q),
                    "finite-equal" => kernel_equal_spacing(&m, &q, tol),
                    _ => em_reference(&m, &q),
                }
                .map_err(|e| (e.exit_code() as u8, e.to_string()))?;
                (kv.value, kv.route.as_str().to_string(), kv.err_estimate)
            }
            _ => {
                let v = handle
                    .eval(GridPoint::new(s1, x1), GridPoint::new(s2, x2))
                    .map_err(|e| (e.exit_code() as u8, e.to_string()))?;
                (v, handle.label().to_string(), 0.0)
            }
        };
        out.push_str(&format!(
            "{s1},{x1},{s2},{x2},{value:.16e},{route},{err:.16e}\n"
        ));
    }
    write_out(&args.out, &out)
}

fn run_density(args: &DensityArgs) -> Result<(), (u8, String)> {
    let cfg = args.select.config.as_ref().map(read_config).transpose()?;
    let handle = build_handle(&args.select, &cfg)?;
    if args.x_max < args.x_min {
        return Err((2u8, "x-max must be >= x-min".into()));
    }
    let rows = density_profile(&handle, args.s, args.x_min..args.x_max + 1)
        .map_err(|e| (e.exit_code() as u8, e.to_string()))?;
    let mut out = String::from("s,x,value\n");
    for (x, v) in rows {
        out.push_str(&format!("{},{},{:.16e}\n", args.s, x, v));
    }
    write_out(&args.out, &out)
}

fn parse_points(specs: &[String]) -> Result<Vec<GridPoint>, (u8, String)> {
    let mut pts = Vec::new();
    for p in specs {
        let t = parse_int_tuple(p, 2).map_err(|e| (2u8, e))?;
        pts.push(GridPoint::new(t[0], t[1]));
    }
    pts.sort_unstable_by_key(|p| (p.s, p.x));
    Ok(pts)
}

fn run_correlation(args: &CorrelationArgs) -> Result<(), (u8, String)> {
    let cfg = args.select.config.as_ref().map(read_config).transpose()?;
    let handle = build_handle(&args.select, &cfg)?;
    let pts = parse_points(&args.point)?;
    let v = dpp_correlation(&handle, &pts).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
    let mut header = String::new();
    let mut row = String::new();
    for (i, p) in pts.iter().enumerate() {
        header.push_str(&format!("s{0},x{0},", i + 1));
        row.push_str(&format!("{},{},", p.s, p.x));
    }
    header.push_str("value\n");
    row.push_str(&format!("{v:.16e}\n"));
    write_out(&args.out, &format!("{header}{row}"))
}

fn run_variance(args: &VarianceArgs) -> Result<(), (u8, String)> {
    let cfg = args.select.config.as_ref().map(read_config).transpose()?;
    let handle = build_handle(&args.select, &cfg)?;
    let iv = IntervalSpec {
        s: args.s,
        lo: args.lo,
        hi: args.hi,
    };
    let v = number_variance(&handle, &iv).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
    write_out(
        &args.out,
        &format!("s,lo,hi,variance\n{},{},{},{:.16e}\n", iv.s, iv.lo, iv.hi, v),
    )
}

fn default_cap(model: &ValidatedModel) -> i64 {
    model.k().last().copied().unwrap_or(0) + model.n() as i64 + 8
}

fn run_sample(args: &SampleArgs) -> Result<(), (u8, String)> {
    let cfg = read_config(&args.config)?;
    let model = cfg
        .model
        .clone()
        .ok_or((2u8, "sample needs a model config".to_string()))?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let cap = args.height_cap.unwrap_or_else(|| default_cap(&model));
    let oracle = Oracle::new(&model, cap).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
    let samples = oracle
        .sample_paths(args.count, seed)
        .map_err(|e| (e.exit_code() as u8, e.to_string()))?;
    let mut out = String::new();
    for (i, s) in samples.iter().enumerate() {
        let line = json!({"heights": s.heights, "seed": seed, "index": i});
        out.push_str(&serde_json::to_string(&line).expect("sample serializes"));
        out.push('\n');
    }
    write_out(&args.out, &out)
}

fn run_tile(args: &TileArgs) -> Result<(), (u8, String)> {
    let cfg = read_config(&args.config)?;
    let model = cfg
        .model
        .clone()
        .ok_or((2u8, "tile needs a model config".to_string()))?;
    match (&args.paths, &args.tiling) {
        (Some(p), None) => {
            let text = fs::read_to_string(p).map_err(|e| (2u8, format!("{}: {e}", p.display())))?;
            let config: PathConfig =
                serde_json::from_str(&text).map_err(|e| (2u8, format!("{}: {e}", p.display())))?;
            let tiling =
                paths_to_tiling(&model, &config).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
            let rendered = match args.format.as_str() {
                "json" => {
                    let mut s = serde_json::to_string_pretty(&tiling).expect("tiling serializes");
                    s.push('\n');
                    s
                }
                "svg" => render_svg(&tiling),
                "ascii" => render_ascii(&tiling),
                other => return Err((2u8, format!("unknown format {other:?}"))),
            };
            write_out(&args.out, &rendered)
        }
        (None, Some(t)) => {
            let text = fs::read_to_string(t).map_err(|e| (2u8, format!("{}: {e}", t.display())))?;
            let tiling: Tiling =
                serde_json::from_str(&text).map_err(|e| (2u8, format!("{}: {e}", t.display())))?;
            let config =
                tiling_to_paths(&model, &tiling).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
            let mut s = serde_json::to_string_pretty(&config).expect("paths serialize");
            s.push('\n');
            write_out(&args.out, &s)
        }
        _ => Err((2u8, "give exactly one of --paths or --tiling".into())),
    }
}

fn run_oracle_check(args: &OracleCheckArgs) -> Result<ExitCode, (u8, String)> {
    let cfg = read_config(&args.config)?;
    let model = cfg
        .model
        .clone()
        .ok_or((2u8, "oracle-check needs a model config".to_string()))?;
    let tol = args.tol.or(cfg.tol).unwrap_or(1e-10);
    let pts = parse_points(&args.point)?;
    let cap = args.height_cap.unwrap_or_else(|| default_cap(&model));
    let oracle = Oracle::new(&model, cap).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
    let wrap = |e: Error| (e.exit_code() as u8, e.to_string());
    let m = model.clone();
    let handle = if model.equal_spacing().is_some() {
        KernelHandle::new("finite-equal", move |p, q| {
            kernel_equal_spacing(&m, &KernelQuery::new(p.s, p.x, q.s, q.x), tol).map(|v| v.value)
        })
    } else if model.distinct_beta() {
        KernelHandle::new("finite-general", move |p, q| {
            kernel_general(&m, &KernelQuery::new(p.s, p.x, q.s, q.x)).map(|v| v.value)
        })
    } else {
        return Err((
            2u8,
            "model is neither equally spaced nor has distinct beta".into(),
        ));
    };
    let kval = dpp_correlation(&handle, &pts).map_err(wrap)?;
    let oval = oracle.correlation(&pts).map_err(wrap)?;
    let bound = oracle.tail_bound() + 1e-8;
    let diff = (kval - oval).abs();
    let ok = diff <= bound;
    let out = format!(
        "kernel,oracle,diff,bound,ok\n{kval:.16e},{oval:.16e},{diff:.16e},{bound:.16e},{ok}\n"
    );
    write_out(&args.out, &out)?;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(4) })
}

fn emit_report(report: &ConvergenceReport, out: &ReportOut) -> Result<ExitCode, (u8, String)> {
    if let Some(p) = &out.json {
        fs::write(p, report.to_json()).map_err(|e| (2u8, format!("{}: {e}", p.display())))?;
    }
    if let Some(p) = &out.csv {
        fs::write(p, report.to_csv()).map_err(|e| (2u8, format!("{}: {e}", p.display())))?;
    }
    print!("{}", report.to_csv());
    println!("pass,{}", report.pass);
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(4)
    })
}

fn run_converge(cmd: &ConvergeCmd) -> Result<ExitCode, (u8, String)> {
    let wrap = |e: Error| (e.exit_code() as u8, e.to_string());
    let report = match cmd {
        ConvergeCmd::Thm3 {
            k,
            xi,
            alpha,
            beta,
            window,
            n_list,
            tol,
            ..
        } => {
            let w = parse_window(window.as_deref()).map_err(|e| (2u8, e))?;
            thm3_convergence(*k, *xi, *alpha, *beta, &w, n_list, *tol).map_err(wrap)?
        }
        ConvergeCmd::Prop1 {
            k,
            gamma_prefix,
            gamma_bulk,
            window,
            s_list,
            tol,
            ..
        } => {
            let w = parse_window(window.as_deref()).map_err(|e| (2u8, e))?;
            prop1_convergence(*k, gamma_prefix, *gamma_bulk, &w, s_list, *tol).map_err(wrap)?
        }
        ConvergeCmd::Prop2 {
            gamma,
            window,
            k_list,
            tol,
            ..
        } => {
            let w = parse_window(window.as_deref()).map_err(|e| (2u8, e))?;
            prop2_convergence(gamma, &w, k_list, *tol).map_err(wrap)?
        }
        ConvergeCmd::Prop3 {
            gamma,
            sigma,
            eta_window,
            k_list,
            tol,
            ..
        } => {
            let w = parse_eta_window(eta_window).map_err(|e| (2u8, e))?;
            prop3_convergence(*gamma, *sigma, &w, k_list, *tol).map_err(wrap)?
        }
        ConvergeCmd::Variance {
            k,
            gamma,
            s_list,
            l_list,
            tol,
            ..
        } => variance_saturation(*k, *gamma, s_list, l_list, *tol).map_err(wrap)?,
    };
    let out = match cmd {
        ConvergeCmd::Thm3 { out, .. }
        | ConvergeCmd::Prop1 { out, .. }
        | ConvergeCmd::Prop2 { out, .. }
        | ConvergeCmd::Prop3 { out, .. }
        | ConvergeCmd::Variance { out, .. } => out,
    };
    emit_report(&report, out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return fail(2, "--threads must be >= 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            return fail(2, &format!("thread pool: {e}"));
        }
    }
    let outcome: Result<ExitCode, (u8, String)> = match &cli.cmd {
        Cmd::Validate { config } => match read_config(config) {
            Ok(cfg) => {
                if let Some(m) = cfg.model {
                    println!(
                        "ok n={} spacing={}",
                        m.n(),
                        m.equal_spacing()
                            .map(|g| g.to_string())
                            .unwrap_or_else(|| "irregular".into())
                    );
                    Ok(ExitCode::SUCCESS)
                } else {
                    Err((2u8, "config has no model".into()))
                }
            }
            Err(e) => Err(e),
        },
        Cmd::Kernel(a) => run_kernel(a).map(|()| ExitCode::SUCCESS),
        Cmd::Density(a) => run_density(a).map(|()| ExitCode::SUCCESS),
        Cmd::Correlation(a) => run_correlation(a).map(|()| ExitCode::SUCCESS),
        Cmd::Variance(a) => run_variance(a).map(|()| ExitCode::SUCCESS),
        Cmd::Sample(a) => run_sample(a).map(|()| ExitCode::SUCCESS),
        Cmd::Tile(a) => run_tile(a).map(|()| ExitCode::SUCCESS),
        Cmd::OracleCheck(a) => run_oracle_check(a),
        Cmd::Converge { experiment } => run_converge(experiment),
    };
    match outcome {
        Ok(code) => code,
        Err((code, msg)) => fail(code, &msg),
    }
}
