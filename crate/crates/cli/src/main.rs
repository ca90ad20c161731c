//! `walsh-trunc`: experiments on truncated Walsh-Hadamard matrices.

mod output;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use walsh_trunc::critical::{extract_params, k_sweep, SWEEP_HEADER};
use walsh_trunc::evidence::{hunt, norm_curve, trim_compare, LIMIT, SEARCH_TOL};
use walsh_trunc::partial_sum::{localize_phi, operator_norm_bound, LinearizedOperator};
use walsh_trunc::spectral::two_branch::validate_two_branch_level;
use walsh_trunc::walsh::DEFAULT_DENSE_CAP;
use walsh_trunc::{build_wh, standard_truncation, trim, two_branch, StepFunction, TruncationMap};

use output::{line_plot, num, Series, Sink};

/// Largest level for the level-matrix curve.
const CURVE_MAX: u32 = 1000;
/// Largest level for the sweeps built on the reduced two-branch matrix.
const SWEEP_MAX: u32 = 30;
/// Levels up to which the reduced two-branch matrix is checked against the
/// dense norm before any sweep runs.
const GATE_MAX: u32 = 10;
const GATE_TOL: f64 = 1e-9;
/// Largest level for searches and comparisons that build full matrices.
const SEARCH_MAX: u32 = 10;

#[derive(Parser)]
#[command(name = "walsh-trunc", version, about = "Operator norms of truncated Walsh-Hadamard matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// ‖W_N^opt‖ for N = 1..=nmax from the level matrices.
    NormCurve {
        #[arg(long)]
        nmax: u32,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Parameters of F(α, β) for every K at level N.
    Ksweep {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Level coefficients of the norm vector of B_{N-1,K}.
    LevelVectors {
        #[arg(long)]
        n: u32,
        /// Comma-separated K values; all of 0..N-1 when omitted.
        #[arg(long, value_delimiter = ',')]
        k: Vec<u32>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// W_N^opt, B_{N-1,N-1}, its trimmed version and W_{N+1}^opt.
    TrimCompare {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Random truncations and node reductions against ‖W_N^opt‖.
    Hunt {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Apply the linearized partial-sum operator S_Φ to a step function.
    Apply {
        #[arg(long)]
        phi_file: PathBuf,
        #[arg(long)]
        f_file: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write a dense matrix as CSV.
    ExportMatrix {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Wh,
    Opt,
    TwoBranch,
    Trim,
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
enum Failure {
    BadArgs(String),
    Gate(String),
    Evidence(String),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::BadArgs(_) => 2,
            Failure::Gate(_) => 3,
            Failure::Evidence(_) => 4,
        }
    }
}

impl From<walsh_trunc::Error> for Failure {
    fn from(e: walsh_trunc::Error) -> Self {
        use walsh_trunc::Error as E;
        match e {
            E::SizeCap { .. }
            | E::DimensionCap { .. }
            | E::InvalidLevel(_)
            | E::InvalidArgument(_)
            | E::LevelMismatch { .. }
            | E::NotDyadic
            | E::NotANode { .. }
            | E::NotDeepestNode { .. }
            | E::OutsideDomain(_)
            | E::Parse { .. } => Failure::BadArgs(e.to_string()),
            E::NoConvergence { .. } => Failure::Other(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn check_range(name: &str, v: u32, lo: u32, hi: u32) -> Outcome {
    if v < lo || v > hi {
        return Err(Failure::BadArgs(format!("--{name} must be in {lo}..={hi}, got {v}")));
    }
    Ok(())
}

fn configure_threads() -> Outcome {
    let Ok(raw) = std::env::var("WALSH_TRUNC_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::BadArgs(format!("WALSH_TRUNC_THREADS={raw} is not a positive integer")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Other(e.into()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

/// Check the reduced two-branch matrix against dense norms up to `level`.
fn gate(level: u32) -> Outcome {
    let (ok, rows) = validate_two_branch_level(level.min(GATE_MAX), GATE_TOL)?;
    if ok {
        return Ok(());
    }
    let worst = rows
        .iter()
        .max_by(|a, b| a.error().total_cmp(&b.error()))
        .expect("at least one cell");
    Err(Failure::Gate(format!(
        "reduced two-branch norm disagrees with the dense norm at N={} K={}: {:e}",
        worst.level,
        worst.secondary,
        worst.error()
    )))
}

fn cmd_norm_curve(nmax: u32, out: &Path) -> Outcome {
    check_range("nmax", nmax, 1, CURVE_MAX)?;
    let curve = norm_curve(nmax)?;
    let sink = Sink::new(out, None, 0.0)?;
    let mut body = String::from("N,lambda,gap\n");
    for p in &curve.points {
        body.push_str(&format!("{},{:?},{:?}\n", p.level, p.norm, LIMIT - p.norm));
    }
    sink.csv("norm_curve.csv", &[format!("limit={LIMIT:?}")], &body)?;
    let points = curve.points.iter().map(|p| (p.level as f64, p.norm)).collect();
    let limit = vec![(1.0, LIMIT), (nmax as f64, LIMIT)];
    sink.write(
        "norm_curve.svg",
        &line_plot(
            "norm of the standard truncation",
            "N",
            "norm",
            &[
                Series { label: "lambda(N)", points },
                Series { label: "1 + sqrt(2)/2", points: limit },
            ],
        ),
    )?;
    let last = curve.points.last().expect("nmax >= 1");
    println!("lambda({}) = {:.10}", last.level, last.norm);
    if !curve.non_increasing.is_empty() || !curve.above_limit.is_empty() {
        return Err(Failure::Evidence(format!(
            "non-increasing at N={:?}, at or above the limit at N={:?}",
            curve.non_increasing, curve.above_limit
        )));
    }
    Ok(())
}

fn log2_diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some((a? - b?).abs().log2())
}

fn cmd_ksweep(n: u32, out: &Path) -> Outcome {
    check_range("n", n, 2, SWEEP_MAX)?;
    gate(n)?;
    let sweep = k_sweep(n)?;
    let sink = Sink::new(out, None, GATE_TOL)?;
    let base = sweep.rows.iter().find(|r| r.secondary == Some(0));
    let mut body = format!("{SWEEP_HEADER},log2_dalpha,log2_dbeta,log2_dgamma,l1_ratio\n");
    for (line, r) in sweep.to_csv_rows().iter().zip(&sweep.rows) {
        let (da, db, dg) = match (r.secondary, base) {
            (Some(_), Some(b)) => (
                log2_diff(Some(r.alpha), Some(b.alpha)),
                log2_diff(r.beta, b.beta),
                log2_diff(Some(r.gamma), Some(b.gamma)),
            ),
            _ => (None, None, None),
        };
        body.push_str(&format!(
            "{line},{},{},{},{}\n",
            num(da),
            num(db),
            num(dg),
            num(r.l1_ratio)
        ));
    }
    let notes = [
        format!("N={n}; K=-1 is the matrix without a secondary branch"),
        format!("norm_violations={:?} lhs_violations={:?}", sweep.norm_violations, sweep.lhs_violations),
    ];
    sink.csv("ksweep.csv", &notes, &body)?;
    let series = |f: &dyn Fn(&walsh_trunc::critical::Extraction) -> Option<f64>| -> Vec<(f64, f64)> {
        sweep
            .rows
            .iter()
            .filter_map(|r| Some((f64::from(r.secondary?), f(r)?)))
            .collect()
    };
    sink.write(
        "ksweep.svg",
        &line_plot(
            &format!("log2 differences from K = 0, N = {n}"),
            "K",
            "log2 |v(K) - v(0)|",
            &[
                Series {
                    label: "alpha",
                    points: series(&|r| log2_diff(Some(r.alpha), base.map(|b| b.alpha))),
                },
                Series {
                    label: "beta",
                    points: series(&|r| log2_diff(r.beta, base.and_then(|b| b.beta))),
                },
                Series {
                    label: "gamma",
                    points: series(&|r| log2_diff(Some(r.gamma), base.map(|b| b.gamma))),
                },
            ],
        ),
    )?;
    println!(
        "N={n}: {} rows, norm violations {:?}",
        sweep.rows.len(),
        sweep.norm_violations
    );
    if !sweep.norm_violations.is_empty() {
        return Err(Failure::Evidence(format!(
            "norm of B_(N-1,K) did not decrease at K={:?}",
            sweep.norm_violations
        )));
    }
    Ok(())
}

fn cmd_level_vectors(n: u32, ks: &[u32], out: &Path) -> Outcome {
    check_range("n", n, 2, SWEEP_MAX)?;
    let mut ks: Vec<u32> = if ks.is_empty() { (0..n).collect() } else { ks.to_vec() };
    ks.sort_unstable();
    ks.dedup();
    if let Some(&k) = ks.iter().find(|&&k| k >= n) {
        return Err(Failure::BadArgs(format!("--k {k} must be below --n {n}")));
    }
    gate(n)?;
    let rows = ks
        .iter()
        .map(|&k| extract_params(n, Some(k)))
        .collect::<walsh_trunc::Result<Vec<_>>>()?;
    let sink = Sink::new(out, None, GATE_TOL)?;
    let mut body = String::from("K,k,c_k\n");
    let mut norms = String::from("K,norm_Mc,alpha,beta,gamma\n");
    for (k, e) in ks.iter().zip(&rows) {
        for (j, c) in e.primary_levels.iter().enumerate() {
            body.push_str(&format!("{k},{j},{c:?}\n"));
        }
        norms.push_str(&format!(
            "{k},{:?},{:?},{},{:?}\n",
            e.primary_image_norm(),
            e.alpha,
            num(e.beta),
            e.gamma
        ));
    }
    // each coordinate should move monotonically in K
    let mut non_monotone = Vec::new();
    for j in 0..n as usize {
        let col: Vec<f64> = rows.iter().map(|e| e.primary_levels[j]).collect();
        let up = col.windows(2).all(|w| w[1] >= w[0]);
        let down = col.windows(2).all(|w| w[1] <= w[0]);
        if !up && !down {
            non_monotone.push(j);
        }
    }
    let notes = [
        format!("N={n}; coordinates of the primary level vector of B_(N-1,K)"),
        format!("non_monotone_coordinates={non_monotone:?}"),
    ];
    sink.csv("level_vectors.csv", &notes, &body)?;
    sink.csv("level_norms.csv", &notes[..1], &norms)?;
    for (k, e) in ks.iter().zip(&rows) {
        println!("K={k}: |M c| = {:.6}", e.primary_image_norm());
    }
    if !non_monotone.is_empty() {
        eprintln!("coordinates not monotone in K: {non_monotone:?}");
    }
    Ok(())
}

fn cmd_trim_compare(n: u32, out: &Path) -> Outcome {
    check_range("n", n, 2, SEARCH_MAX)?;
    let t = trim_compare(n)?;
    let sink = Sink::new(out, None, 1e-11)?;
    let mut body = String::from("label,N,norm,total_correlation\n");
    for r in &t.rows {
        body.push_str(&format!("{},{n},{:?},{:?}\n", r.label, r.norm, r.total_correlation));
    }
    let notes = [format!(
        "crossover={} next_level_larger={}",
        t.crossover, t.next_level_larger
    )];
    sink.csv("trim_compare.csv", &notes, &body)?;
    for r in &t.rows {
        println!("{:<16} {:.6} {:.4}", r.label, r.norm, r.total_correlation);
    }
    Ok(())
}

fn cmd_hunt(n: u32, trials: u64, seed: u64, tol: f64, out: &Path) -> Outcome {
    check_range("n", n, 1, SEARCH_MAX)?;
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Failure::BadArgs(format!("--tol must be a non-negative number, got {tol}")));
    }
    let r = hunt(n, trials, seed, tol)?;
    let sink = Sink::new(out, Some(seed), tol)?;
    let mut summary = String::from("quantity,value\n");
    for (q, v) in [
        ("opt_norm", format!("{:?}", r.opt_norm)),
        ("full_norm", format!("{:?}", r.full_norm)),
        ("max_norm", format!("{:?}", r.max_sample.norm)),
        ("max_trial", r.max_sample.trial.to_string()),
        ("exceeding", r.exceeding.len().to_string()),
        ("reduction_decreases", r.reduction_decreases.len().to_string()),
        ("worst_reduction_drop", format!("{:?}", r.worst_reduction_drop)),
    ] {
        summary.push_str(&format!("{q},{v}\n"));
    }
    let notes = [format!("N={n} trials={trials} lanczos_tol={SEARCH_TOL:e}")];
    sink.csv("hunt_summary.csv", &notes, &summary)?;
    let mut phi = Vec::new();
    r.max_sample.phi.write_csv(&mut phi).context("formatting the map")?;
    sink.csv(
        "hunt_max_phi.csv",
        &[format!("map of trial {} with norm {:?}", r.max_sample.trial, r.max_sample.norm)],
        &String::from_utf8(phi).context("map CSV")?,
    )?;
    let mut bad = String::from("kind,trial,before,after\n");
    for s in &r.exceeding {
        bad.push_str(&format!("random,{},{:?},{:?}\n", s.trial, r.opt_norm, s.norm));
    }
    for d in &r.reduction_decreases {
        bad.push_str(&format!("reduction,{},{:?},{:?}\n", d.trial, d.before, d.after));
    }
    sink.csv("hunt_violations.csv", &notes, &bad)?;
    println!(
        "N={n}: max {:.12} vs opt {:.12}; {} violations",
        r.max_sample.norm,
        r.opt_norm,
        r.violations()
    );
    if r.violations() > 0 {
        return Err(Failure::Evidence(format!("{} violations, see hunt_violations.csv", r.violations())));
    }
    Ok(())
}

/// Step-function coefficients: one value per line, optionally `k,value`.
/// Blank lines, `#` comments and a non-numeric header are skipped.
fn read_coefficients(path: &Path) -> std::result::Result<StepFunction, Failure> {
    let file = File::open(path).map_err(|e| Failure::BadArgs(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Failure::BadArgs(format!("{}: {e}", path.display())))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if values.is_empty() && i < 2 => continue,
            Err(_) => {
                return Err(Failure::BadArgs(format!(
                    "{}:{}: `{field}` is not a number",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    let n = values.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Failure::BadArgs(format!("{n} coefficients is not a power of two >= 2")));
    }
    Ok(StepFunction::new(n.trailing_zeros(), values)?)
}

fn cmd_apply(phi_file: &Path, f_file: &Path, out: &Path) -> Outcome {
    let file = File::open(phi_file).map_err(|e| Failure::BadArgs(format!("{}: {e}", phi_file.display())))?;
    let phi = TruncationMap::read_csv(BufReader::new(file))?;
    let f = read_coefficients(f_file)?;
    let phi = localize_phi(&phi, f.level())?;
    let op = LinearizedOperator::new(phi);
    let sf = op.apply(&f)?;
    let bound = operator_norm_bound(&op)?;
    let sink = Sink::new(out, None, 1e-11)?;
    let mut body = String::from("k,f,S_f\n");
    for (k, (a, b)) in f.coeffs().iter().zip(sf.coeffs()).enumerate() {
        body.push_str(&format!("{k},{a:?},{b:?}\n"));
    }
    let notes = [format!(
        "N={} norm_bound={:?} exact_norm={}",
        f.level(),
        bound.bound,
        num(bound.exact)
    )];
    sink.csv("apply.csv", &notes, &body)?;
    println!("N={}: |S_phi| <= {:.6}", f.level(), bound.bound);
    Ok(())
}

fn cmd_export_matrix(kind: Kind, n: u32, k: Option<u32>, out: &Path) -> Outcome {
    check_range("n", n, 1, DEFAULT_DENSE_CAP)?;
    if let Some(k) = k {
        if k >= n {
            return Err(Failure::BadArgs(format!("--k {k} must be below --n {n}")));
        }
    }
    let (name, m) = match kind {
        Kind::Wh => (format!("wh_N{n}.csv"), build_wh(n)?.into_dense()),
        Kind::Opt => (format!("opt_N{n}.csv"), standard_truncation(n)?.to_dense(DEFAULT_DENSE_CAP)?),
        Kind::TwoBranch | Kind::Trim => {
            if n < 2 {
                return Err(Failure::BadArgs("two-branch matrices need --n >= 2".into()));
            }
            let b = two_branch(n, k)?;
            let (prefix, m) = match kind {
                Kind::Trim => ("trim", trim(&b)),
                _ => ("two_branch", b),
            };
            let suffix = k.map_or_else(|| "null".to_string(), |k| k.to_string());
            (format!("{prefix}_N{n}_K{suffix}.csv"), m.to_dense(DEFAULT_DENSE_CAP)?)
        }
    };
    let mut body = Vec::new();
    m.write_csv(&mut body).context("formatting the matrix")?;
    let sink = Sink::new(out, None, 0.0)?;
    let path = sink.csv(
        &name,
        &["rows are Walsh indices, columns are positions".to_string()],
        &String::from_utf8(body).context("matrix CSV")?,
    )?;
    println!("{}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    configure_threads()?;
    match cli.command {
        Command::NormCurve { nmax, out } => cmd_norm_curve(nmax, &out),
        Command::Ksweep { n, out } => cmd_ksweep(n, &out),
        Command::LevelVectors { n, k, out } => cmd_level_vectors(n, &k, &out),
        Command::TrimCompare { n, out } => cmd_trim_compare(n, &out),
        Command::Hunt { n, trials, seed, tol, out } => cmd_hunt(n, trials, seed, tol, &out),
        Command::Apply { phi_file, f_file, out } => cmd_apply(&phi_file, &f_file, &out),
        Command::ExportMatrix { kind, n, k, out } => cmd_export_matrix(kind, n, k, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            match f {
                Failure::BadArgs(m) => eprintln!("error: {m}"),
                Failure::Gate(m) => eprintln!("oracle gate failed: {m}"),
                Failure::Evidence(m) => eprintln!("evidence violation: {m}"),
                Failure::Other(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(code)
        }
    }
}
