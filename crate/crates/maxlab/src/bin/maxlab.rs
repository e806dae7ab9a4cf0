//! Command-line front end: every verification pipeline in the crate behind
//! one reproducible, scriptable interface.
//!
//! Each run echoes its resolved configuration as one `config {...}` line on
//! stderr, prints its primary report to stdout, and, when `--out DIR` is
//! given, writes machine-readable artifacts (JSON reports, CSV/CSV tables,
//! `.ggrid` fields, TSV traces) into the directory. A run is a pure
//! function of its flags and seed: identical invocations produce
//! byte-identical artifacts. `MAXLAB_THREADS` caps internal parallelism.
//!
//! Failures — unknown inputs, invalid parameters, and verification checks
//! that do not hold — exit nonzero with a single `error: ...` line on
//! stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use maxlab::bellman::{
    chord_margin, filtration_instances, lemma_certificate, main_inequality_margin,
    theorem_constants,
};
use maxlab::body::{BodyKind, BodySpec};
use maxlab::builtins::builtin;
use maxlab::covering::{layer_cake_report, dichotomy_check, stein_check};
use maxlab::error::{Error, Result};
use maxlab::grid::GridFunction;
use maxlab::operators::centered_counterexample_report;
use maxlab::partition::{build_filtration, verify_density, AxisBox, StopRule};
use maxlab::search::{
    almost_centered_bound, claimed_constant, grafakos_check, grafakos_csv, minimize_ratio,
    operator_field, ratio, trace_tsv, RatioOperator,
};

#[derive(Parser)]
#[command(
    name = "maxlab",
    version,
    about = "Numerical laboratory for maximal-operator norm lower bounds"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a maximal field and report its basic statistics.
    Maximal(MaximalArgs),
    /// Report the norm ratio ||Mf||_p / ||f||_p with its claimed constant.
    Ratio(RatioArgs),
    /// Anneal toward grid functions with small norm ratio.
    Optimize(OptimizeArgs),
    /// Check the per-node averaging inequality on a real partition tree.
    BellmanVerify(BellmanArgs),
    /// Build a density-controlled filtration and verify its properties.
    Partition(PartitionArgs),
    /// Run the level-family / disjoint-subfamily pipeline over a ladder.
    Cover(CoverArgs),
    /// Classify a region as expanding or spread-out.
    Dichotomy(DichotomyArgs),
    /// Compare an entropy integral with the centered field on a region.
    Stein(SteinArgs),
    /// Verify the one-sided level-set exchange identity on the line.
    Grafakos(GrafakosArgs),
    /// Print the closed-form constants.
    Constants(ConstantsArgs),
    /// Refinement study of the centered-operator fixed point in 3d.
    Counterexample(CounterexampleArgs),
}

/// Where the input grid comes from: a `.ggrid` file or a named generator.
#[derive(Args, Debug)]
struct GridSource {
    /// Path to a .ggrid file.
    #[arg(long, value_name = "PATH", conflicts_with = "builtin")]
    grid: Option<PathBuf>,
    /// Named generator: indicator, linear_ramp, superharmonic3d, random.
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
}

impl GridSource {
    fn load(&self, seed: u64) -> Result<GridFunction> {
        match (&self.grid, &self.builtin) {
            (Some(path), None) => GridFunction::read_ggrid(path),
            (None, Some(name)) => builtin(name, seed),
            (None, None) => Err(Error::Config(
                "no input: pass --grid PATH or --builtin NAME".into(),
            )),
            (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
        }
    }

    fn describe(&self) -> String {
        match (&self.grid, &self.builtin) {
            (Some(p), _) => p.display().to_string(),
            (_, Some(n)) => format!("builtin:{n}"),
            _ => "unset".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum OpName {
    UncenteredBox,
    LambdaBox,
    LambdaBall2,
    CenteredBall2,
    Dyadic,
    OneSided,
}

impl OpName {
    fn resolve(self, lambda: Option<f64>) -> Result<RatioOperator> {
        let need = |flag: &str| {
            lambda.ok_or_else(|| Error::Config(format!("--op {flag} needs --lambda")))
        };
        Ok(match self {
            OpName::UncenteredBox => RatioOperator::UncenteredBox,
            OpName::LambdaBox => RatioOperator::LambdaBox(need("lambda-box")?),
            OpName::LambdaBall2 => RatioOperator::LambdaBall2(need("lambda-ball2")?),
            OpName::CenteredBall2 => RatioOperator::CenteredBall2,
            OpName::Dyadic => RatioOperator::Dyadic,
            OpName::OneSided => RatioOperator::OneSided,
        })
    }

    fn name(self) -> &'static str {
        match self {
            OpName::UncenteredBox => "uncentered-box",
            OpName::LambdaBox => "lambda-box",
            OpName::LambdaBall2 => "lambda-ball2",
            OpName::CenteredBall2 => "centered-ball2",
            OpName::Dyadic => "dyadic",
            OpName::OneSided => "one-sided",
        }
    }
}

#[derive(Args, Debug)]
struct MaximalArgs {
    #[command(flatten)]
    source: GridSource,
    #[arg(long, value_enum, default_value = "uncentered-box")]
    op: OpName,
    /// Core-dilation parameter for the lambda operators.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RatioArgs {
    #[command(flatten)]
    source: GridSource,
    #[arg(long, value_enum, default_value = "uncentered-box")]
    op: OpName,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long, value_enum, default_value = "uncentered-box")]
    op: OpName,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Cells per axis of the search grid.
    #[arg(long, default_value_t = 256)]
    cells: usize,
    /// Dimension of the search grid.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Total accepted-move budget across all chains.
    #[arg(long, default_value_t = 20_000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BellmanArgs {
    #[command(flatten)]
    source: GridSource,
    /// Density ratio the partition enforces (> 1).
    #[arg(long, default_value_t = 1.5)]
    lambda: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Stop splitting below this diameter; defaults to diam(root)/64.
    #[arg(long)]
    min_diam: Option<f64>,
    /// Margins below -tol count as violations.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PartitionArgs {
    #[command(flatten)]
    source: GridSource,
    #[arg(long, default_value_t = 1.5)]
    lambda: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Stop splitting below this diameter; defaults to diam(root)/32
    /// unless --max-depth is given.
    #[arg(long)]
    min_diam: Option<f64>,
    /// Stop splitting at this depth.
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum CoverFamily {
    Box,
    BallInf,
}

#[derive(Args, Debug)]
struct CoverArgs {
    #[command(flatten)]
    source: GridSource,
    #[arg(long, value_enum, default_value = "box")]
    family: CoverFamily,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Number of levels in the geometric ladder.
    #[arg(long, default_value_t = 20)]
    levels: usize,
    /// Slack delta for the overlap-function properties.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DichotomyArgs {
    #[command(flatten)]
    source: GridSource,
    /// Core-dilation parameter in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Side fraction of the centered test region.
    #[arg(long, default_value_t = 0.5)]
    frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SteinArgs {
    #[command(flatten)]
    source: GridSource,
    /// Side fraction of the centered region; the input is restricted to it.
    #[arg(long, default_value_t = 0.5)]
    frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GrafakosArgs {
    #[command(flatten)]
    source: GridSource,
    #[arg(long, default_value_t = 20)]
    levels: usize,
    /// Relative residual allowance on top of the 2h resolution term.
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Density ratio for the general constant, or the core dilation in
    /// (0, 1) when the almost-centered flags are given.
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    /// Dimension for the dyadic substitution lambda = 2^n.
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Print only the lambda -> 1 limit (p/(p-1))^(1/p).
    #[arg(long)]
    lambda_limit: bool,
    /// Boundary-shaving parameter of the almost-centered bound.
    #[arg(long, requires = "eta", requires = "besicovitch")]
    eps: Option<f64>,
    /// Expansion threshold of the almost-centered bound.
    #[arg(long, requires = "eps")]
    eta: Option<f64>,
    /// Overlap bound of the covering step.
    #[arg(long = "b", value_name = "B", requires = "eps")]
    besicovitch: Option<f64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CounterexampleArgs {
    /// Cells per axis of the [-l, l]^3 grid.
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Domain half-width.
    #[arg(long, default_value_t = 8.0)]
    l: f64,
    /// Quadrature refinement for ball boundary cells.
    #[arg(long, default_value_t = 2)]
    subsample: usize,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let line = e.to_string();
            let line = line.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", line.trim());
            return ExitCode::from(2);
        }
    };
    if let Ok(threads) = std::env::var("MAXLAB_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: MAXLAB_THREADS must be a positive integer, got {threads:?}");
                return ExitCode::FAILURE;
            }
        }
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Maximal(a) => cmd_maximal(a),
        Cmd::Ratio(a) => cmd_ratio(a),
        Cmd::Optimize(a) => cmd_optimize(a),
        Cmd::BellmanVerify(a) => cmd_bellman(a),
        Cmd::Partition(a) => cmd_partition(a),
        Cmd::Cover(a) => cmd_cover(a),
        Cmd::Dichotomy(a) => cmd_dichotomy(a),
        Cmd::Stein(a) => cmd_stein(a),
        Cmd::Grafakos(a) => cmd_grafakos(a),
        Cmd::Constants(a) => cmd_constants(a),
        Cmd::Counterexample(a) => cmd_counterexample(a),
    }
}

/// One-line resolved-configuration echo; stderr so stdout stays parseable.
fn echo_config(value: &serde_json::Value) {
    eprintln!("config {value}");
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn pretty(value: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

/// The centered box covering `frac` of each domain side.
fn central_box(g: &GridFunction, frac: f64) -> Result<BodySpec> {
    if !(frac.is_finite() && frac > 0.0 && frac <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "region fraction {frac} must lie in (0, 1]"
        )));
    }
    let lo = g.domain_lo();
    let hi = g.domain_hi();
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(&a, &b)| 0.5 * (a + b)).collect();
    let half: Vec<f64> = lo.iter().zip(&hi).map(|(&a, &b)| 0.5 * frac * (b - a)).collect();
    BodySpec::new_box(center, half)
}

/// Geometric ladder of `levels` thresholds from `lo` to `hi`.
fn geometric_levels(lo: f64, hi: f64, levels: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(Error::InvalidLevel(format!(
            "cannot ladder from {lo} to {hi}; need 0 < lo < hi"
        )));
    }
    if levels < 2 {
        return Err(Error::InvalidParameter("need at least two levels".into()));
    }
    let q = (hi / lo).powf(1.0 / (levels - 1) as f64);
    Ok((0..levels).map(|i| lo * q.powi(i as i32)).collect())
}

fn cmd_maximal(a: MaximalArgs) -> Result<()> {
    echo_config(&json!({
        "command": "maximal", "source": a.source.describe(), "op": a.op.name(),
        "lambda": a.lambda, "p": a.p, "seed": a.seed,
    }));
    let g = a.source.load(a.seed)?;
    let op = a.op.resolve(a.lambda)?;
    let field = operator_field(&g, &op)?;
    let mf = &field.field;
    let min_domination = g
        .values
        .iter()
        .zip(&mf.values)
        .map(|(&f, &m)| m - f)
        .fold(f64::INFINITY, f64::min);
    let report = json!({
        "operator": a.op.name(),
        "p": a.p,
        "cells": g.cell_count(),
        "sup_f": g.sup_norm(),
        "sup_mf": mf.sup_norm(),
        "mass_f": g.mass(),
        "mass_mf": mf.mass(),
        "norm_f": g.norm_lp(a.p)?,
        "norm_mf_grid": mf.norm_lp(a.p)?,
        "min_domination": min_domination,
        "constant": claimed_constant(&op, a.p, g.dim())?,
    });
    let text = pretty(&report)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        write_out(dir, "maximal.json", &(text + "\n"))?;
        write_out(dir, "maximal_field.ggrid", &mf.to_ggrid_string())?;
    }
    if min_domination < -1e-12 {
        return Err(Error::Inconsistent(format!(
            "maximal field fails to dominate the input by {min_domination:e}"
        )));
    }
    Ok(())
}

fn cmd_ratio(a: RatioArgs) -> Result<()> {
    echo_config(&json!({
        "command": "ratio", "source": a.source.describe(), "op": a.op.name(),
        "lambda": a.lambda, "p": a.p, "seed": a.seed,
    }));
    let g = a.source.load(a.seed)?;
    let op = a.op.resolve(a.lambda)?;
    let report = ratio(&g, &op, a.p)?;
    let text = pretty(&report)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        write_out(dir, "ratio.json", &(text + "\n"))?;
    }
    Ok(())
}

fn cmd_optimize(a: OptimizeArgs) -> Result<()> {
    echo_config(&json!({
        "command": "optimize", "op": a.op.name(), "lambda": a.lambda, "p": a.p,
        "cells": a.cells, "dim": a.dim, "budget": a.budget, "seed": a.seed,
    }));
    let op = a.op.resolve(a.lambda)?;
    if a.dim == 0 || a.dim > 3 {
        return Err(Error::InvalidParameter(format!(
            "search dimension {} outside 1..=3",
            a.dim
        )));
    }
    let shape = vec![a.cells; a.dim];
    let outcome = minimize_ratio(&op, a.p, &shape, a.budget, a.seed)?;
    let text = pretty(&outcome.report)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        write_out(dir, "optimize.json", &(text + "\n"))?;
        write_out(dir, "trace.tsv", &trace_tsv(&outcome.trace))?;
        write_out(dir, "best.ggrid", &outcome.best.to_ggrid_string())?;
    }
    Ok(())
}

fn cmd_bellman(a: BellmanArgs) -> Result<()> {
    echo_config(&json!({
        "command": "bellman-verify", "source": a.source.describe(), "lambda": a.lambda,
        "p": a.p, "min_diam": a.min_diam, "tol": a.tol, "seed": a.seed,
    }));
    let g = a.source.load(a.seed)?;
    let root = AxisBox::new(g.domain_lo(), g.domain_hi())?;
    let min_diam = a.min_diam.unwrap_or(root.diameter() / 64.0);
    let tree = build_filtration(&g, &root, a.lambda, a.p, StopRule {
        max_depth: None,
        min_diam: Some(min_diam),
    })?;
    let instances = filtration_instances(&tree);
    let mut margins = Vec::with_capacity(instances.len());
    for (parent, children) in &instances {
        margins.push(main_inequality_margin(parent, children)?);
    }
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let violations = margins.iter().filter(|&&m| m < -a.tol).count();

    let sweep = 10_001usize;
    let mut chord_min = f64::INFINITY;
    for i in 0..sweep {
        let s = 1.0 + (a.lambda - 1.0) * i as f64 / (sweep - 1) as f64;
        chord_min = chord_min.min(chord_margin(s.min(a.lambda), a.p, a.lambda)?);
    }

    let mq = tree.maximal_field(&g)?;
    let cert = lemma_certificate(&g, &root, &tree, a.p, a.lambda, &mq)?;

    let report = json!({
        "lambda": a.lambda,
        "p": a.p,
        "min_diam": min_diam,
        "nodes": tree.nodes.len(),
        "instances": margins.len(),
        "min_margin": min_margin,
        "violations": violations,
        "chord_points": sweep,
        "chord_min": chord_min,
        "certificate": cert,
        "constant": theorem_constants(a.p, a.lambda, g.dim() as u32)?.general,
    });
    let text = pretty(&report)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        write_out(dir, "bellman.json", &(text + "\n"))?;
        let mut csv = String::from("instance,margin\n");
        for (i, m) in margins.iter().enumerate() {
            csv.push_str(&format!("{i},{m}\n"));
        }
        write_out(dir, "margins.csv", &csv)?;
    }
    if violations > 0 {
        return Err(Error::Inconsistent(format!(
            "{violations} inequality instance(s) fell below -{:e}",
            a.tol
        )));
    }
    if chord_min < 0.0 {
        return Err(Error::Inconsistent(format!("chord margin dips to {chord_min:e}")));
    }
    if cert.margin < -1e-6 {
        return Err(Error::Inconsistent(format!(
            "root certificate margin {:e} below -1e-6",
            cert.margin
        )));
    }
    Ok(())
}

fn cmd_partition(a: PartitionArgs) -> Result<()> {
    echo_config(&json!({
        "command": "partition", "source": a.source.describe(), "lambda": a.lambda,
        "p": a.p, "min_diam": a.min_diam, "max_depth": a.max_depth, "seed": a.seed,
    }));
    let g = a.source.load(a.seed)?;
    let root = AxisBox::new(g.domain_lo(), g.domain_hi())?;
    let stop = if a.min_diam.is_none() && a.max_depth.is_none() {
        StopRule { max_depth: None, min_diam: Some(root.diameter() / 32.0) }
    } else {
        StopRule { max_depth: a.max_depth, min_diam: a.min_diam }
    };
    let tree = build_filtration(&g, &root, a.lambda, a.p, stop)?;
    let density = verify_density(&tree, &g, a.lambda)?;
    let text = pretty(&tree)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        write_out(dir, "tree.json", &(text + "\n"))?;
        write_out(dir, "density.json", &(pretty(&density)? + "\n"))?;
    }
    if !density.pass {
        let failed: Vec<&str> = density
            .items
            .iter()
            .filter(|i| !i.pass)
            .map(|i| i.name.as_str())
            .collect();
        return Err(Error::Inconsistent(format!(
            "density verification failed: {}",
            failed.join(", ")
        )));
    }
    eprintln!("density pass ({} nodes)", tree.nodes.len());
    Ok(())
}

fn cmd_cover(a: CoverArgs) -> Result<()> {
    echo_config(&json!({
        "command": "cover", "source": a.source.describe(), "family": format!("{:?}", a.family),
        "p": a.p, "levels": a.levels, "tol": a.tol, "seed": a.seed,
    }));
    let g = a.source.load(a.seed)?;
    let family = match a.family {
        CoverFamily::Box => BodyKind::Box,
        CoverFamily::BallInf => BodyKind::BallInf,
    };
    let top = g.sup_norm();
    if top <= 0.0 {
        return Err(Error::DegenerateInput("input has no positive part".into()));
    }
    let ladder = geometric_levels(0.05 * top, 0.9 * top, a.levels)?;
    let report = layer_cake_report(&g, family, a.p, &ladder, a.tol)?;
    let text = pretty(&report)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        write_out(dir, "layer_cake.json", &(text + "\n"))?;
        write_out(dir, "psi.csv", &report.csv())?;
    }
    if let Some(bad) = report.rows.iter().find(|r| !r.report.pass) {
        return Err(Error::Inconsistent(format!(
            "overlap-function properties failed at level t = {}",
            bad.report.t
        )));
    }
    Ok(())
}

fn cmd_dichotomy(a: DichotomyArgs) -> Result<()> {
    echo_config(&json!({
        "command": "dichotomy", "source": a.source.describe(), "lambda": a.lambda,
        "eps": a.eps, "eta": a.eta, "frac": a.frac, "seed": a.seed,
    }));
    let g = a.source.load(a.seed)?;
    let region = central_box(&g, a.frac)?;
    let report = dichotomy_check(&g, &region, a.lambda, a.eps, a.eta)?;
    let text = pretty(&report)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        write_out(dir, "dichotomy.json", &(text + "\n"))?;
    }
    Ok(())
}

fn cmd_stein(a: SteinArgs) -> Result<()> {
    echo_config(&json!({
        "command": "stein", "source": a.source.describe(), "frac": a.frac, "seed": a.seed,
    }));
    let g = a.source.load(a.seed)?;
    let region = central_box(&g, a.frac)?;
    // The comparison needs f supported in the region; restrict it there.
    let mut values = g.values.clone();
    for lin in 0..g.cell_count() {
        let x = g.cell_center(&g.multi_index(lin));
        let inside = x
            .iter()
            .zip(region.center.iter().zip(&region.half_widths))
            .all(|(&c, (&m, &hw))| (c - m).abs() <= hw);
        if !inside {
            values[lin] = 0.0;
        }
    }
    let restricted = GridFunction::new(g.shape.clone(), g.origin.clone(), g.h, values)?;
    let report = stein_check(&restricted, &region)?;
    let text = pretty(&report)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        write_out(dir, "stein.json", &(text + "\n"))?;
    }
    Ok(())
}

fn cmd_grafakos(a: GrafakosArgs) -> Result<()> {
    echo_config(&json!({
        "command": "grafakos", "source": a.source.describe(), "levels": a.levels,
        "tol": a.tol, "seed": a.seed,
    }));
    let g = a.source.load(a.seed)?;
    let field = operator_field(&g, &RatioOperator::OneSided)?;
    let top = field.field.sup_norm();
    if top <= 0.0 {
        return Err(Error::DegenerateInput("input has no positive part".into()));
    }
    // Keep every superlevel component away from the left edge: a component
    // can only cross it when the first cell itself is in the set.
    let floor = (0.05 * top).max(1.15 * field.field.values[0]);
    let ladder = geometric_levels(floor, 0.9 * top, a.levels)?;
    let rows = grafakos_check(&g, &ladder)?;
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let bound = a.tol + 2.0 * g.h;
    let report = json!({
        "levels": a.levels,
        "floor": floor,
        "worst_residual": worst,
        "bound": bound,
        "rows": rows,
    });
    let text = pretty(&report)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        write_out(dir, "grafakos.json", &(text + "\n"))?;
        write_out(dir, "grafakos.csv", &grafakos_csv(&rows))?;
    }
    if worst > bound {
        return Err(Error::Inconsistent(format!(
            "exchange-identity residual {worst:e} exceeds {bound:e}"
        )));
    }
    Ok(())
}

fn cmd_constants(a: ConstantsArgs) -> Result<()> {
    echo_config(&json!({
        "command": "constants", "p": a.p, "lambda": a.lambda, "n": a.n,
        "lambda_limit": a.lambda_limit, "eps": a.eps, "eta": a.eta, "b": a.besicovitch,
    }));
    if a.lambda_limit {
        let c = maxlab::bellman::limit_constant(a.p)?;
        println!("{c:.6}");
        if let Some(dir) = &a.out {
            write_out(dir, "constants.json", &format!("{{\"limit\": {c}}}\n"))?;
        }
        return Ok(());
    }
    let mut report = serde_json::to_value(theorem_constants(a.p, a.lambda, a.n)?)?;
    if let (Some(eps), Some(eta), Some(b)) = (a.eps, a.eta, a.besicovitch) {
        let ac = almost_centered_bound(a.n, a.p, a.lambda, eps, eta, b)?;
        report["almost_centered"] = json!(ac);
    }
    let text = pretty(&report)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        write_out(dir, "constants.json", &(text + "\n"))?;
    }
    Ok(())
}

fn cmd_counterexample(a: CounterexampleArgs) -> Result<()> {
    echo_config(&json!({
        "command": "counterexample", "n": a.n, "l": a.l, "subsample": a.subsample,
    }));
    let report = centered_counterexample_report(a.n, a.l, None, a.subsample)?;
    let text = pretty(&report)?;
    println!("{text}");
    if let Some(dir) = &a.out {
        write_out(dir, "counterexample.json", &(text + "\n"))?;
    }
    Ok(())
}
