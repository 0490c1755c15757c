//! The `robrsvd` command: decompose | simulate | gcv-trace | transform.
//!
//! Each subcommand has a library entry point (`cmd_*`) that takes a resolved
//! configuration and writes its files plus a manifest. The manifest echoes
//! the configuration as TOML, which can be passed back through `--config`
//! to reproduce the run; no timestamps or host details are recorded, so
//! reruns produce identical files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use robrsvd_core::bench::SummaryRow;
use robrsvd_core::decomp::{penalties_for, resolve_scale, robust_weights};
use robrsvd_core::select::{select_lambda_u, select_lambda_v};
use robrsvd_core::{
    energy_percentages, fit, fit_rank_one_svd, initial_fill, interpolate, log_transform, ComponentPair,
    Decomposition, GcvTrace, Huber, InitialFill, Method, ObservedMatrix, PenaltyKind, TwoWayPenaltySpec,
};
use serde::Serialize;

use crate::config::{
    scale_source, to_toml, DecomposeArgs, DecomposeConfig, GcvTraceArgs, GcvTraceConfig, MatrixOutput,
    OutputFormat, Side, SimulateArgs, SimulateConfig, TransformArgs, TransformConfig,
};
use crate::error::{Error, Result};
use crate::ingest::{self, Format, LabeledMatrix, MatrixFile, MatrixJson};
use crate::output::{csv_number, gcv_trace_csv, curve_csv, summary_csv, vector_csv, write_json, write_text};
use crate::runner::run_benchmark_parallel;

#[derive(Debug, Parser)]
#[command(name = "robrsvd", version, about = "Robust regularized SVD for two-way functional data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract rank-one components from a matrix file
    Decompose(DecomposeArgs),
    /// Compare SVD, RSVD and RobRSVD on simulated data
    Simulate(SimulateArgs),
    /// GCV scores of one conditional update from the SVD start
    GcvTrace(GcvTraceArgs),
    /// Convert a matrix file, optionally applying log2(x + 1/2)
    Transform(TransformArgs),
}

pub fn main() -> ExitCode {
    main_with(std::env::args_os())
}

pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Decompose(args) => {
            let cfg = args.resolve()?;
            let report = cmd_decompose(&cfg)?;
            for (k, c) in report.decomposition.components.iter().enumerate() {
                let mut line = format!(
                    "component {}: s = {}, lambda_u = {}, lambda_v = {}, iterations = {}, converged = {}",
                    k + 1,
                    c.s,
                    c.lambda_u,
                    c.lambda_v,
                    c.iterations,
                    c.converged
                );
                if let Some(Some(st)) = report.decomposition.imputation.get(k) {
                    line.push_str(&format!(", imputation rounds = {}", st.round));
                }
                println!("{line}");
            }
            println!("wrote {} files to {}", report.outputs.len(), cfg.output_dir.display());
        }
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            let rows = cmd_simulate(&cfg)?;
            for r in rows.iter().filter(|r| matches!(r.metric.as_str(), "l2_u" | "l2_v" | "abs_s")) {
                println!(
                    "{:<15} {:<8} sigma2={:<6} {:<6} median={:.6} (failures {})",
                    r.scenario, r.method, r.sigma2, r.metric, r.median, r.failures
                );
            }
        }
        Command::GcvTrace(args) => {
            let cfg = args.resolve()?;
            let trace = cmd_gcv_trace(&cfg)?;
            if let Some(c) = trace.chosen() {
                println!("chosen lambda = {} (gcv = {}, trace = {})", c.lambda, c.gcv, c.hat_trace);
            }
        }
        Command::Transform(args) => {
            let cfg = args.resolve()?;
            cmd_transform(&cfg)?;
            println!("wrote {}", cfg.output.display());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seeds: Vec<u64>,
    outputs: Vec<String>,
    config: &'a C,
    /// Pass this back through `--config` to reproduce the run.
    config_toml: String,
}

fn write_manifest<C: Serialize>(
    path: &Path,
    command: &'static str,
    config: &C,
    seeds: Vec<u64>,
    outputs: &[PathBuf],
) -> Result<()> {
    let manifest = Manifest {
        tool: "robrsvd",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seeds,
        outputs: outputs
            .iter()
            .map(|p| p.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned()))
            .collect(),
        config,
        config_toml: to_toml(config)?,
    };
    write_json(path, &manifest)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|f| f.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_input(file: &MatrixFile, log2_half: bool) -> Result<LabeledMatrix> {
    let m = ingest::load(file)?;
    if log2_half {
        let data = log_transform(&m.data)?;
        Ok(m.with_data(data))
    } else {
        Ok(m)
    }
}

/// What a `decompose` run produced.
#[derive(Debug)]
pub struct DecomposeReport {
    pub input: LabeledMatrix,
    pub decomposition: Decomposition,
    /// Energy percentages of the (imputed, when cells are missing) input.
    pub energy: Vec<f64>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Serialize)]
struct ImputationSummary {
    rounds: usize,
    converged: bool,
    last_change: f64,
}

#[derive(Serialize)]
struct SplineSample {
    u: Option<Vec<(f64, f64)>>,
    v: Option<Vec<(f64, f64)>>,
}

#[derive(Serialize)]
struct DecompositionJson<'a> {
    method: Method,
    components: &'a [ComponentPair],
    imputation: Vec<Option<ImputationSummary>>,
    energy: &'a [f64],
    splines: Vec<SplineSample>,
    residual: MatrixJson,
    reconstruction: MatrixJson,
}

pub fn cmd_decompose(cfg: &DecomposeConfig) -> Result<DecomposeReport> {
    let file = cfg.matrix_file()?;
    let opts = cfg.options()?;
    let input = load_input(&file, cfg.log2_half)?;
    let x = &input.data;
    let dec = fit(x, cfg.method, cfg.rank, &opts)?;

    let filled = match dec.imputation.first() {
        Some(Some(st)) => st.filled.clone(),
        _ => x.values().clone(),
    };
    let energy = energy_percentages(&filled, x.rows().min(x.cols()))?;

    let residual = input.with_data(ObservedMatrix::new(
        dec.residual.residuals().clone(),
        dec.residual.mask().to_vec(),
        x.row_grid().to_vec(),
        x.col_grid().to_vec(),
    )?);
    let reconstruction = input.with_data(ObservedMatrix::new(
        dec.reconstruction(cfg.rank),
        vec![true; x.rows() * x.cols()],
        x.row_grid().to_vec(),
        x.col_grid().to_vec(),
    )?);
    // a natural cubic spline needs three knots; shorter sides get no curve
    let curve = |values: &[f64], grid: &[f64]| -> Result<Option<Vec<(f64, f64)>>> {
        if grid.len() < 3 {
            return Ok(None);
        }
        Ok(Some(interpolate(values, grid)?.sample(cfg.spline_points)))
    };
    let splines = dec
        .components
        .iter()
        .map(|c| Ok((curve(&c.u, x.row_grid())?, curve(&c.v, x.col_grid())?)))
        .collect::<Result<Vec<_>>>()?;

    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let mut outputs = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let path = dir.join(name);
        write_text(&path, &text)?;
        outputs.push(path);
        Ok(())
    };
    match cfg.output_format {
        OutputFormat::Csv => {
            let mut table = String::from(
                "component,s,lambda_u,lambda_v,iterations,converged,sigma,objective,imputation_rounds,imputation_converged\n",
            );
            for (k, c) in dec.components.iter().enumerate() {
                let (rounds, ok) = match &dec.imputation[k] {
                    Some(st) => (st.round, st.converged),
                    None => (0, true),
                };
                table.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    k + 1,
                    csv_number(c.s),
                    csv_number(c.lambda_u),
                    csv_number(c.lambda_v),
                    c.iterations,
                    c.converged,
                    csv_number(c.diagnostics.sigma),
                    csv_number(c.final_objective),
                    rounds,
                    ok
                ));
            }
            put("components.csv".into(), table)?;
            for (k, c) in dec.components.iter().enumerate() {
                let id = k + 1;
                put(
                    format!("u{id}.csv"),
                    vector_csv(&input.row_label_name, &input.row_labels, x.row_grid(), &c.u),
                )?;
                put(
                    format!("v{id}.csv"),
                    vector_csv(&input.col_label_name, &input.col_labels, x.col_grid(), &c.v),
                )?;
                let (su, sv) = &splines[k];
                if let Some(su) = su {
                    put(format!("u{id}_spline.csv"), curve_csv(su))?;
                }
                if let Some(sv) = sv {
                    put(format!("v{id}_spline.csv"), curve_csv(sv))?;
                }
                if let Some(t) = &c.diagnostics.gcv_u {
                    put(format!("gcv_u{id}.csv"), gcv_trace_csv(t))?;
                }
                if let Some(t) = &c.diagnostics.gcv_v {
                    put(format!("gcv_v{id}.csv"), gcv_trace_csv(t))?;
                }
            }
            let mut e = String::from("component,percent\n");
            for (k, p) in energy.iter().enumerate() {
                e.push_str(&format!("{},{}\n", k + 1, csv_number(*p)));
            }
            put("energy.csv".into(), e)?;
            put("residual.csv".into(), ingest::to_dense_csv(&residual, &cfg.missing_token))?;
            put("reconstruction.csv".into(), ingest::to_dense_csv(&reconstruction, &cfg.missing_token))?;
        }
        OutputFormat::Json => {
            let doc = DecompositionJson {
                method: dec.method,
                components: &dec.components,
                imputation: dec
                    .imputation
                    .iter()
                    .map(|s| {
                        s.as_ref().map(|s| ImputationSummary {
                            rounds: s.round,
                            converged: s.converged,
                            last_change: s.last_change,
                        })
                    })
                    .collect(),
                energy: &energy,
                splines: splines.iter().map(|(u, v)| SplineSample { u: u.clone(), v: v.clone() }).collect(),
                residual: MatrixJson::from(&residual),
                reconstruction: MatrixJson::from(&reconstruction),
            };
            let mut text = serde_json::to_string_pretty(&doc)?;
            text.push('\n');
            put("decomposition.json".into(), text)?;
        }
    }
    write_manifest(&dir.join("manifest.json"), "decompose", cfg, Vec::new(), &outputs)?;
    Ok(DecomposeReport {
        input,
        decomposition: dec,
        energy,
        outputs,
    })
}

/// Runs the benchmark and writes `summary.csv` (or `summary.json`) and the
/// manifest into the output directory.
pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<Vec<SummaryRow>> {
    let bench = cfg.benchmark()?;
    let rows = run_benchmark_parallel(&bench, cfg.threads)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let path = match cfg.output_format {
        OutputFormat::Csv => {
            let p = dir.join("summary.csv");
            write_text(&p, &summary_csv(&rows))?;
            p
        }
        OutputFormat::Json => {
            let p = dir.join("summary.json");
            write_json(&p, &rows)?;
            p
        }
    };
    write_manifest(&dir.join("manifest.json"), "simulate", cfg, vec![cfg.seed], &[path])?;
    Ok(rows)
}

/// Scores the smoothing grid for the update of the free side, holding the
/// other side at the leading SVD pair of the (row-mean filled) input. The
/// other smoothing parameter sits at the first grid value, as at the start
/// of the IRLS loop.
pub fn cmd_gcv_trace(cfg: &GcvTraceConfig) -> Result<GcvTrace> {
    let grid = cfg.grid()?;
    let huber = match cfg.method {
        Method::Rsvd => Huber::squared(),
        Method::RobRsvd => Huber::new(cfg.theta).map_err(|e| Error::Config(format!("theta: {e}")))?,
        Method::Svd => return Err(Error::Config("gcv-trace needs method rsvd or robrsvd".to_string())),
    };
    let scale = scale_source(&cfg.sigma)?;
    let input = load_input(&cfg.matrix_file()?, cfg.log2_half)?;
    let filled = initial_fill(&input.data, InitialFill::RowMean)?;
    let x = ObservedMatrix::new(
        filled,
        vec![true; input.data.rows() * input.data.cols()],
        input.data.row_grid().to_vec(),
        input.data.col_grid().to_vec(),
    )?;
    let sigma = match cfg.method {
        Method::RobRsvd => resolve_scale(&x, scale)?,
        _ => 1.0,
    };
    let start = fit_rank_one_svd(&x)?;
    let (ou, ov) = penalties_for(&x, PenaltyKind::NaturalSpline)?;
    let spec = TwoWayPenaltySpec::new(ou, ov, grid.first(), grid.first())?;
    let trace = match cfg.fixed_side {
        Side::U => {
            let v: Vec<f64> = start.v.iter().map(|a| a * start.s).collect();
            let w = robust_weights(&x, &start.u, &v, huber, sigma);
            select_lambda_v(&x, &start.u, &w, &spec, &grid)?.1
        }
        Side::V => {
            let u: Vec<f64> = start.u.iter().map(|a| a * start.s).collect();
            let w = robust_weights(&x, &u, &start.v, huber, sigma);
            select_lambda_u(&x, &start.v, &w, &spec, &grid)?.1
        }
    };
    if let Some(dir) = cfg.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    match cfg.output_format {
        OutputFormat::Csv => write_text(&cfg.output, &gcv_trace_csv(&trace))?,
        OutputFormat::Json => write_json(&cfg.output, &trace)?,
    }
    write_manifest(
        &sibling(&cfg.output, ".manifest.json"),
        "gcv-trace",
        cfg,
        Vec::new(),
        std::slice::from_ref(&cfg.output),
    )?;
    Ok(trace)
}

pub fn cmd_transform(cfg: &TransformConfig) -> Result<LabeledMatrix> {
    if cfg.output.as_os_str().is_empty() {
        return Err(Error::Config("an output file is required (--output)".to_string()));
    }
    let m = load_input(&cfg.matrix_file()?, cfg.log2_half)?;
    if let Some(dir) = cfg.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let target = |format| MatrixFile {
        path: cfg.output.clone(),
        format,
        missing_token: cfg.missing_token.clone(),
        ..MatrixFile::new(&cfg.output, format)
    };
    match cfg.output_format {
        MatrixOutput::DenseCsv => ingest::save(&m, &target(Format::DenseCsv))?,
        MatrixOutput::HmdTriplet => ingest::save(&m, &target(Format::HmdTriplet))?,
        MatrixOutput::Json => write_text(&cfg.output, &(ingest::to_json(&m)? + "\n"))?,
    }
    write_manifest(
        &sibling(&cfg.output, ".manifest.json"),
        "transform",
        cfg,
        Vec::new(),
        std::slice::from_ref(&cfg.output),
    )?;
    Ok(m)
}
