//! Run configurations.
//!
//! Every setting can come from a TOML key-value file (`--config`) or from
//! a flag of the same name; flags win. The resolved configuration is what
//! gets echoed into the run manifest, and feeding it back through
//! `--config` reproduces the run.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use robrsvd_core::bench::BenchmarkConfig;
use robrsvd_core::sim::{Contamination, ContaminationSizes, Rank2Config, SimScenario};
use robrsvd_core::{
    DecompositionOptions, ImputationOptions, InitialFill, IrlsOptions, LambdaGrid, Method, PenaltyGrid,
    RobustLossSpec, ScaleSource,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Format, MatrixFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format '{other}' (expected csv or json)"))),
        }
    }
}

/// Side held fixed during a single conditional step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    U,
    V,
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u" => Ok(Side::U),
            "v" => Ok(Side::V),
            other => Err(Error::Config(format!("unknown side '{other}' (expected u or v)"))),
        }
    }
}

/// Output of `transform`: a matrix file format or JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixOutput {
    DenseCsv,
    HmdTriplet,
    Json,
}

impl FromStr for MatrixOutput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(MatrixOutput::Json),
            other => Ok(match Format::from_str(other)? {
                Format::DenseCsv => MatrixOutput::DenseCsv,
                Format::HmdTriplet => MatrixOutput::HmdTriplet,
            }),
        }
    }
}

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

/// Defines a resolved config struct, the matching clap flags (all optional)
/// and the file-then-flags merge.
macro_rules! settings {
    (
        $(#[doc = $sdoc:literal])*
        $name:ident, $args:ident {
            $(
                $(#[doc = $doc:literal])*
                $(@arg($($a:tt)*))?
                $field:ident : $ty:ty = $default:expr
            ),* $(,)?
        }
    ) => {
        $(#[doc = $sdoc])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            $( $(#[doc = $doc])* pub $field: $ty, )*
        }

        impl Default for $name {
            fn default() -> Self {
                Self { $( $field: $default, )* }
            }
        }

        #[derive(Debug, Clone, Default, clap::Args)]
        pub struct $args {
            /// TOML file with values for any of the options below; flags override it
            #[arg(long)]
            pub config: Option<PathBuf>,
            $(
                $(#[doc = $doc])*
                #[arg(long $(, $($a)*)?)]
                pub $field: Option<$ty>,
            )*
        }

        impl $args {
            pub fn resolve(&self) -> Result<$name> {
                let mut cfg: $name = match &self.config {
                    Some(p) => load_toml(p)?,
                    None => $name::default(),
                };
                $( if let Some(v) = &self.$field { cfg.$field = v.clone(); } )*
                Ok(cfg)
            }
        }
    };
}

settings! {
    /// `decompose`: load a matrix and extract `rank` components.
    DecomposeConfig, DecomposeArgs {
        /// Input matrix file
        input: PathBuf = PathBuf::new(),
        /// Input format: dense_csv or hmd_triplet
        format: Format = Format::DenseCsv,
        /// Cell text marking a missing value
        missing_token: String = ".".to_string(),
        /// Triplet files: header name of the value column (empty: last column)
        value_column: String = String::new(),
        /// Triplet files: header name of the row label column
        row_label_name: String = "Year".to_string(),
        /// Triplet files: header name of the column label column
        col_label_name: String = "Age".to_string(),
        /// Apply x -> log2(x + 1/2) to the input before fitting
        @arg(num_args = 0..=1, default_missing_value = "true")
        log2_half: bool = false,
        /// svd, rsvd or robrsvd
        method: Method = Method::RobRsvd,
        /// Number of components
        rank: usize = 1,
        /// Huber threshold (inf for the squared loss)
        theta: f64 = 1.345,
        /// Residual scale: "mad" or a positive number
        sigma: String = "mad".to_string(),
        /// Smallest smoothing parameter of the log-spaced grid
        lambda_min: f64 = 1e-6,
        /// Largest smoothing parameter of the log-spaced grid
        lambda_max: f64 = 1e4,
        /// Number of grid points
        lambda_count: usize = 20,
        /// Explicit smoothing parameter grid; replaces the log-spaced one
        @arg(value_delimiter = ',')
        lambdas: Vec<f64> = Vec::new(),
        /// Relative objective change that stops the IRLS loop
        tol: f64 = 1e-6,
        /// Iteration cap of the IRLS loop
        max_iter: usize = 100,
        /// Hold smoothing parameters fixed after this many iterations (0: never)
        freeze_after: usize = 5,
        /// Imputation stops when imputed cells move less than this times the data range
        imputation_tol: f64 = 1e-6,
        /// Imputation round cap
        max_rounds: usize = 50,
        /// row_mean or column_mean
        initial_fill: InitialFill = InitialFill::RowMean,
        /// Directory receiving the output files
        output_dir: PathBuf = PathBuf::from("robrsvd-out"),
        /// csv or json
        output_format: OutputFormat = OutputFormat::Csv,
        /// Points per dense spline evaluation of u and v
        spline_points: usize = 200,
    }
}

settings! {
    /// `simulate`: Monte Carlo comparison of the methods.
    SimulateConfig, SimulateArgs {
        /// Rows of the simulated matrix
        m: usize = 40,
        /// Columns of the simulated matrix
        n: usize = 40,
        /// Rank of the signal (1 or 2)
        rank: usize = 1,
        /// Scenarios: none, outlying_cells, outlying_rows, outlying_block, diagonal
        @arg(value_delimiter = ',')
        contaminations: Vec<Contamination> = Contamination::ALL.to_vec(),
        /// Noise variances
        @arg(value_delimiter = ',')
        noise_variances: Vec<f64> = vec![1.0],
        /// Methods to compare
        @arg(value_delimiter = ',')
        methods: Vec<Method> = Method::ALL.to_vec(),
        /// Replications per scenario and noise level
        replications: usize = 20,
        /// Base seed; replication k uses stream k
        seed: u64 = 2024,
        /// Cells masked at random in every draw
        mask_count: usize = 0,
        /// Outlying cells in the outlying_cells scenario
        outlier_cells: usize = 100,
        /// Outlying rows in the outlying_rows scenario
        outlier_rows: usize = 5,
        /// Side of the square block in the outlying_block scenario
        block_size: usize = 10,
        /// Second singular value relative to the first (rank 2)
        rank2_ratio: f64 = 0.35,
        /// Huber threshold (inf for the squared loss)
        theta: f64 = 1.345,
        /// Residual scale: "mad" or a positive number
        sigma: String = "mad".to_string(),
        /// Smallest smoothing parameter of the log-spaced grid
        lambda_min: f64 = 1e-6,
        /// Largest smoothing parameter of the log-spaced grid
        lambda_max: f64 = 1e4,
        /// Number of grid points
        lambda_count: usize = 20,
        /// Explicit smoothing parameter grid; replaces the log-spaced one
        @arg(value_delimiter = ',')
        lambdas: Vec<f64> = Vec::new(),
        /// Relative objective change that stops the IRLS loop
        tol: f64 = 1e-6,
        /// Iteration cap of the IRLS loop
        max_iter: usize = 100,
        /// Hold smoothing parameters fixed after this many iterations (0: never)
        freeze_after: usize = 5,
        /// Imputation stops when imputed cells move less than this times the data range
        imputation_tol: f64 = 1e-6,
        /// Imputation round cap
        max_rounds: usize = 50,
        /// row_mean or column_mean
        initial_fill: InitialFill = InitialFill::RowMean,
        /// Worker threads (0: all cores); never changes the output
        threads: usize = 0,
        /// Directory receiving the output files
        output_dir: PathBuf = PathBuf::from("robrsvd-sim"),
        /// csv or json
        output_format: OutputFormat = OutputFormat::Csv,
    }
}

settings! {
    /// `gcv-trace`: GCV scores of one conditional step from the SVD start.
    GcvTraceConfig, GcvTraceArgs {
        /// Input matrix file
        input: PathBuf = PathBuf::new(),
        /// Input format: dense_csv or hmd_triplet
        format: Format = Format::DenseCsv,
        /// Cell text marking a missing value
        missing_token: String = ".".to_string(),
        /// Triplet files: header name of the value column (empty: last column)
        value_column: String = String::new(),
        /// Triplet files: header name of the row label column
        row_label_name: String = "Year".to_string(),
        /// Triplet files: header name of the column label column
        col_label_name: String = "Age".to_string(),
        /// Apply x -> log2(x + 1/2) to the input first
        @arg(num_args = 0..=1, default_missing_value = "true")
        log2_half: bool = false,
        /// Side held fixed: u (trace the v step) or v (trace the u step)
        fixed_side: Side = Side::U,
        /// rsvd (squared loss) or robrsvd (Huber weights)
        method: Method = Method::RobRsvd,
        /// Huber threshold (inf for the squared loss)
        theta: f64 = 1.345,
        /// Residual scale: "mad" or a positive number
        sigma: String = "mad".to_string(),
        /// Smallest smoothing parameter of the log-spaced grid
        lambda_min: f64 = 1e-6,
        /// Largest smoothing parameter of the log-spaced grid
        lambda_max: f64 = 1e4,
        /// Number of grid points
        lambda_count: usize = 20,
        /// Explicit smoothing parameter grid; replaces the log-spaced one
        @arg(value_delimiter = ',')
        lambdas: Vec<f64> = Vec::new(),
        /// Output file
        output: PathBuf = PathBuf::from("gcv_trace.csv"),
        /// csv or json
        output_format: OutputFormat = OutputFormat::Csv,
    }
}

settings! {
    /// `transform`: rewrite a matrix file, optionally log-transformed.
    TransformConfig, TransformArgs {
        /// Input matrix file
        input: PathBuf = PathBuf::new(),
        /// Input format: dense_csv or hmd_triplet
        format: Format = Format::DenseCsv,
        /// Cell text marking a missing value
        missing_token: String = ".".to_string(),
        /// Triplet files: header name of the value column (empty: last column)
        value_column: String = String::new(),
        /// Triplet files: header name of the row label column
        row_label_name: String = "Year".to_string(),
        /// Triplet files: header name of the column label column
        col_label_name: String = "Age".to_string(),
        /// Apply x -> log2(x + 1/2)
        @arg(num_args = 0..=1, default_missing_value = "true")
        log2_half: bool = false,
        /// Output file
        output: PathBuf = PathBuf::new(),
        /// dense_csv, hmd_triplet or json
        output_format: MatrixOutput = MatrixOutput::DenseCsv,
    }
}

fn lambda_grid(values: &[f64], min: f64, max: f64, count: usize) -> Result<LambdaGrid> {
    let grid = if values.is_empty() {
        LambdaGrid::log_spaced(min, max, count)
    } else {
        LambdaGrid::new(values.to_vec())
    };
    grid.map_err(|e| Error::Config(format!("smoothing grid: {e}")))
}

pub fn scale_source(sigma: &str) -> Result<ScaleSource> {
    if sigma == "mad" {
        return Ok(ScaleSource::MadFromSvdResiduals);
    }
    match sigma.parse::<f64>() {
        Ok(s) if s > 0.0 && s.is_finite() => Ok(ScaleSource::Fixed(s)),
        _ => Err(Error::Config(format!("sigma must be \"mad\" or a positive number, got '{sigma}'"))),
    }
}

struct FitFields<'a> {
    theta: f64,
    sigma: &'a str,
    grid: LambdaGrid,
    tol: f64,
    max_iter: usize,
    freeze_after: usize,
    imputation_tol: f64,
    max_rounds: usize,
    initial_fill: InitialFill,
}

impl FitFields<'_> {
    fn options(self) -> Result<DecompositionOptions> {
        let loss = RobustLossSpec::new(self.theta, scale_source(self.sigma)?)
            .map_err(|e| Error::Config(format!("theta: {e}")))?;
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config("tol must be positive and max_iter at least 1".to_string()));
        }
        if !(self.imputation_tol > 0.0) || self.max_rounds == 0 {
            return Err(Error::Config("imputation_tol must be positive and max_rounds at least 1".to_string()));
        }
        Ok(DecompositionOptions {
            loss,
            grid: PenaltyGrid::same(self.grid),
            irls: IrlsOptions {
                tol: self.tol,
                max_iter: self.max_iter,
                freeze_lambda_after: (self.freeze_after > 0).then_some(self.freeze_after),
                ..IrlsOptions::default()
            },
            imputation: ImputationOptions {
                initial_fill: self.initial_fill,
                tol: self.imputation_tol,
                max_rounds: self.max_rounds,
            },
        })
    }
}

fn matrix_file(
    input: &Path,
    format: Format,
    missing_token: &str,
    value_column: &str,
    row_label_name: &str,
    col_label_name: &str,
) -> Result<MatrixFile> {
    if input.as_os_str().is_empty() {
        return Err(Error::Config("an input file is required (--input)".to_string()));
    }
    Ok(MatrixFile {
        path: input.to_path_buf(),
        format,
        missing_token: missing_token.to_string(),
        row_label_name: row_label_name.to_string(),
        col_label_name: col_label_name.to_string(),
        value_column: (!value_column.is_empty()).then(|| value_column.to_string()),
    })
}

impl DecomposeConfig {
    pub fn matrix_file(&self) -> Result<MatrixFile> {
        matrix_file(
            &self.input,
            self.format,
            &self.missing_token,
            &self.value_column,
            &self.row_label_name,
            &self.col_label_name,
        )
    }

    pub fn options(&self) -> Result<DecompositionOptions> {
        if self.rank == 0 {
            return Err(Error::Config("rank must be at least 1".to_string()));
        }
        if self.spline_points < 2 {
            return Err(Error::Config("spline_points must be at least 2".to_string()));
        }
        FitFields {
            theta: self.theta,
            sigma: &self.sigma,
            grid: lambda_grid(&self.lambdas, self.lambda_min, self.lambda_max, self.lambda_count)?,
            tol: self.tol,
            max_iter: self.max_iter,
            freeze_after: self.freeze_after,
            imputation_tol: self.imputation_tol,
            max_rounds: self.max_rounds,
            initial_fill: self.initial_fill,
        }
        .options()
    }
}

impl SimulateConfig {
    pub fn benchmark(&self) -> Result<BenchmarkConfig> {
        if !(1..=2).contains(&self.rank) {
            return Err(Error::Config(format!("rank must be 1 or 2, got {}", self.rank)));
        }
        let options = FitFields {
            theta: self.theta,
            sigma: &self.sigma,
            grid: lambda_grid(&self.lambdas, self.lambda_min, self.lambda_max, self.lambda_count)?,
            tol: self.tol,
            max_iter: self.max_iter,
            freeze_after: self.freeze_after,
            imputation_tol: self.imputation_tol,
            max_rounds: self.max_rounds,
            initial_fill: self.initial_fill,
        }
        .options()?;
        let cfg = BenchmarkConfig {
            base: SimScenario {
                rank: self.rank,
                m: self.m,
                n: self.n,
                sizes: ContaminationSizes {
                    cells: self.outlier_cells,
                    rows: self.outlier_rows,
                    block: self.block_size,
                },
                rank2: Rank2Config {
                    ratio: self.rank2_ratio,
                    ..Rank2Config::default()
                },
                seed: self.seed,
                ..SimScenario::default()
            },
            contaminations: self.contaminations.clone(),
            noise_variances: self.noise_variances.clone(),
            methods: self.methods.clone(),
            replications: self.replications,
            mask_count: self.mask_count,
            options,
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}

impl GcvTraceConfig {
    pub fn matrix_file(&self) -> Result<MatrixFile> {
        matrix_file(
            &self.input,
            self.format,
            &self.missing_token,
            &self.value_column,
            &self.row_label_name,
            &self.col_label_name,
        )
    }

    pub fn grid(&self) -> Result<LambdaGrid> {
        lambda_grid(&self.lambdas, self.lambda_min, self.lambda_max, self.lambda_count)
    }
}

impl TransformConfig {
    pub fn matrix_file(&self) -> Result<MatrixFile> {
        matrix_file(
            &self.input,
            self.format,
            &self.missing_token,
            &self.value_column,
            &self.row_label_name,
            &self.col_label_name,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "rank = 3\nmethod = \"rsvd\"\nlambdas = [0.5]\ntheta = inf\n").unwrap();
        let args = DecomposeArgs {
            config: Some(path),
            rank: Some(2),
            ..DecomposeArgs::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.rank, 2);
        assert_eq!(cfg.method, Method::Rsvd);
        assert_eq!(cfg.lambdas, [0.5]);
        assert_eq!(cfg.theta, f64::INFINITY);
        assert_eq!(cfg.missing_token, ".");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "rnak = 3\n").unwrap();
        let args = DecomposeArgs {
            config: Some(path),
            ..DecomposeArgs::default()
        };
        assert!(args.resolve().unwrap_err().to_string().contains("rnak"));
    }

    #[test]
    fn resolved_config_round_trips_through_toml() {
        let cfg = SimulateConfig {
            seed: 7,
            theta: f64::INFINITY,
            ..SimulateConfig::default()
        };
        let back: SimulateConfig = toml::from_str(&to_toml(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_messages() {
        let bad = |cfg: DecomposeConfig| cfg.options().unwrap_err().to_string();
        assert!(bad(DecomposeConfig { rank: 0, ..Default::default() }).contains("rank"));
        assert!(bad(DecomposeConfig { sigma: "x".into(), ..Default::default() }).contains("sigma"));
        assert!(bad(DecomposeConfig { theta: -1.0, ..Default::default() }).contains("theta"));
        assert!(bad(DecomposeConfig { lambda_count: 0, ..Default::default() }).contains("grid"));
        assert!(DecomposeConfig::default().matrix_file().is_err());
        let sim = SimulateConfig { rank: 3, ..Default::default() };
        assert!(sim.benchmark().is_err());
    }
}
