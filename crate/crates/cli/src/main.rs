use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use curekit::io::{emit, format_float, ingest_csv, write_sample, Columns, Format, Output, Report};
use curekit::stats::quantile;
use curekit::{
    conditional_survival, latency, probcure, simulate_model, testcov_with, testmz, BandwidthSpec,
    CensoringModel, ControlParams, CovTestOptions, CureError, ErrorClass, SurvivalSample,
};

#[derive(Parser, Debug)]
#[command(
    name = "curekit",
    version,
    about = "Nonparametric mixture cure models for right-censored data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Conditional survival S(t | x0) (Beran estimator)
    Beran(Estimate),
    /// Cure probability 1 - p(x0)
    Probcure(Estimate),
    /// Latency S0(t | x0) of the uncured
    Latency(Estimate),
    /// Covariate significance test for the cure probability
    Testcov(TestCov),
    /// Test for sufficient follow-up
    Testmz(TestMz),
    /// Draw a sample from the logistic/Weibull cure model
    Simulate(Simulate),
}

#[derive(Args, Debug)]
struct Data {
    /// CSV file with a header row
    #[arg(long)]
    input: PathBuf,
    /// Covariate column
    #[arg(long, default_value = "x")]
    x: String,
    /// Observed time column
    #[arg(long, default_value = "t")]
    t: String,
    /// Event indicator column (1 = event, 0 = censored)
    #[arg(long, default_value = "d")]
    d: String,
    /// Treat the covariate as categorical even if numeric
    #[arg(long)]
    categorical: bool,
}

#[derive(Args, Debug)]
struct Control {
    /// Bootstrap resamples
    #[arg(long = "B", default_value_t = 999)]
    b: usize,
    /// Bandwidth grid bounds, in standardized-IQR units
    #[arg(long, value_name = "LO,HI", default_value = "0.1,3")]
    hbound: String,
    /// Bandwidth grid length
    #[arg(long, default_value_t = 100)]
    hl: usize,
    /// Pilot nearest-neighbour fraction
    #[arg(long, default_value_t = 0.25)]
    nnfrac: f64,
    /// Time quantile bounding the latency error integral
    #[arg(long, default_value_t = 0.75)]
    qt: f64,
    /// Moving-average window for selected bandwidths
    #[arg(long, default_value_t = 1)]
    hsmooth: usize,
    /// Keep the bandwidth grid and criterion in JSON output
    #[arg(long)]
    hsave: bool,
    /// Bootstrap seed (a fixed default when absent)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct Out {
    /// CSV rows, or a JSON report with the parameters and seed
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Output file (standard output when absent)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Estimate {
    #[command(flatten)]
    data: Data,
    /// Comma-separated covariate values
    #[arg(long, conflicts_with = "x0_grid")]
    x0: Option<String>,
    /// Covariate grid between two quantiles: LO,HI,N
    #[arg(long, value_name = "LO,HI,N")]
    x0_grid: Option<String>,
    /// Bandwidth: one value, or one per x0 (selected from data when absent)
    #[arg(long, allow_hyphen_values = true)]
    h: Option<String>,
    /// Treat --h as per-point bandwidths
    #[arg(long, conflicts_with = "global")]
    local: bool,
    /// Use a single --h value at every point
    #[arg(long)]
    global: bool,
    /// Comma-separated evaluation times (distinct observed times by default)
    #[arg(long)]
    times: Option<String>,
    /// Confidence level of bootstrap bands
    #[arg(long)]
    conflevel: Option<f64>,
    #[command(flatten)]
    control: Control,
    #[command(flatten)]
    out: Out,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Censoring {
    Unconditional,
    Conditional,
}

impl From<Censoring> for CensoringModel {
    fn from(c: Censoring) -> Self {
        match c {
            Censoring::Unconditional => CensoringModel::Unconditional,
            Censoring::Conditional => CensoringModel::Conditional,
        }
    }
}

#[derive(Args, Debug)]
struct TestCov {
    #[command(flatten)]
    data: Data,
    /// Censoring estimate in the synthetic responses
    #[arg(long, value_enum, default_value_t = Censoring::Unconditional)]
    eta_censoring: Censoring,
    /// Censoring law generating bootstrap censoring times
    #[arg(long, value_enum, default_value_t = Censoring::Unconditional)]
    resample_censoring: Censoring,
    /// Re-estimate the cure threshold on every resample
    #[arg(long)]
    refit_tau: bool,
    #[command(flatten)]
    control: Control,
    #[command(flatten)]
    out: Out,
}

#[derive(Args, Debug)]
struct TestMz {
    #[command(flatten)]
    data: Data,
    #[command(flatten)]
    out: Out,
}

#[derive(Args, Debug)]
struct Simulate {
    /// Sample size
    #[arg(long)]
    n: usize,
    /// Simulation seed (a fixed default when absent)
    #[arg(long)]
    seed: Option<u64>,
    /// Sample file (columns x, t, d)
    #[arg(long)]
    output: PathBuf,
    /// True cure and latency values on a grid (default: <output>.truth.csv)
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> CureError {
    CureError::InvalidArgument(msg.into())
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CureError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("{what}: `{v}` is not a number")))
        })
        .collect()
}

impl Control {
    fn params(&self) -> Result<ControlParams, CureError> {
        let bounds = parse_list(&self.hbound, "--hbound")?;
        let [lo, hi] = bounds[..] else {
            return Err(usage("--hbound expects LO,HI"));
        };
        let p = ControlParams {
            b: self.b,
            hbound: (lo, hi),
            hl: self.hl,
            hsave: self.hsave,
            nnfrac: self.nnfrac,
            fpilot: None,
            qt: self.qt,
            hsmooth: self.hsmooth,
            seed: self.seed,
        };
        p.validate()?;
        Ok(p)
    }
}

impl Data {
    fn load(&self) -> Result<SurvivalSample, CureError> {
        let cols = Columns {
            x: self.x.clone(),
            t: self.t.clone(),
            d: self.d.clone(),
            categorical: self.categorical,
        };
        let ingested = ingest_csv(&self.input, &cols)?;
        if ingested.dropped > 0 {
            eprintln!(
                "warning: dropped {} rows with missing values",
                ingested.dropped
            );
        }
        Ok(ingested.sample)
    }
}

impl Estimate {
    fn grid(&self, sample: &SurvivalSample) -> Result<Vec<f64>, CureError> {
        if let Some(list) = &self.x0 {
            return parse_list(list, "--x0");
        }
        let spec = self.x0_grid.as_deref().unwrap_or("0.05,0.95,100");
        let v = parse_list(spec, "--x0-grid")?;
        let [lo, hi, n] = v[..] else {
            return Err(usage("--x0-grid expects LO,HI,N"));
        };
        if !(0.0..=1.0).contains(&lo)
            || !(0.0..=1.0).contains(&hi)
            || lo > hi
            || n < 1.0
            || n.fract() != 0.0
        {
            return Err(usage(
                "--x0-grid needs 0 <= LO <= HI <= 1 and a positive integer N",
            ));
        }
        let xs = sample.x()?;
        let (a, b) = (quantile(xs, lo), quantile(xs, hi));
        let n = n as usize;
        if n == 1 {
            return Ok(vec![a]);
        }
        Ok((0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect())
    }

    fn bandwidth(&self) -> Result<Option<BandwidthSpec>, CureError> {
        let Some(h) = &self.h else {
            if self.global {
                return Err(usage("--global requires --h"));
            }
            return Ok(None);
        };
        let v = parse_list(h, "--h")?;
        Ok(Some(if self.local || (v.len() > 1 && !self.global) {
            BandwidthSpec::Local(v)
        } else if v.len() == 1 {
            BandwidthSpec::Global(v[0])
        } else {
            return Err(usage("--global takes a single bandwidth"));
        }))
    }
}

fn format_of(f: OutFormat) -> Format {
    match f {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    }
}

fn estimate(name: &str, args: &Estimate) -> Result<(), CureError> {
    let sample = args.data.load()?;
    let params = args.control.params()?;
    let x0 = args.grid(&sample)?;
    let h = args.bandwidth()?;
    let times = args
        .times
        .as_deref()
        .map(|t| parse_list(t, "--times"))
        .transpose()?;
    let output = match name {
        "probcure" => Output::Cure(probcure(&sample, &x0, h.as_ref(), args.conflevel, &params)?),
        "latency" => Output::Curve(latency(
            &sample,
            &x0,
            h.as_ref(),
            times.as_deref(),
            args.conflevel,
            &params,
        )?),
        _ => Output::Curve(conditional_survival(
            &sample,
            &x0,
            h.as_ref(),
            times.as_deref(),
            args.conflevel,
            &params,
        )?),
    };
    let report = Report::new(name, &params, output);
    emit(
        &report,
        format_of(args.out.format),
        args.out.output.as_deref(),
    )
}

fn run(cli: Cli) -> Result<(), CureError> {
    match &cli.command {
        Command::Beran(a) => estimate("beran", a),
        Command::Probcure(a) => estimate("probcure", a),
        Command::Latency(a) => estimate("latency", a),
        Command::Testcov(a) => {
            let sample = a.data.load()?;
            let params = a.control.params()?;
            let options = CovTestOptions {
                eta: a.eta_censoring.into(),
                resample: a.resample_censoring.into(),
                refit_tau: a.refit_tau,
            };
            let r = testcov_with(&sample, &params, &options)?;
            let report = Report::new("testcov", &params, Output::CovTest(r));
            emit(&report, format_of(a.out.format), a.out.output.as_deref())
        }
        Command::Testmz(a) => {
            let sample = a.data.load()?;
            let report = Report::new(
                "testmz",
                &ControlParams::default(),
                Output::MzTest(testmz(&sample)),
            );
            emit(&report, format_of(a.out.format), a.out.output.as_deref())
        }
        Command::Simulate(a) => {
            let seed = a.seed.unwrap_or(curekit::DEFAULT_SEED);
            let sim = simulate_model(a.n, seed)?;
            write_sample(&sim.sample, &a.output)?;
            let truth = a.truth.clone().unwrap_or_else(|| sidecar(&a.output));
            write_truth(&sim.model, &truth)
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.truth.csv"))
}

fn write_truth(model: &curekit::TrueModel, path: &Path) -> Result<(), CureError> {
    let xs: Vec<f64> = (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect();
    let ts: Vec<f64> = (0..=40).map(|i| 0.1 * i as f64).collect();
    let mut text = String::from("x,t,cure,latency\n");
    for r in model.table(&xs, &ts) {
        text.push_str(&format!(
            "{},{},{},{}\n",
            format_float(r.x),
            format_float(r.t),
            format_float(r.cure),
            format_float(r.latency)
        ));
    }
    std::fs::write(path, text).map_err(|source| CureError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn exit_code(err: &CureError) -> u8 {
    match err.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let line: Vec<&str> = msg
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!(
                "error[usage]: {}",
                line.join(" ").trim_start_matches("error: ")
            );
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {line}", e.code());
            ExitCode::from(exit_code(&e))
        }
    }
}
