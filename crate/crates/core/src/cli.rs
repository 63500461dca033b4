//! The `spdcm` command-line front end.
//!
//! Every table is written as CSV (a `#` metadata block, a header row, data
//! rows, then `#` summary lines) or as JSON with `meta`, `columns`, `rows` and
//! `summary` members. Exit codes: 0 success, 2 usage or invalid parameter,
//! 3 data or model error.

use std::f64::consts::{PI, TAU};
use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::calibration::{calibrate, read_rates_file};
use crate::detector::{Arity, DetectorModel};
use crate::engine::{fourfold_distribution, DetectionPattern, FOURFOLD_PATTERNS};
use crate::error::{Error, Location, Result};
use crate::estimation::{
    bootstrap_fisher_band, fisher_curve, fisher_maximum, monte_carlo_ml_fisher, performance_curve,
    snl_fisher, FringeSample, MonteCarloConfig, Resampling, TheoryFamily, PROBABILITY_FLOOR,
};
use crate::fock::{RotationSpec, SourceParams};
use crate::heralding::herald_table;
use crate::sampling::{multinomial, stream_rng};
use crate::timetag::{
    count_coincidences, generate_synthetic_timetags, parse_timetags, write_binary, write_text,
    ChannelMap, CounterConfig, Format, ParseOptions, SyntheticConfig, WindowAnchor,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// An angle in radians. Parses `1.2`, `1.2rad`, `80deg`, `80°` and `0.5pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(pub f64);

impl FromStr for Angle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let (num, scale) = if let Some(v) = t.strip_suffix("deg").or_else(|| t.strip_suffix('°')) {
            (v, PI / 180.0)
        } else if let Some(v) = t.strip_suffix("pi") {
            (if v.trim().is_empty() { "1" } else { v }, PI)
        } else {
            (t.strip_suffix("rad").unwrap_or(&t), 1.0)
        };
        let v: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::domain(format!("cannot read {s:?} as an angle")))?;
        if !v.is_finite() {
            return Err(Error::domain(format!("angle {s:?} is not finite")));
        }
        Ok(Angle(v * scale))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TimetagFormat {
    Text,
    Binary,
}

impl From<TimetagFormat> for Format {
    fn from(f: TimetagFormat) -> Self {
        match f {
            TimetagFormat::Text => Format::Text,
            TimetagFormat::Binary => Format::Binary,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "spdcm",
    version,
    about = "Phase estimation with down-converted multi-photon states and multiplexed detectors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Four-fold pattern probabilities over a phase grid.
    Fringes(FringesArgs),
    /// Fisher information curve, bootstrap band, ML benchmark and shot-noise baseline.
    Fisher(FisherArgs),
    /// Recover gain and efficiencies from phase-averaged rates.
    Calibrate(CalibrateArgs),
    /// Heralded information per photon, rows by herald level.
    Herald(HeraldArgs),
    /// Count coincidence patterns in a timetag file.
    Count(CountArgs),
    /// Phase uncertainty against efficiency, relative to the shot-noise limit.
    Curve(CurveArgs),
    /// Write a synthetic timetag stream.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Squeezing parameter.
    #[arg(long, default_value_t = 0.061)]
    pub tau: f64,
    /// Efficiency of the sensing path.
    #[arg(long, default_value_t = 0.23)]
    pub eta_a: f64,
    /// Efficiency of the reference path.
    #[arg(long, default_value_t = 0.12)]
    pub eta_b: f64,
    /// Detectors per mode, or `inf` for photon-number resolution.
    #[arg(long, default_value = "4")]
    pub d: Arity,
    /// Reference-path rotation.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub theta: Angle,
    /// Neglected pair-number probability.
    #[arg(long, default_value = "1e-12")]
    pub eps: f64,
}

impl ModelArgs {
    fn build(&self) -> Result<(SourceParams, DetectorModel)> {
        let src = SourceParams::new(self.tau)?.with_epsilon(self.eps)?;
        let det = DetectorModel::for_source(self.d, self.eta_a, self.eta_b, &src)?;
        Ok((src, det))
    }

    fn meta(&self, src: &SourceParams, meta: &mut Meta) -> Result<()> {
        meta.push("tau", self.tau);
        meta.push("eta_a", self.eta_a);
        meta.push("eta_b", self.eta_b);
        meta.push("d", self.d.to_string());
        meta.push("theta", self.theta.0);
        meta.push("eps", self.eps);
        meta.push("n_max", src.n_max()?);
        Ok(())
    }
}

#[derive(Debug, Clone, Args)]
pub struct PhiGrid {
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub phi_start: Angle,
    #[arg(long, default_value = "2pi", allow_hyphen_values = true)]
    pub phi_stop: Angle,
    /// Grid points, both ends included.
    #[arg(long, default_value_t = 100)]
    pub phi_steps: usize,
}

impl PhiGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let (a, b, n) = (self.phi_start.0, self.phi_stop.0, self.phi_steps);
        match n {
            0 => Err(Error::domain("phi grid needs at least one point")),
            1 => Ok(vec![a]),
            _ => Ok((0..n)
                .map(|i| {
                    let t = i as f64 / (n - 1) as f64;
                    a * (1.0 - t) + b * t
                })
                .collect()),
        }
    }

    fn meta(&self, meta: &mut Meta) {
        meta.push("phi_start", self.phi_start.0);
        meta.push("phi_stop", self.phi_stop.0);
        meta.push("phi_steps", self.phi_steps);
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct FringesArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: PhiGrid,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FisherArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: PhiGrid,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Measured four-fold counts, `phi,<pattern>,...` with a header row.
    /// Without it, counts are simulated from the model.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Simulated four-fold events per phase setting.
    #[arg(long, default_value_t = 2000)]
    pub events: u64,
    /// Simulated phase settings, evenly spread over one period.
    #[arg(long, default_value_t = 24)]
    pub data_phases: usize,
    /// Bootstrap iterations.
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    /// Phases at which the ML estimator is benchmarked.
    #[arg(long, default_value_t = 3)]
    pub ml_phases: usize,
    /// Events per simulated ML experiment.
    #[arg(long, default_value_t = 1000)]
    pub ml_samples: u64,
    /// Simulated ML experiments per phase.
    #[arg(long, default_value_t = 200)]
    pub ml_reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// Rates file with header `phi,singles_a,singles_b,twofold`.
    pub rates: PathBuf,
    #[arg(long, default_value = "4")]
    pub d: Arity,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct HeraldArgs {
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.7, 0.8, 0.9, 0.95, 1.0])]
    pub etas: Vec<f64>,
    /// Herald levels: at least K detected reference photons.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0u32, 1, 2, 3])]
    pub ks: Vec<u32>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CountArgs {
    /// Timetag file.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = TimetagFormat::Text)]
    pub timetag_format: TimetagFormat,
    /// Channel map file of `channel=mode` lines.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long, default_value_t = crate::timetag::DEFAULT_WINDOW_PS)]
    pub window_ps: u64,
    #[arg(long, default_value_t = crate::timetag::DEFAULT_PERIOD_PS)]
    pub period_ps: u64,
    #[arg(long, default_value_t = 0)]
    pub offset_ps: u64,
    /// Open windows at the first click instead of the pulse clock.
    #[arg(long)]
    pub first_click: bool,
    /// Pulses in the acquisition; empty pulses count as empty windows.
    #[arg(long)]
    pub pulses: Option<u64>,
    /// Out-of-order slack accepted and repaired by the reader.
    #[arg(long, default_value_t = 0)]
    pub reorder_ps: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, default_value = "inf")]
    pub d: Arity,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95,1"
    )]
    pub etas: Vec<f64>,
    #[arg(long, default_value = "1e-12")]
    pub eps: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub phi: Angle,
    #[arg(long, default_value_t = 100_000)]
    pub pulses: u64,
    #[arg(long, default_value_t = crate::timetag::DEFAULT_PERIOD_PS)]
    pub period_ps: u64,
    #[arg(long, default_value_t = 1_000)]
    pub jitter_ps: u64,
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TimetagFormat::Text)]
    pub timetag_format: TimetagFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Ordered key-value metadata.
#[derive(Debug, Default)]
struct Meta(Vec<(String, Value)>);

impl Meta {
    fn new(command: &str) -> Self {
        let mut m = Meta::default();
        m.push("program", "spdcm");
        m.push("version", VERSION);
        m.push("command", command);
        m
    }

    fn push(&mut self, key: &str, value: impl Into<Value>) {
        self.0.push((key.to_owned(), value.into()));
    }

    fn to_json(&self) -> Value {
        Value::Object(self.0.iter().cloned().collect::<Map<_, _>>())
    }

    fn write_comments(&self, w: &mut dyn Write) -> io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(w, "# {k}={}", cell(v))?;
        }
        Ok(())
    }
}

struct Report {
    meta: Meta,
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
    summary: Meta,
}

impl Report {
    fn new(meta: Meta, columns: &[&str]) -> Self {
        Self {
            meta,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Meta::default(),
        }
    }

    fn write(&self, w: &mut dyn Write, format: OutputFormat) -> io::Result<()> {
        match format {
            OutputFormat::Csv => {
                self.meta.write_comments(w)?;
                writeln!(w, "{}", self.columns.join(","))?;
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(cell).collect();
                    writeln!(w, "{}", cells.join(","))?;
                }
                self.summary.write_comments(w)?;
            }
            OutputFormat::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| {
                        Value::Object(
                            self.columns
                                .iter()
                                .cloned()
                                .zip(r.iter().cloned())
                                .collect(),
                        )
                    })
                    .collect();
                let doc = json!({
                    "meta": self.meta.to_json(),
                    "columns": self.columns,
                    "rows": rows,
                    "summary": self.summary.to_json(),
                });
                serde_json::to_writer_pretty(&mut *w, &doc)?;
                writeln!(w)?;
            }
        }
        w.flush()
    }
}

/// CSV text of one value; non-finite numbers are stored as JSON null and print empty.
fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => u.to_string(),
            (_, Some(i), _) => i.to_string(),
            (_, _, Some(f)) => number(f),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn with_output<T>(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> io::Result<T>,
) -> Result<T> {
    Ok(match path {
        Some(p) => f(&mut BufWriter::new(File::create(p)?))?,
        None => f(&mut BufWriter::new(io::stdout().lock()))?,
    })
}

fn emit(report: &Report, output: &OutputArgs) -> Result<()> {
    with_output(output.out.as_deref(), |w| report.write(w, output.format))
}

fn pattern_columns(first: &str) -> Vec<String> {
    std::iter::once(first.to_owned())
        .chain(FOURFOLD_PATTERNS.iter().map(|p| p.to_string()))
        .collect()
}

fn cmd_fringes(args: &FringesArgs) -> Result<()> {
    let (src, det) = args.model.build()?;
    let phis = args.grid.points()?;
    let mut meta = Meta::new("fringes");
    args.model.meta(&src, &mut meta)?;
    args.grid.meta(&mut meta);
    let columns = pattern_columns("phi");
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut report = Report::new(meta, &cols);
    for phi in phis {
        let dist = fourfold_distribution(RotationSpec::new(phi, args.model.theta.0), &src, &det)?;
        let mut row = vec![json!(phi)];
        row.extend(dist.probabilities().into_iter().map(Value::from));
        report.rows.push(row);
    }
    emit(&report, &args.output)
}

/// Read `phi,<pattern>,...` count rows; the header names the patterns.
pub fn read_fringe_counts(path: &Path) -> Result<(Vec<DetectionPattern>, Vec<FringeSample>)> {
    let text = std::fs::read_to_string(path)?;
    let mut patterns: Option<Vec<DetectionPattern>> = None;
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let loc = Location::Line(i + 1);
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match &patterns {
            None => {
                if fields.len() < 2 || fields[0] != "phi" {
                    return Err(Error::parse(loc, "expected header phi,<pattern>,..."));
                }
                let parsed = fields[1..]
                    .iter()
                    .map(|f| {
                        f.parse::<DetectionPattern>()
                            .map_err(|e| Error::parse(loc, e.to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                patterns = Some(parsed);
            }
            Some(p) => {
                if fields.len() != p.len() + 1 {
                    return Err(Error::parse(
                        loc,
                        format!("expected {} fields, found {}", p.len() + 1, fields.len()),
                    ));
                }
                let mut values = fields.iter().map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(loc, format!("bad number {f:?}")))
                });
                let phi = values.next().expect("phi field")?;
                let counts = values.collect::<Result<Vec<_>>>()?;
                if counts.iter().any(|&c| c < 0.0) {
                    return Err(Error::parse(loc, "counts must be non-negative"));
                }
                samples.push(FringeSample { phi, counts });
            }
        }
    }
    let patterns = patterns.ok_or_else(|| Error::parse(Location::Line(1), "missing header"))?;
    Ok((patterns, samples))
}

fn simulated_counts(
    args: &FisherArgs,
    src: &SourceParams,
    det: &DetectorModel,
) -> Result<Vec<FringeSample>> {
    if args.data_phases == 0 {
        return Err(Error::domain("data-phases must be positive"));
    }
    (0..args.data_phases)
        .map(|j| {
            let phi = TAU * j as f64 / args.data_phases as f64;
            let p = fourfold_distribution(RotationSpec::new(phi, args.model.theta.0), src, det)?
                .probabilities();
            let mut rng = stream_rng(args.seed, j as u64);
            let counts = multinomial(&mut rng, args.events, &p)
                .into_iter()
                .map(|c| c as f64)
                .collect();
            Ok(FringeSample { phi, counts })
        })
        .collect()
}

fn cmd_fisher(args: &FisherArgs) -> Result<()> {
    let (src, det) = args.model.build()?;
    let theta = args.model.theta.0;
    let phis = args.grid.points()?;
    let family = TheoryFamily::fourfold(theta, &src, &det)?;
    let mut meta = Meta::new("fisher");
    args.model.meta(&src, &mut meta)?;
    args.grid.meta(&mut meta);
    meta.push("seed", args.seed);

    let samples = match &args.counts {
        Some(path) => {
            let (patterns, samples) = read_fringe_counts(path)?;
            meta.push("counts", path.display().to_string());
            meta.push(
                "patterns",
                patterns
                    .iter()
                    .map(|p| p.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            samples
        }
        None => {
            meta.push("counts", "simulated");
            meta.push("events_per_phase", args.events);
            meta.push("data_phases", args.data_phases);
            simulated_counts(args, &src, &det)?
        }
    };
    meta.push("bootstrap", args.bootstrap);
    meta.push("resampling", "poisson");
    meta.push("ml_samples", args.ml_samples);
    meta.push("ml_reps", args.ml_reps);

    let theory = fisher_curve(&family, &phis, PROBABILITY_FLOOR);
    let band = bootstrap_fisher_band(
        &samples,
        &phis,
        args.bootstrap,
        Resampling::Poisson,
        args.seed,
    )?;
    let snl = match snl_fisher(&src) {
        Ok(v) => Some(v),
        Err(Error::UnsupportedRegime(msg)) => {
            meta.push("snl_note", msg);
            None
        }
        Err(e) => return Err(e),
    };
    let ml = (0..args.ml_phases)
        .map(|j| {
            let phi = theta + PI * (j + 1) as f64 / (args.ml_phases + 1) as f64;
            let cfg = MonteCarloConfig::new(
                phi,
                args.ml_samples,
                args.ml_reps,
                args.seed.wrapping_add(j as u64 + 1),
            )
            .with_search(theta, theta + PI);
            monte_carlo_ml_fisher(&family, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = Report::new(
        meta,
        &[
            "kind",
            "phi",
            "fisher",
            "fit_fisher",
            "band_lower",
            "band_upper",
            "i_ml",
            "i_ml_std_error",
            "snl",
        ],
    );
    for (i, &phi) in phis.iter().enumerate() {
        report.rows.push(vec![
            json!("curve"),
            json!(phi),
            json!(theory[i].value),
            json!(band.central[i]),
            json!(band.lower[i]),
            json!(band.upper[i]),
            Value::Null,
            Value::Null,
            json!(snl),
        ]);
    }
    for r in &ml {
        report.rows.push(vec![
            json!("ml"),
            json!(r.config.phi),
            json!(r.fisher),
            Value::Null,
            Value::Null,
            Value::Null,
            json!(r.i_ml),
            json!(r.std_error),
            json!(snl),
        ]);
    }
    let best = fisher_maximum(&family, theta, theta + PI, 181, PROBABILITY_FLOOR);
    report.summary.push("max_fisher", best.value);
    report.summary.push("phi_at_max", best.phi);
    if let Some(snl) = snl {
        report.summary.push("snl", snl);
        report.summary.push("max_advantage", best.value / snl - 1.0);
    }
    emit(&report, &args.output)
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let rates = read_rates_file(&args.rates)?;
    let res = calibrate(&rates, args.d)?;
    let mut meta = Meta::new("calibrate");
    meta.push("rates", args.rates.display().to_string());
    meta.push("d", args.d.to_string());
    meta.push("singles_a", rates.singles_a);
    meta.push("singles_b", rates.singles_b);
    meta.push("twofold", rates.twofold);
    let mut report = Report::new(
        meta,
        &[
            "tau",
            "eta_a",
            "eta_b",
            "pair_probability",
            "at_branch_limit",
            "residual_singles_a",
            "residual_singles_b",
            "residual_twofold",
        ],
    );
    let mut row = vec![
        json!(res.tau),
        json!(res.eta_a),
        json!(res.eta_b),
        json!(res.pair_probability),
        json!(res.at_branch_limit),
    ];
    row.extend(res.residuals.iter().map(|&r| json!(r)));
    report.rows.push(row);
    emit(
        &report,
        &OutputArgs {
            out: args.out.clone(),
            format: args.format,
        },
    )
}

fn cmd_herald(args: &HeraldArgs) -> Result<()> {
    let table = herald_table(args.tau, &args.etas, &args.ks)?;
    let mut meta = Meta::new("herald");
    meta.push("tau", args.tau);
    meta.push("gate", "at least K detected reference photons");
    meta.push("phi", "maximum over [0, pi]");
    let columns: Vec<String> = std::iter::once("K".to_owned())
        .chain(args.etas.iter().map(|e| format!("eta={e}")))
        .collect();
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut report = Report::new(meta, &cols);
    for (k, row) in args.ks.iter().zip(&table.cells) {
        let mut r = vec![json!(k)];
        r.extend(row.iter().map(|c| json!(c.value)));
        report.rows.push(r);
    }
    emit(&report, &args.output)
}

fn read_map(path: Option<&Path>) -> Result<ChannelMap> {
    match path {
        Some(p) => std::fs::read_to_string(p)?.parse(),
        None => Ok(ChannelMap::default()),
    }
}

fn cmd_count(args: &CountArgs) -> Result<()> {
    let map = read_map(args.map.as_deref())?;
    let anchor = if args.first_click {
        WindowAnchor::FirstClick
    } else {
        WindowAnchor::PulseClock {
            period_ps: args.period_ps,
            offset_ps: args.offset_ps,
        }
    };
    let config = CounterConfig {
        anchor,
        window_ps: args.window_ps,
        pulses: args.pulses,
    };
    let file = File::open(&args.input)?;
    let stream = parse_timetags(
        file,
        args.timetag_format.into(),
        ParseOptions {
            reorder_tolerance_ps: args.reorder_ps,
        },
    );
    let res = count_coincidences(stream, config, map)?;

    let mut meta = Meta::new("count");
    meta.push("input", args.input.display().to_string());
    meta.push(
        "timetag_format",
        Format::from(args.timetag_format).to_string(),
    );
    meta.push("map", map.to_string().trim_end().replace('\n', " "));
    meta.push("window_ps", args.window_ps);
    match anchor {
        WindowAnchor::PulseClock {
            period_ps,
            offset_ps,
        } => {
            meta.push("anchor", "pulse_clock");
            meta.push("period_ps", period_ps);
            meta.push("offset_ps", offset_ps);
        }
        WindowAnchor::FirstClick => meta.push("anchor", "first_click"),
    }
    meta.push("records", res.records);
    meta.push("windows", res.windows());
    meta.push("duplicates", res.duplicates);
    meta.push("outside", res.outside);
    let mut report = Report::new(meta, &["kind", "key", "count"]);
    for (mask, n) in res.histogram.iter() {
        report.rows.push(vec![
            json!("mask"),
            json!(format!("0x{mask:04x}")),
            json!(n),
        ]);
    }
    for (pattern, n) in res.pattern_counts() {
        report
            .rows
            .push(vec![json!("pattern"), json!(pattern.to_string()), json!(n)]);
    }
    emit(&report, &args.output)
}

fn cmd_curve(args: &CurveArgs) -> Result<()> {
    let src = SourceParams::new(args.tau)?.with_epsilon(args.eps)?;
    let points = performance_curve(&src, &args.etas, args.d)?;
    let mut meta = Meta::new("curve");
    meta.push("tau", args.tau);
    meta.push("d", args.d.to_string());
    meta.push("eps", args.eps);
    meta.push("n_max", src.n_max()?);
    meta.push("normalization", "delta_phi * sqrt(eta * 2 sinh^2 tau)");
    let mut report = Report::new(
        meta,
        &[
            "eta",
            "phi_opt",
            "fisher_max",
            "delta_phi",
            "normalized",
            "heisenberg",
        ],
    );
    for p in &points {
        report.rows.push(vec![
            json!(p.eta),
            json!(p.phi_opt),
            json!(p.fisher_max),
            json!(p.delta_phi),
            json!(p.normalized),
            json!(p.heisenberg),
        ]);
    }
    let crossing = points
        .windows(2)
        .find(|w| (w[0].normalized - 1.0) * (w[1].normalized - 1.0) <= 0.0)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            a.eta + (1.0 - a.normalized) * (b.eta - a.eta) / (b.normalized - a.normalized)
        });
    if let Some(eta) = crossing {
        report.summary.push("snl_crossing_eta", eta);
    }
    emit(&report, &args.output)
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let (src, det) = args.model.build()?;
    let map = read_map(args.map.as_deref())?;
    let cfg = SyntheticConfig {
        pulses: args.pulses,
        period_ps: args.period_ps,
        jitter_ps: args.jitter_ps,
        seed: args.seed,
        map,
    };
    let records = generate_synthetic_timetags(
        RotationSpec::new(args.phi.0, args.model.theta.0),
        &src,
        &det,
        &cfg,
    )?;
    let mut meta = Meta::new("generate");
    args.model.meta(&src, &mut meta)?;
    meta.push("phi", args.phi.0);
    meta.push("pulses", args.pulses);
    meta.push("period_ps", args.period_ps);
    meta.push("jitter_ps", args.jitter_ps);
    meta.push("seed", args.seed);
    meta.push("records", records.len());
    with_output(args.out.as_deref(), |w| match args.timetag_format {
        TimetagFormat::Text => {
            meta.write_comments(w)?;
            write_text(w, &records)
        }
        TimetagFormat::Binary => write_binary(w, &records),
    })
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fringes(a) => cmd_fringes(a),
        Command::Fisher(a) => cmd_fisher(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Herald(a) => cmd_herald(a),
        Command::Count(a) => cmd_count(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

/// 2 for invalid parameters, 3 for data and model failures.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Domain(_) => 2,
        _ => 3,
    }
}

/// Parse arguments, run, report errors on stderr and map them to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spdcm: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
