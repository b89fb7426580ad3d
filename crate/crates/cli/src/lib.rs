//! Command-line front end: `mammoseg run` processes PGM files or directories
//! through the default pipeline and writes per-image artefacts; `mammoseg
//! serve` starts the HTTP service.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use mammoseg_core::imaging::{histogram, otsu_threshold, Connectivity, StructuringElement};
use mammoseg_core::pipeline::{parse_steps, Step};
use mammoseg_core::report::to_canonical_json;
use mammoseg_core::{
    generate_report_at, read_pgm, run_pipeline, serialize_report, write_pgm, Calibration, DiameterMeasurement,
    PatientRecord, PipelineConfig, Snapshot, TestReport,
};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "mammoseg", version, about = "Tumour measurement on grayscale mammogram PGM images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline on PGM files or directories of PGM files.
    Run(RunArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// PGM files, or directories whose `.pgm` entries are processed in name order.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 3, value_parser = odd_window)]
    pub median_window: usize,
    /// `square<n>`, `cross<n>` or `disk<r>`.
    #[arg(long, default_value = "square3")]
    pub se: StructuringElement,
    #[arg(long, default_value = "8")]
    pub connectivity: Connectivity,
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub h_min: f64,
    #[arg(long, default_value_t = 5)]
    pub min_area: usize,
    /// Treat dark pixels as foreground.
    #[arg(long)]
    pub invert: bool,
    /// Pixel size in centimetres; enables classification and the report.
    #[arg(long, value_parser = calibration)]
    pub cm_per_px: Option<Calibration>,
    /// Require classification; fails before processing if --cm-per-px is missing.
    #[arg(long)]
    pub classify: bool,
    /// Patient id for reports; defaults to the file stem.
    #[arg(long)]
    pub patient_id: Option<String>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Comma-separated step list, e.g. `median,otsu,open,close`.
    #[arg(long, value_parser = steps, default_value = "median,otsu,morph-open,morph-close,watershed,components")]
    pub pipeline: StepList,
    /// Report timestamp (RFC 3339) instead of the current time.
    #[arg(long, hide = true)]
    pub fixed_timestamp: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepList(pub Vec<Step>);

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, env = "MAMMOSEG_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Case storage; cases are kept in memory only when unset.
    #[arg(long, env = "MAMMOSEG_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
}

fn odd_window(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n % 2 == 1 => Ok(n),
        Ok(n) => Err(format!("window must be odd, got {n}")),
        Err(e) => Err(e.to_string()),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Ok(v) => Err(format!("expected a finite value >= 0, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn calibration(s: &str) -> Result<Calibration, String> {
    let v: f64 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    Calibration::new(v).map_err(|e| e.to_string())
}

fn steps(s: &str) -> Result<StepList, String> {
    let steps = parse_steps(s).map_err(|e| e.to_string())?;
    if steps.is_empty() {
        return Err("empty step list".into());
    }
    Ok(StepList(steps))
}

impl RunArgs {
    pub fn config(&self) -> PipelineConfig {
        PipelineConfig {
            median_window: self.median_window,
            structuring_element: self.se.clone(),
            connectivity: self.connectivity,
            h_min: self.h_min,
            min_area: self.min_area,
            invert: self.invert,
            steps: self.pipeline.0.clone(),
        }
    }

    /// Checks that need more than one flag.
    pub fn validate(&self) -> Result<(), String> {
        if self.classify && self.cm_per_px.is_none() {
            return Err("--classify needs --cm-per-px".into());
        }
        if let Some(id) = &self.patient_id {
            PatientRecord::new(id.clone()).validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

/// Expands directories into their `.pgm` entries, sorted by name.
pub fn collect_inputs(inputs: &[PathBuf]) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
                .collect();
            entries.sort();
            out.extend(entries);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

/// Everything produced for one image, before anything is written.
#[derive(Debug, Clone)]
pub struct ImageResult {
    pub stem: String,
    pub mask_pgm: Vec<u8>,
    pub histogram_json: String,
    pub report: Option<TestReport>,
    pub measurement_px: f64,
    pub summary: String,
}

pub fn process_image(path: &Path, args: &RunArgs, now: DateTime<Utc>) -> Result<ImageResult, String> {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into());
    let bytes = fs::read(path).map_err(|e| e.to_string())?;
    let img = read_pgm(&bytes).map_err(|e| e.to_string())?;
    let cfg = args.config();
    let state = run_pipeline(img, &cfg).map_err(|e| e.to_string())?;

    let mask = state.current_mask().ok_or("the pipeline produced no mask; include otsu in --pipeline")?;
    let work = state.current_image();
    let hist = histogram(work);
    let source = state
        .stages()
        .iter()
        .rev()
        .find(|s| matches!(s.snapshot, Snapshot::Image(_)))
        .map_or("original", |s| s.name.as_str());
    let histogram_json = to_canonical_json(&json!({
        "source": source,
        "bins": hist,
        "otsu_threshold": otsu_threshold(&hist).map_err(|e| e.to_string())?,
    }));

    let component = state.measure_auto(&cfg).map_err(|e| e.to_string())?;
    let pixels = component.as_ref().map_or(0.0, |c| c.feret_px);
    let mut summary = String::new();
    let _ = write!(summary, "{}: diameter_px={pixels:.2}", path.display());
    let report = match args.cm_per_px {
        None => None,
        Some(cal) => {
            let m = DiameterMeasurement::auto(component.as_ref(), cal);
            let record = PatientRecord::new(args.patient_id.clone().unwrap_or_else(|| stem.clone()));
            let report = generate_report_at(record, &m, cal, state.provenance().with_measurement(&m, cal), now)
                .map_err(|e| e.to_string())?;
            let _ = write!(
                summary,
                " diameter_cm={} type={} stage={}",
                report.diameter_cm_display(),
                report.tumor_type.as_str(),
                report.risk_stage.as_str()
            );
            if let Some(t) = report.t_category {
                let _ = write!(summary, " t={t}");
            }
            Some(report)
        }
    };
    Ok(ImageResult {
        stem,
        mask_pgm: write_pgm(&mask.to_image()),
        histogram_json,
        report,
        measurement_px: pixels,
        summary,
    })
}

pub fn write_outputs(out_dir: &Path, r: &ImageResult) -> std::io::Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(format!("{}.mask.pgm", r.stem)), &r.mask_pgm)?;
    fs::write(out_dir.join(format!("{}.histogram.json", r.stem)), &r.histogram_json)?;
    if let Some(report) = &r.report {
        fs::write(out_dir.join(format!("{}.report.json", r.stem)), serialize_report(report))?;
    }
    Ok(())
}

/// Exit status for `run`: 0 when every image succeeded, 1 otherwise.
pub fn run_batch(args: &RunArgs) -> i32 {
    let inputs = match collect_inputs(&args.inputs) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let now = args.fixed_timestamp.unwrap_or_else(Utc::now);
    let mut failed = 0;
    for path in &inputs {
        let result = process_image(path, args, now).and_then(|r| {
            write_outputs(&args.out_dir, &r).map_err(|e| e.to_string())?;
            Ok(r)
        });
        match result {
            Ok(r) => {
                let mut out = std::io::stdout().lock();
                let _ = writeln!(out, "{}", r.summary);
            }
            Err(e) => {
                failed += 1;
                eprintln!("error: {}: {e}", path.display());
            }
        }
    }
    if inputs.is_empty() {
        eprintln!("error: no PGM inputs found");
        return 1;
    }
    i32::from(failed > 0)
}

pub fn serve(args: &ServeArgs) -> i32 {
    let store = match &args.data_dir {
        Some(dir) => match mammoseg_service::CaseStore::open(dir) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: cannot open {}: {e}", dir.display());
                return 1;
            }
        },
        None => mammoseg_service::CaseStore::in_memory(),
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match rt.block_on(mammoseg_service::serve(args.listen, std::sync::Arc::new(store))) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
