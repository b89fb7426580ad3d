//! Patient test report: assembly, plain-text rendering and a canonical JSON
//! document form (sorted keys, no insignificant whitespace).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::classification::{
    classify_risk, classify_t_category, classify_type, ClassifyError, RiskStage, TCategory, TumorType,
};
use crate::measurement::{pixels_to_cm, Calibration, DiameterMeasurement, MeasurementMethod};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error(transparent)]
    Classification(#[from] ClassifyError),
    #[error("measurement says {measured_cm} cm but calibration gives {expected_cm} cm")]
    CalibrationMismatch { measured_cm: f64, expected_cm: f64 },
    #[error("report parse error at {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientRecord {
    pub patient_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_years: Option<u32>,
}

impl PatientRecord {
    pub fn new(patient_id: impl Into<String>) -> Self {
        Self { patient_id: patient_id.into(), name: None, age_years: None }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        if self.patient_id.trim().is_empty() {
            return Err(ReportError::Validation { field: "patient_id".into(), message: "must not be empty".into() });
        }
        if self.age_years == Some(0) {
            return Err(ReportError::Validation { field: "age_years".into(), message: "must be positive".into() });
        }
        Ok(())
    }
}

/// One executed pipeline step and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub step: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

impl StepRecord {
    pub fn new(step: impl Into<String>) -> Self {
        Self { step: step.into(), params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

/// Steps in execution order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PipelineProvenance {
    pub steps: Vec<StepRecord>,
}

impl PipelineProvenance {
    pub fn push(&mut self, step: StepRecord) {
        self.steps.push(step);
    }

    /// Copy with a trailing `measure` step describing `m`.
    pub fn with_measurement(&self, m: &DiameterMeasurement, cal: Calibration) -> Self {
        let mut step =
            StepRecord::new("measure").with("method", m.method.to_string()).with("cm_per_pixel", cal.cm_per_pixel());
        if let Some(area) = m.component_area_px {
            step = step.with("component_area_px", area);
        }
        let mut out = self.clone();
        out.push(step);
        out
    }
}

mod timestamp {
    use chrono::{DateTime, NaiveDateTime, Utc};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub const FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&t.format(FORMAT))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        NaiveDateTime::parse_from_str(&s, FORMAT)
            .map(|n| n.and_utc())
            .map_err(|e| D::Error::custom(format!("expected UTC timestamp like 2024-01-31T12:00:00Z: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestReport {
    pub record: PatientRecord,
    #[serde(with = "timestamp")]
    pub generated_at: DateTime<Utc>,
    pub diameter_px: f64,
    /// Exact value; rounded only when rendered.
    pub diameter_cm: f64,
    pub method: MeasurementMethod,
    pub cm_per_pixel: f64,
    pub tumor_type: TumorType,
    pub risk_stage: RiskStage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_category: Option<TCategory>,
    pub provenance: PipelineProvenance,
}

impl TestReport {
    /// Re-runs classification on `diameter_cm` and compares with the stored fields.
    pub fn is_consistent(&self) -> bool {
        matches!(expected_classes(self.diameter_cm), Ok(c) if c == (self.tumor_type, self.risk_stage, self.t_category))
    }

    pub fn diameter_cm_display(&self) -> String {
        format!("{:.2}", round_half_up_2(self.diameter_cm))
    }
}

fn expected_classes(d_cm: f64) -> Result<(TumorType, RiskStage, Option<TCategory>), ClassifyError> {
    let tumor_type = classify_type(d_cm)?;
    let risk_stage = classify_risk(d_cm)?;
    // Healthy reports carry no T category: AJCC sizes start above zero.
    let t_category = if d_cm > 0.0 { Some(classify_t_category(d_cm * 10.0, false)?) } else { None };
    Ok((tumor_type, risk_stage, t_category))
}

/// Two-decimal display rounding, halves away from zero (diameters are never negative).
pub fn round_half_up_2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn generate_report(
    record: PatientRecord,
    measurement: &DiameterMeasurement,
    cal: Calibration,
    provenance: PipelineProvenance,
) -> Result<TestReport, ReportError> {
    generate_report_at(record, measurement, cal, provenance, Utc::now())
}

/// As [`generate_report`] with a caller-chosen timestamp, truncated to seconds.
pub fn generate_report_at(
    record: PatientRecord,
    measurement: &DiameterMeasurement,
    cal: Calibration,
    provenance: PipelineProvenance,
    at: DateTime<Utc>,
) -> Result<TestReport, ReportError> {
    record.validate()?;
    let expected_cm = pixels_to_cm(measurement.pixels, cal);
    if measurement.cm != expected_cm {
        return Err(ReportError::CalibrationMismatch { measured_cm: measurement.cm, expected_cm });
    }
    let (tumor_type, risk_stage, t_category) = expected_classes(measurement.cm)?;
    Ok(TestReport {
        record,
        generated_at: at.trunc_subsecs(0),
        diameter_px: measurement.pixels,
        diameter_cm: measurement.cm,
        method: measurement.method,
        cm_per_pixel: cal.cm_per_pixel(),
        tumor_type,
        risk_stage,
        t_category,
        provenance,
    })
}

pub fn render_report_text(report: &TestReport) -> String {
    let mut out = String::new();
    let r = &report.record;
    // Writing to a String cannot fail.
    let _ = writeln!(out, "PATIENT TEST REPORT");
    let _ = writeln!(out, "Patient ID: {}", r.patient_id);
    if let Some(name) = &r.name {
        let _ = writeln!(out, "Name: {name}");
    }
    if let Some(age) = r.age_years {
        let _ = writeln!(out, "Age: {age} years");
    }
    let _ = writeln!(out, "Generated: {}", report.generated_at.format(timestamp::FORMAT));
    let _ = writeln!(
        out,
        "Tumour diameter: {:.2} px / {} cm ({} measurement, {} cm/px)",
        round_half_up_2(report.diameter_px),
        report.diameter_cm_display(),
        report.method,
        report.cm_per_pixel
    );
    let finding = match report.tumor_type {
        TumorType::Healthy => "healthy breast with no lump".to_string(),
        other => format!("possibility to be {other} tumor"),
    };
    let _ = writeln!(out, "Finding: {finding}");
    let _ = writeln!(out, "Risk stage: {}", report.risk_stage.phrase());
    if let Some(t) = report.t_category {
        let _ = writeln!(out, "AJCC T category (size only): {t}");
    }
    let _ = writeln!(out, "Pipeline:");
    for (i, step) in report.provenance.steps.iter().enumerate() {
        let params: Vec<String> = step.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        if params.is_empty() {
            let _ = writeln!(out, "  {}. {}", i + 1, step.step);
        } else {
            let _ = writeln!(out, "  {}. {} ({})", i + 1, step.step, params.join(", "));
        }
    }
    out
}

/// Recursively rebuilds objects with keys in sorted order.
pub fn canonicalize(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

/// Canonical compact JSON for any serializable value.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string(&canonicalize(v)).expect("JSON value always serializes")
}

pub fn serialize_report(report: &TestReport) -> String {
    to_canonical_json(report)
}

pub fn deserialize_report(text: &str) -> Result<TestReport, ReportError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let report: TestReport = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let mut path = e.path().to_string();
        let message = e.inner().to_string();
        if let Some(field) = missing_field(&message) {
            path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
        }
        ReportError::Parse { path, message }
    })?;
    de.end().map_err(|e| ReportError::Parse { path: ".".into(), message: e.to_string() })?;

    report.record.validate().map_err(|e| match e {
        ReportError::Validation { field, message } => ReportError::Parse { path: format!("record.{field}"), message },
        other => other,
    })?;
    if !report.is_consistent() {
        return Err(ReportError::Parse {
            path: "tumor_type".into(),
            message: "classification fields disagree with diameter_cm".into(),
        });
    }
    Ok(report)
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}
