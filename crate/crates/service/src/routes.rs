use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use mammoseg_core::imaging::{Connectivity, Histogram, StructuringElement};
use mammoseg_core::pipeline::{PipelineState, Step, StepOutcome};
use mammoseg_core::{
    generate_report, render_report_text, serialize_report, write_pgm, Calibration, DiameterMeasurement,
    MeasurementMethod, PatientRecord, PipelineConfig, PixelLine, Raster,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::ApiError;
use crate::store::{stage_infos, Case, CaseHandle, CaseStore, ImageInfo, SaveScope, StageInfo};

pub type AppState = Arc<CaseStore>;

/// Parses a JSON body, reporting the failing field path. An empty body
/// stands for `{}`.
fn parse_body<T: DeserializeOwned>(body: &[u8], code: &'static str) -> Result<T, ApiError> {
    let body = if body.iter().all(u8::is_ascii_whitespace) { b"{}".as_slice() } else { body };
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let mut err = ApiError::new(StatusCode::BAD_REQUEST, code, inner.to_string());
        if path != "." {
            err = err.with_field(path);
        } else if let Some(field) = missing_field(&inner.to_string()) {
            err = err.with_field(field);
        }
        err
    })
}

fn missing_field(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("missing field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(v)| v).map_err(|e| ApiError::invalid_params(e.body_text()))
}

fn case_handle(store: &CaseStore, id: &str) -> Result<CaseHandle, ApiError> {
    store.get(id).ok_or_else(|| ApiError::not_found(format!("case {id}")))
}

fn pipeline_of(case: &Case) -> Result<&PipelineState, ApiError> {
    case.pipeline.as_ref().ok_or_else(|| ApiError::prerequisite("no image has been uploaded for this case"))
}

#[derive(Serialize)]
pub struct Created {
    pub case_id: String,
}

pub async fn create_case(State(store): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let patient: PatientRecord = parse_body(&body, "ValidationError")?;
    patient.validate()?;
    let handle = store.create(patient)?;
    let case_id = handle.read().await.id.clone();
    Ok((StatusCode::CREATED, Json(Created { case_id })))
}

#[derive(Serialize)]
pub struct CaseListing {
    pub case_id: String,
    pub patient_id: String,
    pub has_image: bool,
    pub stages: usize,
    pub has_report: bool,
}

pub async fn list_cases(State(store): State<AppState>) -> Json<Vec<CaseListing>> {
    let mut out = Vec::new();
    for handle in store.handles() {
        let case = handle.read().await;
        out.push(CaseListing {
            case_id: case.id.clone(),
            patient_id: case.patient.patient_id.clone(),
            has_image: case.pipeline.is_some(),
            stages: case.pipeline.as_ref().map_or(0, |p| p.stages().len()),
            has_report: case.report.is_some(),
        });
    }
    Json(out)
}

#[derive(Serialize)]
pub struct CaseSummary {
    pub case_id: String,
    pub patient: PatientRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageInfo>,
    pub stages: Vec<StageInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cm_per_pixel: Option<Calibration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurement: Option<DiameterMeasurement>,
    pub has_report: bool,
}

pub async fn get_case(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<CaseSummary>, ApiError> {
    let handle = case_handle(&store, &id)?;
    let case = handle.read().await;
    Ok(Json(CaseSummary {
        case_id: case.id.clone(),
        patient: case.patient.clone(),
        image: case.pipeline.as_ref().map(|p| ImageInfo { width: p.original().width(), height: p.original().height() }),
        stages: case.pipeline.as_ref().map(stage_infos).unwrap_or_default(),
        cm_per_pixel: case.calibration,
        measurement: case.measurement.clone(),
        has_report: case.report.is_some(),
    }))
}

/// Stores a new original image. Stages, calibration, measurement and report
/// all belong to the previous image and are dropped.
pub async fn upload_image(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<ImageInfo>, ApiError> {
    let handle = case_handle(&store, &id)?;
    let img = mammoseg_core::read_pgm(&body)?;
    let info = ImageInfo { width: img.width(), height: img.height() };
    let mut case = handle.write().await;
    let mut next = case.clone();
    next.pipeline = Some(PipelineState::new(img));
    next.calibration = None;
    next.measurement = None;
    next.report = None;
    store.save(&next, SaveScope::NewImage)?;
    *case = next;
    Ok(Json(info))
}

/// Overrides for one step (or the composite `pipeline` step). Unset fields
/// keep the pipeline defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepParams {
    pub window: Option<usize>,
    pub se: Option<String>,
    pub connectivity: Option<Connectivity>,
    pub h_min: Option<f64>,
    pub invert: Option<bool>,
    /// Only for `pipeline`: step names in execution order.
    pub steps: Option<Vec<String>>,
}

impl StepParams {
    fn config(&self) -> Result<PipelineConfig, ApiError> {
        let mut cfg = PipelineConfig::default();
        if let Some(w) = self.window {
            cfg.median_window = w;
        }
        if let Some(se) = &self.se {
            cfg.structuring_element = se.parse::<StructuringElement>().map_err(ApiError::from)?;
        }
        if let Some(c) = self.connectivity {
            cfg.connectivity = c;
        }
        if let Some(h) = self.h_min {
            cfg.h_min = h;
        }
        if let Some(i) = self.invert {
            cfg.invert = i;
        }
        if let Some(steps) = &self.steps {
            cfg.steps = steps
                .iter()
                .map(|s| s.parse::<Step>().map_err(|e| ApiError::invalid_params(e.to_string()).with_field("steps")))
                .collect::<Result<_, _>>()?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Serialize)]
pub struct StepResponse {
    pub stage: String,
    pub step: Step,
    pub kind: String,
    pub params: Value,
    pub outputs: Map<String, Value>,
}

impl StepResponse {
    fn new(state: &PipelineState, outcome: StepOutcome) -> Self {
        let stage = state.stage(&outcome.stage).expect("outcome names a stage");
        Self {
            step: stage.step,
            kind: stage.snapshot.kind().to_string(),
            stage: outcome.stage,
            params: serde_json::to_value(&outcome.record.params).expect("params serialize"),
            outputs: outcome.outputs,
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum StepResult {
    One(StepResponse),
    Many { stages: Vec<StepResponse> },
}

pub async fn run_step(
    State(store): State<AppState>,
    Path((id, step)): Path<(String, String)>,
    body: Bytes,
) -> Result<Json<StepResult>, ApiError> {
    let handle = case_handle(&store, &id)?;
    let params: StepParams = parse_body(&body, "InvalidParams")?;
    let composite = step == "pipeline";
    let steps = if composite {
        params.config()?.steps
    } else {
        if params.steps.is_some() {
            return Err(ApiError::invalid_params("steps is only accepted by the pipeline step").with_field("steps"));
        }
        vec![step.parse::<Step>()?]
    };
    let cfg = params.config()?;

    // The write lock is held until the result is committed, so steps on one
    // case apply in a single order.
    let mut case = handle.write().await;
    let mut state = pipeline_of(&case)?.clone();
    let first_new = state.stages().len();
    let (state, outcomes) = tokio::task::spawn_blocking(move || {
        let mut outcomes = Vec::with_capacity(steps.len());
        for step in steps {
            outcomes.push(state.apply(step, &cfg)?);
        }
        Ok::<_, mammoseg_core::PipelineError>((state, outcomes))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;

    let mut next = case.clone();
    next.pipeline = Some(state);
    store.save(&next, SaveScope::StagesFrom(first_new))?;
    *case = next;

    let state = case.pipeline.as_ref().expect("just set");
    let mut responses: Vec<StepResponse> = outcomes.into_iter().map(|o| StepResponse::new(state, o)).collect();
    Ok(Json(if composite { StepResult::Many { stages: responses } } else { StepResult::One(responses.remove(0)) }))
}

fn pgm_response(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/x-portable-graymap")], bytes).into_response()
}

/// Stage raster as PGM; `original` names the uploaded image.
pub async fn get_stage(
    State(store): State<AppState>,
    Path((id, name)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let handle = case_handle(&store, &id)?;
    let case = handle.read().await;
    let state = pipeline_of(&case)?;
    let img = if name == "original" {
        state.original().clone()
    } else {
        state.stage(&name).ok_or_else(|| ApiError::not_found(format!("stage {name}")))?.snapshot.to_image()
    };
    Ok(pgm_response(write_pgm(&img)))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramQuery {
    pub stage: Option<String>,
}

/// 256 bin counts of the named stage, or of the current working image.
pub async fn get_histogram(
    State(store): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<HistogramQuery>, QueryRejection>,
) -> Result<Json<Histogram>, ApiError> {
    let q = query(q)?;
    let handle = case_handle(&store, &id)?;
    let case = handle.read().await;
    let state = pipeline_of(&case)?;
    let hist = match q.stage.as_deref() {
        None => state.current_histogram(),
        Some("original") => mammoseg_core::imaging::histogram(state.original()),
        Some(name) => {
            let stage = state.stage(name).ok_or_else(|| ApiError::not_found(format!("stage {name}")))?;
            mammoseg_core::imaging::histogram(&stage.snapshot.to_image())
        }
    };
    Ok(Json(hist))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementRequest {
    pub mode: MeasurementMethod,
    pub cm_per_pixel: f64,
    #[serde(default)]
    pub line: Option<PixelLine>,
    #[serde(default)]
    pub min_area: Option<usize>,
    #[serde(default)]
    pub connectivity: Option<Connectivity>,
}

pub async fn set_measurement(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<DiameterMeasurement>, ApiError> {
    let handle = case_handle(&store, &id)?;
    let req: MeasurementRequest = parse_body(&body, "InvalidParams")?;
    let cal = Calibration::new(req.cm_per_pixel)?;
    let mut case = handle.write().await;
    let state = pipeline_of(&case)?;
    let measurement = match req.mode {
        MeasurementMethod::Manual => {
            let line = req.line.ok_or_else(|| {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "MissingLine", "manual measurement needs a line")
                    .with_field("line")
            })?;
            line.check_bounds(state.original().width(), state.original().height())?;
            DiameterMeasurement::manual(&line, cal)
        }
        MeasurementMethod::Auto => {
            let mut cfg = PipelineConfig::default();
            if let Some(a) = req.min_area {
                cfg.min_area = a;
            }
            if let Some(c) = req.connectivity {
                cfg.connectivity = c;
            }
            let component = state.measure_auto(&cfg)?;
            DiameterMeasurement::auto(component.as_ref(), cal)
        }
    };
    let mut next = case.clone();
    next.calibration = Some(cal);
    next.measurement = Some(measurement.clone());
    store.save(&next, SaveScope::Metadata)?;
    *case = next;
    Ok(Json(measurement))
}

pub async fn get_measurement(
    State(store): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<DiameterMeasurement>, ApiError> {
    let handle = case_handle(&store, &id)?;
    let case = handle.read().await;
    case.measurement.clone().map(Json).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "NoMeasurementYet", "no measurement has been stored for this case")
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportQuery {
    #[serde(default)]
    pub generate: bool,
    /// `json` (default) or `text`.
    pub format: Option<String>,
}

pub async fn get_report(
    State(store): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<ReportQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let q = query(q)?;
    let text = match q.format.as_deref() {
        None | Some("json") => false,
        Some("text") => true,
        Some(other) => return Err(ApiError::invalid_params(format!("unknown format {other:?}")).with_field("format")),
    };
    let handle = case_handle(&store, &id)?;
    let report = if q.generate {
        let mut case = handle.write().await;
        let (Some(m), Some(cal)) = (&case.measurement, case.calibration) else {
            return Err(ApiError::prerequisite("a measurement is needed before a report can be generated"));
        };
        let provenance = pipeline_of(&case)?.provenance().with_measurement(m, cal);
        let report = generate_report(case.patient.clone(), m, cal, provenance)?;
        let mut next = case.clone();
        next.report = Some(report.clone());
        store.save(&next, SaveScope::Metadata)?;
        *case = next;
        report
    } else {
        let case = handle.read().await;
        case.report.clone().ok_or_else(|| {
            ApiError::new(StatusCode::NOT_FOUND, "NoReportYet", "no report has been generated for this case")
        })?
    };
    Ok(if text {
        ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], render_report_text(&report)).into_response()
    } else {
        ([(header::CONTENT_TYPE, "application/json")], serialize_report(&report)).into_response()
    })
}

pub async fn fallback() -> ApiError {
    ApiError::not_found("route")
}
