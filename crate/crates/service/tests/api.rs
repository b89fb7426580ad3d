use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mammoseg_core::imaging::{histogram, median_filter, otsu_threshold};
use mammoseg_core::{
    deserialize_report, generate_report_at, pixels_to_cm, run_pipeline, write_pgm, Calibration, DiameterMeasurement,
    GrayImage, PatientRecord, PipelineConfig, TestReport,
};
use mammoseg_service::{router, CaseStore};
use mammoseg_testkit::{disk_phantom, rng, salt_and_pepper};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    content_type: Option<String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }

    fn error_code(&self) -> String {
        self.json()["error_code"].as_str().unwrap().to_string()
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> Reply {
    let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let content_type = res.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, content_type, body }
}

async fn post_json(app: &Router, uri: &str, v: Value) -> Reply {
    call(app, "POST", uri, v.to_string()).await
}

fn app() -> Router {
    router(Arc::new(CaseStore::in_memory()))
}

fn phantom() -> GrayImage {
    let mut r = rng(7);
    salt_and_pepper(&disk_phantom(128, 30.0, 20, 200), 0.02, &mut r)
}

async fn new_case(app: &Router) -> String {
    let r = post_json(app, "/cases", json!({"patient_id": "P-001", "name": "Test Patient", "age_years": 52})).await;
    assert_eq!(r.status, StatusCode::CREATED);
    r.json()["case_id"].as_str().unwrap().to_string()
}

async fn case_with_image(app: &Router, img: &GrayImage) -> String {
    let id = new_case(app).await;
    let r = call(app, "POST", &format!("/cases/{id}/image"), write_pgm(img)).await;
    assert_eq!(r.status, StatusCode::OK);
    id
}

#[tokio::test]
async fn create_case_validates_and_issues_distinct_ids() {
    let app = app();
    let a = new_case(&app).await;
    let b = new_case(&app).await;
    assert_ne!(a, b);
    assert_eq!(a.len(), 32);
    assert!(a.chars().all(|c| c.is_ascii_hexdigit()));

    let r = post_json(&app, "/cases", json!({"patient_id": ""})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.error_code(), "ValidationError");
    assert_eq!(r.json()["field"], "patient_id");

    let r = post_json(&app, "/cases", json!({"name": "x"})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["field"], "patient_id");

    let r = post_json(&app, "/cases", json!({"patient_id": "x", "age_years": "old"})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["field"], "age_years");

    let r = call(&app, "GET", "/cases", Body::empty()).await;
    assert_eq!(r.json().as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn upload_checks_the_image_and_the_case() {
    let app = app();
    let id = new_case(&app).await;
    let img = GrayImage::from_fn(7, 5, |x, y| (x * 30 + y) as u8).unwrap();
    let r = call(&app, "POST", &format!("/cases/{id}/image"), write_pgm(&img)).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json(), json!({"width": 7, "height": 5}));

    let r = call(&app, "POST", &format!("/cases/{id}/image"), b"P2\n1 1\n255\n0".to_vec()).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.error_code(), "BadMagic");

    let r = call(&app, "POST", &format!("/cases/{id}/image"), b"P5\n4 4\n255\n\x01\x02".to_vec()).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.error_code(), "TruncatedRaster");

    let r = call(&app, "POST", "/cases/ffff/image", write_pgm(&img)).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.error_code(), "NotFound");

    let r = call(&app, "GET", &format!("/cases/{id}/stages/original"), Body::empty()).await;
    assert_eq!(r.body, write_pgm(&img));
    assert_eq!(r.content_type.as_deref(), Some("image/x-portable-graymap"));
}

#[tokio::test]
async fn steps_match_direct_library_calls() {
    let app = app();
    let img = phantom();
    let id = case_with_image(&app, &img).await;

    let r = post_json(&app, &format!("/cases/{id}/steps/median"), json!({"window": 3})).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["stage"], "median");
    let filtered = median_filter(&img, 3).unwrap();
    let r = call(&app, "GET", &format!("/cases/{id}/stages/median"), Body::empty()).await;
    assert_eq!(r.body, write_pgm(&filtered));

    let r = call(&app, "GET", &format!("/cases/{id}/histogram"), Body::empty()).await;
    assert_eq!(r.json(), serde_json::to_value(histogram(&filtered)).unwrap());
    let r = call(&app, "GET", &format!("/cases/{id}/histogram?stage=original"), Body::empty()).await;
    assert_eq!(r.json(), serde_json::to_value(histogram(&img)).unwrap());

    let r = call(&app, "POST", &format!("/cases/{id}/steps/otsu"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::OK);
    let t = otsu_threshold(&histogram(&filtered)).unwrap();
    assert_eq!(r.json()["outputs"]["threshold"], json!(t));
    assert_eq!(r.json()["kind"], "mask");

    let r = call(&app, "GET", &format!("/cases/{id}"), Body::empty()).await;
    let names: Vec<String> =
        r.json()["stages"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap().to_string()).collect();
    assert_eq!(names, ["median", "otsu"]);
}

#[tokio::test]
async fn step_errors_use_the_uniform_body() {
    let app = app();
    let id = new_case(&app).await;
    let r = call(&app, "POST", &format!("/cases/{id}/steps/median"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.error_code(), "PrerequisiteMissing");

    let img = phantom();
    let r = call(&app, "POST", &format!("/cases/{id}/image"), write_pgm(&img)).await;
    assert_eq!(r.status, StatusCode::OK);
    let r = call(&app, "POST", &format!("/cases/{id}/steps/watershed"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.error_code(), "PrerequisiteMissing");

    let r = post_json(&app, &format!("/cases/{id}/steps/median"), json!({"window": 4})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.error_code(), "InvalidParams");
    assert_eq!(r.json()["field"], "window");

    let r = post_json(&app, &format!("/cases/{id}/steps/morph-open"), json!({"se": "hexagon"})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["field"], "se");

    let r = post_json(&app, &format!("/cases/{id}/steps/median"), json!({"radius": 2})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.error_code(), "InvalidParams");

    let r = post_json(&app, &format!("/cases/{id}/steps/components"), json!({"connectivity": 6})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["field"], "connectivity");

    let r = call(&app, "POST", &format!("/cases/{id}/steps/blur"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);

    let r = call(&app, "GET", &format!("/cases/{id}/stages/otsu"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);

    let r = call(&app, "GET", "/nowhere", Body::empty()).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.error_code(), "NotFound");
}

#[tokio::test]
async fn manual_measurement_is_endpoint_distance_times_calibration() {
    let app = app();
    let id = case_with_image(&app, &GrayImage::filled(10, 10, 0).unwrap()).await;
    let line = json!({"p1": {"x": 0.0, "y": 0.0}, "p2": {"x": 3.0, "y": 4.0}});
    let r = post_json(
        &app,
        &format!("/cases/{id}/measurement"),
        json!({"mode": "manual", "line": line, "cm_per_pixel": 0.1}),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    let m: DiameterMeasurement = serde_json::from_slice(&r.body).unwrap();
    assert_eq!(m.pixels, 5.0);
    assert_eq!(m.cm, 0.5);
    assert_eq!(m.cm, pixels_to_cm(5.0, Calibration::new(0.1).unwrap()));

    let r = call(&app, "GET", &format!("/cases/{id}/measurement"), Body::empty()).await;
    assert_eq!(serde_json::from_slice::<DiameterMeasurement>(&r.body).unwrap(), m);

    let r = post_json(
        &app,
        &format!("/cases/{id}/measurement"),
        json!({"mode": "manual", "line": line, "cm_per_pixel": 0}),
    )
    .await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.error_code(), "InvalidCalibration");

    let r = post_json(&app, &format!("/cases/{id}/measurement"), json!({"mode": "manual", "cm_per_pixel": 0.1})).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.error_code(), "MissingLine");

    let far = json!({"p1": {"x": 0.0, "y": 0.0}, "p2": {"x": 30.0, "y": 4.0}});
    let r = post_json(
        &app,
        &format!("/cases/{id}/measurement"),
        json!({"mode": "manual", "line": far, "cm_per_pixel": 0.1}),
    )
    .await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.error_code(), "LineOutOfBounds");

    let r = post_json(&app, &format!("/cases/{id}/measurement"), json!({"mode": "auto", "cm_per_pixel": 0.1})).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.error_code(), "PrerequisiteMissing");
}

#[tokio::test]
async fn auto_measurement_and_report_match_the_library() {
    let app = app();
    let img = phantom();
    let id = case_with_image(&app, &img).await;

    let r = call(&app, "GET", &format!("/cases/{id}/report"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.error_code(), "NoReportYet");
    let r = call(&app, "GET", &format!("/cases/{id}/report?generate=true"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    let r = call(&app, "POST", &format!("/cases/{id}/steps/pipeline"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::OK);
    let stages = r.json()["stages"].as_array().unwrap().len();
    assert_eq!(stages, 6);

    let r = post_json(&app, &format!("/cases/{id}/measurement"), json!({"mode": "auto", "cm_per_pixel": 0.02})).await;
    assert_eq!(r.status, StatusCode::OK);
    let got: DiameterMeasurement = serde_json::from_slice(&r.body).unwrap();

    let cfg = PipelineConfig::default();
    let cal = Calibration::new(0.02).unwrap();
    let state = run_pipeline(img, &cfg).unwrap();
    let expected = DiameterMeasurement::auto(state.measure_auto(&cfg).unwrap().as_ref(), cal);
    assert_eq!(got, expected);

    let r = call(&app, "GET", &format!("/cases/{id}/report?generate=true"), Body::empty()).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.content_type.as_deref(), Some("application/json"));
    let report: TestReport = deserialize_report(std::str::from_utf8(&r.body).unwrap()).unwrap();
    assert!(report.is_consistent());
    let record = PatientRecord { patient_id: "P-001".into(), name: Some("Test Patient".into()), age_years: Some(52) };
    let direct = generate_report_at(
        record,
        &expected,
        cal,
        state.provenance().with_measurement(&expected, cal),
        report.generated_at,
    )
    .unwrap();
    assert_eq!(report, direct);

    let stored = call(&app, "GET", &format!("/cases/{id}/report?generate=false"), Body::empty()).await;
    assert_eq!(stored.body, r.body);
    let text = call(&app, "GET", &format!("/cases/{id}/report?format=text"), Body::empty()).await;
    assert_eq!(String::from_utf8(text.body).unwrap(), mammoseg_core::render_report_text(&report));
    let bad = call(&app, "GET", &format!("/cases/{id}/report?generate=maybe"), Body::empty()).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
    assert_eq!(bad.error_code(), "InvalidParams");
}

#[tokio::test]
async fn cases_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let img = phantom();
    let (id, before) = {
        let app = router(Arc::new(CaseStore::open(dir.path()).unwrap()));
        let id = case_with_image(&app, &img).await;
        call(&app, "POST", &format!("/cases/{id}/steps/pipeline"), Body::empty()).await;
        call(&app, "POST", &format!("/cases/{id}/steps/median"), Body::empty()).await;
        post_json(&app, &format!("/cases/{id}/measurement"), json!({"mode": "auto", "cm_per_pixel": 0.02})).await;
        let r = call(&app, "GET", &format!("/cases/{id}/report?generate=true"), Body::empty()).await;
        assert_eq!(r.status, StatusCode::OK);
        let summary = call(&app, "GET", &format!("/cases/{id}"), Body::empty()).await.json();
        (id, (summary, r.body))
    };

    let app = router(Arc::new(CaseStore::open(dir.path()).unwrap()));
    let summary = call(&app, "GET", &format!("/cases/{id}"), Body::empty()).await.json();
    assert_eq!(summary, before.0);
    let report = call(&app, "GET", &format!("/cases/{id}/report"), Body::empty()).await;
    assert_eq!(report.body, before.1);

    let state = run_pipeline(img, &PipelineConfig::default()).unwrap();
    for stage in state.stages() {
        let r = call(&app, "GET", &format!("/cases/{id}/stages/{}", stage.name), Body::empty()).await;
        assert_eq!(r.body, write_pgm(&stage.snapshot.to_image()), "stage {}", stage.name);
    }
    // The restored label map is exact, so later steps see the same regions.
    let r = call(&app, "POST", &format!("/cases/{id}/steps/components"), Body::empty()).await;
    assert_eq!(r.json()["outputs"]["count"], json!(1));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_steps_on_one_case_are_serialised() {
    let app = app();
    let id = case_with_image(&app, &phantom()).await;
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let app = app.clone();
            let uri = format!("/cases/{id}/steps/median");
            tokio::spawn(async move { call(&app, "POST", &uri, Body::empty()).await })
        })
        .collect();
    let mut names = Vec::new();
    for t in tasks {
        let r = t.await.unwrap();
        assert_eq!(r.status, StatusCode::OK);
        names.push(r.json()["stage"].as_str().unwrap().to_string());
    }
    names.sort();
    let mut expected: Vec<String> =
        std::iter::once("median".to_string()).chain((2..=8).map(|n| format!("median-{n}"))).collect();
    expected.sort();
    assert_eq!(names, expected);
    let summary = call(&app, "GET", &format!("/cases/{id}"), Body::empty()).await.json();
    assert_eq!(summary["stages"].as_array().unwrap().len(), 8);
}
