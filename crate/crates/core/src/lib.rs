//! Tumour measurement pipeline for 8-bit grayscale mammogram images.
//!
//! The flow is median denoising, Otsu thresholding, morphological opening and
//! closing, watershed splitting, component selection, Feret diameter,
//! pixel-to-centimetre conversion, rule-based classification and a patient
//! test report. Each step is also exposed on its own so callers (the HTTP
//! service, the batch CLI) can drive the flow one step at a time.

pub mod classification;
pub mod image;
pub mod imaging;
pub mod measurement;
pub mod pgm;
pub mod pipeline;
pub mod report;

pub use classification::{
    classify_risk, classify_t_category, classify_type, ClassifyError, RiskStage, TCategory, TumorType,
};
pub use image::{BinaryMask, GrayImage, LabelMap, Raster, ScalarField, ShapeError};
pub use measurement::{
    feret_diameter, manual_distance, measure_largest_component, pixels_to_cm, select_tumor_component, Calibration,
    DiameterMeasurement, MeasureError, MeasurementMethod, PixelLine, Point, TumorComponent, DEFAULT_MIN_AREA,
};
pub use pgm::{read_pgm, write_pgm, PgmError};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineError, PipelineState, Snapshot, Stage, Step};
pub use report::{
    deserialize_report, generate_report, generate_report_at, render_report_text, serialize_report, to_canonical_json,
    PatientRecord, PipelineProvenance, ReportError, StepRecord, TestReport,
};
