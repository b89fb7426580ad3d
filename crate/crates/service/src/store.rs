//! In-memory case table with optional directory persistence.
//!
//! Layout under the data directory:
//!
//! ```text
//! <case_id>/case.json            metadata, stage list and stored report
//! <case_id>/original.pgm
//! <case_id>/stages/<name>.pgm    every stage, labels saturated at 255
//! <case_id>/stages/<name>.labels.json   label stages, lossless
//! ```
//!
//! Files are written to a temporary name and renamed into place, and
//! `case.json` is written last, so a case on disk always refers to files
//! that exist.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock as SyncRwLock};

use mammoseg_core::pipeline::Step;
use mammoseg_core::report::to_canonical_json;
use mammoseg_core::{
    deserialize_report, read_pgm, serialize_report, write_pgm, BinaryMask, Calibration, DiameterMeasurement, LabelMap,
    PatientRecord, PipelineProvenance, PipelineState, Raster, Snapshot, Stage, TestReport,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::RwLock;

#[derive(Debug, Clone)]
pub struct Case {
    pub id: String,
    pub patient: PatientRecord,
    pub pipeline: Option<PipelineState>,
    pub calibration: Option<Calibration>,
    pub measurement: Option<DiameterMeasurement>,
    pub report: Option<TestReport>,
}

impl Case {
    pub fn new(id: String, patient: PatientRecord) -> Self {
        Self { id, patient, pipeline: None, calibration: None, measurement: None, report: None }
    }
}

pub type CaseHandle = Arc<RwLock<Case>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageInfo {
    pub name: String,
    pub step: Step,
    pub kind: String,
}

#[derive(Serialize, Deserialize)]
struct CaseDocument {
    case_id: String,
    patient: PatientRecord,
    image: Option<ImageInfo>,
    stages: Vec<StageInfo>,
    provenance: PipelineProvenance,
    calibration: Option<Calibration>,
    measurement: Option<DiameterMeasurement>,
    report: Option<Value>,
}

#[derive(Serialize, Deserialize)]
struct LabelsFile {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

pub fn stage_infos(state: &PipelineState) -> Vec<StageInfo> {
    state
        .stages()
        .iter()
        .map(|s| StageInfo { name: s.name.clone(), step: s.step, kind: s.snapshot.kind().to_string() })
        .collect()
}

/// 128 random bits, lowercase hex.
fn new_case_id() -> String {
    format!("{:032x}", rand::rng().random::<u128>())
}

pub struct CaseStore {
    cases: SyncRwLock<BTreeMap<String, CaseHandle>>,
    data_dir: Option<PathBuf>,
}

impl CaseStore {
    pub fn in_memory() -> Self {
        Self { cases: SyncRwLock::default(), data_dir: None }
    }

    /// Opens `dir`, creating it if needed, and loads every case found there.
    /// Case directories that fail to load are skipped with a warning.
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut cases = BTreeMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if !path.join("case.json").is_file() {
                continue;
            }
            match load_case(&path) {
                Ok(case) => {
                    cases.insert(case.id.clone(), Arc::new(RwLock::new(case)));
                }
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping unreadable case"),
            }
        }
        Ok(Self { cases: SyncRwLock::new(cases), data_dir: Some(dir) })
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    pub fn get(&self, id: &str) -> Option<CaseHandle> {
        self.cases.read().expect("case table poisoned").get(id).cloned()
    }

    pub fn handles(&self) -> Vec<CaseHandle> {
        self.cases.read().expect("case table poisoned").values().cloned().collect()
    }

    /// Registers a new case and persists it before it becomes visible.
    pub fn create(&self, patient: PatientRecord) -> io::Result<CaseHandle> {
        let mut table = self.cases.write().expect("case table poisoned");
        let id = loop {
            let id = new_case_id();
            if !table.contains_key(&id) {
                break id;
            }
        };
        let case = Case::new(id.clone(), patient);
        self.save(&case, SaveScope::Metadata)?;
        let handle = Arc::new(RwLock::new(case));
        table.insert(id, handle.clone());
        Ok(handle)
    }

    /// Writes the parts of `case` named by `scope`, then `case.json`.
    pub fn save(&self, case: &Case, scope: SaveScope) -> io::Result<()> {
        let Some(root) = &self.data_dir else {
            return Ok(());
        };
        let dir = root.join(&case.id);
        let stages_dir = dir.join("stages");
        fs::create_dir_all(&stages_dir)?;
        match (scope, &case.pipeline) {
            (SaveScope::Metadata, _) | (_, None) => {}
            (SaveScope::NewImage, Some(p)) => {
                fs::remove_dir_all(&stages_dir)?;
                fs::create_dir_all(&stages_dir)?;
                write_atomic(&dir.join("original.pgm"), &write_pgm(p.original()))?;
            }
            (SaveScope::StagesFrom(first), Some(p)) => {
                for stage in &p.stages()[first..] {
                    write_stage(&stages_dir, stage)?;
                }
            }
        }
        let doc = CaseDocument {
            case_id: case.id.clone(),
            patient: case.patient.clone(),
            image: case
                .pipeline
                .as_ref()
                .map(|p| ImageInfo { width: p.original().width(), height: p.original().height() }),
            stages: case.pipeline.as_ref().map(stage_infos).unwrap_or_default(),
            provenance: case.pipeline.as_ref().map(|p| p.provenance().clone()).unwrap_or_default(),
            calibration: case.calibration,
            measurement: case.measurement.clone(),
            report: case
                .report
                .as_ref()
                .map(|r| serde_json::from_str(&serialize_report(r)).expect("report JSON is valid")),
        };
        write_atomic(&dir.join("case.json"), to_canonical_json(&doc).as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaveScope {
    Metadata,
    NewImage,
    /// Stages from this index onward are new.
    StagesFrom(usize),
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn write_stage(dir: &Path, stage: &Stage) -> io::Result<()> {
    if let Snapshot::Labels(l) = &stage.snapshot {
        let file = LabelsFile { width: l.width(), height: l.height(), labels: l.labels().to_vec() };
        let json = serde_json::to_vec(&file).map_err(io::Error::other)?;
        write_atomic(&dir.join(format!("{}.labels.json", stage.name)), &json)?;
    }
    write_atomic(&dir.join(format!("{}.pgm", stage.name)), &write_pgm(&stage.snapshot.to_image()))
}

fn invalid(msg: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

fn load_case(dir: &Path) -> io::Result<Case> {
    let doc: CaseDocument = serde_json::from_slice(&fs::read(dir.join("case.json"))?).map_err(invalid)?;
    let pipeline = match doc.image {
        None => None,
        Some(_) => {
            let original = read_pgm(&fs::read(dir.join("original.pgm"))?).map_err(invalid)?;
            let stages_dir = dir.join("stages");
            let mut stages = Vec::with_capacity(doc.stages.len());
            for info in doc.stages {
                let snapshot = match info.kind.as_str() {
                    "labels" => {
                        let bytes = fs::read(stages_dir.join(format!("{}.labels.json", info.name)))?;
                        let f: LabelsFile = serde_json::from_slice(&bytes).map_err(invalid)?;
                        Snapshot::Labels(LabelMap::new(f.width, f.height, f.labels).map_err(invalid)?)
                    }
                    kind => {
                        let img =
                            read_pgm(&fs::read(stages_dir.join(format!("{}.pgm", info.name)))?).map_err(invalid)?;
                        if kind == "mask" {
                            Snapshot::Mask(BinaryMask::from_image(&img))
                        } else {
                            Snapshot::Image(img)
                        }
                    }
                };
                stages.push(Stage { name: info.name, step: info.step, snapshot });
            }
            Some(PipelineState::from_parts(original, stages, doc.provenance))
        }
    };
    let report = match doc.report {
        Some(v) => Some(deserialize_report(&v.to_string()).map_err(invalid)?),
        None => None,
    };
    Ok(Case {
        id: doc.case_id,
        patient: doc.patient,
        pipeline,
        calibration: doc.calibration,
        measurement: doc.measurement,
        report,
    })
}
