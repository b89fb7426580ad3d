//! Step-by-step driver for the segmentation flow.
//!
//! [`PipelineState`] keeps the ordered stage snapshots of one image and knows
//! which input each step consumes: intensity steps read the latest image,
//! mask steps the latest mask, and `components` the latest mask or label map,
//! whichever is newer. The batch runner applies [`Step::DEFAULT_ORDER`]; the
//! HTTP service applies steps one at a time as the operator clicks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::image::{BinaryMask, GrayImage, LabelMap, Raster};
use crate::imaging::{
    binarize, close, connected_components, histogram, median_filter, open, otsu_threshold, region_stats, split_blobs,
    Connectivity, Histogram, ImagingError, RegionStats, StructuringElement, DEFAULT_H_MIN, DEFAULT_MEDIAN_WINDOW,
};
use crate::measurement::{measure_largest_component, MeasureError, TumorComponent, DEFAULT_MIN_AREA};
use crate::report::{PipelineProvenance, StepRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("step {step} needs {needs}, which has not been produced yet")]
    PrerequisiteMissing { step: String, needs: &'static str },
    #[error("unknown pipeline step {0:?}")]
    UnknownStep(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    Median,
    Otsu,
    MorphOpen,
    MorphClose,
    Watershed,
    Components,
}

impl Step {
    pub const DEFAULT_ORDER: [Step; 6] =
        [Step::Median, Step::Otsu, Step::MorphOpen, Step::MorphClose, Step::Watershed, Step::Components];

    pub fn name(self) -> &'static str {
        match self {
            Step::Median => "median",
            Step::Otsu => "otsu",
            Step::MorphOpen => "morph-open",
            Step::MorphClose => "morph-close",
            Step::Watershed => "watershed",
            Step::Components => "components",
        }
    }
}

impl FromStr for Step {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "median" => Step::Median,
            "otsu" => Step::Otsu,
            "morph-open" | "open" => Step::MorphOpen,
            "morph-close" | "close" => Step::MorphClose,
            "watershed" => Step::Watershed,
            "components" => Step::Components,
            other => return Err(PipelineError::UnknownStep(other.to_string())),
        })
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Comma-separated step list, e.g. `median,otsu,open,close`.
pub fn parse_steps(s: &str) -> Result<Vec<Step>, PipelineError> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub median_window: usize,
    pub structuring_element: StructuringElement,
    pub connectivity: Connectivity,
    pub h_min: f64,
    pub min_area: usize,
    pub invert: bool,
    pub steps: Vec<Step>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            median_window: DEFAULT_MEDIAN_WINDOW,
            structuring_element: StructuringElement::default(),
            connectivity: Connectivity::default(),
            h_min: DEFAULT_H_MIN,
            min_area: DEFAULT_MIN_AREA,
            invert: false,
            steps: Step::DEFAULT_ORDER.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Image(GrayImage),
    Mask(BinaryMask),
    Labels(LabelMap),
}

impl Snapshot {
    pub fn kind(&self) -> &'static str {
        match self {
            Snapshot::Image(_) => "image",
            Snapshot::Mask(_) => "mask",
            Snapshot::Labels(_) => "labels",
        }
    }

    /// Displayable raster: masks as 0/255, labels saturating at 255.
    pub fn to_image(&self) -> GrayImage {
        match self {
            Snapshot::Image(img) => img.clone(),
            Snapshot::Mask(m) => m.to_image(),
            Snapshot::Labels(l) => l.to_image(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub name: String,
    pub step: Step,
    pub snapshot: Snapshot,
}

/// Scalar results of one step, as reported to callers.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub stage: String,
    pub record: StepRecord,
    pub outputs: serde_json::Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineState {
    original: GrayImage,
    stages: Vec<Stage>,
    provenance: PipelineProvenance,
}

impl PipelineState {
    pub fn new(original: GrayImage) -> Self {
        Self { original, stages: Vec::new(), provenance: PipelineProvenance::default() }
    }

    /// Rebuilds a state from persisted parts.
    pub fn from_parts(original: GrayImage, stages: Vec<Stage>, provenance: PipelineProvenance) -> Self {
        Self { original, stages, provenance }
    }

    pub fn original(&self) -> &GrayImage {
        &self.original
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn provenance(&self) -> &PipelineProvenance {
        &self.provenance
    }

    /// Latest intensity image; the original if no filter has run.
    pub fn current_image(&self) -> &GrayImage {
        self.stages
            .iter()
            .rev()
            .find_map(|s| match &s.snapshot {
                Snapshot::Image(img) => Some(img),
                _ => None,
            })
            .unwrap_or(&self.original)
    }

    pub fn current_mask(&self) -> Option<&BinaryMask> {
        self.stages.iter().rev().find_map(|s| match &s.snapshot {
            Snapshot::Mask(m) => Some(m),
            _ => None,
        })
    }

    /// Newest mask or label map.
    fn current_regions(&self) -> Option<&Snapshot> {
        self.stages.iter().rev().map(|s| &s.snapshot).find(|s| matches!(s, Snapshot::Mask(_) | Snapshot::Labels(_)))
    }

    pub fn current_histogram(&self) -> Histogram {
        histogram(self.current_image())
    }

    fn unique_name(&self, step: Step) -> String {
        let base = step.name();
        if self.stage(base).is_none() {
            return base.to_string();
        }
        (2..).map(|n| format!("{base}-{n}")).find(|candidate| self.stage(candidate).is_none()).expect("unbounded range")
    }

    fn require_mask(&self, step: Step) -> Result<&BinaryMask, PipelineError> {
        self.current_mask().ok_or(PipelineError::PrerequisiteMissing { step: step.name().to_string(), needs: "a mask" })
    }

    /// Runs one step and appends its snapshot.
    pub fn apply(&mut self, step: Step, cfg: &PipelineConfig) -> Result<StepOutcome, PipelineError> {
        let mut outputs = serde_json::Map::new();
        let (snapshot, record) = match step {
            Step::Median => {
                let out = median_filter(self.current_image(), cfg.median_window)?;
                (Snapshot::Image(out), StepRecord::new(step.name()).with("window", cfg.median_window))
            }
            Step::Otsu => {
                let t = otsu_threshold(&histogram(self.current_image()))?;
                outputs.insert("threshold".into(), json!(t));
                let mask = binarize(self.current_image(), t, cfg.invert);
                outputs.insert("foreground_px".into(), json!(mask.count()));
                let record = StepRecord::new(step.name()).with("threshold", t).with("invert", cfg.invert);
                (Snapshot::Mask(mask), record)
            }
            Step::MorphOpen | Step::MorphClose => {
                let mask = self.require_mask(step)?;
                let se = &cfg.structuring_element;
                let out = if step == Step::MorphOpen { open(mask, se) } else { close(mask, se) };
                outputs.insert("foreground_px".into(), json!(out.count()));
                (Snapshot::Mask(out), StepRecord::new(step.name()).with("se", se.to_string()))
            }
            Step::Watershed => {
                let mask = self.require_mask(step)?;
                let labels = if mask.count() == 0 {
                    LabelMap::new(mask.width(), mask.height(), vec![0; mask.len()]).expect("all-zero labels are dense")
                } else {
                    split_blobs(mask, cfg.h_min)?
                };
                outputs.insert("regions".into(), json!(labels.num_labels()));
                (Snapshot::Labels(labels), StepRecord::new(step.name()).with("h_min", cfg.h_min))
            }
            Step::Components => {
                let (labels, stats, source) = match self.current_regions() {
                    Some(Snapshot::Labels(l)) => (l.clone(), region_stats(l), "labels"),
                    Some(Snapshot::Mask(m)) => {
                        let (l, s) = connected_components(m, cfg.connectivity);
                        (l, s, "mask")
                    }
                    _ => {
                        return Err(PipelineError::PrerequisiteMissing {
                            step: step.name().to_string(),
                            needs: "a mask",
                        })
                    }
                };
                outputs.insert("count".into(), json!(stats.len()));
                outputs.insert("regions".into(), serde_json::to_value(&stats).expect("stats serialize"));
                let mut record = StepRecord::new(step.name()).with("source", source);
                if source == "mask" {
                    record = record.with("connectivity", u8::from(cfg.connectivity));
                }
                (Snapshot::Labels(labels), record)
            }
        };
        let name = self.unique_name(step);
        self.stages.push(Stage { name: name.clone(), step, snapshot });
        self.provenance.push(record.clone());
        Ok(StepOutcome { stage: name, record, outputs })
    }

    /// Labels and per-region statistics used for automatic measurement: the
    /// newest label map, or the components of the newest mask.
    pub fn regions(&self, connectivity: Connectivity) -> Result<(LabelMap, Vec<RegionStats>), PipelineError> {
        match self.current_regions() {
            Some(Snapshot::Labels(l)) => Ok((l.clone(), region_stats(l))),
            Some(Snapshot::Mask(m)) => Ok(connected_components(m, connectivity)),
            _ => Err(PipelineError::PrerequisiteMissing { step: "measure".into(), needs: "a mask" }),
        }
    }

    /// Largest qualifying region and its Feret diameter; `None` when no lump.
    pub fn measure_auto(&self, cfg: &PipelineConfig) -> Result<Option<TumorComponent>, PipelineError> {
        let (labels, stats) = self.regions(cfg.connectivity)?;
        Ok(measure_largest_component(&labels, &stats, cfg.min_area)?)
    }
}

/// Applies every configured step in order.
pub fn run_pipeline(img: GrayImage, cfg: &PipelineConfig) -> Result<PipelineState, PipelineError> {
    let mut state = PipelineState::new(img);
    for &step in &cfg.steps {
        state.apply(step, cfg)?;
    }
    Ok(state)
}
