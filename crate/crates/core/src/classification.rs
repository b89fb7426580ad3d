//! Diameter-based tumour type, risk stage and AJCC T size category.
//!
//! Boundaries:
//! - type: `0` healthy, `(0, 1)` cm benign, `>= 1` cm malignant
//! - risk: `0` none, `(0, 1]` low, `(1, 2]` low-medium, `> 2` cm high
//! - T: `<= 1` mm T1mi, `(1, 5]` T1a, `(5, 10]` T1b, `(10, 20]` T1c,
//!   `(20, 50]` T2, `> 50` T3; chest wall or skin invasion is T4 at any size.
//!
//! These are decision aids for a research pipeline, not medical advice.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ClassifyError {
    #[error("diameter must not be negative, got {0}")]
    NegativeDiameter(f64),
    #[error("diameter must be finite, got {0}")]
    NonFinite(f64),
    #[error("diameter must be positive for T staging, got {0}")]
    NonPositiveDiameter(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TumorType {
    Healthy,
    Benign,
    Malignant,
}

impl TumorType {
    pub fn as_str(self) -> &'static str {
        match self {
            TumorType::Healthy => "healthy",
            TumorType::Benign => "benign",
            TumorType::Malignant => "malignant",
        }
    }
}

impl fmt::Display for TumorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered `NoRisk < Low < LowMedium < High`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskStage {
    NoRisk,
    Low,
    LowMedium,
    High,
}

impl RiskStage {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskStage::NoRisk => "no-risk",
            RiskStage::Low => "low",
            RiskStage::LowMedium => "low-medium",
            RiskStage::High => "high",
        }
    }

    /// Human wording used in rendered reports.
    pub fn phrase(self) -> &'static str {
        match self {
            RiskStage::NoRisk => "no risk",
            RiskStage::Low => "low risk",
            RiskStage::LowMedium => "low to medium risk",
            RiskStage::High => "high risk",
        }
    }
}

impl fmt::Display for RiskStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// AJCC 8th edition primary-tumour size category. Ordered by size; `T4`
/// comes from invasion rather than size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TCategory {
    T1mi,
    T1a,
    T1b,
    T1c,
    T2,
    T3,
    T4,
}

impl fmt::Display for TCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

fn check_diameter(d: f64) -> Result<f64, ClassifyError> {
    if !d.is_finite() {
        Err(ClassifyError::NonFinite(d))
    } else if d < 0.0 {
        Err(ClassifyError::NegativeDiameter(d))
    } else {
        Ok(d)
    }
}

pub fn classify_type(d_cm: f64) -> Result<TumorType, ClassifyError> {
    let d = check_diameter(d_cm)?;
    Ok(if d == 0.0 {
        TumorType::Healthy
    } else if d < 1.0 {
        TumorType::Benign
    } else {
        TumorType::Malignant
    })
}

pub fn classify_risk(d_cm: f64) -> Result<RiskStage, ClassifyError> {
    let d = check_diameter(d_cm)?;
    Ok(if d == 0.0 {
        RiskStage::NoRisk
    } else if d <= 1.0 {
        RiskStage::Low
    } else if d <= 2.0 {
        RiskStage::LowMedium
    } else {
        RiskStage::High
    })
}

pub fn classify_t_category(d_mm: f64, chest_wall_or_skin_invasion: bool) -> Result<TCategory, ClassifyError> {
    if !d_mm.is_finite() {
        return Err(ClassifyError::NonFinite(d_mm));
    }
    if d_mm <= 0.0 {
        return Err(ClassifyError::NonPositiveDiameter(d_mm));
    }
    if chest_wall_or_skin_invasion {
        return Ok(TCategory::T4);
    }
    Ok(match d_mm {
        d if d <= 1.0 => TCategory::T1mi,
        d if d <= 5.0 => TCategory::T1a,
        d if d <= 10.0 => TCategory::T1b,
        d if d <= 20.0 => TCategory::T1c,
        d if d <= 50.0 => TCategory::T2,
        _ => TCategory::T3,
    })
}
