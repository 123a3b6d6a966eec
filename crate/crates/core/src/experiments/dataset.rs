//! Versioned JSON dataset of rendered configurations.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::camera::{Silhouette, SpherePoint};
use crate::error::{Error, Result};
use crate::liegroup::Pose;
use crate::strainbasis::CoefficientVector;

use super::scenario::SyntheticScenario;

pub const SCHEMA_VERSION: u64 = 1;

/// Boundary observation of one marker, on the sphere and in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerRecord {
    pub s: f64,
    pub y_r: SpherePoint,
    pub y_l: SpherePoint,
    pub pixel_r: [f64; 2],
    pub pixel_l: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub id: usize,
    pub bend_psi: f64,
    pub twist_psi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_coeffs: Option<CoefficientVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_tip: Option<Pose>,
    pub observations: Vec<MarkerRecord>,
    pub base_observation: Silhouette,
    pub tip_observation: Silhouette,
    /// Tracker reading of the sensor in the magnetic-source frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor_pose: Option<Pose>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// A configuration dropped during generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: usize,
    pub bend_psi: f64,
    pub twist_psi: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema_version: u64,
    pub scenario: SyntheticScenario,
    pub configs: Vec<ConfigRecord>,
    #[serde(default)]
    pub excluded: Vec<Exclusion>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Dataset {
    pub fn new(
        scenario: SyntheticScenario,
        configs: Vec<ConfigRecord>,
        excluded: Vec<Exclusion>,
    ) -> Self {
        Dataset {
            schema_version: SCHEMA_VERSION,
            scenario,
            configs,
            excluded,
            extra: Map::new(),
        }
    }

    pub fn has_ground_truth(&self) -> bool {
        !self.configs.is_empty() && self.configs.iter().all(|c| c.true_tip.is_some())
    }

    /// Parses and validates a dataset document.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Schema("dataset must be a JSON object".into()))?;
        match obj.get("schema_version") {
            None => return Err(Error::Schema("missing field `schema_version`".into())),
            Some(v) if v.as_u64() != Some(SCHEMA_VERSION) => {
                return Err(Error::Schema(format!(
                    "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
                )))
            }
            _ => {}
        }
        let d: Dataset = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        d.scenario.validate()?;
        for c in &d.configs {
            if !c.observations.windows(2).all(|w| w[0].s < w[1].s) {
                return Err(Error::Schema(format!(
                    "config {}: marker arclengths not increasing",
                    c.id
                )));
            }
        }
        Ok(d)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_json(&fs::read_to_string(path)?)
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    fs::write(path, dataset.to_json()?)?;
    Ok(())
}
