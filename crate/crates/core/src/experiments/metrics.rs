//! Tip error metrics, workspace regions and summary statistics.

use serde::{Deserialize, Serialize};

use crate::liegroup::Pose;

/// Tip position error (mm) and tip direction error (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipError {
    pub e1: f64,
    pub e2: f64,
}

pub fn tip_errors(estimated: &Pose, truth: &Pose) -> TipError {
    TipError {
        e1: (estimated.p - truth.p).norm(),
        e2: estimated.x_axis().angle(&truth.x_axis()).to_degrees(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Strongly bent half of the workspace.
    A,
    B,
}

/// Lateral distance of the tip from the straight-arm axis, in the base frame.
pub fn bend_deflection(tip: &Pose, base: &Pose) -> f64 {
    let local = base.inverse().transform_point(&tip.p);
    local.y.hypot(local.z)
}

/// Median split of tip deflections over a set of configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub base_pose: Pose,
    pub median_deflection: f64,
}

impl Workspace {
    pub fn from_tips<'a>(base_pose: &Pose, tips: impl IntoIterator<Item = &'a Pose>) -> Self {
        let d: Vec<f64> = tips
            .into_iter()
            .map(|t| bend_deflection(t, base_pose))
            .collect();
        Workspace {
            base_pose: *base_pose,
            median_deflection: median(&d).unwrap_or(0.0),
        }
    }

    pub fn region_of(&self, tip: &Pose) -> Region {
        if bend_deflection(tip, &self.base_pose) > self.median_deflection {
            Region::A
        } else {
            Region::B
        }
    }
}

/// Median with the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Mean, sample standard deviation and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Stats {
                mean: f64::NAN,
                std: f64::NAN,
                max: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Stats {
            mean,
            std: var.sqrt(),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            count: n,
        }
    }

    pub fn mean_std(&self) -> String {
        format!("{:.3}±{:.3}", self.mean, self.std)
    }
}
