//! Fitting a dataset with several bases and tabulating tip errors.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{solve_shape, EstimatorOptions, FitResult};
use crate::rodmodel::tip_pose;
use crate::strainbasis::{BasisSpec, CoefficientVector, StrainField};

use super::dataset::Dataset;
use super::metrics::{tip_errors, Region, Stats, Workspace};

/// Outcome of fitting one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFit {
    pub config_id: usize,
    #[serde(flatten)]
    pub outcome: FitOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitOutcome {
    Fitted {
        fit: FitResult,
        tip: crate::liegroup::Pose,
    },
    Failed {
        error: String,
    },
}

impl ConfigFit {
    pub fn converged(&self) -> bool {
        matches!(&self.outcome, FitOutcome::Fitted { fit, .. } if fit.converged)
    }
}

/// Fits every configuration from zero coefficients; results follow the
/// dataset order.
pub fn fit_dataset(
    dataset: &Dataset,
    basis: &BasisSpec,
    options: &EstimatorOptions,
) -> Vec<ConfigFit> {
    let sc = &dataset.scenario;
    dataset
        .configs
        .par_iter()
        .map(|c| {
            let obs = c.observation_set(&sc.base_pose, sc.radius_mm);
            let outcome = solve_shape(
                &obs,
                basis,
                &CoefficientVector::zeros(basis.param_count()),
                options,
            )
            .and_then(|fit| {
                let field = StrainField::new(basis.clone(), fit.coeffs.clone())?;
                let tip = tip_pose(&field, &sc.base_pose, &options.integrator)?;
                Ok(FitOutcome::Fitted { fit, tip })
            })
            .unwrap_or_else(|e| FitOutcome::Failed {
                error: e.to_string(),
            });
            ConfigFit {
                config_id: c.id,
                outcome,
            }
        })
        .collect()
}

/// Per-configuration errors against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub config_id: usize,
    pub e1: f64,
    pub e2: f64,
    pub region: Region,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub basis: BasisSpec,
    pub label: String,
    pub order: usize,
    pub segments: usize,
    pub params: usize,
    pub e1: Stats,
    pub e2: Stats,
    pub region_a_e1: Stats,
    pub region_a_e2: Stats,
    pub converged: usize,
    pub failed: usize,
    pub records: Vec<ErrorRecord>,
    pub fits: Vec<ConfigFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub median_deflection_mm: f64,
    pub rows: Vec<ComparisonRow>,
}

/// Errors of fitted configurations in dataset order; failed fits are
/// skipped.
pub fn error_records(
    dataset: &Dataset,
    fits: &[ConfigFit],
    workspace: &Workspace,
) -> Vec<ErrorRecord> {
    dataset
        .configs
        .iter()
        .zip(fits)
        .filter_map(|(c, f)| match (&f.outcome, &c.true_tip) {
            (FitOutcome::Fitted { fit, tip }, Some(truth)) => {
                let e = tip_errors(tip, truth);
                Some(ErrorRecord {
                    config_id: c.id,
                    e1: e.e1,
                    e2: e.e2,
                    region: workspace.region_of(truth),
                    converged: fit.converged,
                })
            }
            _ => None,
        })
        .collect()
}

pub fn workspace_of(dataset: &Dataset) -> Workspace {
    Workspace::from_tips(
        &dataset.scenario.base_pose,
        dataset.configs.iter().filter_map(|c| c.true_tip.as_ref()),
    )
}

/// Fits the dataset with each basis and aggregates E1/E2 overall and over
/// region A.
pub fn compare_bases(
    dataset: &Dataset,
    bases: &[BasisSpec],
    options: &EstimatorOptions,
) -> Result<ComparisonReport> {
    if dataset.configs.is_empty() {
        return Err(Error::InvalidObservations(
            "dataset has no configurations".into(),
        ));
    }
    if !dataset.has_ground_truth() {
        return Err(Error::InvalidObservations(
            "dataset lacks ground-truth tips".into(),
        ));
    }
    let workspace = workspace_of(dataset);
    let mut rows = Vec::with_capacity(bases.len());
    for basis in bases {
        basis.validate()?;
        let fits = fit_dataset(dataset, basis, options);
        let records = error_records(dataset, &fits, &workspace);
        let pick = |f: fn(&ErrorRecord) -> f64, region: Option<Region>| {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| region.is_none_or(|g| r.region == g))
                .map(f)
                .collect();
            Stats::of(&v)
        };
        let (order, segments) = basis.order_and_segments();
        rows.push(ComparisonRow {
            basis: basis.clone(),
            label: basis.to_string(),
            order,
            segments,
            params: basis.param_count(),
            e1: pick(|r| r.e1, None),
            e2: pick(|r| r.e2, None),
            region_a_e1: pick(|r| r.e1, Some(Region::A)),
            region_a_e2: pick(|r| r.e2, Some(Region::A)),
            converged: fits.iter().filter(|f| f.converged()).count(),
            failed: fits
                .iter()
                .filter(|f| matches!(f.outcome, FitOutcome::Failed { .. }))
                .count(),
            records,
            fits,
        });
    }
    Ok(ComparisonReport {
        median_deflection_mm: workspace.median_deflection,
        rows,
    })
}

pub const CSV_HEADER: &str =
    "basis,order,segments,params,e1_mm,e1_max_mm,e2_deg,e2_max_deg,a_e1_mm,a_e1_max_mm,a_e2_deg,a_e2_max_deg";

impl ComparisonReport {
    /// One line per basis with mean±std and max of E1/E2, overall and in
    /// region A.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.3},{},{:.3},{},{:.3},{},{:.3}",
                r.label,
                r.order,
                r.segments,
                r.params,
                r.e1.mean_std(),
                r.e1.max,
                r.e2.mean_std(),
                r.e2.max,
                r.region_a_e1.mean_std(),
                r.region_a_e1.max,
                r.region_a_e2.mean_std(),
                r.region_a_e2.max,
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::scenario::SyntheticScenario;
    use crate::strainbasis::BasisFamily;

    fn small_dataset() -> Dataset {
        let mut s = SyntheticScenario::default();
        s.grid.bend_pressures = vec![0.0, 10.0, 25.0];
        s.grid.twist_pressures = vec![0.0, 20.0];
        s.generate_grid().unwrap()
    }

    #[test]
    fn model_matched_noiseless_fit_is_exact() {
        let d = small_dataset();
        let basis = d.scenario.true_basis.clone();
        let report = compare_bases(
            &d,
            &[basis],
            &EstimatorOptions::for_length(d.scenario.length_mm),
        )
        .unwrap();
        let row = &report.rows[0];
        assert_eq!(row.params, 4);
        assert_eq!(row.records.len(), 6);
        assert!(row.e1.mean < 1e-3, "{:?}", row.e1);
        assert_eq!(row.converged, 6);
    }

    #[test]
    fn csv_layout() {
        let d = small_dataset();
        let bases = vec![
            BasisSpec::br2(BasisFamily::Constant, d.scenario.length_mm).unwrap(),
            BasisSpec::br2(BasisFamily::Polynomial { order: 1 }, d.scenario.length_mm).unwrap(),
        ];
        let report = compare_bases(
            &d,
            &bases,
            &EstimatorOptions::for_length(d.scenario.length_mm),
        )
        .unwrap();
        let csv = report.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 12);
        assert!(lines[1].starts_with("constant,0,1,2,"));
        assert!(lines[2].starts_with("poly-1,1,1,4,"));
        assert!(lines[1].contains('±'));
    }

    #[test]
    fn params_match_basis() {
        let d = small_dataset();
        let bases = BasisSpec::table_rows(d.scenario.length_mm);
        let report = compare_bases(
            &d,
            &bases[..1],
            &EstimatorOptions::for_length(d.scenario.length_mm),
        )
        .unwrap();
        for (row, b) in report.rows.iter().zip(&bases) {
            assert_eq!(row.params, b.param_count());
        }
    }

    #[test]
    fn ground_truth_required() {
        let mut d = small_dataset();
        d.configs[0].true_tip = None;
        let b = d.scenario.true_basis.clone();
        assert!(compare_bases(&d, &[b], &EstimatorOptions::for_length(287.0)).is_err());
    }
}
