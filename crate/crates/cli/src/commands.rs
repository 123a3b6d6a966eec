use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use strainshape::calibration::{
    calibration_options, chain_disagreement, closed_form_sensor_init, estimate_base_pose,
    estimate_sensor_transforms, pose_from_silhouette, sensor_restarts, BaseCalibProblem,
    ConstrainedTipOffset, RestartSpread, SensorCalibProblem,
};
use strainshape::camera::Silhouette;
use strainshape::estimator::EstimatorOptions;
use strainshape::experiments::compare::{error_records, workspace_of};
use strainshape::experiments::{
    compare_bases, fit_dataset, read_dataset, write_dataset, ConfigFit, Dataset, ErrorRecord,
    FitOutcome, Region, SyntheticScenario,
};
use strainshape::liegroup::Pose;
use strainshape::rodmodel::{
    integrate_shape, uniform_grid, write_shape_csv, IntegratorMethod, IntegratorSpec,
};
use strainshape::strainbasis::{BasisFamily, BasisSpec, StrainField};

use crate::config::{check_readable, check_writable, required, FileConfig};
use crate::failure::Failure;
use crate::{BasisKind, CalibMode, Cli, Command, IntegratorArgs, IntegratorKind};

const SHAPE_SAMPLES: usize = 50;

struct Common {
    json: bool,
    jobs: usize,
    seed: Option<u64>,
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let common = Common {
        json: cli.json || file.json.unwrap_or(false),
        jobs: cli.jobs.or(file.jobs).unwrap_or(0),
        seed: cli.seed.or(file.seed),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .map_err(|e| Failure::Schema(format!("--jobs: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate {
            scenario,
            out,
            noise_px,
        } => simulate(
            &common,
            scenario.or(file.scenario),
            required(out.or(file.out), "out")?,
            noise_px.or(file.noise_px),
        ),
        Command::Estimate {
            dataset,
            out,
            basis,
            integrator,
            shapes_dir,
        } => {
            let kind = match (basis.basis, file.basis.as_deref()) {
                (Some(k), _) => k,
                (None, Some(name)) => parse_basis_kind(name)?,
                (None, None) => BasisKind::Piecewise,
            };
            let segments = basis.segments.or(file.segments);
            let order = basis.order.or(file.order);
            let integ = integrator_spec(&integrator, &file)?;
            estimate(
                &common,
                &required(dataset.or(file.dataset), "dataset")?,
                &required(out.or(file.out), "out")?,
                kind,
                segments,
                order,
                integ,
                shapes_dir.or(file.shapes_dir),
            )
        }
        Command::Calibrate {
            dataset,
            out,
            mode,
            init,
            restarts,
        } => {
            let mode = match (mode, file.mode.as_deref()) {
                (Some(m), _) => m,
                (None, Some("base")) => CalibMode::Base,
                (None, Some("sensor")) => CalibMode::Sensor,
                (None, Some(other)) => {
                    return Err(Failure::Schema(format!("unknown mode `{other}`")))
                }
                (None, None) => {
                    return Err(Failure::Schema("missing required option --mode".into()))
                }
            };
            calibrate(
                &common,
                &required(dataset.or(file.dataset), "dataset")?,
                &required(out.or(file.out), "out")?,
                mode,
                init.or(file.init),
                restarts.or(file.restarts).unwrap_or(10),
            )
        }
        Command::Compare {
            dataset,
            out,
            bases,
            integrator,
        } => {
            let integ = integrator_spec(&integrator, &file)?;
            compare(
                &common,
                &required(dataset.or(file.dataset), "dataset")?,
                &required(out.or(file.out), "out")?,
                bases.or(file.bases).as_deref(),
                integ,
            )
        }
    })
}

fn parse_basis_kind(name: &str) -> Result<BasisKind, Failure> {
    match name {
        "constant" => Ok(BasisKind::Constant),
        "piecewise" => Ok(BasisKind::Piecewise),
        "poly" => Ok(BasisKind::Poly),
        other => Err(Failure::Schema(format!("unknown basis `{other}`"))),
    }
}

fn integrator_spec(args: &IntegratorArgs, file: &FileConfig) -> Result<IntegratorSpec, Failure> {
    let method = match (args.integrator, file.integrator.as_deref()) {
        (Some(IntegratorKind::Exp1), _) | (None, Some("exp1")) | (None, None) => {
            IntegratorMethod::FirstOrderExp
        }
        (Some(IntegratorKind::Cg3), _) | (None, Some("cg3")) => IntegratorMethod::CrouchGrossman3,
        (None, Some(other)) => {
            return Err(Failure::Schema(format!("unknown integrator `{other}`")))
        }
    };
    let steps = args
        .steps
        .or(file.steps)
        .unwrap_or(IntegratorSpec::default().steps);
    Ok(IntegratorSpec::new(method, steps)?)
}

fn basis_spec(
    kind: BasisKind,
    segments: Option<usize>,
    order: Option<usize>,
    length: f64,
) -> Result<BasisSpec, Failure> {
    let family = match kind {
        BasisKind::Constant => BasisFamily::Constant,
        BasisKind::Piecewise => BasisFamily::PiecewiseConstant {
            segments: segments.unwrap_or(2),
        },
        BasisKind::Poly => BasisFamily::Polynomial {
            order: order.unwrap_or(2),
        },
    };
    Ok(BasisSpec::br2(family, length)?)
}

/// Parses labels such as `constant`, `piecewise-2` or `poly-3`.
fn parse_basis_label(label: &str, length: f64) -> Result<BasisSpec, Failure> {
    let label = label.trim();
    let (kind, n) = match label.split_once('-') {
        Some((k, n)) => (
            k,
            Some(
                n.parse::<usize>()
                    .map_err(|_| Failure::Schema(format!("bad basis label `{label}`")))?,
            ),
        ),
        None => (label, None),
    };
    let kind = parse_basis_kind(kind)?;
    basis_spec(kind, n, n, length)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    check_readable(path)?;
    Ok(read_dataset(path)?)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    configs: usize,
    excluded: &'a [strainshape::experiments::Exclusion],
}

fn simulate(
    common: &Common,
    scenario: Option<PathBuf>,
    out: PathBuf,
    noise: Option<f64>,
) -> Result<(), Failure> {
    let mut sc = match &scenario {
        Some(p) => {
            check_readable(p)?;
            let text = fs::read_to_string(p).map_err(|e| Failure::io(p, e))?;
            serde_json::from_str::<SyntheticScenario>(&text)
                .map_err(|e| Failure::Schema(format!("{}: {e}", p.display())))?
        }
        None => SyntheticScenario::default(),
    };
    check_writable(&out)?;
    if let Some(seed) = common.seed {
        sc.seed = seed;
    }
    if let Some(n) = noise {
        sc.pixel_noise_sigma = n;
    }
    let ds = sc.generate_grid()?;
    write_dataset(&out, &ds)?;
    eprintln!(
        "{} configurations written to {}",
        ds.configs.len(),
        out.display()
    );
    for e in &ds.excluded {
        eprintln!(
            "excluded config {} (bend {:.2} psi, twist {:.2} psi): {}",
            e.id, e.bend_psi, e.twist_psi, e.reason
        );
    }
    if common.json {
        print_json(&SimulateSummary {
            configs: ds.configs.len(),
            excluded: &ds.excluded,
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EstimateRecord<'a> {
    #[serde(flatten)]
    fit: &'a ConfigFit,
    #[serde(skip_serializing_if = "Option::is_none")]
    e1_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    e2_deg: Option<f64>,
}

#[derive(Serialize)]
struct EstimateSummary {
    basis: String,
    params: usize,
    configs: usize,
    converged: usize,
    failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_e1_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_e2_deg: Option<f64>,
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    basis: &'a BasisSpec,
    integrator: IntegratorSpec,
    summary: &'a EstimateSummary,
    results: Vec<EstimateRecord<'a>>,
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    common: &Common,
    dataset: &Path,
    out: &Path,
    kind: BasisKind,
    segments: Option<usize>,
    order: Option<usize>,
    integrator: IntegratorSpec,
    shapes_dir: Option<PathBuf>,
) -> Result<(), Failure> {
    let ds = load_dataset(dataset)?;
    check_writable(out)?;
    if let Some(dir) = &shapes_dir {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    let basis = basis_spec(kind, segments, order, ds.scenario.length_mm)?;
    let mut options = EstimatorOptions::for_length(ds.scenario.length_mm);
    options.integrator = integrator;
    let fits = fit_dataset(&ds, &basis, &options);

    let errors: Vec<Option<ErrorRecord>> = if ds.has_ground_truth() {
        let recs = error_records(&ds, &fits, &workspace_of(&ds));
        fits.iter()
            .map(|f| recs.iter().find(|r| r.config_id == f.config_id).copied())
            .collect()
    } else {
        vec![None; fits.len()]
    };
    let fitted: Vec<&ErrorRecord> = errors.iter().flatten().collect();
    let mean = |g: fn(&ErrorRecord) -> f64| {
        (ds.has_ground_truth() && !fitted.is_empty())
            .then(|| fitted.iter().map(|r| g(r)).sum::<f64>() / fitted.len() as f64)
    };
    let summary = EstimateSummary {
        basis: basis.to_string(),
        params: basis.param_count(),
        configs: fits.len(),
        converged: fits.iter().filter(|f| f.converged()).count(),
        failed: fits
            .iter()
            .filter(|f| matches!(f.outcome, FitOutcome::Failed { .. }))
            .count(),
        mean_e1_mm: mean(|r| r.e1),
        mean_e2_deg: mean(|r| r.e2),
    };
    let report = EstimateReport {
        basis: &basis,
        integrator,
        summary: &summary,
        results: fits
            .iter()
            .zip(&errors)
            .map(|(f, e)| EstimateRecord {
                fit: f,
                e1_mm: e.map(|e| e.e1),
                e2_deg: e.map(|e| e.e2),
            })
            .collect(),
    };
    write_json(out, &report)?;

    if let Some(dir) = &shapes_dir {
        let grid = uniform_grid(ds.scenario.length_mm, SHAPE_SAMPLES);
        for f in &fits {
            if let FitOutcome::Fitted { fit, .. } = &f.outcome {
                let field = StrainField::new(basis.clone(), fit.coeffs.clone())?;
                let shape = integrate_shape(&field, &ds.scenario.base_pose, &grid, &integrator)?;
                let path = dir.join(format!("shape_{:04}.csv", f.config_id));
                let file = fs::File::create(&path).map_err(|e| Failure::io(&path, e))?;
                write_shape_csv(std::io::BufWriter::new(file), &shape)?;
            }
        }
    }

    eprint!(
        "{}: {}/{} converged, {} failed",
        summary.basis, summary.converged, summary.configs, summary.failed
    );
    match (summary.mean_e1_mm, summary.mean_e2_deg) {
        (Some(e1), Some(e2)) => eprintln!(", mean E1 {e1:.4} mm, mean E2 {e2:.4} deg"),
        _ => eprintln!(),
    }
    if common.json {
        print_json(&summary)?;
    }
    if too_many_failures(summary.configs, summary.converged) {
        return Err(Failure::NotConverged(format!(
            "{} of {} configurations did not converge",
            summary.configs - summary.converged,
            summary.configs
        )));
    }
    Ok(())
}

fn too_many_failures(configs: usize, converged: usize) -> bool {
    2 * (configs - converged) > configs
}

#[derive(Serialize)]
struct BaseCalibOutput {
    mode: &'static str,
    base_pose: Pose,
    images: usize,
    final_cost: f64,
    converged: bool,
    iterations: usize,
    rank: usize,
    low_observability: bool,
    singular_values: Vec<f64>,
}

#[derive(Serialize)]
struct SensorCalibOutput {
    mode: &'static str,
    mag_to_cam: Pose,
    tip_offset: ConstrainedTipOffset,
    images: usize,
    final_cost: f64,
    converged: bool,
    iterations: usize,
    rank: usize,
    singular_values: Vec<f64>,
    restarts: usize,
    restart_max_disagreement: f64,
    restarts_consistent: bool,
}

const RESTART_AGREEMENT: f64 = 1e-6;

fn calibrate(
    common: &Common,
    dataset: &Path,
    out: &Path,
    mode: CalibMode,
    init: Option<PathBuf>,
    restarts: usize,
) -> Result<(), Failure> {
    let ds = load_dataset(dataset)?;
    if let Some(p) = &init {
        check_readable(p)?;
    }
    check_writable(out)?;
    let radius = ds.scenario.radius_mm;
    let options = calibration_options();
    match mode {
        CalibMode::Base => {
            let obs: Vec<Silhouette> = ds.configs.iter().map(|c| c.base_observation).collect();
            if obs.is_empty() {
                return Err(Failure::Schema("dataset has no configurations".into()));
            }
            let start = match &init {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Failure::io(p, e))?;
                    serde_json::from_str::<Pose>(&text)
                        .map_err(|e| Failure::Schema(format!("{}: {e}", p.display())))?
                }
                None => pose_from_silhouette(&obs[0], radius)?,
            };
            let problem = BaseCalibProblem {
                base_observations: obs,
                radius,
            };
            let c = estimate_base_pose(&problem, &start, &options)?;
            let output = BaseCalibOutput {
                mode: "base",
                base_pose: c.base_pose,
                images: problem.base_observations.len(),
                final_cost: c.summary.final_cost,
                converged: c.summary.converged,
                iterations: c.summary.iterations,
                rank: c.rank,
                low_observability: c.low_observability,
                singular_values: c.singular_values,
            };
            write_json(out, &output)?;
            eprintln!(
                "base pose: final cost {:.3e}, Jacobian rank {}/6{}",
                output.final_cost,
                output.rank,
                if output.low_observability {
                    " (low observability: roll and tangent tilt toward the camera are unconstrained)"
                } else {
                    ""
                }
            );
            if common.json {
                print_json(&output)?;
            }
        }
        CalibMode::Sensor => {
            let (obs, sensors): (Vec<_>, Vec<_>) = ds
                .configs
                .iter()
                .filter_map(|c| c.sensor_pose.map(|s| (c.tip_observation, s)))
                .unzip();
            if obs.is_empty() {
                return Err(Failure::Schema("dataset has no sensor poses".into()));
            }
            let problem = SensorCalibProblem {
                tip_observations: obs,
                sensor_poses: sensors,
                radius,
            };
            let start = closed_form_sensor_init(&problem)?;
            let c = estimate_sensor_transforms(&problem, &start, &options)?;
            let runs = sensor_restarts(
                &problem,
                &c.chain,
                restarts,
                &RestartSpread::default(),
                common.seed.unwrap_or(0),
                &options,
            )?;
            let spread = runs
                .iter()
                .map(|r| chain_disagreement(&r.chain, &c.chain))
                .fold(0.0, f64::max);
            let output = SensorCalibOutput {
                mode: "sensor",
                mag_to_cam: c.chain.mag_to_cam,
                tip_offset: c.chain.tip_offset,
                images: problem.tip_observations.len(),
                final_cost: c.summary.final_cost,
                converged: c.summary.converged,
                iterations: c.summary.iterations,
                rank: c.rank,
                singular_values: c.singular_values,
                restarts,
                restart_max_disagreement: spread,
                restarts_consistent: spread < RESTART_AGREEMENT,
            };
            write_json(out, &output)?;
            eprintln!(
                "sensor chain: final cost {:.3e}, rank {}/9 (theta_x unobservable), {} restarts agree within {:.2e}{}",
                output.final_cost,
                output.rank,
                restarts,
                spread,
                if output.restarts_consistent { "" } else { " (INCONSISTENT)" }
            );
            if common.json {
                print_json(&output)?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CompareSummaryRow {
    basis: String,
    params: usize,
    mean_e1_mm: f64,
    mean_e2_deg: f64,
    region_a_mean_e1_mm: f64,
    converged: usize,
}

fn region_label(r: Region) -> &'static str {
    match r {
        Region::A => "A",
        Region::B => "B",
    }
}

fn sibling(out: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    out.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn compare(
    common: &Common,
    dataset: &Path,
    out: &Path,
    bases: Option<&str>,
    integrator: IntegratorSpec,
) -> Result<(), Failure> {
    let ds = load_dataset(dataset)?;
    let json_out = sibling(out, "", "json");
    let errors_out = sibling(out, "_errors", "csv");
    for p in [out, json_out.as_path(), errors_out.as_path()] {
        check_writable(p)?;
    }
    let length = ds.scenario.length_mm;
    let bases = match bases {
        Some(list) => list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_basis_label(s, length))
            .collect::<Result<Vec<_>, _>>()?,
        None => BasisSpec::table_rows(length),
    };
    if bases.is_empty() {
        return Err(Failure::Schema("--bases lists no basis".into()));
    }
    let mut options = EstimatorOptions::for_length(length);
    options.integrator = integrator;
    let report = compare_bases(&ds, &bases, &options)?;

    write_text(out, &report.to_csv())?;
    write_json(&json_out, &report)?;
    let mut scatter = String::from("basis,config_id,e1_mm,e2_deg,region,converged\n");
    for row in &report.rows {
        for r in &row.records {
            scatter.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.label,
                r.config_id,
                r.e1,
                r.e2,
                region_label(r.region),
                r.converged
            ));
        }
    }
    write_text(&errors_out, &scatter)?;

    let summary: Vec<CompareSummaryRow> = report
        .rows
        .iter()
        .map(|r| CompareSummaryRow {
            basis: r.label.clone(),
            params: r.params,
            mean_e1_mm: r.e1.mean,
            mean_e2_deg: r.e2.mean,
            region_a_mean_e1_mm: r.region_a_e1.mean,
            converged: r.converged,
        })
        .collect();
    for s in &summary {
        eprintln!(
            "{:<12} params {:>2}  mean E1 {:>8.4} mm  mean E2 {:>8.4} deg  region A E1 {:>8.4} mm  converged {}",
            s.basis, s.params, s.mean_e1_mm, s.mean_e2_deg, s.region_a_mean_e1_mm, s.converged
        );
    }
    if common.json {
        print_json(&summary)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failure_threshold_is_strict_majority() {
        assert!(!too_many_failures(10, 5));
        assert!(too_many_failures(10, 4));
        assert!(!too_many_failures(0, 0));
        assert!(too_many_failures(1, 0));
    }

    #[test]
    fn basis_labels() {
        assert_eq!(
            parse_basis_label("constant", 100.0).unwrap().param_count(),
            2
        );
        assert_eq!(
            parse_basis_label("piecewise-3", 100.0)
                .unwrap()
                .param_count(),
            6
        );
        assert_eq!(
            parse_basis_label(" poly-2 ", 100.0).unwrap().param_count(),
            6
        );
        assert!(parse_basis_label("poly-x", 100.0).is_err());
        assert!(parse_basis_label("spline-2", 100.0).is_err());
    }

    #[test]
    fn sibling_paths() {
        let out = Path::new("dir/report.csv");
        assert_eq!(sibling(out, "", "json"), Path::new("dir/report.json"));
        assert_eq!(
            sibling(out, "_errors", "csv"),
            Path::new("dir/report_errors.csv")
        );
    }
}
