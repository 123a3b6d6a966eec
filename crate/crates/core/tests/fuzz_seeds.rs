//! Replays the fuzz corpus through the parsers.

use std::fs;
use std::path::PathBuf;

use strainshape::camera::OmniCameraModel;
use strainshape::experiments::{Dataset, SyntheticScenario};
use strainshape::liegroup::Pose;
use strainshape::strainbasis::BasisSpec;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn verdicts<T, E>(target: &str, parse: impl Fn(&str) -> Result<T, E>) -> Vec<(String, bool)> {
    seeds(target)
        .into_iter()
        .map(|(n, t)| (n, parse(&t).is_ok()))
        .collect()
}

fn ok(names: &[(&str, bool)]) -> Vec<(String, bool)> {
    names.iter().map(|(n, b)| (n.to_string(), *b)).collect()
}

#[test]
fn dataset_seeds() {
    assert_eq!(
        verdicts("parse_dataset", Dataset::from_json),
        ok(&[
            ("one_config.json", true),
            ("real_data.json", true),
            ("wrong_version.json", false)
        ])
    );
}

#[test]
fn calibration_seeds() {
    assert_eq!(
        verdicts("parse_calibration", OmniCameraModel::from_json),
        ok(&[
            ("fisheye.json", true),
            ("nonzero_a1.json", false),
            ("synthesized.json", true)
        ])
    );
}

#[test]
fn scenario_seeds() {
    let parse = |t: &str| -> Result<(), String> {
        serde_json::from_str::<SyntheticScenario>(t)
            .map_err(|e| e.to_string())?
            .validate()
            .map_err(|e| e.to_string())
    };
    assert_eq!(
        verdicts("parse_scenario", parse),
        ok(&[
            ("empty.json", true),
            ("negative_length.json", false),
            ("small_grid.json", true)
        ])
    );
}

#[test]
fn basis_seeds() {
    assert_eq!(
        verdicts("parse_basis", |t| serde_json::from_str::<BasisSpec>(t)),
        ok(&[
            ("constant_all.json", true),
            ("piecewise.json", true),
            ("poly3.json", true),
            ("zero_segments.json", false)
        ])
    );
}

#[test]
fn pose_seeds() {
    assert_eq!(
        verdicts("parse_pose", |t| serde_json::from_str::<Pose>(t)),
        ok(&[("base.json", true), ("not_rotation.json", false)])
    );
}
