mod common;

use std::fs;

use common::{random_ensemble, random_member, rng, uniform_matrix};
use serde_json::Value;

use pedcc::centroids::{generate_centroids, CentroidSet};
use pedcc::classifier::{ensemble_predict_batch, predict_batch};
use pedcc::incremental::{
    load_model, manifest_path, member_file_name, persist, restore, save_model,
};
use pedcc::Error;

#[test]
fn ensemble_round_trip_predicts_identically() {
    let dir = tempfile::tempdir().unwrap();
    let ensemble = random_ensemble(&[3, 4, 2], 5, 1);
    persist(&ensemble, dir.path()).unwrap();
    let back = restore(dir.path()).unwrap();
    assert_eq!(back.members(), ensemble.members());
    let x = uniform_matrix(&mut rng(2), 200, 5);
    let a = ensemble_predict_batch(ensemble.members(), x.view()).unwrap();
    let b = ensemble_predict_batch(back.members(), x.view()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn persisting_twice_writes_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ensemble = random_ensemble(&[2, 2], 4, 7);
    persist(&ensemble, a.path()).unwrap();
    persist(&restore(a.path()).unwrap(), b.path()).unwrap();
    for name in ["manifest.json", "member_000.json", "member_001.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap()
        );
    }
}

#[test]
fn single_model_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let m = random_member(vec![4, 9, 2], 6, 5, 3);
    save_model(&m, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, m);
    let x = uniform_matrix(&mut rng(4), 50, 6);
    assert_eq!(
        predict_batch(&m, x.view()).unwrap(),
        predict_batch(&back, x.view()).unwrap()
    );
}

#[test]
fn centroid_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let c = generate_centroids(7, 3, 5, 500).unwrap();
    c.save(&path).unwrap();
    let back = CentroidSet::load(&path).unwrap();
    assert_eq!(back.to_bytes(), c.to_bytes());
    assert_eq!(back.seed(), 5);
}

fn edit_json(path: &std::path::Path, f: impl FnOnce(&mut Value)) {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    f(&mut v);
    fs::write(path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

fn saved(sizes: &[usize]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    persist(&random_ensemble(sizes, 4, 11), dir.path()).unwrap();
    dir
}

#[test]
fn manifest_version_bump_is_rejected() {
    let dir = saved(&[2, 3]);
    edit_json(&manifest_path(dir.path()), |v| {
        v["format_version"] = 2.into()
    });
    let err = restore(dir.path()).unwrap_err();
    assert!(
        matches!(
            err,
            Error::VersionMismatch {
                found: 2,
                supported: 1,
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn member_version_bump_is_rejected() {
    let dir = saved(&[2, 3]);
    edit_json(&dir.path().join(member_file_name(1)), |v| {
        v["format_version"] = 9.into()
    });
    assert!(matches!(
        restore(dir.path()),
        Err(Error::VersionMismatch { found: 9, .. })
    ));
}

#[test]
fn member_count_mismatch() {
    let dir = saved(&[2, 3]);
    edit_json(&manifest_path(dir.path()), |v| v["member_count"] = 3.into());
    assert!(matches!(
        restore(dir.path()),
        Err(Error::MemberCountMismatch {
            declared: 3,
            listed: 2
        })
    ));
}

#[test]
fn truncated_weights_are_corrupted_payload() {
    let dir = saved(&[2, 3]);
    let member = dir.path().join(member_file_name(0));
    edit_json(&member, |v| {
        let w = v["layers"][0]["weight"].as_str().unwrap().to_string();
        v["layers"][0]["weight"] = Value::String(w[..w.len() - 8].to_string());
    });
    match restore(dir.path()).unwrap_err() {
        Error::CorruptedPayload { path, .. } => assert_eq!(path, member),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn invalid_base64_is_corrupted_payload() {
    let dir = saved(&[2]);
    edit_json(&dir.path().join(member_file_name(0)), |v| {
        v["head"]["rows"] = Value::String("@@not base64@@".to_string())
    });
    assert!(matches!(
        restore(dir.path()),
        Err(Error::CorruptedPayload { .. })
    ));
}

#[test]
fn garbage_json_is_format_error() {
    let dir = saved(&[2]);
    fs::write(dir.path().join(member_file_name(0)), "{ not json").unwrap();
    assert!(matches!(restore(dir.path()), Err(Error::Format { .. })));
}

#[test]
fn missing_member_file() {
    let dir = saved(&[2, 2]);
    fs::remove_file(dir.path().join(member_file_name(1))).unwrap();
    assert!(matches!(
        restore(dir.path()),
        Err(Error::MissingFile { .. })
    ));
}

#[test]
fn manifest_labels_must_match_member() {
    let dir = saved(&[2, 2]);
    edit_json(&manifest_path(dir.path()), |v| {
        v["members"][1]["labels"] = serde_json::json!([7, 8])
    });
    assert!(matches!(restore(dir.path()), Err(Error::Format { .. })));
}

#[test]
fn restore_rejects_overlapping_members() {
    let dir = saved(&[2, 2]);
    // relabel member 1 onto member 0's classes in both places
    edit_json(&manifest_path(dir.path()), |v| {
        v["members"][1]["labels"] = serde_json::json!([0, 5])
    });
    edit_json(&dir.path().join(member_file_name(1)), |v| {
        v["label_map"] = serde_json::json!([0, 5])
    });
    assert!(matches!(
        restore(dir.path()),
        Err(Error::NotDisjoint { label: 0, .. })
    ));
}
