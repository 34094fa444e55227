use std::fs;
use std::path::Path;

use pedcc::data::{load_csv, load_idx, synth_blobs};
use pedcc::Error;

fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for v in [0x0803u32, count, rows, cols] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for v in [0x0801u32, labels.len() as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(labels);
    out
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, bytes).unwrap();
    p
}

#[test]
fn idx_two_by_two_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let img = write(
        dir.path(),
        "img",
        &idx_images(2, 2, 2, &[0, 51, 102, 255, 255, 0, 204, 153]),
    );
    let lab = write(dir.path(), "lab", &idx_labels(&[3, 7]));
    let d = load_idx(&img, &lab).unwrap();
    assert_eq!(d.len(), 2);
    assert_eq!(d.dim(), 4);
    assert_eq!(d.labels(), &[3, 7]);
    let want = [[0.0, 0.2, 0.4, 1.0], [1.0, 0.0, 0.8, 0.6]];
    for (i, row) in want.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            assert!((d.features()[[i, j]] - w).abs() < 1e-15);
        }
    }
}

#[test]
fn idx_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good_img = write(dir.path(), "img", &idx_images(2, 1, 1, &[1, 2]));
    let good_lab = write(dir.path(), "lab", &idx_labels(&[0, 1]));

    let mut bad = idx_images(2, 1, 1, &[1, 2]);
    bad[3] = 0x01;
    let bad_magic = write(dir.path(), "bad", &bad);
    match load_idx(&bad_magic, &good_lab).unwrap_err() {
        Error::Format { reason, .. } => assert!(reason.contains("magic")),
        other => panic!("unexpected {other}"),
    }

    let three = write(dir.path(), "three", &idx_labels(&[0, 1, 2]));
    assert!(matches!(
        load_idx(&good_img, &three),
        Err(Error::CountMismatch {
            images: 2,
            labels: 3
        })
    ));

    let short = write(dir.path(), "short", &idx_images(3, 1, 1, &[1, 2]));
    assert!(matches!(
        load_idx(&short, &good_lab),
        Err(Error::Truncated { .. })
    ));

    let header_only = write(dir.path(), "hdr", &[0, 0, 8]);
    assert!(matches!(
        load_idx(&header_only, &good_lab),
        Err(Error::Truncated { .. })
    ));

    assert!(matches!(
        load_idx(&dir.path().join("nope"), &good_lab),
        Err(Error::MissingFile { .. })
    ));
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let d = synth_blobs(3, 5, 7, 2.5, 4).unwrap();
    d.save_csv(&path).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(back.labels(), d.labels());
    assert_eq!(back.features(), d.features());
}

#[test]
fn csv_parses_hand_written_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "d.csv", b"label,f0,f1\n2, 0.5,-1\n0,3e-2,4\n");
    let d = load_csv(&path).unwrap();
    assert_eq!(d.labels(), &[2, 0]);
    assert_eq!(d.class_set(), &[0, 2]);
    assert_eq!(d.features()[[0, 1]], -1.0);
    assert_eq!(d.features()[[1, 0]], 0.03);
}

#[test]
fn csv_errors() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("header", "class,f0\n1,2\n"),
        ("columns", "label,f1\n1,2\n"),
        ("width", "label,f0,f1\n1,2\n"),
        ("value", "label,f0\n1,abc\n"),
        ("label", "label,f0\n-1,0\n"),
    ] {
        let p = write(dir.path(), name, body.as_bytes());
        assert!(matches!(load_csv(&p), Err(Error::Format { .. })), "{name}");
    }
    let p = write(dir.path(), "nan", b"label,f0\n1,NaN\n");
    assert!(load_csv(&p).is_err());
}
