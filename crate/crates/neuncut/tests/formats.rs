use std::path::Path;
use std::process::Command;

use neuncut::io::{format_csv, format_labels, parse_csv, parse_labels};
use neuncut::SavedModel;
use neuncut_core::{DataMatrix, Matrix, MlpModel, Objective};
use proptest::prelude::*;

fn neuncut(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_neuncut")).current_dir(dir).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(
        v in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..40),
        labelled in any::<bool>(),
    ) {
        let d = 1 + v.len() % 3;
        let n = v.len() / d;
        prop_assume!(n > 0);
        let pts = Matrix::from_vec(n, d, v[..n * d].to_vec()).unwrap();
        let labels = labelled.then(|| (0..n).map(|i| i % 3).collect());
        let data = DataMatrix::new(pts, labels).unwrap();
        prop_assert_eq!(parse_csv(&format_csv(&data), Path::new("x.csv")).unwrap(), data);
    }

    #[test]
    fn labels_round_trip(labels in prop::collection::vec(0usize..1000, 0..50)) {
        prop_assert_eq!(parse_labels(&format_labels(&labels), Path::new("l.txt")).unwrap(), labels);
    }

    #[test]
    fn model_file_round_trip(seed in any::<u64>(), sigma in 0.1f64..10.0, knn in prop::option::of(1usize..50)) {
        let saved = SavedModel {
            model: MlpModel::with_hidden(3, &[5, 4], 3, seed).unwrap(),
            objective: Objective::Rcut,
            sigma,
            knn,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        saved.save(&path).unwrap();
        prop_assert_eq!(SavedModel::load(&path).unwrap(), saved);
    }
}

#[test]
fn eval_on_identical_files_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.txt"), "0\n1\n1\n2\n").unwrap();
    let (code, stdout, _) = neuncut(dir.path(), &["eval", "--pred", "a.txt", "--truth", "a.txt"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("\"acc\": 1.000000"), "{stdout}");
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = neuncut(dir.path(), &["infer", "--model", "nope.json", "--data", "d.csv", "--out", "l.txt"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("nope.json"), "{stderr}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = neuncut(dir.path(), &["train", "--bogus"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("--bogus"));
}

#[test]
fn config_file_supplies_flags_and_explicit_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("gen.conf"), "# shape\nshape=double-c\nn=8\n").unwrap();
    let (code, _, stderr) = neuncut(dir.path(), &["generate", "--config", "gen.conf", "--n", "6", "--out", "d.csv"]);
    assert_eq!(code, 0, "{stderr}");
    let text = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert_eq!(text.lines().count(), 7);
    std::fs::write(dir.path().join("bad.conf"), "colour=red\n").unwrap();
    let (code, _, stderr) = neuncut(dir.path(), &["generate", "--config", "bad.conf", "--out", "d.csv"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("bad.conf") && stderr.contains("colour"), "{stderr}");
}

#[test]
fn help_lists_every_subcommand() {
    let (code, stdout, _) = neuncut(Path::new("."), &["--help"]);
    assert_eq!(code, 0);
    for sub in ["generate", "affinity-stats", "train", "infer", "eval", "baseline-ncut", "gamma-search"] {
        assert!(stdout.contains(sub));
    }
}
