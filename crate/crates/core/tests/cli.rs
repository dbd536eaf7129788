//! Exit codes and stage handling of the `vsum` binary.

use std::path::Path;
use std::process::{Command, Output};

fn vsum(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vsum"))
        .args(args)
        .current_dir(dir)
        .env_remove("VSUM_LLM_ENDPOINT")
        .env_remove("VSUM_CAPTION_ENDPOINT")
        .env_remove("VSUM_CACHE_DIR")
        .output()
        .unwrap()
}

fn synth(dir: &Path) {
    let out = vsum(&["synth", "--videos", "1", "--seed", "5", "--out", "data"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_manifest_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(vsum(&["segment"], dir.path()).status.code(), Some(2));
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"budgett": 0.1}"#).unwrap();
    synth(dir.path());
    let out = vsum(
        &["segment", "--config", "c.json", "--manifest", "data/manifest.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn http_backend_without_endpoint_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"caption_backend": {"kind": "http"}}"#).unwrap();
    synth(dir.path());
    let out = vsum(
        &["caption", "--config", "c.json", "--manifest", "data/manifest.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    // --mock overrides the configured backends.
    let out = vsum(
        &[
            "caption",
            "--mock",
            "--config",
            "c.json",
            "--manifest",
            "data/manifest.json",
        ],
        dir.path(),
    );
    assert!(out.status.success());
}

#[test]
fn missing_embeddings_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    std::fs::remove_file(dir.path().join("data/embeddings/synth00.vsem")).unwrap();
    let out = vsum(&["refine", "--mock", "--manifest", "data/manifest.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("synth00.vsem"));
}

#[test]
fn plot_data_needs_finished_stages() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = vsum(
        &["segment", "--manifest", "data/manifest.json", "--out", "run"],
        dir.path(),
    );
    assert!(out.status.success());
    let record = dir.path().join("run/videos/synth00/record.json");
    let rec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&record).unwrap()).unwrap();
    assert!(rec["segmentation"].is_object());
    assert!(rec["refined"].is_null());

    let out = vsum(&["plot-data", "--out", "run"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("refine"));
}

#[test]
fn stages_stop_where_asked_and_plots_regenerate() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = vsum(
        &["select", "--mock", "--manifest", "data/manifest.json", "--out", "run"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/videos/synth00/record.json")).unwrap())
            .unwrap();
    assert!(rec["summary"].is_object());
    assert!(rec["eval"].is_null());
    assert!(!dir.path().join("run/videos/synth00/plot").exists());

    let out = vsum(&["plot-data", "--out", "run"], dir.path());
    assert!(out.status.success());
    for name in vsum_core::io::plot::PLOT_FILES {
        assert!(
            dir.path().join("run/videos/synth00/plot").join(name).is_file(),
            "{name}"
        );
    }
}

#[test]
fn eval_on_single_video_reports_f1() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = vsum(
        &[
            "eval",
            "--mock",
            "--budget",
            "0.3",
            "--manifest",
            "data/manifest.json",
            "--video",
            "synth00",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/videos/synth00/record.json")).unwrap())
            .unwrap();
    let f1 = rec["eval"]["f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));
    assert_eq!(rec["config"]["budget"], 0.3);
}

#[test]
fn qfvs_selects_oracle_length_shots() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let path = dir.path().join("data/manifest.json");
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    m["dataset"] = "qfvs".into();
    m["videos"][0]["annotations"] = serde_json::json!([
        {"user": "query0", "shots": [0, 2, 3]},
        {"user": "query1", "shots": [1, 4, 5, 6, 7]}
    ]);
    std::fs::write(&path, m.to_string()).unwrap();

    let out = vsum(
        &["eval", "--mock", "--manifest", "data/manifest.json", "--out", "run"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/videos/synth00/record.json")).unwrap())
            .unwrap();
    assert_eq!(rec["summary"]["unit"], "shot");
    // Mean oracle length is 4 shots of 5 s at 30 fps.
    assert_eq!(rec["summary"]["selected_units"].as_array().unwrap().len(), 4);
    assert!(rec["summary"]["selected_frames"]
        .as_array()
        .unwrap()
        .iter()
        .all(|iv| iv[1].as_u64().unwrap() - iv[0].as_u64().unwrap() <= 150));
    assert_eq!(rec["eval"]["aggregation"], "mean");
    assert_eq!(rec["eval"]["per_user"].as_array().unwrap().len(), 2);
    let pseudo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/pseudolabel.json")).unwrap()).unwrap();
    assert_eq!(pseudo["videos"][0]["video_id"], "synth00");
}
