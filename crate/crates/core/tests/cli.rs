use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn flowmorph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowmorph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_pipeline(root: &Path, tag: &str) -> std::path::PathBuf {
    let data = root.join(format!("data-{tag}"));
    let model = root.join(format!("model-{tag}"));
    let pred = root.join(format!("pred-{tag}"));
    let o = flowmorph(&["synth", "--out", p(&data), "--episodes", "2", "--n-points", "64", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = flowmorph(&[
        "train", "--data", p(&data), "--out", p(&model), "--steps", "30", "--latent-dim", "4",
        "--hidden-dims", "8,8", "--n-points", "32", "--seed", "7",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let frame = |k: usize| data.join(format!("f000-rigid_rotation-e000_frame{k}.xyz"));
    let o = flowmorph(&[
        "predict", "--checkpoint", p(&model.join("checkpoint.json")), "--previous", p(&frame(0)),
        "--current", p(&frame(1)), "--out", p(&pred), "--max-iters", "20", "--seed", "7",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    root.to_path_buf()
}

#[test]
fn gradcheck_passes_on_fresh_net() {
    let o = flowmorph(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn gradcheck_writes_report() {
    let dir = TempDir::new().unwrap();
    let o = flowmorph(&["gradcheck", "--seed", "3", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("gradcheck.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert!(dir.path().join("config.json").exists());
}

#[test]
fn unknown_flag_is_a_validation_error() {
    let o = flowmorph(&["train", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_input_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let o = flowmorph(&[
        "eval", "--prediction", p(&dir.path().join("nope.xyz")), "--ground-truth",
        p(&dir.path().join("nope2.xyz")), "--out", p(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("out").exists(), "no output before validation");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"train": {"stepz": 3}}"#).unwrap();
    let o = flowmorph(&["gradcheck", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flags_override_config_file_and_merge_is_echoed() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"synth": {"episodes_per_family": 1, "n_points": 40, "families": ["bending_sheet"]}}"#,
    )
    .unwrap();
    let out = dir.path().join("data");
    let o = flowmorph(&["synth", "--config", p(&cfg), "--n-points", "48", "--seed", "2", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let echo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["synth"]["n_points"], 48);
    assert_eq!(echo["synth"]["episodes_per_family"], 1);
    assert_eq!(echo["synth"]["seed"], 2);
    assert_eq!(echo["synth"]["families"][0], "bending_sheet");
    let ds = flowmorph::io_formats::read_dataset(&out).unwrap();
    assert_eq!(ds.len(), 1);
    assert_eq!(ds[0].frames[0].len(), 48);
}

#[test]
fn predict_rejects_latent_dim_mismatch() {
    let dir = TempDir::new().unwrap();
    small_pipeline(dir.path(), "a");
    let data = dir.path().join("data-a");
    let frame = |k: usize| data.join(format!("f000-rigid_rotation-e000_frame{k}.xyz"));
    let o = flowmorph(&[
        "predict", "--checkpoint", p(&dir.path().join("model-a/checkpoint.json")), "--previous",
        p(&frame(0)), "--current", p(&frame(1)), "--latent-dim", "256", "--out",
        p(&dir.path().join("bad")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("256") && msg.contains('4'), "{msg}");
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    small_pipeline(dir.path(), "a");
    small_pipeline(dir.path(), "b");
    let files = [
        "model-{}/checkpoint.json",
        "model-{}/loss.csv",
        "pred-{}/predicted.xyz",
        "pred-{}/correspondence.csv",
        "pred-{}/loss.csv",
        "pred-{}/prediction.json",
    ];
    for f in files {
        let a = fs::read(dir.path().join(f.replace("{}", "a"))).unwrap();
        let b = fs::read(dir.path().join(f.replace("{}", "b"))).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let ds_a = fs::read(dir.path().join("data-a/f001-rigid_rotation-e000_frame2.xyz")).unwrap();
    let ds_b = fs::read(dir.path().join("data-b/f001-rigid_rotation-e000_frame2.xyz")).unwrap();
    assert_eq!(ds_a, ds_b);
}

#[test]
fn train_reports_progress_and_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    assert_eq!(flowmorph(&["synth", "--out", p(&data), "--episodes", "1", "--n-points", "16"]).status.code(), Some(0));
    let out = dir.path().join("model");
    let o = flowmorph(&[
        "train", "--data", p(&data), "--out", p(&out), "--steps", "201", "--latent-dim", "2",
        "--hidden-dims", "4", "--n-points", "8",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let steps: Vec<&str> = stdout.lines().filter_map(|l| l.split(',').next()).collect();
    assert_eq!(steps, ["0", "100", "200"]);
    let loss = fs::read_to_string(out.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 202);
    let (net, latents, meta) = flowmorph::io_formats::load_checkpoint(&out.join("checkpoint.json")).unwrap();
    assert_eq!(net.latent_dim(), 2);
    assert_eq!(latents.len(), 2);
    assert_eq!(meta.steps, 201);
}

#[test]
fn eval_scores_identical_clouds_perfectly() {
    let dir = TempDir::new().unwrap();
    let cloud = dir.path().join("c.xyz");
    fs::write(&cloud, "0 0 0\n1 0 0\n0 1 0\n").unwrap();
    let out = dir.path().join("eval");
    let o = flowmorph(&["eval", "--prediction", p(&cloud), "--ground-truth", p(&cloud), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["chamfer"], 0.0);
    assert_eq!(m["correspondence_l2"], 0.0);
    assert_eq!(m["cma_at_0_1"], 1.0);
    let csv = fs::read_to_string(out.join("cma.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("delta,accuracy"));
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn eval_rejects_misaligned_clouds() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.xyz");
    let b = dir.path().join("b.xyz");
    fs::write(&a, "0 0 0\n1 0 0\n").unwrap();
    fs::write(&b, "0 0 0\n").unwrap();
    let o = flowmorph(&["eval", "--prediction", p(&a), "--ground-truth", p(&b), "--out", p(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn corrupt_leaves_inputs_untouched() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("c.xyz");
    let text: String = (0..200).map(|i| format!("{} {} {}\n", i as f64 * 0.01, (i % 7) as f64 * 0.1, 0.5)).collect();
    fs::write(&input, &text).unwrap();
    let out = dir.path().join("corrupted");
    let o = flowmorph(&[
        "corrupt", "--input", p(&input), "--noise-sigma", "0.02", "--holes", "2", "--hole-radius", "0.1",
        "--partial-fraction", "0.25", "--seed", "4", "--out", p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&input).unwrap(), text);
    let c = flowmorph::io_formats::load_cloud_auto(&out.join("c.xyz")).unwrap();
    assert!(c.len() <= 150 && !c.is_empty());
}

#[test]
fn corrupt_refuses_to_overwrite_its_input() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("c.xyz");
    fs::write(&input, "0 0 0\n1 1 1\n").unwrap();
    let o = flowmorph(&["corrupt", "--input", p(&input), "--noise-sigma", "0.1", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read_to_string(&input).unwrap(), "0 0 0\n1 1 1\n");
}

#[test]
fn corrupt_rejects_bad_fraction() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("c.xyz");
    fs::write(&input, "0 0 0\n").unwrap();
    let o = flowmorph(&["corrupt", "--input", p(&input), "--partial-fraction", "1.5", "--out", p(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
}
