use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_synthfsod"))
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/voc-split1")
}

fn config() -> PathBuf {
    fixture().join("pipeline.toml")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_dir(stdout: &[u8]) -> PathBuf {
    let v: serde_json::Value = serde_json::from_slice(stdout).unwrap();
    PathBuf::from(v["run_dir"].as_str().unwrap())
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn prompts_print_to_stdout() {
    let out = ok(bin().args(["prompts", "--novel", "bird,bus", "--scheme", "a5"]).output().unwrap());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let prompts: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["prompt"].as_str().unwrap()).collect();
    assert_eq!(prompts.len(), 10);
    assert_eq!(&prompts[5..], ["a bus", "a photo of bus", "a photo of a bus", "a picture of bus", "a picture of a bus"]);
}

#[test]
fn overlapping_categories_exit_nonzero() {
    let out = bin()
        .args(["prompts", "--base", "bird,cat", "--novel", "bird"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--base", "bird", "--novel", "bird", "--assets"])
        .arg(fixture())
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("both base and novel"));
}

#[test]
fn stage_errors_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--novel", "unicorn", "--stages", "select", "--assets"])
        .arg(fixture())
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("select stage failed") && err.contains("unicorn.emb"), "{err}");
}

#[test]
fn eval_only_run_writes_only_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(bin()
        .args(["run", "--stages", "eval", "--config"])
        .arg(config())
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap());
    let dir = run_dir(&out.stdout);
    assert_eq!(files_under(&dir), vec![PathBuf::from("metrics.json")]);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["fp_ratio_before"], m["fp_ratio_after"]);
}

#[test]
fn subcommands_chain_to_the_same_artifacts_as_run() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let out = ok(bin()
        .args(["run", "--jobs", "2", "--config"])
        .arg(config())
        .arg("--out")
        .arg(t.join("runs"))
        .output()
        .unwrap());
    let run = run_dir(&out.stdout);

    ok(bin().args(["select", "--config"]).arg(config()).arg("--out").arg(t.join("selection.json")).output().unwrap());
    ok(bin()
        .args(["compose", "--jobs", "3", "--config"])
        .arg(config())
        .arg("--selection")
        .arg(t.join("selection.json"))
        .arg("--out")
        .arg(t.join("dataset"))
        .output()
        .unwrap());
    ok(bin()
        .args(["filter", "--config"])
        .arg(config())
        .arg("--out")
        .arg(t.join("filtered.json"))
        .arg("--removed")
        .arg(t.join("removed.json"))
        .output()
        .unwrap());
    ok(bin()
        .args(["eval", "--config"])
        .arg(config())
        .arg("--ground-truth")
        .arg(fixture().join("ground_truth.json"))
        .arg("--detections")
        .arg(fixture().join("detections.json"))
        .arg("--filtered")
        .arg(t.join("filtered.json"))
        .arg("--out")
        .arg(t.join("metrics.json"))
        .output()
        .unwrap());

    for rel in ["selection.json", "dataset/annotations.json", "filtered.json", "removed.json", "metrics.json"] {
        let a = std::fs::read(run.join(rel)).unwrap();
        let b = std::fs::read(t.join(rel)).unwrap();
        assert!(a == b, "{rel} differs");
    }
}

#[test]
fn flag_overrides_change_the_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        let out = ok(bin()
            .args(["run", "--stages", "prompts", "--config"])
            .arg(config())
            .arg("--out")
            .arg(tmp.path())
            .args(extra)
            .output()
            .unwrap());
        run_dir(&out.stdout)
    };
    let base = run(&[]);
    assert_eq!(base, run(&[]));
    assert_ne!(base, run(&["--clip-thresh", "0.2"]));
    assert_ne!(base, run(&["--scheme", "adj"]));
}

#[test]
fn asset_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(bin()
        .args(["run", "--stages", "filter", "--kind", "voc", "--base", "aeroplane,bicycle,boat"])
        .args(["--novel", "bird,bus,cow,motorbike,sofa"])
        .arg("--out")
        .arg(tmp.path())
        .env("SYNTHFSOD_ASSETS", fixture())
        .output()
        .unwrap());
    let dir = run_dir(&out.stdout);
    let kept: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("filtered.json")).unwrap()).unwrap();
    assert_eq!(kept.as_array().unwrap().len(), 50);
}

#[test]
fn bundled_fixture_is_the_generator_output() {
    let tmp = tempfile::tempdir().unwrap();
    ok(bin().args(["fixture", "--out"]).arg(tmp.path()).output().unwrap());
    let bundled = files_under(&fixture());
    assert_eq!(files_under(tmp.path()), bundled);
    for rel in &bundled {
        let a = std::fs::read(fixture().join(rel)).unwrap();
        let b = std::fs::read(tmp.path().join(rel)).unwrap();
        assert!(a == b, "{} differs", rel.display());
    }
}
