use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use detml_core::scaffold::builtin_templates;
use detml_core::Version;
use serde_json::Value;

fn detml(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detml")).args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// Exit code and, when the command did not fail, the parsed JSON stdout.
fn json_run(args: &[&str], cwd: &Path) -> (i32, Option<Value>) {
    let o = detml(args, cwd);
    let c = code(&o);
    if c == 2 {
        assert!(o.stdout.is_empty(), "{args:?} failed but wrote to stdout: {}", stdout(&o));
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error"), "{args:?}");
        return (c, None);
    }
    let v: Value = serde_json::from_slice(&o.stdout)
        .unwrap_or_else(|e| panic!("{args:?}: stdout is not JSON ({e}):\n{}", stdout(&o)));
    (c, Some(v))
}

fn create(dir: &Path, template: &str, name: &str) -> PathBuf {
    let dest = dir.join(name);
    let o = detml(&["create", "--template", template, "--no-input", dest.to_str().unwrap()], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dest
}

#[test]
fn no_arguments_and_bad_usage_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&detml(&[], dir.path())), 2);
    assert_eq!(code(&detml(&["frobnicate"], dir.path())), 2);
    assert_eq!(code(&detml(&["lint", "--format", "xml"], dir.path())), 2);
}

#[test]
fn version_names_tool_and_catalog() {
    let o = detml(&["--version"], Path::new("."));
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "detml 0.1.0 (rule catalog 1.0.0)");
}

#[test]
fn lint_exit_codes_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let clean = create(dir.path(), "tensorflow", "clean");
    let (c, v) = json_run(&["lint", "--format", "json", "--require-stamp", clean.to_str().unwrap()], dir.path());
    assert_eq!(c, 0);
    assert_eq!(v.unwrap()["counts"]["errors"], 0);

    let forbidden = fixtures().join("forbidden");
    let (c, v) = json_run(&["lint", "--format", "json", forbidden.to_str().unwrap()], dir.path());
    assert_eq!(c, 1);
    assert!(v.unwrap()["counts"]["errors"].as_u64().unwrap() >= 3);

    let (c, _) = json_run(&["lint", "--format", "json", "/nonexistent/path"], dir.path());
    assert_eq!(c, 2);

    let bad_rules = dir.path().join("bad.toml");
    fs::write(&bad_rules, "catalog_format = 1\n[[rule]]\nid = \"new\"\n").unwrap();
    let (c, _) = json_run(&["--rules", bad_rules.to_str().unwrap(), "lint", "--format", "json", "clean"], dir.path());
    assert_eq!(c, 2);
}

#[test]
fn lint_json_for_every_fixture() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["listings", "forbidden"] {
        for entry in fs::read_dir(fixtures().join(sub)).unwrap() {
            let p = entry.unwrap().path();
            let (c, v) = json_run(&["lint", "--format", "json", p.to_str().unwrap()], dir.path());
            assert!(c == 0 || c == 1, "{}", p.display());
            assert!(v.unwrap()["files"].is_array());
        }
    }
}

#[test]
fn strict_turns_warnings_into_failure() {
    let dir = tempfile::tempdir().unwrap();
    let proj = create(dir.path(), "xgboost", "x");
    assert_eq!(code(&detml(&["lint", proj.to_str().unwrap()], dir.path())), 0);
    assert_eq!(code(&detml(&["lint", "--strict", proj.to_str().unwrap()], dir.path())), 1);
}

#[test]
fn dump_facts_is_json() {
    let p = fixtures().join("listings/pytorch.py");
    let (c, v) = json_run(&["lint", "--dump-facts", p.to_str().unwrap()], Path::new("."));
    assert_eq!(c, 0);
    assert!(v.is_some());
}

#[test]
fn create_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    create(dir.path(), "pytorch", "p");
    // destination not empty
    assert_eq!(code(&detml(&["create", "--template", "pytorch", "--no-input", "p"], dir.path())), 2);
    // answer rejected by the variable pattern
    let o = detml(&["create", "--template", "pytorch", "--no-input", "--var", "seed=abc", "q"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("q").exists());
    assert_eq!(code(&detml(&["create", "--template", "nope", "--no-input", "r"], dir.path())), 2);
    let o = detml(&["create", "--template", "pytorch", "--no-input", "--var", "project_name=mnist", "s"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(dir.path().join("s/.detml/project.cfg")).unwrap().contains("mnist"));
}

fn next_version_dir(dir: &Path) -> PathBuf {
    let mut next = builtin_templates().into_iter().find(|t| t.name == "pytorch").unwrap();
    next.version = Version::new(1, 1, 0);
    let s = next.files.get_mut("seeding.py").unwrap();
    *s = s.replace("torch.use_deterministic_algorithms(True)", "torch.use_deterministic_algorithms(True, warn_only=False)");
    let root = dir.join("templates");
    next.save_dir(&root.join("pytorch-1.1.0")).unwrap();
    root
}

#[test]
fn sync_exit_codes_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let tdir = next_version_dir(dir.path());
    let t = tdir.to_str().unwrap();
    let proj = create(dir.path(), "pytorch", "p");
    let p = proj.to_str().unwrap();

    let (c, v) = json_run(&["sync", "--format", "json", p], dir.path());
    assert_eq!((c, v.unwrap()["up_to_date"].clone()), (0, Value::Bool(true)));

    let (c, v) = json_run(&["sync", "--check-only", "--format", "json", "--template-dir", t, p], dir.path());
    assert_eq!(c, 0);
    assert_eq!(v.unwrap()["modified"][0]["path"], "seeding.py");

    let seeding = proj.join("seeding.py");
    let edited = fs::read_to_string(&seeding).unwrap().replace("(True)", "(mode=True)");
    fs::write(&seeding, edited).unwrap();
    let (c, v) = json_run(&["sync", "--format", "json", "--template-dir", t, p], dir.path());
    assert_eq!(c, 1);
    assert_eq!(v.unwrap()["conflicted"], serde_json::json!(["seeding.py"]));

    let (c, _) = json_run(&["sync", "--format", "json", dir.path().to_str().unwrap()], dir.path());
    assert_eq!(c, 2, "no stamp");
}

#[test]
fn templates_list() {
    let dir = tempfile::tempdir().unwrap();
    let (c, v) = json_run(&["templates", "list", "--format", "json"], dir.path());
    assert_eq!(c, 0);
    let names: Vec<String> =
        v.unwrap().as_array().unwrap().iter().map(|t| t["name"].as_str().unwrap().to_string()).collect();
    assert_eq!(names, ["pytorch", "tensorflow", "xgboost"]);
    let (c, _) = json_run(&["templates", "list", "--format", "json", "--template-dir", "/nonexistent"], dir.path());
    assert_eq!(c, 2);
}

#[test]
fn report_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let probe = fixtures().join("probes/v100.json");
    let (c, v) = json_run(&["report", "--probe-fixture", probe.to_str().unwrap()], dir.path());
    assert_eq!(c, 0);
    assert_eq!(v.unwrap()["cpu"]["physical_cores"], 24);
    let out = dir.path().join("hw.html");
    let o = detml(&["report", "--format", "html", "--probe-fixture", probe.to_str().unwrap(), "--out", "hw.html"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    assert!(fs::read_to_string(out).unwrap().contains("V100"));
    let (c, _) = json_run(&["report", "--probe-fixture", "/nonexistent.json"], dir.path());
    assert_eq!(c, 2);
}

#[test]
fn manifest_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("params.txt"), "lr = 0.01\nlayers = 4\n").unwrap();
    fs::write(d.join("metrics.txt"), "accuracy = 0.98\n").unwrap();
    fs::write(d.join("environment.yml"), "name: x\n").unwrap();
    fs::write(d.join("bad.txt"), "layers = [1, 2]\n").unwrap();
    let probe = fixtures().join("probes/v100.json");
    let probe = probe.to_str().unwrap();
    let base = ["manifest", "--metrics", "metrics.txt", "--env", "environment.yml", "--probe-fixture", probe];

    let mut args = base.to_vec();
    args.extend(["--params", "params.txt", "--revision", "abc123"]);
    let (c, v) = json_run(&args, d);
    assert_eq!(c, 0);
    let v = v.unwrap();
    assert_eq!(v["source_revision"], "abc123");
    assert_eq!(v["hyperparameters"]["layers"], 4);
    assert!(v["environment_digest"].as_str().unwrap().starts_with("sha256:"));

    let mut args = base.to_vec();
    args.extend(["--params", "bad.txt"]);
    let o = detml(&args, d);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("layers"));
}

const GOLDEN_IDS: [&str; 17] = [
    "dask-multi-gpu-warning",
    "general-numpy-seed",
    "general-pythonhashseed",
    "general-random-seed",
    "pytorch-cudnn-benchmark",
    "pytorch-cudnn-deterministic",
    "pytorch-forbidden-convtranspose3d",
    "pytorch-forbidden-maxpool3d",
    "pytorch-manual-seed",
    "pytorch-set-deterministic",
    "tensorflow-deterministic-ops",
    "tensorflow-inter-op-threads",
    "tensorflow-intra-op-threads",
    "tensorflow-random-seed",
    "xgboost-forbidden-allreduce",
    "xgboost-param-seed",
    "xgboost-single-precision",
];

#[test]
fn rules_list_golden() {
    let o = detml(&["rules", "list"], Path::new("."));
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let ids: Vec<&str> = text.lines().map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(ids, GOLDEN_IDS);
    let line = text.lines().find(|l| l.starts_with("pytorch-cudnn-benchmark")).unwrap();
    assert!(line.starts_with("pytorch-cudnn-benchmark error pytorch "), "{line}");
    assert!(line.ends_with("[torch.backends.cudnn.benchmark = False]"), "{line}");

    let (c, v) = json_run(&["rules", "list", "--format", "json"], Path::new("."));
    assert_eq!(c, 0);
    assert_eq!(v.unwrap()["rules"].as_array().unwrap().len(), 17);
}

#[test]
fn rules_overlay_shows_in_listing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("strict.toml"), "catalog_format = 1\n[[rule]]\nid = \"pytorch-set-deterministic\"\nseverity = \"error\"\n")
        .unwrap();
    fs::write(d.join("empty.toml"), "").unwrap();
    let builtin = stdout(&detml(&["rules", "list"], d));
    let o = detml(&["--rules", "strict.toml", "rules", "list"], d);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().any(|l| l.starts_with("pytorch-set-deterministic error ")));
    let o = detml(&["--rules", "empty.toml", "rules", "list"], d);
    assert_eq!(stdout(&o), builtin);

    // the overlay also changes lint outcomes
    fs::write(d.join("train.py"), fs::read_to_string(fixtures().join("listings/pytorch.py")).unwrap()).unwrap();
    let (c, v) = json_run(&["--rules", "strict.toml", "lint", "--format", "json", "train.py"], d);
    assert_eq!(c, 1);
    assert!(v.unwrap()["catalog_version"].as_str().unwrap().starts_with("1.0.0+rules."));
}
