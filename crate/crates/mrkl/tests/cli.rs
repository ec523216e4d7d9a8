use std::path::Path;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn mrkl_in(dir: &Path, args: &[&str], stdin: Option<&str>) -> Output {
    use std::io::Write;
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mrkl"));
    cmd.args(args)
        .current_dir(dir)
        .env_remove("MRKL_CONFIG")
        .env_remove("MRKL_CLOCK")
        .env_remove("MRKL_SEED")
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped());
    let mut child = cmd.spawn().unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn mrkl(args: &[&str]) -> Output {
    mrkl_in(Path::new(env!("CARGO_MANIFEST_DIR")), args, None)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exit_codes() {
    assert_eq!(mrkl(&["--help"]).status.code(), Some(0));
    assert_eq!(mrkl(&["--version"]).status.code(), Some(0));
    assert_eq!(mrkl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mrkl(&["generate", "--experiment", "6"]).status.code(), Some(1));
    assert_eq!(mrkl(&["route", "--threshold", "1.5", "hi"]).status.code(), Some(1));
    assert_eq!(mrkl(&["route", "--backend", "nonsense", "hi"]).status.code(), Some(1));
    assert_eq!(mrkl(&["route", "--records", "/nonexistent/dir/file.jsonl", "hi"]).status.code(), Some(0));
}

#[test]
fn generate_writes_a_loadable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = mrkl_in(dir.path(), &["generate", "--experiment", "3", "--seed", "4"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("train=400 dev=1000 test=1000\n"), "{}", stdout(&out));
    let ds = mrkl::files::load_dataset(&dir.path().join("exp3-seed4.jsonl")).unwrap();
    assert_eq!(ds.examples.len(), 2400);
    assert_eq!(ds.spec.seed, 4);
}

#[test]
fn route_one_shot_and_repl() {
    let out = mrkl(&["route", "--trace", "What is the product of 12 and 3?"]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0));
    assert!(text.starts_with("36\nexpert: calculator\n"), "{text}");
    assert!(text.contains("scores: calculator=1 date=0 currency=0 database=0 fallback=0"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let out =
        mrkl_in(dir.path(), &["route", "--json", "--clock", "2020-02-29"], Some("what is the date today\n\nhello\n"));
    let lines: Vec<serde_json::Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["chosen"], "date");
    assert_eq!(lines[0]["response"]["payload"]["value"], "2020-02-29");
    assert_eq!(lines[1]["chosen"], "fallback");
    assert_eq!(lines[1]["used_fallback"], true);
}

#[test]
fn route_with_resources() {
    let rates = data("rates.example.jsonl");
    let records = data("records.example.jsonl");
    let out = mrkl(&["route", "--rates", &rates, "convert two USD to MAD"]);
    assert!(stdout(&out).starts_with("20 MAD\nexpert: currency\n"), "{}", stdout(&out));
    let out = mrkl(&["route", "--records", &records, "look up Globex"]);
    assert!(stdout(&out).contains("name=Globex"), "{}", stdout(&out));
}

#[test]
fn experts_json_lists_everything() {
    let out = mrkl(&["experts", "--json", "--rates", &data("rates.example.jsonl"), "--records", "/nope.jsonl"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["calculator", "date", "currency", "database", "fallback"]);
    assert_eq!(v[2]["status"], "ok");
    assert_eq!(v[3]["status"], "missing");
    assert_eq!(v[4]["kind"], "neural-proxy");
}

#[test]
fn eval_writes_reports_and_compare_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = mrkl_in(dir.path(), &["eval", "-e", "2", "--runs", "1", "--out-dir", "r"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("| Train \\ Test | Digits | Words |"), "{}", stdout(&out));
    let out =
        mrkl_in(dir.path(), &["eval", "-e", "2", "--runs", "1", "--out-dir", "r", "--backend", "digits-only"], None);
    assert_eq!(out.status.code(), Some(0));
    for ext in ["md", "csv", "json"] {
        assert!(dir.path().join(format!("r/exp2-reference.{ext}")).exists());
    }

    let out = mrkl_in(dir.path(), &["compare", "--json", "r/exp2-reference.csv", "r/exp2-digits-only.json"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for cell in v["cells"].as_array().unwrap() {
        let want = if cell["col"] == "Words" { 0.0 } else { 1.0 };
        assert_eq!(cell["b"].as_f64(), Some(want), "{cell}");
    }

    let out = mrkl_in(dir.path(), &["compare", "baseline:published", "r/exp2-reference.json"], None);
    assert!(stdout(&out).contains("| Digits | 1.0 -> 1.0 (+0.000) | 0.156 -> 1.0 (+0.844) |"), "{}", stdout(&out));
}

#[test]
fn eval_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = mrkl_in(dir.path(), &["eval", "-e", "3", "--dataset", "nope.jsonl", "--no-generate"], None);
    assert_eq!(missing.status.code(), Some(2));
    let dead = mrkl_in(dir.path(), &["eval", "-e", "3", "--backend", "cmd:exit 0"], None);
    assert_eq!(dead.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&dead.stderr).contains("backend unreachable"));
}

#[test]
fn subprocess_backend_round_trip() {
    // The binary itself serves as a line-protocol backend.
    let dir = tempfile::tempdir().unwrap();
    let backend = format!("cmd:{} serve", env!("CARGO_BIN_EXE_mrkl"));
    let out = mrkl_in(dir.path(), &["eval", "-e", "1", "--runs", "1", "--backend", &backend], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!stdout(&out).contains("| 0."), "{}", stdout(&out));
}

#[test]
fn generated_dataset_is_reused_by_eval() {
    let dir = tempfile::tempdir().unwrap();
    let out = mrkl_in(dir.path(), &["eval", "-e", "5", "--dataset", "d.jsonl"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("d.jsonl").exists());
    assert!(dir.path().join("d-reference.csv").exists());
    let again =
        mrkl_in(dir.path(), &["eval", "-e", "5", "--dataset", "d.jsonl", "--no-generate", "--format", "csv"], None);
    assert!(stdout(&again).starts_with("layout,row,col,mean,std,n,runs\n"), "{}", stdout(&again));
}
