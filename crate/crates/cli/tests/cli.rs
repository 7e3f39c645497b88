use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(file).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blocklength")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("blocklength-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["validate", "--model", &corpus("fig1.json")]).status.code(), Some(0));
    assert_eq!(run(&["validate", "--model", &corpus("broken/row-sum.json")]).status.code(), Some(2));
    assert_eq!(run(&["validate", "--model", &corpus("broken/not-json.json")]).status.code(), Some(2));
    assert_eq!(run(&["measures", "--model", &corpus("broken/periodic-chain.json")]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["limits", "--model", &corpus("fig1.json"), "--n", "3", "--eps", "1"]).status.code(), Some(1));
    assert_eq!(run(&["limits", "--model", &corpus("fig1.json"), "--n-range", "5:2"]).status.code(), Some(1));
    assert_eq!(run(&["verify", "--model", "/nonexistent/corpus"]).status.code(), Some(1));
}

#[test]
fn forced_bruteforce_beyond_its_limit_fails() {
    let out = run(&["limits", "--model", &corpus("fig1.json"), "--y", "repeat:001", "--n", "30", "--method", "bruteforce"]);
    assert_eq!(out.status.code(), Some(1));
    let auto = run(&["limits", "--model", &corpus("fig1.json"), "--y", "repeat:001", "--n", "30", "--k", "20"]);
    assert!(stdout(&auto).contains(",typeclass,ref"));
}

#[test]
fn limits_rows_in_ascending_n() {
    let out = run(&["limits", "--model", &corpus("fig1.json"), "--n-range", "1:12", "--eps", "0.1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,quantity,k_or_eps,value,method,scope"));
    let ns: Vec<usize> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ns, (1..=12).collect::<Vec<_>>());
}

#[test]
fn prefix_scope_shifts_the_profile() {
    let one_to_one = stdout(&run(&["limits", "--model", &corpus("fig1.json"), "--y", "01", "--k", "0,1"]));
    let prefix = stdout(&run(&["limits", "--model", &corpus("fig1.json"), "--y", "01", "--k", "1,2", "--scope", "prefix"]));
    let values = |t: &str| t.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().to_string()).collect::<Vec<_>>();
    assert_eq!(values(&one_to_one), values(&prefix));
}

#[test]
fn pair_bounds_bracket_at_500() {
    let out = run(&["bounds", "--model", &corpus("fig1.json"), "--n", "500", "--eps", "0.1"]);
    let text = stdout(&out);
    assert!(text.contains("r_star,500,0.100000000000,0.672000000000"));
    assert!(text.lines().any(|l| l.starts_with("bracket,500,0.100000000000,1,,true")));
}

#[test]
fn markov_bounds_need_a_constant() {
    let out = run(&["bounds", "--model", &corpus("sticky-pair.json"), "--n", "100", "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn measures_report_fig1() {
    let text = stdout(&run(&["measures", "--model", &corpus("fig1.json")]));
    assert!(text.contains("h_xy=0.636313927211\n"));
    assert!(text.contains("h_x=0.836640741941\n"));
}

#[test]
fn out_flag_writes_file() {
    let dir = scratch_dir("out");
    let path = dir.join("limits.csv");
    let out = run(&["limits", "--model", &corpus("fig1.json"), "--n", "4", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("n,quantity"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn y_from_file() {
    let dir = scratch_dir("yfile");
    let path = dir.join("y.txt");
    std::fs::write(&path, "001001\n").unwrap();
    let spec = format!("file:{}", path.display());
    let from_file = stdout(&run(&["limits", "--model", &corpus("fig1.json"), "--y", &spec, "--eps", "0.1"]));
    let literal = stdout(&run(&["limits", "--model", &corpus("fig1.json"), "--y", "001001", "--eps", "0.1"]));
    assert_eq!(from_file, literal);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn verify_reports_broken_model_and_continues() {
    let dir = scratch_dir("verify");
    std::fs::copy(corpus("broken/row-sum.json"), dir.join("a-row-sum.json")).unwrap();
    std::fs::copy(corpus("fig1.json"), dir.join("fig1.json")).unwrap();
    let out = run(&["verify", "--model", dir.to_str().unwrap()]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(2));
    assert!(text.contains("INVALID a-row-sum.json"));
    assert!(text.contains("PASS fig1.json oracle_ref"));
    assert!(!text.contains("FAIL"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn shipped_corpus_verifies() {
    let out = run(&["verify", "--model", &corpus("")]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}
