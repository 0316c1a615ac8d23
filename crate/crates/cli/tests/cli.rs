use sixvertex::report::Report;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sixvertex"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("sixvertex-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn column<'a>(r: &'a Report, table: &str, col: &str) -> Vec<&'a str> {
    let t = r.table(table).unwrap_or_else(|| panic!("missing table {table}"));
    let c = t.column(col).unwrap_or_else(|| panic!("missing column {col}"));
    t.rows.iter().map(|row| row[c].as_str()).collect()
}

#[test]
fn small_verify_passes_and_parses() {
    let o = run(&["verify", "--M", "3,4", "--N", "3,4", "--tuples", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = Report::parse(&stdout(&o)).unwrap();
    assert_eq!(r.command, "verify");
    assert!(r.checks > 0);
    assert_eq!(r.failures, 0);
    assert!(column(&r, "operator_identities", "status").iter().all(|s| *s == "pass"));
}

#[test]
fn corrupted_operator_is_caught() {
    let o = run(&["verify", "--M", "3", "--N", "3", "--tuples", "1", "--identity", "TQ", "--inject-corrupt-operator"]);
    assert_eq!(code(&o), 1);
    let r = Report::parse(&stdout(&o)).unwrap();
    assert!(r.failures > 0);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&run(&["verify", "--M", "x"])), 2);
    assert_eq!(code(&run(&["verify", "--identity", "bogus", "--M", "3", "--N", "3"])), 2);
    assert_eq!(code(&run(&["no-such-command"])), 2);
    assert_eq!(code(&run(&["table1", "--tol-root", "-1"])), 2);
    assert_eq!(code(&run(&["spectrum", "--N", "3"])), 2);
}

#[test]
fn oversized_jobs_are_refused() {
    let o = run(&["table1", "--M", "15", "--N", "3"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("refused"));
    let o = run(&["table1", "--M", "9", "--N", "3", "--max-sector-dim", "100"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn table1_reports_expected_counts() {
    let o = run(&["table1", "--M", "3,5", "--N", "3,5,7"]);
    assert_eq!(code(&o), 0);
    let r = Report::parse(&stdout(&o)).unwrap();
    let got = column(&r, "table1", "maximal");
    assert_eq!(got, vec!["1", "1", "3", "8", "3", "10"]);
}

#[test]
fn stroganov_closed_forms_pass() {
    let o = run(&["stroganov", "--M", "3,5"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn wronskian_matches_diagonalization() {
    let o = run(&["wronskian", "--M", "3,5", "--N", "6"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let r = Report::parse(&stdout(&o)).unwrap();
    let sol = column(&r, "counts", "solutions");
    let vecs = column(&r, "counts", "eigenvectors");
    assert_eq!(sol, vecs);
}

#[test]
fn output_is_stable_and_cache_independent() {
    let dir = scratch_dir("cache");
    let cache = dir.join("cache");
    let args = ["spectrum", "--M", "4", "--N", "3", "--sector", "0"];
    let plain = stdout(&run(&args));
    let mut with_cache = args.to_vec();
    with_cache.extend(["--cache-dir", cache.to_str().unwrap()]);
    let cold = stdout(&run(&with_cache));
    let warm = stdout(&run(&with_cache));
    assert!(std::fs::read_dir(&cache).unwrap().next().is_some(), "cache stayed empty");
    assert_eq!(plain, cold);
    assert_eq!(cold, warm);
    assert_eq!(plain, stdout(&run(&args)));

    // A damaged entry is ignored and rewritten on read; cache-gc removes one left in place.
    let entry = std::fs::read_dir(&cache).unwrap().next().unwrap().unwrap().path();
    std::fs::write(&entry, b"garbage").unwrap();
    assert_eq!(stdout(&run(&with_cache)), plain);
    assert_ne!(std::fs::read(&entry).unwrap(), b"garbage");
    std::fs::write(&entry, b"garbage").unwrap();
    let gc = run(&["cache-gc", "--cache-dir", cache.to_str().unwrap()]);
    assert_eq!(code(&gc), 0);
    let r = Report::parse(&stdout(&gc)).unwrap();
    assert_ne!(column(&r, "cache", "removed"), vec!["0"]);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = scratch_dir("config");
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "# table sweep\nM = 3\nN = 5\nseed = 11\n").unwrap();
    let c = cfg.to_str().unwrap();
    let r = Report::parse(&stdout(&run(&["table1", "--config", c]))).unwrap();
    assert_eq!(column(&r, "table1", "N"), vec!["5"]);
    let r = Report::parse(&stdout(&run(&["table1", "--config", c, "--N", "7", "--seed", "12"]))).unwrap();
    assert_eq!(column(&r, "table1", "N"), vec!["7"]);
    assert!(r.config.contains(&("seed".to_string(), "12".to_string())));

    std::fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(code(&run(&["table1", "--config", c])), 2);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn out_flag_writes_the_structured_report() {
    let dir = scratch_dir("out");
    let path = dir.join("report.txt");
    let o = run(&["table1", "--M", "3", "--N", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("sixvertex-report 1\n"));
    let same = stdout(&run(&["table1", "--M", "3", "--N", "3"]));
    assert_eq!(text, same);
    assert!(!stdout(&o).starts_with("sixvertex-report"));
    let _ = std::fs::remove_dir_all(&dir);
}
