use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fracorn::cli::config::ExperimentConfig;
use fracorn::cli::report::VOLATILE_COLUMNS;
use fracorn::cli::{self, resolve_threads, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fracorn"));
    c.env_remove(cli::THREADS_ENV);
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv(o: &Output) -> Vec<Vec<String>> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const SQUARE: &str = r#"
[domain]
kind = "unit-square"
[grid]
h = [0.125]
"#;

#[test]
fn constant_field_has_zero_seminorms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{SQUARE}[[fields]]\nkind = \"constant\"\nvalue = [1.0, -2.0]\n"));
    let o = run(&["seminorm", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", stderr(&o));
    let rows = csv(&o);
    let col = |name: &str| rows[0].iter().position(|c| c == name).unwrap();
    assert_eq!(rows.len(), 2);
    for name in ["gagliardo", "projected"] {
        assert_eq!(rows[1][col(name)].parse::<f64>().unwrap(), 0.0);
    }
    // the ratio is guarded, not 0/0
    assert_eq!(rows[1][col("ratio")], "");
}

#[test]
fn outputs_are_deterministic_across_runs_and_threads() {
    let cfg = configs().join("seminorm.toml");
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for (k, threads) in ["1", "3", "3"].iter().enumerate() {
        let out = dir.path().join(format!("r{k}.csv"));
        let o = run(&["seminorm", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(o.status.code(), Some(EXIT_OK), "{}", stderr(&o));
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
        assert_eq!(json["command"], "seminorm");
        let text = std::fs::read_to_string(&out).unwrap();
        let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
        let keep: Vec<usize> = (0..header.len()).filter(|&i| !VOLATILE_COLUMNS.contains(&header[i])).collect();
        let stable: Vec<String> = text
            .lines()
            .map(|l| {
                let cells: Vec<&str> = l.split(',').collect();
                keep.iter().map(|&i| cells[i]).collect::<Vec<_>>().join(",")
            })
            .collect();
        texts.push(stable);
    }
    assert_eq!(texts[0], texts[1]);
    assert_eq!(texts[1], texts[2]);
}

#[test]
fn convergence_reports_each_grid_and_the_extrapolate() {
    let o = run(&["convergence", "--config", configs().join("convergence.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", stderr(&o));
    let rows = csv(&o);
    let col = rows[0].iter().position(|c| c == "row").unwrap();
    let kinds: Vec<&str> = rows[1..].iter().map(|r| r[col].as_str()).collect();
    assert_eq!(kinds, ["h", "h", "h", "extrapolate"]);
}

#[test]
fn numbers_round_trip_through_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "i.toml", &format!("{SQUARE}[[fields]]\nkind = \"identity\"\n"));
    let rows = csv(&run(&["seminorm", "--config", cfg.to_str().unwrap()]));
    let col = rows[0].iter().position(|c| c == "gagliardo").unwrap();
    let text = &rows[1][col];
    let v: f64 = text.parse().unwrap();
    assert_eq!(format!("{v:.16e}"), *text);
}

#[test]
fn every_example_config_round_trips() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        cfg.prepare().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
    }
}

#[test]
fn example_configs_run() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, file) in [
        ("extend", "extend.toml"),
        ("extend", "wedge.toml"),
        ("hardy", "hardy.toml"),
        ("cover", "cover.toml"),
        ("perisolve", "perisolve.toml"),
    ] {
        let out = dir.path().join(format!("{file}.csv"));
        let o = run(&[cmd, "--config", configs().join(file).to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(EXIT_OK), "{cmd} {file}: {}", stderr(&o));
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.lines().count() > 1, "{cmd} {file}: empty report");
        assert!(!text.contains("nan"), "{cmd} {file}: {text}");
    }
}

#[test]
fn unknown_keys_are_config_errors_with_a_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[domain]\nkind = \"unit-square\"\n[grid]\nh = [0.125]\nhh = 3\n");
    let o = run(&["seminorm", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    let msg = stderr(&o);
    assert!(msg.contains("line 5") && msg.contains("hh"), "{msg}");
}

#[test]
fn invalid_parameters_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &format!("{SQUARE}[params]\ns = 1.5\np = 2.0\n[[fields]]\nkind = \"identity\"\n"));
    let o = run(&["seminorm", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(stderr(&o).contains("s must lie in (0, 1)"), "{}", stderr(&o));
    let o = run(&["seminorm"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    let o = run(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    let o = run(&["seminorm", "--config", "/nonexistent/x.toml"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn numeric_failures_name_the_operation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "coarse.toml", "[domain]\nkind = \"unit-square\"\n[grid]\nh = [0.5]\n[[fields]]\nkind = \"identity\"\n");
    let o = run(&["seminorm", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_NUMERIC));
    assert!(stderr(&o).contains("grid at h = 0.5"), "{}", stderr(&o));
}

#[test]
fn sabotaged_acceptance_exits_with_failure() {
    let o = run(&["acceptance", "--only", "4", "--sabotage"]);
    assert_eq!(o.status.code(), Some(EXIT_ACCEPTANCE), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("FAIL"), "{out}");
    let o = run(&["acceptance", "--only", "4"]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", stderr(&o));
    let o = run(&["acceptance", "--only", "99"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn thread_precedence() {
    assert_eq!(resolve_threads(Some(2), Some("5"), Some(7)).unwrap(), Some(2));
    assert_eq!(resolve_threads(None, Some("5"), Some(7)).unwrap(), Some(5));
    assert_eq!(resolve_threads(None, None, Some(7)).unwrap(), Some(7));
    assert_eq!(resolve_threads(None, None, None).unwrap(), None);
    assert_eq!(resolve_threads(None, Some("zero"), None).unwrap_err().code, EXIT_CONFIG);
    assert_eq!(resolve_threads(Some(0), None, None).unwrap_err().code, EXIT_CONFIG);
    let cfg = configs().join("seminorm.toml");
    let o = bin().args(["seminorm", "--config", cfg.to_str().unwrap()]).env(cli::THREADS_ENV, "abc").output().unwrap();
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
}
