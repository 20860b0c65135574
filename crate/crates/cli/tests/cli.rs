use std::path::Path;
use std::process::{Command, Output};

fn carnot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carnot"))
        .args(args)
        .output()
        .expect("spawn carnot")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    let prefix = format!("{key}: ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

fn write_spec(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn info_heisenberg() {
    let o = carnot(&["info"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(field(&text, "m"), "2");
    assert_eq!(field(&text, "n"), "3");
    assert_eq!(field(&text, "Q"), "4");
    assert_eq!(field(&text, "metivier"), "Metivier");
}

#[test]
fn header_lists_run_settings() {
    let text = stdout(&carnot(&["--seed", "7", "--budget", "50", "info"]));
    assert!(text.starts_with("# carnot info\n"));
    assert!(text.contains("# seed: 7\n"));
    assert!(text.contains("# budget: 50\n"));
    assert!(text.contains("# spec_sha256: "));
    assert!(text.contains("# tolerances: tau_rank=1e-9"));
}

#[test]
fn n0_values() {
    for (spec, expected) in [("heisenberg", "5"), ("gk:3", "13"), ("gk:inf", "17")] {
        let o = carnot(&["--spec", spec, "n0"]);
        assert_eq!(o.status.code(), Some(0), "{spec}");
        assert_eq!(field(&stdout(&o), "n0"), expected, "{spec}");
    }
}

#[test]
fn gk_inf_is_not_metivier() {
    let text = stdout(&carnot(&["--spec", "gk:inf", "info"]));
    assert_eq!(field(&text, "metivier"), "NotMetivier");
}

#[test]
fn antisymmetry_violation_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "bad.txt", "m 2\nd2 1\nc 1 2 1 1\nc 2 1 1 1\n");
    let o = carnot(&["--spec", &spec, "validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("antisymmetric: false"));
    // other commands refuse the file too
    assert_eq!(carnot(&["--spec", &spec, "info"]).status.code(), Some(1));
}

#[test]
fn parse_error_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "bad.txt", "m 2\nd2 1\nc 1 2 1 x\n");
    let o = carnot(&["--spec", &spec, "info"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn file_spec_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "h.txt", "# heisenberg\nm 2\nd2 1\nc 1 2 1 1\n");
    let o = carnot(&["--spec", &spec, "n0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "n0"), "5");
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(carnot(&["bogus"]).status.code(), Some(3));
    assert_eq!(carnot(&["jmap"]).status.code(), Some(3));
    assert_eq!(carnot(&["jmap", "--u", "1,2"]).status.code(), Some(3));
    assert_eq!(carnot(&["exp", "--lambda", "1,0,1", "--t", "2"]).status.code(), Some(3));
    assert_eq!(carnot(&["--spec", "/no/such/file", "info"]).status.code(), Some(3));
    assert_eq!(carnot(&["--spec", "gk:0", "info"]).status.code(), Some(3));
}

#[test]
fn help_exits_0() {
    let o = carnot(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Usage"));
}

#[test]
fn jmap_reports_matrix() {
    let text = stdout(&carnot(&["--spec", "gk:2", "jmap", "--u", "1,0,0"]));
    assert_eq!(field(&text, "sigma_min"), "0.5");
    assert!(text.contains("0,-1,0,0\n1,0,0,0\n"));
}

#[test]
fn exp_heisenberg() {
    let text = stdout(&carnot(&["exp", "--lambda", "1,0,2"]));
    let point: Vec<f64> = field(&text, "point").split(',').map(|x| x.parse().unwrap()).collect();
    let (s, c) = 2.0f64.sin_cos();
    assert!((point[0] - s / 2.0).abs() < 1e-12);
    assert!((point[1] - (1.0 - c) / 2.0).abs() < 1e-12);
    assert!((point[2] - (2.0 - s) / 8.0).abs() < 1e-10);
}

#[test]
fn dist_heisenberg_center() {
    let o = carnot(&["dist", "--p", "0,0,0", "--q", "0,0,0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let d: f64 = field(&stdout(&o), "distance").parse().unwrap();
    assert!((d - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-6);
}

#[test]
fn same_seed_same_bytes() {
    let args = ["--seed", "11", "--format", "csv", "mcp", "--samples", "8", "--s-grid", "0.3,0.6"];
    let a = carnot(&args);
    let b = carnot(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let n0 = ["--spec", "gk:inf", "--seed", "3", "--budget", "200", "n0"];
    assert_eq!(carnot(&n0).stdout, carnot(&n0).stdout);
}

#[test]
fn csv_numbers_round_trip() {
    let text = stdout(&carnot(&["--format", "csv", "exp", "--lambda", "0.3,-0.7,1.9"]));
    let line = text.lines().find(|l| l.starts_with("# point: ")).unwrap();
    for tok in line.trim_start_matches("# point: ").split(',') {
        let x: f64 = tok.parse().unwrap();
        assert_eq!(tok, format!("{x:.16e}"));
    }
}

#[test]
fn output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.txt");
    let o = carnot(&["--output", path.to_str().unwrap(), "info"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(&path).unwrap().contains("metivier: Metivier"));
}

#[test]
fn semicontinuity_report() {
    let o = carnot(&["--budget", "200", "family", "semicontinuity"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("17 = N_0(G_inf) <= N_CE(G_inf) <= liminf N_CE(G_k) = liminf N_0(G_k) = 13"));
    assert!(text.contains("some finite-k member of G_k has N_CE > N_0"));
}

#[test]
fn converge_bad_k_list() {
    let o = carnot(&["family", "converge", "--k-list", "1,x"]);
    assert_eq!(o.status.code(), Some(3));
}
