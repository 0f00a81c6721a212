use std::path::Path;
use std::process::{Command, Output};

use phs_decay::catalog;
use phs_decay::io::{parse_system, system_to_json, CertificateFile, STATE_MAGIC};

fn phs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phs-decay")).args(args).env_remove("PHS_DECAY_GRID").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn certify_unit_wave() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let o = phs(&["certify", "--catalog", "wave-unit", "--k", "1", "--multiplier", "linear", "--xi", "0.5", "--out", path(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("M=3.0000000000"), "{s}");
    assert!(s.contains("alpha=0.3333333333"), "{s}");
    let file = CertificateFile::read(&out).unwrap();
    assert_eq!(file.system, "wave-unit");
    assert_eq!(file.certificate.overshoot, 3.0);
}

#[test]
fn sweep_reproduces_xi_table() {
    let o = phs(&["sweep", "--catalog", "timoshenko-normalized", "--var", "xi", "--values", "1/3,0.4713,1/2,3/5,2/3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "sweep_var,eps0,eps1,c,M,alpha,margin");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    let table = [(1.0 / 3.0, 2.0, 0.0224), (0.4713, 2.783, 0.0286), (0.5, 3.0, 0.0298), (0.6, 4.0, 0.0335), (2.0 / 3.0, 5.0, 0.0358)];
    assert_eq!(rows.len(), table.len());
    for (row, (xi, m, alpha)) in rows.iter().zip(table) {
        assert_eq!(row[0], xi);
        assert!((row[4] - m).abs() <= 1e-3, "{row:?}");
        assert!((row[5] - alpha).abs() <= 5e-4, "{row:?}");
    }
}

#[test]
fn sweep_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let o = phs(&["sweep", "--catalog", "wave-unit", "--var", "k", "--values", "1/4,1/2,1,2,4", "--csv", path(&p)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(p).unwrap()
    };
    let first = run("a.csv");
    assert_eq!(first, run("b.csv"));
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 6);
}

#[test]
fn verify_variable_string_passes() {
    let o = phs(&["verify", "--catalog", "wave-variable"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("verified"));
}

#[test]
fn simulate_writes_trace_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let dump = dir.path().join("state.bin");
    let o = phs(&["simulate", "--catalog", "timoshenko-normalized", "--N", "20", "--T", "0.5", "--csv", path(&csv), "--out", path(&dump)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,H,yb_1,yb_2");
    assert_eq!(text.lines().count(), 502);
    assert_eq!(&std::fs::read(dump).unwrap()[..8], STATE_MAGIC);
    assert!(stdout(&o).contains("residual"));
}

#[test]
fn grid_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let o = Command::new(env!("CARGO_BIN_EXE_phs-decay"))
        .args(["certify", "--catalog", "wave-unit", "--out", path(&out)])
        .env("PHS_DECAY_GRID", "101")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(CertificateFile::read(&out).unwrap().certificate.grid_size, 101);
}

#[test]
fn catalog_lists_and_exports() {
    let o = phs(&["catalog"]);
    assert_eq!(code(&o), 0);
    for name in catalog::NAMES {
        assert!(stdout(&o).contains(name));
    }
    let o = phs(&["catalog", "--catalog", "timoshenko-inviscid", "--k", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sys = parse_system(&stdout(&o)).unwrap();
    assert_eq!(system_to_json(&sys), system_to_json(&catalog::timoshenko_inviscid(2.0).system));
}

#[test]
fn system_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("wave.json");
    std::fs::write(&file, system_to_json(&catalog::wave_variable_area().system)).unwrap();
    let o = phs(&["validate", "--system", path(&file)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = phs(&["certify", "--system", path(&file), "--multiplier", "linear", "--out", path(&dir.path().join("c.json"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    // default xi is 1/2 for files
    assert!(stdout(&o).contains("xi          0.5000000000"), "{}", stdout(&o));
}

#[test]
fn exit_2_on_unparseable_config() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["certify", "--catalog", "wave-unit", "--frobnicate"],
        vec!["sweep", "--catalog", "wave-unit", "--var", "xi", "--values", "1/0"],
        vec!["certify", "--catalog", "membrane"],
        vec!["certify", "--catalog", "wave-variable", "--k", "2"],
        vec!["certify", "--catalog", "wave-unit", "--xi", "1.5"],
        vec!["certify", "--catalog", "wave-unit", "--multiplier", "linear", "--beta", "2"],
        vec!["validate", "--system", path(&bad)],
        vec!["validate"],
    ];
    for args in cases {
        let o = phs(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn exit_3_on_failed_validation() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("dup.json");
    let mut sys = catalog::by_name("wave-unit", None).unwrap().system;
    sys.wt1 = sys.w1.clone();
    std::fs::write(&file, system_to_json(&sys)).unwrap();
    let cert = dir.path().join("c.json");
    for args in [vec!["validate", "--system", path(&file)], vec!["certify", "--system", path(&file), "--out", path(&cert)]] {
        let o = phs(&args);
        assert_eq!(code(&o), 3, "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains("port rank"), "{}", stderr(&o));
    }
}

#[test]
fn exit_4_when_uncertifiable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = phs(&["certify", "--catalog", "timoshenko-normalized", "--multiplier", "linear", "--out", path(&out)]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("at x = 1"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn exit_5_on_envelope_violation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    assert_eq!(code(&phs(&["certify", "--catalog", "wave-unit", "--out", path(&out)])), 0);
    let mut file = CertificateFile::read(&out).unwrap();
    file.certificate.overshoot = 1.0;
    file.certificate.alpha *= 10.0;
    std::fs::write(&out, file.to_json()).unwrap();
    let o = phs(&["verify", "--catalog", "wave-unit", "--certificate", path(&out), "--N", "50", "--T", "2"]);
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    assert!(stderr(&o).contains("envelope violated"));
}

#[test]
fn stored_certificate_must_match_system() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    assert_eq!(code(&phs(&["certify", "--catalog", "wave-unit", "--out", path(&out)])), 0);
    let o = phs(&["verify", "--catalog", "wave-unit", "--k", "2", "--certificate", path(&out), "--T", "1"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}
