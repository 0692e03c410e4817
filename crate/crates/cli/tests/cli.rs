use std::path::Path;
use std::process::{Command, Output};

use invfeas::config::Config;
use invfeas::table;
use invfeas_core::region::BoundaryPolyline;

fn invfeas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invfeas")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    table::read(std::fs::File::open(path).unwrap()).unwrap()
}

fn kv(stdout: &[u8], key: &str) -> f64 {
    let text = String::from_utf8_lossy(stdout);
    let line = text.lines().find(|l| l.starts_with(&format!("{key} ="))).unwrap_or_else(|| panic!("{key} missing"));
    line.split('=').nth(1).unwrap().trim().parse().unwrap()
}

#[test]
fn region_writes_boundary_and_disk() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pq.csv");
    let o = invfeas(&["region", "--pair", "pq", "--samples", "360", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["s1", "s2", "i_d", "i_q"]);
    assert!(rows.len() <= 360 && rows.len() > 300);
    let poly = BoundaryPolyline {
        points: rows
            .iter()
            .map(|r| invfeas_core::region::BoundaryPoint {
                s1: r[0],
                s2: r[1],
                preimage: invfeas_core::DqVector::new(r[2], r[3]),
            })
            .collect(),
    };
    assert!(poly.is_convex(1e-9));
    let (dh, disk) = read_csv(&dir.path().join("pq_disk.csv"));
    assert_eq!(dh, ["i_d", "i_q"]);
    assert_eq!(disk.len(), 360);
}

#[test]
fn repeated_quantity_is_a_usage_error() {
    assert_eq!(code(&invfeas(&["region", "--pair", "pp"])), 2);
    assert_eq!(code(&invfeas(&["optimize", "--pair", "v2v2", "--target", "1", "2"])), 2);
}

#[test]
fn negative_gamma_is_a_usage_error() {
    let o = invfeas(&["optimize", "--pair", "pq", "--target", "800", "0", "--gamma", "-1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_config_reports_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[inverter]\nr = 0.8\nind = 2.0\n").unwrap();
    let o = invfeas(&["--config", cfg.to_str().unwrap(), "region"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ind") && err.contains("line 3"), "{err}");
}

#[test]
fn sdp_and_grid_agree_on_infeasible_pv2_target() {
    let sdp = invfeas(&["optimize", "--pair", "pv2", "--target", "850", "14400", "--method", "sdp"]);
    let grid = invfeas(&["optimize", "--pair", "pv2", "--target", "850", "14400", "--method", "grid"]);
    assert_eq!(code(&sdp), 0);
    assert_eq!(code(&grid), 0);
    let (a, b) = (kv(&sdp.stdout, "objective"), kv(&grid.stdout, "objective"));
    assert!((a - b).abs() <= 5e-3 * a.max(b), "{a} {b}");
    let i_max = 1200.0 / 180.0;
    assert!(kv(&sdp.stdout, "i_mag") <= i_max * (1.0 + 1e-6));
}

#[test]
fn feasible_target_is_reached() {
    for method in ["sdp", "fw", "grid"] {
        let o = invfeas(&["optimize", "--pair", "pq", "--target", "1100", "0", "--method", method]);
        assert_eq!(code(&o), 0);
        let scale = 1100.0f64 * 1100.0;
        assert!(kv(&o.stdout, "objective") <= 1e-6 * scale, "{method}");
    }
}

#[test]
fn optimize_writes_iterates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("it.csv");
    let o = invfeas(&["optimize", "--pair", "pv2", "--target", "850", "14400", "--method", "fw", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["iteration", "s1", "s2", "objective"]);
    assert!(!rows.is_empty());
}

fn simulate(args: &[&str]) -> (Output, Vec<String>, Vec<Vec<f64>>) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let mut full = vec!["simulate"];
    full.extend(args);
    full.extend(["--out", out.to_str().unwrap()]);
    let o = invfeas(&full);
    let (h, rows) = if out.exists() { read_csv(&out) } else { (vec![], vec![]) };
    (o, h, rows)
}

fn final_mean_i(rows: &[Vec<f64>]) -> f64 {
    let tail = &rows[rows.len() - 1000..];
    tail.iter().map(|r| r[3]).sum::<f64>() / tail.len() as f64
}

#[test]
fn droop_pv2_with_and_without_optimization() {
    let i_max = 1200.0 / 180.0;
    let (o, header, rows) = simulate(&["--scenario", "droop-pv2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        header,
        ["t", "i_d", "i_q", "i_mag", "v_d", "v_q", "P", "Q", "Vsq", "p_filt", "q_filt", "delta"]
    );
    assert_eq!(rows.len(), 10_001);
    assert!(rows.iter().all(|r| r.len() == header.len()));
    assert!(final_mean_i(&rows) > i_max);
    let (o, _, rows) = simulate(&["--scenario", "droop-pv2", "--optimize"]);
    assert_eq!(code(&o), 0);
    assert!(final_mean_i(&rows) < final_mean_i(&simulate(&["--scenario", "droop-pv2"]).2));
}

#[test]
fn oc_pq_stays_inside_limit() {
    let i_max = 1200.0 / 180.0;
    let (o, header, rows) = simulate(&["--scenario", "oc-pq"]);
    assert_eq!(code(&o), 0);
    assert_eq!(header.len(), 9);
    assert!(rows.iter().all(|r| r[3] <= i_max));
}

#[test]
fn unstable_run_exits_4_with_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("unstable.toml");
    std::fs::write(&cfg, "[inverter]\nl = 1e-5\n[sim]\ndt = 1e-3\n").unwrap();
    let out = dir.path().join("sim.csv");
    let o = invfeas(&["--config", cfg.to_str().unwrap(), "simulate", "--scenario", "droop-pv2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_csv(&out);
    assert!(!rows.is_empty() && rows.len() < 1001);
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    assert_eq!(code(&invfeas(&["simulate", "--scenario", "nope"])), 2);
}

#[test]
fn verify_passes_is_deterministic_and_catches_faults() {
    let a = invfeas(&["verify", "--seed", "3"]);
    let b = invfeas(&["verify", "--seed", "3"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    let bad = invfeas(&["verify", "--seed", "3", "--inject-fault", "support"]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stdout).contains("support  FAIL"));
}

#[test]
fn config_round_trip() {
    let text = "[inverter]\nr = 0.123456789012345\nl = 2.2e-3\nfrequency = 50.0\ne_mag = 230.0\ni_max = 10.1\n\
                [droop]\nm_p = 1e-3\n[sim]\nt_end = 2.0\n\
                [[scenario]]\nname = \"mine\"\ncontroller = \"oc\"\npair = \"qv2\"\npre = [0.1, 52900.0]\npost = [-300.0, 52900.0]\ngamma = 0.01\n";
    let a = Config::parse(text).unwrap();
    let b = Config::parse(&a.to_toml()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.params().unwrap(), b.params().unwrap());
    assert_eq!(a.gains().unwrap(), b.gains().unwrap());
    assert_eq!(a.scenario("mine").unwrap(), b.scenario("mine").unwrap());
    let d = Config::default();
    assert_eq!(Config::parse(&d.to_toml()).unwrap(), d);
}
