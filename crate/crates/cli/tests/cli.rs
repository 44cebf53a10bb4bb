use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn spt() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spt"));
    cmd.env_remove("SPT_MAX_DIM");
    cmd
}

fn run(args: &[&str]) -> Output {
    spt().args(args).output().expect("spawn spt")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "spt failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Fresh scratch directory per test.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spt-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn builtin(dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    let out = run(&["builtin", name, "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn phase(v: &Value, g: usize, h: usize) -> (f64, f64) {
    let z = &v["invariant_phases"][g][h];
    (z[0].as_f64().unwrap(), z[1].as_f64().unwrap())
}

#[test]
fn time_reversal_index_and_exit_codes() {
    let dir = scratch("tr");
    let aklt = json_of(&run(&["index-tr", builtin(&dir, "aklt").to_str().unwrap()]));
    assert_eq!(aklt["zeta"], -1);
    assert!(aklt["residual"].as_f64().unwrap() <= 1e-8);
    let trivial = json_of(&run(&["index-tr", builtin(&dir, "trivial").to_str().unwrap()]));
    assert_eq!(trivial["zeta"], 1);

    let random = run(&["index-tr", builtin(&dir, "random").to_str().unwrap()]);
    assert_eq!(random.status.code(), Some(2));
    assert!(!random.stderr.is_empty());

    let missing = run(&["index-tr", dir.join("nope.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(4));
}

#[test]
fn z2z2_invariant_phases() {
    let dir = scratch("group");
    let group = builtin(&dir, "z2z2");
    let aklt = json_of(&run(&["index-group", builtin(&dir, "aklt").to_str().unwrap(), group.to_str().unwrap()]));
    let trivial =
        json_of(&run(&["index-group", builtin(&dir, "trivial").to_str().unwrap(), group.to_str().unwrap()]));
    for g in 1..4 {
        for h in 1..4 {
            let (re, im) = phase(&aklt, g, h);
            let expected = if g == h { 1.0 } else { -1.0 };
            assert!((re - expected).abs() < 1e-10 && im.abs() < 1e-10, "aklt ({g},{h}) = {re}+{im}i");
            let (re, im) = phase(&trivial, g, h);
            assert!((re - 1.0).abs() < 1e-10 && im.abs() < 1e-10);
        }
    }
    assert!(aklt["cocycle_defect"].as_f64().unwrap() <= 1e-10);
    assert_eq!(aklt["trivial_class"], false);
    assert_eq!(trivial["trivial_class"], true);
}

#[test]
fn malformed_group_is_a_validation_error() {
    let dir = scratch("badgroup");
    let mut file: Value = serde_json::from_str(&std::fs::read_to_string(builtin(&dir, "z2z2")).unwrap()).unwrap();
    // two rows equal: not a Latin square
    file["mult_table"][1] = file["mult_table"][2].clone();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, file.to_string()).unwrap();
    let out = run(&["index-group", builtin(&dir, "aklt").to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = scratch("determinism");
    let aklt = builtin(&dir, "aklt");
    let group = builtin(&dir, "z2z2");
    let a = run(&["index-group", aklt.to_str().unwrap(), group.to_str().unwrap()]);
    let b = run(&["index-group", aklt.to_str().unwrap(), group.to_str().unwrap()]);
    assert_eq!(a.stdout, b.stdout);

    let r1 = run(&["builtin", "random", "--seed", "11"]);
    let r2 = run(&["builtin", "random", "--seed", "11"]);
    let r3 = run(&["builtin", "random", "--seed", "12"]);
    assert_eq!(r1.stdout, r2.stdout);
    assert_ne!(r1.stdout, r3.stdout);

    let e1 = run(&["entanglement", "--ensemble", "4", "--seed", "5"]);
    let e2 = run(&["entanglement", "--ensemble", "4", "--seed", "5", "--threads", "1"]);
    assert_eq!(e1.stdout, e2.stdout);
    assert_eq!(json_of(&e1)["all_pass"], true);
}

#[test]
fn parent_interaction_round_trips_through_a_sweep() {
    let dir = scratch("parent");
    let report = json_of(&run(&["parent-ham", builtin(&dir, "aklt").to_str().unwrap(), "--m", "2"]));
    assert_eq!(report["m"], 2);
    assert_eq!(report["rank"], 5);
    assert!(report["projector_defect"].as_f64().unwrap() <= 1e-10);
    assert!(report["frustration_free_residual"].as_f64().unwrap() <= 1e-10);
    std::fs::write(dir.join("parent.json"), report["interaction"].to_string()).unwrap();

    // Frustration free: zero energy with a fourfold ground space on open chains.
    let config = dir.join("sweep.json");
    std::fs::write(
        &config,
        r#"{"phi0": "trivial", "phi1": {"file": "parent.json"}, "sizes": [4], "boundary": "open", "grid_points": 3, "q": 6}"#,
    )
    .unwrap();
    let out = run(&["gap-sweep", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0].parse::<f64>().unwrap(), 1.0);
    assert!(last[3].parse::<f64>().unwrap().abs() < 1e-9);
    assert!(last[4].parse::<f64>().unwrap().abs() < 1e-9);
}

#[test]
fn gap_sweep_shape_summary_and_size_cap() {
    let dir = scratch("sweep");
    let config = dir.join("sweep.json");
    std::fs::write(&config, r#"{"phi0": "trivial", "phi1": "aklt", "sizes": [4, 6], "boundary": "periodic"}"#)
        .unwrap();
    let csv_path = dir.join("sweep.csv");
    let out = run(&["gap-sweep", config.to_str().unwrap(), "--out", csv_path.to_str().unwrap()]);
    let summary = json_of(&out);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "s,n,boundary,e0,e1,gap,sigma1_diameter");
    assert_eq!(rows.len(), 1 + 41 * 2);
    let first: Vec<&str> = rows[1].split(',').collect();
    assert!((first[5].parse::<f64>().unwrap() - 1.0).abs() <= 1e-9);
    for size in summary["sizes"].as_array().unwrap() {
        let s = size["s_star"].as_f64().unwrap();
        assert!(s > 0.0 && s < 1.0);
        assert_eq!(size["interior"], true);
    }

    let capped = spt().env("SPT_MAX_DIM", "100").args(["gap-sweep", config.to_str().unwrap()]).output().unwrap();
    assert_eq!(capped.status.code(), Some(5));
}

#[test]
fn flow_reports_every_checkpoint() {
    let dir = scratch("flow");
    let config = dir.join("flow.json");
    std::fs::write(
        &config,
        r#"{"phi0": "trivial", "phi1": "aklt", "n": 4, "boundary": "periodic", "s_end": 0.2,
            "checkpoints": 3, "gamma": 0.1, "boundary_gamma": 0.5, "factorization": true}"#,
    )
    .unwrap();
    let report = json_of(&run(&["flow", config.to_str().unwrap()]));
    let points = report["checkpoints"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    for p in points {
        assert!(p["fidelity_defect"].as_f64().unwrap() <= 1e-2);
        assert!(p["factorization_defect"].as_f64().unwrap() <= 5e-2);
        assert!(p["V_norm"].as_f64().unwrap().is_finite());
        assert_eq!(p["V_locality_profile"][0].as_f64().unwrap().round(), 1.0);
    }
}
