mod common;

use serde_json::json;

use common::{disc, identity, mode, run, same_outputs, scalar, sweep_config};
use porohom::geometry::read_mesh;

fn cell_config(r: f64) -> serde_json::Value {
    json!({"geometry": {"inclusion": disc(r), "h": 0.05}, "coefficients": {"d": identity()}})
}

#[test]
fn cell_tensor_is_pinned_and_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), "d0", "cell-tensor", &cell_config(0.25), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let d0 = r.json("d0.json");
    let m = &d0["tensor"]["matrix"];
    let a = m[0][0].as_f64().unwrap();
    assert!((a - 0.8376731445126605).abs() < 1e-12, "{a}");
    assert!((m[0][1].as_f64().unwrap() - m[1][0].as_f64().unwrap()).abs() < 1e-14);
    // mesh-converged value of the same cell problem, within the O(h²) discretization error
    assert!((a - 0.835720814687).abs() < 5e-3);
    assert!(d0["tensor"]["cross_check_err"].as_f64().unwrap() < 1e-9);
}

#[test]
fn oversized_inclusion_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), "big", "cell-tensor", &cell_config(0.6), &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("INVALID_GEOMETRY"), "{}", r.stderr);
}

#[test]
fn unknown_keys_and_missing_sections_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), "typo", "validate", &json!({"kinetic": "zero"}), &[]);
    assert_eq!(r.code, 2);
    let r = run(dir.path(), "nosolver", "macro", &cell_config(0.25), &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("solver"), "{}", r.stderr);
}

#[test]
fn btable_has_every_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "geometry": {"inclusion": disc(0.25), "h": 0.1},
        "coefficients": {"d1": identity(), "d2": scalar(2.0)},
        "kinetics": "langmuir:a=1,b=1",
        "table": {"s_max": 4.0, "points": 5, "tol": 1e-3, "max_rounds": 2}
    });
    let r = run(dir.path(), "bt", "btable", &cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let entries = r.json("btable.json")["table"]["entries"].as_array().unwrap().len();
    assert!(entries >= 5, "{entries}");
}

#[test]
fn validate_reports_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(dir.path(), "zero", "validate", &json!({"kinetics": "zero"}), &[]);
    assert_eq!(ok.code, 0, "{}", ok.stderr);
    assert_eq!(ok.json("validation.json")["passed"], json!(true));

    let unbounded = run(dir.path(), "lin", "validate", &json!({"kinetics": "linear_exchange:a=1"}), &[]);
    assert_eq!(unbounded.code, 2);
    assert!(unbounded.stderr.contains("exchange_bounded"), "{}", unbounded.stderr);
    let report = unbounded.json("validation.json");
    let check = report["kinetics"]["checks"].as_array().unwrap().iter().find(|c| c["name"] == "exchange_bounded").unwrap();
    assert!(check["witness"].is_array());

    let sign = run(dir.path(), "sign", "validate", &json!({"kinetics": "constant_source:value=-1"}), &[]);
    assert_eq!(sign.code, 2);
    assert!(sign.stderr.contains("volume_sign_condition"), "{}", sign.stderr);

    let geom = run(dir.path(), "geom", "validate", &cell_config(0.6), &[]);
    assert_eq!(geom.code, 2);
    assert!(geom.stderr.contains("INVALID_GEOMETRY"));
}

#[test]
fn manifest_materializes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "geometry": {"inclusion": disc(0.0), "h_macro": 0.125},
        "solver": {"dt": 0.01, "t_end": 0.02, "model": {"forced": {"dispersion": [[1.0, 0.0], [0.0, 1.0]], "d0": [[1.0, 0.0], [0.0, 1.0]]}}},
        "initial": [mode(), mode(), mode()]
    });
    let r = run(dir.path(), "m", "macro", &cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let m = r.json("manifest.json");
    assert_eq!(m["command"], "macro");
    assert_eq!(m["config"]["solver"]["theta"], json!(1.0));
    assert_eq!(m["config"]["solver"]["positivity"], json!("MONITOR"));
    assert_eq!(m["config"]["kinetics"], json!("zero"));
    assert_eq!(m["fingerprint"].as_str().unwrap().len(), 64);
    assert_eq!(r.read("trajectory.csv").lines().count(), 4);
}

#[test]
fn mesh_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({"geometry": {"inclusion": disc(0.25), "h": 0.1, "h_macro": 0.25, "epsilon": 0.5}});
    let r = run(dir.path(), "mesh", "mesh", &cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let summary = r.json("mesh.json");
    for (file, key) in [("cell.mesh", "cell"), ("macro.mesh", "macro"), ("epsilon.mesh", "epsilon")] {
        let m = read_mesh(&r.read(file)).unwrap();
        assert_eq!(summary[key]["nodes"].as_u64().unwrap() as usize, m.n_nodes());
        assert_eq!(summary[key]["fingerprint"].as_str().unwrap(), m.fingerprint());
    }
    assert_eq!(summary["epsilon"]["cells"], json!(4));
    assert_eq!(summary["cell"]["gamma_loops"], json!(1));
}

fn tiny_sweep() -> serde_json::Value {
    sweep_config("FAST_EXCHANGE", &[0.5, 0.25, 0.125], 0.125, 0.125, 0.01, 0.02)
}

#[test]
fn sweep_reports_one_row_per_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), "sw", "sweep", &tiny_sweep(), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = r.json("report.json");
    for k in ["c1", "c2", "c3", "gamma_gap"] {
        assert_eq!(report["errors"][k].as_array().unwrap().len(), 3);
    }
    assert_eq!(r.read("report.csv").lines().count(), 4);
}

#[test]
fn budget_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), "sw", "sweep", &tiny_sweep(), &["--budget-nodes", "50"]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("BUDGET_EXCEEDED"), "{}", r.stderr);
    let micro = json!({
        "geometry": {"inclusion": disc(0.25), "h": 0.1, "epsilon": 0.25},
        "coefficients": {"d1": identity(), "d2": identity(), "d3": identity()},
        "solver": {"dt": 0.01, "t_end": 0.01}
    });
    let r = run(dir.path(), "mi", "micro", &micro, &["--budget-nodes", "50"]);
    assert_eq!(r.code, 4);
}

#[test]
fn micro_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "geometry": {"inclusion": disc(0.25), "h": 0.125, "epsilon": 0.25},
        "coefficients": {"d1": identity(), "d2": scalar(2.0), "d3": identity()},
        "kinetics": "mm_triple+langmuir",
        "solver": {"dt": 0.01, "t_end": 0.03},
        "initial": [mode(), {"constant": {"value": 0.5}}, mode()],
        "output": {"fields": true}
    });
    let a = run(dir.path(), "a", "micro", &cfg, &["--threads", "1"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    let b = common::run_file(dir.path(), "b", "micro", &a.out.join("manifest.json"), &["--threads", "2"]);
    assert_eq!(b.code, 0, "{}", b.stderr);
    assert_eq!(same_outputs(&a.out, &b.out).unwrap(), 7);
    assert_eq!(a.read("gamma_gap.csv").lines().next().unwrap(), "t,norm_c1_minus_c2_on_gamma");
}

#[test]
fn tensor_suite_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), "ts", "tensor-suite", &json!({}), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json("tensor_suite.json")["passed"], json!(true));
    assert!(r.json("manifest.json")["config"]["suite"].is_object());
}

#[test]
fn three_field_model_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "geometry": {"inclusion": disc(0.25), "h": 0.1, "h_macro": 0.125},
        "coefficients": {"d1": identity(), "d2": scalar(2.0), "d3": identity()},
        "kinetics": "langmuir",
        "solver": {"dt": 0.01, "t_end": 0.05, "model": "three_field"},
        "initial": [mode(), {"zero": null}, mode()]
    });
    let r = run(dir.path(), "tf", "macro", &cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let gap: Vec<f64> = r.read("gap.csv").lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(gap.len(), 6);
    assert!(gap.windows(2).all(|w| w[1] < w[0]), "{gap:?}");
}
