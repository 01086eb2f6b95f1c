use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn roughnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roughnet")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn weight_file(dir: &TempDir, name: &str, series: &[Vec<f64>]) -> PathBuf {
    let doc = json!({
        "format": "roughnet-weights/1",
        "N": series.len() - 1,
        "d": series[0].len(),
        "series": series,
        "meta": {}
    });
    let path = dir.path().join(name);
    std::fs::write(&path, doc.to_string()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Deterministic LCG walk, so the tests need no RNG dependency.
fn walk(n: usize, d: usize, step: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let mut rows = vec![vec![0.0; d]];
    for _ in 0..n {
        let last = rows.last().unwrap().clone();
        rows.push(last.iter().map(|x| x + step * next()).collect());
    }
    rows
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn pvar_of_constant_series_is_zero() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "c.json", &vec![vec![1.5, -2.0]; 6]);
    let out = stdout(&roughnet(&["pvar", "--input", s(&input), "--p-grid", "0.5:3:0.5", "--allow-quasinorm", "--output", "-"]));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[1] == "0" && r[2] == "pvar"));
}

#[test]
fn pvar_of_a_single_excursion() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "x.json", &[vec![0.0], vec![1.0], vec![0.0]]);
    let out = stdout(&roughnet(&["pvar", "--input", s(&input), "--p-grid", "1:2:1", "--output", "-"]));
    assert_eq!(out, "p,value,norm_kind\n1,2,pvar\n2,1.4142135623730951,pvar\n");
}

#[test]
fn pvar_curve_is_non_increasing_within_each_kind() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "w.json", &walk(60, 3, 0.5, 1));
    for lifted in [false, true] {
        let mut args = vec!["pvar", "--input", s(&input), "--p-grid", "1:3:0.05", "--output", "-"];
        if lifted {
            args.push("--lifted");
        }
        let rows = csv_rows(&stdout(&roughnet(&args)));
        assert_eq!(rows.len(), 41);
        assert_eq!(rows[3][0], "1.15");
        for pair in rows.windows(2) {
            let (p, a, b) = (pair[1][0].parse::<f64>().unwrap(), pair[0][1].parse::<f64>().unwrap(), pair[1][1].parse::<f64>().unwrap());
            let kind = if lifted && p >= 2.0 { "homogeneous" } else { "pvar" };
            assert_eq!(pair[1][2], kind);
            if pair[0][2] == pair[1][2] {
                assert!(b <= a * (1.0 + 1e-12), "p = {p}: {a} then {b}");
            }
        }
    }
}

#[test]
fn pvar_interval_restricts_the_window() {
    let dir = TempDir::new().unwrap();
    let rows = walk(20, 2, 1.0, 2);
    let whole = weight_file(&dir, "w.json", &rows);
    let part = weight_file(&dir, "p.json", &rows[4..=12]);
    let a = stdout(&roughnet(&["pvar", "--input", s(&whole), "--p-grid", "1:2.5:0.5", "--interval", "4,12", "--output", "-"]));
    let b = stdout(&roughnet(&["pvar", "--input", s(&part), "--p-grid", "1:2.5:0.5", "--output", "-"]));
    assert_eq!(a, b);
}

#[test]
fn malformed_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"format":"roughnet-weights/1","N":3,"d":1,"series":[[0],[1]],"meta":{}}"#).unwrap();
    let out = roughnet(&["pvar", "--input", s(&bad), "--p-grid", "1:2:1", "--output", "-"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&bad, "not json").unwrap();
    assert_eq!(roughnet(&["pvar", "--input", s(&bad), "--p-grid", "1:2:1", "--output", "-"]).status.code(), Some(2));
    let good = weight_file(&dir, "g.json", &[vec![0.0], vec![1.0]]);
    assert_eq!(roughnet(&["pvar", "--input", s(&good), "--p-grid", "1:2", "--output", "-"]).status.code(), Some(2));
    assert_eq!(roughnet(&["pvar", "--input", s(&good), "--p-grid", "1:2:1", "--interval", "0,5", "--output", "-"]).status.code(), Some(2));
    assert_eq!(roughnet(&["pvar", "--input", s(&good)]).status.code(), Some(2));
}

#[test]
fn sub_unit_exponents_need_opt_in() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "x.json", &[vec![0.0], vec![1.0], vec![2.0]]);
    let out = roughnet(&["pvar", "--input", s(&input), "--p-grid", "0.5:1:0.5", "--output", "-"]);
    assert_eq!(out.status.code(), Some(3));
    let ok = stdout(&roughnet(&["pvar", "--input", s(&input), "--p-grid", "0.5:1:0.5", "--allow-quasinorm", "--output", "-"]));
    assert_eq!(ok, "p,value,norm_kind\n0.5,4,pvar\n1,2,pvar\n");
}

#[test]
fn solve_with_zero_weights_is_constant() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "z.json", &vec![vec![0.0, 0.0]; 5]);
    let rows = csv_rows(&stdout(&roughnet(&["solve", "--input", s(&input), "--field", "tanh", "--x0", "0.3,-0.7", "--output", "-"])));
    assert_eq!(rows.len(), 5);
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r, &vec![k.to_string(), "0.3".into(), "-0.7".into()]);
    }
}

#[test]
fn solve_single_step_applies_one_update() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "one.json", &[vec![0.0, 0.0], vec![0.5, -1.0]]);
    let out = stdout(&roughnet(&["solve", "--input", s(&input), "--field", "tanh", "--x0", "0.2,-0.4", "--output", "-"]));
    let rows = csv_rows(&out);
    assert!(out.starts_with("k,x0,x1\n"));
    // Diagonal tanh layers: x1 = x0 + tanh(x0) * dw per channel.
    let expect = [0.2 + 0.2f64.tanh() * 0.5, -0.4 + -(-0.4f64).tanh()];
    for (v, e) in rows[1][1..].iter().zip(expect) {
        assert!((v.parse::<f64>().unwrap() - e).abs() < 1e-15);
    }
}

#[test]
fn solve_linear_with_explicit_matrices() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "l.json", &[vec![0.0], vec![2.0]]);
    let mats = dir.path().join("m.json");
    std::fs::write(&mats, "[[[0, 1], [-1, 0]]]").unwrap();
    let rows = csv_rows(&stdout(&roughnet(&[
        "solve", "--input", s(&input), "--field", "linear", "--matrices", s(&mats), "--x0", "1,0", "--output", "-",
    ])));
    assert_eq!(rows[1], vec!["1", "1", "-2"]);
    let out = roughnet(&["solve", "--input", s(&input), "--field", "tanh", "--matrices", s(&mats), "--x0", "1", "--output", "-"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_rejects_wrong_initial_dimension() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "w.json", &walk(4, 2, 1.0, 3));
    let out = roughnet(&["solve", "--input", s(&input), "--field", "tanh", "--x0", "1,2,3", "--output", "-"]);
    assert_eq!(out.status.code(), Some(2));
}

fn certificate(args: &[&str]) -> (Option<i32>, Value) {
    let out = roughnet(args);
    let doc = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code(), doc)
}

#[test]
fn certify_identical_inputs_observes_zero() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "w.json", &walk(10, 2, 0.01, 4));
    let (code, doc) = certificate(&["certify", "--input", s(&input), "--input2", s(&input), "--p", "1.5", "--field", "tanh", "--output", "-"]);
    assert_eq!(code, Some(0));
    assert_eq!(doc["observed"], json!(0.0));
    assert_eq!(doc["holds"], json!(true));
    let (code, doc) = certificate(&["certify", "--input", s(&input), "--p", "2.5", "--field", "tanh", "--perturb-x0", "0", "--output", "-"]);
    assert_eq!(code, Some(0));
    assert_eq!(doc["observed"], json!(0.0));
    assert_eq!(doc["regime"], json!("rough"));
}

#[test]
fn certify_small_perturbation_holds_with_finite_bound() {
    let dir = TempDir::new().unwrap();
    let a = walk(12, 2, 0.005, 5);
    let b: Vec<Vec<f64>> = a.iter().enumerate().map(|(k, r)| r.iter().map(|x| x + 1e-3 * (k as f64).sin()).collect()).collect();
    let (fa, fb) = (weight_file(&dir, "a.json", &a), weight_file(&dir, "b.json", &b));
    let (code, doc) = certificate(&[
        "certify", "--input", s(&fa), "--input2", s(&fb), "--p", "1.5", "--field", "tanh", "--x0", "0.5,-0.5", "--perturb-x0", "1e-3",
        "--output", "-",
    ]);
    assert_eq!(code, Some(0), "{doc}");
    assert_eq!(doc["holds"], json!(true));
    let bound = doc["bound_value"].as_f64().expect("finite bound");
    let observed = doc["observed"].as_f64().unwrap();
    assert!(observed > 0.0 && observed <= bound);
    assert_eq!(doc["regime"], json!("young"));
}

#[test]
fn certify_refuses_unsupported_regimes() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "w.json", &walk(6, 2, 0.1, 6));
    let out = dir.path().join("cert.json");
    for (p, field) in [("1.5", "relu"), ("3", "tanh"), ("0.9", "tanh")] {
        let r = roughnet(&["certify", "--input", s(&input), "--p", p, "--field", field, "--output", s(&out)]);
        assert_eq!(r.status.code(), Some(3), "p = {p}, field = {field}");
        assert!(!out.exists());
    }
    let other = weight_file(&dir, "short.json", &walk(4, 2, 0.1, 7));
    let r = roughnet(&["certify", "--input", s(&input), "--input2", s(&other), "--p", "1.5", "--field", "tanh", "--output", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn certify_writes_file_output() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "w.json", &walk(6, 1, 0.01, 8));
    let out = dir.path().join("cert.json");
    let r = roughnet(&["certify", "--input", s(&input), "--p", "1", "--field", "sigmoid", "--perturb-x0", "0.01", "--output", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["regime", "estimate", "bound_value", "observed", "holds", "hypothesis", "inputs", "constants"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().filter_map(|e| e.ok()).filter(|e| e.file_name().to_string_lossy().ends_with(".tmp")).collect();
    assert!(leftovers.is_empty());
}

#[test]
fn embed_matches_direct_recursion_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let steps = walk(8, 4, 0.3, 9);
    let theta: Vec<Value> = steps[1..].iter().map(|r| json!([[r[0], r[1]], [r[2], r[3]]])).collect();
    let theta_path = dir.path().join("theta.json");
    std::fs::write(&theta_path, Value::from(theta).to_string()).unwrap();
    let emitted = dir.path().join("embedded.json");
    let r = roughnet(&["embed", "--theta", s(&theta_path), "--y0", "0.4,-0.2", "--output", s(&emitted)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&emitted).unwrap()).unwrap();
    assert_eq!(doc["m"], json!(2));
    assert_eq!(doc["d"], json!(5));
    assert_eq!(doc["N"], json!(8));
    assert!(doc["meta"]["max_discrepancy"].as_f64().unwrap() <= 1e-12);

    // The emitted file feeds straight back into the other commands.
    assert_eq!(doc["meta"]["x0"].as_array().unwrap().len(), 7);
    let rows = csv_rows(&stdout(&roughnet(&["solve", "--input", s(&emitted), "--field", "tanh", "--x0", "0.4,-0.2", "--output", "-"])));
    assert_eq!(rows.len(), 9);
    stdout(&roughnet(&["pvar", "--input", s(&emitted), "--p-grid", "1:2:0.5", "--output", "-"]));
}

#[test]
fn embed_rejects_bad_theta() {
    let dir = TempDir::new().unwrap();
    let theta = dir.path().join("theta.json");
    std::fs::write(&theta, "[[[1, 0], [0, 1]], [[1, 0, 0], [0, 1, 0], [0, 0, 1]]]").unwrap();
    assert_eq!(roughnet(&["embed", "--theta", s(&theta), "--y0", "1,1", "--output", "-"]).status.code(), Some(2));
    std::fs::write(&theta, "[[[1, 0], [0, 1]]]").unwrap();
    assert_eq!(roughnet(&["embed", "--theta", s(&theta), "--y0", "1,1,1", "--output", "-"]).status.code(), Some(2));
    assert_eq!(roughnet(&["embed", "--theta", s(&theta), "--sigma", "relu", "--y0", "1,1", "--output", "-"]).status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "w.json", &walk(40, 3, 0.2, 10));
    for args in [
        vec!["pvar", "--input", s(&input), "--p-grid", "1:3:0.1", "--lifted", "--output", "-"],
        vec!["certify", "--input", s(&input), "--p", "2.2", "--field", "tanh", "--perturb-x0", "0.001", "--output", "-"],
    ] {
        let a = roughnet(&args);
        let b = roughnet(&args);
        assert_eq!(a.stdout, b.stdout);
        assert_eq!(a.status.code(), b.status.code());
    }
}

#[test]
fn failed_runs_leave_no_output_file() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "w.json", &walk(5, 1, 0.5, 11));
    let out = dir.path().join("curve.csv");
    let r = roughnet(&["pvar", "--input", s(&input), "--p-grid", "0.5:1:0.5", "--output", s(&out)]);
    assert_eq!(r.status.code(), Some(3));
    assert!(!out.exists());
    let r = roughnet(&["pvar", "--input", s(&input), "--p-grid", "1:2:0.5", "--output", s(&out)]);
    assert!(r.status.success());
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("p,value,norm_kind\n"));
}

fn parse_rows(text: &str) -> Vec<Vec<f64>> {
    csv_rows(text).iter().map(|r| r[1..].iter().map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn solve_matches_library_recursion() {
    use nalgebra::{DMatrix, DVector};
    use roughnet::cde::{solve, Activation, ActivationField, ActivationLayer};
    use roughnet::TimeSeries;

    let dir = TempDir::new().unwrap();
    let rows = walk(25, 3, 0.4, 12);
    let input = weight_file(&dir, "w.json", &rows);
    let x0 = [0.3, -1.1, 0.8];
    let out = stdout(&roughnet(&["solve", "--input", s(&input), "--field", "softplus", "--x0", "0.3,-1.1,0.8", "--output", "-"]));

    let layers = (0..3)
        .map(|mu| {
            let mut inner = DMatrix::zeros(1, 3);
            inner[(0, mu)] = 1.0;
            let mut outer = DMatrix::zeros(3, 1);
            outer[(mu, 0)] = 1.0;
            ActivationLayer::new(inner, DVector::zeros(1), outer).unwrap()
        })
        .collect();
    let field = ActivationField::new(Activation::Softplus { beta: 1.0 }, layers).unwrap();
    let w = TimeSeries::from_flat(3, rows.concat()).unwrap();
    let x = solve(&field, &w, &x0).unwrap();
    let cli = parse_rows(&out);
    assert_eq!(cli.len(), 26);
    for (k, row) in cli.iter().enumerate() {
        assert_eq!(row.as_slice(), x.point(k), "layer {k}");
    }
}

#[test]
fn solve_linear_with_zero_matrices_is_constant() {
    let dir = TempDir::new().unwrap();
    let input = weight_file(&dir, "w.json", &walk(6, 2, 1.0, 13));
    let mats = dir.path().join("zero.json");
    std::fs::write(&mats, "[[[0, 0], [0, 0]], [[0, 0], [0, 0]]]").unwrap();
    let rows = parse_rows(&stdout(&roughnet(&[
        "solve", "--input", s(&input), "--field", "linear", "--matrices", s(&mats), "--x0", "2,-3", "--output", "-",
    ])));
    assert!(rows.iter().all(|r| r == &vec![2.0, -3.0]));
}

#[test]
fn embed_emits_the_library_series() {
    use nalgebra::DMatrix;
    use roughnet::cde::{embed_resnet, tanh_matvec};

    let dir = TempDir::new().unwrap();
    let steps = walk(5, 9, 0.5, 14);
    let theta: Vec<DMatrix<f64>> = steps[1..].iter().map(|r| DMatrix::from_row_slice(3, 3, r)).collect();
    let json_theta: Vec<Value> = theta.iter().map(|a| json!((0..3).map(|i| (0..3).map(|j| a[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>())).collect();
    let theta_path = dir.path().join("theta.json");
    std::fs::write(&theta_path, Value::from(json_theta).to_string()).unwrap();
    let emitted = dir.path().join("e.json");
    let r = roughnet(&["embed", "--theta", s(&theta_path), "--y0", "1,0,-1", "--output", s(&emitted)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));

    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&emitted).unwrap()).unwrap();
    let e = embed_resnet(tanh_matvec(), &theta, &[1.0, 0.0, -1.0]).unwrap();
    let series: Vec<Vec<f64>> = serde_json::from_value(doc["series"].clone()).unwrap();
    assert_eq!(series.len(), e.w.horizon() + 1);
    for (k, row) in series.iter().enumerate() {
        assert_eq!(row.as_slice(), e.w.point(k));
        assert_eq!(row[9], k as f64);
    }
    let x0: Vec<f64> = serde_json::from_value(doc["meta"]["x0"].clone()).unwrap();
    assert_eq!(x0, e.x0);
}
