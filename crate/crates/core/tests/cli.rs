use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fockcascade"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn assert_golden(args: &[&str], name: &str) {
    let o = run(args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), golden(name), "golden {name}");
}

#[test]
fn simulate_goldens() {
    let id = data("identity.json");
    assert_golden(&["simulate", id.to_str().unwrap()], "simulate_identity.json");
    let hom = data("hom.json");
    assert_golden(&["simulate", hom.to_str().unwrap()], "simulate_hom.json");
}

#[test]
fn identity_simulation_echoes_input() {
    let report: serde_json::Value =
        serde_json::from_str(&stdout(&run(&["simulate", data("identity.json").to_str().unwrap()])))
            .unwrap();
    let input: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data("identity.json")).unwrap()).unwrap();
    assert_eq!(report["outputs"][0]["terms"], input["states"][0]["terms"]);
}

#[test]
fn condition_goldens() {
    let hom = data("hom.json");
    for n in 0..=2 {
        let ns = n.to_string();
        assert_golden(
            &["condition", hom.to_str().unwrap(), "--n", &ns],
            &format!("condition_hom_n{n}.json"),
        );
    }
    let o = run(&["condition", hom.to_str().unwrap(), "--mode", "1", "--n", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("on c2"));
}

#[test]
fn check_goldens() {
    for name in ["disjoint", "plus_minus_identity", "plus_minus_splitter"] {
        let path = data(&format!("{name}.json"));
        assert_golden(&["check", path.to_str().unwrap()], &format!("check_{name}.json"));
    }
    let o = run(&["check", data("plus_minus_identity.json").to_str().unwrap()]);
    assert!(stderr(&o).starts_with("FAIL"));
    let o = run(&["check", data("with_aux.json").to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["probe"][0]["implication_ok"], true);
    assert_eq!(v["probe"][0]["bound_ok"], true);
}

#[test]
fn schema_errors_exit_2() {
    for name in ["malformed.json", "unknown_field.json"] {
        let o = run(&["simulate", data(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(stdout(&o).is_empty());
    }
    let o = run(&["simulate", "/nonexistent/instance.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_unitary_exits_3_with_magnitude() {
    let o = run(&["simulate", data("non_unitary.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("not unitary"), "{err}");
    // |U†U - I| = 1 for [[1,1],[1,1]]/√2.
    assert!(err.contains("1e0") || err.contains("1.0000000000000002e0"), "{err}");
    // A loose tolerance accepts the same matrix.
    let o = run(&["--tolerance", "2", "simulate", data("non_unitary.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn caps_exit_4() {
    let o = run(&["simulate", data("over_cap.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["--photon-cap", "40", "simulate", data("over_cap.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["verify-nogo", "--max-system-modes", "7"]);
    assert_eq!(o.status.code(), Some(4));
    let o = run(&["oracle-check", "--max-photons", "9"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn verify_nogo_default_and_failure_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&["--seed", "3", "--out", out.to_str().unwrap(), "verify-nogo", "--count", "40"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let err = stderr(&o);
    assert!(err.starts_with("PASS: instances=40 failed=0 max_residual="), "{err}");
    assert!(err.contains("max_det_deviation="));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["schema"], "fockcascade-report/1");
    assert_eq!(report["reports"].as_array().unwrap().len(), 40);
    assert_eq!(report["reports"][7]["instance"]["index"], 7);
    assert_eq!(report["reports"][0]["seed"], 3);

    let o = run(&["verify-nogo", "--count", "10", "--no-aux"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["summary"]["max_residual_ratio"].as_f64().unwrap() < 1e-14);

    let o = run(&["verify-nogo", "--count", "10", "--corrupt-m-prime"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("FAIL"));
}

#[test]
fn reports_are_deterministic() {
    let a = run(&["--seed", "9", "verify-nogo", "--count", "25"]);
    let b = run(&["--seed", "9", "verify-nogo", "--count", "25"]);
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["--seed", "10", "verify-nogo", "--count", "25"]);
    assert_ne!(a.stdout, c.stdout);
    let a = run(&["--seed", "4", "oracle-check", "--count", "20"]);
    let b = run(&["--seed", "4", "oracle-check", "--count", "20"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn replayed_instance_reproduces_report() {
    // The instance description in a batch report is enough to rerun it.
    let o = run(&["--seed", "5", "verify-nogo", "--count", "3"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let entry = &v["reports"][2];
    let inst = &entry["instance"];
    let registry = fockcascade::ModeRegistry::new(
        inst["modes"].as_array().unwrap().iter().map(|m| m.as_str().unwrap().to_string()),
    )
    .unwrap();
    let read = |j: &serde_json::Value| {
        let p: fockcascade::poly::PolynomialJson = serde_json::from_value(j.clone()).unwrap();
        fockcascade::CreationPolynomial::from_json_on(&p, &registry).unwrap()
    };
    let aux = read(&inst["aux"]);
    let states: Vec<_> = inst["states"].as_array().unwrap().iter().map(read).collect();
    let spec: fockcascade::network::NetworkSpec =
        serde_json::from_value(inst["network"].clone()).unwrap();
    let net = spec.build(&registry).unwrap();
    let c = registry.mode(inst["measure"].as_str().unwrap()).unwrap();
    let report = fockcascade::nogo::verify_no_go(
        &aux,
        &states,
        &net,
        c,
        &fockcascade::nogo::VerifyOptions::default(),
    );
    match report {
        Ok(r) => assert_eq!(
            serde_json::to_value(r.to_json()).unwrap(),
            entry["report"],
        ),
        Err(e) => panic!("{e}"),
    }
}
