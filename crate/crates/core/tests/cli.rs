use std::process::Command;

fn apsim(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_apsim")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn sweep_matches_golden_csv() {
    let (code, out, err) = apsim(&["sweep", "--axis", "model=alexnet", "--axis", "hw=ir,lr", "--axis", "precision=4,8"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, golden("alexnet_sweep.csv"));
}

#[test]
fn mixed_matches_golden_table() {
    let (code, out, _) = apsim(&["mixed"]);
    assert_eq!(code, 0);
    assert_eq!(out, golden("resnet18_mixed.csv"));
}

#[test]
fn peak_matches_golden_table() {
    let (code, out, _) = apsim(&["peak"]);
    assert_eq!(code, 0);
    assert_eq!(out, golden("peak.csv"));
}

#[test]
fn run_prints_json_report() {
    let (code, out, _) = apsim(&["run", "--model", "alexnet", "--precision", "fixed:4", "--hw", "ir", "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["model"], "alexnet");
    assert_eq!(v["precision"], "fixed:4");
    let (e, l, edp) = (v["energy_j"].as_f64().unwrap(), v["latency_s"].as_f64().unwrap(), v["edp_js"].as_f64().unwrap());
    assert!((edp - e * l).abs() <= 1e-12 * edp);
}

#[test]
fn run_accepts_model_and_voltage() {
    let model = format!("{}/data/models/vgg16.txt", env!("CARGO_MANIFEST_DIR"));
    let (code, out, err) = apsim(&["run", "--model", &model, "--tech", "sram16nm", "--voltage", "0.5"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("model      vgg16 (lr, sram16nm"), "{out}");
}

#[test]
fn sweep_writes_json_to_a_file() {
    let path = std::env::temp_dir().join(format!("apsim-sweep-{}.json", std::process::id()));
    let p = path.to_str().unwrap();
    let (code, _, err) = apsim(&["sweep", "--axis", "model=alexnet", "--axis", "voltage=1.0,0.5", "--format", "json", "--out", p]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn emulate_checks_every_op() {
    for op in ["add", "multiply", "reduce", "matmat", "relu", "maxpool", "avgpool"] {
        for variant in ["1d", "2d", "2dseg"] {
            let (code, out, err) = apsim(&["emulate", "--op", op, "--m", "5", "--variant", variant, "--seed", "3", "--trials", "4"]);
            assert_eq!(code, 0, "{op} {variant}: {out}{err}");
            assert_eq!(out.lines().count(), 4);
            assert!(out.lines().all(|l| l.contains("values ok")), "{out}");
        }
    }
}

#[test]
fn bad_arguments_fail() {
    assert_ne!(apsim(&["run", "--model", "lenet"]).0, 0);
    assert_ne!(apsim(&["peak", "--bits", "17"]).0, 0);
    assert_ne!(apsim(&["sweep", "--axis", "colour=red"]).0, 0);
    assert_ne!(apsim(&["emulate", "--op", "maxpool", "--s", "3"]).0, 0);
    assert_ne!(apsim(&["mixed", "--model", "alexnet"]).0, 0);
}
