use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rentpipe"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rentpipe-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const CUSTOM: &str = r#"{
  "variants": ["RV64F", "Baseline", "RV64R"],
  "layers": [
    { "name": "tiny", "spec": { "M": 2, "C": 2, "H_in": 5, "W_in": 5, "H_fil": 3, "W_fil": 3, "S": 1 } }
  ],
  "memory": { "latency_cycles": 80, "size_bytes": 16777216 }
}"#;

#[test]
fn asm_then_disasm_roundtrips() {
    let src = scratch("prog.s");
    let img = scratch("prog.bin");
    fs::write(&src, "fmul.s f15, f13, f15\nrfmac.s f1, f2\nrfsmac.s f3\nebreak\n").unwrap();
    ok(bin().arg("asm").arg(&src).arg("-o").arg(&img).output().unwrap());
    let text = ok(bin().arg("disasm").arg(&img).output().unwrap());
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    assert_eq!(
        lines,
        ["fmul.s fa5, fa3, fa5", "rfmac.s ft1, ft2", "rfsmac.s ft3", "ebreak"]
    );
    let bytes = fs::read(&img).unwrap();
    assert_eq!(&bytes[16..20], &0x10F6_F7D3u32.to_le_bytes());
}

#[test]
fn registry_export_is_json() {
    let text = ok(bin().args(["registry", "--export"]).output().unwrap());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let rows = v.as_array().expect("array of encodings");
    let rfmac = rows
        .iter()
        .find(|r| r["mnemonic"] == "rfmac.s")
        .expect("rfmac.s row");
    assert_eq!(rfmac["match"], "0x68000053");
    assert_eq!(rfmac["mask"], "0xfe00007f");
}

#[test]
fn run_custom_layer_as_json() {
    let cfg = scratch("custom.json");
    fs::write(&cfg, CUSTOM).unwrap();
    let text = ok(bin()
        .args(["run", "--format", "json", "--config"])
        .arg(&cfg)
        .output()
        .unwrap());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let suite = &v["suites"][0];
    assert_eq!(suite["name"], "custom");
    assert_eq!(suite["totals"].as_array().unwrap().len(), 3);
}

#[test]
fn run_overrides_variant_and_writes_file() {
    let cfg = scratch("custom2.json");
    let out = scratch("report.csv");
    fs::write(&cfg, CUSTOM).unwrap();
    ok(bin()
        .args(["run", "--variant", "rv64r", "--format", "csv", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("suite,layer,variant,metric,value"));
    assert!(csv.contains("RV64R"));
    assert!(!csv.contains("RV64F"));
}

#[test]
fn bad_config_fails() {
    let cfg = scratch("bad.json");
    fs::write(&cfg, r#"{ "variants": ["RV64R"], "bogus": 1 }"#).unwrap();
    let out = bin().arg("run").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn generated_kernel_assembles_and_runs() {
    let src = scratch("k.s");
    let img = scratch("k.bin");
    ok(bin()
        .args(["gen", "--variant", "rv64r", "--spec", "1,1,3,3,2,2,1", "-o"])
        .arg(&src)
        .output()
        .unwrap());
    let text = fs::read_to_string(&src).unwrap();
    assert_eq!(text.matches("rfmac.s").count(), 1);
    ok(bin().arg("asm").arg(&src).arg("-o").arg(&img).output().unwrap());
    // No data segments: the kernel reads zeroed memory, which is fine for timing.
    let stats = ok(bin().arg("exec").arg(&img).output().unwrap());
    assert!(stats.contains("rfmac.s=16"), "{stats}");
    assert!(stats.contains("rfsmac.s=4"), "{stats}");
}

#[test]
fn layers_export() {
    let text = ok(bin().args(["layers", "lenet"]).output().unwrap());
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(text.contains("C1"), "{v}");
}
