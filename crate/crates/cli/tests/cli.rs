use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const EXAMPLE1: &str = include_str!("../../core/fixtures/example1.ham");
const SIEGEL_MOSER: &str = include_str!("../../core/fixtures/siegel_moser.ham");

/// ½(x₁²+ξ₁²) + (x₂²+ξ₂²): both blocks elliptic with positive frequencies.
const DEFINITE: &str = "name definite\nn 2\nz0 0 0 0 0\nenergy 0\nsubprincipal 0\nfrequencies 1 2\nblocks e e\n\
2 0 0 0 0.5\n0 0 2 0 0.5\n0 2 0 0 1\n0 0 0 2 1\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_critrace"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_job(dir: &TempDir, job: &str) -> Output {
    let path = write(dir.path(), "job.job", job);
    bin().arg("run").arg(path).output().unwrap()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Every object with a `value` also carries a `method`; tagged payloads are not inspected.
fn tags_ok(v: &Value) -> bool {
    match v {
        Value::Object(m) => {
            if m.contains_key("method") {
                return true;
            }
            if m.contains_key("value") {
                return false;
            }
            m.values().all(tags_ok)
        }
        Value::Array(a) => a.iter().all(tags_ok),
        _ => true,
    }
}

#[test]
fn fixture_job_runs_the_full_pipeline() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "example1.ham", EXAMPLE1);
    let job = include_str!("../../core/fixtures/example1.job").replace("samples = 200000", "samples = 20000");
    let out = run_job(&dir, &job);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json_file(&dir.path().join("example1_report.json"));
    assert_eq!(r["pass"], true);
    assert_eq!(r["results"]["trace"]["exponent"]["fraction"], "-1/2");
    assert_eq!(r["results"]["trace"]["branch"], "Indefinite");
    assert_eq!(r["results"]["rk"]["k"], 4);
    assert_eq!(r["results"]["verify"]["pass"], true);
    let mass = r["results"]["cone"]["mass"]["value"]["re"].as_f64().unwrap();
    assert!((mass - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-9);
    assert!(tags_ok(&r));
}

#[test]
fn reports_are_byte_stable() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "h.ham", SIEGEL_MOSER);
    let job = "[input]\nhamiltonian = h.ham\n[tasks]\nrun = periods rk cone trace\n[cone]\nsamples = 30000\nseed = 11\n[output]\nreport = r.json\n";
    let a = run_job(&dir, job);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let first = std::fs::read(dir.path().join("r.json")).unwrap();
    let b = run_job(&dir, job);
    assert_eq!(code(&b), 0);
    assert_eq!(first, std::fs::read(dir.path().join("r.json")).unwrap());
}

#[test]
fn definite_form_with_indefinite_task_is_a_branch_error() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "d.ham", DEFINITE);
    let job = "[input]\nhamiltonian = d.ham\n[tasks]\nrun = theorem2\n[output]\nreport = r.json\n";
    let out = run_job(&dir, job);
    assert_eq!(code(&out), 1);
    let r = json_file(&dir.path().join("r.json"));
    let err = r["results"]["theorem2"]["error"].as_str().unwrap();
    assert!(err.contains("wrong branch"), "{err}");
    assert_eq!(r["pass"], false);
    // the definite branch accepts the same period
    let job = "[input]\nhamiltonian = d.ham\n[tasks]\nrun = theorem1\n[output]\nreport = r.json\n";
    assert_eq!(code(&run_job(&dir, job)), 0);
    let r = json_file(&dir.path().join("r.json"));
    assert_eq!(r["results"]["theorem1"]["branch"], "Definite");
}

#[test]
fn empty_task_list_gives_empty_report() {
    let dir = TempDir::new().unwrap();
    let out = run_job(&dir, "[tasks]\nrun =\n[output]\nreport = r.json\n");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = json_file(&dir.path().join("r.json"));
    assert_eq!(r["results"].as_object().unwrap().len(), 0);
    assert_eq!(r["tasks"].as_array().unwrap().len(), 0);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "h.ham", EXAMPLE1);
    for job in [
        "[input]\nhamiltonian = missing.ham\n[tasks]\nrun = verify\n",
        "[input]\nhamiltonian = h.ham\nsamples = 3\n",
        "[tasks]\nrun = verify teleport\n",
        "[input]\nhamiltonian = h.ham\n[tasks]\nrun = spectral\n[spectral]\nh_grid = 0.01 0.02\n",
        "[input]\nhamiltonian = h.ham\n[tolerances]\ntol = -1\n",
    ] {
        let out = run_job(&dir, job);
        assert_eq!(code(&out), 2, "job {job:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let bad = write(dir.path(), "bad.ham", "name bad\nn 2\n");
    assert_eq!(code(&bin().arg("verify").arg(bad).output().unwrap()), 2);
    let out = bin().args(["spectral", "--h-grid", "0.01,0.02"]).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn spectral_emits_csv_with_fit() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("g.csv");
    let out = bin().args(["spectral", "--h-grid", "0.02,0.015,0.01", "--out"]).arg(&csv).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "h,re_gamma,im_gamma,abs_gamma");
    assert_eq!(lines.len(), 5);
    for l in &lines[1..4] {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1].hypot(v[2]) - v[3]).abs() <= 1e-12 * v[3]);
    }
    assert!(lines[4].starts_with("# fit exponent="));
}

#[test]
fn subcommands_emit_json() {
    let dir = TempDir::new().unwrap();
    let h = write(dir.path(), "h.ham", EXAMPLE1);
    let sm = write(dir.path(), "sm.ham", SIEGEL_MOSER);
    let json = |args: &[&str], file: &Path| -> Value {
        let out = bin().arg(args[0]).arg(file).args(&args[1..]).output().unwrap();
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let p = json(&["periods", "--t-max", "7"], &sm);
    let ts: Vec<f64> = p["periods"].as_array().unwrap().iter().map(|r| r["value"]["t"].as_f64().unwrap()).collect();
    assert_eq!(ts.len(), 2);
    assert!((ts[0] - std::f64::consts::PI).abs() < 1e-12);
    let m = json(&["monodromy", "--t", "100"], &h);
    assert!(m["symplectic_defect"]["value"].as_f64().unwrap() < 1e-12);
    let j = json(&["jet", "--order", "3", "--t", "1"], &h);
    assert_eq!(j["components"]["value"].as_array().unwrap().len(), 4);
    let r = json(&["rk"], &sm);
    assert_eq!(r["k"], 3);
    assert_eq!(r["pass"], true);
    let c = json(&["charts"], &sm);
    assert!(c["charts"].as_array().unwrap().iter().all(|x| x["pass"] == true));
    let t = json(&["trace", "--samples", "20000"], &sm);
    assert_eq!(t["exponent"]["fraction"], "-1/3");
    assert!(tags_ok(&t));
    let v = json(&["verify"], &h);
    assert_eq!(v["pass"], true);
}

#[test]
fn resonance_and_osc() {
    let out = bin().args(["resonance", "--w", "1,-2", "--order", "3"]).output().unwrap();
    assert_eq!(code(&out), 0);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["pseudo_resonant"], true);
    assert!(!r["resonances"].as_array().unwrap().is_empty());
    let out = bin().args(["osc", "quad", "--k", "3", "--points", "4"]).output().unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 5);
    let out = bin().args(["osc", "fit", "--k", "4"]).output().unwrap();
    let f: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((f["exponent"]["value"].as_f64().unwrap() + 0.25).abs() < 0.0025);
    assert!(f["coefficient_rel_error"].as_f64().unwrap() < 0.02);
}

#[test]
fn cone_dump_and_sample_flag() {
    let dir = TempDir::new().unwrap();
    let h = write(dir.path(), "h.ham", EXAMPLE1);
    let dump = dir.path().join("s.csv");
    let out = bin().arg("cone").arg(&h).args(["--samples", "400", "--dump"]).arg(&dump).output().unwrap();
    assert_eq!(code(&out), 0);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["n_drawn"], 400);
    let text = std::fs::read_to_string(&dump).unwrap();
    assert_eq!(text.lines().next().unwrap(), "theta1,theta2,theta3,theta4,weight,r");
    assert_eq!(text.lines().count(), 401);
}
