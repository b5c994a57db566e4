use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_halfline"));
    c.env("HALFLINE_THREADS", "1");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    bin().args([cmd, "--config"]).arg(config).arg("--out").arg(out).output().unwrap()
}

fn category(o: &Output) -> String {
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().last().unwrap_or_default();
    let v: serde_json::Value = serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not JSON: {err}"));
    v["category"].as_str().unwrap().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn malformed_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.toml", "[problem.potential\nshape = \"zero\""),
        ("unknown.toml", "[problem.potential]\nshape = \"zero\"\ncolour = 3\n[problem.boundary]\ndirichlet = 1\n"),
        ("guard.toml", "[problem.potential]\nshape = \"zero\"\n[problem.boundary]\ndirichlet = 1\n[grids]\nk_max = 80.0\n"),
        ("times.toml", "[problem.potential]\nshape = \"zero\"\n[problem.boundary]\ndirichlet = 1\n[evolution]\na = 3.0\nt_end = 1.0\n"),
        ("angle.toml", "[problem.potential]\nshape = \"zero\"\n[problem.boundary]\ntheta = [4.0]\n"),
        ("literal.toml", "[problem.potential]\nshape = \"zero\"\n[problem.boundary]\nA = [[\"1+2j\"]]\nB = [[0]]\n"),
    ];
    for (name, text) in cases {
        let cfg = write(dir.path(), name, text);
        let o = run("scatter", &cfg, &dir.path().join("out"));
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(category(&o), "config", "{name}");
    }
    let o = run("scatter", &dir.path().join("missing.toml"), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn free_dirichlet_scatter_is_minus_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("scatter", &configs().join("free-dirichlet.toml"), dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("scattering.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,re_s11,im_s11,unitarity_defect"));
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!(v[0] >= 1e-3 - 1e-12 && v[0] <= 30.0 + 1e-9);
        assert!((v[1] + 1.0).abs() < 1e-8 && v[2].abs() < 1e-8, "k = {}", v[0]);
        rows += 1;
    }
    assert_eq!(rows, 30000);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("scatter.json")).unwrap()).unwrap();
    assert_eq!(report["classification"], "generic");
    assert_eq!(report["bound_state_kappas"].as_array().unwrap().len(), 0);
}

#[test]
fn bound_states_stop_evolution_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("deep-well.toml");
    let o = run("scatter", &cfg, dir.path());
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("scatter.json")).unwrap()).unwrap();
    assert_eq!(report["bound_state_kappas"].as_array().unwrap().len(), 1);
    let o = run("evolve", &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(category(&o), "numerical");
}

#[test]
fn evolve_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "small.toml",
        "[problem.potential]\nbundled = \"barrier\"\n[problem.boundary]\ntheta = [2.0]\n\
         [problem.nonlinearity]\nalpha = 3.0\n[problem.initial]\namplitude = 0.2\n\
         [grids]\nx_max = 20.0\ndx = 0.1\nk_max = 5.0\ndk = 0.02\n\
         [evolution]\ndt = 0.02\nt_end = 1.0\na = 0.25\nsamples_per_octave = 2\n",
    );
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = bin().env("HALFLINE_THREADS", threads).args(["evolve", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(out.join("trajectory.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.pop().unwrap()).unwrap();
    assert!(text.starts_with("t,x,re_u1,im_u1\n"));
    // 17 significant digits in every cell
    let cell = text.lines().nth(1).unwrap().split(',').nth(2).unwrap();
    let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["selftest", "--out"]).arg(dir.path()).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
    assert!(dir.path().join("selftest.json").exists());
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = bin().env("HALFLINE_THREADS", "zero").args(["selftest"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
