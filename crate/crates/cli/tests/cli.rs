use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_latticebolt"));
    c.env_remove("LATTICEBOLT_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stdout:\n{}\nstderr:\n{}", stdout(o), stderr(o));
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/jitter_11_71hz.csv")
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn cavity_echoes_the_derived_relaxation_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&[
        "cavity", "--re", "100", "--size", "64", "--lid-speed", "0.1", "--iters", "1", "--tolerance", "none", "--out",
        out.to_str().unwrap(),
    ]);
    ok(&o);
    assert!(stdout(&o).contains("tau = 0.692,"), "{}", stdout(&o));
    assert_eq!(data_rows(&out.join("ux_along_z.csv")), 64);
    assert_eq!(data_rows(&out.join("uz_along_x.csv")), 64);

    let m = manifest(&out);
    for key in ["config", "toolVersion", "hostDescription", "timestampUTC", "outputs"] {
        assert!(m.get(key).is_some(), "manifest lacks {key}");
    }
    let outputs: Vec<PathBuf> = m["outputs"].as_array().unwrap().iter().map(|v| PathBuf::from(v.as_str().unwrap())).collect();
    for name in ["ux_along_z.csv", "uz_along_x.csv", "summary.json"] {
        assert!(outputs.contains(&out.join(name)), "{name} not listed");
    }
    assert!(outputs.iter().all(|p| p.starts_with(&out) && p.exists()));
    assert_eq!(m["config"]["sim"]["dims"]["nx"], 64);
    assert!(m["timestampUTC"].as_str().unwrap().ends_with('Z'));
}

#[test]
fn cavity_rejects_tau_below_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["cavity", "--re", "100", "--size", "64", "--tau", "0.4", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("tau = 0.4"), "{}", stderr(&o));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn smallest_domain_is_all_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["cavity", "--size", "2", "--iters", "10", "--out", dir.path().to_str().unwrap()]);
    ok(&o);
    assert!(stdout(&o).contains("all-boundary domain"));
    assert_eq!(data_rows(&dir.path().join("ux_along_z.csv")), 2);
}

#[test]
fn divergence_exits_nonzero_naming_the_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("unstable.cfg");
    std::fs::write(&cfg, "# deliberately unstable\ntau = 0.5001\nlid_speed = 0.5\nsize = 12\niters = 2000\n").unwrap();
    let o = run(&["cavity", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("diverged at step"), "{}", stderr(&o));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "size = 6\nre = 10\nlid-speed = 0.05\niters = 5\nordering = push\n").unwrap();
    let o = run(&["cavity", "--config", cfg.to_str().unwrap(), "--size", "8", "--out", dir.path().join("o").to_str().unwrap()]);
    ok(&o);
    let s = stdout(&o);
    assert!(s.contains("domain 8x8x8, Re = 10,"), "{s}");
    assert!(s.contains("lid speed = 0.05"), "{s}");
    assert!(s.contains("ordering push"), "{s}");

    // a scaling input on the command line replaces the other one from the file
    let o = run(&["cavity", "--config", cfg.to_str().unwrap(), "--tau", "0.8", "--out", dir.path().join("p").to_str().unwrap()]);
    ok(&o);
    assert!(stdout(&o).contains("tau = 0.8,"), "{}", stdout(&o));

    std::fs::write(&cfg, "sise = 6\n").unwrap();
    let o = run(&["cavity", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("q").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

#[test]
fn written_profile_reingests_identically() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let args = ["cavity", "--size", "10", "--iters", "200", "--tolerance", "none", "--out"];
    let mut a = args.to_vec();
    a.push(first.to_str().unwrap());
    ok(&run(&a));
    let reference = first.join("ux_along_z.csv");
    let second = dir.path().join("second");
    let mut b = args.to_vec();
    b.extend([second.to_str().unwrap(), "--reference", reference.to_str().unwrap()]);
    let o = run(&b);
    ok(&o);
    assert!(stdout(&o).contains("max |deviation|"), "{}", stdout(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(second.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reference"]["maxDeviation"], 0.0);
    assert_eq!(std::fs::read(&reference).unwrap(), std::fs::read(second.join("ux_along_z.csv")).unwrap());
}

#[test]
fn bench_sweep_is_a_cross_product() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let o = run(&[
        "bench", "--sizes", "8,10,12", "--strategies", "direct,tile,lane", "--iters", "10", "--warmup", "0",
        "--workers", "1", "--check-equivalence", "--out", out.to_str().unwrap(),
    ]);
    ok(&o);
    assert_eq!(data_rows(&out.join("bench.csv")), 9);
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(out.join("bench.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 9);
    for r in &lines {
        let secs: Vec<f64> = r["per_iteration_seconds"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(secs.len(), 10);
        let nx = r["domain"]["nx"].as_u64().unwrap() as f64;
        let mean = secs.iter().map(|s| nx * nx * nx / s / 1e6).sum::<f64>() / 10.0;
        let reported = r["mlups_mean"].as_f64().unwrap();
        assert!(((mean - reported) / reported).abs() < 1e-3);
    }
    let s = stdout(&o);
    assert_eq!(s.matches("bit-identical").count(), 3, "{s}");
    assert!(s.contains("MLUPS mean over sigma"));
    assert_eq!(manifest(&out)["outputs"].as_array().unwrap().len(), 2 + 9);
}

#[test]
fn bench_needs_ten_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bench", "--iters", "5", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("at least 10"), "{}", stderr(&o));
}

#[test]
fn worker_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("LATTICEBOLT_WORKERS", "2")
        .args(["cavity", "--size", "6", "--iters", "5", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    ok(&o);
    assert!(stdout(&o).contains("2 worker(s)"), "{}", stdout(&o));
    let o = bin()
        .env("LATTICEBOLT_WORKERS", "lots")
        .args(["cavity", "--size", "6", "--iters", "5", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!o.status.success());
}

#[test]
fn membench_reports_bandwidth_and_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "membench", "--pattern", "offsetRead", "--vectors", "19", "--vector-bytes", "65536", "--allow-cache-resident",
        "--out", dir.path().to_str().unwrap(),
    ]);
    ok(&o);
    let text = std::fs::read_to_string(dir.path().join("membench.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("pattern,bytes,seconds,bandwidth,ratio"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "alignedRead");
    assert_eq!(rows[1][0], "offsetRead");
    assert_eq!(rows[0][4], "1");
    let bw = |r: &Vec<&str>| r[3].parse::<f64>().unwrap();
    let ratio: f64 = rows[1][4].parse().unwrap();
    assert!((ratio - bw(&rows[1]) / bw(&rows[0])).abs() < 1e-12);
    assert_eq!(rows[1][1], (2 * (65536 / 4 - 1) * 4 * 19).to_string());
}

#[test]
fn spectrum_finds_the_fixture_tone() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "--input", fixture().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    ok(&o);
    let s = stdout(&o);
    let after = |key: &str| -> f64 { s.split(key).nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap() };
    let peak = after("peak frequency ");
    let bin = after("bin width ");
    assert!((peak - 11.71).abs() <= bin, "{s}");
    assert!(data_rows(&dir.path().join("spectrum.csv")) == 1025);
}

#[test]
fn spectrum_of_a_constant_series() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.csv");
    let body: String = (0..128).map(|k| format!("{k},0.004\n")).collect();
    std::fs::write(&input, format!("iteration,seconds\n{body}")).unwrap();
    let o = run(&["spectrum", "--input", input.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    ok(&o);
    assert!(stdout(&o).contains("no periodic component"));
}

#[test]
fn malformed_series_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "iteration,seconds\n0,0.004\n1,0.004\n2,fast\n").unwrap();
    let o = run(&["spectrum", "--input", input.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bad.csv:4:"), "{}", stderr(&o));

    let short = dir.path().join("short.csv");
    std::fs::write(&short, "iteration,seconds\n0,0.004\n1,0.005\n").unwrap();
    let o = run(&["spectrum", "--input", short.to_str().unwrap(), "--out", dir.path().join("p").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("at least 64"), "{}", stderr(&o));
}
