use std::path::Path;
use std::process::{Command, Output};

fn risee(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risee")).args(args).output().unwrap()
}

fn default_config(dir: &Path) -> String {
    let out = risee(&["schema"]);
    assert!(out.status.success());
    let path = dir.join("scenario.toml");
    std::fs::write(&path, &out.stdout).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_run(cfg: &str, out: &Path, workers: &str) -> Output {
    risee(&[
        "run",
        "--config",
        cfg,
        "--set",
        "system.n_antennas=3",
        "--set",
        "system.n_elements=3",
        "--set",
        "system.n_users=2",
        "--set",
        "system.n_eves=2",
        "--sweep",
        "system.p_max_dbm=-5,5",
        "--schemes",
        "proposed,rps",
        "--trials",
        "2",
        "--seed",
        "17",
        "--workers",
        workers,
        "--no-timing",
        "--out",
        out.to_str().unwrap(),
    ])
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn missing_config_is_an_error() {
    let out = risee(&["run", "--config", "/definitely/not/here.toml", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not/here.toml"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = risee(&["run", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_override_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_config(dir.path());
    let out = risee(&["echo-config", "--config", &cfg, "--set", "system.n_antenas=3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_antenas"));
}

#[test]
fn override_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    std::fs::write(&cfg, "[system]\np_max_dbm = 7.0\nn_users = 3\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let echo = |extra: &[&str]| {
        let mut args = vec!["echo-config", "--config", cfg];
        args.extend_from_slice(extra);
        let out = risee(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        toml::from_str::<toml::Table>(&String::from_utf8(out.stdout).unwrap()).unwrap()
    };
    let get = |t: &toml::Table, k: &str| t["system"][k].clone();

    let file = echo(&[]);
    assert_eq!(get(&file, "p_max_dbm").as_float(), Some(7.0));
    assert_eq!(get(&file, "n_users").as_integer(), Some(3));

    // The preset pins the user count over the file.
    let preset = echo(&["--experiment", "fig7b"]);
    assert_eq!(get(&preset, "n_users").as_integer(), Some(1));

    let set = echo(&["--experiment", "fig7b", "--set", "system.n_users=2", "--set", "system.p_max_dbm=1"]);
    assert_eq!(get(&set, "n_users").as_integer(), Some(2));
    assert_eq!(get(&set, "p_max_dbm").as_float(), Some(1.0));

    let flag = echo(&["--set", "system.p_max_dbm=1", "--p-max-dbm", "-3", "--trials", "9"]);
    assert_eq!(get(&flag, "p_max_dbm").as_float(), Some(-3.0));
    assert_eq!(flag["run"]["trials"].as_integer(), Some(9));
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(small_run(&cfg, &a, "1").status.success());
    assert!(small_run(&cfg, &b, "4").status.success());
    for f in ["results.csv", "traces.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    let results = String::from_utf8(read(&a, "results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2);
}

#[test]
fn manifest_rerun_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_config(dir.path());
    let first = dir.path().join("first");
    assert!(small_run(&cfg, &first, "2").status.success());
    let again = dir.path().join("again");
    let out = risee(&[
        "rerun",
        "--manifest",
        first.join("manifest.toml").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.csv", "traces.csv", "manifest.toml"] {
        assert_eq!(read(&first, f), read(&again, f), "{f}");
    }
}

#[test]
fn edited_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_config(dir.path());
    let first = dir.path().join("first");
    assert!(small_run(&cfg, &first, "1").status.success());
    let path = first.join("manifest.toml");
    let text = std::fs::read_to_string(&path).unwrap().replace("rng_seed = 17", "rng_seed = 18");
    std::fs::write(&path, text).unwrap();
    let out = risee(&["rerun", "--manifest", path.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outage_preset_compares_four_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_config(dir.path());
    let out_dir = dir.path().join("fig7a");
    let out = risee(&[
        "run",
        "--config",
        &cfg,
        "--experiment",
        "fig7a",
        "--set",
        "system.n_antennas=3",
        "--set",
        "system.n_elements=3",
        "--sweep",
        "system.sop_bound=0.2,0.6",
        "--trials",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(out_dir.join("results.csv")).unwrap();
    let schemes: Vec<String> = rdr.records().map(|r| r.unwrap()[2].to_string()).collect();
    assert_eq!(schemes.len(), 8);
    for s in ["proposed", "fps", "rps", "ignore-uncertainty"] {
        assert_eq!(schemes.iter().filter(|x| *x == s).count(), 2, "{s}");
    }
}
