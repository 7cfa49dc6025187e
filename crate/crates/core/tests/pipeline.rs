use risee::channel::{generate_trial_at, read_channels, save_channels};
use risee::config::{RawConfig, SopBound};
use risee::orchestrator::{run_scheme, solve_p2, SchemeKind, SolveReport};
use risee::types::{MODULUS_TOL, POWER_TOL};
use risee::SystemConfig;

fn small(k: usize, j: usize) -> SystemConfig {
    let mut raw = RawConfig::default();
    raw.system.n_antennas = 4;
    raw.system.n_elements = 5;
    raw.system.n_users = k;
    raw.system.n_eves = j;
    raw.validate().unwrap()
}

fn fingerprint(r: &SolveReport) -> (Vec<u64>, Vec<u64>, (usize, usize), u64) {
    let bits = |v: &risee::CVector| v.iter().flat_map(|c| [c.re.to_bits(), c.im.to_bits()]).collect::<Vec<_>>();
    (bits(&r.w.w), bits(&r.theta.v), r.selected, r.min_objective.to_bits())
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = small(3, 3);
    let cs = generate_trial_at(&cfg, 11, 0).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| solve_p2(&cfg, &cs).unwrap())
    };
    let (a, b) = (run(1), run(8));
    assert_eq!(fingerprint(&a), fingerprint(&b));
    for (x, y) in a.subproblems.iter().zip(&b.subproblems) {
        assert_eq!(x.trace, y.trace);
    }
}

#[test]
fn every_scheme_is_feasible() {
    let cfg = small(2, 2);
    for t in 0..4 {
        let cs = generate_trial_at(&cfg, 5, t).unwrap();
        for kind in [
            SchemeKind::Proposed,
            SchemeKind::Rps,
            SchemeKind::Fps,
            SchemeKind::IgnoreUncertainty,
            SchemeKind::Quantized(4),
        ] {
            let rep = run_scheme(kind, &cfg, &cs).unwrap();
            assert!(rep.w.norm_sq() <= cfg.p_max * (1.0 + POWER_TOL), "{kind}");
            assert!(rep.theta.max_modulus_error() <= MODULUS_TOL, "{kind}");
            assert!(rep.min_objective >= 0.0);
            assert!(rep.achieved.ee_per_hz <= rep.min_objective * (1.0 + 1e-6) + 1e-300, "{kind}");
        }
    }
}

#[test]
fn fixed_phases_stay_identity() {
    let cfg = small(1, 1);
    let cs = generate_trial_at(&cfg, 3, 1).unwrap();
    let rep = run_scheme(SchemeKind::Fps, &cfg, &cs).unwrap();
    assert!(rep.theta.reflection_phases().iter().all(|&t| t == 0.0));
    assert!(rep.subproblems.iter().all(|s| s.am_rounds() <= 1));
}

#[test]
fn quantized_phases_on_grid() {
    let cfg = small(2, 1);
    let cs = generate_trial_at(&cfg, 9, 2).unwrap();
    let rep = run_scheme(SchemeKind::Quantized(4), &cfg, &cs).unwrap();
    for t in rep.theta.reflection_phases() {
        let q = t / std::f64::consts::FRAC_PI_2;
        assert!((q - q.round()).abs() < 1e-9, "{t}");
    }
}

#[test]
fn proposed_beats_its_own_start() {
    // The proposed scheme starts from the fixed-phase beamformer solution, so
    // it cannot end below it on a single pair.
    let cfg = small(1, 1);
    for t in 0..6 {
        let cs = generate_trial_at(&cfg, 21, t).unwrap();
        let fps = run_scheme(SchemeKind::Fps, &cfg, &cs).unwrap();
        let prop = run_scheme(SchemeKind::Proposed, &cfg, &cs).unwrap();
        assert!(prop.min_objective >= fps.min_objective * (1.0 - 1e-9));
    }
}

#[test]
fn looser_outage_bound_helps() {
    let mut objs = Vec::new();
    for eps in [0.05, 0.2, 0.5] {
        let mut raw = RawConfig::default();
        raw.system.n_antennas = 4;
        raw.system.n_elements = 4;
        raw.system.n_users = 1;
        raw.system.n_eves = 1;
        raw.system.sop_bound = SopBound::Common(eps);
        let cfg = raw.validate().unwrap();
        let mean: f64 = (0..8)
            .map(|t| solve_p2(&cfg, &generate_trial_at(&cfg, 13, t).unwrap()).unwrap().min_objective)
            .sum::<f64>()
            / 8.0;
        objs.push(mean);
    }
    assert!(objs.windows(2).all(|p| p[1] >= p[0]), "{objs:?}");
}

#[test]
fn config_and_channels_survive_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut raw = RawConfig::default();
    raw.system.n_users = 2;
    raw.system.sop_bound = SopBound::PerUser(vec![0.1, 0.3]);
    let cfg_path = dir.path().join("scenario.toml");
    std::fs::write(&cfg_path, raw.to_toml_string()).unwrap();
    let back = RawConfig::from_path(&cfg_path).unwrap();
    assert_eq!(back, raw);

    let cfg = back.validate().unwrap();
    let cs = generate_trial_at(&cfg, 4, 7).unwrap();
    let ch_path = dir.path().join("trial.txt");
    save_channels(&cs, &ch_path).unwrap();
    assert_eq!(read_channels(&ch_path).unwrap(), cs);
}

#[test]
fn bad_config_names_the_field() {
    let err = RawConfig::from_toml_str("[system]\nsop_bound = 1.5\n").and_then(|r| r.validate()).unwrap_err();
    assert!(err.to_string().contains("sop_bound"), "{err}");
    let err = RawConfig::from_toml_str("[system]\nn_antenas = 4\n").unwrap_err();
    assert!(err.to_string().contains("n_antenas"), "{err}");
}
