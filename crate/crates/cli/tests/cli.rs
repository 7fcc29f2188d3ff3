use std::fs;
use std::path::Path;
use std::process::Command;

use hardballs::{io, Params, State};
use hardballs_cli::config::{RunConfig, SurveySection};
use hardballs_cli::{load_config, run_with, save_config, CliError};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["hardballs"];
    full.extend_from_slice(args);
    let code = run_with(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn richness_of_the_alternating_three_ball_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("# n_balls 3\n");
    for k in 0..10 {
        let (i, j) = if k % 2 == 0 { (1, 3) } else { (2, 3) };
        text.push_str(&format!("{} {i} {j}\n", k + 1));
    }
    let path = write(dir.path(), "seq.txt", &text);
    let (code, out, _) = run(&["richness", &path]);
    assert_eq!(code, 0);
    assert!(out.contains("C(3) = 4.5 (9/2)"), "{out}");
    assert!(out.contains("richness 5\n"));
    assert!(out.contains("rich true\n"));
    assert!(out.contains("witness (1,1,3)\n"));
}

#[test]
fn head_on_pair_matches_closed_form_times() {
    let dir = tempfile::tempdir().unwrap();
    let params = Params::new(2, 0.5, 10.0, vec![1.0, 1.0]).unwrap();
    let s = State::new(2, vec![1.0, 1.0, 3.0, 1.0], vec![0.5, 0.0, -0.5, 0.0]).unwrap();
    let state = write(dir.path(), "state.txt", &io::state_to_text(&params, &s));
    let traj_path = dir.path().join("traj.txt");
    let (code, out, err) = run(&[
        "simulate",
        "--state",
        &state,
        "--events",
        "3",
        "--out",
        traj_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("events 3"));
    let (_, traj) = io::trajectory_from_text::<f64>(&fs::read_to_string(&traj_path).unwrap()).unwrap();
    // gap 1 closed at relative speed 1, then L - 4r = 8 each lap
    let expect = [1.0, 9.0, 17.0];
    for (e, t) in traj.events.iter().zip(expect) {
        assert!((e.time - t).abs() < 1e-12, "{} vs {t}", e.time);
    }
}

#[test]
fn missing_config_names_the_path() {
    let (code, _, err) = run(&["simulate", "--config", "/does/not/exist.toml"]);
    assert_eq!(code, 1);
    assert!(err.contains("/does/not/exist.toml"), "{err}");
}

#[test]
fn maximal_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.system.nu = 2;
    cfg.system.n_balls = 3;
    cfg.system.radius = 0.25;
    cfg.system.box_len = 3.5;
    cfg.system.masses = Some(vec![1.0, 2.0, 0.75]);
    cfg.system.rank_tol = Some(1e-9);
    cfg.system.tangency_tol = Some(1e-8);
    cfg.system.simultaneity_tol = Some(1e-11);
    cfg.system.accumulation_floor = Some(1e-12);
    cfg.system.horizon = Some(2.0);
    cfg.run.seed = 77;
    cfg.run.events = 123;
    cfg.run.time = Some(4.5);
    cfg.run.state_file = Some("s.txt".into());
    cfg.run.trajectory_file = Some("t.txt".into());
    cfg.run.sequence_file = Some("q.txt".into());
    cfg.run.out = Some("o.txt".into());
    cfg.run.branch_events = 7;
    cfg.survey = SurveySection {
        samples: 9,
        mass_range: [0.25, 4.0],
        box_range: [2.0, 3.0],
        richness_target: Some(6),
        max_events: 500,
        lyapunov_events: 100,
    };
    cfg.lyapunov.events = 321;
    cfg.lyapunov.renorm_every = 3;
    cfg.lyapunov.blocks = 10;
    cfg.lyapunov.resamples = 99;
    let path = dir.path().join("run.toml");
    save_config(&cfg, &path).unwrap();
    assert_eq!(load_config(&path).unwrap(), cfg);
}

#[test]
fn config_validation_messages() {
    let bad_mass = "[system]\nnu = 2\nn_balls = 2\nradius = 0.3\nbox = 5.0\nmasses = [1.0, -1.0]\n";
    let e = RunConfig::from_toml(bad_mass).unwrap_err();
    assert!(e.to_string().contains("positive"), "{e}");

    let cramped = "[system]\nnu = 2\nn_balls = 2\nradius = 1.0\nbox = 3.0\n";
    let e = RunConfig::from_toml(cramped).unwrap_err();
    assert!(e.to_string().contains("room guard"), "{e}");

    let unknown = "[system]\nnu = 2\nradiuss = 0.3\n";
    match RunConfig::from_toml(unknown).unwrap_err() {
        CliError::Config { line, message, .. } => {
            assert_eq!(line, 3);
            assert!(message.contains("radiuss"), "{message}");
        }
        other => panic!("unexpected {other}"),
    }

    let (code, _, err) = run(&["simulate", "--masses", "1,abc"]);
    assert_eq!(code, 1);
    assert!(err.contains("--masses 1,2.5,3"), "{err}");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let sim = dir.path().join(format!("sim_{tag}.txt"));
        let csv = dir.path().join(format!("survey_{tag}.csv"));
        let common = ["--seed", "31", "--n-balls", "3", "--box", "5"];
        let mut args = vec!["simulate", "--events", "200", "--out", sim.to_str().unwrap()];
        args.extend_from_slice(&common);
        assert_eq!(run(&args).0, 0);
        let mut args = vec!["survey", "--samples", "6", "--out", csv.to_str().unwrap()];
        args.extend_from_slice(&common);
        assert_eq!(run(&args).0, 0);
        outputs.push((
            fs::read(&sim).unwrap(),
            fs::read(&csv).unwrap(),
            fs::read(format!("{}.summary", csv.display())).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn sufficiency_reads_back_a_simulated_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("t.txt");
    let args = ["--seed", "5", "--n-balls", "3", "--box", "1.5", "--events", "12"];
    let mut sim = vec!["simulate", "--out", traj.to_str().unwrap()];
    sim.extend_from_slice(&args);
    assert_eq!(run(&sim).0, 0);
    let (code, out, err) = run(&["sufficiency", "--trajectory", traj.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("sufficient true"), "{out}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_hardballs");
    let ok = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let usage = Command::new(bin).args(["simulate", "--bogus"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(1));
    // packing fraction above one: sampling cannot succeed
    let numerical = Command::new(bin)
        .args([
            "simulate",
            "--nu",
            "2",
            "--n-balls",
            "8",
            "--radius",
            "0.49",
            "--box",
            "2",
        ])
        .output()
        .unwrap();
    assert_eq!(numerical.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&numerical.stderr).contains("packing fraction"));
}

#[test]
fn masses_flag_lyapunov_and_ansatz_run() {
    let (code, out, err) = run(&["simulate", "--masses", "1,2", "--box", "3", "--events", "4"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("param masses 1.0000000000000000e0 2.0000000000000000e0"));

    let (code, out, err) = run(&["lyapunov", "--n-balls", "2", "--radius", "0.5", "--events", "500"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("exponent"), "{out}");

    let (code, out, err) = run(&["ansatz", "--samples", "5", "--box", "5"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("samples"), "{out}");
}
