use std::path::Path;
use std::process::{Command, Output};

fn gazeintent(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazeintent")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gen_corpus_is_deterministic_and_reports_the_mix() {
    let d = tempfile::tempdir().unwrap();
    let a = gazeintent(&["gen-corpus", "--n", "40", "--seed", "3", "--out", "a.jsonl"], d.path());
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert!(stdout(&a).starts_with("# seed 3\n# config {"));
    assert!(stdout(&a).contains("wrote 40 episodes"));
    gazeintent(&["--sequential", "gen-corpus", "--n", "40", "--seed", "3", "--out", "b.jsonl"], d.path());
    assert_eq!(std::fs::read(d.path().join("a.jsonl")).unwrap(), std::fs::read(d.path().join("b.jsonl")).unwrap());

    let m = gazeintent(&["gen-corpus", "--n", "20", "--out", "m.jsonl", "--mix", "Alternating=1"], d.path());
    assert_eq!(code(&m), 0);
    let text = stdout(&m);
    assert!(text.contains("Alternating      20"), "{text}");
}

#[test]
fn config_errors_exit_with_2() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("bad.toml"), "[controller]\nthreshhold = 0.7\n").unwrap();
    assert_eq!(code(&gazeintent(&["--config", "bad.toml", "print-config"], d.path())), 2);
    std::fs::write(d.path().join("bad.json"), r#"{"controller": {"threshold": 1.5}}"#).unwrap();
    assert_eq!(code(&gazeintent(&["--config", "bad.json", "print-config"], d.path())), 2);
    assert_eq!(code(&gazeintent(&["--config", "missing.toml", "print-config"], d.path())), 2);
    assert_eq!(code(&gazeintent(&["gen-corpus", "--out", "x", "--mix", "Wobbly=1"], d.path())), 2);
    assert_eq!(code(&gazeintent(&["simulate", "--models", ".", "--mode", "sideways"], d.path())), 2);

    std::fs::write(d.path().join("ok.toml"), "seed = 4\n[controller]\nthreshold = 0.7\n").unwrap();
    let o = gazeintent(&["--config", "ok.toml", "print-config"], d.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("seed = 4") && stdout(&o).contains("threshold = 0.7"));
}

#[test]
fn bad_data_exits_with_3() {
    let d = tempfile::tempdir().unwrap();
    gazeintent(&["gen-corpus", "--n", "20", "--out", "c.jsonl"], d.path());
    let full = std::fs::read(d.path().join("c.jsonl")).unwrap();
    std::fs::write(d.path().join("cut.jsonl"), &full[..full.len() / 2]).unwrap();
    assert_eq!(code(&gazeintent(&["train", "--corpus", "cut.jsonl", "--out", "m"], d.path())), 3);
    assert_eq!(code(&gazeintent(&["train", "--corpus", "nope.jsonl", "--out", "m"], d.path())), 3);
    assert_eq!(code(&gazeintent(&["simulate", "--models", "nowhere", "--boards", "1"], d.path())), 3);
}

#[test]
fn train_simulate_and_replay_round_trip() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&gazeintent(&["gen-corpus", "--n", "120", "--seed", "5", "--out", "c.jsonl"], d.path())), 0);
    let t = gazeintent(&["train", "--corpus", "c.jsonl", "--out", "m", "--no-cv"], d.path());
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
    for f in ["pick.json", "place.json", "train_report.json"] {
        assert!(d.path().join("m").join(f).exists(), "{f}");
    }

    let e = gazeintent(
        &["eval-sweep", "--corpus", "c.jsonl", "--models", "m", "--kind", "place", "--tmax", "1.0", "--out", "place.csv", "--svg", "place.svg"],
        d.path(),
    );
    assert_eq!(code(&e), 0, "{}", String::from_utf8_lossy(&e.stderr));
    let csv = std::fs::read_to_string(d.path().join("place.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 76);
    assert!(std::fs::read_to_string(d.path().join("place.svg")).unwrap().starts_with("<svg"));

    let empty = gazeintent(&["simulate", "--models", "m", "--boards", "0", "--report", "r.json"], d.path());
    assert_eq!(code(&empty), 0);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("r.json")).unwrap()).unwrap();
    assert!(report["modes"].as_array().unwrap().iter().all(|m| m["cycles"] == 0));

    let one = gazeintent(&["simulate", "--models", "m", "--boards", "1", "--mode", "rebel"], d.path());
    assert_eq!(code(&one), 0);
    assert!(stdout(&one).contains("rebel") && !stdout(&one).contains("follow "));
}

#[test]
fn replay_rejects_logs_from_other_models() {
    use std::sync::Arc;

    use gazeintent::control::Mode;
    use gazeintent::synth::GazeProfileParams;
    use gazeintent_session::{drive, synthetic_script, Connection, SessionConfig, SessionLog};

    let d = tempfile::tempdir().unwrap();
    gazeintent(&["gen-corpus", "--n", "120", "--seed", "5", "--out", "c.jsonl"], d.path());
    gazeintent(&["train", "--corpus", "c.jsonl", "--out", "m", "--no-cv"], d.path());
    gazeintent(&["train", "--corpus", "c.jsonl", "--out", "other", "--no-cv", "--seed", "99"], d.path());

    let models = Arc::new(gazeintent::intent::IntentModels::load(&d.path().join("m")).unwrap());
    let cfg = SessionConfig::default();
    let script =
        synthetic_script(12, Mode::FollowIntention, 2, &GazeProfileParams::default(), &cfg.layout, &cfg.predictor.attention, cfg.gripper_latency);
    let mut conn = Connection::new(models, cfg);
    drive(&mut conn, &script).unwrap();
    let log = SessionLog::from_connection(&conn).unwrap();
    log.write(std::fs::File::create(d.path().join("s.jsonl")).unwrap()).unwrap();

    let ok = gazeintent(&["replay", "--log", "s.jsonl", "--models", "m"], d.path());
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(stdout(&ok).contains("matches the recording"));
    assert_eq!(code(&gazeintent(&["replay", "--log", "s.jsonl", "--models", "other"], d.path())), 3);
}
