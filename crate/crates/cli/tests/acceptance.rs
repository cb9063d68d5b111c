//! End-to-end acceptance suite. Runs without the libtest harness so that
//! every criterion prints exactly one PASS or FAIL line; the process exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use gazeintent::attention::{attention_sample, compute_vap, AttentionConfig, GazeSample, GazeTrace};
use gazeintent::control::{simulate, ControllerConfig, ControllerState, Mode, SimConfig};
use gazeintent::eval::{compare_curves, cv_sweep, duration_stats, AccuracyCurve};
use gazeintent::exec::Execution;
use gazeintent::geometry::Point2;
use gazeintent::intent::{
    build_dataset, train_predictors, ActionKind, IntentModels, PickFeatureSet, Prediction, PredictorConfig, TrainOptions, TrainReport,
};
use gazeintent::svm::{kkt_audit, stratified_split, train_smo_detailed, SvmParams, TrainingExample};
use gazeintent::synth::{generate_corpus, Corpus, GazeProfileParams, Scenario, ScenarioMix};
use gazeintent::world::{BoardLayout, ObjectId};
use gazeintent_oracle::{decision, seeded_cases, solve, OracleKernel};
use gazeintent_session::{drive, replay, synthetic_script, Client, Server, SessionConfig, SessionLog};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CORPUS_SEED: u64 = 7;
const CORPUS_N: usize = 912;
const KKT_TOL: f64 = 1e-3;

struct Fixture {
    corpus: Corpus,
    models: Arc<IntentModels>,
    report: TrainReport,
    built_in: Duration,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let t0 = Instant::now();
        let (layout, cfg) = (BoardLayout::standard(), AttentionConfig::default());
        let corpus = generate_corpus(&GazeProfileParams::default(), CORPUS_N, CORPUS_SEED, &layout, &cfg, Execution::default()).unwrap();
        let (models, report) =
            train_predictors(&corpus.episodes, &layout, &TrainOptions::default(), &cfg, CORPUS_SEED, Execution::default()).unwrap();
        Fixture { corpus, models: Arc::new(models), report, built_in: t0.elapsed() }
    })
}

fn curves() -> &'static (AccuracyCurve, AccuracyCurve, Duration) {
    static C: OnceLock<(AccuracyCurve, AccuracyCurve, Duration)> = OnceLock::new();
    C.get_or_init(|| {
        let f = fixture();
        let t0 = Instant::now();
        let cfg = AttentionConfig::default();
        let opts = TrainOptions { cross_validate: false, ..Default::default() };
        let sweep = |kind| cv_sweep(&f.corpus.episodes, &f.corpus.layout, kind, 3.0, &opts, &cfg, 5, CORPUS_SEED, Execution::default()).unwrap();
        (sweep(ActionKind::Pick), sweep(ActionKind::Place), t0.elapsed())
    })
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn vap_numerics() -> Outcome {
    let t0 = Instant::now();
    let sigma = 60.0;
    // exp(-k²/2) for k = 0..3
    let want = [1.0, 0.606_530_659_712_633_4, 0.135_335_283_236_612_7, 0.011_108_996_538_242_306];
    let worst = (0..4).map(|k| (attention_sample(k as f64 * sigma, sigma) - want[k]).abs()).fold(0.0, f64::max);
    if worst >= 1e-12 {
        return Err(format!("attention_sample off by {worst:e}"));
    }

    let cfg = AttentionConfig::default();
    let gaze = |i: i64| Point2::new(50.0 * (i as f64 * 0.031).cos(), 40.0 * (i as f64 * 0.017).sin());
    let object = Point2::new(20.0, -15.0);
    let trace_from = |offset: i64, shift: Point2| {
        let mut tr = GazeTrace::with_capacity(600);
        for i in 0..600 {
            let g = gaze(i);
            tr.push(GazeSample::new(cfg.frame_time(i + offset), Point2::new(g.x + shift.x, g.y + shift.y), i % 23 != 4)).unwrap();
        }
        tr
    };
    let base = trace_from(0, Point2::new(0.0, 0.0));
    let end = 500;
    let vap = compute_vap(&base, ObjectId::Slot(1), object, cfg.frame_time(end), &cfg).unwrap();
    if vap.values.len() != cfg.samples_per_window {
        return Err(format!("VAP length {}", vap.values.len()));
    }
    if !vap.values.iter().all(|v| (0.0..=1.0).contains(v)) {
        return Err("VAP value outside [0, 1]".into());
    }
    // shifting time and space together leaves the profile unchanged
    for (offset, shift) in [(37, Point2::new(0.0, 0.0)), (0, Point2::new(-310.0, 95.0)), (250, Point2::new(12.5, 7.0))] {
        let moved = trace_from(offset, shift);
        let o = Point2::new(object.x + shift.x, object.y + shift.y);
        let v = compute_vap(&moved, ObjectId::Slot(1), o, cfg.frame_time(end + offset), &cfg).unwrap();
        let d = vap.values.iter().zip(&v.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if d > 1e-12 {
            return Err(format!("shift ({offset}, {shift:?}) changed the profile by {d:e}"));
        }
    }
    // one window step later is the old profile moved left by one slot
    let next = compute_vap(&base, ObjectId::Slot(1), object, cfg.frame_time(end + 1), &cfg).unwrap();
    if next.values[..cfg.samples_per_window - 1] != vap.values[1..] {
        return Err("window advance is not a one-slot shift".into());
    }
    let el = t0.elapsed();
    check(el < Duration::from_secs(1), format!("max error {worst:.1e}, {el:.2?}"))
}

fn params_for(kernel: OracleKernel, c: f64) -> SvmParams {
    match kernel {
        OracleKernel::Linear => SvmParams::linear(c),
        OracleKernel::Rbf(g) => SvmParams::rbf(g, c),
    }
}

fn svm_oracle() -> Outcome {
    let t0 = Instant::now();
    let cases = seeded_cases(2024, 50);
    let (mut linear, mut rbf) = (0, 0);
    let mut worst: f64 = 0.0;
    for (i, case) in cases.iter().enumerate() {
        match case.kernel {
            OracleKernel::Linear => linear += 1,
            OracleKernel::Rbf(_) => rbf += 1,
        }
        let n = case.x.len();
        let dim = case.x[0].len();
        if n > 20 || !(2..=5).contains(&dim) || case.probes.len() != 100 {
            return Err(format!("case {i} out of shape: n={n} dim={dim}"));
        }
        let data: Vec<TrainingExample> = case.x.iter().zip(&case.y).map(|(x, &y)| TrainingExample::new(x.clone(), y > 0.0)).collect();
        let (model, sol) = train_smo_detailed(&data, &params_for(case.kernel, case.c), i as u64, Execution::Sequential).unwrap();
        let oracle = solve(&case.x, &case.y, case.c, case.kernel);
        let gap = (sol.objective - oracle.objective).abs();
        worst = worst.max(gap);
        if gap > 1e-4 {
            return Err(format!("case {i}: objective {} vs oracle {}", sol.objective, oracle.objective));
        }
        let differ = case
            .probes
            .iter()
            .filter(|p| (model.decision_value(p).unwrap() > 0.0) != (decision(&oracle, &case.x, &case.y, case.kernel, p) > 0.0))
            .count();
        if differ > 0 {
            return Err(format!("case {i}: {differ} probes classified differently"));
        }
    }
    if linear == 0 || rbf == 0 {
        return Err("both kernels must be covered".into());
    }
    let el = t0.elapsed();
    check(el < Duration::from_secs(60), format!("{linear} linear + {rbf} rbf, worst gap {worst:.1e}, {el:.2?}"))
}

fn kkt_audits() -> Outcome {
    let mut audited = 0;
    let mut worst: f64 = 0.0;
    let mut audit = |label: &str, data: &[TrainingExample], params: &SvmParams, seed: u64| -> Result<(), String> {
        let (model, sol) = train_smo_detailed(data, params, seed, Execution::default()).map_err(|e| e.to_string())?;
        let r = kkt_audit(&model, data, &sol.alphas);
        worst = worst.max(r.max_violation);
        audited += 1;
        if r.passes(KKT_TOL) {
            Ok(())
        } else {
            Err(format!("{label}: {r:?}"))
        }
    };
    for (i, case) in seeded_cases(2024, 50).iter().enumerate() {
        let data: Vec<TrainingExample> = case.x.iter().zip(&case.y).map(|(x, &y)| TrainingExample::new(x.clone(), y > 0.0)).collect();
        audit(&format!("oracle case {i}"), &data, &params_for(case.kernel, case.c), i as u64)?;
    }
    let f = fixture();
    let cfg = AttentionConfig::default();
    let params = SvmParams::default();
    for (kind, seed) in [(ActionKind::Pick, CORPUS_SEED), (ActionKind::Place, CORPUS_SEED + 1)] {
        let data = build_dataset(&f.corpus.episodes, &f.corpus.layout, kind, PickFeatureSet::Full, &cfg, Execution::default()).unwrap();
        audit(&format!("{} full", kind.name()), &data, &params, seed)?;
        // the calibration split used for the shipped model
        let labels: Vec<bool> = data.iter().map(|e| e.positive()).collect();
        let (tr, _) = stratified_split(&labels, 0.2, seed ^ 0x5eed_ca1b);
        let train: Vec<TrainingExample> = tr.iter().map(|&i| data[i].clone()).collect();
        audit(&format!("{} calibrated", kind.name()), &train, &params, seed)?;
        for c in [0.1, 10.0] {
            audit(&format!("{} C={c}", kind.name()), &data, &SvmParams { c, ..params }, seed)?;
        }
    }
    Ok(format!("{audited} models, worst violation {worst:.1e}"))
}

fn end_to_end() -> Outcome {
    let f = fixture();
    let (pick, place, swept) = curves();
    let cv_pick = f.report.pick.cv.as_ref().unwrap().mean_accuracy;
    let cv_place = f.report.place.cv.as_ref().unwrap().mean_accuracy;
    let (p0, q0) = (pick.at(0.0).unwrap(), place.at(0.0).unwrap());
    let el = f.built_in + *swept;
    check(
        f.corpus.episodes.len() == CORPUS_N && cv_pick >= 0.85 && cv_place >= 0.90 && p0 >= 0.75 && q0 >= 0.85 && el < Duration::from_secs(600),
        format!("5-fold pick {cv_pick:.4} place {cv_place:.4}; low-chance t=0 pick {p0:.3} place {q0:.3}; {el:.1?}"),
    )
}

fn anticipation_trend() -> Outcome {
    let (pick, place, _) = curves();
    let (rp, rq) = (pick.trend(0.0, 3.0), place.trend(0.0, 3.0));
    let (p15, q15) = (pick.at(1.5).unwrap(), place.at(1.5).unwrap());
    check(rp >= 0.9 && rq >= 0.9 && q15 > p15, format!("rho pick {rp:.3} place {rq:.3}; at 1.5 s pick {p15:.3} place {q15:.3}"))
}

fn baseline_direction() -> Outcome {
    let (layout, cfg) = (BoardLayout::standard(), AttentionConfig::default());
    let mut params = GazeProfileParams::default();
    let mut mix = ScenarioMix::only(Scenario::Alternating);
    for (s, w) in [
        (Scenario::OneDominant, 0.35),
        (Scenario::Alternating, 0.45),
        (Scenario::TrendingChoice, 0.1),
        (Scenario::Distractor, 0.07),
        (Scenario::FaultyTracking, 0.03),
    ] {
        mix.set(s, w);
    }
    params.mix = mix;
    let corpus = generate_corpus(&params, CORPUS_N, CORPUS_SEED + 100, &layout, &cfg, Execution::default()).unwrap();
    let picks = corpus.of_kind(ActionKind::Pick).count();
    let alternating = corpus.of_kind(ActionKind::Pick).filter(|e| e.scenario == Scenario::Alternating).count();
    let share = alternating as f64 / picks as f64;
    let full = TrainOptions { cross_validate: false, ..Default::default() };
    let f1 = TrainOptions { pick_features: PickFeatureSet::F1Only, ..full };
    let sweep = |o: &TrainOptions| cv_sweep(&corpus.episodes, &layout, ActionKind::Pick, 2.0, o, &cfg, 5, CORPUS_SEED, Execution::default()).unwrap();
    let cmp = compare_curves(&sweep(&full), &sweep(&f1)).unwrap().window(0.5, 2.0);
    check(
        share >= 0.4 && cmp.mean_difference >= 0.05 && cmp.sign_test_p < 0.05,
        format!(
            "{:.0}% Alternating; F1‖F2 − F1 = {:+.1} points, {}/{}/{} better/worse/tied, p = {:.1e}",
            share * 100.0,
            cmp.mean_difference * 100.0,
            cmp.a_better,
            cmp.b_better,
            cmp.ties,
            cmp.sign_test_p
        ),
    )
}

fn durations() -> Outcome {
    let f = fixture();
    let s = duration_stats(&f.corpus.episodes).unwrap();
    check(
        s.pick.n + s.place.n >= 400
            && (s.pick.mean - 3.61).abs() <= 0.15
            && (s.place.mean - 4.65).abs() <= 0.15
            && s.t_statistic < 0.0
            && s.p_value < 0.001,
        format!(
            "pick {:.3} s (n={}), place {:.3} s (n={}), t = {:.2}, p = {:.1e}",
            s.pick.mean, s.pick.n, s.place.mean, s.place.n, s.t_statistic, s.p_value
        ),
    )
}

/// Highest probability, lowest id on ties; written out independently of the
/// controller's own tie rule.
fn argmax(p: &BTreeMap<ObjectId, f64>) -> ObjectId {
    let best = p.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    *p.iter().find(|(_, &v)| v == best).unwrap().0
}

fn argmin(p: &BTreeMap<ObjectId, f64>) -> ObjectId {
    let least = p.values().cloned().fold(f64::INFINITY, f64::min);
    *p.iter().find(|(_, &v)| v == least).unwrap().0
}

fn controller_properties() -> Result<usize, String> {
    let layout = BoardLayout::standard();
    let cfg = ControllerConfig::default();
    let cases = 512;
    let mut runner = TestRunner::new_with_rng(
        PropConfig { cases, failure_persistence: None, ..PropConfig::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let rows = (2usize..7).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), 1..200));
    let strategy = (rows, prop::sample::select(Mode::ALL.to_vec()), 0.004f64..0.1, any::<u64>(), any::<bool>());
    runner
        .run(&strategy, |(rows, mode, dt, seed, pick)| {
            let mut st = ControllerState::new(&cfg, &layout);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut commits, mut waited) = (0, 0.0);
            let mut held: Option<ObjectId> = None;
            for row in &rows {
                let probs: BTreeMap<ObjectId, f64> =
                    row.iter().enumerate().map(|(i, &v)| (if pick { ObjectId::Slot(i % 4) } else { ObjectId::Cell(i) }, v)).collect();
                let chosen = argmax(&probs);
                let p = Prediction { t: 0.0, kind: ActionKind::Pick, decided: probs[&chosen] >= cfg.threshold, chosen, per_candidate: probs };
                let before = st.committed();
                st.step(&p, mode, dt, &layout, &mut rng);
                if before.is_none() {
                    waited += dt;
                    if let Some(c) = st.committed() {
                        commits += 1;
                        held = Some(c);
                        prop_assert!(waited <= cfg.decision_cap + dt + 1e-9, "committed after {waited} s");
                        match mode {
                            Mode::FollowIntention => prop_assert_eq!(c, argmax(&p.per_candidate)),
                            Mode::Rebel => prop_assert_eq!(c, argmin(&p.per_candidate)),
                            Mode::Random => prop_assert!(p.per_candidate.contains_key(&c)),
                        }
                    }
                }
                prop_assert_eq!(st.committed(), held);
            }
            prop_assert!(commits <= 1);
            if waited >= cfg.decision_cap + dt {
                prop_assert_eq!(commits, 1);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(cases as usize)
}

fn controller_contract() -> Outcome {
    let t0 = Instant::now();
    let cases = controller_properties()?;
    let f = fixture();
    let sim = SimConfig { boards: 30, seed: CORPUS_SEED, ..Default::default() };
    let r = simulate(&f.models, &f.corpus.layout, &sim, &Mode::ALL, &PredictorConfig::default(), Execution::default()).map_err(|e| e.to_string())?;
    let (fo, rb, rn) = (r.mode(Mode::FollowIntention).unwrap(), r.mode(Mode::Rebel).unwrap(), r.mode(Mode::Random).unwrap());
    let el = t0.elapsed();
    check(
        fo.match_rate > rn.match_rate && rn.match_rate > rb.match_rate && rb.corrective_moves > fo.corrective_moves && el < Duration::from_secs(300),
        format!(
            "{cases} property cases; match follow {:.3} > random {:.3} > rebel {:.3}; corrective rebel {} > follow {}; {el:.1?}",
            fo.match_rate, rn.match_rate, rb.match_rate, rb.corrective_moves, fo.corrective_moves
        ),
    )
}

fn replay_determinism() -> Outcome {
    let models = fixture().models.clone();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let n = 10;
    let cfg = SessionConfig::default();
    let server = Server::bind("127.0.0.1:0", models.clone(), cfg.clone()).map_err(|e| e.to_string())?.with_log_dir(dir.path().to_path_buf());
    let addr = server.local_addr().map_err(|e| e.to_string())?;
    let handle = thread::spawn(move || server.run(Some(n)));
    let mut live = Vec::new();
    for i in 0..n {
        let script = synthetic_script(
            9000 + i as u64,
            Mode::ALL[i % 3],
            6,
            &GazeProfileParams::default(),
            &cfg.layout,
            &cfg.predictor.attention,
            cfg.gripper_latency,
        );
        let mut client = Client::connect(addr).map_err(|e| e.to_string())?;
        live.push(drive(&mut client, &script).map_err(|e| e.to_string())?);
    }
    handle.join().map_err(|_| "server panicked".to_string())?.map_err(|e| e.to_string())?;
    let mut messages = 0;
    for (i, report) in live.iter().enumerate() {
        let path = dir.path().join(format!("session-{i:04}.jsonl"));
        let log = SessionLog::read(std::io::BufReader::new(std::fs::File::open(&path).map_err(|e| e.to_string())?)).map_err(|e| e.to_string())?;
        let r = replay(&log, models.clone()).map_err(|e| format!("session {i}: {e}"))?;
        if r.telemetry_hash != report.telemetry_hash || log.trailer.telemetry_hash != report.telemetry_hash {
            return Err(format!("session {i}: live {} replay {}", report.telemetry_hash, r.telemetry_hash));
        }
        messages += r.messages.len();
    }
    Ok(format!("{n} sessions, {messages} server messages, hashes identical"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("VAP numerics", vap_numerics),
        ("SVM oracle equivalence", svm_oracle),
        ("KKT audit", kkt_audits),
        ("Synthetic end-to-end", end_to_end),
        ("Anticipation trend", anticipation_trend),
        ("Baseline direction", baseline_direction),
        ("Duration statistics", durations),
        ("Controller contract", controller_contract),
        ("Replay determinism", replay_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.to_lowercase().contains(&f.to_lowercase())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS: {name} ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("FAIL: {name} ({detail})");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
