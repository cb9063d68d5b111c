use std::sync::OnceLock;

use gazeintent::attention::AttentionConfig;
use gazeintent::control::{simulate, Mode, SimConfig};
use gazeintent::exec::Execution;
use gazeintent::intent::{train_predictors, IntentModels, PredictorConfig, TrainOptions};
use gazeintent::synth::{generate_corpus, GazeProfileParams};
use gazeintent::world::BoardLayout;

fn models() -> &'static IntentModels {
    static M: OnceLock<IntentModels> = OnceLock::new();
    M.get_or_init(|| {
        let (layout, cfg) = (BoardLayout::standard(), AttentionConfig::default());
        let corpus = generate_corpus(&GazeProfileParams::default(), 456, 31, &layout, &cfg, Execution::default()).unwrap();
        let opts = TrainOptions { cross_validate: false, ..Default::default() };
        train_predictors(&corpus.episodes, &layout, &opts, &cfg, 31, Execution::default()).unwrap().0
    })
}

#[test]
fn mode_ordering_on_ten_boards() {
    let sim = SimConfig { boards: 10, seed: 500, ..Default::default() };
    let r = simulate(models(), &BoardLayout::standard(), &sim, &Mode::ALL, &PredictorConfig::default(), Execution::default()).unwrap();
    let (f, rb, rn) = (r.mode(Mode::FollowIntention).unwrap(), r.mode(Mode::Rebel).unwrap(), r.mode(Mode::Random).unwrap());
    assert!(f.match_rate > rn.match_rate && rn.match_rate > rb.match_rate, "{f:?} {rn:?} {rb:?}");
    assert!(rb.corrective_moves > f.corrective_moves);
    for m in &r.modes {
        assert_eq!(m.cycles, 10 * 38);
        // every decided cycle either matched or needed a correction
        assert_eq!(m.corrective_moves, m.decided - m.matches);
        assert!(m.mean_time_to_commit <= 1.3 + 1.0 / 75.0);
    }
    // commit timing does not depend on the mode
    assert_eq!(f.mean_time_to_commit, rb.mean_time_to_commit);
    assert!(rb.completion_time > f.completion_time);
}

#[test]
fn simulation_is_deterministic_and_execution_independent() {
    let sim = SimConfig { boards: 3, seed: 8, ..Default::default() };
    let layout = BoardLayout::standard();
    let a = simulate(models(), &layout, &sim, &Mode::ALL, &PredictorConfig::default(), Execution::Sequential).unwrap();
    let b = simulate(models(), &layout, &sim, &Mode::ALL, &PredictorConfig::default(), Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_boards_give_an_empty_report() {
    let sim = SimConfig { boards: 0, ..Default::default() };
    let r = simulate(models(), &BoardLayout::standard(), &sim, &Mode::ALL, &PredictorConfig::default(), Execution::default()).unwrap();
    assert!(r.modes.iter().all(|m| m.cycles == 0 && m.corrective_moves == 0));
}
