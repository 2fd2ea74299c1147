use ugcn::caseio::{encode_dataset_bin, encode_dataset_json};
use ugcn::linalg::C64;
use ugcn::model::{LayerConfig, Task, UgcnParams};
use ugcn::pipeline::{generate_family, FamilyConfig};
use ugcn::scenario::{ScenarioConfig, ScenarioSet};
use ugcn::train::eval::{EvalOptions, NoAttackPredictor, UgcnPredictor};
use ugcn::train::{
    eval_fdi, eval_forecast, initial_state, train_dense, train_from, DenseConfig, MetricsReport, TrainConfig, TrainState,
};

fn family(task: Task, case: &str, q: usize, seed: u64) -> Vec<ScenarioSet> {
    let cfg = FamilyConfig {
        case: case.into(),
        task,
        q,
        scenario: ScenarioConfig {
            t_total: 72,
            ..ScenarioConfig::default()
        },
        ..FamilyConfig::default()
    };
    generate_family(&cfg, seed, 1).unwrap()
}

fn layer(task: Task) -> LayerConfig {
    let base = match task {
        Task::Forecast => LayerConfig::forecast(),
        Task::Fdi => LayerConfig::fdi(),
    };
    LayerConfig {
        k_t: 1,
        widths: if task == Task::Fdi { vec![10, 6] } else { vec![10, 6, 6] },
        d: 16,
        ..base
    }
}

fn train_cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        steps_per_epoch: 3,
        batch_systems: 2,
        windows_per_system: 4,
        learning_rate: 3e-3,
        patience: 0,
        val_windows: 4,
        seed: 5,
        ..TrainConfig::default()
    }
}

fn run(sets: &[ScenarioSet], layer: &LayerConfig, cfg: &TrainConfig, jobs: usize) -> TrainState {
    let state = initial_state(UgcnParams::init(layer, cfg.seed), layer, sets, cfg).unwrap();
    train_from(state, layer, sets, cfg, jobs, |_| {}).unwrap()
}

#[test]
fn family_generation_is_deterministic_and_job_independent() {
    let cfg = FamilyConfig {
        q: 3,
        task: Task::Fdi,
        case: "ieee30".into(),
        scenario: ScenarioConfig {
            t_total: 48,
            ..ScenarioConfig::default()
        },
        ..FamilyConfig::default()
    };
    let a = generate_family(&cfg, 9, 1).unwrap();
    let b = generate_family(&cfg, 9, 3).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(encode_dataset_json(x), encode_dataset_json(y));
        assert_eq!(encode_dataset_bin(x), encode_dataset_bin(y));
    }
    assert!(a.iter().all(|s| !s.attacks.is_empty()));
}

#[test]
fn training_reduces_loss_and_is_reproducible() {
    let sets = family(Task::Forecast, "ieee33", 4, 1);
    let l = layer(Task::Forecast);
    let cfg = train_cfg(8);
    let a = run(&sets, &l, &cfg, 1);
    assert_eq!(a.history.len(), 8);
    assert!(a.history.last().unwrap().loss < a.history[0].loss);
    let b = run(&sets, &l, &cfg, 2);
    assert_eq!(a.params.to_flat(), b.params.to_flat());
    assert_eq!(a.history, b.history);
    assert_eq!(a.history_csv().lines().next(), Some("epoch,loss,val_loss"));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let sets = family(Task::Fdi, "ieee30", 3, 2);
    let l = layer(Task::Fdi);
    let full = run(&sets, &l, &train_cfg(6), 1);
    let half = run(&sets, &l, &train_cfg(3), 1);
    let json = serde_json::to_string(&half).unwrap();
    let restored: TrainState = serde_json::from_str(&json).unwrap();
    let resumed = train_from(restored, &l, &sets, &train_cfg(6), 1, |_| {}).unwrap();
    assert_eq!(resumed.params.to_flat(), full.params.to_flat());
    assert_eq!(resumed.optimizer, full.optimizer);
    assert_eq!(resumed.history, full.history);
}

#[test]
fn zero_shot_eval_leaves_parameters_alone() {
    let train_sets = family(Task::Forecast, "ieee33", 3, 3);
    let test_sets = family(Task::Forecast, "ieee33", 2, 103);
    let l = layer(Task::Forecast);
    let state = run(&train_sets, &l, &train_cfg(2), 1);
    let before = state.best_params.checksum();
    let model = UgcnPredictor {
        params: &state.best_params,
        layer: &l,
    };
    let opts = EvalOptions::new(state.norm);
    let report = eval_forecast(&model, &test_sets, &[0, 1, 5], &opts).unwrap();
    assert_eq!(state.best_params.checksum(), before);
    assert_eq!(report.forecast.len(), 3);
    assert!(report.mse_at(0).unwrap().is_finite());
    assert_eq!(report.systems.len(), 2);
    let back: MetricsReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(back, report);
    assert_eq!(report.to_csv().lines().count(), 4);
    assert!(eval_forecast(&model, &test_sets, &[6], &opts).is_err());
}

#[test]
fn dense_baseline_beats_target_variance_on_its_own_topology() {
    let cfg = FamilyConfig {
        q: 0,
        include_base: true,
        scenario: ScenarioConfig {
            t_total: 120,
            ..ScenarioConfig::default()
        },
        ..FamilyConfig::default()
    };
    let base = generate_family(&cfg, 4, 1).unwrap();
    let norm = ugcn::train::FeatureNorm::fit(&[&base[0]]);
    let dense_cfg = DenseConfig {
        hidden: vec![64, 64],
        epochs: 30,
        seed: 4,
        ..DenseConfig::default()
    };
    let model = train_dense(&base[0], Task::Forecast, 2, norm, &dense_cfg).unwrap();
    let report = eval_forecast(&model, &base, &[1], &EvalOptions::new(norm)).unwrap();
    let states = &base[0].true_states;
    let n = base[0].n();
    let mean: Vec<C64> = (0..n).map(|i| states.iter().map(|v| v[i]).sum::<C64>() / states.len() as f64).collect();
    let var = states.iter().map(|v| (0..n).map(|i| (v[i] - mean[i]).norm_sqr()).sum::<f64>() / n as f64).sum::<f64>()
        / states.len() as f64;
    let mse = report.mse_at(1).unwrap();
    assert!(mse.is_finite() && mse < var, "mse {mse:e} variance {var:e}");

    let small = family(Task::Forecast, "ieee33", 2, 8);
    let padded = eval_forecast(&model, &small, &[1], &EvalOptions::new(norm)).unwrap();
    assert!(padded.mse_at(1).unwrap().is_finite());
    assert_eq!(model.padding_note(33), "33 buses map one-to-one onto 33 slots");
    assert!(model.padding_note(30).contains("slots 30..33 are zero"));
    assert!(model.padding_note(38).contains("slot mean"));
}

#[test]
fn fdi_report_covers_each_omega() {
    let sets = family(Task::Fdi, "ieee30", 2, 6);
    let opts = EvalOptions::new(ugcn::train::FeatureNorm::fit(&sets.iter().collect::<Vec<_>>()));
    let omegas = [0.1, 0.5, 0.9];
    let zeros = eval_fdi(&NoAttackPredictor, &sets, &omegas, &opts).unwrap();
    assert_eq!(zeros.fdi.len(), 3);
    for m in &zeros.fdi {
        assert_eq!(m.tp + m.fp, 0);
        assert!((m.accuracy - (m.tn as f64 / (m.tn + m.fn_) as f64)).abs() < 1e-15);
    }
    assert_eq!(zeros.fdi[0].tn, zeros.fdi[2].tn);
    assert_eq!(zeros.to_csv().lines().count(), 4);
}
