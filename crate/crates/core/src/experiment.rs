//! Desk-scale experiments: topology transfer for forecasting against the
//! dense baseline, and bus-level FDI localisation on transmission families.

use crate::model::{LayerConfig, ModelError, Task, UgcnParams};
use crate::pipeline::{generate_family, FamilyConfig, PipelineError};
use crate::scenario::ScenarioSet;
use crate::train::eval::{EvalOptions, NoAttackPredictor, UgcnPredictor};
use crate::train::{
    eval_fdi, eval_forecast, initial_state, train_dense, train_from, DenseConfig, FdiMetric, MetricsReport, TrainConfig,
    TrainError, TrainState,
};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug)]
pub struct TransferSetup {
    pub family: FamilyConfig,
    pub q_train: usize,
    pub q_test: usize,
    pub train_seed: u64,
    pub test_seed: u64,
    pub layer: LayerConfig,
    pub train: TrainConfig,
    pub dense: DenseConfig,
    pub horizons: Vec<usize>,
}

impl Default for TransferSetup {
    fn default() -> Self {
        Self {
            family: FamilyConfig::default(),
            q_train: 60,
            q_test: 12,
            train_seed: 7,
            test_seed: 1007,
            layer: LayerConfig {
                k_t: 1,
                widths: vec![10, 16, 16],
                d: 64,
                ..LayerConfig::forecast()
            },
            train: TrainConfig {
                epochs: 150,
                learning_rate: 3e-3,
                patience: 40,
                batch_systems: 8,
                windows_per_system: 16,
                seed: 7,
                ..TrainConfig::default()
            },
            dense: DenseConfig {
                seed: 7,
                ..DenseConfig::default()
            },
            horizons: (0..6).collect(),
        }
    }
}

pub struct TransferOutcome {
    pub state: TrainState,
    /// UGCN on the unseen reconfigurations.
    pub ugcn: MetricsReport,
    /// Dense baseline on the unseen reconfigurations.
    pub dense: MetricsReport,
    /// Dense baseline on its own training topology.
    pub dense_on_base: MetricsReport,
}

impl TransferOutcome {
    /// Dense MSE over UGCN MSE at `horizon`.
    pub fn ratio(&self, horizon: usize) -> Option<f64> {
        Some(self.dense.mse_at(horizon)? / self.ugcn.mse_at(horizon)?)
    }
}

/// Trains UGCN on `q_train` augmented variants and the dense baseline on the
/// base topology, then evaluates both on `q_test` variants drawn with a
/// different seed.
pub fn run_transfer(setup: &TransferSetup, jobs: usize, mut on_epoch: impl FnMut(&TrainState)) -> Result<TransferOutcome, ExperimentError> {
    let fam = |q, include_base| FamilyConfig {
        q,
        include_base,
        task: Task::Forecast,
        ..setup.family.clone()
    };
    let train_sets = generate_family(&fam(setup.q_train, false), setup.train_seed, jobs)?;
    let test_sets = generate_family(&fam(setup.q_test, false), setup.test_seed, jobs)?;
    let base = generate_family(&fam(0, true), setup.train_seed, jobs)?;

    let params = UgcnParams::init(&setup.layer, setup.train.seed);
    let state = initial_state(params, &setup.layer, &train_sets, &setup.train)?;
    let state = train_from(state, &setup.layer, &train_sets, &setup.train, jobs, &mut on_epoch)?;

    let opts = EvalOptions {
        jobs,
        ..EvalOptions::new(state.norm)
    };
    let model = UgcnPredictor {
        params: &state.best_params,
        layer: &setup.layer,
    };
    let ugcn = eval_forecast(&model, &test_sets, &setup.horizons, &opts)?;
    let dense_model = train_dense(&base[0], Task::Forecast, setup.layer.horizons, state.norm, &setup.dense)?;
    let dense = eval_forecast(&dense_model, &test_sets, &setup.horizons, &opts)?;
    let dense_on_base = eval_forecast(&dense_model, &base, &setup.horizons, &opts)?;
    Ok(TransferOutcome {
        state,
        ugcn,
        dense,
        dense_on_base,
    })
}

#[derive(Clone, Debug)]
pub struct FdiSetup {
    /// Transmission cases trained jointly.
    pub cases: Vec<String>,
    pub q_train: usize,
    pub q_test: usize,
    pub train_seed: u64,
    pub test_seed: u64,
    pub layer: LayerConfig,
    pub train: TrainConfig,
    pub omegas: Vec<f64>,
}

impl Default for FdiSetup {
    fn default() -> Self {
        Self {
            cases: vec!["ieee30".into()],
            q_train: 120,
            q_test: 10,
            train_seed: 11,
            test_seed: 1011,
            layer: LayerConfig {
                k_t: 1,
                widths: vec![10, 16],
                d: 256,
                n_pool: 30,
                ..LayerConfig::fdi()
            },
            train: TrainConfig {
                epochs: 300,
                learning_rate: 1e-3,
                patience: 40,
                batch_systems: 8,
                windows_per_system: 16,
                val_windows: 4,
                seed: 11,
                ..TrainConfig::default()
            },
            omegas: vec![0.1, 0.3, 0.5, 0.7, 0.9],
        }
    }
}

pub struct CaseResult {
    pub case: String,
    pub ugcn: MetricsReport,
    pub all_zeros: MetricsReport,
}

/// Confusion counts summed over attack levels (`omega` is NaN).
pub fn pooled_fdi(ms: &[FdiMetric]) -> FdiMetric {
    let (tp, fp, tn, fn_) = ms
        .iter()
        .fold((0, 0, 0, 0), |a, m| (a.0 + m.tp, a.1 + m.fp, a.2 + m.tn, a.3 + m.fn_));
    FdiMetric::from_counts(f64::NAN, tp, fp, tn, fn_)
}

pub struct FdiOutcome {
    pub state: TrainState,
    pub cases: Vec<CaseResult>,
}

/// Trains one detector on variants of every case in `setup.cases` and
/// evaluates it per case on unseen variants, next to the all-zeros predictor.
pub fn run_fdi(setup: &FdiSetup, jobs: usize, mut on_epoch: impl FnMut(&TrainState)) -> Result<FdiOutcome, ExperimentError> {
    let fam = |case: &str, q| FamilyConfig {
        case: case.to_string(),
        task: Task::Fdi,
        q,
        ..FamilyConfig::default()
    };
    let mut train_sets: Vec<ScenarioSet> = Vec::new();
    let mut test_sets = Vec::new();
    for (i, case) in setup.cases.iter().enumerate() {
        let k = i as u64;
        train_sets.extend(generate_family(&fam(case, setup.q_train), setup.train_seed + k, jobs)?);
        test_sets.push(generate_family(&fam(case, setup.q_test), setup.test_seed + k, jobs)?);
    }
    let params = UgcnParams::init(&setup.layer, setup.train.seed);
    let state = initial_state(params, &setup.layer, &train_sets, &setup.train)?;
    let state = train_from(state, &setup.layer, &train_sets, &setup.train, jobs, &mut on_epoch)?;
    let opts = EvalOptions {
        jobs,
        ..EvalOptions::new(state.norm)
    };
    let model = UgcnPredictor {
        params: &state.best_params,
        layer: &setup.layer,
    };
    let mut cases = Vec::new();
    for (case, sets) in setup.cases.iter().zip(&test_sets) {
        cases.push(CaseResult {
            case: case.clone(),
            ugcn: eval_fdi(&model, sets, &setup.omegas, &opts)?,
            all_zeros: eval_fdi(&NoAttackPredictor, sets, &setup.omegas, &opts)?,
        });
    }
    Ok(FdiOutcome { state, cases })
}
