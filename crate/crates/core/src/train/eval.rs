//! Zero-shot evaluation protocols and the metrics report.

use super::data::{self, FeatureNorm, PreparedSystem};
use crate::linalg::C64;
use crate::model::{system_forward, LayerConfig, ModelError, RMat, Task, UgcnParams};
use crate::par::par_map;
use crate::scenario::ScenarioSet;
use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetric {
    pub horizon: usize,
    pub mse: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdiMetric {
    pub omega: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl FdiMetric {
    pub fn from_counts(omega: f64, tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            omega,
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemMetrics {
    pub name: String,
    pub n_buses: usize,
    pub forecast: Vec<HorizonMetric>,
    pub fdi: Vec<FdiMetric>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub model: String,
    pub task: Task,
    pub forecast: Vec<HorizonMetric>,
    pub fdi: Vec<FdiMetric>,
    pub systems: Vec<SystemMetrics>,
    /// Omitted unless timing was requested, so reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl MetricsReport {
    pub fn mse_at(&self, horizon: usize) -> Option<f64> {
        self.forecast.iter().find(|m| m.horizon == horizon).map(|m| m.mse)
    }

    pub fn fdi_at(&self, omega: f64) -> Option<&FdiMetric> {
        self.fdi.iter().find(|m| (m.omega - omega).abs() < 1e-12)
    }

    /// `horizon,mse,samples` or `omega,accuracy,precision,recall,f1`.
    pub fn to_csv(&self) -> String {
        match self.task {
            Task::Forecast => {
                let mut s = String::from("horizon,mse,samples\n");
                for m in &self.forecast {
                    s.push_str(&format!("{},{},{}\n", m.horizon, m.mse, m.samples));
                }
                s
            }
            Task::Fdi => {
                let mut s = String::from("omega,accuracy,precision,recall,f1\n");
                for m in &self.fdi {
                    s.push_str(&format!("{},{},{},{},{}\n", m.omega, m.accuracy, m.precision, m.recall, m.f1));
                }
                s
            }
        }
    }
}

/// A model that maps windows of a prepared system to raw normalized outputs
/// (`N × n_outputs`, the layout of the UGCN head).
pub trait Predictor: Sync {
    fn name(&self) -> &str;
    fn task(&self) -> Task;
    fn horizons(&self) -> usize;
    fn predict(&self, sys: &PreparedSystem<'_>, hours: &[usize], omega: Option<f64>) -> Result<Vec<RMat>, ModelError>;
}

pub struct UgcnPredictor<'a> {
    pub params: &'a UgcnParams,
    pub layer: &'a LayerConfig,
}

impl Predictor for UgcnPredictor<'_> {
    fn name(&self) -> &str {
        "ugcn"
    }

    fn task(&self) -> Task {
        self.layer.task
    }

    fn horizons(&self) -> usize {
        self.layer.horizons
    }

    fn predict(&self, sys: &PreparedSystem<'_>, hours: &[usize], omega: Option<f64>) -> Result<Vec<RMat>, ModelError> {
        let w: Vec<_> = hours.iter().map(|&t| sys.window(t, self.layer.window_len(), omega)).collect();
        Ok(system_forward(self.params, self.layer, &sys.ctx, &w)?
            .into_iter()
            .map(|p| p.values)
            .collect())
    }
}

/// Options shared by both evaluation protocols.
#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub norm: FeatureNorm,
    /// Share of the time axis before the test period.
    pub train_fraction: f64,
    pub normalize_gso: bool,
    pub jobs: usize,
}

impl EvalOptions {
    pub fn new(norm: FeatureNorm) -> Self {
        Self {
            norm,
            train_fraction: 0.8,
            normalize_gso: true,
            jobs: 1,
        }
    }
}

fn empty_report(model: &str, task: Task) -> MetricsReport {
    MetricsReport {
        schema_version: REPORT_VERSION,
        model: model.to_string(),
        task,
        forecast: Vec::new(),
        fdi: Vec::new(),
        systems: Vec::new(),
        wall_clock_s: None,
        config: serde_json::Value::Null,
        notes: Vec::new(),
    }
}

/// Per-horizon MSE (p.u.², mean over test windows of the bus-mean squared
/// modulus error) on the last part of each system's time axis.
pub fn eval_forecast(
    model: &dyn Predictor,
    systems: &[ScenarioSet],
    horizons: &[usize],
    opts: &EvalOptions,
) -> Result<MetricsReport, ModelError> {
    let hn = model.horizons();
    if let Some(h) = horizons.iter().find(|&&h| h >= hn) {
        return Err(ModelError::DimensionMismatch(format!("model forecasts {hn} horizons, {h} requested")));
    }
    let per: Vec<Result<(SystemMetrics, Vec<f64>, usize), ModelError>> = par_map(systems, opts.jobs, |_, set| {
        let sys = PreparedSystem::new(set, opts.norm, opts.normalize_gso)?;
        let b = data::split_boundary(set.t_total, opts.train_fraction);
        let hours = data::test_hours(set.t_total, hn, b);
        let preds = model.predict(&sys, &hours, None)?;
        let mut sums = vec![0.0; horizons.len()];
        for (&t, y) in hours.iter().zip(&preds) {
            for (k, &h) in horizons.iter().enumerate() {
                let truth = &set.true_states[t + h];
                let mut e = 0.0;
                for (i, v) in truth.iter().enumerate() {
                    let p = opts.norm.invert(C64::new(y.at(i, 2 * h), y.at(i, 2 * h + 1)));
                    e += (p - v).norm_sqr();
                }
                sums[k] += e / truth.len() as f64;
            }
        }
        let count = hours.len();
        let metrics = horizons
            .iter()
            .zip(&sums)
            .map(|(&h, s)| HorizonMetric {
                horizon: h,
                mse: if count == 0 { 0.0 } else { s / count as f64 },
                samples: count,
            })
            .collect();
        Ok((
            SystemMetrics {
                name: set.name.clone(),
                n_buses: set.n(),
                forecast: metrics,
                fdi: Vec::new(),
            },
            sums,
            count,
        ))
    });
    let mut report = empty_report(model.name(), Task::Forecast);
    let mut total = vec![0.0; horizons.len()];
    let mut count = 0;
    for r in per {
        let (m, sums, c) = r?;
        for (a, s) in total.iter_mut().zip(sums) {
            *a += s;
        }
        count += c;
        report.systems.push(m);
    }
    report.forecast = horizons
        .iter()
        .zip(total)
        .map(|(&h, s)| HorizonMetric {
            horizon: h,
            mse: if count == 0 { 0.0 } else { s / count as f64 },
            samples: count,
        })
        .collect();
    Ok(report)
}

/// Bus-level accuracy, precision, recall and F1 at threshold 0.5 with every
/// test-period attack replayed at each level in `omegas`.
pub fn eval_fdi(
    model: &dyn Predictor,
    systems: &[ScenarioSet],
    omegas: &[f64],
    opts: &EvalOptions,
) -> Result<MetricsReport, ModelError> {
    let per: Vec<Result<(SystemMetrics, Vec<[u64; 4]>), ModelError>> = par_map(systems, opts.jobs, |_, set| {
        let sys = PreparedSystem::new(set, opts.norm, opts.normalize_gso)?;
        let b = data::split_boundary(set.t_total, opts.train_fraction);
        let hours: Vec<usize> = data::test_hours(set.t_total, 1, b)
            .into_iter()
            .filter(|&t| set.attack_at(t).is_some())
            .collect();
        let mut counts = Vec::with_capacity(omegas.len());
        for &omega in omegas {
            let preds = model.predict(&sys, &hours, Some(omega))?;
            let mut c = [0u64; 4];
            for (&t, y) in hours.iter().zip(&preds) {
                for (i, &l) in sys.labels(t).iter().enumerate() {
                    let hit = y.at(i, 0) > 0.0;
                    let k = match (hit, l != 0) {
                        (true, true) => 0,
                        (true, false) => 1,
                        (false, false) => 2,
                        (false, true) => 3,
                    };
                    c[k] += 1;
                }
            }
            counts.push(c);
        }
        let fdi = omegas
            .iter()
            .zip(&counts)
            .map(|(&o, c)| FdiMetric::from_counts(o, c[0], c[1], c[2], c[3]))
            .collect();
        Ok((
            SystemMetrics {
                name: set.name.clone(),
                n_buses: set.n(),
                forecast: Vec::new(),
                fdi,
            },
            counts,
        ))
    });
    let mut report = empty_report(model.name(), Task::Fdi);
    let mut total = vec![[0u64; 4]; omegas.len()];
    for r in per {
        let (m, counts) = r?;
        for (a, c) in total.iter_mut().zip(counts) {
            for k in 0..4 {
                a[k] += c[k];
            }
        }
        report.systems.push(m);
    }
    report.fdi = omegas
        .iter()
        .zip(total)
        .map(|(&o, c)| FdiMetric::from_counts(o, c[0], c[1], c[2], c[3]))
        .collect();
    Ok(report)
}

/// The all-zeros FDI predictor.
pub struct NoAttackPredictor;

impl Predictor for NoAttackPredictor {
    fn name(&self) -> &str {
        "all_zeros"
    }

    fn task(&self) -> Task {
        Task::Fdi
    }

    fn horizons(&self) -> usize {
        1
    }

    fn predict(&self, sys: &PreparedSystem<'_>, hours: &[usize], _omega: Option<f64>) -> Result<Vec<RMat>, ModelError> {
        Ok(hours
            .iter()
            .map(|_| RMat::from_fn(sys.n(), 1, |_, _| -1.0))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_negative_split_gives_specificity() {
        let m = FdiMetric::from_counts(0.5, 0, 3, 17, 0);
        assert!((m.accuracy - 17.0 / 20.0).abs() < 1e-15);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
    }
}
