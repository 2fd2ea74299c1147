//! Phasor scenario generation: profiles, power flow, measurements,
//! estimation and (optionally) stealth attacks for one grid graph.

pub mod estimation;
pub mod features;
pub mod powerflow;
pub mod profiles;

use crate::fdi::{self, AttackScenario, FdiError};
use crate::grid::{build_admittance, build_gso_with, GridError, GridGraph, GridKind};
use crate::linalg::{regularized_operator, LinalgError, C64};
use crate::reconfig::ReconfigOp;
use crate::rng;
use estimation::{ami_placement, build_pmu_matrix, estimate_ami, pmu_placement, AmiConfig, AmiMeasurements};
pub use estimation::RidgeCenter;
use powerflow::{solve_powerflow, PowerFlowError};
use profiles::{synth_profiles_with, ProfileConfig, ProfileSet};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use estimation::EstimationError;
pub use features::{build_features, feature_window, FeatureError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementScenario {
    Ami,
    Pmu,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScenarioError {
    #[error("power flow failed at hour {t}: {source}")]
    PowerFlow { t: usize, source: PowerFlowError },
    #[error("voltage magnitude {vmag} at hour {t} is outside the sanity band")]
    VoltageOutOfBand { t: usize, vmag: f64 },
    #[error("estimation failed at hour {t}: {source}")]
    Estimation { t: usize, source: EstimationError },
    #[error("profile set has {found} buses, graph has {expected}")]
    ProfileShape { found: usize, expected: usize },
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Fdi(#[from] FdiError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub t_total: usize,
    /// Defaults to AMI on distribution graphs and PMU on transmission graphs.
    pub scenario: Option<MeasurementScenario>,
    /// Per-component standard deviation of measurement noise.
    pub noise_sigma: f64,
    /// Overrides `noise_sigma` on PMU current channels.
    pub current_noise_sigma: Option<f64>,
    pub ami_fraction: f64,
    /// Defaults to 0.2 on distribution graphs and 0.3 on transmission graphs.
    pub pmu_fraction: Option<f64>,
    /// Exact PMU count; wins over `pmu_fraction`.
    pub pmu_count: Option<usize>,
    pub lambda: f64,
    pub ridge_center: RidgeCenter,
    pub mu1: f64,
    /// Multiplier on nominal loads. `None` keeps distribution loads as they
    /// are and picks a transmission scale with [`calibrate_load_scale`].
    pub load_scale: Option<f64>,
    pub gso_normalize: bool,
    pub profile: ProfileConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            t_total: 240,
            scenario: None,
            noise_sigma: 0.002,
            current_noise_sigma: None,
            ami_fraction: 0.4,
            pmu_fraction: None,
            pmu_count: None,
            lambda: 1e-3,
            ridge_center: RidgeCenter::Flat,
            mu1: 1e-3,
            load_scale: None,
            gso_normalize: true,
            profile: ProfileConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidConfig(m.to_string()));
        if self.t_total < 1 {
            return bad("t_total must be at least 1");
        }
        if !(self.noise_sigma >= 0.0) || self.current_noise_sigma.is_some_and(|s| !(s >= 0.0)) {
            return bad("noise levels must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.ami_fraction) || self.pmu_fraction.is_some_and(|f| !(0.0..=1.0).contains(&f)) {
            return bad("sensor fractions must lie in [0, 1]");
        }
        if !(self.lambda >= 0.0 && self.mu1 >= 0.0) {
            return bad("regularization weights must be nonnegative");
        }
        if self.load_scale.is_some_and(|s| !(s > 0.0)) {
            return bad("load_scale must be positive");
        }
        Ok(())
    }

    fn scenario_for(&self, kind: GridKind) -> MeasurementScenario {
        self.scenario.unwrap_or(match kind {
            GridKind::Distribution => MeasurementScenario::Ami,
            GridKind::Transmission => MeasurementScenario::Pmu,
        })
    }

    fn pmu_count_for(&self, g: &GridGraph) -> usize {
        self.pmu_count.unwrap_or_else(|| {
            let f = self.pmu_fraction.unwrap_or(match g.kind {
                GridKind::Distribution => 0.2,
                GridKind::Transmission => 0.3,
            });
            (f * g.n() as f64).ceil() as usize
        })
    }
}

/// An attack applied at hour `t`, with the resulting shift of the
/// state estimate at ω = 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub t: usize,
    pub attack: AttackScenario,
    pub estimate_shift: Vec<C64>,
}

/// Time series for one system, indexed `[t][bus]` in graph bus order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub schema_version: u32,
    pub name: String,
    pub graph: GridGraph,
    pub scenario: MeasurementScenario,
    pub t_total: usize,
    pub true_states: Vec<Vec<C64>>,
    pub estimates: Vec<Vec<C64>>,
    /// Bus ids carrying smart meters.
    pub ami_set: Vec<u32>,
    /// Bus ids carrying PMUs.
    pub pmu_set: Vec<u32>,
    pub noise_sigma: f64,
    pub load_scale: f64,
    pub attacks: Vec<AttackRecord>,
    pub op_log: Vec<ReconfigOp>,
}

impl ScenarioSet {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn attack_at(&self, t: usize) -> Option<&AttackRecord> {
        self.attacks
            .binary_search_by_key(&t, |a| a.t)
            .ok()
            .map(|i| &self.attacks[i])
    }

    fn indices(&self, ids: &[u32]) -> Vec<usize> {
        let index = self.graph.index_map();
        ids.iter().map(|id| index[id]).collect()
    }

    pub fn pmu_indices(&self) -> Vec<usize> {
        self.indices(&self.pmu_set)
    }

    pub fn ami_indices(&self) -> Vec<usize> {
        self.indices(&self.ami_set)
    }
}

/// Net complex demand at hour `t` with nominal loads scaled by `scale`.
pub fn demand_at(g: &GridGraph, prof: &ProfileSet, t: usize, scale: f64) -> Vec<C64> {
    g.nominal_load
        .iter()
        .enumerate()
        .map(|(n, l)| {
            let p = l.re * prof.p[t][n] - l.re.abs() * prof.pv[t][n];
            C64::new(p, l.im * prof.q[t][n]) * scale
        })
        .collect()
}

/// Largest scale (halving from 1) under which nominal loads at 1.5 times
/// their level still solve with every voltage magnitude above 0.9.
pub fn calibrate_load_scale(g: &GridGraph) -> f64 {
    let mut scale = 1.0;
    for _ in 0..40 {
        let d: Vec<C64> = g.nominal_load.iter().map(|l| l * (1.5 * scale)).collect();
        if let Ok(v) = solve_powerflow(g, &d) {
            if v.iter().all(|x| x.norm() > 0.9) {
                return scale;
            }
        }
        scale *= 0.5;
    }
    scale
}

/// Simulates one system with synthetic profiles keyed by `(seed, index)`.
pub fn generate_scenario(
    name: &str,
    graph: &GridGraph,
    op_log: &[ReconfigOp],
    cfg: &ScenarioConfig,
    seed: u64,
    index: u64,
) -> Result<ScenarioSet, ScenarioError> {
    cfg.validate()?;
    let prof = synth_profiles_with(
        graph.n(),
        cfg.t_total,
        rng::derive_seed(seed, &[rng::tag::PROFILE, index]),
        &cfg.profile,
    );
    generate_with_profiles(name, graph, op_log, &prof, cfg, seed, index)
}

pub fn generate_with_profiles(
    name: &str,
    graph: &GridGraph,
    op_log: &[ReconfigOp],
    prof: &ProfileSet,
    cfg: &ScenarioConfig,
    seed: u64,
    index: u64,
) -> Result<ScenarioSet, ScenarioError> {
    cfg.validate()?;
    if prof.n_buses() != graph.n() {
        return Err(ScenarioError::ProfileShape {
            found: prof.n_buses(),
            expected: graph.n(),
        });
    }
    let t_total = prof.t_total();
    let n = graph.n();
    let scale = cfg.load_scale.unwrap_or_else(|| match graph.kind {
        GridKind::Distribution => 1.0,
        GridKind::Transmission => calibrate_load_scale(graph),
    });
    let y = build_admittance(graph)?;
    let s = build_gso_with(&y, cfg.gso_normalize)?.matrix;
    let root = graph.root_index();

    let mut truth = Vec::with_capacity(t_total);
    for t in 0..t_total {
        let v = solve_powerflow(graph, &demand_at(graph, prof, t, scale))
            .map_err(|source| ScenarioError::PowerFlow { t, source })?;
        if let Some(bad) = v.iter().map(|x| x.norm()).find(|m| !(0.5..1.5).contains(m)) {
            return Err(ScenarioError::VoltageOutOfBand { t, vmag: bad });
        }
        truth.push(v);
    }

    let mut noise_rng = rng::stream(seed, &[rng::tag::NOISE, index]);
    let mut placement_rng = rng::stream(seed, &[rng::tag::PLACEMENT, index]);
    let scenario = cfg.scenario_for(graph.kind);
    let ami = ami_placement(graph, cfg.ami_fraction);
    let pmu = pmu_placement(n, cfg.pmu_count_for(graph), &mut placement_rng);
    let mut estimates = Vec::with_capacity(t_total);
    match scenario {
        MeasurementScenario::Ami => {
            let noise = Normal::new(0.0, cfg.noise_sigma).unwrap();
            let ami_cfg = AmiConfig {
                lambda: cfg.lambda,
                center: cfg.ridge_center,
                ..AmiConfig::default()
            };
            for (t, v) in truth.iter().enumerate() {
                let mut m = AmiMeasurements::from_state(&y, v, &ami);
                for x in m.p.iter_mut().chain(&mut m.q).chain(&mut m.vmag) {
                    *x += noise.sample(&mut noise_rng);
                }
                let est = estimate_ami(&y, &m, root, &ami_cfg)
                    .map_err(|source| ScenarioError::Estimation { t, source })?;
                estimates.push(est.state);
            }
        }
        MeasurementScenario::Pmu => {
            let h = build_pmu_matrix(&y, &pmu);
            let op = regularized_operator(&h, &s, cfg.mu1)?;
            let k = pmu.len();
            let v_noise = Normal::new(0.0, cfg.noise_sigma).unwrap();
            let i_noise = Normal::new(0.0, cfg.current_noise_sigma.unwrap_or(cfg.noise_sigma)).unwrap();
            for v in &truth {
                let mut z = h.mul_vec(v)?;
                for (r, x) in z.iter_mut().enumerate() {
                    let d = if r < k { &i_noise } else { &v_noise };
                    *x += C64::new(d.sample(&mut noise_rng), d.sample(&mut noise_rng));
                }
                estimates.push(op.mul_vec(&z)?);
            }
        }
    }

    let ids = |set: &[usize]| set.iter().map(|&i| graph.bus_ids[i]).collect::<Vec<_>>();
    Ok(ScenarioSet {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        graph: graph.clone(),
        scenario,
        t_total,
        true_states: truth,
        estimates,
        ami_set: ids(&ami),
        pmu_set: if scenario == MeasurementScenario::Pmu { ids(&pmu) } else { Vec::new() },
        noise_sigma: cfg.noise_sigma,
        load_scale: scale,
        attacks: Vec::new(),
        op_log: op_log.to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    /// First hour that receives an attack draw.
    pub first_hour: usize,
    /// Resamples of the compromised set when the null space is trivial.
    pub max_resamples: usize,
    pub mu1: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            first_hour: features::DEFAULT_WINDOW - 1,
            max_resamples: 20,
            mu1: 1e-3,
        }
    }
}

/// Draws one stealth attack per hour from `first_hour` on. Attacks with an
/// empty compromised set are kept as all-zero labels.
pub fn attach_attacks(set: &mut ScenarioSet, cfg: &AttackConfig, seed: u64, index: u64) -> Result<(), ScenarioError> {
    let pmu = set.pmu_indices();
    if pmu.is_empty() {
        return Err(ScenarioError::InvalidConfig("attacks need a PMU scenario".into()));
    }
    let y = build_admittance(&set.graph)?;
    let s = build_gso_with(&y, true)?.matrix;
    let h = build_pmu_matrix(&y, &pmu);
    let op = regularized_operator(&h, &s, cfg.mu1)?;
    let n = set.n();
    let mut records = Vec::new();
    for t in cfg.first_hour..set.t_total {
        let mut r = rng::stream(seed, &[rng::tag::ATTACK, index, t as u64]);
        let mut chosen = None;
        for _ in 0..=cfg.max_resamples {
            let (picks, omega) = fdi::sample_attack_config_with(pmu.len(), &mut r);
            let target: Vec<usize> = picks.iter().map(|&k| pmu[k]).collect();
            match fdi::build_stealth_attack_with(&y, &pmu, &target, omega, &mut r) {
                Ok(a) => {
                    chosen = Some(a);
                    break;
                }
                Err(FdiError::InfeasibleAttack) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        let attack = chosen.unwrap_or_else(|| AttackScenario::none(n));
        let estimate_shift = op.mul_vec(&h.mul_vec(&attack.delta_v)?)?;
        records.push(AttackRecord {
            t,
            attack,
            estimate_shift,
        });
    }
    set.attacks = records;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ami_scenario_on_33_bus() {
        let g = crate::caseio::bundled_graph("ieee33").unwrap().canonicalized();
        let cfg = ScenarioConfig {
            t_total: 24,
            ..ScenarioConfig::default()
        };
        let a = generate_scenario("ieee33", &g, &[], &cfg, 1, 0).unwrap();
        assert_eq!(a.true_states.len(), 24);
        assert_eq!(a.ami_set.len(), 14);
        assert_eq!(a.scenario, MeasurementScenario::Ami);
        let b = generate_scenario("ieee33", &g, &[], &cfg, 1, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pmu_scenario_with_attacks() {
        let g = crate::caseio::bundled_graph("ieee30").unwrap().canonicalized();
        let cfg = ScenarioConfig {
            t_total: 16,
            pmu_count: Some(15),
            ..ScenarioConfig::default()
        };
        let mut set = generate_scenario("ieee30", &g, &[], &cfg, 2, 0).unwrap();
        assert_eq!(set.pmu_set.len(), 15);
        attach_attacks(&mut set, &AttackConfig::default(), 2, 0).unwrap();
        assert_eq!(set.attacks.len(), 16 - 9);
        assert!(set.attack_at(12).is_some());
        let y = build_admittance(&set.graph).unwrap();
        for rec in &set.attacks {
            let r = fdi::stealth_residual(&y, &set.pmu_indices(), &rec.attack);
            assert!(r < 1e-10, "residual {r:e} for {:?}", rec.attack.compromised);
        }
    }
}
