//! Dataset families: augment a base case, canonicalize each variant, then
//! simulate scenarios (and attacks for the FDI task).

use crate::caseio::{bundled_graph, CaseError};
use crate::fdi::fdi_sensor_count;
use crate::grid::{GridGraph, GridKind};
use crate::model::Task;
use crate::par::par_map;
use crate::reconfig::{augment, transmission_augment, AugmentConfig, AugmentedGraph, ReconfigError};
use crate::rng;
use crate::scenario::{attach_attacks, generate_scenario, AttackConfig, MeasurementScenario, ScenarioConfig, ScenarioError, ScenarioSet};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    /// Bundled case name or path to a case file.
    pub case: String,
    pub task: Task,
    /// Number of reconfigured variants.
    pub q: usize,
    /// Keep the unmodified base topology as the first member.
    pub include_base: bool,
    pub augment: AugmentConfig,
    pub scenario: ScenarioConfig,
    pub attack: AttackConfig,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            case: "ieee33".into(),
            task: Task::Forecast,
            q: 60,
            include_base: false,
            augment: AugmentConfig::default(),
            scenario: ScenarioConfig::default(),
            attack: AttackConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Reconfig(#[from] ReconfigError),
    #[error("system {name}: {source}")]
    Scenario { name: String, source: ScenarioError },
}

/// Reconfigured variants of the base case. Transmission cases only receive
/// outages and parameter changes and keep their bus count.
pub fn family_graphs(base: &GridGraph, cfg: &FamilyConfig, seed: u64) -> Result<Vec<AugmentedGraph>, PipelineError> {
    let mut aug = AugmentConfig {
        q_count: cfg.q,
        seed: rng::derive_seed(seed, &[rng::tag::AUGMENT]),
        ..cfg.augment.clone()
    };
    let mut out = Vec::new();
    if cfg.include_base {
        out.push(AugmentedGraph {
            graph: base.clone(),
            ops: Vec::new(),
        });
    }
    if cfg.q == 0 {
        return Ok(out);
    }
    let variants = match base.kind {
        GridKind::Distribution => augment(base, &aug)?,
        GridKind::Transmission => {
            aug.node_bounds = (base.n(), base.n());
            transmission_augment(base, &aug)?
        }
    };
    out.extend(variants);
    Ok(out)
}

/// Builds every member of a family. Member `i` depends only on
/// `(cfg, seed, i)`, so the result does not depend on `jobs`.
pub fn generate_family(cfg: &FamilyConfig, seed: u64, jobs: usize) -> Result<Vec<ScenarioSet>, PipelineError> {
    let base = bundled_graph(&cfg.case)?;
    let graphs = family_graphs(&base, cfg, seed)?;
    let stem = std::path::Path::new(&cfg.case)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| cfg.case.clone());
    let results = par_map(&graphs, jobs, |i, ag| {
        let name = if cfg.include_base && i == 0 {
            format!("{stem}-base")
        } else {
            format!("{stem}-q{:03}", i - usize::from(cfg.include_base))
        };
        let graph = ag.graph.canonicalized();
        let mut sc = cfg.scenario.clone();
        if cfg.task == Task::Fdi {
            sc.scenario = Some(MeasurementScenario::Pmu);
            sc.pmu_count = sc.pmu_count.or(Some(fdi_sensor_count(graph.n())));
        }
        let wrap = |source| PipelineError::Scenario {
            name: name.clone(),
            source,
        };
        let mut set = generate_scenario(&name, &graph, &ag.ops, &sc, seed, i as u64).map_err(wrap)?;
        if cfg.task == Task::Fdi {
            attach_attacks(&mut set, &cfg.attack, seed, i as u64).map_err(wrap)?;
        }
        Ok(set)
    });
    results.into_iter().collect()
}
