//! Topology augmentation: feeder disconnection, new feeders, parameter
//! changes, line breaks and subtree merges applied to a base grid.

use crate::grid::{Branch, BusId, GridError, GridGraph, GridKind};
use crate::linalg::C64;
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashSet, VecDeque};

/// Smallest impedance magnitude a parameter change may leave behind.
pub const MIN_CHANGED_IMPEDANCE: f64 = 1e-6;

/// A connected piece of feeder that can be reattached by a merge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subtree {
    /// The bus that gets tied to the host graph.
    pub root: BusId,
    pub buses: Vec<BusId>,
    pub loads: Vec<C64>,
    pub branches: Vec<Branch>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ReconfigOp {
    FeederDisconnect {
        node: BusId,
    },
    NewFeeder {
        attach_at: BusId,
        new_bus: BusId,
        impedance: C64,
        load: C64,
    },
    ParamChange {
        from: BusId,
        to: BusId,
        delta_z: C64,
    },
    LineBreak {
        from: BusId,
        to: BusId,
    },
    SubtreeMerge {
        subtree_id: usize,
        subtree: Subtree,
        attach_at: BusId,
        tie_impedance: C64,
    },
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReconfigError {
    #[error("operation would disconnect the root bus")]
    WouldDisconnectRoot,
    #[error("removing branch {0}-{1} would split the network")]
    WouldDisconnectGraph(BusId, BusId),
    #[error("merge would create a cycle")]
    CycleCreated,
    #[error("unknown element: {0}")]
    UnknownElement(String),
    #[error("parameter change leaves |z| = {0:e} below the minimum")]
    ImpedanceTooSmall(f64),
    #[error("no configuration satisfying the bounds after {0} attempts")]
    ExhaustedRetries(usize),
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Applies one operation. Surviving buses keep their identifiers and
/// relative order; new buses are appended.
pub fn apply_op(g: &GridGraph, op: &ReconfigOp) -> Result<GridGraph, ReconfigError> {
    apply_op_detailed(g, op).map(|(g, _)| g)
}

/// Like [`apply_op`], also returning the subtree a line break or feeder
/// disconnection cut away.
pub fn apply_op_detailed(
    g: &GridGraph,
    op: &ReconfigOp,
) -> Result<(GridGraph, Option<Subtree>), ReconfigError> {
    let out = match op {
        ReconfigOp::FeederDisconnect { node } => feeder_disconnect(g, *node)?,
        ReconfigOp::NewFeeder {
            attach_at,
            new_bus,
            impedance,
            load,
        } => {
            require_bus(g, *attach_at)?;
            if g.contains(*new_bus) {
                return Err(ReconfigError::UnknownElement(format!(
                    "bus {new_bus} already exists"
                )));
            }
            let mut h = g.clone();
            h.bus_ids.push(*new_bus);
            h.nominal_load.push(*load);
            h.branches.push(Branch::new(*attach_at, *new_bus, *impedance));
            (h, None)
        }
        ReconfigOp::ParamChange { from, to, delta_z } => {
            let i = g
                .find_branch(*from, *to)
                .ok_or_else(|| unknown_branch(*from, *to))?;
            let z = g.branches[i].impedance + delta_z;
            if z.norm() < MIN_CHANGED_IMPEDANCE {
                return Err(ReconfigError::ImpedanceTooSmall(z.norm()));
            }
            let mut h = g.clone();
            h.branches[i].impedance = z;
            (h, None)
        }
        ReconfigOp::LineBreak { from, to } => line_break(g, *from, *to)?,
        ReconfigOp::SubtreeMerge {
            subtree,
            attach_at,
            tie_impedance,
            ..
        } => {
            require_bus(g, *attach_at)?;
            if subtree.buses.iter().any(|&b| g.contains(b)) || !subtree.buses.contains(&subtree.root)
            {
                return Err(ReconfigError::CycleCreated);
            }
            let mut h = g.clone();
            h.bus_ids.extend(&subtree.buses);
            h.nominal_load.extend(&subtree.loads);
            h.branches.extend(subtree.branches.iter().cloned());
            h.branches
                .push(Branch::new(*attach_at, subtree.root, *tie_impedance));
            (h, None)
        }
    };
    out.0.validate().map_err(|e| match e {
        GridError::NotRadial { .. } if matches!(op, ReconfigOp::SubtreeMerge { .. }) => {
            ReconfigError::CycleCreated
        }
        other => ReconfigError::Grid(other),
    })?;
    Ok(out)
}

fn require_bus(g: &GridGraph, b: BusId) -> Result<(), ReconfigError> {
    if g.contains(b) {
        Ok(())
    } else {
        Err(ReconfigError::UnknownElement(format!("bus {b}")))
    }
}

fn unknown_branch(a: BusId, b: BusId) -> ReconfigError {
    ReconfigError::UnknownElement(format!("in-service branch {a}-{b}"))
}

/// Buses reachable from the root over in-service branches.
fn reachable_from_root(g: &GridGraph) -> HashSet<BusId> {
    let adj = g.adjacency();
    let start = g.root_index();
    let mut seen = vec![false; g.n()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..g.n()).filter(|&i| seen[i]).map(|i| g.bus_ids[i]).collect()
}

/// Keeps only buses in `keep`; branches touching removed buses are dropped,
/// and returns what was removed as a subtree rooted at `cut_root`.
fn restrict(g: &GridGraph, keep: &HashSet<BusId>, cut_root: Option<BusId>) -> (GridGraph, Option<Subtree>) {
    let mut h = g.clone();
    let mut removed = Subtree {
        root: cut_root.unwrap_or(0),
        buses: Vec::new(),
        loads: Vec::new(),
        branches: Vec::new(),
    };
    h.bus_ids.clear();
    h.nominal_load.clear();
    for (i, &b) in g.bus_ids.iter().enumerate() {
        if keep.contains(&b) {
            h.bus_ids.push(b);
            h.nominal_load.push(g.nominal_load[i]);
        } else {
            removed.buses.push(b);
            removed.loads.push(g.nominal_load[i]);
        }
    }
    h.branches.clear();
    for br in &g.branches {
        match (keep.contains(&br.from), keep.contains(&br.to)) {
            (true, true) => h.branches.push(br.clone()),
            (false, false) if br.in_service => removed.branches.push(br.clone()),
            _ => {}
        }
    }
    let subtree = match cut_root {
        Some(r) if !removed.buses.is_empty() && removed.buses.contains(&r) => Some(removed),
        _ => None,
    };
    (h, subtree)
}

fn feeder_disconnect(g: &GridGraph, node: BusId) -> Result<(GridGraph, Option<Subtree>), ReconfigError> {
    require_bus(g, node)?;
    if g.root == Some(node) {
        return Err(ReconfigError::WouldDisconnectRoot);
    }
    let mut h = g.clone();
    h.branches.retain(|b| !(b.in_service && (b.from == node || b.to == node)));
    let mut keep = reachable_from_root(&h);
    keep.remove(&node);
    if g.kind == GridKind::Transmission && keep.len() + 1 != g.n() {
        return Err(ReconfigError::WouldDisconnectGraph(node, node));
    }
    let (h, _) = restrict(&h, &keep, None);
    Ok((h, None))
}

fn line_break(g: &GridGraph, a: BusId, b: BusId) -> Result<(GridGraph, Option<Subtree>), ReconfigError> {
    let i = g.find_branch(a, b).ok_or_else(|| unknown_branch(a, b))?;
    let mut h = g.clone();
    h.branches[i].in_service = false;
    let keep = reachable_from_root(&h);
    if keep.len() == g.n() {
        return Ok((h, None));
    }
    if g.kind == GridKind::Transmission {
        return Err(ReconfigError::WouldDisconnectGraph(a, b));
    }
    let cut_root = if keep.contains(&a) { b } else { a };
    // The broken line leaves the graph with its downstream subtree.
    h.branches.remove(i);
    let (h, sub) = restrict(&h, &keep, Some(cut_root));
    Ok((h, sub))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub q_count: usize,
    /// Inclusive range of simultaneous operations per generated graph.
    pub ops_per_graph: (usize, usize),
    /// Inclusive range of allowed bus counts.
    pub node_bounds: (usize, usize),
    pub seed: u64,
    /// Relative half-width of parameter changes on each of r and x.
    pub param_change_range: f64,
    pub max_retries: usize,
    pub feeder_disconnect: bool,
    pub new_feeder: bool,
    pub param_change: bool,
    pub line_break: bool,
    pub subtree_merge: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            q_count: 60,
            ops_per_graph: (1, 4),
            node_bounds: (22, 38),
            seed: 0,
            param_change_range: 0.3,
            max_retries: 50,
            feeder_disconnect: true,
            new_feeder: true,
            param_change: true,
            line_break: true,
            subtree_merge: true,
        }
    }
}

impl AugmentConfig {
    /// Line outages and parameter changes only.
    pub fn transmission(q_count: usize, n: usize, seed: u64) -> Self {
        Self {
            q_count,
            ops_per_graph: (1, 3),
            node_bounds: (n, n),
            seed,
            feeder_disconnect: false,
            new_feeder: false,
            subtree_merge: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ReconfigError> {
        let bad = |m: &str| Err(ReconfigError::InvalidConfig(m.to_string()));
        if self.q_count < 1 {
            return bad("q_count must be at least 1");
        }
        if self.ops_per_graph.0 > self.ops_per_graph.1 {
            return bad("ops_per_graph min exceeds max");
        }
        if self.node_bounds.0 > self.node_bounds.1 {
            return bad("node_bounds min exceeds max");
        }
        if !(self.param_change_range >= 0.0 && self.param_change_range < 1.0) {
            return bad("param_change_range must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedGraph {
    pub graph: GridGraph,
    pub ops: Vec<ReconfigOp>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Variant {
    FeederDisconnect,
    NewFeeder,
    ParamChange,
    LineBreak,
    SubtreeMerge,
}

struct Sampler<'a> {
    base: &'a GridGraph,
    cfg: &'a AugmentConfig,
    base_impedances: Vec<C64>,
    base_loads: Vec<C64>,
}

impl<'a> Sampler<'a> {
    fn new(base: &'a GridGraph, cfg: &'a AugmentConfig) -> Self {
        let base_impedances: Vec<C64> = base.in_service().map(|b| b.impedance).collect();
        let root = base.root_index();
        let mut base_loads: Vec<C64> = base
            .nominal_load
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != root)
            .map(|(_, &l)| l)
            .collect();
        if base_loads.is_empty() {
            base_loads.push(C64::new(0.0, 0.0));
        }
        Self {
            base,
            cfg,
            base_impedances,
            base_loads,
        }
    }

    fn variants(&self, g: &GridGraph, pool: &[Subtree]) -> Vec<Variant> {
        let c = self.cfg;
        let mut v = Vec::new();
        let distribution = g.kind == GridKind::Distribution;
        if c.feeder_disconnect && distribution && !g.leaves().is_empty() {
            v.push(Variant::FeederDisconnect);
        }
        if c.new_feeder && distribution {
            v.push(Variant::NewFeeder);
        }
        if c.param_change && g.in_service().next().is_some() {
            v.push(Variant::ParamChange);
        }
        if c.line_break && g.in_service().next().is_some() {
            v.push(Variant::LineBreak);
        }
        if c.subtree_merge && distribution {
            v.push(Variant::SubtreeMerge);
        }
        let _ = pool;
        v
    }

    fn sample(
        &self,
        rng: &mut ChaCha8Rng,
        g: &GridGraph,
        pool: &[Subtree],
        next_id: &mut BusId,
    ) -> Option<ReconfigOp> {
        let variants = self.variants(g, pool);
        let variant = *variants.choose(rng)?;
        let live: Vec<&Branch> = g.in_service().collect();
        Some(match variant {
            Variant::FeederDisconnect => {
                let leaves = g.leaves();
                let i = *leaves.choose(rng)?;
                ReconfigOp::FeederDisconnect {
                    node: g.bus_ids[i],
                }
            }
            Variant::NewFeeder => {
                let new_bus = *next_id;
                *next_id += 1;
                ReconfigOp::NewFeeder {
                    attach_at: *g.bus_ids.choose(rng)?,
                    new_bus,
                    impedance: *self.base_impedances.choose(rng)?,
                    load: *self.base_loads.choose(rng)?,
                }
            }
            Variant::ParamChange => {
                let br = live.choose(rng)?;
                let r = self.cfg.param_change_range;
                let (ur, ui) = if r > 0.0 {
                    (rng.gen_range(-r..r), rng.gen_range(-r..r))
                } else {
                    (0.0, 0.0)
                };
                ReconfigOp::ParamChange {
                    from: br.from,
                    to: br.to,
                    delta_z: C64::new(br.impedance.re * ur, br.impedance.im * ui),
                }
            }
            Variant::LineBreak => {
                let br = live.choose(rng)?;
                ReconfigOp::LineBreak {
                    from: br.from,
                    to: br.to,
                }
            }
            Variant::SubtreeMerge => {
                let (subtree_id, subtree) = if pool.is_empty() {
                    (usize::MAX, self.synthesize_subtree(rng, next_id))
                } else {
                    let k = rng.gen_range(0..pool.len());
                    (k, pool[k].clone())
                };
                ReconfigOp::SubtreeMerge {
                    subtree_id,
                    subtree,
                    attach_at: *g.bus_ids.choose(rng)?,
                    tie_impedance: *self.base_impedances.choose(rng)?,
                }
            }
        })
    }

    /// A fresh 1-3 bus chain or star with base-case impedances and loads.
    fn synthesize_subtree(&self, rng: &mut ChaCha8Rng, next_id: &mut BusId) -> Subtree {
        let size = rng.gen_range(1..=3);
        let buses: Vec<BusId> = (0..size)
            .map(|_| {
                let id = *next_id;
                *next_id += 1;
                id
            })
            .collect();
        let loads = (0..size)
            .map(|_| *self.base_loads.choose(rng).unwrap())
            .collect();
        let branches = (1..size)
            .map(|k| {
                let parent = if rng.gen_bool(0.5) { buses[0] } else { buses[k - 1] };
                Branch::new(parent, buses[k], *self.base_impedances.choose(rng).unwrap())
            })
            .collect();
        Subtree {
            root: buses[0],
            buses,
            loads,
            branches,
        }
    }

    fn generate_one(&self, q: usize) -> Result<AugmentedGraph, ReconfigError> {
        let cfg = self.cfg;
        let mut rng = rng::stream(cfg.seed, &[rng::tag::AUGMENT, q as u64]);
        let (lo, hi) = cfg.node_bounds;
        for _ in 0..cfg.max_retries.max(1) {
            let n_ops = rng.gen_range(cfg.ops_per_graph.0..=cfg.ops_per_graph.1);
            let mut g = self.base.clone();
            let mut ops = Vec::with_capacity(n_ops);
            let mut pool: Vec<Subtree> = Vec::new();
            let mut next_id = self.base.max_bus_id() + 1;
            let mut failed = false;
            for _ in 0..n_ops {
                let mut applied = false;
                for _ in 0..cfg.max_retries.max(1) {
                    let Some(op) = self.sample(&mut rng, &g, &pool, &mut next_id) else {
                        break;
                    };
                    let Ok((h, cut)) = apply_op_detailed(&g, &op) else {
                        continue;
                    };
                    if h.n() < lo || h.n() > hi {
                        continue;
                    }
                    if let ReconfigOp::SubtreeMerge { subtree_id, .. } = &op {
                        if *subtree_id < pool.len() {
                            pool.remove(*subtree_id);
                        }
                    }
                    if let Some(sub) = cut {
                        pool.push(sub);
                    }
                    g = h;
                    ops.push(op);
                    applied = true;
                    break;
                }
                if !applied {
                    failed = true;
                    break;
                }
            }
            if !failed && g.n() >= lo && g.n() <= hi {
                return Ok(AugmentedGraph { graph: g, ops });
            }
        }
        Err(ReconfigError::ExhaustedRetries(cfg.max_retries))
    }
}

/// Generates `q_count` reconfigured variants of `base`. Graph `q` depends
/// only on `(base, cfg, q)`.
pub fn augment(base: &GridGraph, cfg: &AugmentConfig) -> Result<Vec<AugmentedGraph>, ReconfigError> {
    cfg.validate()?;
    let sampler = Sampler::new(base, cfg);
    (0..cfg.q_count).map(|q| sampler.generate_one(q)).collect()
}

/// Outage and parameter-change variants of a meshed network; line breaks
/// that would split the network are resampled.
pub fn transmission_augment(
    base: &GridGraph,
    cfg: &AugmentConfig,
) -> Result<Vec<AugmentedGraph>, ReconfigError> {
    if base.kind != GridKind::Transmission {
        return Err(ReconfigError::InvalidConfig(
            "transmission_augment needs a transmission base graph".into(),
        ));
    }
    let cfg = AugmentConfig {
        feeder_disconnect: false,
        new_feeder: false,
        subtree_merge: false,
        ..cfg.clone()
    };
    augment(base, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_admittance;
    use crate::grid::tests::chain;

    #[test]
    fn line_break_removes_downstream_subtree() {
        let g = chain(4, C64::new(0.1, 0.05));
        let (h, cut) = apply_op_detailed(&g, &ReconfigOp::LineBreak { from: 2, to: 3 }).unwrap();
        assert_eq!(h.bus_ids, vec![1, 2]);
        assert!(h.is_rooted_tree());
        let cut = cut.unwrap();
        assert_eq!(cut.root, 3);
        assert_eq!(cut.buses, vec![3, 4]);
        assert_eq!(cut.branches.len(), 1);
    }

    #[test]
    fn feeder_disconnect_leaf() {
        let g = chain(6, C64::new(0.1, 0.05));
        let h = apply_op(&g, &ReconfigOp::FeederDisconnect { node: 6 }).unwrap();
        assert_eq!(h.n(), 5);
        assert!(h.is_rooted_tree());
        assert_eq!(
            apply_op(&g, &ReconfigOp::FeederDisconnect { node: 1 }),
            Err(ReconfigError::WouldDisconnectRoot)
        );
    }

    #[test]
    fn merge_three_node_subtree() {
        let g = chain(10, C64::new(0.1, 0.05));
        let sub = Subtree {
            root: 20,
            buses: vec![20, 21, 22],
            loads: vec![C64::new(0.01, 0.0); 3],
            branches: vec![
                Branch::new(20, 21, C64::new(0.1, 0.1)),
                Branch::new(20, 22, C64::new(0.1, 0.1)),
            ],
        };
        let op = ReconfigOp::SubtreeMerge {
            subtree_id: 0,
            subtree: sub.clone(),
            attach_at: 5,
            tie_impedance: C64::new(0.2, 0.1),
        };
        let h = apply_op(&g, &op).unwrap();
        assert_eq!(h.n(), 13);
        assert_eq!(h.in_service().count(), 12);
        assert!(h.is_rooted_tree());
        // Reattaching onto buses that already exist would close a loop.
        let clash = ReconfigOp::SubtreeMerge {
            subtree_id: 0,
            subtree: Subtree {
                root: 3,
                buses: vec![3],
                loads: vec![C64::new(0.0, 0.0)],
                branches: vec![],
            },
            attach_at: 5,
            tie_impedance: C64::new(0.2, 0.1),
        };
        assert_eq!(apply_op(&g, &clash), Err(ReconfigError::CycleCreated));
    }

    #[test]
    fn unknown_elements() {
        let g = chain(3, C64::new(0.1, 0.05));
        assert!(matches!(
            apply_op(&g, &ReconfigOp::LineBreak { from: 1, to: 3 }),
            Err(ReconfigError::UnknownElement(_))
        ));
        assert!(matches!(
            apply_op(&g, &ReconfigOp::FeederDisconnect { node: 9 }),
            Err(ReconfigError::UnknownElement(_))
        ));
        assert!(matches!(
            apply_op(
                &g,
                &ReconfigOp::ParamChange {
                    from: 1,
                    to: 2,
                    delta_z: C64::new(-0.1, -0.05)
                }
            ),
            Err(ReconfigError::ImpedanceTooSmall(_))
        ));
    }

    #[test]
    fn identity_augmentation() {
        let g = chain(5, C64::new(0.1, 0.05));
        let cfg = AugmentConfig {
            q_count: 1,
            ops_per_graph: (0, 0),
            node_bounds: (1, 10),
            ..AugmentConfig::default()
        };
        let out = augment(&g, &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].graph, g);
        assert!(out[0].ops.is_empty());
    }

    #[test]
    fn zero_param_change_is_electrically_identical() {
        let g = crate::caseio::bundled_graph("ieee30").unwrap();
        let br = g.in_service().next().unwrap();
        let h = apply_op(
            &g,
            &ReconfigOp::ParamChange {
                from: br.from,
                to: br.to,
                delta_z: C64::new(0.0, 0.0),
            },
        )
        .unwrap();
        let diff = build_admittance(&g)
            .unwrap()
            .sub(&build_admittance(&h).unwrap())
            .unwrap();
        assert!(diff.max_abs() < 1e-12);
    }

    #[test]
    fn bridge_removal_is_rejected_in_transmission() {
        let g = crate::caseio::bundled_graph("ieee30").unwrap();
        // Bus 26 hangs off bus 25 through a single line.
        let err = apply_op(&g, &ReconfigOp::LineBreak { from: 25, to: 26 });
        assert_eq!(err, Err(ReconfigError::WouldDisconnectGraph(25, 26)));
    }

    #[test]
    fn invalid_config() {
        let g = chain(3, C64::new(0.1, 0.05));
        let cfg = AugmentConfig {
            ops_per_graph: (3, 1),
            ..AugmentConfig::default()
        };
        assert!(matches!(augment(&g, &cfg), Err(ReconfigError::InvalidConfig(_))));
        let cfg = AugmentConfig {
            q_count: 2,
            node_bounds: (30, 40),
            max_retries: 3,
            ..AugmentConfig::default()
        };
        assert_eq!(augment(&g, &cfg), Err(ReconfigError::ExhaustedRetries(3)));
    }
}
