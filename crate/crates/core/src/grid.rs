//! Grid graphs, nodal admittance matrices and the graph shift operator.

use crate::linalg::{ComplexMatrix, LinalgError, C64};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};

pub type BusId = u32;

/// Impedances below this magnitude are rejected as short circuits.
pub const MIN_IMPEDANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Distribution,
    Transmission,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    /// Series impedance, p.u.
    pub impedance: C64,
    pub in_service: bool,
}

impl Branch {
    pub fn new(from: BusId, to: BusId, impedance: C64) -> Self {
        Self {
            from,
            to,
            impedance,
            in_service: true,
        }
    }

    pub fn connects(&self, a: BusId, b: BusId) -> bool {
        (self.from == a && self.to == b) || (self.from == b && self.to == a)
    }

    pub fn other(&self, bus: BusId) -> BusId {
        if self.from == bus {
            self.to
        } else {
            self.from
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GridError {
    #[error("duplicate bus id {0}")]
    DuplicateBus(BusId),
    #[error("branch {0}-{1} references an unknown bus")]
    UnknownBus(BusId, BusId),
    #[error("self-loop at bus {0}")]
    SelfLoop(BusId),
    #[error("duplicate in-service branch {0}-{1}")]
    DuplicateBranch(BusId, BusId),
    #[error("in-service branch {0}-{1} has zero impedance")]
    ZeroImpedance(BusId, BusId),
    #[error("distribution graph requires a root bus")]
    MissingRoot,
    #[error("root bus {0} is not part of the graph")]
    UnknownRoot(BusId),
    #[error("in-service branches do not form a spanning tree ({edges} edges, {buses} buses, connected: {connected})")]
    NotRadial {
        edges: usize,
        buses: usize,
        connected: bool,
    },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("nominal load vector has {0} entries for {1} buses")]
    LoadLength(usize, usize),
}

/// A bus-branch network model.
///
/// Buses are stored in an explicit order; every matrix and signal derived
/// from the graph uses that order. [`GridGraph::canonicalized`] reorders the
/// buses breadth-first from the root, which is the order the pooling layer
/// and the output head rely on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGraph {
    pub bus_ids: Vec<BusId>,
    /// Nominal complex demand per bus (p.u.), same order as `bus_ids`.
    pub nominal_load: Vec<C64>,
    pub branches: Vec<Branch>,
    pub root: Option<BusId>,
    pub kind: GridKind,
}

impl GridGraph {
    pub fn new(
        bus_ids: Vec<BusId>,
        nominal_load: Vec<C64>,
        branches: Vec<Branch>,
        root: Option<BusId>,
        kind: GridKind,
    ) -> Result<Self, GridError> {
        let g = Self {
            bus_ids,
            nominal_load,
            branches,
            root,
            kind,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.nominal_load.len() != self.bus_ids.len() {
            return Err(GridError::LoadLength(
                self.nominal_load.len(),
                self.bus_ids.len(),
            ));
        }
        let index = self.index_map_checked()?;
        let mut seen = HashMap::new();
        for b in &self.branches {
            if !index.contains_key(&b.from) || !index.contains_key(&b.to) {
                return Err(GridError::UnknownBus(b.from, b.to));
            }
            if b.from == b.to {
                return Err(GridError::SelfLoop(b.from));
            }
            if !b.in_service {
                continue;
            }
            if b.impedance.norm() < MIN_IMPEDANCE {
                return Err(GridError::ZeroImpedance(b.from, b.to));
            }
            let key = (b.from.min(b.to), b.from.max(b.to));
            if seen.insert(key, ()).is_some() {
                return Err(GridError::DuplicateBranch(key.0, key.1));
            }
        }
        if let Some(r) = self.root {
            if !index.contains_key(&r) {
                return Err(GridError::UnknownRoot(r));
            }
        }
        let connected = self.is_connected();
        match self.kind {
            GridKind::Distribution => {
                if self.root.is_none() {
                    return Err(GridError::MissingRoot);
                }
                let edges = self.in_service().count();
                if !connected || edges + 1 != self.n() {
                    return Err(GridError::NotRadial {
                        edges,
                        buses: self.n(),
                        connected,
                    });
                }
            }
            GridKind::Transmission => {
                if !connected {
                    return Err(GridError::Disconnected);
                }
            }
        }
        Ok(())
    }

    fn index_map_checked(&self) -> Result<HashMap<BusId, usize>, GridError> {
        let mut map = HashMap::with_capacity(self.bus_ids.len());
        for (i, &id) in self.bus_ids.iter().enumerate() {
            if map.insert(id, i).is_some() {
                return Err(GridError::DuplicateBus(id));
            }
        }
        Ok(map)
    }

    pub fn n(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn index_map(&self) -> HashMap<BusId, usize> {
        self.bus_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect()
    }

    pub fn index_of(&self, id: BusId) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == id)
    }

    pub fn contains(&self, id: BusId) -> bool {
        self.bus_ids.contains(&id)
    }

    pub fn in_service(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|b| b.in_service)
    }

    pub fn root_index(&self) -> usize {
        self.root.and_then(|r| self.index_of(r)).unwrap_or(0)
    }

    /// In-service neighbors per bus index, sorted by neighbor bus id.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let index = self.index_map();
        let mut adj = vec![Vec::new(); self.n()];
        for b in self.in_service() {
            let (Some(&i), Some(&j)) = (index.get(&b.from), index.get(&b.to)) else {
                continue;
            };
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_by_key(|&j| self.bus_ids[j]);
            list.dedup();
        }
        adj
    }

    /// Breadth-first bus indices from the root, visiting neighbors in
    /// ascending bus-id order. Unreachable buses are appended in storage
    /// order.
    pub fn bfs_order(&self) -> Vec<usize> {
        if self.n() == 0 {
            return Vec::new();
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n()];
        let mut order = Vec::with_capacity(self.n());
        let mut queue = VecDeque::new();
        let start = self.root_index();
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        for (i, s) in seen.iter().enumerate() {
            if !s {
                order.push(i);
            }
        }
        order
    }

    /// Hop distance from the root for every bus (`usize::MAX` if unreachable).
    pub fn depths(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut depth = vec![usize::MAX; self.n()];
        if self.n() == 0 {
            return depth;
        }
        let start = self.root_index();
        depth[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if depth[j] == usize::MAX {
                    depth[j] = depth[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        depth
    }

    pub fn is_connected(&self) -> bool {
        self.n() == 0 || self.depths().iter().all(|&d| d != usize::MAX)
    }

    /// Union-find check: connected, acyclic, root present.
    pub fn is_rooted_tree(&self) -> bool {
        let Some(root) = self.root else {
            return false;
        };
        if !self.contains(root) {
            return false;
        }
        let index = self.index_map();
        let mut parent: Vec<usize> = (0..self.n()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut edges = 0;
        for b in self.in_service() {
            let (Some(&i), Some(&j)) = (index.get(&b.from), index.get(&b.to)) else {
                return false;
            };
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri == rj {
                return false;
            }
            parent[ri] = rj;
            edges += 1;
        }
        edges + 1 == self.n()
    }

    /// Buses with exactly one in-service neighbor, excluding the root.
    pub fn leaves(&self) -> Vec<usize> {
        let root = self.root_index();
        self.adjacency()
            .iter()
            .enumerate()
            .filter(|(i, nb)| *i != root && nb.len() == 1)
            .map(|(i, _)| i)
            .collect()
    }

    /// Same graph with buses reordered breadth-first from the root.
    pub fn canonicalized(&self) -> Self {
        let order = self.bfs_order();
        let mut g = self.clone();
        g.bus_ids = order.iter().map(|&i| self.bus_ids[i]).collect();
        g.nominal_load = order.iter().map(|&i| self.nominal_load[i]).collect();
        g
    }

    pub fn max_bus_id(&self) -> BusId {
        self.bus_ids.iter().copied().max().unwrap_or(0)
    }

    /// Branch index of the in-service branch joining `a` and `b`.
    pub fn find_branch(&self, a: BusId, b: BusId) -> Option<usize> {
        self.branches
            .iter()
            .position(|br| br.in_service && br.connects(a, b))
    }
}

/// Nodal admittance matrix: `Y[n][n] = sum 1/z`, `Y[n][m] = -1/z`.
pub fn build_admittance(g: &GridGraph) -> Result<ComplexMatrix, GridError> {
    let index = g.index_map();
    let mut y = ComplexMatrix::zeros(g.n(), g.n());
    for b in g.in_service() {
        if b.impedance.norm() < MIN_IMPEDANCE {
            return Err(GridError::ZeroImpedance(b.from, b.to));
        }
        let (Some(&i), Some(&j)) = (index.get(&b.from), index.get(&b.to)) else {
            return Err(GridError::UnknownBus(b.from, b.to));
        };
        let yb = b.impedance.inv();
        y[(i, i)] += yb;
        y[(j, j)] += yb;
        y[(i, j)] -= yb;
        y[(j, i)] -= yb;
    }
    Ok(y)
}

/// Graph shift operator: a complex-symmetric matrix, optionally normalized
/// to unit spectral norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gso {
    pub matrix: ComplexMatrix,
    pub scale: f64,
}

impl Gso {
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }
}

pub fn build_gso(y: &ComplexMatrix) -> Result<Gso, LinalgError> {
    build_gso_with(y, true)
}

pub fn build_gso_with(y: &ComplexMatrix, normalize: bool) -> Result<Gso, LinalgError> {
    if !y.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "GSO source is {}x{}",
            y.rows(),
            y.cols()
        )));
    }
    let sigma = y.spectral_norm()?;
    if sigma < 1e-12 {
        return Err(LinalgError::DegenerateMatrix(sigma));
    }
    if !normalize {
        return Ok(Gso {
            matrix: y.clone(),
            scale: 1.0,
        });
    }
    Ok(Gso {
        matrix: y.scale(C64::new(1.0 / sigma, 0.0)),
        scale: sigma,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn chain(n: u32, z: C64) -> GridGraph {
        let ids: Vec<BusId> = (1..=n).collect();
        let branches = (1..n).map(|i| Branch::new(i, i + 1, z)).collect();
        GridGraph::new(
            ids,
            vec![C64::new(0.0, 0.0); n as usize],
            branches,
            Some(1),
            GridKind::Distribution,
        )
        .unwrap()
    }

    #[test]
    fn two_bus_admittance() {
        let g = chain(2, C64::new(0.0, 1.0));
        let y = build_admittance(&g).unwrap();
        let j = C64::new(0.0, 1.0);
        assert_eq!(y[(0, 0)], -j);
        assert_eq!(y[(1, 1)], -j);
        assert_eq!(y[(0, 1)], j);
        assert_eq!(y[(1, 0)], j);
    }

    #[test]
    fn three_bus_chain_admittance() {
        let g = chain(3, C64::new(1.0, 0.0));
        let y = build_admittance(&g).unwrap();
        assert_eq!(y[(1, 1)], C64::new(2.0, 0.0));
        assert_eq!(y[(0, 1)], C64::new(-1.0, 0.0));
        assert_eq!(y[(1, 2)], C64::new(-1.0, 0.0));
        assert_eq!(y[(0, 2)], C64::new(0.0, 0.0));
    }

    #[test]
    fn zero_impedance_is_rejected() {
        let g = GridGraph {
            bus_ids: vec![1, 2],
            nominal_load: vec![C64::new(0.0, 0.0); 2],
            branches: vec![Branch::new(1, 2, C64::new(0.0, 0.0))],
            root: Some(1),
            kind: GridKind::Distribution,
        };
        assert_eq!(build_admittance(&g), Err(GridError::ZeroImpedance(1, 2)));
        assert!(g.validate().is_err());
    }

    #[test]
    fn gso_of_scalar_matrix() {
        let y = ComplexMatrix::identity(3).scale(C64::new(2.0, 0.0));
        let s = build_gso(&y).unwrap();
        assert!((s.scale - 2.0).abs() < 1e-12);
        assert!(s.matrix.sub(&ComplexMatrix::identity(3)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn gso_of_two_bus_admittance() {
        // Y = [[-j, j], [j, -j]] = -j [[1,-1],[-1,1]]: singular values {2, 0}.
        let y = build_admittance(&chain(2, C64::new(0.0, 1.0))).unwrap();
        let s = build_gso(&y).unwrap();
        assert!((s.scale - 2.0).abs() < 1e-12);
        assert!((s.matrix[(0, 1)] - C64::new(0.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn degenerate_gso() {
        let y = ComplexMatrix::zeros(3, 3);
        assert!(matches!(build_gso(&y), Err(LinalgError::DegenerateMatrix(_))));
    }

    #[test]
    fn distribution_invariants() {
        let mut g = chain(4, C64::new(0.1, 0.1));
        g.branches.push(Branch::new(1, 4, C64::new(0.1, 0.1)));
        assert!(matches!(g.validate(), Err(GridError::NotRadial { .. })));
        let mut g = chain(3, C64::new(0.1, 0.1));
        g.branches.push(Branch::new(2, 1, C64::new(0.2, 0.1)));
        assert!(matches!(
            g.validate(),
            Err(GridError::DuplicateBranch(1, 2))
        ));
        let mut g = chain(3, C64::new(0.1, 0.1));
        g.root = None;
        assert_eq!(g.validate(), Err(GridError::MissingRoot));
    }

    #[test]
    fn bfs_order_and_canonical_form() {
        // 1 - 3, 1 - 2, 3 - 4 rooted at 1 -> BFS ids [1, 2, 3, 4]
        let g = GridGraph::new(
            vec![4, 3, 2, 1],
            vec![C64::new(0.0, 0.0); 4],
            vec![
                Branch::new(1, 3, C64::new(0.1, 0.0)),
                Branch::new(1, 2, C64::new(0.1, 0.0)),
                Branch::new(3, 4, C64::new(0.1, 0.0)),
            ],
            Some(1),
            GridKind::Distribution,
        )
        .unwrap();
        assert_eq!(g.canonicalized().bus_ids, vec![1, 2, 3, 4]);
        assert!(g.is_rooted_tree());
        let leaves: Vec<BusId> = g.leaves().iter().map(|&i| g.bus_ids[i]).collect();
        assert_eq!(leaves, vec![4, 2]);
    }
}
