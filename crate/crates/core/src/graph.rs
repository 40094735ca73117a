//! Core data model for multi-robot pose graphs: poses, weighted relative
//! measurements, the agent partition, and structural validation.
//!
//! The graph is immutable once validated; the solver reads it concurrently.

use crate::error::{Error, Result};
use crate::geom;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::fmt;

/// Tolerance for the rotation invariants (orthonormality, unit determinant).
pub const ROTATION_TOL: f64 = 1e-9;

/// An SE(d) element: a d x d rotation and a d-vector translation (meters).
#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
}

impl Pose {
    pub fn identity(d: usize) -> Self {
        Pose {
            rotation: DMatrix::identity(d, d),
            translation: DVector::zeros(d),
        }
    }

    pub fn new(rotation: DMatrix<f64>, translation: DVector<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn dim(&self) -> usize {
        self.rotation.nrows()
    }

    /// Group composition `self * other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: &self.rotation * &other.rotation,
            translation: &self.translation + &self.rotation * &other.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            translation: -(&rt * &self.translation),
            rotation: rt,
        }
    }

    /// Max-abs violation of the rotation invariants (orthonormality and
    /// determinant one).
    pub fn rotation_deviation(&self) -> f64 {
        let ortho = geom::orthogonality_deviation(&self.rotation);
        let det = (self.rotation.determinant() - 1.0).abs();
        ortho.max(det)
    }
}

/// Identifies one pose: owning robot and per-robot index, both 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub robot: usize,
    pub index: usize,
}

impl NodeId {
    pub fn new(robot: usize, index: usize) -> Self {
        NodeId { robot, index }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.robot, self.index)
    }
}

/// Whether an edge joins poses of the same robot or two different robots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Intra,
    Inter,
}

/// A weighted relative-pose measurement from `from` to `to`, expressed in the
/// frame of `from`. `kappa` weights the rotation residual, `sigma` the
/// translation residual.
#[derive(Clone, Debug, PartialEq)]
pub struct RelativeMeasurement {
    pub from: NodeId,
    pub to: NodeId,
    pub rot_meas: DMatrix<f64>,
    pub trans_meas: DVector<f64>,
    pub kappa: f64,
    pub sigma: f64,
    pub kind: EdgeKind,
}

impl RelativeMeasurement {
    pub fn new(
        from: NodeId,
        to: NodeId,
        rot_meas: DMatrix<f64>,
        trans_meas: DVector<f64>,
        kappa: f64,
        sigma: f64,
    ) -> Self {
        let kind = if from.robot == to.robot {
            EdgeKind::Intra
        } else {
            EdgeKind::Inter
        };
        RelativeMeasurement {
            from,
            to,
            rot_meas,
            trans_meas,
            kappa,
            sigma,
            kind,
        }
    }

    pub fn dim(&self) -> usize {
        self.rot_meas.nrows()
    }

    /// The measurement as an SE(d) element.
    pub fn as_pose(&self) -> Pose {
        Pose::new(self.rot_meas.clone(), self.trans_meas.clone())
    }

    /// The same constraint expressed in the opposite direction: endpoints are
    /// swapped and the measurement is inverted.
    pub fn reversed(&self) -> RelativeMeasurement {
        let inv = self.as_pose().inverse();
        RelativeMeasurement {
            from: self.to,
            to: self.from,
            rot_meas: inv.rotation,
            trans_meas: inv.translation,
            kappa: self.kappa,
            sigma: self.sigma,
            kind: self.kind,
        }
    }
}

/// Ordered map from nodes to poses; `BTreeMap` keeps iteration deterministic.
pub type PoseMap = BTreeMap<NodeId, Pose>;

/// A pose graph partitioned over robots. `dim` is a graph-level constant
/// (mixed-dimension graphs are rejected by validation).
#[derive(Clone, Debug, Default)]
pub struct MultiRobotGraph {
    pub dim: usize,
    pub poses_per_robot: Vec<usize>,
    pub edges: Vec<RelativeMeasurement>,
    pub ground_truth: Option<PoseMap>,
    /// Initial-guess poses (e.g. parsed vertex estimates), kept separate from
    /// the ground truth.
    pub initial_guess: Option<PoseMap>,
}

/// Violations found by [`MultiRobotGraph::validate`]; empty means valid.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "valid")
        } else {
            write!(f, "{}", self.violations.join("; "))
        }
    }
}

impl MultiRobotGraph {
    pub fn new(dim: usize, poses_per_robot: Vec<usize>) -> Self {
        MultiRobotGraph {
            dim,
            poses_per_robot,
            edges: Vec::new(),
            ground_truth: None,
            initial_guess: None,
        }
    }

    pub fn num_robots(&self) -> usize {
        self.poses_per_robot.len()
    }

    pub fn num_poses(&self) -> usize {
        self.poses_per_robot.iter().sum()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.robot < self.poses_per_robot.len() && id.index < self.poses_per_robot[id.robot]
    }

    /// Contiguous global index of a node: robots ordered by agent index, poses
    /// by per-robot index.
    pub fn global_index(&self, id: NodeId) -> Result<usize> {
        if !self.contains(id) {
            return Err(Error::NodeNotFound(id));
        }
        let offset: usize = self.poses_per_robot[..id.robot].iter().sum();
        Ok(offset + id.index)
    }

    /// Inverse of [`global_index`](Self::global_index).
    pub fn node_of_global(&self, mut g: usize) -> Option<NodeId> {
        for (robot, &count) in self.poses_per_robot.iter().enumerate() {
            if g < count {
                return Some(NodeId::new(robot, g));
            }
            g -= count;
        }
        None
    }

    /// All nodes in global-index order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.poses_per_robot
            .iter()
            .enumerate()
            .flat_map(|(robot, &count)| (0..count).map(move |index| NodeId::new(robot, index)))
    }

    /// Robot of the other endpoint for every inter-robot edge touched by
    /// `robot`, deduplicated and sorted.
    pub fn neighbor_robots(&self, robot: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Inter)
            .filter_map(|e| {
                if e.from.robot == robot {
                    Some(e.to.robot)
                } else if e.to.robot == robot {
                    Some(e.from.robot)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The inter-robot (rendezvous) edges, in insertion order.
    pub fn rendezvous_edges(&self) -> Vec<&RelativeMeasurement> {
        self.edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Inter)
            .collect()
    }

    /// Checks every structural invariant and returns the full list of
    /// violations (does not throw).
    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        if self.dim != 2 && self.dim != 3 {
            v.push(format!("dimension {} not in {{2, 3}}", self.dim));
        }
        if let Some(gt) = &self.ground_truth {
            for (id, pose) in gt {
                if !self.contains(*id) {
                    v.push(format!("ground truth references unknown node {id}"));
                    continue;
                }
                if pose.dim() != self.dim {
                    v.push(format!("ground truth pose at {id} has wrong dimension"));
                } else if pose.rotation_deviation() > ROTATION_TOL {
                    v.push(format!("ground truth pose at {id} is not a rotation"));
                }
            }
        }
        for (k, e) in self.edges.iter().enumerate() {
            let tag = format!("edge #{k} {}->{}", e.from, e.to);
            if !self.contains(e.from) {
                v.push(format!("{tag}: endpoint {} does not exist", e.from));
            }
            if !self.contains(e.to) {
                v.push(format!("{tag}: endpoint {} does not exist", e.to));
            }
            if e.from == e.to {
                v.push(format!("{tag}: self-loop"));
            }
            if e.dim() != self.dim || e.trans_meas.len() != self.dim {
                v.push(format!("{tag}: measurement dimension mismatch"));
            } else if geom::orthogonality_deviation(&e.rot_meas) > ROTATION_TOL
                || (e.rot_meas.determinant() - 1.0).abs() > ROTATION_TOL
            {
                v.push(format!("{tag}: measured rotation is not in SO(d)"));
            }
            if !(e.kappa > 0.0) || !(e.sigma > 0.0) {
                v.push(format!("{tag}: nonpositive weight"));
            }
            if !e.kappa.is_finite() || !e.sigma.is_finite() {
                v.push(format!("{tag}: non-finite weight"));
            }
            let expect_kind = if e.from.robot == e.to.robot {
                EdgeKind::Intra
            } else {
                EdgeKind::Inter
            };
            if e.kind != expect_kind {
                v.push(format!("{tag}: kind tag does not match endpoint robots"));
            }
        }
        if !self.is_connected() {
            v.push("graph is disconnected: a unique gauge-fixed optimum needs one component".into());
        }
        ValidationReport { violations: v }
    }

    /// Connectivity of the undirected graph over all nodes (union-find).
    pub fn is_connected(&self) -> bool {
        let n = self.num_poses();
        if n == 0 {
            return true;
        }
        let mut uf = UnionFind::new(n);
        for e in &self.edges {
            if let (Ok(a), Ok(b)) = (self.global_index(e.from), self.global_index(e.to)) {
                uf.union(a, b);
            }
        }
        let root = uf.find(0);
        (1..n).all(|i| uf.find(i) == root)
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_graph(robots: usize, per: usize) -> MultiRobotGraph {
        let mut g = MultiRobotGraph::new(2, vec![per; robots]);
        for r in 0..robots {
            for k in 0..per.saturating_sub(1) {
                g.edges.push(RelativeMeasurement::new(
                    NodeId::new(r, k),
                    NodeId::new(r, k + 1),
                    DMatrix::identity(2, 2),
                    DVector::from_vec(vec![1.0, 0.0]),
                    1.0,
                    1.0,
                ));
            }
        }
        g
    }

    #[test]
    fn global_index_examples() {
        let g = chain_graph(2, 10);
        assert_eq!(g.global_index(NodeId::new(0, 0)).unwrap(), 0);
        assert_eq!(g.global_index(NodeId::new(1, 0)).unwrap(), 10);
        let g3 = MultiRobotGraph::new(2, vec![4, 5, 6]);
        assert_eq!(g3.global_index(NodeId::new(2, 3)).unwrap(), 12);
        assert!(matches!(
            g3.global_index(NodeId::new(3, 0)),
            Err(Error::NodeNotFound(_))
        ));
    }

    #[test]
    fn global_index_is_a_bijection() {
        let g = MultiRobotGraph::new(2, vec![3, 1, 4]);
        let mut seen: Vec<usize> = g
            .node_ids()
            .map(|id| g.global_index(id).unwrap())
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
        for id in g.node_ids() {
            assert_eq!(g.node_of_global(g.global_index(id).unwrap()), Some(id));
        }
    }

    #[test]
    fn disconnected_chains_are_reported_until_bridged() {
        let mut g = chain_graph(2, 3);
        let report = g.validate();
        assert!(report.violations.iter().any(|v| v.contains("disconnected")));

        g.edges.push(RelativeMeasurement::new(
            NodeId::new(0, 2),
            NodeId::new(1, 0),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            1.0,
            1.0,
        ));
        assert!(g.validate().is_valid());
    }

    #[test]
    fn zero_weight_is_flagged() {
        let mut g = chain_graph(1, 2);
        g.edges[0].kappa = 0.0;
        let report = g.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("nonpositive weight")));
    }

    #[test]
    fn rendezvous_edges_in_insertion_order() {
        let mut g = chain_graph(2, 3);
        assert!(g.rendezvous_edges().is_empty());
        let inter = |i: usize, j: usize| {
            RelativeMeasurement::new(
                NodeId::new(0, i),
                NodeId::new(1, j),
                DMatrix::identity(2, 2),
                DVector::zeros(2),
                1.0,
                1.0,
            )
        };
        g.edges.push(inter(0, 0));
        g.edges.push(inter(1, 1));
        g.edges.push(inter(2, 2));
        let r = g.rendezvous_edges();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0].from.index, 0);
        assert_eq!(r[1].from.index, 1);
        assert_eq!(r[2].from.index, 2);
        g.edges.push(inter(2, 0));
        assert_eq!(g.rendezvous_edges().len(), 4);
    }

    #[test]
    fn reversed_measurement_is_involutive() {
        let m = RelativeMeasurement::new(
            NodeId::new(0, 0),
            NodeId::new(0, 1),
            crate::geom::rot2(0.3),
            DVector::from_vec(vec![1.0, -2.0]),
            2.0,
            3.0,
        );
        let back = m.reversed().reversed();
        assert!((&back.rot_meas - &m.rot_meas).abs().max() < 1e-15);
        assert!((&back.trans_meas - &m.trans_meas).abs().max() < 1e-15);
        assert_eq!(back.from, m.from);
    }
}
