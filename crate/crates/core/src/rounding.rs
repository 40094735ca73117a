//! Projection of a lifted solution to SE(d) poses and gauge fixing.

use crate::error::{Error, Result};
use crate::geom;
use crate::graph::{MultiRobotGraph, NodeId, Pose, PoseMap};
use crate::laplacian::LiftedState;
use nalgebra::DMatrix;

/// Projects a feasible lifted state to SE(d) poses: best rank-d approximation
/// of the stacked state by SVD, frames mapped to the nearest rotations with a
/// single global reflection chosen by majority determinant vote, translations
/// mapped through the same d-dimensional basis.
///
/// At a certified (tight) solution the state has exact rank d and the
/// projection is lossless.
pub fn round(graph: &MultiRobotGraph, x: &LiftedState) -> Result<PoseMap> {
    let d = x.dim();
    let n = x.num_nodes();
    if n != graph.num_poses() || d != graph.dim {
        return Err(Error::DimensionMismatch {
            expected: graph.num_poses(),
            got: n,
        });
    }

    // Rank-d projection. At r = d the basis change is skipped entirely so an
    // already-rounded state passes through bit-identically.
    let projected: DMatrix<f64> = if x.rank() == d {
        x.to_dense()
    } else {
        let dense = x.to_dense();
        let svd = dense.clone().svd(true, false);
        let u = svd.u.as_ref().expect("svd with u requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .partial_cmp(&svd.singular_values[a])
                .unwrap()
        });
        let largest = svd.singular_values[order[0]];
        let dth = svd.singular_values[order[d - 1]];
        if dth < 1e-12 * largest.max(1e-300) {
            return Err(Error::DegenerateSolution(format!(
                "rank collapse: sigma_{d} = {dth:.3e} vs sigma_1 = {largest:.3e}"
            )));
        }
        let mut basis = DMatrix::zeros(x.rank(), d);
        for (col, &k) in order[..d].iter().enumerate() {
            basis.set_column(col, &u.column(k));
        }
        basis.transpose() * dense
    };

    // Majority determinant vote decides one global reflection; per-block
    // determinant correction then handles noise-dominated stragglers.
    let bs = d + 1;
    let mut negative = 0usize;
    for v in 0..n {
        let y = projected.view((0, v * bs), (d, d)).into_owned();
        if geom::nearest_orthogonal(&y).determinant() < 0.0 {
            negative += 1;
        }
    }
    let flip = negative * 2 > n;

    let mut out = PoseMap::new();
    for v in 0..n {
        let mut y = projected.view((0, v * bs), (d, d)).into_owned();
        let mut p = projected.view((0, v * bs + d), (d, 1)).into_owned();
        if flip {
            for j in 0..d {
                y[(d - 1, j)] = -y[(d - 1, j)];
            }
            p[(d - 1, 0)] = -p[(d - 1, 0)];
        }
        let rotation = geom::nearest_rotation(&y);
        let id = graph.node_of_global(v).expect("checked length");
        out.insert(id, Pose::new(rotation, p.column(0).into_owned()));
    }
    Ok(out)
}

/// Left-composes every pose with the inverse of the anchor pose, so the anchor
/// becomes the identity. The objective is invariant to this global rigid
/// transform; idempotent.
pub fn gauge_fix(poses: &PoseMap, anchor: NodeId) -> Result<PoseMap> {
    let base = poses.get(&anchor).ok_or(Error::NodeNotFound(anchor))?;
    let inv = base.inverse();
    Ok(poses
        .iter()
        .map(|(id, p)| (*id, inv.compose(p)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::RelativeMeasurement;
    use crate::laplacian;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph_with_truth(n: usize) -> MultiRobotGraph {
        let mut g = MultiRobotGraph::new(2, vec![n]);
        let mut gt = PoseMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for k in 0..n {
            gt.insert(
                NodeId::new(0, k),
                Pose::new(
                    geom::rot2(rng.gen_range(-3.0..3.0)),
                    DVector::from_fn(2, |_, _| rng.gen_range(-5.0..5.0)),
                ),
            );
        }
        for k in 0..n - 1 {
            let a = NodeId::new(0, k);
            let b = NodeId::new(0, k + 1);
            let rel = gt[&a].inverse().compose(&gt[&b]);
            g.edges.push(RelativeMeasurement::new(
                a,
                b,
                rel.rotation,
                rel.translation,
                1.0,
                1.0,
            ));
        }
        g.ground_truth = Some(gt);
        g
    }

    #[test]
    fn rank_d_rotations_pass_through_unchanged() {
        let g = graph_with_truth(5);
        let gt = g.ground_truth.clone().unwrap();
        let ordered: Vec<Pose> = g.node_ids().map(|id| gt[&id].clone()).collect();
        let x = LiftedState::from_poses(2, 2, &ordered).unwrap();
        let rounded = round(&g, &x).unwrap();
        for (id, pose) in &rounded {
            assert!((&pose.rotation - &gt[id].rotation).abs().max() <= 1e-12);
            assert!((&pose.translation - &gt[id].translation).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn zero_padded_truth_recovers_after_gauge_fix() {
        let g = graph_with_truth(6);
        let gt = g.ground_truth.clone().unwrap();
        let ordered: Vec<Pose> = g.node_ids().map(|id| gt[&id].clone()).collect();
        let x = LiftedState::from_poses(2, 4, &ordered).unwrap();
        let rounded = round(&g, &x).unwrap();
        let anchor = NodeId::new(0, 0);
        let a = gauge_fix(&rounded, anchor).unwrap();
        let b = gauge_fix(&gt, anchor).unwrap();
        for (id, pose) in &a {
            assert!((&pose.rotation - &b[id].rotation).abs().max() <= 1e-9);
            assert!((&pose.translation - &b[id].translation).abs().max() <= 1e-9);
        }
    }

    #[test]
    fn rounding_cost_stays_close_on_tight_states() {
        // zero-padded rank-d state: rounding must not change the cost at all
        let g = graph_with_truth(5);
        let gt = g.ground_truth.clone().unwrap();
        let ordered: Vec<Pose> = g.node_ids().map(|id| gt[&id].clone()).collect();
        let lap = laplacian::assemble(&g).unwrap();
        let x = LiftedState::from_poses(2, 3, &ordered).unwrap();
        let lifted_cost = laplacian::cost(&lap, &x).unwrap();
        let rounded = round(&g, &x).unwrap();
        let ordered_rounded: Vec<Pose> = g.node_ids().map(|id| rounded[&id].clone()).collect();
        let xr = LiftedState::from_poses(2, 2, &ordered_rounded).unwrap();
        let rounded_cost = laplacian::cost(&lap, &xr).unwrap();
        assert!((rounded_cost - lifted_cost).abs() <= 1e-6 * (1.0 + lifted_cost));
    }

    #[test]
    fn gauge_fix_is_idempotent_and_cost_preserving() {
        let g = graph_with_truth(7);
        let gt = g.ground_truth.clone().unwrap();
        let lap = laplacian::assemble(&g).unwrap();
        let anchor = NodeId::new(0, 0);
        let fixed = gauge_fix(&gt, anchor).unwrap();
        let twice = gauge_fix(&fixed, anchor).unwrap();
        for (id, pose) in &fixed {
            assert!((&pose.rotation - &twice[id].rotation).abs().max() <= 1e-12);
            assert!((&pose.translation - &twice[id].translation).abs().max() <= 1e-12);
        }
        assert!((&fixed[&anchor].rotation - DMatrix::identity(2, 2)).abs().max() <= 1e-12);
        assert!(fixed[&anchor].translation.abs().max() <= 1e-12);

        let ordered: Vec<Pose> = g.node_ids().map(|id| gt[&id].clone()).collect();
        let ordered_fixed: Vec<Pose> = g.node_ids().map(|id| fixed[&id].clone()).collect();
        let c0 = laplacian::cost(&lap, &LiftedState::from_poses(2, 2, &ordered).unwrap()).unwrap();
        let c1 =
            laplacian::cost(&lap, &LiftedState::from_poses(2, 2, &ordered_fixed).unwrap()).unwrap();
        assert!((c0 - c1).abs() <= 1e-9 * (1.0 + c0));
    }

    #[test]
    fn pre_transformed_inputs_give_identical_gauge_fixed_output() {
        let g = graph_with_truth(5);
        let gt = g.ground_truth.clone().unwrap();
        let anchor = NodeId::new(0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rigid = Pose::new(
            geom::random_rotation(2, &mut rng),
            DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0)),
        );
        let moved: PoseMap = gt.iter().map(|(id, p)| (*id, rigid.compose(p))).collect();
        let a = gauge_fix(&gt, anchor).unwrap();
        let b = gauge_fix(&moved, anchor).unwrap();
        for (id, pose) in &a {
            assert!((&pose.rotation - &b[id].rotation).abs().max() <= 1e-9);
            assert!((&pose.translation - &b[id].translation).abs().max() <= 1e-9);
        }
    }

    #[test]
    fn unknown_anchor_is_an_error() {
        let g = graph_with_truth(3);
        let gt = g.ground_truth.clone().unwrap();
        assert!(matches!(
            gauge_fix(&gt, NodeId::new(5, 0)),
            Err(Error::NodeNotFound(_))
        ));
    }
}
