//! g2o text format with a multi-robot vertex-ID convention.
//!
//! Vertex IDs encode the owning robot as `id = robot * stride + index`, so a
//! single file stays compatible with standard g2o tooling. Supported tags:
//! `VERTEX_SE2`, `EDGE_SE2`, `VERTEX_SE3:QUAT`, `EDGE_SE3:QUAT`. SE3
//! information matrices (21 upper-triangular entries of the 6x6) reduce to the
//! isotropic weights of the objective: sigma = mean of the three translational
//! diagonal entries, kappa = mean of the three rotational ones.

use crate::error::{Error, Result};
use crate::geom;
use crate::graph::{MultiRobotGraph, NodeId, Pose, PoseMap, RelativeMeasurement};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

pub const DEFAULT_ROBOT_ID_STRIDE: usize = 100_000;

/// Tolerance on the norm of quaternions read from file.
const QUAT_NORM_TOL: f64 = 1e-3;

/// Parses g2o text into a multi-robot graph. Vertex estimates land in
/// `initial_guess` (never in `ground_truth`). Never panics: every input yields
/// a graph or a structured error.
pub fn parse_g2o(text: &str, robot_id_stride: usize) -> Result<MultiRobotGraph> {
    if robot_id_stride == 0 {
        return Err(Error::parse(0, "robot id stride must be positive"));
    }
    let mut dim: Option<usize> = None;
    let mut vertices: BTreeMap<usize, (usize, Pose)> = BTreeMap::new(); // id -> (line, pose)
    let mut raw_edges: Vec<(usize, usize, usize, RelEdge)> = Vec::new(); // (line, from, to, meas)

    struct RelEdge {
        rot: DMatrix<f64>,
        trans: DVector<f64>,
        kappa: f64,
        sigma: f64,
    }

    for (lineno, raw_line) in text.lines().enumerate() {
        let line_idx = lineno + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let tag = tok.next().unwrap();
        let rest: Vec<&str> = tok.collect();
        let nums = |count: usize| -> Result<Vec<f64>> {
            if rest.len() != count {
                return Err(Error::parse(
                    line_idx,
                    format!("{tag} expects {count} fields, found {}", rest.len()),
                ));
            }
            rest.iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| {
                        Error::parse(line_idx, format!("invalid number '{s}' in {tag}"))
                    })
                })
                .collect()
        };
        let set_dim = |dim: &mut Option<usize>, d: usize| -> Result<()> {
            match dim {
                None => {
                    *dim = Some(d);
                    Ok(())
                }
                Some(existing) if *existing == d => Ok(()),
                Some(existing) => Err(Error::parse(
                    line_idx,
                    format!("mixed dimensions: file is SE{existing}, found SE{d} tag"),
                )),
            }
        };
        match tag {
            "VERTEX_SE2" => {
                set_dim(&mut dim, 2)?;
                let v = nums(4)?;
                let id = parse_id(v[0], line_idx)?;
                let pose = Pose::new(geom::rot2(v[3]), DVector::from_vec(vec![v[1], v[2]]));
                if vertices.insert(id, (line_idx, pose)).is_some() {
                    return Err(Error::parse(line_idx, format!("duplicate vertex id {id}")));
                }
            }
            "VERTEX_SE3:QUAT" => {
                set_dim(&mut dim, 3)?;
                let v = nums(8)?;
                let id = parse_id(v[0], line_idx)?;
                let rot = quat_to_rot(&v[4..8], line_idx)?;
                let pose = Pose::new(rot, DVector::from_vec(vec![v[1], v[2], v[3]]));
                if vertices.insert(id, (line_idx, pose)).is_some() {
                    return Err(Error::parse(line_idx, format!("duplicate vertex id {id}")));
                }
            }
            "EDGE_SE2" => {
                set_dim(&mut dim, 2)?;
                let v = nums(11)?;
                let from = parse_id(v[0], line_idx)?;
                let to = parse_id(v[1], line_idx)?;
                // info order: xx xy xt yy yt tt
                let sigma = (v[5] + v[8]) / 2.0;
                let kappa = v[10];
                raw_edges.push((
                    line_idx,
                    from,
                    to,
                    RelEdge {
                        rot: geom::rot2(v[4]),
                        trans: DVector::from_vec(vec![v[2], v[3]]),
                        kappa,
                        sigma,
                    },
                ));
            }
            "EDGE_SE3:QUAT" => {
                set_dim(&mut dim, 3)?;
                let v = nums(30)?;
                let from = parse_id(v[0], line_idx)?;
                let to = parse_id(v[1], line_idx)?;
                let rot = quat_to_rot(&v[5..9], line_idx)?;
                // upper-triangular info over (x y z qx qy qz): translational
                // diagonal at flat positions 0, 6, 11; rotational at 15, 18, 20
                let info = &v[9..30];
                let sigma = (info[0] + info[6] + info[11]) / 3.0;
                let kappa = (info[15] + info[18] + info[20]) / 3.0;
                raw_edges.push((
                    line_idx,
                    from,
                    to,
                    RelEdge {
                        rot,
                        trans: DVector::from_vec(vec![v[2], v[3], v[4]]),
                        kappa,
                        sigma,
                    },
                ));
            }
            _ => {
                return Err(Error::parse(line_idx, format!("unknown tag '{tag}'")));
            }
        }
    }

    let dim = dim.unwrap_or(2);
    // per-robot contiguous indices derived from the stride convention
    let mut per_robot: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &id in vertices.keys() {
        per_robot
            .entry(id / robot_id_stride)
            .or_default()
            .push(id % robot_id_stride);
    }
    let num_robots = per_robot.keys().next_back().map_or(0, |r| r + 1);
    let mut poses_per_robot = vec![0usize; num_robots];
    for (robot, mut indices) in per_robot {
        indices.sort_unstable();
        for (expect, &got) in indices.iter().enumerate() {
            if got != expect {
                return Err(Error::parse(
                    0,
                    format!(
                        "robot {robot} vertex indices are not contiguous from 0 (missing {expect})"
                    ),
                ));
            }
        }
        poses_per_robot[robot] = indices.len();
    }

    let mut graph = MultiRobotGraph::new(dim, poses_per_robot);
    let mut guess = PoseMap::new();
    for (&id, (_, pose)) in &vertices {
        guess.insert(
            NodeId::new(id / robot_id_stride, id % robot_id_stride),
            pose.clone(),
        );
    }
    for (line, from, to, e) in raw_edges {
        let from_id = NodeId::new(from / robot_id_stride, from % robot_id_stride);
        let to_id = NodeId::new(to / robot_id_stride, to % robot_id_stride);
        if !vertices.contains_key(&from) {
            return Err(Error::NodeNotFound(from_id));
        }
        if !vertices.contains_key(&to) {
            return Err(Error::NodeNotFound(to_id));
        }
        let _ = line;
        graph
            .edges
            .push(RelativeMeasurement::new(from_id, to_id, e.rot, e.trans, e.kappa, e.sigma));
    }
    graph.initial_guess = Some(guess);
    Ok(graph)
}

/// [`parse_g2o`] over raw bytes; non-UTF-8 input is a parse error, never a
/// panic.
pub fn parse_g2o_bytes(bytes: &[u8], robot_id_stride: usize) -> Result<MultiRobotGraph> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::parse(0, format!("input is not valid UTF-8: {e}")))?;
    parse_g2o(text, robot_id_stride)
}

fn parse_id(v: f64, line: usize) -> Result<usize> {
    if !v.is_finite() || v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(Error::parse(line, format!("invalid vertex id {v}")));
    }
    Ok(v as usize)
}

/// File order is (qx qy qz qw); normalized on read, rejected when the norm
/// deviates from one by more than 1e-3.
fn quat_to_rot(q: &[f64], line: usize) -> Result<DMatrix<f64>> {
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > QUAT_NORM_TOL {
        return Err(Error::parse(
            line,
            format!("quaternion norm {norm} deviates from 1 by more than {QUAT_NORM_TOL}"),
        ));
    }
    Ok(geom::rot3_of_quat(
        q[0] / norm,
        q[1] / norm,
        q[2] / norm,
        q[3] / norm,
    ))
}

/// 17 significant digits: every f64 survives the round trip bit-exactly.
fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a graph and a complete pose assignment as g2o text. Round-trips
/// through [`parse_g2o`]: topology exactly, weights within 1e-12, poses within
/// 1e-9.
pub fn write_g2o(
    graph: &MultiRobotGraph,
    poses: &PoseMap,
    robot_id_stride: usize,
) -> Result<String> {
    let mut out = String::new();
    out.push_str("# g2o pose graph, multi-robot ids: id = robot * stride + index\n");
    out.push_str(&format!("# stride {robot_id_stride}\n"));
    for id in graph.node_ids() {
        if id.index >= robot_id_stride {
            return Err(Error::InvalidGraph(format!(
                "pose index {} does not fit the id stride {robot_id_stride}",
                id.index
            )));
        }
        let pose = poses.get(&id).ok_or(Error::IncompleteSolution(id))?;
        let file_id = id.robot * robot_id_stride + id.index;
        match graph.dim {
            2 => {
                let theta = geom::rot2_angle(&pose.rotation);
                out.push_str(&format!(
                    "VERTEX_SE2 {file_id} {} {} {}\n",
                    fmt17(pose.translation[0]),
                    fmt17(pose.translation[1]),
                    fmt17(theta),
                ));
            }
            _ => {
                let q = geom::quat_of_rotation(&pose.rotation);
                out.push_str(&format!(
                    "VERTEX_SE3:QUAT {file_id} {} {} {} {} {} {} {}\n",
                    fmt17(pose.translation[0]),
                    fmt17(pose.translation[1]),
                    fmt17(pose.translation[2]),
                    fmt17(q[0]),
                    fmt17(q[1]),
                    fmt17(q[2]),
                    fmt17(q[3]),
                ));
            }
        }
    }
    for e in &graph.edges {
        let from = e.from.robot * robot_id_stride + e.from.index;
        let to = e.to.robot * robot_id_stride + e.to.index;
        match graph.dim {
            2 => {
                let theta = geom::rot2_angle(&e.rot_meas);
                // info diag (sigma, sigma, kappa), zero off-diagonals
                out.push_str(&format!(
                    "EDGE_SE2 {from} {to} {} {} {} {} 0 0 {} 0 {}\n",
                    fmt17(e.trans_meas[0]),
                    fmt17(e.trans_meas[1]),
                    fmt17(theta),
                    fmt17(e.sigma),
                    fmt17(e.sigma),
                    fmt17(e.kappa),
                ));
            }
            _ => {
                let q = geom::quat_of_rotation(&e.rot_meas);
                let mut info = String::new();
                // upper triangle of diag(sigma, sigma, sigma, kappa, kappa, kappa)
                let diag = [e.sigma, e.sigma, e.sigma, e.kappa, e.kappa, e.kappa];
                for i in 0..6 {
                    for j in i..6 {
                        info.push(' ');
                        if i == j {
                            info.push_str(&fmt17(diag[i]));
                        } else {
                            info.push('0');
                        }
                    }
                }
                out.push_str(&format!(
                    "EDGE_SE3:QUAT {from} {to} {} {} {} {} {} {} {}{info}\n",
                    fmt17(e.trans_meas[0]),
                    fmt17(e.trans_meas[1]),
                    fmt17(e.trans_meas[2]),
                    fmt17(q[0]),
                    fmt17(q[1]),
                    fmt17(q[2]),
                    fmt17(q[3]),
                ));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{self, MissionSpec, NoiseModel, TrajectoryShape};
    use proptest::prelude::*;

    #[test]
    fn minimal_se2_vertex() {
        let g = parse_g2o("VERTEX_SE2 0 0 0 0\n", DEFAULT_ROBOT_ID_STRIDE).unwrap();
        assert_eq!(g.num_poses(), 1);
        let guess = g.initial_guess.as_ref().unwrap();
        let pose = &guess[&NodeId::new(0, 0)];
        assert_eq!(pose.rotation, DMatrix::identity(2, 2));
        assert_eq!(pose.translation, DVector::zeros(2));
    }

    #[test]
    fn se2_edge_info_reduction() {
        let text = "VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 1 0 0\n\
                    EDGE_SE2 0 1 1 0 0 50 0 0 50 0 100\n";
        let g = parse_g2o(text, DEFAULT_ROBOT_ID_STRIDE).unwrap();
        assert_eq!(g.edges.len(), 1);
        let e = &g.edges[0];
        assert_eq!(e.from, NodeId::new(0, 0));
        assert_eq!(e.to, NodeId::new(0, 1));
        assert_eq!(e.sigma, 50.0);
        assert_eq!(e.kappa, 100.0);
        assert_eq!(e.trans_meas, DVector::from_vec(vec![1.0, 0.0]));
    }

    #[test]
    fn stride_quotient_remainder_convention() {
        let text = "VERTEX_SE2 100003 0 0 0\nVERTEX_SE2 100000 0 0 0\n\
                    VERTEX_SE2 100001 0 0 0\nVERTEX_SE2 100002 0 0 0\nVERTEX_SE2 0 0 0 0\n\
                    EDGE_SE2 0 100003 0 0 0 1 0 0 1 0 1\n";
        let g = parse_g2o(text, 100000).unwrap();
        assert_eq!(g.num_robots(), 2);
        assert_eq!(g.poses_per_robot, vec![1, 4]);
        assert_eq!(g.edges[0].to, NodeId::new(1, 3));
        assert_eq!(g.edges[0].kind, crate::graph::EdgeKind::Inter);
    }

    #[test]
    fn edge_to_missing_vertex_is_node_not_found() {
        let text = "VERTEX_SE2 0 0 0 0\nEDGE_SE2 0 1 0 0 0 1 0 0 1 0 1\n";
        assert!(matches!(
            parse_g2o(text, DEFAULT_ROBOT_ID_STRIDE),
            Err(Error::NodeNotFound(_))
        ));
    }

    #[test]
    fn malformed_lines_give_line_numbers() {
        let text = "VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 zero 0 0\n";
        match parse_g2o(text, DEFAULT_ROBOT_ID_STRIDE) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            parse_g2o("FIX 0\n", DEFAULT_ROBOT_ID_STRIDE),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn bad_quaternion_norm_is_rejected() {
        let text = "VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1.1\n";
        assert!(matches!(
            parse_g2o(text, DEFAULT_ROBOT_ID_STRIDE),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn empty_graph_writes_comments_only() {
        let g = MultiRobotGraph::new(2, vec![]);
        let text = write_g2o(&g, &PoseMap::new(), DEFAULT_ROBOT_ID_STRIDE).unwrap();
        assert!(text.lines().all(|l| l.starts_with('#')));
    }

    #[test]
    fn single_node_graph_writes_one_vertex_line() {
        let g = MultiRobotGraph::new(2, vec![1]);
        let mut poses = PoseMap::new();
        poses.insert(NodeId::new(0, 0), Pose::identity(2));
        let text = write_g2o(&g, &poses, DEFAULT_ROBOT_ID_STRIDE).unwrap();
        let vertex_lines: Vec<&str> =
            text.lines().filter(|l| l.starts_with("VERTEX")).collect();
        assert_eq!(vertex_lines.len(), 1);
    }

    fn mission(dim: usize, seed: u64) -> MultiRobotGraph {
        synth::generate(&MissionSpec {
            dim,
            num_robots: 2,
            poses_per_robot: 6,
            trajectory_shape: TrajectoryShape::Line,
            intra_loop_period: 3,
            inter_overlap: 0.5,
            noise: NoiseModel {
                rot_stddev: 0.05,
                trans_stddev: 0.08,
                seed,
            },
        })
        .unwrap()
    }

    fn graphs_equal(a: &MultiRobotGraph, b: &MultiRobotGraph, tol: f64) -> bool {
        a.dim == b.dim
            && a.poses_per_robot == b.poses_per_robot
            && a.edges.len() == b.edges.len()
            && a.edges.iter().zip(&b.edges).all(|(x, y)| {
                x.from == y.from
                    && x.to == y.to
                    && x.kind == y.kind
                    && (x.kappa - y.kappa).abs() <= tol * (1.0 + x.kappa.abs())
                    && (x.sigma - y.sigma).abs() <= tol * (1.0 + x.sigma.abs())
                    && (&x.rot_meas - &y.rot_meas).abs().max() <= 1e-9
                    && (&x.trans_meas - &y.trans_meas).abs().max() <= 1e-9
            })
    }

    #[test]
    fn round_trip_reproduces_the_graph() {
        for (dim, seed) in [(2usize, 1u64), (3, 2)] {
            let g = mission(dim, seed);
            let poses = g.ground_truth.clone().unwrap();
            let text = write_g2o(&g, &poses, DEFAULT_ROBOT_ID_STRIDE).unwrap();
            let parsed = parse_g2o(&text, DEFAULT_ROBOT_ID_STRIDE).unwrap();
            assert!(graphs_equal(&g, &parsed, 1e-12));
            // idempotence: parse(write(parse(write(g)))) == parse(write(g))
            let text2 = write_g2o(
                &parsed,
                parsed.initial_guess.as_ref().unwrap(),
                DEFAULT_ROBOT_ID_STRIDE,
            )
            .unwrap();
            let parsed2 = parse_g2o(&text2, DEFAULT_ROBOT_ID_STRIDE).unwrap();
            assert!(graphs_equal(&parsed, &parsed2, 1e-13));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn parser_never_panics_on_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let _ = parse_g2o_bytes(&bytes, DEFAULT_ROBOT_ID_STRIDE);
        }

        #[test]
        fn parser_never_panics_on_mutated_lines(
            id_a in 0usize..10, id_b in 0usize..10,
            x in -1e12f64..1e12, keep in 3usize..11
        ) {
            let line = format!("EDGE_SE2 {id_a} {id_b} {x} 0 0 1 0 0 1 0 1");
            let truncated: String = line.split_whitespace().take(keep).collect::<Vec<_>>().join(" ");
            let _ = parse_g2o(&truncated, DEFAULT_ROBOT_ID_STRIDE);
        }
    }
}
