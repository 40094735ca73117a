//! Riemannian block-coordinate descent on the lifted relaxation, one block per
//! robot.
//!
//! A block update is `inner_steps` retracted gradient steps on the robot's
//! subproblem with nominal step `1 / (2 * lambda_max(L_bb))`, each step guarded
//! by Armijo backtracking so the accepted cost sequence never increases. The
//! update reads only the robot's principal Laplacian block, its coupling
//! blocks, and neighbor separator states, which is what makes it executable by
//! a decentralized agent (see [`crate::netsim`]).

use crate::error::{Error, Result};
use crate::geom;
use crate::graph::{MultiRobotGraph, Pose, PoseMap};
use crate::laplacian::{
    self, block_submatrices, ConnectionLaplacian, LiftedState, NodeBlock, RobotBlocks,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;

/// Order in which blocks are visited during a sweep. The greedy rule needs
/// global gradient norms, so it is only available in centralized mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockRule {
    RoundRobin,
    GreedyGradient,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Initial rank of the staircase; defaults to d + 1.
    pub r_init: Option<usize>,
    /// Rank cap of the staircase; defaults to d + 4.
    pub r_max: Option<usize>,
    /// Stopping threshold on the full Riemannian gradient norm; defaults to
    /// `1e-6 * (1 + initial cost)`.
    pub grad_tol: Option<f64>,
    pub max_sweeps: usize,
    /// Retracted gradient steps per block visit.
    pub inner_steps: usize,
    pub block_rule: BlockRule,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            r_init: None,
            r_max: None,
            grad_tol: None,
            max_sweeps: 1000,
            inner_steps: 5,
            block_rule: BlockRule::RoundRobin,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn r_init_for(&self, d: usize) -> usize {
        self.r_init.unwrap_or(d + 1).max(d)
    }

    pub fn r_max_for(&self, d: usize) -> usize {
        self.r_max.unwrap_or(d + 4).max(self.r_init_for(d))
    }

    pub fn grad_tol_for(&self, initial_cost: f64) -> f64 {
        self.grad_tol.unwrap_or(1e-6 * (1.0 + initial_cost))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationReason {
    Converged,
    MaxSweeps,
    EscapedRankLimit,
}

#[derive(Clone, Copy, Debug)]
pub struct SweepStat {
    pub sweep: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub rank: usize,
}

/// Per-sweep progress of one fixed-rank solve. Accepted costs are
/// non-increasing; `null_steps` counts block visits where no decreasing step
/// was found.
#[derive(Clone, Debug)]
pub struct SolveTrace {
    pub sweeps: Vec<SweepStat>,
    pub termination: TerminationReason,
    pub null_steps: usize,
    pub grad_tol: f64,
}

/// How to build the starting state.
#[derive(Clone, Debug)]
pub enum InitStrategy {
    /// Compose measurements along a breadth-first spanning tree from (0,0).
    SpanningTree,
    /// Embed the given poses (must cover every node).
    Given(PoseMap),
    /// Seeded uniformly random orthonormal frames and Gaussian translations.
    Random,
}

/// Builds a feasible lifted state at rank `r >= d`.
pub fn initialize(
    graph: &MultiRobotGraph,
    strategy: &InitStrategy,
    r: usize,
    seed: u64,
) -> Result<LiftedState> {
    let d = graph.dim;
    if r < d {
        return Err(Error::DimensionMismatch { expected: d, got: r });
    }
    match strategy {
        InitStrategy::SpanningTree => {
            let poses = spanning_tree_poses(graph)?;
            let ordered: Vec<Pose> = graph
                .node_ids()
                .map(|id| poses.get(&id).cloned().unwrap_or_else(|| Pose::identity(d)))
                .collect();
            LiftedState::from_poses(d, r, &ordered)
        }
        InitStrategy::Given(map) => {
            let mut ordered = Vec::with_capacity(graph.num_poses());
            for id in graph.node_ids() {
                let pose = map.get(&id).ok_or(Error::IncompleteSolution(id))?;
                ordered.push(pose.clone());
            }
            LiftedState::from_poses(d, r, &ordered)
        }
        InitStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(LiftedState::random(d, r, graph.num_poses(), &mut rng))
        }
    }
}

/// Poses obtained by composing measurements along a BFS tree rooted at the
/// first node; on a noiseless graph this reproduces the ground truth exactly.
pub fn spanning_tree_poses(graph: &MultiRobotGraph) -> Result<PoseMap> {
    let n = graph.num_poses();
    let d = graph.dim;
    let mut adjacency: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); n]; // (other, edge, forward)
    for (k, e) in graph.edges.iter().enumerate() {
        let a = graph.global_index(e.from)?;
        let b = graph.global_index(e.to)?;
        adjacency[a].push((b, k, true));
        adjacency[b].push((a, k, false));
    }
    let mut poses: Vec<Option<Pose>> = vec![None; n];
    poses[0] = Some(Pose::identity(d));
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        let base = poses[v].clone().unwrap();
        for &(u, k, forward) in &adjacency[v] {
            if poses[u].is_some() {
                continue;
            }
            let m = if forward {
                graph.edges[k].as_pose()
            } else {
                graph.edges[k].as_pose().inverse()
            };
            poses[u] = Some(base.compose(&m));
            queue.push_back(u);
        }
    }
    let mut out = PoseMap::new();
    for (g, pose) in poses.into_iter().enumerate() {
        let id = graph.node_of_global(g).unwrap();
        out.insert(id, pose.unwrap_or_else(|| Pose::identity(d)));
    }
    Ok(out)
}

/// Outcome of one block visit.
#[derive(Clone, Copy, Debug)]
pub struct BlockOutcome {
    /// Riemannian norm of the block gradient before the visit.
    pub grad_norm: f64,
    /// Frobenius norm of the state change.
    pub step_norm: f64,
    /// True when no decreasing step was found for some inner step.
    pub null_step: bool,
}

/// Riemannian gradient of the block objective, its norm, and the raw half
/// Euclidean gradient `Z L_bb + C` (needed for exact decrease evaluation).
fn block_gradient_full(
    rb: &RobotBlocks,
    own: &[NodeBlock],
    coupling: &[NodeBlock],
) -> (Vec<NodeBlock>, f64, Vec<NodeBlock>) {
    let intra = rb.apply_intra(own);
    let raw: Vec<NodeBlock> = intra
        .into_iter()
        .zip(coupling)
        .map(|(mut z, c)| {
            z.y += &c.y;
            z.p += &c.p;
            z
        })
        .collect();
    let mut grad: Vec<NodeBlock> = raw
        .iter()
        .map(|z| NodeBlock {
            y: &z.y * 2.0,
            p: &z.p * 2.0,
        })
        .collect();
    let mut norm_sq = 0.0;
    for (g, x) in grad.iter_mut().zip(own) {
        laplacian::project_frame_tangent(&x.y, &mut g.y);
        norm_sq += g.norm_squared();
    }
    (grad, norm_sq.sqrt(), raw)
}

fn block_gradient(
    rb: &RobotBlocks,
    own: &[NodeBlock],
    coupling: &[NodeBlock],
) -> (Vec<NodeBlock>, f64) {
    let (grad, norm, _) = block_gradient_full(rb, own, coupling);
    (grad, norm)
}

/// Exact objective change `g(Z + Delta) - g(Z)` of the ambient quadratic
/// block objective, evaluated as `2 <Delta, Z L + C> + <Delta, Delta L>`.
/// Free of the catastrophic cancellation that direct cost differencing
/// suffers when the achievable decrease is near the cost's floating-point
/// resolution.
fn block_cost_change(
    rb: &RobotBlocks,
    raw_half_grad: &[NodeBlock],
    own: &[NodeBlock],
    candidate: &[NodeBlock],
) -> f64 {
    let delta: Vec<NodeBlock> = candidate
        .iter()
        .zip(own)
        .map(|(c, o)| NodeBlock {
            y: &c.y - &o.y,
            p: &c.p - &o.p,
        })
        .collect();
    let l_delta = rb.apply_intra(&delta);
    let mut change = 0.0;
    for ((d, z), ld) in delta.iter().zip(raw_half_grad).zip(&l_delta) {
        change += 2.0 * d.dot(z) + d.dot(ld);
    }
    change
}

/// Riemannian norm of one block's gradient given externally supplied coupling
/// terms (what a decentralized agent can evaluate locally).
pub fn block_gradient_norm(rb: &RobotBlocks, own: &[NodeBlock], coupling: &[NodeBlock]) -> f64 {
    block_gradient(rb, own, coupling).1
}

fn retract_block(own: &[NodeBlock], dir: &[NodeBlock], t: f64) -> Vec<NodeBlock> {
    own.iter()
        .zip(dir)
        .map(|(x, g)| NodeBlock {
            y: geom::qf(&(&x.y + &g.y * t)),
            p: &x.p + &g.p * t,
        })
        .collect()
}

/// Tangent step without re-orthonormalization. For a tangent direction the
/// orthogonality defect it introduces is `t^2 g^T g`, second order; skipping
/// the QR factorization keeps the step free of eps-scale factorization noise,
/// which matters when the achievable decrease is itself near machine
/// precision.
fn step_block_lazy(own: &[NodeBlock], dir: &[NodeBlock], t: f64) -> Vec<NodeBlock> {
    own.iter()
        .zip(dir)
        .map(|(x, g)| NodeBlock {
            y: &x.y + &g.y * t,
            p: &x.p + &g.p * t,
        })
        .collect()
}

/// Orthogonality budget: states drift up to here before a QR cleanup, well
/// inside the 1e-9 feasibility contract.
const ORTHO_DEBT_LIMIT: f64 = 1e-12;

/// Runs the inner iterations of one block update on `own`. `remote` supplies
/// the (fixed) neighbor separator blocks by global index; it is all the
/// non-local state the update reads.
///
/// The first inner step uses the conservative `1 / (2 lambda_max)` step; later
/// steps try a Barzilai-Borwein spectral estimate (clamped against the
/// conservative floor), and every step is accepted only under Armijo
/// sufficient decrease on the residual-form block cost, so the block cost
/// never increases.
pub fn update_block_with_coupling(
    rb: &RobotBlocks,
    own: &mut Vec<NodeBlock>,
    remote: &std::collections::BTreeMap<usize, NodeBlock>,
    inner_steps: usize,
) -> BlockOutcome {
    let rank = own.first().map(NodeBlock::rank).unwrap_or(0);
    let coupling = rb.coupling_terms(rank, |g| &remote[&g]);
    let nominal_step = 1.0 / (2.0 * rb.lambda_max().max(1e-12));
    let mut outcome = BlockOutcome {
        grad_norm: 0.0,
        step_norm: 0.0,
        null_step: false,
    };
    let mut prev: Option<(Vec<NodeBlock>, Vec<NodeBlock>)> = None; // (state, gradient)
    let mut ortho_debt: f64 = own
        .iter()
        .map(|b| geom::orthogonality_deviation(&b.y))
        .fold(0.0, f64::max);
    for step_idx in 0..inner_steps {
        let (grad, gnorm, raw) = block_gradient_full(rb, own, &coupling);
        if step_idx == 0 {
            outcome.grad_norm = gnorm;
        }
        if gnorm <= 1e-14 * (1.0 + rb.lambda_max()) {
            break;
        }

        // spectral (BB1) step from the last accepted move, clamped to stay
        // within a sane multiple of the conservative step
        let mut t = nominal_step;
        if let Some((old_state, old_grad)) = &prev {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for ((cur, old), (gc, go)) in own
                .iter()
                .zip(old_state)
                .zip(grad.iter().zip(old_grad))
            {
                let dy = &cur.y - &old.y;
                let dp = &cur.p - &old.p;
                ss += dy.norm_squared() + dp.norm_squared();
                sy += dy.dot(&(&gc.y - &go.y)) + dp.dot(&(&gc.p - &go.p));
            }
            if sy > 1e-300 && ss > 0.0 {
                // the spectral estimate may legitimately exceed the
                // conservative step by the block condition number; Armijo
                // backtracking guards the upside
                t = (ss / sy).clamp(nominal_step, nominal_step * 1e8);
            }
        }

        let grad_y_sq: f64 = grad.iter().map(|g| g.y.norm_squared()).sum();
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let defect = t * t * grad_y_sq;
            let lazy = ortho_debt + defect <= ORTHO_DEBT_LIMIT;
            let candidate = if lazy {
                step_block_lazy(own, &grad, -t)
            } else {
                retract_block(own, &grad, -t)
            };
            let change = block_cost_change(rb, &raw, own, &candidate);
            if change <= -ARMIJO_C * t * gnorm * gnorm {
                let moved: f64 = candidate
                    .iter()
                    .zip(own.iter())
                    .map(|(a, b)| (&a.y - &b.y).norm_squared() + (&a.p - &b.p).norm_squared())
                    .sum();
                outcome.step_norm += moved.sqrt();
                ortho_debt = if lazy { ortho_debt + defect } else { 0.0 };
                prev = Some((std::mem::replace(own, candidate), grad));
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            outcome.null_step = true;
            break;
        }
    }
    outcome
}

/// One block update reading neighbor state from the full lifted state
/// (centralized form of the operation).
pub fn block_update(
    lap: &ConnectionLaplacian,
    x: &mut LiftedState,
    robot: usize,
    inner_steps: usize,
) -> Result<BlockOutcome> {
    let rb = block_submatrices(lap, robot)?;
    Ok(block_update_cached(&rb, x, inner_steps))
}

/// Separator blocks of every neighbor, keyed by global index (the exact
/// remote state a block update is allowed to read).
pub fn remote_separator_blocks(
    rb: &RobotBlocks,
    x: &LiftedState,
) -> std::collections::BTreeMap<usize, NodeBlock> {
    let mut map = std::collections::BTreeMap::new();
    for list in rb.coupling.values() {
        for c in list {
            map.entry(c.remote)
                .or_insert_with(|| x.blocks()[c.remote].clone());
        }
    }
    map
}

/// Same as [`block_update`] but with the robot's submatrices prebuilt.
pub fn block_update_cached(
    rb: &RobotBlocks,
    x: &mut LiftedState,
    inner_steps: usize,
) -> BlockOutcome {
    let remote = remote_separator_blocks(rb, x);
    let mut own: Vec<NodeBlock> = x.blocks()[rb.first..rb.first + rb.count].to_vec();
    let outcome = update_block_with_coupling(rb, &mut own, &remote, inner_steps);
    x.blocks_mut()[rb.first..rb.first + rb.count].clone_from_slice(&own);
    outcome
}

/// Fixed-rank RBCD: sweeps blocks until the full Riemannian gradient norm
/// drops below the tolerance or `max_sweeps` is exhausted. Deterministic for
/// fixed options.
pub fn solve(
    graph: &MultiRobotGraph,
    options: &SolverOptions,
    init: LiftedState,
) -> Result<(LiftedState, SolveTrace)> {
    let lap = laplacian::assemble(graph)?;
    solve_with(&lap, options, init)
}

/// [`solve`] against a prebuilt Laplacian.
pub fn solve_with(
    lap: &ConnectionLaplacian,
    options: &SolverOptions,
    init: LiftedState,
) -> Result<(LiftedState, SolveTrace)> {
    let num_robots = lap.num_robots();
    let robot_blocks: Vec<RobotBlocks> = (0..num_robots)
        .map(|r| block_submatrices(lap, r))
        .collect::<Result<_>>()?;

    let mut x = init;
    let mut current_cost = laplacian::cost(lap, &x)?;
    let grad_tol = options.grad_tol_for(current_cost);
    let mut trace = SolveTrace {
        sweeps: Vec::new(),
        termination: TerminationReason::MaxSweeps,
        null_steps: 0,
        grad_tol,
    };

    for sweep in 0..options.max_sweeps {
        let grad_norm = laplacian::gradient_norm(lap, &x)?;
        trace.sweeps.push(SweepStat {
            sweep,
            cost: current_cost,
            grad_norm,
            rank: x.rank(),
        });
        if grad_norm <= grad_tol {
            trace.termination = TerminationReason::Converged;
            return Ok((x, trace));
        }
        match options.block_rule {
            BlockRule::RoundRobin => {
                for rb in &robot_blocks {
                    let outcome = block_update_cached(rb, &mut x, options.inner_steps);
                    if outcome.null_step {
                        trace.null_steps += 1;
                    }
                }
            }
            BlockRule::GreedyGradient => {
                for _ in 0..num_robots {
                    let pick = greedy_pick(&robot_blocks, &x);
                    let outcome =
                        block_update_cached(&robot_blocks[pick], &mut x, options.inner_steps);
                    if outcome.null_step {
                        trace.null_steps += 1;
                    }
                }
            }
        }
        current_cost = laplacian::cost(lap, &x)?;
    }

    let grad_norm = laplacian::gradient_norm(lap, &x)?;
    trace.sweeps.push(SweepStat {
        sweep: options.max_sweeps,
        cost: current_cost,
        grad_norm,
        rank: x.rank(),
    });
    if grad_norm <= grad_tol {
        trace.termination = TerminationReason::Converged;
    }
    Ok((x, trace))
}

fn greedy_pick(robot_blocks: &[RobotBlocks], x: &LiftedState) -> usize {
    let mut best = 0usize;
    let mut best_norm = -1.0;
    for (idx, rb) in robot_blocks.iter().enumerate() {
        let coupling = {
            let blocks = x.blocks();
            rb.coupling_terms(x.rank(), |g| &blocks[g])
        };
        let own = &x.blocks()[rb.first..rb.first + rb.count];
        let (_, norm) = block_gradient(rb, own, &coupling);
        if norm > best_norm {
            best_norm = norm;
            best = idx;
        }
    }
    best
}

/// Escapes a certified saddle: pads the state with one zero row, places the
/// negative-eigenvalue direction of the dual certificate in the new row, and
/// backtracks along the retraction until the cost strictly decreases.
///
/// Fails with [`Error::RankLimitReached`] when the rank cap is already
/// reached. Returns the padded state unchanged (flagged `false`) in the
/// numerically degenerate case where no decreasing step is found.
pub fn escape_saddle(
    lap: &ConnectionLaplacian,
    x: &LiftedState,
    certificate_eigvec: &DVector<f64>,
    certificate_eigval: f64,
    r_max: usize,
) -> Result<(LiftedState, bool)> {
    if x.rank() >= r_max {
        return Err(Error::RankLimitReached { r_max });
    }
    if certificate_eigvec.len() != lap.dim() {
        return Err(Error::DimensionMismatch {
            expected: lap.dim(),
            got: certificate_eigvec.len(),
        });
    }
    let padded = x.pad_rank(1);
    let base_product = lap.apply(&padded)?;
    let d = lap.d();
    let bs = d + 1;
    let rank = padded.rank();

    // Tangent direction with the eigenvector in the fresh row: it is always
    // tangent because the padded row of every frame is zero, and the
    // second-order model along it is governed by the (negative) certificate
    // eigenvalue.
    let mut unit = certificate_eigvec.clone();
    let nrm = unit.norm();
    if nrm <= 1e-300 || certificate_eigval >= 0.0 {
        return Ok((padded, false));
    }
    unit /= nrm;
    let dir: Vec<NodeBlock> = (0..lap.num_nodes())
        .map(|v| {
            let mut b = NodeBlock::zeros(rank, d);
            for j in 0..d {
                b.y[(rank - 1, j)] = unit[v * bs + j];
            }
            b.p[rank - 1] = unit[v * bs + d];
            b
        })
        .collect();

    let mut t = 1.0;
    for _ in 0..60 {
        let candidate_blocks = retract_block(padded.blocks(), &dir, t);
        let candidate = LiftedState::new(d, rank, candidate_blocks);
        let change = laplacian::cost_change(lap, &padded, &base_product, &candidate)?;
        if change < -1e-12 {
            return Ok((candidate, true));
        }
        t *= 0.5;
    }
    Ok((padded, false))
}

/// Random tangent direction at `x` (test and line-search helper).
pub fn random_tangent<R: Rng>(x: &LiftedState, rng: &mut R) -> laplacian::Tangent {
    let blocks = x
        .blocks()
        .iter()
        .map(|b| {
            let mut nb = NodeBlock {
                y: DMatrix::from_fn(x.rank(), x.dim(), |_, _| {
                    rng.sample::<f64, _>(rand_distr::StandardNormal)
                }),
                p: DVector::from_fn(x.rank(), |_, _| {
                    rng.sample::<f64, _>(rand_distr::StandardNormal)
                }),
            };
            laplacian::project_frame_tangent(&b.y, &mut nb.y);
            nb
        })
        .collect();
    laplacian::Tangent { blocks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeId, RelativeMeasurement};

    fn noiseless_ring(n: usize) -> MultiRobotGraph {
        let mut g = MultiRobotGraph::new(2, vec![n]);
        let mut gt = PoseMap::new();
        let step = 2.0 * std::f64::consts::PI / n as f64;
        for k in 0..n {
            gt.insert(
                NodeId::new(0, k),
                Pose::new(
                    geom::rot2(step * k as f64),
                    DVector::from_vec(vec![(step * k as f64).cos(), (step * k as f64).sin()]),
                ),
            );
        }
        for k in 0..n {
            let a = NodeId::new(0, k);
            let b = NodeId::new(0, (k + 1) % n);
            let rel = gt[&a].inverse().compose(&gt[&b]);
            g.edges.push(RelativeMeasurement::new(
                a,
                b,
                rel.rotation,
                rel.translation,
                10.0,
                10.0,
            ));
        }
        g.ground_truth = Some(gt);
        g
    }

    #[test]
    fn spanning_tree_on_noiseless_graph_costs_zero() {
        let g = noiseless_ring(8);
        let x = initialize(&g, &InitStrategy::SpanningTree, 3, 0).unwrap();
        let lap = laplacian::assemble(&g).unwrap();
        assert!(laplacian::cost(&lap, &x).unwrap() <= 1e-18);
    }

    #[test]
    fn given_init_embeds_ground_truth() {
        let g = noiseless_ring(5);
        let gt = g.ground_truth.clone().unwrap();
        let x = initialize(&g, &InitStrategy::Given(gt), 4, 0).unwrap();
        assert!(x.stiefel_deviation() <= 1e-12);
        assert_eq!(x.rank(), 4);
    }

    #[test]
    fn random_init_is_deterministic_per_seed() {
        let g = noiseless_ring(5);
        let a = initialize(&g, &InitStrategy::Random, 3, 42).unwrap();
        let b = initialize(&g, &InitStrategy::Random, 3, 42).unwrap();
        let c = initialize(&g, &InitStrategy::Random, 3, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn solve_from_ground_truth_converges_immediately() {
        let g = noiseless_ring(6);
        let gt = g.ground_truth.clone().unwrap();
        let init = initialize(&g, &InitStrategy::Given(gt), 3, 0).unwrap();
        let (x, trace) = solve(&g, &SolverOptions::default(), init).unwrap();
        assert_eq!(trace.termination, TerminationReason::Converged);
        assert!(trace.sweeps.len() <= 2);
        let lap = laplacian::assemble(&g).unwrap();
        assert!(laplacian::cost(&lap, &x).unwrap() <= 1e-12);
    }

    fn two_robot_ring() -> MultiRobotGraph {
        let src = noiseless_ring(6);
        let mut h = MultiRobotGraph::new(2, vec![3, 3]);
        let remap = |id: NodeId| NodeId::new(id.index / 3, id.index % 3);
        for e in &src.edges {
            h.edges.push(RelativeMeasurement::new(
                remap(e.from),
                remap(e.to),
                e.rot_meas.clone(),
                e.trans_meas.clone(),
                e.kappa,
                e.sigma,
            ));
        }
        h.ground_truth = src
            .ground_truth
            .map(|gt| gt.into_iter().map(|(id, p)| (remap(id), p)).collect());
        h
    }

    #[test]
    fn block_update_is_local_and_decreases_cost() {
        let g = two_robot_ring();
        let lap = laplacian::assemble(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = LiftedState::random(2, 3, 6, &mut rng);
        let before = x.clone();
        let c0 = laplacian::cost(&lap, &x).unwrap();
        let outcome = block_update(&lap, &mut x, 0, 5).unwrap();
        let c1 = laplacian::cost(&lap, &x).unwrap();
        assert!(c1 < c0);
        assert!(outcome.grad_norm > 0.0);
        // robot 1's blocks must be untouched
        for v in 3..6 {
            assert_eq!(x.blocks()[v], before.blocks()[v]);
        }
        assert!(x.stiefel_deviation() <= 1e-9);
    }

    #[test]
    fn block_update_at_stationary_point_is_a_no_op() {
        let g = noiseless_ring(4);
        let gt = g.ground_truth.clone().unwrap();
        let lap = laplacian::assemble(&g).unwrap();
        let mut x = initialize(&g, &InitStrategy::Given(gt), 3, 0).unwrap();
        let outcome = block_update(&lap, &mut x, 0, 5).unwrap();
        assert!(outcome.step_norm <= 1e-12);
    }

    #[test]
    fn single_robot_block_update_matches_full_gradient_descent() {
        // With one robot the block subproblem is the full problem, so the
        // block gradient must equal the full Riemannian gradient.
        let g = noiseless_ring(5);
        let lap = laplacian::assemble(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = LiftedState::random(2, 3, 5, &mut rng);
        let rb = block_submatrices(&lap, 0).unwrap();
        let coupling = rb.coupling_terms(x.rank(), |g| &x.blocks()[g]);
        let (bg, bnorm) = block_gradient(&rb, x.blocks(), &coupling);
        let full = laplacian::riemannian_gradient(&lap, &x).unwrap();
        assert!((bnorm - full.norm()).abs() <= 1e-10 * (1.0 + full.norm()));
        for (a, b) in bg.iter().zip(&full.blocks) {
            assert!((&a.y - &b.y).abs().max() <= 1e-10);
        }
        // and a perturbed state strictly decreases
        let mut x2 = x.clone();
        let c0 = laplacian::cost(&lap, &x2).unwrap();
        block_update(&lap, &mut x2, 0, 3).unwrap();
        assert!(laplacian::cost(&lap, &x2).unwrap() < c0);
    }

    #[test]
    fn solve_costs_are_monotone_and_deterministic() {
        let g = noiseless_ring(7);
        let opts = SolverOptions {
            max_sweeps: 50,
            ..Default::default()
        };
        let init = initialize(&g, &InitStrategy::Random, 3, 5).unwrap();
        let (xa, ta) = solve(&g, &opts, init.clone()).unwrap();
        let (xb, tb) = solve(&g, &opts, init).unwrap();
        assert_eq!(xa, xb);
        assert_eq!(ta.sweeps.len(), tb.sweeps.len());
        // slack covers the fp noise of the trace-form cost evaluation
        for w in ta.sweeps.windows(2) {
            assert!(w[1].cost <= w[0].cost + 1e-9 * (1.0 + w[0].cost));
        }
    }

    #[test]
    fn padding_with_zero_row_preserves_cost() {
        let g = noiseless_ring(5);
        let lap = laplacian::assemble(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = LiftedState::random(2, 3, 5, &mut rng);
        let c0 = laplacian::cost(&lap, &x).unwrap();
        let padded = x.pad_rank(1);
        let c1 = laplacian::cost(&lap, &padded).unwrap();
        assert!((c0 - c1).abs() <= 1e-12 * (1.0 + c0));
        assert!(padded.stiefel_deviation() <= 1e-12);
    }
}
