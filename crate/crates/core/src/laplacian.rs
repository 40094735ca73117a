//! Connection Laplacian of the joint PGO objective and the lifted rank-r
//! decision variable.
//!
//! For a state X with r rows and one column block `[Y_i | p_i]` per node
//! (Y_i an r x d orthonormal frame, p_i an r-vector), the quadratic form
//! `trace(X L X^T)` equals the edge sum
//!
//! ```text
//! sum_e  kappa_e ||Y_j - Y_i R_ij||_F^2  +  sigma_e ||p_j - p_i - Y_i t_ij||^2
//! ```
//!
//! so at r = d with Y_i in SO(d) it is exactly the PGO objective. Assembly is
//! edge-additive and the block sparsity pattern follows graph adjacency.

use crate::error::{Error, Result};
use crate::geom;
use crate::graph::{MultiRobotGraph, Pose};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// One node's column block of a lifted state (or tangent vector): a rank x d
/// frame and a rank-vector.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeBlock {
    pub y: DMatrix<f64>,
    pub p: DVector<f64>,
}

impl NodeBlock {
    pub fn zeros(rank: usize, d: usize) -> Self {
        NodeBlock {
            y: DMatrix::zeros(rank, d),
            p: DVector::zeros(rank),
        }
    }

    pub fn rank(&self) -> usize {
        self.y.nrows()
    }

    /// Frobenius inner product of two blocks of equal shape.
    pub fn dot(&self, other: &NodeBlock) -> f64 {
        self.y.dot(&other.y) + self.p.dot(&other.p)
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    /// `self += x * block` where `block` is (d+1) x (d+1) in `[Y | p]` column
    /// layout. Allocation-free; used by every matrix-vector product.
    pub fn accumulate_mul(&mut self, x: &NodeBlock, block: &DMatrix<f64>, d: usize) {
        let byy = block.view_range(0..d, 0..d);
        let byp = block.view_range(0..d, d..d + 1);
        let bpy = block.view_range(d..d + 1, 0..d);
        let bpp = block[(d, d)];
        self.y.gemm(1.0, &x.y, &byy, 1.0);
        self.y.gemm(1.0, &x.p, &bpy, 1.0);
        self.p.gemm(1.0, &x.y, &byp, 1.0);
        self.p.axpy(bpp, &x.p, 1.0);
    }
}

/// Rank-r lifted state: one [`NodeBlock`] per node, ordered by global index.
/// Feasible states keep every `Y_i` orthonormal (`Y_i^T Y_i = I_d`).
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedState {
    d: usize,
    rank: usize,
    blocks: Vec<NodeBlock>,
}

impl LiftedState {
    pub fn new(d: usize, rank: usize, blocks: Vec<NodeBlock>) -> Self {
        LiftedState { d, rank, blocks }
    }

    /// Embeds SE(d) poses at rank `r >= d` by zero-padding below the rotation.
    pub fn from_poses(d: usize, rank: usize, poses: &[Pose]) -> Result<Self> {
        if rank < d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: rank,
            });
        }
        let blocks = poses
            .iter()
            .map(|pose| {
                let mut b = NodeBlock::zeros(rank, d);
                for i in 0..d {
                    for j in 0..d {
                        b.y[(i, j)] = pose.rotation[(i, j)];
                    }
                    b.p[i] = pose.translation[i];
                }
                b
            })
            .collect();
        Ok(LiftedState::new(d, rank, blocks))
    }

    /// Random feasible state: Haar frames, standard-normal translations.
    pub fn random<R: Rng>(d: usize, rank: usize, n: usize, rng: &mut R) -> Self {
        let blocks = (0..n)
            .map(|_| NodeBlock {
                y: geom::random_stiefel(rank, d, rng),
                p: DVector::from_fn(rank, |_, _| {
                    rng.sample::<f64, _>(rand_distr::StandardNormal)
                }),
            })
            .collect();
        LiftedState::new(d, rank, blocks)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_nodes(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[NodeBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [NodeBlock] {
        &mut self.blocks
    }

    /// Max-abs deviation of any `Y_i^T Y_i` from the identity.
    pub fn stiefel_deviation(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| geom::orthogonality_deviation(&b.y))
            .fold(0.0, f64::max)
    }

    /// Same state with `extra` zero rows appended (rank r + extra).
    pub fn pad_rank(&self, extra: usize) -> LiftedState {
        let rank = self.rank + extra;
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let mut nb = NodeBlock::zeros(rank, self.d);
                for i in 0..self.rank {
                    for j in 0..self.d {
                        nb.y[(i, j)] = b.y[(i, j)];
                    }
                    nb.p[i] = b.p[i];
                }
                nb
            })
            .collect();
        LiftedState::new(self.d, rank, blocks)
    }

    /// Dense r x (d+1)n matrix of the stacked state, node blocks in global
    /// order with the translation column last in each block.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let bs = self.d + 1;
        let mut m = DMatrix::zeros(self.rank, bs * self.blocks.len());
        for (k, b) in self.blocks.iter().enumerate() {
            for i in 0..self.rank {
                for j in 0..self.d {
                    m[(i, k * bs + j)] = b.y[(i, j)];
                }
                m[(i, k * bs + self.d)] = b.p[i];
            }
        }
        m
    }
}

/// A tangent element at a lifted state (same shape, no orthonormality).
#[derive(Clone, Debug)]
pub struct Tangent {
    pub blocks: Vec<NodeBlock>,
}

impl Tangent {
    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(NodeBlock::norm_squared)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for b in &mut self.blocks {
            b.y *= s;
            b.p *= s;
        }
    }

    pub fn dot(&self, other: &Tangent) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.dot(b))
            .sum()
    }
}

/// One edge of the objective in solver-ready form (endpoints as global node
/// indices). Kept alongside the assembled matrix so block objectives can be
/// evaluated in residual form, which is free of the catastrophic cancellation
/// the raw quadratic form suffers near an optimum.
#[derive(Clone, Debug)]
pub struct EdgeTerm {
    pub a: usize,
    pub b: usize,
    pub rot: DMatrix<f64>,
    pub trans: DVector<f64>,
    pub kappa: f64,
    pub sigma: f64,
}

impl EdgeTerm {
    /// `kappa ||Y_b - Y_a R||_F^2 + sigma ||p_b - p_a - Y_a t||^2`.
    pub fn residual_cost(&self, xa: &NodeBlock, xb: &NodeBlock) -> f64 {
        let rot_res = &xb.y - &xa.y * &self.rot;
        let trans_res = &xb.p - &xa.p - &xa.y * &self.trans;
        self.kappa * rot_res.norm_squared() + self.sigma * trans_res.norm_squared()
    }
}

/// Sparse symmetric positive semidefinite matrix of the lifted objective.
/// Stored as (d+1) x (d+1) node-pair blocks: one diagonal block per node and
/// one off-diagonal block per adjacent pair.
#[derive(Clone, Debug)]
pub struct ConnectionLaplacian {
    d: usize,
    n: usize,
    poses_per_robot: Vec<usize>,
    diag: Vec<DMatrix<f64>>,
    /// `adj[v]` lists `(u, L_uv)` with `L_uv` the block of rows `u`, columns
    /// `v`, so that `(X L)_v = X_v L_vv + sum_u X_u L_uv`.
    adj: Vec<Vec<(usize, DMatrix<f64>)>>,
    edge_terms: Vec<EdgeTerm>,
    inf_norm: f64,
}

/// Assembles the connection Laplacian of a graph. Requires structural validity
/// (existing endpoints, no self-loops, finite nonnegative weights); weight
/// positivity and connectivity are reported by graph validation, not here, so
/// rotation-only instances with zero translation weight stay expressible.
pub fn assemble(graph: &MultiRobotGraph) -> Result<ConnectionLaplacian> {
    let d = graph.dim;
    if d != 2 && d != 3 {
        return Err(Error::InvalidGraph(format!("dimension {d} not in {{2, 3}}")));
    }
    let bs = d + 1;
    let n = graph.num_poses();
    let mut diag = vec![DMatrix::zeros(bs, bs); n];
    let mut off: std::collections::BTreeMap<(usize, usize), DMatrix<f64>> =
        std::collections::BTreeMap::new();
    let mut edge_terms = Vec::with_capacity(graph.edges.len());

    for (k, e) in graph.edges.iter().enumerate() {
        let a = graph.global_index(e.from)?;
        let b = graph.global_index(e.to)?;
        if a == b {
            return Err(Error::InvalidGraph(format!("edge #{k} is a self-loop")));
        }
        if e.dim() != d || e.trans_meas.len() != d {
            return Err(Error::InvalidGraph(format!(
                "edge #{k} measurement dimension mismatch"
            )));
        }
        if !(e.kappa >= 0.0) || !(e.sigma >= 0.0) || !e.kappa.is_finite() || !e.sigma.is_finite() {
            return Err(Error::InvalidGraph(format!(
                "edge #{k} has negative or non-finite weight"
            )));
        }
        let kappa = e.kappa;
        let sigma = e.sigma;
        let t = &e.trans_meas;
        let r = &e.rot_meas;
        edge_terms.push(EdgeTerm {
            a,
            b,
            rot: r.clone(),
            trans: t.clone(),
            kappa,
            sigma,
        });

        // Diagonal contribution at the tail (frame of the measurement).
        {
            let da = &mut diag[a];
            for i in 0..d {
                da[(i, i)] += kappa;
                for j in 0..d {
                    da[(i, j)] += sigma * t[i] * t[j];
                }
                da[(i, d)] += sigma * t[i];
                da[(d, i)] += sigma * t[i];
            }
            da[(d, d)] += sigma;
        }
        // Diagonal contribution at the head.
        {
            let db = &mut diag[b];
            for i in 0..d {
                db[(i, i)] += kappa;
            }
            db[(d, d)] += sigma;
        }
        // Off-diagonal block with rows at `a`, columns at `b`.
        let mut block = DMatrix::zeros(bs, bs);
        for i in 0..d {
            for j in 0..d {
                block[(i, j)] = -kappa * r[(i, j)];
            }
            block[(i, d)] = -sigma * t[i];
        }
        block[(d, d)] = -sigma;
        match off.entry((a.min(b), a.max(b))) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(if a < b { block } else { block.transpose() });
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                if a < b {
                    *o.get_mut() += block;
                } else {
                    *o.get_mut() += block.transpose();
                }
            }
        }
    }

    let mut adj: Vec<Vec<(usize, DMatrix<f64>)>> = vec![Vec::new(); n];
    for ((i, j), block) in off {
        // `block` holds rows i, columns j (i < j).
        adj[j].push((i, block.clone()));
        adj[i].push((j, block.transpose()));
    }
    for list in &mut adj {
        list.sort_by_key(|(u, _)| *u);
    }

    let mut lap = ConnectionLaplacian {
        d,
        n,
        poses_per_robot: graph.poses_per_robot.clone(),
        diag,
        adj,
        edge_terms,
        inf_norm: 0.0,
    };
    lap.inf_norm = lap.compute_inf_norm();
    Ok(lap)
}

impl ConnectionLaplacian {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.d + 1
    }

    /// Total matrix dimension (d+1) * n.
    pub fn dim(&self) -> usize {
        (self.d + 1) * self.n
    }

    pub fn poses_per_robot(&self) -> &[usize] {
        &self.poses_per_robot
    }

    pub fn num_robots(&self) -> usize {
        self.poses_per_robot.len()
    }

    pub fn diag_block(&self, v: usize) -> &DMatrix<f64> {
        &self.diag[v]
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, DMatrix<f64>)] {
        &self.adj[v]
    }

    /// Max absolute row sum, used to scale spectral tolerances.
    pub fn inf_norm(&self) -> f64 {
        self.inf_norm
    }

    fn compute_inf_norm(&self) -> f64 {
        let bs = self.d + 1;
        let mut best = 0.0f64;
        for v in 0..self.n {
            for i in 0..bs {
                let mut row = 0.0;
                for j in 0..bs {
                    row += self.diag[v][(i, j)].abs();
                }
                for (_, block) in &self.adj[v] {
                    // adj[v] holds L_uv (rows u, cols v); the row of node v goes
                    // through the transpose.
                    for j in 0..bs {
                        row += block[(j, i)].abs();
                    }
                }
                best = best.max(row);
            }
        }
        best
    }

    fn check_state(&self, x: &LiftedState) -> Result<()> {
        if x.dim() != self.d || x.num_nodes() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n * (self.d + 1),
                got: x.num_nodes() * (x.dim() + 1),
            });
        }
        Ok(())
    }

    /// The product `X L`, one block per node.
    pub fn apply(&self, x: &LiftedState) -> Result<Vec<NodeBlock>> {
        self.check_state(x)?;
        let rank = x.rank();
        let mut out = vec![NodeBlock::zeros(rank, self.d); self.n];
        let blocks = x.blocks();
        for v in 0..self.n {
            out[v].accumulate_mul(&blocks[v], &self.diag[v], self.d);
            for (u, block) in &self.adj[v] {
                out[v].accumulate_mul(&blocks[*u], block, self.d);
            }
        }
        Ok(out)
    }

    /// `S v` style product on a flat (d+1)n vector (node-major layout, the
    /// translation coordinate last within each block).
    pub fn apply_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let bs = self.d + 1;
        let mut out = DVector::zeros(self.dim());
        for node in 0..self.n {
            let src = v.rows(node * bs, bs);
            out.rows_mut(node * bs, bs)
                .gemm(1.0, &self.diag[node], &src, 1.0);
            for (u, block) in &self.adj[node] {
                // block = L_uv; row chunk of v needs L_vu = block^T.
                out.rows_mut(node * bs, bs)
                    .gemm_tr(1.0, block, &v.rows(*u * bs, bs), 1.0);
            }
        }
        out
    }

    /// Dense copy (tests and small-scale oracles).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let bs = self.d + 1;
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for v in 0..self.n {
            for i in 0..bs {
                for j in 0..bs {
                    m[(v * bs + i, v * bs + j)] = self.diag[v][(i, j)];
                }
            }
            for (u, block) in &self.adj[v] {
                for i in 0..bs {
                    for j in 0..bs {
                        m[(u * bs + i, v * bs + j)] = block[(i, j)];
                    }
                }
            }
        }
        m
    }
}

/// Objective value `trace(X L X^T)`, clamped at zero against roundoff.
pub fn cost(lap: &ConnectionLaplacian, x: &LiftedState) -> Result<f64> {
    let z = lap.apply(x)?;
    let c: f64 = x.blocks().iter().zip(&z).map(|(a, b)| a.dot(b)).sum();
    Ok(c.max(0.0))
}

/// Exact objective change `F(candidate) - F(base)` through the quadratic
/// identity `2 <Delta, base L> + <Delta, Delta L>` with `Delta` formed
/// explicitly; `base_product` must be `base L` (from [`ConnectionLaplacian::apply`]).
/// Numerically robust where direct cost differencing cancels.
pub fn cost_change(
    lap: &ConnectionLaplacian,
    base: &LiftedState,
    base_product: &[NodeBlock],
    candidate: &LiftedState,
) -> Result<f64> {
    let delta_blocks: Vec<NodeBlock> = candidate
        .blocks()
        .iter()
        .zip(base.blocks())
        .map(|(c, b)| NodeBlock {
            y: &c.y - &b.y,
            p: &c.p - &b.p,
        })
        .collect();
    let delta = LiftedState::new(base.dim(), base.rank(), delta_blocks);
    let l_delta = lap.apply(&delta)?;
    let mut change = 0.0;
    for ((d, z), ld) in delta.blocks().iter().zip(base_product).zip(&l_delta) {
        change += 2.0 * d.dot(z) + d.dot(ld);
    }
    Ok(change)
}

/// Euclidean gradient `2 X L`.
pub fn euclidean_gradient(lap: &ConnectionLaplacian, x: &LiftedState) -> Result<Tangent> {
    let mut z = lap.apply(x)?;
    for b in &mut z {
        b.y *= 2.0;
        b.p *= 2.0;
    }
    Ok(Tangent { blocks: z })
}

/// Riemannian gradient: the Euclidean gradient with each frame component
/// projected to the Stiefel tangent space, translations untouched.
pub fn riemannian_gradient(lap: &ConnectionLaplacian, x: &LiftedState) -> Result<Tangent> {
    let mut g = euclidean_gradient(lap, x)?;
    for (b, xb) in g.blocks.iter_mut().zip(x.blocks()) {
        project_frame_tangent(&xb.y, &mut b.y);
    }
    Ok(g)
}

/// In place: `g_y <- g_y - y sym(y^T g_y)`.
pub fn project_frame_tangent(y: &DMatrix<f64>, g_y: &mut DMatrix<f64>) {
    let yt_g = y.transpose() * &*g_y;
    let s = geom::sym(&yt_g);
    g_y.gemm(-1.0, y, &s, 1.0);
}

/// Norm of the Riemannian gradient.
pub fn gradient_norm(lap: &ConnectionLaplacian, x: &LiftedState) -> Result<f64> {
    Ok(riemannian_gradient(lap, x)?.norm())
}

/// One robot's view of the Laplacian: the principal submatrix over its own
/// column blocks plus, per neighboring robot, the off-diagonal blocks that
/// touch separator poses. This is all a block update reads.
#[derive(Clone, Debug)]
pub struct RobotBlocks {
    pub robot: usize,
    /// Global index of the robot's first node.
    pub first: usize,
    pub count: usize,
    d: usize,
    diag: Vec<DMatrix<f64>>,
    /// Intra-robot adjacency in local indices; entry `(u, L_uv)` under `v`.
    intra: Vec<Vec<(usize, DMatrix<f64>)>>,
    /// Coupling blocks grouped by neighbor robot.
    pub coupling: std::collections::BTreeMap<usize, Vec<CouplingBlock>>,
    /// Edges with both endpoints inside the block (residual-form objective).
    intra_edges: Vec<EdgeTerm>,
    /// Edges with exactly one endpoint inside the block.
    coupling_edges: Vec<EdgeTerm>,
    lambda_max: f64,
}

/// One off-diagonal block joining a local pose to another robot's pose:
/// `block` holds rows at `remote`, columns at `local`, so the coupling term of
/// the local gradient is `X_remote * block`.
#[derive(Clone, Debug)]
pub struct CouplingBlock {
    /// Local node index within the owning robot.
    pub local: usize,
    /// Global node index on the neighbor.
    pub remote: usize,
    pub remote_robot: usize,
    pub block: DMatrix<f64>,
}

/// Extracts the principal block `L_bb` and the neighbor coupling map for one
/// robot.
pub fn block_submatrices(lap: &ConnectionLaplacian, robot: usize) -> Result<RobotBlocks> {
    if robot >= lap.poses_per_robot.len() {
        return Err(Error::InvalidGraph(format!("robot {robot} out of range")));
    }
    let first: usize = lap.poses_per_robot[..robot].iter().sum();
    let count = lap.poses_per_robot[robot];
    let d = lap.d;
    let mut diag = Vec::with_capacity(count);
    let mut intra = vec![Vec::new(); count];
    let mut coupling: std::collections::BTreeMap<usize, Vec<CouplingBlock>> =
        std::collections::BTreeMap::new();

    for local in 0..count {
        let v = first + local;
        diag.push(lap.diag[v].clone());
        for (u, block) in &lap.adj[v] {
            if *u >= first && *u < first + count {
                intra[local].push((*u - first, block.clone()));
            } else {
                let remote_robot = robot_of(&lap.poses_per_robot, *u);
                coupling.entry(remote_robot).or_default().push(CouplingBlock {
                    local,
                    remote: *u,
                    remote_robot,
                    block: block.clone(),
                });
            }
        }
    }

    let mut intra_edges = Vec::new();
    let mut coupling_edges = Vec::new();
    let in_block = |g: usize| g >= first && g < first + count;
    for e in &lap.edge_terms {
        match (in_block(e.a), in_block(e.b)) {
            (true, true) => intra_edges.push(e.clone()),
            (true, false) | (false, true) => coupling_edges.push(e.clone()),
            (false, false) => {}
        }
    }

    let mut rb = RobotBlocks {
        robot,
        first,
        count,
        d,
        diag,
        intra,
        coupling,
        intra_edges,
        coupling_edges,
        lambda_max: 0.0,
    };
    rb.lambda_max = rb.estimate_lambda_max();
    Ok(rb)
}

fn robot_of(poses_per_robot: &[usize], mut g: usize) -> usize {
    for (robot, &count) in poses_per_robot.iter().enumerate() {
        if g < count {
            return robot;
        }
        g -= count;
    }
    poses_per_robot.len()
}

impl RobotBlocks {
    pub fn d(&self) -> usize {
        self.d
    }

    /// Cached upper estimate of the largest eigenvalue of `L_bb`; sets the
    /// nominal gradient step `1 / (2 lambda_max)`.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Local indices of this robot's poses incident to edges shared with
    /// `neighbor` (the separator poses), sorted.
    pub fn own_separators_with(&self, neighbor: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .coupling
            .get(&neighbor)
            .map(|v| v.iter().map(|c| c.local).collect())
            .unwrap_or_default();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Global indices of the neighbor poses this robot needs to read, sorted.
    pub fn remote_separators_with(&self, neighbor: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .coupling
            .get(&neighbor)
            .map(|v| v.iter().map(|c| c.remote).collect())
            .unwrap_or_default();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `(X_b L_bb)` for the local blocks.
    pub fn apply_intra(&self, own: &[NodeBlock]) -> Vec<NodeBlock> {
        let rank = own[0].rank();
        let mut out = vec![NodeBlock::zeros(rank, self.d); self.count];
        for v in 0..self.count {
            out[v].accumulate_mul(&own[v], &self.diag[v], self.d);
            for (u, block) in &self.intra[v] {
                out[v].accumulate_mul(&own[*u], block, self.d);
            }
        }
        out
    }

    /// Quadratic form `trace(X_b L_bb X_b^T)` over the local blocks.
    pub fn quadratic(&self, own: &[NodeBlock]) -> f64 {
        self.apply_intra(own)
            .iter()
            .zip(own)
            .map(|(z, x)| z.dot(x))
            .sum()
    }

    /// Coupling terms `C_v = sum_u X_u L_uv` over inter-robot edges, with the
    /// neighbor blocks supplied by `lookup` (global index -> block).
    pub fn coupling_terms<'a, F>(&self, rank: usize, lookup: F) -> Vec<NodeBlock>
    where
        F: Fn(usize) -> &'a NodeBlock,
    {
        let mut out = vec![NodeBlock::zeros(rank, self.d); self.count];
        for list in self.coupling.values() {
            for c in list {
                out[c.local].accumulate_mul(lookup(c.remote), &c.block, self.d);
            }
        }
        out
    }

    /// Block objective in residual form: the edge-sum over all edges touching
    /// this block, with neighbor endpoints read through `lookup`. Differs from
    /// the full objective only by the (constant) neighbor-internal terms, and
    /// is numerically well conditioned near an optimum, unlike the raw
    /// quadratic form.
    pub fn residual_cost<'a, F>(&self, own: &[NodeBlock], lookup: F) -> f64
    where
        F: Fn(usize) -> &'a NodeBlock,
    {
        let mut total = 0.0;
        for e in &self.intra_edges {
            total += e.residual_cost(&own[e.a - self.first], &own[e.b - self.first]);
        }
        for e in &self.coupling_edges {
            let xa = if e.a >= self.first && e.a < self.first + self.count {
                &own[e.a - self.first]
            } else {
                lookup(e.a)
            };
            let xb = if e.b >= self.first && e.b < self.first + self.count {
                &own[e.b - self.first]
            } else {
                lookup(e.b)
            };
            total += e.residual_cost(xa, xb);
        }
        total
    }

    /// Flat matvec with `L_bb` (power iteration helper).
    fn apply_intra_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let bs = self.d + 1;
        let mut out = DVector::zeros(self.count * bs);
        for node in 0..self.count {
            let src = v.rows(node * bs, bs);
            out.rows_mut(node * bs, bs)
                .gemm(1.0, &self.diag[node], &src, 1.0);
            for (u, block) in &self.intra[node] {
                out.rows_mut(node * bs, bs)
                    .gemm_tr(1.0, block, &v.rows(*u * bs, bs), 1.0);
            }
        }
        out
    }

    fn estimate_lambda_max(&self) -> f64 {
        let bs = self.d + 1;
        let dim = self.count * bs;
        if dim == 0 {
            return 0.0;
        }
        // Deterministic start; 1.05 headroom over the power-iteration estimate
        // keeps the step conservative (Armijo backtracking covers the rest).
        let mut v = DVector::from_fn(dim, |i, _| 1.0 + (i as f64 * 0.7).sin());
        let mut lambda = 0.0;
        for _ in 0..60 {
            let w = self.apply_intra_vec(&v);
            let n = w.norm();
            if n <= 1e-300 {
                return 0.0;
            }
            lambda = v.dot(&w) / v.norm_squared();
            v = w / n;
        }
        (lambda * 1.05).max(1e-12)
    }
}
