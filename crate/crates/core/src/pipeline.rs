//! End-to-end certified solve: rank staircase around the RBCD solver, dual
//! certification, saddle escape, rounding, and gauge fixing.

use crate::certifier::{self, Certificate, Verdict};
use crate::error::Result;
use crate::graph::{MultiRobotGraph, NodeId, PoseMap};
use crate::laplacian::{self, ConnectionLaplacian, LiftedState};
use crate::netsim::{self, NetworkProfile, TrafficStats};
use crate::rounding;
use crate::solver::{self, InitStrategy, SolveTrace, SolverOptions, TerminationReason};

/// How a certified-solve run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PipelineStatus {
    /// Global optimality certified at the final rank.
    Certified,
    /// The decisive eigenvalue fell in the tolerance dead band (or the
    /// eigensolve failed); no verdict.
    Indeterminate,
    /// Certification kept failing and the rank cap was reached.
    RankLimited,
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub status: PipelineStatus,
    /// Rounded, gauge-fixed poses (anchor (0,0) at the identity).
    pub poses: PoseMap,
    pub lifted: LiftedState,
    pub certificate: Option<Certificate>,
    /// One solve trace per staircase rank.
    pub traces: Vec<SolveTrace>,
    /// Lifted objective value of the final state.
    pub final_cost: f64,
    /// Objective value of the rounded SE(d) solution.
    pub rounded_cost: f64,
    pub total_sweeps: usize,
    /// Traffic of the decentralized runs (empty for centralized execution).
    pub traffic: TrafficStats,
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub solver: SolverOptions,
    pub init: InitStrategy,
    /// Relative tolerance of the certificate dead band.
    pub cert_tol_rel: f64,
    /// Execute block sweeps through the message-passing harness instead of
    /// the centralized loop (certification stays central).
    pub decentralized: Option<NetworkProfile>,
    /// Seed of the network simulator (delivery randomness), separate from the
    /// solver seed.
    pub net_seed: u64,
    /// Warm-start pose-level inits with a few damped Gauss-Newton iterations
    /// before lifting. Purely a performance device: the dual certificate
    /// remains the only optimality authority, and a warm start that lands in
    /// a local minimum is caught and escaped by the staircase.
    pub refine_init: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            solver: SolverOptions::default(),
            init: InitStrategy::SpanningTree,
            cert_tol_rel: 1e-6,
            decentralized: None,
            net_seed: 0,
            refine_init: true,
        }
    }
}

/// Staircase certified solve:
/// solve at rank r, assemble the dual certificate, verify; on a failed
/// certificate escape to rank r+1 along the negative-eigenvalue direction and
/// re-solve, until certified, indeterminate, or the rank cap.
pub fn certified_solve(graph: &MultiRobotGraph, options: &PipelineOptions) -> Result<PipelineResult> {
    let lap = laplacian::assemble(graph)?;
    certified_solve_with(graph, &lap, options)
}

/// [`certified_solve`] against a prebuilt Laplacian.
pub fn certified_solve_with(
    graph: &MultiRobotGraph,
    lap: &ConnectionLaplacian,
    options: &PipelineOptions,
) -> Result<PipelineResult> {
    let d = graph.dim;
    let r_init = options.solver.r_init_for(d);
    let r_max = options.solver.r_max_for(d);
    let init = if options.refine_init {
        refine_init_strategy(graph, &options.init)
    } else {
        options.init.clone()
    };
    let mut state = solver::initialize(graph, &init, r_init, options.solver.seed)?;
    let mut traces = Vec::new();
    let mut traffic = TrafficStats::default();
    let mut solver_opts = options.solver.clone();

    let (status, certificate, state) = loop {
        // The certificate needs stationarity relative to the *final* cost,
        // while the solver's default tolerance is relative to the initial
        // cost (far looser from a bad init, and the decentralized protocol
        // only bounds per-agent local gradients). Re-solve with a tightened
        // tolerance until the stationarity gate is satisfied.
        let mut solved = state;
        let mut rejected: Option<(f64, f64)> = None;
        for _attempt in 0..5 {
            let next = match &options.decentralized {
                None => {
                    let (x, trace) = solver::solve_with(lap, &solver_opts, solved)?;
                    traces.push(trace);
                    x
                }
                Some(profile) => {
                    let run = netsim::run_decentralized_with(
                        lap,
                        &solver_opts,
                        profile,
                        options.net_seed,
                        solved,
                    )?;
                    traces.push(run.trace);
                    merge_traffic(&mut traffic, &run.traffic);
                    run.state
                }
            };
            solved = next;
            let cost = laplacian::cost(lap, &solved)?;
            let grad = laplacian::gradient_norm(lap, &solved)?;
            let threshold = certifier::STATIONARITY_TOL * (1.0 + cost);
            if grad <= threshold {
                rejected = None;
                break;
            }
            rejected = Some((grad, threshold));
            solver_opts.grad_tol = Some(0.3 * threshold);
        }

        let cert = match rejected {
            None => {
                let s = certifier::assemble_dual(lap, &solved)?;
                certifier::verify(&s, &solved, options.cert_tol_rel)
            }
            Some((grad_norm, threshold)) => {
                // ran out of sweep budget away from stationarity: no
                // meaningful certificate
                let cert = Certificate {
                    lambda_small: Vec::new(),
                    verdict: Verdict::Indeterminate,
                    escape_eigvec: None,
                    lambda_d_plus_1: 0.0,
                    tol_used: options.cert_tol_rel * lap.inf_norm(),
                    diagnostic: Some(format!(
                        "not stationary: gradient {grad_norm:.3e} > {threshold:.3e}"
                    )),
                };
                break (PipelineStatus::Indeterminate, Some(cert), solved);
            }
        };

        match cert.verdict {
            Verdict::Certified => {
                break (PipelineStatus::Certified, Some(cert), solved);
            }
            Verdict::Indeterminate => {
                break (PipelineStatus::Indeterminate, Some(cert), solved);
            }
            Verdict::NotCertified => {
                if solved.rank() >= r_max {
                    if let Some(trace) = traces.last_mut() {
                        trace.termination = TerminationReason::EscapedRankLimit;
                    }
                    break (PipelineStatus::RankLimited, Some(cert), solved);
                }
                let eigvec = cert
                    .escape_eigvec
                    .as_ref()
                    .expect("not-certified verdicts carry the eigenvector");
                let (escaped, _stepped) = solver::escape_saddle(
                    lap,
                    &solved,
                    eigvec,
                    cert.lambda_d_plus_1,
                    r_max,
                )?;
                state = escaped;
            }
        }
    };

    let final_cost = laplacian::cost(lap, &state)?;
    let poses = rounding::round(graph, &state)?;
    let poses = rounding::gauge_fix(&poses, NodeId::new(0, 0))?;
    let rounded_cost = crate::baseline::pgo_cost(graph, &poses)?;
    let total_sweeps = traces.iter().map(|t| t.sweeps.len()).sum();

    Ok(PipelineResult {
        status,
        poses,
        lifted: state,
        certificate,
        traces,
        final_cost,
        rounded_cost,
        total_sweeps,
        traffic,
    })
}

/// Replaces a pose-level init with its Gauss-Newton refinement (best effort;
/// random rank-r inits have no pose representation and pass through).
fn refine_init_strategy(graph: &MultiRobotGraph, init: &InitStrategy) -> InitStrategy {
    let poses = match init {
        InitStrategy::SpanningTree => solver::spanning_tree_poses(graph).ok(),
        InitStrategy::Given(map) => Some(map.clone()),
        InitStrategy::Random => None,
    };
    match poses {
        None => init.clone(),
        Some(poses) => {
            let gn = crate::baseline::GaussNewtonOptions {
                max_iters: 25,
                ..Default::default()
            };
            match crate::baseline::gauss_newton_pgo(graph, &poses, &gn) {
                Ok((refined, _)) => InitStrategy::Given(refined),
                Err(_) => InitStrategy::Given(poses),
            }
        }
    }
}

fn merge_traffic(total: &mut TrafficStats, part: &TrafficStats) {
    total.messages_sent += part.messages_sent;
    total.retransmissions += part.retransmissions;
    total.acks_sent += part.acks_sent;
    total.bytes_modeled += part.bytes_modeled;
    if total.per_robot_sent.len() < part.per_robot_sent.len() {
        total.per_robot_sent.resize(part.per_robot_sent.len(), 0);
    }
    for (t, p) in total.per_robot_sent.iter_mut().zip(&part.per_robot_sent) {
        *t += p;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{self, MissionSpec, NoiseModel, TrajectoryShape};

    fn mission(noise: f64, seed: u64, per: usize) -> MultiRobotGraph {
        synth::generate(&MissionSpec {
            dim: 2,
            num_robots: 2,
            poses_per_robot: per,
            trajectory_shape: TrajectoryShape::Line,
            intra_loop_period: 5,
            inter_overlap: 0.4,
            noise: NoiseModel {
                rot_stddev: noise,
                trans_stddev: noise,
                seed,
            },
        })
        .unwrap()
    }

    #[test]
    fn noiseless_mission_certifies_from_spanning_tree() {
        let g = mission(0.0, 0, 8);
        let result = certified_solve(&g, &PipelineOptions::default()).unwrap();
        assert_eq!(result.status, PipelineStatus::Certified);
        assert!(result.final_cost <= 1e-10);
        assert!(result.rounded_cost <= 1e-8);
        // anchor at identity after gauge fix
        let anchor = &result.poses[&NodeId::new(0, 0)];
        assert!(anchor.translation.abs().max() <= 1e-12);
    }

    #[test]
    fn noisy_mission_certifies_and_rounding_is_tight() {
        let g = mission(0.02, 5, 10);
        let options = PipelineOptions {
            solver: SolverOptions {
                max_sweeps: 3000,
                ..Default::default()
            },
            ..Default::default()
        };
        let result = certified_solve(&g, &options).unwrap();
        assert_eq!(result.status, PipelineStatus::Certified);
        let cert = result.certificate.as_ref().unwrap();
        assert!(cert.lambda_d_plus_1 > cert.tol_used);
        assert!(
            (result.rounded_cost - result.final_cost).abs()
                <= 1e-6 * (1.0 + result.final_cost)
        );
    }

    #[test]
    fn certified_from_adversarial_random_init() {
        let g = mission(0.01, 9, 6);
        let options = PipelineOptions {
            solver: SolverOptions {
                max_sweeps: 5000,
                ..Default::default()
            },
            init: InitStrategy::Random,
            ..Default::default()
        };
        let result = certified_solve(&g, &options).unwrap();
        assert_eq!(result.status, PipelineStatus::Certified);
    }

    #[test]
    fn decentralized_pipeline_matches_centralized_status() {
        let g = mission(0.01, 13, 8);
        let central = certified_solve(
            &g,
            &PipelineOptions {
                solver: SolverOptions {
                    max_sweeps: 3000,
                    ..Default::default()
                },
                ..Default::default()
            },
        )
        .unwrap();
        let decentral = certified_solve(
            &g,
            &PipelineOptions {
                solver: SolverOptions {
                    max_sweeps: 3000,
                    ..Default::default()
                },
                decentralized: Some(NetworkProfile::lossless_sync()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(central.status, PipelineStatus::Certified);
        assert_eq!(decentral.status, PipelineStatus::Certified);
        assert!(
            (central.final_cost - decentral.final_cost).abs()
                <= 1e-6 * (1.0 + central.final_cost)
        );
        assert!(decentral.traffic.messages_sent > 0);
    }
}
