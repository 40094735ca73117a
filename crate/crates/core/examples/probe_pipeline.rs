use cpgo::pipeline::*;
use cpgo::solver::{InitStrategy, SolverOptions};
use cpgo::synth::{self, MissionSpec, NoiseModel, TrajectoryShape};

fn main() {
    for (label, seed, per, noise, init) in [
        ("random-init", 9u64, 6usize, 0.01, InitStrategy::Random),
        ("decentral-graph", 13, 8, 0.01, InitStrategy::SpanningTree),
    ] {
        let g = synth::generate(&MissionSpec {
            dim: 2, num_robots: 2, poses_per_robot: per,
            trajectory_shape: TrajectoryShape::Line,
            intra_loop_period: 5, inter_overlap: 0.4,
            noise: NoiseModel { rot_stddev: noise, trans_stddev: noise, seed },
        }).unwrap();
        let options = PipelineOptions {
            solver: SolverOptions { max_sweeps: 5000, ..Default::default() },
            init,
            ..Default::default()
        };
        let r = certified_solve(&g, &options).unwrap();
        let cert = r.certificate.as_ref().unwrap();
        println!("{label}: status={:?} ranks={} lambda={:.6e} tol={:.3e} diag={:?}",
            r.status, r.traces.len(), cert.lambda_d_plus_1, cert.tol_used, cert.diagnostic);
        println!("  lambda_small={:?}", cert.lambda_small);
        for (i, t) in r.traces.iter().enumerate() {
            let last = t.sweeps.last().unwrap();
            println!("  trace {i}: term={:?} sweeps={} grad={:.3e} tol={:.3e} rank={}",
                t.termination, t.sweeps.len(), last.grad_norm, t.grad_tol, last.rank);
        }
    }
}
