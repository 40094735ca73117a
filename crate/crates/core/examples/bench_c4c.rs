use cpgo::pipeline::*;
use cpgo::solver::SolverOptions;
use cpgo::synth::{self, MissionSpec, NoiseModel, TrajectoryShape};
use std::time::Instant;

fn main() {
    // full criterion-4 style sweep, d=2 and d=3
    let mut certified = 0;
    let mut worst = 0.0f64;
    let mut min_margin = f64::MAX;
    let total = 30u64;
    for seed in 0..total {
        let dim = if seed % 3 == 2 { 3 } else { 2 };
        let g = synth::generate(&MissionSpec {
            dim, num_robots: 2, poses_per_robot: 100,
            trajectory_shape: TrajectoryShape::Ring,
            intra_loop_period: 3, inter_overlap: 0.6,
            noise: NoiseModel { rot_stddev: 0.04, trans_stddev: 0.04, seed },
        }).unwrap();
        let t0 = Instant::now();
        let r = certified_solve(&g, &PipelineOptions {
            solver: SolverOptions { max_sweeps: 10000, ..Default::default() },
            ..Default::default()
        }).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        worst = worst.max(dt);
        let cert = r.certificate.as_ref().unwrap();
        if r.status == PipelineStatus::Certified { certified += 1; }
        else { println!("seed {seed} d{dim}: {:?} margin {:.3} diag {:?}", r.status, cert.lambda_d_plus_1/cert.tol_used, cert.diagnostic); }
        min_margin = min_margin.min(cert.lambda_d_plus_1 / cert.tol_used);
    }
    println!("certified {certified}/{total}, worst {worst:.2}s, min margin {min_margin:.2}");
}
