use cpgo::pipeline::*;
use cpgo::solver::SolverOptions;
use cpgo::synth::{self, MissionSpec, NoiseModel, TrajectoryShape};
use std::time::Instant;

fn main() {
    for (shape, period, overlap, rot, trans) in [
        (TrajectoryShape::Line, 4usize, 0.4, 0.04, 0.04),
        (TrajectoryShape::Ring, 4, 0.4, 0.04, 0.04),
        (TrajectoryShape::Grid, 4, 0.4, 0.04, 0.04),
    ] {
        let mut certified = 0;
        let mut worst = 0.0f64;
        let mut min_margin = f64::MAX;
        for seed in 0..6u64 {
            let g = synth::generate(&MissionSpec {
                dim: 2, num_robots: 2, poses_per_robot: 100,
                trajectory_shape: shape,
                intra_loop_period: period, inter_overlap: overlap,
                noise: NoiseModel { rot_stddev: rot, trans_stddev: trans, seed },
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
            min_margin = min_margin.min(cert.lambda_d_plus_1 / cert.tol_used);
            if seed == 0 {
                println!("{shape:?}: seed0 {:?} {dt:.2}s lambda/tol = {:.1}", r.status, cert.lambda_d_plus_1/cert.tol_used);
            }
        }
        println!("{shape:?}: certified {certified}/6, worst {worst:.2}s, min margin {min_margin:.2}");
    }
}
