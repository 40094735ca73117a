use cpgo::pipeline::*;
use cpgo::solver::SolverOptions;
use cpgo::synth::{self, MissionSpec, NoiseModel, TrajectoryShape};
use std::time::Instant;

fn main() {
    for (label, period, overlap, rot, trans) in [
        ("p3 ov0.5 n.04", 3usize, 0.5, 0.04, 0.04),
        ("p3 ov0.5 n.05/.03", 3, 0.5, 0.05, 0.03),
        ("p2 ov0.5 n.04", 2, 0.5, 0.04, 0.04),
        ("p3 ov0.6 n.04", 3, 0.6, 0.04, 0.04),
    ] {
        let mut certified = 0;
        let mut worst = 0.0f64;
        let mut min_margin = f64::MAX;
        for seed in 0..8u64 {
            let g = synth::generate(&MissionSpec {
                dim: 2, num_robots: 2, poses_per_robot: 100,
                trajectory_shape: TrajectoryShape::Ring,
                intra_loop_period: period, inter_overlap: overlap,
                noise: NoiseModel { rot_stddev: rot, trans_stddev: trans, seed },
            }).unwrap();
            let t0 = Instant::now();
            let r = certified_solve(&g, &PipelineOptions {
                solver: SolverOptions { max_sweeps: 10000, ..Default::default() },
                ..Default::default()
            }).unwrap();
            worst = worst.max(t0.elapsed().as_secs_f64());
            let cert = r.certificate.as_ref().unwrap();
            if r.status == PipelineStatus::Certified { certified += 1; }
            min_margin = min_margin.min(cert.lambda_d_plus_1 / cert.tol_used);
        }
        println!("{label}: certified {certified}/8, worst {worst:.2}s, min margin {min_margin:.2}");
    }
}
