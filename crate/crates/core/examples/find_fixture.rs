use cpgo::baseline::{self, GaussNewtonOptions};
use cpgo::pipeline::{self, PipelineOptions, PipelineStatus};
use cpgo::solver::{InitStrategy, SolverOptions};
use cpgo::synth::{self, MissionSpec, NoiseModel, TrajectoryShape};

fn main() {
    let g = synth::generate(&MissionSpec {
        dim: 2, num_robots: 2, poses_per_robot: 10,
        trajectory_shape: TrajectoryShape::Ring,
        intra_loop_period: 3, inter_overlap: 0.5,
        noise: NoiseModel { rot_stddev: 0.03, trans_stddev: 0.03, seed: 77 },
    }).unwrap();
    // certified optimum (reference)
    let reference = pipeline::certified_solve(&g, &PipelineOptions {
        solver: SolverOptions { max_sweeps: 5000, ..Default::default() },
        ..Default::default()
    }).unwrap();
    assert_eq!(reference.status, PipelineStatus::Certified);
    let f_star = reference.rounded_cost;
    println!("reference optimum: {f_star:.9e}");
    let mut found = 0;
    for seed in 0..40u64 {
        let init = synth::random_poses(&g, 10.0, seed);
        let (gn_poses, _) = baseline::gauss_newton_pgo(&g, &init, &GaussNewtonOptions::default()).unwrap();
        let gn_cost = baseline::pgo_cost(&g, &gn_poses).unwrap();
        let rel = (gn_cost - f_star) / f_star.max(1e-12);
        if rel > 1e-3 {
            // does certified mode from the SAME init reach the optimum?
            let cert = pipeline::certified_solve(&g, &PipelineOptions {
                solver: SolverOptions { max_sweeps: 5000, ..Default::default() },
                init: InitStrategy::Given(init),
                ..Default::default()
            }).unwrap();
            let ok = cert.status == PipelineStatus::Certified
                && (cert.rounded_cost - f_star).abs() <= 1e-6 * (1.0 + f_star);
            println!("seed {seed}: gn {gn_cost:.6e} rel excess {rel:.3e}; certified: {:?} cost {:.6e} ok={ok}",
                cert.status, cert.rounded_cost);
            found += 1;
            if found >= 5 { break; }
        }
    }
    println!("done ({found} candidates)");
}
