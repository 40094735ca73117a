use cpgo::baseline::{self, GaussNewtonOptions};
use cpgo::synth::{self, MissionSpec, NoiseModel, TrajectoryShape};

fn main() {
    let g = synth::generate(&MissionSpec {
        dim: 2, num_robots: 2, poses_per_robot: 12,
        trajectory_shape: TrajectoryShape::Line,
        intra_loop_period: 4, inter_overlap: 0.4,
        noise: NoiseModel { rot_stddev: 0.01, trans_stddev: 0.01, seed: 10 },
    }).unwrap();
    let init = cpgo::solver::spanning_tree_poses(&g).unwrap();
    for max_iters in [25usize, 100, 400] {
        let opts = GaussNewtonOptions { max_iters, ..Default::default() };
        let (poses, converged) = baseline::gauss_newton_pgo(&g, &init, &opts).unwrap();
        let c = baseline::pgo_cost(&g, &poses).unwrap();
        println!("iters {max_iters}: converged={converged} cost={c:.12e} (tol needs grad <= {:.3e})", 1e-8*(1.0+c));
    }
}
