use cpgo::laplacian;
use cpgo::certifier;
use cpgo::solver::{self, InitStrategy, SolverOptions};
use cpgo::baseline;
use cpgo::synth::{self, MissionSpec, NoiseModel, TrajectoryShape};
use std::time::Instant;

fn main() {
    let g = synth::generate(&MissionSpec {
        dim: 3, num_robots: 2, poses_per_robot: 100,
        trajectory_shape: TrajectoryShape::Ring,
        intra_loop_period: 3, inter_overlap: 0.6,
        noise: NoiseModel { rot_stddev: 0.04, trans_stddev: 0.04, seed: 2 },
    }).unwrap();
    let lap = laplacian::assemble(&g).unwrap();

    let t0 = Instant::now();
    let st = solver::spanning_tree_poses(&g).unwrap();
    println!("spanning tree: {:.2}s", t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let gn = baseline::GaussNewtonOptions { max_iters: 25, ..Default::default() };
    let (refined, conv) = baseline::gauss_newton_pgo(&g, &st, &gn).unwrap();
    println!("gn refine: {:.2}s converged={conv} cost={:.4e}", t0.elapsed().as_secs_f64(),
        baseline::pgo_cost(&g, &refined).unwrap());

    let t0 = Instant::now();
    let init = solver::initialize(&g, &InitStrategy::Given(refined), 4, 0).unwrap();
    let opts = SolverOptions { max_sweeps: 10000, ..Default::default() };
    let (x, tr) = solver::solve_with(&lap, &opts, init).unwrap();
    println!("rbcd: {:.2}s sweeps={} grad={:.3e}", t0.elapsed().as_secs_f64(), tr.sweeps.len(),
        tr.sweeps.last().unwrap().grad_norm);

    let t0 = Instant::now();
    let s = certifier::assemble_dual(&lap, &x).unwrap();
    let cert = certifier::verify(&s, &x, 1e-6);
    println!("certify: {:.2}s verdict={:?} margin={:.2}", t0.elapsed().as_secs_f64(),
        cert.verdict, cert.lambda_d_plus_1 / cert.tol_used);
}
