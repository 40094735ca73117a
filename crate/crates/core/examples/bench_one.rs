use cpgo::laplacian;
use cpgo::solver::{self, InitStrategy, SolverOptions};
use cpgo::synth::{self, MissionSpec, NoiseModel, TrajectoryShape};
use std::time::Instant;

fn main() {
    let g = synth::generate(&MissionSpec {
        dim: 2, num_robots: 2, poses_per_robot: 100,
        trajectory_shape: TrajectoryShape::Line,
        intra_loop_period: 10, inter_overlap: 0.3,
        noise: NoiseModel { rot_stddev: 0.03, trans_stddev: 0.04, seed: 0 },
    }).unwrap();
    let lap = laplacian::assemble(&g).unwrap();
    let init = solver::initialize(&g, &InitStrategy::SpanningTree, 3, 0).unwrap();
    let f0 = laplacian::cost(&lap, &init).unwrap();
    println!("init cost {f0:.3e}, stationarity threshold {:.3e}", 1e-5*(1.0+f0));
    for sweeps in [500usize, 2000, 8000] {
        let opts = SolverOptions { max_sweeps: sweeps, grad_tol: Some(1e-9), ..Default::default() };
        let t0 = Instant::now();
        let (x, tr) = solver::solve_with(&lap, &opts, init.clone()).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        let c = laplacian::cost(&lap, &x).unwrap();
        let gn = laplacian::gradient_norm(&lap, &x).unwrap();
        println!("sweeps {sweeps}: {dt:.2}s cost {c:.6e} grad {gn:.3e} null {}", tr.null_steps);
    }
}
