use amlab_core::action::EdgeCostMatrix;
use amlab_core::action::SpaceGrid;
use amlab_core::lagrangian::{Catalog, OneFormSpec};
use amlab_core::lp;
use amlab_core::mather::build_lp;

fn main() {
    let l = Catalog::mane_shear();
    let grid = SpaceGrid::new(2, 32);
    let costs = EdgeCostMatrix::build(&l, &OneFormSpec::zero(), &grid, 0.1, 2.0).unwrap();
    eprintln!("edges: {}", costs.edges.len());
    let lp = build_lp(&costs, [1.0, 0.0]).unwrap();
    let t0 = std::time::Instant::now();
    let sol = lp::solve(&lp.problem, 200_000).unwrap();
    eprintln!(
        "cold: iterations {} (phase1 {}) objective {:.6} time {:.1}s",
        sol.iterations,
        sol.phase1_iterations,
        sol.objective,
        t0.elapsed().as_secs_f64()
    );
    for t in [1.1, 1.2] {
        let lp2 = build_lp(&costs, [t, 0.0]).unwrap();
        let t1 = std::time::Instant::now();
        let warm = lp::solve_with_basis(&lp2.problem, &sol.basis, 200_000).unwrap();
        eprintln!(
            "warm h={t}e1: iterations {} objective {:.6} time {:.1}s",
            warm.iterations,
            warm.objective,
            t1.elapsed().as_secs_f64()
        );
        let t2 = std::time::Instant::now();
        let cold = lp::solve(&lp2.problem, 200_000).unwrap();
        eprintln!(
            "cold h={t}e1: iterations {} objective {:.6} time {:.1}s",
            cold.iterations,
            cold.objective,
            t2.elapsed().as_secs_f64()
        );
        assert!((warm.objective - cold.objective).abs() < 1e-9);
    }
}
