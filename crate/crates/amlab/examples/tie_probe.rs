//! Tie structure of the homoclinic minimizing-velocity graph at c = 0.

use amlab_core::action::{minimizer_velocity, solve_critical, EdgeCostMatrix, SpaceGrid};
use amlab_core::lagrangian::{Catalog, OneFormSpec};

fn main() {
    let grid = SpaceGrid::new(2, 32);
    let costs = EdgeCostMatrix::build(
        &Catalog::mane_homoclinic(),
        &OneFormSpec::constant([0.0, 0.0]),
        &grid,
        0.1,
        2.0,
    )
    .unwrap();
    for (tol, max_iter) in [(1e-6, 20_000), (1e-10, 200_000), (1e-13, 2_000_000)] {
        let sol = solve_critical(&costs, tol, max_iter);
        let mut tied = Vec::new();
        for x in 0..grid.node_count() {
            let vels = minimizer_velocity(&sol, &costs, x);
            if vels.len() != 1 {
                tied.push((x, vels.len()));
            }
        }
        println!(
            "tol {tol:e}: converged {} residual {:.3e} ties {}",
            sol.converged,
            sol.residual,
            tied.len()
        );
        if tol == 1e-13 {
            for (x, k) in tied.iter().take(6) {
                let p = grid.coords(*x);
                println!("  node {x} at ({:.4}, {:.4}) with {k} minimizers", p[0], p[1]);
                for v in minimizer_velocity(&sol, &costs, *x) {
                    println!("    v = ({:.5}, {:.5})", v[0], v[1]);
                }
                let mut vals: Vec<(f64, [f64; 2])> = costs.incoming[*x]
                    .iter()
                    .map(|&ei| {
                        let e = &costs.edges[ei as usize];
                        (
                            sol.u[e.source] + costs.costs[ei as usize],
                            [e.disp[0] / costs.tau, e.disp[1] / costs.tau],
                        )
                    })
                    .collect();
                vals.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (val, v) in vals.iter().take(4) {
                    println!("    {:.17} via ({:.5}, {:.5})", val, v[0], v[1]);
                }
            }
        }
    }
}
