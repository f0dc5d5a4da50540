use kvbf::assembly::{ModelParams, RegionValue, assemble_linear_blocks};
use kvbf::mesh::{Mesh, Rect};
use kvbf::solver::{newton_solve, NewtonOptions};
use kvbf::spaces::{ElementFamily, SpaceSet};

fn main() {
    // linear residual with a realistic FEM matrix (velocity mass + stiffness)
    let mesh = Mesh::build_structured(Rect::unit_square(), 8).unwrap();
    let spaces = SpaceSet::build(&mesh, ElementFamily::TaylorHood);
    let params = ModelParams { rho: 3.0, nu: 1.0, kappa: 1.0, darcy: RegionValue::uniform(1.0), forchheimer: RegionValue::uniform(1.0) };
    let blocks = assemble_linear_blocks(&mesh, &spaces, &params).unwrap();
    let mut a = blocks.mass_u.clone();
    a.add_block(0, 0, 1.0, &blocks.stiffness_u);
    let n = spaces.n_u();
    let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let (x, rep) = newton_solve(
        |x| { let mut r = a.matvec(x); for i in 0..n { r[i] -= b[i]; } r },
        |_| a.clone(),
        vec![1.0; n],
        NewtonOptions::default(),
    ).unwrap();
    println!("linear FEM system: iters {} final_update {:.3e} |x| {:.3}", rep.iterations, rep.final_update, x.iter().map(|v| v*v).sum::<f64>().sqrt());
}
