use kvbf::assembly::{ModelParams, RegionValue};
use kvbf::mesh::{BoundaryTag, Mesh, Rect, Vec2};
use kvbf::mms::{forcing_from_exact, ExactSolution};
use kvbf::solver::NewtonOptions;
use kvbf::spaces::{ElementFamily, SpaceSet};
use kvbf::timeloop::{initial_state, run_transient, InitialDataMode, KvbfSystem, TimeGrid};

fn main() {
    let params = ModelParams {
        rho: 3.0, nu: 1.0, kappa: 1.0,
        darcy: RegionValue::uniform(1.0),
        forchheimer: RegionValue::uniform(10.0),
    };
    let exact = ExactSolution::example1();
    let mesh = Mesh::build_structured(Rect::unit_square(), 8).unwrap();
    let spaces = SpaceSet::build(&mesh, ElementFamily::TaylorHood);
    let system = KvbfSystem::new(&mesh, &spaces, &params, &BoundaryTag::ALL, true).unwrap();
    let grid = TimeGrid::from_dt(0.001, 1e-4).unwrap();
    let forcing = forcing_from_exact(&params, &exact);
    let init = initial_state(&system, &|x| (exact.velocity)(x, 0.0), None, InitialDataMode::Interpolate, NewtonOptions::default()).unwrap();
    let g = |x: Vec2, t: f64| (exact.velocity)(x, t);
    let traj = run_transient(&system, grid, init, &forcing, &g, NewtonOptions::default()).unwrap();
    for (n, r) in traj.reports.iter().enumerate() {
        println!("step {}: iters {} final_update {:.3e}", n + 1, r.iterations, r.final_update);
    }
    // state drift per step
    for n in 1..=3 {
        let a = &traj.states[n - 1].coeffs;
        let b = &traj.states[n].coeffs;
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("step {n}: |state change| = {:.3e}, |state| = {:.3e}, rel = {:.3e}", d, nb, d / nb);
    }
}
