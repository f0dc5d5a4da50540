use kvbf::assembly::{ModelParams, RegionValue};
use kvbf::mesh::{BoundaryTag, Mesh, Rect, Vec2};
use kvbf::mms::{forcing_from_exact, ExactSolution};
use kvbf::solver::{newton_solve, NewtonOptions};
use kvbf::spaces::{ElementFamily, SpaceSet};
use kvbf::timeloop::{initial_state, InitialDataMode, KvbfSystem, TimeGrid};

// rerun a single transient step manually with instrumented newton residuals
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
    let state = initial_state(&system, &|x| (exact.velocity)(x, 0.0), None, InitialDataMode::Interpolate, NewtonOptions::default()).unwrap();
    // re-implement the step residual through public helpers: use Stepper via run, but
    // instrument by calling newton_solve with closures built from step internals is not
    // public; instead measure ratios on the full first step using energy of residual drop:
    // simplest: immobile check via solver on a scalar strongly nonlinear problem
    let _ = (grid, forcing, state);
    // scalar cubic: x^3 - 8 from warm start 2.001 (mimics a warm-started mildly nonlinear step)
    for x0 in [2.001f64, 2.1, 3.0] {
        let r0 = (x0 * x0 * x0 - 8.0f64).abs();
        let (x, rep) = newton_solve(
            |x| vec![x[0] * x[0] * x[0] - 8.0],
            |x| kvbf::assembly::SparseMatrix::from_triplets(1, 1, &[(0, 0, 3.0 * x[0] * x[0])]),
            vec![x0],
            NewtonOptions::default(),
        ).unwrap();
        println!("x0={x0}: iters {} final {:.2e} sol {:.12} (r0 {:.2e})", rep.iterations, rep.final_update, x[0], r0);
    }
}
