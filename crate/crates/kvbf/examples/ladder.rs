use kvbf::assembly::{ModelParams, RegionValue};
use kvbf::mesh::{BoundaryTag, Mesh, Rect};
use kvbf::mms::{error_norms, forcing_from_exact, observed_rates, ExactSolution};
use kvbf::solver::NewtonOptions;
use kvbf::spaces::{ElementFamily, SpaceSet};
use kvbf::timeloop::{initial_state, run_transient, InitialDataMode, KvbfSystem, TimeGrid};

fn main() {
    let family = match std::env::args().nth(1).as_deref() {
        Some("mini") => ElementFamily::Mini,
        _ => ElementFamily::TaylorHood,
    };
    let params = ModelParams {
        rho: 3.0,
        nu: 1.0,
        kappa: 1.0,
        darcy: RegionValue::uniform(1.0),
        forchheimer: RegionValue::uniform(10.0),
    };
    let exact = ExactSolution::example1();
    let mut reports = Vec::new();
    for n in [4usize, 8, 16] {
        let t0 = std::time::Instant::now();
        let mesh = Mesh::build_structured(Rect::unit_square(), n).unwrap();
        let spaces = SpaceSet::build(&mesh, family);
        let system = KvbfSystem::new(&mesh, &spaces, &params, &BoundaryTag::ALL, true).unwrap();
        let grid = TimeGrid::from_dt(0.001, 1e-4).unwrap();
        let forcing = forcing_from_exact(&params, &exact);
        let mode = if std::env::args().nth(2).as_deref() == Some("dp") { InitialDataMode::DiscreteProblem } else { InitialDataMode::Interpolate };
        let gu0 = |x: kvbf::mesh::Vec2| (exact.velocity_gradient)(x, 0.0);
        let init = initial_state(&system, &|x| (exact.velocity)(x, 0.0), Some(&gu0), mode, NewtonOptions::default()).unwrap();
        let g = |x: kvbf::mesh::Vec2, t: f64| (exact.velocity)(x, t);
        let traj = run_transient(&system, grid, init, &forcing, &g, NewtonOptions::default()).unwrap();
        let rep = error_norms(&traj, &exact, &mesh, &spaces, &system.layout, grid).unwrap();
        println!(
            "n={n:3} dof={:6} h={:.4} iter={:.2} eu_h1={:.3e} eu_l2={:.3e} ew={:.3e} ep={:.3e}  [{:.2?}]",
            rep.dofs, rep.h, rep.newton_iterations, rep.eu_linf_h1, rep.eu_l2_l2, rep.ew_l2_l2, rep.ep_l2_l2, t0.elapsed()
        );
        reports.push(rep);
    }
    for row in observed_rates(&reports) {
        let fmt = |r: Option<f64>| r.map_or("  --".into(), |v| format!("{v:.3}"));
        println!(
            "h={:.4}  rates: H1 {}  L2 {}  w {}  p {}",
            row.report.h,
            fmt(row.rates[0]),
            fmt(row.rates[1]),
            fmt(row.rates[2]),
            fmt(row.rates[3])
        );
    }
}
