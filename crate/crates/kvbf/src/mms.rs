//! Manufactured solutions: forcing synthesis from the strong form,
//! discrete-in-time error norms, and observed convergence orders.

use crate::assembly::{BlockLayout, ModelParams};
use crate::mesh::{Mesh, Vec2};
use crate::quadrature::rule_for_degree;
use crate::spaces::{BasisEval, CellGeometry, ScalarKind, SpaceSet};
use crate::timeloop::{TimeGrid, Trajectory};
use crate::Result;
use std::f64::consts::PI;

/// Quadrature exactness degree for error integration.
pub const ERROR_QUADRATURE_DEGREE: usize = 10;

type VecField = Box<dyn Fn(Vec2, f64) -> Vec2 + Sync>;
type MatField = Box<dyn Fn(Vec2, f64) -> [[f64; 2]; 2] + Sync>;
type ScalField = Box<dyn Fn(Vec2, f64) -> f64 + Sync>;

/// Closed-form solution with every derivative needed to synthesize the
/// forcing. The vorticity is the scalar curl of the velocity and the velocity
/// is divergence-free.
pub struct ExactSolution {
    pub velocity: VecField,
    /// Rows are gradients of the velocity components.
    pub velocity_gradient: MatField,
    pub velocity_laplacian: VecField,
    pub velocity_dt: VecField,
    pub velocity_laplacian_dt: VecField,
    pub pressure: ScalField,
    pub pressure_gradient: VecField,
    pub vorticity: ScalField,
    pub vorticity_gradient: VecField,
}

impl ExactSolution {
    /// Smooth 2D solution on the unit square:
    /// u = e^t (sin(pi x) cos(pi y), -cos(pi x) sin(pi y)),
    /// p = e^t cos(pi x) sin(pi y / 2).
    pub fn example1() -> ExactSolution {
        let u = |x: Vec2, t: f64| {
            Vec2::new(
                t.exp() * (PI * x.x).sin() * (PI * x.y).cos(),
                -t.exp() * (PI * x.x).cos() * (PI * x.y).sin(),
            )
        };
        ExactSolution {
            velocity: Box::new(u),
            velocity_gradient: Box::new(|x, t| {
                let e = t.exp() * PI;
                let (sx, cx) = (PI * x.x).sin_cos();
                let (sy, cy) = (PI * x.y).sin_cos();
                [[e * cx * cy, -e * sx * sy], [e * sx * sy, -e * cx * cy]]
            }),
            velocity_laplacian: Box::new(move |x, t| u(x, t) * (-2.0 * PI * PI)),
            velocity_dt: Box::new(u),
            velocity_laplacian_dt: Box::new(move |x, t| u(x, t) * (-2.0 * PI * PI)),
            pressure: Box::new(|x, t| t.exp() * (PI * x.x).cos() * (PI * x.y / 2.0).sin()),
            pressure_gradient: Box::new(|x, t| {
                Vec2::new(
                    -t.exp() * PI * (PI * x.x).sin() * (PI * x.y / 2.0).sin(),
                    t.exp() * 0.5 * PI * (PI * x.x).cos() * (PI * x.y / 2.0).cos(),
                )
            }),
            vorticity: Box::new(|x, t| 2.0 * PI * t.exp() * (PI * x.x).sin() * (PI * x.y).sin()),
            vorticity_gradient: Box::new(|x, t| {
                let e = 2.0 * PI * PI * t.exp();
                Vec2::new(
                    e * (PI * x.x).cos() * (PI * x.y).sin(),
                    e * (PI * x.x).sin() * (PI * x.y).cos(),
                )
            }),
        }
    }
}

/// Synthesizes the body force of the strong form for `exact`:
/// f = u_t - kappa^2 (Delta u)_t + D u + F |u|^{rho-2} u + (grad u) u
///     + nu curl(w) + grad p, with curl(w) = (dw/dy, -dw/dx).
///
/// Assumes spatially uniform coefficients (the `matrix` region values).
pub fn forcing_from_exact<'a>(
    params: &ModelParams,
    exact: &'a ExactSolution,
) -> impl Fn(Vec2, f64) -> Vec2 + Sync + 'a {
    let kappa2 = params.kappa * params.kappa;
    let nu = params.nu;
    let d_val = params.darcy.matrix;
    let f_val = params.forchheimer.matrix;
    let rho = params.rho;
    move |x, t| {
        let u = (exact.velocity)(x, t);
        let ut = (exact.velocity_dt)(x, t);
        let lap_ut = (exact.velocity_laplacian_dt)(x, t);
        let gu = (exact.velocity_gradient)(x, t);
        let gw = (exact.vorticity_gradient)(x, t);
        let gp = (exact.pressure_gradient)(x, t);
        let umag = u.norm();
        let forch = f_val * umag.powf(rho - 2.0);
        Vec2::new(
            ut.x - kappa2 * lap_ut.x
                + d_val * u.x
                + forch * u.x
                + gu[0][0] * u.x
                + gu[0][1] * u.y
                + nu * gw.y
                + gp.x,
            ut.y - kappa2 * lap_ut.y
                + d_val * u.y
                + forch * u.y
                + gu[1][0] * u.x
                + gu[1][1] * u.y
                - nu * gw.x
                + gp.y,
        )
    }
}

/// Discrete-in-time error norms of a trajectory against an exact solution.
#[derive(Debug, Clone, Copy)]
pub struct ErrorReport {
    pub h: f64,
    pub dofs: usize,
    pub newton_iterations: f64,
    /// max over n = 0..N of the H1 velocity error.
    pub eu_linf_h1: f64,
    /// (dt sum_{n=1..N} ||e_u||^2_{L2})^{1/2}
    pub eu_l2_l2: f64,
    pub ew_l2_l2: f64,
    pub ep_l2_l2: f64,
}

impl ErrorReport {
    pub fn errors(&self) -> [f64; 4] {
        [self.eu_linf_h1, self.eu_l2_l2, self.ew_l2_l2, self.ep_l2_l2]
    }
}

/// Per-level errors with observed orders between consecutive levels.
#[derive(Debug, Clone)]
pub struct RateRow {
    pub report: ErrorReport,
    /// Rate per error column; `None` on the first level.
    pub rates: [Option<f64>; 4],
}

/// Squared spatial errors of one state at time `t`.
struct StateErrors {
    u_l2_sq: f64,
    u_h1_sq: f64,
    w_l2_sq: f64,
    p_l2_sq: f64,
}

fn state_errors(
    mesh: &Mesh,
    spaces: &SpaceSet,
    layout: &BlockLayout,
    coeffs: &[f64],
    exact: &ExactSolution,
    t: f64,
) -> Result<StateErrors> {
    let rule = rule_for_degree(ERROR_QUADRATURE_DEGREE)?;
    let basis_u = BasisEval::tabulate(spaces.velocity.kind, rule);
    let basis_s = BasisEval::tabulate(ScalarKind::P1, rule);
    let nq = rule.points.len();
    let u_coeffs = &coeffs[..layout.n_u];
    let w_coeffs = &coeffs[layout.w_offset()..layout.w_offset() + layout.n_w];
    let p_coeffs = &coeffs[layout.p_offset()..layout.p_offset() + layout.n_p];

    let mut u_l2_sq = 0.0;
    let mut u_h1_sq = 0.0;
    let mut w_l2_sq = 0.0;
    let mut p_l2_sq = 0.0;
    for c in 0..mesh.n_cells() {
        let verts = mesh.cell_vertices(c);
        let geom = CellGeometry::new(verts)?;
        let udofs = spaces.velocity.cell_dofs(c);
        let sdofs = spaces.pressure.cell_dofs(c);
        for q in 0..nq {
            let [l0, l1, l2] = rule.points[q];
            let x = verts[0] * l0 + verts[1] * l1 + verts[2] * l2;
            let w = rule.weights[q] * geom.det;
            let mut uh = Vec2::ZERO;
            let mut guh = [[0.0f64; 2]; 2];
            for (s, &dof) in udofs.iter().enumerate() {
                let n = basis_u.value(q, s);
                let g = geom.push_grad(basis_u.ref_grad(q, s));
                let cx = u_coeffs[2 * dof];
                let cy = u_coeffs[2 * dof + 1];
                uh.x += cx * n;
                uh.y += cy * n;
                guh[0][0] += cx * g[0];
                guh[0][1] += cx * g[1];
                guh[1][0] += cy * g[0];
                guh[1][1] += cy * g[1];
            }
            let mut wh = 0.0;
            let mut ph = 0.0;
            for (s, &dof) in sdofs.iter().enumerate() {
                let n = basis_s.value(q, s);
                wh += w_coeffs[dof] * n;
                ph += p_coeffs[dof] * n;
            }
            let ue = (exact.velocity)(x, t);
            let gue = (exact.velocity_gradient)(x, t);
            let we = (exact.vorticity)(x, t);
            let pe = (exact.pressure)(x, t);
            let du = uh - ue;
            u_l2_sq += w * du.dot(du);
            let mut semi = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let d = guh[i][j] - gue[i][j];
                    semi += d * d;
                }
            }
            u_h1_sq += w * semi;
            w_l2_sq += w * (wh - we) * (wh - we);
            p_l2_sq += w * (ph - pe) * (ph - pe);
        }
    }
    Ok(StateErrors {
        u_l2_sq,
        u_h1_sq,
        w_l2_sq,
        p_l2_sq,
    })
}

/// Error norms of a full trajectory: the l-infinity norm runs over all levels
/// n = 0..N, the l2 norms over n = 1..N with weight dt.
pub fn error_norms(
    trajectory: &Trajectory,
    exact: &ExactSolution,
    mesh: &Mesh,
    spaces: &SpaceSet,
    layout: &BlockLayout,
    grid: TimeGrid,
) -> Result<ErrorReport> {
    assert_eq!(trajectory.states.len(), grid.nsteps + 1);
    let mut eu_linf_h1: f64 = 0.0;
    let mut eu_l2_sq = 0.0;
    let mut ew_l2_sq = 0.0;
    let mut ep_l2_sq = 0.0;
    for (n, state) in trajectory.states.iter().enumerate() {
        let e = state_errors(mesh, spaces, layout, &state.coeffs, exact, state.time)?;
        eu_linf_h1 = eu_linf_h1.max((e.u_l2_sq + e.u_h1_sq).sqrt());
        if n >= 1 {
            eu_l2_sq += grid.dt * e.u_l2_sq;
            ew_l2_sq += grid.dt * e.w_l2_sq;
            ep_l2_sq += grid.dt * e.p_l2_sq;
        }
    }
    Ok(ErrorReport {
        h: mesh.mesh_size()?.h,
        dofs: spaces.total_dofs(),
        newton_iterations: trajectory.average_newton_iterations(),
        eu_linf_h1,
        eu_l2_l2: eu_l2_sq.sqrt(),
        ew_l2_l2: ew_l2_sq.sqrt(),
        ep_l2_l2: ep_l2_sq.sqrt(),
    })
}

/// Observed orders between consecutive levels (h strictly decreasing):
/// rate = log(e_i / e_{i+1}) / log(h_i / h_{i+1}). A vanishing error on the
/// finer level reports an infinite rate.
pub fn observed_rates(reports: &[ErrorReport]) -> Vec<RateRow> {
    let mut rows = Vec::with_capacity(reports.len());
    for (i, report) in reports.iter().enumerate() {
        let mut rates = [None; 4];
        if i > 0 {
            let prev = &reports[i - 1];
            assert!(
                report.h < prev.h,
                "levels must be ordered by decreasing h ({} -> {})",
                prev.h,
                report.h
            );
            let dh = (prev.h / report.h).ln();
            for k in 0..4 {
                let e_prev = prev.errors()[k];
                let e_cur = report.errors()[k];
                rates[k] = Some(if e_cur == 0.0 {
                    f64::INFINITY
                } else {
                    (e_prev / e_cur).ln() / dh
                });
            }
        }
        rows.push(RateRow {
            report: *report,
            rates,
        });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::RegionValue;
    use crate::mesh::Rect;
    use crate::solver::NewtonReport;
    use crate::spaces::ElementFamily;
    use crate::timeloop::SystemState;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn params(rho: f64) -> ModelParams {
        ModelParams {
            rho,
            nu: 1.0,
            kappa: 1.0,
            darcy: RegionValue::uniform(1.0),
            forchheimer: RegionValue::uniform(10.0),
        }
    }

    /// Central finite differences of the closures, the independent oracle for
    /// the hand-coded derivatives.
    fn fd_check_example1() {
        let ex = ExactSolution::example1();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let eps = 1e-6;
        for _ in 0..50 {
            let x = Vec2::new(rng.random_range(0.1..0.9), rng.random_range(0.1..0.9));
            let t = rng.random_range(0.0..1.0);
            let u = &ex.velocity;
            // gradient
            let gu = (ex.velocity_gradient)(x, t);
            let dx = (u(Vec2::new(x.x + eps, x.y), t) - u(Vec2::new(x.x - eps, x.y), t)) * (0.5 / eps);
            let dy = (u(Vec2::new(x.x, x.y + eps), t) - u(Vec2::new(x.x, x.y - eps), t)) * (0.5 / eps);
            assert!((gu[0][0] - dx.x).abs() < 1e-6);
            assert!((gu[1][0] - dx.y).abs() < 1e-6);
            assert!((gu[0][1] - dy.x).abs() < 1e-6);
            assert!((gu[1][1] - dy.y).abs() < 1e-6);
            // time derivative
            let ut = (ex.velocity_dt)(x, t);
            let fd = (u(x, t + eps) - u(x, t - eps)) * (0.5 / eps);
            assert!((ut.x - fd.x).abs() < 1e-5 && (ut.y - fd.y).abs() < 1e-5);
            // laplacian
            let lap = (ex.velocity_laplacian)(x, t);
            let fd_lap = (u(Vec2::new(x.x + eps, x.y), t)
                + u(Vec2::new(x.x - eps, x.y), t)
                + u(Vec2::new(x.x, x.y + eps), t)
                + u(Vec2::new(x.x, x.y - eps), t)
                - u(x, t) * 4.0)
                * (1.0 / (eps * eps));
            assert!((lap.x - fd_lap.x).abs() < 2e-3 && (lap.y - fd_lap.y).abs() < 2e-3);
            // vorticity consistency and gradient
            let w = (ex.vorticity)(x, t);
            assert!((w - (gu[1][0] - gu[0][1])).abs() < 1e-10);
            let gw = (ex.vorticity_gradient)(x, t);
            let wfun = &ex.vorticity;
            let wdx = (wfun(Vec2::new(x.x + eps, x.y), t) - wfun(Vec2::new(x.x - eps, x.y), t))
                * (0.5 / eps);
            let wdy = (wfun(Vec2::new(x.x, x.y + eps), t) - wfun(Vec2::new(x.x, x.y - eps), t))
                * (0.5 / eps);
            assert!((gw.x - wdx).abs() < 1e-5 && (gw.y - wdy).abs() < 1e-5);
            // pressure gradient
            let gp = (ex.pressure_gradient)(x, t);
            let pfun = &ex.pressure;
            let pdx = (pfun(Vec2::new(x.x + eps, x.y), t) - pfun(Vec2::new(x.x - eps, x.y), t))
                * (0.5 / eps);
            let pdy = (pfun(Vec2::new(x.x, x.y + eps), t) - pfun(Vec2::new(x.x, x.y - eps), t))
                * (0.5 / eps);
            assert!((gp.x - pdx).abs() < 1e-5 && (gp.y - pdy).abs() < 1e-5);
        }
    }

    #[test]
    fn example1_derivatives_match_finite_differences() {
        fd_check_example1();
    }

    #[test]
    fn example1_velocity_is_divergence_free() {
        let ex = ExactSolution::example1();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = Vec2::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            for _ in 0..10 {
                let t = rng.random_range(0.0..1.0);
                let gu = (ex.velocity_gradient)(x, t);
                assert!((gu[0][0] + gu[1][1]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn forcing_zero_for_zero_solution() {
        let zero_vec: VecField = Box::new(|_, _| Vec2::ZERO);
        let ex = ExactSolution {
            velocity: Box::new(|_, _| Vec2::ZERO),
            velocity_gradient: Box::new(|_, _| [[0.0; 2]; 2]),
            velocity_laplacian: Box::new(|_, _| Vec2::ZERO),
            velocity_dt: Box::new(|_, _| Vec2::ZERO),
            velocity_laplacian_dt: zero_vec,
            pressure: Box::new(|_, _| 0.0),
            pressure_gradient: Box::new(|_, _| Vec2::ZERO),
            vorticity: Box::new(|_, _| 0.0),
            vorticity_gradient: Box::new(|_, _| Vec2::ZERO),
        };
        let f = forcing_from_exact(&params(3.0), &ex);
        let v = f(Vec2::new(0.3, 0.7), 0.5);
        assert_eq!(v.x, 0.0);
        assert_eq!(v.y, 0.0);
    }

    #[test]
    fn forcing_for_steady_shear_flow() {
        // u = (y, 0), p = 0, rho = 3: f = D (y, 0) + F |y| (y, 0)
        let ex = ExactSolution {
            velocity: Box::new(|x, _| Vec2::new(x.y, 0.0)),
            velocity_gradient: Box::new(|_, _| [[0.0, 1.0], [0.0, 0.0]]),
            velocity_laplacian: Box::new(|_, _| Vec2::ZERO),
            velocity_dt: Box::new(|_, _| Vec2::ZERO),
            velocity_laplacian_dt: Box::new(|_, _| Vec2::ZERO),
            pressure: Box::new(|_, _| 0.0),
            pressure_gradient: Box::new(|_, _| Vec2::ZERO),
            vorticity: Box::new(|_, _| -1.0),
            vorticity_gradient: Box::new(|_, _| Vec2::ZERO),
        };
        let p = ModelParams {
            rho: 3.0,
            nu: 1.0,
            kappa: 1.0,
            darcy: RegionValue::uniform(2.5),
            forchheimer: RegionValue::uniform(7.0),
        };
        let f = forcing_from_exact(&p, &ex);
        for y in [-0.8, -0.2, 0.4, 0.9] {
            let got = f(Vec2::new(0.3, y), 0.0);
            let expected = 2.5 * y + 7.0 * y.abs() * y;
            assert!((got.x - expected).abs() < 1e-13, "y = {y}");
            assert!(got.y.abs() < 1e-13);
        }
    }

    #[test]
    fn forcing_example1_matches_fd_oracle() {
        // rebuild the forcing from finite differences of (u, p) alone and
        // compare at interior points
        let ex = ExactSolution::example1();
        let p = params(3.0);
        let f = forcing_from_exact(&p, &ex);
        let eps = 1e-5;
        // wider steps for the nested difference (time derivative of an FD
        // laplacian), where a shared step would amplify rounding
        let eps_x = 1e-4;
        let eps_t = 1e-3;
        let u = &ex.velocity;
        let pfun = &ex.pressure;
        let lap_fd = |x: Vec2, t: f64| {
            (u(Vec2::new(x.x + eps_x, x.y), t)
                + u(Vec2::new(x.x - eps_x, x.y), t)
                + u(Vec2::new(x.x, x.y + eps_x), t)
                + u(Vec2::new(x.x, x.y - eps_x), t)
                - u(x, t) * 4.0)
                * (1.0 / (eps_x * eps_x))
        };
        for (px, py, t) in [(0.25, 0.5, 0.0), (0.6, 0.3, 0.4), (0.45, 0.8, 1.0)] {
            let x = Vec2::new(px, py);
            let uv = u(x, t);
            let ut = (u(x, t + eps) - u(x, t - eps)) * (0.5 / eps);
            let lap_t =
                (lap_fd(x, t + eps_t) - lap_fd(x, t - eps_t)) * (0.5 / eps_t);
            let gux = (u(Vec2::new(x.x + eps, x.y), t) - u(Vec2::new(x.x - eps, x.y), t))
                * (0.5 / eps);
            let guy = (u(Vec2::new(x.x, x.y + eps), t) - u(Vec2::new(x.x, x.y - eps), t))
                * (0.5 / eps);
            let conv = Vec2::new(
                gux.x * uv.x + guy.x * uv.y,
                gux.y * uv.x + guy.y * uv.y,
            );
            let gp = Vec2::new(
                (pfun(Vec2::new(x.x + eps, x.y), t) - pfun(Vec2::new(x.x - eps, x.y), t))
                    * (0.5 / eps),
                (pfun(Vec2::new(x.x, x.y + eps), t) - pfun(Vec2::new(x.x, x.y - eps), t))
                    * (0.5 / eps),
            );
            // strong form with nu curl(w) = -nu Delta u for divergence-free u
            let umag = uv.norm();
            let expect = Vec2::new(
                ut.x - lap_t.x + uv.x + 10.0 * umag * uv.x + conv.x - lap_fd(x, t).x + gp.x,
                ut.y - lap_t.y + uv.y + 10.0 * umag * uv.y + conv.y - lap_fd(x, t).y + gp.y,
            );
            let got = f(x, t);
            assert!(
                (got.x - expect.x).abs() < 1e-2 && (got.y - expect.y).abs() < 1e-2,
                "at ({px}, {py}, {t}): got {got:?}, fd {expect:?}"
            );
        }
    }

    fn steady_trajectory(coeffs: Vec<f64>, grid: TimeGrid) -> Trajectory {
        let states = (0..=grid.nsteps)
            .map(|n| SystemState {
                coeffs: coeffs.clone(),
                time: grid.time(n),
            })
            .collect();
        Trajectory {
            states,
            reports: vec![
                NewtonReport {
                    iterations: 2,
                    final_update: 0.0,
                    converged: true,
                };
                grid.nsteps
            ],
        }
    }

    #[test]
    fn interpolated_polynomial_solution_has_zero_error() {
        // steady u = (x^2, -2xy), w = -2y, p = x + y are all contained in the
        // Taylor-Hood spaces
        let mesh = Mesh::build_structured(Rect::unit_square(), 2).unwrap();
        let spaces = SpaceSet::build(&mesh, ElementFamily::TaylorHood);
        let layout = BlockLayout::new(&spaces, false);
        let exact = ExactSolution {
            velocity: Box::new(|x, _| Vec2::new(x.x * x.x, -2.0 * x.x * x.y)),
            velocity_gradient: Box::new(|x, _| [[2.0 * x.x, 0.0], [-2.0 * x.y, -2.0 * x.x]]),
            velocity_laplacian: Box::new(|_, _| Vec2::new(2.0, 0.0)),
            velocity_dt: Box::new(|_, _| Vec2::ZERO),
            velocity_laplacian_dt: Box::new(|_, _| Vec2::ZERO),
            pressure: Box::new(|x, _| x.x + x.y),
            pressure_gradient: Box::new(|_, _| Vec2::new(1.0, 1.0)),
            vorticity: Box::new(|x, _| -2.0 * x.y),
            vorticity_gradient: Box::new(|_, _| Vec2::new(0.0, -2.0)),
        };
        let mut coeffs = vec![0.0; layout.total()];
        let u = spaces.interpolate_velocity(|x| (exact.velocity)(x, 0.0));
        let w = spaces.interpolate_vorticity(|x| (exact.vorticity)(x, 0.0));
        let p = spaces.interpolate_pressure(|x| (exact.pressure)(x, 0.0));
        coeffs[..layout.n_u].copy_from_slice(&u);
        coeffs[layout.w_offset()..layout.w_offset() + layout.n_w].copy_from_slice(&w);
        coeffs[layout.p_offset()..layout.p_offset() + layout.n_p].copy_from_slice(&p);
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let traj = steady_trajectory(coeffs, grid);
        let report = error_norms(&traj, &exact, &mesh, &spaces, &layout, grid).unwrap();
        for e in report.errors() {
            assert!(e <= 1e-10, "error {e}");
        }
    }

    fn zero_exact() -> ExactSolution {
        ExactSolution {
            velocity: Box::new(|_, _| Vec2::ZERO),
            velocity_gradient: Box::new(|_, _| [[0.0; 2]; 2]),
            velocity_laplacian: Box::new(|_, _| Vec2::ZERO),
            velocity_dt: Box::new(|_, _| Vec2::ZERO),
            velocity_laplacian_dt: Box::new(|_, _| Vec2::ZERO),
            pressure: Box::new(|_, _| 0.0),
            pressure_gradient: Box::new(|_, _| Vec2::ZERO),
            vorticity: Box::new(|_, _| 0.0),
            vorticity_gradient: Box::new(|_, _| Vec2::ZERO),
        }
    }

    #[test]
    fn constant_error_gives_sqrt_t_scaling() {
        // constant field (c, 0) against the zero solution on the unit square:
        // per-level L2 error is c, so the l2-in-time norm is sqrt(T) c
        let mesh = Mesh::build_structured(Rect::unit_square(), 2).unwrap();
        let spaces = SpaceSet::build(&mesh, ElementFamily::TaylorHood);
        let layout = BlockLayout::new(&spaces, false);
        let c = 0.37;
        let mut coeffs = vec![0.0; layout.total()];
        let u = spaces.interpolate_velocity(|_| Vec2::new(c, 0.0));
        coeffs[..layout.n_u].copy_from_slice(&u);
        let grid = TimeGrid::new(2.0, 8).unwrap();
        let traj = steady_trajectory(coeffs.clone(), grid);
        let report = error_norms(&traj, &zero_exact(), &mesh, &spaces, &layout, grid).unwrap();
        assert!((report.eu_l2_l2 - 2.0f64.sqrt() * c).abs() < 1e-12);
        assert!((report.eu_linf_h1 - c).abs() < 1e-12);

        // norm homogeneity
        let scaled: Vec<f64> = coeffs.iter().map(|v| v * -3.0).collect();
        let traj2 = steady_trajectory(scaled, grid);
        let r2 = error_norms(&traj2, &zero_exact(), &mesh, &spaces, &layout, grid).unwrap();
        assert!((r2.eu_l2_l2 - 3.0 * report.eu_l2_l2).abs() < 1e-12);
    }

    fn synthetic_report(h: f64, errors: [f64; 4]) -> ErrorReport {
        ErrorReport {
            h,
            dofs: 0,
            newton_iterations: 2.0,
            eu_linf_h1: errors[0],
            eu_l2_l2: errors[1],
            ew_l2_l2: errors[2],
            ep_l2_l2: errors[3],
        }
    }

    #[test]
    fn observed_rates_examples() {
        let rows = observed_rates(&[
            synthetic_report(0.2, [0.4; 4]),
            synthetic_report(0.1, [0.1; 4]),
        ]);
        assert!(rows[0].rates[0].is_none());
        assert!((rows[1].rates[0].unwrap() - 2.0).abs() < 1e-12);

        // equal errors at halved h: rate 0
        let rows = observed_rates(&[
            synthetic_report(0.2, [0.5; 4]),
            synthetic_report(0.1, [0.5; 4]),
        ]);
        assert_eq!(rows[1].rates[0].unwrap(), 0.0);

        // zero error reports the infinite-rate marker
        let rows = observed_rates(&[
            synthetic_report(0.2, [0.5; 4]),
            synthetic_report(0.1, [0.0; 4]),
        ]);
        assert!(rows[1].rates[0].unwrap().is_infinite());

        // last two levels of the reference table for the H1 velocity column
        let rows = observed_rates(&[
            synthetic_report(0.025, [5.21e-4; 4]),
            synthetic_report(0.013, [1.27e-4; 4]),
        ]);
        assert!((rows[1].rates[0].unwrap() - 2.16).abs() < 0.01);
    }
}
