//! Backward Euler transient driver for the coupled
//! velocity-vorticity-pressure system.
//!
//! Each step solves the nonlinear system
//!
//! ```text
//! (1/dt) (M_u + kappa^2 K_u)(u^n - u^{n-1}) + M_D u^n + N_F(u^n) + N_conv(u^n)
//!     + nu C w^n + B^T p^n = F^n
//! nu (M_w w^n - C^T u^n) = 0
//! B u^n (+ m lambda) = 0,   m . p^n = 0 (with the mean constraint)
//! ```
//!
//! by Newton, warm-started from the previous state. Dirichlet values are
//! sampled at t_n and imposed on the state before the solve, so Newton
//! increments vanish identically on constrained dofs.

use crate::assembly::{
    apply_dirichlet, assemble_linear_blocks, assemble_load, nonlinear_terms, system_pattern,
    BlockLayout, LinearBlocks, ModelParams, NonlinearParts, SparseMatrix,
};
use crate::mesh::{BoundaryTag, Mesh, Vec2};
use crate::quadrature::rule_for_degree;
use crate::solver::{newton_solve_with_context, LuContext, NewtonOptions, NewtonReport};
use crate::spaces::{BasisEval, CellGeometry, SpaceSet};
use crate::{Error, Result};

/// Uniform time grid t_n = n dt, T = N dt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub nsteps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, nsteps: usize) -> Result<TimeGrid> {
        if nsteps == 0 || !(t_end > 0.0) {
            return Err(Error::Config(format!(
                "time grid needs t_end > 0 and at least one step (got T = {t_end}, N = {nsteps})"
            )));
        }
        Ok(TimeGrid {
            dt: t_end / nsteps as f64,
            nsteps,
        })
    }

    /// Builds the grid from a step size that must divide T (1e-12 relative).
    pub fn from_dt(t_end: f64, dt: f64) -> Result<TimeGrid> {
        if !(dt > 0.0) || !(t_end > 0.0) {
            return Err(Error::Config(format!(
                "time grid needs positive T and dt (got T = {t_end}, dt = {dt})"
            )));
        }
        let n = (t_end / dt).round();
        if n < 1.0 || (n * dt - t_end).abs() > 1e-12 * t_end.max(dt) {
            return Err(Error::Config(format!(
                "dt = {dt} does not divide T = {t_end}"
            )));
        }
        Ok(TimeGrid {
            dt: t_end / n,
            nsteps: n as usize,
        })
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.nsteps)
    }
}

/// Coefficient vector of (u, w, p[, lambda]) at one time level.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub coeffs: Vec<f64>,
    pub time: f64,
}

impl SystemState {
    pub fn zeros(layout: &BlockLayout, time: f64) -> SystemState {
        SystemState {
            coeffs: vec![0.0; layout.total()],
            time,
        }
    }

    pub fn velocity<'a>(&'a self, layout: &BlockLayout) -> &'a [f64] {
        &self.coeffs[..layout.n_u]
    }

    pub fn vorticity<'a>(&'a self, layout: &BlockLayout) -> &'a [f64] {
        &self.coeffs[layout.w_offset()..layout.w_offset() + layout.n_w]
    }

    pub fn pressure<'a>(&'a self, layout: &BlockLayout) -> &'a [f64] {
        &self.coeffs[layout.p_offset()..layout.p_offset() + layout.n_p]
    }

    pub fn lambda(&self, layout: &BlockLayout) -> Option<f64> {
        layout.lambda_index().map(|i| self.coeffs[i])
    }
}

/// States at t_0..t_N plus the per-step Newton reports.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<SystemState>,
    pub reports: Vec<NewtonReport>,
}

impl Trajectory {
    pub fn average_newton_iterations(&self) -> f64 {
        if self.reports.is_empty() {
            return 0.0;
        }
        self.reports.iter().map(|r| r.iterations as f64).sum::<f64>() / self.reports.len() as f64
    }
}

/// How the discrete initial data is constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialDataMode {
    /// Nodal interpolant of u0 with L2-projected vorticity; zero pressure.
    Interpolate,
    /// Solve the stationary discrete initial-condition problem by Newton.
    DiscreteProblem,
}

/// Velocity boundary data g(x, t) on the Dirichlet part of the boundary.
pub type BoundaryValues<'a> = &'a (dyn Fn(Vec2, f64) -> Vec2 + Sync);

/// Body force f(x, t).
pub type Forcing<'a> = &'a (dyn Fn(Vec2, f64) -> Vec2 + Sync);

/// Assembled operators and boundary metadata for one discretization.
pub struct KvbfSystem<'a> {
    pub mesh: &'a Mesh,
    pub spaces: &'a SpaceSet,
    pub params: &'a ModelParams,
    pub layout: BlockLayout,
    pub blocks: LinearBlocks,
    pattern: SparseMatrix,
    /// Constrained velocity dofs with their node coordinate and component.
    bc_dofs: Vec<(usize, Vec2, usize)>,
}

impl<'a> KvbfSystem<'a> {
    /// Assembles the linear blocks and prepares the coupled-system pattern.
    /// The zero-mean multiplier should be active exactly when `dirichlet_tags`
    /// covers the whole boundary.
    pub fn new(
        mesh: &'a Mesh,
        spaces: &'a SpaceSet,
        params: &'a ModelParams,
        dirichlet_tags: &[BoundaryTag],
        mean_constraint: bool,
    ) -> Result<KvbfSystem<'a>> {
        params.validate()?;
        let layout = BlockLayout::new(spaces, mean_constraint);
        let blocks = assemble_linear_blocks(mesh, spaces, params)?;
        let pattern = system_pattern(mesh, spaces, &layout);
        let bc_dofs = spaces
            .dirichlet_dofs(mesh, dirichlet_tags)
            .into_iter()
            .map(|dof| (dof, spaces.velocity.node_coords[dof / 2], dof % 2))
            .collect();
        Ok(KvbfSystem {
            mesh,
            spaces,
            params,
            layout,
            blocks,
            pattern,
            bc_dofs,
        })
    }

    /// (dof, value) pairs of the Dirichlet data at time `t`.
    pub fn boundary_values(&self, g: BoundaryValues, t: f64) -> Vec<(usize, f64)> {
        self.bc_dofs
            .iter()
            .map(|&(dof, x, comp)| {
                let v = g(x, t);
                (dof, if comp == 0 { v.x } else { v.y })
            })
            .collect()
    }

    /// Static Jacobian values on the system pattern:
    /// `mass_scale (M_u + kappa^2 K_u) + M_D` in the velocity block when
    /// `mass_scale > 0`, else `K_u + M_D` (stationary initial problem), plus
    /// the coupling, divergence, and constraint blocks.
    fn static_jacobian(&self, mass_scale: f64) -> SparseMatrix {
        let nu = self.params.nu;
        let kappa2 = self.params.kappa * self.params.kappa;
        let wo = self.layout.w_offset();
        let po = self.layout.p_offset();
        let mut jac = self.pattern.clone();
        if mass_scale > 0.0 {
            jac.add_block(0, 0, mass_scale, &self.blocks.mass_u);
            jac.add_block(0, 0, mass_scale * kappa2, &self.blocks.stiffness_u);
        } else {
            jac.add_block(0, 0, 1.0, &self.blocks.stiffness_u);
        }
        jac.add_block(0, 0, 1.0, &self.blocks.darcy_u);
        jac.add_block(0, wo, nu, &self.blocks.coupling);
        jac.add_block_transpose(wo, 0, -nu, &self.blocks.coupling);
        jac.add_block(wo, wo, nu, &self.blocks.mass_w);
        jac.add_block_transpose(0, po, 1.0, &self.blocks.divergence);
        jac.add_block(po, 0, 1.0, &self.blocks.divergence);
        if let Some(lambda) = self.layout.lambda_index() {
            for (i, &mi) in self.blocks.mean_p.iter().enumerate() {
                jac.add(po + i, lambda, mi);
                jac.add(lambda, po + i, mi);
            }
        }
        jac
    }

    /// Shared linear part of the residual: everything except the velocity-block
    /// time-derivative/stiffness choice and the nonlinear terms.
    fn residual_common(&self, x: &[f64], r: &mut [f64]) {
        let nu = self.params.nu;
        let layout = &self.layout;
        let (n_u, n_w, n_p) = (layout.n_u, layout.n_w, layout.n_p);
        let wo = layout.w_offset();
        let po = layout.p_offset();
        let u = &x[..n_u];
        let w = &x[wo..wo + n_w];
        let p = &x[po..po + n_p];
        self.blocks.darcy_u.matvec_add(1.0, u, &mut r[..n_u]);
        self.blocks.coupling.matvec_add(nu, w, &mut r[..n_u]);
        self.blocks
            .divergence
            .matvec_transpose_add(1.0, p, &mut r[..n_u]);
        self.blocks.mass_w.matvec_add(nu, w, &mut r[wo..wo + n_w]);
        self.blocks
            .coupling
            .matvec_transpose_add(-nu, u, &mut r[wo..wo + n_w]);
        self.blocks
            .divergence
            .matvec_add(1.0, u, &mut r[po..po + n_p]);
        if let Some(lambda) = layout.lambda_index() {
            let lam = x[lambda];
            let mut dot = 0.0;
            for (i, &mi) in self.blocks.mean_p.iter().enumerate() {
                r[po + i] += mi * lam;
                dot += mi * p[i];
            }
            r[lambda] = dot;
        }
    }

    fn nonlinear_residual(&self, u: &[f64], r: &mut [f64]) -> Result<()> {
        let terms = nonlinear_terms(
            self.mesh,
            self.spaces,
            self.params,
            u,
            NonlinearParts {
                forchheimer: true,
                convection: true,
            },
            false,
        )?;
        for (ri, ti) in r.iter_mut().zip(&terms.residual) {
            *ri += ti;
        }
        Ok(())
    }

    /// Full Jacobian at state `x`: static part plus the nonlinear velocity
    /// block, with Dirichlet rows and columns eliminated.
    fn jacobian(&self, x: &[f64], static_jac: &SparseMatrix, bc: &[(usize, f64)]) -> SparseMatrix {
        let mut jac = static_jac.clone();
        let terms = nonlinear_terms(
            self.mesh,
            self.spaces,
            self.params,
            &x[..self.layout.n_u],
            NonlinearParts {
                forchheimer: true,
                convection: true,
            },
            true,
        )
        .expect("nonlinear jacobian");
        terms.scatter_jacobian(self.spaces, |i, j, v| jac.add(i, j, v));
        let zeros: Vec<(usize, f64)> = bc.iter().map(|&(dof, _)| (dof, 0.0)).collect();
        let mut scratch = vec![0.0; jac.nrows()];
        apply_dirichlet(&mut jac, &mut scratch, &zeros).expect("dirichlet dofs in range");
        jac
    }

    /// Discrete energy u^T (M_u + kappa^2 K_u) u of a state.
    pub fn energy(&self, state: &SystemState) -> f64 {
        let u = state.velocity(&self.layout);
        let kappa2 = self.params.kappa * self.params.kappa;
        self.blocks.mass_u.bilinear(u, u) + kappa2 * self.blocks.stiffness_u.bilinear(u, u)
    }

    /// Norm of the weak divergence residual B u.
    pub fn divergence_norm(&self, state: &SystemState) -> f64 {
        let bu = self.blocks.divergence.matvec(state.velocity(&self.layout));
        norm(&bu)
    }

    /// Discrete mean of the pressure, m . p.
    pub fn pressure_mean(&self, state: &SystemState) -> f64 {
        state
            .pressure(&self.layout)
            .iter()
            .zip(&self.blocks.mean_p)
            .map(|(p, m)| p * m)
            .sum()
    }

    /// Norm of M_w w - C^T u, the discrete vorticity-definition residual.
    pub fn vorticity_consistency(&self, state: &SystemState) -> f64 {
        let u = state.velocity(&self.layout);
        let w = state.vorticity(&self.layout);
        let mut r = self.blocks.mass_w.matvec(w);
        self.blocks.coupling.matvec_transpose_add(-1.0, u, &mut r);
        norm(&r)
    }
}

/// Context reused across the steps of one transient run.
pub struct Stepper<'s, 'a> {
    pub system: &'s KvbfSystem<'a>,
    grid: TimeGrid,
    static_jac: SparseMatrix,
    lu: LuContext,
    pub newton: NewtonOptions,
}

impl<'s, 'a> Stepper<'s, 'a> {
    pub fn new(system: &'s KvbfSystem<'a>, grid: TimeGrid, newton: NewtonOptions) -> Result<Self> {
        let static_jac = system.static_jacobian(1.0 / grid.dt);
        let lu = LuContext::new(&static_jac)?;
        Ok(Stepper {
            system,
            grid,
            static_jac,
            lu,
            newton,
        })
    }

    /// Advances `prev` (at t_{n-1}) to t_n.
    pub fn step(
        &self,
        prev: &SystemState,
        t_n: f64,
        forcing: Forcing,
        boundary: BoundaryValues,
    ) -> Result<(SystemState, NewtonReport)> {
        let sys = self.system;
        let layout = &sys.layout;
        let n_u = layout.n_u;
        let dt = self.grid.dt;
        let kappa2 = sys.params.kappa * sys.params.kappa;
        let load = assemble_load(sys.mesh, sys.spaces, |x, t| forcing(x, t), t_n)?;
        let bc = sys.boundary_values(boundary, t_n);

        let mut init = prev.coeffs.clone();
        for &(dof, g) in &bc {
            init[dof] = g;
        }
        let prev_u = prev.velocity(layout).to_vec();

        let residual = |x: &[f64]| -> Vec<f64> {
            let mut r = vec![0.0; layout.total()];
            let u = &x[..n_u];
            let mut du = vec![0.0; n_u];
            for i in 0..n_u {
                du[i] = u[i] - prev_u[i];
            }
            sys.blocks.mass_u.matvec_add(1.0 / dt, &du, &mut r[..n_u]);
            sys.blocks
                .stiffness_u
                .matvec_add(kappa2 / dt, &du, &mut r[..n_u]);
            sys.residual_common(x, &mut r);
            sys.nonlinear_residual(u, &mut r).expect("residual assembly");
            for i in 0..n_u {
                r[i] -= load[i];
            }
            for &(dof, g) in &bc {
                r[dof] = x[dof] - g;
            }
            r
        };
        let jacobian = |x: &[f64]| sys.jacobian(x, &self.static_jac, &bc);

        let (coeffs, report) =
            newton_solve_with_context(&self.lu, residual, jacobian, init, self.newton)?;
        Ok((
            SystemState {
                coeffs,
                time: t_n,
            },
            report,
        ))
    }
}

/// Runs the fully discrete scheme for `grid.nsteps` steps from `initial`.
pub fn run_transient(
    system: &KvbfSystem,
    grid: TimeGrid,
    initial: SystemState,
    forcing: Forcing,
    boundary: BoundaryValues,
    newton: NewtonOptions,
) -> Result<Trajectory> {
    let stepper = Stepper::new(system, grid, newton)?;
    let mut states = Vec::with_capacity(grid.nsteps + 1);
    let mut reports = Vec::with_capacity(grid.nsteps);
    states.push(initial);
    for n in 1..=grid.nsteps {
        let t_n = grid.time(n);
        match stepper.step(states.last().unwrap(), t_n, forcing, boundary) {
            Ok((state, report)) => {
                states.push(state);
                reports.push(report);
            }
            Err(source) => {
                return Err(Error::StepFailed {
                    step: n,
                    time: t_n,
                    partial: Box::new(Trajectory { states, reports }),
                    source: Box::new(source),
                });
            }
        }
    }
    Ok(Trajectory { states, reports })
}

/// Builds the discrete initial state for velocity data `u0`.
///
/// `Interpolate` takes the nodal interpolant of `u0` and the L2 projection of
/// its discrete curl (`M_w w = C^T u`), with zero pressure. `DiscreteProblem`
/// solves the stationary discrete initial-condition system by Newton and needs
/// the velocity gradient `grad_u0` (rows of the Jacobian of u0).
pub fn initial_state(
    system: &KvbfSystem,
    u0: &(dyn Fn(Vec2) -> Vec2 + Sync),
    grad_u0: Option<&(dyn Fn(Vec2) -> [[f64; 2]; 2] + Sync)>,
    mode: InitialDataMode,
    newton: NewtonOptions,
) -> Result<SystemState> {
    let layout = &system.layout;
    let u = system.spaces.interpolate_velocity(u0);
    let mut ctu = vec![0.0; layout.n_w];
    system.blocks.coupling.matvec_transpose_add(1.0, &u, &mut ctu);
    let w = crate::solver::linear_solve(&system.blocks.mass_w, &ctu)?;
    let mut state = SystemState::zeros(layout, 0.0);
    state.coeffs[..layout.n_u].copy_from_slice(&u);
    state.coeffs[layout.w_offset()..layout.w_offset() + layout.n_w].copy_from_slice(&w);
    if mode == InitialDataMode::Interpolate {
        return Ok(state);
    }

    let grad_u0 = grad_u0.ok_or_else(|| {
        Error::Config("discrete_problem initial data needs the gradient of u0".into())
    })?;
    let rhs0 = assemble_initial_rhs(system, u0, grad_u0)?;
    let bc: Vec<(usize, f64)> = system
        .bc_dofs
        .iter()
        .map(|&(dof, x, comp)| {
            let v = u0(x);
            (dof, if comp == 0 { v.x } else { v.y })
        })
        .collect();
    for &(dof, g) in &bc {
        state.coeffs[dof] = g;
    }
    let static_jac = system.static_jacobian(0.0);
    let n_u = layout.n_u;
    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; layout.total()];
        let u = &x[..n_u];
        system
            .blocks
            .stiffness_u
            .matvec_add(1.0, u, &mut r[..n_u]);
        system.residual_common(x, &mut r);
        system.nonlinear_residual(u, &mut r).expect("residual assembly");
        for i in 0..n_u {
            r[i] -= rhs0[i];
        }
        for &(dof, g) in &bc {
            r[dof] = x[dof] - g;
        }
        r
    };
    let jacobian = |x: &[f64]| system.jacobian(x, &static_jac, &bc);
    let lu = LuContext::new(&static_jac)?;
    let (coeffs, _) = newton_solve_with_context(&lu, residual, jacobian, state.coeffs, newton)?;
    Ok(SystemState { coeffs, time: 0.0 })
}

/// Right-hand side of the discrete initial-condition problem:
/// (1 + nu) (grad u0, grad v) + (D u0 + F |u0|^{rho-2} u0 + (grad u0) u0, v).
fn assemble_initial_rhs(
    system: &KvbfSystem,
    u0: &(dyn Fn(Vec2) -> Vec2 + Sync),
    grad_u0: &(dyn Fn(Vec2) -> [[f64; 2]; 2] + Sync),
) -> Result<Vec<f64>> {
    let mesh = system.mesh;
    let spaces = system.spaces;
    let params = system.params;
    let rule = rule_for_degree(crate::assembly::ASSEMBLY_QUADRATURE_DEGREE)?;
    let basis = BasisEval::tabulate(spaces.velocity.kind, rule);
    let nq = rule.points.len();
    let nloc = basis.nloc;
    let mut rhs = vec![0.0; spaces.n_u()];
    for c in 0..mesh.n_cells() {
        let verts = mesh.cell_vertices(c);
        let geom = CellGeometry::new(verts)?;
        let d_val = params.darcy.value(mesh.cell_region[c]);
        let f_val = params.forchheimer.value(mesh.cell_region[c]);
        let dofs = spaces.velocity.cell_dofs(c);
        for q in 0..nq {
            let [l0, l1, l2] = rule.points[q];
            let x = verts[0] * l0 + verts[1] * l1 + verts[2] * l2;
            let w = rule.weights[q] * geom.det;
            let uv = u0(x);
            let gv = grad_u0(x);
            let umag = uv.norm();
            let a = Vec2::new(
                d_val * uv.x + f_val * umag.powf(params.rho - 2.0) * uv.x
                    + gv[0][0] * uv.x + gv[0][1] * uv.y,
                d_val * uv.y + f_val * umag.powf(params.rho - 2.0) * uv.y
                    + gv[1][0] * uv.x + gv[1][1] * uv.y,
            );
            let grad_scale = 1.0 + params.nu;
            for s in 0..nloc {
                let ns = basis.value(q, s);
                let gs = geom.push_grad(basis.ref_grad(q, s));
                rhs[2 * dofs[s]] +=
                    w * (grad_scale * (gv[0][0] * gs[0] + gv[0][1] * gs[1]) + a.x * ns);
                rhs[2 * dofs[s] + 1] +=
                    w * (grad_scale * (gv[1][0] * gs[0] + gv[1][1] * gs[1]) + a.y * ns);
            }
        }
    }
    Ok(rhs)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
