//! Assembly of the operator blocks and nonlinear terms of the weak form.
//!
//! Blocks follow the velocity / vorticity / pressure / multiplier layout:
//! the vorticity coupling enters the velocity rows as `+nu C w` and the
//! vorticity rows as `-nu C^T u` (exact skew pairing), the divergence operator
//! is `B[i][j] = -(q_i, div phi_j)`, and the optional scalar multiplier row
//! enforces zero mean pressure.
//!
//! All forms are integrated with a degree-8 rule, which is exact for every
//! polynomial integrand appearing with Taylor-Hood elements (including the
//! Forchheimer term at rho = 4).

mod csr;

pub use csr::{apply_dirichlet, SparseMatrix};

use crate::mesh::{Mesh, Region, Vec2};
use crate::quadrature::{map_to_cell, rule_for_degree};
use crate::spaces::{BasisEval, CellGeometry, ScalarKind, SpaceSet};
use crate::{Error, Result};
use std::sync::OnceLock;

/// Quadrature exactness degree used for every assembled form.
pub const ASSEMBLY_QUADRATURE_DEGREE: usize = 8;

/// Velocity magnitude below which the `u (x) u` part of the Forchheimer
/// Jacobian is taken as its zero limit (removes the 0/0 for rho < 4).
const FORCHHEIMER_CUTOFF: f64 = 1e-12;

/// Per-region coefficient value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionValue {
    pub matrix: f64,
    pub channel: f64,
}

impl RegionValue {
    pub fn uniform(v: f64) -> Self {
        RegionValue {
            matrix: v,
            channel: v,
        }
    }

    pub fn value(&self, region: Region) -> f64 {
        match region {
            Region::Matrix => self.matrix,
            Region::Channel => self.channel,
        }
    }
}

/// Physical parameters of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Forchheimer exponent, in [3, 4].
    pub rho: f64,
    /// Brinkman coefficient (effective viscosity), > 0.
    pub nu: f64,
    /// Elasticity length scale, > 0.
    pub kappa: f64,
    /// Darcy coefficient per region, > 0.
    pub darcy: RegionValue,
    /// Forchheimer coefficient per region, > 0.
    pub forchheimer: RegionValue,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(3.0..=4.0).contains(&self.rho) {
            return Err(Error::Params(format!("rho = {} outside [3, 4]", self.rho)));
        }
        if !(self.nu > 0.0) {
            return Err(Error::Params(format!("nu = {} must be positive", self.nu)));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Params(format!(
                "kappa = {} must be positive",
                self.kappa
            )));
        }
        for (name, v) in [("darcy", self.darcy), ("forchheimer", self.forchheimer)] {
            if !(v.matrix > 0.0) || !(v.channel > 0.0) {
                return Err(Error::Params(format!("{name} must be positive per region")));
            }
        }
        Ok(())
    }
}

/// Offsets of the [u | w | p | lambda] blocks in the global vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub n_u: usize,
    pub n_w: usize,
    pub n_p: usize,
    /// Whether the zero-mean pressure multiplier row is present.
    pub multiplier: bool,
}

impl BlockLayout {
    pub fn new(spaces: &SpaceSet, multiplier: bool) -> Self {
        BlockLayout {
            n_u: spaces.n_u(),
            n_w: spaces.n_w(),
            n_p: spaces.n_p(),
            multiplier,
        }
    }

    pub fn u_offset(&self) -> usize {
        0
    }

    pub fn w_offset(&self) -> usize {
        self.n_u
    }

    pub fn p_offset(&self) -> usize {
        self.n_u + self.n_w
    }

    pub fn lambda_index(&self) -> Option<usize> {
        self.multiplier.then_some(self.n_u + self.n_w + self.n_p)
    }

    pub fn total(&self) -> usize {
        self.n_u + self.n_w + self.n_p + usize::from(self.multiplier)
    }
}

/// Time-independent operator blocks.
#[derive(Debug, Clone)]
pub struct LinearBlocks {
    /// Velocity mass matrix (u, v).
    pub mass_u: SparseMatrix,
    /// Velocity stiffness (grad u, grad v).
    pub stiffness_u: SparseMatrix,
    /// Darcy-weighted velocity mass (D u, v).
    pub darcy_u: SparseMatrix,
    /// Vorticity mass (w, psi).
    pub mass_w: SparseMatrix,
    /// Coupling C[i][j] = (psi_j, curl phi_i), shape n_u x n_w.
    pub coupling: SparseMatrix,
    /// Divergence B[i][j] = -(q_i, div phi_j), shape n_p x n_u.
    pub divergence: SparseMatrix,
    /// Mean vector m[i] = (q_i, 1).
    pub mean_p: Vec<f64>,
}

/// 2D curl of a velocity basis function `N_s e_c`.
#[inline]
fn basis_curl(grad: [f64; 2], component: usize) -> f64 {
    if component == 1 {
        grad[0]
    } else {
        -grad[1]
    }
}

/// Assembles all linear blocks; D(x) is read from the cell region.
pub fn assemble_linear_blocks(
    mesh: &Mesh,
    spaces: &SpaceSet,
    params: &ModelParams,
) -> Result<LinearBlocks> {
    params.validate()?;
    let rule = rule_for_degree(ASSEMBLY_QUADRATURE_DEGREE)?;
    let basis_u = BasisEval::tabulate(spaces.velocity.kind, rule);
    let basis_s = BasisEval::tabulate(ScalarKind::P1, rule);
    let nq = rule.points.len();
    let nu_loc = basis_u.nloc;

    let n_u = spaces.n_u();
    let n_w = spaces.n_w();
    let n_p = spaces.n_p();
    let mut mass = Vec::new();
    let mut stiff = Vec::new();
    let mut darcy = Vec::new();
    let mut mass_w = Vec::new();
    let mut coupling = Vec::new();
    let mut divergence = Vec::new();
    let mut mean_p = vec![0.0; n_p];

    let mut grads = vec![[0.0; 2]; nq * nu_loc];
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh.cell_vertices(c))?;
        let d_val = params.darcy.value(mesh.cell_region[c]);
        let udofs = spaces.velocity.cell_dofs(c);
        let sdofs = spaces.pressure.cell_dofs(c);
        for q in 0..nq {
            for s in 0..nu_loc {
                grads[q * nu_loc + s] = geom.push_grad(basis_u.ref_grad(q, s));
            }
        }
        for q in 0..nq {
            let w = rule.weights[q] * geom.det;
            for s in 0..nu_loc {
                let ns = basis_u.value(q, s);
                let gs = grads[q * nu_loc + s];
                for r in 0..nu_loc {
                    let nr = basis_u.value(q, r);
                    let gr = grads[q * nu_loc + r];
                    let m = w * ns * nr;
                    let k = w * (gs[0] * gr[0] + gs[1] * gr[1]);
                    for comp in 0..2 {
                        let gi = 2 * udofs[s] + comp;
                        let gj = 2 * udofs[r] + comp;
                        mass.push((gi, gj, m));
                        stiff.push((gi, gj, k));
                        darcy.push((gi, gj, d_val * m));
                    }
                }
                for (j, &dj) in sdofs.iter().enumerate() {
                    let nj = basis_s.value(q, j);
                    for comp in 0..2 {
                        let gi = 2 * udofs[s] + comp;
                        coupling.push((gi, dj, w * nj * basis_curl(gs, comp)));
                        divergence.push((dj, gi, -w * nj * gs[comp]));
                    }
                }
            }
            for (i, &di) in sdofs.iter().enumerate() {
                let ni = basis_s.value(q, i);
                mean_p[di] += w * ni;
                for (j, &dj) in sdofs.iter().enumerate() {
                    mass_w.push((di, dj, w * ni * basis_s.value(q, j)));
                }
            }
        }
    }

    Ok(LinearBlocks {
        mass_u: SparseMatrix::from_triplets(n_u, n_u, &mass),
        stiffness_u: SparseMatrix::from_triplets(n_u, n_u, &stiff),
        darcy_u: SparseMatrix::from_triplets(n_u, n_u, &darcy),
        mass_w: SparseMatrix::from_triplets(n_w, n_w, &mass_w),
        coupling: SparseMatrix::from_triplets(n_u, n_w, &coupling),
        divergence: SparseMatrix::from_triplets(n_p, n_u, &divergence),
        mean_p,
    })
}

/// Which nonlinear terms a kernel sweep accumulates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NonlinearParts {
    pub forchheimer: bool,
    pub convection: bool,
}

/// Residual over velocity dofs plus (optionally) per-cell Jacobian blocks.
pub(crate) struct NonlinearTerms {
    pub residual: Vec<f64>,
    /// Dense (2 nloc)^2 blocks, cell-major, when a Jacobian was requested.
    jac_blocks: Option<Vec<f64>>,
    block_size: usize,
}

impl NonlinearTerms {
    /// Feeds the Jacobian entries to `sink` in canonical cell order.
    pub fn scatter_jacobian(
        &self,
        spaces: &SpaceSet,
        mut sink: impl FnMut(usize, usize, f64),
    ) {
        let blocks = self
            .jac_blocks
            .as_ref()
            .expect("jacobian was not requested");
        let nloc2 = self.block_size;
        for (c, block) in blocks.chunks_exact(nloc2 * nloc2).enumerate() {
            let dofs = spaces.velocity.cell_dofs(c);
            for a in 0..nloc2 {
                let gi = 2 * dofs[a / 2] + a % 2;
                for b in 0..nloc2 {
                    let v = block[a * nloc2 + b];
                    if v != 0.0 {
                        sink(gi, 2 * dofs[b / 2] + b % 2, v);
                    }
                }
            }
        }
    }

    pub fn jacobian_matrix(&self, spaces: &SpaceSet) -> SparseMatrix {
        let n = self.residual.len();
        let mut triplets = Vec::new();
        self.scatter_jacobian(spaces, |i, j, v| triplets.push((i, j, v)));
        SparseMatrix::from_triplets(n, n, &triplets)
    }
}

/// Evaluates the requested nonlinear terms of the velocity equation at the
/// state `u_coeffs`. Per-cell work is independent, so cells may be processed in
/// parallel (`KVBF_THREADS`); contributions are always merged in cell order.
pub(crate) fn nonlinear_terms(
    mesh: &Mesh,
    spaces: &SpaceSet,
    params: &ModelParams,
    u_coeffs: &[f64],
    parts: NonlinearParts,
    want_jacobian: bool,
) -> Result<NonlinearTerms> {
    let n_u = spaces.n_u();
    assert_eq!(u_coeffs.len(), n_u);
    let rule = rule_for_degree(ASSEMBLY_QUADRATURE_DEGREE)?;
    let basis = BasisEval::tabulate(spaces.velocity.kind, rule);
    let nq = rule.points.len();
    let nloc = basis.nloc;
    let nloc2 = 2 * nloc;
    let rho = params.rho;

    let compute = |c: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        let geom = CellGeometry::new(mesh.cell_vertices(c))?;
        let f_val = params.forchheimer.value(mesh.cell_region[c]);
        let dofs = spaces.velocity.cell_dofs(c);
        let mut grads = vec![[0.0f64; 2]; nq * nloc];
        for q in 0..nq {
            for s in 0..nloc {
                grads[q * nloc + s] = geom.push_grad(basis.ref_grad(q, s));
            }
        }
        let mut res = vec![0.0; nloc2];
        let mut jac = vec![0.0; if want_jacobian { nloc2 * nloc2 } else { 0 }];
        for q in 0..nq {
            let w = rule.weights[q] * geom.det;
            // velocity value and gradient at the quadrature point
            let mut u = Vec2::ZERO;
            let mut gu = [[0.0f64; 2]; 2];
            for s in 0..nloc {
                let n = basis.value(q, s);
                let g = grads[q * nloc + s];
                let cx = u_coeffs[2 * dofs[s]];
                let cy = u_coeffs[2 * dofs[s] + 1];
                u.x += cx * n;
                u.y += cy * n;
                gu[0][0] += cx * g[0];
                gu[0][1] += cx * g[1];
                gu[1][0] += cy * g[0];
                gu[1][1] += cy * g[1];
            }
            let div_u = gu[0][0] + gu[1][1];
            let uarr = [u.x, u.y];

            let mut val = [0.0f64; 2]; // residual integrand per component
            let umag = u.norm();
            let mut forch_s1 = 0.0;
            let mut forch_s2 = 0.0;
            if parts.forchheimer {
                forch_s1 = f_val * umag.powf(rho - 2.0);
                forch_s2 = if umag >= FORCHHEIMER_CUTOFF {
                    f_val * (rho - 2.0) * umag.powf(rho - 4.0)
                } else {
                    0.0
                };
                val[0] += forch_s1 * u.x;
                val[1] += forch_s1 * u.y;
            }
            if parts.convection {
                for c2 in 0..2 {
                    val[c2] += gu[c2][0] * u.x + gu[c2][1] * u.y + 0.5 * div_u * uarr[c2];
                }
            }
            for s in 0..nloc {
                let ns = basis.value(q, s);
                res[2 * s] += w * val[0] * ns;
                res[2 * s + 1] += w * val[1] * ns;
            }

            if want_jacobian {
                for s in 0..nloc {
                    let wns = w * basis.value(q, s);
                    for r in 0..nloc {
                        let nr = basis.value(q, r);
                        let gr = grads[q * nloc + r];
                        let gr_dot_u = gr[0] * u.x + gr[1] * u.y;
                        for cc in 0..2 {
                            for dd in 0..2 {
                                let mut dval = 0.0;
                                if parts.forchheimer {
                                    if cc == dd {
                                        dval += forch_s1 * nr;
                                    }
                                    dval += forch_s2 * uarr[cc] * uarr[dd] * nr;
                                }
                                if parts.convection {
                                    if cc == dd {
                                        dval += gr_dot_u + 0.5 * div_u * nr;
                                    }
                                    dval += gu[cc][dd] * nr + 0.5 * gr[dd] * uarr[cc];
                                }
                                jac[(2 * s + cc) * nloc2 + (2 * r + dd)] += wns * dval;
                            }
                        }
                    }
                }
            }
        }
        Ok((res, jac))
    };

    let locals = compute_cells(mesh.n_cells(), compute)?;

    let mut residual = vec![0.0; n_u];
    let mut jac_blocks = want_jacobian.then(|| Vec::with_capacity(mesh.n_cells() * nloc2 * nloc2));
    for (c, (res, jac)) in locals.into_iter().enumerate() {
        let dofs = spaces.velocity.cell_dofs(c);
        for s in 0..nloc {
            residual[2 * dofs[s]] += res[2 * s];
            residual[2 * dofs[s] + 1] += res[2 * s + 1];
        }
        if let Some(blocks) = jac_blocks.as_mut() {
            blocks.extend_from_slice(&jac);
        }
    }
    Ok(NonlinearTerms {
        residual,
        jac_blocks,
        block_size: nloc2,
    })
}

/// Forchheimer term F (|u|^{rho-2} u, v): residual over velocity dofs and its
/// Jacobian, with the rank-one part taken as zero where |u| vanishes.
pub fn assemble_forchheimer(
    mesh: &Mesh,
    spaces: &SpaceSet,
    params: &ModelParams,
    u_coeffs: &[f64],
) -> Result<(Vec<f64>, SparseMatrix)> {
    let terms = nonlinear_terms(
        mesh,
        spaces,
        params,
        u_coeffs,
        NonlinearParts {
            forchheimer: true,
            convection: false,
        },
        true,
    )?;
    let jac = terms.jacobian_matrix(spaces);
    Ok((terms.residual, jac))
}

/// Skew-symmetric convection c_h(u)(u, .) = ((grad u) u, v) + 1/2 (div(u) u, v)
/// and its Jacobian in u.
pub fn assemble_convection(
    mesh: &Mesh,
    spaces: &SpaceSet,
    u_coeffs: &[f64],
) -> Result<(Vec<f64>, SparseMatrix)> {
    let params = placeholder_params();
    let terms = nonlinear_terms(
        mesh,
        spaces,
        &params,
        u_coeffs,
        NonlinearParts {
            forchheimer: false,
            convection: true,
        },
        true,
    )?;
    let jac = terms.jacobian_matrix(spaces);
    Ok((terms.residual, jac))
}

/// Convection form with independent transport field: c_h(z)(u, .) =
/// ((grad u) z, v) + 1/2 (div(z) u, v). Used by the skew-symmetry and
/// coercivity checks.
pub fn convection_apply(
    mesh: &Mesh,
    spaces: &SpaceSet,
    z_coeffs: &[f64],
    u_coeffs: &[f64],
) -> Result<Vec<f64>> {
    let n_u = spaces.n_u();
    assert_eq!(z_coeffs.len(), n_u);
    assert_eq!(u_coeffs.len(), n_u);
    let rule = rule_for_degree(ASSEMBLY_QUADRATURE_DEGREE)?;
    let basis = BasisEval::tabulate(spaces.velocity.kind, rule);
    let nq = rule.points.len();
    let nloc = basis.nloc;
    let mut residual = vec![0.0; n_u];
    for c in 0..mesh.n_cells() {
        let geom = CellGeometry::new(mesh.cell_vertices(c))?;
        let dofs = spaces.velocity.cell_dofs(c);
        for q in 0..nq {
            let w = rule.weights[q] * geom.det;
            let mut z = Vec2::ZERO;
            let mut u = Vec2::ZERO;
            let mut gu = [[0.0f64; 2]; 2];
            let mut div_z = 0.0;
            for s in 0..nloc {
                let n = basis.value(q, s);
                let g = geom.push_grad(basis.ref_grad(q, s));
                let zx = z_coeffs[2 * dofs[s]];
                let zy = z_coeffs[2 * dofs[s] + 1];
                let cx = u_coeffs[2 * dofs[s]];
                let cy = u_coeffs[2 * dofs[s] + 1];
                z.x += zx * n;
                z.y += zy * n;
                div_z += zx * g[0] + zy * g[1];
                u.x += cx * n;
                u.y += cy * n;
                gu[0][0] += cx * g[0];
                gu[0][1] += cx * g[1];
                gu[1][0] += cy * g[0];
                gu[1][1] += cy * g[1];
            }
            let val = [
                gu[0][0] * z.x + gu[0][1] * z.y + 0.5 * div_z * u.x,
                gu[1][0] * z.x + gu[1][1] * z.y + 0.5 * div_z * u.y,
            ];
            for s in 0..nloc {
                let ns = basis.value(q, s);
                residual[2 * dofs[s]] += w * val[0] * ns;
                residual[2 * dofs[s] + 1] += w * val[1] * ns;
            }
        }
    }
    Ok(residual)
}

/// Load vector (f(., t), v) over velocity dofs.
pub fn assemble_load(
    mesh: &Mesh,
    spaces: &SpaceSet,
    f: impl Fn(Vec2, f64) -> Vec2,
    t: f64,
) -> Result<Vec<f64>> {
    let rule = rule_for_degree(ASSEMBLY_QUADRATURE_DEGREE)?;
    let basis = BasisEval::tabulate(spaces.velocity.kind, rule);
    let nq = rule.points.len();
    let nloc = basis.nloc;
    let mut load = vec![0.0; spaces.n_u()];
    for c in 0..mesh.n_cells() {
        let verts = mesh.cell_vertices(c);
        let mapped = map_to_cell(rule, verts)?;
        let dofs = spaces.velocity.cell_dofs(c);
        for q in 0..nq {
            let w = mapped.weights[q];
            let fv = f(mapped.points[q], t);
            for s in 0..nloc {
                let ns = basis.value(q, s);
                load[2 * dofs[s]] += w * fv.x * ns;
                load[2 * dofs[s] + 1] += w * fv.y * ns;
            }
        }
    }
    Ok(load)
}

/// Zero matrix with the union sparsity pattern of the coupled system
/// [u | w | p | lambda], including the nonlinear velocity block.
pub fn system_pattern(mesh: &Mesh, spaces: &SpaceSet, layout: &BlockLayout) -> SparseMatrix {
    let total = layout.total();
    let wo = layout.w_offset();
    let po = layout.p_offset();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for c in 0..mesh.n_cells() {
        let udofs = spaces.velocity.cell_dofs(c);
        let sdofs = spaces.pressure.cell_dofs(c);
        for &a in udofs {
            for comp_a in 0..2 {
                let gi = 2 * a + comp_a;
                for &b in udofs {
                    for comp_b in 0..2 {
                        pairs.push((gi, 2 * b + comp_b));
                    }
                }
                for &j in sdofs {
                    pairs.push((gi, wo + j)); // nu C
                    pairs.push((wo + j, gi)); // -nu C^T
                    pairs.push((gi, po + j)); // B^T
                    pairs.push((po + j, gi)); // B
                }
            }
        }
        for &i in sdofs {
            for &j in sdofs {
                pairs.push((wo + i, wo + j)); // nu M_w
            }
        }
    }
    if let Some(lambda) = layout.lambda_index() {
        for i in 0..layout.n_p {
            pairs.push((po + i, lambda));
            pairs.push((lambda, po + i));
        }
        pairs.push((lambda, lambda));
    }
    SparseMatrix::zeros_from_pairs(total, total, pairs)
}

fn placeholder_params() -> ModelParams {
    // convection does not read the coefficients; any valid set works
    ModelParams {
        rho: 3.0,
        nu: 1.0,
        kappa: 1.0,
        darcy: RegionValue::uniform(1.0),
        forchheimer: RegionValue::uniform(1.0),
    }
}

/// Number of worker threads for per-cell assembly (KVBF_THREADS, default 1).
pub fn assembly_threads() -> usize {
    static THREADS: OnceLock<usize> = OnceLock::new();
    *THREADS.get_or_init(|| {
        std::env::var("KVBF_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .unwrap_or(1)
    })
}

fn thread_pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let n = assembly_threads();
        (n > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool")
        })
    })
    .as_ref()
}

/// Maps `f` over cell indices, in parallel when KVBF_THREADS > 1. The output
/// preserves cell order, so downstream merges are bit-deterministic regardless
/// of the thread count.
fn compute_cells<T: Send>(
    ncells: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    match thread_pool() {
        Some(pool) => pool.install(|| {
            use rayon::prelude::*;
            (0..ncells).into_par_iter().map(&f).collect()
        }),
        None => (0..ncells).map(f).collect(),
    }
}
