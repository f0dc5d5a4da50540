//! Element families and degree-of-freedom maps for the three fields.
//!
//! Velocity is vector-valued (two components per scalar node, interleaved as
//! `2*node + component`), vorticity and pressure are scalar continuous P1. The
//! Taylor-Hood family uses P2 velocity nodes at vertices and edge midpoints; the
//! MINI family enriches P1 with one interior cubic bubble per cell.

use crate::mesh::{BoundaryTag, Mesh, Vec2};
use crate::quadrature::QuadratureRule;
use crate::{Error, Result};
use std::collections::HashMap;

/// Stable Stokes element family (paired with continuous P1 vorticity).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementFamily {
    /// P2 velocity / P1 pressure (k = 1).
    TaylorHood,
    /// (P1 + cubic bubble) velocity / P1 pressure.
    Mini,
}

/// Scalar element kind backing one field component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarKind {
    P1,
    P2,
    P1Bubble,
}

impl ScalarKind {
    pub fn local_dofs(self) -> usize {
        match self {
            ScalarKind::P1 => 3,
            ScalarKind::P2 => 6,
            ScalarKind::P1Bubble => 4,
        }
    }
}

/// Scalar space with cell-to-global dof map and nodal coordinates.
#[derive(Debug, Clone)]
pub struct ScalarSpace {
    pub kind: ScalarKind,
    pub ndofs: usize,
    /// Flattened cell dofs, `kind.local_dofs()` entries per cell.
    pub cell_dofs: Vec<usize>,
    /// Nodal coordinate per dof (cell centroid for bubbles).
    pub node_coords: Vec<Vec2>,
    /// Dofs >= this index are interior bubbles (== ndofs when there are none).
    pub first_bubble: usize,
}

impl ScalarSpace {
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let n = self.kind.local_dofs();
        &self.cell_dofs[cell * n..(cell + 1) * n]
    }
}

/// The velocity/vorticity/pressure spaces on one mesh.
#[derive(Debug, Clone)]
pub struct SpaceSet {
    pub family: ElementFamily,
    /// Scalar component space of the velocity.
    pub velocity: ScalarSpace,
    pub vorticity: ScalarSpace,
    pub pressure: ScalarSpace,
    /// Global edge index by (min, max) vertex pair; used for P2 boundary nodes.
    edge_index: HashMap<(usize, usize), usize>,
}

impl SpaceSet {
    /// Builds the dof maps for `family` on `mesh`.
    pub fn build(mesh: &Mesh, family: ElementFamily) -> SpaceSet {
        let p1 = build_p1(mesh);
        let (velocity, edge_index) = match family {
            ElementFamily::TaylorHood => build_p2(mesh),
            ElementFamily::Mini => (build_p1_bubble(mesh), HashMap::new()),
        };
        SpaceSet {
            family,
            velocity,
            vorticity: p1.clone(),
            pressure: p1,
            edge_index,
        }
    }

    /// Velocity dof count (both components).
    pub fn n_u(&self) -> usize {
        2 * self.velocity.ndofs
    }

    pub fn n_w(&self) -> usize {
        self.vorticity.ndofs
    }

    pub fn n_p(&self) -> usize {
        self.pressure.ndofs
    }

    /// Total dof count reported in convergence tables (the optional mean
    /// constraint multiplier is not included).
    pub fn total_dofs(&self) -> usize {
        self.n_u() + self.n_w() + self.n_p()
    }

    /// Velocity dofs (both components) whose nodes lie on the tagged sides.
    /// Interior bubbles are never included.
    pub fn dirichlet_dofs(&self, mesh: &Mesh, tags: &[BoundaryTag]) -> Vec<usize> {
        let mut scalar_nodes = Vec::new();
        for (pair, tag) in &mesh.boundary_edges {
            if !tags.contains(tag) {
                continue;
            }
            scalar_nodes.push(pair[0]);
            scalar_nodes.push(pair[1]);
            if self.velocity.kind == ScalarKind::P2 {
                let key = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                let edge = self.edge_index[&key];
                scalar_nodes.push(mesh.n_vertices() + edge);
            }
        }
        scalar_nodes.sort_unstable();
        scalar_nodes.dedup();
        let mut dofs = Vec::with_capacity(2 * scalar_nodes.len());
        for s in scalar_nodes {
            dofs.push(2 * s);
            dofs.push(2 * s + 1);
        }
        dofs.sort_unstable();
        dofs
    }

    /// Nodal interpolant of a velocity field; bubble coefficients are zero.
    pub fn interpolate_velocity(&self, f: impl Fn(Vec2) -> Vec2) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.n_u()];
        for s in 0..self.velocity.first_bubble {
            let v = f(self.velocity.node_coords[s]);
            coeffs[2 * s] = v.x;
            coeffs[2 * s + 1] = v.y;
        }
        coeffs
    }

    pub fn interpolate_vorticity(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        interpolate_scalar(&self.vorticity, f)
    }

    pub fn interpolate_pressure(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        interpolate_scalar(&self.pressure, f)
    }
}

fn interpolate_scalar(space: &ScalarSpace, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
    let mut coeffs = vec![0.0; space.ndofs];
    for s in 0..space.first_bubble {
        coeffs[s] = f(space.node_coords[s]);
    }
    coeffs
}

fn build_p1(mesh: &Mesh) -> ScalarSpace {
    let mut cell_dofs = Vec::with_capacity(3 * mesh.n_cells());
    for cell in &mesh.cells {
        cell_dofs.extend_from_slice(cell);
    }
    ScalarSpace {
        kind: ScalarKind::P1,
        ndofs: mesh.n_vertices(),
        cell_dofs,
        node_coords: mesh.vertices.clone(),
        first_bubble: mesh.n_vertices(),
    }
}

fn build_p2(mesh: &Mesh) -> (ScalarSpace, HashMap<(usize, usize), usize>) {
    let edges = mesh.edges();
    let nv = mesh.n_vertices();
    let ndofs = nv + edges.len();
    let mut node_coords = mesh.vertices.clone();
    for pair in &edges.pairs {
        node_coords.push((mesh.vertices[pair[0]] + mesh.vertices[pair[1]]) * 0.5);
    }
    let mut cell_dofs = Vec::with_capacity(6 * mesh.n_cells());
    for (c, cell) in mesh.cells.iter().enumerate() {
        cell_dofs.extend_from_slice(cell);
        for k in 0..3 {
            cell_dofs.push(nv + edges.cell_edges[c][k]);
        }
    }
    let mut edge_index = HashMap::with_capacity(edges.len());
    for (e, pair) in edges.pairs.iter().enumerate() {
        edge_index.insert((pair[0], pair[1]), e);
    }
    (
        ScalarSpace {
            kind: ScalarKind::P2,
            ndofs,
            cell_dofs,
            node_coords,
            first_bubble: ndofs,
        },
        edge_index,
    )
}

fn build_p1_bubble(mesh: &Mesh) -> ScalarSpace {
    let nv = mesh.n_vertices();
    let mut node_coords = mesh.vertices.clone();
    let mut cell_dofs = Vec::with_capacity(4 * mesh.n_cells());
    for (c, cell) in mesh.cells.iter().enumerate() {
        cell_dofs.extend_from_slice(cell);
        cell_dofs.push(nv + c);
        node_coords.push(mesh.cell_centroid(c));
    }
    ScalarSpace {
        kind: ScalarKind::P1Bubble,
        ndofs: nv + mesh.n_cells(),
        cell_dofs,
        node_coords,
        first_bubble: nv,
    }
}

/// Values and reference gradients of the local basis at a set of reference points.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub nloc: usize,
    pub npoints: usize,
    values: Vec<f64>,
    ref_grads: Vec<[f64; 2]>,
}

impl BasisEval {
    /// Tabulates the basis of `kind` at the points of `rule`.
    pub fn tabulate(kind: ScalarKind, rule: &QuadratureRule) -> BasisEval {
        let nloc = kind.local_dofs();
        let npoints = rule.points.len();
        let mut values = Vec::with_capacity(nloc * npoints);
        let mut ref_grads = Vec::with_capacity(nloc * npoints);
        for &bary in &rule.points {
            let (v, g) = eval_basis(kind, bary);
            values.extend_from_slice(&v[..nloc]);
            ref_grads.extend_from_slice(&g[..nloc]);
        }
        BasisEval {
            nloc,
            npoints,
            values,
            ref_grads,
        }
    }

    pub fn value(&self, q: usize, s: usize) -> f64 {
        self.values[q * self.nloc + s]
    }

    pub fn ref_grad(&self, q: usize, s: usize) -> [f64; 2] {
        self.ref_grads[q * self.nloc + s]
    }
}

/// Evaluates the basis of `kind` at one barycentric point. Returns fixed-size
/// buffers; only the first `kind.local_dofs()` entries are meaningful.
pub fn eval_basis(kind: ScalarKind, bary: [f64; 3]) -> ([f64; 6], [[f64; 2]; 6]) {
    const DL: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    let [l0, l1, l2] = bary;
    let l = [l0, l1, l2];
    let mut values = [0.0; 6];
    let mut grads = [[0.0; 2]; 6];
    match kind {
        ScalarKind::P1 => {
            for i in 0..3 {
                values[i] = l[i];
                grads[i] = DL[i];
            }
        }
        ScalarKind::P2 => {
            for i in 0..3 {
                values[i] = l[i] * (2.0 * l[i] - 1.0);
                grads[i] = [(4.0 * l[i] - 1.0) * DL[i][0], (4.0 * l[i] - 1.0) * DL[i][1]];
            }
            for k in 0..3 {
                let a = (k + 1) % 3;
                let b = (k + 2) % 3;
                values[3 + k] = 4.0 * l[a] * l[b];
                grads[3 + k] = [
                    4.0 * (l[a] * DL[b][0] + l[b] * DL[a][0]),
                    4.0 * (l[a] * DL[b][1] + l[b] * DL[a][1]),
                ];
            }
        }
        ScalarKind::P1Bubble => {
            for i in 0..3 {
                values[i] = l[i];
                grads[i] = DL[i];
            }
            values[3] = 27.0 * l0 * l1 * l2;
            grads[3] = [
                27.0 * (l1 * l2 * DL[0][0] + l0 * l2 * DL[1][0] + l0 * l1 * DL[2][0]),
                27.0 * (l1 * l2 * DL[0][1] + l0 * l2 * DL[1][1] + l0 * l1 * DL[2][1]),
            ];
        }
    }
    (values, grads)
}

/// Affine geometry of one triangle: maps reference gradients to physical ones.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    /// Jacobian [p1-p0 | p2-p0].
    pub jac: [[f64; 2]; 2],
    pub det: f64,
}

impl CellGeometry {
    pub fn new(verts: [Vec2; 3]) -> Result<CellGeometry> {
        let [p0, p1, p2] = verts;
        let jac = [[p1.x - p0.x, p2.x - p0.x], [p1.y - p0.y, p2.y - p0.y]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det <= 0.0 || !det.is_finite() {
            return Err(Error::DegenerateCell(0.5 * det));
        }
        Ok(CellGeometry { jac, det })
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    /// Physical gradient J^{-T} g for a reference gradient g.
    pub fn push_grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            (self.jac[1][1] * g[0] - self.jac[1][0] * g[1]) / self.det,
            (-self.jac[0][1] * g[0] + self.jac[0][0] * g[1]) / self.det,
        ]
    }
}
