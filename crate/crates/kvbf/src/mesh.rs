//! Structured conforming triangulations of axis-aligned rectangles.
//!
//! Each grid square is split along its lower-left to upper-right diagonal, giving
//! 2n² counter-clockwise triangles on an n-by-n grid. Boundary edges carry the side
//! they lie on, and every cell carries a region tag used for piecewise-constant
//! Darcy/Forchheimer coefficients.

use crate::{Error, Result};
use std::collections::HashMap;

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Axis-aligned rectangle (x0, x1) x (y0, y1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn unit_square() -> Self {
        Rect::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }
}

/// Side of the rectangle a boundary edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Left,
    Right,
    Bottom,
    Top,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Bottom,
        BoundaryTag::Top,
    ];
}

/// Cell region for piecewise-constant coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Matrix,
    Channel,
}

/// Conforming triangulation with boundary and region tags.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    /// Vertex index triples, counter-clockwise.
    pub cells: Vec<[usize; 3]>,
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    pub cell_region: Vec<Region>,
}

/// Maximum cell diameter (longest edge over all cells).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSize {
    pub h: f64,
}

impl Mesh {
    /// Triangulates `rect` with `n` subdivisions per axis: (n+1)² vertices and
    /// 2n² cells, each grid square split from its lower-left to its upper-right
    /// corner. All cells start in the `Matrix` region.
    pub fn build_structured(rect: Rect, n: usize) -> Result<Mesh> {
        if n == 0 {
            return Err(Error::Mesh("subdivision count must be at least 1".into()));
        }
        if rect.x1 <= rect.x0 || rect.y1 <= rect.y0 {
            return Err(Error::Mesh(format!(
                "degenerate rectangle ({}, {}) x ({}, {})",
                rect.x0, rect.x1, rect.y0, rect.y1
            )));
        }

        let nv = n + 1;
        let dx = (rect.x1 - rect.x0) / n as f64;
        let dy = (rect.y1 - rect.y0) / n as f64;
        let mut vertices = Vec::with_capacity(nv * nv);
        for j in 0..nv {
            for i in 0..nv {
                vertices.push(Vec2::new(rect.x0 + i as f64 * dx, rect.y0 + j as f64 * dy));
            }
        }
        let vid = |i: usize, j: usize| j * nv + i;

        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = vid(i, j);
                let v10 = vid(i + 1, j);
                let v01 = vid(i, j + 1);
                let v11 = vid(i + 1, j + 1);
                // diagonal v00 -> v11, both triangles counter-clockwise
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }

        let mut boundary_edges = Vec::with_capacity(4 * n);
        for i in 0..n {
            boundary_edges.push(([vid(i, 0), vid(i + 1, 0)], BoundaryTag::Bottom));
            boundary_edges.push(([vid(i, n), vid(i + 1, n)], BoundaryTag::Top));
            boundary_edges.push(([vid(0, i), vid(0, i + 1)], BoundaryTag::Left));
            boundary_edges.push(([vid(n, i), vid(n, i + 1)], BoundaryTag::Right));
        }

        let cell_region = vec![Region::Matrix; cells.len()];
        Ok(Mesh {
            vertices,
            cells,
            boundary_edges,
            cell_region,
        })
    }

    /// Re-tags every cell whose centroid satisfies `indicator` as `Channel`,
    /// everything else as `Matrix`. Geometry is unchanged.
    pub fn tag_channel(mut self, indicator: impl Fn(Vec2) -> bool) -> Mesh {
        for c in 0..self.cells.len() {
            self.cell_region[c] = if indicator(self.cell_centroid(c)) {
                Region::Channel
            } else {
                Region::Matrix
            };
        }
        self
    }

    /// Mesh size h = max over cells of the longest edge.
    pub fn mesh_size(&self) -> Result<MeshSize> {
        if self.cells.is_empty() {
            return Err(Error::Mesh("mesh has no cells".into()));
        }
        let mut h: f64 = 0.0;
        for c in 0..self.cells.len() {
            h = h.max(self.cell_diameter(c));
        }
        Ok(MeshSize { h })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_vertices(&self, c: usize) -> [Vec2; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    pub fn cell_centroid(&self, c: usize) -> Vec2 {
        let [p0, p1, p2] = self.cell_vertices(c);
        (p0 + p1 + p2) * (1.0 / 3.0)
    }

    pub fn cell_signed_area(&self, c: usize) -> f64 {
        let [p0, p1, p2] = self.cell_vertices(c);
        0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y))
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let [p0, p1, p2] = self.cell_vertices(c);
        (p1 - p0)
            .norm()
            .max((p2 - p1).norm())
            .max((p0 - p2).norm())
    }

    /// Unique-edge enumeration, shared by the P2 dof map and conformity checks.
    pub fn edges(&self) -> EdgeSet {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut pairs = Vec::new();
        let mut cell_count = Vec::new();
        let mut cell_edges = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            let mut local = [0usize; 3];
            for k in 0..3 {
                // local edge k is opposite local vertex k
                let a = cell[(k + 1) % 3];
                let b = cell[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *index.entry(key).or_insert_with(|| {
                    pairs.push([key.0, key.1]);
                    cell_count.push(0usize);
                    pairs.len() - 1
                });
                cell_count[e] += 1;
                local[k] = e;
            }
            cell_edges.push(local);
        }
        EdgeSet {
            pairs,
            cell_edges,
            cell_count,
        }
    }
}

/// Unique edges of a mesh with per-cell local edge indices.
#[derive(Debug, Clone)]
pub struct EdgeSet {
    /// Endpoint vertex pairs, each stored (min, max).
    pub pairs: Vec<[usize; 2]>,
    /// For each cell, the global edge index opposite each local vertex.
    pub cell_edges: Vec<[usize; 3]>,
    /// Number of cells adjacent to each edge (1 = boundary, 2 = interior).
    pub cell_count: Vec<usize>,
}

impl EdgeSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Default channel-network geometry on (-1,1)²: a horizontal main channel
/// |y| <= 0.1 plus vertical branches at x in [-0.55,-0.45] and [0.45,0.55].
pub fn default_channel_rects() -> Vec<Rect> {
    vec![
        Rect::new(-1.0, -0.1, 1.0, 0.1),
        Rect::new(-0.55, -1.0, -0.45, 1.0),
        Rect::new(0.45, -1.0, 0.55, 1.0),
    ]
}

/// Region predicate for a union of rectangles.
pub fn rect_union_indicator(rects: &[Rect]) -> impl Fn(Vec2) -> bool + '_ {
    move |p| rects.iter().any(|r| r.contains(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_mesh_counts() {
        let mesh = Mesh::build_structured(Rect::unit_square(), 1).unwrap();
        assert_eq!(mesh.n_vertices(), 4);
        assert_eq!(mesh.n_cells(), 2);
        assert!((mesh.mesh_size().unwrap().h - 2.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(mesh.edges().len(), 5);
    }

    #[test]
    fn structured_counts_n4() {
        let mesh = Mesh::build_structured(Rect::unit_square(), 4).unwrap();
        assert_eq!(mesh.n_vertices(), 25);
        assert_eq!(mesh.n_cells(), 32);
        let h = mesh.mesh_size().unwrap().h;
        assert!((h - 2.0f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn mesh_size_biunit_square() {
        let mesh = Mesh::build_structured(Rect::new(-1.0, -1.0, 1.0, 1.0), 2).unwrap();
        assert!((mesh.mesh_size().unwrap().h - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(Mesh::build_structured(Rect::unit_square(), 0).is_err());
        assert!(Mesh::build_structured(Rect::new(0.0, 0.0, 0.0, 1.0), 3).is_err());
        let empty = Mesh {
            vertices: vec![],
            cells: vec![],
            boundary_edges: vec![],
            cell_region: vec![],
        };
        assert!(empty.mesh_size().is_err());
    }

    #[test]
    fn cells_positive_area_and_sum_to_rect() {
        for n in [1, 3, 7] {
            let rect = Rect::new(-1.0, 0.5, 2.0, 3.5);
            let mesh = Mesh::build_structured(rect, n).unwrap();
            let mut total = 0.0;
            for c in 0..mesh.n_cells() {
                let a = mesh.cell_signed_area(c);
                assert!(a > 0.0, "cell {c} not counter-clockwise");
                total += a;
            }
            assert!((total - rect.area()).abs() <= 1e-12 * rect.area());
        }
    }

    #[test]
    fn edge_sharing_counts() {
        let mesh = Mesh::build_structured(Rect::unit_square(), 5).unwrap();
        let edges = mesh.edges();
        let mut boundary = std::collections::HashSet::new();
        for (pair, _) in &mesh.boundary_edges {
            boundary.insert((pair[0].min(pair[1]), pair[0].max(pair[1])));
        }
        for (e, pair) in edges.pairs.iter().enumerate() {
            let expected = if boundary.contains(&(pair[0], pair[1])) {
                1
            } else {
                2
            };
            assert_eq!(edges.cell_count[e], expected);
        }
        // every boundary edge appears exactly once in the tagged list
        assert_eq!(boundary.len(), mesh.boundary_edges.len());
    }

    #[test]
    fn refinement_halves_mesh_size() {
        for n in [2, 5] {
            let h1 = Mesh::build_structured(Rect::unit_square(), n)
                .unwrap()
                .mesh_size()
                .unwrap()
                .h;
            let h2 = Mesh::build_structured(Rect::unit_square(), 2 * n)
                .unwrap()
                .mesh_size()
                .unwrap()
                .h;
            assert!((h1 / h2 - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn tag_channel_constant_indicators() {
        let mesh = Mesh::build_structured(Rect::unit_square(), 3).unwrap();
        let all_matrix = mesh.clone().tag_channel(|_| false);
        assert!(all_matrix.cell_region.iter().all(|r| *r == Region::Matrix));
        let all_channel = mesh.tag_channel(|_| true);
        assert!(all_channel
            .cell_region
            .iter()
            .all(|r| *r == Region::Channel));
    }

    #[test]
    fn tag_channel_horizontal_strip() {
        let mesh = Mesh::build_structured(Rect::new(-1.0, -1.0, 1.0, 1.0), 20).unwrap();
        let tagged = mesh.tag_channel(|p| p.y.abs() < 0.1);
        for c in 0..tagged.n_cells() {
            let expected = if tagged.cell_centroid(c).y.abs() < 0.1 {
                Region::Channel
            } else {
                Region::Matrix
            };
            assert_eq!(tagged.cell_region[c], expected, "cell {c}");
        }
        assert!(tagged
            .cell_region
            .iter()
            .any(|r| *r == Region::Channel));
        assert!(tagged.cell_region.iter().any(|r| *r == Region::Matrix));
    }
}
