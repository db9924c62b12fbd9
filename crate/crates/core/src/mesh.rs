//! Conforming triangulations of polygonal 2D domains.
//!
//! Structured meshes of rectangles are built from right-angled triangles
//! (all angles <= 90 degrees), which is what the discrete maximum principle
//! for the lumped temperature scheme relies on. Uniform refinement splits
//! every triangle into four congruent children, so angle sets are preserved
//! across levels. Arbitrary conforming meshes can be imported from a plain
//! node/element listing and are accepted even when obtuse; callers that need
//! acuteness check [`mesh_quality`].

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Immutable conforming triangulation.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Vertex index triples, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Edges lying on the domain boundary, each with a tag (single-tag
    /// boundaries suffice here: no-slip velocity and zero-flux heat hold on
    /// the whole boundary).
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Maximum element diameter.
    pub h_max: f64,
    /// Refinement generation (0 for freshly built meshes).
    pub level: u32,
    /// Unique undirected edges sorted by (min,max) vertex pair; P2 midpoint
    /// nodes are numbered in this order.
    edges: Vec<[usize; 2]>,
    edge_lookup: HashMap<[usize; 2], usize>,
    boundary_vertex: Vec<bool>,
    boundary_edge_set: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: u32,
}

/// Per-mesh angle and shape statistics.
#[derive(Debug, Clone, Copy)]
pub struct QualityReport {
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    /// max over elements of diameter / (2 * inradius).
    pub shape_regularity: f64,
    pub is_acute: bool,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn edge_key(i: usize, j: usize) -> [usize; 2] {
    if i < j {
        [i, j]
    } else {
        [j, i]
    }
}

impl Mesh {
    /// Finalizes a vertex/triangle soup: orients triangles counterclockwise,
    /// enumerates unique edges, recovers the boundary (edges referenced by
    /// exactly one triangle) and checks conformity.
    fn from_raw(
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        level: u32,
        tag: u32,
    ) -> Result<Mesh> {
        let nv = vertices.len();
        for tri in triangles.iter_mut() {
            for &v in tri.iter() {
                if v >= nv {
                    return Err(Error::InvalidInput(format!(
                        "triangle references vertex {v} but mesh has {nv} vertices"
                    )));
                }
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area.abs() < 1e-300 {
                return Err(Error::InvalidInput(format!(
                    "degenerate triangle {tri:?} (zero area)"
                )));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }

        // Count how many triangles share each undirected edge.
        let mut use_count: HashMap<[usize; 2], usize> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let key = edge_key(tri[k], tri[(k + 1) % 3]);
                *use_count.entry(key).or_insert(0) += 1;
            }
        }
        for (key, count) in &use_count {
            if *count > 2 {
                return Err(Error::InvalidInput(format!(
                    "non-conforming mesh: edge {key:?} shared by {count} triangles"
                )));
            }
        }

        let mut edges: Vec<[usize; 2]> = use_count.keys().copied().collect();
        edges.sort_unstable();
        let edge_lookup: HashMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();

        let mut boundary_edges: Vec<BoundaryEdge> = use_count
            .iter()
            .filter(|(_, c)| **c == 1)
            .map(|(e, _)| BoundaryEdge { vertices: *e, tag })
            .collect();
        boundary_edges.sort_unstable_by_key(|e| e.vertices);

        let mut boundary_vertex = vec![false; nv];
        let mut boundary_edge_set = vec![false; edges.len()];
        for be in &boundary_edges {
            boundary_vertex[be.vertices[0]] = true;
            boundary_vertex[be.vertices[1]] = true;
            boundary_edge_set[edge_lookup[&be.vertices]] = true;
        }

        let h_max = triangles
            .iter()
            .map(|t| {
                let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
                dist(a, b).max(dist(b, c)).max(dist(c, a))
            })
            .fold(0.0_f64, f64::max);

        Ok(Mesh {
            vertices,
            triangles,
            boundary_edges,
            h_max,
            level,
            edges,
            edge_lookup,
            boundary_vertex,
            boundary_edge_set,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_index(&self, a: usize, b: usize) -> usize {
        self.edge_lookup[&edge_key(a, b)]
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge_set[e]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn triangle_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }
}

/// Builds a structured triangulation of `[0,width] x [0,height]` with
/// `nx * ny` rectangular cells, each split along the same diagonal into two
/// right triangles.
pub fn build_structured_mesh(nx: usize, ny: usize, width: f64, height: f64) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput(format!(
            "mesh resolution must be positive, got {nx} x {ny}"
        )));
    }
    if !(width > 0.0) || !(height > 0.0) {
        return Err(Error::InvalidInput(format!(
            "domain dimensions must be positive, got {width} x {height}"
        )));
    }
    let dx = width / nx as f64;
    let dy = height / ny as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([i as f64 * dx, j as f64 * dy]);
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::from_raw(vertices, triangles, 0, 0)
}

/// Splits every triangle into four congruent children through the edge
/// midpoints. Halves `h_max` and increments `level`.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend((0..mesh.n_edges()).map(|e| mesh.edge_midpoint(e)));
    let mid = |a: usize, b: usize| nv + mesh.edge_index(a, b);

    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for &[a, b, c] in &mesh.triangles {
        let (mab, mbc, mca) = (mid(a, b), mid(b, c), mid(c, a));
        triangles.push([a, mab, mca]);
        triangles.push([b, mbc, mab]);
        triangles.push([c, mca, mbc]);
        triangles.push([mab, mbc, mca]);
    }
    let tag = mesh.boundary_edges.first().map_or(0, |e| e.tag);
    Mesh::from_raw(vertices, triangles, mesh.level + 1, tag)
}

/// Structured unit-square mesh with `2^level` cells per side, produced by
/// refining the two-triangle base mesh so `level` matches the refinement
/// generation.
pub fn unit_square_mesh(level: u32) -> Result<Mesh> {
    let mut mesh = build_structured_mesh(1, 1, 1.0, 1.0)?;
    for _ in 0..level {
        mesh = refine_uniform(&mesh)?;
    }
    Ok(mesh)
}

/// Angle and shape-regularity statistics over all elements.
pub fn mesh_quality(mesh: &Mesh) -> QualityReport {
    let mut min_angle = f64::INFINITY;
    let mut max_angle: f64 = 0.0;
    let mut shape: f64 = 0.0;
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.triangle_vertices(t);
        let la = dist(b, c);
        let lb = dist(c, a);
        let lc = dist(a, b);
        let angle = |opp: f64, s1: f64, s2: f64| {
            ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2))
                .clamp(-1.0, 1.0)
                .acos()
                .to_degrees()
        };
        for ang in [angle(la, lb, lc), angle(lb, lc, la), angle(lc, la, lb)] {
            min_angle = min_angle.min(ang);
            max_angle = max_angle.max(ang);
        }
        let diam = la.max(lb).max(lc);
        let area = mesh.triangle_area(t);
        let inradius = 2.0 * area / (la + lb + lc);
        shape = shape.max(diam / (2.0 * inradius));
    }
    QualityReport {
        min_angle_deg: min_angle,
        max_angle_deg: max_angle,
        shape_regularity: shape,
        is_acute: max_angle <= 90.0 + 1e-12,
    }
}

/// Reads a mesh from the plain-text listing: first line `NV NT`, then NV
/// lines `x y`, then NT lines `i j k` with 0-based vertex indices.
pub fn parse_mesh_text(text: &str) -> Result<Mesh> {
    let mut tokens = text.split_whitespace();
    let mut next_num = |what: &str| -> Result<f64> {
        tokens
            .next()
            .ok_or_else(|| Error::InvalidInput(format!("mesh file truncated: expected {what}")))?
            .parse::<f64>()
            .map_err(|e| Error::InvalidInput(format!("mesh file: bad {what}: {e}")))
    };
    let nv = next_num("vertex count")? as usize;
    let nt = next_num("triangle count")? as usize;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = next_num("vertex coordinate")?;
        let y = next_num("vertex coordinate")?;
        vertices.push([x, y]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let mut tri = [0usize; 3];
        for slot in tri.iter_mut() {
            let v = next_num("vertex index")?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::InvalidInput(format!("bad vertex index {v}")));
            }
            *slot = v as usize;
        }
        triangles.push(tri);
    }
    Mesh::from_raw(vertices, triangles, 0, 0)
}

pub fn import_mesh(path: &std::path::Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh_text(&text)
}
