//! Conforming finite element spaces and fields.
//!
//! The velocity lives in vector P2 with zero trace, pressure and temperature
//! share scalar P1 on the same mesh. Sharing the P1 space is what makes the
//! scalar convection form vanish against constants for discretely
//! divergence-free velocities, which in turn makes the internal-energy
//! bookkeeping exact.

use crate::error::{Error, Result};
use crate::linsolve::{CholeskyFactors, TripletMatrix};
use crate::mesh::Mesh;
use crate::quadrature::{quadrature_rule, QuadratureRule};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    P2Vector,
    P1Scalar,
}

#[derive(Debug, Clone)]
pub struct FunctionSpace {
    pub mesh: Arc<Mesh>,
    pub family: Family,
    pub dof_count: usize,
    /// Velocity dofs sitting on the boundary (empty for P1).
    pub dirichlet_dofs: Vec<usize>,
    dirichlet_mask: Vec<bool>,
}

/// Coefficient vector over a [`FunctionSpace`].
#[derive(Debug, Clone)]
pub struct DiscreteField {
    pub space: Arc<FunctionSpace>,
    pub coeffs: Vec<f64>,
}

/// Quadrature degree used for every integral in the artifact: exact for the
/// polynomial integrands that appear in the bilinear and trilinear forms.
pub const ASSEMBLY_QUAD_DEGREE: u32 = 6;

pub fn assembly_rule() -> QuadratureRule {
    quadrature_rule(ASSEMBLY_QUAD_DEGREE).expect("builtin degree")
}

pub fn build_space(mesh: Arc<Mesh>, family: Family) -> FunctionSpace {
    let (dof_count, dirichlet_dofs) = match family {
        Family::P1Scalar => (mesh.n_vertices(), Vec::new()),
        Family::P2Vector => {
            let nv = mesh.n_vertices();
            let count = 2 * (nv + mesh.n_edges());
            let mut dofs = Vec::new();
            for v in 0..nv {
                if mesh.is_boundary_vertex(v) {
                    dofs.push(2 * v);
                    dofs.push(2 * v + 1);
                }
            }
            for e in 0..mesh.n_edges() {
                if mesh.is_boundary_edge(e) {
                    dofs.push(2 * (nv + e));
                    dofs.push(2 * (nv + e) + 1);
                }
            }
            dofs.sort_unstable();
            (count, dofs)
        }
    };
    let mut dirichlet_mask = vec![false; dof_count];
    for &d in &dirichlet_dofs {
        dirichlet_mask[d] = true;
    }
    FunctionSpace {
        mesh,
        family,
        dof_count,
        dirichlet_dofs,
        dirichlet_mask,
    }
}

impl FunctionSpace {
    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.dirichlet_mask[dof]
    }

    pub fn n_scalar_nodes(&self) -> usize {
        match self.family {
            Family::P1Scalar => self.mesh.n_vertices(),
            Family::P2Vector => self.mesh.n_vertices() + self.mesh.n_edges(),
        }
    }

    /// Scalar nodes of element `t` in local order (vertices, then midpoints
    /// of edges 01, 12, 20 for P2).
    pub fn element_nodes(&self, t: usize) -> Vec<usize> {
        let [a, b, c] = self.mesh.triangles[t];
        match self.family {
            Family::P1Scalar => vec![a, b, c],
            Family::P2Vector => {
                let nv = self.mesh.n_vertices();
                vec![
                    a,
                    b,
                    c,
                    nv + self.mesh.edge_index(a, b),
                    nv + self.mesh.edge_index(b, c),
                    nv + self.mesh.edge_index(c, a),
                ]
            }
        }
    }

    pub fn node_position(&self, node: usize) -> [f64; 2] {
        let nv = self.mesh.n_vertices();
        if node < nv {
            self.mesh.vertices[node]
        } else {
            self.mesh.edge_midpoint(node - nv)
        }
    }

    pub fn zero_field(self: &Arc<Self>) -> DiscreteField {
        DiscreteField {
            space: Arc::clone(self),
            coeffs: vec![0.0; self.dof_count],
        }
    }
}

/// Reference-element basis values and gradients at the points of a rule.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub n_basis: usize,
    /// values[q][i]
    pub values: Vec<[f64; 6]>,
    /// gradients w.r.t. reference coordinates (xi, eta); grads[q][i]
    pub ref_grads: Vec<[[f64; 2]; 6]>,
}

/// lambda = (1 - xi - eta, xi, eta); local P2 nodes: 3 vertices then
/// midpoints of edges (0,1), (1,2), (2,0).
pub fn basis_table(family: Family, rule: &QuadratureRule) -> BasisTable {
    let n_basis = match family {
        Family::P1Scalar => 3,
        Family::P2Vector => 6,
    };
    const GRAD_L: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    let mut values = Vec::with_capacity(rule.len());
    let mut ref_grads = Vec::with_capacity(rule.len());
    for p in &rule.points {
        let l = *p;
        let mut vals = [0.0; 6];
        let mut grads = [[0.0; 2]; 6];
        match family {
            Family::P1Scalar => {
                for i in 0..3 {
                    vals[i] = l[i];
                    grads[i] = GRAD_L[i];
                }
            }
            Family::P2Vector => {
                for i in 0..3 {
                    vals[i] = l[i] * (2.0 * l[i] - 1.0);
                    grads[i] = [
                        (4.0 * l[i] - 1.0) * GRAD_L[i][0],
                        (4.0 * l[i] - 1.0) * GRAD_L[i][1],
                    ];
                }
                let pairs = [(0usize, 1usize), (1, 2), (2, 0)];
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    vals[3 + k] = 4.0 * l[i] * l[j];
                    grads[3 + k] = [
                        4.0 * (l[i] * GRAD_L[j][0] + l[j] * GRAD_L[i][0]),
                        4.0 * (l[i] * GRAD_L[j][1] + l[j] * GRAD_L[i][1]),
                    ];
                }
            }
        }
        values.push(vals);
        ref_grads.push(grads);
    }
    BasisTable {
        n_basis,
        values,
        ref_grads,
    }
}

/// Affine geometry of one element.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub det_j: f64,
    /// inverse transpose of the Jacobian; maps reference gradients to
    /// physical gradients.
    pub inv_jt: [[f64; 2]; 2],
    pub p0: [f64; 2],
    pub jac: [[f64; 2]; 2],
}

impl ElementGeometry {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let [a, b, c] = mesh.triangle_vertices(t);
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det_j = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_jt = [
            [jac[1][1] / det_j, -jac[1][0] / det_j],
            [-jac[0][1] / det_j, jac[0][0] / det_j],
        ];
        ElementGeometry {
            det_j,
            inv_jt,
            p0: a,
            jac,
        }
    }

    #[inline]
    pub fn physical_grad(&self, ref_grad: [f64; 2]) -> [f64; 2] {
        [
            self.inv_jt[0][0] * ref_grad[0] + self.inv_jt[0][1] * ref_grad[1],
            self.inv_jt[1][0] * ref_grad[0] + self.inv_jt[1][1] * ref_grad[1],
        ]
    }

    #[inline]
    pub fn point(&self, lambda: [f64; 3]) -> [f64; 2] {
        [
            self.p0[0] + self.jac[0][0] * lambda[1] + self.jac[0][1] * lambda[2],
            self.p0[1] + self.jac[1][0] * lambda[1] + self.jac[1][1] * lambda[2],
        ]
    }
}

impl DiscreteField {
    pub fn family(&self) -> Family {
        self.space.family
    }

    /// Scalar value at a quadrature point of element `t`.
    pub fn scalar_at(&self, nodes: &[usize], basis: &[f64; 6]) -> f64 {
        debug_assert_eq!(self.family(), Family::P1Scalar);
        nodes
            .iter()
            .enumerate()
            .map(|(i, &n)| self.coeffs[n] * basis[i])
            .sum()
    }

    pub fn vector_at(&self, nodes: &[usize], basis: &[f64; 6]) -> [f64; 2] {
        debug_assert_eq!(self.family(), Family::P2Vector);
        let mut v = [0.0; 2];
        for (i, &n) in nodes.iter().enumerate() {
            v[0] += self.coeffs[2 * n] * basis[i];
            v[1] += self.coeffs[2 * n + 1] * basis[i];
        }
        v
    }

    /// Physical gradient of a scalar field; `phys_grads[i]` holds the
    /// physical gradient of local basis i.
    pub fn scalar_grad_at(&self, nodes: &[usize], phys_grads: &[[f64; 2]; 6]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (i, &n) in nodes.iter().enumerate() {
            g[0] += self.coeffs[n] * phys_grads[i][0];
            g[1] += self.coeffs[n] * phys_grads[i][1];
        }
        g
    }

    /// Full velocity gradient; entry [c][d] = d u_c / d x_d.
    pub fn vector_grad_at(&self, nodes: &[usize], phys_grads: &[[f64; 2]; 6]) -> [[f64; 2]; 2] {
        let mut g = [[0.0; 2]; 2];
        for (i, &n) in nodes.iter().enumerate() {
            for c in 0..2 {
                let coeff = self.coeffs[2 * n + c];
                g[c][0] += coeff * phys_grads[i][0];
                g[c][1] += coeff * phys_grads[i][1];
            }
        }
        g
    }

    pub fn zero_dirichlet(&mut self) {
        for &d in &self.space.dirichlet_dofs {
            self.coeffs[d] = 0.0;
        }
    }

    pub fn min_nodal(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn interpolate_scalar(
    space: &Arc<FunctionSpace>,
    f: impl Fn([f64; 2]) -> f64,
) -> Result<DiscreteField> {
    if space.family != Family::P1Scalar {
        return Err(Error::InvalidInput(
            "scalar interpolation requires a P1 space".into(),
        ));
    }
    let coeffs = (0..space.dof_count)
        .map(|v| f(space.mesh.vertices[v]))
        .collect();
    Ok(DiscreteField {
        space: Arc::clone(space),
        coeffs,
    })
}

pub fn interpolate_vector(
    space: &Arc<FunctionSpace>,
    f: impl Fn([f64; 2]) -> [f64; 2],
) -> Result<DiscreteField> {
    if space.family != Family::P2Vector {
        return Err(Error::InvalidInput(
            "vector interpolation requires the P2 space".into(),
        ));
    }
    let n_nodes = space.n_scalar_nodes();
    let mut coeffs = vec![0.0; space.dof_count];
    for node in 0..n_nodes {
        let v = f(space.node_position(node));
        coeffs[2 * node] = v[0];
        coeffs[2 * node + 1] = v[1];
    }
    Ok(DiscreteField {
        space: Arc::clone(space),
        coeffs,
    })
}

/// Consistent mass matrix of the space (scalar P1 or vector P2).
pub fn mass_matrix(space: &FunctionSpace) -> TripletMatrix {
    let rule = assembly_rule();
    let table = basis_table(space.family, &rule);
    let mut m = TripletMatrix::new(space.dof_count, space.dof_count);
    for t in 0..space.mesh.n_triangles() {
        let geo = ElementGeometry::new(&space.mesh, t);
        let nodes = space.element_nodes(t);
        for q in 0..rule.len() {
            let w = rule.weights[q] * geo.det_j;
            let vals = &table.values[q];
            for (i, &ni) in nodes.iter().enumerate() {
                for (j, &nj) in nodes.iter().enumerate() {
                    let entry = w * vals[i] * vals[j];
                    match space.family {
                        Family::P1Scalar => m.push(ni, nj, entry),
                        Family::P2Vector => {
                            m.push(2 * ni, 2 * nj, entry);
                            m.push(2 * ni + 1, 2 * nj + 1, entry);
                        }
                    }
                }
            }
        }
    }
    m
}

fn project_rhs_scalar(space: &FunctionSpace, f: &dyn Fn([f64; 2]) -> f64) -> Vec<f64> {
    let rule = assembly_rule();
    let table = basis_table(space.family, &rule);
    let mut rhs = vec![0.0; space.dof_count];
    for t in 0..space.mesh.n_triangles() {
        let geo = ElementGeometry::new(&space.mesh, t);
        let nodes = space.element_nodes(t);
        for q in 0..rule.len() {
            let w = rule.weights[q] * geo.det_j;
            let x = geo.point(rule.points[q]);
            let fx = f(x);
            for (i, &ni) in nodes.iter().enumerate() {
                rhs[ni] += w * fx * table.values[q][i];
            }
        }
    }
    rhs
}

/// L2 projection of a pointwise scalar function onto a P1 space. The mass
/// solve is SPD; a singular factorization signals a broken dof map. The
/// projection is checked for L2 stability against the quadrature norm of
/// the input (it contracts in that norm by construction, so a violation
/// also signals a broken mass matrix).
pub fn l2_project_scalar(
    space: &Arc<FunctionSpace>,
    f: impl Fn([f64; 2]) -> f64,
) -> Result<DiscreteField> {
    if space.family != Family::P1Scalar {
        return Err(Error::InvalidInput(
            "scalar projection requires a P1 space".into(),
        ));
    }
    let m = mass_matrix(space).build()?;
    let chol = CholeskyFactors::factor(&m)?;
    let rhs = project_rhs_scalar(space, &f);
    let coeffs = chol.solve(&rhs);
    let projected = DiscreteField {
        space: Arc::clone(space),
        coeffs,
    };
    let norm_pf = norm(&projected, NormKind::L2)?;
    let norm_f = l2_norm_function(&space.mesh, f);
    if norm_pf > norm_f + 1e-10 {
        return Err(Error::LinearSolveFailed(format!(
            "projection is not L2-stable ({norm_pf} > {norm_f}); mass matrix is broken"
        )));
    }
    Ok(projected)
}

/// L2 projection of a field already living on the same mesh (possibly in a
/// different space) onto `space`.
pub fn l2_project_discrete(
    space: &Arc<FunctionSpace>,
    field: &DiscreteField,
) -> Result<DiscreteField> {
    if !Arc::ptr_eq(&space.mesh, &field.space.mesh) {
        return Err(Error::InvalidInput(
            "projection source must live on the same mesh".into(),
        ));
    }
    if space.family != Family::P1Scalar || field.family() != Family::P1Scalar {
        return Err(Error::InvalidInput(
            "discrete projection implemented for scalar fields".into(),
        ));
    }
    let m = mass_matrix(space).build()?;
    let chol = CholeskyFactors::factor(&m)?;
    let rule = assembly_rule();
    let table = basis_table(space.family, &rule);
    let src_table = basis_table(field.family(), &rule);
    let mut rhs = vec![0.0; space.dof_count];
    for t in 0..space.mesh.n_triangles() {
        let geo = ElementGeometry::new(&space.mesh, t);
        let nodes = space.element_nodes(t);
        let src_nodes = field.space.element_nodes(t);
        for q in 0..rule.len() {
            let w = rule.weights[q] * geo.det_j;
            let fx = field.scalar_at(&src_nodes, &src_table.values[q]);
            for (i, &ni) in nodes.iter().enumerate() {
                rhs[ni] += w * fx * table.values[q][i];
            }
        }
    }
    let coeffs = chol.solve(&rhs);
    Ok(DiscreteField {
        space: Arc::clone(space),
        coeffs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    H1Semi,
    /// L2 norm of the symmetric gradient (velocity fields).
    SymGrad,
    LinfNodal,
    Lp(f64),
}

pub fn norm(field: &DiscreteField, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::LinfNodal => {
            return Ok(field
                .coeffs
                .iter()
                .fold(0.0_f64, |acc, &c| acc.max(c.abs())));
        }
        NormKind::Lp(p) if !(p >= 1.0 && p.is_finite()) => {
            return Err(Error::InvalidInput(format!(
                "Lp norm requires p in [1, inf), got {p}"
            )));
        }
        NormKind::SymGrad if field.family() != Family::P2Vector => {
            return Err(Error::InvalidInput(
                "symmetric-gradient norm applies to velocity fields".into(),
            ));
        }
        _ => {}
    }
    let space = &field.space;
    let rule = assembly_rule();
    let table = basis_table(space.family, &rule);
    let mut acc = 0.0;
    for t in 0..space.mesh.n_triangles() {
        let geo = ElementGeometry::new(&space.mesh, t);
        let nodes = space.element_nodes(t);
        let mut phys_grads = [[0.0; 2]; 6];
        for q in 0..rule.len() {
            let w = rule.weights[q] * geo.det_j;
            match kind {
                NormKind::L2 => {
                    let v2 = match space.family {
                        Family::P1Scalar => {
                            let v = field.scalar_at(&nodes, &table.values[q]);
                            v * v
                        }
                        Family::P2Vector => {
                            let v = field.vector_at(&nodes, &table.values[q]);
                            v[0] * v[0] + v[1] * v[1]
                        }
                    };
                    acc += w * v2;
                }
                NormKind::Lp(p) => {
                    let mag = match space.family {
                        Family::P1Scalar => field.scalar_at(&nodes, &table.values[q]).abs(),
                        Family::P2Vector => {
                            let v = field.vector_at(&nodes, &table.values[q]);
                            (v[0] * v[0] + v[1] * v[1]).sqrt()
                        }
                    };
                    acc += w * mag.powf(p);
                }
                NormKind::H1Semi | NormKind::SymGrad => {
                    for i in 0..table.n_basis {
                        phys_grads[i] = geo.physical_grad(table.ref_grads[q][i]);
                    }
                    let g2 = match space.family {
                        Family::P1Scalar => {
                            let g = field.scalar_grad_at(&nodes, &phys_grads);
                            g[0] * g[0] + g[1] * g[1]
                        }
                        Family::P2Vector => {
                            let g = field.vector_grad_at(&nodes, &phys_grads);
                            if kind == NormKind::SymGrad {
                                let dxx = g[0][0];
                                let dyy = g[1][1];
                                let dxy = 0.5 * (g[0][1] + g[1][0]);
                                dxx * dxx + dyy * dyy + 2.0 * dxy * dxy
                            } else {
                                g[0][0] * g[0][0]
                                    + g[0][1] * g[0][1]
                                    + g[1][0] * g[1][0]
                                    + g[1][1] * g[1][1]
                            }
                        }
                    };
                    acc += w * g2;
                }
                NormKind::LinfNodal => unreachable!(),
            }
        }
    }
    match kind {
        NormKind::Lp(p) => Ok(acc.powf(1.0 / p)),
        _ => Ok(acc.sqrt()),
    }
}

/// Integral of a scalar P1 field over the domain.
pub fn integral_scalar(field: &DiscreteField) -> f64 {
    let space = &field.space;
    let rule = assembly_rule();
    let table = basis_table(space.family, &rule);
    let mut acc = 0.0;
    for t in 0..space.mesh.n_triangles() {
        let geo = ElementGeometry::new(&space.mesh, t);
        let nodes = space.element_nodes(t);
        for q in 0..rule.len() {
            acc += rule.weights[q] * geo.det_j * field.scalar_at(&nodes, &table.values[q]);
        }
    }
    acc
}

/// L2 norm of a pointwise function computed with the assembly quadrature.
pub fn l2_norm_function(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> f64 {
    let rule = assembly_rule();
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        for q in 0..rule.len() {
            let x = geo.point(rule.points[q]);
            let v = f(x);
            acc += rule.weights[q] * geo.det_j * v * v;
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, refine_uniform, unit_square_mesh};

    fn p1(mesh: Arc<Mesh>) -> Arc<FunctionSpace> {
        Arc::new(build_space(mesh, Family::P1Scalar))
    }

    fn p2(mesh: Arc<Mesh>) -> Arc<FunctionSpace> {
        Arc::new(build_space(mesh, Family::P2Vector))
    }

    #[test]
    fn dof_counts_on_unit_cell() {
        let mesh = Arc::new(build_structured_mesh(1, 1, 1.0, 1.0).unwrap());
        assert_eq!(p1(Arc::clone(&mesh)).dof_count, 4);
        assert_eq!(p2(mesh).dof_count, 18);
    }

    #[test]
    fn dirichlet_dofs_on_unit_cell() {
        // every node except the diagonal midpoint sits on the boundary: the
        // hypotenuse joins two boundary vertices but is an interior edge, so
        // 16 of the 18 velocity dofs are constrained.
        let mesh = Arc::new(build_structured_mesh(1, 1, 1.0, 1.0).unwrap());
        let space = p2(mesh);
        assert_eq!(space.dirichlet_dofs.len(), 16);
        let free: Vec<usize> = (0..space.dof_count)
            .filter(|&d| !space.is_dirichlet(d))
            .collect();
        assert_eq!(free.len(), 2);
        let node = free[0] / 2;
        let pos = space.node_position(node);
        assert!((pos[0] - 0.5).abs() < 1e-15 && (pos[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interpolation_reproduces_constants_and_linears() {
        let mesh = Arc::new(build_structured_mesh(4, 4, 1.0, 1.0).unwrap());
        let space = p1(mesh);
        let c = interpolate_scalar(&space, |_| 3.25).unwrap();
        assert!(c.coeffs.iter().all(|&v| (v - 3.25).abs() < 1e-15));
        let lin = interpolate_scalar(&space, |x| 2.0 * x[0] - x[1] + 0.5).unwrap();
        // linear functions are reproduced exactly: compare L2 norms
        let err = {
            let diff = DiscreteField {
                space: Arc::clone(&lin.space),
                coeffs: lin
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(v, &cv)| {
                        let x = lin.space.mesh.vertices[v];
                        cv - (2.0 * x[0] - x[1] + 0.5)
                    })
                    .collect(),
            };
            norm(&diff, NormKind::L2).unwrap()
        };
        assert!(err < 1e-14);
    }

    #[test]
    fn p2_interpolation_exact_for_quadratics() {
        let mesh = Arc::new(build_structured_mesh(2, 2, 1.0, 1.0).unwrap());
        let space = p2(mesh);
        let f = |x: [f64; 2]| [x[0] * x[0] + x[1], x[0] * x[1]];
        let field = interpolate_vector(&space, f).unwrap();
        // check at interior quadrature points of each element
        let rule = assembly_rule();
        let table = basis_table(Family::P2Vector, &rule);
        for t in 0..space.mesh.n_triangles() {
            let geo = ElementGeometry::new(&space.mesh, t);
            let nodes = space.element_nodes(t);
            for q in 0..rule.len() {
                let x = geo.point(rule.points[q]);
                let exact = f(x);
                let got = field.vector_at(&nodes, &table.values[q]);
                assert!((got[0] - exact[0]).abs() < 1e-13);
                assert!((got[1] - exact[1]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn interpolation_error_decays_second_order() {
        let pi = std::f64::consts::PI;
        let f = |x: [f64; 2]| (pi * x[0]).sin() * (pi * x[1]).sin();
        let mut errs = Vec::new();
        let mut mesh = unit_square_mesh(3).unwrap();
        for _ in 0..3 {
            let m = Arc::new(mesh.clone());
            let space = p1(Arc::clone(&m));
            let field = interpolate_scalar(&space, f).unwrap();
            // quadrature of (I_h f - f)^2 with the degree-6 rule
            let rule = assembly_rule();
            let table = basis_table(Family::P1Scalar, &rule);
            let mut acc = 0.0;
            for t in 0..m.n_triangles() {
                let geo = ElementGeometry::new(&m, t);
                let nodes = space.element_nodes(t);
                for q in 0..rule.len() {
                    let x = geo.point(rule.points[q]);
                    let d = field.scalar_at(&nodes, &table.values[q]) - f(x);
                    acc += rule.weights[q] * geo.det_j * d * d;
                }
            }
            errs.push(acc.sqrt());
            mesh = refine_uniform(&mesh).unwrap();
        }
        for k in 0..errs.len() - 1 {
            let ratio = errs[k] / errs[k + 1];
            assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn projection_is_idempotent_and_recovers_members() {
        let mesh = Arc::new(build_structured_mesh(4, 4, 1.0, 1.0).unwrap());
        let space = p1(mesh);
        let member = interpolate_scalar(&space, |x| 1.0 + x[0] - 0.5 * x[1]).unwrap();
        let projected = l2_project_discrete(&space, &member).unwrap();
        let max_diff = member
            .coeffs
            .iter()
            .zip(&projected.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(max_diff < 1e-12);
        let twice = l2_project_discrete(&space, &projected).unwrap();
        let max_diff2 = twice
            .coeffs
            .iter()
            .zip(&projected.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(max_diff2 < 1e-12);
    }

    #[test]
    fn projection_of_zero_is_zero() {
        let mesh = Arc::new(build_structured_mesh(2, 2, 1.0, 1.0).unwrap());
        let space = p1(mesh);
        let z = l2_project_scalar(&space, |_| 0.0).unwrap();
        assert!(z.coeffs.iter().all(|&c| c.abs() < 1e-14));
    }

    #[test]
    fn projection_is_l2_stable() {
        let mesh = Arc::new(build_structured_mesh(8, 8, 1.0, 1.0).unwrap());
        let space = p1(Arc::clone(&mesh));
        let f = |x: [f64; 2]| (x[0] + x[1]).exp();
        let pf = l2_project_scalar(&space, f).unwrap();
        let norm_pf = norm(&pf, NormKind::L2).unwrap();
        let norm_f = l2_norm_function(&mesh, f);
        assert!(norm_pf <= norm_f + 1e-10, "{norm_pf} vs {norm_f}");
    }

    #[test]
    fn norm_examples() {
        let mesh = Arc::new(build_structured_mesh(4, 4, 1.0, 1.0).unwrap());
        let space = p1(mesh);
        let zero = space.zero_field();
        for kind in [
            NormKind::L2,
            NormKind::H1Semi,
            NormKind::LinfNodal,
            NormKind::Lp(3.0),
        ] {
            assert_eq!(norm(&zero, kind).unwrap(), 0.0);
        }
        let c = interpolate_scalar(&space, |_| -2.0).unwrap();
        assert!((norm(&c, NormKind::L2).unwrap() - 2.0).abs() < 1e-13);
        let x = interpolate_scalar(&space, |p| p[0]).unwrap();
        assert!((norm(&x, NormKind::L2).unwrap() - 1.0 / 3.0_f64.sqrt()).abs() < 1e-12);
        assert!(norm(&x, NormKind::Lp(0.5)).is_err());
    }

    #[test]
    fn sym_grad_norm_of_linear_field() {
        let mesh = Arc::new(build_structured_mesh(2, 2, 1.0, 1.0).unwrap());
        let space = p2(mesh);
        // u = (x, -y): Du = diag(1,-1), |Du|^2 = 2 everywhere
        let u = interpolate_vector(&space, |x| [x[0], -x[1]]).unwrap();
        let n = norm(&u, NormKind::SymGrad).unwrap();
        assert!((n - 2.0_f64.sqrt()).abs() < 1e-13);
    }
}
