//! Assembly of the discrete systems: skew-symmetric convection forms, the
//! Picard-linearized momentum saddle system (velocity, pressure multiplier,
//! optional zeroth-order penalty) and the temperature system with viscous
//! dissipation on the right-hand side.
//!
//! Every integral uses the same degree-6 rule, so the algebraic identities
//! the diagnostics rely on (testing the solved systems with the solution
//! itself) hold to solver precision rather than quadrature consistency.

use crate::constitutive::{
    conductivity, effective_viscosity, stress_raw, ConductivityLaw, StressModel, SymTensor2,
};
use crate::error::{Error, Result};
use crate::linsolve::{LuFactors, LuSolveCache, TripletMatrix};
use crate::space::{
    assembly_rule, basis_table, BasisTable, DiscreteField, ElementGeometry, Family, FunctionSpace,
};
use std::sync::Arc;

/// Dof layout of the assembled momentum saddle system: free velocity dofs
/// first, then pressure dofs with one pinned to remove the constant mode.
#[derive(Debug, Clone)]
pub struct SaddleLayout {
    pub n_free_velocity: usize,
    pub n_pressure: usize,
    pub pinned_pressure: usize,
    /// velocity dof -> compact free index
    pub free_index: Vec<Option<usize>>,
}

impl SaddleLayout {
    pub fn new(v_space: &FunctionSpace, p_space: &FunctionSpace) -> Self {
        let mut free_index = vec![None; v_space.dof_count];
        let mut next = 0;
        for dof in 0..v_space.dof_count {
            if !v_space.is_dirichlet(dof) {
                free_index[dof] = Some(next);
                next += 1;
            }
        }
        SaddleLayout {
            n_free_velocity: next,
            n_pressure: p_space.dof_count,
            pinned_pressure: 0,
            free_index,
        }
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_free_velocity + self.n_pressure - 1
    }

    pub fn pressure_col(&self, p_dof: usize) -> Option<usize> {
        if p_dof == self.pinned_pressure {
            None
        } else {
            Some(self.n_free_velocity + p_dof - 1)
        }
    }
}

/// Sparse system plus right-hand side; `layout` is present for saddle
/// systems and absent for the square temperature system.
pub struct AssembledSystem {
    pub triplets: TripletMatrix,
    pub rhs: Vec<f64>,
    pub layout: Option<SaddleLayout>,
}

impl AssembledSystem {
    pub fn solve(&self) -> Result<Vec<f64>> {
        let matrix = self.triplets.build()?;
        let lu = LuFactors::factor(&matrix)?;
        Ok(lu.solve(&self.rhs))
    }

    /// Solve reusing a symbolic analysis; the cache must belong to this
    /// system's sparsity pattern.
    pub fn solve_cached(&self, cache: &mut LuSolveCache) -> Result<Vec<f64>> {
        let matrix = self.triplets.build()?;
        let lu = LuFactors::factor_cached(&matrix, cache)?;
        Ok(lu.solve(&self.rhs))
    }
}

pub struct MomentumSolution {
    pub u: DiscreteField,
    pub p: DiscreteField,
}

#[derive(Debug, Clone, Copy)]
pub struct PenaltyParams {
    /// Penalty level; `f64::INFINITY` switches the term off.
    pub k: f64,
    pub r_star: f64,
}

impl PenaltyParams {
    pub fn off() -> Self {
        PenaltyParams {
            k: f64::INFINITY,
            r_star: 6.0,
        }
    }

    pub fn weight(&self) -> f64 {
        if self.k.is_finite() {
            1.0 / self.k
        } else {
            0.0
        }
    }
}

fn check_same_space(a: &DiscreteField, b: &DiscreteField) -> Result<()> {
    if !Arc::ptr_eq(&a.space, &b.space) {
        return Err(Error::InvalidInput(
            "fields must share one function space".into(),
        ));
    }
    Ok(())
}

/// Symmetric part of the basis gradient for component `c`.
#[inline]
fn sym_basis(grad: [f64; 2], c: usize) -> SymTensor2 {
    if c == 0 {
        SymTensor2::new(grad[0], 0.0, 0.5 * grad[1])
    } else {
        SymTensor2::new(0.0, grad[1], 0.5 * grad[0])
    }
}

#[inline]
fn sym_part(g: &[[f64; 2]; 2]) -> SymTensor2 {
    SymTensor2::new(g[0][0], g[1][1], 0.5 * (g[0][1] + g[1][0]))
}

/// Skew-symmetric convection form for the momentum equation:
/// 1/2 int [ (adv . grad) v . w - (adv . grad) w . v ].
pub fn skew_convection_velocity(
    adv: &DiscreteField,
    v: &DiscreteField,
    w: &DiscreteField,
) -> Result<f64> {
    check_same_space(adv, v)?;
    check_same_space(adv, w)?;
    if adv.family() != Family::P2Vector {
        return Err(Error::InvalidInput(
            "convection needs velocity fields".into(),
        ));
    }
    let space = &adv.space;
    let rule = assembly_rule();
    let table = basis_table(Family::P2Vector, &rule);
    let mut acc = 0.0;
    for t in 0..space.mesh.n_triangles() {
        let geo = ElementGeometry::new(&space.mesh, t);
        let nodes = space.element_nodes(t);
        let mut grads = [[0.0; 2]; 6];
        for q in 0..rule.len() {
            for i in 0..6 {
                grads[i] = geo.physical_grad(table.ref_grads[q][i]);
            }
            let wq = rule.weights[q] * geo.det_j;
            let a = adv.vector_at(&nodes, &table.values[q]);
            let vv = v.vector_at(&nodes, &table.values[q]);
            let ww = w.vector_at(&nodes, &table.values[q]);
            let gv = v.vector_grad_at(&nodes, &grads);
            let gw = w.vector_grad_at(&nodes, &grads);
            let adv_gv = [
                a[0] * gv[0][0] + a[1] * gv[0][1],
                a[0] * gv[1][0] + a[1] * gv[1][1],
            ];
            let adv_gw = [
                a[0] * gw[0][0] + a[1] * gw[0][1],
                a[0] * gw[1][0] + a[1] * gw[1][1],
            ];
            acc += 0.5
                * wq
                * ((adv_gv[0] * ww[0] + adv_gv[1] * ww[1])
                    - (adv_gw[0] * vv[0] + adv_gw[1] * vv[1]));
        }
    }
    Ok(acc)
}

/// Divergence form of the convective term, - int (adv . grad) w . v; used
/// only to test equivalence with the skew form.
pub fn convection_velocity_divergence_form(
    adv: &DiscreteField,
    v: &DiscreteField,
    w: &DiscreteField,
) -> Result<f64> {
    check_same_space(adv, v)?;
    check_same_space(adv, w)?;
    let space = &adv.space;
    let rule = assembly_rule();
    let table = basis_table(Family::P2Vector, &rule);
    let mut acc = 0.0;
    for t in 0..space.mesh.n_triangles() {
        let geo = ElementGeometry::new(&space.mesh, t);
        let nodes = space.element_nodes(t);
        let mut grads = [[0.0; 2]; 6];
        for q in 0..rule.len() {
            for i in 0..6 {
                grads[i] = geo.physical_grad(table.ref_grads[q][i]);
            }
            let wq = rule.weights[q] * geo.det_j;
            let a = adv.vector_at(&nodes, &table.values[q]);
            let vv = v.vector_at(&nodes, &table.values[q]);
            let gw = w.vector_grad_at(&nodes, &grads);
            let adv_gw = [
                a[0] * gw[0][0] + a[1] * gw[0][1],
                a[0] * gw[1][0] + a[1] * gw[1][1],
            ];
            acc -= wq * (adv_gw[0] * vv[0] + adv_gw[1] * vv[1]);
        }
    }
    Ok(acc)
}

/// Skew-symmetric convection form for the temperature equation:
/// 1/2 int [ (adv . grad theta) eta - (adv . grad eta) theta ].
pub fn skew_convection_scalar(
    adv: &DiscreteField,
    theta: &DiscreteField,
    eta: &DiscreteField,
) -> Result<f64> {
    check_same_space(theta, eta)?;
    if !Arc::ptr_eq(&adv.space.mesh, &theta.space.mesh) {
        return Err(Error::InvalidInput("fields must share one mesh".into()));
    }
    if adv.family() != Family::P2Vector || theta.family() != Family::P1Scalar {
        return Err(Error::InvalidInput(
            "scalar convection needs a velocity and two scalar fields".into(),
        ));
    }
    let mesh = &adv.space.mesh;
    let rule = assembly_rule();
    let p2 = basis_table(Family::P2Vector, &rule);
    let p1 = basis_table(Family::P1Scalar, &rule);
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let vnodes = adv.space.element_nodes(t);
        let snodes = theta.space.element_nodes(t);
        let mut sgrads = [[0.0; 2]; 6];
        for q in 0..rule.len() {
            for i in 0..3 {
                sgrads[i] = geo.physical_grad(p1.ref_grads[q][i]);
            }
            let wq = rule.weights[q] * geo.det_j;
            let a = adv.vector_at(&vnodes, &p2.values[q]);
            let th = theta.scalar_at(&snodes, &p1.values[q]);
            let et = eta.scalar_at(&snodes, &p1.values[q]);
            let gth = theta.scalar_grad_at(&snodes, &sgrads);
            let get = eta.scalar_grad_at(&snodes, &sgrads);
            acc += 0.5
                * wq
                * ((a[0] * gth[0] + a[1] * gth[1]) * et - (a[0] * get[0] + a[1] * get[1]) * th);
        }
    }
    Ok(acc)
}

struct VelocityQpData {
    vals: [f64; 6],
    grads: [[f64; 2]; 6],
    sym: [[SymTensor2; 2]; 6],
}

fn velocity_qp_data(geo: &ElementGeometry, table: &BasisTable, q: usize) -> VelocityQpData {
    let mut grads = [[0.0; 2]; 6];
    let mut sym = [[SymTensor2::ZERO; 2]; 6];
    for i in 0..6 {
        grads[i] = geo.physical_grad(table.ref_grads[q][i]);
        sym[i][0] = sym_basis(grads[i], 0);
        sym[i][1] = sym_basis(grads[i], 1);
    }
    VelocityQpData {
        vals: table.values[q],
        grads,
        sym,
    }
}

fn nodal_positivity_check(theta: &DiscreteField) -> Result<()> {
    for (node, &v) in theta.coeffs.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::PositivityLost { node, value: v });
        }
    }
    Ok(())
}

/// One Picard-linearized momentum system: effective viscosity, convection
/// and penalty weight frozen at the lagged state, divergence constraint via
/// the pressure multiplier, Dirichlet rows and columns eliminated.
#[allow(clippy::too_many_arguments)]
pub fn assemble_momentum_system(
    v_space: &Arc<FunctionSpace>,
    p_space: &Arc<FunctionSpace>,
    u_prev: &DiscreteField,
    u_lag: &DiscreteField,
    theta_lag: &DiscreteField,
    tau: f64,
    f_avg: &dyn Fn([f64; 2]) -> [f64; 2],
    penalty: PenaltyParams,
    model: &StressModel,
) -> Result<AssembledSystem> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!(
            "time step must be positive, got {tau}"
        )));
    }
    if penalty.weight() > 0.0 && !(penalty.k >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "penalty level must satisfy k >= 1, got {}",
            penalty.k
        )));
    }
    nodal_positivity_check(theta_lag)?;

    let layout = SaddleLayout::new(v_space, p_space);
    let n = layout.n_unknowns();
    let mut sys = TripletMatrix::new(n, n);
    let mut rhs = vec![0.0; n];

    let mesh = &v_space.mesh;
    let rule = assembly_rule();
    let p2 = basis_table(Family::P2Vector, &rule);
    let p1 = basis_table(Family::P1Scalar, &rule);
    let pen_w = penalty.weight();

    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let vnodes = v_space.element_nodes(t);
        let pnodes = p_space.element_nodes(t);
        let mut a_local = [[0.0f64; 12]; 12];
        let mut b_local = [[0.0f64; 3]; 12];
        let mut rhs_local = [0.0f64; 12];
        for q in 0..rule.len() {
            let qp = velocity_qp_data(&geo, &p2, q);
            let wq = rule.weights[q] * geo.det_j;
            let x = geo.point(rule.points[q]);

            let adv = u_lag.vector_at(&vnodes, &qp.vals);
            let du_lag = sym_part(&u_lag.vector_grad_at(&vnodes, &qp.grads));
            let th = theta_lag.scalar_at(&pnodes, &p1.values[q]);
            let nu = effective_viscosity(model, &du_lag, th)?;
            if !nu.is_finite() {
                return Err(Error::InvalidInput(
                    "effective viscosity is not finite at a quadrature point; \
                     the model has no usable scalar form there"
                        .into(),
                ));
            }
            let pen_coeff = if pen_w > 0.0 {
                let mag = (adv[0] * adv[0] + adv[1] * adv[1]).sqrt();
                pen_w * mag.powf(penalty.r_star - 2.0)
            } else {
                0.0
            };
            let uprev = u_prev.vector_at(&vnodes, &qp.vals);
            let f = f_avg(x);
            let mass_coeff = 1.0 / tau + pen_coeff;
            let mut adv_g = [0.0f64; 6];
            for i in 0..6 {
                adv_g[i] = adv[0] * qp.grads[i][0] + adv[1] * qp.grads[i][1];
            }

            for i in 0..6 {
                for ci in 0..2 {
                    let a_idx = 2 * i + ci;
                    rhs_local[a_idx] += wq * (uprev[ci] / tau + f[ci]) * qp.vals[i];
                    for j in 0..6 {
                        for cj in 0..2 {
                            let mut entry = nu * qp.sym[i][ci].inner(&qp.sym[j][cj]);
                            if ci == cj {
                                entry += mass_coeff * qp.vals[i] * qp.vals[j]
                                    + 0.5 * (adv_g[j] * qp.vals[i] - adv_g[i] * qp.vals[j]);
                            }
                            a_local[a_idx][2 * j + cj] += wq * entry;
                        }
                    }
                    for pj in 0..3 {
                        b_local[a_idx][pj] -= wq * p1.values[q][pj] * qp.grads[i][ci];
                    }
                }
            }
        }
        for (i, &ni) in vnodes.iter().enumerate() {
            for ci in 0..2 {
                let Some(row) = layout.free_index[2 * ni + ci] else {
                    continue;
                };
                rhs[row] += rhs_local[2 * i + ci];
                for (j, &nj) in vnodes.iter().enumerate() {
                    for cj in 0..2 {
                        if let Some(col) = layout.free_index[2 * nj + cj] {
                            sys.push(row, col, a_local[2 * i + ci][2 * j + cj]);
                        }
                    }
                }
                for (pj, &npj) in pnodes.iter().enumerate() {
                    if let Some(col) = layout.pressure_col(npj) {
                        let entry = b_local[2 * i + ci][pj];
                        sys.push(row, col, entry);
                        sys.push(col, row, entry);
                    }
                }
            }
        }
    }

    Ok(AssembledSystem {
        triplets: sys,
        rhs,
        layout: Some(layout),
    })
}

/// Splits a saddle solve into velocity and mean-zero-shifted pressure fields.
pub fn split_momentum_solution(
    v_space: &Arc<FunctionSpace>,
    p_space: &Arc<FunctionSpace>,
    layout: &SaddleLayout,
    x: &[f64],
) -> MomentumSolution {
    let mut u = v_space.zero_field();
    for dof in 0..v_space.dof_count {
        if let Some(idx) = layout.free_index[dof] {
            u.coeffs[dof] = x[idx];
        }
    }
    let mut p = p_space.zero_field();
    for dof in 0..p_space.dof_count {
        if let Some(col) = layout.pressure_col(dof) {
            p.coeffs[dof] = x[col];
        }
    }
    let mean = crate::space::integral_scalar(&p) / p_space.mesh.total_area();
    for c in p.coeffs.iter_mut() {
        *c -= mean;
    }
    MomentumSolution { u, p }
}

/// One Picard-linearized temperature system: conductivity frozen at the
/// lagged temperature, convection by the new velocity, dissipation
/// S(Du_new, theta_lag) : Du_new on the right-hand side.
#[allow(clippy::too_many_arguments)]
pub fn assemble_temperature_system(
    theta_space: &Arc<FunctionSpace>,
    theta_prev: &DiscreteField,
    u_new: &DiscreteField,
    theta_lag: &DiscreteField,
    tau: f64,
    law: &ConductivityLaw,
    model: &StressModel,
    mass_lumping: bool,
    source_avg: Option<&dyn Fn([f64; 2]) -> f64>,
) -> Result<AssembledSystem> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!(
            "time step must be positive, got {tau}"
        )));
    }
    let n = theta_space.dof_count;
    let mut sys = TripletMatrix::new(n, n);
    let mut mass = TripletMatrix::new(n, n);
    let mut rhs = vec![0.0; n];

    let mesh = &theta_space.mesh;
    let rule = assembly_rule();
    let p2 = basis_table(Family::P2Vector, &rule);
    let p1 = basis_table(Family::P1Scalar, &rule);

    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let vnodes = u_new.space.element_nodes(t);
        let snodes = theta_space.element_nodes(t);
        let mut sgrads = [[0.0; 2]; 6];
        let mut vgrads = [[0.0; 2]; 6];
        let mut sys_local = [[0.0f64; 3]; 3];
        let mut mass_local = [[0.0f64; 3]; 3];
        let mut rhs_local = [0.0f64; 3];
        for q in 0..rule.len() {
            for i in 0..3 {
                sgrads[i] = geo.physical_grad(p1.ref_grads[q][i]);
            }
            for i in 0..6 {
                vgrads[i] = geo.physical_grad(p2.ref_grads[q][i]);
            }
            let wq = rule.weights[q] * geo.det_j;
            let x = geo.point(rule.points[q]);
            let uval = u_new.vector_at(&vnodes, &p2.values[q]);
            let du = sym_part(&u_new.vector_grad_at(&vnodes, &vgrads));
            let th_lag = theta_lag.scalar_at(&snodes, &p1.values[q]);
            let kappa = conductivity(law, th_lag);
            let sig = stress_raw(model, &du, th_lag)?;
            let dissipation = sig.inner(&du);
            let source = source_avg.map_or(0.0, |g| g(x));

            for i in 0..3 {
                let li = p1.values[q][i];
                let adv_gi = uval[0] * sgrads[i][0] + uval[1] * sgrads[i][1];
                rhs_local[i] += wq * (dissipation + source) * li;
                for j in 0..3 {
                    let lj = p1.values[q][j];
                    let adv_gj = uval[0] * sgrads[j][0] + uval[1] * sgrads[j][1];
                    let diffusion =
                        kappa * (sgrads[i][0] * sgrads[j][0] + sgrads[i][1] * sgrads[j][1]);
                    let convection = 0.5 * (adv_gj * li - adv_gi * lj);
                    sys_local[i][j] += wq * (diffusion + convection);
                    if mass_lumping {
                        mass_local[i][i] += wq * li * lj / tau;
                    } else {
                        mass_local[i][j] += wq * li * lj / tau;
                    }
                }
            }
        }
        for (i, &ni) in snodes.iter().enumerate() {
            rhs[ni] += rhs_local[i];
            for (j, &nj) in snodes.iter().enumerate() {
                sys.push(ni, nj, sys_local[i][j]);
                mass.push(ni, nj, mass_local[i][j]);
            }
        }
    }

    mass.accumulate_matvec(&theta_prev.coeffs, 1.0, &mut rhs);
    sys.entries.extend_from_slice(&mass.entries);

    Ok(AssembledSystem {
        triplets: sys,
        rhs,
        layout: None,
    })
}

/// Pointwise viscous dissipation S(Du, theta) : Du at every quadrature point,
/// grouped by element.
pub fn dissipation_density(
    u: &DiscreteField,
    theta: &DiscreteField,
    model: &StressModel,
) -> Result<Vec<Vec<f64>>> {
    let mesh = &u.space.mesh;
    let rule = assembly_rule();
    let p2 = basis_table(Family::P2Vector, &rule);
    let p1 = basis_table(Family::P1Scalar, &rule);
    let mut out = Vec::with_capacity(mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let vnodes = u.space.element_nodes(t);
        let snodes = theta.space.element_nodes(t);
        let mut vgrads = [[0.0; 2]; 6];
        let mut per_el = Vec::with_capacity(rule.len());
        for q in 0..rule.len() {
            for i in 0..6 {
                vgrads[i] = geo.physical_grad(p2.ref_grads[q][i]);
            }
            let du = sym_part(&u.vector_grad_at(&vnodes, &vgrads));
            let th = theta.scalar_at(&snodes, &p1.values[q]);
            let sig = stress_raw(model, &du, th)?;
            per_el.push(sig.inner(&du));
        }
        out.push(per_el);
    }
    Ok(out)
}

/// Integral of the viscous dissipation with the assembly quadrature.
pub fn integral_dissipation(
    u: &DiscreteField,
    theta: &DiscreteField,
    model: &StressModel,
) -> Result<f64> {
    let mesh = &u.space.mesh;
    let rule = assembly_rule();
    let density = dissipation_density(u, theta, model)?;
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        for q in 0..rule.len() {
            acc += rule.weights[q] * geo.det_j * density[t][q];
        }
    }
    Ok(acc)
}

/// L2 projection of a pointwise velocity onto the discretely divergence-free
/// subspace, via the saddle formulation with a multiplier.
pub fn l2_project_div_free(
    v_space: &Arc<FunctionSpace>,
    p_space: &Arc<FunctionSpace>,
    u0: &dyn Fn([f64; 2]) -> [f64; 2],
) -> Result<MomentumSolution> {
    let layout = SaddleLayout::new(v_space, p_space);
    let n = layout.n_unknowns();
    let mut sys = TripletMatrix::new(n, n);
    let mut rhs = vec![0.0; n];
    let mesh = &v_space.mesh;
    let rule = assembly_rule();
    let p2 = basis_table(Family::P2Vector, &rule);
    let p1 = basis_table(Family::P1Scalar, &rule);

    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let vnodes = v_space.element_nodes(t);
        let pnodes = p_space.element_nodes(t);
        for q in 0..rule.len() {
            let qp = velocity_qp_data(&geo, &p2, q);
            let wq = rule.weights[q] * geo.det_j;
            let x = geo.point(rule.points[q]);
            let f = u0(x);
            for (i, &ni) in vnodes.iter().enumerate() {
                for ci in 0..2 {
                    let Some(row) = layout.free_index[2 * ni + ci] else {
                        continue;
                    };
                    rhs[row] += wq * f[ci] * qp.vals[i];
                    for (j, &nj) in vnodes.iter().enumerate() {
                        let Some(col) = layout.free_index[2 * nj + ci] else {
                            continue;
                        };
                        sys.push(row, col, wq * qp.vals[i] * qp.vals[j]);
                    }
                    for (pj, &npj) in pnodes.iter().enumerate() {
                        if let Some(col) = layout.pressure_col(npj) {
                            let entry = -wq * p1.values[q][pj] * qp.grads[i][ci];
                            sys.push(row, col, entry);
                            sys.push(col, row, entry);
                        }
                    }
                }
            }
        }
    }

    let system = AssembledSystem {
        triplets: sys,
        rhs,
        layout: Some(layout),
    };
    let x = system.solve()?;
    Ok(split_momentum_solution(
        v_space,
        p_space,
        system.layout.as_ref().unwrap(),
        &x,
    ))
}

/// Discrete divergence residual max over the pressure basis of
/// |int q div u|.
pub fn divergence_residual(u: &DiscreteField, p_space: &Arc<FunctionSpace>) -> f64 {
    let mesh = &u.space.mesh;
    let rule = assembly_rule();
    let p2 = basis_table(Family::P2Vector, &rule);
    let p1 = basis_table(Family::P1Scalar, &rule);
    let mut acc = vec![0.0; p_space.dof_count];
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let vnodes = u.space.element_nodes(t);
        let pnodes = p_space.element_nodes(t);
        let mut vgrads = [[0.0; 2]; 6];
        for q in 0..rule.len() {
            for i in 0..6 {
                vgrads[i] = geo.physical_grad(p2.ref_grads[q][i]);
            }
            let g = u.vector_grad_at(&vnodes, &vgrads);
            let div = g[0][0] + g[1][1];
            let wq = rule.weights[q] * geo.det_j;
            for (pj, &npj) in pnodes.iter().enumerate() {
                acc[npj] += wq * div * p1.values[q][pj];
            }
        }
    }
    acc.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
}

/// Euclidean residual of the nonlinear discrete momentum equation at the
/// given iterate, restricted to free dofs, with the scale of its
/// right-hand side.
#[allow(clippy::too_many_arguments)]
pub fn momentum_residual(
    v_space: &Arc<FunctionSpace>,
    p_space: &Arc<FunctionSpace>,
    u_prev: &DiscreteField,
    u_cur: &DiscreteField,
    p_cur: &DiscreteField,
    theta_cur: &DiscreteField,
    tau: f64,
    f_avg: &dyn Fn([f64; 2]) -> [f64; 2],
    penalty: PenaltyParams,
    model: &StressModel,
) -> Result<(f64, f64)> {
    let layout = SaddleLayout::new(v_space, p_space);
    let mut res = vec![0.0; layout.n_free_velocity];
    let mut scale = vec![0.0; layout.n_free_velocity];
    let mesh = &v_space.mesh;
    let rule = assembly_rule();
    let p2 = basis_table(Family::P2Vector, &rule);
    let p1 = basis_table(Family::P1Scalar, &rule);
    let pen_w = penalty.weight();

    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let vnodes = v_space.element_nodes(t);
        let pnodes = p_space.element_nodes(t);
        for q in 0..rule.len() {
            let qp = velocity_qp_data(&geo, &p2, q);
            let wq = rule.weights[q] * geo.det_j;
            let x = geo.point(rule.points[q]);

            let uv = u_cur.vector_at(&vnodes, &qp.vals);
            let g = u_cur.vector_grad_at(&vnodes, &qp.grads);
            let du = sym_part(&g);
            let th = theta_cur.scalar_at(&pnodes, &p1.values[q]);
            let sig = stress_raw(model, &du, th)?;
            let pval = p_cur.scalar_at(&pnodes, &p1.values[q]);
            let uprev = u_prev.vector_at(&vnodes, &qp.vals);
            let f = f_avg(x);
            let pen_coeff = if pen_w > 0.0 {
                let mag = (uv[0] * uv[0] + uv[1] * uv[1]).sqrt();
                pen_w * mag.powf(penalty.r_star - 2.0)
            } else {
                0.0
            };
            let adv_g = [
                uv[0] * g[0][0] + uv[1] * g[0][1],
                uv[0] * g[1][0] + uv[1] * g[1][1],
            ];

            for (i, &ni) in vnodes.iter().enumerate() {
                let adv_gi = uv[0] * qp.grads[i][0] + uv[1] * qp.grads[i][1];
                for ci in 0..2 {
                    let Some(row) = layout.free_index[2 * ni + ci] else {
                        continue;
                    };
                    let conv = 0.5 * (adv_g[ci] * qp.vals[i] - adv_gi * uv[ci]);
                    res[row] += wq
                        * ((uv[ci] - uprev[ci]) / tau * qp.vals[i]
                            + sig.inner(&qp.sym[i][ci])
                            + pen_coeff * uv[ci] * qp.vals[i]
                            + conv
                            - pval * qp.grads[i][ci]
                            - f[ci] * qp.vals[i]);
                    scale[row] += wq * (uprev[ci] / tau + f[ci]) * qp.vals[i];
                }
            }
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok((norm(&res), norm(&scale)))
}

/// Euclidean residual of the nonlinear discrete temperature equation at the
/// given iterate, with the scale of its right-hand side.
#[allow(clippy::too_many_arguments)]
pub fn temperature_residual(
    theta_space: &Arc<FunctionSpace>,
    theta_prev: &DiscreteField,
    u_cur: &DiscreteField,
    theta_cur: &DiscreteField,
    tau: f64,
    law: &ConductivityLaw,
    model: &StressModel,
    mass_lumping: bool,
    source_avg: Option<&dyn Fn([f64; 2]) -> f64>,
) -> Result<(f64, f64)> {
    let n = theta_space.dof_count;
    let mut res = vec![0.0; n];
    let mut scale = vec![0.0; n];
    let mut lumped = vec![0.0; n];
    let mesh = &theta_space.mesh;
    let rule = assembly_rule();
    let p2 = basis_table(Family::P2Vector, &rule);
    let p1 = basis_table(Family::P1Scalar, &rule);

    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let vnodes = u_cur.space.element_nodes(t);
        let snodes = theta_space.element_nodes(t);
        let mut sgrads = [[0.0; 2]; 6];
        let mut vgrads = [[0.0; 2]; 6];
        for q in 0..rule.len() {
            for i in 0..3 {
                sgrads[i] = geo.physical_grad(p1.ref_grads[q][i]);
            }
            for i in 0..6 {
                vgrads[i] = geo.physical_grad(p2.ref_grads[q][i]);
            }
            let wq = rule.weights[q] * geo.det_j;
            let x = geo.point(rule.points[q]);
            let uval = u_cur.vector_at(&vnodes, &p2.values[q]);
            let du = sym_part(&u_cur.vector_grad_at(&vnodes, &vgrads));
            let th = theta_cur.scalar_at(&snodes, &p1.values[q]);
            let gth = theta_cur.scalar_grad_at(&snodes, &sgrads);
            let thp = theta_prev.scalar_at(&snodes, &p1.values[q]);
            let kappa = conductivity(law, th);
            let sig = stress_raw(model, &du, th)?;
            let dissipation = sig.inner(&du);
            let source = source_avg.map_or(0.0, |gfun| gfun(x));
            let adv_gth = uval[0] * gth[0] + uval[1] * gth[1];

            for (i, &ni) in snodes.iter().enumerate() {
                let li = p1.values[q][i];
                let adv_gi = uval[0] * sgrads[i][0] + uval[1] * sgrads[i][1];
                let conv = 0.5 * (adv_gth * li - adv_gi * th);
                res[ni] += wq
                    * (kappa * (gth[0] * sgrads[i][0] + gth[1] * sgrads[i][1]) + conv
                        - (dissipation + source) * li);
                scale[ni] += wq * (thp / tau + dissipation + source) * li;
                if mass_lumping {
                    lumped[ni] += wq * li;
                } else {
                    res[ni] += wq * (th - thp) / tau * li;
                }
            }
        }
    }
    if mass_lumping {
        for a in 0..n {
            res[a] += lumped[a] * (theta_cur.coeffs[a] - theta_prev.coeffs[a]) / tau;
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok((norm(&res), norm(&scale)))
}
