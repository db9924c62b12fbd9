//! Numerical inf-sup (LBB) test for the Taylor-Hood pair.
//!
//! The constant is the square root of the smallest nonzero eigenvalue of the
//! pressure Schur complement B A^{-1} B^T measured against the pressure mass
//! matrix, with A the velocity gradient Gram matrix on the zero-trace space.
//! The constant-pressure mode sits in the kernel (velocities with zero trace
//! carry no net divergence) and is skipped, not deflated.

use crate::error::{Error, Result};
use crate::linsolve::{CholeskyFactors, TripletMatrix};
use crate::space::{assembly_rule, basis_table, ElementGeometry, Family, FunctionSpace};
use faer::Mat;
use std::sync::Arc;

struct InfSupOperators {
    gradient_gram: TripletMatrix,
    div_rows: Vec<Vec<f64>>,
    pressure_mass: Mat<f64>,
    n_free: usize,
}

fn assemble_operators(
    v_space: &Arc<FunctionSpace>,
    p_space: &Arc<FunctionSpace>,
) -> Result<InfSupOperators> {
    if v_space.family != Family::P2Vector || p_space.family != Family::P1Scalar {
        return Err(Error::InvalidInput(
            "inf-sup test expects the Taylor-Hood pair".into(),
        ));
    }
    if !Arc::ptr_eq(&v_space.mesh, &p_space.mesh) {
        return Err(Error::InvalidInput(
            "velocity and pressure spaces must share one mesh".into(),
        ));
    }
    let mut free_index = vec![None; v_space.dof_count];
    let mut n_free = 0;
    for dof in 0..v_space.dof_count {
        if !v_space.is_dirichlet(dof) {
            free_index[dof] = Some(n_free);
            n_free += 1;
        }
    }
    let np = p_space.dof_count;
    let mut gram = TripletMatrix::new(n_free, n_free);
    let mut div_rows = vec![vec![0.0; n_free]; np];
    let mut mass = Mat::<f64>::zeros(np, np);

    let mesh = &v_space.mesh;
    let rule = assembly_rule();
    let p2 = basis_table(Family::P2Vector, &rule);
    let p1 = basis_table(Family::P1Scalar, &rule);
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let vnodes = v_space.element_nodes(t);
        let pnodes = p_space.element_nodes(t);
        let mut grads = [[0.0; 2]; 6];
        for q in 0..rule.len() {
            for i in 0..6 {
                grads[i] = geo.physical_grad(p2.ref_grads[q][i]);
            }
            let wq = rule.weights[q] * geo.det_j;
            for (i, &ni) in vnodes.iter().enumerate() {
                for ci in 0..2 {
                    let Some(row) = free_index[2 * ni + ci] else {
                        continue;
                    };
                    for (j, &nj) in vnodes.iter().enumerate() {
                        if let Some(col) = free_index[2 * nj + ci] {
                            gram.push(
                                row,
                                col,
                                wq * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]),
                            );
                        }
                    }
                    for (pj, &npj) in pnodes.iter().enumerate() {
                        div_rows[npj][row] += wq * p1.values[q][pj] * grads[i][ci];
                    }
                }
            }
            for (pi, &npi) in pnodes.iter().enumerate() {
                for (pj, &npj) in pnodes.iter().enumerate() {
                    mass[(npi, npj)] += wq * p1.values[q][pi] * p1.values[q][pj];
                }
            }
        }
    }
    Ok(InfSupOperators {
        gradient_gram: gram,
        div_rows,
        pressure_mass: mass,
        n_free,
    })
}

fn symmetric_eigenvalues(mat: &Mat<f64>) -> Result<Vec<f64>> {
    let evd = mat
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::EigenSolveFailed(format!("{e:?}")))?;
    let n = mat.nrows();
    let s = evd.S();
    let mut vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}

/// Returns all generalized eigenvalues of the Schur pencil, ascending.
fn schur_spectrum(v_space: &Arc<FunctionSpace>, p_space: &Arc<FunctionSpace>) -> Result<Vec<f64>> {
    crate::linsolve::init_sequential();
    let ops = assemble_operators(v_space, p_space)?;
    let np = p_space.dof_count;
    let gram = ops.gradient_gram.build()?;
    let chol = CholeskyFactors::factor(&gram)?;

    // schur = B A^{-1} B^T, built column by column
    let mut schur = Mat::<f64>::zeros(np, np);
    for qcol in 0..np {
        let x = chol.solve(&ops.div_rows[qcol]);
        for qrow in 0..np {
            let dot: f64 = ops.div_rows[qrow]
                .iter()
                .zip(&x)
                .map(|(b, xv)| b * xv)
                .sum();
            schur[(qrow, qcol)] = dot;
        }
    }
    // symmetrize roundoff
    for i in 0..np {
        for j in 0..i {
            let avg = 0.5 * (schur[(i, j)] + schur[(j, i)]);
            schur[(i, j)] = avg;
            schur[(j, i)] = avg;
        }
    }

    // whiten by the pressure mass: C = M^{-1/2} S M^{-1/2}
    let evd = ops
        .pressure_mass
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::EigenSolveFailed(format!("{e:?}")))?;
    let lam = evd.S();
    let q = evd.U();
    for i in 0..np {
        if !(lam[i] > 0.0) {
            return Err(Error::EigenSolveFailed(
                "pressure mass matrix is not positive definite".into(),
            ));
        }
    }
    let mut half = Mat::<f64>::zeros(np, np);
    for i in 0..np {
        for j in 0..np {
            half[(i, j)] = q[(i, j)] / lam[j].sqrt();
        }
    }
    let white = half.transpose() * &schur * &half;
    let _ = ops.n_free;
    symmetric_eigenvalues(&white)
}

/// Discrete inf-sup constant of the pair: sqrt of the second-smallest
/// eigenvalue (the smallest belongs to the constant-pressure mode and is
/// zero up to roundoff).
pub fn inf_sup_constant(v_space: &Arc<FunctionSpace>, p_space: &Arc<FunctionSpace>) -> Result<f64> {
    let vals = schur_spectrum(v_space, p_space)?;
    if vals.len() < 2 {
        return Err(Error::EigenSolveFailed("pressure space too small".into()));
    }
    Ok(vals[1].max(0.0).sqrt())
}

/// The near-zero eigenvalue of the constant-pressure mode, for tests.
pub fn constant_mode_eigenvalue(
    v_space: &Arc<FunctionSpace>,
    p_space: &Arc<FunctionSpace>,
) -> Result<f64> {
    Ok(schur_spectrum(v_space, p_space)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_mesh;
    use crate::space::build_space;

    fn pair(level: u32) -> (Arc<FunctionSpace>, Arc<FunctionSpace>) {
        let mesh = Arc::new(unit_square_mesh(level).unwrap());
        (
            Arc::new(build_space(Arc::clone(&mesh), Family::P2Vector)),
            Arc::new(build_space(mesh, Family::P1Scalar)),
        )
    }

    #[test]
    fn taylor_hood_is_stable_on_a_coarse_mesh() {
        let (v, p) = pair(2);
        let beta = inf_sup_constant(&v, &p).unwrap();
        assert!(beta > 0.1, "beta = {beta}");
        assert!(beta < 1.0);
    }

    #[test]
    fn constant_pressure_mode_is_in_the_kernel() {
        let (v, p) = pair(2);
        let lam0 = constant_mode_eigenvalue(&v, &p).unwrap();
        assert!(lam0.abs() < 1e-10, "lam0 = {lam0}");
        let beta = inf_sup_constant(&v, &p).unwrap();
        assert!(beta * beta > 1e3 * lam0.abs());
    }
}
