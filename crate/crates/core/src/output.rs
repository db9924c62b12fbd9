//! Diagnostics CSV and legacy-ASCII VTK writers.
//!
//! Both formats are deterministic functions of the data: identical runs
//! produce byte-identical files.

use crate::error::Result;
use crate::space::Family;
use crate::stepper::{StepState, Trajectory};
use std::fmt::Write as _;
use std::path::Path;

pub const CSV_HEADER: &str = "t,kinetic,internal,total,dissipation,penalty_dissipation,entropy,\
entropy_production,min_theta,energy_residual,picard_iters,picard_residual";

fn fnum(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn diagnostics_csv_string(trajectory: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &trajectory.records {
        let cols = [
            fnum(r.t),
            fnum(r.kinetic),
            fnum(r.internal),
            fnum(r.total),
            fnum(r.dissipation),
            fnum(r.penalty_dissipation),
            fnum(r.entropy),
            fnum(r.entropy_production),
            fnum(r.min_theta),
            fnum(r.energy_residual),
            r.picard_iters.to_string(),
            fnum(r.picard_residual),
        ];
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn write_diagnostics_csv(trajectory: &Trajectory, path: &Path) -> Result<()> {
    std::fs::write(path, diagnostics_csv_string(trajectory))?;
    Ok(())
}

/// Legacy ASCII VTK unstructured grid: triangle cells, point data with the
/// velocity sampled at vertices and the nodal temperature and pressure.
pub fn fields_vtk_string(state: &StepState, title: &str) -> String {
    let mesh = &state.u.space.mesh;
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "{title}");
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {nv} double");
    for v in &mesh.vertices {
        let _ = writeln!(out, "{} {} 0", fnum(v[0]), fnum(v[1]));
    }
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {nv}");
    out.push_str("VECTORS velocity double\n");
    debug_assert_eq!(state.u.family(), Family::P2Vector);
    for v in 0..nv {
        let _ = writeln!(
            out,
            "{} {} 0",
            fnum(state.u.coeffs[2 * v]),
            fnum(state.u.coeffs[2 * v + 1])
        );
    }
    out.push_str("SCALARS temperature double 1\nLOOKUP_TABLE default\n");
    for v in 0..nv {
        let _ = writeln!(out, "{}", fnum(state.theta.coeffs[v]));
    }
    out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for v in 0..nv {
        let _ = writeln!(out, "{}", fnum(state.p.coeffs[v]));
    }
    out
}

pub fn write_fields_vtk(state: &StepState, path: &Path, title: &str) -> Result<()> {
    std::fs::write(path, fields_vtk_string(state, title))?;
    Ok(())
}
