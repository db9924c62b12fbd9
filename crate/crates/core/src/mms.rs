//! Manufactured-solution cases, convergence studies, and the relative-energy
//! perturbation experiment.
//!
//! The shipped cases share the exact fields
//!   u     = curl(psi),  psi = sin^2(pi x) sin^2(pi y) exp(-t),
//!   theta = 2 + cos(pi x) cos(pi y) exp(-t),
//!   p     = sin(pi x) cos(pi y) exp(-t),
//! which have zero velocity trace, zero heat flux through the boundary, and
//! pointwise zero divergence. Sources are closed-form: with F = sin^2(pi x),
//! G = sin^2(pi y) and a scalar viscosity nu(z), z = |Du|^2,
//!   f      = u_t + (u.grad)u + grad p - div S,
//!   div S  = nu * (Laplace u)/2-type terms + nu'(z) grad z . D,
//! assembled from the hand-written derivatives of F and G below (the
//! temperature equation gets a verification-only source g the same way).

use crate::constitutive::{ConductivityLaw, StressModel, ThetaCoeff};
use crate::diagnostics::{gronwall_fit, relative_energy};
use crate::error::{Error, Result};
use crate::scenario::{Scenario, TimeScalarFn, TimeVecFn};
use crate::space::{assembly_rule, basis_table, ElementGeometry, Family};
use crate::stepper::{discretize, run_on, RunConfig, StepState};
use std::f64::consts::PI;
use std::sync::Arc;

type GradFn = Arc<dyn Fn(f64, [f64; 2]) -> [[f64; 2]; 2] + Send + Sync>;

#[derive(Clone)]
pub struct MmsCase {
    pub name: String,
    pub model: StressModel,
    pub conductivity: ConductivityLaw,
    pub theta_floor: f64,
    pub velocity: TimeVecFn,
    /// full gradient, entry [c][d] = d u_c / d x_d
    pub velocity_gradient: GradFn,
    pub pressure: TimeScalarFn,
    pub temperature: TimeScalarFn,
    pub momentum_source: TimeVecFn,
    pub heat_source: TimeScalarFn,
}

impl MmsCase {
    pub fn into_scenario(self) -> Scenario {
        let u = Arc::clone(&self.velocity);
        let th = Arc::clone(&self.temperature);
        Scenario {
            name: self.name.clone(),
            u0: Arc::new(move |x| u(0.0, x)),
            theta0: Arc::new(move |x| th(0.0, x)),
            theta_floor: self.theta_floor,
            forcing: Some(Arc::clone(&self.momentum_source)),
            heat_source: Some(Arc::clone(&self.heat_source)),
            bound_model: Some((self.model, self.conductivity)),
        }
    }
}

/// sin^2(pi x) and its first three derivatives.
fn bump(x: f64) -> [f64; 4] {
    let s = (PI * x).sin();
    let s2 = (2.0 * PI * x).sin();
    let c2 = (2.0 * PI * x).cos();
    [
        s * s,
        PI * s2,
        2.0 * PI * PI * c2,
        -4.0 * PI * PI * PI * s2,
    ]
}

/// Scalar viscosity nu(z) with derivative, z = |Du|^2. Only models whose
/// divergence has a closed form under constant coefficients are admitted.
fn scalar_viscosity(model: &StressModel) -> Result<Box<dyn Fn(f64) -> (f64, f64) + Send + Sync>> {
    match *model {
        StressModel::PowerLaw { r, consistency } if r == 2.0 => {
            Ok(Box::new(move |_| (consistency, 0.0)))
        }
        StressModel::CarreauYasuda {
            r,
            alpha: ThetaCoeff::Constant(a),
            beta: ThetaCoeff::Constant(b),
            gamma: ThetaCoeff::Constant(g),
        } => Ok(Box::new(move |z| {
            let base = 1.0 + g * z;
            (
                a + b * base.powf(0.5 * (r - 2.0)),
                b * g * 0.5 * (r - 2.0) * base.powf(0.5 * (r - 4.0)),
            )
        })),
        _ => Err(Error::InvalidInput(
            "closed-form sources exist only for the constant-coefficient models".into(),
        )),
    }
}

struct FieldDerivatives {
    u: [f64; 2],
    du_dt: [f64; 2],
    grad: [[f64; 2]; 2],
    /// hess[c][a][b] = d^2 u_c / dx_a dx_b
    hess: [[[f64; 2]; 2]; 2],
}

fn vortex_derivatives(t: f64, p: [f64; 2]) -> FieldDerivatives {
    let e = (-t).exp();
    let [f, df, d2f, d3f] = bump(p[0]);
    let [g, dg, d2g, d3g] = bump(p[1]);
    let u = [f * dg * e, -df * g * e];
    FieldDerivatives {
        u,
        du_dt: [-u[0], -u[1]],
        grad: [[df * dg * e, f * d2g * e], [-d2f * g * e, -df * dg * e]],
        hess: [
            [[d2f * dg * e, df * d2g * e], [df * d2g * e, f * d3g * e]],
            [[-d3f * g * e, -d2f * dg * e], [-d2f * dg * e, -df * d2g * e]],
        ],
    }
}

/// f = u_t + (u.grad)u + grad p - div S for a generalized-Newtonian law
/// with scalar viscosity nu(|Du|^2).
fn momentum_source_value(
    nu_fn: &(dyn Fn(f64) -> (f64, f64) + Send + Sync),
    fd: &FieldDerivatives,
    grad_p: [f64; 2],
) -> [f64; 2] {
    let g = &fd.grad;
    let h = &fd.hess;
    let d = [
        [g[0][0], 0.5 * (g[0][1] + g[1][0])],
        [0.5 * (g[0][1] + g[1][0]), g[1][1]],
    ];
    let z = d[0][0] * d[0][0]
        + d[1][1] * d[1][1]
        + 2.0 * d[0][1] * d[0][1];
    let (nu, dnu) = nu_fn(z);
    // grad z_j = 2 sum_kl D_kl d_j D_kl with d_j D_kl = (h[k][l][j]+h[l][k][j])/2
    let mut grad_z = [0.0; 2];
    for j in 0..2 {
        let mut acc = 0.0;
        for k in 0..2 {
            for l in 0..2 {
                acc += d[k][l] * 0.5 * (h[k][l][j] + h[l][k][j]);
            }
        }
        grad_z[j] = 2.0 * acc;
    }
    let mut out = [0.0; 2];
    for i in 0..2 {
        let laplace = h[i][0][0] + h[i][1][1];
        let grad_div_i = h[0][0][i] + h[1][1][i];
        let div_d = 0.5 * (laplace + grad_div_i);
        let div_s = nu * div_d + dnu * (grad_z[0] * d[i][0] + grad_z[1] * d[i][1]);
        let conv = fd.u[0] * g[i][0] + fd.u[1] * g[i][1];
        out[i] = fd.du_dt[i] + conv + grad_p[i] - div_s;
    }
    out
}

fn heated_vortex_case(name: &str, model: StressModel) -> Result<MmsCase> {
    let conductivity = ConductivityLaw::Constant(1.0);
    let kappa = 1.0;
    let nu_fn = scalar_viscosity(&model)?;

    let velocity: TimeVecFn = Arc::new(|t, p| vortex_derivatives(t, p).u);
    let velocity_gradient: GradFn = Arc::new(|t, p| vortex_derivatives(t, p).grad);
    let pressure: TimeScalarFn =
        Arc::new(|t, p| (PI * p[0]).sin() * (PI * p[1]).cos() * (-t).exp());
    let temperature: TimeScalarFn =
        Arc::new(|t, p| 2.0 + (PI * p[0]).cos() * (PI * p[1]).cos() * (-t).exp());

    let momentum_source: TimeVecFn = Arc::new(move |t, p| {
        let fd = vortex_derivatives(t, p);
        let e = (-t).exp();
        let (cx, sx) = ((PI * p[0]).cos(), (PI * p[0]).sin());
        let (cy, sy) = ((PI * p[1]).cos(), (PI * p[1]).sin());
        let grad_p = [PI * cx * cy * e, -PI * sx * sy * e];
        momentum_source_value(nu_fn.as_ref(), &fd, grad_p)
    });

    let nu_fn2 = scalar_viscosity(&model)?;
    let heat_source: TimeScalarFn = Arc::new(move |t, p| {
        let e = (-t).exp();
        let (cx, sx) = ((PI * p[0]).cos(), (PI * p[0]).sin());
        let (cy, sy) = ((PI * p[1]).cos(), (PI * p[1]).sin());
        let dth_dt = -cx * cy * e;
        let grad_th = [-PI * sx * cy * e, -PI * cx * sy * e];
        let laplace_th = -2.0 * PI * PI * cx * cy * e;
        let fd = vortex_derivatives(t, p);
        let g = &fd.grad;
        let d01 = 0.5 * (g[0][1] + g[1][0]);
        let z = g[0][0] * g[0][0] + g[1][1] * g[1][1] + 2.0 * d01 * d01;
        let (nu, _) = nu_fn2(z);
        let conv = fd.u[0] * grad_th[0] + fd.u[1] * grad_th[1];
        dth_dt + conv - kappa * laplace_th - nu * z
    });

    Ok(MmsCase {
        name: name.into(),
        model,
        conductivity,
        theta_floor: 1.0,
        velocity,
        velocity_gradient,
        pressure,
        temperature,
        momentum_source,
        heat_source,
    })
}

pub fn mms_case(name: &str) -> Result<MmsCase> {
    match name {
        "stokes_heat" => heated_vortex_case(name, StressModel::newtonian(2.0)),
        "carreau_heat" => heated_vortex_case(
            name,
            StressModel::CarreauYasuda {
                r: 1.5,
                alpha: ThetaCoeff::Constant(1.0),
                beta: ThetaCoeff::Constant(1.0),
                gamma: ThetaCoeff::Constant(1.0),
            },
        ),
        "rest_state" => Ok(MmsCase {
            name: name.into(),
            model: StressModel::newtonian(2.0),
            conductivity: ConductivityLaw::Constant(1.0),
            theta_floor: 1.0,
            velocity: Arc::new(|_, _| [0.0, 0.0]),
            velocity_gradient: Arc::new(|_, _| [[0.0; 2]; 2]),
            pressure: Arc::new(|_, _| 0.0),
            temperature: Arc::new(|_, _| 1.0),
            momentum_source: Arc::new(|_, _| [0.0, 0.0]),
            heat_source: Arc::new(|_, _| 0.0),
        }),
        _ => Err(Error::InvalidInput(format!(
            "unknown manufactured case '{name}'; available: rest_state, stokes_heat, carreau_heat"
        ))),
    }
}

/// Errors of a discrete state against the exact fields at time t:
/// (velocity L2, velocity symmetric-gradient L2, temperature L2).
pub fn field_errors(state: &StepState, case: &MmsCase, t: f64) -> (f64, f64, f64) {
    let mesh = &state.u.space.mesh;
    let rule = assembly_rule();
    let p2 = basis_table(Family::P2Vector, &rule);
    let p1 = basis_table(Family::P1Scalar, &rule);
    let mut u_acc = 0.0;
    let mut du_acc = 0.0;
    let mut th_acc = 0.0;
    for tr in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, tr);
        let vnodes = state.u.space.element_nodes(tr);
        let snodes = state.theta.space.element_nodes(tr);
        let mut vgrads = [[0.0; 2]; 6];
        for q in 0..rule.len() {
            for i in 0..6 {
                vgrads[i] = geo.physical_grad(p2.ref_grads[q][i]);
            }
            let wq = rule.weights[q] * geo.det_j;
            let x = geo.point(rule.points[q]);
            let uh = state.u.vector_at(&vnodes, &p2.values[q]);
            let gh = state.u.vector_grad_at(&vnodes, &vgrads);
            let th = state.theta.scalar_at(&snodes, &p1.values[q]);
            let ue = (case.velocity)(t, x);
            let ge = (case.velocity_gradient)(t, x);
            let te = (case.temperature)(t, x);
            let du = [uh[0] - ue[0], uh[1] - ue[1]];
            u_acc += wq * (du[0] * du[0] + du[1] * du[1]);
            let dxx = gh[0][0] - ge[0][0];
            let dyy = gh[1][1] - ge[1][1];
            let dxy = 0.5 * ((gh[0][1] - ge[0][1]) + (gh[1][0] - ge[1][0]));
            du_acc += wq * (dxx * dxx + dyy * dyy + 2.0 * dxy * dxy);
            th_acc += wq * (th - te) * (th - te);
        }
    }
    (u_acc.sqrt(), du_acc.sqrt(), th_acc.sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    /// cells per side of the structured unit-square mesh
    pub cells: usize,
    pub tau: f64,
    pub err_u_l2: f64,
    pub err_u_h1: f64,
    pub err_theta_l2: f64,
    pub max_picard_iters: usize,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub t_final: f64,
}

impl ConvergenceTable {
    /// log2 ratios of consecutive errors.
    pub fn orders(&self, pick: impl Fn(&ConvergenceRow) -> f64) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| (pick(&w[0]) / pick(&w[1])).log2())
            .collect()
    }
}

/// Runs the case on every (cells per side, tau) pair and reports errors at
/// the final time.
pub fn run_convergence(
    case: &MmsCase,
    levels: &[(usize, f64)],
    t_final: f64,
) -> Result<ConvergenceTable> {
    if levels.len() < 3 {
        return Err(Error::InvalidInput(
            "convergence study needs at least 3 levels".into(),
        ));
    }
    let scenario = case.clone().into_scenario();
    let mut rows = Vec::with_capacity(levels.len());
    for &(cells, tau) in levels {
        let disc = crate::stepper::discretize_cells(cells)?;
        let config = RunConfig {
            mesh_level: 0,
            model: case.model,
            conductivity: case.conductivity,
            t_final,
            tau,
            penalty: crate::assembly::PenaltyParams::off(),
            picard_tol: 1e-9,
            picard_max: 50,
            damping: 1.0,
            mass_lumping: false,
        };
        let traj = run_on(&disc, &config, &scenario)?;
        let last = traj.states.last().unwrap();
        let (err_u_l2, err_u_h1, err_theta_l2) = field_errors(last, case, t_final);
        let max_picard_iters = traj
            .states
            .iter()
            .map(|s| s.picard_iters)
            .max()
            .unwrap_or(0);
        rows.push(ConvergenceRow {
            cells,
            tau,
            err_u_l2,
            err_u_h1,
            err_theta_l2,
            max_picard_iters,
        });
    }
    Ok(ConvergenceTable { rows, t_final })
}

/// Standard spatial study schedule: the mesh halves and tau scales with h^2
/// so the first-order time error stays subordinate; t_final = 0.1 keeps
/// integer step counts. Starts at a 10x10 grid, which is already inside the
/// asymptotic range for the shipped fields.
pub fn default_space_study(n_levels: usize) -> (Vec<(usize, f64)>, f64) {
    let t_final = 0.1;
    let levels = (0..n_levels)
        .map(|i| (10 << i, 0.02 / 4.0_f64.powi(i as i32)))
        .collect();
    (levels, t_final)
}

#[derive(Debug, Clone)]
pub struct WsuOutcome {
    /// (t_j, relative energy) for every grid point including t = 0.
    pub series: Vec<(f64, f64)>,
    pub e0: f64,
    pub c_est: f64,
    pub uniqueness_violation: bool,
}

/// Runs the base scenario and a perturbed twin (divergence-free velocity
/// bump, bounded temperature bump, both scaled by eps) and tracks the
/// relative energy of the perturbed run against the base run.
pub fn run_wsu_experiment(
    config: &RunConfig,
    scenario_name: &str,
    eps: f64,
) -> Result<WsuOutcome> {
    if eps < 0.0 {
        return Err(Error::InvalidInput(format!(
            "perturbation amplitude must be nonnegative, got {eps}"
        )));
    }
    let base = crate::scenario::builtin_scenario(scenario_name)?;
    let perturbed_floor = base.theta_floor - eps;
    if !(perturbed_floor > 0.0) {
        return Err(Error::InvalidInput(format!(
            "perturbed initial temperature loses positivity: floor {perturbed_floor}"
        )));
    }
    let base_u0 = Arc::clone(&base.u0);
    let base_th0 = Arc::clone(&base.theta0);
    let perturbed = Scenario {
        name: format!("{scenario_name}+eps"),
        u0: Arc::new(move |x| {
            let u = base_u0(x);
            let d = crate::scenario::trigonometric_vortex(x);
            [u[0] + eps * d[0], u[1] + eps * d[1]]
        }),
        theta0: Arc::new(move |x| {
            base_th0(x) + eps * (PI * x[0]).cos() * (PI * x[1]).cos()
        }),
        theta_floor: perturbed_floor,
        forcing: base.forcing.clone(),
        heat_source: base.heat_source.clone(),
        bound_model: base.bound_model,
    };

    let disc = discretize(config.mesh_level)?;
    let base_traj = run_on(&disc, config, &base)?;
    let pert_traj = run_on(&disc, config, &perturbed)?;

    let mut series = Vec::with_capacity(base_traj.states.len());
    for (b, p) in base_traj.states.iter().zip(&pert_traj.states) {
        let e = relative_energy(p, &b.u, &b.theta)?;
        series.push((p.t, e));
    }
    let e0 = series[0].1;
    let fit = gronwall_fit(&series, e0);
    Ok(WsuOutcome {
        series,
        e0,
        c_est: fit.c_est,
        uniqueness_violation: fit.uniqueness_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rest_state_has_zero_sources() {
        let case = mms_case("rest_state").unwrap();
        assert_eq!((case.momentum_source)(0.3, [0.4, 0.7]), [0.0, 0.0]);
        assert_eq!((case.heat_source)(0.3, [0.4, 0.7]), 0.0);
    }

    #[test]
    fn vortex_is_divergence_free_and_traceless_at_random_points() {
        let case = mms_case("stokes_heat").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let t = rng.random_range(0.0..1.0);
            let g = (case.velocity_gradient)(t, p);
            assert!((g[0][0] + g[1][1]).abs() < 1e-12, "div u at {p:?}");
        }
    }

    #[test]
    fn vortex_vanishes_on_the_boundary() {
        let case = mms_case("stokes_heat").unwrap();
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            for p in [[0.0, s], [1.0, s], [s, 0.0], [s, 1.0]] {
                let u = (case.velocity)(0.2, p);
                assert!(u[0].abs() < 1e-12 && u[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn velocity_gradient_matches_finite_differences() {
        let case = mms_case("carreau_heat").unwrap();
        let h = 1e-6;
        let (t, p) = (0.37, [0.3, 0.6]);
        let g = (case.velocity_gradient)(t, p);
        for c in 0..2 {
            for d in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[d] += h;
                pm[d] -= h;
                let fd = ((case.velocity)(t, pp)[c] - (case.velocity)(t, pm)[c]) / (2.0 * h);
                assert!((g[c][d] - fd).abs() < 1e-6, "component ({c},{d})");
            }
        }
    }

    #[test]
    fn sources_satisfy_the_pde_via_finite_differences() {
        // momentum: f - (u_t + (u.grad)u + grad p - div S) = 0, with div S
        // approximated by central differences of the stress field.
        for name in ["stokes_heat", "carreau_heat"] {
            let case = mms_case(name).unwrap();
            let nu_probe = |t: f64, p: [f64; 2]| -> [[f64; 2]; 2] {
                let g = (case.velocity_gradient)(t, p);
                let d = [
                    [g[0][0], 0.5 * (g[0][1] + g[1][0])],
                    [0.5 * (g[0][1] + g[1][0]), g[1][1]],
                ];
                let z = d[0][0] * d[0][0] + d[1][1] * d[1][1] + 2.0 * d[0][1] * d[0][1];
                let nu = match case.model {
                    StressModel::PowerLaw { consistency, .. } => consistency,
                    StressModel::CarreauYasuda { r, .. } => {
                        1.0 + (1.0 + z).powf(0.5 * (r - 2.0))
                    }
                    _ => unreachable!(),
                };
                [
                    [nu * d[0][0], nu * d[0][1]],
                    [nu * d[1][0], nu * d[1][1]],
                ]
            };
            let h = 1e-5;
            let (t, p) = (0.21, [0.35, 0.55]);
            let mut div_s = [0.0; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[j] += h;
                    pm[j] -= h;
                    div_s[i] += (nu_probe(t, pp)[i][j] - nu_probe(t, pm)[i][j]) / (2.0 * h);
                }
            }
            let fd = vortex_derivatives(t, p);
            let e = (-t).exp();
            let grad_p = [
                PI * (PI * p[0]).cos() * (PI * p[1]).cos() * e,
                -PI * (PI * p[0]).sin() * (PI * p[1]).sin() * e,
            ];
            let conv = [
                fd.u[0] * fd.grad[0][0] + fd.u[1] * fd.grad[0][1],
                fd.u[0] * fd.grad[1][0] + fd.u[1] * fd.grad[1][1],
            ];
            let f = (case.momentum_source)(t, p);
            for i in 0..2 {
                let expected = fd.du_dt[i] + conv[i] + grad_p[i] - div_s[i];
                assert!(
                    (f[i] - expected).abs() < 1e-6,
                    "{name}: component {i}: {} vs {expected}",
                    f[i]
                );
            }
        }
    }

    #[test]
    fn heat_source_consistent_with_finite_differences() {
        let case = mms_case("stokes_heat").unwrap();
        let (t, p) = (0.4, [0.3, 0.7]);
        let h = 1e-5;
        let th = |t: f64, p: [f64; 2]| (case.temperature)(t, p);
        let dth_dt = (th(t + h, p) - th(t - h, p)) / (2.0 * h);
        let mut grad = [0.0; 2];
        let mut lap = 0.0;
        for d in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[d] += h;
            pm[d] -= h;
            grad[d] = (th(t, pp) - th(t, pm)) / (2.0 * h);
            lap += (th(t, pp) - 2.0 * th(t, p) + th(t, pm)) / (h * h);
        }
        let fd = vortex_derivatives(t, p);
        let g = fd.grad;
        let d01 = 0.5 * (g[0][1] + g[1][0]);
        let z = g[0][0] * g[0][0] + g[1][1] * g[1][1] + 2.0 * d01 * d01;
        let expected = dth_dt + fd.u[0] * grad[0] + fd.u[1] * grad[1] - lap - 2.0 * z;
        let got = (case.heat_source)(t, p);
        assert!((got - expected).abs() < 1e-4, "{got} vs {expected}");
    }

    #[test]
    fn unknown_case_is_rejected() {
        assert!(mms_case("vortex_street").is_err());
    }

    #[test]
    fn convergence_needs_three_levels() {
        let case = mms_case("rest_state").unwrap();
        assert!(run_convergence(&case, &[(4, 0.05), (8, 0.05)], 0.1).is_err());
    }

    #[test]
    fn rest_state_is_exact_on_every_level() {
        let case = mms_case("rest_state").unwrap();
        let table = run_convergence(&case, &[(4, 0.05), (8, 0.05), (16, 0.05)], 0.1).unwrap();
        for row in &table.rows {
            assert!(row.err_u_l2 < 1e-10);
            assert!(row.err_u_h1 < 1e-10);
            assert!(row.err_theta_l2 < 1e-10);
        }
    }
}
