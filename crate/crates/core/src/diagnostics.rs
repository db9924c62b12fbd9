//! Runtime diagnostics evaluated on discrete trajectories: the per-step
//! energy identity, entropy production and the entropy-inequality residual,
//! nodal temperature positivity, relative energy between two solutions, the
//! Gronwall-constant fit, and the a-priori monitor table.

use crate::assembly::{integral_dissipation, PenaltyParams};
use crate::constitutive::{conductivity, stress_raw, SymTensor2};
use crate::error::{Error, Result};
use crate::space::{
    assembly_rule, basis_table, integral_scalar, norm, DiscreteField, ElementGeometry, Family,
    NormKind,
};
use crate::stepper::{RunConfig, StepState, Trajectory};

/// Per-step scalar diagnostics; one record per trajectory state.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub kinetic: f64,
    pub internal: f64,
    pub total: f64,
    pub dissipation: f64,
    pub penalty_dissipation: f64,
    pub entropy: f64,
    pub entropy_production: f64,
    pub min_theta: f64,
    pub energy_residual: f64,
    pub picard_iters: usize,
    pub picard_residual: f64,
    pub relative_energy: Option<f64>,
}

#[inline]
fn sym_part(g: &[[f64; 2]; 2]) -> SymTensor2 {
    SymTensor2::new(g[0][0], g[1][1], 0.5 * (g[0][1] + g[1][0]))
}

/// integral of |u|^p with the assembly quadrature.
fn lp_power_integral(u: &DiscreteField, p: f64) -> f64 {
    let space = &u.space;
    let rule = assembly_rule();
    let table = basis_table(space.family, &rule);
    let mut acc = 0.0;
    for t in 0..space.mesh.n_triangles() {
        let geo = ElementGeometry::new(&space.mesh, t);
        let nodes = space.element_nodes(t);
        for q in 0..rule.len() {
            let v = u.vector_at(&nodes, &table.values[q]);
            let mag = (v[0] * v[0] + v[1] * v[1]).sqrt();
            acc += rule.weights[q] * geo.det_j * mag.powf(p);
        }
    }
    acc
}

fn penalty_dissipation_value(u: &DiscreteField, penalty: &PenaltyParams) -> f64 {
    let w = penalty.weight();
    if w == 0.0 {
        0.0
    } else {
        w * lp_power_integral(u, penalty.r_star)
    }
}

/// integral of log(theta) and of the entropy production density
/// kappa |grad theta|^2 / theta^2 + S:Du / theta.
fn entropy_and_production(state: &StepState, config: &RunConfig) -> Result<(f64, f64)> {
    if !(state.theta.min_nodal() > 0.0) {
        return Err(Error::InvalidInput(
            "entropy diagnostics require positive temperature".into(),
        ));
    }
    let mesh = &state.theta.space.mesh;
    let rule = assembly_rule();
    let p1 = basis_table(Family::P1Scalar, &rule);
    let p2 = basis_table(Family::P2Vector, &rule);
    let mut entropy = 0.0;
    let mut production = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let snodes = state.theta.space.element_nodes(t);
        let vnodes = state.u.space.element_nodes(t);
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
            let th = state.theta.scalar_at(&snodes, &p1.values[q]);
            let gth = state.theta.scalar_grad_at(&snodes, &sgrads);
            let du = sym_part(&state.u.vector_grad_at(&vnodes, &vgrads));
            let sig = stress_raw(&config.model, &du, th)?;
            let kappa = conductivity(&config.conductivity, th);
            entropy += wq * th.ln();
            production +=
                wq * (kappa * (gth[0] * gth[0] + gth[1] * gth[1]) / (th * th) + sig.inner(&du) / th);
        }
    }
    Ok((entropy, production))
}

pub fn min_temperature(state: &StepState) -> f64 {
    state.theta.min_nodal()
}

/// Term-by-term evaluation of the discrete kinetic-energy identity over one
/// step (momentum equation tested with the new velocity).
#[derive(Debug, Clone, Copy)]
pub struct EnergyBalance {
    pub kinetic_jump: f64,
    pub increment_half_norm: f64,
    pub dissipation_term: f64,
    pub penalty_term: f64,
    pub forcing_term: f64,
    /// kinetic_jump + increment_half_norm + dissipation_term + penalty_term
    /// - forcing_term; zero for an exactly solved step.
    pub residual: f64,
    /// sum of the magnitudes of all terms, for relative comparisons.
    pub scale: f64,
}

pub fn energy_balance_residual(
    prev: &StepState,
    cur: &StepState,
    config: &RunConfig,
    f_avg: &dyn Fn([f64; 2]) -> [f64; 2],
) -> Result<EnergyBalance> {
    let tau = config.tau;
    let kin_prev = 0.5 * norm(&prev.u, NormKind::L2)?.powi(2);
    let kin_cur = 0.5 * norm(&cur.u, NormKind::L2)?.powi(2);
    let diff = DiscreteField {
        space: std::sync::Arc::clone(&cur.u.space),
        coeffs: cur
            .u
            .coeffs
            .iter()
            .zip(&prev.u.coeffs)
            .map(|(a, b)| a - b)
            .collect(),
    };
    let increment = 0.5 * norm(&diff, NormKind::L2)?.powi(2);
    let dissipation = tau * integral_dissipation(&cur.u, &cur.theta, &config.model)?;
    let penalty = tau * penalty_dissipation_value(&cur.u, &config.penalty);

    // forcing term: tau * int f_avg . u_cur
    let mesh = &cur.u.space.mesh;
    let rule = assembly_rule();
    let p2 = basis_table(Family::P2Vector, &rule);
    let mut forcing = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let vnodes = cur.u.space.element_nodes(t);
        for q in 0..rule.len() {
            let x = geo.point(rule.points[q]);
            let f = f_avg(x);
            let uv = cur.u.vector_at(&vnodes, &p2.values[q]);
            forcing += rule.weights[q] * geo.det_j * (f[0] * uv[0] + f[1] * uv[1]);
        }
    }
    let forcing = tau * forcing;

    let kinetic_jump = kin_cur - kin_prev;
    let residual = kinetic_jump + increment + dissipation + penalty - forcing;
    let scale = kin_cur.abs()
        + kin_prev.abs()
        + increment.abs()
        + dissipation.abs()
        + penalty.abs()
        + forcing.abs();
    Ok(EnergyBalance {
        kinetic_jump,
        increment_half_norm: increment,
        dissipation_term: dissipation,
        penalty_term: penalty,
        forcing_term: forcing,
        residual,
        scale,
    })
}

pub fn record_initial(state: &StepState, config: &RunConfig) -> Result<DiagnosticsRecord> {
    let kinetic = 0.5 * norm(&state.u, NormKind::L2)?.powi(2);
    let internal = integral_scalar(&state.theta);
    let dissipation = integral_dissipation(&state.u, &state.theta, &config.model)?;
    let (entropy, production) = entropy_and_production(state, config)?;
    Ok(DiagnosticsRecord {
        t: state.t,
        kinetic,
        internal,
        total: kinetic + internal,
        dissipation,
        penalty_dissipation: penalty_dissipation_value(&state.u, &config.penalty),
        entropy,
        entropy_production: production,
        min_theta: min_temperature(state),
        energy_residual: 0.0,
        picard_iters: state.picard_iters,
        picard_residual: state.picard_residual,
        relative_energy: None,
    })
}

pub fn record_step(
    prev: &StepState,
    cur: &StepState,
    config: &RunConfig,
    f_avg: &dyn Fn([f64; 2]) -> [f64; 2],
) -> Result<DiagnosticsRecord> {
    let mut rec = record_initial(cur, config)?;
    let balance = energy_balance_residual(prev, cur, config, f_avg)?;
    rec.energy_residual = balance.residual;
    Ok(rec)
}

/// Discrete residual of the entropy inequality over a grid-aligned window
/// with a nonnegative P1 weight: positive means the inequality holds with
/// margin, negative is the violation magnitude.
pub fn entropy_residual(
    trajectory: &Trajectory,
    config: &RunConfig,
    psi: &DiscreteField,
    window: (f64, f64),
) -> Result<f64> {
    if psi.min_nodal() < 0.0 {
        return Err(Error::InvalidInput(
            "entropy test weight must be nonnegative".into(),
        ));
    }
    let tau = trajectory.tau;
    let to_index = |t: f64| -> Result<usize> {
        let j = t / tau;
        if (j - j.round()).abs() > 1e-9 * (1.0 + trajectory.t_final / tau) {
            return Err(Error::InvalidInput(format!(
                "window endpoint {t} does not lie on the time grid"
            )));
        }
        Ok(j.round() as usize)
    };
    let a = to_index(window.0)?;
    let b = to_index(window.1)?;
    if a >= b || b >= trajectory.states.len() {
        return Err(Error::InvalidInput(format!(
            "bad entropy window [{}, {}]",
            window.0, window.1
        )));
    }

    let mesh = &psi.space.mesh;
    let rule = assembly_rule();
    let p1 = basis_table(Family::P1Scalar, &rule);
    let p2 = basis_table(Family::P2Vector, &rule);
    let mut residual = 0.0;
    for j in (a + 1)..=b {
        let cur = &trajectory.states[j];
        let old = &trajectory.states[j - 1];
        if !(cur.theta.min_nodal() > 0.0) || !(old.theta.min_nodal() > 0.0) {
            return Err(Error::InvalidInput(
                "entropy residual needs positive temperatures".into(),
            ));
        }
        for t in 0..mesh.n_triangles() {
            let geo = ElementGeometry::new(mesh, t);
            let snodes = psi.space.element_nodes(t);
            let vnodes = cur.u.space.element_nodes(t);
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
                let psi_v = psi.scalar_at(&snodes, &p1.values[q]);
                let gpsi = psi.scalar_grad_at(&snodes, &sgrads);
                let th = cur.theta.scalar_at(&snodes, &p1.values[q]);
                let th_old = old.theta.scalar_at(&snodes, &p1.values[q]);
                let gth = cur.theta.scalar_grad_at(&snodes, &sgrads);
                let uv = cur.u.vector_at(&vnodes, &p2.values[q]);
                let du = sym_part(&cur.u.vector_grad_at(&vnodes, &vgrads));
                let sig = stress_raw(&config.model, &du, th)?;
                let kappa = conductivity(&config.conductivity, th);

                // d/dt int psi log(theta) by backward differences
                residual += wq * psi_v * (th.ln() - th_old.ln());
                // - int log(theta) u . grad(psi)
                residual -= wq * tau * th.ln() * (uv[0] * gpsi[0] + uv[1] * gpsi[1]);
                // + int (kappa grad theta / theta) . grad(psi)
                residual +=
                    wq * tau * kappa * (gth[0] * gpsi[0] + gth[1] * gpsi[1]) / th;
                // - production
                residual -= wq
                    * tau
                    * psi_v
                    * (kappa * (gth[0] * gth[0] + gth[1] * gth[1]) / (th * th)
                        + sig.inner(&du) / th);
            }
        }
    }
    Ok(residual)
}

/// int [ 1/2 |u - u_ref|^2 + (theta - theta_ref)
///       + theta_ref (log theta_ref - log theta) ].
pub fn relative_energy(
    state: &StepState,
    ref_u: &DiscreteField,
    ref_theta: &DiscreteField,
) -> Result<f64> {
    if !(state.theta.min_nodal() > 0.0) || !(ref_theta.min_nodal() > 0.0) {
        return Err(Error::InvalidInput(
            "relative energy requires positive temperatures".into(),
        ));
    }
    let mesh = &state.u.space.mesh;
    let rule = assembly_rule();
    let p1 = basis_table(Family::P1Scalar, &rule);
    let p2 = basis_table(Family::P2Vector, &rule);
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, t);
        let snodes = state.theta.space.element_nodes(t);
        let vnodes = state.u.space.element_nodes(t);
        for q in 0..rule.len() {
            let wq = rule.weights[q] * geo.det_j;
            let uv = state.u.vector_at(&vnodes, &p2.values[q]);
            let ur = ref_u.vector_at(&vnodes, &p2.values[q]);
            let th = state.theta.scalar_at(&snodes, &p1.values[q]);
            let tr = ref_theta.scalar_at(&snodes, &p1.values[q]);
            let du = [uv[0] - ur[0], uv[1] - ur[1]];
            acc += wq
                * (0.5 * (du[0] * du[0] + du[1] * du[1]) + (th - tr) + tr * (tr.ln() - th.ln()));
        }
    }
    Ok(acc)
}

/// Velocity-only part of the relative energy, 1/2 || u - u_ref ||^2.
pub fn relative_energy_velocity_part(state: &StepState, ref_u: &DiscreteField) -> Result<f64> {
    let diff = DiscreteField {
        space: std::sync::Arc::clone(&state.u.space),
        coeffs: state
            .u
            .coeffs
            .iter()
            .zip(&ref_u.coeffs)
            .map(|(a, b)| a - b)
            .collect(),
    };
    Ok(0.5 * norm(&diff, NormKind::L2)?.powi(2))
}

#[derive(Debug, Clone, Copy)]
pub struct GronwallFit {
    /// smallest C with E_j <= E_0 exp(C t_j) for all j (0 when every ratio
    /// stays below one).
    pub c_est: f64,
    /// set when E_0 vanishes but the series does not: the comparison
    /// inequality then forbids any growth at all.
    pub uniqueness_violation: bool,
}

pub fn gronwall_fit(series: &[(f64, f64)], e0: f64) -> GronwallFit {
    if e0 <= 0.0 {
        let violated = series.iter().any(|&(t, e)| t > 0.0 && e > 1e-12);
        return GronwallFit {
            c_est: if violated { f64::INFINITY } else { 0.0 },
            uniqueness_violation: violated,
        };
    }
    let mut c = 0.0_f64;
    for &(t, e) in series {
        if t > 0.0 && e > e0 {
            c = c.max((e / e0).ln() / t);
        }
    }
    GronwallFit {
        c_est: c,
        uniqueness_violation: false,
    }
}

/// The a-priori quantities tracked along a run: velocity bounds, stress
/// dual norm, penalty total, the parabolic-embedding norm, and entropy
/// norms of log(theta).
#[derive(Debug, Clone, Copy)]
pub struct MonitorTable {
    pub max_u_l2: f64,
    /// sum tau ||u_j||^r in W^{1,r}
    pub velocity_w1r_total: f64,
    /// sum tau ||S_j||^{r'} in L^{r'}
    pub stress_dual_total: f64,
    /// (tau/k) sum ||u_j||^{r*} in L^{r*}
    pub penalty_total: f64,
    /// || u ||_{L^{r(d+2)/d}(Q)}; the exponent is 2r for d = 2
    pub parabolic_norm: f64,
    pub log_theta_l2_w12: f64,
    pub log_theta_linf_l2: f64,
    pub log_theta_linf_l4: f64,
}

pub fn apriori_monitor(trajectory: &Trajectory, config: &RunConfig) -> Result<MonitorTable> {
    let r = config.model.power_exponent();
    let r_conj = r / (r - 1.0);
    let tau = trajectory.tau;
    let parabolic_exp = 2.0 * r;

    let mut max_u_l2 = 0.0_f64;
    let mut w1r_total = 0.0;
    let mut stress_total = 0.0;
    let mut penalty_total = 0.0;
    let mut parabolic_acc = 0.0;
    let mut log_l2w12_acc = 0.0;
    let mut log_linf_l2 = 0.0_f64;
    let mut log_linf_l4 = 0.0_f64;

    let rule = assembly_rule();
    let p1 = basis_table(Family::P1Scalar, &rule);
    let p2 = basis_table(Family::P2Vector, &rule);

    for (j, state) in trajectory.states.iter().enumerate() {
        max_u_l2 = max_u_l2.max(norm(&state.u, NormKind::L2)?);
        if !(state.theta.min_nodal() > 0.0) {
            return Err(Error::InvalidInput(
                "a-priori monitors need positive temperatures".into(),
            ));
        }

        let mesh = &state.u.space.mesh;
        let mut u_r = 0.0;
        let mut grad_u_r = 0.0;
        let mut stress_rc = 0.0;
        let mut u_parab = 0.0;
        let mut u_rstar = 0.0;
        let mut log_sq = 0.0;
        let mut log_4 = 0.0;
        let mut log_grad_sq = 0.0;
        for t in 0..mesh.n_triangles() {
            let geo = ElementGeometry::new(mesh, t);
            let vnodes = state.u.space.element_nodes(t);
            let snodes = state.theta.space.element_nodes(t);
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
                let uv = state.u.vector_at(&vnodes, &p2.values[q]);
                let g = state.u.vector_grad_at(&vnodes, &vgrads);
                let du = sym_part(&g);
                let th = state.theta.scalar_at(&snodes, &p1.values[q]);
                let gth = state.theta.scalar_grad_at(&snodes, &sgrads);
                let sig = stress_raw(&config.model, &du, th)?;
                let umag = (uv[0] * uv[0] + uv[1] * uv[1]).sqrt();
                let gmag = (g[0][0] * g[0][0]
                    + g[0][1] * g[0][1]
                    + g[1][0] * g[1][0]
                    + g[1][1] * g[1][1])
                    .sqrt();
                u_r += wq * umag.powf(r);
                grad_u_r += wq * gmag.powf(r);
                stress_rc += wq * sig.norm().powf(r_conj);
                u_parab += wq * umag.powf(parabolic_exp);
                if config.penalty.weight() > 0.0 {
                    u_rstar += wq * umag.powf(config.penalty.r_star);
                }
                let lg = th.ln();
                log_sq += wq * lg * lg;
                log_4 += wq * lg.powi(4);
                log_grad_sq += wq * (gth[0] * gth[0] + gth[1] * gth[1]) / (th * th);
            }
        }
        log_linf_l2 = log_linf_l2.max(log_sq.sqrt());
        log_linf_l4 = log_linf_l4.max(log_4.powf(0.25));
        if j > 0 {
            w1r_total += tau * (u_r + grad_u_r);
            stress_total += tau * stress_rc;
            penalty_total += tau * config.penalty.weight() * u_rstar;
            parabolic_acc += tau * u_parab;
            log_l2w12_acc += tau * (log_sq + log_grad_sq);
        }
    }

    Ok(MonitorTable {
        max_u_l2,
        velocity_w1r_total: w1r_total,
        stress_dual_total: stress_total,
        penalty_total,
        parabolic_norm: parabolic_acc.powf(1.0 / parabolic_exp),
        log_theta_l2_w12: log_l2w12_acc.sqrt(),
        log_theta_linf_l2: log_linf_l2,
        log_theta_linf_l4: log_linf_l4,
    })
}

/// L2(Q) distance between the velocities of two trajectories on the same
/// grid (piecewise-constant interpolants).
pub fn velocity_l2q_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.states.len() != b.states.len() {
        return Err(Error::InvalidInput(
            "trajectories live on different grids".into(),
        ));
    }
    let mut acc = 0.0;
    for (sa, sb) in a.states.iter().zip(&b.states).skip(1) {
        let diff = DiscreteField {
            space: std::sync::Arc::clone(&sa.u.space),
            coeffs: sa
                .u
                .coeffs
                .iter()
                .zip(&sb.u.coeffs)
                .map(|(x, y)| x - y)
                .collect(),
        };
        acc += a.tau * norm(&diff, NormKind::L2)?.powi(2);
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{ConductivityLaw, StressModel};
    use crate::scenario::builtin_scenario;
    use crate::space::interpolate_scalar;
    use crate::stepper::{discretize, initialize, run};

    fn decay_config(level: u32, tau: f64, t_final: f64) -> RunConfig {
        RunConfig {
            mesh_level: level,
            model: StressModel::newtonian(2.0),
            conductivity: ConductivityLaw::Constant(1.0),
            t_final,
            tau,
            penalty: PenaltyParams::off(),
            picard_tol: 1e-10,
            picard_max: 40,
            damping: 1.0,
            mass_lumping: true,
        }
    }

    #[test]
    fn zero_trajectory_has_zero_balance() {
        let cfg = decay_config(2, 0.1, 0.2);
        let scenario = builtin_scenario("rest").unwrap();
        let traj = run(&cfg, &scenario).unwrap();
        for w in traj.states.windows(2) {
            let bal = energy_balance_residual(&w[0], &w[1], &cfg, &|_| [0.0, 0.0]).unwrap();
            assert!(bal.residual.abs() < 1e-14);
            assert_eq!(bal.forcing_term, 0.0);
        }
        for rec in &traj.records {
            assert_eq!(rec.kinetic, 0.0);
            assert!((rec.internal - 1.0).abs() < 1e-12);
            assert!(rec.entropy.abs() < 1e-12);
            assert!(rec.entropy_production.abs() < 1e-14);
        }
    }

    #[test]
    fn decay_balance_and_sign() {
        let cfg = decay_config(3, 0.01, 0.05);
        let scenario = builtin_scenario("decay").unwrap();
        let traj = run(&cfg, &scenario).unwrap();
        for (j, w) in traj.states.windows(2).enumerate() {
            let bal = energy_balance_residual(&w[0], &w[1], &cfg, &|_| [0.0, 0.0]).unwrap();
            assert!(
                bal.residual.abs() <= 1e-8 * bal.scale.max(1e-30),
                "step {j}: residual {} scale {}",
                bal.residual,
                bal.scale
            );
            // with f = 0 the kinetic jump must be <= 0 up to tolerance
            assert!(bal.kinetic_jump <= 1e-12 * bal.scale);
        }
    }

    #[test]
    fn entropy_residual_trivial_cases() {
        let cfg = decay_config(2, 0.1, 0.2);
        let scenario = builtin_scenario("rest").unwrap();
        let traj = run(&cfg, &scenario).unwrap();
        let disc = discretize(2).unwrap();
        let zero = disc.p_space.zero_field();
        let r = entropy_residual(&traj, &cfg, &zero, (0.0, 0.2)).unwrap();
        assert_eq!(r, 0.0);
        let one = interpolate_scalar(&disc.p_space, |_| 1.0).unwrap();
        let r = entropy_residual(&traj, &cfg, &one, (0.0, 0.2)).unwrap();
        assert!(r.abs() < 1e-12);
        let mut neg = one.clone();
        neg.coeffs[0] = -0.1;
        assert!(entropy_residual(&traj, &cfg, &neg, (0.0, 0.2)).is_err());
        assert!(entropy_residual(&traj, &cfg, &one, (0.03, 0.2)).is_err());
    }

    #[test]
    fn relative_energy_examples() {
        let disc = discretize(3).unwrap();
        let cfg = decay_config(3, 0.1, 0.2);
        let scenario = builtin_scenario("decay").unwrap();
        let state = initialize(&disc, &cfg, &scenario).unwrap();
        // identical states
        let e = relative_energy(&state, &state.u, &state.theta).unwrap();
        assert_eq!(e, 0.0);
        // theta = 2 vs 1 with equal velocities: 1 - log 2
        let mut hot = state.clone();
        hot.theta = interpolate_scalar(&disc.p_space, |_| 2.0).unwrap();
        let ones = interpolate_scalar(&disc.p_space, |_| 1.0).unwrap();
        let e = relative_energy(&hot, &hot.u, &ones).unwrap();
        assert!((e - (1.0 - 2.0_f64.ln())).abs() < 1e-12);
        // theta equal: reduces to the kinetic distance
        let mut moved = state.clone();
        for c in moved.u.coeffs.iter_mut() {
            *c += 0.0; // same field
        }
        moved.u = disc.v_space.zero_field();
        let e = relative_energy(&moved, &state.u, &moved.theta).unwrap();
        let kin = relative_energy_velocity_part(&moved, &state.u).unwrap();
        assert!((e - kin).abs() < 1e-13);
        // nonnegativity on a random-ish pair
        assert!(e >= -1e-12);
    }

    #[test]
    fn gronwall_examples() {
        let series: Vec<(f64, f64)> = (0..=10).map(|j| (0.1 * j as f64, 2.0)).collect();
        let fit = gronwall_fit(&series, 2.0);
        assert_eq!(fit.c_est, 0.0);
        let series: Vec<(f64, f64)> = (0..=10)
            .map(|j| {
                let t = 0.1 * j as f64;
                (t, 0.5 * (2.0 * t).exp())
            })
            .collect();
        let fit = gronwall_fit(&series, 0.5);
        assert!((fit.c_est - 2.0).abs() < 1e-12);
        let series: Vec<(f64, f64)> = (0..=10)
            .map(|j| {
                let t = 0.1 * j as f64;
                (t, (-t).exp())
            })
            .collect();
        let fit = gronwall_fit(&series, 1.0);
        assert_eq!(fit.c_est, 0.0);
        assert!(!fit.uniqueness_violation);
        let fit = gronwall_fit(&[(0.1, 1.0)], 0.0);
        assert!(fit.uniqueness_violation);
    }

    #[test]
    fn monitors_on_constant_run() {
        let cfg = decay_config(2, 0.1, 0.2);
        let scenario = builtin_scenario("rest").unwrap();
        let traj = run(&cfg, &scenario).unwrap();
        let table = apriori_monitor(&traj, &cfg).unwrap();
        assert_eq!(table.max_u_l2, 0.0);
        assert_eq!(table.velocity_w1r_total, 0.0);
        assert!(table.parabolic_norm.abs() < 1e-12);
        // theta = 1 -> log theta = 0
        assert!(table.log_theta_l2_w12.abs() < 1e-10);
        assert!(table.log_theta_linf_l2.abs() < 1e-10);
    }

    #[test]
    fn monitors_finite_on_decay() {
        let cfg = decay_config(3, 0.02, 0.1);
        let scenario = builtin_scenario("decay").unwrap();
        let traj = run(&cfg, &scenario).unwrap();
        let table = apriori_monitor(&traj, &cfg).unwrap();
        for v in [
            table.max_u_l2,
            table.velocity_w1r_total,
            table.stress_dual_total,
            table.penalty_total,
            table.parabolic_norm,
            table.log_theta_l2_w12,
            table.log_theta_linf_l2,
            table.log_theta_linf_l4,
        ] {
            assert!(v.is_finite());
        }
        assert!(table.max_u_l2 > 0.0);
    }
}
