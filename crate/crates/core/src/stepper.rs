//! Backward-Euler time loop with a decoupled, damped fixed-point iteration
//! per step: solve the lagged momentum saddle system, then the lagged
//! temperature system with the fresh velocity, damp, and repeat until the
//! residuals of both nonlinear discrete equations drop below tolerance.

use crate::assembly::{
    assemble_momentum_system, assemble_temperature_system, momentum_residual,
    split_momentum_solution, temperature_residual, PenaltyParams,
};
use crate::constitutive::{ConductivityLaw, StressModel};
use crate::diagnostics::{record_initial, record_step, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::linsolve::LuSolveCache;
use crate::mesh::{unit_square_mesh, Mesh};
use crate::scenario::{Scenario, TimeScalarFn, TimeVecFn};
use crate::space::{build_space, interpolate_scalar, DiscreteField, Family, FunctionSpace};
use std::sync::Arc;

/// Numerical parameters of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mesh_level: u32,
    pub model: StressModel,
    pub conductivity: ConductivityLaw,
    pub t_final: f64,
    pub tau: f64,
    pub penalty: PenaltyParams,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub damping: f64,
    pub mass_lumping: bool,
}

impl RunConfig {
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.tau).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.conductivity.validate()?;
        if !(self.tau > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::InvalidInput(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        let steps = self.t_final / self.tau;
        if (steps - steps.round()).abs() > 1e-9 || steps.round() < 1.0 {
            return Err(Error::InvalidInput(format!(
                "t_final/tau must be a positive integer, got {steps}"
            )));
        }
        let r = self.model.power_exponent();
        let r_conj = r / (r - 1.0);
        let r_star_min = (2.0 * r_conj).max(5.0);
        if self.penalty.weight() > 0.0 {
            if !(self.penalty.r_star > r_star_min) {
                return Err(Error::InvalidInput(format!(
                    "r_star must exceed max{{2r', 5}} = {r_star_min}, got {}",
                    self.penalty.r_star
                )));
            }
            if !(self.penalty.k >= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "penalty k must be >= 1 or infinite, got {}",
                    self.penalty.k
                )));
            }
        }
        if !(self.picard_tol > 0.0 && self.picard_tol < 1.0) {
            return Err(Error::InvalidInput(format!(
                "picard_tol must lie in (0,1), got {}",
                self.picard_tol
            )));
        }
        if self.picard_max == 0 {
            return Err(Error::InvalidInput("picard_max must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "damping must lie in (0,1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Mesh plus the Taylor-Hood velocity space and the shared P1 space used for
/// both pressure and temperature.
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub v_space: Arc<FunctionSpace>,
    pub p_space: Arc<FunctionSpace>,
}

pub fn discretize(level: u32) -> Result<Discretization> {
    Discretization::from_mesh(unit_square_mesh(level)?)
}

/// Unit-square discretization with an arbitrary number of cells per side.
pub fn discretize_cells(cells: usize) -> Result<Discretization> {
    Discretization::from_mesh(crate::mesh::build_structured_mesh(cells, cells, 1.0, 1.0)?)
}

impl Discretization {
    pub fn from_mesh(mesh: Mesh) -> Result<Discretization> {
        let mesh = Arc::new(mesh);
        let v_space = Arc::new(build_space(Arc::clone(&mesh), Family::P2Vector));
        let p_space = Arc::new(build_space(Arc::clone(&mesh), Family::P1Scalar));
        Ok(Discretization {
            mesh,
            v_space,
            p_space,
        })
    }
}

#[derive(Clone)]
pub struct StepState {
    pub t: f64,
    pub u: DiscreteField,
    pub p: DiscreteField,
    pub theta: DiscreteField,
    pub picard_iters: usize,
    pub picard_residual: f64,
}

pub struct Trajectory {
    pub states: Vec<StepState>,
    pub records: Vec<DiagnosticsRecord>,
    pub tau: f64,
    pub t_final: f64,
}

impl Trajectory {
    /// Piecewise-constant interpolant: state j for t in (t_{j-1}, t_j].
    pub fn piecewise_constant(&self, t: f64) -> &StepState {
        if t <= 0.0 {
            return &self.states[0];
        }
        let j = (t / self.tau - 1e-12).ceil() as usize;
        &self.states[j.min(self.states.len() - 1)]
    }

    /// Piecewise-linear interpolant of the velocity and temperature
    /// coefficient vectors.
    pub fn piecewise_linear(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let m = self.states.len() - 1;
        let t = t.clamp(0.0, self.t_final);
        let j = ((t / self.tau).floor() as usize).min(m.saturating_sub(1));
        let (a, b) = (&self.states[j], &self.states[j + 1]);
        let w = (t - a.t) / self.tau;
        let blend = |x: &[f64], y: &[f64]| {
            x.iter()
                .zip(y)
                .map(|(xa, yb)| (1.0 - w) * xa + w * yb)
                .collect()
        };
        (
            blend(&a.u.coeffs, &b.u.coeffs),
            blend(&a.theta.coeffs, &b.theta.coeffs),
        )
    }
}

/// Time average of a load over one step, by 3-point Gauss quadrature.
pub fn time_average_vec(f: &TimeVecFn, t0: f64, t1: f64) -> impl Fn([f64; 2]) -> [f64; 2] + '_ {
    let times = gauss3_times(t0, t1);
    move |x| {
        let mut acc = [0.0; 2];
        for &(t, w) in &times {
            let v = f(t, x);
            acc[0] += w * v[0];
            acc[1] += w * v[1];
        }
        acc
    }
}

pub fn time_average_scalar(f: &TimeScalarFn, t0: f64, t1: f64) -> impl Fn([f64; 2]) -> f64 + '_ {
    let times = gauss3_times(t0, t1);
    move |x| times.iter().map(|&(t, w)| w * f(t, x)).sum()
}

fn gauss3_times(t0: f64, t1: f64) -> [(f64, f64); 3] {
    let h = t1 - t0;
    let offset = 0.5 * (3.0f64 / 5.0).sqrt();
    [
        (t0 + h * (0.5 - offset), 5.0 / 18.0),
        (t0 + h * 0.5, 8.0 / 18.0),
        (t0 + h * (0.5 + offset), 5.0 / 18.0),
    ]
}

/// Projects the scenario data into the discrete spaces: velocity through the
/// divergence-constrained L2 projection, temperature by nodal interpolation.
pub fn initialize(
    disc: &Discretization,
    config: &RunConfig,
    scenario: &Scenario,
) -> Result<StepState> {
    config.validate()?;
    let u0 = scenario.u0.clone();
    let proj = crate::assembly::l2_project_div_free(&disc.v_space, &disc.p_space, &|x| u0(x))?;
    let theta0 = interpolate_scalar(&disc.p_space, |x| (scenario.theta0)(x))?;
    let min_theta = theta0.min_nodal();
    if !(min_theta > 0.0) || min_theta < scenario.theta_floor - 1e-12 {
        return Err(Error::InvalidInput(format!(
            "initial temperature violates its declared positive floor: min nodal value {min_theta}, floor {}",
            scenario.theta_floor
        )));
    }
    Ok(StepState {
        t: 0.0,
        u: proj.u,
        p: disc.p_space.zero_field(),
        theta: theta0,
        picard_iters: 0,
        picard_residual: 0.0,
    })
}

fn damp_into(old: &DiscreteField, new: &DiscreteField, omega: f64) -> DiscreteField {
    let coeffs = old
        .coeffs
        .iter()
        .zip(&new.coeffs)
        .map(|(o, n)| (1.0 - omega) * o + omega * n)
        .collect();
    DiscreteField {
        space: Arc::clone(&old.space),
        coeffs,
    }
}

/// Symbolic-factorization caches reused across iterations and steps of one
/// discretization.
#[derive(Default)]
pub struct StepperCaches {
    pub momentum: LuSolveCache,
    pub temperature: LuSolveCache,
}

/// One backward-Euler step via the damped decoupled fixed-point iteration.
pub fn step(
    disc: &Discretization,
    prev: &StepState,
    config: &RunConfig,
    scenario: &Scenario,
    step_index: usize,
) -> Result<StepState> {
    step_cached(
        disc,
        prev,
        config,
        scenario,
        step_index,
        &mut StepperCaches::default(),
    )
}

pub fn step_cached(
    disc: &Discretization,
    prev: &StepState,
    config: &RunConfig,
    scenario: &Scenario,
    step_index: usize,
    caches: &mut StepperCaches,
) -> Result<StepState> {
    let tau = config.tau;
    let (t0, t1) = (prev.t, prev.t + tau);
    let zero_force: TimeVecFn = Arc::new(|_, _| [0.0, 0.0]);
    let forcing = scenario.forcing.as_ref().unwrap_or(&zero_force);
    let f_avg = time_average_vec(forcing, t0, t1);
    let source_avg = scenario
        .heat_source
        .as_ref()
        .map(|g| time_average_scalar(g, t0, t1));

    let mut u_lag = prev.u.clone();
    let mut theta_lag = prev.theta.clone();
    let mut p_cur: Option<DiscreteField> = None;
    let mut omega = config.damping;
    let omega_floor = config.damping / 8.0;
    let mut last_residual = f64::INFINITY;

    for it in 1..=config.picard_max {
        let momentum = assemble_momentum_system(
            &disc.v_space,
            &disc.p_space,
            &prev.u,
            &u_lag,
            &theta_lag,
            tau,
            &|x| f_avg(x),
            config.penalty,
            &config.model,
        )?;
        let x = momentum.solve_cached(&mut caches.momentum)?;
        let sol = split_momentum_solution(
            &disc.v_space,
            &disc.p_space,
            momentum.layout.as_ref().unwrap(),
            &x,
        );

        let temperature = assemble_temperature_system(
            &disc.p_space,
            &prev.theta,
            &sol.u,
            &theta_lag,
            tau,
            &config.conductivity,
            &config.model,
            config.mass_lumping,
            source_avg
                .as_ref()
                .map(|g| g as &dyn Fn([f64; 2]) -> f64),
        )?;
        let theta_new = DiscreteField {
            space: Arc::clone(&disc.p_space),
            coeffs: temperature.solve_cached(&mut caches.temperature)?,
        };

        let u_cur = damp_into(&u_lag, &sol.u, omega);
        let theta_cur = damp_into(&theta_lag, &theta_new, omega);
        let p_new = match &p_cur {
            Some(p_old) => damp_into(p_old, &sol.p, omega),
            None => sol.p,
        };

        let (res_u, scale_u) = momentum_residual(
            &disc.v_space,
            &disc.p_space,
            &prev.u,
            &u_cur,
            &p_new,
            &theta_cur,
            tau,
            &|x| f_avg(x),
            config.penalty,
            &config.model,
        )?;
        let (res_t, scale_t) = temperature_residual(
            &disc.p_space,
            &prev.theta,
            &u_cur,
            &theta_cur,
            tau,
            &config.conductivity,
            &config.model,
            config.mass_lumping,
            source_avg
                .as_ref()
                .map(|g| g as &dyn Fn([f64; 2]) -> f64),
        )?;
        let combined = (res_u / scale_u.max(1e-14)).max(res_t / scale_t.max(1e-14));

        u_lag = u_cur;
        theta_lag = theta_cur;
        p_cur = Some(p_new);

        if combined <= config.picard_tol {
            return Ok(StepState {
                t: t1,
                u: u_lag,
                p: p_cur.unwrap(),
                theta: theta_lag,
                picard_iters: it,
                picard_residual: combined,
            });
        }
        if combined > last_residual {
            omega = (0.5 * omega).max(omega_floor);
        }
        last_residual = combined;
    }

    Err(Error::PicardDiverged {
        step: step_index,
        iters: config.picard_max,
        residual: last_residual,
    })
}

/// Runs the full time loop and collects per-step diagnostics.
pub fn run(config: &RunConfig, scenario: &Scenario) -> Result<Trajectory> {
    config.validate()?;
    let disc = discretize(config.mesh_level)?;
    run_on(&disc, config, scenario)
}

/// Same as [`run`] but reusing an existing discretization.
pub fn run_on(
    disc: &Discretization,
    config: &RunConfig,
    scenario: &Scenario,
) -> Result<Trajectory> {
    config.validate()?;
    let initial = initialize(disc, config, scenario)?;
    let n_steps = config.n_steps();
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut records = Vec::with_capacity(n_steps + 1);
    records.push(record_initial(&initial, config)?);
    states.push(initial);
    let zero_force: TimeVecFn = Arc::new(|_, _| [0.0, 0.0]);
    let mut caches = StepperCaches::default();
    for j in 1..=n_steps {
        let next = step_cached(disc, states.last().unwrap(), config, scenario, j, &mut caches)?;
        let forcing = scenario.forcing.as_ref().unwrap_or(&zero_force);
        let f_avg = time_average_vec(forcing, states.last().unwrap().t, next.t);
        records.push(record_step(
            states.last().unwrap(),
            &next,
            config,
            &|x| f_avg(x),
        )?);
        states.push(next);
    }
    Ok(Trajectory {
        states,
        records,
        tau: config.tau,
        t_final: config.t_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin_scenario;

    fn newtonian_config(level: u32, tau: f64, t_final: f64) -> RunConfig {
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
    fn config_validation() {
        let mut cfg = newtonian_config(2, 0.1, 1.0);
        assert!(cfg.validate().is_ok());
        cfg.tau = 0.095;
        assert!(cfg.validate().is_err());
        cfg.tau = 0.1;
        cfg.penalty = PenaltyParams {
            k: 100.0,
            r_star: 4.0,
        };
        assert!(cfg.validate().is_err());
        cfg.penalty = PenaltyParams {
            k: 100.0,
            r_star: 6.0,
        };
        assert!(cfg.validate().is_ok());
        // r = 1.5 -> r' = 3 -> threshold 6: r_star = 6 is not enough
        cfg.model = StressModel::PowerLaw {
            r: 1.5,
            consistency: 1.0,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn time_average_examples() {
        let constant: TimeVecFn = Arc::new(|_, _| [3.0, -1.0]);
        let avg = time_average_vec(&constant, 0.0, 0.25);
        assert_eq!(avg([0.3, 0.4]), [3.0, -1.0]);

        let linear: TimeVecFn = Arc::new(|t, _| [2.0 * t + 1.0, 0.0]);
        let avg = time_average_vec(&linear, 0.2, 0.4);
        assert!((avg([0.0, 0.0])[0] - (2.0 * 0.3 + 1.0)).abs() < 1e-14);

        let sine: TimeScalarFn = Arc::new(|t, _| t.sin());
        let avg = time_average_scalar(&sine, 0.0, 0.1);
        let exact = (1.0 - 0.1f64.cos()) / 0.1;
        assert!((avg([0.0, 0.0]) - exact).abs() < 1e-10);
    }

    #[test]
    fn rest_state_is_an_exact_fixed_point() {
        let cfg = newtonian_config(2, 0.1, 0.2);
        let scenario = builtin_scenario("rest").unwrap();
        let traj = run(&cfg, &scenario).unwrap();
        assert_eq!(traj.states.len(), 3);
        for s in &traj.states[1..] {
            assert_eq!(s.picard_iters, 1);
            assert!(s.u.coeffs.iter().all(|&c| c.abs() < 1e-13));
            assert!(s.theta.coeffs.iter().all(|&c| (c - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn initialization_respects_floor_and_projection_stability() {
        let disc = discretize(3).unwrap();
        let cfg = newtonian_config(3, 0.1, 0.2);
        let scenario = builtin_scenario("decay").unwrap();
        let state = initialize(&disc, &cfg, &scenario).unwrap();
        assert!(state.theta.min_nodal() >= 1.0 - 1e-12);
        let norm_u = crate::space::norm(&state.u, crate::space::NormKind::L2).unwrap();
        let exact = crate::space::l2_norm_function(&disc.mesh, |x| {
            let v = crate::scenario::polynomial_vortex(x);
            (v[0] * v[0] + v[1] * v[1]).sqrt()
        });
        assert!(norm_u <= exact + 1e-10);
        assert!(crate::assembly::divergence_residual(&state.u, &disc.p_space) < 1e-12);
    }

    #[test]
    fn initialization_rejects_nonpositive_theta() {
        let disc = discretize(2).unwrap();
        let cfg = newtonian_config(2, 0.1, 0.2);
        let mut scenario = builtin_scenario("rest").unwrap();
        scenario.theta0 = Arc::new(|x| x[0] - 0.5);
        assert!(initialize(&disc, &cfg, &scenario).is_err());
    }

    #[test]
    fn decay_kinetic_energy_strictly_decreases() {
        let cfg = newtonian_config(3, 0.01, 0.05);
        let scenario = builtin_scenario("decay").unwrap();
        let traj = run(&cfg, &scenario).unwrap();
        for w in traj.records.windows(2) {
            assert!(w[1].kinetic < w[0].kinetic);
        }
        // every accepted state stays discretely divergence free
        for s in &traj.states {
            assert!(crate::assembly::divergence_residual(&s.u, &s.p.space) < 1e-11);
            for &d in &s.u.space.dirichlet_dofs {
                assert_eq!(s.u.coeffs[d], 0.0);
            }
        }
    }

    #[test]
    fn trajectory_interpolants() {
        let cfg = newtonian_config(2, 0.1, 0.2);
        let scenario = builtin_scenario("decay").unwrap();
        let traj = run(&cfg, &scenario).unwrap();
        assert_eq!(traj.states.len(), 3);
        // piecewise constant: right-continuous from the left endpoint
        assert_eq!(traj.piecewise_constant(0.0).t, 0.0);
        assert!((traj.piecewise_constant(0.05).t - 0.1).abs() < 1e-14);
        assert!((traj.piecewise_constant(0.1).t - 0.1).abs() < 1e-14);
        assert!((traj.piecewise_constant(0.11).t - 0.2).abs() < 1e-14);
        // linear interpolant at the midpoint averages the coefficients
        let (u_mid, _) = traj.piecewise_linear(0.05);
        for (i, v) in u_mid.iter().enumerate() {
            let expect = 0.5 * (traj.states[0].u.coeffs[i] + traj.states[1].u.coeffs[i]);
            assert!((v - expect).abs() < 1e-14);
        }
    }
}
