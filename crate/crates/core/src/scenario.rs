//! Named built-in scenarios: initial data, forcing, and (for manufactured
//! cases) the model binding. Scenarios come from a registry rather than a
//! runtime expression parser.

use crate::constitutive::{ConductivityLaw, StressModel};
use crate::error::{Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

pub type VecFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type TimeVecFn = Arc<dyn Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync>;
pub type TimeScalarFn = Arc<dyn Fn(f64, [f64; 2]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub u0: VecFn,
    pub theta0: ScalarFn,
    /// Declared lower bound of the initial temperature.
    pub theta_floor: f64,
    pub forcing: Option<TimeVecFn>,
    pub heat_source: Option<TimeScalarFn>,
    /// Manufactured cases are meaningful only with their own model and
    /// conductivity; plain scenarios take whatever the config says.
    pub bound_model: Option<(StressModel, ConductivityLaw)>,
}

/// curl of psi = x^2 y^2 (1-x)^2 (1-y)^2, zero trace on the unit square.
pub fn polynomial_vortex(p: [f64; 2]) -> [f64; 2] {
    let (x, y) = (p[0], p[1]);
    let fx = x * x * (1.0 - x) * (1.0 - x);
    let fy = y * y * (1.0 - y) * (1.0 - y);
    let dfx = 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
    let dfy = 2.0 * y * (1.0 - y) * (1.0 - 2.0 * y);
    [fx * dfy, -dfx * fy]
}

/// curl of psi = sin^2(pi x) sin^2(pi y) / (2 pi), zero trace.
pub fn trigonometric_vortex(p: [f64; 2]) -> [f64; 2] {
    let (x, y) = (p[0], p[1]);
    let sx = (PI * x).sin();
    let sy = (PI * y).sin();
    [
        sx * sx * (2.0 * PI * y).sin() / 2.0,
        -(2.0 * PI * x).sin() * sy * sy / 2.0,
    ]
}

pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    match name {
        "rest" => Ok(Scenario {
            name: name.into(),
            u0: Arc::new(|_| [0.0, 0.0]),
            theta0: Arc::new(|_| 1.0),
            theta_floor: 1.0,
            forcing: None,
            heat_source: None,
            bound_model: None,
        }),
        // gentle decaying vortex with uniform initial temperature; the
        // positivity and energy-identity checks run on this one
        "decay" => Ok(Scenario {
            name: name.into(),
            u0: Arc::new(polynomial_vortex),
            theta0: Arc::new(|_| 1.0),
            theta_floor: 1.0,
            forcing: None,
            heat_source: None,
            bound_model: None,
        }),
        // stronger vortex for the penalty study, where the zeroth-order
        // term must be visible above solver roundoff
        "spin" => Ok(Scenario {
            name: name.into(),
            u0: Arc::new(|p| {
                let v = trigonometric_vortex(p);
                [0.4 * v[0], 0.4 * v[1]]
            }),
            theta0: Arc::new(|_| 1.0),
            theta_floor: 1.0,
            forcing: None,
            heat_source: None,
            bound_model: None,
        }),
        "stokes_heat" | "carreau_heat" | "rest_state" => {
            crate::mms::mms_case(name).map(|case| case.into_scenario())
        }
        _ => Err(Error::InvalidInput(format!(
            "unknown scenario '{name}'; available: rest, decay, spin, rest_state, stokes_heat, carreau_heat"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vortices_have_zero_boundary_trace() {
        for f in [polynomial_vortex, trigonometric_vortex] {
            for i in 0..=20 {
                let s = i as f64 / 20.0;
                for p in [[0.0, s], [1.0, s], [s, 0.0], [s, 1.0]] {
                    let v = f(p);
                    assert!(v[0].abs() < 1e-14 && v[1].abs() < 1e-14, "{p:?}");
                }
            }
        }
    }

    #[test]
    fn registry_rejects_unknown_names() {
        assert!(builtin_scenario("warp").is_err());
        assert!(builtin_scenario("decay").is_ok());
    }
}
