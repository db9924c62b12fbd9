//! Property tests for the structural invariants: skew symmetry of the
//! convection forms, monotonicity of the shipped stress laws, pointwise
//! nonnegativity of the relative-energy integrand, and quadrature
//! exactness on random polynomials.

use proptest::prelude::*;
use std::sync::Arc;
use thermoflow::assembly::{skew_convection_scalar, skew_convection_velocity};
use thermoflow::constitutive::{stress, StressModel, SymTensor2, ThetaCoeff};
use thermoflow::mesh::build_structured_mesh;
use thermoflow::quadrature::quadrature_rule;
use thermoflow::space::{build_space, DiscreteField, Family, FunctionSpace};

fn spaces() -> (Arc<FunctionSpace>, Arc<FunctionSpace>) {
    let mesh = Arc::new(build_structured_mesh(4, 4, 1.0, 1.0).unwrap());
    (
        Arc::new(build_space(Arc::clone(&mesh), Family::P2Vector)),
        Arc::new(build_space(mesh, Family::P1Scalar)),
    )
}

fn field_from(space: &Arc<FunctionSpace>, values: &[f64], zero_boundary: bool) -> DiscreteField {
    let coeffs = (0..space.dof_count)
        .map(|i| values[i % values.len()] * (1.0 + 0.01 * i as f64))
        .collect();
    let mut f = DiscreteField {
        space: Arc::clone(space),
        coeffs,
    };
    if zero_boundary {
        f.zero_dirichlet();
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn convection_forms_are_skew(values in prop::collection::vec(-2.0f64..2.0, 8)) {
        let (v_space, p_space) = spaces();
        let adv = field_from(&v_space, &values, true);
        let v = field_from(&v_space, &values[..4.min(values.len())], true);
        let b = skew_convection_velocity(&adv, &v, &v).unwrap();
        prop_assert!(b.abs() <= 1e-12 * (1.0 + values.iter().map(|x| x.abs()).sum::<f64>()).powi(3));
        let eta = field_from(&p_space, &values, false);
        let c = skew_convection_scalar(&adv, &eta, &eta).unwrap();
        prop_assert!(c.abs() <= 1e-12 * (1.0 + values.iter().map(|x| x.abs()).sum::<f64>()).powi(3));
    }

    #[test]
    fn shipped_stress_laws_are_monotone(
        a1 in -3.0f64..3.0, b1 in -3.0f64..3.0, c1 in -3.0f64..3.0,
        a2 in -3.0f64..3.0, b2 in -3.0f64..3.0, c2 in -3.0f64..3.0,
        theta in 0.05f64..8.0,
        r in 1.2f64..3.0,
    ) {
        let t1 = SymTensor2::new(a1, b1, c1);
        let t2 = SymTensor2::new(a2, b2, c2);
        for model in [
            StressModel::PowerLaw { r, consistency: 1.0 },
            StressModel::CarreauYasuda {
                r,
                alpha: ThetaCoeff::Saturating { base: 1.0, gain: 1.0 },
                beta: ThetaCoeff::Constant(1.0),
                gamma: ThetaCoeff::Constant(1.0),
            },
            StressModel::HbRegularized { r, tau_y: 0.8, consistency: 1.0, eps_reg: 0.05 },
        ] {
            let s1 = stress(&model, &t1, theta).unwrap();
            let s2 = stress(&model, &t2, theta).unwrap();
            let pairing = s1.sub(&s2).inner(&t1.sub(&t2));
            prop_assert!(pairing >= -1e-10, "{model:?}: pairing {pairing}");
        }
    }

    #[test]
    fn relative_energy_integrand_is_nonnegative(a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        // (a - b) + b (log b - log a) is the Bregman divergence of -log
        let value = (a - b) + b * (b.ln() - a.ln());
        prop_assert!(value >= -1e-12 * (1.0 + a + b));
    }

    #[test]
    fn quadrature_integrates_random_quartics_exactly(
        coeffs in prop::collection::vec(-5.0f64..5.0, 15),
    ) {
        // random polynomial of total degree 4 integrated by the degree-4
        // and degree-8 rules; both must agree with the exact moments
        let rule4 = quadrature_rule(4).unwrap();
        let rule8 = quadrature_rule(8).unwrap();
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>().max(1.0);
        let mut exact = 0.0;
        let mut idx = 0;
        let mut terms = Vec::new();
        for total in 0..=4u32 {
            for i in 0..=total {
                let j = total - i;
                terms.push((i, j, coeffs[idx]));
                exact += coeffs[idx] * fact(i) * fact(j) / fact(i + j + 2);
                idx += 1;
            }
        }
        let eval = |rule: &thermoflow::quadrature::QuadratureRule| -> f64 {
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| {
                    let (x, y) = (p[1], p[2]);
                    w * terms
                        .iter()
                        .map(|&(i, j, c)| c * x.powi(i as i32) * y.powi(j as i32))
                        .sum::<f64>()
                })
                .sum()
        };
        prop_assert!((eval(&rule4) - exact).abs() < 1e-13);
        prop_assert!((eval(&rule8) - exact).abs() < 1e-13);
    }
}
