//! Quadrature rules on the reference triangle, all with positive weights.
//!
//! Weights sum to 1/2 (the reference-triangle area); physical integrals are
//! `|det J| * sum w_q f(x_q)`. Degrees 1-6 use classic symmetric rules;
//! degrees 7-8 fall back to a 25-point conical product rule.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates of the quadrature points.
    pub points: Vec<[f64; 3]>,
    /// Weights summing to the reference-triangle area 1/2.
    pub weights: Vec<f64>,
    /// Every polynomial of total degree <= exact_degree is integrated exactly.
    pub exact_degree: u32,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn orbit3(a: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    // permutations of (a, b, b) with a + 2b = 1
    let b = 0.5 * (1.0 - a);
    for p in [[a, b, b], [b, a, b], [b, b, a]] {
        pts.push(p);
        wts.push(w);
    }
}

fn orbit6(a: f64, b: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    let c = 1.0 - a - b;
    for p in [
        [a, b, c],
        [a, c, b],
        [b, a, c],
        [b, c, a],
        [c, a, b],
        [c, b, a],
    ] {
        pts.push(p);
        wts.push(w);
    }
}

/// 5-point Gauss-Legendre on [0,1].
const GL5: [(f64, f64); 5] = [
    (0.046910077030668004, 0.11846344252809454),
    (0.23076534494715845, 0.23931433524968323),
    (0.5, 0.28444444444444444),
    (0.76923465505284155, 0.23931433524968323),
    (0.95308992296933200, 0.11846344252809454),
];

/// Returns a rule whose `exact_degree` is at least `degree`.
pub fn quadrature_rule(degree: u32) -> Result<QuadratureRule> {
    if !(1..=8).contains(&degree) {
        return Err(Error::InvalidInput(format!(
            "quadrature degree must be in [1,8], got {degree}"
        )));
    }
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    let exact_degree;
    match degree {
        1 => {
            pts.push([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
            wts.push(1.0);
            exact_degree = 1;
        }
        2 => {
            orbit3(2.0 / 3.0, 1.0 / 3.0, &mut pts, &mut wts);
            exact_degree = 2;
        }
        3 | 4 => {
            // closed forms for the 6-point degree-4 rule
            let s = (38.0 - 44.0 * (2.0f64 / 5.0).sqrt()).sqrt();
            let b_small = (8.0 - 10.0f64.sqrt() - s) / 18.0;
            let b_large = (8.0 - 10.0f64.sqrt() + s) / 18.0;
            let t = (213125.0 - 53320.0 * 10.0f64.sqrt()).sqrt();
            orbit3(1.0 - 2.0 * b_small, (620.0 - t) / 3720.0, &mut pts, &mut wts);
            orbit3(1.0 - 2.0 * b_large, (620.0 + t) / 3720.0, &mut pts, &mut wts);
            exact_degree = 4;
        }
        5 => {
            pts.push([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
            wts.push(0.225);
            let s15 = 15.0f64.sqrt();
            let (a1, w1) = ((9.0 - 2.0 * s15) / 21.0, (155.0 + s15) / 1200.0);
            let (a2, w2) = ((9.0 + 2.0 * s15) / 21.0, (155.0 - s15) / 1200.0);
            orbit3(a1, w1, &mut pts, &mut wts);
            orbit3(a2, w2, &mut pts, &mut wts);
            exact_degree = 5;
        }
        6 => {
            orbit3(0.5014265096581791, 0.11678627572637937, &mut pts, &mut wts);
            orbit3(0.8738219710169955, 0.05084490637020682, &mut pts, &mut wts);
            orbit6(
                0.3103524510337844,
                0.6365024991213986,
                0.08285107561837357,
                &mut pts,
                &mut wts,
            );
            exact_degree = 6;
        }
        _ => {
            // Conical product: x = s, y = t(1-s), weight w_s w_t (1-s).
            for &(s, ws) in &GL5 {
                for &(t, wt) in &GL5 {
                    let x = s;
                    let y = t * (1.0 - s);
                    pts.push([1.0 - x - y, x, y]);
                    wts.push(ws * wt * (1.0 - s));
                }
            }
            exact_degree = 8;
        }
    }
    // tabulated weights above are normalized to sum to 1
    if degree <= 6 {
        for w in wts.iter_mut() {
            *w *= 0.5;
        }
    }
    Ok(QuadratureRule {
        points: pts,
        weights: wts,
        exact_degree,
    })
}
