//! Stress and heat-conductivity closures plus randomized property checkers.
//!
//! Three generalized-Newtonian families are shipped: Carreau-Yasuda,
//! power-law, and a regularized viscoplastic (yield stress) law given in
//! implicit form and solved pointwise by a scalar root finder. All of them
//! admit the scalar form S = nu_eff(|D|, theta) D, which is what the Picard
//! linearization of the momentum equation uses.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Symmetric 2x2 tensor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 {
        xx: 0.0,
        yy: 0.0,
        xy: 0.0,
    };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        SymTensor2 { xx, yy, xy }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        SymTensor2 {
            xx: a,
            yy: b,
            xy: 0.0,
        }
    }

    /// Frobenius inner product A : B.
    #[inline]
    pub fn inner(&self, other: &SymTensor2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn scale(&self, s: f64) -> SymTensor2 {
        SymTensor2 {
            xx: s * self.xx,
            yy: s * self.yy,
            xy: s * self.xy,
        }
    }

    pub fn sub(&self, other: &SymTensor2) -> SymTensor2 {
        SymTensor2 {
            xx: self.xx - other.xx,
            yy: self.yy - other.yy,
            xy: self.xy - other.xy,
        }
    }
}

/// Temperature-dependent coefficient, bounded between two positive constants
/// and extended continuously to nonpositive arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaCoeff {
    Constant(f64),
    /// base + gain * s/(1+s) with s = max(theta, 0); bounds [base, base+gain].
    Saturating { base: f64, gain: f64 },
}

impl ThetaCoeff {
    pub fn eval(&self, theta: f64) -> f64 {
        match *self {
            ThetaCoeff::Constant(c) => c,
            ThetaCoeff::Saturating { base, gain } => {
                let s = theta.max(0.0);
                base + gain * s / (1.0 + s)
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ThetaCoeff::Constant(c) => (c, c),
            ThetaCoeff::Saturating { base, gain } => (base, base + gain),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StressModel {
    /// S = alpha(theta) D + beta(theta) (1 + Gamma(theta) |D|^2)^((r-2)/2) D.
    CarreauYasuda {
        r: f64,
        alpha: ThetaCoeff,
        beta: ThetaCoeff,
        gamma: ThetaCoeff,
    },
    /// S = K |D|^(r-2) D, with S = 0 at D = 0.
    PowerLaw { r: f64, consistency: f64 },
    /// Yield-stress law in regularized implicit form; `eps_reg` in (0,1).
    HbRegularized {
        r: f64,
        tau_y: f64,
        consistency: f64,
        eps_reg: f64,
    },
}

impl StressModel {
    pub fn newtonian(viscosity2: f64) -> StressModel {
        StressModel::PowerLaw {
            r: 2.0,
            consistency: viscosity2,
        }
    }

    pub fn power_exponent(&self) -> f64 {
        match *self {
            StressModel::CarreauYasuda { r, .. }
            | StressModel::PowerLaw { r, .. }
            | StressModel::HbRegularized { r, .. } => r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.power_exponent();
        if !(r > 1.0) {
            return Err(Error::InvalidInput(format!(
                "power-law exponent r must exceed 1 (= 2d/(d+2) for d = 2), got {r}"
            )));
        }
        match *self {
            StressModel::CarreauYasuda {
                alpha, beta, gamma, ..
            } => {
                for (name, c) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
                    let (lo, hi) = c.bounds();
                    if !(lo > 0.0 && hi >= lo) {
                        return Err(Error::InvalidInput(format!(
                            "coefficient {name} must be bounded between positive constants, got [{lo}, {hi}]"
                        )));
                    }
                }
            }
            StressModel::PowerLaw { consistency, .. } => {
                if !(consistency > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "consistency must be positive, got {consistency}"
                    )));
                }
            }
            StressModel::HbRegularized {
                tau_y,
                consistency,
                eps_reg,
                ..
            } => {
                if !(tau_y >= 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "yield stress must be nonnegative, got {tau_y}"
                    )));
                }
                if !(consistency > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "consistency must be positive, got {consistency}"
                    )));
                }
                if !(eps_reg > 0.0 && eps_reg < 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "eps_reg must lie in (0,1), got {eps_reg}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Evaluates the stress law. Defined for every real theta (coefficients
/// extend continuously below zero); the solver itself only ever passes
/// positive temperatures.
pub fn stress_raw(model: &StressModel, d: &SymTensor2, theta: f64) -> Result<SymTensor2> {
    match *model {
        StressModel::CarreauYasuda {
            r,
            alpha,
            beta,
            gamma,
        } => {
            let z = d.inner(d);
            let factor = alpha.eval(theta)
                + beta.eval(theta) * (1.0 + gamma.eval(theta) * z).powf(0.5 * (r - 2.0));
            Ok(d.scale(factor))
        }
        StressModel::PowerLaw { r, consistency } => {
            let mag = d.norm();
            if mag == 0.0 {
                Ok(SymTensor2::ZERO)
            } else {
                Ok(d.scale(consistency * mag.powf(r - 2.0)))
            }
        }
        StressModel::HbRegularized { .. } => hb_regularized_solve(model, d),
    }
}

/// Public entry point honoring the positivity contract on theta.
pub fn stress(model: &StressModel, d: &SymTensor2, theta: f64) -> Result<SymTensor2> {
    if !(theta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "stress evaluation requires theta > 0, got {theta}"
        )));
    }
    stress_raw(model, d, theta)
}

/// Scalar viscosity with stress = nu_eff * D exactly. Infinite for the
/// power law with r < 2 at D = 0 (the Picard loop never needs that case for
/// the shipped scenarios; assembly reports non-finite viscosities).
pub fn effective_viscosity(model: &StressModel, d: &SymTensor2, theta: f64) -> Result<f64> {
    match *model {
        StressModel::CarreauYasuda {
            r,
            alpha,
            beta,
            gamma,
        } => {
            let z = d.inner(d);
            Ok(alpha.eval(theta)
                + beta.eval(theta) * (1.0 + gamma.eval(theta) * z).powf(0.5 * (r - 2.0)))
        }
        StressModel::PowerLaw { r, consistency } => {
            let mag = d.norm();
            if mag == 0.0 {
                if r == 2.0 {
                    Ok(consistency)
                } else if r > 2.0 {
                    Ok(0.0)
                } else {
                    Ok(f64::INFINITY)
                }
            } else {
                Ok(consistency * mag.powf(r - 2.0))
            }
        }
        StressModel::HbRegularized { eps_reg, tau_y, .. } => {
            let mag = d.norm();
            let linear_branch = 0.999 * eps_reg * tau_y / (1.0 - eps_reg * eps_reg);
            if mag <= linear_branch {
                // below the regularized yield threshold the implicit relation
                // reduces to s = |D| / eps exactly
                Ok(1.0 / eps_reg)
            } else {
                let s = hb_scalar_solve(model, mag)?;
                Ok(s / mag)
            }
        }
    }
}

/// Residual of the regularized implicit relation restricted to aligned
/// tensors: S = s D/|D| with |D| = d.
fn hb_residual(s: f64, d: f64, r: f64, tau_y: f64, k: f64, eps: f64) -> f64 {
    let a = s - eps * d;
    let plus = (a.abs() - tau_y).max(0.0);
    let b = d - eps * s;
    let b_pow = b.abs().powf(r - 1.0) * b.signum();
    plus * a - k * (tau_y + plus) * b_pow
}

fn hb_scalar_solve(model: &StressModel, d: f64) -> Result<f64> {
    let StressModel::HbRegularized {
        r,
        tau_y,
        consistency: k,
        eps_reg: eps,
    } = *model
    else {
        return Err(Error::InvalidInput("not a viscoplastic model".into()));
    };
    if d == 0.0 {
        return Ok(0.0);
    }
    let g = |s: f64| hb_residual(s, d, r, tau_y, k, eps);
    let mut lo = 0.0;
    let mut g_lo = g(lo);
    if g_lo.abs() == 0.0 {
        return Ok(lo);
    }
    let mut hi = tau_y + k * d.powf(r - 1.0) + d / eps + 1.0;
    let mut g_hi = g(hi);
    let mut expand = 0;
    while g_hi <= 0.0 {
        hi *= 2.0;
        g_hi = g(hi);
        expand += 1;
        if expand > 200 {
            return Err(Error::RootFindFailed(format!(
                "no sign change bracketing the stress magnitude for |D| = {d}"
            )));
        }
    }
    let scale = g_hi.abs().max(g_lo.abs()).max(1.0);
    let tol = 1e-12 * scale.min(1e12).max(1.0);
    // safeguarded secant (Illinois false position) with bisection fallback
    let mut side = 0i32;
    for _ in 0..100 {
        let mut s = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if !s.is_finite() || s <= lo || s >= hi {
            s = 0.5 * (lo + hi);
        }
        let gs = g(s);
        if gs.abs() <= tol || (hi - lo) <= 1e-15 * hi.max(1.0) {
            return Ok(s);
        }
        if gs > 0.0 {
            hi = s;
            g_hi = gs;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = s;
            g_lo = gs;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        }
    }
    let s = 0.5 * (lo + hi);
    if g(s).abs() <= 1e-9 * scale {
        Ok(s)
    } else {
        Err(Error::RootFindFailed(format!(
            "stress-magnitude residual {:.3e} after 100 iterations (|D| = {d})",
            g(s)
        )))
    }
}

/// Stress of the regularized yield-stress model: S = s(|D|) D/|D|.
pub fn hb_regularized_solve(model: &StressModel, d: &SymTensor2) -> Result<SymTensor2> {
    let mag = d.norm();
    if mag == 0.0 {
        return Ok(SymTensor2::ZERO);
    }
    let s = hb_scalar_solve(model, mag)?;
    Ok(d.scale(s / mag))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConductivityLaw {
    Constant(f64),
    /// c1 + c2 * min(sqrt(max(theta,0)), cap): bounded (effective upper bound
    /// c1 + c2*cap) while also matching the square-root growth form.
    BoundedAffineSqrt { c1: f64, c2: f64, cap: f64 },
}

impl ConductivityLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConductivityLaw::Constant(c) => {
                if !(c > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "conductivity must be positive, got {c}"
                    )));
                }
            }
            ConductivityLaw::BoundedAffineSqrt { c1, c2, cap } => {
                if !(c1 > 0.0 && c2 > 0.0 && cap > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "conductivity parameters must be positive, got c1={c1} c2={c2} cap={cap}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Heat conductivity; defined for every real theta, no clamping of the input.
pub fn conductivity(law: &ConductivityLaw, theta: f64) -> f64 {
    match *law {
        ConductivityLaw::Constant(c) => c,
        ConductivityLaw::BoundedAffineSqrt { c1, c2, cap } => {
            c1 + c2 * theta.max(0.0).sqrt().min(cap)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicityReport {
    pub min_pairing: f64,
    /// min over sampled pairs of pairing / (|S1-S2|^2 + |tau1-tau2|^2).
    pub strong_mono_constant_est: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct GrowthCoercivityReport {
    /// smallest c with |S| <= c (|tau|^(r-1) + 1) over the samples.
    pub growth_c_est: f64,
    /// largest c with S:tau >= -g + c (|S|^r' + |tau|^r), constant g.
    pub coercivity_c_est: f64,
    pub offset_g: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct ThetaLipschitzReport {
    pub c_est: f64,
    pub samples: usize,
    pub seed: u64,
}

fn sample_sym(rng: &mut ChaCha8Rng, scale: f64) -> SymTensor2 {
    SymTensor2 {
        xx: rng.random_range(-scale..scale),
        yy: rng.random_range(-scale..scale),
        xy: rng.random_range(-scale..scale),
    }
}

pub fn check_monotonicity(
    model: &StressModel,
    n_samples: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_pairing = f64::INFINITY;
    let mut c_est = f64::INFINITY;
    for _ in 0..n_samples.max(1) {
        let t1 = sample_sym(&mut rng, 2.0);
        let t2 = sample_sym(&mut rng, 2.0);
        let s = rng.random_range(-1.0..5.0);
        let s1 = stress_raw(model, &t1, s)?;
        let s2 = stress_raw(model, &t2, s)?;
        let ds = s1.sub(&s2);
        let dt = t1.sub(&t2);
        let pairing = ds.inner(&dt);
        min_pairing = min_pairing.min(pairing);
        let denom = ds.inner(&ds) + dt.inner(&dt);
        if denom > 1e-14 {
            c_est = c_est.min(pairing / denom);
        }
    }
    Ok(MonotonicityReport {
        min_pairing,
        strong_mono_constant_est: c_est,
        samples: n_samples,
        seed,
    })
}

pub fn check_growth_coercivity(
    model: &StressModel,
    n_samples: usize,
    seed: u64,
) -> Result<GrowthCoercivityReport> {
    let r = model.power_exponent();
    let r_conj = r / (r - 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut growth = 0.0_f64;
    let mut min_pair = f64::INFINITY;
    let mut pairs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples.max(1) {
        let tau = sample_sym(&mut rng, 3.0);
        let s = rng.random_range(-1.0..5.0);
        let sig = stress_raw(model, &tau, s)?;
        let pairing = sig.inner(&tau);
        growth = growth.max(sig.norm() / (tau.norm().powf(r - 1.0) + 1.0));
        min_pair = min_pair.min(pairing);
        pairs.push((pairing, sig.norm().powf(r_conj) + tau.norm().powf(r)));
    }
    let offset_g = (-min_pair).max(0.0);
    let mut coercivity = f64::INFINITY;
    for (pairing, denom) in pairs {
        if denom > 1e-14 {
            coercivity = coercivity.min((pairing + offset_g) / denom);
        }
    }
    Ok(GrowthCoercivityReport {
        growth_c_est: growth,
        coercivity_c_est: coercivity,
        offset_g,
        samples: n_samples,
        seed,
    })
}

pub fn check_theta_lipschitz(
    model: &StressModel,
    delta: f64,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ThetaLipschitzReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c_est = 0.0_f64;
    for _ in 0..n_samples.max(1) {
        let mut tau = sample_sym(&mut rng, 1.0);
        let mag = tau.norm();
        if mag > 0.0 {
            tau = tau.scale(rng.random_range(0.0..radius) / mag);
        }
        let eta1 = rng.random_range(delta..1.0 / delta);
        let eta2 = rng.random_range(delta..1.0 / delta);
        if (eta1 - eta2).abs() < 1e-12 {
            continue;
        }
        let s1 = stress_raw(model, &tau, eta1)?;
        let s2 = stress_raw(model, &tau, eta2)?;
        c_est = c_est.max(s1.sub(&s2).norm() / (eta1 - eta2).abs());
    }
    Ok(ThetaLipschitzReport {
        c_est,
        samples: n_samples,
        seed,
    })
}

/// Samples theta over [lo, hi] and verifies the declared conductivity bounds
/// c1 <= kappa(theta) <= c2 (sqrt(theta) + 1); returns the worst margins.
pub fn check_conductivity_bounds(
    law: &ConductivityLaw,
    lo: f64,
    hi: f64,
    n_samples: usize,
    seed: u64,
) -> (f64, f64) {
    let (c1, c2) = match *law {
        ConductivityLaw::Constant(c) => (c, c),
        ConductivityLaw::BoundedAffineSqrt { c1, c2, .. } => (c1, c1.max(c2)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lower_margin = f64::INFINITY;
    let mut upper_margin = f64::INFINITY;
    for _ in 0..n_samples.max(1) {
        let theta = rng.random_range(lo..hi);
        let k = conductivity(law, theta);
        lower_margin = lower_margin.min(k - c1);
        upper_margin = upper_margin.min(c2 * (theta.max(0.0).sqrt() + 1.0) - k);
    }
    (lower_margin, upper_margin)
}
