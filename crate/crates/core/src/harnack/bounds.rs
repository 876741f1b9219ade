use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use super::{phi, CouplingConfig};
use crate::Error;

const PANELS: usize = 32;
const NODES: usize = 20;

/// `p(t) = (1 + 4λγ)²`
pub fn power_threshold(lambda: f64, gamma: f64) -> f64 {
    (1.0 + 4.0 * lambda * gamma).powi(2)
}

/// Exponential factor of the two-point power Harnack inequality,
/// `exp[√p m (Γ + 2κ₁λ²/(1−e^{−κ₁(t−s)})) / ((√p+1)(2(√p−1)² − 16λ²γ²))]`
/// with `Γ = κ₂²λ²T e^{2κ₁+2κ₂}` and `m = |x − y|²`.
pub fn power_harnack_constant(p: f64, s: f64, t: f64, config: &CouplingConfig, moment_term: f64) -> Result<f64, Error> {
    config.validate()?;
    if !(t > s) {
        return Err(Error::Domain(format!("power Harnack needs t > s, got s = {s}, t = {t}")));
    }
    let gamma = config.gamma_t.ok_or_else(|| Error::Unsupported("power Harnack needs gamma_t".into()))?;
    let (k1, k2, lambda) = (config.kappa1, config.kappa2, config.lambda);
    let threshold = power_threshold(lambda, gamma);
    if !(p >= threshold) {
        return Err(Error::Domain(format!("power Harnack needs p >= p(t) = {threshold}, got {p}")));
    }
    let sp = p.sqrt();
    let gap = 2.0 * (sp - 1.0).powi(2) - 16.0 * lambda * lambda * gamma * gamma;
    if !(gap > 0.0) {
        return Err(Error::Domain(format!("power Harnack denominator 2(√p−1)² − 16λ²γ² = {gap} is not positive")));
    }
    let big_gamma = k2 * k2 * lambda * lambda * config.horizon * (2.0 * k1 + 2.0 * k2).exp();
    let first = if k1 == 0.0 {
        2.0 * lambda * lambda / (t - s)
    } else {
        2.0 * k1 * lambda * lambda / -(-k1 * (t - s)).exp_m1()
    };
    Ok((sp * moment_term * (big_gamma + first) / ((sp + 1.0) * gap)).exp())
}

/// `φ(s,t) W₂²`, the entropy between the two terminal laws.
pub fn entropy_bound(config: &CouplingConfig, s: f64, t: f64, w2_sq: f64) -> Result<f64, Error> {
    Ok(config.phi(s, t)? * w2_sq)
}

/// `√(2φ(s,t)) W₂`
pub fn total_variation_bound(config: &CouplingConfig, s: f64, t: f64, w2_sq: f64) -> Result<f64, Error> {
    Ok((2.0 * phi(s, t, config.lambda, config.kappa1, config.kappa2)?).sqrt() * w2_sq.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityBound {
    /// Fisher-type `∫|∇ log ρ|^p ρ`.
    Et1,
    /// `∫ ρ^{p/(p−1)}`
    Et2,
    /// `∫ ρ log ρ`
    Et3,
}

fn integrate(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(NODES.try_into().expect("nonzero node count"));
    let h = (b - a) / PANELS as f64;
    (0..PANELS).map(|i| rule.integrate(a + i as f64 * h, a + (i + 1) as f64 * h, &f)).sum()
}

/// Right-hand sides of the density estimates for the law at `t` started at `s`;
/// `lambda(r)` bounds `‖σ_r⁻¹‖` and `grad_b(r)` bounds `‖∇b_r‖_∞`.
pub fn density_bound_rhs(
    kind: DensityBound,
    p: f64,
    s: f64,
    t: f64,
    lambda: &dyn Fn(f64) -> f64,
    grad_b: &dyn Fn(f64) -> f64,
    d: usize,
) -> Result<f64, Error> {
    if !(t > s) {
        return Err(Error::Domain(format!("density bounds need t > s, got s = {s}, t = {t}")));
    }
    match kind {
        DensityBound::Et1 | DensityBound::Et2 if !(p > 1.0) => {
            return Err(Error::Domain(format!("{kind:?} needs p > 1, got {p}")));
        }
        DensityBound::Et3 if !(p >= 0.0) => return Err(Error::Domain(format!("Et3 needs p >= 0, got {p}"))),
        _ => {}
    }
    let tau = t - s;
    let shift_integral = || {
        integrate(s, t, |r| {
            let l = lambda(r);
            l * l * (1.0 + (r - s) * grad_b(r)).powi(2)
        })
    };
    let sp = p.sqrt();
    let pi = std::f64::consts::PI;
    let value = match kind {
        DensityBound::Et1 => {
            let j = integrate(s, t, |r| ((r - s) * lambda(r) * grad_b(r)).powi(2));
            let inner = (p * (p - 1.0) / 2.0).max(1.0) * j / (tau * tau);
            inner.powf(p / 2.0 * (1.0 / (p - 1.0)).min(1.0))
        }
        DensityBound::Et2 => {
            let base = p * sp * shift_integral() / (4.0 * pi * (p - 1.0) * (sp + 1.0) * tau * tau);
            base.powf(d as f64 / (2.0 * (p - 1.0)))
        }
        DensityBound::Et3 => d as f64 / 2.0 * (shift_integral() / (4.0 * pi * (sp + 1.0) * tau * tau)).ln(),
    };
    if !value.is_finite() {
        return Err(Error::Domain(format!("{kind:?} evaluated to {value}")));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(gamma: f64) -> CouplingConfig {
        CouplingConfig { horizon: 1.0, kappa1: 1.0, kappa2: 0.5, lambda: 1.2, gamma_t: Some(gamma), weight_clip: None }
    }

    #[test]
    fn power_constant_reference_value() {
        let v = power_harnack_constant(4.0, 0.0, 1.0, &config(0.1), 0.7).unwrap();
        assert!((v - 22.384_215_998_181_617).abs() < 1e-10 * v);
        assert_eq!(power_harnack_constant(4.0, 0.0, 1.0, &config(0.1), 0.0).unwrap(), 1.0);
    }

    #[test]
    fn power_constant_threshold() {
        let cfg = config(0.5);
        let th = power_threshold(1.2, 0.5);
        assert!((th - 11.56).abs() < 1e-12);
        assert!(matches!(power_harnack_constant(th - 1e-6, 0.0, 1.0, &cfg, 1.0), Err(Error::Domain(_))));
        assert!(power_harnack_constant(th, 0.0, 1.0, &cfg, 1.0).unwrap().is_finite());
    }

    #[test]
    fn power_constant_additive_form() {
        let cfg = CouplingConfig { horizon: 2.0, kappa1: 0.8, kappa2: 0.0, lambda: 1.5, gamma_t: Some(0.0), weight_clip: None };
        let (p, m, tau) = (3.0f64, 0.4f64, 1.3f64);
        let sp = p.sqrt();
        let expected = (sp * m * 2.0 * 0.8 * 2.25 / ((sp + 1.0) * 2.0 * (sp - 1.0).powi(2) * (1.0 - (-0.8 * tau).exp()))).exp();
        let got = power_harnack_constant(p, 0.7, 0.7 + tau, &cfg, m).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn density_reference_values() {
        let l = |r: f64| 1.0 + r;
        let g = |r: f64| 2.0 + r.sin();
        let et1 = density_bound_rhs(DensityBound::Et1, 3.0, 0.5, 2.0, &l, &g, 3).unwrap();
        let et2 = density_bound_rhs(DensityBound::Et2, 3.0, 0.5, 2.0, &l, &g, 3).unwrap();
        let et3 = density_bound_rhs(DensityBound::Et3, 3.0, 0.5, 2.0, &l, &g, 2).unwrap();
        assert!((et1 - 29.637_183_580_223_31).abs() < 1e-10);
        assert!((et2 - 2.829_499_851_441_578).abs() < 1e-10);
        assert!((et3 - 0.432_028_701_020_476_76).abs() < 1e-10);
    }

    #[test]
    fn density_constant_inputs() {
        let one = |_: f64| 2.0;
        let zero = |_: f64| 0.0;
        assert_eq!(density_bound_rhs(DensityBound::Et1, 2.0, 0.0, 1.0, &one, &zero, 2).unwrap(), 0.0);
        let (p, tau, d) = (2.0f64, 0.5, 3usize);
        let sp = p.sqrt();
        let pi = std::f64::consts::PI;
        let et3 = density_bound_rhs(DensityBound::Et3, p, 1.0, 1.0 + tau, &one, &zero, d).unwrap();
        assert!((et3 - 1.5 * (4.0 / (4.0 * pi * (sp + 1.0) * tau)).ln()).abs() < 1e-12);
        let et2 = density_bound_rhs(DensityBound::Et2, p, 1.0, 1.0 + tau, &one, &zero, d).unwrap();
        let closed = (p * sp * 4.0 / (4.0 * pi * (p - 1.0) * (sp + 1.0) * tau)).powf(d as f64 / (2.0 * (p - 1.0)));
        assert!((et2 - closed).abs() < 1e-12);
        assert!(density_bound_rhs(DensityBound::Et2, 1.0, 0.0, 1.0, &one, &zero, d).is_err());
    }

    #[test]
    fn entropy_and_variation_bounds() {
        let cfg = CouplingConfig { horizon: 1.0, kappa1: 0.0, kappa2: 0.0, lambda: 1.0, gamma_t: None, weight_clip: None };
        assert!((entropy_bound(&cfg, 0.0, 2.0, 3.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((total_variation_bound(&cfg, 0.0, 2.0, 4.0).unwrap() - 2.0).abs() < 1e-15);
    }
}
