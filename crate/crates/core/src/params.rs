//! Exponent system shared by every asymptotic formula.
//!
//! All quantities are derived from the dimension `d`, the smoothness order `s`
//! and the exponent denominator `q`. Two presets exist: the base system with
//! `q = 3^d + d + 2` and the resonance-domain system with `q = 4·3^d·(d+1)`.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

type Q = Ratio<i128>;

/// Which exponent denominator the parameters were built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `q = 3^d + d + 2`.
    Base,
    /// `q = 4·3^d·(d+1)`, used for the resonance-domain simple sets.
    Resonant,
}

/// One of the inequalities that the exponent system must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// `α₁ + dα < 1 − α`
    SlabPlusBall,
    /// `dα < α_d / 2`
    BallBelowHalfTop,
    /// `k₁ ≤ (p − q(d−1)/2) / 3`
    SeriesOrder,
    /// `p₁α₁ ≥ pα`
    ClusterRadius,
    /// `3k₁α > d + 2α`
    SeriesAccuracy,
    /// `α_k + (k−1)α < 1`
    ExponentBelowOne(u32),
    /// `α_{k+1} > 2(α_k + (k−1)α)`
    ExponentGrowth(u32),
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inequality::SlabPlusBall => write!(f, "alpha_1 + d*alpha < 1 - alpha"),
            Inequality::BallBelowHalfTop => write!(f, "d*alpha < alpha_d/2"),
            Inequality::SeriesOrder => write!(f, "k1 <= (p - q(d-1)/2)/3"),
            Inequality::ClusterRadius => write!(f, "p1*alpha_1 >= p*alpha"),
            Inequality::SeriesAccuracy => write!(f, "3*k1*alpha > d + 2*alpha"),
            Inequality::ExponentBelowOne(k) => {
                write!(f, "alpha_{k} + ({k}-1)*alpha < 1")
            }
            Inequality::ExponentGrowth(k) => {
                write!(f, "alpha_{} > 2(alpha_{k} + ({k}-1)*alpha)", k + 1)
            }
        }
    }
}

/// The exponent system at a fixed spectral scale `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperParams {
    pub d: usize,
    pub s: i64,
    pub p: i64,
    pub q_exp: i64,
    pub k1: i64,
    pub p1: i64,
    pub rho: f64,
    pub preset: Preset,
    violations: Vec<Inequality>,
}

fn pow3(k: u32) -> i64 {
    3i64.pow(k)
}

impl PaperParams {
    /// Builds the base system. Inequality failures are recorded, not fatal;
    /// see [`PaperParams::violations`].
    pub fn new(d: usize, s: i64, rho: f64) -> Result<Self> {
        Self::with_preset(d, s, rho, Preset::Base)
    }

    pub fn with_preset(d: usize, s: i64, rho: f64, preset: Preset) -> Result<Self> {
        if d < 1 || d > 12 {
            return Err(Error::Config(format!("dimension d={d} outside 1..=12")));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Config(format!("rho={rho} must be positive")));
        }
        let d3 = pow3(d as u32);
        let q_exp = match preset {
            Preset::Base => d3 + d as i64 + 2,
            Preset::Resonant => 4 * d3 * (d as i64 + 1),
        };
        let p = s - d as i64;
        // floor(d / (3α)) = floor(d·q / 3)
        let k1 = (d as i64 * q_exp).div_euclid(3) + 2;
        let p1 = p.div_euclid(3) + 1;
        let mut out = PaperParams {
            d,
            s,
            p,
            q_exp,
            k1,
            p1,
            rho,
            preset,
            violations: Vec::new(),
        };
        out.violations = validate_params(&out);
        Ok(out)
    }

    /// Base preset with the smallest smoothness order used by the theory,
    /// `s₀ = (3d−1)(3^d+d+2)/2 + d·3^d/4 + d + 6` rounded up.
    pub fn base_preset(d: usize, rho: f64) -> Result<Self> {
        Self::new(d, base_s0(d), rho)
    }

    /// Resonance-domain preset with `s = 6·3^d(d+1)² + d`.
    pub fn resonant_preset(d: usize, rho: f64) -> Result<Self> {
        Self::with_preset(d, resonant_s0(d), rho, Preset::Resonant)
    }

    /// Same exponents at a different spectral scale.
    pub fn with_rho(&self, rho: f64) -> Self {
        let mut out = self.clone();
        out.rho = rho;
        out
    }

    pub fn violations(&self) -> &[Inequality] {
        &self.violations
    }

    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        1.0 / self.q_exp as f64
    }

    /// `α_k = 3^k α`.
    pub fn alpha_k(&self, k: u32) -> f64 {
        pow3(k) as f64 / self.q_exp as f64
    }

    /// `ρ^{α_k}`.
    pub fn rho_alpha_k(&self, k: u32) -> f64 {
        self.rho.powf(self.alpha_k(k))
    }

    pub fn rho_alpha(&self) -> f64 {
        self.rho.powf(self.alpha())
    }

    /// `ε₁ = ρ^{−d−2α}`.
    pub fn eps1(&self) -> f64 {
        self.rho.powf(-(self.d as f64) - 2.0 * self.alpha())
    }

    /// `k₂ = floor(d/(9α)) + 2`.
    pub fn k2(&self) -> i64 {
        (self.d as i64 * self.q_exp).div_euclid(9) + 2
    }

    /// Order of the Bloch-function expansion,
    /// `n = floor((2p − (3d−1)q − d·3^d/2 − 6)/6)`, clamped at zero.
    pub fn bloch_order(&self) -> i64 {
        let d = self.d as i64;
        let num = Q::from_integer((2 * self.p - (3 * d - 1) * self.q_exp - 6) as i128)
            - Q::new((d * pow3(self.d as u32)) as i128, 2);
        let n = (num / Q::from_integer(6)).floor().to_integer();
        n.max(0) as i64
    }
}

/// Smallest base-preset smoothness order, rounded up to an integer.
pub fn base_s0(d: usize) -> i64 {
    let di = d as i128;
    let d3 = 3i128.pow(d as u32);
    let v = Q::new((3 * di - 1) * (d3 + di + 2), 2) + Q::new(di * d3, 4) + Q::from_integer(di + 6);
    v.ceil().to_integer() as i64
}

/// Smoothness order of the resonance-domain preset.
pub fn resonant_s0(d: usize) -> i64 {
    let d3 = pow3(d as u32);
    6 * d3 * (d as i64 + 1).pow(2) + d as i64
}

/// Evaluates every inequality on exact rationals and returns the failures.
pub fn validate_params(params: &PaperParams) -> Vec<Inequality> {
    let d = params.d as i128;
    let q = params.q_exp as i128;
    let alpha = Q::new(1, q);
    let ak = |k: u32| alpha * Q::from_integer(3i128.pow(k));
    let p = Q::from_integer(params.p as i128);
    let k1 = Q::from_integer(params.k1 as i128);
    let p1 = Q::from_integer(params.p1 as i128);
    let dq = Q::from_integer(d);
    let one = Q::from_integer(1);
    let two = Q::from_integer(2);
    let three = Q::from_integer(3);

    let mut out = Vec::new();
    if !(ak(1) + dq * alpha < one - alpha) {
        out.push(Inequality::SlabPlusBall);
    }
    if !(dq * alpha < ak(params.d as u32) / two) {
        out.push(Inequality::BallBelowHalfTop);
    }
    if !(k1 <= (p - Q::from_integer(q) * Q::from_integer(d - 1) / two) / three) {
        out.push(Inequality::SeriesOrder);
    }
    if !(p1 * ak(1) >= p * alpha) {
        out.push(Inequality::ClusterRadius);
    }
    if !(three * k1 * alpha > dq + two * alpha) {
        out.push(Inequality::SeriesAccuracy);
    }
    for k in 1..=params.d as u32 {
        let km1 = Q::from_integer(k as i128 - 1);
        if !(ak(k) + km1 * alpha < one) {
            out.push(Inequality::ExponentBelowOne(k));
        }
        if !(ak(k + 1) > two * (ak(k) + km1 * alpha)) {
            out.push(Inequality::ExponentGrowth(k));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d2_base_values() {
        let p = PaperParams::base_preset(2, 10.0).unwrap();
        assert_eq!(p.q_exp, 13);
        assert_eq!(p.s, 45);
        assert_eq!(p.p, 43);
        assert_eq!(p.k1, 10);
        assert_eq!(p.p1, 15);
        assert!(p.violations().is_empty());
        assert!((p.alpha_k(1) - 3.0 / 13.0).abs() < 1e-15);
    }

    #[test]
    fn s_equal_d_breaks_series_order() {
        let p = PaperParams::new(2, 2, 10.0).unwrap();
        assert!(p.violations().contains(&Inequality::SeriesOrder));
    }

    #[test]
    fn d3_large_s_is_consistent() {
        let p = PaperParams::new(3, 200, 10.0).unwrap();
        assert_eq!(p.q_exp, 32);
        assert_eq!(p.k1, 34);
        assert!(p.violations().is_empty(), "{:?}", p.violations());
    }

    #[test]
    fn presets_consistent_across_dimensions() {
        for d in 2..=5 {
            assert!(PaperParams::base_preset(d, 5.0).unwrap().is_consistent());
            assert!(PaperParams::resonant_preset(d, 5.0).unwrap().is_consistent());
        }
    }

    #[test]
    fn resonant_preset_d2() {
        let p = PaperParams::resonant_preset(2, 10.0).unwrap();
        assert_eq!(p.q_exp, 108);
        assert_eq!(p.k2(), 26);
        assert_eq!(p.s, 488);
    }

    #[test]
    fn eps1_matches_definition() {
        let p = PaperParams::base_preset(2, 37.0).unwrap();
        assert_eq!(p.eps1(), 37f64.powf(-2.0 - 2.0 * (1.0 / 13.0)));
    }

    #[test]
    fn bloch_order_at_s0_is_one() {
        let p = PaperParams::base_preset(2, 10.0).unwrap();
        assert_eq!(p.bloch_order(), 1);
    }

    #[test]
    fn display_names_inequality() {
        assert_eq!(Inequality::ExponentGrowth(1).to_string(), "alpha_2 > 2(alpha_1 + (1-1)*alpha)");
    }
}
