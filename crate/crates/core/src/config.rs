//! Numerical knobs that the asymptotic theory leaves unspecified.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PaperParams;

/// Constants and truncation controls. Every field is positive.
///
/// The unnamed constants `c_1..c_23` of the estimates are carried as `c`,
/// all defaulting to 1; none of the computations below depend on them except
/// the optional overlap floor of eigenvector matching, which uses `c[3]` (that is, `c_4`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericConfig {
    pub c: Vec<f64>,
    /// Multiplier `m` in the resonance ball `Γ(m·ρ^α)`; `None` uses `p`.
    pub resonance_radius_factor: Option<f64>,
    /// Multiplier in the cluster ball `|a| < m·ρ^α` of `B_k`; `None` uses `p₁`.
    pub cluster_radius_factor: Option<f64>,
    /// Order of the known part `F = |x|² + F_{n}`; `None` uses `k₁ − 1`.
    pub known_part_order: Option<usize>,
    /// Maximal chain length of the single-resonance sums; `None` uses `2p₁`.
    pub chain_depth: Option<usize>,
    /// Number of `E_s` iterations for the resonance known part; `None` uses `k₂ − 1`.
    pub resonance_known_order: Option<usize>,
    /// Couplings below this magnitude are dropped from chain enumeration.
    pub coupling_floor: f64,
    /// Extra plane waves beyond the request in oracle truncations.
    pub oracle_cutoff_margin: f64,
    /// Momentum radius of local oracle patches.
    pub oracle_patch_radius: f64,
    /// Maximal plane-wave count of a single oracle solve.
    pub oracle_max_basis: usize,
    /// Acceptable eigenvalue drift under the ×1.25 truncation check.
    pub eig_tolerance: f64,
    /// Maximal size of a resonance cluster `B_k`.
    pub max_cluster: usize,
    pub mc_samples: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig {
            c: vec![1.0; 23],
            resonance_radius_factor: Some(2.0),
            cluster_radius_factor: Some(2.0),
            known_part_order: Some(3),
            chain_depth: Some(4),
            resonance_known_order: Some(3),
            coupling_floor: 1e-14,
            oracle_cutoff_margin: 6.0,
            oracle_patch_radius: 9.0,
            oracle_max_basis: 6000,
            eig_tolerance: 1e-8,
            max_cluster: 4000,
            mc_samples: 100_000,
        }
    }
}

impl NumericConfig {
    /// Settings with every order and radius at its nominal value.
    pub fn literal() -> Self {
        NumericConfig {
            resonance_radius_factor: None,
            cluster_radius_factor: None,
            known_part_order: None,
            chain_depth: None,
            resonance_known_order: None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str| Err(Error::Config(format!("numeric.{name} must be positive")));
        if self.c.iter().any(|&c| !(c > 0.0)) {
            return bad("c");
        }
        for (name, v) in [
            ("resonance_radius_factor", self.resonance_radius_factor),
            ("cluster_radius_factor", self.cluster_radius_factor),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return bad(name);
                }
            }
        }
        for (name, v) in [
            ("coupling_floor", self.coupling_floor),
            ("oracle_cutoff_margin", self.oracle_cutoff_margin),
            ("oracle_patch_radius", self.oracle_patch_radius),
            ("eig_tolerance", self.eig_tolerance),
        ] {
            if !(v > 0.0) {
                return bad(name);
            }
        }
        for (name, v) in [
            ("known_part_order", self.known_part_order),
            ("chain_depth", self.chain_depth),
            ("resonance_known_order", self.resonance_known_order),
        ] {
            if v == Some(0) {
                return bad(name);
            }
        }
        if self.oracle_max_basis == 0 || self.max_cluster == 0 || self.mc_samples == 0 {
            return bad("oracle_max_basis/max_cluster/mc_samples");
        }
        if let (Some(r), Some(c)) = (self.resonance_radius_factor, self.cluster_radius_factor) {
            if c > r {
                return Err(Error::Config(
                    "numeric.cluster_radius_factor may not exceed resonance_radius_factor".into(),
                ));
            }
        }
        Ok(())
    }

    /// Constant `c_i` with one-based index.
    pub fn constant(&self, i: usize) -> f64 {
        self.c.get(i.wrapping_sub(1)).copied().unwrap_or(1.0)
    }

    pub fn resonance_radius(&self, params: &PaperParams) -> f64 {
        self.resonance_radius_factor.unwrap_or(params.p as f64) * params.rho_alpha()
    }

    pub fn cluster_radius(&self, params: &PaperParams) -> f64 {
        self.cluster_radius_factor.unwrap_or(params.p1 as f64) * params.rho_alpha()
    }

    pub fn known_order(&self, params: &PaperParams) -> usize {
        self.known_part_order
            .unwrap_or((params.k1 - 1).max(1) as usize)
    }

    pub fn chain_depth(&self, params: &PaperParams) -> usize {
        self.chain_depth.unwrap_or((2 * params.p1).max(1) as usize)
    }

    pub fn resonance_known_order(&self, params: &PaperParams) -> usize {
        self.resonance_known_order
            .unwrap_or((params.k2() - 1).max(1) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        NumericConfig::default().validate().unwrap();
        NumericConfig::literal().validate().unwrap();
    }

    #[test]
    fn literal_uses_nominal_radii() {
        let p = PaperParams::base_preset(2, 40.0).unwrap();
        let c = NumericConfig::literal();
        assert!((c.resonance_radius(&p) - 43.0 * p.rho_alpha()).abs() < 1e-12);
        assert_eq!(c.known_order(&p), 9);
        assert_eq!(c.chain_depth(&p), 30);
    }

    #[test]
    fn rejects_nonpositive() {
        let c = NumericConfig { eig_tolerance: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = NumericConfig { cluster_radius_factor: Some(5.0), ..Default::default() };
        assert!(c.validate().is_err());
    }
}
