//! Plane-wave coefficients of Bloch functions. Away from the diffraction
//! planes the eigenfunction is `e^{i(γ+t,x)}` plus corrections built from
//! chains of Fourier modes; near one plane it is close to `Φ_{j,β}`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::domains::Classifier;
use crate::error::{Error, Result};
use crate::lattice::{add, iadd, norm2, Lattice};
use crate::nonres::{known_part, SeriesContext};
use crate::oracle::{align_phase, match_eigenvalue, OracleSpectrum};
use crate::resonance::{HillState, SingleResonance};
use crate::Model;

/// Predicted coefficients `b(N, γ+γ')` keyed by the offset `γ'`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochExpansion {
    pub center: Vec<i64>,
    pub t: Vec<f64>,
    pub order: usize,
    /// `P = |γ+t|² + F(γ+t)` used in the denominators.
    pub known: f64,
    /// `A_1 … A_{order−1}`.
    pub terms: Vec<BTreeMap<Vec<i64>, Complex64>>,
    pub coeffs: BTreeMap<Vec<i64>, Complex64>,
    pub b_center: f64,
}

impl BlochExpansion {
    /// `b_center² + Σ|coeff|²`.
    pub fn norm2(&self) -> f64 {
        self.b_center * self.b_center + self.coeffs.values().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn coeff(&self, offset: &[i64]) -> Complex64 {
        if offset.iter().all(|&c| c == 0) {
            Complex64::new(self.b_center, 0.0)
        } else {
            self.coeffs.get(offset).copied().unwrap_or_default()
        }
    }
}

fn require_u(model: &Model, x: &[f64]) -> Result<()> {
    if Classifier::new(model).in_u(x) {
        Ok(())
    } else {
        Err(Error::OutsideShell(format!("{x:?} is not in the non-resonance domain")))
    }
}

/// First-order coefficients `q_{γ₁}/(|γ+t|² − |γ+γ₁+t|²)` keyed by `γ₁`.
pub fn phi_1(model: &Model, x: &[f64]) -> Result<BTreeMap<Vec<i64>, Complex64>> {
    require_u(model, x)?;
    let x2 = norm2(x);
    let mut out = BTreeMap::new();
    for (g, q) in model.truncated_potential().iter() {
        let d = x2 - norm2(&add(x, &model.lattice.vector(g)));
        if d == 0.0 {
            return Err(Error::Numerical(format!("vanishing denominator at {g:?}")));
        }
        out.insert(g.clone(), q / d);
    }
    Ok(out)
}

/// `A_1 … A_{order−1}` at `x` with denominators `P − |x+γ'|²`.
pub fn a_k_coeffs(ctx: &SeriesContext, lat: &Lattice, x: &[f64], p: f64, order: usize) -> Result<Vec<BTreeMap<Vec<i64>, Complex64>>> {
    let mut terms: Vec<BTreeMap<Vec<i64>, Complex64>> = Vec::new();
    let mut dens: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let mut den = |k: &Vec<i64>| -> Result<f64> {
        if let Some(d) = dens.get(k) {
            return Ok(*d);
        }
        let d = p - norm2(&add(x, &lat.vector(k)));
        if ctx.check_floor && d.abs() < ctx.floor {
            return Err(Error::DenominatorFloor { chain: vec![k.clone()], value: d, floor: ctx.floor });
        }
        dens.insert(k.clone(), d);
        Ok(d)
    };
    for k in 1..order {
        let mut next: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        if k == 1 {
            for (g, _, q) in &ctx.modes {
                *next.entry(g.clone()).or_default() += q;
            }
        } else {
            for (eta, a) in &terms[k - 2] {
                for (g, _, q) in &ctx.modes {
                    let target = iadd(eta, g);
                    if target.iter().all(|&c| c == 0) {
                        continue;
                    }
                    *next.entry(target).or_default() += q * a;
                }
            }
        }
        for (key, val) in next.iter_mut() {
            *val /= den(key)?;
        }
        terms.push(next);
    }
    Ok(terms)
}

/// Expansion of order `order` (`1` keeps only the centre) around `center + t`.
pub fn predict_expansion(model: &Model, ctx: &SeriesContext, center: &[i64], t: &[f64], order: usize) -> Result<BlochExpansion> {
    let lat = &model.lattice;
    let x = add(&lat.vector(center), t);
    require_u(model, &x)?;
    let known = known_part(model, ctx, &x)?;
    let order = order.max(1);
    let terms = a_k_coeffs(ctx, lat, &x, known, order)?;
    let mass: f64 = terms.iter().flat_map(|m| m.values()).map(|a| a.norm_sqr()).sum();
    let b_center = (1.0 + mass).powf(-0.5);
    let mut coeffs: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
    for m in &terms {
        for (k, a) in m {
            *coeffs.entry(k.clone()).or_default() += a;
        }
    }
    coeffs.values_mut().for_each(|c| *c *= b_center);
    Ok(BlochExpansion { center: center.to_vec(), t: t.to_vec(), order, known, terms, coeffs, b_center })
}

/// Order cap `n` of the expansion from the parameter system, and from the
/// chain closure of the truncated support (largest order at which a new
/// offset still appears, bounded by `limit`).
pub fn order_caps(model: &Model, ctx: &SeriesContext, limit: usize) -> (i64, usize) {
    let nominal = model.params.bloch_order();
    let mut seen: std::collections::BTreeSet<Vec<i64>> = std::collections::BTreeSet::new();
    let mut frontier: Vec<Vec<i64>> = vec![vec![0; model.dim()]];
    let mut closure = 1;
    for k in 1..limit {
        let mut next = Vec::new();
        for f in &frontier {
            for (g, _, _) in &ctx.modes {
                let n = iadd(f, g);
                if seen.insert(n.clone()) {
                    next.push(n);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        closure = k + 1;
        frontier = next;
    }
    (nominal, closure)
}

/// Comparison of an expansion with the matched oracle eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenfunctionError {
    pub lambda: f64,
    /// `‖b_oracle − b_predicted‖` after aligning `arg b(N, γ) = 0`.
    pub error: f64,
    /// `Σ_{γ'≠γ} |b(N, γ')|²`.
    pub tail: f64,
    pub center_mass: f64,
    pub multiplicity: usize,
}

/// Matches `expansion.center` in `spec` within `half_width` and compares coefficients.
pub fn eigenfunction_error(spec: &OracleSpectrum, lat: &Lattice, expansion: &BlochExpansion, half_width: f64) -> Result<EigenfunctionError> {
    let m = match_eigenvalue(spec, &expansion.center, &expansion.t, lat, half_width, None)
        .ok_or_else(|| Error::Numerical(format!("no eigenvalue matched to {:?}", expansion.center)))?;
    let ic = spec
        .index_of(&expansion.center)
        .ok_or_else(|| Error::Invalid("centre outside the oracle basis".into()))?;
    let mut u = m.vector.clone();
    align_phase(&mut u, ic);
    let mut err2 = 0.0;
    for (i, k) in spec.basis.iter().enumerate() {
        let off: Vec<i64> = k.iter().zip(&expansion.center).map(|(a, b)| a - b).collect();
        err2 += (u[i] - expansion.coeff(&off)).norm_sqr();
    }
    for (off, c) in &expansion.coeffs {
        if spec.index_of(&iadd(&expansion.center, off)).is_none() {
            err2 += c.norm_sqr();
        }
    }
    let center_mass = u[ic].norm_sqr();
    let total: f64 = u.iter().map(|c| c.norm_sqr()).sum();
    Ok(EigenfunctionError {
        lambda: m.lambda,
        error: err2.sqrt(),
        tail: (total - center_mass).max(0.0),
        center_mass,
        multiplicity: m.multiplicity,
    })
}

/// Number of stored eigenvectors with `|b(N, γ)|² > 1/2`.
pub fn dominant_count(spec: &OracleSpectrum, gamma: &[i64]) -> usize {
    match spec.index_of(gamma) {
        Some(i) => spec.stored().filter(|&c| spec.eigen.vector(c)[i].norm_sqr() > 0.5).count(),
        None => 0,
    }
}

/// Distance between the oracle eigenfunction closest to `Φ_{j,β}` and `Φ_{j,β}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceEigenfunctionError {
    pub lambda: f64,
    pub distance: f64,
    /// `|(Ψ_N, Φ_{j,β})|²` summed over the matched cluster.
    pub overlap: f64,
    /// A mode of `Φ_{j,β}` above `1e−14` fell outside the basis.
    pub truncated: bool,
}

/// `‖Ψ_N − Φ_{j,β}‖` after phase alignment, over stored eigenvectors within
/// `half_width` of `λ_{j,β}`. `member` is the caller's simple-set verdict.
pub fn resonance_eigenfunction_error(
    spec: &OracleSpectrum,
    lat: &Lattice,
    ctx: &SingleResonance,
    state: &HillState,
    half_width: f64,
    member: bool,
) -> Result<ResonanceEigenfunctionError> {
    if !member {
        return Err(Error::Invalid(format!("{state:?} is not in the simple set")));
    }
    let pair = ctx.pair(state)?;
    let lambda = ctx.lambda(state)?;
    let mut phi: Vec<(usize, Complex64)> = Vec::new();
    let mut phi_norm = 0.0;
    let mut truncated = false;
    for m in pair.m_lo..=pair.m_hi() {
        let c = pair.coeff(m);
        if c.norm() == 0.0 {
            continue;
        }
        phi_norm += c.norm_sqr();
        let k = lat.coset_coords(&ctx.momentum(&state.beta, m), &spec.t)?;
        match spec.index_of(&k) {
            Some(i) => phi.push((i, c)),
            None => truncated |= c.norm() > 1e-14,
        }
    }
    let cand: Vec<usize> = spec.stored().filter(|&c| (spec.eigenvalue(c) - lambda).abs() < half_width).collect();
    if cand.is_empty() {
        return Err(Error::Numerical(format!("no stored eigenvalue within {half_width} of {lambda}")));
    }
    let overlap = |c: usize| -> Complex64 {
        let u = spec.eigen.vector(c);
        phi.iter().map(|(i, f)| u[*i] * f.conj()).sum()
    };
    let mut best = (0.0, cand[0]);
    let mut i = 0;
    while i < cand.len() {
        let mut j = i + 1;
        while j < cand.len() && (spec.eigen.values[cand[j]] - spec.eigen.values[cand[j - 1]]).abs() < 1e-10 {
            j += 1;
        }
        let mass: f64 = cand[i..j].iter().map(|&c| overlap(c).norm_sqr()).sum();
        if mass > best.0 {
            best = (mass, cand[i]);
        }
        i = j;
    }
    let (mass, col) = best;
    Ok(ResonanceEigenfunctionError {
        lambda: spec.eigenvalue(col),
        distance: (1.0 + phi_norm - 2.0 * mass.sqrt()).max(0.0).sqrt(),
        overlap: mass,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::solve_patch;
    use crate::{FourierPotential, NumericConfig, PaperParams};

    fn model(amps: &[f64], rho: f64) -> Model {
        Model::new(
            Lattice::cubic(2),
            FourierPotential::cosines(amps),
            PaperParams::base_preset(2, rho).unwrap(),
            NumericConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn free_expansion_is_trivial() {
        let x = [10.0, 16.3];
        let m = model(&[0.0, 0.0], norm2(&x).sqrt());
        let ctx = SeriesContext::new(&m);
        let e = predict_expansion(&m, &ctx, &[10, 16], &[0.0, 0.3], 3).unwrap();
        assert_eq!(e.b_center, 1.0);
        assert!(e.coeffs.is_empty());
        assert!(phi_1(&m, &x).unwrap().is_empty());
    }

    #[test]
    fn first_order_values() {
        let x = [10.0, 16.3];
        let m = model(&[1.0, 0.0], norm2(&x).sqrt());
        let p = phi_1(&m, &x).unwrap();
        assert!((p[&vec![1, 0]].re + 1.0 / 21.0).abs() < 1e-15);
        assert!((p[&vec![-1, 0]].re - 1.0 / 19.0).abs() < 1e-15);
        let ctx = SeriesContext::new(&m);
        let e = predict_expansion(&m, &ctx, &[10, 16], &[0.0, 0.3], 2).unwrap();
        let want = (1.0 + 1.0 / 361.0 + 1.0 / 441.0_f64).powf(-0.5);
        assert!((e.b_center - want).abs() < 1e-6, "{} vs {want}", e.b_center);
        assert!(e.norm2() <= 1.0 + 1e-8);
        // A_1 differs from the first-order value only through P.
        let a1 = e.terms[0][&vec![1, 0]].re;
        assert!((a1 + 1.0 / 21.0).abs() < 1e-4);
    }

    #[test]
    fn sparse_support_closes_chains() {
        let x = [10.0, 16.3];
        let m = model(&[1.0, 0.0], norm2(&x).sqrt());
        let ctx = SeriesContext::new(&m);
        let e = predict_expansion(&m, &ctx, &[10, 16], &[0.0, 0.3], 3).unwrap();
        assert!(e.terms[1].keys().all(|k| k[1] == 0 && k[0].abs() == 2));
        let (_, closure) = order_caps(&m, &ctx, 6);
        assert_eq!(closure, 6);
    }

    #[test]
    fn first_order_beats_centre_only() {
        let x = [10.0, 16.3];
        let m = model(&[1.0, 1.0], norm2(&x).sqrt());
        let ctx = SeriesContext::new(&m);
        let t = [0.0, 0.3];
        let spec = solve_patch(&m.lattice, &m.potential, &[10, 16], &t, 7.0, 3.0, 4000).unwrap();
        let e1 = predict_expansion(&m, &ctx, &[10, 16], &t, 1).unwrap();
        let e2 = predict_expansion(&m, &ctx, &[10, 16], &t, 2).unwrap();
        let r1 = eigenfunction_error(&spec, &m.lattice, &e1, 1.0).unwrap();
        let r2 = eigenfunction_error(&spec, &m.lattice, &e2, 1.0).unwrap();
        assert!(r2.error < 0.2 * r1.error, "{} vs {}", r2.error, r1.error);
        assert!((r1.error * r1.error - r1.tail).abs() < 1e-12 + 0.01 * r1.tail);
        assert_eq!(dominant_count(&spec, &[10, 16]), 1);
    }
}
