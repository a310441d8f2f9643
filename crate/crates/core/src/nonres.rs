//! Eigenvalue series away from the diffraction planes:
//!
//! `S_k(a, x) = Σ q_{γ₁}…q_{γ_k} q_{−γ₁−…−γ_k} / Π_{s=1}^{k} (a − |x − γ₁ − … − γ_s|²)`
//!
//! and `F_0 = 0`, `F_s = Σ_{k=1}^{s} S_k(|x|² + F_{s−1}, x)`.

use num_complex::Complex64;

use crate::domains::Classifier;
use crate::error::{Error, Result};
use crate::lattice::{iadd, norm2, sub};
use crate::Model;

/// Support of the truncated potential together with the floor on
/// denominators.
#[derive(Debug, Clone)]
pub struct SeriesContext {
    pub modes: Vec<(Vec<i64>, Vec<f64>, Complex64)>,
    pub floor: f64,
    pub check_floor: bool,
    max_norm: f64,
    lookup: std::collections::HashMap<Vec<i64>, Complex64>,
    dim: usize,
}

impl SeriesContext {
    /// Context with the floor `ρ^{α₁}/2` enforced.
    pub fn new(model: &Model) -> Self {
        let pot = model.truncated_potential();
        let modes: Vec<(Vec<i64>, Vec<f64>, Complex64)> = pot
            .iter()
            .map(|(k, q)| (k.clone(), model.lattice.vector(k), *q))
            .collect();
        let max_norm = modes.iter().map(|m| norm2(&m.1).sqrt()).fold(0.0, f64::max);
        SeriesContext {
            lookup: modes.iter().map(|m| (m.0.clone(), m.2)).collect(),
            modes,
            floor: 0.5 * model.params.rho_alpha_k(1),
            check_floor: true,
            max_norm,
            dim: model.dim(),
        }
    }

    /// Same sums without the denominator floor.
    pub fn unchecked(model: &Model) -> Self {
        SeriesContext { check_floor: false, ..Self::new(model) }
    }

    /// `M = Σ|q_γ|` over the truncated support.
    pub fn mass(&self) -> f64 {
        self.modes.iter().map(|m| m.2.norm()).sum()
    }
}

/// Walks every closed chain of length `k`; `visit` gets the coupling product,
/// the denominators' product and the chain.
struct ChainWalk<'a> {
    ctx: &'a SeriesContext,
    x: &'a [f64],
    a: f64,
    k: usize,
    sum: Complex64,
    abs_sum: f64,
    min_den: f64,
    steps: Vec<usize>,
}

impl ChainWalk<'_> {
    fn run(&mut self, depth: usize, partial: &[i64], pvec: &[f64], num: Complex64, den: f64) -> Result<()> {
        let ctx = self.ctx;
        if depth == self.k {
            let close: Vec<i64> = partial.iter().map(|c| -c).collect();
            if let Some(qc) = ctx.lookup.get(&close) {
                let term = num * qc / den;
                self.sum += term;
                self.abs_sum += term.norm();
            }
            return Ok(());
        }
        let remaining = (self.k - depth) as f64;
        for (i, (kc, kv, q)) in ctx.modes.iter().enumerate() {
            let next = iadd(partial, kc);
            if next.iter().all(|&c| c == 0) {
                continue;
            }
            let nvec: Vec<f64> = pvec.iter().zip(kv).map(|(a, b)| a + b).collect();
            // The chain must still be able to close: |Σγ| ≤ (steps left) · max|γ|.
            if norm2(&nvec).sqrt() > remaining * ctx.max_norm + 1e-9 {
                continue;
            }
            let d = self.a - norm2(&sub(self.x, &nvec));
            self.min_den = self.min_den.min(d.abs());
            self.steps.push(i);
            if ctx.check_floor && d.abs() < ctx.floor {
                let chain = self.steps.iter().map(|&s| ctx.modes[s].0.clone()).collect();
                return Err(Error::DenominatorFloor { chain, value: d, floor: ctx.floor });
            }
            self.run(depth + 1, &next, &nvec, num * q, den * d)?;
            self.steps.pop();
        }
        Ok(())
    }
}

fn s_k_full(ctx: &SeriesContext, a: f64, x: &[f64], k: usize) -> Result<(f64, f64)> {
    if k == 0 || ctx.modes.is_empty() {
        return Ok((0.0, f64::INFINITY));
    }
    let mut w = ChainWalk {
        ctx,
        x,
        a,
        k,
        sum: Complex64::new(0.0, 0.0),
        abs_sum: 0.0,
        min_den: f64::INFINITY,
        steps: Vec::new(),
    };
    let zero_k = vec![0i64; ctx.dim];
    let zero_v = vec![0.0; ctx.dim];
    w.run(0, &zero_k, &zero_v, Complex64::new(1.0, 0.0), 1.0)?;
    if w.sum.im.abs() > 1e-10 * w.abs_sum.max(1e-300) && w.sum.im.abs() > 1e-300 {
        return Err(Error::Numerical(format!("S_{k} has imaginary part {:e}", w.sum.im)));
    }
    Ok((w.sum.re, w.min_den))
}

/// `S_k(a, x)`.
pub fn s_k(ctx: &SeriesContext, a: f64, x: &[f64], k: usize) -> Result<f64> {
    Ok(s_k_full(ctx, a, x, k)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult {
    pub x: Vec<f64>,
    pub order: usize,
    /// `F_0 … F_{order−1}`.
    pub f_values: Vec<f64>,
    /// `|x|² + F_{order−1}`.
    pub predicted: f64,
    pub min_denominator: f64,
    /// `Σ_{k≤order} M^{k+1}(2/ρ^{α₁})^k`, a bound for every `|F_s|`.
    pub majorant: f64,
}

/// Evaluates `F_0 … F_{order−1}` at `x`.
pub fn f_series(ctx: &SeriesContext, x: &[f64], order: usize) -> Result<SeriesResult> {
    let order = order.max(1);
    let x2 = norm2(x);
    let mut f = vec![0.0];
    let mut min_den = f64::INFINITY;
    for s in 1..order {
        let a = x2 + f[s - 1];
        let mut acc = 0.0;
        for k in 1..=s {
            let (v, md) = s_k_full(ctx, a, x, k)?;
            acc += v;
            min_den = min_den.min(md);
        }
        f.push(acc);
    }
    let m = ctx.mass();
    let r = 1.0 / ctx.floor;
    let majorant = (1..=order.max(2)).map(|k| m.powi(k as i32 + 1) * r.powi(k as i32)).sum();
    Ok(SeriesResult {
        x: x.to_vec(),
        order,
        predicted: x2 + f[order - 1],
        f_values: f,
        min_denominator: min_den,
        majorant,
    })
}

/// `F(x) = |x|² + F_n(x)` with `n` the configured known-part order.
pub fn known_part(model: &Model, ctx: &SeriesContext, x: &[f64]) -> Result<f64> {
    Ok(f_series(ctx, x, model.config.known_order(&model.params) + 1)?.predicted)
}

/// Central-difference gradient of `F_k` at `x`. Every stencil point must lie in `U`.
pub fn grad_f_check(model: &Model, ctx: &SeriesContext, x: &[f64], k: usize, h: f64) -> Result<Vec<f64>> {
    let cls = Classifier::new(model);
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        for p in [&xp, &xm] {
            if !cls.in_u(p) {
                return Err(Error::OutsideShell(format!("stencil point {p:?} leaves the non-resonance domain")));
            }
        }
        let fp = f_series(ctx, &xp, k + 1)?.f_values[k];
        let fm = f_series(ctx, &xm, k + 1)?.f_values[k];
        g.push((fp - fm) / (2.0 * h));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{FourierPotential, Lattice, NumericConfig, PaperParams};

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
    fn zero_potential_gives_zero() {
        let m = model(&[0.0, 0.0], 20.0);
        let ctx = SeriesContext::new(&m);
        let r = f_series(&ctx, &[10.0, 17.0], 4).unwrap();
        assert!(r.f_values.iter().all(|&f| f == 0.0));
        assert_eq!(r.predicted, 10.0 * 10.0 + 17.0 * 17.0);
    }

    #[test]
    fn first_sum_closed_form() {
        let m = model(&[1.0, 0.0], 20.0);
        let ctx = SeriesContext::new(&m);
        let x = [10.0, 16.3];
        let s1 = s_k(&ctx, norm2(&x), &x, 1).unwrap();
        assert!((s1 - 2.0 / 399.0).abs() < 1e-16);
        assert_eq!(s_k(&ctx, norm2(&x), &x, 2).unwrap(), 0.0);
        let r = f_series(&ctx, &x, 3).unwrap();
        assert!((r.f_values[1] - 2.0 / 399.0).abs() < 1e-16);
        let a = norm2(&x) + r.f_values[1];
        let want = 1.0 / (a - norm2(&[9.0, 16.3])) + 1.0 / (a - norm2(&[11.0, 16.3]));
        assert!((r.f_values[2] - want).abs() < 1e-16);
        assert!(r.f_values[2].abs() <= r.majorant);
    }

    #[test]
    fn prefix_stable() {
        let m = model(&[1.0, 0.7], 30.0);
        let ctx = SeriesContext::new(&m);
        let x = [17.1, 23.9];
        let a = f_series(&ctx, &x, 3).unwrap();
        let b = f_series(&ctx, &x, 4).unwrap();
        assert_eq!(a.f_values[..], b.f_values[..3]);
    }

    #[test]
    fn floor_violation_names_chain() {
        let m = model(&[1.0, 0.0], 20.0);
        let ctx = SeriesContext::new(&m);
        let x = [-0.45, 19.0];
        match s_k(&ctx, norm2(&x), &x, 1) {
            Err(Error::DenominatorFloor { chain, .. }) => assert_eq!(chain.len(), 1),
            other => panic!("expected floor error, got {other:?}"),
        }
        let un = SeriesContext::unchecked(&m);
        assert!(s_k(&un, norm2(&x), &x, 1).unwrap().is_finite());
    }

    #[test]
    fn gradient_matches_closed_form() {
        let m = model(&[1.0, 0.0], 20.0);
        let ctx = SeriesContext::new(&m);
        let x = [10.0, 16.3];
        let g = grad_f_check(&m, &ctx, &x, 1, 1e-3).unwrap();
        let x1: f64 = 10.0;
        let want = -16.0 * x1 / (4.0 * x1 * x1 - 1.0).powi(2);
        assert!((g[0] - want).abs() < 1e-9, "{} vs {want}", g[0]);
        assert!(g[1].abs() < 1e-12);
    }
}
