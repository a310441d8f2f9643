//! Simple sets, the approximate isoenergetic surface `S_ρ = {F(x) = ρ²}`,
//! roots of `Λ(x) = ρ²` along short segments, and Monte Carlo measures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domains::{sphere_point, Classifier, DomainKind};
use crate::error::{Error, Result};
use crate::hill::in_w_rho;
use crate::lattice::{add, decompose_coords, dot, norm2, scale, sub, sublattice_geometry, Lattice};
use crate::nonres::{known_part, SeriesContext};
use crate::oracle::{match_eigenvalue, solve_patch};
use crate::resonance::{build_c, SingleResonance};
use crate::stats::{wilson_interval, Proportion};
use crate::Model;

/// Which inequality failed and by how much.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedCondition {
    /// `γ'` (dual coordinates), empty when the failure is not tied to one.
    pub gamma: Vec<i64>,
    pub condition: String,
    /// Distance between the two known parts (or another diagnostic value).
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleSetVerdict {
    pub x: Vec<f64>,
    pub member: bool,
    pub failed: Option<FailedCondition>,
    /// Known part at `x` used in the comparisons.
    pub known: f64,
    /// Number of competitors examined.
    pub checked: usize,
}

impl SimpleSetVerdict {
    fn fail(x: &[f64], known: f64, checked: usize, gamma: Vec<i64>, condition: &str, margin: f64) -> Self {
        SimpleSetVerdict {
            x: x.to_vec(),
            member: false,
            failed: Some(FailedCondition { gamma, condition: condition.to_string(), margin }),
            known,
            checked,
        }
    }
}

/// Shared state for repeated membership tests at one `ρ`.
pub struct SimpleSets<'a> {
    pub model: &'a Model,
    pub classifier: Classifier,
    pub series: SeriesContext,
}

enum Competitor {
    Known(f64),
    Cluster(Vec<f64>),
}

impl<'a> SimpleSets<'a> {
    pub fn new(model: &'a Model) -> Self {
        SimpleSets { model, classifier: Classifier::new(model), series: SeriesContext::new(model) }
    }

    fn annulus_check(&self, x: &[f64]) -> Result<()> {
        let rho = self.model.rho();
        let e = self.model.params.rho_alpha_k(1) / rho;
        let r = norm2(x).sqrt();
        if r > 0.5 * rho + e && r < 1.5 * rho - e {
            Ok(())
        } else {
            Err(Error::OutsideShell(format!("|x| = {r} is outside the annulus ({}, {})", 0.5 * rho + e, 1.5 * rho - e)))
        }
    }

    /// `F(y)` when `y ∈ U`, otherwise the eigenvalues of `C` at `y`.
    fn competitor(&self, gamma: &[i64], t: &[f64]) -> Result<Competitor> {
        let y = add(&self.model.lattice.vector(gamma), t);
        if self.classifier.in_u(&y) {
            return Ok(Competitor::Known(known_part(self.model, &self.series, &y)?));
        }
        let dirs = self.classifier.classify(&y).directions();
        Ok(Competitor::Cluster(build_c(self.model, gamma, t, &dirs)?.eigenvalues))
    }

    /// Membership of `x` in `B`: every competitor `γ' ∈ K` stays `2ε₁` away from `F(x)`.
    pub fn in_b(&self, x: &[f64]) -> Result<SimpleSetVerdict> {
        self.annulus_check(x)?;
        if !self.classifier.in_u(x) {
            return Err(Error::OutsideShell(format!("{x:?} is not in the non-resonance domain")));
        }
        let known = known_part(self.model, &self.series, x)?;
        let (gamma, t) = self.model.lattice.reduce(x);
        let w = self.model.params.rho_alpha_k(1) / 3.0;
        let gap = 2.0 * self.model.params.eps1();
        let members = self.model.lattice.enumerate_annulus(&t, (known - w).max(0.0).sqrt(), (known + w).sqrt());
        let mut checked = 0;
        for g in members.into_iter().filter(|g| *g != gamma) {
            checked += 1;
            match self.competitor(&g, &t)? {
                Competitor::Known(f) => {
                    if (known - f).abs() < gap {
                        return Ok(SimpleSetVerdict::fail(x, known, checked, g, "|F(x) - F(y)| < 2 eps1", (known - f).abs()));
                    }
                }
                Competitor::Cluster(vals) => {
                    if let Some(l) = vals.iter().find(|l| (known - **l).abs() < gap) {
                        return Ok(SimpleSetVerdict::fail(x, known, checked, g, "|F(x) - lambda_i(y)| < 2 eps1", (known - l).abs()));
                    }
                }
            }
        }
        Ok(SimpleSetVerdict { x: x.to_vec(), member: true, failed: None, known, checked })
    }

    /// Membership of `x` in `B_δ`.
    pub fn in_b_delta(&self, x: &[f64], delta: &[i64]) -> Result<SimpleSetVerdict> {
        self.annulus_check(x)?;
        let label = self.classifier.classify(x);
        let on_line = match &label.kind {
            DomainKind::SingleResonant { delta: d } => d.as_slice() == delta || d.iter().zip(delta).all(|(a, b)| *a == -b),
            _ => false,
        };
        if !on_line || !label.shell_ok {
            return Err(Error::OutsideShell(format!("{x:?} is not in the single-resonance domain of {delta:?}")));
        }
        let lat = &self.model.lattice;
        let (gamma, t) = lat.reduce(x);
        let ctx = SingleResonance::new(self.model, delta, &t)?;
        let state = ctx.state_of(lat, x)?;
        let spec = ctx.hill.get(ctx.v(&state.beta))?;
        if !in_w_rho(&spec, self.model.rho(), spec.reliable_energy())? {
            return Ok(SimpleSetVerdict::fail(x, f64::NAN, 0, Vec::new(), "v(beta) not in W(rho)", spec.v));
        }
        let known = match ctx.e_series(&state) {
            Ok(r) => r.predicted,
            Err(Error::DenominatorFloor { value, .. }) => {
                return Ok(SimpleSetVerdict::fail(x, f64::NAN, 0, Vec::new(), "chain denominator below floor", value));
            }
            Err(e) => return Err(e),
        };
        let w = self.model.params.rho_alpha_k(1) / 3.0;
        let gap = 2.0 * self.model.params.eps1();
        let members = lat.enumerate_annulus(&t, (known - w).max(0.0).sqrt(), (known + w).sqrt());
        let mut checked = 0;
        for g in members.into_iter().filter(|g| *g != gamma) {
            let y = add(&lat.vector(&g), &t);
            if self.classifier.in_u(&y) {
                checked += 1;
                let f = known_part(self.model, &self.series, &y)?;
                if (known - f).abs() < gap {
                    return Ok(SimpleSetVerdict::fail(x, known, checked, g, "|E - F(y)| < 2 eps1", (known - f).abs()));
                }
            } else if decompose_coords(&g, &ctx.geom, &ctx.td).beta != state.beta {
                checked += 1;
                let dirs = self.classifier.classify(&y).directions();
                let vals = build_c(self.model, &g, &t, &dirs)?.eigenvalues;
                if let Some(l) = vals.iter().find(|l| (known - **l).abs() < gap) {
                    return Ok(SimpleSetVerdict::fail(x, known, checked, g, "|E - lambda_i(y)| < 2 eps1", (known - l).abs()));
                }
            }
        }
        Ok(SimpleSetVerdict { x: x.to_vec(), member: true, failed: None, known, checked })
    }

    /// Removal test on `S_ρ`: competitors in `K_ρ` whose known part lies
    /// within `3ε₁` of `ρ²`. Returns `(removed by P_b, removed by A(ρ))`.
    pub fn pruned(&self, x: &[f64]) -> Result<(bool, bool)> {
        let rho2 = self.model.rho() * self.model.rho();
        let w = self.model.params.rho_alpha_k(1);
        let gap = 3.0 * self.model.params.eps1();
        let (gamma, t) = self.model.lattice.reduce(x);
        let members = self.model.lattice.enumerate_annulus(&t, (rho2 - w).max(0.0).sqrt(), (rho2 + w).sqrt());
        let (mut pb, mut a) = (false, false);
        for g in members.into_iter().filter(|g| *g != gamma) {
            match self.competitor(&g, &t)? {
                Competitor::Known(f) => pb |= (f - rho2).abs() < gap,
                Competitor::Cluster(vals) => a |= vals.iter().any(|l| (l - rho2).abs() < gap),
            }
        }
        Ok((pb, a))
    }

    /// `x ∈ S_ρ` requires `x ∈ U(2ρ^{α₁}, p)`.
    pub fn on_surface_domain(&self, x: &[f64]) -> bool {
        self.classifier.in_u(x) && self.classifier.avoids_slabs(x, 2.0 * self.classifier.widths[0])
    }
}

pub fn in_simple_set_b(model: &Model, x: &[f64]) -> Result<SimpleSetVerdict> {
    SimpleSets::new(model).in_b(x)
}

pub fn in_simple_set_b_delta(model: &Model, x: &[f64], delta: &[i64]) -> Result<SimpleSetVerdict> {
    SimpleSets::new(model).in_b_delta(x, delta)
}

/// Point `r·u` with `F(r·u) = ρ²`, by bisection over `r ∈ [ρ − 1, ρ + 1]`.
pub fn surface_root_f(model: &Model, series: &SeriesContext, direction: &[f64]) -> Result<Vec<f64>> {
    let u = scale(direction, 1.0 / norm2(direction).sqrt());
    let rho = model.rho();
    let g = |r: f64| -> Result<f64> { Ok(known_part(model, series, &scale(&u, r))? - rho * rho) };
    let (mut lo, mut hi) = (rho - 1.0, rho + 1.0);
    let (glo, ghi) = (g(lo)?, g(hi)?);
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(Error::Numerical(format!("F - rho^2 does not change sign along the ray ({glo:e}, {ghi:e})")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(scale(&u, 0.5 * (lo + hi)))
}

/// Root of `Λ(x) = ρ²` on the segment `a + s·b`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoPoint {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: Vec<i64>,
    pub s: f64,
    pub root: Vec<f64>,
    pub lambda: f64,
    pub residual: f64,
    /// Distance to the nearest other eigenvalue of the final solve.
    pub gap: f64,
    pub multiplicity: usize,
    pub iterations: usize,
    /// Number of times the bracket `[−1, 1]` was doubled.
    pub expansions: usize,
}

impl IsoPoint {
    pub fn is_simple(&self, eps1: f64) -> bool {
        self.multiplicity == 1 && self.gap >= eps1
    }
}

/// Starts from the `S_ρ` root along `direction`, takes `b = ε u` with
/// `ε = ε₁/(7ρ)` and bisects `s ↦ Λ(a + s b) − ρ²` using patch solves.
pub fn find_isoenergetic_point(model: &Model, series: &SeriesContext, direction: &[f64]) -> Result<IsoPoint> {
    let rho = model.rho();
    let rho2 = rho * rho;
    let lat = &model.lattice;
    let a = surface_root_f(model, series, direction)?;
    let u = scale(&a, 1.0 / norm2(&a).sqrt());
    let eps = model.params.eps1() / (7.0 * rho);
    let (gamma, _) = lat.reduce(&a);
    let g = lat.vector(&gamma);
    let cfg = &model.config;
    let half = model.params.rho_alpha_k(1) / 3.0;
    let eval = |s: f64, b: &[f64]| -> Result<(f64, f64, usize)> {
        let x = add(&a, &scale(b, s));
        let t = sub(&x, &g);
        let spec = solve_patch(lat, &model.potential, &gamma, &t, cfg.oracle_patch_radius, half, cfg.oracle_max_basis)?;
        let m = match_eigenvalue(&spec, &gamma, &t, lat, half, None)
            .ok_or_else(|| Error::Numerical(format!("no eigenvalue matched at s = {s}")))?;
        let gap = spec
            .eigenvalues()
            .iter()
            .filter(|v| (**v - m.lambda).abs() > 1e-10)
            .map(|v| (v - m.lambda).abs())
            .fold(f64::INFINITY, f64::min);
        Ok((m.lambda, gap, m.multiplicity))
    };
    let mut b = scale(&u, eps);
    let mut expansions = 0;
    loop {
        let lo = eval(-1.0, &b)?.0;
        let hi = eval(1.0, &b)?.0;
        if lo < rho2 && hi > rho2 {
            break;
        }
        expansions += 1;
        if expansions > 30 {
            return Err(Error::Numerical(format!(
                "no bracket of rho^2 along the ray (Lambda = {lo}, {hi}); try another direction"
            )));
        }
        b = scale(&b, 2.0);
    }
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    let tol = 1e-8 * rho2;
    for it in 1..=60 {
        let mid = 0.5 * (lo + hi);
        let (lambda, gap, multiplicity) = eval(mid, &b)?;
        let residual = (lambda - rho2).abs();
        if residual < tol {
            return Ok(IsoPoint {
                root: add(&a, &scale(&b, mid)),
                a: a.clone(),
                b: b.clone(),
                gamma,
                s: mid,
                lambda,
                residual,
                gap,
                multiplicity,
                iterations: it,
                expansions,
            });
        }
        if lambda < rho2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical("bisection did not reach the tolerance in 60 steps".into()))
}

/// Outcome of pruning `S_ρ` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneSummary {
    pub directions: usize,
    /// Directions whose root lies on `S_ρ`.
    pub on_surface: usize,
    pub removed_pb: usize,
    pub removed_a: usize,
    pub errors: usize,
    /// Retained share of the `S_ρ` samples.
    pub retained: Proportion,
}

/// Samples `n` uniform ray directions, finds `S_ρ` roots and removes those
/// hit by some `P_b` or by a translate of `A(ρ)`.
pub fn prune_p_b_and_a(model: &Model, n: usize, seed: u64) -> PruneSummary {
    let sets = SimpleSets::new(model);
    let d = model.dim();
    let outcomes: Vec<Option<Result<(bool, bool)>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let u = sphere_point(&mut rng, d, 1.0);
            if !sets.on_surface_domain(&scale(&u, model.rho())) {
                return None;
            }
            let x = match surface_root_f(model, &sets.series, &u) {
                Ok(x) => x,
                Err(e) => return Some(Err(e)),
            };
            sets.on_surface_domain(&x).then(|| sets.pruned(&x))
        })
        .collect();
    let mut s = PruneSummary {
        directions: n,
        on_surface: 0,
        removed_pb: 0,
        removed_a: 0,
        errors: 0,
        retained: wilson_interval(0, 0),
    };
    let mut kept = 0;
    for o in outcomes.into_iter().flatten() {
        match o {
            Ok((pb, a)) => {
                s.on_surface += 1;
                s.removed_pb += pb as usize;
                s.removed_a += a as usize;
                kept += (!pb && !a) as usize;
            }
            Err(_) => s.errors += 1,
        }
    }
    s.retained = wilson_interval(kept, s.on_surface);
    s
}

/// Uniform point of the slab `V_δ(ρ^{α₁})` on the sphere `|x| = ρ`.
pub fn slab_point<R: Rng>(rng: &mut R, lat: &Lattice, delta: &[i64], rho: f64, width: f64) -> Vec<f64> {
    let dv = lat.vector(delta);
    let dn = norm2(&dv).sqrt();
    let e = scale(&dv, 1.0 / dn);
    // |2(x,δ) + |δ|²| < w  ⇔  (x, e) ∈ (−dn/2 − w/(2dn), −dn/2 + w/(2dn)).
    let c = -0.5 * dn;
    let h = width / (2.0 * dn);
    let axial = c + h * (2.0 * rng.gen::<f64>() - 1.0);
    let d = dv.len();
    let w = loop {
        let g = sphere_point(rng, d, 1.0);
        let p = sub(&g, &scale(&e, dot(&g, &e)));
        let n = norm2(&p).sqrt();
        if n > 1e-9 {
            break scale(&p, 1.0 / n);
        }
    };
    add(&scale(&e, axial), &scale(&w, (rho * rho - axial * axial).sqrt()))
}

/// Fraction of slab samples that belong to `B_δ`; samples outside the
/// single-resonance domain count as non-members.
pub fn mc_measure_b_delta(model: &Model, delta: &[i64], n: usize, seed: u64) -> Result<Proportion> {
    sublattice_geometry(&model.lattice, delta)?;
    let sets = SimpleSets::new(model);
    let width = model.params.rho_alpha_k(1);
    let hits: Vec<Result<bool>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let x = slab_point(&mut rng, &model.lattice, delta, model.rho(), width);
            match sets.in_b_delta(&x, delta) {
                Ok(v) => Ok(v.member),
                Err(Error::OutsideShell(_)) => Ok(false),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut k = 0;
    for h in hits {
        k += h? as usize;
    }
    Ok(wilson_interval(k, n))
}
