//! Resonance geometry: slabs `V_b(w) = {x : ||x|² − |x+b|²| < w}`, the sets
//! `E_k`, the non-resonance domain `U`, clusters `B_k`, and Monte Carlo
//! estimates of their measure on spheres.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{dot, gcd, iadd, norm2, sub, Lattice};
use crate::stats::{wilson_interval, Proportion};
use crate::Model;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    NonResonant,
    /// `x ∈ E_k` for `k ≥ 2`, with a witness set of independent directions.
    Resonant { order: usize, directions: Vec<Vec<i64>> },
    /// `x ∈ E_1 \ E_2`; `delta` is the maximal vector of the resonant line.
    SingleResonant { delta: Vec<i64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainLabel {
    pub kind: DomainKind,
    pub shell_ok: bool,
}

impl DomainLabel {
    pub fn order(&self) -> usize {
        match &self.kind {
            DomainKind::NonResonant => 0,
            DomainKind::Resonant { order, .. } => *order,
            DomainKind::SingleResonant { .. } => 1,
        }
    }

    /// Directions spanning the resonance (empty when non-resonant).
    pub fn directions(&self) -> Vec<Vec<i64>> {
        match &self.kind {
            DomainKind::NonResonant => Vec::new(),
            DomainKind::Resonant { directions, .. } => directions.clone(),
            DomainKind::SingleResonant { delta } => vec![delta.clone()],
        }
    }
}

/// `|x|² − |x + b|² = −2(x, b) − |b|²`.
pub fn slab_defect(x: &[f64], b: &[f64]) -> f64 {
    -2.0 * dot(x, b) - norm2(b)
}

/// `R(3ρ/2) \ R(ρ/2)` with closed bounds at tolerance `1e−12`.
pub fn in_shell(x: &[f64], rho: f64) -> bool {
    let r = norm2(x).sqrt();
    r >= 0.5 * rho * (1.0 - 1e-12) && r <= 1.5 * rho * (1.0 + 1e-12)
}

/// `x ∈ V_b(ρ^exponent)` and `x` in the shell.
pub fn in_resonance_slab(x: &[f64], b: &[f64], rho: f64, exponent: f64) -> bool {
    slab_defect(x, b).abs() < rho.powf(exponent) && in_shell(x, rho)
}

/// `||x|² − ρ²| < ρ^{α₁}`.
pub fn in_k_rho(x: &[f64], model: &Model) -> bool {
    (norm2(x) - model.rho() * model.rho()).abs() < model.params.rho_alpha_k(1)
}

/// Primitive representative with first nonzero coordinate positive.
pub fn primitive(k: &[i64]) -> Vec<i64> {
    let g = k.iter().fold(0i64, |a, &b| gcd(a, b)).max(1);
    let mut out: Vec<i64> = k.iter().map(|c| c / g).collect();
    if out.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0) {
        out.iter_mut().for_each(|c| *c = -*c);
    }
    out
}

/// Adds `v` to an orthogonalized basis if it is independent; returns whether it was.
fn try_extend(ortho: &mut Vec<Vec<f64>>, v: &[f64]) -> bool {
    let mut r = v.to_vec();
    for o in ortho.iter() {
        let c = dot(&r, o) / norm2(o);
        r = sub(&r, &o.iter().map(|z| z * c).collect::<Vec<_>>());
    }
    if norm2(&r) > 1e-18 * norm2(v) {
        ortho.push(r);
        true
    } else {
        false
    }
}

/// The resonance ball `Γ(m·ρ^α)` sorted by length with lexicographic ties.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub rho: f64,
    pub d: usize,
    /// Slab half-widths `ρ^{α_k}` for `k = 1..=d`.
    pub widths: Vec<f64>,
    pub ball: Vec<(Vec<i64>, Vec<f64>, f64)>,
}

impl Classifier {
    pub fn new(model: &Model) -> Self {
        let p = &model.params;
        let radius = model.config.resonance_radius(p);
        let mut ball: Vec<(Vec<i64>, Vec<f64>, f64)> = model
            .lattice
            .enumerate_ball(radius)
            .into_iter()
            .map(|k| {
                let v = model.lattice.vector(&k);
                let n = norm2(&v);
                (k, v, n)
            })
            .collect();
        ball.sort_by(|a, b| a.2.total_cmp(&b.2).then_with(|| a.0.cmp(&b.0)));
        let widths = (1..=p.d as u32).map(|k| p.rho_alpha_k(k)).collect();
        Classifier { rho: p.rho, d: p.d, widths, ball }
    }

    /// Directions `b` of the ball with `x ∈ V_b(w)`.
    pub fn slabs_containing(&self, x: &[f64], w: f64) -> Vec<&Vec<i64>> {
        self.ball
            .iter()
            .filter(|(_, v, n)| (-2.0 * dot(x, v) - n).abs() < w)
            .map(|(k, _, _)| k)
            .collect()
    }

    /// Whether `x` avoids every slab of half-width `w`.
    pub fn avoids_slabs(&self, x: &[f64], w: f64) -> bool {
        self.ball.iter().all(|(_, v, n)| (-2.0 * dot(x, v) - n).abs() >= w)
    }

    /// Witness of `x ∈ E_k` (slab test only, shell not checked).
    pub fn e_k_witness(&self, x: &[f64], k: usize) -> Option<Vec<Vec<i64>>> {
        if k == 0 || k > self.d {
            return None;
        }
        let w = self.widths[k - 1];
        let mut ortho = Vec::new();
        let mut picked = Vec::new();
        for (key, v, n) in &self.ball {
            if (-2.0 * dot(x, v) - n).abs() < w && try_extend(&mut ortho, v) {
                picked.push(key.clone());
                if picked.len() == k {
                    return Some(picked);
                }
            }
        }
        None
    }

    pub fn in_e_k(&self, x: &[f64], k: usize) -> bool {
        self.e_k_witness(x, k).is_some()
    }

    /// `x ∈ U`: in the shell and outside every `V_b(ρ^{α₁})`.
    pub fn in_u(&self, x: &[f64]) -> bool {
        in_shell(x, self.rho) && self.avoids_slabs(x, self.widths[0])
    }

    pub fn classify(&self, x: &[f64]) -> DomainLabel {
        let shell_ok = in_shell(x, self.rho);
        let first = self.e_k_witness(x, 1);
        let kind = match first {
            None => DomainKind::NonResonant,
            Some(w1) => {
                let mut order = 1;
                let mut dirs = w1;
                for k in 2..=self.d {
                    if let Some(w) = self.e_k_witness(x, k) {
                        order = k;
                        dirs = w;
                    }
                }
                if order == 1 {
                    DomainKind::SingleResonant { delta: primitive(&dirs[0]) }
                } else {
                    DomainKind::Resonant { order, directions: dirs }
                }
            }
        };
        DomainLabel { kind, shell_ok }
    }
}

pub fn classify(model: &Model, x: &[f64]) -> DomainLabel {
    Classifier::new(model).classify(x)
}

/// `B_k(γ+t, p₁)`: members `h` (dual coordinates) so that `h + t` runs over
/// `γ + t + b + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct BkIndexSet {
    pub center: Vec<i64>,
    pub t: Vec<f64>,
    pub directions: Vec<Vec<i64>>,
    pub members: Vec<Vec<i64>>,
}

impl BkIndexSet {
    pub fn b_k(&self) -> usize {
        self.members.len()
    }
}

/// Integer combination of `dirs` equal to `b`, if any.
fn integer_combination(lat: &Lattice, dirs: &[Vec<i64>], b: &[i64]) -> Option<Vec<i64>> {
    let k = dirs.len();
    let dv: Vec<Vec<f64>> = dirs.iter().map(|d| lat.vector(d)).collect();
    let bv = lat.vector(b);
    let gram: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| dot(&dv[i], &dv[j])).collect()).collect();
    let rhs: Vec<f64> = dv.iter().map(|d| dot(d, &bv)).collect();
    let n = crate::lattice::solve_small(&gram, &rhs)?;
    let ni: Vec<i64> = n.iter().map(|v| v.round() as i64).collect();
    let mut rec = vec![0i64; b.len()];
    for (c, d) in ni.iter().zip(dirs) {
        for (r, x) in rec.iter_mut().zip(d) {
            *r += c * x;
        }
    }
    (rec == b).then_some(ni)
}

/// Builds the cluster around `γ + t` for independent `directions`.
pub fn build_bk(model: &Model, center: &[i64], t: &[f64], directions: &[Vec<i64>]) -> Result<BkIndexSet> {
    let lat = &model.lattice;
    let k = directions.len();
    let mut ortho = Vec::new();
    for d in directions {
        if !try_extend(&mut ortho, &lat.vector(d)) {
            return Err(Error::Invalid(format!("directions {directions:?} are linearly dependent")));
        }
    }
    let p = &model.params;
    let b_radius = if k == 0 { 0.0 } else { 0.5 * p.rho.powf(0.5 * p.alpha_k(k as u32 + 1)) };
    let zero = vec![0.0; lat.dim()];
    let mut bset: Vec<Vec<i64>> = vec![vec![0; lat.dim()]];
    if k > 0 {
        for b in lat.enumerate_ball(b_radius) {
            if integer_combination(lat, directions, &b).is_some() {
                bset.push(b);
            }
        }
    }
    let aset = lat.enumerate_shifted(&zero, model.config.cluster_radius(p), false);
    let mut members = BTreeSet::new();
    for b in &bset {
        for a in &aset {
            members.insert(iadd(&iadd(center, b), a));
            if members.len() > model.config.max_cluster {
                return Err(Error::Numerical(format!(
                    "cluster size exceeds max_cluster={} (lower rho or raise the cap)",
                    model.config.max_cluster
                )));
            }
        }
    }
    // Center first, the rest in coordinate order.
    let mut list: Vec<Vec<i64>> = vec![center.to_vec()];
    list.extend(members.into_iter().filter(|m| m.as_slice() != center));
    Ok(BkIndexSet { center: center.to_vec(), t: t.to_vec(), directions: directions.to_vec(), members: list })
}

/// Uniform point on the sphere `|x| = rho` in dimension `d`.
pub fn sphere_point<R: rand::Rng>(rng: &mut R, d: usize, rho: f64) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm2(&g).sqrt();
        if n > 1e-12 {
            return g.iter().map(|v| v * rho / n).collect();
        }
    }
}

/// Runs `f` on `n` sphere samples split into fixed batches with per-batch
/// seeds, so results do not depend on the thread count.
pub fn sphere_samples_map<T: Send>(
    d: usize,
    rho: f64,
    n: usize,
    seed: u64,
    f: impl Fn(&[f64]) -> T + Sync,
) -> Vec<T> {
    const BATCH: usize = 4096;
    let batches = n.div_ceil(BATCH);
    (0..batches)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (b as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let len = BATCH.min(n - b * BATCH);
            (0..len).map(|_| f(&sphere_point(&mut rng, d, rho))).collect::<Vec<_>>()
        })
        .collect()
}

/// Fraction of uniform samples on `|x| = ρ` lying in `U`.
pub fn mc_nonresonance_fraction(model: &Model, n_samples: usize, seed: u64) -> Proportion {
    let c = Classifier::new(model);
    let hits = sphere_samples_map(model.dim(), model.rho(), n_samples, seed, |x| c.in_u(x));
    let k = hits.iter().filter(|&&h| h).count();
    wilson_interval(k, n_samples)
}

/// Sampled check of `E_{k+1} ⊆ E_k` on `|x| = ρ`: returns, per `k`, the
/// number of samples in `E_{k+1}` and how many of them miss `E_k`.
pub fn mc_nesting_check(model: &Model, n_samples: usize, seed: u64) -> Vec<(usize, usize, usize)> {
    let c = Classifier::new(model);
    let d = model.dim();
    let flags = sphere_samples_map(d, model.rho(), n_samples, seed, |x| {
        (1..=d).map(|k| c.in_e_k(x, k)).collect::<Vec<bool>>()
    });
    (1..d)
        .map(|k| {
            let inner = flags.iter().filter(|f| f[k]).count();
            let bad = flags.iter().filter(|f| f[k] && !f[k - 1]).count();
            (k, inner, bad)
        })
        .collect()
}

/// Count of sphere samples in `∩_{i≤d} V_{γ_i}(ρ^{α_d})`.
pub fn mc_top_order_count(model: &Model, n_samples: usize, seed: u64) -> usize {
    let c = Classifier::new(model);
    let d = model.dim();
    sphere_samples_map(d, model.rho(), n_samples, seed, |x| c.in_e_k(x, d))
        .into_iter()
        .filter(|&b| b)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{FourierPotential, NumericConfig, PaperParams};

    fn model(rho: f64) -> Model {
        Model::new(
            Lattice::cubic(2),
            FourierPotential::cosines(&[1.0, 1.0]),
            PaperParams::base_preset(2, rho).unwrap(),
            NumericConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn orthogonal_slab() {
        let x = [0.0, 100.0];
        assert!(in_resonance_slab(&x, &[1.0, 0.0], 100.0, 3.0 / 13.0));
        assert!(!in_resonance_slab(&[100.0, 0.0], &[1.0, 0.0], 100.0, 3.0 / 13.0));
    }

    #[test]
    fn generic_direction_nonresonant() {
        let m = model(50.0);
        let x = [50.0 * 1f64.cos(), 50.0 * 1f64.sin()];
        assert_eq!(classify(&m, &x).kind, DomainKind::NonResonant);
    }

    #[test]
    fn axis_point_single_resonant() {
        let m = model(50.0);
        let l = classify(&m, &[0.3, 50.0]);
        assert!(l.shell_ok);
        assert_eq!(l.kind, DomainKind::SingleResonant { delta: vec![1, 0] });
    }

    #[test]
    fn order_two_near_inner_shell() {
        let m = model(12.0);
        let w2 = m.params.rho_alpha_k(2);
        let x = [-0.5 + 0.45 * w2, -0.5 - 0.45 * w2];
        let c = Classifier::new(&m);
        assert!(c.in_e_k(&x, 2));
        let lab = c.classify(&x);
        assert_eq!(lab.order(), 2);
        if let DomainKind::Resonant { directions, .. } = lab.kind {
            assert_eq!(directions.len(), 2);
        } else {
            panic!("expected order two");
        }
    }

    #[test]
    fn k_rho_bounds() {
        let m = model(20.0);
        assert!(in_k_rho(&[20.0, 0.0], &m));
        assert!(!in_k_rho(&[40.0, 0.0], &m));
        let r = (400.0 + m.params.rho_alpha_k(1)).sqrt();
        assert!(!in_k_rho(&[r, 0.0], &m));
    }

    #[test]
    fn bk_three_members() {
        let mut m = model(20.0);
        m.config.cluster_radius_factor = Some(0.5);
        let set = build_bk(&m, &[0, 20], &[0.1, 0.2], &[vec![1, 0]]).unwrap();
        assert_eq!(set.b_k(), 3);
        let mut m2 = model(2.0);
        m2.config.cluster_radius_factor = Some(0.5);
        let set = build_bk(&m2, &[0, 2], &[0.1, 0.2], &[vec![1, 0]]).unwrap();
        assert_eq!(set.b_k(), 1);
    }

    #[test]
    fn bk_rejects_dependent() {
        let m = model(20.0);
        assert!(build_bk(&m, &[0, 20], &[0.0, 0.0], &[vec![1, 0], vec![2, 0]]).is_err());
    }

    #[test]
    fn primitive_reduces() {
        assert_eq!(primitive(&[0, -3]), vec![0, 1]);
        assert_eq!(primitive(&[-2, 4]), vec![1, -2]);
    }

    #[test]
    fn deficit_decreases() {
        let a = mc_nonresonance_fraction(&model(20.0), 20_000, 7);
        let b = mc_nonresonance_fraction(&model(80.0), 20_000, 7);
        assert!(1.0 - b.estimate < 1.0 - a.estimate);
    }
}
