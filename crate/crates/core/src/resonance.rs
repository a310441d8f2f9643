//! Resonance regime. Near several diffraction planes the eigenvalue is
//! approximated by the spectrum of the cluster matrix `C`; near exactly one
//! plane, by `λ_{j,β} = |β+τ|² + μ_j(v)` plus the chain series `E_s` built
//! from couplings between Hill eigenfunctions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, RwLock};

use num_complex::Complex64;

use crate::domains::{build_bk, BkIndexSet};
use crate::error::{Error, Result};
use crate::hill::{default_modes, HillCache, HillEigenpair, HillSpectrum};
use crate::lattice::{add, decompose_coords, decompose_t, dot, iadd, isub, norm2, scale, sub, sublattice_geometry};
use crate::lattice::{DeltaGeometry, Lattice, TDecomposition};
use crate::linalg::eigvalsh;
use crate::potential::FourierPotential;
use crate::Model;

/// `C(γ+t, γ₁…γ_k)` over a cluster: `c_ii = |h_i+t|²`, `c_ij = q_{h_i−h_j}`.
#[derive(Debug, Clone)]
pub struct ResonanceMatrix {
    pub index: BkIndexSet,
    /// Row-major `b_k × b_k` entries.
    pub entries: Vec<Complex64>,
    pub eigenvalues: Vec<f64>,
}

impl ResonanceMatrix {
    pub fn size(&self) -> usize {
        self.index.members.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.size() + j]
    }

    pub fn is_self_adjoint(&self) -> bool {
        let n = self.size();
        (0..n).all(|i| (0..n).all(|j| self.entry(i, j) == self.entry(j, i).conj()))
    }
}

/// Assembles and diagonalizes `C` over the members of `bk` with potential `pot`.
pub fn assemble_c(lat: &Lattice, pot: &FourierPotential, bk: &BkIndexSet) -> Result<ResonanceMatrix> {
    pot.check_real()?;
    let n = bk.members.len();
    let table = pot.table();
    let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
    for (i, hi) in bk.members.iter().enumerate() {
        for (j, hj) in bk.members.iter().enumerate() {
            entries[i * n + j] = if i == j {
                Complex64::new(norm2(&add(&lat.vector(hi), &bk.t)), 0.0)
            } else {
                table.get(&isub(hi, hj)).copied().unwrap_or_default()
            };
        }
    }
    let shift = entries[0].re;
    let real = entries.iter().all(|z| z.im == 0.0);
    let mut eigenvalues = eigvalsh(n, real, |i, j| {
        let z = entries[i * n + j];
        if i == j { z - shift } else { z }
    })?;
    eigenvalues.iter_mut().for_each(|v| *v += shift);
    Ok(ResonanceMatrix { index: bk.clone(), entries, eigenvalues })
}

/// `C` for the cluster of `center + t` along `directions`, with the truncated potential.
pub fn build_c(model: &Model, center: &[i64], t: &[f64], directions: &[Vec<i64>]) -> Result<ResonanceMatrix> {
    let bk = build_bk(model, center, t, directions)?;
    assemble_c(&model.lattice, &model.truncated_potential(), &bk)
}

/// Eigenvalues `λ_1 ≤ … ≤ λ_{b_k}` of `C`.
pub fn predict_resonant(model: &Model, center: &[i64], t: &[f64], directions: &[Vec<i64>]) -> Result<Vec<f64>> {
    Ok(build_c(model, center, t, directions)?.eigenvalues)
}

/// `max_i |r_i(x) − r_i(x')| / |x − x'|` with `r_i = λ_i − |x|²`, where `x'`
/// moves the whole cluster by `dx`.
pub fn lipschitz_ratio(model: &Model, bk: &BkIndexSet, dx: &[f64]) -> Result<f64> {
    let pot = model.truncated_potential();
    let lat = &model.lattice;
    let moved = BkIndexSet { t: add(&bk.t, dx), ..bk.clone() };
    let a = assemble_c(lat, &pot, bk)?;
    let b = assemble_c(lat, &pot, &moved)?;
    let xa = norm2(&add(&lat.vector(&bk.center), &bk.t));
    let xb = norm2(&add(&lat.vector(&bk.center), &moved.t));
    let step = norm2(dx).sqrt();
    Ok(a.eigenvalues
        .iter()
        .zip(&b.eigenvalues)
        .map(|(u, w)| ((w - xb) - (u - xa)).abs() / step)
        .fold(0.0, f64::max))
}

/// `Φ_{j,β}` labelled by the Hill index `j` and `β ∈ Γ_δ` (coordinates).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HillState {
    pub j: i64,
    pub beta: Vec<i64>,
}

impl HillState {
    fn key(&self) -> Vec<i64> {
        let mut k = vec![self.j];
        k.extend(&self.beta);
        k
    }
}

#[derive(Debug, Clone)]
struct Transverse {
    b: Vec<i64>,
    n: i64,
    bstar: f64,
    q: Complex64,
}

/// Result of [`SingleResonance::e_series`].
#[derive(Debug, Clone, PartialEq)]
pub struct SingleResResult {
    pub state: HillState,
    pub v: f64,
    /// `|β+τ|² + μ_j(v)`.
    pub lambda_jb: f64,
    /// `E_0 … E_{order−1}`.
    pub e_values: Vec<f64>,
    pub predicted: f64,
    pub min_denominator: f64,
    pub chains: usize,
}

/// Everything needed to evaluate couplings and chain sums near the plane
/// orthogonal to `δ`.
#[derive(Debug)]
pub struct SingleResonance {
    pub geom: DeltaGeometry,
    pub td: TDecomposition,
    pub t: Vec<f64>,
    pub hill: HillCache,
    pub rho: f64,
    /// Half-width of the `j'` window around the bookkeeping index.
    pub window: i64,
    pub coupling_floor: f64,
    /// Floor when `β^i = β`.
    pub same_floor: f64,
    /// Floor when `β^i ≠ β`.
    pub other_floor: f64,
    pub depth: usize,
    pub order: usize,
    transverse: Vec<Transverse>,
    max_jump: i64,
    memo: RwLock<HashMap<HillState, Arc<BTreeMap<HillState, Complex64>>>>,
}

impl SingleResonance {
    /// Context for `δ` (dual coordinates) and quasimomentum `t`, built from
    /// the truncated potential.
    pub fn new(model: &Model, delta: &[i64], t: &[f64]) -> Result<Self> {
        Self::with_potential(model, &model.truncated_potential(), delta, t)
    }

    pub fn with_potential(model: &Model, pot: &FourierPotential, delta: &[i64], t: &[f64]) -> Result<Self> {
        pot.check_real()?;
        let geom = sublattice_geometry(&model.lattice, delta)?;
        let td = decompose_t(t, &geom);
        let p = &model.params;
        let rho = p.rho;
        let mut q_delta = pot.directional(&geom);
        if q_delta.remove(&0).is_some_and(|z| z.norm() > 0.0) {
            return Err(Error::Invalid("potential has a nonzero mean".into()));
        }
        let transverse: Vec<Transverse> = pot
            .transverse(&geom)
            .iter()
            .map(|(g, q)| {
                let b = geom.project_coords(g);
                Transverse { bstar: geom.beta_star(&b), n: geom.star_index(g), b, q: *q }
            })
            .collect();
        let dn = geom.delta_norm2.sqrt();
        let r1 = p.rho_alpha_k(1) / (2.0 * dn) + 2.0 * dn;
        let window = r1.ceil() as i64;
        let n_max = transverse.iter().map(|m| m.n.abs()).max().unwrap_or(0);
        let max_jump = window + n_max + 1 + transverse.iter().map(|m| m.bstar.abs().ceil() as i64).max().unwrap_or(0);
        let depth = model.config.chain_depth(p);
        let order = model.config.resonance_known_order(p) + 1;
        let j_top = (p.rho_alpha_k(1) / geom.delta_norm2).ceil() as i64 + 2 + (depth as i64 + 1) * max_jump;
        let (m_lo, m_hi) = default_modes(&q_delta, j_top);
        Ok(SingleResonance {
            hill: HillCache::new(q_delta, geom.delta_norm2, m_lo, m_hi),
            geom,
            td,
            t: t.to_vec(),
            rho,
            window,
            coupling_floor: model.config.coupling_floor,
            same_floor: 1.0 / rho.ln(),
            other_floor: 0.5 * p.rho_alpha_k(2),
            depth,
            order,
            transverse,
            max_jump,
            memo: RwLock::new(HashMap::new()),
        })
    }

    /// State of the momentum `x = γ + t`.
    pub fn state_of(&self, lat: &Lattice, x: &[f64]) -> Result<HillState> {
        let k = lat.coset_coords(x, &self.t)?;
        let dec = decompose_coords(&k, &self.geom, &self.td);
        Ok(HillState { j: dec.j, beta: dec.beta })
    }

    pub fn v(&self, beta: &[i64]) -> f64 {
        self.geom.v_of(beta, &self.td)
    }

    fn spectrum(&self, beta: &[i64]) -> Result<Arc<HillSpectrum>> {
        self.hill.get(self.v(beta))
    }

    /// Hill eigenpair of `state`; fails outside the reliable label range.
    pub fn pair(&self, s: &HillState) -> Result<HillEigenpair> {
        let spec = self.spectrum(&s.beta)?;
        if !spec.reliable(s.j) {
            return Err(Error::Numerical(format!(
                "Hill label {} lies outside the reliable range of modes {}..={}",
                s.j, spec.m_lo, spec.m_hi
            )));
        }
        spec.by_j(s.j)
            .cloned()
            .ok_or_else(|| Error::Numerical(format!("no Hill eigenpair labelled {}", s.j)))
    }

    /// `λ_{j,β} = |β+τ|² + μ_j(v(β))` with transverse offset `tau`.
    fn lambda_at(&self, s: &HillState, tau: &[f64]) -> Result<f64> {
        let mu = self.pair(s)?.mu;
        Ok(norm2(&add(&self.geom.beta_vector(&s.beta), tau)) + mu)
    }

    pub fn lambda(&self, s: &HillState) -> Result<f64> {
        self.lambda_at(s, &self.td.tau)
    }

    /// Integer offset `v(β) − (β₁,δ*)/2π − v(β+β₁)`.
    fn shift(&self, beta: &[i64], b: &[i64], bstar: f64) -> Result<i64> {
        let w = self.v(beta) - bstar - self.v(&iadd(beta, b));
        let r = w.round();
        if (w - r).abs() > 1e-9 {
            return Err(Error::Numerical(format!("phase index {w} is not an integer; the delta* pairing is broken")));
        }
        Ok(r as i64)
    }

    /// `a = (e^{i(n₁ − (β₁,δ*)/2π)ζ} φ_{j,v(β)}, φ_{j',v(β+β₁)})` for `s' = (j', β+β₁)`.
    pub fn coupling_a(&self, n1: i64, beta1: &[i64], s: &HillState, s2: &HillState) -> Result<Complex64> {
        if isub(&s2.beta, &s.beta) != beta1 {
            return Err(Error::Invalid(format!("states {s:?} and {s2:?} are not linked by {beta1:?}")));
        }
        let bstar = self.geom.beta_star(beta1);
        let dm = n1 + self.shift(&s.beta, beta1, bstar)?;
        let p = self.pair(s)?;
        let p2 = self.pair(s2)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in p.m_lo..=p.m_hi() {
            acc += p.coeff(m) * p2.coeff(m + dm).conj();
        }
        Ok(acc)
    }

    /// `A(s, s') = Σ q_{γ₁} a(…)` over transverse `γ₁` with projection `β' − β`.
    pub fn a_coeff(&self, s: &HillState, s2: &HillState) -> Result<Complex64> {
        let b = isub(&s2.beta, &s.beta);
        let mut acc = Complex64::new(0.0, 0.0);
        for m in self.transverse.iter().filter(|m| m.b == b) {
            acc += m.q * self.coupling_a(m.n, &m.b, s, s2)?;
        }
        Ok(acc)
    }

    /// Nonzero couplings `A(s, ·)` inside the `j'` windows.
    pub fn neighbors(&self, s: &HillState) -> Result<Arc<BTreeMap<HillState, Complex64>>> {
        if let Some(n) = self.memo.read().expect("coupling memo poisoned").get(s) {
            return Ok(n.clone());
        }
        let p = self.pair(s)?;
        let mut out: BTreeMap<HillState, Complex64> = BTreeMap::new();
        let mut partner_cache: HashMap<HillState, HillEigenpair> = HashMap::new();
        for m in &self.transverse {
            let beta2 = iadd(&s.beta, &m.b);
            let dm = m.n + self.shift(&s.beta, &m.b, m.bstar)?;
            let centre = s.j + dm;
            for j2 in centre - self.window..=centre + self.window {
                let s2 = HillState { j: j2, beta: beta2.clone() };
                let p2 = match partner_cache.get(&s2) {
                    Some(p2) => p2.clone(),
                    None => {
                        let p2 = self.pair(&s2)?;
                        partner_cache.insert(s2.clone(), p2.clone());
                        p2
                    }
                };
                let mut acc = Complex64::new(0.0, 0.0);
                for mm in p.m_lo..=p.m_hi() {
                    acc += p.coeff(mm) * p2.coeff(mm + dm).conj();
                }
                *out.entry(s2).or_default() += m.q * acc;
            }
        }
        out.retain(|_, a| a.norm() > self.coupling_floor);
        let out = Arc::new(out);
        self.memo.write().expect("coupling memo poisoned").insert(s.clone(), out.clone());
        Ok(out)
    }

    fn reach(&self, hops: usize) -> Vec<HashSet<Vec<i64>>> {
        let d = self.geom.gamma_delta.len();
        let mut out = vec![HashSet::from([vec![0; d]])];
        for h in 0..hops {
            let next = out[h]
                .iter()
                .flat_map(|b| self.transverse.iter().map(move |m| iadd(b, &m.b)))
                .collect();
            out.push(next);
        }
        out
    }

    /// `Σ |A(s, ·)|` over the windows.
    pub fn coupling_l1(&self, s: &HillState) -> Result<f64> {
        Ok(self.neighbors(s)?.values().map(|a| a.norm()).sum())
    }

    /// `S'_k(a)` for the state `s`.
    pub fn s_prime_k(&self, a: f64, s: &HillState, k: usize) -> Result<f64> {
        Ok(self.s_prime_full(a, s, k, &self.td.tau)?.0)
    }

    fn s_prime_full(&self, a: f64, s: &HillState, k: usize, tau: &[f64]) -> Result<(f64, f64, usize)> {
        if k == 0 || self.transverse.is_empty() {
            return Ok((0.0, f64::INFINITY, 0));
        }
        let mut walk = Walk {
            ctx: self,
            root: s,
            a,
            k,
            tau,
            sum: Complex64::new(0.0, 0.0),
            abs_sum: 0.0,
            min_den: f64::INFINITY,
            count: 0,
            path: vec![s.clone()],
            lambdas: HashMap::new(),
            closing: self.neighbors(s)?,
            reach: self.reach(k + 1),
        };
        walk.run(s, Complex64::new(1.0, 0.0), 1.0)?;
        if walk.sum.im.abs() > 1e-10 * walk.abs_sum.max(1e-300) && walk.sum.im.abs() > 1e-300 {
            return Err(Error::Numerical(format!("S'_{k} has imaginary part {:e}", walk.sum.im)));
        }
        Ok((walk.sum.re, walk.min_den, walk.count))
    }

    /// `E_0 = 0`, `E_s = Σ_{k=1}^{depth} S'_k(λ_{j,β} + E_{s−1})`.
    pub fn e_series(&self, s: &HillState) -> Result<SingleResResult> {
        self.e_series_at(s, self.order, &self.td.tau)
    }

    fn e_series_at(&self, s: &HillState, order: usize, tau: &[f64]) -> Result<SingleResResult> {
        let order = order.max(1);
        let lambda = self.lambda_at(s, tau)?;
        let mut e: Vec<f64> = vec![0.0];
        let mut min_den = f64::INFINITY;
        let mut chains = 0;
        for step in 1..order {
            let prev = e[step - 1];
            if step > 1 && prev == e[step - 2] {
                e.push(prev);
                continue;
            }
            if prev.abs() >= self.same_floor {
                return Err(Error::Numerical(format!(
                    "E_{} = {prev:e} leaves the (ln rho)^-1 neighbourhood of lambda",
                    step - 1
                )));
            }
            let mut acc = 0.0;
            for k in 1..=self.depth {
                let (v, md, c) = self.s_prime_full(lambda + prev, s, k, tau)?;
                acc += v;
                min_den = min_den.min(md);
                chains += c;
            }
            e.push(acc);
        }
        Ok(SingleResResult {
            v: self.v(&s.beta),
            state: s.clone(),
            lambda_jb: lambda,
            predicted: lambda + e[order - 1],
            e_values: e,
            min_denominator: min_den,
            chains,
        })
    }

    /// Orthonormal basis of `δ^⊥`.
    pub fn transverse_basis(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for g in &self.geom.gamma_delta {
            let mut w = g.clone();
            for u in &out {
                w = sub(&w, &scale(u, dot(&w, u)));
            }
            let n = norm2(&w).sqrt();
            out.push(scale(&w, 1.0 / n));
        }
        out
    }

    /// Central differences of `E_k(λ_{j,β}(τ))` along an orthonormal basis of `δ^⊥`.
    pub fn grad_e_check(&self, s: &HillState, k: usize, h: f64) -> Result<Vec<f64>> {
        let mut g = Vec::new();
        for u in self.transverse_basis() {
            let tp = add(&self.td.tau, &scale(&u, h));
            let tm = sub(&self.td.tau, &scale(&u, h));
            let ep = self.e_series_at(s, k + 1, &tp)?.e_values[k];
            let em = self.e_series_at(s, k + 1, &tm)?.e_values[k];
            g.push((ep - em) / (2.0 * h));
        }
        Ok(g)
    }

    /// Momentum `β + τ + (m + v(β))δ`.
    pub fn momentum(&self, beta: &[i64], m: i64) -> Vec<f64> {
        self.geom.momentum(beta, &self.td, m as f64)
    }
}

struct Walk<'a> {
    ctx: &'a SingleResonance,
    root: &'a HillState,
    a: f64,
    k: usize,
    tau: &'a [f64],
    sum: Complex64,
    abs_sum: f64,
    min_den: f64,
    count: usize,
    path: Vec<HillState>,
    lambdas: HashMap<HillState, f64>,
    /// Neighbours of the root: the only states a chain can close from.
    closing: Arc<BTreeMap<HillState, Complex64>>,
    /// `reach[h]`: sums of exactly `h` transverse steps.
    reach: Vec<HashSet<Vec<i64>>>,
}

impl Walk<'_> {
    fn run(&mut self, at: &HillState, num: Complex64, den: f64) -> Result<()> {
        let ctx = self.ctx;
        let depth = self.path.len() - 1;
        let nb = ctx.neighbors(at)?;
        if depth == self.k {
            if let Some(a) = nb.get(self.root) {
                let term = num * a / den;
                self.sum += term;
                self.abs_sum += term.norm();
                self.count += 1;
            }
            return Ok(());
        }
        // Steps left to come back to the root after the next one.
        let left = (self.k - depth) as i64;
        for (s2, a) in nb.iter() {
            if s2 == self.root {
                continue;
            }
            if !self.reach[left as usize].contains(&isub(&self.root.beta, &s2.beta))
                || (s2.j - self.root.j).abs() > left * ctx.max_jump
            {
                continue;
            }
            if left == 1 && !self.closing.contains_key(s2) {
                continue;
            }
            debug_assert!(s2.beta != at.beta, "consecutive states share beta");
            let lam = match self.lambdas.get(s2) {
                Some(l) => *l,
                None => {
                    let l = ctx.lambda_at(s2, self.tau)?;
                    self.lambdas.insert(s2.clone(), l);
                    l
                }
            };
            let d = self.a - lam;
            let floor = if s2.beta == self.root.beta { ctx.same_floor } else { ctx.other_floor };
            self.min_den = self.min_den.min(d.abs());
            self.path.push(s2.clone());
            if d.abs() < floor {
                let chain = self.path.iter().map(|s| s.key()).collect();
                return Err(Error::DenominatorFloor { chain, value: d, floor });
            }
            self.run(s2, num * a, den * d)?;
            self.path.pop();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{NumericConfig, PaperParams};

    fn model(amps: &[f64], rho: f64, depth: usize) -> Model {
        let cfg = NumericConfig { chain_depth: Some(depth), ..NumericConfig::default() };
        Model::new(Lattice::cubic(2), FourierPotential::cosines(amps), PaperParams::base_preset(2, rho).unwrap(), cfg)
            .unwrap()
    }

    #[test]
    fn free_cluster_is_diagonal() {
        let m = model(&[0.0, 0.0], 20.0, 4);
        let c = build_c(&m, &[0, 20], &[0.3, 0.1], &[vec![1, 0]]).unwrap();
        let mut want: Vec<f64> = c
            .index
            .members
            .iter()
            .map(|h| norm2(&add(&m.lattice.vector(h), &[0.3, 0.1])))
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in c.eigenvalues.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(c.is_self_adjoint());
    }

    #[test]
    fn three_by_three_closed_form() {
        let lat = Lattice::cubic(2);
        let pot = FourierPotential::cosines(&[1.0, 0.0]);
        let t = vec![0.25, 0.0];
        let bk = BkIndexSet { center: vec![0, 5], t: t.clone(), directions: vec![vec![1, 0]], members: vec![vec![0, 5], vec![-1, 5], vec![1, 5]] };
        let c = assemble_c(&lat, &pot, &bk).unwrap();
        // diag 25.0625, 25.5625, 26.5625 with unit couplings to the centre.
        assert_eq!(c.entry(0, 1), Complex64::new(1.0, 0.0));
        assert_eq!(c.entry(1, 2), Complex64::new(0.0, 0.0));
        let want = [24.02056382, 25.95590091, 27.21103527];
        for (a, b) in c.eigenvalues.iter().zip(want) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn permutation_leaves_spectrum() {
        let m = model(&[1.0, 0.7], 20.0, 4);
        let c = build_c(&m, &[0, 20], &[0.3, 0.1], &[vec![1, 0]]).unwrap();
        let mut bk = c.index.clone();
        bk.members.reverse();
        let c2 = assemble_c(&m.lattice, &m.truncated_potential(), &bk).unwrap();
        for (a, b) in c.eigenvalues.iter().zip(&c2.eigenvalues) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn transverse_cosine_gives_closed_form_e1() {
        let m = model(&[1.0, 1.0], 20.0, 1);
        let t = [0.3, 0.4];
        let ctx = SingleResonance::new(&m, &[1, 0], &t).unwrap();
        let x = [-0.7, 20.4];
        let s = ctx.state_of(&m.lattice, &x).unwrap();
        assert_eq!(s.j, -1);
        let bt = add(&ctx.geom.beta_vector(&s.beta), &ctx.td.tau);
        assert!(bt[0].abs() < 1e-12 && (bt[1] - 20.4).abs() < 1e-12);
        let r = ctx.e_series(&s).unwrap();
        let y: f64 = 20.4;
        let want = 2.0 / (4.0 * y * y - 1.0);
        assert!((r.e_values[1] - want).abs() < 1e-13, "{} vs {want}", r.e_values[1]);
        let g = ctx.grad_e_check(&s, 1, 1e-3).unwrap();
        let dwant = -16.0 * y / (4.0 * y * y - 1.0).powi(2);
        assert!((g[0].abs() - dwant.abs()).abs() < 1e-9);
    }

    #[test]
    fn pure_directional_potential_has_no_corrections() {
        let m = model(&[1.0, 0.0], 20.0, 4);
        let ctx = SingleResonance::new(&m, &[1, 0], &[0.3, 0.4]).unwrap();
        let s = ctx.state_of(&m.lattice, &[-0.7, 20.4]).unwrap();
        let r = ctx.e_series(&s).unwrap();
        assert!(r.e_values.iter().all(|&e| e == 0.0));
        assert_eq!(r.predicted, r.lambda_jb);
    }

    #[test]
    fn couplings_are_unitary_change_of_basis() {
        let lat = Lattice::cubic(2);
        let pot = FourierPotential::from_coeffs(
            2,
            vec![(vec![1, 1], Complex64::new(1.0, 0.0)), (vec![-1, -1], Complex64::new(1.0, 0.0))],
            true,
        )
        .unwrap();
        let m = Model::new(lat, pot, PaperParams::base_preset(2, 20.0).unwrap(), NumericConfig::default()).unwrap();
        let ctx = SingleResonance::with_potential(&m, &m.potential, &[1, 1], &[0.13, 0.31]).unwrap();
        assert!((ctx.geom.gamma_delta_star[0].fract().abs() - 0.5).abs() < 1e-12);
        let s = HillState { j: 0, beta: vec![3] };
        let spec = ctx.spectrum(&[4]).unwrap();
        let mut total = 0.0;
        for p in spec.pairs.iter().filter(|p| spec.reliable(p.j)) {
            let s2 = HillState { j: p.j, beta: vec![4] };
            total += ctx.coupling_a(0, &[1], &s, &s2).unwrap().norm_sqr();
        }
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn hexagonal_iterates_match_oracle() {
        let lat = Lattice::hexagonal();
        let one = Complex64::new(1.0, 0.0);
        let recs = [[1, 0], [0, 1], [1, -1], [-1, 0], [0, -1], [-1, 1]].iter().map(|k| (k.to_vec(), one)).collect();
        let pot = FourierPotential::from_coeffs(2, recs, true).unwrap();
        let m = Model::new(lat.clone(), pot.clone(), PaperParams::base_preset(2, 20.0).unwrap(), NumericConfig::default()).unwrap();
        let x = [-0.8, 20.0];
        let (g, t) = lat.reduce(&x);
        let ctx = SingleResonance::new(&m, &[1, 0], &t).unwrap();
        let r = ctx.e_series(&ctx.state_of(&lat, &x).unwrap()).unwrap();
        let spec = crate::oracle::solve_patch(&lat, &pot, &g, &t, 9.0, 20.0, 6000).unwrap();
        let err = spec
            .eigenvalues()
            .iter()
            .map(|l| (l - r.predicted).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(err < 1e-6, "{err}");
        assert!((r.predicted - r.lambda_jb).abs() > 1e-3);
    }
}
