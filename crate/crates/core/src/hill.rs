//! The one-dimensional operator `T_v(Q) = −|δ|² d²/dζ² + Q(ζ)` with
//! `y(ζ + 2π) = e^{2πiv} y(ζ)`, solved in the basis `e^{i(m+v)ζ}`.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::stats::{loglog_fit, LineFit};

/// One eigenpair `(μ_j(v), φ_{j,v})`; `coeffs[i]` multiplies `e^{i(m_lo+i+v)ζ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HillEigenpair {
    pub j: i64,
    pub v: f64,
    pub mu: f64,
    pub m_lo: i64,
    pub coeffs: Vec<Complex64>,
    /// Mass of the largest Fourier mode.
    pub dominant_mass: f64,
    /// Set when `j` came from nondecreasing order instead of the dominant mode.
    pub fallback: bool,
}

impl HillEigenpair {
    pub fn coeff(&self, m: i64) -> Complex64 {
        let i = m - self.m_lo;
        if i < 0 || i as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[i as usize]
        }
    }

    pub fn m_hi(&self) -> i64 {
        self.m_lo + self.coeffs.len() as i64 - 1
    }
}

/// All eigenpairs of one truncated solve, sorted by `μ`.
#[derive(Debug, Clone)]
pub struct HillSpectrum {
    pub v: f64,
    pub delta_norm2: f64,
    pub m_lo: i64,
    pub m_hi: i64,
    /// Largest `|n|` with `q_{nδ} ≠ 0`.
    pub support: i64,
    pub pairs: Vec<HillEigenpair>,
    by_j: HashMap<i64, usize>,
}

impl HillSpectrum {
    pub fn by_j(&self, j: i64) -> Option<&HillEigenpair> {
        self.by_j.get(&j).map(|&i| &self.pairs[i])
    }

    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.mu).collect()
    }

    /// Labels far enough from the truncation edge to be trusted.
    pub fn reliable(&self, j: i64) -> bool {
        let margin = 8 + self.support;
        j >= self.m_lo + margin && j <= self.m_hi - margin
    }

    pub fn any_fallback(&self) -> bool {
        self.pairs.iter().any(|p| p.fallback)
    }

    /// Free energy at the edge of the trusted label range.
    pub fn reliable_energy(&self) -> f64 {
        let margin = 8 + self.support;
        let lo = (self.m_lo + margin) as f64 + self.v;
        let hi = (self.m_hi - margin) as f64 + self.v;
        lo.abs().min(hi.abs()).powi(2) * self.delta_norm2
    }
}

/// Mode range `[−h, h]` for labels up to `j_max`: `4·j_max + support + 16` modes.
pub fn default_modes(q: &BTreeMap<i64, Complex64>, j_max: i64) -> (i64, i64) {
    let s = support(q);
    let h = (4 * j_max.abs() + s + 16 + 1) / 2;
    (-h, h)
}

fn support(q: &BTreeMap<i64, Complex64>) -> i64 {
    q.keys().map(|n| n.abs()).max().unwrap_or(0)
}

/// Self-adjoint Hill matrix entry `(m, m')` relative to `m_lo`.
pub fn hill_entry(q: &BTreeMap<i64, Complex64>, v: f64, delta_norm2: f64, m_lo: i64, i: usize, k: usize) -> Complex64 {
    if i == k {
        let m = m_lo as f64 + i as f64 + v;
        Complex64::new(m * m * delta_norm2, 0.0)
    } else {
        q.get(&(i as i64 - k as i64)).copied().unwrap_or_default()
    }
}

/// Solves `T_v(Q)` on modes `m_lo..=m_hi`.
pub fn solve_tv(
    q: &BTreeMap<i64, Complex64>,
    v: f64,
    delta_norm2: f64,
    m_lo: i64,
    m_hi: i64,
) -> Result<HillSpectrum> {
    let n = (m_hi - m_lo + 1).max(0) as usize;
    let s = support(q);
    if (n as i64) < 8 + s {
        return Err(Error::Invalid(format!("Hill truncation of {n} modes is below 8 + support {s}")));
    }
    if q.contains_key(&0) {
        return Err(Error::Invalid("directional potential has a mean term".into()));
    }
    let real = q.values().all(|c| c.im == 0.0);
    let eig = eigh(n, real, |i, k| hill_entry(q, v, delta_norm2, m_lo, i, k))?;

    // Free energies ranked, used for the fallback labels.
    let mut free: Vec<i64> = (m_lo..=m_hi).collect();
    free.sort_by(|a, b| {
        let ea = (*a as f64 + v).powi(2);
        let eb = (*b as f64 + v).powi(2);
        ea.total_cmp(&eb).then(a.cmp(b))
    });

    let mut pairs = Vec::with_capacity(n);
    let mut taken = std::collections::HashSet::new();
    let mut pending = Vec::new();
    for col in 0..n {
        let vec = eig.vector(col);
        let (imax, mass) = vec
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm_sqr()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let mut coeffs = vec.to_vec();
        // Fix the phase of the dominant coefficient to be real positive.
        let ph = coeffs[imax] / coeffs[imax].norm();
        if ph.norm() > 0.0 && ph.is_finite() {
            coeffs.iter_mut().for_each(|c| *c /= ph);
        }
        let j = m_lo + imax as i64;
        let fallback = !(mass > 0.5);
        if !fallback {
            taken.insert(j);
        } else {
            pending.push(col);
        }
        pairs.push(HillEigenpair { j, v, mu: eig.values[col], m_lo, coeffs, dominant_mass: mass, fallback });
    }
    let mut free_left = free.into_iter().filter(|m| !taken.contains(m));
    for col in pending {
        pairs[col].j = free_left.next().expect("as many labels as modes");
    }
    let by_j = pairs.iter().enumerate().map(|(i, p)| (p.j, i)).collect();
    Ok(HillSpectrum { v, delta_norm2, m_lo, m_hi, support: s, pairs, by_j })
}

/// `v ∈ W(ρ)`: every gap among the eigenvalues below `energy_max` exceeds `2/ln ρ`.
pub fn in_w_rho(spec: &HillSpectrum, rho: f64, energy_max: f64) -> Result<bool> {
    if energy_max > spec.reliable_energy() {
        return Err(Error::Invalid(format!(
            "gap window up to {energy_max} exceeds the reliable Hill energy {}; raise the mode count",
            spec.reliable_energy()
        )));
    }
    let threshold = 2.0 / rho.ln();
    let vals: Vec<f64> = spec.pairs.iter().map(|p| p.mu).filter(|&m| m <= energy_max).collect();
    Ok(vals.windows(2).all(|w| w[1] - w[0] > threshold))
}

/// Log-log slope of `|φ_m|` against `|mδ|` over modes `|m| > |j| + 1` whose
/// coefficients stand above `floor`.
pub fn fourier_decay_check(pair: &HillEigenpair, delta_norm2: f64, floor: f64) -> Result<LineFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for m in pair.m_lo..=pair.m_hi() {
        let c = pair.coeff(m).norm();
        if m.abs() > pair.j.abs() + 1 && c > floor && (m - pair.j).signum() == 1 {
            xs.push((m as f64).abs() * delta_norm2.sqrt());
            ys.push(c);
        }
    }
    if xs.len() < 3 {
        return Err(Error::Invalid(format!("only {} coefficients above {floor:e} for the decay fit", xs.len())));
    }
    Ok(loglog_fit(&xs, &ys))
}

/// Cache of Hill solves keyed by `v` rounded to `1e−12`.
#[derive(Debug)]
pub struct HillCache {
    pub q: BTreeMap<i64, Complex64>,
    pub delta_norm2: f64,
    pub m_lo: i64,
    pub m_hi: i64,
    map: RwLock<HashMap<i64, Arc<HillSpectrum>>>,
}

impl HillCache {
    pub fn new(q: BTreeMap<i64, Complex64>, delta_norm2: f64, m_lo: i64, m_hi: i64) -> Self {
        HillCache { q, delta_norm2, m_lo, m_hi, map: RwLock::new(HashMap::new()) }
    }

    pub fn get(&self, v: f64) -> Result<Arc<HillSpectrum>> {
        let key = (v * 1e12).round() as i64;
        if let Some(s) = self.map.read().expect("hill cache poisoned").get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(solve_tv(&self.q, v, self.delta_norm2, self.m_lo, self.m_hi)?);
        self.map.write().expect("hill cache poisoned").insert(key, s.clone());
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("hill cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
