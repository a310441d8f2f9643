//! Plane-wave diagonalization of `L_t(q)` on a finite set of momenta
//! `γ + t`, used as the reference for every asymptotic formula.
//!
//! Three basis shapes are available: a ball `|γ + t| ≤ R`, a shell
//! `R₀ ≤ |γ + t| ≤ R₁`, and a patch `|γ − γ₀| ≤ r` around one momentum. The
//! patch keeps solves small at large `ρ`; its truncation is validated by
//! re-solving on a patch enlarged by 1.25.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hill::HillEigenpair;
use crate::lattice::{add, isub, norm2, DeltaGeometry, Lattice, TDecomposition};
use crate::linalg::{Eigen, SparseHermitian};
use crate::potential::FourierPotential;

#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind {
    Ball { cutoff: f64 },
    Shell { inner: f64, outer: f64 },
    Patch { center: Vec<i64>, radius: f64 },
}

impl BasisKind {
    pub fn enlarged(&self, factor: f64) -> BasisKind {
        match self {
            BasisKind::Ball { cutoff } => BasisKind::Ball { cutoff: cutoff * factor },
            BasisKind::Shell { inner, outer } => {
                let mid = 0.5 * (inner + outer);
                let half = 0.5 * (outer - inner) * factor;
                BasisKind::Shell { inner: (mid - half).max(0.0), outer: mid + half }
            }
            BasisKind::Patch { center, radius } => BasisKind::Patch { center: center.clone(), radius: radius * factor },
        }
    }
}

/// Momenta of the basis in dual coordinates, in deterministic order.
pub fn build_basis(lat: &Lattice, t: &[f64], kind: &BasisKind) -> Vec<Vec<i64>> {
    match kind {
        BasisKind::Ball { cutoff } => lat.enumerate_shifted(t, *cutoff, true),
        BasisKind::Shell { inner, outer } => lat
            .enumerate_shifted(t, *outer, true)
            .into_iter()
            .filter(|k| norm2(&add(&lat.vector(k), t)).sqrt() >= *inner)
            .collect(),
        BasisKind::Patch { center, radius } => {
            let zero = vec![0.0; lat.dim()];
            lat.enumerate_shifted(&zero, *radius, true)
                .into_iter()
                .map(|g| g.iter().zip(center).map(|(a, b)| a + b).collect())
                .collect()
        }
    }
}

/// Assembles `L_t(q) − σ` on `basis`: diagonal `|γ+t|² − σ`, entries `q_{γ−γ'}`.
pub fn assemble(
    lat: &Lattice,
    pot: &FourierPotential,
    t: &[f64],
    basis: &[Vec<i64>],
    shift: f64,
) -> Result<SparseHermitian> {
    pot.check_real()?;
    let index: HashMap<&[i64], usize> = basis.iter().enumerate().map(|(i, k)| (k.as_slice(), i)).collect();
    let diag = basis.iter().map(|k| norm2(&add(&lat.vector(k), t)) - shift).collect();
    let mut lower = Vec::new();
    for (i, k) in basis.iter().enumerate() {
        for (g, q) in pot.iter() {
            let other = isub(k, g);
            if let Some(&j) = index.get(other.as_slice()) {
                if j < i {
                    lower.push((i, j, *q));
                }
            }
        }
    }
    Ok(SparseHermitian { diag, lower })
}

static BINDING: Mutex<(f64, usize)> = Mutex::new((0.0, 0));

/// Largest binding residual over every solve so far and the number of
/// (eigenvector, momentum) pairs it covers.
pub fn binding_monitor() -> (f64, usize) {
    *BINDING.lock().expect("binding monitor poisoned")
}

pub fn reset_binding_monitor() {
    *BINDING.lock().expect("binding monitor poisoned") = (0.0, 0);
}

/// Spectrum of one truncated solve.
#[derive(Debug, Clone)]
pub struct OracleSpectrum {
    pub t: Vec<f64>,
    pub kind: BasisKind,
    pub basis: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
    /// Diagonal shift `σ`; `eigen.values` are eigenvalues of `L_t − σ`.
    pub shift: f64,
    pub eigen: Eigen,
    pub diag: Vec<f64>,
    modes: Vec<(Vec<i64>, Complex64)>,
    /// Largest binding residual over stored columns and interior momenta.
    pub binding_max: f64,
    pub binding_count: usize,
}

/// Result of [`match_eigenvalue`].
#[derive(Debug, Clone)]
pub struct Match {
    pub col: usize,
    pub lambda: f64,
    /// `b(N, γ)` of the selected (possibly rotated) eigenvector.
    pub b: Complex64,
    pub mass: f64,
    pub runner_up: f64,
    pub multiplicity: usize,
    pub vector: Vec<Complex64>,
}

impl OracleSpectrum {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn index_of(&self, gamma: &[i64]) -> Option<usize> {
        self.index.get(gamma).copied()
    }

    /// Eigenvalue `N` (0-based) of `L_t`.
    pub fn eigenvalue(&self, col: usize) -> f64 {
        self.eigen.values[col] + self.shift
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen.values.iter().map(|v| v + self.shift).collect()
    }

    /// Eigenvalues inside `[lo, hi]`.
    pub fn in_window(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.eigenvalues().into_iter().filter(|v| *v >= lo && *v <= hi).collect()
    }

    /// `b(N, γ)`; zero off the basis.
    pub fn b(&self, col: usize, gamma: &[i64]) -> Complex64 {
        match self.index_of(gamma) {
            Some(i) => self.eigen.vector(col)[i],
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn stored(&self) -> std::ops::Range<usize> {
        self.eigen.stored()
    }

    /// `γ` together with every `γ − γ₁`, `γ₁ ∈ supp q`, lies in the basis.
    pub fn is_interior(&self, i: usize) -> bool {
        let k = &self.basis[i];
        self.modes.iter().all(|(g, _)| self.index.contains_key(&isub(k, g)))
    }

    /// `|(Λ_N − |γ+t|²) b(N,γ) − Σ q_{γ₁} b(N, γ−γ₁)|` and whether `γ` is interior.
    pub fn binding_residual(&self, col: usize, i: usize) -> (f64, bool) {
        let u = self.eigen.vector(col);
        let k = &self.basis[i];
        let mut r = (self.eigen.values[col] - self.diag[i]) * u[i];
        let mut interior = true;
        for (g, q) in &self.modes {
            match self.index.get(&isub(k, g)) {
                Some(&j) => r -= q * u[j],
                None => interior = false,
            }
        }
        (r.norm(), interior)
    }

    /// Largest deviation of stored columns from unit norm and, when all
    /// columns are stored, of rows from unit norm.
    pub fn parseval_error(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        let range = self.stored();
        let mut rows = vec![0.0; n];
        for col in range.clone() {
            let u = self.eigen.vector(col);
            let s: f64 = u.iter().map(|c| c.norm_sqr()).sum();
            worst = worst.max((s - 1.0).abs());
            for (r, c) in rows.iter_mut().zip(u) {
                *r += c.norm_sqr();
            }
        }
        if range.len() == n {
            for r in rows {
                worst = worst.max((r - 1.0).abs());
            }
        }
        worst
    }

    /// Number of eigenvalues of `L_t` in the open interval `(lo, hi)`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.eigenvalues().iter().filter(|v| **v > lo && **v < hi).count()
    }
}

/// Solves `L_t(q)` on the given basis. `window` (in units of `L_t`) selects
/// the eigenvectors that are stored.
pub fn assemble_and_solve(
    lat: &Lattice,
    pot: &FourierPotential,
    t: &[f64],
    kind: &BasisKind,
    shift: f64,
    window: Option<(f64, f64)>,
    max_basis: usize,
) -> Result<OracleSpectrum> {
    let basis = build_basis(lat, t, kind);
    if basis.is_empty() {
        return Err(Error::Invalid(format!("empty oracle basis for {kind:?}")));
    }
    if basis.len() > max_basis {
        return Err(Error::Numerical(format!(
            "oracle basis of {} plane waves exceeds the limit {max_basis}",
            basis.len()
        )));
    }
    let h = assemble(lat, pot, t, &basis, shift)?;
    let eigen = h.solve(window.map(|(lo, hi)| (lo - shift, hi - shift)))?;
    let index = basis.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
    let modes = pot.iter().map(|(k, q)| (k.clone(), *q)).collect();
    let mut spec = OracleSpectrum {
        t: t.to_vec(),
        kind: kind.clone(),
        basis,
        index,
        shift,
        eigen,
        diag: h.diag,
        modes,
        binding_max: 0.0,
        binding_count: 0,
    };
    let interior: Vec<usize> = (0..spec.len()).filter(|&i| spec.is_interior(i)).collect();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for col in spec.stored() {
        for &i in &interior {
            worst = worst.max(spec.binding_residual(col, i).0);
            count += 1;
        }
    }
    spec.binding_max = worst;
    spec.binding_count = count;
    let mut g = BINDING.lock().expect("binding monitor poisoned");
    g.0 = g.0.max(worst);
    g.1 += count;
    Ok(spec)
}

/// Patch solve around `γ₀ + t` with the shift at `|γ₀ + t|²` and every
/// eigenvector within `half_window` of it stored.
pub fn solve_patch(
    lat: &Lattice,
    pot: &FourierPotential,
    gamma: &[i64],
    t: &[f64],
    radius: f64,
    half_window: f64,
    max_basis: usize,
) -> Result<OracleSpectrum> {
    let e = norm2(&add(&lat.vector(gamma), t));
    assemble_and_solve(
        lat,
        pot,
        t,
        &BasisKind::Patch { center: gamma.to_vec(), radius },
        e,
        Some((e - half_window, e + half_window)),
        max_basis,
    )
}

/// Among stored eigenvalues with `|Λ_N − |γ+t|²| < half_width`, the one with
/// the largest `|b(N, γ)|`. Inside a degenerate cluster the eigenvector is
/// rotated to maximize `|b(N, γ)|`. Returns `None` when nothing qualifies or
/// when `|b| ≤ floor`.
pub fn match_eigenvalue(spec: &OracleSpectrum, gamma: &[i64], t: &[f64], lat: &Lattice, half_width: f64, floor: Option<f64>) -> Option<Match> {
    let i = spec.index_of(gamma)?;
    let e = norm2(&add(&lat.vector(gamma), t));
    let cand: Vec<usize> = spec
        .stored()
        .filter(|&c| (spec.eigenvalue(c) - e).abs() < half_width)
        .collect();
    if cand.is_empty() {
        return None;
    }
    // Clusters of numerically equal eigenvalues.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for c in cand {
        let gap_ok = clusters
            .last()
            .and_then(|cl| cl.last())
            .is_some_and(|&p| (spec.eigen.values[c] - spec.eigen.values[p]).abs() < 1e-10);
        if gap_ok {
            clusters.last_mut().unwrap().push(c);
        } else {
            clusters.push(vec![c]);
        }
    }
    let masses: Vec<f64> = clusters
        .iter()
        .map(|cl| cl.iter().map(|&c| spec.eigen.vector(c)[i].norm_sqr()).sum())
        .collect();
    let best = (0..clusters.len()).max_by(|&a, &b| masses[a].total_cmp(&masses[b]))?;
    let mass = masses[best];
    if let Some(f) = floor {
        if mass.sqrt() <= f {
            return None;
        }
    }
    let runner_up = masses
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != best)
        .map(|(_, m)| *m)
        .fold(0.0, f64::max);
    let cl = &clusters[best];
    let (vector, b) = if cl.len() == 1 {
        let u = spec.eigen.vector(cl[0]).to_vec();
        let b = u[i];
        (u, b)
    } else {
        let n = spec.len();
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        for &c in cl {
            let u = spec.eigen.vector(c);
            let coef = u[i].conj();
            for (wk, uk) in w.iter_mut().zip(u) {
                *wk += coef * uk;
            }
        }
        let s = mass.sqrt();
        if s > 0.0 {
            w.iter_mut().for_each(|z| *z /= s);
        }
        let b = w[i];
        (w, b)
    };
    Some(Match {
        col: cl[0],
        lambda: spec.eigenvalue(cl[0]),
        b,
        mass,
        runner_up,
        multiplicity: cl.len(),
        vector,
    })
}

/// Multiplies `v` by a unit phase so that component `i` becomes real and
/// nonnegative.
pub fn align_phase(v: &mut [Complex64], i: usize) {
    let z = v[i];
    if z.norm() > 0.0 {
        let ph = z / z.norm();
        v.iter_mut().for_each(|c| *c /= ph);
    }
}

/// `(Ψ_N, Φ_{j,β})` from the plane-wave coefficients of `Ψ_N`, and whether
/// a mode of `Φ_{j,β}` above `1e−14` fell outside the basis.
pub fn resonance_b(
    spec: &OracleSpectrum,
    vector: &[Complex64],
    lat: &Lattice,
    geom: &DeltaGeometry,
    td: &TDecomposition,
    beta: &[i64],
    pair: &HillEigenpair,
) -> Result<(Complex64, bool)> {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut truncated = false;
    for m in pair.m_lo..=pair.m_hi() {
        let c = pair.coeff(m);
        if c.norm() == 0.0 {
            continue;
        }
        let x = geom.momentum(beta, td, m as f64);
        let k = lat.coset_coords(&x, &spec.t)?;
        match spec.index_of(&k) {
            Some(i) => acc += vector[i] * c.conj(),
            None => truncated |= c.norm() > 1e-14,
        }
    }
    Ok((acc, truncated))
}

/// Largest change of the eigenvalues in `[lo, hi]` when the basis is
/// enlarged by `factor`; each eigenvalue is compared with the nearest one of
/// the enlarged solve.
pub fn truncation_drift(
    lat: &Lattice,
    pot: &FourierPotential,
    spec: &OracleSpectrum,
    lo: f64,
    hi: f64,
    factor: f64,
    max_basis: usize,
) -> Result<f64> {
    let big = assemble_and_solve(lat, pot, &spec.t, &spec.kind.enlarged(factor), spec.shift, Some((lo, hi)), max_basis)?;
    let reference = big.eigenvalues();
    let mut worst: f64 = 0.0;
    for v in spec.in_window(lo, hi) {
        let k = reference.partition_point(|&r| r < v);
        let near = [k.wrapping_sub(1), k]
            .iter()
            .filter_map(|&j| reference.get(j))
            .map(|r| (r - v).abs())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(near);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hill::solve_tv;
    use crate::lattice::{decompose_t, sublattice_geometry};
    use std::collections::BTreeMap;

    #[test]
    fn free_spectrum_is_sorted_kinetic() {
        let lat = Lattice::cubic(2);
        let t = [0.31, 0.17];
        let pot = FourierPotential::zero(2);
        let s = assemble_and_solve(&lat, &pot, &t, &BasisKind::Ball { cutoff: 6.0 }, 0.0, None, 5000).unwrap();
        let mut want: Vec<f64> = s.basis.iter().map(|k| norm2(&add(&lat.vector(k), &t))).collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in s.eigenvalues().iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }
        for col in s.stored() {
            let u = s.eigen.vector(col);
            let ones = u.iter().filter(|c| (c.norm() - 1.0).abs() < 1e-12).count();
            assert_eq!(ones, 1);
        }
    }

    #[test]
    fn one_dimensional_agrees_with_hill() {
        let lat = Lattice::cubic(1);
        let pot = FourierPotential::cosines(&[1.0]);
        let v = 0.3;
        let s = assemble_and_solve(&lat, &pot, &[v], &BasisKind::Ball { cutoff: 30.5 }, 0.0, None, 5000).unwrap();
        let mut q = BTreeMap::new();
        q.insert(1, Complex64::new(1.0, 0.0));
        q.insert(-1, Complex64::new(1.0, 0.0));
        let lo = s.basis.iter().map(|k| k[0]).min().unwrap();
        let hi = s.basis.iter().map(|k| k[0]).max().unwrap();
        let h = solve_tv(&q, v, 1.0, lo, hi).unwrap();
        for (a, b) in s.eigenvalues().iter().zip(h.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn binding_identity_and_parseval() {
        let lat = Lattice::cubic(2);
        let pot = FourierPotential::cosines(&[1.0, 0.5]);
        let t = [0.2, 0.45];
        let s = assemble_and_solve(&lat, &pot, &t, &BasisKind::Ball { cutoff: 8.0 }, 30.0, None, 5000).unwrap();
        assert!(s.binding_max < 1e-9);
        assert!(s.binding_count > 0);
        assert!(s.parseval_error() < 1e-10);
        let boundary = (0..s.len()).find(|&i| !s.is_interior(i)).unwrap();
        let (r, interior) = s.binding_residual(0, boundary);
        assert!(!interior);
        let bound = pot.sup_bound() * s.eigen.vector(0).iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(r <= bound + 1e-12);
    }

    #[test]
    fn assembly_is_self_adjoint() {
        let lat = Lattice::cubic(2);
        let pot = FourierPotential::from_coeffs(
            2,
            vec![
                (vec![1, 0], Complex64::new(0.3, 0.4)),
                (vec![-1, 0], Complex64::new(0.3, -0.4)),
                (vec![1, 1], Complex64::new(-0.2, 0.0)),
                (vec![-1, -1], Complex64::new(-0.2, 0.0)),
            ],
            true,
        )
        .unwrap();
        let t = [0.1, 0.2];
        let basis = build_basis(&lat, &t, &BasisKind::Ball { cutoff: 4.0 });
        let h = assemble(&lat, &pot, &t, &basis, 0.0).unwrap();
        for &(i, j, z) in &h.lower {
            assert_eq!(z, pot.get(&isub(&basis[i], &basis[j])));
            assert_eq!(z.conj(), pot.get(&isub(&basis[j], &basis[i])));
        }
    }

    #[test]
    fn tensor_case() {
        let lat = Lattice::cubic(2);
        let pot = FourierPotential::cosines(&[1.0, 0.0]);
        let t = [0.23, 0.41];
        let s = assemble_and_solve(&lat, &pot, &t, &BasisKind::Ball { cutoff: 14.0 }, 0.0, None, 5000).unwrap();
        let geom = sublattice_geometry(&lat, &[1, 0]).unwrap();
        let td = decompose_t(&t, &geom);
        let mut q = BTreeMap::new();
        q.insert(1, Complex64::new(1.0, 0.0));
        q.insert(-1, Complex64::new(1.0, 0.0));
        let h = solve_tv(&q, td.axial, 1.0, -40, 40).unwrap();
        let mut tensor = Vec::new();
        for b in -20..=20i64 {
            let bt = geom.beta_vector(&[b]);
            let perp = norm2(&add(&bt, &td.tau));
            for mu in h.values() {
                tensor.push(perp + mu);
            }
        }
        tensor.sort_by(f64::total_cmp);
        let got = s.in_window(20.0, 40.0);
        let want: Vec<f64> = tensor.into_iter().filter(|v| *v >= 20.0 && *v <= 40.0).collect();
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8 * b);
        }
    }

    #[test]
    fn matching_prefers_overlap() {
        let lat = Lattice::cubic(2);
        let pot = FourierPotential::cosines(&[0.2, 0.2]);
        let gamma = [13, 7];
        let t = [0.21, 0.37];
        let s = solve_patch(&lat, &pot, &gamma, &t, 6.0, 3.0, 5000).unwrap();
        let m = match_eigenvalue(&s, &gamma, &t, &lat, 1.0, None).unwrap();
        assert!(m.mass > 0.5);
        assert!(m.runner_up < 0.5);
        assert!(match_eigenvalue(&s, &gamma, &t, &lat, 1.0, Some(1.01)).is_none());
    }

    #[test]
    fn degenerate_cluster_is_rotated() {
        let lat = Lattice::cubic(2);
        let pot = FourierPotential::zero(2);
        let t = [0.0, 0.0];
        let s = assemble_and_solve(&lat, &pot, &t, &BasisKind::Ball { cutoff: 3.0 }, 0.0, None, 5000).unwrap();
        let m = match_eigenvalue(&s, &[1, 0], &t, &lat, 0.5, None).unwrap();
        assert_eq!(m.multiplicity, 4);
        assert!((m.mass - 1.0).abs() < 1e-12);
        let mut v = m.vector.clone();
        align_phase(&mut v, s.index_of(&[1, 0]).unwrap());
        let once = v.clone();
        align_phase(&mut v, s.index_of(&[1, 0]).unwrap());
        assert_eq!(once, v);
    }
}
