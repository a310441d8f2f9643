//! Period lattice `Ω`, dual lattice `Γ`, and the geometry attached to a
//! maximal direction `δ ∈ Γ`.
//!
//! Dual vectors are stored by integer coordinates in the dual basis; the
//! pairing `(γ_i, ω_j) = 2π δ_ij` makes every integer bookkeeping exact.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn idot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn iadd(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn isub(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn ineg(a: &[i64]) -> Vec<i64> {
    a.iter().map(|x| -x).collect()
}

/// Solves `m x = rhs` for a small dense matrix by Gaussian elimination with
/// partial pivoting. Returns `None` when a pivot vanishes.
pub(crate) fn solve_small(m: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut a: Vec<Vec<f64>> = m.iter().cloned().collect();
    let mut b = rhs.to_vec();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Returns the dual basis `γ_i` with `(γ_i, ω_j) = 2π δ_ij`.
pub fn build_dual(basis: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = basis.len();
    if d == 0 || basis.iter().any(|r| r.len() != d) {
        return Err(Error::Config(format!("lattice basis must be {d} rows of length {d}")));
    }
    // Gram-Schmidt pass to name the first dependent row.
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for (i, row) in basis.iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("lattice basis row {i} is not finite")));
        }
        let mut r = row.clone();
        for o in &ortho {
            let c = dot(&r, o) / norm2(o);
            r = sub(&r, &scale(o, c));
        }
        if norm2(&r).sqrt() <= 1e-10 * norm2(row).sqrt().max(1e-300) {
            return Err(Error::SingularBasis { row: i });
        }
        ortho.push(r);
    }
    // Column i of the dual solves  W γ_i = 2π e_i.
    let mut dual = vec![vec![0.0; d]; d];
    for i in 0..d {
        let mut rhs = vec![0.0; d];
        rhs[i] = TWO_PI;
        let g = solve_small(basis, &rhs).ok_or(Error::SingularBasis { row: d - 1 })?;
        dual[i] = g;
    }
    Ok(dual)
}

/// A lattice together with its dual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub basis: Vec<Vec<f64>>,
    pub dual: Vec<Vec<f64>>,
}

impl Lattice {
    pub fn new(basis: Vec<Vec<f64>>) -> Result<Self> {
        let dual = build_dual(&basis)?;
        Ok(Lattice { basis, dual })
    }

    /// `Ω = 2πZ^d`, so that `Γ = Z^d`.
    pub fn cubic(d: usize) -> Self {
        let basis = (0..d)
            .map(|i| (0..d).map(|j| if i == j { TWO_PI } else { 0.0 }).collect())
            .collect();
        Lattice::new(basis).expect("cubic basis is regular")
    }

    /// Triangular lattice in the plane with unit-length dual vectors
    /// at 60 degrees.
    pub fn hexagonal() -> Self {
        let s = 3f64.sqrt();
        let basis = vec![vec![TWO_PI, -TWO_PI / s], vec![0.0, 2.0 * TWO_PI / s]];
        Lattice::new(basis).expect("hexagonal basis is regular")
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Measure of the fundamental domain `F` of `Ω`.
    pub fn volume(&self) -> f64 {
        det(&self.basis).abs()
    }

    /// Rescales `Ω` so that `μ(F) = 1`; returns the lattice and the length
    /// factor applied to `Ω`. Eigenvalues scale by `factor^{-2}`.
    pub fn normalized(&self) -> Result<(Lattice, f64)> {
        let f = self.volume().powf(-1.0 / self.dim() as f64);
        let basis = self.basis.iter().map(|r| scale(r, f)).collect();
        Ok((Lattice::new(basis)?, f))
    }

    /// `Σ k_i γ_i`.
    pub fn vector(&self, k: &[i64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (ki, g) in k.iter().zip(&self.dual) {
            if *ki != 0 {
                for c in 0..d {
                    out[c] += *ki as f64 * g[c];
                }
            }
        }
        out
    }

    /// `Σ m_i ω_i`.
    pub fn omega_vector(&self, m: &[i64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (mi, w) in m.iter().zip(&self.basis) {
            for c in 0..d {
                out[c] += *mi as f64 * w[c];
            }
        }
        out
    }

    /// Real coordinates of `x` in the dual basis, `(x, ω_i)/2π`.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|w| dot(x, w) / TWO_PI).collect()
    }

    /// Splits `x = γ + t` with `t` in the half-open cell spanned by the dual basis.
    pub fn reduce(&self, x: &[f64]) -> (Vec<i64>, Vec<f64>) {
        let c = self.coords(x);
        let k: Vec<i64> = c.iter().map(|v| v.floor() as i64).collect();
        let t = sub(x, &self.vector(&k));
        (k, t)
    }

    /// Integer coordinates of `x − t`, or an error when `x − t ∉ Γ`.
    pub fn coset_coords(&self, x: &[f64], t: &[f64]) -> Result<Vec<i64>> {
        let c = self.coords(&sub(x, t));
        let k: Vec<i64> = c.iter().map(|v| v.round() as i64).collect();
        let dist = c
            .iter()
            .zip(&k)
            .map(|(a, b)| (a - *b as f64).abs())
            .fold(0.0, f64::max);
        if dist > 1e-8 {
            return Err(Error::NotOnCoset { distance: dist });
        }
        Ok(k)
    }

    /// All `γ ∈ Γ` with `0 < |γ| < radius`, in lexicographic coordinate order.
    pub fn enumerate_ball(&self, radius: f64) -> Vec<Vec<i64>> {
        let zero = vec![0.0; self.dim()];
        self.enumerate_shifted(&zero, radius, false)
            .into_iter()
            .filter(|k| k.iter().any(|&v| v != 0))
            .collect()
    }

    /// All `γ ∈ Γ` with `|γ + shift| < radius` (or `≤` when `closed`).
    pub fn enumerate_shifted(&self, shift: &[f64], radius: f64, closed: bool) -> Vec<Vec<i64>> {
        let d = self.dim();
        if !(radius > 0.0) {
            return Vec::new();
        }
        // (γ + shift, ω_i)/2π = k_i + c_i is bounded by radius·|ω_i|/2π.
        let c = self.coords(shift);
        let bounds: Vec<(i64, i64)> = (0..d)
            .map(|i| {
                let w = norm2(&self.basis[i]).sqrt() / TWO_PI * radius;
                ((-w - c[i]).floor() as i64, (w - c[i]).ceil() as i64)
            })
            .collect();
        let r2 = radius * radius;
        let mut out = Vec::new();
        let mut k: Vec<i64> = bounds.iter().map(|b| b.0).collect();
        loop {
            let v = add(&self.vector(&k), shift);
            let n = norm2(&v);
            if n < r2 || (closed && n <= r2) {
                out.push(k.clone());
            }
            let mut i = d;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if k[i] < bounds[i].1 {
                    k[i] += 1;
                    for j in i + 1..d {
                        k[j] = bounds[j].0;
                    }
                    break;
                }
            }
        }
    }

    /// All `γ` with `r_in ≤ |γ + shift| < r_out`, in coordinate order. The last
    /// coordinate is solved from a quadratic so thin shells stay cheap.
    pub fn enumerate_annulus(&self, shift: &[f64], r_in: f64, r_out: f64) -> Vec<Vec<i64>> {
        let d = self.dim();
        let mut out = Vec::new();
        if !(r_out > 0.0) || r_in >= r_out {
            return out;
        }
        let c = self.coords(shift);
        let bounds: Vec<(i64, i64)> = (0..d - 1)
            .map(|i| {
                let w = norm2(&self.basis[i]).sqrt() / TWO_PI * r_out;
                ((-w - c[i]).floor() as i64, (w - c[i]).ceil() as i64)
            })
            .collect();
        let g = &self.dual[d - 1];
        let a = norm2(g);
        let (lo2, hi2) = (r_in.max(0.0).powi(2), r_out * r_out);
        let mut k: Vec<i64> = bounds.iter().map(|b| b.0).collect();
        k.push(0);
        loop {
            let mut head = k.clone();
            head[d - 1] = 0;
            let w = add(&self.vector(&head), shift);
            let b = dot(&w, g);
            let cc = norm2(&w);
            // |w + s g|² = a s² + 2 b s + cc
            let roots = |r2: f64| {
                let disc = b * b - a * (cc - r2);
                (disc >= 0.0).then(|| ((-b - disc.sqrt()) / a, (-b + disc.sqrt()) / a))
            };
            if let Some((olo, ohi)) = roots(hi2) {
                let ranges = match roots(lo2) {
                    Some((ilo, ihi)) if lo2 > 0.0 => vec![(olo, ilo), (ihi, ohi)],
                    _ => vec![(olo, ohi)],
                };
                for (s0, s1) in ranges {
                    for s in (s0.floor() as i64)..=(s1.ceil() as i64) {
                        k[d - 1] = s;
                        let n = norm2(&add(&self.vector(&k), shift));
                        if n >= lo2 && n < hi2 && out.last() != Some(&k) {
                            out.push(k.clone());
                        }
                    }
                }
            }
            let mut i = d - 1;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if k[i] < bounds[i].1 {
                    k[i] += 1;
                    for j in i + 1..d - 1 {
                        k[j] = bounds[j].0;
                    }
                    break;
                }
            }
        }
    }

    /// Shortest nonzero dual vector length.
    pub fn shortest_dual(&self) -> f64 {
        let mut r = self.dual.iter().map(|g| norm2(g).sqrt()).fold(f64::MAX, f64::min);
        loop {
            let ball = self.enumerate_ball(r * 1.000001);
            if let Some(m) = ball.iter().map(|k| norm2(&self.vector(k)).sqrt()).reduce(f64::min) {
                if m <= r * 1.000001 {
                    return m;
                }
            }
            r *= 1.5;
        }
    }
}

fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut sign = 1.0;
    for col in 0..n {
        let piv = match (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())) {
            Some(p) => p,
            None => return 0.0,
        };
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(col, piv);
            sign = -sign;
        }
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    sign * (0..n).map(|i| a[i][i]).product::<f64>()
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

pub fn gcd(a: i64, b: i64) -> i64 {
    ext_gcd(a.abs(), b.abs()).0
}

/// Unimodular `U` with `n·U = (g, 0, …, 0)`, `g = gcd(n) > 0`.
/// Returned as columns.
fn unimodular_completion(n: &[i64]) -> (i64, Vec<Vec<i64>>) {
    let d = n.len();
    let mut cols: Vec<Vec<i64>> = (0..d)
        .map(|i| (0..d).map(|j| i64::from(i == j)).collect())
        .collect();
    let mut w = n.to_vec();
    for i in 1..d {
        if w[i] == 0 {
            continue;
        }
        let (a, b) = (w[0], w[i]);
        let (g, x, y) = ext_gcd(a, b);
        let (g, x, y) = if g < 0 { (-g, -x, -y) } else { (g, x, y) };
        let c0: Vec<i64> = (0..d).map(|r| x * cols[0][r] + y * cols[i][r]).collect();
        let ci: Vec<i64> = (0..d).map(|r| (-b / g) * cols[0][r] + (a / g) * cols[i][r]).collect();
        cols[0] = c0;
        cols[i] = ci;
        w[0] = g;
        w[i] = 0;
    }
    if w[0] < 0 {
        cols[0] = ineg(&cols[0]);
        w[0] = -w[0];
    }
    (w[0], cols)
}

/// Geometry attached to a maximal `δ ∈ Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaGeometry {
    pub delta_coords: Vec<i64>,
    pub delta: Vec<f64>,
    pub delta_norm2: f64,
    /// `δ*` in `Ω`-coordinates and as a vector; `(δ*, δ) = 2π`.
    pub delta_star_coords: Vec<i64>,
    pub delta_star: Vec<f64>,
    /// Basis of `Ω_δ = {h ∈ Ω : (h, δ) = 0}`.
    pub omega_delta_coords: Vec<Vec<i64>>,
    pub omega_delta: Vec<Vec<f64>>,
    /// Basis of `Γ_δ`, the dual of `Ω_δ` inside `δ^⊥`.
    pub gamma_delta: Vec<Vec<f64>>,
    /// `(g_i, δ*)/2π` for each `Γ_δ` basis vector.
    pub gamma_delta_star: Vec<f64>,
    /// Diameter of the cell `F_δ` spanned by the `Γ_δ` basis.
    pub diameter: f64,
}

/// `t = a + τ + axial·δ` with `a ∈ Γ_δ`, `τ ∈ F_δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TDecomposition {
    pub a: Vec<i64>,
    pub tau: Vec<f64>,
    pub tau_coords: Vec<f64>,
    pub axial: f64,
}

/// `x = β + τ + (j + v)δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaDecomposition {
    /// `β` in `Γ_δ` coordinates.
    pub beta: Vec<i64>,
    pub beta_vec: Vec<f64>,
    pub tau: Vec<f64>,
    pub j: i64,
    pub v: f64,
}

impl DeltaGeometry {
    /// `Γ_δ` vector with the given coordinates.
    pub fn beta_vector(&self, c: &[i64]) -> Vec<f64> {
        let d = self.delta.len();
        let mut out = vec![0.0; d];
        for (ci, g) in c.iter().zip(&self.gamma_delta) {
            for k in 0..d {
                out[k] += *ci as f64 * g[k];
            }
        }
        out
    }

    /// `Γ_δ` coordinates of the projection of `γ` onto `δ^⊥` (exact).
    pub fn project_coords(&self, gamma: &[i64]) -> Vec<i64> {
        self.omega_delta_coords.iter().map(|m| idot(gamma, m)).collect()
    }

    /// `(γ, δ*)/2π` for `γ` given by dual coordinates (exact integer).
    pub fn star_index(&self, gamma: &[i64]) -> i64 {
        idot(gamma, &self.delta_star_coords)
    }

    /// `(β, δ*)/2π` for `β ∈ Γ_δ` given by coordinates.
    pub fn beta_star(&self, beta: &[i64]) -> f64 {
        beta.iter().zip(&self.gamma_delta_star).map(|(c, s)| *c as f64 * s).sum()
    }

    /// Axial coordinate `(x, δ)/|δ|²`.
    pub fn axial(&self, x: &[f64]) -> f64 {
        dot(x, &self.delta) / self.delta_norm2
    }

    /// `v(β, t)`: fractional part of `axial(t) − (β − a, δ*)/2π`.
    pub fn v_of(&self, beta: &[i64], td: &TDecomposition) -> f64 {
        let w = td.axial - self.beta_star(&isub(beta, &td.a));
        w - w.floor()
    }

    /// Momentum `β + τ + (m + v)δ`.
    pub fn momentum(&self, beta: &[i64], td: &TDecomposition, m: f64) -> Vec<f64> {
        let v = self.v_of(beta, td);
        let b = self.beta_vector(beta);
        let mut out = add(&b, &td.tau);
        for (o, dl) in out.iter_mut().zip(&self.delta) {
            *o += (m + v) * dl;
        }
        out
    }
}

/// Builds `δ*`, `Ω_δ`, `Γ_δ` for a maximal `δ` given by dual coordinates.
pub fn sublattice_geometry(lat: &Lattice, delta_coords: &[i64]) -> Result<DeltaGeometry> {
    let d = lat.dim();
    if delta_coords.len() != d {
        return Err(Error::Invalid(format!("delta must have {d} coordinates")));
    }
    if delta_coords.iter().all(|&c| c == 0) {
        return Err(Error::Invalid("delta must be nonzero".into()));
    }
    let (g, cols) = unimodular_completion(delta_coords);
    if g != 1 {
        // (δ, ω_i) = 2π n_i; every pairing is a multiple of 2π·g.
        let index = delta_coords.iter().position(|&c| c != 0).unwrap_or(0);
        return Err(Error::NotMaximal { coords: delta_coords.to_vec(), index, gcd: g });
    }
    let delta = lat.vector(delta_coords);
    let delta_norm2 = norm2(&delta);
    let delta_star_coords = cols[0].clone();
    let delta_star = lat.omega_vector(&delta_star_coords);
    let omega_delta_coords: Vec<Vec<i64>> = cols[1..].to_vec();
    let omega_delta: Vec<Vec<f64>> = omega_delta_coords.iter().map(|m| lat.omega_vector(m)).collect();
    let k = omega_delta.len();
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| dot(&omega_delta[i], &omega_delta[j])).collect())
        .collect();
    let mut gamma_delta = Vec::with_capacity(k);
    for i in 0..k {
        let mut rhs = vec![0.0; k];
        rhs[i] = TWO_PI;
        let coef = solve_small(&gram, &rhs)
            .ok_or_else(|| Error::Numerical("degenerate Omega_delta Gram matrix".into()))?;
        let mut g = vec![0.0; d];
        for (c, h) in coef.iter().zip(&omega_delta) {
            for r in 0..d {
                g[r] += c * h[r];
            }
        }
        gamma_delta.push(g);
    }
    let gamma_delta_star = gamma_delta.iter().map(|g| dot(g, &delta_star) / TWO_PI).collect();
    let mut diameter: f64 = 0.0;
    for mask in 0..(1u64 << k) {
        let mut v = vec![0.0; d];
        for (i, g) in gamma_delta.iter().enumerate() {
            let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            for r in 0..d {
                v[r] += s * g[r];
            }
        }
        diameter = diameter.max(norm2(&v).sqrt());
    }
    Ok(DeltaGeometry {
        delta_coords: delta_coords.to_vec(),
        delta,
        delta_norm2,
        delta_star_coords,
        delta_star,
        omega_delta_coords,
        omega_delta,
        gamma_delta,
        gamma_delta_star,
        diameter,
    })
}

/// `t = a + τ + |δ|^{−2}(t, δ)δ`.
pub fn decompose_t(t: &[f64], geom: &DeltaGeometry) -> TDecomposition {
    let axial = geom.axial(t);
    let c: Vec<f64> = geom.omega_delta.iter().map(|h| dot(t, h) / TWO_PI).collect();
    let a: Vec<i64> = c.iter().map(|v| v.floor() as i64).collect();
    let tau_coords: Vec<f64> = c.iter().map(|v| v - v.floor()).collect();
    let d = t.len();
    let mut tau = vec![0.0; d];
    for (tc, g) in tau_coords.iter().zip(&geom.gamma_delta) {
        for r in 0..d {
            tau[r] += tc * g[r];
        }
    }
    TDecomposition { a, tau, tau_coords, axial }
}

/// `x = γ + t = β + τ + (j + v)δ` with `v = v(β, t)`.
pub fn gamma_delta_decompose(
    lat: &Lattice,
    x: &[f64],
    geom: &DeltaGeometry,
    t: &[f64],
) -> Result<DeltaDecomposition> {
    let k = lat.coset_coords(x, t)?;
    let td = decompose_t(t, geom);
    Ok(decompose_coords(&k, geom, &td))
}

/// Same as [`gamma_delta_decompose`] for `x = γ + t` with `γ` given by coordinates.
pub fn decompose_coords(gamma: &[i64], geom: &DeltaGeometry, td: &TDecomposition) -> DeltaDecomposition {
    let b = geom.project_coords(gamma);
    let beta = iadd(&b, &td.a);
    let n = geom.star_index(gamma);
    let w = td.axial - geom.beta_star(&b);
    let fl = w.floor();
    let v = w - fl;
    DeltaDecomposition {
        beta_vec: geom.beta_vector(&beta),
        beta,
        tau: td.tau.clone(),
        j: n + fl as i64,
        v,
    }
}

impl DeltaDecomposition {
    pub fn reconstruct(&self, geom: &DeltaGeometry) -> Vec<f64> {
        let mut out = add(&self.beta_vec, &self.tau);
        for (o, dl) in out.iter_mut().zip(&geom.delta) {
            *o += (self.j as f64 + self.v) * dl;
        }
        out
    }
}

/// `γ = b + (n − (b, δ*)/2π)δ` with `b ∈ Γ_δ` (coordinates) and `n ∈ Z`.
pub fn split_gamma(gamma: &[i64], geom: &DeltaGeometry) -> (Vec<i64>, i64) {
    (geom.project_coords(gamma), geom.star_index(gamma))
}

/// Checks that sampled `ω ∈ Ω` split as `h + lδ*` with `h ∈ Ω_δ` and sampled
/// `γ ∈ Γ` split per `γ = b + (n − (b,δ*)/2π)δ`. Returns the largest residual.
pub fn verify_geometry(lat: &Lattice, geom: &DeltaGeometry, samples: &[Vec<i64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for s in samples {
        let w = lat.omega_vector(s);
        let l = dot(&w, &geom.delta) / TWO_PI;
        let h = sub(&w, &scale(&geom.delta_star, l));
        worst = worst.max((l - l.round()).abs());
        worst = worst.max(dot(&h, &geom.delta).abs());
        let g = lat.vector(s);
        let (b, n) = split_gamma(s, geom);
        let bv = geom.beta_vector(&b);
        let rec = add(&bv, &scale(&geom.delta, n as f64 - geom.beta_star(&b)));
        worst = worst.max(norm2(&sub(&rec, &g)).sqrt());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn dual_of_two_pi_identity_is_identity() {
        let lat = Lattice::cubic(2);
        assert!(close(&lat.dual[0], &[1.0, 0.0], 1e-15));
        assert!(close(&lat.dual[1], &[0.0, 1.0], 1e-15));
    }

    #[test]
    fn dual_of_identity_is_two_pi() {
        let lat = Lattice::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(close(&lat.dual[0], &[TWO_PI, 0.0], 1e-14));
    }

    #[test]
    fn skew_dual_pairing() {
        let lat = Lattice::new(vec![vec![TWO_PI, 0.0], vec![PI, PI]]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { TWO_PI } else { 0.0 };
                assert!((dot(&lat.dual[i], &lat.basis[j]) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_basis_names_row() {
        let err = Lattice::new(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap_err();
        assert!(matches!(err, Error::SingularBasis { row: 1 }));
    }

    #[test]
    fn annulus_matches_filtered_ball() {
        for lat in [Lattice::cubic(2), Lattice::hexagonal(), Lattice::cubic(3)] {
            let d = lat.dim();
            let t: Vec<f64> = (0..d).map(|i| 0.17 + 0.3 * i as f64).collect();
            for (r0, r1) in [(0.0, 4.0), (5.5, 6.25), (9.9, 10.1)] {
                let mut want: Vec<Vec<i64>> = lat
                    .enumerate_shifted(&t, r1, false)
                    .into_iter()
                    .filter(|k| norm2(&add(&lat.vector(k), &t)) >= r0 * r0)
                    .collect();
                let mut got = lat.enumerate_annulus(&t, r0, r1);
                want.sort();
                got.sort();
                assert_eq!(got, want, "d={d} r=({r0},{r1})");
            }
        }
    }

    #[test]
    fn ball_counts() {
        let lat = Lattice::cubic(2);
        assert_eq!(lat.enumerate_ball(1.5).len(), 8);
        assert!(lat.enumerate_ball(0.9).is_empty());
        assert_eq!(lat.enumerate_ball(10.0).len(), 304);
    }

    #[test]
    fn axis_geometry() {
        let lat = Lattice::cubic(2);
        let g = sublattice_geometry(&lat, &[1, 0]).unwrap();
        assert!(close(&g.delta_star, &[TWO_PI, 0.0], 1e-14));
        assert_eq!(g.omega_delta.len(), 1);
        assert!(close(&g.omega_delta[0], &[0.0, TWO_PI], 1e-14) || close(&g.omega_delta[0], &[0.0, -TWO_PI], 1e-14));
        assert!((g.gamma_delta[0][1].abs() - 1.0).abs() < 1e-14);
        assert!(g.gamma_delta[0][0].abs() < 1e-14);
    }

    #[test]
    fn non_maximal_rejected() {
        let lat = Lattice::cubic(2);
        let err = sublattice_geometry(&lat, &[2, 0]).unwrap_err();
        assert!(matches!(err, Error::NotMaximal { gcd: 2, .. }));
    }

    #[test]
    fn decomposition_example() {
        let lat = Lattice::cubic(2);
        let g = sublattice_geometry(&lat, &[1, 0]).unwrap();
        let t = [0.2, 0.3];
        let x = [3.2, 2.3];
        let dd = gamma_delta_decompose(&lat, &x, &g, &t).unwrap();
        assert!(close(&dd.beta_vec, &[0.0, 2.0], 1e-12));
        assert!(close(&dd.tau, &[0.0, 0.3], 1e-12));
        assert_eq!(dd.j, 3);
        assert!((dd.v - 0.2).abs() < 1e-12);
    }

    #[test]
    fn t_zero_decomposes_to_zero() {
        let lat = Lattice::cubic(2);
        let g = sublattice_geometry(&lat, &[1, 1]).unwrap();
        let td = decompose_t(&[0.0, 0.0], &g);
        assert!(td.a.iter().all(|&a| a == 0));
        assert!(td.tau.iter().all(|&a| a == 0.0));
        assert_eq!(td.axial, 0.0);
    }

    #[test]
    fn pure_axial_t() {
        let lat = Lattice::cubic(2);
        let g = sublattice_geometry(&lat, &[1, 1]).unwrap();
        let t = scale(&g.delta, 0.3 / g.delta_norm2);
        let td = decompose_t(&t, &g);
        assert!((td.axial - 0.3 / g.delta_norm2).abs() < 1e-14);
        assert!(norm2(&td.tau) < 1e-28);
    }

    #[test]
    fn coset_check() {
        let lat = Lattice::cubic(2);
        assert!(lat.coset_coords(&[1.25, 0.5], &[0.2, 0.5]).is_err());
        assert_eq!(lat.coset_coords(&[1.2, -0.5], &[0.2, 0.5]).unwrap(), vec![1, -1]);
    }

    #[test]
    fn normalization_has_unit_volume() {
        let (n, f) = Lattice::cubic(2).normalized().unwrap();
        assert!((n.volume() - 1.0).abs() < 1e-12);
        assert!((f - 1.0 / TWO_PI).abs() < 1e-15);
    }

    #[test]
    fn three_dimensional_geometry() {
        let lat = Lattice::cubic(3);
        let g = sublattice_geometry(&lat, &[2, 3, 5]).unwrap();
        assert!((dot(&g.delta_star, &g.delta) - TWO_PI).abs() < 1e-12);
        for b in &g.gamma_delta {
            assert!(dot(b, &g.delta).abs() < 1e-12);
        }
        let samples: Vec<Vec<i64>> = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![3, -2, 7]];
        assert!(verify_geometry(&lat, &g, &samples) < 1e-10);
    }
}
