//! Potentials as finite Fourier series `q(x) = Σ q_γ e^{i(γ,x)}`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{dot, ineg, DeltaGeometry, Lattice};

/// One Fourier mode with its dual vector cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub k: Vec<i64>,
    pub vec: Vec<f64>,
    pub q: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierPotential {
    dim: usize,
    coeffs: BTreeMap<Vec<i64>, Complex64>,
    pub declared_s: Option<i64>,
}

impl FourierPotential {
    pub fn zero(dim: usize) -> Self {
        FourierPotential { dim, coeffs: BTreeMap::new(), declared_s: None }
    }

    /// Builds a potential from `(coords, q_γ)` records. Zero coefficients are
    /// dropped; a nonzero mean is rejected, and so is a violation of
    /// `q_{−γ} = conj(q_γ)` when `enforce_real` is set.
    pub fn from_coeffs(dim: usize, records: Vec<(Vec<i64>, Complex64)>, enforce_real: bool) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (k, q) in records {
            if k.len() != dim {
                return Err(Error::Invalid(format!("coefficient {k:?} has wrong dimension")));
            }
            if !(q.re.is_finite() && q.im.is_finite()) {
                return Err(Error::Invalid(format!("coefficient at {k:?} is not finite")));
            }
            if q == Complex64::new(0.0, 0.0) {
                continue;
            }
            if k.iter().all(|&c| c == 0) {
                return Err(Error::Invalid("q_0 must vanish (zero mean)".into()));
            }
            if coeffs.insert(k.clone(), q).is_some() {
                return Err(Error::Invalid(format!("duplicate coefficient {k:?}")));
            }
        }
        let out = FourierPotential { dim, coeffs, declared_s: None };
        if enforce_real {
            out.check_real()?;
        }
        Ok(out)
    }

    /// `Σ_i 2a_i cos x_i` style potentials: `q_{±e_i} = a_i`.
    pub fn cosines(amplitudes: &[f64]) -> Self {
        let dim = amplitudes.len();
        let mut recs = Vec::new();
        for (i, &a) in amplitudes.iter().enumerate() {
            let mut k = vec![0; dim];
            k[i] = 1;
            recs.push((k.clone(), Complex64::new(a, 0.0)));
            recs.push((ineg(&k), Complex64::new(a, 0.0)));
        }
        FourierPotential::from_coeffs(dim, recs, true).expect("cosine potential is real")
    }

    pub fn check_real(&self) -> Result<()> {
        for (k, q) in &self.coeffs {
            let m = self.get(&ineg(k));
            if (m - q.conj()).norm() > 1e-14 * q.norm().max(1.0) {
                return Err(Error::Invalid(format!("q_{{-g}} != conj(q_g) at g={k:?}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, k: &[i64]) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn is_real_valued_coeffs(&self) -> bool {
        self.coeffs.values().all(|q| q.im == 0.0)
    }

    /// Modes with their vectors, in coordinate order.
    pub fn modes(&self, lat: &Lattice) -> Vec<Mode> {
        self.coeffs
            .iter()
            .map(|(k, q)| Mode { k: k.clone(), vec: lat.vector(k), q: *q })
            .collect()
    }

    /// Coordinate lookup table.
    pub fn table(&self) -> HashMap<Vec<i64>, Complex64> {
        self.coeffs.iter().map(|(k, q)| (k.clone(), *q)).collect()
    }

    /// `M = Σ|q_γ|`, an upper bound for `sup|q|`.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.values().map(|q| q.norm()).sum()
    }

    /// Largest `|γ|` in the support.
    pub fn support_radius(&self, lat: &Lattice) -> f64 {
        self.coeffs
            .keys()
            .map(|k| dot(&lat.vector(k), &lat.vector(k)).sqrt())
            .fold(0.0, f64::max)
    }

    /// Restriction to `Γ(radius)` and the dropped mass `Σ_{|γ|≥radius}|q_γ|`.
    pub fn truncate_radius(&self, lat: &Lattice, radius: f64) -> (FourierPotential, f64) {
        let mut kept = BTreeMap::new();
        let mut tail = 0.0;
        for (k, q) in &self.coeffs {
            let v = lat.vector(k);
            if dot(&v, &v).sqrt() < radius {
                kept.insert(k.clone(), *q);
            } else {
                tail += q.norm();
            }
        }
        (FourierPotential { dim: self.dim, coeffs: kept, declared_s: self.declared_s }, tail)
    }

    /// Restriction to `Γ(ρ^α)`.
    pub fn truncate(&self, lat: &Lattice, rho: f64, alpha: f64) -> (FourierPotential, f64) {
        self.truncate_radius(lat, rho.powf(alpha))
    }

    /// Directional potential `Q(ζ) = Σ_n q_{nδ} e^{inζ}` as `n ↦ q_{nδ}`.
    pub fn directional(&self, geom: &DeltaGeometry) -> BTreeMap<i64, Complex64> {
        let mut out = BTreeMap::new();
        for (k, q) in &self.coeffs {
            if let Some(n) = collinear_multiple(k, &geom.delta_coords) {
                out.insert(n, *q);
            }
        }
        out
    }

    /// `q − q^δ`.
    pub fn transverse(&self, geom: &DeltaGeometry) -> FourierPotential {
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(k, _)| collinear_multiple(k, &geom.delta_coords).is_none())
            .map(|(k, q)| (k.clone(), *q))
            .collect();
        FourierPotential { dim: self.dim, coeffs, declared_s: self.declared_s }
    }

    /// Embeds a one-dimensional series back along `δ`.
    pub fn from_directional(dim: usize, geom: &DeltaGeometry, series: &BTreeMap<i64, Complex64>) -> Self {
        let coeffs = series
            .iter()
            .filter(|(n, q)| **n != 0 && **q != Complex64::new(0.0, 0.0))
            .map(|(n, q)| (geom.delta_coords.iter().map(|c| c * n).collect(), *q))
            .collect();
        FourierPotential { dim, coeffs, declared_s: None }
    }

    /// Text format: one record per line, `k_1 … k_d re im`. Floats are
    /// written in shortest round-trip form so that load(save(q)) == q.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(ds) = self.declared_s {
            let _ = writeln!(s, "# s {ds}");
        }
        for (k, q) in &self.coeffs {
            for c in k {
                let _ = write!(s, "{c} ");
            }
            let _ = writeln!(s, "{:?} {:?}", q.re, q.im);
        }
        s
    }

    pub fn from_text(dim: usize, text: &str, enforce_real: bool) -> Result<Self> {
        let mut recs = Vec::new();
        let mut declared = None;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("s") {
                    declared = it.next().and_then(|v| v.parse().ok());
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != dim + 2 {
                return Err(Error::Config(format!(
                    "potential line {}: expected {} fields, found {}",
                    ln + 1,
                    dim + 2,
                    f.len()
                )));
            }
            let bad = |what: &str| Error::Config(format!("potential line {}: bad {what}", ln + 1));
            let k = f[..dim]
                .iter()
                .map(|v| v.parse::<i64>().map_err(|_| bad("coordinate")))
                .collect::<Result<Vec<_>>>()?;
            let re: f64 = f[dim].parse().map_err(|_| bad("real part"))?;
            let im: f64 = f[dim + 1].parse().map_err(|_| bad("imaginary part"))?;
            recs.push((k, Complex64::new(re, im)));
        }
        let mut out = FourierPotential::from_coeffs(dim, recs, enforce_real)?;
        out.declared_s = declared;
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path, dim: usize, enforce_real: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(dim, &text, enforce_real)
    }
}

/// `Some(n)` when `k = n·δ`.
pub fn collinear_multiple(k: &[i64], delta: &[i64]) -> Option<i64> {
    let i = delta.iter().position(|&c| c != 0)?;
    if k[i] % delta[i] != 0 {
        return None;
    }
    let n = k[i] / delta[i];
    if k.iter().zip(delta).all(|(a, b)| *a == n * b) {
        Some(n)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::sublattice_geometry;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn truncate_keeps_or_drops() {
        let lat = Lattice::cubic(2);
        let q = FourierPotential::from_coeffs(2, vec![(vec![1, 0], c(1.0)), (vec![-1, 0], c(1.0))], true).unwrap();
        let (t, tail) = q.truncate_radius(&lat, 2.0);
        assert_eq!(t, q);
        assert_eq!(tail, 0.0);
        let (t, tail) = q.truncate_radius(&lat, 0.5);
        assert!(t.is_empty());
        assert_eq!(tail, 2.0);
    }

    #[test]
    fn directional_filters_collinear() {
        let lat = Lattice::cubic(2);
        let g = sublattice_geometry(&lat, &[1, 0]).unwrap();
        let q = FourierPotential::from_coeffs(
            2,
            vec![
                (vec![1, 0], c(1.0)),
                (vec![-1, 0], c(1.0)),
                (vec![0, 1], c(0.5)),
                (vec![0, -1], c(0.5)),
                (vec![2, 0], c(0.25)),
                (vec![-2, 0], c(0.25)),
            ],
            true,
        )
        .unwrap();
        let d = q.directional(&g);
        assert_eq!(d.keys().copied().collect::<Vec<_>>(), vec![-2, -1, 1, 2]);
        let back = FourierPotential::from_directional(2, &g, &d);
        assert_eq!(back.len(), 4);
        assert_eq!(q.transverse(&g).len(), 2);
        let only_x2 = FourierPotential::cosines(&[0.0, 1.0]);
        assert!(only_x2.directional(&g).is_empty());
    }

    #[test]
    fn sup_bound_values() {
        assert_eq!(FourierPotential::cosines(&[1.0, 0.0]).sup_bound(), 2.0);
        assert_eq!(FourierPotential::zero(2).sup_bound(), 0.0);
    }

    #[test]
    fn rejects_mean_and_nonreal() {
        assert!(FourierPotential::from_coeffs(2, vec![(vec![0, 0], c(1.0))], true).is_err());
        assert!(FourierPotential::from_coeffs(2, vec![(vec![1, 0], c(1.0))], true).is_err());
        assert!(FourierPotential::from_coeffs(2, vec![(vec![1, 0], c(1.0))], false).is_ok());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let q = FourierPotential::from_coeffs(
            2,
            vec![
                (vec![1, 2], Complex64::new(0.1, 1.0 / 3.0)),
                (vec![-1, -2], Complex64::new(0.1, -1.0 / 3.0)),
            ],
            true,
        )
        .unwrap();
        let back = FourierPotential::from_text(2, &q.to_text(), true).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn parse_error_names_line() {
        let err = FourierPotential::from_text(2, "1 0 1.0 0.0\n1 x 1 0\n", false).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
