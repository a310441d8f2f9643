//! Batch front end: a TOML experiment file, one mode, one CSV (or text report).
//!
//! Exit codes: 0 ok, 1 acceptance failure, 2 configuration error, 3 when some
//! record carries a numerical failure. Records are computed in parallel and
//! written in input order, so output depends only on the config and the seed.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::bloch::{eigenfunction_error, predict_expansion};
use crate::domains::{classify, sphere_point, DomainKind};
use crate::error::{Error, Result};
use crate::hill::{default_modes, HillCache};
use crate::isoenergetic::find_isoenergetic_point;
use crate::lattice::{norm2, sublattice_geometry};
use crate::nonres::{f_series, SeriesContext};
use crate::oracle::{assemble_and_solve, match_eigenvalue, solve_patch, BasisKind};
use crate::params::Preset;
use crate::resonance::{build_c, SingleResonance};
use crate::{verify, FourierPotential, Lattice, Model, NumericConfig, PaperParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Spectrum,
    Classify,
    PredictNonres,
    PredictRes,
    PredictSingleres,
    Bloch,
    Isoenergetic,
    Hill,
    VerifyAll,
}

#[derive(Debug, Parser)]
#[command(name = "bloch-asym", version, about = "Bloch eigenvalue asymptotics checked against plane-wave diagonalization")]
pub struct Args {
    /// Experiment file (TOML).
    #[arg(long, env = "BLOCH_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, env = "BLOCH_MODE")]
    pub mode: Option<Mode>,
    /// Output file; standard output when absent.
    #[arg(long, env = "BLOCH_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "BLOCH_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "BLOCH_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum LatticeKind {
    Cubic,
    Hexagonal,
    Custom,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    /// Rows of the period lattice basis, for `custom`.
    pub basis: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// Amplitudes `a_i` of `Σ 2a_i cos(x_i)` on the dual basis.
    pub cosines: Option<Vec<f64>>,
    /// Text file of `k_1 … k_d re im` records, relative to the config file.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    #[serde(default = "base")]
    pub preset: Preset,
    pub s: Option<i64>,
}

fn base() -> Preset {
    Preset::Base
}

impl Default for ParamSpec {
    fn default() -> Self {
        ParamSpec { preset: Preset::Base, s: None }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    /// Explicit momenta.
    pub x: Option<Vec<Vec<f64>>>,
    /// Number of seeded sphere samples per `ρ` when `x` is absent.
    pub samples: Option<usize>,
    pub t: Option<Vec<f64>>,
    pub cutoff: Option<f64>,
    pub delta: Option<Vec<i64>>,
    pub v: Option<Vec<f64>>,
    /// Also solve the oracle and report the deviation.
    #[serde(default)]
    pub oracle: bool,
}

/// Contents of the experiment file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(default = "default_rho")]
    pub rho: Vec<f64>,
    pub lattice: Option<LatticeSpec>,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub params: ParamSpec,
    #[serde(default)]
    pub numeric: NumericConfig,
    #[serde(default)]
    pub points: PointSpec,
}

fn two() -> usize {
    2
}

fn default_rho() -> Vec<f64> {
    vec![20.0]
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        toml::from_str("").expect("empty experiment parses")
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn lattice(&self) -> Result<Lattice> {
        let Some(spec) = &self.lattice else {
            return Ok(Lattice::cubic(self.dim));
        };
        let lat = match spec.kind {
            LatticeKind::Cubic => Lattice::cubic(self.dim),
            LatticeKind::Hexagonal if self.dim == 2 => Lattice::hexagonal(),
            LatticeKind::Hexagonal => return Err(Error::Config("the hexagonal lattice needs dim = 2".into())),
            LatticeKind::Custom => {
                let basis = spec
                    .basis
                    .clone()
                    .ok_or_else(|| Error::Config("lattice.kind = \"custom\" needs lattice.basis".into()))?;
                Lattice::new(basis)?
            }
        };
        if lat.dim() != self.dim {
            return Err(Error::Config(format!("lattice dimension {} differs from dim = {}", lat.dim(), self.dim)));
        }
        Ok(lat)
    }

    pub fn potential(&self, base_dir: &Path) -> Result<FourierPotential> {
        match (&self.potential.cosines, &self.potential.file) {
            (Some(_), Some(_)) => Err(Error::Config("give potential.cosines or potential.file, not both".into())),
            (Some(a), None) if a.len() == self.dim => Ok(FourierPotential::cosines(a)),
            (Some(a), None) => Err(Error::Config(format!("potential.cosines has {} entries for dim = {}", a.len(), self.dim))),
            (None, Some(f)) => FourierPotential::load(&base_dir.join(f), self.dim, true),
            (None, None) => Ok(FourierPotential::cosines(&vec![1.0; self.dim])),
        }
    }

    pub fn model(&self, base_dir: &Path, rho: f64) -> Result<Model> {
        let s = self.params.s.unwrap_or(match self.params.preset {
            Preset::Base => crate::params::base_s0(self.dim),
            Preset::Resonant => crate::params::resonant_s0(self.dim),
        });
        let params = PaperParams::with_preset(self.dim, s, rho, self.params.preset)?;
        Model::new(self.lattice()?, self.potential(base_dir)?, params, self.numeric.clone())
    }

    fn check_mode(&self, mode: Mode) -> Result<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("mode {mode:?} needs {what}")))
            }
        };
        if self.rho.is_empty() || self.rho.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config("rho must be a nonempty list of positive numbers".into()));
        }
        match mode {
            Mode::Spectrum => need(self.points.t.is_some() && self.points.cutoff.is_some(), "points.t and points.cutoff"),
            Mode::Hill => need(self.points.delta.is_some() && self.points.v.is_some(), "points.delta and points.v"),
            Mode::VerifyAll => Ok(()),
            _ => need(self.points.x.is_some() || self.points.samples.is_some(), "points.x or points.samples"),
        }?;
        if let Some(t) = &self.points.t {
            need(t.len() == self.dim, "points.t of length dim")?;
        }
        if let Some(xs) = &self.points.x {
            need(xs.iter().all(|x| x.len() == self.dim), "every points.x entry of length dim")?;
        }
        Ok(())
    }

    /// Momenta for scale index `i`: explicit ones, or seeded sphere samples.
    fn points_at(&self, i: usize, rho: f64, seed: u64) -> Vec<Vec<f64>> {
        if let Some(x) = &self.points.x {
            return x.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        (0..self.points.samples.unwrap_or(0)).map(|_| sphere_point(&mut rng, self.dim, rho)).collect()
    }
}

/// A finished table. Failed records keep their keys and carry the message.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub failures: usize,
}

impl Table {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn vec_cols(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

fn ivec(v: &[i64]) -> String {
    let parts: Vec<String> = v.iter().map(|c| c.to_string()).collect();
    parts.join(" ")
}

/// Runs `per_point` on every `(ρ, x)`; each closure returns the value columns.
fn point_table(
    spec: &ExperimentSpec,
    base_dir: &Path,
    seed: u64,
    value_cols: &[&str],
    per_point: impl Fn(&Model, &[f64]) -> Result<Vec<String>> + Sync,
) -> Result<Table> {
    let d = spec.dim;
    let mut header = vec!["rho".to_string()];
    header.extend(vec_cols("x", d));
    header.extend(value_cols.iter().map(|s| s.to_string()));
    header.push("failure".into());
    let mut tasks = Vec::new();
    for (i, &rho) in spec.rho.iter().enumerate() {
        let model = spec.model(base_dir, rho)?;
        for x in spec.points_at(i, rho, seed) {
            tasks.push((model.clone(), x));
        }
    }
    let rows: Vec<(Vec<String>, bool)> = tasks
        .par_iter()
        .map(|(model, x)| {
            let mut row = vec![num(model.rho())];
            row.extend(x.iter().map(|v| num(*v)));
            match per_point(model, x) {
                Ok(vals) => {
                    row.extend(vals);
                    row.push(String::new());
                    (row, false)
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(String::new(), value_cols.len()));
                    row.push(e.to_string());
                    (row, true)
                }
            }
        })
        .collect();
    let failures = rows.iter().filter(|r| r.1).count();
    Ok(Table { header, rows: rows.into_iter().map(|r| r.0).collect(), failures })
}

fn oracle_lambda(model: &Model, x: &[f64], half_window: f64) -> Result<f64> {
    let (g, t) = model.lattice.reduce(x);
    let c = &model.config;
    let spec = solve_patch(&model.lattice, &model.potential, &g, &t, c.oracle_patch_radius, half_window, c.oracle_max_basis)?;
    match_eigenvalue(&spec, &g, &t, &model.lattice, half_window, None)
        .map(|m| m.lambda)
        .ok_or_else(|| Error::Numerical(format!("no oracle eigenvalue matched at {x:?}")))
}

fn with_oracle(spec: &ExperimentSpec, model: &Model, x: &[f64], predicted: f64, mut row: Vec<String>) -> Result<Vec<String>> {
    if spec.points.oracle {
        let lam = oracle_lambda(model, x, 4.0 * model.params.rho_alpha_k(1))?;
        row.push(num(lam));
        row.push(num((lam - predicted).abs()));
    } else {
        row.push(String::new());
        row.push(String::new());
    }
    Ok(row)
}

/// Builds the table for `mode`; `verify-all` is handled by [`run`].
pub fn table(spec: &ExperimentSpec, mode: Mode, base_dir: &Path, seed: u64) -> Result<Table> {
    spec.check_mode(mode)?;
    match mode {
        Mode::Spectrum => {
            let model = spec.model(base_dir, spec.rho[0])?;
            let t = spec.points.t.clone().expect("checked");
            let cutoff = spec.points.cutoff.expect("checked");
            let c = &model.config;
            let out = assemble_and_solve(
                &model.lattice,
                &model.potential,
                &t,
                &BasisKind::Ball { cutoff: cutoff + c.oracle_cutoff_margin },
                0.0,
                Some((f64::NEG_INFINITY, cutoff * cutoff)),
                c.oracle_max_basis,
            )?;
            let rows = out
                .in_window(f64::NEG_INFINITY, cutoff * cutoff)
                .iter()
                .enumerate()
                .map(|(n, l)| vec![n.to_string(), num(*l)])
                .collect();
            Ok(Table { header: vec!["n".into(), "lambda".into()], rows, failures: 0 })
        }
        Mode::Classify => point_table(spec, base_dir, seed, &["kind", "order", "directions", "shell_ok"], |m, x| {
            let lab = classify(m, x);
            let kind = match &lab.kind {
                DomainKind::NonResonant => "non_resonant",
                DomainKind::SingleResonant { .. } => "single_resonant",
                DomainKind::Resonant { .. } => "resonant",
            };
            let dirs: Vec<String> = lab.directions().iter().map(|d| ivec(d)).collect();
            Ok(vec![kind.into(), lab.order().to_string(), dirs.join(";"), lab.shell_ok.to_string()])
        }),
        Mode::PredictNonres => point_table(spec, base_dir, seed, &["in_u", "f_last", "predicted", "oracle", "abs_err"], |m, x| {
            let in_u = crate::domains::Classifier::new(m).in_u(x);
            let ctx = if in_u { SeriesContext::new(m) } else { SeriesContext::unchecked(m) };
            let r = f_series(&ctx, x, m.config.known_order(&m.params) + 1)?;
            let row = vec![in_u.to_string(), num(*r.f_values.last().expect("nonempty")), num(r.predicted)];
            with_oracle(spec, m, x, r.predicted, row)
        }),
        Mode::PredictRes => point_table(spec, base_dir, seed, &["order", "b_k", "predicted", "oracle", "abs_err"], |m, x| {
            let lab = classify(m, x);
            let dirs = lab.directions();
            if dirs.is_empty() {
                return Err(Error::Invalid("point is non-resonant".into()));
            }
            let (g, t) = m.lattice.reduce(x);
            let c = build_c(m, &g, &t, &dirs)?;
            let x2 = norm2(x);
            let near = c
                .eigenvalues
                .iter()
                .copied()
                .min_by(|a, b| (a - x2).abs().total_cmp(&(b - x2).abs()))
                .ok_or_else(|| Error::Numerical("empty resonance matrix".into()))?;
            let row = vec![lab.order().to_string(), c.size().to_string(), num(near)];
            with_oracle(spec, m, x, near, row)
        }),
        Mode::PredictSingleres => point_table(
            spec,
            base_dir,
            seed,
            &["delta", "j", "beta", "v", "lambda_jb", "e_last", "predicted", "oracle", "abs_err"],
            |m, x| {
                let delta = match &spec.points.delta {
                    Some(d) => d.clone(),
                    None => match classify(m, x).kind {
                        DomainKind::SingleResonant { delta } => delta,
                        other => return Err(Error::Invalid(format!("point is {other:?}, not single-resonant"))),
                    },
                };
                let (_, t) = m.lattice.reduce(x);
                let sr = SingleResonance::new(m, &delta, &t)?;
                let s = sr.state_of(&m.lattice, x)?;
                let r = sr.e_series(&s)?;
                let row = vec![
                    ivec(&delta),
                    s.j.to_string(),
                    ivec(&s.beta),
                    num(r.v),
                    num(r.lambda_jb),
                    num(*r.e_values.last().expect("nonempty")),
                    num(r.predicted),
                ];
                with_oracle(spec, m, x, r.predicted, row)
            },
        ),
        Mode::Bloch => point_table(spec, base_dir, seed, &["order", "b_center", "terms", "known", "l2_err"], |m, x| {
            let ctx = SeriesContext::new(m);
            let (g, t) = m.lattice.reduce(x);
            let order = 2;
            let e = predict_expansion(m, &ctx, &g, &t, order)?;
            let err = if spec.points.oracle {
                let c = &m.config;
                let hw = 4.0 * m.params.rho_alpha_k(1);
                let o = solve_patch(&m.lattice, &m.potential, &g, &t, c.oracle_patch_radius, hw, c.oracle_max_basis)?;
                num(eigenfunction_error(&o, &m.lattice, &e, hw)?.error)
            } else {
                String::new()
            };
            Ok(vec![order.to_string(), num(e.b_center), e.coeffs.len().to_string(), num(e.known), err])
        }),
        Mode::Isoenergetic => point_table(
            spec,
            base_dir,
            seed,
            &["root", "lambda", "residual", "gap", "multiplicity", "simple"],
            |m, x| {
                let ctx = SeriesContext::unchecked(m);
                let n = norm2(x).sqrt();
                let u: Vec<f64> = x.iter().map(|v| v / n).collect();
                let p = find_isoenergetic_point(m, &ctx, &u)?;
                let root: Vec<String> = p.root.iter().map(|v| num(*v)).collect();
                Ok(vec![
                    root.join(" "),
                    num(p.lambda),
                    num(p.residual),
                    num(p.gap),
                    p.multiplicity.to_string(),
                    p.is_simple(m.params.eps1()).to_string(),
                ])
            },
        ),
        Mode::Hill => {
            let model = spec.model(base_dir, spec.rho[0])?;
            let delta = spec.points.delta.clone().expect("checked");
            let geom = sublattice_geometry(&model.lattice, &delta)?;
            let q = model.potential.directional(&geom);
            let (lo, hi) = default_modes(&q, 12);
            let cache = HillCache::new(q, geom.delta_norm2, lo, hi);
            let mut rows = Vec::new();
            for &v in spec.points.v.as_ref().expect("checked") {
                let h = cache.get(v)?;
                for p in &h.pairs {
                    rows.push(vec![num(v), p.j.to_string(), num(p.mu), h.reliable(p.j).to_string()]);
                }
            }
            Ok(Table { header: vec!["v".into(), "j".into(), "mu".into(), "reliable".into()], rows, failures: 0 })
        }
        Mode::VerifyAll => Err(Error::Invalid("verify-all produces a report, not a table".into())),
    }
}

/// Text report of the acceptance suite.
pub fn verify_report(seed: u64) -> (String, bool) {
    let checks = verify::run_all(seed);
    let mut s = format!("acceptance report (seed {seed})\n");
    for c in &checks {
        s.push_str(&c.line());
        s.push('\n');
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    s.push_str(&format!("summary: {passed}/{} passed\n", checks.len()));
    (s, passed == checks.len())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) | Error::DenominatorFloor { .. } | Error::OutsideShell(_) | Error::NotOnCoset { .. } => 3,
        _ => 2,
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Parses, runs and writes; returns the process exit code.
pub fn run(args: &Args) -> i32 {
    match run_inner(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bloch-asym: {e}");
            exit_code(&e)
        }
    }
}

fn run_inner(args: &Args) -> Result<i32> {
    let (spec, base_dir) = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let spec: ExperimentSpec = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            (spec, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (ExperimentSpec::default(), PathBuf::new()),
    };
    let mode = args
        .mode
        .or(spec.mode)
        .ok_or_else(|| Error::Config("no mode given (use --mode or `mode` in the config)".into()))?;
    let seed = args.seed.or(spec.seed).unwrap_or(0);
    let out = args.out.clone().or_else(|| spec.out.clone());
    if let Some(n) = args.threads {
        // A global pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    if mode == Mode::VerifyAll {
        let (report, ok) = verify_report(seed);
        write_out(out.as_deref(), &report)?;
        return Ok(if ok { 0 } else { 1 });
    }
    let t = table(&spec, mode, &base_dir, seed)?;
    write_out(out.as_deref(), &t.to_csv()?)?;
    if t.failures > 0 {
        eprintln!("bloch-asym: {} record(s) failed; see the failure column", t.failures);
        return Ok(3);
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(text: &str) -> ExperimentSpec {
        ExperimentSpec::parse(text).unwrap()
    }

    #[test]
    fn free_spectrum_is_sorted_squares() {
        let s = spec("potential.cosines = [0.0, 0.0]\n[points]\nt = [0.3, 0.1]\ncutoff = 3.0\n");
        let t = table(&s, Mode::Spectrum, Path::new(""), 0).unwrap();
        let mut want = Vec::new();
        for a in -5i64..=5 {
            for b in -5i64..=5 {
                let e = (a as f64 + 0.3).powi(2) + (b as f64 + 0.1).powi(2);
                if e <= 9.0 {
                    want.push(e);
                }
            }
        }
        want.sort_by(f64::total_cmp);
        assert_eq!(t.rows.len(), want.len());
        for (r, w) in t.rows.iter().zip(&want) {
            assert!((r[1].parse::<f64>().unwrap() - w).abs() < 1e-10);
        }
    }

    #[test]
    fn unknown_field_is_a_config_error_with_line() {
        let e = ExperimentSpec::parse("dim = 2\nbogus = 1\n").unwrap_err();
        assert_eq!(exit_code(&e), 2);
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn singular_basis_names_row() {
        let s = spec("[lattice]\nkind = \"custom\"\nbasis = [[1.0, 2.0], [2.0, 4.0]]\n");
        let e = s.lattice().unwrap_err();
        assert_eq!(exit_code(&e), 2);
        assert!(e.to_string().contains("row 1"), "{e}");
    }

    #[test]
    fn missing_mode_fields_rejected() {
        let s = spec("");
        assert!(matches!(table(&s, Mode::Hill, Path::new(""), 0), Err(Error::Config(_))));
        assert!(matches!(table(&s, Mode::Classify, Path::new(""), 0), Err(Error::Config(_))));
    }

    #[test]
    fn sampled_tables_are_reproducible() {
        let s = spec("rho = [20.0, 30.0]\n[points]\nsamples = 5\n");
        let a = table(&s, Mode::Classify, Path::new(""), 9).unwrap().to_csv().unwrap();
        let b = table(&s, Mode::Classify, Path::new(""), 9).unwrap().to_csv().unwrap();
        let c = table(&s, Mode::Classify, Path::new(""), 10).unwrap().to_csv().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.lines().count(), 11);
    }
}
