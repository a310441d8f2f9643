//! Asymptotic formulas for Bloch eigenvalues and eigenfunctions of the
//! periodic Schrödinger operator `L(q) = −Δ + q` in `R^d`, together with a
//! plane-wave diagonalization used to check them.
//!
//! Crate layout follows the computation:
//!
//! * [`params`], [`config`]: exponent system and numerical controls.
//! * [`lattice`], [`potential`]: lattices, sublattice geometry, Fourier potentials.
//! * [`domains`]: resonance slabs, the sets `E_k`, `U`, clusters `B_k`.
//! * [`hill`]: the one-dimensional operator `T_v(Q)`.
//! * [`nonres`], [`resonance`]: eigenvalue series away from and near resonance.
//! * [`oracle`]: truncated plane-wave diagonalization.
//! * [`bloch`]: eigenfunction expansions.
//! * [`isoenergetic`]: simple sets, isoenergetic points, measure estimates.
//! * [`verify`]: the acceptance checks, shared by tests and the CLI.

pub mod bloch;
pub mod cli;
pub mod config;
pub mod domains;
pub mod error;
pub mod hill;
pub mod isoenergetic;
pub mod lattice;
pub mod linalg;
pub mod nonres;
pub mod oracle;
pub mod params;
pub mod potential;
pub mod resonance;
pub mod stats;
pub mod verify;

pub use config::NumericConfig;
pub use error::{Error, Result};
pub use lattice::Lattice;
pub use params::PaperParams;
pub use potential::FourierPotential;

/// Everything a computation at one spectral scale needs.
#[derive(Debug, Clone)]
pub struct Model {
    pub lattice: Lattice,
    pub potential: FourierPotential,
    pub params: PaperParams,
    pub config: NumericConfig,
}

impl Model {
    pub fn new(lattice: Lattice, potential: FourierPotential, params: PaperParams, config: NumericConfig) -> Result<Self> {
        if lattice.dim() != potential.dim() || lattice.dim() != params.d {
            return Err(Error::Config(format!(
                "dimension mismatch: lattice {}, potential {}, params {}",
                lattice.dim(),
                potential.dim(),
                params.d
            )));
        }
        config.validate()?;
        Ok(Model { lattice, potential, params, config })
    }

    pub fn at_rho(&self, rho: f64) -> Model {
        Model { params: self.params.with_rho(rho), ..self.clone() }
    }

    pub fn rho(&self) -> f64 {
        self.params.rho
    }

    pub fn dim(&self) -> usize {
        self.params.d
    }

    /// The potential restricted to `Γ(ρ^α)`.
    pub fn truncated_potential(&self) -> FourierPotential {
        self.potential
            .truncate(&self.lattice, self.params.rho, self.params.alpha())
            .0
    }
}
