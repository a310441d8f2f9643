use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("singular lattice basis (row {row} is dependent on the others)")]
    SingularBasis { row: usize },
    #[error("direction {coords:?} is not maximal: (delta, omega_{index}) is a multiple of {gcd}")]
    NotMaximal { coords: Vec<i64>, index: usize, gcd: i64 },
    #[error("vector is not of the form gamma + t (distance {distance:e})")]
    NotOnCoset { distance: f64 },
    #[error("denominator {value:e} below floor {floor:e} on chain {chain:?}")]
    DenominatorFloor { chain: Vec<Vec<i64>>, value: f64, floor: f64 },
    #[error("point lies outside the admissible shell: {0}")]
    OutsideShell(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
