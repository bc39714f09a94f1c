use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spectrum has no entries")]
    EmptySpectrum,
    #[error("every coefficient is zero")]
    AllZero,
    #[error("coefficient {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },
    #[error("coefficient {index} is not finite")]
    NonFinite { index: usize },
    #[error("coefficients sum to {sum}, more than {tol} away from 1")]
    NotNormalized { sum: f64, tol: f64 },
    #[error("{labels} labels given for {coefficients} coefficients")]
    LabelCount { labels: usize, coefficients: usize },
    #[error("duplicate atom label {0:?}")]
    DuplicateLabel(String),

    #[error("epsilon {0} is outside the admissible range")]
    EpsOutOfRange(f64),
    #[error("{what} has size {size}, above the limit {limit}")]
    TooLarge { what: &'static str, size: usize, limit: usize },
    #[error("index {index} out of range for {len} atoms")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("argument outside domain: {0}")]
    OutOfDomain(String),

    #[error("invalid flow: {0}")]
    InvalidFlow(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is not unitary: {0}")]
    NonUnitary(String),
    #[error("controlled-prepare column for control {control} has norm² {norm_sq}")]
    NonUnitaryStep { control: usize, norm_sq: f64 },
    #[error("register {register} left |0…0⟩ by amplitude norm {norm}")]
    DiscardNonZero { register: String, norm: f64 },
    #[error("relabel leaked amplitude norm {norm} outside the mapped labels")]
    RelabelLeak { norm: f64 },

    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that describe an unacceptable spectrum (as opposed to
    /// unparseable input or resource limits).
    pub fn is_invalid_spectrum(&self) -> bool {
        matches!(
            self,
            Error::EmptySpectrum
                | Error::AllZero
                | Error::NegativeEntry { .. }
                | Error::NonFinite { .. }
                | Error::NotNormalized { .. }
                | Error::LabelCount { .. }
                | Error::DuplicateLabel(_)
        )
    }
}
