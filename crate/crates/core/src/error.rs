use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },

    #[error("division by zero while evaluating at x = {x}")]
    DivisionByZero { x: f64 },

    #[error("singular matrix: |det| = {det_abs:.3e} is at or below threshold {threshold:.3e}")]
    SingularMatrix { det_abs: f64, threshold: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("chain member count mismatch: expected {expected}, got {got}")]
    CountMismatch { expected: usize, got: usize },

    #[error("leading coefficient is singular")]
    SingularLeading,

    #[error("Wronskian below threshold at x = {x}: |W| = {det_abs:.3e}, threshold {threshold:.3e}")]
    SingularWronskian { x: f64, det_abs: f64, threshold: f64 },

    #[error("empty chain set")]
    EmptyChainSet,

    #[error("factor set inconsistent with the chain structure: {0}")]
    FactorInconsistent(String),

    #[error("extension basis count mismatch: {0}")]
    ExtensionCountMismatch(String),

    #[error("extension basis invalid: {0}")]
    ExtensionInvalid(String),

    #[error("scalar normalization failed: residual {residual:.3e}")]
    NormalizationFailure { residual: f64 },

    #[error("potential lacks {mode} symmetry: defect {defect:.3e}")]
    SymmetryViolated { mode: &'static str, defect: f64 },

    #[error("composition residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    CompositionDefect { residual: f64, tolerance: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    /// Stable variant name for machine-readable reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SyntaxError",
            Error::DivisionByZero { .. } => "DivisionByZero",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::CountMismatch { .. } => "CountMismatch",
            Error::SingularLeading => "SingularLeading",
            Error::SingularWronskian { .. } => "SingularWronskian",
            Error::EmptyChainSet => "EmptyChainSet",
            Error::FactorInconsistent(_) => "FactorInconsistent",
            Error::ExtensionCountMismatch(_) => "ExtensionCountMismatch",
            Error::ExtensionInvalid(_) => "ExtensionInvalid",
            Error::NormalizationFailure { .. } => "NormalizationFailure",
            Error::SymmetryViolated { .. } => "SymmetryViolated",
            Error::CompositionDefect { .. } => "CompositionDefect",
            Error::Precondition(_) => "Precondition",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
