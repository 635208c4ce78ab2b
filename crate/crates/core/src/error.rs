use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit count mismatch: {0} vs {1}")]
    QubitMismatch(usize, usize),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("non-hermitian term {0}")]
    NonHermitian(String),
    #[error("closure exceeded cap of {0} elements")]
    ClosureCap(usize),
    #[error("hamiltonian string {0} has odd Y-count; the Y-parity involution does not place it in m")]
    OddInvolution(String),
    #[error("optimizer stopped at gradient norm {grad:.3e} after {iterations} iterations")]
    NotConverged { grad: f64, iterations: usize },
    #[error("residual {residual:.3e} above tolerance {tol:.3e}")]
    Residual { residual: f64, tol: f64 },
    #[error("width {width} exceeds the {mode} cap of {cap} qubits")]
    WidthCap { width: usize, cap: usize, mode: &'static str },
    #[error("qubit index {0} out of range")]
    QubitIndex(usize),
    #[error("singular readout confusion matrix on qubit {0}")]
    SingularConfusion(usize),
    #[error("post-selection retained no shots")]
    PostSelectionEmpty,
    #[error("no qualifying peak, rerun requested")]
    Rerun,
    #[error("invalid pole geometry: {0}")]
    InvalidGeometry(String),
    #[error("degenerate poles")]
    DegeneratePoles,
}

pub type Result<T> = std::result::Result<T, Error>;
