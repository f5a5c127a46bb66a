use thiserror::Error;

/// Failures reported by the library. Numeric payloads are widened to `f64`.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("lattice generators are (nearly) collinear")]
    DegenerateLattice,

    #[error("({re}, {im}) is not a dual lattice point")]
    NotInDualLattice { re: f64, im: f64 },

    #[error("vacuum resolvent is singular: distance {distance:e} to the vacuum spectrum")]
    SingularResolvent { distance: f64 },

    #[error("no kernel: smallest singular value {sigma_min:e} exceeds the tolerance")]
    NoKernel { sigma_min: f64 },

    #[error("ill-conditioned contour: {0}")]
    IllConditionedContour(String),

    #[error("projector rank {found} does not match the expected rank {expected}")]
    UnexpectedRank { expected: usize, found: usize },

    #[error("unreliable contour: {0}")]
    UnreliableContour(String),

    #[error("root count mismatch: winding gives {expected}, Newton found {found}")]
    RootBracketing { expected: usize, found: usize },

    #[error("branch ambiguity at ({re}, {im}): {roots} roots in the vertical disc")]
    BranchAmbiguity { re: f64, im: f64, roots: usize },

    #[error("classification window: {0}")]
    ClassificationWindow(String),

    #[error("end does not look like a graph: fit residual {residual:e}")]
    NonGraphEnd { residual: f64 },

    #[error("kernel vector has no usable normalising coefficient")]
    WrongBranch,

    #[error("section vanishes at the evaluation point")]
    ZeroOfSection,

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DegenerateLattice => "degenerate_lattice",
            Error::NotInDualLattice { .. } => "not_in_dual_lattice",
            Error::SingularResolvent { .. } => "singular_resolvent",
            Error::NoKernel { .. } => "no_kernel",
            Error::IllConditionedContour(_) => "ill_conditioned_contour",
            Error::UnexpectedRank { .. } => "unexpected_rank",
            Error::UnreliableContour(_) => "unreliable_contour",
            Error::RootBracketing { .. } => "root_bracketing",
            Error::BranchAmbiguity { .. } => "branch_ambiguity",
            Error::ClassificationWindow(_) => "classification_window",
            Error::NonGraphEnd { .. } => "non_graph_end",
            Error::WrongBranch => "wrong_branch",
            Error::ZeroOfSection => "zero_of_section",
            Error::Linalg(_) => "linalg",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
