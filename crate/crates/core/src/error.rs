use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("not a curve substitution: shear function depends on y")]
    NotCurve,
    #[error("shear function must vanish at the origin (x-exponent {0} <= 0)")]
    ShearNotVanishing(String),
    #[error("cannot divide by x^{alpha}: term with x-exponent {found}")]
    DivideOut { alpha: String, found: String },
    #[error("fractional x-exponent {0} under reflection or axis swap")]
    FractionalReflection(String),
    #[error("negative x = {0} with fractional exponents")]
    NegativeX(f64),
    #[error("zero Taylor expansion")]
    ZeroPolynomial,
    #[error("zero polynomial has no square-free decomposition")]
    ZeroUnivariate,
    #[error("not superadapted: run to_superadapted first")]
    NotSuperadapted,
    #[error("algebraic shear required: violating root {0} is irrational")]
    AlgebraicShear(String),
    #[error("adapted coordinates require axis swap or are nonpolynomial (edge m = {0})")]
    NonIntegerShear(String),
    #[error("superadapted reduction did not terminate in {iterations} iterations")]
    MaxIterations { iterations: usize, partial: Box<crate::adapt::AdaptReport> },
    #[error("switch to certified-numeric mode: {0}")]
    IrrationalBranch(String),
    #[error("internal invariant failed: {0}")]
    Invariant(String),
    #[error("chart domain empty at chosen radius: shrink x_max")]
    EmptyChart,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("quadrature did not converge at depth {depth}; best estimate {estimate_re} + {estimate_im}i")]
    Quadrature { depth: u32, estimate_re: f64, estimate_im: f64 },
    #[error("unknown {kind} strategy {name:?}; known: {known}")]
    UnknownStrategy { kind: &'static str, name: String, known: String },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}
