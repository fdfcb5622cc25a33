use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A vertex referenced by a query or an edge is not part of the graph.
    #[error("vertex {0} is not in the graph")]
    UnknownVertex(String),
    /// An edge references a vertex missing from the explicit vertex list.
    #[error("edge references undeclared vertex {0}")]
    DanglingVertex(String),
    /// The explicit vertex list declares the same vertex twice.
    #[error("vertex {0} is declared more than once")]
    DuplicateVertex(String),
    /// An edge joins a vertex to itself.
    #[error("self-loop on vertex {0} contradicts the closed-neighborhood convention")]
    SelfLoop(String),
    /// A neighborhood query with an empty index set.
    #[error("neighborhood query must contain at least one vertex")]
    EmptyQuery,
    /// A graph or model with no vertices.
    #[error("index set must be non-empty")]
    EmptyIndexSet,
    /// An argument outside the documented domain of an operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A sequence is too short for the requested order.
    #[error("need entries through order {needed}, only {available} available")]
    InsufficientOrder {
        /// Highest order the operation needs.
        needed: usize,
        /// Highest order present.
        available: usize,
    },
    /// Chain enumeration visited more nodes than the configured budget.
    #[error("enumeration budget of {budget} node visits exceeded; refusing a partial result")]
    BudgetExceeded {
        /// The configured node-visit cap.
        budget: u64,
    },
    /// The joint model violates an invariant (probabilities, mean zero, …).
    #[error("invalid model: {0}")]
    InvalidModel(String),
    /// The sum has zero variance, so it cannot be standardised.
    #[error("the sum has zero variance and cannot be standardised")]
    ZeroVariance,
    /// The backend of a model cannot evaluate the requested quantity.
    #[error("model backend cannot evaluate {0}")]
    Unsupported(&'static str),
    /// `q` would be zero: the targets are too large for the given constant.
    #[error("targets too large for matching at C_p = {c_p}")]
    TargetsTooLarge {
        /// The constant in use when the floor hit zero.
        c_p: f64,
    },
    /// Cumulant matching failed even after shrinking the constant.
    #[error("matching infeasible at given targets after {retries} retries")]
    MatchInfeasible {
        /// Number of halvings attempted.
        retries: u32,
    },
    /// A precondition on a moment sequence does not hold.
    #[error("moment precondition violated: {0}")]
    MomentPrecondition(String),
    /// A moment sequence is not the moment sequence of any distribution.
    #[error("moment sequence infeasible at Hankel order {order}")]
    Infeasible {
        /// The first Hankel order with a negative determinant.
        order: usize,
    },
    /// A numerically singular step in a recurrence.
    #[error("numerical breakdown at order {order}")]
    NumericalBreakdown {
        /// The order at which the recurrence broke down.
        order: usize,
    },
    /// Quadrature failed to produce a finite value.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    /// A rate fit that cannot be computed from the supplied points.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

/// Result alias for the crate.
pub type Result<T> = core::result::Result<T, Error>;
