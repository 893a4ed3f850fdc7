//! Single error taxonomy for the crate.
//!
//! Variants are grouped by origin: per-tetrahedron geometry, complex
//! parsing/validation, energy quadrature, and solvers. The CLI maps these
//! onto its exit-code contract; the library never panics on bad input.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    // Per-tetrahedron geometry.
    #[error("radius {value:e} outside the supported domain [{min:e}, {max:e}]")]
    RadiusDomain { value: f64, min: f64, max: f64 },

    /// A virtual quadruple (Q <= 0) must have a strictly minimal radius;
    /// quadruples whose two smallest radii coincide always have Q > 0, so
    /// hitting this indicates corrupted input, not a boundary case.
    #[error("virtual quadruple without a strict minimal radius: {radii:?}")]
    NearBoundaryTie { radii: [f64; 4] },

    #[error("operation requires a real (non-degenerate) tetrahedron, got Q = {q:e}")]
    DegenerateTetra { q: f64 },

    #[error("cosine value {value} outside [-1, 1] beyond numerical tolerance")]
    CosineOutOfRange { value: f64 },

    #[error("Gram cofactor product {value:e} is not positive")]
    CofactorSign { value: f64 },

    // Complex construction and file formats.
    #[error("JSON syntax error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unsupported format tag {found:?}, expected {expected:?}")]
    FormatTag { expected: &'static str, found: String },

    #[error("tetrahedron {tet} references vertex {vertex}, but vertex_count is {vertex_count}")]
    VertexIndexOutOfRange {
        tet: usize,
        vertex: usize,
        vertex_count: usize,
    },

    #[error("tetrahedron {tet} repeats a vertex: {vertices:?}")]
    RepeatedVertex { tet: usize, vertices: [usize; 4] },

    #[error("tetrahedra {first} and {second} have the same vertex set")]
    DuplicateTetrahedron { first: usize, second: usize },

    #[error("vertex {vertex} belongs to no tetrahedron")]
    IsolatedVertex { vertex: usize },

    #[error("complex has no tetrahedra")]
    EmptyComplex,

    #[error("packing has {got} radii, complex has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },

    #[error("radius at vertex {vertex} is {value}, must be positive and finite")]
    NonPositiveRadius { vertex: usize, value: f64 },

    #[error("unknown generator kind {0:?}")]
    UnknownGenerator(String),

    // Energy.
    #[error("quadrature missed tolerance {requested:e}: achieved error estimate {achieved:e}")]
    QuadratureTolerance { requested: f64, achieved: f64 },

    #[error("Hessian requested at a packing with {virtual_count} virtual tetrahedra; it exists only where every tetrahedron is real")]
    HessianAtVirtual { virtual_count: usize },

    #[error("w-coordinate {value} outside the invertible range [0, {max})")]
    WCoordinateRange { value: f64, max: f64 },

    // Flow and solvers.
    #[error("decay bound requires max tetra-degree <= 22, complex has {d_max}")]
    DegreeTooLargeForDecay { d_max: usize },

    #[error("lower bound requires min tetra-degree >= 23, complex has {d_min}")]
    DegreeTooSmallForLowerBound { d_min: usize },

    /// For degree <= 22 the regular-family angle never reaches 4*pi/d: its
    /// supremum is the Euclidean value 3*arccos(1/3) - pi ~ 0.5513, and
    /// 4*pi/22 ~ 0.5712 already exceeds it. No flat regular packing exists.
    #[error("no flat regular packing exists for tetra-degree {degree} (requires degree >= 23)")]
    NoRegularSolution { degree: usize },

    #[error("degree must be at least 1, got {degree}")]
    DegreeOutOfRange { degree: usize },

    #[error("Newton step rejected: no admissible damped step keeps all tetrahedra real and positive")]
    NewtonNoStep,

    #[error("Hessian is numerically singular")]
    SingularHessian,

    #[error("stability spectrum requires a flat packing: |K|_inf = {k_inf:e} >= {tol:e}")]
    SpectrumNotFlat { k_inf: f64, tol: f64 },

    #[error("stability spectrum requires every tetrahedron real; {virtual_count} are virtual")]
    SpectrumAtVirtual { virtual_count: usize },

    #[error("invalid flow configuration: {reason}")]
    BadFlowConfig { reason: String },
}
