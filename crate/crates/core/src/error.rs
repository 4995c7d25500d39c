use thiserror::Error;

/// Errors raised by the model evaluators, flows and field builders.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("kernel argument {re}{im:+}i is within {eps:e} of a singularity")]
    SingularArgument { re: f64, im: f64, eps: f64 },

    #[error("collision: coordinates {i} and {j} are {distance:e} apart")]
    Collision { i: usize, j: usize, distance: f64 },

    #[error("coincident points {i} and {j} in the electrostatic problem")]
    CoincidentPoints { i: usize, j: usize },

    #[error("step size underflow at t = {t}: required step {h:e} below minimum")]
    StepUnderflow { t: f64, h: f64 },

    #[error("gradient flow did not converge after {iterations} iterations (residual {residual:e}); the prepotential may lack a well deep enough to hold the particles (rational case needs c1^2 > 4 c0 c2)")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("input positions are not strictly increasing at index {0}")]
    NonMonotone(usize),

    #[error("particle {index} has fewer than {required} neighbours on one side")]
    BoundaryParticle { index: usize, required: usize },

    #[error("density vanishes at x = {0}")]
    ZeroDensity(f64),

    #[error("evaluation point is within {distance:e} of a pole")]
    PoleProximity { distance: f64 },

    #[error("soliton coordinate must have a nonzero imaginary part")]
    RealSoliton,

    #[error("operation only available for the rational kernel")]
    RationalOnly,

    #[error("invalid model: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
