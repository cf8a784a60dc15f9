use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empty scenario family")]
    EmptyScenarioFamily,

    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { pos: usize, name: String },

    #[error("negative exponent {exponent} at position {pos}")]
    NegativeExponent { pos: usize, exponent: i64 },

    #[error("division by zero in `{0}`")]
    DivisionByZero(String),

    #[error("expression needs {needed} variables, got {got}")]
    Arity { needed: usize, got: usize },

    #[error("degenerate sampling box: {0}")]
    DegenerateBox(String),

    #[error("CFL condition violated: dt = {dt} exceeds {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite value at time step {step}")]
    NonFinite { step: usize },

    #[error("time {time} is not aligned to the lattice (dt = {dt})")]
    Misaligned { time: f64, dt: f64 },

    #[error("level {level} beyond horizon {horizon}")]
    BeyondHorizon { level: usize, horizon: usize },

    #[error("state space exceeds {budget} states at level {level}; reduce n_steps or sigma refinement")]
    StateSpaceBlowup { budget: usize, level: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("not an increasing process: {0}")]
    NotIncreasing(String),

    #[error("dominance contract violated at step {step}: d<M> = {dqv} > dA = {da}")]
    Dominance { step: usize, dqv: f64, da: f64 },

    #[error("hypothesis 0<C<=|f| violated: |f| = {value} at level {level}")]
    IntegrandBound { level: usize, value: f64 },

    #[error("sigma0 = 0 outside theorem hypothesis")]
    DegenerateLowerVolatility,

    #[error("negative value {0} where a nonnegative result is required")]
    Negative(f64),

    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),

    #[error("unknown check `{0}`")]
    UnknownCheck(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
