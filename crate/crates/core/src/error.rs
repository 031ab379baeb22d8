use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("duplicate schema for predicate `{0}`")]
    DuplicateSchema(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("predicate `{name}` expects {expected} arguments, got {got}")]
    ArityMismatch { name: String, expected: usize, got: usize },
    #[error("constant `{constant}` is not in declared domain `{domain}`")]
    ConstantNotInDomain { constant: String, domain: String },
    #[error("evidence given for query predicate `{0}`")]
    QueryEvidence(String),
    #[error("invalid weight: {0}")]
    Weight(String),
    #[error("instance too large: {atoms} atoms (limit {limit})")]
    TooLarge { atoms: usize, limit: usize },
    #[error("task is infeasible: {0}")]
    Infeasible(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("head variable `{0}` does not occur in the view body")]
    UnboundHeadVariable(String),
    #[error("binding has {got} values but the view has {expected} bound positions")]
    BindingArity { expected: usize, got: usize },
    #[error("missing copy report for task {task} on shared atom {atom}")]
    MissingCopy { task: usize, atom: usize },
    #[error("{0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
