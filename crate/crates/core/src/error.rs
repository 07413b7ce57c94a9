use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),
    #[error("mesh has zero total surface area")]
    ZeroArea,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("occupancy grid needs {required} cells, budget is {budget}")]
    CellBudgetExceeded { required: u64, budget: u64 },
    #[error("no sources to conflate")]
    NoSources,
    #[error("depth batch belongs to source {batch} but profile is for source {profile}")]
    SourceMismatch { batch: usize, profile: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }
}
