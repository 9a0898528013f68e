use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("community {0} is empty")]
    EmptyCommunity(usize),
    #[error("member id {id} out of range for population of {n}")]
    MemberOutOfRange { id: usize, n: usize },
    #[error("member {0} belongs to no community")]
    UnassignedMember(usize),
    #[error("duplicate member {member} in {context}")]
    DuplicateMember { member: usize, context: String },
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} = {value} is not a probability"
        )))
    }
}
