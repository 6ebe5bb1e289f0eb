use thiserror::Error;

use crate::environment::Cell;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DnbError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("cell ({}, {}) is closed; paths start from open vertices only", .0.x, .0.t)]
    NotOpen(Cell),

    #[error("no open cell within radius {radius} of x={x} in row {row}")]
    RadiusExceeded { x: i64, row: i64, radius: i64 },

    #[error("explicit selector exhausted after {0} steps")]
    SelectorExhausted(usize),

    #[error("({x2}/2, {t}) is not a dual vertex")]
    NotDualVertex { x2: i64, t: i64 },

    #[error("path has no knots")]
    EmptyPath,

    #[error("path set is empty")]
    EmptySet,

    #[error("invalid time step dt={0}")]
    InvalidStep(f64),

    #[error("{censored} of {total} samples censored at the largest time; raise t_max")]
    InsufficientUncensored { censored: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, DnbError>;
