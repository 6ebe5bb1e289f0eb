//! Simulation and verification toolkit for the drainage network with
//! branching (DNB): a lazily hashed random environment on ℤ², forward l/r
//! paths, the backward dual system, diffusive-scaling metrics, closed-form
//! reference values, and Monte Carlo estimators that compare the two.

pub mod dual;
pub mod environment;
pub mod error;
pub mod estimators;
pub mod lattice_paths;
pub mod metrics;
pub mod pmf;
pub mod reference;
pub mod stats;

pub use dual::{DualPath, DualVertex, DualityReport, Window};
pub use environment::{Cell, CellState, EnvParams, Environment, Nearest, Side, Theta};
pub use error::{DnbError, Result};
pub use estimators::{ExperimentReport, Target, Verdict};
pub use lattice_paths::{Kind, LatticePath, Passage, Selector};
pub use metrics::{Point, RescaledPath};
pub use pmf::Pmf;
pub use reference::{LRPairState, LRParams, TheoryConstants};
