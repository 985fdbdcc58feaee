//! Geometric and measure-theoretic constructions for hyperbolic maps of the
//! 2-torus: bracket maps, rectangles, Bowen balls, periodic-orbit Gibbs
//! measures, leaf measures and their product, together with numerical
//! checks of the quantitative statements that connect them.

// `!(x > 0.0)` is used on purpose so that NaN fails range checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bowen;
pub mod dynamics;
pub mod error;
pub mod gibbs;
pub mod hyperbolic;
pub mod linalg;
pub mod potential;
pub mod product;
pub mod record;
pub mod sampling;
pub mod torus;
pub mod verify;

pub use dynamics::{map_apply, HyperbolicMap, Perturbation, PerturbationTerm};
pub use error::{Error, Result};
pub use hyperbolic::{
    bracket, estimate_constants, make_rectangle, project, splitting_at, ConstantsConfig, HyperbolicConstants,
    LeafSegment, Rectangle, Side,
};
pub use linalg::{IntMat2, Mat2, Vec2};
pub use potential::{birkhoff_sum, Direction, Potential, PotentialKind, TrigTerm};
pub use record::{Tally, VerificationRecord};
pub use torus::{torus_distance, TorusPoint};
