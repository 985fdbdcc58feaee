//! Stable/unstable structure: splitting, bracket, constants, leaves and
//! rectangles.

pub mod bracket;
pub mod constants;
pub mod leaf;
pub mod rectangle;
pub(crate) mod shadowing;
pub mod splitting;

pub use bracket::{bracket, bracket_law_check, bracket_law_tolerance, bracket_shadowing};
pub use constants::{audit_constants, estimate_constants, log_grid, ConstantsConfig, HyperbolicConstants, OmegaTable};
pub use leaf::{leaf_coordinate, leaf_offset, leaf_pair_distances, Interval, LeafSegment, Side, LEAF_TOL};
pub use rectangle::{leaf_disc_interval, make_rectangle, project, Rectangle};
pub use shadowing::window_length;
pub use splitting::{line_angle, splitting_at};
