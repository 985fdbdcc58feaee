//! Bowen balls in all flavors, their inclusion relations, and separated sets.

pub mod area;
pub mod balls;
pub mod inclusion;
pub mod separated;

pub use area::linear_ball_area;
pub use balls::{ball_margin, contains, leaf_ball_interval, membership_pad, BowenBallSpec, Flavor};
pub use inclusion::{
    ball_in_product_check, conjugation_identity_check, default_r1, product_in_ball_check, sandwich_check,
    InclusionOptions,
};
pub use separated::{
    maximal_separated_set, maximal_separated_set_iterating, separated_growth_check, SeparatedSet, GROWTH_TOL,
};
