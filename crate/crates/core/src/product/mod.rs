//! Leaf measures of a rectangle, their product, and the Gibbs and density
//! bounds relating them to the ambient measure.

mod density;
mod gibbs;
mod leaf_measure;

pub use density::{density_bound_check, separated_sandwich_check, DensityOptions, DensityScan, SandwichConstants};
pub use gibbs::{leafwise_gibbs_check, product_gibbs_check, LeafGibbsEstimate, ProductGibbsEstimate};
pub use leaf_measure::{product_mass, restrict_and_project, LeafMeasure, ProductQuery, RectangleMeasure, Restriction};
