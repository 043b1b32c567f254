//! Recipes, raw tables and design-matrix construction.

pub mod categories;
pub mod design;
pub mod hermite;
pub mod recipe;
pub mod table;

pub use categories::{draw_full_rank_bernoulli, random_category_sums, CategoryMap, CategoryMapMode};
pub use design::{
    build_design, mutual_projection_residual, random_collinearity_resolution, CategoricalEncoding,
    ColumnProvenance, DesignMatrix, NormalizationChoice, ReferenceChoice,
};
pub use hermite::{hermite, hermite_basis, hermite_values};
pub use recipe::{parse_recipe, Centering, Clause, ControlClause, ControlKind, EncodingOption, HermiteClause, Recipe, Reference};
pub use table::DataTable;
