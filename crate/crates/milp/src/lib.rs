//! Linear and mixed-binary models: building, text export and solving.

pub mod lp_format;
pub mod mip;
pub mod model;
pub mod simplex;

pub use lp_format::{normalize_name, parse_lp_file, write_lp_file, LpParseError};
pub use mip::{mip_solve, MipOptions, MipResult, MipStatus};
pub use model::{
    Constraint, LinExpr, Metadata, Model, ModelError, Sense, VarId, VarKind, Variable,
};
pub use simplex::{lp_relax, simplex_solve, solve_with_bounds, LpSolution, LpStatus, SimplexError};
