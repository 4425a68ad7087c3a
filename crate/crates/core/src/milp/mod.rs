//! Mixed-integer linear models of the scheduling problem and their text form.

pub mod lp;
mod model;
mod mpc;
mod stl_enc;

pub use lp::{export_lp, from_lp_str, import_lp, to_lp_string};
pub use model::{Constraint, MilpModel, Sense, Tag, VarKind, Variable};
pub use mpc::{
    encode_dynamics, encode_mpc, on_count, startup_count, DynamicsVars, EncodingSize, MpcEncoding, MpcSpec,
};
pub use stl_enc::{encode_stl, Channel, Lit, StlEncoding, DELTA_STRICT};
