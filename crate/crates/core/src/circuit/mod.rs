//! Register layout, sparse branch states, macro ops and gate networks.

mod bits;
mod layout;
mod network;
mod ops;
mod reduce;
mod state;

pub use bits::BitString;
pub use layout::{make_layout, EncoderMode, RegisterLayout, Span};
pub use network::{DepthReport, GateNetwork, Stage};
pub use ops::{Direction, Gate, MacroOp, OpCost, Sign};
pub use reduce::{fidelity_against, reduce_to_kept, ReducedState};
pub use state::{SparseState, PRUNE_THRESHOLD};
