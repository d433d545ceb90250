//! Automatic differentiation substrate.
//!
//! Two execution paths share one parameter convention:
//!
//! - [`Tape`]: scalar reverse-mode on an append-only tape. Time-derivatives of
//!   network outputs are obtained by recording forward-mode tangents as
//!   first-class tape nodes, so a single reverse pass differentiates residual
//!   losses with respect to every weight and scalar.
//! - [`batch`]: a layer-level batched trainer (matrix forward/backward with a
//!   fused tangent pass) for networks and batch sizes where scalar taping is
//!   too slow. Its gradients are parity-tested against the tape.

pub mod adam;
pub mod batch;
pub mod mlp;
pub mod tape;

pub use adam::Adam;
pub use batch::BatchNet;
pub use mlp::{Activation, Mlp, TapeParams};
pub use tape::{Adjoints, Tape, Var};
