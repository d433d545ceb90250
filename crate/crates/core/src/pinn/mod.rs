//! Physics-informed training: losses combine data misfit with ODE-residual
//! misfit so that unknown rate parameters (and, in the dual-network setup, an
//! unknown right-hand side) are recovered jointly with the solution fit.

pub mod ekenstam;
pub mod emsley;
