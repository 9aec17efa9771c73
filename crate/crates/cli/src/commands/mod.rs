//! One module per subcommand. Each takes the merged run configuration and
//! its own flag set, applies the flag overrides, echoes the result, and
//! delegates to the core crate. Nothing here computes; commands wire
//! formats to library calls and keep the exit-code contract.

pub mod eval;
pub mod gen_data;
pub mod offset_hist;
pub mod refine;
pub mod train;
