//! One module per subcommand. Each `run` returns a JSON summary printed as
//! the final stdout line on success.

pub mod ablate;
pub mod evaluate;
pub mod prepare;
pub mod replay_eval;
pub mod serve;
pub mod synth;
pub mod train;
pub mod tune;
