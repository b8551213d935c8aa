pub mod emitter;
pub mod error;
pub mod filtered;
pub mod maps;
pub mod oracle;
pub mod postprocess;
pub mod quantum;
pub mod trace;
pub mod units;

pub use error::{Error, Result};
