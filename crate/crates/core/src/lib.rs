//! Attack planning for logical networks via POMDP solving.
//!
//! The pipeline: a last-pentest snapshot plus per-program update chains give
//! an exact belief over each machine's configuration ([`update`]); a model
//! factory turns one machine, a firewall, and a break-in reward into an
//! explicit POMDP ([`machine`]); an exact solver handles the single-machine
//! models ([`pomdp`]); and a four-level decomposition composes the
//! single-machine values into a conservative attack plan for the whole
//! network ([`planner`]). A flat global encoding ([`global`]) and a Monte
//! Carlo harness ([`sim`], [`experiment`]) exist to measure what the
//! decomposition gives up.

pub mod error;
pub mod experiment;
pub mod global;
pub mod machine;
pub mod net;
pub mod planner;
pub mod policy;
pub mod pomdp;
pub mod scenario;
pub mod sim;
pub mod update;

pub use error::{Error, Result};
