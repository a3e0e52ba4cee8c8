//! Population programs, population machines and population protocols.
//!
//! The crate covers the whole pipeline: a structured program IR with an
//! exact nondeterministic semantics, the double-exponential threshold
//! construction, lowering to flat machines with pointer variables,
//! compilation of machines to leaderless protocols, and exact
//! stabilization checks based on bottom strongly connected components.

pub mod analysis;
pub mod bignat;
pub mod construction;
pub mod error;
pub mod lowering;
pub mod machine;
pub mod multiset;
pub mod predicate;
pub mod program;
pub mod protocol;
pub mod system;

pub use bignat::{pow2_tower, BigNat};
pub use error::{Error, Result};
pub use multiset::{ms_apply, Multiset, Symbols};
pub use predicate::Predicate;
pub use system::{Output, Successors, TransitionSystem};

/// Pretty-prints a JSON value with object keys in sorted order.
pub fn canonical_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
