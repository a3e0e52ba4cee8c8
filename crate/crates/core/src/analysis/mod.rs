//! Exact verification and simulation.

pub mod explore;
pub mod lemmas;
pub mod post;
pub mod simulate;
pub mod verify;

pub use explore::{bottom_analysis, explore, BottomAnalysis, ExploreOptions, GraphBuilder, ReachGraph, DEFAULT_CAP};
pub use lemmas::{lemma_oracle_suite, LemmaCounterexample, LemmaReport};
pub use post::{explore_post, explore_post_flat, program_initials, verify_program, PostSet, Summarizer};
pub use verify::{verify_artifact, verify_decides, verify_range, Counterexample, Level, InitialVerdict, MReport, Verdict, VerifyOptions, VerifyReport};
pub use simulate::{simulate, simulate_seeds, simulate_system, SimOptions, SimResult};
