//! rewritelab: a laboratory for studying instruction-following generalization
//! on controlled symbolic rewrite tasks.
//!
//! The crate has three layers:
//!
//! * exact task oracles and dataset generators — [`markov`] (ordered rewrite
//!   rules with stop rules), [`string_tasks`] (leftmost string replacement,
//!   no-op variants, power-law instruction frequencies, constrained semantic
//!   families) and [`expr`] (equational rewriting on algebraic expression
//!   trees);
//! * a from-scratch decoder-only transformer with a hand-written backward
//!   pass, verified against finite differences — [`nn`];
//! * shared plumbing: record serialization and prompt templating in
//!   [`dataset`], exact-match scoring in [`eval`], and the `rewritelab`
//!   command-line front end in [`cli`].
//!
//! Everything downstream of a seed is deterministic: generators are pure
//! functions of `(config, seed)`, and training replays bit-for-bit under a
//! fixed seed on the same platform.

pub mod cli;
pub mod dataset;
pub mod eval;
pub mod expr;
pub mod markov;
pub mod nn;
pub mod rng;
pub mod string_tasks;
