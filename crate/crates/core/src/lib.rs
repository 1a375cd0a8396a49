//! Verifying kernel and toolchain for FLAFOL, a first-order authorization
//! logic that tracks who believes each formula and at which information-flow
//! label.
//!
//! The crate is organised in layers:
//!
//! * [`signature`], [`term`], [`formula`], [`sequent`] — the object syntax:
//!   sorted terms, formulae with `says` modalities and labelled implications,
//!   generalized principals, beliefs, and sequents.
//! * [`signed`] — the signed-subformula relation and positivity.
//! * [`kernel`] — explicit proof trees and the checker that validates every
//!   rule application against the sequent-calculus schemas.
//! * [`surface`] — parser and printer for the textual syntax (theories,
//!   sequents, proofs).
//! * [`search`] and [`gen`] — bounded proof search and random proof
//!   generation.
//! * [`transform`] — proof-to-proof transformations: normalization, cut
//!   elimination, simulation, says-elimination, speaks-for elimination.
//! * [`trust`] — speaks-for and can-influence derivations over generalized
//!   principals, and the `g_set` projection of a belief.
//! * [`csc`] — compatible supercontexts: checking, enumeration, and the
//!   path-replay used by the audit.
//! * [`audit`] — non-interference witnesses for a marked context belief.

pub mod audit;
pub mod csc;
pub mod formula;
pub mod gen;
pub mod kernel;
pub mod matching;
pub mod search;
pub mod sequent;
pub mod signature;
pub mod signed;
pub mod surface;
pub mod term;
pub mod transform;
pub mod trust;

pub use formula::{Binder, Formula};
pub use kernel::{CheckReason, CheckReport, Proof, ProofStats, RawProof, RuleSpec, Verdict};
pub use sequent::{Belief, Context, GenPrincipal, Sequent};
pub use signature::{Signature, Sort};
pub use term::Term;
