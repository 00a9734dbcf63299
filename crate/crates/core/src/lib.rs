//! Deterministic simulator and protocol library for detecting over-collecting
//! insiders ("curious" members) in a clearance-partitioned network.
//!
//! Every member keeps two information sets: documents it created and items it
//! was sent by others. Transfers run through one of two registered protocols
//! (same-clearance transfers carry full documents, cross-clearance transfers
//! carry only a blinding signature), and every send and receipt is logged with
//! a central registry. At periodic loyalty checks all members disclose both
//! sets in unison; the registry owner compares blinded disclosures against the
//! log and flags concealment, unregistered holdings, and need-to-know
//! violations. The resulting verdict vector is ratified with an oral-messages
//! agreement round so honest members end up with identical verdicts even in
//! the presence of traitors.
//!
//! The whole stack is a pure function of `(scenario, seed)`: two runs with the
//! same inputs produce byte-identical reports.

pub mod adversary;
pub mod byzantine;
pub mod crypto;
pub mod engine;
pub mod model;
pub mod protocols;
pub mod registry;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod verify;

pub use crypto::{sign, signatures_equal, Signature, SigningKey};
pub use engine::{metrics_from, run, run_with_options, Metrics, RunOptions};
pub use model::{dominates, may_receive, ClearanceLevel, Document, DocumentId, Player, PlayerId};
pub use protocols::{Disclosure, Evidence, Outcome, Verdict};
pub use registry::{Registry, RegistryEntry};
pub use report::Report;
pub use scenario::Scenario;
pub use verify::{exhaustive_verify, PropertyReport};

/// Crate version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
