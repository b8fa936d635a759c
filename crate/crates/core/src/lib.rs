//! Federated and subjective Byzantine quorum systems, and the reliable
//! broadcast protocols that run over them.
//!
//! - [`quorum`]: slice functions, quorum enumeration, intact sets, DQS axioms.
//! - [`subjective`]: per-view structures where faulty servers equivocate.
//! - [`protocol`]: the broadcast state machines and their guards.
//! - [`sim`]: scenarios, deterministic runs, exhaustive exploration, and the
//!   history-preserving translation between protocol variants.
//! - [`checker`]: broadcast properties and trace invariants.
//! - [`scenario_file`]: the JSON scenario format.
//!
//! ```
//! use fbqs::{Fbqs, FailureScenario, NodeSet};
//!
//! let f = Fbqs::from_literal(
//!     &[1, 2, 3, 4],
//!     &[(1, &[&[1, 2], &[1, 4]]), (2, &[&[1, 2]]), (3, &[&[1, 3]]), (4, &[&[3, 4]])],
//! );
//! let bad = FailureScenario::new(f.universe(), NodeSet::of(&[3]))?;
//! assert_eq!(f.intact_set(&bad)?, NodeSet::of(&[1, 2]));
//! let dqs = f.induced_dqs()?;
//! assert!(dqs.check(Some(&bad)).passed());
//! # Ok::<(), fbqs::Error>(())
//! ```

pub mod checker;
pub mod error;
pub mod node;
pub mod quorum;
pub mod report;
pub mod scenario_file;
pub mod protocol;
pub mod sim;
pub mod subjective;

pub use error::{Error, Result};
pub use node::{NodeId, NodeSet};
pub use quorum::{Dqs, FailProneSystem, FailureScenario, Fbqs, QuorumSystem};
pub use report::{AxiomReport, Verdict, Witness};
pub use subjective::{SubjectiveDqs, SubjectiveFbqs, SubjectiveQuorumSystem};
pub use checker::{PropertyReport, Spec};
pub use scenario_file::{parse_scenario, serialize_scenario};
pub use sim::{Scenario, Trace};
