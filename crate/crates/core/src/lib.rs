//! Lead-time quotation for an observable M/M/1 make-to-order queue with
//! risk-averse (CARA) customers.
//!
//! The crate computes customers' expected utilities, the provider's and the
//! social optimizer's optimal quotes and balking thresholds under dynamic and
//! single-quote policies, and validates them against a discrete-event
//! simulator.
//!
//! ```
//! use leadtime_core::{solve, Problem, Scenario};
//!
//! let r = solve(&Scenario::base(), Problem::ProviderDynamic).unwrap();
//! assert_eq!(r.threshold(), 9);
//! ```

pub mod dist;
pub mod error;
pub mod experiments;
pub mod ext;
pub mod optimize;
pub mod quad;
pub mod quotes;
pub mod root;
pub mod sim;
pub mod utility;

pub use dist::{ErlangSpec, FiniteQueueSojourn};
pub use error::{Error, Result};
pub use experiments::{Axis, QuoteCell, QuoteTable, SweepResult, SweepSpec};
pub use ext::{Quote, Utility};
pub use optimize::{eval_profit_rate, eval_social_rate, solve, PolicyQuotes, Problem, QuotationPolicy, SolveResult};
pub use quotes::{QuoteKind, QuoteSolution, ThresholdBounds};
pub use sim::{Estimate, Horizon, SimConfig, SimEstimate};
pub use utility::{EvalMethod, Scenario, UtilityEval};
