//! Game-theoretic and attention-based attribution for transformer inputs.
//!
//! - [`game`]: coalitions, payoff functions and the standard game families.
//! - [`shapley`]: exact and sampled Shapley values, leave-one-out and axiom checks.
//! - [`flow`]: attention interchange files, attention flow by maximum flow, and rollout.
//! - [`equivalence`]: checks relating attention flow, raw attention and
//!   leave-one-out to Shapley values.
//! - [`cli`]: the `gtattr` command line.
//!
//! ```
//! use gtattr::flow::{attention_flow_values, AttentionStack, FlowOptions, InputPlayers};
//!
//! let stack = AttentionStack::from_rows(&[vec![vec![0.7, 0.3], vec![0.4, 0.6]]])?;
//! let report = attention_flow_values(&stack, &InputPlayers::all(2), &FlowOptions::default())?;
//! assert!((report.values[0] - 1.1).abs() < 1e-12);
//! # Ok::<(), gtattr::error::Error>(())
//! ```

pub mod cli;
pub mod equivalence;
pub mod error;
pub mod flow;
pub mod game;
mod parallel;
pub mod report;
pub mod shapley;
