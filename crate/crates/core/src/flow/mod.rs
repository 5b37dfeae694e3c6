//! Attention flow and attention rollout over layered attention graphs.

pub mod attention;
pub mod maxflow;
pub mod network;
pub mod payoff;
pub mod rollout;

pub use attention::{
    load_attention, AttentionDocument, AttentionStack, HeadReduction, SquareMatrix,
};
pub use maxflow::{max_flow, FlowResult};
pub use network::{build_network, FlowNetwork, FlowOptions, InputPlayers, SinkMode};
pub use payoff::{recomputed_game, recomputed_payoff, restriction_game, restriction_payoff};
pub use rollout::{attention_rollout, RolloutResult};

use crate::error::Result;
use crate::report::{AttributionReport, Method};

/// Attention flow attribution: each player's outflow under a maximum flow.
pub fn attention_flow_values(
    stack: &AttentionStack,
    players: &InputPlayers,
    options: &FlowOptions,
) -> Result<AttributionReport> {
    let network = build_network(stack, players, options)?;
    let result = max_flow(&network);
    let mut report = AttributionReport::new(Method::AttentionFlow, result.outflow, result.total)
        .with_description(format!(
            "attention flow, {} tokens, {} layers, sink {}, head reduction {}",
            stack.n(),
            stack.depth(),
            options.sink,
            stack.head_reduction()
        ))
        .with_labels(network.labels().map(<[String]>::to_vec));
    if let Some(w) = options.residual {
        report = report.with_note(format!("residual weight {w}"));
    }
    Ok(report)
}

/// Total attention each token receives in one layer (its column sum).
pub fn raw_attention_values(stack: &AttentionStack, layer: usize) -> AttributionReport {
    let values = stack.layer(layer).column_sums();
    let total = values.iter().sum();
    AttributionReport::new(Method::RawAttention, values, total)
        .with_description(format!("attention received in layer {layer}"))
        .with_labels(stack.tokens().map(<[String]>::to_vec))
}
