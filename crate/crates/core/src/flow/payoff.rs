//! Payoff functions defined by attention flow.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::Result;
use crate::flow::maxflow::{max_flow, FlowResult};
use crate::flow::network::FlowNetwork;
use crate::game::{CharacteristicFn, Coalition, Game, PayoffKind, PayoffOracle, PlayerSet};

struct Restricted {
    outflow: Vec<f64>,
}

impl CharacteristicFn for Restricted {
    fn eval(&self, coalition: Coalition) -> f64 {
        coalition.iter().map(|i| self.outflow[i]).sum()
    }

    fn kind(&self) -> PayoffKind {
        PayoffKind::FlowRestricted
    }
}

/// The flow computed once on the full graph, with non-members blocked:
/// `v(S) = Σ_{i∈S} outflow[i]`.
///
/// Blocking a player's source arcs removes exactly its own outflow and
/// leaves every other player's outflow untouched, which is why this payoff
/// is additive.
pub fn restriction_payoff(result: &FlowResult) -> PayoffOracle {
    PayoffOracle::new(Restricted {
        outflow: result.outflow.clone(),
    })
}

struct Recomputed {
    network: FlowNetwork,
    memo: Mutex<HashMap<Coalition, f64>>,
}

impl CharacteristicFn for Recomputed {
    fn eval(&self, coalition: Coalition) -> f64 {
        if let Some(&v) = self.memo.lock().expect("memo lock").get(&coalition) {
            return v;
        }
        let v = max_flow(&self.network.restricted_to(coalition)).total;
        self.memo.lock().expect("memo lock").insert(coalition, v);
        v
    }

    fn kind(&self) -> PayoffKind {
        PayoffKind::FlowRecomputed
    }
}

/// A fresh maximum flow for every coalition: `v(S)` is the max-flow value
/// after closing the source arcs of players outside `S`. Results are
/// memoized per coalition.
pub fn recomputed_payoff(network: &FlowNetwork) -> PayoffOracle {
    PayoffOracle::new(Recomputed {
        network: network.clone(),
        memo: Mutex::new(HashMap::new()),
    })
}

fn players_of(network: &FlowNetwork) -> Result<PlayerSet> {
    let players = PlayerSet::new(network.player_count())?;
    match network.labels() {
        Some(labels) => players.with_labels(labels.to_vec()),
        None => Ok(players),
    }
}

/// The game over the network's players with the restriction payoff.
pub fn restriction_game(network: &FlowNetwork, result: &FlowResult) -> Result<Game> {
    Ok(Game::new(players_of(network)?, restriction_payoff(result)))
}

/// The game over the network's players with the recomputed payoff.
pub fn recomputed_game(network: &FlowNetwork) -> Result<Game> {
    Ok(Game::new(players_of(network)?, recomputed_payoff(network)))
}
