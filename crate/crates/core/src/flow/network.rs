//! The layered flow network built from an attention stack.
//!
//! Node `(b, t)` is token `t` at layer boundary `b`, for `b = 0..=L`.
//! Boundary 0 is the input. The arc `(l, i) → (l + 1, j)` has capacity
//! `a_l[j][i]`, the attention query `j` in layer `l` pays to key `i`.
//! A super-source feeds each player token at the input boundary and the last
//! boundary drains into a super-sink.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::attention::AttentionStack;

pub const SOURCE: usize = 0;
pub const SINK: usize = 1;

/// Which last-boundary tokens drain into the sink.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SinkMode {
    #[default]
    Full,
    Target(usize),
}

impl fmt::Display for SinkMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SinkMode::Full => f.write_str("full"),
            SinkMode::Target(k) => write!(f, "target:{k}"),
        }
    }
}

impl FromStr for SinkMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(SinkMode::Full);
        }
        s.strip_prefix("target:")
            .and_then(|k| k.parse().ok())
            .map(SinkMode::Target)
            .ok_or_else(|| {
                Error::InvalidInput(format!("sink mode must be `full` or `target:K`, got {s:?}"))
            })
    }
}

impl From<SinkMode> for String {
    fn from(mode: SinkMode) -> String {
        mode.to_string()
    }
}

impl TryFrom<String> for SinkMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Network construction options.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FlowOptions {
    pub sink: SinkMode,
    /// Mix `w · I` into every layer (rows renormalized). Off by default.
    pub residual: Option<f64>,
}

impl FlowOptions {
    pub fn with_sink(mut self, sink: SinkMode) -> Self {
        self.sink = sink;
        self
    }

    pub fn with_residual(mut self, weight: f64) -> Self {
        self.residual = Some(weight);
        self
    }
}

pub(crate) fn check_residual(weight: Option<f64>) -> Result<()> {
    match weight {
        Some(w) if !(w > 0.0 && w < 1.0) => Err(Error::ResidualWeight(w)),
        _ => Ok(()),
    }
}

/// The players of a flow game: groups of tokens at one layer boundary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputPlayers {
    layer: usize,
    groups: Vec<Vec<usize>>,
}

impl InputPlayers {
    /// Every input token is its own player.
    pub fn all(n: usize) -> Self {
        InputPlayers {
            layer: 0,
            groups: (0..n).map(|t| vec![t]).collect(),
        }
    }

    /// The listed input tokens, one player each.
    pub fn tokens(tokens: Vec<usize>) -> Self {
        InputPlayers {
            layer: 0,
            groups: tokens.into_iter().map(|t| vec![t]).collect(),
        }
    }

    /// Each group of input tokens is one player.
    pub fn grouped(groups: Vec<Vec<usize>>) -> Self {
        InputPlayers { layer: 0, groups }
    }

    /// Places the players at boundary `layer`. Only boundary 0 is accepted
    /// by [`build_network`].
    pub fn at_layer(mut self, layer: usize) -> Self {
        self.layer = layer;
        self
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.layer != 0 {
            return Err(Error::PlayersNotAtInput(self.layer));
        }
        if self.groups.is_empty() {
            return Err(Error::InvalidPlayers("no players selected".into()));
        }
        if self.groups.len() > crate::game::MAX_PLAYERS {
            return Err(Error::InvalidPlayers(format!(
                "{} players exceeds the coalition limit",
                self.groups.len()
            )));
        }
        let mut seen = vec![false; n];
        for (p, group) in self.groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidPlayers(format!("player group {p} is empty")));
            }
            for &t in group {
                if t >= n {
                    return Err(Error::InvalidPlayers(format!(
                        "token {t} out of range for {n} tokens"
                    )));
                }
                if std::mem::replace(&mut seen[t], true) {
                    return Err(Error::InvalidPlayers(format!(
                        "token {t} belongs to more than one player"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Display labels built from token labels, if the stack has them.
    pub fn labels(&self, tokens: Option<&[String]>) -> Option<Vec<String>> {
        let tokens = tokens?;
        Some(
            self.groups
                .iter()
                .map(|g| {
                    g.iter()
                        .map(|&t| tokens[t].as_str())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcKind {
    Source {
        player: usize,
        token: usize,
    },
    Attention {
        layer: usize,
        key: usize,
        query: usize,
    },
    Sink {
        token: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
    pub kind: ArcKind,
}

/// A layered DAG from source to sink with real capacities.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowNetwork {
    n: usize,
    depth: usize,
    arcs: Vec<FlowArc>,
    player_arcs: Vec<Vec<usize>>,
    sink_mode: SinkMode,
    labels: Option<Vec<String>>,
}

impl FlowNetwork {
    /// Node id of token `token` at boundary `boundary`.
    pub fn node(&self, boundary: usize, token: usize) -> usize {
        2 + boundary * self.n + token
    }

    pub fn node_count(&self) -> usize {
        2 + (self.depth + 1) * self.n
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn arcs(&self) -> &[FlowArc] {
        &self.arcs
    }

    /// Source arcs of each player, by arc index.
    pub fn player_arcs(&self) -> &[Vec<usize>] {
        &self.player_arcs
    }

    pub fn player_count(&self) -> usize {
        self.player_arcs.len()
    }

    pub fn sink_mode(&self) -> SinkMode {
        self.sink_mode
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// A copy with the source arcs of players outside `keep` closed.
    pub fn restricted_to(&self, keep: crate::game::Coalition) -> FlowNetwork {
        let mut net = self.clone();
        for (p, arcs) in self.player_arcs.iter().enumerate() {
            if !keep.contains(p) {
                for &a in arcs {
                    net.arcs[a].capacity = 0.0;
                }
            }
        }
        net
    }

    pub fn count(&self, pred: impl Fn(&ArcKind) -> bool) -> usize {
        self.arcs.iter().filter(|a| pred(&a.kind)).count()
    }
}

/// Builds the attention flow network.
///
/// Arcs are laid out as: source arcs in ascending token order, then attention
/// arcs in (layer, key, query) order, then sink arcs in ascending token
/// order. Every attention arc is present, including zero-capacity ones.
/// Source and sink arcs have capacity `n`, which no layer can exceed.
pub fn build_network(
    stack: &AttentionStack,
    players: &InputPlayers,
    options: &FlowOptions,
) -> Result<FlowNetwork> {
    let n = stack.n();
    let depth = stack.depth();
    players.validate(n)?;
    check_residual(options.residual)?;
    if let SinkMode::Target(k) = options.sink {
        if k >= n {
            return Err(Error::TargetOutOfRange { target: k, n });
        }
    }

    let mut net = FlowNetwork {
        n,
        depth,
        arcs: Vec::with_capacity(2 * n + depth * n * n),
        player_arcs: vec![Vec::new(); players.len()],
        sink_mode: options.sink,
        labels: players.labels(stack.tokens()),
    };
    let unbounded = n as f64;

    let mut owner = vec![None; n];
    for (p, group) in players.groups().iter().enumerate() {
        for &t in group {
            owner[t] = Some(p);
        }
    }
    for (token, p) in owner.iter().enumerate() {
        if let Some(player) = *p {
            net.player_arcs[player].push(net.arcs.len());
            net.arcs.push(FlowArc {
                from: SOURCE,
                to: net.node(0, token),
                capacity: unbounded,
                kind: ArcKind::Source { player, token },
            });
        }
    }

    for (l, layer) in stack.layers().iter().enumerate() {
        let caps = match options.residual {
            Some(w) => layer.with_residual(w),
            None => layer.clone(),
        };
        for key in 0..n {
            for query in 0..n {
                net.arcs.push(FlowArc {
                    from: net.node(l, key),
                    to: net.node(l + 1, query),
                    capacity: caps.get(query, key),
                    kind: ArcKind::Attention {
                        layer: l,
                        key,
                        query,
                    },
                });
            }
        }
    }

    let drains: Vec<usize> = match options.sink {
        SinkMode::Full => (0..n).collect(),
        SinkMode::Target(k) => vec![k],
    };
    for token in drains {
        net.arcs.push(FlowArc {
            from: net.node(depth, token),
            to: SINK,
            capacity: unbounded,
            kind: ArcKind::Sink { token },
        });
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::attention::SquareMatrix;

    fn uniform(n: usize, depth: usize) -> AttentionStack {
        let row = vec![1.0 / n as f64; n];
        AttentionStack::from_rows(&vec![vec![row; n]; depth]).unwrap()
    }

    #[test]
    fn three_tokens_three_layers() {
        let stack = uniform(3, 3);
        let net = build_network(&stack, &InputPlayers::all(3), &FlowOptions::default()).unwrap();
        assert_eq!(net.player_count(), 3);
        for l in 0..3 {
            assert_eq!(
                net.count(|k| matches!(k, ArcKind::Attention { layer, .. } if *layer == l)),
                9
            );
        }
        assert_eq!(net.count(|k| matches!(k, ArcKind::Sink { .. })), 3);
        assert_eq!(net.node_count(), 2 + 4 * 3);
    }

    #[test]
    fn two_tokens_one_layer_counts() {
        let stack = AttentionStack::from_rows(&[vec![vec![0.7, 0.3], vec![0.4, 0.6]]]).unwrap();
        let net = build_network(&stack, &InputPlayers::all(2), &FlowOptions::default()).unwrap();
        assert_eq!(net.count(|k| matches!(k, ArcKind::Source { .. })), 2);
        assert_eq!(net.count(|k| matches!(k, ArcKind::Attention { .. })), 4);
        assert_eq!(net.count(|k| matches!(k, ArcKind::Sink { .. })), 2);
        // (0, key 1) -> (1, query 0) carries a[0][1]
        let arc = net
            .arcs()
            .iter()
            .find(|a| {
                a.kind
                    == ArcKind::Attention {
                        layer: 0,
                        key: 1,
                        query: 0,
                    }
            })
            .unwrap();
        assert_eq!(arc.capacity, 0.3);
        assert!(net
            .arcs()
            .iter()
            .filter(|a| a.from == SOURCE)
            .all(|a| a.capacity == 2.0));
    }

    #[test]
    fn residual_over_identity_keeps_identity() {
        let stack = AttentionStack::new(vec![SquareMatrix::identity(3)]).unwrap();
        let opts = FlowOptions::default().with_residual(0.5);
        let with = build_network(&stack, &InputPlayers::all(3), &opts).unwrap();
        let without =
            build_network(&stack, &InputPlayers::all(3), &FlowOptions::default()).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn construction_errors() {
        let stack = uniform(3, 2);
        let opts = FlowOptions::default();
        assert!(matches!(
            build_network(&stack, &InputPlayers::all(3).at_layer(1), &opts),
            Err(Error::PlayersNotAtInput(1))
        ));
        assert!(matches!(
            build_network(
                &stack,
                &InputPlayers::all(3),
                &opts.with_sink(SinkMode::Target(3))
            ),
            Err(Error::TargetOutOfRange { target: 3, n: 3 })
        ));
        assert!(build_network(&stack, &InputPlayers::tokens(vec![0, 0]), &opts).is_err());
        assert!(build_network(&stack, &InputPlayers::tokens(vec![5]), &opts).is_err());
        assert!(build_network(&stack, &InputPlayers::grouped(vec![vec![]]), &opts).is_err());
        assert!(matches!(
            build_network(&stack, &InputPlayers::all(3), &opts.with_residual(1.0)),
            Err(Error::ResidualWeight(_))
        ));
    }

    #[test]
    fn target_sink_has_one_drain() {
        let stack = uniform(4, 2);
        let opts = FlowOptions::default().with_sink(SinkMode::Target(2));
        let net = build_network(&stack, &InputPlayers::all(4), &opts).unwrap();
        let sinks: Vec<_> = net.arcs().iter().filter(|a| a.to == SINK).collect();
        assert_eq!(sinks.len(), 1);
        assert_eq!(sinks[0].from, net.node(2, 2));
    }

    #[test]
    fn grouped_players_own_several_source_arcs() {
        let stack = uniform(3, 1);
        let players = InputPlayers::grouped(vec![vec![2, 0], vec![1]]);
        let net = build_network(&stack, &players, &FlowOptions::default()).unwrap();
        assert_eq!(net.player_arcs()[0].len(), 2);
        assert_eq!(net.player_arcs()[1].len(), 1);
    }

    #[test]
    fn sink_mode_parsing() {
        assert_eq!("full".parse::<SinkMode>().unwrap(), SinkMode::Full);
        assert_eq!("target:4".parse::<SinkMode>().unwrap(), SinkMode::Target(4));
        assert!("target:".parse::<SinkMode>().is_err());
        assert!("all".parse::<SinkMode>().is_err());
    }
}
