//! Maximum flow by blocking flows on BFS level graphs (Dinic).
//!
//! Each phase strictly increases the source-sink distance in the residual
//! graph, so there are at most `|V|` phases, and every augmentation inside a
//! phase saturates an arc. That bound holds for real capacities, unlike plain
//! augmenting-path search. Residual capacities at or below [`RESIDUAL_EPS`]
//! count as zero.

use std::collections::VecDeque;

use crate::flow::network::{FlowNetwork, SINK, SOURCE};

pub const RESIDUAL_EPS: f64 = 1e-12;

/// A maximum flow on a [`FlowNetwork`].
#[derive(Clone, Debug, PartialEq)]
pub struct FlowResult {
    /// Flow on each arc, indexed like [`FlowNetwork::arcs`].
    pub flow: Vec<f64>,
    /// `|f|`, the total flow leaving the source.
    pub total: f64,
    /// Total flow on each player's source arcs.
    pub outflow: Vec<f64>,
    /// Capacity of the cut between residual-reachable and unreachable nodes.
    pub cut_capacity: f64,
    /// Nodes reachable from the source in the final residual graph.
    pub source_side: Vec<bool>,
}

impl FlowResult {
    /// Largest `max(0, -flow, flow - capacity)` over all arcs.
    pub fn capacity_violation(&self, network: &FlowNetwork) -> f64 {
        network
            .arcs()
            .iter()
            .zip(&self.flow)
            .map(|(arc, &f)| (-f).max(f - arc.capacity).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Largest `|inflow − outflow|` over nodes other than source and sink.
    pub fn conservation_defect(&self, network: &FlowNetwork) -> f64 {
        let mut balance = vec![0.0; network.node_count()];
        for (arc, &f) in network.arcs().iter().zip(&self.flow) {
            balance[arc.from] -= f;
            balance[arc.to] += f;
        }
        balance
            .iter()
            .enumerate()
            .filter(|&(v, _)| v != SOURCE && v != SINK)
            .map(|(_, b)| b.abs())
            .fold(0.0, f64::max)
    }

    /// Whether the sink is still reachable in the residual graph.
    pub fn has_augmenting_path(&self) -> bool {
        self.source_side[SINK]
    }
}

struct Residual<'a> {
    network: &'a FlowNetwork,
    flow: Vec<f64>,
    /// For each node, `(arc, forward)` in arc order.
    adjacency: Vec<Vec<(usize, bool)>>,
    level: Vec<usize>,
    cursor: Vec<usize>,
}

impl<'a> Residual<'a> {
    fn new(network: &'a FlowNetwork) -> Self {
        let mut adjacency = vec![Vec::new(); network.node_count()];
        for (a, arc) in network.arcs().iter().enumerate() {
            adjacency[arc.from].push((a, true));
            adjacency[arc.to].push((a, false));
        }
        Residual {
            network,
            flow: vec![0.0; network.arcs().len()],
            adjacency,
            level: vec![usize::MAX; network.node_count()],
            cursor: vec![0; network.node_count()],
        }
    }

    fn residual(&self, arc: usize, forward: bool) -> f64 {
        if forward {
            self.network.arcs()[arc].capacity - self.flow[arc]
        } else {
            self.flow[arc]
        }
    }

    fn head(&self, arc: usize, forward: bool) -> usize {
        let a = &self.network.arcs()[arc];
        if forward {
            a.to
        } else {
            a.from
        }
    }

    fn push(&mut self, arc: usize, forward: bool, amount: f64, available: f64) {
        let capacity = self.network.arcs()[arc].capacity;
        let f = &mut self.flow[arc];
        match (forward, amount >= available) {
            (true, true) => *f = capacity,
            (true, false) => *f = (*f + amount).min(capacity),
            (false, true) => *f = 0.0,
            (false, false) => *f = (*f - amount).max(0.0),
        }
    }

    /// BFS levels over residual arcs; returns whether the sink was reached.
    fn levels(&mut self) -> bool {
        self.level.fill(usize::MAX);
        self.level[SOURCE] = 0;
        let mut queue = VecDeque::from([SOURCE]);
        while let Some(u) = queue.pop_front() {
            for k in 0..self.adjacency[u].len() {
                let (arc, forward) = self.adjacency[u][k];
                let v = self.head(arc, forward);
                if self.level[v] == usize::MAX && self.residual(arc, forward) > RESIDUAL_EPS {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[SINK] != usize::MAX
    }

    fn augment(&mut self, u: usize, limit: f64) -> f64 {
        if u == SINK {
            return limit;
        }
        while self.cursor[u] < self.adjacency[u].len() {
            let (arc, forward) = self.adjacency[u][self.cursor[u]];
            let v = self.head(arc, forward);
            let available = self.residual(arc, forward);
            if available > RESIDUAL_EPS && self.level[v] == self.level[u] + 1 {
                let pushed = self.augment(v, limit.min(available));
                if pushed > 0.0 {
                    self.push(arc, forward, pushed, available);
                    return pushed;
                }
            }
            self.cursor[u] += 1;
        }
        0.0
    }

    fn run(&mut self) {
        while self.levels() {
            self.cursor.fill(0);
            while self.augment(SOURCE, f64::INFINITY) > 0.0 {}
        }
    }

    fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.network.node_count()];
        seen[SOURCE] = true;
        let mut stack = vec![SOURCE];
        while let Some(u) = stack.pop() {
            for &(arc, forward) in &self.adjacency[u] {
                let v = self.head(arc, forward);
                if !seen[v] && self.residual(arc, forward) > RESIDUAL_EPS {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

/// Computes a maximum source-sink flow.
///
/// The result is deterministic for a given network: arcs are scanned in
/// their stored order, which fixes which of possibly many maximum flows is
/// returned.
pub fn max_flow(network: &FlowNetwork) -> FlowResult {
    let mut residual = Residual::new(network);
    residual.run();
    let source_side = residual.reachable();
    let flow = residual.flow;

    let outflow: Vec<f64> = network
        .player_arcs()
        .iter()
        .map(|arcs| arcs.iter().map(|&a| flow[a]).sum())
        .collect();
    let total = outflow.iter().sum();
    let cut_capacity = network
        .arcs()
        .iter()
        .filter(|a| source_side[a.from] && !source_side[a.to])
        .map(|a| a.capacity)
        .sum();

    FlowResult {
        flow,
        total,
        outflow,
        cut_capacity,
        source_side,
    }
}
