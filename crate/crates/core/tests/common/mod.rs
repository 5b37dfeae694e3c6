//! Independent reference implementations used to check the library.
#![allow(dead_code)]

use std::path::PathBuf;

use gtattr::game::{make_tabulated_game, Coalition, Game, MissingEntries};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Every ordering of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k - 1 {
            heap(k - 1, items, out);
            if k.is_multiple_of(2) {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
        heap(k - 1, items, out);
    }
    let mut items: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut items, &mut out);
    out
}

/// Shapley values as the average marginal contribution over all n! orderings.
pub fn permutation_shapley(n: usize, v: impl Fn(u64) -> f64) -> Vec<f64> {
    let orders = permutations(n);
    let mut phi = vec![0.0; n];
    for order in &orders {
        let mut prefix = 0u64;
        for &i in order {
            let next = prefix | (1 << i);
            phi[i] += v(next) - v(prefix);
            prefix = next;
        }
    }
    phi.iter().map(|x| x / orders.len() as f64).collect()
}

/// A random table over `n` players with `v(∅) = 0`, indexed by bitmask.
pub fn random_table(rng: &mut StdRng, n: usize) -> Vec<f64> {
    let mut table: Vec<f64> = (0..1usize << n)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    table[0] = 0.0;
    table
}

/// Makes `player` null: `v(S ∪ {player}) = v(S)`.
pub fn plant_null(table: &mut [f64], player: usize) {
    let bit = 1 << player;
    for s in 0..table.len() {
        if s & bit != 0 {
            table[s] = table[s & !bit];
        }
    }
}

/// Makes `i` and `j` interchangeable: `v(S ∪ {i}) = v(S ∪ {j})` for S without both.
pub fn plant_symmetric(table: &mut [f64], i: usize, j: usize) {
    let (bi, bj) = (1 << i, 1 << j);
    for s in 0..table.len() {
        if s & bi != 0 && s & bj == 0 {
            table[s] = table[(s & !bi) | bj];
        }
    }
}

pub fn table_game(n: usize, table: &[f64]) -> Game {
    make_tabulated_game(
        n,
        table
            .iter()
            .enumerate()
            .map(|(s, &v)| (Coalition::from_bits(s as u64), v)),
        MissingEntries::Reject,
    )
    .unwrap()
}

/// Random row-stochastic layers built from uniform weights, with a chance
/// of exact zeros.
pub fn random_layers(rng: &mut StdRng, n: usize, depth: usize) -> Vec<Vec<Vec<f64>>> {
    (0..depth)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let mut row: Vec<f64> = (0..n)
                        .map(|_| {
                            if rng.random_bool(0.2) {
                                0.0
                            } else {
                                rng.random_range(0.01..1.0)
                            }
                        })
                        .collect();
                    if row.iter().all(|&x| x == 0.0) {
                        row[rng.random_range(0..n)] = 1.0;
                    }
                    let total: f64 = row.iter().sum();
                    row.iter().map(|x| x / total).collect()
                })
                .collect()
        })
        .collect()
}

pub fn column_sums(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    (0..n).map(|i| rows.iter().map(|r| r[i]).sum()).collect()
}

/// `later · earlier`, plain triple loop.
pub fn product(later: &[Vec<f64>], earlier: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = later.len();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|i| (0..n).map(|k| later[j][k] * earlier[k][i]).sum())
                .collect()
        })
        .collect()
}

/// Maximum flow value by shortest augmenting paths on a dense capacity
/// matrix. Parallel arcs are summed.
pub fn edmonds_karp(nodes: usize, arcs: &[(usize, usize, f64)], source: usize, sink: usize) -> f64 {
    let mut cap = vec![vec![0.0f64; nodes]; nodes];
    for &(u, v, c) in arcs {
        cap[u][v] += c;
    }
    let mut total = 0.0;
    loop {
        let mut parent = vec![usize::MAX; nodes];
        parent[source] = source;
        let mut queue = std::collections::VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for v in 0..nodes {
                if parent[v] == usize::MAX && cap[u][v] > 1e-13 {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[sink] == usize::MAX {
            return total;
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while v != source {
            bottleneck = bottleneck.min(cap[parent[v]][v]);
            v = parent[v];
        }
        let mut v = sink;
        while v != source {
            let u = parent[v];
            cap[u][v] -= bottleneck;
            cap[v][u] += bottleneck;
            v = u;
        }
        total += bottleneck;
    }
}
