//! Exact and sampled Shapley values, leave-one-out values, and checks for
//! the null-player, symmetry and additivity axioms.
//!
//! The exact value of player `i` is
//!
//! ```text
//! φ_i(v) = Σ_{S ⊆ N∖{i}} |S|! (n−1−|S|)! / n! · [v(S ∪ {i}) − v(S)]
//! ```
//!
//! computed with one oracle call per coalition. The Monte Carlo estimator
//! averages the marginal contribution of each player over `m` uniformly
//! random orderings of the players.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{Coalition, Game};
use crate::parallel;
use crate::report::{AttributionReport, Method};

/// Largest player count for exact enumeration (2^20 oracle calls).
pub const MAX_EXACT_PLAYERS: usize = 20;

/// Largest player count for the exhaustive axiom checks.
pub const MAX_AXIOM_PLAYERS: usize = 12;

/// Tolerance for "this marginal contribution is zero" in the axiom premises.
pub const MARGINAL_TOL: f64 = 1e-12;

/// Tolerance for "this value is zero / these values are equal" in the axiom conclusions.
pub const VALUE_TOL: f64 = 1e-9;

/// An ordering of the players `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &p in &order {
            if p >= order.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidInput(format!(
                    "{order:?} is not a permutation"
                )));
            }
        }
        Ok(Permutation(order))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// A uniformly random ordering drawn from stream `index` of `seed`.
    ///
    /// Each index has its own independent generator stream, so the ordering
    /// does not depend on which worker draws it.
    pub fn sampled(n: usize, seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Permutation(order)
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The players that precede `player` in this ordering.
    pub fn prefix_before(&self, player: usize) -> Coalition {
        self.0
            .iter()
            .take_while(|&&p| p != player)
            .fold(Coalition::EMPTY, |acc, &p| acc.with(p))
    }

    /// Advances to the next ordering in lexicographic order; returns `false`
    /// (and leaves the ordering untouched) at the last one.
    pub fn advance(&mut self) -> bool {
        let v = &mut self.0;
        let Some(pivot) = (1..v.len()).rev().find(|&k| v[k - 1] < v[k]).map(|k| k - 1) else {
            return false;
        };
        let swap = (pivot + 1..v.len())
            .rev()
            .find(|&k| v[k] > v[pivot])
            .unwrap();
        v.swap(pivot, swap);
        v[pivot + 1..].reverse();
        true
    }

    /// All `n!` orderings in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = Permutation> {
        let mut next = Some(Permutation::identity(n));
        std::iter::from_fn(move || {
            let current = next.take()?;
            let mut succ = current.clone();
            if succ.advance() {
                next = Some(succ);
            }
            Some(current)
        })
    }
}

/// Sampling parameters for [`monte_carlo_shapley`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EstimatorConfig {
    /// Number of sampled orderings.
    pub m: u64,
    pub seed: u64,
    /// Upper bound on worker threads; 1 runs on the calling thread.
    pub workers: usize,
}

impl EstimatorConfig {
    pub fn new(m: u64, seed: u64) -> Self {
        EstimatorConfig {
            m,
            seed,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }
}

fn guard_exact(n: usize) -> Result<()> {
    if n > MAX_EXACT_PLAYERS {
        Err(Error::EnumerationGuard {
            n,
            limit: MAX_EXACT_PLAYERS,
        })
    } else {
        Ok(())
    }
}

fn guard_axioms(n: usize) -> Result<()> {
    if n > MAX_AXIOM_PLAYERS {
        Err(Error::EnumerationGuard {
            n,
            limit: MAX_AXIOM_PLAYERS,
        })
    } else {
        Ok(())
    }
}

/// `v(S)` for every coalition, indexed by bit pattern.
pub fn coalition_values(game: &Game, workers: usize) -> Result<Vec<f64>> {
    guard_exact(game.n())?;
    let size = 1usize << game.n();
    let chunks = parallel::map_ranges(size, workers, |range| {
        range
            .map(|k| game.checked_value(Coalition::from_bits(k as u64)))
            .collect::<Result<Vec<f64>>>()
    });
    let mut values = Vec::with_capacity(size);
    for chunk in chunks {
        values.extend(chunk?);
    }
    Ok(values)
}

/// `|S|! (n−1−|S|)! / n!` for `|S| = 0..n`, i.e. `1 / (n · C(n−1, |S|))`.
pub fn shapley_weights(n: usize) -> Vec<f64> {
    let mut binom = 1.0f64;
    (0..n)
        .map(|k| {
            if k > 0 {
                binom = binom * (n - k) as f64 / k as f64;
            }
            1.0 / (n as f64 * binom)
        })
        .collect()
}

fn exact_from_table(n: usize, table: &[f64]) -> Vec<f64> {
    let weights = shapley_weights(n);
    (0..n)
        .map(|i| {
            let bit = 1usize << i;
            let mut acc = 0.0;
            for s in 0..table.len() {
                if s & bit == 0 {
                    let size = s.count_ones() as usize;
                    acc += weights[size] * (table[s | bit] - table[s]);
                }
            }
            acc
        })
        .collect()
}

/// Exact Shapley values by coalition enumeration on the calling thread.
pub fn exact_shapley(game: &Game) -> Result<AttributionReport> {
    exact_shapley_with(game, 1)
}

/// Exact Shapley values, evaluating the oracle on up to `workers` threads.
///
/// Marginals are accumulated in ascending coalition order after all
/// evaluations finish, so the result is bit-identical for any worker count.
pub fn exact_shapley_with(game: &Game, workers: usize) -> Result<AttributionReport> {
    let n = game.n();
    let table = coalition_values(game, workers)?;
    let values = exact_from_table(n, &table);
    let v_grand = table[table.len() - 1];
    Ok(
        AttributionReport::new(Method::ShapleyExact, values, v_grand)
            .with_description(game.description())
            .with_labels(game.players().labels().map(<[String]>::to_vec)),
    )
}

/// Running mean and sum of squared deviations (Welford), mergeable.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * self.count as f64 * other.count as f64 / count as f64;
        Moments { count, mean, m2 }
    }

    fn stderr(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            let var = (self.m2 / (self.count - 1) as f64).max(0.0);
            (var / self.count as f64).sqrt()
        }
    }
}

fn accumulate<I>(game: &Game, perms: I) -> Result<Vec<Moments>>
where
    I: IntoIterator<Item = Permutation>,
{
    let n = game.n();
    let mut stats = vec![Moments::default(); n];
    for perm in perms {
        let mut prefix = Coalition::EMPTY;
        let mut before = 0.0;
        for &p in perm.order() {
            prefix = prefix.with(p);
            let after = game.checked_value(prefix)?;
            stats[p].push(after - before);
            before = after;
        }
    }
    Ok(stats)
}

fn report_from_moments(game: &Game, stats: &[Moments], m: u64) -> Result<AttributionReport> {
    let v_grand = game.checked_value(game.players().grand())?;
    let mut report = AttributionReport::new(
        Method::ShapleyMc,
        stats.iter().map(|s| s.mean).collect(),
        v_grand,
    )
    .with_description(game.description())
    .with_labels(game.players().labels().map(<[String]>::to_vec))
    .with_note("stderr is the sample standard deviation of the marginals divided by sqrt(m)");
    report.stderr = Some(stats.iter().map(Moments::stderr).collect());
    report.m = Some(m);
    Ok(report)
}

/// Orderings per accumulation block. Blocks, not workers, fix the merge
/// order, so the estimate is bit-identical for any worker count.
const SAMPLE_BLOCK: usize = 256;

/// Monte Carlo Shapley estimate over `cfg.m` sampled orderings.
///
/// Ordering `k` is drawn from generator stream `k` of `cfg.seed`. Orderings
/// are accumulated in fixed blocks of consecutive indices and the block
/// statistics are merged in ascending order.
pub fn monte_carlo_shapley(game: &Game, cfg: &EstimatorConfig) -> Result<AttributionReport> {
    if cfg.m == 0 {
        return Err(Error::ZeroSamples);
    }
    let n = game.n();
    let m =
        usize::try_from(cfg.m).map_err(|_| Error::InvalidInput("sample count too large".into()))?;
    let blocks = m.div_ceil(SAMPLE_BLOCK);
    let partials = parallel::map_ranges(blocks, cfg.workers, |range| {
        range
            .map(|b| {
                let indices = b * SAMPLE_BLOCK..((b + 1) * SAMPLE_BLOCK).min(m);
                accumulate(
                    game,
                    indices.map(|k| Permutation::sampled(n, cfg.seed, k as u64)),
                )
            })
            .collect::<Vec<_>>()
    });
    let mut stats = vec![Moments::default(); n];
    for block in partials.into_iter().flatten() {
        for (total, part) in stats.iter_mut().zip(block?) {
            *total = total.merge(part);
        }
    }
    let mut report = report_from_moments(game, &stats, cfg.m)?;
    report.seed = Some(cfg.seed);
    Ok(report)
}

/// The sampling estimator run over every ordering, `repeats` times each
/// (`m = n! · repeats`). Equal to the exact value up to rounding.
pub fn exhaustive_permutation_shapley(game: &Game, repeats: u64) -> Result<AttributionReport> {
    if repeats == 0 {
        return Err(Error::ZeroSamples);
    }
    let n = game.n();
    if n > 10 {
        return Err(Error::EnumerationGuard { n, limit: 10 });
    }
    let perms = (0..repeats).flat_map(move |_| Permutation::all(n));
    let stats = accumulate(game, perms)?;
    let factorial: u64 = (1..=n as u64).product();
    report_from_moments(game, &stats, factorial * repeats)
}

/// `LOO_i = v(N) − v(N∖{i})`, using `n + 1` oracle calls.
pub fn leave_one_out(game: &Game) -> Result<AttributionReport> {
    let grand = game.players().grand();
    let v_grand = game.checked_value(grand)?;
    let values = (0..game.n())
        .map(|i| Ok(v_grand - game.checked_value(grand.without(i))?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(AttributionReport::new(Method::Loo, values, v_grand)
        .with_description(game.description())
        .with_labels(game.players().labels().map(<[String]>::to_vec)))
}

/// Outcome of an axiom check: whether the axiom's premise holds for the
/// game, and whether the report satisfies its conclusion. The conclusion is
/// computed either way but only binding when the premise holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct AxiomVerdict {
    pub premise: bool,
    pub conclusion: bool,
}

impl AxiomVerdict {
    pub fn violated(&self) -> bool {
        self.premise && !self.conclusion
    }
}

fn check_player(game: &Game, i: usize) -> Result<()> {
    if i >= game.n() {
        return Err(Error::InvalidInput(format!(
            "player {i} out of range for {} players",
            game.n()
        )));
    }
    Ok(())
}

/// Null-player axiom: if every marginal of `i` is zero, its value must be zero.
pub fn check_null_player(
    game: &Game,
    i: usize,
    report: &AttributionReport,
) -> Result<AxiomVerdict> {
    guard_axioms(game.n())?;
    check_player(game, i)?;
    let others = game.players().grand().without(i);
    let mut premise = true;
    for s in Coalition::all(game.n()).filter(|s| s.is_subset_of(others)) {
        let marginal = game.checked_value(s.with(i))? - game.checked_value(s)?;
        if marginal.abs() > MARGINAL_TOL {
            premise = false;
            break;
        }
    }
    Ok(AxiomVerdict {
        premise,
        conclusion: report.values[i].abs() <= VALUE_TOL,
    })
}

/// Symmetry axiom: if `i` and `j` add the same to every coalition excluding
/// both, their values must be equal.
pub fn check_symmetry(
    game: &Game,
    i: usize,
    j: usize,
    report: &AttributionReport,
) -> Result<AxiomVerdict> {
    guard_axioms(game.n())?;
    check_player(game, i)?;
    check_player(game, j)?;
    let others = game.players().grand().without(i).without(j);
    let mut premise = true;
    for s in Coalition::all(game.n()).filter(|s| s.is_subset_of(others)) {
        let gap = game.checked_value(s.with(i))? - game.checked_value(s.with(j))?;
        if gap.abs() > MARGINAL_TOL {
            premise = false;
            break;
        }
    }
    Ok(AxiomVerdict {
        premise,
        conclusion: (report.values[i] - report.values[j]).abs() <= VALUE_TOL,
    })
}

/// Result of [`check_additivity`].
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct AdditivityVerdict {
    pub holds: bool,
    pub max_abs_gap: f64,
}

/// Additivity axiom: `φ(v + w) = φ(v) + φ(w)` for every player.
pub fn check_additivity(v: &Game, w: &Game) -> Result<AdditivityVerdict> {
    if v.n() != w.n() {
        return Err(Error::MismatchedPlayers(v.n(), w.n()));
    }
    guard_axioms(v.n())?;
    let phi_v = exact_shapley(v)?;
    let phi_w = exact_shapley(w)?;
    let phi_sum = exact_shapley(&v.sum(w)?)?;
    let max_abs_gap = (0..v.n())
        .map(|i| (phi_sum.values[i] - phi_v.values[i] - phi_w.values[i]).abs())
        .fold(0.0, f64::max);
    Ok(AdditivityVerdict {
        holds: max_abs_gap <= VALUE_TOL,
        max_abs_gap,
    })
}
