//! Numerical checks relating attention-based and game-theoretic attributions.
//!
//! * [`verify_prop2`] confirms by brute force that attention-flow outflows are
//!   the exact Shapley values of the restriction payoff.
//! * [`measure_prop2_gap_recomputed`] measures how far outflows are from the
//!   Shapley values of the recomputed-flow payoff. It never fails.
//! * [`demonstrate_prop1`] exhibits that total attention received cannot be
//!   a Shapley value under the attention-sum payoff.
//! * [`demonstrate_prop3`] exhibits that leave-one-out values differ from
//!   Shapley values, splitting `φ_i` into `LOO_i / n` plus the rest.
//!
//! These are witnesses for specific constructions, not proofs over all games.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{
    build_network, max_flow, recomputed_game, restriction_game, AttentionStack, FlowOptions,
    InputPlayers, SquareMatrix,
};
use crate::game::{CharacteristicFn, Coalition, Game, PayoffKind, PayoffOracle, PlayerSet};
use crate::shapley::{coalition_values, exact_shapley, leave_one_out, shapley_weights};

/// Largest `n` for the brute-force Shapley side of the attention-flow checks.
pub const MAX_VERIFY_PLAYERS: usize = 10;
/// Largest `n` for the recomputed-payoff measurement (one max flow per coalition).
pub const MAX_RECOMPUTED_PLAYERS: usize = 8;

/// Gap below which outflows and Shapley values count as equal.
pub const PROP2_TOL: f64 = 1e-8;
/// Gap above which two attribution vectors count as different.
pub const DIFFERENCE_TOL: f64 = 1e-9;

const WITNESS_NOTE: &str = "numerical witness for a specific construction; \
                            does not establish the claim for every game";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Proposition {
    P1,
    P2,
    P3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

impl Series {
    fn new(name: &str, values: Vec<f64>) -> Self {
        Series {
            name: name.to_string(),
            values,
        }
    }
}

/// The game and vectors that confirm or refute a proposition.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub description: String,
    pub series: Vec<Series>,
    #[serde(default)]
    pub scalars: BTreeMap<String, f64>,
}

impl Witness {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.values.as_slice())
    }
}

/// Outcome of a proposition check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropositionVerdict {
    pub proposition: Proposition,
    /// Whether the relationship the proposition predicts was observed.
    pub holds: bool,
    pub max_abs_gap: f64,
    pub trials: usize,
    pub witness: Witness,
    #[serde(default)]
    pub note: String,
}

impl PropositionVerdict {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Ranges of token counts and depths for random trials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialShape {
    pub n: RangeInclusive<usize>,
    pub depth: RangeInclusive<usize>,
}

impl TrialShape {
    pub fn new(n: RangeInclusive<usize>, depth: RangeInclusive<usize>) -> Self {
        TrialShape { n, depth }
    }

    fn validate(&self, max_n: usize) -> Result<()> {
        if self.n.is_empty() || *self.n.start() == 0 {
            return Err(Error::InvalidInput(format!("bad token range {:?}", self.n)));
        }
        if self.depth.is_empty() || *self.depth.start() == 0 {
            return Err(Error::InvalidInput(format!(
                "bad depth range {:?}",
                self.depth
            )));
        }
        if *self.n.end() > max_n {
            return Err(Error::EnumerationGuard {
                n: *self.n.end(),
                limit: max_n,
            });
        }
        Ok(())
    }
}

/// Generator for trial `trial` of master seed `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// A random `n × n` row-stochastic matrix with rows drawn from a flat Dirichlet.
pub fn random_stochastic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SquareMatrix {
    let mut m = SquareMatrix::zeros(n);
    for j in 0..n {
        for i in 0..n {
            let x: f64 = rng.sample(Exp1);
            m.set(j, i, x);
        }
    }
    m.normalize_rows();
    m
}

/// A random attention stack with flat-Dirichlet rows.
pub fn random_stack<R: Rng + ?Sized>(n: usize, depth: usize, rng: &mut R) -> AttentionStack {
    let layers = (0..depth).map(|_| random_stochastic(n, rng)).collect();
    AttentionStack::new(layers).expect("flat Dirichlet rows are stochastic")
}

fn trial_stack(shape: &TrialShape, seed: u64, trial: usize) -> AttentionStack {
    let mut rng = trial_rng(seed, trial as u64);
    let n = rng.random_range(shape.n.clone());
    let depth = rng.random_range(shape.depth.clone());
    random_stack(n, depth, &mut rng)
}

struct FlowComparison {
    outflow: Vec<f64>,
    shapley: Vec<f64>,
    gap: f64,
}

fn compare_flow(stack: &AttentionStack, recomputed: bool) -> Result<FlowComparison> {
    let network = build_network(
        stack,
        &InputPlayers::all(stack.n()),
        &FlowOptions::default(),
    )?;
    let result = max_flow(&network);
    let game = if recomputed {
        recomputed_game(&network)?
    } else {
        restriction_game(&network, &result)?
    };
    let shapley = exact_shapley(&game)?.values;
    let gap = max_abs_diff(&result.outflow, &shapley);
    Ok(FlowComparison {
        outflow: result.outflow,
        shapley,
        gap,
    })
}

fn flow_verdict(
    trials: usize,
    shape: &TrialShape,
    seed: u64,
    recomputed: bool,
) -> Result<PropositionVerdict> {
    if trials == 0 {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    let limit = if recomputed {
        MAX_RECOMPUTED_PLAYERS
    } else {
        MAX_VERIFY_PLAYERS
    };
    shape.validate(limit)?;

    let mut worst: Option<(usize, AttentionStack, FlowComparison)> = None;
    for trial in 0..trials {
        let stack = trial_stack(shape, seed, trial);
        let cmp = compare_flow(&stack, recomputed)?;
        if worst.as_ref().is_none_or(|(_, _, w)| cmp.gap > w.gap) {
            worst = Some((trial, stack, cmp));
        }
    }
    let (trial, stack, cmp) = worst.expect("at least one trial");
    let payoff = if recomputed {
        "recomputed"
    } else {
        "restriction"
    };
    let mut witness = Witness {
        description: format!(
            "trial {trial} (largest gap): {} tokens, {} layers, {payoff} payoff",
            stack.n(),
            stack.depth()
        ),
        series: vec![
            Series::new("outflow", cmp.outflow),
            Series::new("shapley", cmp.shapley),
        ],
        scalars: BTreeMap::new(),
    };
    witness.scalars.insert("seed".into(), seed as f64);
    witness.scalars.insert("trial".into(), trial as f64);
    let note = if recomputed {
        "measurement only: holds reports whether the two payoff readings coincided within 1e-8"
    } else {
        "holds when every outflow equals its exact Shapley value within 1e-8"
    };
    Ok(PropositionVerdict {
        proposition: Proposition::P2,
        holds: cmp.gap <= PROP2_TOL,
        max_abs_gap: cmp.gap,
        trials,
        witness,
        note: note.into(),
    })
}

/// Compares attention-flow outflows with exact Shapley values of the
/// restriction payoff on `trials` random stacks.
pub fn verify_prop2(trials: usize, shape: &TrialShape, seed: u64) -> Result<PropositionVerdict> {
    flow_verdict(trials, shape, seed, false)
}

/// Like [`verify_prop2`] but with the recomputed payoff, where the flow is
/// solved again for every coalition. Reports the largest gap.
pub fn measure_prop2_gap_recomputed(
    trials: usize,
    shape: &TrialShape,
    seed: u64,
) -> Result<PropositionVerdict> {
    flow_verdict(trials, shape, seed, true)
}

/// Runs both flow comparisons on one given stack.
pub fn compare_flow_payoffs(stack: &AttentionStack) -> Result<(f64, f64)> {
    if stack.n() > MAX_RECOMPUTED_PLAYERS {
        return Err(Error::EnumerationGuard {
            n: stack.n(),
            limit: MAX_RECOMPUTED_PLAYERS,
        });
    }
    Ok((
        compare_flow(stack, false)?.gap,
        compare_flow(stack, true)?.gap,
    ))
}

/// Total attention as a payoff: each attender present in `S` spreads its
/// attention over the keys present in `S`, renormalized, and so contributes
/// 1 as long as it attends to at least one of them (0 otherwise).
struct AttentionSum {
    attention: SquareMatrix,
    attenders: Coalition,
}

impl CharacteristicFn for AttentionSum {
    fn eval(&self, coalition: Coalition) -> f64 {
        coalition
            .intersection(self.attenders)
            .iter()
            .filter(|&j| coalition.iter().any(|i| self.attention.get(j, i) > 0.0))
            .count() as f64
    }

    fn kind(&self) -> PayoffKind {
        PayoffKind::AttentionSum
    }
}

/// The attention-sum game over one attention layer. Every token is a player;
/// `attenders` are the tokens whose rows count as queries.
pub fn attention_sum_game(attention: &SquareMatrix, attenders: Coalition) -> Result<Game> {
    let players = PlayerSet::new(attention.n())?;
    if !attenders.is_subset_of(players.grand()) {
        return Err(Error::InvalidPlayers(format!(
            "attenders {attenders} out of range for {} tokens",
            attention.n()
        )));
    }
    Ok(Game::new(
        players,
        PayoffOracle::new(AttentionSum {
            attention: attention.clone(),
            attenders,
        }),
    ))
}

/// Contrasts the exact Shapley values of the attention-sum game on a
/// single-layer stack with the total attention each token receives.
///
/// `holds` is true when the two vectors differ, exhibiting the
/// contradiction. With uniform attention they coincide (the degenerate case).
pub fn demonstrate_prop1(stack: &AttentionStack) -> Result<PropositionVerdict> {
    if stack.depth() != 1 {
        return Err(Error::InvalidInput(format!(
            "the attention-weight demonstration takes a single layer, got {}",
            stack.depth()
        )));
    }
    let n = stack.n();
    if n > MAX_VERIFY_PLAYERS {
        return Err(Error::EnumerationGuard {
            n,
            limit: MAX_VERIFY_PLAYERS,
        });
    }
    let attention = stack.layer(0);
    let game = attention_sum_game(attention, Coalition::full(n))?;
    let shapley = exact_shapley(&game)?.values;
    let received = attention.column_sums();
    let gap = max_abs_diff(&shapley, &received);
    let spread = received.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - received.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut witness = Witness {
        description: format!("single attention layer over {n} tokens, every token attends"),
        series: vec![
            Series::new("shapley", shapley),
            Series::new("attention_received", received),
        ],
        scalars: BTreeMap::new(),
    };
    witness.scalars.insert("received_spread".into(), spread);
    Ok(PropositionVerdict {
        proposition: Proposition::P1,
        holds: gap > DIFFERENCE_TOL,
        max_abs_gap: gap,
        trials: 1,
        witness,
        note: WITNESS_NOTE.into(),
    })
}

/// [`demonstrate_prop1`] over `trials` random single-layer stacks.
///
/// `holds` is true when every trial whose attention-received vector is
/// non-uniform exhibits the contradiction.
pub fn run_prop1_trials(
    trials: usize,
    n: RangeInclusive<usize>,
    seed: u64,
) -> Result<PropositionVerdict> {
    if trials == 0 {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    let shape = TrialShape::new(n, 1..=1);
    shape.validate(MAX_VERIFY_PLAYERS)?;
    let mut holds = true;
    let mut flagged = 0usize;
    let mut max_gap = 0.0f64;
    let mut first: Option<PropositionVerdict> = None;
    for trial in 0..trials {
        let verdict = demonstrate_prop1(&trial_stack(&shape, seed, trial))?;
        let non_uniform = verdict.witness.scalars["received_spread"] > DIFFERENCE_TOL;
        if non_uniform && !verdict.holds {
            holds = false;
        }
        flagged += usize::from(verdict.holds);
        max_gap = max_gap.max(verdict.max_abs_gap);
        first.get_or_insert(verdict);
    }
    let mut witness = first.expect("at least one trial").witness;
    witness.description = format!(
        "{flagged}/{trials} trials exhibit the contradiction; first trial: {}",
        witness.description
    );
    witness.scalars.insert("flagged".into(), flagged as f64);
    Ok(PropositionVerdict {
        proposition: Proposition::P1,
        holds,
        max_abs_gap: max_gap,
        trials,
        witness,
        note: WITNESS_NOTE.into(),
    })
}

/// Contrasts leave-one-out values with exact Shapley values on `game`.
///
/// The witness carries `loo`, `shapley` and `remaining`, where `remaining_i`
/// is the Shapley sum over every ordering in which `i` is not last, so that
/// `φ_i = LOO_i / n + remaining_i`. The scalar `decomposition_residual` is
/// the largest defect of that identity. `holds` is true when LOO ≠ φ.
pub fn demonstrate_prop3(game: &Game) -> Result<PropositionVerdict> {
    let n = game.n();
    if n > MAX_VERIFY_PLAYERS {
        return Err(Error::EnumerationGuard {
            n,
            limit: MAX_VERIFY_PLAYERS,
        });
    }
    let loo = leave_one_out(game)?.values;
    let shapley = exact_shapley(game)?.values;

    let table = coalition_values(game, 1)?;
    let weights = shapley_weights(n);
    let grand = (1usize << n) - 1;
    let remaining: Vec<f64> = (0..n)
        .map(|i| {
            let bit = 1usize << i;
            let last = grand & !bit;
            (0..table.len())
                .filter(|&s| s & bit == 0 && s != last)
                .map(|s| weights[s.count_ones() as usize] * (table[s | bit] - table[s]))
                .sum()
        })
        .collect();
    let residual = (0..n)
        .map(|i| (shapley[i] - (loo[i] / n as f64 + remaining[i])).abs())
        .fold(0.0, f64::max);
    let gap = max_abs_diff(&loo, &shapley);

    let mut witness = Witness {
        description: game.description(),
        series: vec![
            Series::new("loo", loo),
            Series::new("shapley", shapley),
            Series::new("remaining", remaining),
        ],
        scalars: BTreeMap::new(),
    };
    witness
        .scalars
        .insert("decomposition_residual".into(), residual);
    Ok(PropositionVerdict {
        proposition: Proposition::P3,
        holds: gap > DIFFERENCE_TOL,
        max_abs_gap: gap,
        trials: 1,
        witness,
        note: WITNESS_NOTE.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{
        make_additive_game, make_tabulated_game, make_unanimity_game, MissingEntries,
    };

    fn stack(rows: Vec<Vec<f64>>) -> AttentionStack {
        AttentionStack::from_rows(&[rows]).unwrap()
    }

    #[test]
    fn random_rows_are_stochastic() {
        let mut rng = trial_rng(3, 0);
        let m = random_stochastic(6, &mut rng);
        for s in m.row_sums() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trial_stacks_depend_only_on_seed_and_index() {
        let shape = TrialShape::new(2..=6, 1..=4);
        assert_eq!(trial_stack(&shape, 9, 4), trial_stack(&shape, 9, 4));
        assert_ne!(trial_stack(&shape, 9, 4), trial_stack(&shape, 9, 5));
    }

    #[test]
    fn prop2_small_run() {
        let v = verify_prop2(10, &TrialShape::new(2..=4, 1..=3), 1).unwrap();
        assert!(v.holds, "gap {}", v.max_abs_gap);
        assert_eq!(v.trials, 10);
        assert_eq!(v.proposition, Proposition::P2);
    }

    #[test]
    fn prop2_identity_is_exact() {
        let s = AttentionStack::new(vec![SquareMatrix::identity(4); 2]).unwrap();
        let cmp = compare_flow(&s, false).unwrap();
        assert_eq!(cmp.outflow, vec![1.0; 4]);
        assert_eq!(cmp.shapley, vec![1.0; 4]);
        assert_eq!(cmp.gap, 0.0);
    }

    #[test]
    fn prop2_two_token_fixture() {
        let cmp = compare_flow(&stack(vec![vec![0.7, 0.3], vec![0.4, 0.6]]), false).unwrap();
        assert!((cmp.shapley[0] - 1.1).abs() < 1e-12);
        assert!((cmp.shapley[1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn recomputed_gap_cases() {
        // single layer: both readings are additive
        let v = measure_prop2_gap_recomputed(20, &TrialShape::new(2..=5, 1..=1), 4).unwrap();
        assert!(v.max_abs_gap < 1e-12);

        let id = AttentionStack::new(vec![SquareMatrix::identity(3); 3]).unwrap();
        assert_eq!(compare_flow_payoffs(&id).unwrap(), (0.0, 0.0));

        let bottleneck = AttentionStack::from_rows(&[
            vec![vec![1.0, 0.0], vec![0.5, 0.5]],
            vec![vec![0.5, 0.5], vec![1.0, 0.0]],
        ])
        .unwrap();
        let (restricted, recomputed) = compare_flow_payoffs(&bottleneck).unwrap();
        assert!(restricted < 1e-12);
        // recomputed Shapley = (1.25, 0.25) against outflows (1.5, 0)
        assert!((recomputed - 0.25).abs() < 1e-12);
    }

    #[test]
    fn prop1_two_tokens() {
        let v = demonstrate_prop1(&stack(vec![vec![0.7, 0.3], vec![0.4, 0.6]])).unwrap();
        assert!(v.holds);
        assert_eq!(v.witness.series("shapley").unwrap(), &[1.0, 1.0]);
        let received = v.witness.series("attention_received").unwrap();
        assert!((received[0] - 1.1).abs() < 1e-12);
        assert!((v.max_abs_gap - 0.1).abs() < 1e-12);
    }

    #[test]
    fn prop1_uniform_is_degenerate() {
        let v = demonstrate_prop1(&stack(vec![vec![0.25; 4]; 4])).unwrap();
        assert!(!v.holds);
        assert!(v.max_abs_gap < 1e-12);
    }

    #[test]
    fn prop1_rejects_deep_stacks() {
        let s = AttentionStack::new(vec![SquareMatrix::identity(2); 2]).unwrap();
        assert!(demonstrate_prop1(&s).is_err());
    }

    #[test]
    fn pure_keys_get_zero() {
        // token 2 never attends but everybody attends to itself
        let m = SquareMatrix::from_rows(&[
            vec![0.5, 0.0, 0.5],
            vec![0.0, 0.2, 0.8],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let game = attention_sum_game(&m, Coalition::from_indices([0, 1])).unwrap();
        let phi = exact_shapley(&game).unwrap().values;
        assert_eq!(phi, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn prop1_trials_flag_everything() {
        let v = run_prop1_trials(25, 2..=6, 11).unwrap();
        assert!(v.holds);
        assert_eq!(v.witness.scalars["flagged"], 25.0);
    }

    #[test]
    fn prop3_unanimity() {
        let g = make_unanimity_game(3, Coalition::full(3)).unwrap();
        let v = demonstrate_prop3(&g).unwrap();
        assert!(v.holds);
        assert_eq!(v.witness.series("loo").unwrap(), &[1.0, 1.0, 1.0]);
        for phi in v.witness.series("shapley").unwrap() {
            assert!((phi - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(v
            .witness
            .series("remaining")
            .unwrap()
            .iter()
            .all(|r| *r == 0.0));
        assert!(v.witness.scalars["decomposition_residual"] < 1e-15);
    }

    #[test]
    fn prop3_additive_is_degenerate() {
        let v = demonstrate_prop3(&make_additive_game(vec![0.5, 1.5, -2.0]).unwrap()).unwrap();
        assert!(!v.holds);
        assert!(v.max_abs_gap < 1e-12);
    }

    #[test]
    fn prop3_twin_critical() {
        let g = make_tabulated_game(
            2,
            [
                (Coalition::from_indices([0]), 1.0),
                (Coalition::from_indices([1]), 1.0),
                (Coalition::from_indices([0, 1]), 1.0),
            ],
            MissingEntries::Reject,
        )
        .unwrap();
        let v = demonstrate_prop3(&g).unwrap();
        assert!(v.holds);
        assert_eq!(v.witness.series("loo").unwrap(), &[0.0, 0.0]);
        assert_eq!(v.witness.series("shapley").unwrap(), &[0.5, 0.5]);
        assert_eq!(v.max_abs_gap, 0.5);
    }

    #[test]
    fn verdict_json_shape() {
        let v = demonstrate_prop3(&make_unanimity_game(2, Coalition::full(2)).unwrap()).unwrap();
        let text = v.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["proposition", "holds", "max_abs_gap", "trials", "witness"] {
            assert!(value.get(key).is_some(), "{key}");
        }
        assert_eq!(value["proposition"], "P3");
        let back: PropositionVerdict = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn guards() {
        assert!(verify_prop2(1, &TrialShape::new(2..=11, 1..=1), 0).is_err());
        assert!(measure_prop2_gap_recomputed(1, &TrialShape::new(2..=9, 1..=1), 0).is_err());
        assert!(verify_prop2(0, &TrialShape::new(2..=3, 1..=1), 0).is_err());
        assert!(verify_prop2(1, &TrialShape::new(0..=3, 1..=1), 0).is_err());
    }
}
