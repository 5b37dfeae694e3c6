//! Players, coalitions, payoff oracles and the synthetic games built from them.
//!
//! A [`Game`] pairs a [`PlayerSet`] with a [`PayoffOracle`]. Coalitions are
//! bit sets over player indices `0..n`, so a game can have at most
//! [`MAX_PLAYERS`] players. Every oracle is shifted by its own value at the
//! empty coalition, so `v(∅) = 0` holds exactly no matter how the underlying
//! function was specified.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest player count a [`Coalition`] can represent.
pub const MAX_PLAYERS: usize = 63;

/// Largest player count for a dense payoff table (2^20 entries).
pub const MAX_TABLE_PLAYERS: usize = 20;

/// A subset of players, stored as a bit set over indices `0..63`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coalition(u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn from_bits(bits: u64) -> Self {
        Coalition(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// The grand coalition `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        assert!(
            n <= MAX_PLAYERS,
            "coalitions hold at most {MAX_PLAYERS} players"
        );
        if n == 0 {
            Coalition(0)
        } else {
            Coalition(u64::MAX >> (64 - n))
        }
    }

    pub fn singleton(i: usize) -> Self {
        assert!(i < MAX_PLAYERS);
        Coalition(1 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices
            .into_iter()
            .fold(Coalition::EMPTY, |acc, i| acc.with(i))
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 & (1 << i) != 0
    }

    #[must_use]
    pub fn with(self, i: usize) -> Self {
        assert!(i < MAX_PLAYERS, "player index {i} out of range");
        Coalition(self.0 | (1 << i))
    }

    #[must_use]
    pub fn without(self, i: usize) -> Self {
        if i >= 64 {
            return self;
        }
        Coalition(self.0 & !(1 << i))
    }

    pub fn union(self, other: Coalition) -> Self {
        Coalition(self.0 | other.0)
    }

    pub fn intersection(self, other: Coalition) -> Self {
        Coalition(self.0 & other.0)
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Member indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(i)
        })
    }

    /// All `2^n` coalitions of `n` players, in ascending bit-pattern order.
    pub fn all(n: usize) -> impl Iterator<Item = Coalition> {
        assert!(n <= MAX_PLAYERS);
        (0..1u64 << n).map(Coalition)
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

/// The players of a game, with optional display labels and an optional
/// grouping of base units (e.g. tokens) into players.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerSet {
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grouping: Option<Vec<Vec<usize>>>,
}

impl PlayerSet {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPlayers(
                "a game needs at least one player".into(),
            ));
        }
        if n > MAX_PLAYERS {
            return Err(Error::InvalidPlayers(format!(
                "{n} players exceeds the coalition limit of {MAX_PLAYERS}"
            )));
        }
        Ok(PlayerSet {
            n,
            labels: None,
            grouping: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidPlayers(format!(
                "{} labels given for {} players",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Players formed from groups of base units. `groups` must partition
    /// `0..units`.
    pub fn grouped(units: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        validate_partition(units, &groups)?;
        let mut set = PlayerSet::new(groups.len())?;
        set.grouping = Some(groups);
        Ok(set)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn grouping(&self) -> Option<&[Vec<usize>]> {
        self.grouping.as_deref()
    }

    /// Label for player `i`, falling back to its index.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(labels) if !labels[i].is_empty() => labels[i].clone(),
            _ => i.to_string(),
        }
    }

    pub fn grand(&self) -> Coalition {
        Coalition::full(self.n)
    }
}

fn validate_partition(units: usize, groups: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; units];
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::InvalidPlayers(format!("group {g} is empty")));
        }
        for &u in members {
            if u >= units {
                return Err(Error::InvalidPlayers(format!(
                    "group {g} refers to unit {u}, but there are only {units} units"
                )));
            }
            if std::mem::replace(&mut seen[u], true) {
                return Err(Error::InvalidPlayers(format!(
                    "unit {u} belongs to more than one group"
                )));
            }
        }
    }
    if let Some(u) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidPlayers(format!(
            "unit {u} belongs to no group"
        )));
    }
    Ok(())
}

/// Which family a payoff oracle belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayoffKind {
    Tabulated,
    Additive,
    Unanimity,
    Majority,
    FlowRestricted,
    FlowRecomputed,
    AttentionSum,
    Grouped,
    Sum,
    Custom,
}

impl fmt::Display for PayoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PayoffKind::Tabulated => "tabulated",
            PayoffKind::Additive => "additive",
            PayoffKind::Unanimity => "unanimity",
            PayoffKind::Majority => "majority",
            PayoffKind::FlowRestricted => "flow-restricted",
            PayoffKind::FlowRecomputed => "flow-recomputed",
            PayoffKind::AttentionSum => "attention-sum",
            PayoffKind::Grouped => "grouped",
            PayoffKind::Sum => "sum",
            PayoffKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// A characteristic function over coalitions, before baseline shifting.
///
/// Implementations must be pure: the same coalition always yields the same
/// bits. Interior caching is fine as long as it is not observable.
pub trait CharacteristicFn: Send + Sync {
    fn eval(&self, coalition: Coalition) -> f64;
    fn kind(&self) -> PayoffKind;
}

/// A payoff function `v : 2^N -> R` with `v(∅) = 0`.
#[derive(Clone)]
pub struct PayoffOracle {
    inner: Arc<dyn CharacteristicFn>,
    baseline: f64,
}

impl PayoffOracle {
    /// Wraps `f`, subtracting `f(∅)` from every evaluation.
    pub fn new<F: CharacteristicFn + 'static>(f: F) -> Self {
        Self::from_arc(Arc::new(f))
    }

    pub fn from_arc(inner: Arc<dyn CharacteristicFn>) -> Self {
        let baseline = inner.eval(Coalition::EMPTY);
        PayoffOracle { inner, baseline }
    }

    pub fn evaluate(&self, coalition: Coalition) -> f64 {
        if coalition.is_empty() {
            0.0
        } else {
            self.inner.eval(coalition) - self.baseline
        }
    }

    pub fn kind(&self) -> PayoffKind {
        self.inner.kind()
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }
}

impl fmt::Debug for PayoffOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PayoffOracle")
            .field("kind", &self.kind())
            .field("baseline", &self.baseline)
            .finish()
    }
}

/// A transferable-utility game `(N, v)`.
#[derive(Clone, Debug)]
pub struct Game {
    players: PlayerSet,
    payoff: PayoffOracle,
}

impl Game {
    pub fn new(players: PlayerSet, payoff: PayoffOracle) -> Self {
        Game { players, payoff }
    }

    /// A game from an arbitrary closure; `f(∅)` is used as the baseline.
    pub fn from_fn<F>(n: usize, f: F) -> Result<Self>
    where
        F: Fn(Coalition) -> f64 + Send + Sync + 'static,
    {
        Ok(Game::new(
            PlayerSet::new(n)?,
            PayoffOracle::new(ClosureFn(f)),
        ))
    }

    pub fn players(&self) -> &PlayerSet {
        &self.players
    }

    pub fn payoff(&self) -> &PayoffOracle {
        &self.payoff
    }

    pub fn n(&self) -> usize {
        self.players.n
    }

    pub fn value(&self, coalition: Coalition) -> f64 {
        debug_assert!(coalition.is_subset_of(self.players.grand()));
        self.payoff.evaluate(coalition)
    }

    /// `v(S)`, failing on a non-finite result.
    pub fn checked_value(&self, coalition: Coalition) -> Result<f64> {
        let v = self.value(coalition);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(coalition))
        }
    }

    pub fn grand_value(&self) -> f64 {
        self.value(self.players.grand())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        self.players = self.players.with_labels(labels)?;
        Ok(self)
    }

    /// The pointwise sum game `(v + w)(S) = v(S) + w(S)`.
    pub fn sum(&self, other: &Game) -> Result<Game> {
        if self.n() != other.n() {
            return Err(Error::MismatchedPlayers(self.n(), other.n()));
        }
        let oracle = PayoffOracle::new(SumFn(self.payoff.clone(), other.payoff.clone()));
        Ok(Game::new(self.players.clone(), oracle))
    }

    pub fn description(&self) -> String {
        format!("{} game over {} players", self.payoff.kind(), self.n())
    }
}

struct ClosureFn<F>(F);

impl<F> CharacteristicFn for ClosureFn<F>
where
    F: Fn(Coalition) -> f64 + Send + Sync,
{
    fn eval(&self, coalition: Coalition) -> f64 {
        (self.0)(coalition)
    }

    fn kind(&self) -> PayoffKind {
        PayoffKind::Custom
    }
}

struct SumFn(PayoffOracle, PayoffOracle);

impl CharacteristicFn for SumFn {
    fn eval(&self, coalition: Coalition) -> f64 {
        self.0.evaluate(coalition) + self.1.evaluate(coalition)
    }

    fn kind(&self) -> PayoffKind {
        PayoffKind::Sum
    }
}

/// How to treat coalitions missing from a payoff table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MissingEntries {
    /// Any missing non-empty coalition is an error.
    #[default]
    Reject,
    /// Missing coalitions are worth 0.
    ZeroFill,
}

struct TableFn(Vec<f64>);

impl CharacteristicFn for TableFn {
    fn eval(&self, coalition: Coalition) -> f64 {
        self.0[coalition.bits() as usize]
    }

    fn kind(&self) -> PayoffKind {
        PayoffKind::Tabulated
    }
}

/// Builds a game from an explicit coalition → payoff table.
///
/// The empty coalition defaults to 0 when absent; any other gap is an error
/// unless `missing` is [`MissingEntries::ZeroFill`].
pub fn make_tabulated_game<I>(n: usize, values: I, missing: MissingEntries) -> Result<Game>
where
    I: IntoIterator<Item = (Coalition, f64)>,
{
    if n > MAX_TABLE_PLAYERS {
        return Err(Error::TableTooLarge {
            n,
            limit: MAX_TABLE_PLAYERS,
        });
    }
    let players = PlayerSet::new(n)?;
    let size = 1usize << n;
    let mut table = vec![f64::NAN; size];
    let mut present = vec![false; size];
    for (coalition, v) in values {
        if !coalition.is_subset_of(players.grand()) {
            let index = coalition.iter().find(|&i| i >= n).unwrap_or(n);
            return Err(Error::PlayerOutOfRange {
                coalition: coalition.to_string(),
                index,
                n,
            });
        }
        let k = coalition.bits() as usize;
        if std::mem::replace(&mut present[k], true) {
            return Err(Error::DuplicateCoalition(coalition));
        }
        table[k] = v;
    }
    for (k, slot) in table.iter_mut().enumerate() {
        if present[k] {
            continue;
        }
        if k == 0 || missing == MissingEntries::ZeroFill {
            *slot = 0.0;
        } else {
            return Err(Error::MissingCoalition(Coalition::from_bits(k as u64)));
        }
    }
    Ok(Game::new(players, PayoffOracle::new(TableFn(table))))
}

struct AdditiveFn(Vec<f64>);

impl CharacteristicFn for AdditiveFn {
    fn eval(&self, coalition: Coalition) -> f64 {
        coalition.iter().map(|i| self.0[i]).sum()
    }

    fn kind(&self) -> PayoffKind {
        PayoffKind::Additive
    }
}

/// `v(S) = Σ_{i∈S} weights[i]`.
pub fn make_additive_game(weights: Vec<f64>) -> Result<Game> {
    let players = PlayerSet::new(weights.len())?;
    Ok(Game::new(players, PayoffOracle::new(AdditiveFn(weights))))
}

struct UnanimityFn(Coalition);

impl CharacteristicFn for UnanimityFn {
    fn eval(&self, coalition: Coalition) -> f64 {
        if self.0.is_subset_of(coalition) {
            1.0
        } else {
            0.0
        }
    }

    fn kind(&self) -> PayoffKind {
        PayoffKind::Unanimity
    }
}

/// `v(S) = 1` when `carriers ⊆ S`, else 0.
pub fn make_unanimity_game(n: usize, carriers: Coalition) -> Result<Game> {
    let players = PlayerSet::new(n)?;
    if carriers.is_empty() {
        return Err(Error::InvalidPlayers(
            "unanimity carriers must be non-empty".into(),
        ));
    }
    if !carriers.is_subset_of(players.grand()) {
        return Err(Error::PlayerOutOfRange {
            coalition: carriers.to_string(),
            index: carriers.iter().find(|&i| i >= n).unwrap_or(n),
            n,
        });
    }
    Ok(Game::new(players, PayoffOracle::new(UnanimityFn(carriers))))
}

struct MajorityFn(usize);

impl CharacteristicFn for MajorityFn {
    fn eval(&self, coalition: Coalition) -> f64 {
        if coalition.len() >= self.0 {
            1.0
        } else {
            0.0
        }
    }

    fn kind(&self) -> PayoffKind {
        PayoffKind::Majority
    }
}

/// `v(S) = 1` when `|S| ≥ quota`, else 0.
pub fn make_majority_game(n: usize, quota: usize) -> Result<Game> {
    let players = PlayerSet::new(n)?;
    if quota == 0 || quota > n {
        return Err(Error::InvalidInput(format!(
            "majority quota must lie in 1..={n}, got {quota}"
        )));
    }
    Ok(Game::new(players, PayoffOracle::new(MajorityFn(quota))))
}

struct GroupedFn {
    base: PayoffOracle,
    groups: Vec<Coalition>,
}

impl CharacteristicFn for GroupedFn {
    fn eval(&self, coalition: Coalition) -> f64 {
        let units = coalition
            .iter()
            .fold(Coalition::EMPTY, |acc, g| acc.union(self.groups[g]));
        self.base.evaluate(units)
    }

    fn kind(&self) -> PayoffKind {
        PayoffKind::Grouped
    }
}

/// Re-expresses `base` as a game whose players are groups of its units.
///
/// A group coalition is worth the base payoff of the union of its members'
/// units, so all units of a group enter and leave together.
pub fn group_players(base: &Game, grouping: Vec<Vec<usize>>) -> Result<Game> {
    let mut players = PlayerSet::grouped(base.n(), grouping)?;
    let groups: Vec<Coalition> = players
        .grouping()
        .expect("grouped player set")
        .iter()
        .map(|g| Coalition::from_indices(g.iter().copied()))
        .collect();
    if let Some(labels) = base.players().labels() {
        let joined = players
            .grouping()
            .expect("grouped player set")
            .iter()
            .map(|g| {
                g.iter()
                    .map(|&u| labels[u].as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        players = players.with_labels(joined)?;
    }
    let oracle = PayoffOracle::new(GroupedFn {
        base: base.payoff().clone(),
        groups,
    });
    Ok(Game::new(players, oracle))
}

/// JSON form of a tabulated game: `{"n": 3, "values": [{"coalition": [0, 2], "v": 1.5}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameDocument {
    pub n: usize,
    pub values: Vec<GameEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameEntry {
    pub coalition: Vec<usize>,
    pub v: f64,
}

impl GameDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn into_game(self, missing: MissingEntries) -> Result<Game> {
        let n = self.n;
        let mut entries = Vec::with_capacity(self.values.len());
        for entry in self.values {
            let unique: BTreeSet<usize> = entry.coalition.iter().copied().collect();
            if unique.len() != entry.coalition.len() {
                return Err(Error::InvalidInput(format!(
                    "coalition {:?} lists a player twice",
                    entry.coalition
                )));
            }
            if let Some(&bad) = unique.iter().find(|&&i| i >= n) {
                return Err(Error::PlayerOutOfRange {
                    coalition: format!("{:?}", entry.coalition),
                    index: bad,
                    n,
                });
            }
            entries.push((Coalition::from_indices(unique), entry.v));
        }
        make_tabulated_game(n, entries, missing)
    }
}

/// Reads a tabulated game from a JSON file.
pub fn load_game(path: impl AsRef<Path>, missing: MissingEntries) -> Result<Game> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
    GameDocument::from_json(&text)?.into_game(missing)
}
