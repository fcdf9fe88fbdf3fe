//! Policy-space dynamics at the oracle level: equilibrium enumeration over
//! quantized sets, the satisficing policy-revision Markov chain, and the
//! constructive cohort path builder with its validity checker.
//!
//! Profiles are per-player ordinals into one shared [`QuantizedPolicySet`];
//! because the set is shared and stored on the symmetry base space, ordinal
//! equality is exactly policy equality under the channel's symmetry notion.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{
    objective_br_test, subjective_br_from_functions, subjective_functions, MAX_PROFILE_ENUM,
};
use crate::game::GameSpec;
use crate::policy::{ChannelKind, QuantizedPolicySet};
use crate::seeds::{derive_rng, purpose};

/// Per-player ordinals into one shared quantized set; entry `i` is player
/// `i`'s member index.
pub type PolicyProfileOrdinal = Vec<usize>;

/// Per-player subjective-BR flags for every profile of the shared set,
/// profile-indexed little-endian (player 0's ordinal varies fastest).
#[derive(Debug, Clone)]
pub struct SatisfactionTable {
    set_size: usize,
    n_players: usize,
    flags: Vec<Vec<bool>>,
}

impl SatisfactionTable {
    pub fn compute(game: &GameSpec, set: &QuantizedPolicySet, eps: f64) -> Result<Self> {
        let n = game.n_players();
        let n_profiles = set
            .len()
            .checked_pow(n as u32)
            .filter(|&v| v <= MAX_PROFILE_ENUM)
            .ok_or_else(|| {
                Error::guardrail(format!(
                    "profile enumeration {}^{n} exceeds {MAX_PROFILE_ENUM}",
                    set.len()
                ))
            })?;
        let flags = (0..n_profiles)
            .into_par_iter()
            .map(|p| {
                let profile = decode_profile(p, set.len(), n);
                let joint = set.joint(game, &profile)?;
                (0..n)
                    .map(|i| {
                        let sf = subjective_functions(game, i, &joint)?;
                        Ok(subjective_br_from_functions(&sf, eps))
                    })
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SatisfactionTable { set_size: set.len(), n_players: n, flags })
    }

    pub fn set_size(&self) -> usize {
        self.set_size
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn n_profiles(&self) -> usize {
        self.flags.len()
    }

    pub fn profile_index(&self, profile: &[usize]) -> usize {
        encode_profile(profile, self.set_size)
    }

    pub fn profile_from_index(&self, index: usize) -> PolicyProfileOrdinal {
        decode_profile(index, self.set_size, self.n_players)
    }

    pub fn satisfied(&self, profile: &[usize]) -> &[bool] {
        &self.flags[encode_profile(profile, self.set_size)]
    }

    pub fn is_equilibrium(&self, profile: &[usize]) -> bool {
        self.satisfied(profile).iter().all(|&s| s)
    }

    /// All subjective ε-equilibrium profiles, in profile-index order.
    pub fn equilibrium_profiles(&self) -> Vec<PolicyProfileOrdinal> {
        (0..self.n_profiles())
            .filter(|&p| self.flags[p].iter().all(|&s| s))
            .map(|p| self.profile_from_index(p))
            .collect()
    }
}

fn encode_profile(profile: &[usize], set_size: usize) -> usize {
    profile.iter().rev().fold(0, |acc, &o| acc * set_size + o)
}

fn decode_profile(mut index: usize, set_size: usize, n_players: usize) -> Vec<usize> {
    let mut out = vec![0usize; n_players];
    for slot in out.iter_mut() {
        *slot = index % set_size;
        index /= set_size;
    }
    out
}

/// Profiles where every player subjectively ε-best-responds.
pub fn subjective_equilibrium_set(
    game: &GameSpec,
    set: &QuantizedPolicySet,
    eps: f64,
) -> Result<Vec<PolicyProfileOrdinal>> {
    Ok(SatisfactionTable::compute(game, set, eps)?.equilibrium_profiles())
}

/// Profiles where every player objectively ε-best-responds. Only the
/// profiles on which the objective test is well defined are examined: all
/// of them on the Global channel, and on the MeanField channel those where
/// each player's co-players share one ordinal; other channels error.
pub fn objective_equilibrium_set(
    game: &GameSpec,
    set: &QuantizedPolicySet,
    eps: f64,
) -> Result<Vec<PolicyProfileOrdinal>> {
    let n = game.n_players();
    match game.channel_tag().kind {
        ChannelKind::Global => {}
        ChannelKind::MeanField => {}
        _ => {
            return Err(Error::structural(
                "objective equilibria are only computable on the global channel \
                 or the mean-field channel",
            ))
        }
    }
    let n_profiles = set
        .len()
        .checked_pow(n as u32)
        .filter(|&v| v <= MAX_PROFILE_ENUM)
        .ok_or_else(|| Error::guardrail("profile enumeration exceeds the cap".to_string()))?;
    let mean_field = matches!(game.channel_tag().kind, ChannelKind::MeanField);
    (0..n_profiles)
        .into_par_iter()
        .map(|p| {
            let profile = decode_profile(p, set.len(), n);
            if mean_field && !others_share_ordinal(&profile) {
                return Ok(None);
            }
            let joint = set.joint(game, &profile)?;
            for i in 0..n {
                if !objective_br_test(game, i, &joint, eps)? {
                    return Ok(None);
                }
            }
            Ok(Some(profile))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}

/// True iff for every player the remaining ordinals are all equal.
fn others_share_ordinal(profile: &[usize]) -> bool {
    let n = profile.len();
    if n <= 2 {
        return true;
    }
    (0..n).all(|i| {
        let mut others = profile.iter().enumerate().filter(|&(j, _)| j != i);
        let first = others.next().map(|(_, &o)| o);
        others.all(|(_, &o)| Some(o) == first)
    })
}

/// One step of the oracle revision chain: satisfied players keep their
/// ordinal; unsatisfied players draw (1−e)·δ_current + e·Unif(Π),
/// conditionally independently.
pub fn oracle_revision_step<R: Rng>(
    table: &SatisfactionTable,
    profile: &[usize],
    revision_probs: &[f64],
    rng: &mut R,
) -> PolicyProfileOrdinal {
    let flags = table.satisfied(profile);
    profile
        .iter()
        .enumerate()
        .map(|(i, &o)| {
            if flags[i] {
                o
            } else if rng.gen::<f64>() < revision_probs[i] {
                rng.gen_range(0..table.set_size())
            } else {
                o
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    /// Profiles visited, including the start; length `max_steps + 1` unless
    /// truncated by nothing (the chain always runs to `max_steps`).
    pub trajectory: Vec<PolicyProfileOrdinal>,
    /// First step index at which the chain sat in the equilibrium set.
    pub hitting_time: Option<u64>,
    /// Whether the chain ever left the set after hitting it.
    pub left_after_hit: bool,
}

/// Runs the oracle revision chain for `max_steps` steps from `start`, using a
/// precomputed satisfaction table. Refuses when the equilibrium set is
/// empty.
pub fn run_oracle_dynamics_with_table(
    table: &SatisfactionTable,
    revision_probs: &[f64],
    start: &[usize],
    max_steps: u64,
    seed: u64,
) -> Result<OracleRun> {
    if revision_probs.len() != table.n_players() || start.len() != table.n_players() {
        return Err(Error::config("profile and revision probabilities must cover all players"));
    }
    if start.iter().any(|&o| o >= table.set_size()) {
        return Err(Error::config("start ordinal out of range"));
    }
    if table.equilibrium_profiles().is_empty() {
        return Err(Error::EmptyEquilibrium(
            "the shared set contains no subjective ε-equilibrium".to_string(),
        ));
    }
    let mut rng = derive_rng(seed, &[purpose::REVISION]);
    let mut profile = start.to_vec();
    let mut trajectory = Vec::with_capacity(max_steps as usize + 1);
    trajectory.push(profile.clone());
    let mut hitting_time = if table.is_equilibrium(&profile) { Some(0) } else { None };
    let mut left_after_hit = false;
    for t in 1..=max_steps {
        profile = oracle_revision_step(table, &profile, revision_probs, &mut rng);
        let inside = table.is_equilibrium(&profile);
        if inside && hitting_time.is_none() {
            hitting_time = Some(t);
        }
        if hitting_time.is_some() && !inside {
            left_after_hit = true;
        }
        trajectory.push(profile.clone());
    }
    Ok(OracleRun { trajectory, hitting_time, left_after_hit })
}

/// Convenience wrapper computing the table first.
pub fn run_oracle_dynamics(
    game: &GameSpec,
    set: &QuantizedPolicySet,
    eps: f64,
    revision_probs: &[f64],
    start: &[usize],
    max_steps: u64,
    seed: u64,
) -> Result<OracleRun> {
    let table = SatisfactionTable::compute(game, set, eps)?;
    run_oracle_dynamics_with_table(&table, revision_probs, start, max_steps, seed)
}

/// One transition of a satisficing path.
#[derive(Debug, Clone)]
pub struct PathStep {
    /// Players whose ordinal changed entering the next profile.
    pub changed: Vec<usize>,
    /// Satisfaction flags at the profile the step departs from.
    pub satisfied: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct SatisficingPath {
    pub profiles: Vec<PolicyProfileOrdinal>,
    pub steps: Vec<PathStep>,
}

/// Builds a subjective ε-satisficing path from `start` into the equilibrium
/// set by the cohort construction: maintain a set of identically-acting
/// players; an unsatisfied cohort adopts the policy of the lowest outsider
/// (growing the cohort), a satisfied cohort recruits the lowest unsatisfied
/// outsider, and a full unsatisfied cohort jumps to the lexicographically
/// smallest known equilibrium. Path length is at most N + 1 profiles.
pub fn construct_satisficing_path(
    game: &GameSpec,
    set: &QuantizedPolicySet,
    eps: f64,
    start: &[usize],
) -> Result<SatisficingPath> {
    let table = SatisfactionTable::compute(game, set, eps)?;
    construct_satisficing_path_with_table(&table, start)
}

pub fn construct_satisficing_path_with_table(
    table: &SatisfactionTable,
    start: &[usize],
) -> Result<SatisficingPath> {
    let n = table.n_players();
    if start.len() != n || start.iter().any(|&o| o >= table.set_size()) {
        return Err(Error::config("start profile malformed"));
    }
    let equilibria = table.equilibrium_profiles();
    let target = equilibria.first().cloned().ok_or_else(|| {
        Error::EmptyEquilibrium(
            "path construction requires a nonempty subjective ε-equilibrium set".to_string(),
        )
    })?;

    let mut profile = start.to_vec();
    // First cohort: the equality class of player 0's policy.
    let mut cohort: Vec<usize> = (0..n).filter(|&j| profile[j] == profile[0]).collect();
    let mut profiles = vec![profile.clone()];
    let mut steps = Vec::new();

    loop {
        let flags = table.satisfied(&profile).to_vec();
        if flags.iter().all(|&s| s) {
            return Ok(SatisficingPath { profiles, steps });
        }
        // Flag symmetry within the cohort (identical ordinals ⇒ identical
        // flags); a violation would break the construction's soundness.
        let cohort_flag = flags[cohort[0]];
        if cohort.iter().any(|&j| flags[j] != cohort_flag) {
            return Err(Error::structural(
                "satisfaction flags differ inside a cohort of identical policies",
            ));
        }

        let mut next = profile.clone();
        if cohort.len() == n {
            // Full unsatisfied cohort: everyone may move; jump to the known
            // equilibrium.
            next = target.clone();
        } else if !cohort_flag {
            // Sub-case (a): the cohort adopts the lowest outsider's policy.
            let p = (0..n).find(|j| !cohort.contains(j)).expect("proper subset");
            for &j in &cohort {
                next[j] = profile[p];
            }
            cohort = (0..n).filter(|&j| next[j] == next[p]).collect();
        } else {
            // Sub-case (b): recruit the lowest unsatisfied outsider into the
            // cohort, handing it the cohort's policy.
            let p = (0..n)
                .find(|j| !cohort.contains(j) && !flags[*j])
                .ok_or_else(|| {
                    Error::structural(
                        "satisfied cohort with no unsatisfied outsider in a non-equilibrium profile",
                    )
                })?;
            next[p] = profile[cohort[0]];
            cohort.push(p);
            cohort.sort_unstable();
        }
        let changed: Vec<usize> = (0..n).filter(|&j| next[j] != profile[j]).collect();
        steps.push(PathStep { changed, satisfied: flags });
        profile = next;
        profiles.push(profile.clone());
        if profiles.len() > n + 1 {
            return Err(Error::structural("path exceeded the N + 1 length bound"));
        }
    }
}

/// Outcome of validating a path against the exact oracles.
#[derive(Debug, Clone)]
pub struct PathReport {
    pub valid: bool,
    /// (step index, player) of the first satisfied-player change, if any.
    pub first_violation: Option<(usize, usize)>,
    pub terminal_in_set: bool,
}

/// Checks the satisficing implication (satisfied ⇒ unchanged) at every step
/// and whether the terminal profile is a subjective ε-equilibrium.
pub fn verify_satisficing_path(
    game: &GameSpec,
    set: &QuantizedPolicySet,
    eps: f64,
    path: &[Vec<usize>],
) -> Result<PathReport> {
    if path.is_empty() {
        return Err(Error::config("cannot verify an empty path"));
    }
    let table = SatisfactionTable::compute(game, set, eps)?;
    verify_satisficing_path_with_table(&table, path)
}

pub fn verify_satisficing_path_with_table(
    table: &SatisfactionTable,
    path: &[Vec<usize>],
) -> Result<PathReport> {
    if path.is_empty() {
        return Err(Error::config("cannot verify an empty path"));
    }
    let mut first_violation = None;
    'outer: for (k, pair) in path.windows(2).enumerate() {
        let flags = table.satisfied(&pair[0]);
        for i in 0..table.n_players() {
            if flags[i] && pair[1][i] != pair[0][i] {
                first_violation = Some((k, i));
                break 'outer;
            }
        }
    }
    let terminal_in_set = table.is_equilibrium(path.last().expect("nonempty"));
    Ok(PathReport { valid: first_violation.is_none(), first_violation, terminal_in_set })
}
