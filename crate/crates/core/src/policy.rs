//! Stationary policies, policy metrics, symmetry predicates, and finite
//! quantizations of the policy space.
//!
//! A policy is a row-stochastic table indexed by observation ordinal. The
//! attached [`ChannelTag`] records which observation space the rows live on,
//! so cross-channel mixups fail loudly instead of silently misindexing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{sample_index, GameSpec, ObservationChannel};

/// Tolerance under which two kernels count as equal.
pub const KERNEL_EQ_TOL: f64 = 1e-12;

/// Default cap on quantized-set cardinality.
pub const MAX_QUANTIZED_SET: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    Global,
    MeanField,
    Compressed,
    Local,
}

/// Identity of an observation space: channel family plus its size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelTag {
    pub kind: ChannelKind,
    pub n_observations: usize,
}

impl ChannelTag {
    pub fn of(channel: &ObservationChannel, n_observations: usize) -> Self {
        let kind = match channel {
            ObservationChannel::Global => ChannelKind::Global,
            ObservationChannel::MeanField => ChannelKind::MeanField,
            ObservationChannel::Compressed { .. } => ChannelKind::Compressed,
            ObservationChannel::Local => ChannelKind::Local,
        };
        ChannelTag { kind, n_observations }
    }
}

/// A stationary policy: one action distribution per observation ordinal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    channel_tag: ChannelTag,
    /// Observation-major: `rows[y][a]`.
    rows: Vec<Vec<f64>>,
}

impl StationaryPolicy {
    pub fn from_rows(channel_tag: ChannelTag, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != channel_tag.n_observations {
            return Err(Error::config(format!(
                "policy has {} rows, channel has {} observations",
                rows.len(),
                channel_tag.n_observations
            )));
        }
        let n_actions = rows.first().map_or(0, Vec::len);
        if n_actions == 0 {
            return Err(Error::config("policy needs at least one action"));
        }
        for (y, row) in rows.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::config("ragged policy rows"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > KERNEL_EQ_TOL || row.iter().any(|&p| p < 0.0) {
                return Err(Error::config(format!(
                    "policy row {y} is not a probability vector (sum {sum})"
                )));
            }
        }
        Ok(StationaryPolicy { channel_tag, rows })
    }

    pub fn uniform(channel_tag: ChannelTag, n_actions: usize) -> Self {
        let row = vec![1.0 / n_actions as f64; n_actions];
        StationaryPolicy {
            channel_tag,
            rows: vec![row; channel_tag.n_observations],
        }
    }

    /// The deterministic policy choosing `choice[y]` at observation `y`.
    pub fn deterministic(channel_tag: ChannelTag, n_actions: usize, choice: &[usize]) -> Self {
        assert_eq!(choice.len(), channel_tag.n_observations);
        let rows = choice
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; n_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        StationaryPolicy { channel_tag, rows }
    }

    pub fn channel_tag(&self) -> ChannelTag {
        self.channel_tag
    }

    pub fn n_observations(&self) -> usize {
        self.rows.len()
    }

    pub fn n_actions(&self) -> usize {
        self.rows[0].len()
    }

    pub fn prob(&self, y: usize, a: usize) -> f64 {
        self.rows[y][a]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.rows[y]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn sample<R: Rng>(&self, y: usize, rng: &mut R) -> usize {
        sample_index(&self.rows[y], rng)
    }
}

/// d^i: max over (y, a) of the absolute kernel difference.
pub fn policy_distance(p: &StationaryPolicy, q: &StationaryPolicy) -> Result<f64> {
    if p.channel_tag != q.channel_tag || p.n_actions() != q.n_actions() {
        return Err(Error::config("policy_distance across different spaces"));
    }
    let mut d: f64 = 0.0;
    for (pr, qr) in p.rows.iter().zip(&q.rows) {
        for (&a, &b) in pr.iter().zip(qr) {
            d = d.max((a - b).abs());
        }
    }
    Ok(d)
}

/// True iff every kernel entry is at least `xi`.
pub fn is_soft(p: &StationaryPolicy, xi: f64) -> bool {
    assert!(xi > 0.0, "softness level must be positive");
    p.rows.iter().all(|row| row.iter().all(|&v| v >= xi))
}

/// One policy per player, all on the same observation space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPolicy {
    players: Vec<StationaryPolicy>,
}

impl JointPolicy {
    pub fn new(players: Vec<StationaryPolicy>) -> Self {
        assert!(!players.is_empty());
        let tag = players[0].channel_tag;
        assert!(
            players.iter().all(|p| p.channel_tag == tag),
            "joint policy mixes observation spaces"
        );
        JointPolicy { players }
    }

    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    pub fn player(&self, i: usize) -> &StationaryPolicy {
        &self.players[i]
    }

    pub fn players(&self) -> &[StationaryPolicy] {
        &self.players
    }

    pub fn with_player(&self, i: usize, p: StationaryPolicy) -> Self {
        assert_eq!(p.channel_tag, self.players[0].channel_tag);
        let mut players = self.players.clone();
        players[i] = p;
        JointPolicy { players }
    }

    /// True iff every player's policy is `xi`-soft.
    pub fn is_soft(&self, xi: f64) -> bool {
        self.players.iter().all(|p| is_soft(p, xi))
    }

    /// The least kernel entry across all players.
    pub fn min_entry(&self) -> f64 {
        self.players
            .iter()
            .flat_map(|p| p.rows.iter())
            .flat_map(|row| row.iter())
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// d: max over players of the per-player distance.
pub fn joint_distance(p: &JointPolicy, q: &JointPolicy) -> Result<f64> {
    if p.n_players() != q.n_players() {
        return Err(Error::config("joint_distance across different player counts"));
    }
    let mut d: f64 = 0.0;
    for (a, b) in p.players.iter().zip(&q.players) {
        d = d.max(policy_distance(a, b)?);
    }
    Ok(d)
}

// ---- mean-field type: projection, lifting, symmetry ----

/// The base observation space shared by all players on which symmetry is
/// judged: `X_loc × Emp_N` ordinals for the Global and MeanField channels,
/// and the channel's own Y for Compressed/Local (already player-independent).
fn mean_field_tag(game: &GameSpec) -> ChannelTag {
    ChannelTag {
        kind: ChannelKind::MeanField,
        n_observations: game.n_local_states() * game.n_empirical_measures(),
    }
}

/// A pair `(x, e)` is consistent if some global state has a player at local
/// state `x` while the occupancy counts have ordinal `e`.
fn consistent(game: &GameSpec, x: usize, e: usize) -> bool {
    game.empirical_counts()[e][x] >= 1
}

/// Projects player `player`'s Global-channel policy to a kernel on
/// `X_loc × Emp_N`, failing if the policy depends on anything beyond
/// `(s^i, μ(s))`. Inconsistent `(x, e)` pairs get uniform rows.
pub fn project_mean_field(
    game: &GameSpec,
    player: usize,
    p: &StationaryPolicy,
) -> Result<StationaryPolicy> {
    if p.channel_tag.kind != ChannelKind::Global
        || p.channel_tag.n_observations != game.n_global_states()
    {
        return Err(Error::config("project_mean_field expects a Global-channel policy"));
    }
    let n_emp = game.n_empirical_measures();
    let na = p.n_actions();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; game.n_local_states() * n_emp];
    for idx in 0..game.n_global_states() {
        let s = game.state_from_index(idx);
        let class = s.locals[player] * n_emp + game.emp_ordinal_of_state_index(idx);
        match &rows[class] {
            None => rows[class] = Some(p.rows[idx].clone()),
            Some(existing) => {
                let same = existing
                    .iter()
                    .zip(&p.rows[idx])
                    .all(|(&a, &b)| (a - b).abs() <= KERNEL_EQ_TOL);
                if !same {
                    return Err(Error::structural(format!(
                        "policy is not of mean-field type: rows differ within class ({}, {})",
                        s.locals[player],
                        game.emp_ordinal_of_state_index(idx)
                    )));
                }
            }
        }
    }
    let rows = rows
        .into_iter()
        .map(|r| r.unwrap_or_else(|| vec![1.0 / na as f64; na]))
        .collect();
    StationaryPolicy::from_rows(mean_field_tag(game), rows)
}

/// Lifts a kernel on `X_loc × Emp_N` to player `player`'s Global-channel
/// policy: `lifted(·|s) = kernel(·|s^player, μ(s))`.
pub fn lift_mean_field_policy(
    game: &GameSpec,
    kernel: &StationaryPolicy,
    player: usize,
) -> Result<StationaryPolicy> {
    let n_emp = game.n_empirical_measures();
    if kernel.n_observations() != game.n_local_states() * n_emp {
        return Err(Error::config(
            "mean-field kernel must have one row per (local state, empirical measure)",
        ));
    }
    let tag = ChannelTag {
        kind: ChannelKind::Global,
        n_observations: game.n_global_states(),
    };
    let rows = (0..game.n_global_states())
        .map(|idx| {
            let s = game.state_from_index(idx);
            kernel.rows[s.locals[player] * n_emp + game.emp_ordinal_of_state_index(idx)].clone()
        })
        .collect();
    StationaryPolicy::from_rows(tag, rows)
}

/// Mean-field symmetry of two players' policies. On the Global channel both
/// are first projected (erroring if either is not of mean-field type) and
/// the projections are compared only on consistent `(x, e)` pairs; on every
/// other channel the observation ordinals already coincide across players,
/// so symmetry is plain kernel equality.
pub fn is_mean_field_symmetric(
    game: &GameSpec,
    player_p: usize,
    p: &StationaryPolicy,
    player_q: usize,
    q: &StationaryPolicy,
) -> Result<bool> {
    if p.channel_tag != q.channel_tag {
        return Err(Error::config("symmetry test across different observation spaces"));
    }
    if p.channel_tag.kind != ChannelKind::Global {
        return Ok(policy_distance(p, q)? <= KERNEL_EQ_TOL);
    }
    let kp = project_mean_field(game, player_p, p)?;
    let kq = project_mean_field(game, player_q, q)?;
    let n_emp = game.n_empirical_measures();
    for x in 0..game.n_local_states() {
        for e in 0..n_emp {
            if !consistent(game, x, e) {
                continue;
            }
            let (rp, rq) = (&kp.rows[x * n_emp + e], &kq.rows[x * n_emp + e]);
            if rp.iter().zip(rq).any(|(&a, &b)| (a - b).abs() > KERNEL_EQ_TOL) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// True iff all players other than `player` hold pairwise mean-field
/// symmetric policies.
pub fn others_mean_field_symmetric(
    game: &GameSpec,
    player: usize,
    joint: &JointPolicy,
) -> Result<bool> {
    let others: Vec<usize> = (0..joint.n_players()).filter(|&j| j != player).collect();
    for w in others.windows(2) {
        let (i, j) = (w[0], w[1]);
        if !is_mean_field_symmetric(game, i, joint.player(i), j, joint.player(j))? {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---- quantization ----

/// A finite, shared, soft subset of the stationary policy space.
///
/// Members are stored on the base observation space: the channel's own Y
/// for MeanField/Compressed/Local games, and `X_loc × Emp_N` for Global
/// games (where each member must be lifted per player before play). Storing
/// the base kernel keeps the set literally identical across players, so
/// ordinal equality is exactly the channel's symmetry notion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantizedPolicySet {
    base: Vec<StationaryPolicy>,
    base_tag: ChannelTag,
    lift_to_global: bool,
    resolution: usize,
    softness_floor: f64,
    /// Observations carrying the full grid; all others are pinned uniform.
    support: Vec<usize>,
}

impl QuantizedPolicySet {
    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn softness_floor(&self) -> f64 {
        self.softness_floor
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn base_member(&self, ordinal: usize) -> &StationaryPolicy {
        &self.base[ordinal]
    }

    pub fn members(&self) -> &[StationaryPolicy] {
        &self.base
    }

    /// Guaranteed covering radius 1/m + ξ_soft·|U| (over the supported
    /// observations).
    pub fn covering_radius(&self) -> f64 {
        let na = self.base[0].n_actions() as f64;
        1.0 / self.resolution as f64 + self.softness_floor * na
    }

    /// The playable policy for `player` holding member `ordinal`.
    pub fn policy_for_player(
        &self,
        game: &GameSpec,
        ordinal: usize,
        player: usize,
    ) -> Result<StationaryPolicy> {
        let base = self
            .base
            .get(ordinal)
            .ok_or_else(|| Error::config(format!("policy ordinal {ordinal} out of range")))?;
        if self.lift_to_global {
            lift_mean_field_policy(game, base, player)
        } else {
            Ok(base.clone())
        }
    }

    /// Assembles the joint policy for a per-player ordinal profile.
    pub fn joint(&self, game: &GameSpec, ordinals: &[usize]) -> Result<JointPolicy> {
        if ordinals.len() != game.n_players() {
            return Err(Error::config("profile length must equal player count"));
        }
        let players = ordinals
            .iter()
            .enumerate()
            .map(|(i, &o)| self.policy_for_player(game, o, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(JointPolicy::new(players))
    }

    /// Ordinal of the member nearest to `p` (on the base space).
    pub fn nearest(&self, p: &StationaryPolicy) -> Result<(usize, f64)> {
        let mut best = (0usize, f64::INFINITY);
        for (i, q) in self.base.iter().enumerate() {
            let d = policy_distance(p, q)?;
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best)
    }
}

/// All compositions of `total` into `parts` nonnegative integers, used as
/// the simplex grid numerators.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(parts);
    fn rec(rem: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 1 {
            prefix.push(rem);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in (0..=rem).rev() {
            prefix.push(c);
            rec(rem - c, left - 1, prefix, out);
            prefix.pop();
        }
    }
    rec(total, parts, &mut prefix, &mut out);
    out
}

/// Builds the shared ξ-quantization for `game`'s channel.
///
/// Per supported observation the action distributions are the simplex grid
/// with mesh 1/m, mixed with the uniform distribution at weight
/// λ = ξ_soft·|U|; unsupported observations are pinned to uniform. The
/// member list is the product over supported observations, capped at
/// [`MAX_QUANTIZED_SET`]. Resolution m = 1 keeps only the barycenter, so
/// the set degenerates to the single uniform policy.
///
/// `restrict_support`: observations (base-space ordinals) that carry the
/// grid; `None` means all of them.
pub fn build_quantization(
    game: &GameSpec,
    resolution: usize,
    softness_floor: f64,
    restrict_support: Option<&[usize]>,
) -> Result<QuantizedPolicySet> {
    let na = game.n_actions();
    if resolution < 1 {
        return Err(Error::config("quantization resolution must be at least 1"));
    }
    if softness_floor < 0.0 || softness_floor >= 1.0 / na as f64 {
        return Err(Error::config(format!(
            "softness floor must lie in [0, 1/{na})"
        )));
    }
    let lift_to_global = matches!(game.channel(), ObservationChannel::Global);
    let base_tag = if lift_to_global {
        mean_field_tag(game)
    } else {
        game.channel_tag()
    };
    let n_obs = base_tag.n_observations;

    let support: Vec<usize> = match restrict_support {
        Some(list) => {
            let mut list = list.to_vec();
            list.sort_unstable();
            list.dedup();
            if list.iter().any(|&y| y >= n_obs) {
                return Err(Error::config("restricted support ordinal out of range"));
            }
            list
        }
        None => (0..n_obs).collect(),
    };

    let lambda = softness_floor * na as f64;
    let atoms: Vec<Vec<f64>> = if resolution == 1 {
        vec![vec![1.0 / na as f64; na]]
    } else {
        compositions(resolution, na)
            .into_iter()
            .map(|c| {
                c.into_iter()
                    .map(|j| (1.0 - lambda) * j as f64 / resolution as f64 + lambda / na as f64)
                    .collect()
            })
            .collect()
    };

    let mut size: usize = 1;
    for _ in &support {
        size = size
            .checked_mul(atoms.len())
            .filter(|&v| v <= MAX_QUANTIZED_SET)
            .ok_or_else(|| {
                Error::guardrail(format!(
                    "quantized set would exceed {MAX_QUANTIZED_SET} members \
                     ({} atoms over {} observations)",
                    atoms.len(),
                    support.len()
                ))
            })?;
    }

    let uniform_row = vec![1.0 / na as f64; na];
    let mut base = Vec::with_capacity(size);
    // Mixed-radix little-endian over the support list: the atom choice for
    // support[0] varies fastest.
    for member in 0..size {
        let mut rows = vec![uniform_row.clone(); n_obs];
        let mut rem = member;
        for &y in &support {
            rows[y] = atoms[rem % atoms.len()].clone();
            rem /= atoms.len();
        }
        base.push(StationaryPolicy::from_rows(base_tag, rows)?);
    }

    Ok(QuantizedPolicySet {
        base,
        base_tag,
        lift_to_global,
        resolution,
        softness_floor,
        support,
    })
}
