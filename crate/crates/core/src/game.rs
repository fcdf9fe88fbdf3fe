//! The finite partially observed N-player mean-field game model.
//!
//! Canonical enumeration orders, fixed once and used everywhere (tables,
//! CSV output, policy kernels):
//!
//! - Global states are ordered mixed-radix little-endian by player:
//!   `index = sum_i locals[i] * n_local_states^i`, so player 0 is the
//!   fastest-varying digit.
//! - Empirical measures are ordered lexicographically descending by count
//!   vector: for N=2 over two local states the order is (2,0), (1,1), (0,2).
//! - Observation ordinals per channel: Global uses the global state index;
//!   MeanField uses `local * |Emp_N| + emp_index`; Compressed uses
//!   `local * k + (class - 1)`; Local uses the local state itself.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ChannelTag, JointPolicy};

/// Row-sum tolerance for probability tables supplied at construction.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Constructors reject games with more than this many global states.
pub const MAX_GLOBAL_STATES: usize = 1_000_000;

/// One global state: the vector of all players' local states.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlobalState {
    pub locals: Vec<usize>,
}

impl GlobalState {
    pub fn new(locals: Vec<usize>) -> Self {
        GlobalState { locals }
    }

    pub fn n_players(&self) -> usize {
        self.locals.len()
    }
}

/// Exchanges the local states of players `i` and `j`; an involution.
pub fn swap_players(s: &GlobalState, i: usize, j: usize) -> GlobalState {
    let mut locals = s.locals.clone();
    locals.swap(i, j);
    GlobalState { locals }
}

/// An empirical measure over local states with exact count/N weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeanFieldState {
    /// Occupancy counts per local state; sums to N.
    pub counts: Vec<usize>,
    /// Canonical ordinal within the enumerated set `Emp_N`.
    pub index: usize,
}

impl MeanFieldState {
    /// Weight of local state `x` as an exact fraction numerator over N.
    pub fn weight(&self, x: usize, n_players: usize) -> f64 {
        self.counts[x] as f64 / n_players as f64
    }
}

/// All count vectors of N players over `n_local_states` local states, in the
/// canonical descending-lexicographic order.
pub fn enumerate_empirical_measures(n_players: usize, n_local_states: usize) -> Vec<Vec<usize>> {
    assert!(n_players >= 1 && n_local_states >= 1);
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n_local_states);
    fn rec(remaining: usize, parts_left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts_left == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in (0..=remaining).rev() {
            prefix.push(c);
            rec(remaining - c, parts_left - 1, prefix, out);
            prefix.pop();
        }
    }
    rec(n_players, n_local_states, &mut prefix, &mut out);
    out
}

/// The observation channel: which function of the global state each player
/// sees. All four variants are deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum ObservationChannel {
    Global,
    MeanField,
    /// `f_table[emp_index]` is the class label in `1..=k` assigned to the
    /// empirical measure with that canonical ordinal.
    Compressed { k: usize, f_table: Vec<usize> },
    Local,
}

/// A single observation together with its canonical ordinal in Y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    Global(GlobalState),
    MeanField { local: usize, emp: MeanFieldState },
    Compressed { local: usize, class: usize },
    Local(usize),
}

/// How the initial global state is distributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialDist {
    /// Probability vector over global states in canonical order.
    Global { probs: Vec<f64> },
    /// Independent per-player distributions over local states.
    Factored { per_player: Vec<Vec<f64>> },
    Uniform,
}

/// The full description of a finite N-player mean-field game.
///
/// Cost and transition tables are indexed by `(local state, empirical
/// measure ordinal, action)`; the enumerated `Emp_N` is the whole domain
/// the dynamics ever evaluate, so the finite tables are lossless.
#[derive(Debug, Clone)]
pub struct GameSpec {
    n_players: usize,
    n_local_states: usize,
    n_actions: usize,
    discount: f64,
    /// `cost[(x * n_emp + e) * n_actions + a]`
    cost: Vec<f64>,
    /// `transition[((x * n_emp + e) * n_actions + a) * n_local_states + x2]`
    transition: Vec<f64>,
    initial_dist: InitialDist,
    channel: ObservationChannel,
    emp_counts: Vec<Vec<usize>>,
    /// Cached `global state index -> empirical measure ordinal`.
    state_emp: Vec<usize>,
}

/// Serde form of a [`GameSpec`], used for the structured text config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameConfig {
    pub n_players: usize,
    pub n_local_states: usize,
    pub n_actions: usize,
    pub discount: f64,
    pub channel: ObservationChannel,
    /// `cost_table[x][e][a]` with `e` the canonical Emp_N ordinal.
    pub cost_table: Vec<Vec<Vec<f64>>>,
    /// `transition_table[x][e][a]` is a probability vector over next local
    /// states.
    pub transition_table: Vec<Vec<Vec<Vec<f64>>>>,
    pub initial_dist: InitialDist,
}

impl GameSpec {
    pub fn from_config(cfg: &GameConfig) -> Result<Self> {
        let n = cfg.n_players;
        let nx = cfg.n_local_states;
        let na = cfg.n_actions;
        if n == 0 || nx == 0 || na == 0 {
            return Err(Error::config("n_players, n_local_states, n_actions must be positive"));
        }
        if !(cfg.discount > 0.0 && cfg.discount < 1.0) {
            return Err(Error::config(format!("discount must lie in (0,1), got {}", cfg.discount)));
        }
        let n_states = nx
            .checked_pow(n as u32)
            .filter(|&v| v <= MAX_GLOBAL_STATES)
            .ok_or_else(|| {
                Error::guardrail(format!(
                    "global state space {nx}^{n} exceeds the {MAX_GLOBAL_STATES} cap"
                ))
            })?;

        let emp_counts = enumerate_empirical_measures(n, nx);
        let n_emp = emp_counts.len();
        let emp_index: HashMap<Vec<usize>, usize> = emp_counts
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, c)| (c, i))
            .collect();

        // Flatten and validate the tables.
        let mut cost = vec![0.0; nx * n_emp * na];
        let mut transition = vec![0.0; nx * n_emp * na * nx];
        if cfg.cost_table.len() != nx || cfg.transition_table.len() != nx {
            return Err(Error::config("cost/transition tables must have n_local_states rows"));
        }
        for x in 0..nx {
            if cfg.cost_table[x].len() != n_emp || cfg.transition_table[x].len() != n_emp {
                return Err(Error::config(format!(
                    "tables for local state {x} must have one entry per empirical measure ({n_emp})"
                )));
            }
            for e in 0..n_emp {
                if cfg.cost_table[x][e].len() != na || cfg.transition_table[x][e].len() != na {
                    return Err(Error::config("tables must have one entry per action"));
                }
                for a in 0..na {
                    let c = cfg.cost_table[x][e][a];
                    if !c.is_finite() {
                        return Err(Error::config(format!("cost({x},{e},{a}) is not finite")));
                    }
                    cost[(x * n_emp + e) * na + a] = c;
                    let row = &cfg.transition_table[x][e][a];
                    if row.len() != nx {
                        return Err(Error::config("transition rows must cover all local states"));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&p| p < 0.0) {
                        return Err(Error::config(format!(
                            "transition row ({x},{e},{a}) is not a probability vector (sum {sum})"
                        )));
                    }
                    let base = ((x * n_emp + e) * na + a) * nx;
                    transition[base..base + nx].copy_from_slice(row);
                }
            }
        }

        match &cfg.initial_dist {
            InitialDist::Global { probs } => {
                if probs.len() != n_states {
                    return Err(Error::config(format!(
                        "initial_dist.probs must have length {n_states}"
                    )));
                }
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL || probs.iter().any(|&p| p < 0.0) {
                    return Err(Error::config("initial_dist.probs is not a probability vector"));
                }
            }
            InitialDist::Factored { per_player } => {
                if per_player.len() != n {
                    return Err(Error::config("factored initial_dist needs one row per player"));
                }
                for row in per_player {
                    if row.len() != nx {
                        return Err(Error::config("factored initial rows must cover local states"));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&p| p < 0.0) {
                        return Err(Error::config("factored initial row is not a probability vector"));
                    }
                }
            }
            InitialDist::Uniform => {}
        }

        if let ObservationChannel::Compressed { k, f_table } = &cfg.channel {
            if *k == 0 {
                return Err(Error::config("compressed channel requires k >= 1"));
            }
            if f_table.len() != n_emp {
                return Err(Error::config(format!(
                    "compressed f_table must label all {n_emp} empirical measures"
                )));
            }
            if f_table.iter().any(|&c| c < 1 || c > *k) {
                return Err(Error::config("compressed f_table labels must lie in 1..=k"));
            }
        }

        let mut state_emp = vec![0usize; n_states];
        let mut counts = vec![0usize; nx];
        let mut locals = vec![0usize; n];
        for (idx, slot) in state_emp.iter_mut().enumerate() {
            decode_state(idx, n, nx, &mut locals);
            counts.iter_mut().for_each(|c| *c = 0);
            for &x in &locals {
                counts[x] += 1;
            }
            *slot = emp_index[&counts];
        }

        Ok(GameSpec {
            n_players: n,
            n_local_states: nx,
            n_actions: na,
            discount: cfg.discount,
            cost,
            transition,
            initial_dist: cfg.initial_dist.clone(),
            channel: cfg.channel.clone(),
            emp_counts,
            state_emp,
        })
    }

    pub fn load_toml(text: &str) -> Result<Self> {
        let cfg: GameConfig = toml::from_str(text)?;
        Self::from_config(&cfg)
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn n_local_states(&self) -> usize {
        self.n_local_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn channel(&self) -> &ObservationChannel {
        &self.channel
    }

    pub fn initial_dist(&self) -> &InitialDist {
        &self.initial_dist
    }

    pub fn n_global_states(&self) -> usize {
        self.state_emp.len()
    }

    pub fn n_empirical_measures(&self) -> usize {
        self.emp_counts.len()
    }

    pub fn empirical_counts(&self) -> &[Vec<usize>] {
        &self.emp_counts
    }

    /// Sup norm of the stage cost table.
    pub fn cost_sup_norm(&self) -> f64 {
        self.cost.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Replaces the observation channel; tables are channel-independent.
    pub fn with_channel(&self, channel: ObservationChannel) -> Result<Self> {
        if let ObservationChannel::Compressed { k, f_table } = &channel {
            if *k == 0 || f_table.len() != self.n_empirical_measures() {
                return Err(Error::config("compressed f_table must label every empirical measure"));
            }
            if f_table.iter().any(|&c| c < 1 || c > *k) {
                return Err(Error::config("compressed f_table labels must lie in 1..=k"));
            }
        }
        let mut g = self.clone();
        g.channel = channel;
        Ok(g)
    }

    // ---- canonical enumerations ----

    pub fn state_index(&self, s: &GlobalState) -> usize {
        debug_assert_eq!(s.locals.len(), self.n_players);
        let mut idx = 0;
        for &x in s.locals.iter().rev() {
            debug_assert!(x < self.n_local_states);
            idx = idx * self.n_local_states + x;
        }
        idx
    }

    pub fn state_from_index(&self, idx: usize) -> GlobalState {
        let mut locals = vec![0usize; self.n_players];
        decode_state(idx, self.n_players, self.n_local_states, &mut locals);
        GlobalState { locals }
    }

    pub fn emp_ordinal_of_state_index(&self, idx: usize) -> usize {
        self.state_emp[idx]
    }

    pub fn mean_field_state(&self, index: usize) -> MeanFieldState {
        MeanFieldState {
            counts: self.emp_counts[index].clone(),
            index,
        }
    }

    /// The empirical measure of a global state; permutation invariant.
    pub fn empirical_measure(&self, s: &GlobalState) -> MeanFieldState {
        let idx = self.state_emp[self.state_index(s)];
        self.mean_field_state(idx)
    }

    // ---- tables ----

    pub fn cost_value(&self, local: usize, emp: usize, action: usize) -> f64 {
        self.cost[(local * self.emp_counts.len() + emp) * self.n_actions + action]
    }

    /// Probability vector over next local states.
    pub fn transition_row(&self, local: usize, emp: usize, action: usize) -> &[f64] {
        let nx = self.n_local_states;
        let base = ((local * self.emp_counts.len() + emp) * self.n_actions + action) * nx;
        &self.transition[base..base + nx]
    }

    // ---- observation channel ----

    /// Size of the observation space Y for this game's channel.
    pub fn n_observations(&self) -> usize {
        match &self.channel {
            ObservationChannel::Global => self.n_global_states(),
            ObservationChannel::MeanField => self.n_local_states * self.emp_counts.len(),
            ObservationChannel::Compressed { k, .. } => self.n_local_states * k,
            ObservationChannel::Local => self.n_local_states,
        }
    }

    pub fn channel_tag(&self) -> ChannelTag {
        ChannelTag::of(&self.channel, self.n_observations())
    }

    /// Canonical ordinal of player `player`'s observation of state index `idx`.
    pub fn observe_ordinal_of_index(&self, player: usize, idx: usize) -> usize {
        let local = self.local_of(idx, player);
        match &self.channel {
            ObservationChannel::Global => idx,
            ObservationChannel::MeanField => local * self.emp_counts.len() + self.state_emp[idx],
            ObservationChannel::Compressed { k, f_table } => {
                local * k + (f_table[self.state_emp[idx]] - 1)
            }
            ObservationChannel::Local => local,
        }
    }

    pub fn observe_ordinal(&self, player: usize, s: &GlobalState) -> usize {
        self.observe_ordinal_of_index(player, self.state_index(s))
    }

    /// Player `player`'s observation of global state `s`.
    pub fn observe(&self, player: usize, s: &GlobalState) -> Observation {
        assert!(player < self.n_players, "player index out of range");
        let idx = self.state_index(s);
        match &self.channel {
            ObservationChannel::Global => Observation::Global(s.clone()),
            ObservationChannel::MeanField => Observation::MeanField {
                local: s.locals[player],
                emp: self.mean_field_state(self.state_emp[idx]),
            },
            ObservationChannel::Compressed { f_table, .. } => Observation::Compressed {
                local: s.locals[player],
                class: f_table[self.state_emp[idx]],
            },
            ObservationChannel::Local => Observation::Local(s.locals[player]),
        }
    }

    fn local_of(&self, idx: usize, player: usize) -> usize {
        (idx / self.n_local_states.pow(player as u32)) % self.n_local_states
    }

    // ---- dynamics ----

    /// Samples the initial global state.
    pub fn sample_initial<R: Rng>(&self, rng: &mut R) -> GlobalState {
        match &self.initial_dist {
            InitialDist::Global { probs } => self.state_from_index(sample_index(probs, rng)),
            InitialDist::Factored { per_player } => GlobalState {
                locals: per_player.iter().map(|row| sample_index(row, rng)).collect(),
            },
            InitialDist::Uniform => self.state_from_index(rng.gen_range(0..self.n_global_states())),
        }
    }

    /// The initial distribution as a dense vector over global states.
    pub fn initial_dist_vec(&self) -> Vec<f64> {
        let n_states = self.n_global_states();
        match &self.initial_dist {
            InitialDist::Global { probs } => probs.clone(),
            InitialDist::Factored { per_player } => {
                let mut out = vec![0.0; n_states];
                let mut locals = vec![0usize; self.n_players];
                for (idx, slot) in out.iter_mut().enumerate() {
                    decode_state(idx, self.n_players, self.n_local_states, &mut locals);
                    *slot = locals
                        .iter()
                        .enumerate()
                        .map(|(i, &x)| per_player[i][x])
                        .product();
                }
                out
            }
            InitialDist::Uniform => vec![1.0 / n_states as f64; n_states],
        }
    }

    /// Advances the game one stage. Each player's next local state is drawn
    /// independently from its local kernel; the stage costs are returned per
    /// player. Makes exactly N rng draws, in player order.
    pub fn step<R: Rng>(
        &self,
        s: &GlobalState,
        joint_action: &[usize],
        rng: &mut R,
    ) -> (GlobalState, Vec<f64>) {
        debug_assert_eq!(joint_action.len(), self.n_players);
        let emp = self.state_emp[self.state_index(s)];
        let mut next = Vec::with_capacity(self.n_players);
        let mut costs = Vec::with_capacity(self.n_players);
        for i in 0..self.n_players {
            let (x, a) = (s.locals[i], joint_action[i]);
            costs.push(self.cost_value(x, emp, a));
            next.push(sample_index(self.transition_row(x, emp, a), rng));
        }
        (GlobalState { locals: next }, costs)
    }

    /// Per-player closed-loop local transition row at global state `idx`:
    /// the law of player `i`'s next local state with its action marginalized
    /// under `policy`.
    pub fn closed_loop_local_row(
        &self,
        idx: usize,
        player: usize,
        policy: &crate::policy::StationaryPolicy,
    ) -> Vec<f64> {
        let y = self.observe_ordinal_of_index(player, idx);
        let x = self.local_of(idx, player);
        let emp = self.state_emp[idx];
        let mut row = vec![0.0; self.n_local_states];
        for a in 0..self.n_actions {
            let pa = policy.prob(y, a);
            if pa == 0.0 {
                continue;
            }
            for (x2, slot) in row.iter_mut().enumerate() {
                *slot += pa * self.transition_row(x, emp, a)[x2];
            }
        }
        row
    }

    /// The exact Markov kernel on the global state space induced by a
    /// stationary joint policy. Entry `(s, s')` factorizes over players
    /// because actions and local transitions are conditionally independent
    /// given the current global state.
    pub fn exact_chain_kernel(&self, joint: &JointPolicy) -> Result<Vec<Vec<f64>>> {
        self.check_joint(joint)?;
        let n_states = self.n_global_states();
        let nx = self.n_local_states;
        let mut kernel = vec![vec![0.0; n_states]; n_states];
        let mut locals = vec![0usize; self.n_players];
        for (idx, out_row) in kernel.iter_mut().enumerate() {
            let per_player: Vec<Vec<f64>> = (0..self.n_players)
                .map(|i| self.closed_loop_local_row(idx, i, joint.player(i)))
                .collect();
            for (idx2, slot) in out_row.iter_mut().enumerate() {
                decode_state(idx2, self.n_players, nx, &mut locals);
                *slot = locals
                    .iter()
                    .enumerate()
                    .map(|(i, &x2)| per_player[i][x2])
                    .product();
            }
        }
        Ok(kernel)
    }

    /// Rejects joints whose shape or channel does not match this game.
    pub fn check_joint(&self, joint: &JointPolicy) -> Result<()> {
        if joint.n_players() != self.n_players {
            return Err(Error::config(format!(
                "joint policy has {} players, game has {}",
                joint.n_players(),
                self.n_players
            )));
        }
        let tag = self.channel_tag();
        for i in 0..self.n_players {
            let p = joint.player(i);
            if p.channel_tag() != tag || p.n_actions() != self.n_actions {
                return Err(Error::config(format!(
                    "player {i} policy is defined on a different observation/action space"
                )));
            }
        }
        Ok(())
    }
}

fn decode_state(idx: usize, n_players: usize, n_local: usize, out: &mut [usize]) {
    let mut rem = idx;
    for slot in out.iter_mut().take(n_players) {
        *slot = rem % n_local;
        rem /= n_local;
    }
}

/// Samples an index from a probability vector with a single uniform draw.
pub fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
