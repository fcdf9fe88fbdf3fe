//! Tabular learning under partial observation: naive Q/value learning
//! against fixed stationary co-players, and phase-based independent
//! learning with satisficing tests and randomized policy revision.
//!
//! Determinism contract: one environment stream drives the global chain
//! (the initial state comes from its own stream), and each player draws
//! actions and revisions from private streams split off the run seed, so
//! adding players or diagnostics never perturbs existing trajectories.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{GameSpec, GlobalState};
use crate::policy::{JointPolicy, QuantizedPolicySet};
use crate::seeds::{derive_rng, purpose};

/// One player's learned tables and visit counters.
///
/// Invariant: Σ_a n_counts(y,a) = m_counts(y) after every update, and the
/// tables are zero wherever the counters are (reset semantics).
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub q_hat: Vec<Vec<f64>>,
    pub j_hat: Vec<f64>,
    pub n_counts: Vec<Vec<u64>>,
    pub m_counts: Vec<u64>,
    pub current_policy_ordinal: usize,
}

impl LearnerState {
    pub fn new(n_observations: usize, n_actions: usize) -> Self {
        LearnerState {
            q_hat: vec![vec![0.0; n_actions]; n_observations],
            j_hat: vec![0.0; n_observations],
            n_counts: vec![vec![0; n_actions]; n_observations],
            m_counts: vec![0; n_observations],
            current_policy_ordinal: 0,
        }
    }

    /// Zeroes tables and counters (the between-phase reset).
    pub fn reset(&mut self) {
        self.q_hat.iter_mut().flatten().for_each(|v| *v = 0.0);
        self.j_hat.iter_mut().for_each(|v| *v = 0.0);
        self.n_counts.iter_mut().flatten().for_each(|v| *v = 0);
        self.m_counts.iter_mut().for_each(|v| *v = 0);
    }

    /// Registers a visit to (y, u), incrementing both counters.
    pub fn visit(&mut self, y: usize, u: usize) {
        self.n_counts[y][u] += 1;
        self.m_counts[y] += 1;
    }
}

/// Q̄_{t+1}(y,u) = (1 − 1/n)Q̄(y,u) + (1/n)(c + β·min_a Q̄(y',a)).
///
/// The visit counter for (y, u) must already be incremented. The min runs
/// over all actions including unvisited ones (optimistic-zero entries);
/// ties break to the lowest action ordinal.
pub fn q_update(state: &mut LearnerState, y: usize, u: usize, cost: f64, y_next: usize, beta: f64) {
    let n = state.n_counts[y][u] as f64;
    debug_assert!(n >= 1.0, "visit before updating");
    let min_next = state.q_hat[y_next]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    state.q_hat[y][u] = (1.0 - 1.0 / n) * state.q_hat[y][u] + (cost + beta * min_next) / n;
}

/// J̄_{t+1}(y) = (1 − 1/m)J̄(y) + (1/m)(c + β·J̄(y')).
pub fn j_update(state: &mut LearnerState, y: usize, cost: f64, y_next: usize, beta: f64) {
    let m = state.m_counts[y] as f64;
    debug_assert!(m >= 1.0, "visit before updating");
    state.j_hat[y] = (1.0 - 1.0 / m) * state.j_hat[y] + (cost + beta * state.j_hat[y_next]) / m;
}

/// End-of-phase satisficing test:
/// Ĵ(y) ≤ min_a Q̂(y,a) + ε + d at every visited observation.
///
/// `strict_over`: when given, the test additionally fails if any listed
/// observation was never visited during the phase (strict-visitation runs
/// pass the reachable set φ^i(X) here).
pub fn satisficing_test(
    state: &LearnerState,
    eps: f64,
    d: f64,
    strict_over: Option<&[usize]>,
) -> bool {
    if let Some(required) = strict_over {
        if required.iter().any(|&y| state.m_counts[y] == 0) {
            return false;
        }
    }
    state
        .j_hat
        .iter()
        .enumerate()
        .filter(|&(y, _)| state.m_counts[y] > 0)
        .all(|(y, &j)| {
            let qmin = state.q_hat[y].iter().cloned().fold(f64::INFINITY, f64::min);
            j <= qmin + eps + d
        })
}

/// Environment/player random streams for one run.
struct RunRngs {
    env: ChaCha8Rng,
    actions: Vec<ChaCha8Rng>,
    revisions: Vec<ChaCha8Rng>,
}

impl RunRngs {
    fn new(seed: u64, n_players: usize) -> Self {
        RunRngs {
            env: derive_rng(seed, &[purpose::ENV]),
            actions: (0..n_players)
                .map(|i| derive_rng(seed, &[purpose::ACTION, i as u64]))
                .collect(),
            revisions: (0..n_players)
                .map(|i| derive_rng(seed, &[purpose::REVISION, i as u64]))
                .collect(),
        }
    }
}

/// Simulates `steps` stages of play under `joint`, feeding every player's
/// learner. The shared loop behind both algorithms.
fn run_phase(
    game: &GameSpec,
    joint: &JointPolicy,
    steps: u64,
    state: &mut GlobalState,
    learners: &mut [LearnerState],
    rngs: &mut RunRngs,
) {
    let n = game.n_players();
    let beta = game.discount();
    let mut obs: Vec<usize> = (0..n).map(|i| game.observe_ordinal(i, state)).collect();
    let mut actions = vec![0usize; n];
    for _ in 0..steps {
        for i in 0..n {
            actions[i] = joint.player(i).sample(obs[i], &mut rngs.actions[i]);
        }
        let (next, costs) = game.step(state, &actions, &mut rngs.env);
        for i in 0..n {
            let y_next = game.observe_ordinal(i, &next);
            learners[i].visit(obs[i], actions[i]);
            q_update(&mut learners[i], obs[i], actions[i], costs[i], y_next, beta);
            j_update(&mut learners[i], obs[i], costs[i], y_next, beta);
            obs[i] = y_next;
        }
        *state = next;
    }
}

/// Final tables of a naive-learning run, plus periodic snapshots of the
/// (Q̄, J̄) tables when requested.
pub struct NaiveLearningOutput {
    pub players: Vec<LearnerState>,
    pub snapshots: Vec<(u64, Vec<(Vec<Vec<f64>>, Vec<f64>)>)>,
}

/// Fixed-play learning: every player learns from its own observation stream
/// while the joint policy stays fixed; counters never reset.
pub fn run_naive_learning(
    game: &GameSpec,
    joint: &JointPolicy,
    steps: u64,
    seed: u64,
    snapshot_every: Option<u64>,
) -> Result<NaiveLearningOutput> {
    game.check_joint(joint)?;
    if joint.min_entry() <= 0.0 {
        return Err(Error::structural(
            "naive learning requires a soft joint policy",
        ));
    }
    let n = game.n_players();
    let mut rngs = RunRngs::new(seed, n);
    let mut init_rng = derive_rng(seed, &[purpose::INIT_STATE]);
    let mut state = game.sample_initial(&mut init_rng);
    let mut learners: Vec<LearnerState> = (0..n)
        .map(|_| LearnerState::new(game.n_observations(), game.n_actions()))
        .collect();
    let mut snapshots = Vec::new();
    let chunk = snapshot_every.unwrap_or(steps.max(1));
    let mut done = 0;
    while done < steps {
        let span = chunk.min(steps - done);
        run_phase(game, joint, span, &mut state, &mut learners, &mut rngs);
        done += span;
        if snapshot_every.is_some() && done < steps {
            snapshots.push((
                done,
                learners
                    .iter()
                    .map(|l| (l.q_hat.clone(), l.j_hat.clone()))
                    .collect(),
            ));
        }
    }
    Ok(NaiveLearningOutput { players: learners, snapshots })
}

/// Per-phase record of an independent-learning run.
#[derive(Debug, Clone)]
pub struct PhaseRecord {
    pub phase: usize,
    /// Profile played during this phase.
    pub ordinals: Vec<usize>,
    pub satisfied: Vec<bool>,
    /// Profile after the end-of-phase revision.
    pub next_ordinals: Vec<usize>,
}

pub struct IndependentRunOutput {
    pub records: Vec<PhaseRecord>,
    pub final_ordinals: Vec<usize>,
    /// End-of-final-phase learner tables.
    pub final_learners: Vec<LearnerState>,
}

/// Phase-length schedule {T_k}.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhaseSchedule {
    Constant { length: u64, phases: usize },
    Explicit { lengths: Vec<u64> },
}

impl PhaseSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            PhaseSchedule::Constant { length, phases } => *length >= 1 && *phases >= 1,
            PhaseSchedule::Explicit { lengths } => {
                !lengths.is_empty() && lengths.iter().all(|&t| t >= 1)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("phase schedule needs lengths >= 1"))
        }
    }

    pub fn n_phases(&self) -> usize {
        match self {
            PhaseSchedule::Constant { phases, .. } => *phases,
            PhaseSchedule::Explicit { lengths } => lengths.len(),
        }
    }

    pub fn length(&self, k: usize) -> u64 {
        match self {
            PhaseSchedule::Constant { length, .. } => *length,
            PhaseSchedule::Explicit { lengths } => lengths[k],
        }
    }
}

/// Phase-based self-play. Each phase: play the current profile, learn with
/// within-phase counters, test satisficing at phase end; satisfied players
/// keep their policy, unsatisfied players draw
/// π_{k+1} ∼ (1−e)·δ_{π_k} + e·Unif(Π) — with δ replaceable per player by
/// an arbitrary revision kernel over member ordinals. Tables and counters
/// reset between phases.
#[allow(clippy::too_many_arguments)]
pub fn independent_learning_run(
    game: &GameSpec,
    set: &QuantizedPolicySet,
    schedule: &PhaseSchedule,
    eps: f64,
    tolerances: &[f64],
    revision_probs: &[f64],
    initial_ordinals: &[usize],
    seed: u64,
    revision_kernels: Option<&[Vec<Vec<f64>>]>,
    strict_visitation: bool,
) -> Result<IndependentRunOutput> {
    schedule.validate()?;
    let n = game.n_players();
    if tolerances.len() != n || revision_probs.len() != n || initial_ordinals.len() != n {
        return Err(Error::config(
            "need one tolerance, revision probability, and initial ordinal per player",
        ));
    }
    if initial_ordinals.iter().any(|&o| o >= set.len()) {
        return Err(Error::config("initial policy ordinal out of range"));
    }
    if set
        .members()
        .iter()
        .any(|p| p.rows().iter().flatten().any(|&v| v <= 0.0))
    {
        return Err(Error::config(
            "independent learning requires every set member to be soft",
        ));
    }
    if let Some(kernels) = revision_kernels {
        if kernels.len() != n {
            return Err(Error::config("need one revision kernel per player"));
        }
        for rows in kernels {
            if rows.len() != set.len()
                || rows.iter().any(|r| {
                    r.len() != set.len()
                        || (r.iter().sum::<f64>() - 1.0).abs() > 1e-12
                        || r.iter().any(|&p| p < 0.0)
                })
            {
                return Err(Error::config("revision kernel rows must be stochastic over the set"));
            }
        }
    }
    let strict_sets: Option<Vec<Vec<usize>>> = strict_visitation.then(|| {
        (0..n)
            .map(|i| crate::exact::reachable_observations(game, i))
            .collect()
    });

    let mut rngs = RunRngs::new(seed, n);
    let mut init_rng = derive_rng(seed, &[purpose::INIT_STATE]);
    let mut state = game.sample_initial(&mut init_rng);
    let mut ordinals = initial_ordinals.to_vec();
    let mut learners: Vec<LearnerState> = (0..n)
        .map(|i| {
            let mut l = LearnerState::new(game.n_observations(), game.n_actions());
            l.current_policy_ordinal = ordinals[i];
            l
        })
        .collect();

    let mut records = Vec::with_capacity(schedule.n_phases());
    for phase in 0..schedule.n_phases() {
        let joint = set.joint(game, &ordinals)?;
        for l in learners.iter_mut() {
            l.reset();
        }
        run_phase(game, &joint, schedule.length(phase), &mut state, &mut learners, &mut rngs);

        let mut satisfied = vec![false; n];
        let mut next_ordinals = ordinals.clone();
        for i in 0..n {
            satisfied[i] = satisficing_test(
                &learners[i],
                eps,
                tolerances[i],
                strict_sets.as_ref().map(|s| s[i].as_slice()),
            );
            if !satisfied[i] {
                let r: f64 = rngs.revisions[i].gen();
                next_ordinals[i] = if r < revision_probs[i] {
                    rngs.revisions[i].gen_range(0..set.len())
                } else if let Some(kernels) = revision_kernels {
                    crate::game::sample_index(&kernels[i][ordinals[i]], &mut rngs.revisions[i])
                } else {
                    ordinals[i]
                };
            }
        }
        records.push(PhaseRecord {
            phase,
            ordinals: ordinals.clone(),
            satisfied,
            next_ordinals: next_ordinals.clone(),
        });
        ordinals = next_ordinals;
        for (i, l) in learners.iter_mut().enumerate() {
            l.current_policy_ordinal = ordinals[i];
        }
    }
    Ok(IndependentRunOutput {
        records,
        final_ordinals: ordinals,
        final_learners: learners,
    })
}
