//! Configuration-driven experiment runner: resolves a game and a quantized
//! policy set from TOML, dispatches the seven run modes, and writes
//! deterministic artifacts (manifest.json, events.jsonl, summary.csv) so a
//! re-run with the same (config, base seed) reproduces every file byte for
//! byte. Wall-clock timings stay in the in-memory summary only.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{
    induced_mdp, policy_value, subjective_functions, tolerance_report, value_iteration,
};
use crate::fixtures;
use crate::game::{GameSpec, ObservationChannel};
use crate::learners::{independent_learning_run, run_naive_learning, PhaseSchedule};
use crate::policy::{build_quantization, QuantizedPolicySet};
use crate::satisficing::{
    construct_satisficing_path_with_table, run_oracle_dynamics_with_table,
    verify_satisficing_path_with_table, SatisfactionTable,
};
use crate::seeds::{derive_key, derive_rng, purpose};

pub const SCHEMA_VERSION: u32 = 1;

/// 95% two-sided normal quantile used for all binomial intervals.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    NaiveLearn,
    OracleDynamics,
    Paths,
    Selfplay,
    Sweep,
    Tolerance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizationConfig {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_xi_soft")]
    pub xi_soft: f64,
    /// Base-space observations whose rows vary across members; elsewhere
    /// every member plays the grid barycenter.
    #[serde(default)]
    pub support: Option<Vec<usize>>,
}

fn default_m() -> usize {
    2
}

fn default_xi_soft() -> f64 {
    0.05
}

fn default_n_seeds() -> usize {
    1
}

impl Default for QuantizationConfig {
    fn default() -> Self {
        QuantizationConfig { m: default_m(), xi_soft: default_xi_soft(), support: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Exactly one of `fixture` / `game_file` selects the game.
    pub fixture: Option<String>,
    pub game_file: Option<PathBuf>,
    pub channel: Option<ObservationChannel>,
    #[serde(default)]
    pub quantization: QuantizationConfig,
    pub eps: Option<f64>,
    /// Per-player satisficing tolerances d^i.
    pub tolerances: Option<Vec<f64>>,
    /// Per-player experimentation probabilities e^i.
    pub revision_probs: Option<Vec<f64>>,
    pub schedule: Option<PhaseSchedule>,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    /// Steps for naive-learn mode.
    pub steps: Option<u64>,
    pub snapshot_every: Option<u64>,
    /// Step budget for oracle-dynamics mode.
    pub max_steps: Option<u64>,
    pub initial_ordinals: Option<Vec<usize>>,
    #[serde(default)]
    pub strict_visitation: bool,
    pub workers: Option<usize>,
    /// Phase lengths examined in sweep mode.
    pub sweep_lengths: Option<Vec<u64>>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("bad experiment config: {e}")))?;
        Ok(cfg)
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::load_toml(&text)
    }

    pub fn resolve_game(&self) -> Result<GameSpec> {
        let game = match (&self.fixture, &self.game_file) {
            (Some(name), None) => fixtures::by_name(name)?,
            (None, Some(path)) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
                let game = GameSpec::load_toml(&text)?;
                fixtures::validate_soft_chain(&game)?;
                game
            }
            _ => {
                return Err(Error::config(
                    "exactly one of `fixture` and `game_file` must be set",
                ))
            }
        };
        match &self.channel {
            Some(channel) => {
                let game = game.with_channel(channel.clone())?;
                fixtures::validate_soft_chain(&game)?;
                Ok(game)
            }
            None => Ok(game),
        }
    }

    pub fn resolve_set(&self, game: &GameSpec) -> Result<QuantizedPolicySet> {
        build_quantization(
            game,
            self.quantization.m,
            self.quantization.xi_soft,
            self.quantization.support.as_deref(),
        )
    }

    fn require_eps(&self) -> Result<f64> {
        self.eps
            .filter(|&e| e >= 0.0)
            .ok_or_else(|| Error::config("this mode requires a nonnegative `eps`"))
    }

    fn require_per_player(&self, field: &Option<Vec<f64>>, name: &str, n: usize) -> Result<Vec<f64>> {
        let v = field
            .clone()
            .ok_or_else(|| Error::config(format!("this mode requires `{name}`")))?;
        if v.len() != n {
            return Err(Error::config(format!("`{name}` needs one entry per player")));
        }
        Ok(v)
    }
}

/// One run's worth of per-seed facts; fields not applicable to the mode are
/// `None` and omitted from the serialized record.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_profile: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_profile: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hitting_time: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_equilibrium: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left_after_hit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_valid: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_q_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_j_error: Option<f64>,
}

impl RunRecord {
    fn new(run: usize, seed: u64) -> Self {
        RunRecord {
            run,
            seed,
            start_profile: None,
            terminal_profile: None,
            hitting_time: None,
            in_equilibrium: None,
            left_after_hit: None,
            path_length: None,
            path_valid: None,
            sup_q_error: None,
            sup_j_error: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub n_runs: usize,
    /// Fraction of runs ending in (or hitting) the equilibrium set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_frequency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wilson_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wilson_upper: Option<f64>,
    pub runs: Vec<RunRecord>,
    /// Not serialized: timings are nondeterministic.
    #[serde(skip)]
    pub wall_clock_s: f64,
}

/// Wilson score interval for a binomial proportion at 95% confidence.
pub fn wilson_bounds(successes: u64, trials: u64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let margin = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - margin).max(0.0), (center + margin).min(1.0))
}

/// Smallest u with u·p_min / (1 − u + u·p_min) ≥ 1 − ξ/2.
pub fn u_star(p_min: f64, xi: f64) -> f64 {
    assert!(p_min > 0.0 && p_min <= 1.0 && xi > 0.0 && xi < 2.0);
    let target = 1.0 - xi / 2.0;
    (target / (p_min + target * (1.0 - p_min))).min(1.0)
}

fn run_seed(base_seed: u64, run: usize) -> u64 {
    derive_key(base_seed, &[purpose::RUN, run as u64])
}

/// Sup-norm distance between a learner's end-of-run tables and the
/// subjective oracles, over reachable observations.
fn learner_errors(
    game: &GameSpec,
    joint: &crate::policy::JointPolicy,
    learners: &[crate::learners::LearnerState],
) -> Result<(f64, f64)> {
    let mut q_err = 0.0f64;
    let mut j_err = 0.0f64;
    for (i, l) in learners.iter().enumerate() {
        let sf = subjective_functions(game, i, joint)?;
        for y in 0..game.n_observations() {
            if !sf.reachable[y] {
                continue;
            }
            j_err = j_err.max((l.j_hat[y] - sf.v[y]).abs());
            for a in 0..game.n_actions() {
                q_err = q_err.max((l.q_hat[y][a] - sf.w[y][a]).abs());
            }
        }
    }
    Ok((q_err, j_err))
}

/// Accuracy event frequency: over `n_seeds` fresh runs of
/// length `t` under uniformly drawn profiles, the fraction where every
/// player's tables land within `xi_accuracy` of the subjective oracles.
pub fn accuracy_frequency(
    game: &GameSpec,
    set: &QuantizedPolicySet,
    t: u64,
    xi_accuracy: f64,
    n_seeds: usize,
    base_seed: u64,
) -> Result<f64> {
    let hits: usize = (0..n_seeds)
        .into_par_iter()
        .map(|r| {
            let seed = derive_key(base_seed, &[purpose::RUN, t, r as u64]);
            let mut profile_rng = derive_rng(seed, &[purpose::RUN]);
            let profile: Vec<usize> = (0..game.n_players())
                .map(|_| rand::Rng::gen_range(&mut profile_rng, 0..set.len()))
                .collect();
            let joint = set.joint(game, &profile)?;
            let out = run_naive_learning(game, &joint, t, seed, None)?;
            let (q_err, j_err) = learner_errors(game, &joint, &out.players)?;
            Ok(usize::from(q_err <= xi_accuracy && j_err <= xi_accuracy))
        })
        .collect::<Result<Vec<usize>>>()?
        .iter()
        .sum();
    Ok(hits as f64 / n_seeds as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseSearchResult {
    /// Smallest tested T whose accuracy frequency reached u*.
    pub recommended: Option<u64>,
    /// (T, frequency) pairs in doubling order.
    pub tested: Vec<(u64, f64)>,
    pub u_star: f64,
    pub xi_accuracy: f64,
}

/// Doubling search for an adequate exploration-phase length: T = 1, 2, 4, …
/// until the accuracy event frequency reaches the u* implied by the revision
/// chain's minimal jump probability, or `max_t` is exhausted.
#[allow(clippy::too_many_arguments)]
pub fn phase_length_search(
    game: &GameSpec,
    set: &QuantizedPolicySet,
    eps: f64,
    tolerances: &[f64],
    revision_probs: &[f64],
    xi_target: f64,
    max_t: u64,
    n_seeds: usize,
    base_seed: u64,
) -> Result<PhaseSearchResult> {
    let report = tolerance_report(
        game,
        set,
        eps,
        tolerances,
        revision_probs,
        game.n_players() + 1,
    )?;
    let xi_accuracy = report.xi_accuracy.ok_or_else(|| {
        Error::config("tolerances must lie strictly inside (0, d̄) for the accuracy target")
    })?;
    let u = u_star(report.p_min, xi_target);
    let mut tested = Vec::new();
    let mut t = 1u64;
    loop {
        let freq = accuracy_frequency(game, set, t, xi_accuracy, n_seeds, base_seed)?;
        tested.push((t, freq));
        if freq >= u {
            return Ok(PhaseSearchResult {
                recommended: Some(t),
                tested,
                u_star: u,
                xi_accuracy,
            });
        }
        if t >= max_t {
            return Ok(PhaseSearchResult { recommended: None, tested, u_star: u, xi_accuracy });
        }
        t = (t * 2).min(max_t);
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row)?);
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

fn summary_csv(summary: &RunSummary) -> String {
    let mut out = String::from("metric,value\n");
    out.push_str(&format!("schema_version,{SCHEMA_VERSION}\n"));
    out.push_str(&format!("n_runs,{}\n", summary.n_runs));
    if let Some(f) = summary.success_frequency {
        out.push_str(&format!("success_frequency,{f:.12}\n"));
    }
    if let Some(l) = summary.wilson_lower {
        out.push_str(&format!("wilson_lower,{l:.12}\n"));
    }
    if let Some(u) = summary.wilson_upper {
        out.push_str(&format!("wilson_upper,{u:.12}\n"));
    }
    out
}

/// Writes the J / Q* / V* / W* tables of every player under `joint` as one
/// CSV (columns: player, table, index, action, value). Q* rows appear only
/// on channels where the induced MDP exists.
pub fn solve_csv(game: &GameSpec, joint: &crate::policy::JointPolicy) -> Result<String> {
    let mut out = String::from("player,table,index,action,value\n");
    for i in 0..game.n_players() {
        let j = policy_value(game, i, joint)?;
        for (s, &v) in j.iter().enumerate() {
            out.push_str(&format!("{i},j,{s},,{v:.12}\n"));
        }
        if let Ok(omdp) = induced_mdp(game, i, joint) {
            let q = value_iteration(&omdp.mdp, 1e-10);
            for (k, row) in q.iter().enumerate() {
                for (a, &v) in row.iter().enumerate() {
                    out.push_str(&format!("{i},qstar,{},{a},{v:.12}\n", omdp.obs[k]));
                }
            }
        }
        let sf = subjective_functions(game, i, joint)?;
        for y in 0..game.n_observations() {
            if !sf.reachable[y] {
                continue;
            }
            out.push_str(&format!("{i},v,{y},,{:.12}\n", sf.v[y]));
            for (a, &v) in sf.w[y].iter().enumerate() {
                out.push_str(&format!("{i},w,{y},{a},{v:.12}\n"));
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    base_seed: u64,
    config: &'a ExperimentConfig,
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

/// Runs one experiment and writes manifest.json, events.jsonl, and
/// summary.csv (plus mode-specific artifacts) into `out_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    base_seed: u64,
    out_dir: &Path,
) -> Result<RunSummary> {
    fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let game = config.resolve_game()?;
    let n = game.n_players();

    let manifest = Manifest { schema_version: SCHEMA_VERSION, base_seed, config };
    write_file(
        &out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;

    let mut summary = RunSummary {
        mode: config.mode,
        n_runs: 0,
        success_frequency: None,
        wilson_lower: None,
        wilson_upper: None,
        runs: Vec::new(),
        wall_clock_s: 0.0,
    };

    match config.mode {
        Mode::Solve => {
            let set = config.resolve_set(&game)?;
            let ordinals = config.initial_ordinals.clone().unwrap_or_else(|| vec![0; n]);
            let joint = set.joint(&game, &ordinals)?;
            write_file(&out_dir.join("solve.csv"), solve_csv(&game, &joint)?.as_bytes())?;
            summary.n_runs = 1;
        }
        Mode::NaiveLearn => {
            let set = config.resolve_set(&game)?;
            let steps = config
                .steps
                .ok_or_else(|| Error::config("naive-learn mode requires `steps`"))?;
            let ordinals = config.initial_ordinals.clone().unwrap_or_else(|| vec![0; n]);
            let joint = set.joint(&game, &ordinals)?;
            let records = with_workers(config.workers, || {
                (0..config.n_seeds)
                    .into_par_iter()
                    .map(|r| {
                        let seed = run_seed(base_seed, r);
                        let out =
                            run_naive_learning(&game, &joint, steps, seed, config.snapshot_every)?;
                        let (q_err, j_err) = learner_errors(&game, &joint, &out.players)?;
                        let mut rec = RunRecord::new(r, seed);
                        rec.start_profile = Some(ordinals.clone());
                        rec.sup_q_error = Some(q_err);
                        rec.sup_j_error = Some(j_err);
                        Ok(rec)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            summary.n_runs = records.len();
            summary.runs = records;
        }
        Mode::OracleDynamics => {
            let set = config.resolve_set(&game)?;
            let eps = config.require_eps()?;
            let probs = config.require_per_player(&config.revision_probs, "revision_probs", n)?;
            let max_steps = config
                .max_steps
                .ok_or_else(|| Error::config("oracle-dynamics mode requires `max_steps`"))?;
            let table = SatisfactionTable::compute(&game, &set, eps)?;
            if table.equilibrium_profiles().is_empty() {
                return Err(Error::EmptyEquilibrium(
                    "the shared set contains no subjective ε-equilibrium".to_string(),
                ));
            }
            let records = with_workers(config.workers, || {
                (0..config.n_seeds)
                    .into_par_iter()
                    .map(|r| {
                        let seed = run_seed(base_seed, r);
                        let start = match &config.initial_ordinals {
                            Some(o) => o.clone(),
                            None => {
                                let mut rng = derive_rng(seed, &[purpose::RUN]);
                                (0..n)
                                    .map(|_| rand::Rng::gen_range(&mut rng, 0..set.len()))
                                    .collect()
                            }
                        };
                        let run =
                            run_oracle_dynamics_with_table(&table, &probs, &start, max_steps, seed)?;
                        let mut rec = RunRecord::new(r, seed);
                        rec.start_profile = Some(start);
                        rec.terminal_profile = run.trajectory.last().cloned();
                        rec.hitting_time = run.hitting_time;
                        rec.in_equilibrium = Some(run.hitting_time.is_some());
                        rec.left_after_hit = Some(run.left_after_hit);
                        Ok(rec)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let hits = records.iter().filter(|r| r.hitting_time.is_some()).count();
            let (lo, hi) = wilson_bounds(hits as u64, records.len() as u64);
            summary.success_frequency = Some(hits as f64 / records.len() as f64);
            summary.wilson_lower = Some(lo);
            summary.wilson_upper = Some(hi);
            summary.n_runs = records.len();
            summary.runs = records;
        }
        Mode::Paths => {
            let set = config.resolve_set(&game)?;
            let eps = config.require_eps()?;
            let table = SatisfactionTable::compute(&game, &set, eps)?;
            let mut records = Vec::with_capacity(table.n_profiles());
            for p in 0..table.n_profiles() {
                let start = table.profile_from_index(p);
                let path = construct_satisficing_path_with_table(&table, &start)?;
                let report = verify_satisficing_path_with_table(&table, &path.profiles)?;
                let mut rec = RunRecord::new(p, base_seed);
                rec.start_profile = Some(start);
                rec.terminal_profile = path.profiles.last().cloned();
                rec.path_length = Some(path.profiles.len());
                rec.path_valid = Some(report.valid && report.terminal_in_set);
                records.push(rec);
            }
            let ok = records.iter().filter(|r| r.path_valid == Some(true)).count();
            summary.success_frequency = Some(ok as f64 / records.len() as f64);
            summary.n_runs = records.len();
            summary.runs = records;
        }
        Mode::Selfplay => {
            let set = config.resolve_set(&game)?;
            let eps = config.require_eps()?;
            let tolerances =
                config.require_per_player(&config.tolerances, "tolerances", n)?;
            let probs = config.require_per_player(&config.revision_probs, "revision_probs", n)?;
            let schedule = config
                .schedule
                .clone()
                .ok_or_else(|| Error::config("selfplay mode requires `schedule`"))?;
            if config.strict_visitation {
                let report = tolerance_report(&game, &set, eps, &tolerances, &probs, n + 1)?;
                if !report.bad_tolerances.is_empty() {
                    return Err(Error::config(format!(
                        "tolerances for players {:?} lie outside (0, d̄)",
                        report.bad_tolerances
                    )));
                }
            }
            let table = SatisfactionTable::compute(&game, &set, eps)?;
            if table.equilibrium_profiles().is_empty() {
                return Err(Error::EmptyEquilibrium(
                    "the shared set contains no subjective ε-equilibrium".to_string(),
                ));
            }
            let records = with_workers(config.workers, || {
                (0..config.n_seeds)
                    .into_par_iter()
                    .map(|r| {
                        let seed = run_seed(base_seed, r);
                        let start = match &config.initial_ordinals {
                            Some(o) => o.clone(),
                            None => {
                                let mut rng = derive_rng(seed, &[purpose::RUN]);
                                (0..n)
                                    .map(|_| rand::Rng::gen_range(&mut rng, 0..set.len()))
                                    .collect()
                            }
                        };
                        let out = independent_learning_run(
                            &game,
                            &set,
                            &schedule,
                            eps,
                            &tolerances,
                            &probs,
                            &start,
                            seed,
                            None,
                            config.strict_visitation,
                        )?;
                        let mut rec = RunRecord::new(r, seed);
                        rec.start_profile = Some(start);
                        rec.in_equilibrium = Some(table.is_equilibrium(&out.final_ordinals));
                        rec.terminal_profile = Some(out.final_ordinals);
                        Ok(rec)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let hits = records.iter().filter(|r| r.in_equilibrium == Some(true)).count();
            let (lo, hi) = wilson_bounds(hits as u64, records.len() as u64);
            summary.success_frequency = Some(hits as f64 / records.len() as f64);
            summary.wilson_lower = Some(lo);
            summary.wilson_upper = Some(hi);
            summary.n_runs = records.len();
            summary.runs = records;
        }
        Mode::Sweep => {
            let set = config.resolve_set(&game)?;
            let eps = config.require_eps()?;
            let tolerances =
                config.require_per_player(&config.tolerances, "tolerances", n)?;
            let probs = config.require_per_player(&config.revision_probs, "revision_probs", n)?;
            let lengths = config
                .sweep_lengths
                .clone()
                .ok_or_else(|| Error::config("sweep mode requires `sweep_lengths`"))?;
            let report = tolerance_report(&game, &set, eps, &tolerances, &probs, n + 1)?;
            let xi = report.xi_accuracy.ok_or_else(|| {
                Error::config("tolerances must lie strictly inside (0, d̄) for a sweep")
            })?;
            let mut csv = String::from("length,frequency,wilson_lower\n");
            for &t in &lengths {
                let freq = with_workers(config.workers, || {
                    accuracy_frequency(&game, &set, t, xi, config.n_seeds, base_seed)
                })?;
                let hits = (freq * config.n_seeds as f64).round() as u64;
                let (lo, _) = wilson_bounds(hits, config.n_seeds as u64);
                csv.push_str(&format!("{t},{freq:.12},{lo:.12}\n"));
            }
            write_file(&out_dir.join("sweep.csv"), csv.as_bytes())?;
            summary.n_runs = lengths.len() * config.n_seeds;
        }
        Mode::Tolerance => {
            let set = config.resolve_set(&game)?;
            let eps = config.require_eps()?;
            let tolerances =
                config.require_per_player(&config.tolerances, "tolerances", n)?;
            let probs = config.require_per_player(&config.revision_probs, "revision_probs", n)?;
            let report = tolerance_report(&game, &set, eps, &tolerances, &probs, n + 1)?;
            let payload = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "d_bar": report.d_bar,
                "xi_accuracy": report.xi_accuracy,
                "p_min": report.p_min,
                "path_bound": report.path_bound,
                "bad_tolerances": report.bad_tolerances,
                "n_gaps": report.gap_set.len(),
            });
            write_file(
                &out_dir.join("tolerance.json"),
                serde_json::to_string_pretty(&payload)?.as_bytes(),
            )?;
            summary.n_runs = 1;
        }
    }

    write_jsonl(&out_dir.join("events.jsonl"), &summary.runs)?;
    write_file(&out_dir.join("summary.csv"), summary_csv(&summary).as_bytes())?;
    summary.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(summary)
}
