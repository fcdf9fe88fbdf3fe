//! Built-in game catalog used by the test suites, benchmarks, and the CLI's
//! `--fixture` flag.
//!
//! Every fixture passes the soft-chain validation below at construction:
//! the closed-loop chain under the uniform joint policy must be irreducible
//! and aperiodic. Since any soft policy's chain has the same support graph,
//! this certifies the property for every soft joint.

use crate::error::{Error, Result};
use crate::exact::validate_chain;
use crate::game::{
    enumerate_empirical_measures, GameConfig, GameSpec, InitialDist, ObservationChannel,
};
use crate::policy::{JointPolicy, StationaryPolicy};

/// Checks the ergodicity hypothesis on the uniform-policy closed-loop chain.
pub fn validate_soft_chain(game: &GameSpec) -> Result<()> {
    let uniform = StationaryPolicy::uniform(game.channel_tag(), game.n_actions());
    let joint = JointPolicy::new(vec![uniform; game.n_players()]);
    let kernel = game.exact_chain_kernel(&joint)?;
    validate_chain(&kernel)
        .map_err(|e| Error::structural(format!("fixture fails the ergodic-chain hypothesis: {e}")))
}

fn row2(p: f64) -> Vec<f64> {
    vec![p, 1.0 - p]
}

/// Two players, two local states, two actions, mean-field channel.
///
/// Action 0 drifts toward local state 0 and action 1 away from it, with the
/// drift damped as the crowd at state 0 grows; the cost rewards being at
/// the crowded state with the cheap action.
pub fn mfg2() -> GameSpec {
    GameSpec::from_config(&mfg2_config()).expect("static fixture")
}

fn mfg2_config() -> GameConfig {
    GameConfig {
        n_players: 2,
        n_local_states: 2,
        n_actions: 2,
        discount: 0.7,
        channel: ObservationChannel::MeanField,
        // Emp order: (2,0), (1,1), (0,2).
        cost_table: vec![
            vec![vec![0.0, 1.0], vec![0.5, 1.5], vec![1.0, 2.0]],
            vec![vec![2.0, 0.5], vec![1.0, 0.0], vec![0.5, 1.0]],
        ],
        transition_table: vec![
            vec![
                vec![row2(0.9), row2(0.2)],
                vec![row2(0.7), row2(0.3)],
                vec![row2(0.6), row2(0.4)],
            ],
            vec![
                vec![row2(0.3), row2(0.8)],
                vec![row2(0.4), row2(0.6)],
                vec![row2(0.5), row2(0.1)],
            ],
        ],
        initial_dist: InitialDist::Uniform,
    }
}

/// [`mfg2`] with the discount lowered to 0.5. The smaller horizon makes
/// tabular learning reach tight accuracy targets in short phases, which the
/// statistical self-play suites rely on.
pub fn mfg2_fast() -> GameSpec {
    let mut cfg = mfg2_config();
    cfg.discount = 0.5;
    GameSpec::from_config(&cfg).expect("static fixture")
}

/// [`mfg2_fast`] observed through the global channel.
pub fn mfg2_fast_global() -> GameSpec {
    mfg2_fast().with_channel(ObservationChannel::Global).expect("static fixture")
}

/// [`mfg2_fast`] with the two-class measure compression of
/// [`mfg2_compressed`].
pub fn mfg2_fast_compressed() -> GameSpec {
    mfg2_fast()
        .with_channel(ObservationChannel::Compressed {
            k: 2,
            f_table: vec![1, 2, 2],
        })
        .expect("static fixture")
}

/// [`mfg2`] observed through the global channel.
pub fn mfg2_global() -> GameSpec {
    mfg2().with_channel(ObservationChannel::Global).expect("static fixture")
}

/// [`mfg2`] with the empirical measure compressed to two classes:
/// class 1 when nobody is at local state 1, class 2 otherwise.
pub fn mfg2_compressed() -> GameSpec {
    mfg2()
        .with_channel(ObservationChannel::Compressed {
            k: 2,
            f_table: vec![1, 2, 2],
        })
        .expect("static fixture")
}

/// Four players, two local states, two actions, mean-field channel.
///
/// A congestion flavor: staying at a crowded state is expensive, and the
/// escape action gets less reliable the fuller the target is.
pub fn mfg4() -> GameSpec {
    let n_emp = enumerate_empirical_measures(4, 2).len(); // counts (4,0)…(0,4)
    let mut cost_table = vec![vec![vec![0.0; 2]; n_emp]; 2];
    let mut transition_table = vec![vec![vec![Vec::new(); 2]; n_emp]; 2];
    let emp = enumerate_empirical_measures(4, 2);
    for x in 0..2 {
        for (e, counts) in emp.iter().enumerate() {
            let crowd = counts[x] as f64 / 4.0;
            cost_table[x][e][0] = crowd;
            cost_table[x][e][1] = 0.4 + 0.5 * crowd;
            // Action 0 stays put with high probability; action 1 hops, with
            // success fading in the destination's occupancy.
            let stay = 0.85 - 0.1 * crowd;
            let other_crowd = counts[1 - x] as f64 / 4.0;
            let hop = 0.75 - 0.35 * other_crowd;
            let p_keep0 = if x == 0 { stay } else { 1.0 - stay };
            let p_hop0 = if x == 0 { 1.0 - hop } else { hop };
            transition_table[x][e][0] = row2(p_keep0);
            transition_table[x][e][1] = row2(p_hop0);
        }
    }
    let cfg = GameConfig {
        n_players: 4,
        n_local_states: 2,
        n_actions: 2,
        discount: 0.65,
        channel: ObservationChannel::MeanField,
        cost_table,
        transition_table,
        initial_dist: InitialDist::Uniform,
    };
    GameSpec::from_config(&cfg).expect("static fixture")
}

/// Three players, mean-field channel, transitions strongly action- and
/// state-dependent. With co-players pinned to different deterministic
/// actions, the observer's observation process is *not* Markov: the
/// empirical measure hides which co-player sits where, and the history
/// carries that identity information.
pub fn mfg3_asym() -> GameSpec {
    let n_emp = enumerate_empirical_measures(3, 2).len();
    let mut transition_table = vec![vec![vec![Vec::new(); 2]; n_emp]; 2];
    for e in 0..n_emp {
        transition_table[0][e][0] = row2(0.9);
        transition_table[0][e][1] = row2(0.2);
        transition_table[1][e][0] = row2(0.7);
        transition_table[1][e][1] = row2(0.4);
    }
    let mut cost_table = vec![vec![vec![0.0; 2]; n_emp]; 2];
    for e in 0..n_emp {
        for a in 0..2 {
            cost_table[0][e][a] = 0.2 * a as f64;
            cost_table[1][e][a] = 1.0 - 0.3 * a as f64;
        }
    }
    let cfg = GameConfig {
        n_players: 3,
        n_local_states: 2,
        n_actions: 2,
        discount: 0.6,
        channel: ObservationChannel::MeanField,
        cost_table,
        transition_table,
        initial_dist: InitialDist::Uniform,
    };
    GameSpec::from_config(&cfg).expect("static fixture")
}

/// A single-player game, useful because every channel collapses to the
/// underlying MDP.
pub fn single_player() -> GameSpec {
    let cfg = GameConfig {
        n_players: 1,
        n_local_states: 3,
        n_actions: 2,
        discount: 0.8,
        channel: ObservationChannel::Global,
        // One player: Emp_N has 3 singleton measures, ordered (1,0,0),
        // (0,1,0), (0,0,1); only the consistent (x, e) pairs matter.
        cost_table: vec![
            vec![vec![0.0, 0.4], vec![0.0, 0.4], vec![0.0, 0.4]],
            vec![vec![1.0, 0.2], vec![1.0, 0.2], vec![1.0, 0.2]],
            vec![vec![0.5, 0.9], vec![0.5, 0.9], vec![0.5, 0.9]],
        ],
        transition_table: vec![
            vec![
                vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.8, 0.1]]; 3
            ],
            vec![
                vec![vec![0.2, 0.5, 0.3], vec![0.4, 0.2, 0.4]]; 3
            ],
            vec![
                vec![vec![0.3, 0.3, 0.4], vec![0.25, 0.5, 0.25]]; 3
            ],
        ],
        initial_dist: InitialDist::Uniform,
    };
    GameSpec::from_config(&cfg).expect("static fixture")
}

/// Fixture names accepted by [`by_name`].
pub const FIXTURE_NAMES: &[&str] = &[
    "mfg2",
    "mfg2-global",
    "mfg2-compressed",
    "mfg2-fast",
    "mfg2-fast-global",
    "mfg2-fast-compressed",
    "mfg4",
    "mfg3-asym",
    "single",
];

pub fn by_name(name: &str) -> Result<GameSpec> {
    let game = match name {
        "mfg2" => mfg2(),
        "mfg2-global" => mfg2_global(),
        "mfg2-compressed" => mfg2_compressed(),
        "mfg2-fast" => mfg2_fast(),
        "mfg2-fast-global" => mfg2_fast_global(),
        "mfg2-fast-compressed" => mfg2_fast_compressed(),
        "mfg4" => mfg4(),
        "mfg3-asym" => mfg3_asym(),
        "single" => single_player(),
        _ => {
            return Err(Error::config(format!(
                "unknown fixture '{name}'; known fixtures: {}",
                FIXTURE_NAMES.join(", ")
            )))
        }
    };
    validate_soft_chain(&game)?;
    Ok(game)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_fixtures_pass_the_chain_hypothesis() {
        for name in FIXTURE_NAMES {
            by_name(name).unwrap();
        }
    }

    #[test]
    fn unknown_fixture_is_a_config_error() {
        assert!(matches!(by_name("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn catalog_covers_required_player_counts() {
        assert_eq!(by_name("mfg2").unwrap().n_players(), 2);
        assert_eq!(by_name("mfg4").unwrap().n_players(), 4);
    }
}
