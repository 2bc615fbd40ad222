//! Per-agent observations, the discrete action space and the common reward.

use serde::{Deserialize, Serialize};

use crate::environment::{EnvConfig, Environment, PayloadState, StepOutcome};
use crate::error::{Error, Result};

/// Affine standardization of dB gains into network features.
pub const GAIN_DB_CENTER: f64 = -100.0;
pub const GAIN_DB_SCALE: f64 = 30.0;
/// Gains at or below this level (including masked zeros) map to one value.
pub const GAIN_DB_FLOOR: f64 = -200.0;

pub fn standardize_gain(gain: f64) -> f64 {
    let db = if gain > 0.0 { 10.0 * gain.log10() } else { GAIN_DB_FLOOR };
    (db.max(GAIN_DB_FLOOR) - GAIN_DB_CENTER) / GAIN_DB_SCALE
}

/// Sub-band and power-level choice of one platoon leader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub sub_band: usize,
    pub power_level: usize,
}

/// Product of `sub_bands` sub-bands and `power_levels` power levels, with
/// flat index `sub_band * power_levels + power_level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub sub_bands: usize,
    pub power_levels: usize,
}

impl ActionSpace {
    pub fn new(sub_bands: usize, power_levels: usize) -> Self {
        Self {
            sub_bands,
            power_levels,
        }
    }

    pub fn for_config(config: &EnvConfig) -> Self {
        Self::new(config.v2n_links, config.power_levels_dbm.len())
    }

    pub fn size(&self) -> usize {
        self.sub_bands * self.power_levels
    }

    pub fn encode(&self, action: Action) -> Result<usize> {
        if action.sub_band >= self.sub_bands || action.power_level >= self.power_levels {
            return Err(Error::ActionOutOfRange {
                index: action.sub_band * self.power_levels + action.power_level,
                size: self.size(),
            });
        }
        Ok(action.sub_band * self.power_levels + action.power_level)
    }

    pub fn decode(&self, index: usize) -> Result<Action> {
        if index >= self.size() {
            return Err(Error::ActionOutOfRange {
                index,
                size: self.size(),
            });
        }
        Ok(Action {
            sub_band: index / self.power_levels,
            power_level: index % self.power_levels,
        })
    }
}

/// Training-progress descriptor appended to every observation so agents can
/// track how the other agents' policies drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    /// Episode index divided by the number of training episodes.
    pub progress: f64,
    pub epsilon: f64,
}

impl Fingerprint {
    pub fn new(episode: usize, total_episodes: usize, epsilon: f64) -> Self {
        Self {
            progress: episode as f64 / total_episodes.max(1) as f64,
            epsilon,
        }
    }
}

/// Local state of one agent. Gains are linear; [`Observation::features`]
/// maps them to the network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Leader to each own member.
    pub direct_gains: Vec<f64>,
    /// Other leader `l` to own member `i`, ordered by `l` then `i`; zero
    /// unless `l` shared this agent's sub-band on the previous step.
    pub interferer_gains: Vec<f64>,
    /// V2N user `m` to own member `i`, ordered by `m` then `i`.
    pub v2n_to_member_gains: Vec<f64>,
    /// Own leader to the base station on every sub-band.
    pub agent_to_bs_gains: Vec<f64>,
    pub remaining_bits_norm: f64,
    pub remaining_time_norm: f64,
    pub fingerprint: Fingerprint,
}

pub fn observation_dim(sub_bands: usize, platoons: usize, members: usize) -> usize {
    members + members * (platoons - 1) + members * sub_bands + sub_bands + 2 + 2
}

impl Observation {
    pub fn dim(&self) -> usize {
        self.direct_gains.len()
            + self.interferer_gains.len()
            + self.v2n_to_member_gains.len()
            + self.agent_to_bs_gains.len()
            + 4
    }

    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend(
            self.direct_gains
                .iter()
                .chain(&self.interferer_gains)
                .chain(&self.v2n_to_member_gains)
                .chain(&self.agent_to_bs_gains)
                .map(|g| standardize_gain(*g)),
        );
        out.extend([
            self.remaining_bits_norm,
            self.remaining_time_norm,
            self.fingerprint.progress,
            self.fingerprint.epsilon,
        ]);
        out
    }
}

/// Observation of agent `n` built from the gains held by the environment and
/// the sub-band occupancy of the previous step.
pub fn build_observation(env: &Environment, n: usize, fingerprint: Fingerprint) -> Observation {
    let cfg = env.config();
    let gains = env.gains();
    let payload = env.payload();
    let members = cfg.members_per_platoon;

    let own_band = env.last_assignment().and_then(|a| a.sub_band[n]);
    let mut interferer_gains = Vec::with_capacity(members * (cfg.platoons - 1));
    for l in (0..cfg.platoons).filter(|l| *l != n) {
        let shares = own_band.is_some()
            && env.last_assignment().map(|a| a.sub_band[l]) == Some(own_band);
        for i in 0..members {
            interferer_gains.push(if shares { gains.dd[l][n][i] } else { 0.0 });
        }
    }

    let remaining = &payload.remaining_bits[n];
    let remaining_bits_norm = if cfg.payload_bits > 0.0 {
        remaining.iter().sum::<f64>() / (remaining.len() as f64 * cfg.payload_bits)
    } else {
        0.0
    };

    Observation {
        direct_gains: gains.dd[n][n].clone(),
        interferer_gains,
        v2n_to_member_gains: (0..cfg.v2n_links)
            .flat_map(|m| gains.cd[m][n].iter().copied())
            .collect(),
        agent_to_bs_gains: gains.dc[n].clone(),
        remaining_bits_norm,
        remaining_time_norm: payload.remaining_time_ms(cfg) / cfg.latency_ms,
        fingerprint,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub w_c: f64,
    pub w_d: f64,
    pub w_t: f64,
    /// Utility credited to a V2V link once its payload is delivered.
    pub u: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_c: 0.7,
            w_d: 0.3,
            w_t: 0.25,
            u: 50.0,
        }
    }
}

/// Spectral efficiency of an undelivered V2V link, or the constant `u` once
/// nothing remains.
pub fn v2v_utility(rate_bps: f64, remaining_bits: f64, u: f64, bandwidth_hz: f64) -> f64 {
    if remaining_bits > 0.0 {
        rate_bps / bandwidth_hz
    } else {
        u
    }
}

/// Common reward of one step. `steps_elapsed` counts steps completed before
/// this one, so the latency price starts at zero.
pub fn compute_reward(
    v2n_rates: &[f64],
    v2v_utilities: impl IntoIterator<Item = f64>,
    steps_elapsed: usize,
    weights: &RewardWeights,
    config: &EnvConfig,
) -> f64 {
    let v2n: f64 = v2n_rates.iter().map(|r| r / config.bandwidth_hz).sum();
    let v2v: f64 = v2v_utilities.into_iter().sum();
    let elapsed_ms = (steps_elapsed as f64 * config.step_ms).min(config.latency_ms);
    weights.w_c * v2n + weights.w_d * v2v - weights.w_t * elapsed_ms
}

/// Reward of a completed step, given the payload state before it.
pub fn step_reward(
    before: &PayloadState,
    outcome: &StepOutcome,
    weights: &RewardWeights,
    config: &EnvConfig,
) -> f64 {
    let utilities = before
        .remaining_bits
        .iter()
        .zip(&outcome.v2v_rates)
        .flat_map(|(left, rates)| left.iter().zip(rates))
        .map(|(left, rate)| v2v_utility(*rate, *left, weights.u, config.bandwidth_hz));
    compute_reward(
        &outcome.v2n_rates,
        utilities,
        before.steps_elapsed,
        weights,
        config,
    )
}
