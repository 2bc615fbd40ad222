//! Episodic underlay network: V2N uplinks own one sub-band each, platoon
//! leaders reuse those sub-bands to broadcast a payload to their members
//! within a latency budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    self, ChannelParams, Geometry, LargeScale, LinkGains, LinkSet, SmallScale, Topology,
};
use crate::error::{Error, Result};
use crate::mdp::Action;
use crate::units::{dbm_to_mw, thermal_noise_dbm};

pub const BYTES_PER_PAYLOAD_UNIT: u64 = 1060;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Number of V2N links, equal to the number of sub-bands.
    pub v2n_links: usize,
    pub platoons: usize,
    /// Receiving members per platoon, excluding the leader.
    pub members_per_platoon: usize,
    pub bandwidth_hz: f64,
    pub v2n_power_dbm: f64,
    /// Discrete leader transmit power levels.
    pub power_levels_dbm: Vec<f64>,
    pub bs_noise_dbm: f64,
    pub vehicle_noise_dbm: f64,
    /// Latency budget of one payload.
    pub latency_ms: f64,
    /// Fading block length and decision interval.
    pub step_ms: f64,
    pub payload_bits: f64,
    pub geometry: Geometry,
    pub channel: ChannelParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        let bandwidth_hz = 1e6;
        Self {
            v2n_links: 2,
            platoons: 4,
            members_per_platoon: 3,
            bandwidth_hz,
            v2n_power_dbm: 23.0,
            power_levels_dbm: vec![23.0, 10.0, 5.0, -100.0],
            bs_noise_dbm: thermal_noise_dbm(bandwidth_hz, 5.0),
            vehicle_noise_dbm: -114.0,
            latency_ms: 10.0,
            step_ms: 1.0,
            payload_bits: payload_bits_from_bytes(8 * BYTES_PER_PAYLOAD_UNIT),
            geometry: Geometry::default(),
            channel: ChannelParams::default(),
        }
    }
}

pub fn payload_bits_from_bytes(bytes: u64) -> f64 {
    (bytes * 8) as f64
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.v2n_links == 0 {
            return bad("at least one sub-band (V2N link) is required");
        }
        if self.platoons == 0 {
            return bad("at least one platoon is required");
        }
        if self.members_per_platoon == 0 {
            return bad("platoons need at least one member");
        }
        if self.power_levels_dbm.is_empty() {
            return bad("power level set is empty");
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth must be positive");
        }
        if !(self.step_ms > 0.0 && self.latency_ms >= self.step_ms) {
            return bad("need 0 < step_ms <= latency_ms");
        }
        let ratio = self.latency_ms / self.step_ms;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return bad("latency_ms must be a whole number of steps");
        }
        if !(self.payload_bits >= 0.0) {
            return bad("payload must be nonnegative");
        }
        self.geometry.validate()?;
        let vehicles = self.members_per_platoon + 1;
        if self.geometry.platoon_length_m(vehicles) > self.geometry.lane_length_m {
            return bad("platoon is longer than the lane");
        }
        Ok(())
    }

    pub fn horizon_steps(&self) -> usize {
        (self.latency_ms / self.step_ms).round() as usize
    }

    pub fn step_seconds(&self) -> f64 {
        self.step_ms / 1000.0
    }

    pub fn total_v2v_links(&self) -> usize {
        self.platoons * self.members_per_platoon
    }
}

/// Linear-domain constants derived from an [`EnvConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub bandwidth_hz: f64,
    pub v2n_power_mw: f64,
    pub power_levels_mw: Vec<f64>,
    pub bs_noise_mw: f64,
    pub vehicle_noise_mw: f64,
}

impl From<&EnvConfig> for LinkBudget {
    fn from(c: &EnvConfig) -> Self {
        Self {
            bandwidth_hz: c.bandwidth_hz,
            v2n_power_mw: dbm_to_mw(c.v2n_power_dbm),
            power_levels_mw: c.power_levels_dbm.iter().map(|p| dbm_to_mw(*p)).collect(),
            bs_noise_mw: dbm_to_mw(c.bs_noise_dbm),
            vehicle_noise_mw: dbm_to_mw(c.vehicle_noise_dbm),
        }
    }
}

/// Sub-band reuse and transmit power of every platoon leader for one step.
/// A leader without a sub-band is silent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub sub_band: Vec<Option<usize>>,
    pub power_mw: Vec<f64>,
}

impl Assignment {
    pub fn silent(platoons: usize) -> Self {
        Self {
            sub_band: vec![None; platoons],
            power_mw: vec![0.0; platoons],
        }
    }

    /// Builds the assignment for a joint action. Inactive platoons are
    /// silent whatever their entry says; active ones must carry an action.
    pub fn from_actions(
        budget: &LinkBudget,
        sub_bands: usize,
        joint: &[Option<Action>],
        active: &[bool],
    ) -> Result<Self> {
        let mut out = Self::silent(active.len());
        for (n, &is_active) in active.iter().enumerate() {
            if !is_active {
                continue;
            }
            let action = joint
                .get(n)
                .copied()
                .flatten()
                .ok_or(Error::MissingAction(n))?;
            let levels = budget.power_levels_mw.len();
            if action.sub_band >= sub_bands || action.power_level >= levels {
                return Err(Error::ActionOutOfRange {
                    index: action.sub_band * levels + action.power_level,
                    size: sub_bands * levels,
                });
            }
            out.sub_band[n] = Some(action.sub_band);
            out.power_mw[n] = budget.power_levels_mw[action.power_level];
        }
        Ok(out)
    }

    /// Indicator matrix `rho[n][m]`.
    pub fn rho(&self, sub_bands: usize) -> Vec<Vec<bool>> {
        self.sub_band
            .iter()
            .map(|s| (0..sub_bands).map(|m| *s == Some(m)).collect())
            .collect()
    }
}

/// SINR of V2N link `m` at the base station.
pub fn v2n_sinr(budget: &LinkBudget, gains: &LinkGains, assignment: &Assignment, m: usize) -> f64 {
    let interference: f64 = assignment
        .sub_band
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == Some(m))
        .map(|(n, _)| assignment.power_mw[n] * gains.dc[n][m])
        .sum();
    budget.v2n_power_mw * gains.cc[m] / (interference + budget.bs_noise_mw)
}

/// SINR at member `i` of platoon `n`. Zero when the leader is silent.
pub fn v2v_sinr(
    budget: &LinkBudget,
    gains: &LinkGains,
    assignment: &Assignment,
    n: usize,
    i: usize,
) -> f64 {
    let Some(m) = assignment.sub_band[n] else {
        return 0.0;
    };
    let mut interference = budget.v2n_power_mw * gains.cd[m][n][i];
    for (l, s) in assignment.sub_band.iter().enumerate() {
        if l != n && *s == Some(m) {
            interference += assignment.power_mw[l] * gains.dd[l][n][i];
        }
    }
    assignment.power_mw[n] * gains.dd[n][n][i] / (interference + budget.vehicle_noise_mw)
}

/// Shannon rate in bits/s.
pub fn achievable_rate(sinr: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr).log2()
}

/// V2N and V2V rates for one assignment under fixed gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub v2n: Vec<f64>,
    /// `v2v[n][i]`; zero for silent leaders.
    pub v2v: Vec<Vec<f64>>,
}

pub fn link_rates(budget: &LinkBudget, gains: &LinkGains, assignment: &Assignment) -> Rates {
    let w = budget.bandwidth_hz;
    let v2n = (0..gains.cc.len())
        .map(|m| achievable_rate(v2n_sinr(budget, gains, assignment, m), w))
        .collect();
    let v2v = (0..gains.dd.len())
        .map(|n| {
            (0..gains.dd[n][n].len())
                .map(|i| achievable_rate(v2v_sinr(budget, gains, assignment, n, i), w))
                .collect()
        })
        .collect();
    Rates { v2n, v2v }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadState {
    /// `remaining_bits[n][i]`, never increasing within an episode.
    pub remaining_bits: Vec<Vec<f64>>,
    pub steps_elapsed: usize,
    pub active: Vec<bool>,
}

impl PayloadState {
    fn full(config: &EnvConfig) -> Self {
        Self {
            remaining_bits: vec![
                vec![config.payload_bits; config.members_per_platoon];
                config.platoons
            ],
            steps_elapsed: 0,
            active: vec![true; config.platoons],
        }
    }

    /// Remaining latency budget in ms.
    pub fn remaining_time_ms(&self, config: &EnvConfig) -> f64 {
        (config.latency_ms - self.steps_elapsed as f64 * config.step_ms).max(0.0)
    }

    pub fn all_inactive(&self) -> bool {
        self.active.iter().all(|a| !a)
    }
}

/// Per-link success flags: a link succeeds iff its payload is fully delivered.
pub fn delivery_success(payload: &PayloadState) -> Vec<Vec<bool>> {
    payload
        .remaining_bits
        .iter()
        .map(|row| row.iter().map(|r| *r <= 0.0).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub v2n_rates: Vec<f64>,
    pub v2v_rates: Vec<Vec<f64>>,
    pub payload: PayloadState,
    pub done: bool,
}

/// State of one episode.
#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    budget: LinkBudget,
    topology: Topology,
    large: LinkSet<LargeScale>,
    small: LinkSet<SmallScale>,
    gains: LinkGains,
    payload: PayloadState,
    last_assignment: Option<Assignment>,
    fading_rng: ChaCha8Rng,
}

impl Environment {
    /// Starts an episode: fresh drop, fresh large-scale fading (frozen for
    /// the episode), fresh small-scale fading and a full payload per link.
    ///
    /// Small-scale fading is driven by a private stream seeded from `rng`, so
    /// the fading sequence of an episode does not depend on how the caller
    /// uses its own random source while acting.
    pub fn reset<R: Rng + ?Sized>(config: EnvConfig, rng: &mut R) -> Result<Self> {
        let topology = channel::drop_topology(&config, rng)?;
        let large = channel::draw_large_scale(&config, &topology, rng)?;
        let mut fading_rng = ChaCha8Rng::seed_from_u64(rng.random());
        let small = channel::draw_small_scale(&config, &mut fading_rng);
        let gains = channel::combine(&large, &small);
        Ok(Self {
            budget: LinkBudget::from(&config),
            payload: PayloadState::full(&config),
            config,
            topology,
            large,
            small,
            gains,
            last_assignment: None,
            fading_rng,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn large_scale(&self) -> &LinkSet<LargeScale> {
        &self.large
    }

    pub fn small_scale(&self) -> &LinkSet<SmallScale> {
        &self.small
    }

    /// Gains of the fading block the next step will see.
    pub fn gains(&self) -> &LinkGains {
        &self.gains
    }

    pub fn payload(&self) -> &PayloadState {
        &self.payload
    }

    /// Assignment used by the previous step, if any.
    pub fn last_assignment(&self) -> Option<&Assignment> {
        self.last_assignment.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.payload.steps_elapsed >= self.config.horizon_steps() || self.payload.all_inactive()
    }

    pub fn active(&self) -> &[bool] {
        &self.payload.active
    }

    /// Rates a joint action would achieve on the current fading block,
    /// without advancing the episode.
    pub fn evaluate(&self, joint: &[Option<Action>]) -> Result<Rates> {
        let assignment = Assignment::from_actions(
            &self.budget,
            self.config.v2n_links,
            joint,
            &self.payload.active,
        )?;
        Ok(link_rates(&self.budget, &self.gains, &assignment))
    }

    /// V2N rates on the current block with every leader silent.
    pub fn interference_free_v2n_rates(&self) -> Vec<f64> {
        link_rates(
            &self.budget,
            &self.gains,
            &Assignment::silent(self.config.platoons),
        )
        .v2n
    }

    /// Applies a joint action (indexed by platoon; entries of inactive
    /// platoons are ignored), delivers bits, and moves to the next fading
    /// block.
    pub fn step(&mut self, joint: &[Option<Action>]) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::EpisodeFinished);
        }
        let assignment = Assignment::from_actions(
            &self.budget,
            self.config.v2n_links,
            joint,
            &self.payload.active,
        )?;
        let rates = link_rates(&self.budget, &self.gains, &assignment);
        let dt = self.config.step_seconds();
        for (n, row) in self.payload.remaining_bits.iter_mut().enumerate() {
            if !self.payload.active[n] {
                continue;
            }
            for (i, left) in row.iter_mut().enumerate() {
                *left = (*left - rates.v2v[n][i] * dt).max(0.0);
            }
            if row.iter().all(|r| *r <= 0.0) {
                self.payload.active[n] = false;
            }
        }
        self.payload.steps_elapsed += 1;
        self.last_assignment = Some(assignment);
        self.resample_fading();
        Ok(StepOutcome {
            v2n_rates: rates.v2n,
            v2v_rates: rates.v2v,
            payload: self.payload.clone(),
            done: self.is_done(),
        })
    }

    /// Advances one block after every platoon has finished, returning the
    /// interference-free V2N rates of that block. Lets callers account for
    /// the V2N links over the whole latency window.
    pub fn advance_idle(&mut self) -> Result<Vec<f64>> {
        if !self.payload.all_inactive() {
            return Err(Error::PlatoonsActive);
        }
        if self.payload.steps_elapsed >= self.config.horizon_steps() {
            return Err(Error::EpisodeFinished);
        }
        let rates = self.interference_free_v2n_rates();
        self.payload.steps_elapsed += 1;
        self.last_assignment = Some(Assignment::silent(self.config.platoons));
        self.resample_fading();
        Ok(rates)
    }

    fn resample_fading(&mut self) {
        self.small = channel::draw_small_scale(&self.config, &mut self.fading_rng);
        self.gains = channel::combine(&self.large, &self.small);
    }
}
