//! Single-cell drop model and channel gains.
//!
//! Vehicles are dropped on a grid of parallel straight lanes (streets) laid
//! out symmetrically around the base station at the cell center.
//! Large-scale fading (path loss plus log-normal shadowing) is drawn once per
//! drop; small-scale Rayleigh power gains are drawn i.i.d. from Exp(1) every
//! fading block.
//!
//! Link classes follow the usual underlay naming:
//!
//! * `cc`: V2N user `m` to the base station,
//! * `dc`: platoon leader `n` to the base station on sub-band `m`,
//! * `dd`: platoon leader `l` to member `i` of platoon `n`,
//! * `cd`: V2N user `m` to member `i` of platoon `n`.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::environment::EnvConfig;
use crate::error::{Error, Result};
use crate::units::kmh_to_mps;

/// Propagation constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub carrier_ghz: f64,
    pub v2n_shadowing_std_db: f64,
    pub v2v_shadowing_std_db: f64,
    pub v2n_min_distance_m: f64,
    pub v2v_min_distance_m: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_ghz: 2.0,
            v2n_shadowing_std_db: 8.0,
            v2v_shadowing_std_db: 3.0,
            v2n_min_distance_m: 10.0,
            v2v_min_distance_m: 3.0,
        }
    }
}

impl ChannelParams {
    /// Urban macro V2N path loss, `128.1 + 37.6 log10(d / 1 km)`.
    pub fn v2n_pathloss_db(&self, distance_m: f64) -> Result<f64> {
        if !(distance_m > 0.0) {
            return Err(Error::NonPositiveDistance(distance_m));
        }
        let d = distance_m.max(self.v2n_min_distance_m);
        Ok(128.1 + 37.6 * (d / 1000.0).log10())
    }

    /// Urban LOS V2V path loss, `38.77 + 16.7 log10(d) + 18.2 log10(f_GHz)`.
    pub fn v2v_pathloss_db(&self, distance_m: f64) -> Result<f64> {
        if !(distance_m > 0.0) {
            return Err(Error::NonPositiveDistance(distance_m));
        }
        let d = distance_m.max(self.v2v_min_distance_m);
        Ok(38.77 + 16.7 * d.log10() + 18.2 * self.carrier_ghz.log10())
    }
}

/// Road layout and vehicle dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Geometry {
    pub cell_radius_m: f64,
    /// Signed y coordinate of the first lane; the base station is the origin.
    pub road_offset_m: f64,
    pub lane_count: usize,
    /// Distance between adjacent lane centerlines.
    pub lane_spacing_m: f64,
    pub lane_length_m: f64,
    pub vehicle_length_m: f64,
    /// Bumper-to-bumper gap between adjacent platoon vehicles.
    pub intra_platoon_gap_m: f64,
    /// Minimum free space between distinct vehicle groups (a platoon or a
    /// V2N vehicle) sharing a lane.
    pub min_group_spacing_m: f64,
    pub speed_min_kmh: f64,
    pub speed_max_kmh: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            cell_radius_m: 1200.0,
            road_offset_m: -600.0,
            lane_count: 4,
            lane_spacing_m: 400.0,
            lane_length_m: 2000.0,
            vehicle_length_m: 4.0,
            intra_platoon_gap_m: 1.0,
            min_group_spacing_m: 250.0,
            speed_min_kmh: 36.0,
            speed_max_kmh: 54.0,
        }
    }
}

impl Geometry {
    pub fn lane_y(&self, lane: usize) -> f64 {
        self.road_offset_m + lane as f64 * self.lane_spacing_m
    }

    /// Bumper-to-bumper length of a platoon with `vehicles` cars.
    pub fn platoon_length_m(&self, vehicles: usize) -> f64 {
        vehicles as f64 * self.vehicle_length_m
            + vehicles.saturating_sub(1) as f64 * self.intra_platoon_gap_m
    }

    /// Distance between antenna points (vehicle midpoints) of adjacent
    /// platoon vehicles.
    pub fn antenna_spacing_m(&self) -> f64 {
        self.vehicle_length_m + self.intra_platoon_gap_m
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.lane_count == 0 {
            return bad("lane_count must be at least 1");
        }
        if !(self.lane_length_m > 0.0) || !(self.vehicle_length_m > 0.0) {
            return bad("lane and vehicle lengths must be positive");
        }
        if self.intra_platoon_gap_m < 0.0 || self.min_group_spacing_m < 0.0 || self.lane_spacing_m < 0.0 {
            return bad("gaps and lane spacing must be nonnegative");
        }
        if !(self.speed_min_kmh >= 0.0 && self.speed_min_kmh <= self.speed_max_kmh) {
            return bad("speed range must satisfy 0 <= min <= max");
        }
        let far_y = self.lane_y(self.lane_count - 1).abs().max(self.lane_y(0).abs());
        let half = self.lane_length_m / 2.0;
        if half.hypot(far_y) > self.cell_radius_m {
            return bad("road segment extends outside the cell radius");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub lane: usize,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonLayout {
    pub leader: Position,
    pub members: Vec<Position>,
}

/// One drop of the network. `velocities` lists V2N users first, then every
/// platoon's leader followed by its members, in m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub bs: Position,
    pub v2n_users: Vec<Position>,
    pub platoons: Vec<PlatoonLayout>,
    pub velocities: Vec<f64>,
}

/// Occupied stretch of a lane, `[rear, front]` in x.
#[derive(Debug, Clone, Copy)]
struct Occupancy {
    lane: usize,
    rear: f64,
    front: f64,
}

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

fn place<R: Rng + ?Sized>(
    geometry: &Geometry,
    length: f64,
    occupied: &mut Vec<Occupancy>,
    rng: &mut R,
) -> Result<Occupancy> {
    let half = geometry.lane_length_m / 2.0;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let lane = rng.random_range(0..geometry.lane_count);
        let rear = if length >= geometry.lane_length_m {
            -half
        } else {
            rng.random_range(-half..half - length)
        };
        let slot = Occupancy {
            lane,
            rear,
            front: rear + length,
        };
        let clash = occupied.iter().any(|o| {
            o.lane == slot.lane
                && slot.rear < o.front + geometry.min_group_spacing_m
                && o.rear < slot.front + geometry.min_group_spacing_m
        });
        if !clash {
            occupied.push(slot);
            return Ok(slot);
        }
    }
    Err(Error::InvalidConfig(
        "lane grid too crowded to place every vehicle".into(),
    ))
}

/// Drops V2N users and platoons uniformly on the lane grid without overlap.
pub fn drop_topology<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> Result<Topology> {
    config.validate()?;
    let g = &config.geometry;
    let vehicles = config.members_per_platoon + 1;
    let platoon_len = g.platoon_length_m(vehicles);
    let spacing = g.antenna_spacing_m();
    let speed = |rng: &mut R| {
        kmh_to_mps(if g.speed_max_kmh > g.speed_min_kmh {
            rng.random_range(g.speed_min_kmh..=g.speed_max_kmh)
        } else {
            g.speed_min_kmh
        })
    };

    let mut occupied = Vec::new();
    let mut velocities = Vec::with_capacity(config.v2n_links + config.platoons * vehicles);
    let mut platoons = Vec::with_capacity(config.platoons);
    let mut platoon_speeds = Vec::with_capacity(config.platoons);
    for _ in 0..config.platoons {
        let slot = place(g, platoon_len, &mut occupied, rng)?;
        let y = g.lane_y(slot.lane);
        // Leader drives at the front; antennas sit at vehicle midpoints.
        let leader_x = slot.front - g.vehicle_length_m / 2.0;
        let at = |k: usize| Position {
            x: leader_x - k as f64 * spacing,
            y,
            lane: slot.lane,
        };
        platoons.push(PlatoonLayout {
            leader: at(0),
            members: (1..vehicles).map(at).collect(),
        });
        platoon_speeds.push(speed(rng));
    }
    let mut v2n_users = Vec::with_capacity(config.v2n_links);
    for _ in 0..config.v2n_links {
        let slot = place(g, g.vehicle_length_m, &mut occupied, rng)?;
        v2n_users.push(Position {
            x: slot.rear + g.vehicle_length_m / 2.0,
            y: g.lane_y(slot.lane),
            lane: slot.lane,
        });
        velocities.push(speed(rng));
    }
    for v in platoon_speeds {
        velocities.extend(std::iter::repeat_n(v, vehicles));
    }

    Ok(Topology {
        bs: Position {
            x: 0.0,
            y: 0.0,
            lane: usize::MAX,
        },
        v2n_users,
        platoons,
        velocities,
    })
}

/// Path loss and shadowing of one link; fixed for an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeScale {
    pub pathloss_db: f64,
    pub shadowing_db: f64,
}

/// Small-scale fading power of one link for one fading block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallScale {
    pub power_gain: f64,
}

pub fn sample_shadowing<R: Rng + ?Sized>(rng: &mut R, std_db: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    std_db * z
}

pub fn sample_small_scale<R: Rng + ?Sized>(rng: &mut R) -> SmallScale {
    SmallScale {
        power_gain: rng.sample(Exp1),
    }
}

pub fn combined_gain(large: LargeScale, small: SmallScale) -> f64 {
    10f64.powf((large.shadowing_db - large.pathloss_db) / 10.0) * small.power_gain
}

/// Per-link values for every link class of a drop.
///
/// Shapes: `cc[m]`, `dc[n][m]`, `dd[l][n][i]`, `cd[m][n][i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSet<T> {
    pub cc: Vec<T>,
    pub dc: Vec<Vec<T>>,
    pub dd: Vec<Vec<Vec<T>>>,
    pub cd: Vec<Vec<Vec<T>>>,
}

impl<T> LinkSet<T> {
    fn build(m: usize, n: usize, v: usize, mut f: impl FnMut(LinkId) -> T) -> Self {
        let cc = (0..m).map(|m| f(LinkId::Cc { m })).collect();
        let dc = (0..n)
            .map(|n| (0..m).map(|_| f(LinkId::Dc { n })).collect())
            .collect();
        let dd = (0..n)
            .map(|l| {
                (0..n)
                    .map(|n| (0..v).map(|i| f(LinkId::Dd { l, n, i })).collect())
                    .collect()
            })
            .collect();
        let cd = (0..m)
            .map(|m| {
                (0..n)
                    .map(|n| (0..v).map(|i| f(LinkId::Cd { m, n, i })).collect())
                    .collect()
            })
            .collect();
        LinkSet { cc, dc, dd, cd }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> LinkSet<U> {
        LinkSet {
            cc: self.cc.iter().map(&mut f).collect(),
            dc: self.dc.iter().map(|r| r.iter().map(&mut f).collect()).collect(),
            dd: self
                .dd
                .iter()
                .map(|a| a.iter().map(|r| r.iter().map(&mut f).collect()).collect())
                .collect(),
            cd: self
                .cd
                .iter()
                .map(|a| a.iter().map(|r| r.iter().map(&mut f).collect()).collect())
                .collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.cc
            .iter()
            .chain(self.dc.iter().flatten())
            .chain(self.dd.iter().flatten().flatten())
            .chain(self.cd.iter().flatten().flatten())
    }
}

#[derive(Debug, Clone, Copy)]
enum LinkId {
    Cc { m: usize },
    Dc { n: usize },
    Dd { l: usize, n: usize, i: usize },
    Cd { m: usize, n: usize, i: usize },
}

/// Combined linear power gains for one fading block.
pub type LinkGains = LinkSet<f64>;

/// Draws path loss and shadowing for every link of a drop. The leader to
/// base-station large-scale value is shared across sub-bands.
pub fn draw_large_scale<R: Rng + ?Sized>(
    config: &EnvConfig,
    topology: &Topology,
    rng: &mut R,
) -> Result<LinkSet<LargeScale>> {
    let p = &config.channel;
    let (m, n, v) = (config.v2n_links, config.platoons, config.members_per_platoon);
    let mut leader_bs = Vec::with_capacity(n);
    for platoon in &topology.platoons {
        leader_bs.push(LargeScale {
            pathloss_db: p.v2n_pathloss_db(platoon.leader.distance(&topology.bs))?,
            shadowing_db: sample_shadowing(rng, p.v2n_shadowing_std_db),
        });
    }
    let mut failure = None;
    let mut link = |id: LinkId| -> LargeScale {
        let (pl, std) = match id {
            LinkId::Cc { m } => (
                p.v2n_pathloss_db(topology.v2n_users[m].distance(&topology.bs)),
                p.v2n_shadowing_std_db,
            ),
            LinkId::Dc { n } => return leader_bs[n],
            LinkId::Dd { l, n, i } => (
                p.v2v_pathloss_db(
                    topology.platoons[l]
                        .leader
                        .distance(&topology.platoons[n].members[i]),
                ),
                p.v2v_shadowing_std_db,
            ),
            LinkId::Cd { m, n, i } => (
                p.v2v_pathloss_db(topology.v2n_users[m].distance(&topology.platoons[n].members[i])),
                p.v2v_shadowing_std_db,
            ),
        };
        let pathloss_db = pl.unwrap_or_else(|e| {
            failure.get_or_insert(e);
            f64::INFINITY
        });
        LargeScale {
            pathloss_db,
            shadowing_db: sample_shadowing(rng, std),
        }
    };
    let set = LinkSet::build(m, n, v, &mut link);
    match failure {
        Some(e) => Err(e),
        None => Ok(set),
    }
}

/// Draws a fresh block of i.i.d. Exp(1) small-scale gains. Leader to
/// base-station fading is independent per sub-band; V2V fading is flat
/// across sub-bands.
pub fn draw_small_scale<R: Rng + ?Sized>(
    config: &EnvConfig,
    rng: &mut R,
) -> LinkSet<SmallScale> {
    LinkSet::build(
        config.v2n_links,
        config.platoons,
        config.members_per_platoon,
        |_| sample_small_scale(rng),
    )
}

/// Elementwise product of large- and small-scale fading.
pub fn combine(large: &LinkSet<LargeScale>, small: &LinkSet<SmallScale>) -> LinkGains {
    // `map` and `values` traverse in the same order.
    let mut large_iter = large.values();
    small.map(|s| combined_gain(*large_iter.next().expect("congruent link sets"), *s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(m: usize, n: usize) -> EnvConfig {
        EnvConfig {
            v2n_links: m,
            platoons: n,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn v2n_pathloss_values() {
        let p = ChannelParams::default();
        assert!((p.v2n_pathloss_db(1000.0).unwrap() - 128.1).abs() < 1e-12);
        assert!((p.v2n_pathloss_db(100.0).unwrap() - 90.5).abs() < 1e-9);
        assert_eq!(p.v2n_pathloss_db(5.0).unwrap(), p.v2n_pathloss_db(10.0).unwrap());
        assert!(matches!(p.v2n_pathloss_db(0.0), Err(Error::NonPositiveDistance(_))));
        assert!(p.v2n_pathloss_db(-3.0).is_err());
    }

    #[test]
    fn v2v_pathloss_values() {
        let p = ChannelParams::default();
        let expected = 38.77 + 16.7 + 18.2 * 2f64.log10();
        assert!((p.v2v_pathloss_db(10.0).unwrap() - expected).abs() < 1e-12);
        assert!((p.v2v_pathloss_db(10.0).unwrap() - 60.95).abs() < 0.01);
        assert_eq!(p.v2v_pathloss_db(3.0).unwrap(), p.v2v_pathloss_db(1.0).unwrap());
        assert!(p.v2v_pathloss_db(20.0).unwrap() > p.v2v_pathloss_db(10.0).unwrap());
        assert!(p.v2v_pathloss_db(f64::NAN).is_err());
    }

    #[test]
    fn shadowing_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(sample_shadowing(&mut rng, 0.0), 0.0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_shadowing(&mut rng, 8.0)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((var.sqrt() - 8.0).abs() < 0.2, "std {}", var.sqrt());

        let a = sample_shadowing(&mut ChaCha8Rng::seed_from_u64(5), 8.0);
        let b = sample_shadowing(&mut ChaCha8Rng::seed_from_u64(5), 8.0);
        assert_eq!(a, b);
    }

    #[test]
    fn small_scale_is_unit_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_small_scale(&mut rng).power_gain).collect();
        assert!(draws.iter().all(|g| *g >= 0.0));
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        let tail = draws.iter().filter(|g| **g > 1.0).count() as f64 / n as f64;
        assert!((tail - (-1f64).exp()).abs() < 0.01, "tail {tail}");

        let a = sample_small_scale(&mut ChaCha8Rng::seed_from_u64(5));
        let b = sample_small_scale(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn combined_gain_identities() {
        let unit = SmallScale { power_gain: 1.0 };
        let g = combined_gain(LargeScale { pathloss_db: 100.0, shadowing_db: 0.0 }, unit);
        assert!((g - 1e-10).abs() < 1e-22);
        let g = combined_gain(LargeScale { pathloss_db: 100.0, shadowing_db: 10.0 }, unit);
        assert!((g - 1e-9).abs() < 1e-21);
        let g = combined_gain(
            LargeScale { pathloss_db: 73.0, shadowing_db: -2.0 },
            SmallScale { power_gain: 0.0 },
        );
        assert_eq!(g, 0.0);
    }

    #[test]
    fn drop_matches_platoon_layout() {
        let cfg = config(2, 4);
        let topo = drop_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(topo.v2n_users.len(), 2);
        assert_eq!(topo.platoons.len(), 4);
        assert_eq!(topo.velocities.len(), 2 + 4 * 4);
        let g = &cfg.geometry;
        for p in &topo.platoons {
            assert_eq!(p.members.len(), 3);
            let mut prev = p.leader;
            for m in &p.members {
                assert_eq!(m.lane, p.leader.lane);
                assert!((prev.x - m.x - 5.0).abs() < 1e-12);
                prev = *m;
            }
            for pos in std::iter::once(&p.leader).chain(&p.members) {
                assert!(pos.x.hypot(pos.y) <= g.cell_radius_m);
            }
        }
        for v in &topo.velocities {
            assert!(*v >= 10.0 - 1e-12 && *v <= 15.0 + 1e-12);
        }
    }

    #[test]
    fn drop_is_deterministic() {
        let cfg = config(2, 4);
        let a = drop_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = drop_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn drop_rejects_bad_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            drop_topology(&config(0, 1), &mut rng),
            Err(Error::InvalidConfig(msg)) if msg.contains("sub-band")
        ));
        let mut cfg = config(1, 1);
        cfg.geometry.lane_length_m = 15.0;
        assert!(drop_topology(&cfg, &mut rng).is_err());
    }

    #[test]
    fn large_scale_shapes_and_finiteness() {
        let cfg = config(2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let topo = drop_topology(&cfg, &mut rng).unwrap();
        let large = draw_large_scale(&cfg, &topo, &mut rng).unwrap();
        assert_eq!(large.cc.len(), 2);
        assert_eq!(large.dc.len(), 4);
        assert_eq!(large.dc[0].len(), 2);
        assert_eq!(large.dd.len(), 4);
        assert_eq!(large.dd[0].len(), 4);
        assert_eq!(large.dd[0][0].len(), 3);
        assert_eq!(large.cd.len(), 2);
        // Leader to base station large-scale fading does not depend on the sub-band.
        for row in &large.dc {
            assert_eq!(row[0], row[1]);
        }
        let small = draw_small_scale(&cfg, &mut rng);
        let gains = combine(&large, &small);
        assert!(gains.values().all(|g| g.is_finite() && *g >= 0.0));
        assert_eq!(gains.values().count(), large.values().count());
    }
}
