//! Centralized reference allocators: per-step exhaustive search with global
//! channel knowledge, and uniform random allocation.

use rand::Rng;

use crate::environment::{achievable_rate, v2n_sinr, v2v_sinr, Assignment, Environment};
use crate::error::{Error, Result};
use crate::mdp::{Action, ActionSpace};

/// Default bound on the number of joint actions one exhaustive step may scan.
pub const DEFAULT_SEARCH_CAP: u64 = 1 << 20;

/// Sum of all V2N rates plus the rates of V2V links that still have bits to
/// deliver, in bits/s.
pub fn sum_rate_objective(env: &Environment, assignment: &Assignment) -> f64 {
    let budget = env.budget();
    let gains = env.gains();
    let payload = env.payload();
    let w = budget.bandwidth_hz;
    let mut total: f64 = (0..gains.cc.len())
        .map(|m| achievable_rate(v2n_sinr(budget, gains, assignment, m), w))
        .sum();
    for (n, left) in payload.remaining_bits.iter().enumerate() {
        if assignment.sub_band[n].is_none() {
            continue;
        }
        for (i, bits) in left.iter().enumerate() {
            if *bits > 0.0 {
                total += achievable_rate(v2v_sinr(budget, gains, assignment, n, i), w);
            }
        }
    }
    total
}

/// Number of joint actions over the active platoons, `|A|^active`.
pub fn joint_space_size(env: &Environment) -> u128 {
    let per_agent = ActionSpace::for_config(env.config()).size() as u128;
    let active = env.active().iter().filter(|a| **a).count() as u32;
    per_agent.pow(active)
}

/// Scans every joint action of the active platoons on the current fading
/// block and returns the one with the largest [`sum_rate_objective`].
///
/// Joint actions are ranked by the mixed-radix index whose most significant
/// digit is the flat action of the lowest-numbered active platoon; ties go to
/// the lowest index.
pub fn exhaustive_step(env: &Environment, cap: u64) -> Result<Vec<Option<Action>>> {
    let size = joint_space_size(env);
    if size > cap as u128 {
        return Err(Error::SearchSpaceTooLarge { size, cap });
    }
    let space = ActionSpace::for_config(env.config());
    let budget = env.budget();
    let active: Vec<usize> = (0..env.active().len()).filter(|n| env.active()[*n]).collect();
    let per_agent = space.size();

    let mut assignment = Assignment::silent(env.active().len());
    let mut digits = vec![0usize; active.len()];
    let mut best_index = 0usize;
    let mut best_value = f64::NEG_INFINITY;
    for index in 0..size as usize {
        // Decode `index` into per-platoon flat actions.
        let mut rest = index;
        for slot in digits.iter_mut().rev() {
            *slot = rest % per_agent;
            rest /= per_agent;
        }
        for (&n, &flat) in active.iter().zip(&digits) {
            assignment.sub_band[n] = Some(flat / space.power_levels);
            assignment.power_mw[n] = budget.power_levels_mw[flat % space.power_levels];
        }
        let value = sum_rate_objective(env, &assignment);
        if value > best_value {
            best_value = value;
            best_index = index;
        }
    }

    let mut joint = vec![None; env.active().len()];
    let mut rest = best_index;
    for &n in active.iter().rev() {
        joint[n] = Some(space.decode(rest % per_agent)?);
        rest /= per_agent;
    }
    Ok(joint)
}

/// Every active platoon draws a sub-band and a power level uniformly.
pub fn random_step<R: Rng + ?Sized>(env: &Environment, rng: &mut R) -> Vec<Option<Action>> {
    let space = ActionSpace::for_config(env.config());
    env.active()
        .iter()
        .map(|active| {
            active.then(|| Action {
                sub_band: rng.random_range(0..space.sub_bands),
                power_level: rng.random_range(0..space.power_levels),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::EnvConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(m: usize, n: usize, seed: u64) -> Environment {
        let cfg = EnvConfig {
            v2n_links: m,
            platoons: n,
            ..EnvConfig::default()
        };
        Environment::reset(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn objective_of(env: &Environment, joint: &[Option<Action>]) -> f64 {
        let a = Assignment::from_actions(env.budget(), env.config().v2n_links, joint, env.active())
            .unwrap();
        sum_rate_objective(env, &a)
    }

    #[test]
    fn single_platoon_single_band_matches_direct_max() {
        let e = env(1, 1, 1);
        assert_eq!(joint_space_size(&e), 4);
        let best = exhaustive_step(&e, DEFAULT_SEARCH_CAP).unwrap();
        let values: Vec<f64> = (0..4)
            .map(|p| objective_of(&e, &[Some(Action { sub_band: 0, power_level: p })]))
            .collect();
        let expected = crate::agent::argmax(&values);
        assert_eq!(best[0], Some(Action { sub_band: 0, power_level: expected }));
    }

    #[test]
    fn default_instance_size() {
        assert_eq!(joint_space_size(&env(2, 4, 0)), 4096);
    }

    #[test]
    fn cap_is_enforced() {
        let e = env(2, 4, 0);
        assert!(matches!(
            exhaustive_step(&e, 4095),
            Err(Error::SearchSpaceTooLarge { size: 4096, cap: 4095 })
        ));
    }

    #[test]
    fn exhaustive_dominates_random_joint_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..5 {
            let mut e = env(2, 3, seed);
            while !e.is_done() {
                let best = exhaustive_step(&e, DEFAULT_SEARCH_CAP).unwrap();
                let best_value = objective_of(&e, &best);
                for _ in 0..100 {
                    let other = random_step(&e, &mut rng);
                    assert!(objective_of(&e, &other) <= best_value);
                }
                e.step(&best).unwrap();
            }
        }
    }

    #[test]
    fn random_single_band() {
        let e = env(1, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(random_step(&e, &mut rng).iter().all(|a| a.unwrap().sub_band == 0));
        }
    }

    #[test]
    fn random_is_uniform_and_reproducible() {
        let e = env(2, 1, 2);
        let space = ActionSpace::new(2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws = 100_000;
        let mut counts = [0usize; 8];
        for _ in 0..draws {
            let a = random_step(&e, &mut rng)[0].unwrap();
            counts[space.encode(a).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.125).abs() < 0.01);
        }
        let seq = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| random_step(&e, &mut r)).collect::<Vec<_>>()
        };
        assert_eq!(seq(5), seq(5));
    }
}
