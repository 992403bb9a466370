//! Robot action selection: a Boltzmann policy over the joint Q values,
//! masked to robot actions that keep the joint action inside the current
//! trust region.
//!
//! Both agents act simultaneously, so the human action the robot conditions
//! on has to be a stand-in: either the previous step's observed human
//! action, or an expectation over the human model's own action distribution.

use rand::Rng;

use crate::boltzmann::{boltzmann, boltzmann_unmasked, BoltzmannDist};
use crate::env::JointAction;
use crate::learner::TrustRegion;
use crate::qtable::QTable;
use crate::{Error, Result};

/// How the robot resolves the simultaneous-move conditioning in its policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// Condition Q and the membership test on the previous observed human
    /// action (zero-equivalent at the first step).
    PreviousAction,
    /// Average Q and the membership test over the human model's Boltzmann
    /// distribution at the current state.
    Marginalize,
}

impl Conditioning {
    pub fn parse(s: &str) -> Result<Conditioning> {
        match s {
            "previous" => Ok(Conditioning::PreviousAction),
            "marginalize" => Ok(Conditioning::Marginalize),
            other => Err(Error::Config(format!(
                "unknown conditioning {other:?} (expected previous or marginalize)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Conditioning::PreviousAction => "previous",
            Conditioning::Marginalize => "marginalize",
        }
    }
}

/// Behavior when no robot action keeps the joint action inside the region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    /// Ignore the region for this step and flag it in the trajectory.
    Unconstrained,
    /// Commit to the single robot action with the largest decision value,
    /// the least-excluded choice.
    GreedySafe,
}

impl Fallback {
    pub fn parse(s: &str) -> Result<Fallback> {
        match s {
            "unconstrained" => Ok(Fallback::Unconstrained),
            "greedy-safe" => Ok(Fallback::GreedySafe),
            other => Err(Error::Config(format!(
                "unknown fallback {other:?} (expected unconstrained or greedy-safe)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Fallback::Unconstrained => "unconstrained",
            Fallback::GreedySafe => "greedy-safe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub beta_r: f64,
    pub conditioning: Conditioning,
    pub fallback: Fallback,
    /// Minimum predicted probability that the human's response stays inside
    /// the region for a robot action to pass the marginalized membership
    /// test. 0.5 admits anything more likely in than out; values near 1
    /// admit only actions with near-certain engagement.
    pub mask_threshold: f64,
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_r > 0.0) || !self.beta_r.is_finite() {
            return Err(Error::Config(format!(
                "agent.beta must be > 0 (got {})",
                self.beta_r
            )));
        }
        if !(self.mask_threshold >= 0.0 && self.mask_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "agent.mask_threshold must be in [0, 1] (got {})",
                self.mask_threshold
            )));
        }
        Ok(())
    }
}

/// Robot action distribution at state index `s_idx`, step `t`.
///
/// `a_h_ref_idx` is the human grid index the robot conditions on under
/// [`Conditioning::PreviousAction`]; `human_beta` is the human model's
/// temperature, used only under [`Conditioning::Marginalize`]. The returned
/// flag is true when the feasible set was empty and the fallback engaged.
pub fn robot_dist(
    q: &QTable,
    s_idx: usize,
    t: usize,
    a_h_ref_idx: usize,
    human_beta: f64,
    tr: &TrustRegion,
    cfg: &AgentConfig,
) -> Result<(BoltzmannDist, bool)> {
    cfg.validate()?;
    let n_r = q.n_robot();
    let n_h = q.n_human();
    if a_h_ref_idx >= n_h {
        return Err(Error::InvalidAction(format!(
            "human reference index {a_h_ref_idx} outside grid of {n_h}"
        )));
    }
    let layer = q.layer(s_idx, t);
    let joint = |i: usize, j: usize| JointAction {
        robot: q.robot_grid.point(i),
        human: q.human_grid.point(j),
    };

    let mut values = vec![0.0; n_r];
    let mut mask = vec![false; n_r];
    // Decision margin per robot action, used only by the greedy-safe
    // fallback; under marginalization it is the expected decision value.
    let mut margin = vec![0.0; n_r];
    match cfg.conditioning {
        Conditioning::PreviousAction => {
            for i in 0..n_r {
                values[i] = layer[i * n_h + a_h_ref_idx];
                let a = joint(i, a_h_ref_idx);
                mask[i] = tr.contains(&a);
                margin[i] = tr.g(&a);
            }
        }
        Conditioning::Marginalize => {
            for i in 0..n_r {
                let slice = &layer[i * n_h..(i + 1) * n_h];
                let pi_h = boltzmann_unmasked(slice, human_beta)?;
                let mut ev = 0.0;
                let mut inside = 0.0;
                let mut g_exp = 0.0;
                for (j, &p) in pi_h.probs().iter().enumerate() {
                    ev += p * slice[j];
                    let a = joint(i, j);
                    if tr.contains(&a) {
                        inside += p;
                    }
                    g_exp += p * tr.g(&a);
                }
                values[i] = ev;
                mask[i] = inside >= cfg.mask_threshold;
                margin[i] = g_exp;
            }
        }
    }

    match boltzmann(&values, cfg.beta_r, &mask) {
        Ok(dist) => Ok((dist, false)),
        Err(Error::EmptyFeasibleSet(_)) => match cfg.fallback {
            Fallback::Unconstrained => Ok((boltzmann_unmasked(&values, cfg.beta_r)?, true)),
            Fallback::GreedySafe => {
                let mut best = 0;
                for (i, &m) in margin.iter().enumerate() {
                    if m > margin[best] {
                        best = i;
                    }
                }
                Ok((BoltzmannDist::one_hot(n_r, best, cfg.beta_r), true))
            }
        },
        Err(e) => Err(e),
    }
}

/// Samples a robot grid index from the policy distribution.
pub fn robot_act<R: Rng + ?Sized>(dist: &BoltzmannDist, rng: &mut R) -> usize {
    dist.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvParams;
    use crate::grid::Grid;
    use crate::learner::{ConstraintModel, FeatureMap};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_q() -> QTable {
        let params = EnvParams {
            dt: 0.2,
            goal: vec![1.2],
            friction: 0.1,
            effort_weight: 0.5,
            gamma: 0.9,
            horizon: 4,
            dims: 1,
            state_lo: 0.0,
            state_hi: 2.0,
        };
        QTable::solve(
            &params,
            Grid::new(0.0, 2.0, 11, 1).unwrap(),
            Grid::new(0.0, 1.0, 5, 1).unwrap(),
            Grid::new(0.0, 1.0, 5, 1).unwrap(),
            0.5,
        )
        .unwrap()
    }

    fn cfg(conditioning: Conditioning, fallback: Fallback) -> AgentConfig {
        AgentConfig {
            beta_r: 0.5,
            conditioning,
            fallback,
            mask_threshold: 0.5,
        }
    }

    fn untrained_region(upper: f64) -> TrustRegion {
        ConstraintModel::new(1, FeatureMap::Linear, 0.05, 1e-7, false)
            .unwrap()
            .trust_region(&[upper], &crate::env::State {
                position: vec![1.0],
                t: 0,
            })
    }

    /// Region admitting exactly the robot actions with value >= lo, with a
    /// generous box.
    fn lower_bound_region(lo: f64) -> TrustRegion {
        TrustRegion {
            action_weights: vec![1.0, 0.0],
            action_quad: vec![0.0, 0.0],
            offset: -lo,
            robot_upper: vec![10.0],
            trained: true,
        }
    }

    #[test]
    fn untrained_region_reduces_to_unconstrained_exactly() {
        let q = small_q();
        let tr = untrained_region(1e9);
        let c = cfg(Conditioning::PreviousAction, Fallback::Unconstrained);
        let (dist, fell_back) = robot_dist(&q, 3, 1, 2, 0.5, &tr, &c).unwrap();
        assert!(!fell_back);
        let mut values = vec![0.0; q.n_robot()];
        for i in 0..q.n_robot() {
            values[i] = q.q(3, i, 2, 1);
        }
        let free = boltzmann_unmasked(&values, c.beta_r).unwrap();
        assert_eq!(dist, free);
    }

    #[test]
    fn single_survivor_is_one_hot() {
        let q = small_q();
        // Robot grid is {0, 0.25, 0.5, 0.75, 1.0}; admit only values > 0.9.
        let tr = lower_bound_region(0.95);
        let c = cfg(Conditioning::PreviousAction, Fallback::Unconstrained);
        let (dist, fell_back) = robot_dist(&q, 0, 0, 0, 0.5, &tr, &c).unwrap();
        assert!(!fell_back);
        assert_eq!(dist.probs()[4], 1.0);
        assert_eq!(dist.probs().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn masked_dist_matches_direct_enumeration() {
        let q = small_q();
        let tr = lower_bound_region(0.4);
        let c = cfg(Conditioning::PreviousAction, Fallback::Unconstrained);
        let (dist, _) = robot_dist(&q, 5, 2, 1, 0.5, &tr, &c).unwrap();
        // Naive renormalized exp(Q/beta) over members, no max subtraction.
        let mut weights = vec![0.0; q.n_robot()];
        let mut sum = 0.0;
        for i in 0..q.n_robot() {
            let a = JointAction {
                robot: q.robot_grid.point(i),
                human: q.human_grid.point(1),
            };
            if a.robot[0] >= 0.4 && a.robot[0] <= 10.0 && a.human[0] <= 10.0 {
                weights[i] = (q.q(5, i, 1, 2) / c.beta_r).exp();
                sum += weights[i];
            }
        }
        for (p, w) in dist.probs().iter().zip(&weights) {
            assert!((p - w / sum).abs() < 1e-12, "{p} vs {}", w / sum);
        }
    }

    #[test]
    fn empty_region_falls_back_unconstrained_with_flag() {
        let q = small_q();
        let tr = lower_bound_region(5.0);
        let c = cfg(Conditioning::PreviousAction, Fallback::Unconstrained);
        let (dist, fell_back) = robot_dist(&q, 2, 0, 0, 0.5, &tr, &c).unwrap();
        assert!(fell_back);
        let mut values = vec![0.0; q.n_robot()];
        for i in 0..q.n_robot() {
            values[i] = q.q(2, i, 0, 0);
        }
        assert_eq!(dist, boltzmann_unmasked(&values, c.beta_r).unwrap());
    }

    #[test]
    fn empty_region_greedy_safe_picks_largest_margin() {
        let q = small_q();
        // g(a) = a_r - 5: everything excluded, largest robot action wins.
        let tr = lower_bound_region(5.0);
        let c = cfg(Conditioning::PreviousAction, Fallback::GreedySafe);
        let (dist, fell_back) = robot_dist(&q, 2, 0, 0, 0.5, &tr, &c).unwrap();
        assert!(fell_back);
        assert_eq!(dist.probs(), &[0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn marginalize_matches_manual_expectation() {
        let q = small_q();
        let tr = lower_bound_region(0.4);
        let c = cfg(Conditioning::Marginalize, Fallback::Unconstrained);
        let human_beta = 0.7;
        let (dist, fell_back) = robot_dist(&q, 4, 1, 0, human_beta, &tr, &c).unwrap();
        assert!(!fell_back);
        let n_h = q.n_human();
        let mut values = vec![0.0; q.n_robot()];
        let mut mask = vec![false; q.n_robot()];
        for i in 0..q.n_robot() {
            let slice: Vec<f64> = (0..n_h).map(|j| q.q(4, i, j, 1)).collect();
            let pi = boltzmann_unmasked(&slice, human_beta).unwrap();
            values[i] = pi.probs().iter().zip(&slice).map(|(p, v)| p * v).sum();
            // The region only tests the robot coordinate here, so the
            // membership probability is 0 or 1.
            mask[i] = q.robot_grid.point(i)[0] >= 0.4;
        }
        let expect = boltzmann(&values, c.beta_r, &mask).unwrap();
        for (a, b) in dist.probs().iter().zip(expect.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_frequencies_match_probabilities() {
        let q = small_q();
        let tr = lower_bound_region(0.4);
        let c = cfg(Conditioning::PreviousAction, Fallback::Unconstrained);
        let (dist, _) = robot_dist(&q, 5, 1, 1, 0.5, &tr, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut counts = vec![0usize; dist.len()];
        for _ in 0..n {
            counts[robot_act(&dist, &mut rng)] += 1;
        }
        for (i, &p) in dist.probs().iter().enumerate() {
            let f = counts[i] as f64 / n as f64;
            assert!((f - p).abs() <= 0.005, "index {i}: {f} vs {p}");
            if p == 0.0 {
                assert_eq!(counts[i], 0);
            }
        }
    }

    #[test]
    fn out_of_range_reference_index_errors() {
        let q = small_q();
        let tr = untrained_region(1e9);
        let c = cfg(Conditioning::PreviousAction, Fallback::Unconstrained);
        assert!(robot_dist(&q, 0, 0, 99, 0.5, &tr, &c).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sampled_actions_stay_feasible(
            lo in 0.0f64..0.9,
            s in 0usize..11,
            t in 0usize..4,
            j in 0usize..5,
            seed in 0u64..1000,
        ) {
            let q = small_q();
            let tr = lower_bound_region(lo);
            let c = cfg(Conditioning::PreviousAction, Fallback::Unconstrained);
            let (dist, fell_back) = robot_dist(&q, s, t, j, 0.5, &tr, &c).unwrap();
            prop_assert!(!fell_back);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                let i = dist.sample(&mut rng);
                let a = JointAction {
                    robot: q.robot_grid.point(i),
                    human: q.human_grid.point(j),
                };
                prop_assert!(tr.contains(&a));
            }
        }

        #[test]
        fn shrinking_region_never_shrinks_survivor_probability(
            s in 0usize..11,
            t in 0usize..4,
            j in 0usize..5,
        ) {
            let q = small_q();
            let c = cfg(Conditioning::PreviousAction, Fallback::Unconstrained);
            let (wide, _) = robot_dist(&q, s, t, j, 0.5, &lower_bound_region(0.1), &c).unwrap();
            let (narrow, _) = robot_dist(&q, s, t, j, 0.5, &lower_bound_region(0.6), &c).unwrap();
            for (i, &p) in narrow.probs().iter().enumerate() {
                if p > 0.0 {
                    prop_assert!(p >= wide.probs()[i] - 1e-12);
                }
            }
        }
    }
}
