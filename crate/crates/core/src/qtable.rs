//! Joint action-value table over the discretized task.
//!
//! `solve` runs finite-horizon backward induction on the product grid of
//! states and joint actions. The continuation value at a state is the
//! Boltzmann-weighted mean of the next layer over all joint actions, i.e.
//! both agents are modeled as jointly softmax-rational at one temperature.
//! `mc_estimate` replays the same discretized chain by sampling and serves
//! as an independent check on the induction.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;

use crate::boltzmann::{boltzmann_unmasked, BoltzmannDist};
use crate::env::{advance, reward, EnvParams, JointAction, State};
use crate::grid::Grid;
use crate::{Error, Result};

/// Upper bound on table cells; past this the solve would not fit in memory.
const MAX_CELLS: usize = 200_000_000;

/// Dense value table `q(s, aR, aH, t)` on the product of three grids.
#[derive(Debug, Clone)]
pub struct QTable {
    /// Layout: `[t][state][robot][human]`, t-major.
    values: Vec<f64>,
    pub state_grid: Grid,
    pub robot_grid: Grid,
    pub human_grid: Grid,
    pub gamma: f64,
    pub horizon: usize,
    /// Temperature of the joint softmax used for continuation values.
    pub beta: f64,
}

impl QTable {
    /// Backward induction over the full horizon.
    ///
    /// The terminal layer equals the immediate reward; earlier layers add
    /// the discounted continuation value of the snapped successor state.
    pub fn solve(
        params: &EnvParams,
        state_grid: Grid,
        robot_grid: Grid,
        human_grid: Grid,
        beta: f64,
    ) -> Result<QTable> {
        params.validate()?;
        for (name, g) in [
            ("state", &state_grid),
            ("robot", &robot_grid),
            ("human", &human_grid),
        ] {
            if g.dims() != params.dims {
                return Err(Error::Config(format!(
                    "{name} grid has {} dims but env.dims = {}",
                    g.dims(),
                    params.dims
                )));
            }
        }
        let n_s = state_grid.len();
        let n_r = robot_grid.len();
        let n_h = human_grid.len();
        let na = n_r * n_h;
        let cells = params
            .horizon
            .checked_mul(n_s)
            .and_then(|c| c.checked_mul(na))
            .filter(|&c| c <= MAX_CELLS)
            .ok_or_else(|| {
                Error::Config(format!(
                    "q table of {} x {} x {} x {} cells exceeds the {} cell limit",
                    params.horizon, n_s, n_r, n_h, MAX_CELLS
                ))
            })?;

        let robot_pts: Vec<Vec<f64>> = (0..n_r).map(|i| robot_grid.point(i)).collect();
        let human_pts: Vec<Vec<f64>> = (0..n_h).map(|j| human_grid.point(j)).collect();

        // Rewards and snapped successors depend on (s, a) only, not on t.
        let mut reward_slab = vec![0.0; n_s * na];
        let mut next_slab = vec![0usize; n_s * na];
        for s in 0..n_s {
            let pos = state_grid.point(s);
            let st = State {
                position: pos.clone(),
                t: 0,
            };
            for (i, ar) in robot_pts.iter().enumerate() {
                for (j, ah) in human_pts.iter().enumerate() {
                    let a = JointAction {
                        robot: ar.clone(),
                        human: ah.clone(),
                    };
                    let cell = (s * n_r + i) * n_h + j;
                    reward_slab[cell] = reward(params, &st, &a);
                    let total: Vec<f64> = ar.iter().zip(ah).map(|(r, h)| r + h).collect();
                    next_slab[cell] = state_grid.nearest(&advance(params, &pos, &total));
                }
            }
        }

        let mut values = vec![0.0; cells];
        let mut v_next = vec![0.0; n_s];
        for t in (0..params.horizon).rev() {
            let base = t * n_s * na;
            if t == params.horizon - 1 {
                values[base..base + n_s * na].copy_from_slice(&reward_slab);
            } else {
                for cell in 0..n_s * na {
                    values[base + cell] =
                        reward_slab[cell] + params.gamma * v_next[next_slab[cell]];
                }
            }
            let mut v_t = vec![0.0; n_s];
            for (s, v) in v_t.iter_mut().enumerate() {
                let layer = &values[base + s * na..base + (s + 1) * na];
                let dist = boltzmann_unmasked(layer, beta)?;
                *v = dist
                    .probs()
                    .iter()
                    .zip(layer)
                    .map(|(p, q)| p * q)
                    .sum::<f64>();
            }
            v_next = v_t;
        }

        Ok(QTable {
            values,
            state_grid,
            robot_grid,
            human_grid,
            gamma: params.gamma,
            horizon: params.horizon,
            beta,
        })
    }

    pub fn n_states(&self) -> usize {
        self.state_grid.len()
    }

    pub fn n_robot(&self) -> usize {
        self.robot_grid.len()
    }

    pub fn n_human(&self) -> usize {
        self.human_grid.len()
    }

    /// Value of joint action `(i_r, j_h)` in state index `s` at step `t`.
    pub fn q(&self, s: usize, i_r: usize, j_h: usize, t: usize) -> f64 {
        let na = self.n_robot() * self.n_human();
        self.values[(t * self.n_states() + s) * na + (i_r * self.n_human() + j_h)]
    }

    /// All joint-action values at `(s, t)`, robot-major.
    pub fn layer(&self, s: usize, t: usize) -> &[f64] {
        let na = self.n_robot() * self.n_human();
        let base = (t * self.n_states() + s) * na;
        &self.values[base..base + na]
    }

    /// Human-action values at `(s, t)` for a fixed robot action.
    pub fn human_slice(&self, s: usize, i_r: usize, t: usize) -> &[f64] {
        let layer = self.layer(s, t);
        &layer[i_r * self.n_human()..(i_r + 1) * self.n_human()]
    }

    /// Reward and snapped successor of taking `(i_r, j_h)` from state `s`.
    fn transition(&self, params: &EnvParams, s: usize, i_r: usize, j_h: usize) -> (f64, usize) {
        let pos = self.state_grid.point(s);
        let ar = self.robot_grid.point(i_r);
        let ah = self.human_grid.point(j_h);
        let a = JointAction {
            robot: ar.clone(),
            human: ah.clone(),
        };
        let r = reward(
            params,
            &State {
                position: pos.clone(),
                t: 0,
            },
            &a,
        );
        let total: Vec<f64> = ar.iter().zip(&ah).map(|(x, y)| x + y).collect();
        let next = self.state_grid.nearest(&advance(params, &pos, &total));
        (r, next)
    }

    /// Monte Carlo return of the discretized chain: take `(i_r, j_h)` at
    /// `(s, t)`, then follow the joint softmax policy to the horizon.
    ///
    /// Returns `(mean, std_err)` over `n` rollouts, with the standard error
    /// computed from the n-1 sample standard deviation.
    pub fn mc_estimate<R: Rng + ?Sized>(
        &self,
        params: &EnvParams,
        s: usize,
        i_r: usize,
        j_h: usize,
        t: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        if t >= self.horizon {
            return Err(Error::HorizonExceeded {
                t,
                horizon: self.horizon,
            });
        }
        if n < 2 {
            return Err(Error::Config(format!(
                "mc_estimate needs n >= 2 rollouts (got {n})"
            )));
        }
        let n_h = self.n_human();
        let mut policy_cache: HashMap<(usize, usize), BoltzmannDist> = HashMap::new();
        let mut returns = Vec::with_capacity(n);
        for _ in 0..n {
            let (r0, mut cur) = self.transition(params, s, i_r, j_h);
            let mut total = r0;
            let mut w = 1.0;
            for tt in t + 1..self.horizon {
                w *= self.gamma;
                let dist = match policy_cache.entry((cur, tt)) {
                    std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(boltzmann_unmasked(self.layer(cur, tt), self.beta)?)
                    }
                };
                let k = dist.sample(rng);
                let (r, next) = self.transition(params, cur, k / n_h, k % n_h);
                total += w * r;
                cur = next;
            }
            returns.push(total);
        }
        let mean = returns.iter().sum::<f64>() / n as f64;
        let var = returns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        Ok((mean, var.sqrt() / (n as f64).sqrt()))
    }

    /// Writes the full table as CSV, one row per cell, state-major then t,
    /// robot, human. Row order and float formatting are deterministic.
    pub fn dump_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "state,t,robot,human,q")?;
        for s in 0..self.n_states() {
            for t in 0..self.horizon {
                for i in 0..self.n_robot() {
                    for j in 0..self.n_human() {
                        writeln!(w, "{s},{t},{i},{j},{}", self.q(s, i, j, t))?;
                    }
                }
            }
        }
        Ok(())
    }
}
