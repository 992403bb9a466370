//! Transport task: a point object pushed along each axis by the summed
//! robot and human forces against dry friction, inside a bounded workspace.

use rand::Rng;

use crate::grid::Grid;
use crate::{Error, Result};

/// Physical and episode parameters of the transport task.
///
/// All task dimensions share the workspace interval `[state_lo, state_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvParams {
    /// Integration step in seconds.
    pub dt: f64,
    /// Target position, one coordinate per task dimension.
    pub goal: Vec<f64>,
    /// Dry friction threshold: net force below it produces no motion.
    pub friction: f64,
    /// Weight of the squared-effort penalty in the reward.
    pub effort_weight: f64,
    /// Discount factor.
    pub gamma: f64,
    /// Episode length in steps.
    pub horizon: usize,
    /// Task dimensionality (1 or 2).
    pub dims: usize,
    /// Workspace lower bound per dimension.
    pub state_lo: f64,
    /// Workspace upper bound per dimension.
    pub state_hi: f64,
}

impl EnvParams {
    /// Checks the parameter invariants, naming the offending field on error.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("env.dt must be > 0 (got {})", self.dt)));
        }
        if !(self.friction >= 0.0) || !self.friction.is_finite() {
            return Err(Error::Config(format!(
                "env.friction must be >= 0 (got {})",
                self.friction
            )));
        }
        if !(self.effort_weight >= 0.0) || !self.effort_weight.is_finite() {
            return Err(Error::Config(format!(
                "env.effort_weight must be >= 0 (got {})",
                self.effort_weight
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!(
                "env.gamma must lie in [0, 1] (got {})",
                self.gamma
            )));
        }
        if self.horizon < 1 {
            return Err(Error::Config("env.horizon must be >= 1".into()));
        }
        if self.dims == 0 || self.dims > 2 {
            return Err(Error::Config(format!(
                "env.dims must be 1 or 2 (got {})",
                self.dims
            )));
        }
        if !self.state_lo.is_finite() || !self.state_hi.is_finite() || self.state_lo > self.state_hi
        {
            return Err(Error::Config(format!(
                "env.state bounds must be finite with lo <= hi (got [{}, {}])",
                self.state_lo, self.state_hi
            )));
        }
        if self.goal.len() != self.dims {
            return Err(Error::Config(format!(
                "env.goal has {} coordinates but env.dims = {}",
                self.goal.len(),
                self.dims
            )));
        }
        for (d, g) in self.goal.iter().enumerate() {
            if !(*g >= self.state_lo && *g <= self.state_hi) {
                return Err(Error::Config(format!(
                    "env.goal[{d}] = {g} lies outside the workspace [{}, {}]",
                    self.state_lo, self.state_hi
                )));
            }
        }
        Ok(())
    }
}

/// Object state: workspace position plus the step index within the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub position: Vec<f64>,
    pub t: usize,
}

/// One force command per agent, per task dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAction {
    pub robot: Vec<f64>,
    pub human: Vec<f64>,
}

/// Contact wrench measured at the human grip: force in newtons, torque in
/// newton-meters. Task axes occupy the leading force components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: [f64; 3],
    pub torque: [f64; 3],
}

impl Wrench {
    pub const ZERO: Wrench = Wrench {
        force: [0.0; 3],
        torque: [0.0; 3],
    };

    /// Euclidean norm of the force component alone.
    pub fn force_norm(&self) -> f64 {
        self.force.iter().map(|f| f * f).sum::<f64>().sqrt()
    }
}

/// One recorded step: the state it started from, the executed joint action,
/// the reward it earned and the wrench the human emitted.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub state: State,
    pub action: JointAction,
    pub reward: f64,
    pub wrench: Wrench,
}

/// Episode record. Step indices increase by one from zero; the length never
/// exceeds the horizon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    /// Step indices where the robot had to fall back because every one of
    /// its candidate actions was masked out.
    pub fallback_steps: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Sum of `gamma^t * reward_t` over the recorded steps.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut acc = 0.0;
        let mut w = 1.0;
        for s in &self.steps {
            acc += w * s.reward;
            w *= gamma;
        }
        acc
    }

    /// Undiscounted reward sum.
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// What the simulated human did in one step. `demand` is the share of work
/// the human would need to contribute; `executed` is the force actually
/// applied (zero when the demand was beyond them and they let go).
#[derive(Debug, Clone, PartialEq)]
pub struct HumanStep {
    pub demand: Vec<f64>,
    pub executed: Vec<f64>,
    pub engaged: bool,
    pub wrench: Wrench,
}

/// Draws the episode start uniformly from the lower half of the workspace,
/// so transport toward an upper-half goal is never trivially done.
pub fn initial_state<R: Rng + ?Sized>(params: &EnvParams, rng: &mut R) -> State {
    let half = (params.state_hi - params.state_lo) / 2.0;
    let position = (0..params.dims)
        .map(|_| {
            if half == 0.0 {
                params.state_lo
            } else {
                params.state_lo + rng.gen::<f64>() * half
            }
        })
        .collect();
    State { position, t: 0 }
}

/// Position update without episode bookkeeping: applies friction to the
/// summed force per axis and clamps to the workspace.
pub fn advance(params: &EnvParams, position: &[f64], total_force: &[f64]) -> Vec<f64> {
    position
        .iter()
        .zip(total_force)
        .map(|(x, u)| {
            let thrust = u.signum() * (u.abs() - params.friction).max(0.0);
            (x + params.dt * thrust).clamp(params.state_lo, params.state_hi)
        })
        .collect()
}

/// Immediate reward: negative L1 distance to the goal minus the weighted
/// squared effort of both agents. Never positive; zero only at the goal
/// with both agents idle.
pub fn reward(params: &EnvParams, s: &State, a: &JointAction) -> f64 {
    let dist: f64 = s
        .position
        .iter()
        .zip(&params.goal)
        .map(|(x, g)| (x - g).abs())
        .sum();
    let effort: f64 = a.robot.iter().map(|r| r * r).sum::<f64>()
        + a.human.iter().map(|h| h * h).sum::<f64>();
    -dist - params.effort_weight * effort
}

/// Advances one step. Fails once the step index has reached the horizon.
pub fn step(params: &EnvParams, s: &State, a: &JointAction) -> Result<(State, f64)> {
    if s.t >= params.horizon {
        return Err(Error::HorizonExceeded {
            t: s.t,
            horizon: params.horizon,
        });
    }
    if a.robot.len() != params.dims || a.human.len() != params.dims {
        return Err(Error::InvalidAction(format!(
            "joint action has {}+{} coordinates, expected {} per agent",
            a.robot.len(),
            a.human.len(),
            params.dims
        )));
    }
    let total: Vec<f64> = a.robot.iter().zip(&a.human).map(|(r, h)| r + h).collect();
    let position = advance(params, &s.position, &total);
    let r = reward(params, s, a);
    Ok((
        State {
            position,
            t: s.t + 1,
        },
        r,
    ))
}

/// Tolerance for deciding whether a policy output lies on its grid.
const GRID_TOL: f64 = 1e-9;

/// Runs one full episode of exactly `horizon` steps.
///
/// Per step: the robot picks a force (flagging whether it had to fall back),
/// the human responds with a [`HumanStep`], the learner hook observes the
/// state, the attempted joint action `(robot, demand)` and the emitted
/// wrench, and the environment advances under the executed forces.
///
/// Policy outputs are checked against their grids; an off-grid robot action
/// or human demand aborts the rollout.
pub fn rollout<RN, RP, HM, LH>(
    params: &EnvParams,
    robot_grid: &Grid,
    human_grid: &Grid,
    mut robot_policy: RP,
    mut human_model: HM,
    mut learner_hook: LH,
    rng: &mut RN,
) -> Result<Trajectory>
where
    RN: Rng + ?Sized,
    RP: FnMut(&State, &mut RN) -> Result<(Vec<f64>, bool)>,
    HM: FnMut(&State, &[f64], &mut RN) -> Result<HumanStep>,
    LH: FnMut(&State, &JointAction, &Wrench) -> Result<()>,
{
    params.validate()?;
    let mut traj = Trajectory::default();
    let mut s = initial_state(params, rng);
    for t in 0..params.horizon {
        debug_assert_eq!(s.t, t);
        let (robot, fell_back) = robot_policy(&s, rng)?;
        if !robot_grid.contains_point(&robot, GRID_TOL) {
            return Err(Error::InvalidAction(format!(
                "robot action {robot:?} is not a grid point"
            )));
        }
        if fell_back {
            traj.fallback_steps.push(t);
        }
        let human = human_model(&s, &robot, rng)?;
        if !human_grid.contains_point(&human.demand, GRID_TOL) {
            return Err(Error::InvalidAction(format!(
                "human demand {:?} is not a grid point",
                human.demand
            )));
        }
        let attempted = JointAction {
            robot: robot.clone(),
            human: human.demand.clone(),
        };
        learner_hook(&s, &attempted, &human.wrench)?;
        let executed = JointAction {
            robot,
            human: human.executed.clone(),
        };
        let (next, r) = step(params, &s, &executed)?;
        traj.steps.push(TrajectoryStep {
            state: s,
            action: executed,
            reward: r,
            wrench: human.wrench,
        });
        s = next;
    }
    Ok(traj)
}
