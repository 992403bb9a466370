//! Experiment orchestration: seeded episode loops wiring the environment,
//! human model, constraint learner and robot policy together, plus the
//! constraint-recovery evaluation and the output writers.

use std::cell::{Cell, RefCell};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::agent::robot_dist;
use crate::config::{ExperimentConfig, Refresh};
use crate::csvio::fmt_f64;
use crate::env::{rollout, JointAction, State};
use crate::ftstats::{FtLogRow, FT_LOG_HEADER};
use crate::grid::Grid;
use crate::human::HumanProfile;
use crate::learner::{featurize, label_feedback, weighted_norm, ConstraintModel, Label, TrustRegion};
use crate::qtable::QTable;
use crate::Result;

pub const METRICS_HEADER: &str = "episode,reward,mean_wrench_norm,neg_labels,boundary_est,accuracy";

/// Per-episode summary. `accuracy` is only present at evaluation
/// checkpoints and stays blank in the CSV otherwise.
///
/// `mean_wrench_norm` averages over steps with contact load only; steps
/// where the human exerted nothing (let go, or idled at zero demand) are
/// gaps in the measurement, not zero-effort samples. 0.0 if no step in the
/// episode carried load.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub episode: usize,
    pub reward: f64,
    pub mean_wrench_norm: f64,
    pub neg_labels: usize,
    pub boundary_est: f64,
    pub accuracy: Option<f64>,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub metrics: Vec<MetricsRow>,
    pub ft_rows: Vec<FtLogRow>,
    pub model: ConstraintModel,
    pub config: ExperimentConfig,
    /// Steps on which the trust region emptied and the fallback engaged.
    pub fallback_steps: usize,
}

impl ExperimentOutput {
    pub fn metrics_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .metrics
            .iter()
            .map(|r| {
                vec![
                    r.episode.to_string(),
                    fmt_f64(r.reward),
                    fmt_f64(r.mean_wrench_norm),
                    r.neg_labels.to_string(),
                    fmt_f64(r.boundary_est),
                    r.accuracy.map(fmt_f64).unwrap_or_default(),
                ]
            })
            .collect();
        crate::csvio::render_csv(METRICS_HEADER, &rows)
    }

    pub fn ft_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .ft_rows
            .iter()
            .map(|r| {
                let mut row = vec![r.run.to_string(), r.t.to_string()];
                row.extend(r.channels.iter().map(|c| fmt_f64(*c)));
                row
            })
            .collect();
        crate::csvio::render_csv(FT_LOG_HEADER, &rows)
    }

    /// Writes `metrics.csv`, `ft.csv` and `model.ckpt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
        std::fs::write(dir.join("metrics.csv"), self.metrics_csv())
            .map_err(|e| crate::Error::io(dir.join("metrics.csv"), e))?;
        std::fs::write(dir.join("ft.csv"), self.ft_csv())
            .map_err(|e| crate::Error::io(dir.join("ft.csv"), e))?;
        self.model
            .save_to_path(&dir.join("model.ckpt"), &self.config.effective())?;
        Ok(())
    }
}

/// Query state for trust-region extraction and evaluation sweeps: the
/// midpoint of the workspace.
pub fn reference_state(cfg: &ExperimentConfig) -> State {
    State {
        position: vec![(cfg.env.state_lo + cfg.env.state_hi) / 2.0; cfg.env.dims],
        t: 0,
    }
}

fn sweep_bounds(cfg: &ExperimentConfig) -> (f64, f64) {
    (
        cfg.grids.robot_lo.min(cfg.grids.human_lo),
        cfg.grids.robot_hi.max(cfg.grids.human_hi),
    )
}

/// Largest swept diagonal action still inside the region; the sweep lower
/// bound when nothing is.
pub fn boundary_scan(tr: &TrustRegion, cfg: &ExperimentConfig, points: usize) -> f64 {
    let (lo, hi) = sweep_bounds(cfg);
    let dims = cfg.env.dims;
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = lo;
    for k in 0..points {
        let a = lo + step * k as f64;
        let joint = JointAction {
            robot: vec![a; dims],
            human: vec![a; dims],
        };
        if tr.contains(&joint) {
            best = a;
        }
    }
    best
}

/// Compares learned membership against the engagement the profile and
/// labeler would actually produce, on a diagonal sweep of joint actions at
/// the reference state. Returns the agreement fraction and the absolute
/// error of the largest-inside-action estimate against the capability.
pub fn eval_recovery(
    model: &ConstraintModel,
    profile: &HumanProfile,
    cfg: &ExperimentConfig,
    grid_points: usize,
) -> (f64, f64) {
    let tr = model.trust_region(&cfg.robot_upper, &reference_state(cfg));
    let (lo, hi) = sweep_bounds(cfg);
    let dims = cfg.env.dims;
    let step = (hi - lo) / (grid_points - 1) as f64;
    let mut agree = 0usize;
    let mut boundary = lo;
    for k in 0..grid_points {
        let a = lo + step * k as f64;
        let joint = JointAction {
            robot: vec![a; dims],
            human: vec![a; dims],
        };
        let predicted = tr.contains(&joint);
        let truth =
            label_feedback(&profile.wrench_for(&joint.human), &cfg.labeler) == Label::Positive;
        if predicted == truth {
            agree += 1;
        }
        if predicted {
            boundary = a;
        }
    }
    let accuracy = agree as f64 / grid_points as f64;
    let c_star = profile
        .capability
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    (accuracy, (boundary - c_star).abs())
}

/// Runs the full seeded episode loop and collects every output in memory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let env = &cfg.env;
    let state_grid = Grid::new(env.state_lo, env.state_hi, cfg.grids.state_points, env.dims)?;
    let robot_grid = Grid::new(
        cfg.grids.robot_lo,
        cfg.grids.robot_hi,
        cfg.grids.robot_points,
        env.dims,
    )?;
    let human_grid = Grid::new(
        cfg.grids.human_lo,
        cfg.grids.human_hi,
        cfg.grids.human_points,
        env.dims,
    )?;
    let q = QTable::solve(env, state_grid, robot_grid, human_grid, cfg.q_beta)?;

    let model = RefCell::new(ConstraintModel::new(
        env.dims,
        cfg.learner.feature_map,
        cfg.learner.lr,
        cfg.learner.clamp_eps,
        cfg.learner.class_weighting,
    )?);
    let profile = RefCell::new(cfg.human.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);

    // The robot conditions on the human action it last observed; before any
    // observation that is the zero action snapped onto the human grid.
    let a_h_ref = Cell::new(q.human_grid.nearest(&vec![0.0; env.dims]));
    let ref_state = reference_state(cfg);

    let mut metrics = Vec::with_capacity(cfg.run.episodes);
    let ft_rows: RefCell<Vec<FtLogRow>> = RefCell::new(Vec::new());
    let mut fallback_total = 0usize;

    for ep in 0..cfg.run.episodes {
        let episode_tr = RefCell::new(match cfg.run.refresh {
            Refresh::Episode => Some(model.borrow().trust_region(&cfg.robot_upper, &ref_state)),
            Refresh::Step => None,
        });
        let neg_labels = Cell::new(0usize);
        let wrench_sum = Cell::new(0.0f64);
        let loaded_steps = Cell::new(0usize);

        let robot_policy = |s: &State, rng: &mut ChaCha8Rng| {
            let tr = match &*episode_tr.borrow() {
                Some(tr) => tr.clone(),
                None => model.borrow().trust_region(&cfg.robot_upper, s),
            };
            let s_idx = q.state_grid.nearest(&s.position);
            let (dist, fell_back) = robot_dist(
                &q,
                s_idx,
                s.t,
                a_h_ref.get(),
                profile.borrow().beta,
                &tr,
                &cfg.agent,
            )?;
            let i = dist.sample(rng);
            Ok((q.robot_grid.point(i), fell_back))
        };

        let human_model = |s: &State, robot: &[f64], rng: &mut ChaCha8Rng| {
            let s_idx = q.state_grid.nearest(&s.position);
            let i_r = q.robot_grid.nearest(robot);
            let mut prof = profile.borrow_mut();
            let step = prof.respond(q.human_slice(s_idx, i_r, s.t), &q.human_grid, rng)?;
            a_h_ref.set(q.human_grid.nearest(&step.executed));
            prof.fatigue_step();
            Ok(step)
        };

        let learner_hook = |s: &State, attempted: &JointAction, wrench: &crate::env::Wrench| {
            let label = label_feedback(wrench, &cfg.labeler);
            if label == Label::Negative {
                neg_labels.set(neg_labels.get() + 1);
            }
            let norm = weighted_norm(wrench, cfg.labeler.torque_weight);
            if norm > 0.0 {
                wrench_sum.set(wrench_sum.get() + norm);
                loaded_steps.set(loaded_steps.get() + 1);
            }
            ft_rows.borrow_mut().push(FtLogRow {
                run: ep as u64,
                t: s.t as u64,
                channels: [
                    wrench.force[0],
                    wrench.force[1],
                    wrench.force[2],
                    wrench.torque[0],
                    wrench.torque[1],
                    wrench.torque[2],
                ],
            });
            if cfg.run.adaptive {
                let x = featurize(s, attempted, cfg.learner.feature_map)?;
                model.borrow_mut().sgd_step(&x, label)?;
            }
            Ok(())
        };

        let traj = rollout(
            env,
            &q.robot_grid,
            &q.human_grid,
            robot_policy,
            human_model,
            learner_hook,
            &mut rng,
        )?;
        fallback_total += traj.fallback_steps.len();

        let tr_now = model.borrow().trust_region(&cfg.robot_upper, &ref_state);
        let boundary_est = boundary_scan(&tr_now, cfg, cfg.run.eval_points);
        let accuracy = if (ep + 1) % cfg.run.eval_every == 0 {
            Some(eval_recovery(&model.borrow(), &profile.borrow(), cfg, cfg.run.eval_points).0)
        } else {
            None
        };
        metrics.push(MetricsRow {
            episode: ep,
            reward: traj.total_reward(),
            mean_wrench_norm: wrench_sum.get() / loaded_steps.get().max(1) as f64,
            neg_labels: neg_labels.get(),
            boundary_est,
            accuracy,
        });
    }

    Ok(ExperimentOutput {
        metrics,
        ft_rows: ft_rows.into_inner(),
        model: model.into_inner(),
        config: cfg.clone(),
        fallback_steps: fallback_total,
    })
}
