//! Simulated human operator with a latent capability bound.
//!
//! The operator is softmax-rational over the human action grid given the
//! joint values at the current state and robot action. The task asks them
//! for a share of the work (their Boltzmann draw, the *demand*); if every
//! component is within their capability they execute it and the grip sensor
//! reads a force proportional to the effort, plus a corrective term once
//! the demand leaves their comfort zone. A demand beyond capability makes
//! them let go: they execute nothing and the sensor reads exactly zero.
//!
//! The executed actions, conditioned on engagement, follow the capability-
//! masked Boltzmann distribution exactly (truncation of a softmax), which
//! is what [`HumanProfile::sample_action`] computes directly.

use rand::Rng;

use crate::boltzmann::{boltzmann, boltzmann_unmasked};
use crate::env::{HumanStep, Wrench};
use crate::grid::Grid;
use crate::{Error, Result};

/// Latent operator parameters. `capability` is the ground truth the
/// learner is supposed to recover; nothing outside this module may read it
/// during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanProfile {
    /// Maximum sustainable action magnitude per task dimension (force units).
    pub capability: Vec<f64>,
    /// Fraction of capability below which no corrective force appears.
    pub comfort_fraction: f64,
    /// Softmax temperature of the operator's action choice.
    pub beta: f64,
    /// Corrective force per unit of demand past the comfort point (N per
    /// force unit).
    pub corrective_gain: f64,
    /// Multiplicative capability decay applied after each step.
    pub fatigue_rate: f64,
    /// Force-sensor reading per unit of executed action (N per force unit).
    pub wrench_scale: f64,
}

impl HumanProfile {
    pub fn validate(&self, dims: usize) -> Result<()> {
        if self.capability.len() != dims {
            return Err(Error::Config(format!(
                "human.capability has {} components but env.dims = {}",
                self.capability.len(),
                dims
            )));
        }
        if self.capability.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(Error::Config(format!(
                "human.capability must be positive and finite (got {:?})",
                self.capability
            )));
        }
        if !(self.comfort_fraction > 0.0 && self.comfort_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "human.comfort_fraction must lie in (0, 1] (got {})",
                self.comfort_fraction
            )));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!(
                "human.beta must be > 0 (got {})",
                self.beta
            )));
        }
        if !(self.corrective_gain >= 0.0) || !self.corrective_gain.is_finite() {
            return Err(Error::Config(format!(
                "human.corrective_gain must be >= 0 (got {})",
                self.corrective_gain
            )));
        }
        if !(self.fatigue_rate >= 0.0 && self.fatigue_rate <= 1.0) {
            return Err(Error::Config(format!(
                "human.fatigue_rate must lie in [0, 1] (got {})",
                self.fatigue_rate
            )));
        }
        if !(self.wrench_scale >= 0.0) || !self.wrench_scale.is_finite() {
            return Err(Error::Config(format!(
                "human.wrench_scale must be >= 0 (got {})",
                self.wrench_scale
            )));
        }
        Ok(())
    }

    /// True when every component of the action is within capability.
    pub fn within_capability(&self, action: &[f64]) -> bool {
        action
            .iter()
            .zip(&self.capability)
            .all(|(a, c)| a.abs() <= *c)
    }

    /// Feasibility of each grid action under the capability bound.
    pub fn feasible_mask(&self, grid: &Grid) -> Vec<bool> {
        (0..grid.len())
            .map(|j| self.within_capability(&grid.point(j)))
            .collect()
    }

    /// Draws what the operator actually does: a Boltzmann sample over the
    /// capability-feasible grid actions, at the operator's temperature.
    ///
    /// `q_slice` holds the joint values over the human grid for the current
    /// state and robot action.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        q_slice: &[f64],
        grid: &Grid,
        rng: &mut R,
    ) -> Result<usize> {
        let mask = self.feasible_mask(grid);
        let dist = boltzmann(q_slice, self.beta, &mask).map_err(|e| match e {
            Error::EmptyFeasibleSet(_) => Error::DegenerateProfile(format!(
                "capability {:?} excludes every human grid action",
                self.capability
            )),
            other => other,
        })?;
        Ok(dist.sample(rng))
    }

    /// Grip-sensor wrench for a demanded human share.
    ///
    /// Engaged (demand within capability): force along the demand direction
    /// with norm `wrench_scale * |d| + corrective_gain * max(0, |d| - rho*c)`
    /// where `|d|` is the demand norm and `rho*c` the comfort point. A
    /// demand beyond capability means the operator lets go: zero wrench.
    pub fn wrench_for(&self, demand: &[f64]) -> Wrench {
        if !self.within_capability(demand) {
            return Wrench::ZERO;
        }
        let mag: f64 = demand.iter().map(|d| d * d).sum::<f64>().sqrt();
        if mag == 0.0 {
            return Wrench::ZERO;
        }
        let cap: f64 = self.capability.iter().map(|c| c * c).sum::<f64>().sqrt();
        let comfort = self.comfort_fraction * cap;
        let norm = self.wrench_scale * mag + self.corrective_gain * (mag - comfort).max(0.0);
        let mut force = [0.0; 3];
        for (k, d) in demand.iter().take(3).enumerate() {
            force[k] = d / mag * norm;
        }
        Wrench {
            force,
            torque: [0.0; 3],
        }
    }

    /// One interaction step: draw the demanded share (unconstrained
    /// Boltzmann over the grid), engage iff it is within capability, and
    /// emit the corresponding wrench.
    pub fn respond<R: Rng + ?Sized>(
        &self,
        q_slice: &[f64],
        grid: &Grid,
        rng: &mut R,
    ) -> Result<HumanStep> {
        let dist = boltzmann_unmasked(q_slice, self.beta)?;
        let demand = grid.point(dist.sample(rng));
        let engaged = self.within_capability(&demand);
        let executed = if engaged {
            demand.clone()
        } else {
            vec![0.0; demand.len()]
        };
        let wrench = self.wrench_for(&demand);
        Ok(HumanStep {
            demand,
            executed,
            engaged,
            wrench,
        })
    }

    /// Applies one step of fatigue: capability shrinks multiplicatively.
    pub fn fatigue_step(&mut self) {
        if self.fatigue_rate > 0.0 {
            for c in &mut self.capability {
                *c *= 1.0 - self.fatigue_rate;
            }
        }
    }
}
