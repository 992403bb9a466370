//! Experiment configuration: a flat `key = value` text format with dotted
//! section keys. Every key has a default, unknown keys are errors, and the
//! resolved settings can be echoed verbatim into checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use crate::agent::{AgentConfig, Conditioning, Fallback};
use crate::csvio::fmt_f64;
use crate::env::EnvParams;
use crate::human::HumanProfile;
use crate::learner::{FeatureMap, LabelerConfig};
use crate::{Error, Result};

/// Grid resolutions and per-agent action spans.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub state_points: usize,
    pub robot_points: usize,
    pub human_points: usize,
    pub robot_lo: f64,
    pub robot_hi: f64,
    pub human_lo: f64,
    pub human_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSpec {
    pub lr: f64,
    pub clamp_eps: f64,
    pub feature_map: FeatureMap,
    pub class_weighting: bool,
}

/// When the robot's trust region is re-extracted from the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refresh {
    Step,
    Episode,
}

impl Refresh {
    fn parse(s: &str) -> Result<Refresh> {
        match s {
            "step" => Ok(Refresh::Step),
            "episode" => Ok(Refresh::Episode),
            other => Err(Error::Config(format!(
                "unknown refresh {other:?} (expected step or episode)"
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Refresh::Step => "step",
            Refresh::Episode => "episode",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub episodes: usize,
    pub seed: u64,
    /// False disables learner updates entirely (baseline condition).
    pub adaptive: bool,
    /// Episode interval for constraint-recovery evaluation checkpoints.
    pub eval_every: usize,
    /// Diagonal sweep resolution for evaluation and boundary estimates.
    pub eval_points: usize,
    pub refresh: Refresh,
    /// Named human profile selector; empty selects the base profile.
    pub profile: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvParams,
    pub grids: GridSpec,
    /// Temperature of the joint softmax inside backward induction.
    pub q_beta: f64,
    /// The active human profile after `run.profile` resolution.
    pub human: HumanProfile,
    pub labeler: LabelerConfig,
    pub learner: LearnerSpec,
    pub agent: AgentConfig,
    /// Fixed per-dimension upper bound on joint-action components.
    pub robot_upper: Vec<f64>,
    pub run: RunSpec,
}

struct Raw {
    entries: BTreeMap<String, (String, usize)>,
}

impl Raw {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected a number, got {v:?}"))),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected an integer, got {v:?}"))),
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected an integer, got {v:?}"))),
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected true or false, got {v:?}"))),
        }
    }

    /// Comma-separated vector; a single number broadcasts to `dims`.
    fn vector(&mut self, key: &str, default: &[f64], dims: usize) -> Result<Vec<f64>> {
        let text = match self.take(key) {
            None if default.len() == 1 => return Ok(vec![default[0]; dims]),
            None => return Ok(default.to_vec()),
            Some(v) => v,
        };
        let parts: Vec<f64> = text
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("{key}: expected numbers, got {text:?}")))?;
        match parts.len() {
            1 => Ok(vec![parts[0]; dims]),
            n if n == dims => Ok(parts),
            n => Err(Error::Config(format!(
                "{key}: expected 1 or {dims} components, got {n}"
            ))),
        }
    }
}

fn parse_raw(text: &str, path: &Path) -> Result<Raw> {
    let mut entries = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match line.split_once('#') {
            Some((before, _)) => before,
            None => line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: "expected `key = value`".into(),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if let Some((_, prev_line)) = entries.get(&key) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("duplicate key {key:?} (first set on line {prev_line})"),
            });
        }
        entries.insert(key, (value, line_no));
    }
    Ok(Raw { entries })
}

const PROFILE_FIELDS: [&str; 6] = [
    "capability",
    "comfort_fraction",
    "beta",
    "corrective_gain",
    "fatigue_rate",
    "wrench_scale",
];

fn parse_profile(raw: &mut Raw, prefix: &str, base: &HumanProfile, dims: usize) -> Result<HumanProfile> {
    Ok(HumanProfile {
        capability: raw.vector(&format!("{prefix}.capability"), &base.capability, dims)?,
        comfort_fraction: raw.f64(&format!("{prefix}.comfort_fraction"), base.comfort_fraction)?,
        beta: raw.f64(&format!("{prefix}.beta"), base.beta)?,
        corrective_gain: raw.f64(&format!("{prefix}.corrective_gain"), base.corrective_gain)?,
        fatigue_rate: raw.f64(&format!("{prefix}.fatigue_rate"), base.fatigue_rate)?,
        wrench_scale: raw.f64(&format!("{prefix}.wrench_scale"), base.wrench_scale)?,
    })
}

impl ExperimentConfig {
    /// Built-in defaults: a 1-D transport task with signed force grids, tuned
    /// so the operator's share of the work straddles the default capability.
    /// The even human grid count keeps zero off that grid, so every engaged
    /// demand produces a wrench above the labeler threshold.
    pub fn default_config() -> ExperimentConfig {
        ExperimentConfig {
            env: EnvParams {
                dt: 0.2,
                goal: vec![1.2],
                friction: 0.25,
                effort_weight: 1.0,
                gamma: 0.9,
                horizon: 20,
                dims: 1,
                state_lo: 0.0,
                state_hi: 2.0,
            },
            grids: GridSpec {
                state_points: 101,
                robot_points: 21,
                human_points: 20,
                robot_lo: -1.0,
                robot_hi: 1.0,
                human_lo: -1.0,
                human_hi: 1.0,
            },
            q_beta: 0.2,
            human: HumanProfile {
                capability: vec![0.4],
                comfort_fraction: 0.5,
                beta: 0.2,
                corrective_gain: 30.0,
                fatigue_rate: 0.0,
                wrench_scale: 10.0,
            },
            labeler: LabelerConfig {
                delta: 0.05,
                torque_weight: 1.0,
            },
            learner: LearnerSpec {
                lr: 0.05,
                clamp_eps: 1e-7,
                feature_map: FeatureMap::Quadratic,
                class_weighting: false,
            },
            agent: AgentConfig {
                beta_r: 0.2,
                conditioning: Conditioning::PreviousAction,
                fallback: Fallback::Unconstrained,
                mask_threshold: 0.5,
            },
            robot_upper: vec![1.0],
            run: RunSpec {
                episodes: 300,
                seed: 1,
                adaptive: true,
                eval_every: 50,
                eval_points: 10_001,
                refresh: Refresh::Step,
                profile: None,
            },
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<ExperimentConfig> {
        let mut raw = parse_raw(text, path)?;
        let d = ExperimentConfig::default_config();

        let dims = raw.usize("env.dims", d.env.dims)?;
        let env = EnvParams {
            dt: raw.f64("env.dt", d.env.dt)?,
            goal: raw.vector("env.goal", &d.env.goal, dims)?,
            friction: raw.f64("env.friction", d.env.friction)?,
            effort_weight: raw.f64("env.effort_weight", d.env.effort_weight)?,
            gamma: raw.f64("env.gamma", d.env.gamma)?,
            horizon: raw.usize("env.horizon", d.env.horizon)?,
            dims,
            state_lo: raw.f64("env.state_lo", d.env.state_lo)?,
            state_hi: raw.f64("env.state_hi", d.env.state_hi)?,
        };
        let grids = GridSpec {
            state_points: raw.usize("grid.state_points", d.grids.state_points)?,
            robot_points: raw.usize("grid.robot_points", d.grids.robot_points)?,
            human_points: raw.usize("grid.human_points", d.grids.human_points)?,
            robot_lo: raw.f64("grid.robot_lo", d.grids.robot_lo)?,
            robot_hi: raw.f64("grid.robot_hi", d.grids.robot_hi)?,
            human_lo: raw.f64("grid.human_lo", d.grids.human_lo)?,
            human_hi: raw.f64("grid.human_hi", d.grids.human_hi)?,
        };
        let q_beta = raw.f64("q.beta", d.q_beta)?;

        let base = parse_profile(&mut raw, "human", &d.human, dims)?;
        // Named profile keys look like human.<name>.<field>.
        let mut names: Vec<String> = Vec::new();
        for key in raw.entries.keys() {
            if let Some(rest) = key.strip_prefix("human.") {
                if let Some((name, field)) = rest.split_once('.') {
                    if PROFILE_FIELDS.contains(&field) && !names.iter().any(|n| n == name) {
                        names.push(name.to_string());
                    }
                }
            }
        }
        let mut profiles: BTreeMap<String, HumanProfile> = BTreeMap::new();
        for name in names {
            let profile = parse_profile(&mut raw, &format!("human.{name}"), &base, dims)?;
            profiles.insert(name, profile);
        }

        let labeler = LabelerConfig {
            delta: raw.f64("labeler.delta", d.labeler.delta)?,
            torque_weight: raw.f64("labeler.torque_weight", d.labeler.torque_weight)?,
        };
        let learner = LearnerSpec {
            lr: raw.f64("learner.lr", d.learner.lr)?,
            clamp_eps: raw.f64("learner.clamp_eps", d.learner.clamp_eps)?,
            feature_map: match raw.take("learner.feature_map") {
                None => d.learner.feature_map,
                Some(v) => FeatureMap::parse(&v)?,
            },
            class_weighting: raw.bool("learner.class_weighting", d.learner.class_weighting)?,
        };
        let agent = AgentConfig {
            beta_r: raw.f64("agent.beta_r", d.agent.beta_r)?,
            conditioning: match raw.take("agent.conditioning") {
                None => d.agent.conditioning,
                Some(v) => Conditioning::parse(&v)?,
            },
            fallback: match raw.take("agent.fallback") {
                None => d.agent.fallback,
                Some(v) => Fallback::parse(&v)?,
            },
            mask_threshold: raw.f64("agent.mask_threshold", d.agent.mask_threshold)?,
        };
        let robot_upper = raw.vector("agent.robot_upper", &d.robot_upper, dims)?;
        let run = RunSpec {
            episodes: raw.usize("run.episodes", d.run.episodes)?,
            seed: raw.u64("run.seed", d.run.seed)?,
            adaptive: raw.bool("run.adaptive", d.run.adaptive)?,
            eval_every: raw.usize("run.eval_every", d.run.eval_every)?,
            eval_points: raw.usize("run.eval_points", d.run.eval_points)?,
            refresh: match raw.take("run.refresh") {
                None => d.run.refresh,
                Some(v) => Refresh::parse(&v)?,
            },
            profile: raw.take("run.profile"),
        };

        if let Some((key, (_, line))) = raw.entries.iter().next() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: *line,
                msg: format!("unknown key {key:?}"),
            });
        }

        let human = match &run.profile {
            None => base,
            Some(name) => profiles.remove(name).ok_or_else(|| {
                Error::Config(format!(
                    "run.profile = {name:?} but no human.{name}.* keys define it"
                ))
            })?,
        };

        let cfg = ExperimentConfig {
            env,
            grids,
            q_beta,
            human,
            labeler,
            learner,
            agent,
            robot_upper,
            run,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.human.validate(self.env.dims)?;
        self.labeler.validate()?;
        self.agent.validate()?;
        if !(self.q_beta > 0.0) || !self.q_beta.is_finite() {
            return Err(Error::Config(format!(
                "q.beta must be > 0 (got {})",
                self.q_beta
            )));
        }
        if self.run.episodes == 0 {
            return Err(Error::Config("run.episodes must be >= 1".into()));
        }
        if self.run.eval_every == 0 {
            return Err(Error::Config("run.eval_every must be >= 1".into()));
        }
        if self.run.eval_points < 2 {
            return Err(Error::Config("run.eval_points must be >= 2".into()));
        }
        if self.robot_upper.len() != self.env.dims {
            return Err(Error::Config(format!(
                "agent.robot_upper has {} components for {} dims",
                self.robot_upper.len(),
                self.env.dims
            )));
        }
        for (k, v) in [
            ("grid.robot", (self.grids.robot_lo, self.grids.robot_hi)),
            ("grid.human", (self.grids.human_lo, self.grids.human_hi)),
        ] {
            if v.1 <= v.0 {
                return Err(Error::Config(format!(
                    "{k} bounds must satisfy lo < hi (got [{}, {}])",
                    v.0, v.1
                )));
            }
        }
        Ok(())
    }

    /// Every effective setting as sorted `key -> value` text, the form
    /// echoed into checkpoints. Parsing the echo reproduces this config.
    pub fn effective(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let fv = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",");
        m.insert("env.dt".into(), fmt_f64(self.env.dt));
        m.insert("env.goal".into(), fv(&self.env.goal));
        m.insert("env.friction".into(), fmt_f64(self.env.friction));
        m.insert("env.effort_weight".into(), fmt_f64(self.env.effort_weight));
        m.insert("env.gamma".into(), fmt_f64(self.env.gamma));
        m.insert("env.horizon".into(), self.env.horizon.to_string());
        m.insert("env.dims".into(), self.env.dims.to_string());
        m.insert("env.state_lo".into(), fmt_f64(self.env.state_lo));
        m.insert("env.state_hi".into(), fmt_f64(self.env.state_hi));
        m.insert("grid.state_points".into(), self.grids.state_points.to_string());
        m.insert("grid.robot_points".into(), self.grids.robot_points.to_string());
        m.insert("grid.human_points".into(), self.grids.human_points.to_string());
        m.insert("grid.robot_lo".into(), fmt_f64(self.grids.robot_lo));
        m.insert("grid.robot_hi".into(), fmt_f64(self.grids.robot_hi));
        m.insert("grid.human_lo".into(), fmt_f64(self.grids.human_lo));
        m.insert("grid.human_hi".into(), fmt_f64(self.grids.human_hi));
        m.insert("q.beta".into(), fmt_f64(self.q_beta));
        m.insert("human.capability".into(), fv(&self.human.capability));
        m.insert(
            "human.comfort_fraction".into(),
            fmt_f64(self.human.comfort_fraction),
        );
        m.insert("human.beta".into(), fmt_f64(self.human.beta));
        m.insert(
            "human.corrective_gain".into(),
            fmt_f64(self.human.corrective_gain),
        );
        m.insert("human.fatigue_rate".into(), fmt_f64(self.human.fatigue_rate));
        m.insert("human.wrench_scale".into(), fmt_f64(self.human.wrench_scale));
        m.insert("labeler.delta".into(), fmt_f64(self.labeler.delta));
        m.insert(
            "labeler.torque_weight".into(),
            fmt_f64(self.labeler.torque_weight),
        );
        m.insert("learner.lr".into(), fmt_f64(self.learner.lr));
        m.insert("learner.clamp_eps".into(), fmt_f64(self.learner.clamp_eps));
        m.insert(
            "learner.feature_map".into(),
            self.learner.feature_map.name().to_string(),
        );
        m.insert(
            "learner.class_weighting".into(),
            self.learner.class_weighting.to_string(),
        );
        m.insert("agent.beta_r".into(), fmt_f64(self.agent.beta_r));
        m.insert(
            "agent.conditioning".into(),
            self.agent.conditioning.name().to_string(),
        );
        m.insert("agent.fallback".into(), self.agent.fallback.name().to_string());
        m.insert(
            "agent.mask_threshold".into(),
            fmt_f64(self.agent.mask_threshold),
        );
        m.insert("agent.robot_upper".into(), fv(&self.robot_upper));
        m.insert("run.episodes".into(), self.run.episodes.to_string());
        m.insert("run.seed".into(), self.run.seed.to_string());
        m.insert("run.adaptive".into(), self.run.adaptive.to_string());
        m.insert("run.eval_every".into(), self.run.eval_every.to_string());
        m.insert("run.eval_points".into(), self.run.eval_points.to_string());
        m.insert("run.refresh".into(), self.run.refresh.name().to_string());
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.cfg")
    }

    #[test]
    fn empty_text_yields_defaults() {
        let cfg = ExperimentConfig::parse("", p()).unwrap();
        assert_eq!(cfg, ExperimentConfig::default_config());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let text = "\n# a comment\nenv.dt = 0.1  # trailing\n\n";
        let cfg = ExperimentConfig::parse(text, p()).unwrap();
        assert_eq!(cfg.env.dt, 0.1);
    }

    #[test]
    fn unknown_key_errors_with_line() {
        let err = ExperimentConfig::parse("env.dt = 0.1\nenv.typo = 3\n", p()).unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("env.typo"), "{msg}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn duplicate_key_errors() {
        let err = ExperimentConfig::parse("env.dt = 0.1\nenv.dt = 0.2\n", p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn invalid_value_names_the_key() {
        let err = ExperimentConfig::parse("env.gamma = fast\n", p()).unwrap_err();
        assert!(err.to_string().contains("env.gamma"), "{err}");
    }

    #[test]
    fn named_profile_selected_by_run_profile() {
        let text = "\
human.capability = 0.4
human.strong.capability = 0.7
human.weak.capability = 0.3
human.weak.beta = 0.4
run.profile = weak
";
        let cfg = ExperimentConfig::parse(text, p()).unwrap();
        assert_eq!(cfg.human.capability, vec![0.3]);
        assert_eq!(cfg.human.beta, 0.4);
        // Fields not overridden inherit the base profile.
        assert_eq!(cfg.human.wrench_scale, 10.0);
    }

    #[test]
    fn missing_named_profile_errors() {
        let err = ExperimentConfig::parse("run.profile = ghost\n", p()).unwrap_err();
        assert!(err.to_string().contains("ghost"), "{err}");
    }

    #[test]
    fn scalar_broadcasts_to_dims() {
        let text = "env.dims = 2\nenv.goal = 1.2\nhuman.capability = 0.4\n";
        let cfg = ExperimentConfig::parse(text, p()).unwrap();
        assert_eq!(cfg.env.goal, vec![1.2, 1.2]);
        assert_eq!(cfg.human.capability, vec![0.4, 0.4]);
    }

    #[test]
    fn vector_length_mismatch_errors() {
        let err = ExperimentConfig::parse("env.goal = 1.0,2.0\n", p()).unwrap_err();
        assert!(err.to_string().contains("env.goal"), "{err}");
    }

    #[test]
    fn effective_echo_round_trips() {
        let text = "env.dt = 0.15\nhuman.capability = 0.33\nagent.conditioning = marginalize\nrun.seed = 42\n";
        let cfg = ExperimentConfig::parse(text, p()).unwrap();
        let echo = cfg.effective();
        let echo_text: String = echo
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let back = ExperimentConfig::parse(&echo_text, p()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_field_value_is_rejected() {
        assert!(ExperimentConfig::parse("env.gamma = 1.5\n", p()).is_err());
        assert!(ExperimentConfig::parse("labeler.delta = 0\n", p()).is_err());
        assert!(ExperimentConfig::parse("agent.beta_r = -1\n", p()).is_err());
        assert!(ExperimentConfig::parse("run.episodes = 0\n", p()).is_err());
    }
}
