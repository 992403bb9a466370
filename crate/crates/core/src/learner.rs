//! Online constraint learner.
//!
//! Each interaction step is labeled from the measured wrench: a weighted
//! norm above the threshold means the human was actively engaged, so the
//! attempted joint action lies inside their feasible region. A single
//! logistic unit is trained online with binary cross-entropy on these
//! labels; its decision boundary, restricted to the action coordinates at
//! a query state, is the trust region the robot plans against.
//!
//! The wrench is used only to produce the label. Feeding it to the model
//! as an input would let the classifier read the label off its own input
//! and learn nothing about which actions are feasible.

use std::collections::BTreeMap;
use std::io::BufRead;

use crate::env::{JointAction, State, Wrench};
use crate::{Error, Result};

/// Engagement label for one interaction step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => 0.0,
        }
    }
}

/// Wrench-thresholding parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelerConfig {
    /// Norm threshold in newtons; strictly above it labels positive.
    pub delta: f64,
    /// Converts torque (N·m) into force-equivalent units (1/m) inside the
    /// combined norm.
    pub torque_weight: f64,
}

impl LabelerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Config(format!(
                "labeler.delta must be > 0 (got {})",
                self.delta
            )));
        }
        if !(self.torque_weight >= 0.0) || !self.torque_weight.is_finite() {
            return Err(Error::Config(format!(
                "labeler.torque_weight must be >= 0 (got {})",
                self.torque_weight
            )));
        }
        Ok(())
    }
}

/// Euclidean norm of the 6-vector `(force, torque_weight * torque)`.
pub fn weighted_norm(w: &Wrench, torque_weight: f64) -> f64 {
    let f: f64 = w.force.iter().map(|x| x * x).sum();
    let t: f64 = w.torque.iter().map(|x| (torque_weight * x).powi(2)).sum();
    (f + t).sqrt()
}

/// Positive iff the weighted wrench norm strictly exceeds delta.
pub fn label_feedback(w: &Wrench, cfg: &LabelerConfig) -> Label {
    if weighted_norm(w, cfg.torque_weight) > cfg.delta {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Feature construction for the constraint model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMap {
    /// `[position.., robot.., human.., 1]`
    Linear,
    /// `[position.., robot.., human.., position².., robot².., human².., 1]`
    Quadratic,
}

impl FeatureMap {
    pub fn dim(&self, dims: usize) -> usize {
        match self {
            FeatureMap::Linear => 3 * dims + 1,
            FeatureMap::Quadratic => 6 * dims + 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeatureMap::Linear => "linear",
            FeatureMap::Quadratic => "quadratic",
        }
    }

    pub fn parse(s: &str) -> Result<FeatureMap> {
        match s {
            "linear" => Ok(FeatureMap::Linear),
            "quadratic" => Ok(FeatureMap::Quadratic),
            other => Err(Error::Config(format!(
                "unknown feature map {other:?} (expected linear or quadratic)"
            ))),
        }
    }
}

/// Builds the model input for one step. The last component is always the
/// bias 1.
pub fn featurize(s: &State, a: &JointAction, map: FeatureMap) -> Result<Vec<f64>> {
    let n = s.position.len();
    if a.robot.len() != n || a.human.len() != n {
        return Err(Error::Config(format!(
            "featurize: state has {n} dims, action has {}+{}",
            a.robot.len(),
            a.human.len()
        )));
    }
    let mut x = Vec::with_capacity(map.dim(n));
    x.extend_from_slice(&s.position);
    x.extend_from_slice(&a.robot);
    x.extend_from_slice(&a.human);
    if map == FeatureMap::Quadratic {
        for v in s.position.iter().chain(&a.robot).chain(&a.human) {
            x.push(v * v);
        }
    }
    x.push(1.0);
    Ok(x)
}

/// Numerically stable logistic function.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Single logistic unit over step features, trained online.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintModel {
    pub weights: Vec<f64>,
    pub learn_rate: f64,
    pub clamp_eps: f64,
    pub samples_seen: u64,
    pub feature_map: FeatureMap,
    pub dims: usize,
    /// Scales each sample's gradient by the inverse frequency of its class.
    pub class_weighting: bool,
    pos_seen: u64,
    neg_seen: u64,
}

impl ConstraintModel {
    /// Fresh model with zero weights: every action is predicted inside the
    /// region at probability 0.5, so an untrained robot is unconstrained.
    pub fn new(
        dims: usize,
        feature_map: FeatureMap,
        learn_rate: f64,
        clamp_eps: f64,
        class_weighting: bool,
    ) -> Result<Self> {
        if !(learn_rate > 0.0) || !learn_rate.is_finite() {
            return Err(Error::Config(format!(
                "learner.lr must be > 0 (got {learn_rate})"
            )));
        }
        if !(clamp_eps > 0.0 && clamp_eps < 0.5) {
            return Err(Error::Config(format!(
                "learner.clamp_eps must lie in (0, 0.5) (got {clamp_eps})"
            )));
        }
        if dims == 0 {
            return Err(Error::Config("learner: dims must be >= 1".into()));
        }
        Ok(ConstraintModel {
            weights: vec![0.0; feature_map.dim(dims)],
            learn_rate,
            clamp_eps,
            samples_seen: 0,
            feature_map,
            dims,
            class_weighting,
            pos_seen: 0,
            neg_seen: 0,
        })
    }

    fn dot(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.weights.len());
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }

    /// Probability that the joint action behind `x` is inside the region.
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.dot(x))
    }

    /// Binary cross-entropy with probability clamping.
    pub fn bce_loss(&self, p: f64, y: Label) -> f64 {
        let p = p.clamp(self.clamp_eps, 1.0 - self.clamp_eps);
        match y {
            Label::Positive => -p.ln(),
            Label::Negative => -(1.0 - p).ln(),
        }
    }

    /// One online gradient step on the unclamped BCE:
    /// `theta <- theta - lr * (sigmoid(theta . x) - y) * x`.
    pub fn sgd_step(&mut self, x: &[f64], y: Label) -> Result<()> {
        let err = self.predict(x) - y.as_f64();
        match y {
            Label::Positive => self.pos_seen += 1,
            Label::Negative => self.neg_seen += 1,
        }
        let scale = if self.class_weighting {
            let total = (self.pos_seen + self.neg_seen) as f64;
            let own = match y {
                Label::Positive => self.pos_seen,
                Label::Negative => self.neg_seen,
            } as f64;
            total / (2.0 * own)
        } else {
            1.0
        };
        for (w, v) in self.weights.iter_mut().zip(x) {
            let g = err * v * scale;
            if !g.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient component {g} after {} samples (err {err}, x {v})",
                    self.samples_seen
                )));
            }
            *w -= self.learn_rate * g;
        }
        self.samples_seen += 1;
        Ok(())
    }

    /// Freezes the decision surface at a query state into an action-space
    /// region the robot can test membership against.
    pub fn trust_region(&self, robot_upper: &[f64], state: &State) -> TrustRegion {
        let n = self.dims;
        let action_weights = self.weights[n..3 * n].to_vec();
        let action_quad = match self.feature_map {
            FeatureMap::Linear => vec![0.0; 2 * n],
            FeatureMap::Quadratic => self.weights[4 * n..6 * n].to_vec(),
        };
        let mut offset = *self.weights.last().expect("bias weight");
        for (w, s) in self.weights[..n].iter().zip(&state.position) {
            offset += w * s;
        }
        if self.feature_map == FeatureMap::Quadratic {
            for (w, s) in self.weights[3 * n..4 * n].iter().zip(&state.position) {
                offset += w * s * s;
            }
        }
        TrustRegion {
            action_weights,
            action_quad,
            offset,
            robot_upper: robot_upper.to_vec(),
            trained: self.samples_seen > 0,
        }
    }
}

/// Feasible joint-action set at one state: the learned decision surface as
/// a lower bound, the fixed per-dimension robot bound as the upper box.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegion {
    /// Linear weights over `[robot.., human..]`.
    pub action_weights: Vec<f64>,
    /// Quadratic weights over the same coordinates (zero under the linear
    /// feature map).
    pub action_quad: Vec<f64>,
    /// State features and bias folded at the query state.
    pub offset: f64,
    pub robot_upper: Vec<f64>,
    /// False until the model has seen at least one sample.
    pub trained: bool,
}

impl TrustRegion {
    /// Decision value of the joint action; nonnegative means inside.
    pub fn g(&self, a: &JointAction) -> f64 {
        let mut z = self.offset;
        for (k, v) in a.robot.iter().chain(&a.human).enumerate() {
            z += self.action_weights[k] * v + self.action_quad[k] * v * v;
        }
        z
    }

    /// Membership: on or above the decision surface, and both agents'
    /// components within the upper box.
    pub fn contains(&self, a: &JointAction) -> bool {
        let boxed = a
            .robot
            .iter()
            .zip(&self.robot_upper)
            .all(|(v, u)| v <= u)
            && a.human.iter().zip(&self.robot_upper).all(|(v, u)| v <= u);
        boxed && self.g(a) >= 0.0
    }
}

const CHECKPOINT_FIELDS: [&str; 9] = [
    "dims",
    "feature_map",
    "class_weighting",
    "learn_rate",
    "clamp_eps",
    "samples_seen",
    "pos_seen",
    "neg_seen",
    "weights",
];

impl ConstraintModel {
    /// Renders the model as plain `key = value` lines, followed by the
    /// experiment config echo. Weights keep full round-trip precision.
    pub fn render(&self, config_echo: &BTreeMap<String, String>) -> String {
        let weights = self
            .weights
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut out = String::new();
        out.push_str(&format!("dims = {}\n", self.dims));
        out.push_str(&format!("feature_map = {}\n", self.feature_map.name()));
        out.push_str(&format!("class_weighting = {}\n", self.class_weighting));
        out.push_str(&format!("learn_rate = {}\n", self.learn_rate));
        out.push_str(&format!("clamp_eps = {}\n", self.clamp_eps));
        out.push_str(&format!("samples_seen = {}\n", self.samples_seen));
        out.push_str(&format!("pos_seen = {}\n", self.pos_seen));
        out.push_str(&format!("neg_seen = {}\n", self.neg_seen));
        out.push_str(&format!("weights = {weights}\n"));
        for (k, v) in config_echo {
            out.push_str(&format!("config.{k} = {v}\n"));
        }
        out
    }

    pub fn save_to_path(
        &self,
        path: &std::path::Path,
        config_echo: &BTreeMap<String, String>,
    ) -> Result<()> {
        std::fs::write(path, self.render(config_echo)).map_err(|e| Error::io(path, e))
    }

    pub fn load_from_path(path: &std::path::Path) -> Result<(Self, BTreeMap<String, String>)> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::load(std::io::BufReader::new(file), path)
    }

    /// Parses a checkpoint written by [`ConstraintModel::save`]. Returns
    /// the model and the config echo.
    pub fn load<R: BufRead>(
        r: R,
        path: &std::path::Path,
    ) -> Result<(Self, BTreeMap<String, String>)> {
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        let mut echo = BTreeMap::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.to_path_buf(), e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if let Some(cfg_key) = key.strip_prefix("config.") {
                echo.insert(cfg_key.to_string(), value.to_string());
            } else if CHECKPOINT_FIELDS.contains(&key) {
                fields.insert(key.to_string(), value.to_string());
            } else {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    msg: format!("unknown checkpoint field {key:?}"),
                });
            }
        }
        let get = |k: &str| {
            fields.get(k).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("missing checkpoint field {k:?}"),
            })
        };
        let bad = |k: &str, v: &str| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("invalid value {v:?} for checkpoint field {k:?}"),
        };
        let dims: usize = get("dims")?.parse().map_err(|_| bad("dims", get("dims").unwrap()))?;
        let feature_map = FeatureMap::parse(get("feature_map")?)?;
        let class_weighting: bool = get("class_weighting")?
            .parse()
            .map_err(|_| bad("class_weighting", get("class_weighting").unwrap()))?;
        let learn_rate: f64 = get("learn_rate")?
            .parse()
            .map_err(|_| bad("learn_rate", get("learn_rate").unwrap()))?;
        let clamp_eps: f64 = get("clamp_eps")?
            .parse()
            .map_err(|_| bad("clamp_eps", get("clamp_eps").unwrap()))?;
        let samples_seen: u64 = get("samples_seen")?
            .parse()
            .map_err(|_| bad("samples_seen", get("samples_seen").unwrap()))?;
        let pos_seen: u64 = get("pos_seen")?
            .parse()
            .map_err(|_| bad("pos_seen", get("pos_seen").unwrap()))?;
        let neg_seen: u64 = get("neg_seen")?
            .parse()
            .map_err(|_| bad("neg_seen", get("neg_seen").unwrap()))?;
        let weights: Vec<f64> = get("weights")?
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("weights", get("weights").unwrap()))?;
        let mut model = ConstraintModel::new(dims, feature_map, learn_rate, clamp_eps, class_weighting)?;
        if weights.len() != model.weights.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!(
                    "checkpoint has {} weights but dims={dims} with the {} map needs {}",
                    weights.len(),
                    feature_map.name(),
                    model.weights.len()
                ),
            });
        }
        model.weights = weights;
        model.samples_seen = samples_seen;
        model.pos_seen = pos_seen;
        model.neg_seen = neg_seen;
        Ok((model, echo))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> LabelerConfig {
        LabelerConfig {
            delta: 1.0,
            torque_weight: 1.0,
        }
    }

    fn wrench(f: [f64; 3], t: [f64; 3]) -> Wrench {
        Wrench { force: f, torque: t }
    }

    #[test]
    fn labeler_examples() {
        assert_eq!(
            label_feedback(&wrench([3.0, 0.0, 0.0], [0.0; 3]), &cfg()),
            Label::Positive
        );
        assert_eq!(label_feedback(&Wrench::ZERO, &cfg()), Label::Negative);
        // Norm exactly delta: strict inequality labels negative.
        assert_eq!(
            label_feedback(&wrench([1.0, 0.0, 0.0], [0.0; 3]), &cfg()),
            Label::Negative
        );
    }

    #[test]
    fn torque_weight_scales_into_the_norm() {
        let w = wrench([0.0; 3], [0.0, 0.0, 2.0]);
        let half = LabelerConfig {
            delta: 1.0,
            torque_weight: 0.5,
        };
        // Weighted norm = 1.0 exactly: not strictly above delta.
        assert_eq!(label_feedback(&w, &half), Label::Negative);
        let lower = LabelerConfig {
            delta: 0.99,
            torque_weight: 0.5,
        };
        assert_eq!(label_feedback(&w, &lower), Label::Positive);
        // Ignoring torque entirely keeps the norm at zero.
        let zero = LabelerConfig {
            delta: 0.5,
            torque_weight: 0.0,
        };
        assert_eq!(label_feedback(&w, &zero), Label::Negative);
    }

    #[test]
    fn labels_match_direct_norm_on_random_wrenches() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..1000 {
            let w = wrench(
                [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
                [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
            );
            let c = LabelerConfig {
                delta: rng.gen_range(0.01..8.0),
                torque_weight: rng.gen_range(0.0..2.0),
            };
            // Direct recomputation with an explicit 6-term sum.
            let direct = (w.force[0] * w.force[0]
                + w.force[1] * w.force[1]
                + w.force[2] * w.force[2]
                + (c.torque_weight * w.torque[0]) * (c.torque_weight * w.torque[0])
                + (c.torque_weight * w.torque[1]) * (c.torque_weight * w.torque[1])
                + (c.torque_weight * w.torque[2]) * (c.torque_weight * w.torque[2]))
                .sqrt();
            let expect = if direct > c.delta {
                Label::Positive
            } else {
                Label::Negative
            };
            assert_eq!(label_feedback(&w, &c), expect);
        }
    }

    fn state1(x: f64) -> State {
        State {
            position: vec![x],
            t: 0,
        }
    }

    fn joint1(r: f64, h: f64) -> JointAction {
        JointAction {
            robot: vec![r],
            human: vec![h],
        }
    }

    #[test]
    fn featurize_examples() {
        let x = featurize(&state1(0.5), &joint1(0.3, 0.2), FeatureMap::Linear).unwrap();
        assert_eq!(x, vec![0.5, 0.3, 0.2, 1.0]);
        let z = featurize(&state1(0.0), &joint1(0.0, 0.0), FeatureMap::Linear).unwrap();
        assert_eq!(z, vec![0.0, 0.0, 0.0, 1.0]);
        let again = featurize(&state1(0.5), &joint1(0.3, 0.2), FeatureMap::Linear).unwrap();
        assert_eq!(x, again);
    }

    #[test]
    fn featurize_quadratic_appends_squares() {
        let x = featurize(&state1(0.5), &joint1(0.3, 0.2), FeatureMap::Quadratic).unwrap();
        assert_eq!(x.len(), 7);
        assert!((x[3] - 0.25).abs() < 1e-15);
        assert!((x[4] - 0.09).abs() < 1e-15);
        assert!((x[5] - 0.04).abs() < 1e-15);
        assert_eq!(x[6], 1.0);
    }

    #[test]
    fn featurize_rejects_dim_mismatch() {
        let a = JointAction {
            robot: vec![0.1, 0.2],
            human: vec![0.3],
        };
        assert!(featurize(&state1(0.5), &a, FeatureMap::Linear).is_err());
    }

    fn fresh() -> ConstraintModel {
        ConstraintModel::new(1, FeatureMap::Linear, 0.05, 1e-7, false).unwrap()
    }

    #[test]
    fn predict_examples() {
        let m = fresh();
        assert_eq!(m.predict(&[0.7, 0.1, 0.4, 1.0]), 0.5);

        let mut m = fresh();
        m.weights = vec![3f64.ln(), 0.0, 0.0, 0.0];
        let p = m.predict(&[1.0, 0.0, 0.0, 0.0]);
        assert!((p - 0.75).abs() < 1e-15);

        m.weights = vec![-50.0, 0.0, 0.0, 0.0];
        assert!(m.predict(&[1.0, 0.0, 0.0, 0.0]) < 1e-20);
    }

    #[test]
    fn bce_examples() {
        let m = fresh();
        assert!((m.bce_loss(0.5, Label::Positive) - 2f64.ln()).abs() < 1e-12);
        let near = m.bce_loss(1.0 - 1e-7, Label::Positive);
        assert!(near > 0.0 && near < 1.1e-7, "{near}");
        let clamped = m.bce_loss(0.0, Label::Positive);
        assert!((clamped - (-(1e-7f64).ln())).abs() < 1e-9);
        assert!((clamped - 16.1181).abs() < 1e-3);
    }

    #[test]
    fn saturated_correct_prediction_leaves_weights_unchanged() {
        let mut m = fresh();
        m.weights = vec![800.0, 0.0, 0.0, 0.0];
        let before = m.weights.clone();
        m.sgd_step(&[1.0, 0.0, 0.0, 1.0], Label::Positive).unwrap();
        assert_eq!(m.weights, before);
        assert_eq!(m.samples_seen, 1);
    }

    #[test]
    fn single_step_arithmetic() {
        let mut m = ConstraintModel::new(1, FeatureMap::Linear, 1.0, 1e-7, false).unwrap();
        // One feature plus bias is the smallest wiring; use x = [1, 0, 0, 0].
        m.sgd_step(&[1.0, 0.0, 0.0, 0.0], Label::Positive).unwrap();
        assert!((m.weights[0] - 0.5).abs() < 1e-15);
        assert_eq!(&m.weights[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let h = 1e-6;
        for _ in 0..100 {
            let d = 4;
            let theta: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y = if rng.gen_bool(0.5) {
                Label::Positive
            } else {
                Label::Negative
            };
            let mut m = fresh();
            m.weights = theta.clone();
            let p = m.predict(&x);
            let analytic: Vec<f64> = x.iter().map(|v| (p - y.as_f64()) * v).collect();
            let mut fd = vec![0.0; d];
            for i in 0..d {
                let mut plus = m.clone();
                plus.weights[i] += h;
                let mut minus = m.clone();
                minus.weights[i] -= h;
                fd[i] = (plus.bce_loss(plus.predict(&x), y) - minus.bce_loss(minus.predict(&x), y))
                    / (2.0 * h);
            }
            let diff: f64 = analytic
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(
                diff <= 1e-5 * scale.max(1e-8),
                "rel err {} (scale {scale})",
                diff / scale.max(1e-8)
            );
        }
    }

    #[test]
    fn epoch_replay_never_increases_mean_loss() {
        // Linearly separable batch: label by human action above 0.3.
        let mut m = fresh();
        let mut batch = Vec::new();
        for k in 0..20 {
            let a = k as f64 * 0.05;
            let x = featurize(&state1(0.5), &joint1(0.2, a), FeatureMap::Linear).unwrap();
            let y = if a > 0.3 { Label::Positive } else { Label::Negative };
            batch.push((x, y));
        }
        let mean_loss = |m: &ConstraintModel| {
            batch
                .iter()
                .map(|(x, y)| m.bce_loss(m.predict(x), *y))
                .sum::<f64>()
                / batch.len() as f64
        };
        let mut prev = mean_loss(&m);
        for _ in 0..40 {
            for (x, y) in &batch {
                m.sgd_step(x, *y).unwrap();
            }
            let cur = mean_loss(&m);
            assert!(cur <= prev + 1e-12, "loss rose {prev} -> {cur}");
            prev = cur;
        }
    }

    #[test]
    fn untrained_region_is_the_whole_box() {
        let m = fresh();
        let tr = m.trust_region(&[1.0], &state1(0.5));
        assert!(!tr.trained);
        assert!(tr.contains(&joint1(0.0, 0.0)));
        assert!(tr.contains(&joint1(1.0, 1.0)));
        assert!(!tr.contains(&joint1(1.5, 0.0)));
    }

    #[test]
    fn synthetic_threshold_recovery() {
        // Labels positive above a known human-action threshold; the region
        // boundary read back as -offset/weight recovers it.
        let mut m = fresh();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..4000 {
            let a = rng.gen_range(0.0..1.0);
            let x = featurize(&state1(0.5), &joint1(0.3, a), FeatureMap::Linear).unwrap();
            let y = if a > 0.2 { Label::Positive } else { Label::Negative };
            m.sgd_step(&x, y).unwrap();
        }
        let tr = m.trust_region(&[1.0], &state1(0.5));
        assert!(tr.trained);
        // g(a_h) = w * a_h + offset' where offset' folds state and robot.
        let w = tr.action_weights[1];
        let off = tr.offset + tr.action_weights[0] * 0.3;
        let boundary = -off / w;
        assert!((boundary - 0.2).abs() < 0.05, "boundary {boundary}");
        assert!(tr.contains(&joint1(0.3, 0.5)));
        assert!(!tr.contains(&joint1(0.3, 0.05)));
    }

    #[test]
    fn degenerate_box_admits_only_zero_actions() {
        let m = fresh();
        let tr = m.trust_region(&[0.0], &state1(0.0));
        assert!(tr.contains(&joint1(0.0, 0.0)));
        assert!(!tr.contains(&joint1(0.1, 0.0)));
        assert!(!tr.contains(&joint1(0.0, 0.1)));
    }

    #[test]
    fn boundary_point_is_inside() {
        let mut m = fresh();
        // g(a_h) = a_h - 0.2 at any state: weights [0, 0, 1, -0.2].
        m.weights = vec![0.0, 0.0, 1.0, -0.2];
        m.samples_seen = 1;
        let tr = m.trust_region(&[1.0], &state1(0.9));
        assert!(tr.contains(&joint1(0.5, 0.2)));
        assert!(!tr.contains(&joint1(0.5, 0.19999)));
    }

    #[test]
    fn checkpoint_round_trips_exactly() {
        let mut m = ConstraintModel::new(1, FeatureMap::Quadratic, 0.05, 1e-7, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let a = rng.gen_range(0.0..1.0);
            let x = featurize(&state1(0.4), &joint1(0.1, a), FeatureMap::Quadratic).unwrap();
            let y = if a > 0.5 { Label::Positive } else { Label::Negative };
            m.sgd_step(&x, y).unwrap();
        }
        let mut echo = BTreeMap::new();
        echo.insert("env.dt".to_string(), "0.2".to_string());
        echo.insert("run.seed".to_string(), "7".to_string());
        let text = m.render(&echo);
        let (back, echo_back) =
            ConstraintModel::load(text.as_bytes(), std::path::Path::new("test.ckpt")).unwrap();
        assert_eq!(back, m);
        assert_eq!(echo_back, echo);
    }

    #[test]
    fn checkpoint_render_is_deterministic() {
        let m = fresh();
        let echo = BTreeMap::new();
        assert_eq!(m.render(&echo), m.render(&echo));
    }

    #[test]
    fn checkpoint_rejects_unknown_fields() {
        let text = "dims = 1\nbogus = 3\n";
        let err =
            ConstraintModel::load(text.as_bytes(), std::path::Path::new("x.ckpt")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn membership_agrees_with_prediction_threshold(
            weights in prop::collection::vec(-3.0f64..3.0, 4),
            sx in 0.0f64..2.0,
            r in -1.0f64..1.5,
            hv in -1.0f64..1.5,
            upper in 0.0f64..1.5,
        ) {
            let mut m = fresh();
            m.weights = weights;
            m.samples_seen = 1;
            let s = state1(sx);
            let a = joint1(r, hv);
            let tr = m.trust_region(&[upper], &s);
            let x = featurize(&s, &a, FeatureMap::Linear).unwrap();
            let direct = m.predict(&x) >= 0.5 && r <= upper && hv <= upper;
            prop_assert_eq!(tr.contains(&a), direct);
        }

        #[test]
        fn labels_are_pure_functions(
            fx in -3.0f64..3.0,
            tz in -3.0f64..3.0,
            delta in 0.01f64..5.0,
            lam in 0.0f64..2.0,
        ) {
            let w = wrench([fx, 0.0, 0.0], [0.0, 0.0, tz]);
            let c = LabelerConfig { delta, torque_weight: lam };
            prop_assert_eq!(label_feedback(&w, &c), label_feedback(&w, &c));
        }
    }
}
