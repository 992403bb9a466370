//! Masked Boltzmann (softmax) distributions over discrete action sets.

use rand::Rng;

use crate::{Error, Result};

/// Discrete distribution `p_i ∝ exp(q_i / beta)` restricted to a feasible
/// subset. Masked-out indices carry exactly zero probability.
#[derive(Debug, Clone, PartialEq)]
pub struct BoltzmannDist {
    probs: Vec<f64>,
    beta: f64,
}

impl BoltzmannDist {
    /// Degenerate distribution concentrated on one index.
    pub fn one_hot(len: usize, index: usize, beta: f64) -> BoltzmannDist {
        assert!(index < len, "one_hot index out of range");
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        BoltzmannDist { probs, beta }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Draws an index by inverse-CDF walk. Zero-probability indices are
    /// never returned, even when the uniform draw lands on a rounding edge.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Cumulative rounding can leave acc marginally below 1.
        last_positive
    }
}

/// Builds the Boltzmann distribution over `values` at temperature `beta`,
/// restricted to indices where `feasible` is true.
///
/// The feasible maximum is subtracted before exponentiation, which keeps the
/// weights in range for any `beta > 0` and makes the result invariant to a
/// constant shift of `values`. Fails if no index is feasible.
pub fn boltzmann(values: &[f64], beta: f64, feasible: &[bool]) -> Result<BoltzmannDist> {
    assert_eq!(values.len(), feasible.len(), "mask length mismatch");
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Config(format!(
            "boltzmann temperature must be positive and finite (got {beta})"
        )));
    }
    let mut max = f64::NEG_INFINITY;
    for (v, &ok) in values.iter().zip(feasible) {
        if ok {
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite value {v} in boltzmann input"
                )));
            }
            max = max.max(*v);
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptyFeasibleSet(
            "no feasible action for boltzmann distribution".into(),
        ));
    }
    let mut probs = vec![0.0; values.len()];
    let mut sum = 0.0;
    for (i, (v, &ok)) in values.iter().zip(feasible).enumerate() {
        if ok {
            let w = ((v - max) / beta).exp();
            probs[i] = w;
            sum += w;
        }
    }
    for p in &mut probs {
        *p /= sum;
    }
    Ok(BoltzmannDist { probs, beta })
}

/// Boltzmann distribution with every index feasible.
pub fn boltzmann_unmasked(values: &[f64], beta: f64) -> Result<BoltzmannDist> {
    boltzmann(values, beta, &vec![true; values.len()])
}
