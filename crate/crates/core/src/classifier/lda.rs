//! Two-class linear discriminant on a single similarity score.
//!
//! Both classes share one (pooled) variance, so the posterior is a logistic
//! function of the score and any posterior threshold corresponds to a single
//! score cutoff.

use serde::{Deserialize, Serialize};

use super::ClassifierError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Sentence,
    Document,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Sentence => "sentence",
            Level::Document => "document",
        }
    }
}

impl std::str::FromStr for Level {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sentence" => Ok(Level::Sentence),
            "document" => Ok(Level::Document),
            other => Err(format!("unknown level '{other}' (expected sentence|document)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    /// Mean score of class 0 (human-machine pairs).
    pub mu0: f64,
    /// Mean score of class 1 (machine-machine pairs).
    pub mu1: f64,
    pub pooled_variance: f64,
    pub prior0: f64,
    pub prior1: f64,
    /// Posterior cutoff; scores with `posterior >= threshold` are labelled 1.
    pub threshold: f64,
    pub level: Level,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Fits class means, pooled variance (divisor `n - 2`) and frequency priors.
pub fn fit_lda(scores: &[f64], labels: &[u8], level: Level) -> Result<LdaModel, ClassifierError> {
    if scores.len() != labels.len() {
        return Err(ClassifierError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(ClassifierError::InvalidLabel(bad));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(ClassifierError::NonFinite(i));
    }
    let mut sum = [0.0f64; 2];
    let mut count = [0usize; 2];
    for (&s, &l) in scores.iter().zip(labels) {
        sum[l as usize] += s;
        count[l as usize] += 1;
    }
    if count[0] < 2 || count[1] < 2 {
        return Err(ClassifierError::InsufficientClasses {
            class0: count[0],
            class1: count[1],
        });
    }
    let mu = [sum[0] / count[0] as f64, sum[1] / count[1] as f64];
    let mut ss = 0.0;
    for (&s, &l) in scores.iter().zip(labels) {
        let d = s - mu[l as usize];
        ss += d * d;
    }
    let n = scores.len();
    let pooled_variance = ss / (n - 2) as f64;
    if pooled_variance.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(ClassifierError::Degenerate("pooled variance is zero"));
    }
    if mu[0] == mu[1] {
        return Err(ClassifierError::Degenerate("class means coincide"));
    }
    Ok(LdaModel {
        mu0: mu[0],
        mu1: mu[1],
        pooled_variance,
        prior0: count[0] as f64 / n as f64,
        prior1: count[1] as f64 / n as f64,
        threshold: DEFAULT_THRESHOLD,
        level,
    })
}

impl LdaModel {
    /// Log-odds of class 1 at `score`.
    pub fn log_odds(&self, score: f64) -> f64 {
        (self.prior1 / self.prior0).ln()
            + (self.mu1 - self.mu0) * (score - 0.5 * (self.mu0 + self.mu1)) / self.pooled_variance
    }

    /// P(class 1 | score).
    pub fn posterior(&self, score: f64) -> f64 {
        let z = self.log_odds(score);
        // Evaluate on the side where exp() cannot overflow.
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }

    pub fn classify(&self, score: f64) -> u8 {
        u8::from(self.posterior(score) >= self.threshold)
    }

    /// Score at which the posterior equals 0.5.
    pub fn decision_boundary(&self) -> f64 {
        0.5 * (self.mu0 + self.mu1)
            - self.pooled_variance * (self.prior1 / self.prior0).ln() / (self.mu1 - self.mu0)
    }

    /// Score at which the posterior equals `p`, for `p` in (0, 1).
    pub fn score_cutoff(&self, p: f64) -> Option<f64> {
        if !(p > 0.0 && p < 1.0) {
            return None;
        }
        let logit = (p / (1.0 - p)).ln();
        Some(self.decision_boundary() + logit * self.pooled_variance / (self.mu1 - self.mu0))
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let finite = [
            self.mu0,
            self.mu1,
            self.pooled_variance,
            self.prior0,
            self.prior1,
            self.threshold,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(ClassifierError::InvalidModel("non-finite parameter"));
        }
        if self.mu0 == self.mu1 {
            return Err(ClassifierError::InvalidModel("class means coincide"));
        }
        if self.pooled_variance <= 0.0 {
            return Err(ClassifierError::InvalidModel("pooled variance must be positive"));
        }
        if self.prior0 <= 0.0 || self.prior1 <= 0.0 || (self.prior0 + self.prior1 - 1.0).abs() > 1e-9
        {
            return Err(ClassifierError::InvalidModel("priors must be positive and sum to 1"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ClassifierError::InvalidModel("threshold outside [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub threshold: f64,
    pub accuracy: f64,
}

pub const DEFAULT_SWEEP_STEP: f64 = 0.01;

/// Thresholds `0, step, 2·step, …, 1`, computed as `i / n` to avoid drift.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>, ClassifierError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(ClassifierError::InvalidStep(step));
    }
    let n = (1.0 / step).round() as usize;
    if n == 0 || ((n as f64) * step - 1.0).abs() > 1e-9 {
        return Err(ClassifierError::InvalidStep(step));
    }
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

/// Picks the accuracy-maximizing posterior threshold (ties to the smallest)
/// and stores it in `model.threshold`.
pub fn sweep_threshold(
    model: &mut LdaModel,
    scores: &[f64],
    labels: &[u8],
    step: f64,
) -> Result<SweepResult, ClassifierError> {
    if scores.is_empty() {
        return Err(ClassifierError::EmptyInput);
    }
    if scores.len() != labels.len() {
        return Err(ClassifierError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let grid = threshold_grid(step)?;
    let posteriors: Vec<f64> = scores.iter().map(|&s| model.posterior(s)).collect();
    let mut best = SweepResult {
        threshold: grid[0],
        accuracy: f64::NEG_INFINITY,
    };
    for &t in &grid {
        let correct = posteriors
            .iter()
            .zip(labels)
            .filter(|(&p, &l)| u8::from(p >= t) == l)
            .count();
        let accuracy = correct as f64 / scores.len() as f64;
        if accuracy > best.accuracy {
            best = SweepResult {
                threshold: t,
                accuracy,
            };
        }
    }
    model.threshold = best.threshold;
    Ok(best)
}
