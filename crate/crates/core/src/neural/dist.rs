use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Empty);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// Inverse-CDF draw from a categorical distribution.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::Empty);
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return Ok(i);
            }
        }
    }
    // rounding left `acc` slightly below 1
    Ok(last_positive)
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
pub fn entropy(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::Empty);
    }
    Ok(-probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * libm::log(p))
        .sum::<f64>())
}

/// Softmax restricted to the legal entries of `mask`; illegal entries get
/// probability 0 and log-probability `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDistribution {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl MaskedDistribution {
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .filter(|(&p, _)| p > 0.0)
            .map(|(&p, &lp)| p * lp)
            .sum::<f64>()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        sample_categorical(&self.probs, rng)
    }

    /// Gradient of `coef_logp * log p[action] + coef_entropy * H` with respect
    /// to the logits, accumulated into `out`. Illegal logits receive zero.
    pub fn logit_gradient(
        &self,
        action: usize,
        coef_logp: f64,
        coef_entropy: f64,
        mask: &[bool],
        out: &mut [f64],
    ) {
        let h = self.entropy();
        for i in 0..out.len() {
            if !mask[i] {
                continue;
            }
            let p = self.probs[i];
            let indicator = if i == action { 1.0 } else { 0.0 };
            let mut g = coef_logp * (indicator - p);
            if p > 0.0 {
                g -= coef_entropy * p * (self.log_probs[i] + h);
            }
            out[i] += g;
        }
    }
}

pub fn masked_log_softmax(logits: &[f64], mask: &[bool]) -> Result<MaskedDistribution> {
    if logits.len() != mask.len() {
        return Err(Error::Dimension {
            expected: logits.len(),
            got: mask.len(),
        });
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &legal)| legal)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::NoLegalAction);
    }
    let total: f64 = logits
        .iter()
        .zip(mask)
        .filter(|(_, &legal)| legal)
        .map(|(&z, _)| libm::exp(z - max))
        .sum();
    let log_total = libm::log(total);
    let log_probs: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&z, &legal)| {
            if legal {
                z - max - log_total
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let probs = log_probs.iter().map(|&lp| libm::exp(lp)).collect();
    Ok(MaskedDistribution { probs, log_probs })
}
