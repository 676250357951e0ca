//! Turning h-values into sampling distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbabilityRule {
    /// `p_k = h_k / Σh`; updates clamp h to at least `h_min`.
    Standard { h_min: f64 },
    /// `p_k = exp(β h_k) / Σ exp(β h)`.
    Softmax { beta: f64 },
}

impl ProbabilityRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ProbabilityRule::Standard { h_min } if !(h_min >= 0.0 && h_min.is_finite()) => {
                Err(Error::Config(format!("h_min must be finite and >= 0, got {h_min}")))
            }
            ProbabilityRule::Softmax { beta } if !beta.is_finite() => {
                Err(Error::Config(format!("beta must be finite, got {beta}")))
            }
            _ => Ok(()),
        }
    }

    /// Lower clamp applied after updates, if any.
    pub fn h_floor(&self) -> Option<f64> {
        match *self {
            ProbabilityRule::Standard { h_min } => Some(h_min),
            ProbabilityRule::Softmax { .. } => None,
        }
    }
}

/// Unnormalized weights for `hs`, written into `out`; returns their sum.
pub(crate) fn weights_into(hs: &[f64], rule: ProbabilityRule, out: &mut Vec<f64>) -> Result<f64> {
    out.clear();
    if hs.is_empty() {
        return Err(Error::NumericDomain("no h-values to normalize".into()));
    }
    match rule {
        ProbabilityRule::Standard { .. } => {
            for &value in hs {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::NumericDomain(format!(
                        "standard rule needs positive finite h-values, got {value}"
                    )));
                }
            }
            out.extend_from_slice(hs);
        }
        ProbabilityRule::Softmax { beta } => {
            let max = hs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(Error::NumericDomain(format!("non-finite h-value {max}")));
            }
            out.extend(hs.iter().map(|&value| (beta * (value - max)).exp()));
        }
    }
    let total: f64 = out.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::NumericDomain(format!("weights sum to {total}")));
    }
    Ok(total)
}

pub fn to_probabilities(hs: &[f64], rule: ProbabilityRule) -> Result<Vec<f64>> {
    let mut w = Vec::with_capacity(hs.len());
    let total = weights_into(hs, rule, &mut w)?;
    for p in &mut w {
        *p /= total;
    }
    Ok(w)
}

/// Inverse-CDF draw: the first index whose cumulative weight exceeds `u · total`.
///
/// `u` must lie in `[0, 1)`. Rounding at the top end falls back to the last positive weight.
pub fn sample_index(weights: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return k;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOFT1: ProbabilityRule = ProbabilityRule::Softmax { beta: 1.0 };
    const STD: ProbabilityRule = ProbabilityRule::Standard { h_min: 0.0 };

    #[test]
    fn uniform_softmax() {
        assert_eq!(to_probabilities(&[1.0; 4], SOFT1).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn standard_normalization() {
        assert_eq!(to_probabilities(&[2.0, 1.0, 1.0], STD).unwrap(), vec![0.5, 0.25, 0.25]);
        assert!(matches!(to_probabilities(&[1.0, 0.0], STD), Err(Error::NumericDomain(_))));
        assert!(to_probabilities(&[1.0, -2.0], STD).is_err());
    }

    #[test]
    fn softmax_half_beta() {
        let p = to_probabilities(&[3.0, 1.0], ProbabilityRule::Softmax { beta: 0.5 }).unwrap();
        // Independent evaluation: logistic of the scaled gap.
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.7311).abs() < 1e-4 && (p[1] - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn softmax_survives_huge_values() {
        let p = to_probabilities(&[1000.0, 999.0, -1e6], SOFT1).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[2] == 0.0);
    }

    #[test]
    fn inverse_cdf() {
        let w = [1.0, 0.0, 3.0];
        assert_eq!(sample_index(&w, 4.0, 0.0), 0);
        assert_eq!(sample_index(&w, 4.0, 0.2499), 0);
        assert_eq!(sample_index(&w, 4.0, 0.25), 2);
        assert_eq!(sample_index(&w, 4.0, 0.999_999_999), 2);
        assert_eq!(sample_index(&[1.0, 0.0], 1.0, 1.0 - f64::EPSILON), 0);
    }
}
