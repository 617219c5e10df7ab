use serde::{Deserialize, Serialize};

use super::stats::BasisStats;
use crate::error::MappingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.5, epsilon: 1e-6 }
    }
}

impl ScoreParams {
    pub fn validate(&self) -> Result<(), MappingError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.alpha) || !unit(self.beta) || (self.alpha + self.beta - 1.0).abs() > 1e-12 {
            return Err(MappingError::Invalid(format!(
                "alpha and beta must lie in [0, 1] and sum to 1, got {} and {}",
                self.alpha, self.beta
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(MappingError::Invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Stability `S`, expected contribution `J` and criticality `C_w` per coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalityScore {
    pub params: ScoreParams,
    pub magnitude: Vec<f64>,
    pub stability: Vec<f64>,
    pub contribution: Vec<f64>,
    pub criticality: Vec<f64>,
}

impl CriticalityScore {
    pub fn len(&self) -> usize {
        self.criticality.len()
    }

    pub fn is_empty(&self) -> bool {
        self.criticality.is_empty()
    }

    /// Concatenate per-channel scores into one logical-row vector.
    pub fn concat(parts: &[CriticalityScore]) -> CriticalityScore {
        let params = parts.first().map(|p| p.params).unwrap_or_default();
        let cat = |f: fn(&CriticalityScore) -> &Vec<f64>| parts.iter().flat_map(|p| f(p).iter().copied()).collect();
        CriticalityScore {
            params,
            magnitude: cat(|p| &p.magnitude),
            stability: cat(|p| &p.stability),
            contribution: cat(|p| &p.contribution),
            criticality: cat(|p| &p.criticality),
        }
    }
}

/// `magnitude[i]` is the quantized coefficient magnitude `|c'_i|_Q`.
pub fn score(stats: &BasisStats, magnitude: &[f64], params: ScoreParams) -> Result<CriticalityScore, MappingError> {
    params.validate()?;
    if magnitude.len() != stats.len() {
        return Err(MappingError::Invalid(format!(
            "{} magnitudes for {} bases",
            magnitude.len(),
            stats.len()
        )));
    }
    let n = stats.len();
    let mut out = CriticalityScore {
        params,
        magnitude: magnitude.to_vec(),
        stability: Vec::with_capacity(n),
        contribution: Vec::with_capacity(n),
        criticality: Vec::with_capacity(n),
    };
    for i in 0..n {
        let cv = stats.sigma(i) / (stats.mu[i] + params.epsilon);
        let s = 1.0 / (1.0 + cv);
        let j = stats.p[i] * stats.mu[i] * magnitude[i].abs();
        out.stability.push(s);
        out.contribution.push(j);
        out.criticality.push(params.alpha * j + params.beta * s * j);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(p: f64, mu: f64, var: f64) -> BasisStats {
        BasisStats { samples: 1, p: vec![p], mu: vec![mu], var: vec![var], cnt: vec![1] }
    }

    #[test]
    fn hand_example() {
        let s = score(&stats(0.5, 0.4, 0.04), &[100.0], ScoreParams::default()).unwrap();
        let cv = 0.2 / (0.4 + 1e-6);
        let st = 1.0 / (1.0 + cv);
        assert!((s.stability[0] - st).abs() < 1e-15);
        assert!((s.contribution[0] - 20.0).abs() < 1e-12);
        assert!((s.criticality[0] - 16.666_672).abs() < 1e-6);
    }

    #[test]
    fn degenerate_cases() {
        let s = score(&stats(0.3, 0.5, 0.0), &[10.0], ScoreParams::default()).unwrap();
        assert_eq!(s.stability[0], 1.0);
        let z = score(&stats(0.0, 0.0, 0.0), &[10.0], ScoreParams { alpha: 0.9, beta: 0.1, epsilon: 1e-3 }).unwrap();
        assert_eq!(z.criticality[0], 0.0);
    }

    #[test]
    fn beta_zero_is_alpha_j() {
        let s = score(&stats(0.5, 0.4, 0.04), &[100.0], ScoreParams { alpha: 1.0, beta: 0.0, epsilon: 1e-6 }).unwrap();
        assert_eq!(s.criticality[0], s.contribution[0]);
    }

    #[test]
    fn rejects_bad_params() {
        let st = stats(0.5, 0.4, 0.04);
        assert!(score(&st, &[1.0], ScoreParams { alpha: 0.6, beta: 0.6, epsilon: 1e-6 }).is_err());
        assert!(score(&st, &[1.0], ScoreParams { alpha: 0.5, beta: 0.5, epsilon: 0.0 }).is_err());
        assert!(score(&st, &[1.0, 2.0], ScoreParams::default()).is_err());
    }
}
