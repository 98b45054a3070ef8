//! Discrete exponential families `p_ν(x) = h(x) · exp(νᵀT(x) − A(ν))`.

use serde::{Deserialize, Serialize};

use super::{Dist, ProbError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFam {
    base: Vec<f64>,
    stats: Vec<Vec<f64>>,
    natural: Vec<f64>,
}

impl ExpFam {
    /// `base[x] = h(x) ≥ 0` (not all zero), `stats[x]` the sufficient statistic
    /// vector of symbol `x`, `natural` the parameter `ν`.
    pub fn new(base: Vec<f64>, stats: Vec<Vec<f64>>, natural: Vec<f64>) -> Result<Self, ProbError> {
        if base.is_empty() {
            return Err(ProbError::Empty);
        }
        if stats.len() != base.len() {
            return Err(ProbError::ShapeMismatch {
                expected: base.len(),
                found: stats.len(),
            });
        }
        if let Some(bad) = stats.iter().find(|s| s.len() != natural.len()) {
            return Err(ProbError::ShapeMismatch {
                expected: natural.len(),
                found: bad.len(),
            });
        }
        if let Some((index, &value)) = base
            .iter()
            .enumerate()
            .find(|(_, h)| !h.is_finite() || **h < 0.0)
        {
            return Err(ProbError::InvalidEntry { index, value });
        }
        if base.iter().all(|h| *h == 0.0) {
            return Err(ProbError::NotNormalized { sum: 0.0 });
        }
        Ok(Self {
            base,
            stats,
            natural,
        })
    }

    /// Bernoulli with `T(x) = x`.
    pub fn bernoulli(nu: f64) -> Self {
        Self::new(vec![1.0, 1.0], vec![vec![0.0], vec![1.0]], vec![nu]).expect("valid family")
    }

    /// Categorical over `k` symbols in minimal form: one-hot indicators of symbols `1..k`.
    pub fn categorical(natural: Vec<f64>) -> Self {
        let k = natural.len() + 1;
        let stats = (0..k)
            .map(|x| (1..k).map(|j| if j == x { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(vec![1.0; k], stats, natural).expect("valid family")
    }

    /// Binomial(`n`) with base measure `C(n, x)` and `T(x) = x`.
    pub fn binomial(n: usize, nu: f64) -> Self {
        let mut base = Vec::with_capacity(n + 1);
        let mut c = 1.0;
        for x in 0..=n {
            base.push(c);
            c = c * (n - x) as f64 / (x + 1) as f64;
        }
        let stats = (0..=n).map(|x| vec![x as f64]).collect();
        Self::new(base, stats, vec![nu]).expect("valid family")
    }

    /// Truncated discretized Gaussian on `0..len` with `T(x) = (x, x²)`.
    pub fn quadratic(len: usize, natural: [f64; 2]) -> Self {
        let stats = (0..len)
            .map(|x| {
                let x = x as f64;
                vec![x, x * x]
            })
            .collect();
        Self::new(vec![1.0; len], stats, natural.to_vec()).expect("valid family")
    }

    pub fn dim(&self) -> usize {
        self.natural.len()
    }

    pub fn natural(&self) -> &[f64] {
        &self.natural
    }

    pub fn with_natural(&self, natural: Vec<f64>) -> Self {
        assert_eq!(natural.len(), self.dim(), "parameter dimension mismatch");
        Self {
            natural,
            ..self.clone()
        }
    }

    fn exponents(&self, natural: &[f64]) -> Vec<f64> {
        self.base
            .iter()
            .zip(&self.stats)
            .map(|(h, t)| {
                if *h == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    h.ln() + natural.iter().zip(t).map(|(n, s)| n * s).sum::<f64>()
                }
            })
            .collect()
    }

    /// `A(ν) = log Σ_x h(x) exp(νᵀT(x))`, evaluated with a max shift.
    pub fn log_partition_at(&self, natural: &[f64]) -> f64 {
        let e = self.exponents(natural);
        let max = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + e.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition_at(&self.natural)
    }

    pub fn distribution(&self) -> Dist {
        let a = self.log_partition();
        let probs = self.exponents(&self.natural).iter().map(|v| (v - a).exp()).collect();
        Dist::from_weights(probs).expect("exponential family has positive mass")
    }
}

/// `E_{p_ν}[T(x)]`, the gradient of the log-partition at `ν`.
pub fn expfam_mean(ef: &ExpFam) -> Vec<f64> {
    let p = ef.distribution();
    let mut mean = vec![0.0; ef.dim()];
    for (px, t) in p.probs().iter().zip(&ef.stats) {
        for (m, s) in mean.iter_mut().zip(t) {
            *m += px * s;
        }
    }
    mean
}
