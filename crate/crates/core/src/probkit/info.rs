//! Exact information quantities in nats. `0 · log 0 = 0` throughout.

use super::{Dist, JointDist, ProbError};

/// Shannon entropy `-Σ p log p`.
pub fn entropy(p: &Dist) -> f64 {
    entropy_of(p.probs())
}

pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// `I(X;Y)` of a joint table, summed directly over the cells.
pub fn mutual_information(j: &JointDist) -> f64 {
    let rm = j.row_marginal();
    let cm = j.col_marginal();
    let mut total = 0.0;
    for r in 0..j.rows() {
        let pr = rm.get(r);
        if pr <= 0.0 {
            continue;
        }
        for (c, &p) in j.row(r).iter().enumerate() {
            if p > 0.0 {
                total += p * (p / (pr * cm.get(c))).ln();
            }
        }
    }
    // Rounding can leave a tiny negative value for independent tables.
    total.max(0.0)
}

/// `KL(p ‖ q)`. A positive `p(x)` against a zero `q(x)` is a support violation.
pub fn kl_divergence(p: &Dist, q: &Dist) -> Result<f64, ProbError> {
    kl_of(p.probs(), q.probs())
}

pub(crate) fn kl_of(p: &[f64], q: &[f64]) -> Result<f64, ProbError> {
    if p.len() != q.len() {
        return Err(ProbError::ShapeMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    let mut total = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Err(ProbError::SupportViolation { index });
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total.max(0.0))
}

/// KL that maps support violations to `+∞`, for internal solver use.
pub(crate) fn kl_or_inf(p: &[f64], q: &[f64]) -> f64 {
    kl_of(p, q).unwrap_or(f64::INFINITY)
}
