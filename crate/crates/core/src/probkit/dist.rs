//! Finite probability tables: marginals, joints and conditional channels.

use serde::{Deserialize, Serialize};

use super::ProbError;

/// Tolerance used when validating externally supplied tables.
pub const INPUT_TOLERANCE: f64 = 1e-9;

/// A probability distribution over `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dist {
    probs: Vec<f64>,
}

impl Dist {
    /// Validates `probs` (non-negative, sum within [`INPUT_TOLERANCE`] of one)
    /// and renormalizes exactly.
    pub fn new(probs: Vec<f64>) -> Result<Self, ProbError> {
        if probs.is_empty() {
            return Err(ProbError::Empty);
        }
        if let Some((index, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(ProbError::InvalidEntry { index, value });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > INPUT_TOLERANCE {
            return Err(ProbError::NotNormalized { sum });
        }
        Ok(Self::renormalized(probs, sum))
    }

    /// Normalizes arbitrary non-negative weights. Fails when all weights are zero.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, ProbError> {
        if weights.is_empty() {
            return Err(ProbError::Empty);
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(ProbError::InvalidEntry { index, value });
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(ProbError::NotNormalized { sum });
        }
        Ok(Self::renormalized(weights, sum))
    }

    fn renormalized(mut probs: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            for p in &mut probs {
                *p /= sum;
            }
        }
        Self { probs }
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform distribution over an empty alphabet");
        Self {
            probs: vec![1.0 / len as f64; len],
        }
    }

    pub fn point(len: usize, index: usize) -> Self {
        assert!(index < len, "point mass outside the alphabet");
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Self { probs }
    }

    /// Softmax of `scores / temperature`. A temperature of zero yields a point
    /// mass on the first maximal score.
    pub fn softmax(scores: &[f64], temperature: f64) -> Self {
        assert!(!scores.is_empty(), "softmax over an empty score table");
        if temperature <= 0.0 {
            let best = argmax_first(scores);
            return Self::point(scores.len(), best);
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores
            .iter()
            .map(|s| ((s - max) / temperature).exp())
            .collect();
        let sum: f64 = weights.iter().sum();
        Self::renormalized(weights, sum)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// Number of symbols carrying positive mass.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|p| **p > 0.0).count()
    }

    pub fn is_point_mass(&self) -> bool {
        self.support_size() == 1
    }

    /// Index of the first maximal entry.
    pub fn mode(&self) -> usize {
        argmax_first(&self.probs)
    }

    /// Inverse-CDF lookup for `u` in `[0, 1)`. Symbols with zero mass are never returned.
    pub fn inverse_cdf(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                acc += p;
                last_positive = i;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }

    /// Total variation distance to `other`.
    pub fn total_variation(&self, other: &Dist) -> f64 {
        assert_eq!(self.len(), other.len(), "alphabet mismatch");
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A joint distribution over `rows × cols`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDist {
    rows: usize,
    cols: usize,
    probs: Vec<f64>,
}

impl JointDist {
    pub fn new(rows: usize, cols: usize, probs: Vec<f64>) -> Result<Self, ProbError> {
        if rows == 0 || cols == 0 {
            return Err(ProbError::Empty);
        }
        if probs.len() != rows * cols {
            return Err(ProbError::ShapeMismatch {
                expected: rows * cols,
                found: probs.len(),
            });
        }
        let flat = Dist::new(probs)?;
        Ok(Self {
            rows,
            cols,
            probs: flat.into_vec(),
        })
    }

    /// Builds `p(x, y) = p(x) · channel(y | x)`.
    pub fn from_marginal_and_channel(marginal: &Dist, channel: &Channel) -> Result<Self, ProbError> {
        if marginal.len() != channel.inputs() {
            return Err(ProbError::ShapeMismatch {
                expected: channel.inputs(),
                found: marginal.len(),
            });
        }
        let cols = channel.outputs();
        let mut probs = Vec::with_capacity(marginal.len() * cols);
        for (px, row) in marginal.probs().iter().zip(channel.rows()) {
            probs.extend(row.probs().iter().map(|q| px * q));
        }
        let sum: f64 = probs.iter().sum();
        Ok(Self::from_raw(marginal.len(), cols, probs, sum))
    }

    /// Builds a joint from non-negative weights, normalizing by their sum.
    pub fn from_weights(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self, ProbError> {
        if weights.len() != rows * cols {
            return Err(ProbError::ShapeMismatch {
                expected: rows * cols,
                found: weights.len(),
            });
        }
        let flat = Dist::from_weights(weights)?;
        Ok(Self {
            rows,
            cols,
            probs: flat.into_vec(),
        })
    }

    fn from_raw(rows: usize, cols: usize, mut probs: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 && sum > 0.0 {
            for p in &mut probs {
                *p /= sum;
            }
        }
        Self { rows, cols, probs }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.probs[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.probs[row * self.cols..(row + 1) * self.cols]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row_marginal(&self) -> Dist {
        Dist {
            probs: (0..self.rows).map(|r| self.row(r).iter().sum()).collect(),
        }
    }

    pub fn col_marginal(&self) -> Dist {
        let mut probs = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (acc, p) in probs.iter_mut().zip(self.row(r)) {
                *acc += p;
            }
        }
        Dist { probs }
    }

    /// Conditional distribution of the column variable given `row`, or `None`
    /// when the row has zero mass.
    pub fn col_given_row(&self, row: usize) -> Option<Dist> {
        let mass: f64 = self.row(row).iter().sum();
        if mass <= 0.0 {
            return None;
        }
        Some(Dist {
            probs: self.row(row).iter().map(|p| p / mass).collect(),
        })
    }

    pub fn transpose(&self) -> JointDist {
        let mut probs = Vec::with_capacity(self.probs.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                probs.push(self.get(r, c));
            }
        }
        JointDist {
            rows: self.cols,
            cols: self.rows,
            probs,
        }
    }

    /// Pushes the row variable through `channel`: `p'(r', c) = Σ_r p(r, c) · A(r' | r)`.
    pub fn map_rows(&self, channel: &Channel) -> JointDist {
        assert_eq!(channel.inputs(), self.rows, "channel input does not match rows");
        let out = channel.outputs();
        let mut probs = vec![0.0; out * self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            for (r2, a) in channel.row(r).probs().iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for (c, p) in row.iter().enumerate() {
                    probs[r2 * self.cols + c] += a * p;
                }
            }
        }
        JointDist {
            rows: out,
            cols: self.cols,
            probs,
        }
    }

    /// Merges rows through a deterministic map `row -> group`.
    pub fn merge_rows(&self, map: &[usize], groups: usize) -> JointDist {
        assert_eq!(map.len(), self.rows, "map length does not match rows");
        let mut probs = vec![0.0; groups * self.cols];
        for (r, &g) in map.iter().enumerate() {
            for (c, p) in self.row(r).iter().enumerate() {
                probs[g * self.cols + c] += p;
            }
        }
        JointDist {
            rows: groups,
            cols: self.cols,
            probs,
        }
    }
}

/// A conditional distribution `p(output | input)`, one [`Dist`] per input symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Channel {
    rows: Vec<Dist>,
}

impl Channel {
    pub fn new(rows: Vec<Dist>) -> Result<Self, ProbError> {
        let Some(first) = rows.first() else {
            return Err(ProbError::Empty);
        };
        let outputs = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != outputs) {
            return Err(ProbError::ShapeMismatch {
                expected: outputs,
                found: bad.len(),
            });
        }
        Ok(Self { rows })
    }

    /// Row-major conditional table with `outputs` columns.
    pub fn from_flat(flat: &[f64], outputs: usize) -> Result<Self, ProbError> {
        if outputs == 0 || flat.is_empty() || !flat.len().is_multiple_of(outputs) {
            return Err(ProbError::ShapeMismatch {
                expected: outputs,
                found: flat.len(),
            });
        }
        let rows = flat
            .chunks(outputs)
            .enumerate()
            .map(|(i, chunk)| {
                Dist::new(chunk.to_vec()).map_err(|e| ProbError::InvalidRow {
                    row: i,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rows)
    }

    /// Deterministic channel sending input `i` to `map[i]`.
    pub fn deterministic(map: &[usize], outputs: usize) -> Self {
        assert!(!map.is_empty(), "deterministic channel over an empty alphabet");
        Self {
            rows: map.iter().map(|&j| Dist::point(outputs, j)).collect(),
        }
    }

    pub fn identity(len: usize) -> Self {
        let map: Vec<usize> = (0..len).collect();
        Self::deterministic(&map, len)
    }

    /// Every input goes to output `0`.
    pub fn constant(inputs: usize, outputs: usize) -> Self {
        Self::deterministic(&vec![0; inputs], outputs)
    }

    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Dist] {
        &self.rows
    }

    pub fn row(&self, input: usize) -> &Dist {
        &self.rows[input]
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(Dist::is_point_mass)
    }

    /// For a deterministic channel, the output of each input.
    pub fn as_map(&self) -> Option<Vec<usize>> {
        self.rows
            .iter()
            .map(|r| r.is_point_mass().then(|| r.mode()))
            .collect()
    }

    /// Output distribution for an input distribution.
    pub fn push(&self, input: &Dist) -> Dist {
        assert_eq!(input.len(), self.inputs(), "input alphabet mismatch");
        let mut probs = vec![0.0; self.outputs()];
        for (p, row) in input.probs().iter().zip(&self.rows) {
            for (acc, q) in probs.iter_mut().zip(row.probs()) {
                *acc += p * q;
            }
        }
        Dist { probs }
    }

    /// `self` followed by `next`.
    pub fn compose(&self, next: &Channel) -> Channel {
        Channel {
            rows: self.rows.iter().map(|r| next.push(r)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_bad_tables() {
        assert!(matches!(Dist::new(vec![]), Err(ProbError::Empty)));
        assert!(matches!(
            Dist::new(vec![0.5, -0.1, 0.6]),
            Err(ProbError::InvalidEntry { index: 1, .. })
        ));
        assert!(matches!(
            Dist::new(vec![0.5, 0.4]),
            Err(ProbError::NotNormalized { .. })
        ));
    }

    #[test]
    fn new_renormalizes_small_drift() {
        let d = Dist::new(vec![0.5 + 1e-10, 0.5]).unwrap();
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_zero_temperature_is_first_argmax() {
        let d = Dist::softmax(&[1.0, 3.0, 3.0], 0.0);
        assert_eq!(d.probs(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn inverse_cdf_skips_zero_mass() {
        let d = Dist::new(vec![0.0, 0.5, 0.0, 0.5]).unwrap();
        assert_eq!(d.inverse_cdf(0.0), 1);
        assert_eq!(d.inverse_cdf(0.49), 1);
        assert_eq!(d.inverse_cdf(0.5), 3);
        assert_eq!(d.inverse_cdf(0.999_999), 3);
    }

    #[test]
    fn joint_marginals_and_transpose() {
        let j = JointDist::new(2, 3, vec![0.1, 0.2, 0.1, 0.3, 0.2, 0.1]).unwrap();
        let rm = j.row_marginal();
        let cm = j.col_marginal();
        assert!((rm.get(0) - 0.4).abs() < 1e-12);
        assert!((cm.get(1) - 0.4).abs() < 1e-12);
        let t = j.transpose();
        assert_eq!(t.rows(), 3);
        assert_eq!(t.get(2, 1), j.get(1, 2));
    }

    #[test]
    fn merge_rows_matches_deterministic_channel() {
        let j = JointDist::new(3, 2, vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.1]).unwrap();
        let map = [0, 1, 0];
        let a = j.merge_rows(&map, 2);
        let b = j.map_rows(&Channel::deterministic(&map, 2));
        for (x, y) in a.probs().iter().zip(b.probs()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn channel_flat_reports_row() {
        let err = Channel::from_flat(&[0.5, 0.5, 0.9, 0.0], 2).unwrap_err();
        assert!(matches!(err, ProbError::InvalidRow { row: 1, .. }));
    }
}
