//! Rate–distortion curves for finite sources: a slope sweep over the dual,
//! each slope solved to a certified tolerance.

use serde::{Deserialize, Serialize};

use super::{Dist, ProbError};

/// Distortion matrix `d(x, x̂)`, one row per source symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    sources: usize,
    reproductions: usize,
    table: Vec<f64>,
}

impl Distortion {
    pub fn new(sources: usize, reproductions: usize, table: Vec<f64>) -> Result<Self, ProbError> {
        if sources == 0 || reproductions == 0 {
            return Err(ProbError::Empty);
        }
        if table.len() != sources * reproductions {
            return Err(ProbError::ShapeMismatch {
                expected: sources * reproductions,
                found: table.len(),
            });
        }
        if let Some((index, &value)) = table
            .iter()
            .enumerate()
            .find(|(_, d)| !d.is_finite() || **d < 0.0)
        {
            return Err(ProbError::InvalidEntry { index, value });
        }
        Ok(Self {
            sources,
            reproductions,
            table,
        })
    }

    pub fn hamming(n: usize) -> Self {
        let table = (0..n * n)
            .map(|i| if i / n == i % n { 0.0 } else { 1.0 })
            .collect();
        Self {
            sources: n,
            reproductions: n,
            table,
        }
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn reproductions(&self) -> usize {
        self.reproductions
    }

    pub fn get(&self, x: usize, xhat: usize) -> f64 {
        self.table[x * self.reproductions + xhat]
    }

    fn row(&self, x: usize) -> &[f64] {
        &self.table[x * self.reproductions..(x + 1) * self.reproductions]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RdPoint {
    pub distortion: f64,
    pub rate: f64,
}

const BA_TOLERANCE: f64 = 1e-13;
const BA_MAX_ITERS: usize = 50_000;
const LOG_BETA_RANGE: (f64, f64) = (-12.0, 12.0);
const GOLDEN_STEPS: usize = 60;

/// `R(D)` for each grid value. Points below the minimum achievable distortion
/// are unattainable and reported as `+∞`.
pub fn rd_curve(source: &Dist, distortion: &Distortion, grid: &[f64]) -> Vec<RdPoint> {
    assert_eq!(source.len(), distortion.sources(), "source alphabet mismatch");
    let solver = Solver { source, distortion };
    let d_min = solver.min_distortion();
    let d_max = solver.zero_rate_distortion();
    let mut r_at_min = None;
    grid.iter()
        .map(|&d| {
            assert!(d >= 0.0, "distortion grid values must be non-negative");
            let rate = if d >= d_max {
                0.0
            } else if d < d_min {
                f64::INFINITY
            } else if d == d_min {
                *r_at_min.get_or_insert_with(|| solver.rate_at_min_distortion())
            } else {
                solver.dual_rate(d)
            };
            RdPoint { distortion: d, rate }
        })
        .collect()
}

struct Solver<'a> {
    source: &'a Dist,
    distortion: &'a Distortion,
}

impl Solver<'_> {
    fn min_distortion(&self) -> f64 {
        (0..self.distortion.sources())
            .map(|x| {
                self.source.get(x) * self.distortion.row(x).iter().cloned().fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    /// Smallest distortion reachable with a constant reproduction.
    fn zero_rate_distortion(&self) -> f64 {
        (0..self.distortion.reproductions())
            .map(|xhat| {
                (0..self.distortion.sources())
                    .map(|x| self.source.get(x) * self.distortion.get(x, xhat))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `min_q I(X;X̂) + β E[d]`, warm-started from the reproduction marginal `r`.
    fn lagrangian(&self, beta: f64, r: &mut Vec<f64>) -> f64 {
        let n = self.distortion.sources();
        let mut kernel = Vec::with_capacity(n * self.distortion.reproductions());
        let mut offset = 0.0;
        for x in 0..n {
            let row = self.distortion.row(x);
            let floor = row.iter().cloned().fold(f64::INFINITY, f64::min);
            offset += self.source.get(x) * beta * floor;
            kernel.extend(row.iter().map(|d| (-beta * (d - floor)).exp()));
        }
        offset + minimize_marginal(self.source.probs(), &kernel, r)
    }

    /// `R(D) = max_β [G(β) − β D]`; the bracket is concave in `β`, so golden
    /// section over `ln β` locates the maximum.
    fn dual_rate(&self, d: f64) -> f64 {
        let m = self.distortion.reproductions();
        let mut r = vec![1.0 / m as f64; m];
        let mut eval = |u: f64| {
            let beta = u.exp();
            self.lagrangian(beta, &mut r) - beta * d
        };
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = LOG_BETA_RANGE;
        let mut a = hi - phi * (hi - lo);
        let mut b = lo + phi * (hi - lo);
        let mut fa = eval(a);
        let mut fb = eval(b);
        for _ in 0..GOLDEN_STEPS {
            if fa < fb {
                lo = a;
                a = b;
                fa = fb;
                b = lo + phi * (hi - lo);
                fb = eval(b);
            } else {
                hi = b;
                b = a;
                fb = fa;
                a = hi - phi * (hi - lo);
                fa = eval(a);
            }
        }
        fa.max(fb).max(0.0)
    }

    /// Rate at the minimum distortion: the least informative channel that
    /// only uses per-symbol minimizing reproductions.
    fn rate_at_min_distortion(&self) -> f64 {
        let n = self.distortion.sources();
        let m = self.distortion.reproductions();
        let mut kernel = Vec::with_capacity(n * m);
        for x in 0..n {
            let row = self.distortion.row(x);
            let floor = row.iter().cloned().fold(f64::INFINITY, f64::min);
            kernel.extend(row.iter().map(|d| if *d == floor { 1.0 } else { 0.0 }));
        }
        let mut r = vec![1.0 / m as f64; m];
        minimize_marginal(self.source.probs(), &kernel, &mut r).max(0.0)
    }
}

/// `min_r −Σ_x p(x) ln (K r)_x` over the simplex, for a nonnegative `n × m`
/// kernel `K`. Newton steps on the support of `r` with a ratio test, falling
/// back to Blahut–Arimoto updates when a step does not descend. Terminates on
/// the certified gap `max_j ln c_j` with `c = Kᵀ(p / K r)`, which bounds the
/// distance to the optimum from above.
fn minimize_marginal(p: &[f64], kernel: &[f64], r: &mut Vec<f64>) -> f64 {
    let n = p.len();
    let m = r.len();
    let objective = |r: &[f64]| -> f64 {
        let mut f = 0.0;
        for x in (0..n).filter(|&x| p[x] > 0.0) {
            let z: f64 = (0..m).map(|j| kernel[x * m + j] * r[j]).sum();
            f -= p[x] * z.ln();
        }
        f
    };
    let mut value = objective(r);
    for _ in 0..BA_MAX_ITERS {
        let mut z = vec![0.0; n];
        for x in 0..n {
            z[x] = (0..m).map(|j| kernel[x * m + j] * r[j]).sum();
        }
        let mut c = vec![0.0; m];
        for x in (0..n).filter(|&x| p[x] > 0.0) {
            for j in 0..m {
                c[j] += p[x] * kernel[x * m + j] / z[x];
            }
        }
        let gap = c.iter().map(|v| v.ln()).fold(0.0, f64::max);
        if gap <= BA_TOLERANCE {
            break;
        }
        // A dropped symbol that would now improve the objective rejoins.
        let revive: Vec<usize> = (0..m).filter(|&j| r[j] == 0.0 && c[j] > 1.0 + 1e-9).collect();
        if !revive.is_empty() {
            for &j in &revive {
                r[j] = 1e-3;
            }
            let sum: f64 = r.iter().sum();
            r.iter_mut().for_each(|v| *v /= sum);
            value = objective(r);
            continue;
        }
        if let Some(next) = newton_step(p, kernel, r, &z, &c, value, &objective) {
            value = objective(&next);
            *r = next;
            continue;
        }
        for j in 0..m {
            r[j] *= c[j];
        }
        let sum: f64 = r.iter().sum();
        r.iter_mut().for_each(|v| *v /= sum);
        value = objective(r);
    }
    value
}

fn newton_step(
    p: &[f64],
    kernel: &[f64],
    r: &[f64],
    z: &[f64],
    c: &[f64],
    value: f64,
    objective: &dyn Fn(&[f64]) -> f64,
) -> Option<Vec<f64>> {
    let n = p.len();
    let m = r.len();
    let support: Vec<usize> = (0..m).filter(|&j| r[j] > 0.0).collect();
    let k = support.len();
    if k < 2 {
        return None;
    }
    // KKT system [H 1; 1ᵀ 0] [Δ; λ] = [c; 0] restricted to the support.
    let dim = k + 1;
    let mut a = vec![0.0; dim * (dim + 1)];
    for (u, &j) in support.iter().enumerate() {
        for (v, &l) in support.iter().enumerate() {
            let mut h = 0.0;
            for x in (0..n).filter(|&x| p[x] > 0.0) {
                h += p[x] * kernel[x * m + j] * kernel[x * m + l] / (z[x] * z[x]);
            }
            a[u * (dim + 1) + v] = h;
        }
        a[u * (dim + 1) + u] *= 1.0 + 1e-12;
        a[u * (dim + 1) + k] = 1.0;
        a[k * (dim + 1) + u] = 1.0;
        a[u * (dim + 1) + dim] = c[j];
    }
    let step = solve_linear(&mut a, dim)?;
    let mut t: f64 = 1.0;
    for (u, &j) in support.iter().enumerate() {
        if step[u] < 0.0 {
            t = t.min(r[j] / -step[u]);
        }
    }
    for _ in 0..30 {
        let mut next = r.to_vec();
        for (u, &j) in support.iter().enumerate() {
            next[j] = (r[j] + t * step[u]).max(0.0);
            if next[j] < 1e-300 {
                next[j] = 0.0;
            }
        }
        let sum: f64 = next.iter().sum();
        if sum > 0.0 {
            next.iter_mut().for_each(|v| *v /= sum);
            let f = objective(&next);
            if f < value {
                return Some(next);
            }
        }
        t *= 0.5;
    }
    None
}

/// Gaussian elimination with partial pivoting on an augmented `dim × (dim+1)` matrix.
fn solve_linear(a: &mut [f64], dim: usize) -> Option<Vec<f64>> {
    let w = dim + 1;
    for col in 0..dim {
        let pivot = (col..dim).max_by(|x, y| a[x * w + col].abs().total_cmp(&a[y * w + col].abs()))?;
        if a[pivot * w + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..w {
                a.swap(pivot * w + k, col * w + k);
            }
        }
        for row in col + 1..dim {
            let f = a[row * w + col] / a[col * w + col];
            for k in col..w {
                a[row * w + k] -= f * a[col * w + k];
            }
        }
    }
    let mut x = vec![0.0; dim];
    for row in (0..dim).rev() {
        let mut v = a[row * w + dim];
        for k in row + 1..dim {
            v -= a[row * w + k] * x[k];
        }
        x[row] = v / a[row * w + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
