use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{ChainMRP, SpiralTopology};
use crate::error::{Error, Result};
use crate::td::Method;

/// Smallest eigenvalue real part of `A` still counted as stable.
pub const STABILITY_THRESHOLD: f64 = 1e-9;

/// Solution of the expected-update equation `A w = b`.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointResult {
    pub weights: Vec<f64>,
    pub a_matrix: DMatrix<f64>,
    pub b_vector: DVector<f64>,
    /// `‖A w − b‖`.
    pub residual: f64,
}

fn solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<FixedPointResult> {
    let sv = a.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Singular {
            condition: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        });
    }
    let w = a
        .clone()
        .lu()
        .solve(&b)
        .ok_or(Error::Singular { condition: f64::INFINITY })?;
    let residual = (&a * &w - &b).norm();
    Ok(FixedPointResult {
        weights: w.iter().copied().collect(),
        a_matrix: a,
        b_vector: b,
        residual,
    })
}

/// Fixed point of TD(λ) or ETD(λ) on the deterministic chain.
///
/// Every episode is the single trajectory `n, n−1, …, 1`, so the expected
/// update is the sum over that trajectory of `e_t (x_t − γ_{t+1} x_{t+1})`
/// and `e_t r_t`. Both are reported per step (divided by `n`).
pub fn chain_fixed_point(chain: &ChainMRP, lambda: f64, method: Method) -> Result<FixedPointResult> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::out_of_range("lambda", format!("{lambda} not in [0, 1]")));
    }
    let n = chain.n;
    let mut a = 0.0;
    let mut b = 0.0;
    let mut trace = 0.0;
    let mut followon = 1.0;
    for (t, s) in (1..=n).rev().enumerate() {
        let x = s as f64;
        let (x_next, gamma_next) = if s > 1 { ((s - 1) as f64, 1.0) } else { (0.0, 0.0) };
        let emphasis = match method {
            Method::Td => 1.0,
            Method::Etd => {
                if t > 0 {
                    followon += 1.0;
                }
                lambda + (1.0 - lambda) * followon
            }
        };
        trace = lambda * trace + emphasis * x;
        a += trace * (x - gamma_next * x_next);
        b += trace * chain.reward(s);
    }
    let scale = 1.0 / n as f64;
    solve(
        DMatrix::from_element(1, 1, a * scale),
        DVector::from_element(1, b * scale),
    )
}

/// Exact description of a finite MRP with linear features.
#[derive(Clone, Debug, PartialEq)]
pub struct MrpSpec {
    pub num_states: usize,
    /// Row-stochastic, `[from][to]`.
    pub transition_matrix: Vec<Vec<f64>>,
    /// Reward on each transition, `[from][to]`.
    pub expected_rewards: Vec<Vec<f64>>,
    pub features: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub interest: Vec<f64>,
    pub start_distribution: Vec<f64>,
    pub episodic: bool,
}

impl MrpSpec {
    /// The two-state variable-λ MRP with `x(s₁) = (3,1)`, `x(s₂) = (1,1)`.
    pub fn yu() -> Self {
        MrpSpec {
            num_states: 2,
            transition_matrix: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            expected_rewards: vec![vec![0.0; 2]; 2],
            features: vec![vec![3.0, 1.0], vec![1.0, 1.0]],
            gamma: vec![0.95; 2],
            lambda: vec![0.0, 1.0],
            interest: vec![1.0; 2],
            start_distribution: vec![0.5, 0.5],
            episodic: false,
        }
    }

    /// Linear features on the spiral chain's transition structure; used to
    /// check the stationary solver on a non-deterministic chain.
    pub fn spiral_chain(topology: SpiralTopology, gamma: f64) -> Self {
        let p = topology.transition_matrix();
        MrpSpec {
            num_states: 3,
            transition_matrix: p.iter().map(|r| r.to_vec()).collect(),
            expected_rewards: vec![vec![0.0; 3]; 3],
            features: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            gamma: vec![gamma; 3],
            lambda: vec![0.0; 3],
            interest: vec![1.0; 3],
            start_distribution: vec![1.0 / 3.0; 3],
            episodic: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_states;
        let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
        if n == 0 || !square(&self.transition_matrix) || !square(&self.expected_rewards) {
            return Err(Error::config("MRP matrices must be num_states × num_states"));
        }
        for (name, v) in [
            ("gamma", &self.gamma),
            ("lambda", &self.lambda),
            ("interest", &self.interest),
            ("start_distribution", &self.start_distribution),
        ] {
            if v.len() != n {
                return Err(Error::config(format!("MRP {name} must have one entry per state")));
            }
        }
        let d = self.dim();
        if self.features.len() != n || d == 0 || self.features.iter().any(|f| f.len() != d) {
            return Err(Error::config("MRP features must be one length-d vector per state"));
        }
        for (s, row) in self.transition_matrix.iter().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::config(format!("transition row {s} is not a distribution")));
            }
        }
        Ok(())
    }

    fn check_irreducible(&self) -> Result<()> {
        let n = self.num_states;
        for start in 0..n {
            let mut seen = vec![false; n];
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(s) = stack.pop() {
                for (t, &p) in self.transition_matrix[s].iter().enumerate() {
                    if p > 0.0 && !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
            if seen.iter().any(|v| !v) {
                return Err(Error::NotIrreducible(start + 1));
            }
        }
        Ok(())
    }
}

/// Solves `dᵀP = dᵀ`, `Σd = 1` for an irreducible chain.
pub fn stationary_distribution(spec: &MrpSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    spec.check_irreducible()?;
    let n = spec.num_states;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = spec.transition_matrix[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let d = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular { condition: f64::INFINITY })?;
    Ok(d.iter().copied().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    /// Every eigenvalue of `A` has real part above the threshold.
    Stable,
    /// Some eigenvalue has real part at or below the threshold.
    Unstable,
}

#[derive(Clone, Copy, Debug)]
pub struct AveragingOptions {
    pub steps: u64,
    pub batches: u64,
    pub seed: u64,
    /// Required batch-means standard error, relative to `1 + max|A|`.
    pub tolerance: f64,
}

impl Default for AveragingOptions {
    fn default() -> Self {
        AveragingOptions {
            steps: 10_000_000,
            batches: 100,
            seed: 0,
            tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ContinuingFixedPoint {
    pub stationary: Vec<f64>,
    pub a_matrix: DMatrix<f64>,
    pub b_vector: DVector<f64>,
    /// Eigenvalues of `A` as (real, imaginary) pairs.
    pub eigenvalues: Vec<(f64, f64)>,
    pub stability: Stability,
    /// `None` when `A` is singular.
    pub solution: Option<FixedPointResult>,
    pub standard_error: f64,
}

/// Expected-update pair `(A, b)` of TD(λ) or ETD(λ) on a continuing MRP,
/// estimated by averaging the exact update recursions along a long
/// simulated trajectory started in the stationary distribution, together
/// with a stability diagnosis of `w ← w + α (b − A w)`.
pub fn continuing_fixed_point(
    spec: &MrpSpec,
    method: Method,
    opts: &AveragingOptions,
) -> Result<ContinuingFixedPoint> {
    if spec.episodic {
        return Err(Error::config("continuing_fixed_point needs a continuing MRP"));
    }
    let stationary = stationary_distribution(spec)?;
    let d = spec.dim();
    let batches = opts.batches.max(2);
    let per_batch = (opts.steps / batches).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut s = sample_index(&stationary, &mut rng);
    let mut trace = vec![0.0; d];
    let mut followon = spec.interest[s];
    let mut first = true;

    let width = d * d + d;
    let mut batch_means = Vec::with_capacity(batches as usize);
    let mut total = vec![0.0; width];
    for _ in 0..batches {
        let mut acc = vec![0.0; width];
        for _ in 0..per_batch {
            let next = sample_index(&spec.transition_matrix[s], &mut rng);
            let (gamma, lambda, interest) = (spec.gamma[s], spec.lambda[s], spec.interest[s]);
            let emphasis = match method {
                Method::Td => 1.0,
                Method::Etd => {
                    if !first {
                        followon = gamma * followon + interest;
                    }
                    lambda * interest + (1.0 - lambda) * followon
                }
            };
            first = false;
            let x = &spec.features[s];
            let x_next = &spec.features[next];
            let gamma_next = spec.gamma[next];
            for (e, &xi) in trace.iter_mut().zip(x) {
                *e = gamma * lambda * *e + emphasis * xi;
            }
            let reward = spec.expected_rewards[s][next];
            for i in 0..d {
                for j in 0..d {
                    acc[i * d + j] += trace[i] * (x[j] - gamma_next * x_next[j]);
                }
                acc[d * d + i] += trace[i] * reward;
            }
            s = next;
        }
        let mean: Vec<f64> = acc.iter().map(|v| v / per_batch as f64).collect();
        for (t, m) in total.iter_mut().zip(&mean) {
            *t += m;
        }
        batch_means.push(mean);
    }
    let nb = batch_means.len() as f64;
    let grand: Vec<f64> = total.iter().map(|t| t / nb).collect();
    let standard_error = (0..width)
        .map(|k| {
            let var = batch_means.iter().map(|m| (m[k] - grand[k]).powi(2)).sum::<f64>() / (nb - 1.0);
            (var / nb).sqrt()
        })
        .fold(0.0, f64::max);

    let a = DMatrix::from_fn(d, d, |i, j| grand[i * d + j]);
    let b = DVector::from_fn(d, |i, _| grand[d * d + i]);
    let target = opts.tolerance * (1.0 + a.amax());
    if !(standard_error <= target) {
        return Err(Error::NotConverged {
            achieved: standard_error,
            target,
        });
    }

    let eigenvalues: Vec<(f64, f64)> = a
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect();
    let stability = if eigenvalues.iter().all(|&(re, _)| re > STABILITY_THRESHOLD) {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    let solution = solve(a.clone(), b.clone()).ok();
    Ok(ContinuingFixedPoint {
        stationary,
        a_matrix: a,
        b_vector: b,
        eigenvalues,
        stability,
        solution,
        standard_error,
    })
}

fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
