//! Feature constructors and value approximators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Default accuracy requested from [`mat_exp`].
pub const MAT_EXP_TOL: f64 = 1e-10;

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

pub fn mat_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

fn scale(a: &Mat3, s: f64) -> Mat3 {
    a.map(|row| row.map(|x| x * s))
}

/// Infinity norm (max absolute row sum).
fn inf_norm(a: &Mat3) -> f64 {
    a.iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring around a Taylor core.
///
/// The argument is scaled by `2^-s` until its norm is at most 1/2, the series
/// is summed until terms fall below machine precision relative to the partial
/// sum, and the result is squared `s` times. `tol` is the max-norm accuracy
/// the caller needs and must lie in `(0, 1e-6]`.
pub fn mat_exp(m: &Mat3, tol: f64) -> Result<Mat3> {
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::out_of_range("tol", format!("{tol} not in (0, 1e-6]")));
    }
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let norm = inf_norm(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = scale(m, 0.5f64.powi(squarings));

    let mut sum = IDENTITY;
    let mut term = IDENTITY;
    for k in 1..=40 {
        term = scale(&mat_mul(&term, &scaled), 1.0 / f64::from(k));
        for i in 0..3 {
            for j in 0..3 {
                sum[i][j] += term[i][j];
            }
        }
        if inf_norm(&term) <= f64::EPSILON * inf_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = mat_mul(&sum, &sum);
    }
    Ok(sum)
}

/// The three-state spiral approximator `v̂(w) = exp(A w) v̂(0)`.
///
/// `A` is circulant with rows `(1+ε, 0.5, 1.5)`, `(1.5, 1+ε, 0.5)`,
/// `(0.5, 1.5, 1+ε)`; `v̂(0)` must sum to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SpiralApproximator {
    pub epsilon: f64,
    pub matrix_a: Mat3,
    pub v_zero: Vec3,
    // A with its (1,1,1) eigen-component removed; agrees with A on zero-sum vectors.
    deflated: Mat3,
}

impl SpiralApproximator {
    pub fn new(epsilon: f64, v_zero: Vec3) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(Error::NonFinite("epsilon"));
        }
        if v_zero.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("v_zero"));
        }
        let sum: f64 = v_zero.iter().sum();
        let size: f64 = v_zero.iter().map(|x| x.abs()).sum();
        if sum.abs() > 1e-12 * (1.0 + size) {
            return Err(Error::config(format!(
                "spiral v_zero must sum to zero, got {sum}"
            )));
        }
        let d = 1.0 + epsilon;
        let matrix_a = [[d, 0.5, 1.5], [1.5, d, 0.5], [0.5, 1.5, d]];
        let shift = (3.0 + epsilon) / 3.0;
        let deflated = matrix_a.map(|row| row.map(|x| x - shift));
        Ok(SpiralApproximator {
            epsilon,
            matrix_a,
            v_zero,
            deflated,
        })
    }

    /// ε = 0.05, v̂(0) = (10, 10, −20).
    pub fn standard() -> Self {
        Self::new(0.05, [10.0, 10.0, -20.0]).expect("valid constants")
    }

    /// `exp(A w) v̂(0)`.
    ///
    /// `(1,1,1)` is an eigenvector of the circulant `A` with eigenvalue
    /// `3+ε`, and `v̂(0)` has no component along it, so the exponential is
    /// taken of the deflated matrix. Exponentiating `A` itself would leave
    /// rounding noise of order `e^{3w}` in the result.
    pub fn value(&self, w: f64) -> Result<Vec3> {
        if !w.is_finite() {
            return Err(Error::NonFinite("w"));
        }
        let e = mat_exp(&scale(&self.deflated, w), MAT_EXP_TOL)?;
        Ok(mat_vec(&e, &self.v_zero))
    }

    /// `∂v̂/∂w = A v̂(w)`.
    pub fn gradient(&self, w: f64) -> Result<Vec3> {
        let v = self.value(w)?;
        Ok(mat_vec(&self.matrix_a, &v))
    }
}

/// Uniformly offset grid tilings over a box, with explicit index arithmetic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileCodingConfig {
    pub num_tilings: usize,
    pub tiles_per_dim: usize,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
    /// Per tiling, per dimension displacement in units of one tile width.
    pub offsets: Vec<Vec<f64>>,
}

impl TileCodingConfig {
    /// Tiling `k` is displaced by `k / num_tilings` of a tile width in every dimension.
    pub fn uniform(num_tilings: usize, tiles_per_dim: usize, bounds: &[[f64; 2]]) -> Result<Self> {
        let offsets = (0..num_tilings)
            .map(|k| vec![k as f64 / num_tilings as f64; bounds.len()])
            .collect();
        let cfg = TileCodingConfig {
            num_tilings,
            tiles_per_dim,
            lower_bounds: bounds.iter().map(|b| b[0]).collect(),
            upper_bounds: bounds.iter().map(|b| b[1]).collect(),
            offsets,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 8 tilings of 8×8 tiles over position [−1.2, 0.5] × velocity [−0.07, 0.07].
    pub fn mountain_car() -> Self {
        Self::uniform(8, 8, &[[-1.2, 0.5], [-0.07, 0.07]]).expect("valid constants")
    }

    pub fn dims(&self) -> usize {
        self.lower_bounds.len()
    }

    fn tiles_per_tiling(&self) -> usize {
        (self.tiles_per_dim + 1).pow(self.dims() as u32)
    }

    pub fn num_features(&self) -> usize {
        self.num_tilings * self.tiles_per_tiling()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tilings == 0 || self.tiles_per_dim == 0 {
            return Err(Error::config("tile coding needs at least one tiling and one tile"));
        }
        if self.dims() == 0 || self.upper_bounds.len() != self.dims() {
            return Err(Error::config("tile coding bounds must be [lower, upper] per dimension"));
        }
        for (lo, hi) in self.lower_bounds.iter().zip(&self.upper_bounds) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(format!("invalid tile coding bounds [{lo}, {hi}]")));
            }
        }
        if self.offsets.len() != self.num_tilings
            || self.offsets.iter().any(|o| {
                o.len() != self.dims() || o.iter().any(|x| !(0.0..1.0).contains(x))
            })
        {
            return Err(Error::config(
                "tile offsets must be one value in [0, 1) per tiling and dimension",
            ));
        }
        Ok(())
    }

    /// Writes the `num_tilings` active feature indices for `point` into `out`.
    pub fn active_into(&self, point: &[f64], out: &mut Vec<usize>) -> Result<()> {
        const DIM_NAMES: [&str; 2] = ["position", "velocity"];
        if point.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                what: "tile coding input",
                expected: self.dims(),
                found: point.len(),
            });
        }
        for (j, &x) in point.iter().enumerate() {
            let (lo, hi) = (self.lower_bounds[j], self.upper_bounds[j]);
            if !(x >= lo && x <= hi) {
                let name = DIM_NAMES.get(j).copied().unwrap_or("dimension");
                return Err(Error::out_of_range(
                    "tile coding input",
                    format!("{name} (dimension {j}) = {x} outside [{lo}, {hi}]"),
                ));
            }
        }
        out.clear();
        let side = self.tiles_per_dim + 1;
        let per_tiling = self.tiles_per_tiling();
        for (k, offsets) in self.offsets.iter().enumerate() {
            let mut index = 0;
            let mut stride = 1;
            for (j, &x) in point.iter().enumerate() {
                let (lo, hi) = (self.lower_bounds[j], self.upper_bounds[j]);
                let scaled = (x - lo) / (hi - lo) * self.tiles_per_dim as f64 + offsets[j];
                let cell = (scaled.floor() as usize).min(self.tiles_per_dim);
                index += cell * stride;
                stride *= side;
            }
            out.push(k * per_tiling + index);
        }
        Ok(())
    }

    pub fn active(&self, point: &[f64]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.num_tilings);
        self.active_into(point, &mut out)?;
        Ok(out)
    }
}

/// Active indices for a Mountain Car state.
pub fn tile_features(position: f64, velocity: f64, config: &TileCodingConfig) -> Result<Vec<usize>> {
    config.active(&[position, velocity])
}

/// Scalar chain feature `x(s) = s` for `1 ≤ s ≤ n`; `None` is the terminal state.
pub fn chain_feature(s: Option<usize>, n: usize) -> Result<f64> {
    match s {
        None => Ok(0.0),
        Some(s) if (1..=n).contains(&s) => Ok(s as f64),
        Some(s) => Err(Error::out_of_range("chain state", format!("{s} not in 1..={n}"))),
    }
}

/// Two-state features: `x(s₁) = (3, 1)`, `x(s₂) = (1, 1)`.
pub fn yu_feature(s: usize) -> Result<[f64; 2]> {
    match s {
        1 => Ok([3.0, 1.0]),
        2 => Ok([1.0, 1.0]),
        _ => Err(Error::out_of_range("two-state index", format!("{s} not in {{1, 2}}"))),
    }
}
