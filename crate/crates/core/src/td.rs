//! Conventional TD(λ) and on-policy Emphatic TD(λ) as incremental updates.
//!
//! Both learners consume a [`TransitionSample`] that carries the feature
//! vector (or, for a nonlinear approximator, the gradient of the prediction)
//! together with the predictions themselves, so the same update serves the
//! linear and the semi-gradient case. Discount, bootstrapping and interest
//! arrive with every sample; the learner stores no schedules.
//!
//! The emphatic update runs in dependency order:
//!
//! ```text
//! F_t = γ_t F_{t-1} + i(S_t)          (F_0 = i(S_0))
//! M_t = λ_t i(S_t) + (1 - λ_t) F_t
//! e_t = γ_t λ_t e_{t-1} + M_t x_t     (e_{-1} = 0)
//! δ_t = R_{t+1} + γ_{t+1} v̂(S_{t+1}) - v̂(S_t)
//! w_{t+1} = w_t + α δ_t e_t
//! ```
//!
//! Conventional TD(λ) is the same update with `M_t ≡ 1` and no follow-on trace.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Follow-on values above this abort the run.
pub const DEFAULT_FOLLOWON_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Td,
    Etd,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Td, Method::Etd];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Td => "td",
            Method::Etd => "etd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "td" => Ok(Method::Td),
            "etd" => Ok(Method::Etd),
            other => Err(Error::config(format!(
                "unknown method `{other}` (expected `td` or `etd`)"
            ))),
        }
    }
}

/// One observed transition `S_t → S_{t+1}`.
///
/// Terminal transitions use `gamma_next = 0`, a zero `phi_next` and
/// `value_next = 0`.
#[derive(Clone, Copy, Debug)]
pub struct TransitionSample<'a> {
    /// `x_t`, or `∇_w v̂(S_t, w)` for a nonlinear approximator.
    pub phi_t: &'a [f64],
    pub value_t: f64,
    pub reward: f64,
    pub phi_next: &'a [f64],
    pub value_next: f64,
    pub gamma_t: f64,
    pub gamma_next: f64,
    pub lambda_t: f64,
    pub interest_t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub delta: f64,
    /// `M_t`; always 1 for conventional TD.
    pub emphasis: f64,
    pub followon_after: f64,
    pub trace_norm: f64,
}

/// Weights, eligibility trace and follow-on trace of one learner.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnerState {
    pub weights: Vec<f64>,
    pub trace: Vec<f64>,
    pub followon: f64,
    pub step_count: u64,
    followon_limit: f64,
    // F already holds F_0 = i(S_0); the first step must not re-apply the recursion.
    at_episode_start: bool,
}

impl LearnerState {
    /// A learner with the given initial weights, zero trace and `F = 1`.
    pub fn new(weights: Vec<f64>) -> Self {
        let d = weights.len();
        LearnerState {
            weights,
            trace: vec![0.0; d],
            followon: 1.0,
            step_count: 0,
            followon_limit: DEFAULT_FOLLOWON_LIMIT,
            at_episode_start: true,
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(vec![0.0; d])
    }

    pub fn with_followon_limit(mut self, limit: f64) -> Self {
        self.followon_limit = limit;
        self
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Zeroes the trace and sets `F = initial_interest`. Weights are kept.
    pub fn begin_episode(&mut self, initial_interest: f64) -> Result<()> {
        if !initial_interest.is_finite() {
            return Err(Error::NonFinite("initial_interest"));
        }
        if initial_interest < 0.0 {
            return Err(Error::out_of_range(
                "initial_interest",
                format!("{initial_interest} < 0"),
            ));
        }
        self.trace.iter_mut().for_each(|e| *e = 0.0);
        self.followon = initial_interest;
        self.at_episode_start = true;
        Ok(())
    }

    /// Conventional TD(λ) step.
    pub fn td_step(&mut self, sample: &TransitionSample<'_>, alpha: f64) -> Result<StepReport> {
        self.validate(sample, alpha)?;
        self.at_episode_start = false;
        Ok(self.apply(sample, alpha, 1.0))
    }

    /// Emphatic TD(λ) step.
    pub fn etd_step(&mut self, sample: &TransitionSample<'_>, alpha: f64) -> Result<StepReport> {
        self.validate(sample, alpha)?;
        let followon = if self.at_episode_start {
            self.followon
        } else {
            sample.gamma_t * self.followon + sample.interest_t
        };
        if !(followon <= self.followon_limit) {
            return Err(Error::FollowonOverflow(followon));
        }
        self.followon = followon;
        self.at_episode_start = false;
        let emphasis =
            sample.lambda_t * sample.interest_t + (1.0 - sample.lambda_t) * self.followon;
        Ok(self.apply(sample, alpha, emphasis))
    }

    pub fn step(
        &mut self,
        method: Method,
        sample: &TransitionSample<'_>,
        alpha: f64,
    ) -> Result<StepReport> {
        match method {
            Method::Td => self.td_step(sample, alpha),
            Method::Etd => self.etd_step(sample, alpha),
        }
    }

    pub fn weight_norm(&self) -> f64 {
        norm(&self.weights)
    }

    fn apply(&mut self, s: &TransitionSample<'_>, alpha: f64, emphasis: f64) -> StepReport {
        let decay = s.gamma_t * s.lambda_t;
        for (e, &x) in self.trace.iter_mut().zip(s.phi_t) {
            *e = decay * *e + emphasis * x;
        }
        let delta = s.reward + s.gamma_next * s.value_next - s.value_t;
        let scale = alpha * delta;
        for (w, &e) in self.weights.iter_mut().zip(&self.trace) {
            *w += scale * e;
        }
        self.step_count += 1;
        StepReport {
            delta,
            emphasis,
            followon_after: self.followon,
            trace_norm: norm(&self.trace),
        }
    }

    fn validate(&self, s: &TransitionSample<'_>, alpha: f64) -> Result<()> {
        let d = self.dim();
        check_dim("phi_t", d, s.phi_t.len())?;
        check_dim("phi_next", d, s.phi_next.len())?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::out_of_range("alpha", format!("{alpha} (must be > 0)")));
        }
        for (name, v) in [
            ("value_t", s.value_t),
            ("reward", s.reward),
            ("value_next", s.value_next),
            ("gamma_t", s.gamma_t),
            ("gamma_next", s.gamma_next),
            ("lambda_t", s.lambda_t),
            ("interest_t", s.interest_t),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if !s.phi_t.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("phi_t"));
        }
        if !s.phi_next.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("phi_next"));
        }
        for (name, v) in [
            ("gamma_t", s.gamma_t),
            ("gamma_next", s.gamma_next),
            ("lambda_t", s.lambda_t),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::out_of_range(name, format!("{v} not in [0, 1]")));
            }
        }
        if s.interest_t < 0.0 {
            return Err(Error::out_of_range("interest_t", format!("{} < 0", s.interest_t)));
        }
        Ok(())
    }
}

/// Linear prediction `wᵀφ`.
pub fn predict(weights: &[f64], phi: &[f64]) -> Result<f64> {
    check_dim("phi", weights.len(), phi.len())?;
    Ok(dot(weights, phi))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
