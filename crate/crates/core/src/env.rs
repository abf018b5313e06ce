//! The four testbeds: spiral three-state MRP, Bertsekas chain, the two-state
//! variable-λ MRP, and Mountain Car under the energy-pumping policy.
//!
//! Discrete states are numbered from 1, as in their usual descriptions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-state schedule of γ, λ or interest.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// Value for state `s` stored at index `s - 1`.
    PerState(Vec<f64>),
}

impl Schedule {
    /// Value at discrete state `s` (1-based). Continuous-state tasks only use
    /// constant schedules, for which any index is accepted.
    pub fn at(&self, s: usize) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::PerState(vs) => vs[s - 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskDescriptor {
    pub gamma: Schedule,
    pub lambda: Schedule,
    pub interest: Schedule,
    pub episodic: bool,
}

impl TaskDescriptor {
    pub fn spiral(gamma: f64, lambda: f64) -> Self {
        TaskDescriptor {
            gamma: Schedule::Constant(gamma),
            lambda: Schedule::Constant(lambda),
            interest: Schedule::Constant(1.0),
            episodic: false,
        }
    }

    /// Undiscounted within the episode; termination is carried by the sample.
    pub fn chain(lambda: f64) -> Self {
        TaskDescriptor {
            gamma: Schedule::Constant(1.0),
            lambda: Schedule::Constant(lambda),
            interest: Schedule::Constant(1.0),
            episodic: true,
        }
    }

    /// γ ≡ 0.95, λ(s₁) = 0, λ(s₂) = 1.
    pub fn yu() -> Self {
        TaskDescriptor {
            gamma: Schedule::Constant(0.95),
            lambda: Schedule::PerState(vec![0.0, 1.0]),
            interest: Schedule::Constant(1.0),
            episodic: false,
        }
    }

    pub fn mountain_car(lambda: f64) -> Self {
        Self::chain(lambda)
    }
}

/// Transition structure of the spiral MRP. Every transition has probability 1/2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpiralTopology {
    /// Jump to either of the two other states.
    #[default]
    TwoOthers,
    /// Stay, or move to the previous state on the cycle 1 → 3 → 2 → 1
    /// (the original Tsitsiklis–Van Roy chain).
    SelfLoop,
}

impl SpiralTopology {
    pub fn transition_matrix(self) -> [[f64; 3]; 3] {
        match self {
            SpiralTopology::TwoOthers => [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
            SpiralTopology::SelfLoop => [[0.5, 0.0, 0.5], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]],
        }
    }
}

/// One spiral transition from state `s ∈ {1,2,3}`. The reward is always 0.
pub fn spiral_step<R: Rng + ?Sized>(s: usize, topology: SpiralTopology, rng: &mut R) -> Result<(usize, f64)> {
    if !(1..=3).contains(&s) {
        return Err(Error::out_of_range("spiral state", format!("{s} not in 1..=3")));
    }
    let coin = rng.gen::<bool>();
    let next = match topology {
        SpiralTopology::TwoOthers => {
            let hop = if coin { 1 } else { 2 };
            (s - 1 + hop) % 3 + 1
        }
        SpiralTopology::SelfLoop => {
            if coin {
                s
            } else {
                (s + 1) % 3 + 1
            }
        }
    };
    Ok((next, 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardCase {
    /// `r_n = −(n−1)`, `r_s = 1` otherwise.
    #[serde(rename = "1")]
    Case1,
    /// `r_1 = 1`, `r_s = 0` otherwise.
    #[serde(rename = "2")]
    Case2,
}

impl RewardCase {
    pub fn number(self) -> u8 {
        match self {
            RewardCase::Case1 => 1,
            RewardCase::Case2 => 2,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(RewardCase::Case1),
            2 => Ok(RewardCase::Case2),
            other => Err(Error::config(format!("unknown chain case {other} (expected 1 or 2)"))),
        }
    }
}

/// Deterministic chain `n → n−1 → … → 1 → terminal`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainMRP {
    pub n: usize,
    pub reward_case: RewardCase,
}

impl ChainMRP {
    pub fn new(n: usize, reward_case: RewardCase) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!("chain needs n ≥ 2, got {n}")));
        }
        Ok(ChainMRP { n, reward_case })
    }

    pub fn reward(&self, s: usize) -> f64 {
        match self.reward_case {
            RewardCase::Case1 if s == self.n => -((self.n - 1) as f64),
            RewardCase::Case1 => 1.0,
            RewardCase::Case2 if s == 1 => 1.0,
            RewardCase::Case2 => 0.0,
        }
    }
}

/// Next state (`None` = terminal) and reward on leaving `s`.
pub fn chain_step(s: usize, chain: &ChainMRP) -> Result<(Option<usize>, f64)> {
    if !(1..=chain.n).contains(&s) {
        return Err(Error::out_of_range("chain state", format!("{s} not in 1..={}", chain.n)));
    }
    let next = if s == 1 { None } else { Some(s - 1) };
    Ok((next, chain.reward(s)))
}

/// Undiscounted return from each state; index `s - 1` holds `v(s)`.
pub fn chain_true_values(chain: &ChainMRP) -> Vec<f64> {
    let mut values = Vec::with_capacity(chain.n);
    let mut acc = 0.0;
    for s in 1..=chain.n {
        acc += chain.reward(s);
        values.push(acc);
    }
    values
}

/// Deterministic swap between the two states with zero reward.
pub fn two_state_step(s: usize) -> Result<(usize, f64)> {
    match s {
        1 => Ok((2, 0.0)),
        2 => Ok((1, 0.0)),
        _ => Err(Error::out_of_range("two-state index", format!("{s} not in {{1, 2}}"))),
    }
}

pub const MC_POSITION: [f64; 2] = [-1.2, 0.5];
pub const MC_VELOCITY: [f64; 2] = [-0.07, 0.07];
/// Episodes longer than this are treated as a dynamics fault.
pub const MC_STEP_CAP: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MountainCarState {
    pub position: f64,
    pub velocity: f64,
}

impl MountainCarState {
    pub fn new(position: f64, velocity: f64) -> Result<Self> {
        if !(MC_POSITION[0]..=MC_POSITION[1]).contains(&position) {
            return Err(Error::out_of_range("position", format!("{position}")));
        }
        if !(MC_VELOCITY[0]..=MC_VELOCITY[1]).contains(&velocity) {
            return Err(Error::out_of_range("velocity", format!("{velocity}")));
        }
        Ok(MountainCarState { position, velocity })
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.position, self.velocity]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum McOutcome {
    Continue(MountainCarState),
    Terminal,
}

/// One Mountain Car step. Reward is −1 on every step, including the last.
pub fn mc_step(state: &MountainCarState, action: i8) -> Result<(McOutcome, f64)> {
    if !(-1..=1).contains(&action) {
        return Err(Error::out_of_range("action", format!("{action} not in {{-1, 0, 1}}")));
    }
    let mut velocity = (state.velocity + 0.001 * f64::from(action)
        - 0.0025 * (3.0 * state.position).cos())
    .clamp(MC_VELOCITY[0], MC_VELOCITY[1]);
    let position = (state.position + velocity).clamp(MC_POSITION[0], MC_POSITION[1]);
    if position >= MC_POSITION[1] {
        return Ok((McOutcome::Terminal, -1.0));
    }
    if position <= MC_POSITION[0] {
        velocity = 0.0;
    }
    Ok((McOutcome::Continue(MountainCarState { position, velocity }), -1.0))
}

/// Throttle in the direction of motion; zero throttle at rest.
pub fn energy_policy(state: &MountainCarState) -> i8 {
    if state.velocity > 0.0 {
        1
    } else if state.velocity < 0.0 {
        -1
    } else {
        0
    }
}

/// Uniform position in [−0.6, −0.4], zero velocity.
pub fn mc_start<R: Rng + ?Sized>(rng: &mut R) -> MountainCarState {
    MountainCarState {
        position: rng.gen_range(-0.6..=-0.4),
        velocity: 0.0,
    }
}
