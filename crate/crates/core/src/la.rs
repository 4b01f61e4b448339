//! Variable-action-set learning automata.
//!
//! An automaton keeps a probability vector over `r` actions. At each stage
//! only a subset of the actions may be available; the available entries are
//! rescaled to sum to one before sampling, and the linear reward/penalty
//! update is applied over that rescaled subset before being mapped back so
//! that unavailable actions keep their mass.

use rand::Rng;

use crate::error::{Error, Result};

/// Probability vectors are kept normalized to within this tolerance.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub usize);

impl ActionId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Environment response in `[0, 1]`; `1` is full reward, `0` full penalty.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ReinforcementSignal(f64);

impl ReinforcementSignal {
    pub fn new(beta: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&beta) {
            Ok(Self(beta))
        } else {
            Err(Error::InvalidSignal(beta))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Named families of the linear scheme, classified from the `(a, b)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    PureChance,
    RewardInaction,
    PenaltyInaction,
    RewardPenalty,
    RewardEpsilonPenalty,
    /// Penalty rate larger than the reward rate; no conventional name.
    Other,
}

/// Reward rate `a` and penalty rate `b` of the linear update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningScheme {
    pub reward: f64,
    pub penalty: f64,
}

impl LearningScheme {
    pub const PURE_CHANCE: LearningScheme = LearningScheme {
        reward: 0.0,
        penalty: 0.0,
    };

    pub fn new(reward: f64, penalty: f64) -> Result<Self> {
        for (name, v) in [("reward rate", reward), ("penalty rate", penalty)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfiguration(format!(
                    "{name} {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self { reward, penalty })
    }

    /// L_RI: `b = 0`.
    pub fn reward_inaction(a: f64) -> Result<Self> {
        Self::new(a, 0.0)
    }

    /// L_PI: `a = 0`.
    pub fn penalty_inaction(b: f64) -> Result<Self> {
        Self::new(0.0, b)
    }

    /// L_RP: `a = b`.
    pub fn reward_penalty(a: f64) -> Result<Self> {
        Self::new(a, a)
    }

    /// L_RεP: `b = εa` with `ε < 1`.
    pub fn reward_epsilon_penalty(a: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidConfiguration(format!(
                "epsilon {epsilon} must lie in [0, 1)"
            )));
        }
        Self::new(a, epsilon * a)
    }

    pub fn is_pure_chance(&self) -> bool {
        self.reward == 0.0 && self.penalty == 0.0
    }

    pub fn kind(&self) -> SchemeKind {
        let (a, b) = (self.reward, self.penalty);
        match (a == 0.0, b == 0.0) {
            (true, true) => SchemeKind::PureChance,
            (false, true) => SchemeKind::RewardInaction,
            (true, false) => SchemeKind::PenaltyInaction,
            _ if a == b => SchemeKind::RewardPenalty,
            _ if b < a => SchemeKind::RewardEpsilonPenalty,
            _ => SchemeKind::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningAutomaton {
    scheme: LearningScheme,
    probabilities: Vec<f64>,
}

impl LearningAutomaton {
    /// Uniformly initialized automaton over `actions` actions.
    pub fn new(actions: usize, scheme: LearningScheme) -> Result<Self> {
        if actions < 2 {
            return Err(Error::InvalidConfiguration(format!(
                "automaton needs at least 2 actions, got {actions}"
            )));
        }
        Ok(Self {
            scheme,
            probabilities: vec![1.0 / actions as f64; actions],
        })
    }

    pub fn actions(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn scheme(&self) -> LearningScheme {
        self.scheme
    }

    pub fn all_actions(&self) -> Vec<ActionId> {
        (0..self.actions()).map(ActionId).collect()
    }

    fn check_available(&self, available: &[ActionId]) -> Result<()> {
        if available.is_empty() {
            return Err(Error::DegenerateActionSet);
        }
        for (i, a) in available.iter().enumerate() {
            if a.0 >= self.actions() {
                return Err(Error::ActionOutOfRange {
                    action: a.0,
                    actions: self.actions(),
                });
            }
            if available[..i].contains(a) {
                return Err(Error::DegenerateActionSet);
            }
        }
        Ok(())
    }

    fn covers_all(&self, available: &[ActionId]) -> bool {
        available.len() == self.actions()
    }

    fn available_mass(&self, available: &[ActionId]) -> Result<f64> {
        let mass: f64 = available.iter().map(|a| self.probabilities[a.0]).sum();
        if mass > 0.0 {
            Ok(mass)
        } else {
            Err(Error::DegenerateActionSet)
        }
    }

    /// Probabilities of `available` rescaled by their total mass, in the
    /// order given.
    pub fn scale_available(&self, available: &[ActionId]) -> Result<Vec<f64>> {
        self.check_available(available)?;
        if self.covers_all(available) {
            return Ok(available.iter().map(|a| self.probabilities[a.0]).collect());
        }
        let mass = self.available_mass(available)?;
        Ok(available
            .iter()
            .map(|a| self.probabilities[a.0] / mass)
            .collect())
    }

    pub fn select_action<R: Rng + ?Sized>(
        &self,
        available: &[ActionId],
        rng: &mut R,
    ) -> Result<ActionId> {
        let scaled = self.scale_available(available)?;
        let total: f64 = scaled.iter().sum();
        let draw = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        for (a, p) in available.iter().zip(&scaled) {
            acc += p;
            if draw < acc {
                return Ok(*a);
            }
        }
        // Rounding left `draw` past the last bucket.
        available
            .iter()
            .zip(&scaled)
            .rev()
            .find(|(_, p)| **p > 0.0)
            .map(|(a, _)| *a)
            .ok_or(Error::DegenerateActionSet)
    }

    /// Linear reward/penalty update over the full action set.
    pub fn update(&mut self, chosen: ActionId, signal: ReinforcementSignal) -> Result<()> {
        let all = self.all_actions();
        self.update_restricted(&all, chosen, signal)
    }

    /// Linear reward/penalty update over the subset that was available when
    /// `chosen` was drawn. Unavailable actions keep their absolute mass.
    pub fn update_restricted(
        &mut self,
        available: &[ActionId],
        chosen: ActionId,
        signal: ReinforcementSignal,
    ) -> Result<()> {
        self.check_available(available)?;
        if !available.contains(&chosen) {
            return Err(Error::ActionOutOfRange {
                action: chosen.0,
                actions: self.actions(),
            });
        }
        if self.scheme.is_pure_chance() || available.len() == 1 {
            return Ok(());
        }

        let mass = self.available_mass(available)?;
        let (a, b) = (self.scheme.reward, self.scheme.penalty);
        let beta = signal.value();
        let spread = 1.0 / (available.len() - 1) as f64;

        let mut scaled: Vec<f64> = available
            .iter()
            .map(|act| {
                let p = self.probabilities[act.0] / mass;
                let next = if *act == chosen {
                    p + a * beta * (1.0 - p) - b * (1.0 - beta) * p
                } else {
                    p - a * beta * p + b * (1.0 - beta) * (spread - p)
                };
                next.max(0.0)
            })
            .collect();
        let scaled_sum: f64 = scaled.iter().sum();
        if scaled_sum <= 0.0 {
            return Err(Error::DegenerateActionSet);
        }
        for p in &mut scaled {
            *p /= scaled_sum;
        }
        for (act, p) in available.iter().zip(scaled) {
            self.probabilities[act.0] = p * mass;
        }

        let total: f64 = self.probabilities.iter().sum();
        for p in &mut self.probabilities {
            *p = (*p / total).clamp(0.0, 1.0);
        }
        Ok(())
    }
}
