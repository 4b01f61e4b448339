//! Fork-resolution policies.
//!
//! The Nik defender resolves forks only at fork-decision times. A branch
//! that leads every rival by more than the fail-safe `K` wins on height;
//! otherwise the per-height timestamp weight decides. At the end of every
//! time window the fraction of weight decisions is fed back to a learning
//! automaton that grows, keeps or shrinks `K`.
//!
//! The baselines (uniform tie-breaking, first-seen longest chain) resolve
//! every fork as soon as one branch is strictly longer.

use rand::Rng;

use crate::chain::{Block, ForkSet, Settlement};
use crate::error::{Error, Result};
use crate::la::{ActionId, LearningAutomaton, LearningScheme, ReinforcementSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    Nik,
    TieBreaking,
    LongestChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecisionKind {
    ByHeight,
    ByWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailSafeAction {
    Grow,
    Stop,
    Shrink,
}

impl FailSafeAction {
    pub const ALL: [FailSafeAction; 3] = [Self::Grow, Self::Stop, Self::Shrink];

    pub fn id(self) -> ActionId {
        match self {
            Self::Grow => ActionId(0),
            Self::Stop => ActionId(1),
            Self::Shrink => ActionId(2),
        }
    }

    pub fn from_id(id: ActionId) -> Self {
        Self::ALL[id.0]
    }
}

/// `K` together with the interval it is allowed to move in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FailSafe {
    k: u32,
    k_min: u32,
    k_max: u32,
}

impl FailSafe {
    /// Starts at `k_min`.
    pub fn new(k_min: u32, k_max: u32) -> Result<Self> {
        if k_min < 1 || k_min > k_max {
            return Err(Error::InvalidConfiguration(format!(
                "fail-safe interval [{k_min}, {k_max}] must satisfy 1 <= k_min <= k_max"
            )));
        }
        Ok(Self {
            k: k_min,
            k_min,
            k_max,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn k_min(&self) -> u32 {
        self.k_min
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    /// Grow is withheld at `k_max` and Shrink at `k_min`.
    pub fn available_actions(&self) -> Vec<FailSafeAction> {
        use FailSafeAction::*;
        if self.k_min == self.k_max {
            vec![Stop]
        } else if self.k == self.k_max {
            vec![Stop, Shrink]
        } else if self.k == self.k_min {
            vec![Grow, Stop]
        } else {
            vec![Grow, Stop, Shrink]
        }
    }

    pub fn apply(&mut self, action: FailSafeAction) {
        match action {
            FailSafeAction::Grow => self.k = (self.k + 1).min(self.k_max),
            FailSafeAction::Shrink => self.k = self.k.saturating_sub(1).max(self.k_min),
            FailSafeAction::Stop => {}
        }
    }
}

/// A fail-safe value driven by a three-action automaton. Used by the
/// defender for `K` and by the attacker for its estimate of `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveFailSafe {
    fail_safe: FailSafe,
    automaton: LearningAutomaton,
    /// Action set and choice of the last step, reinforced at the next window.
    pending: Option<(Vec<ActionId>, ActionId)>,
}

impl AdaptiveFailSafe {
    pub fn new(k_min: u32, k_max: u32, scheme: LearningScheme) -> Result<Self> {
        Ok(Self {
            fail_safe: FailSafe::new(k_min, k_max)?,
            automaton: LearningAutomaton::new(FailSafeAction::ALL.len(), scheme)?,
            pending: None,
        })
    }

    pub fn k(&self) -> u32 {
        self.fail_safe.k()
    }

    pub fn fail_safe(&self) -> &FailSafe {
        &self.fail_safe
    }

    pub fn automaton(&self) -> &LearningAutomaton {
        &self.automaton
    }

    pub fn last_action(&self) -> Option<FailSafeAction> {
        self.pending
            .as_ref()
            .map(|(_, a)| FailSafeAction::from_id(*a))
    }

    /// Rewards or penalizes the previous step's action. A no-op before the
    /// first step.
    pub fn reinforce(&mut self, signal: ReinforcementSignal) -> Result<()> {
        if let Some((available, chosen)) = &self.pending {
            self.automaton
                .update_restricted(available, *chosen, signal)?;
        }
        Ok(())
    }

    /// Draws Grow/Stop/Shrink over the currently allowed subset and moves `K`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<FailSafeAction> {
        let available: Vec<ActionId> = self
            .fail_safe
            .available_actions()
            .into_iter()
            .map(FailSafeAction::id)
            .collect();
        let chosen = self.automaton.select_action(&available, rng)?;
        let action = FailSafeAction::from_id(chosen);
        self.fail_safe.apply(action);
        self.pending = Some((available, chosen));
        Ok(action)
    }
}

/// β = weight decisions / decision times in the window.
pub fn reinforcement_signal(
    weight_decisions: u64,
    taus_in_theta: u64,
) -> Result<ReinforcementSignal> {
    if taus_in_theta == 0 || weight_decisions > taus_in_theta {
        return Err(Error::InvalidWindow {
            weight_decisions,
            taus: taus_in_theta,
        });
    }
    ReinforcementSignal::new(weight_decisions as f64 / taus_in_theta as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub branch: usize,
    pub kind: DecisionKind,
}

/// Picks a branch among two or more. The longest branch wins outright when
/// it leads the runner-up by more than `k`; otherwise the heaviest branch
/// wins, with equal weights going to the longer branch and then to a
/// uniform draw. Returns `None` when there is nothing to decide.
pub fn chain_selection<R: Rng + ?Sized>(fork: &ForkSet, k: u32, rng: &mut R) -> Option<Selection> {
    if fork.branch_count() < 2 {
        return None;
    }
    let lengths = fork.fork_lengths();
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by(|&a, &b| lengths[b].cmp(&lengths[a]));
    let (longest, runner_up) = (lengths[order[0]], lengths[order[1]]);

    if longest - runner_up > u64::from(k) {
        return Some(Selection {
            branch: order[0],
            kind: DecisionKind::ByHeight,
        });
    }

    let weights = fork.fork_weights(longest, rng);
    let best = (0..weights.len())
        .map(|i| (weights[i], lengths[i]))
        .max()
        .expect("at least two branches");
    let candidates: Vec<usize> = (0..weights.len())
        .filter(|&i| (weights[i], lengths[i]) == best)
        .collect();
    let branch = match candidates.len() {
        1 => candidates[0],
        n => candidates[rng.gen_range(0..n)],
    };
    Some(Selection {
        branch,
        kind: DecisionKind::ByWeight,
    })
}

/// Uniform choice among the longest branches.
pub fn tie_breaking_select<R: Rng + ?Sized>(fork: &ForkSet, rng: &mut R) -> Option<usize> {
    let lengths = fork.fork_lengths();
    let longest = *lengths.iter().max()?;
    let leaders: Vec<usize> = (0..lengths.len())
        .filter(|&i| lengths[i] == longest)
        .collect();
    Some(match leaders.len() {
        1 => leaders[0],
        n => leaders[rng.gen_range(0..n)],
    })
}

#[derive(Debug, Clone, Copy)]
pub enum DefenderEvent<'a> {
    /// Blocks that became visible at the same instant.
    BlockReceive(&'a [Block]),
    ForkDecisionTime,
    TimeWindow,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub decision: Option<Selection>,
    pub settlement: Settlement,
    /// Set when a time window closed and `K` was stepped.
    pub k_after_window: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct Defender {
    policy: Policy,
    fail_safe: AdaptiveFailSafe,
    weight_decisions: u64,
    tau_count_in_theta: u64,
    height_total: u64,
    weight_total: u64,
}

impl Defender {
    pub fn new(policy: Policy, k_min: u32, k_max: u32, scheme: LearningScheme) -> Result<Self> {
        Ok(Self {
            policy,
            fail_safe: AdaptiveFailSafe::new(k_min, k_max, scheme)?,
            weight_decisions: 0,
            tau_count_in_theta: 0,
            height_total: 0,
            weight_total: 0,
        })
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn k(&self) -> u32 {
        self.fail_safe.k()
    }

    pub fn fail_safe(&self) -> &AdaptiveFailSafe {
        &self.fail_safe
    }

    pub fn weight_decisions(&self) -> u64 {
        self.weight_decisions
    }

    pub fn tau_count_in_theta(&self) -> u64 {
        self.tau_count_in_theta
    }

    /// Decisions over the whole run, `(by height, by weight)`.
    pub fn decision_totals(&self) -> (u64, u64) {
        (self.height_total, self.weight_total)
    }

    pub fn update_fail_safe<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<FailSafeAction> {
        self.fail_safe.step(rng)
    }

    pub fn handle_event<R: Rng + ?Sized>(
        &mut self,
        event: DefenderEvent<'_>,
        fork: &mut ForkSet,
        rng: &mut R,
    ) -> Result<Outcome> {
        match event {
            DefenderEvent::BlockReceive(blocks) => self.receive(blocks, fork),
            DefenderEvent::ForkDecisionTime => self.decide(fork, rng),
            DefenderEvent::TimeWindow => {
                let mut outcome = self.decide(fork, rng)?;
                if self.policy == Policy::Nik {
                    let beta =
                        reinforcement_signal(self.weight_decisions, self.tau_count_in_theta)?;
                    self.fail_safe.reinforce(beta)?;
                    self.update_fail_safe(rng)?;
                    self.weight_decisions = 0;
                    self.tau_count_in_theta = 0;
                    outcome.k_after_window = Some(self.k());
                }
                Ok(outcome)
            }
        }
    }

    fn receive(&mut self, blocks: &[Block], fork: &mut ForkSet) -> Result<Outcome> {
        for block in blocks {
            fork.append_block(*block)?;
        }
        let mut settlement = Settlement::default();
        if self.policy != Policy::Nik {
            settlement.discarded = fork.retain_longest();
        }
        settlement.committed = fork.commit_common_prefix();
        Ok(Outcome {
            settlement,
            ..Outcome::default()
        })
    }

    /// Resolves any open fork. Only the Nik defender holds forks open until
    /// decision time; the baselines settle by length on receipt, so for
    /// them this is a no-op.
    fn decide<R: Rng + ?Sized>(&mut self, fork: &mut ForkSet, rng: &mut R) -> Result<Outcome> {
        if self.policy != Policy::Nik {
            return Ok(Outcome::default());
        }
        self.tau_count_in_theta += 1;
        let Some(selection) = chain_selection(fork, self.k(), rng) else {
            return Ok(Outcome::default());
        };
        match selection.kind {
            DecisionKind::ByHeight => self.height_total += 1,
            DecisionKind::ByWeight => {
                self.weight_total += 1;
                self.weight_decisions += 1;
            }
        }
        Ok(Outcome {
            decision: Some(selection),
            settlement: fork.settle(selection.branch),
            k_after_window: None,
        })
    }
}
