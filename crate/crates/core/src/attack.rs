//! Selfish-mining pools.
//!
//! Two strategies share one state machine. Classic SM1 races on a lead of
//! one and matches honest blocks one at a time once its lead exceeds two.
//! The modified strategy holds on a lead of one, because a withheld block
//! carries an older timestamp and loses weight contests, and tracks an
//! estimate `K̃` of the defenders' fail-safe so it can release exactly when
//! its lead would win on height.

use rand::Rng;

use crate::chain::{Block, BlockId};
use crate::defense::{reinforcement_signal, AdaptiveFailSafe, DecisionKind};
use crate::error::Result;
use crate::la::LearningScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    ClassicSm1,
    ModifiedSm1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReleaseDirective {
    None,
    PublishAll,
    PublishFirstUnpublished,
    AdoptPublic,
}

/// Effect of carrying out a directive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Release {
    /// Blocks to broadcast, parents first.
    pub publish: Vec<Block>,
    /// Withheld blocks given up for good.
    pub abandoned: Vec<Block>,
}

#[derive(Debug, Clone)]
pub struct AttackerState {
    strategy: Strategy,
    base: Block,
    private_chain: Vec<Block>,
    published: usize,
    public_height: u64,
    public_tip: Block,
    private_branch_length: u64,
    k_tilde: AdaptiveFailSafe,
    weight_calc_counter: u64,
}

impl AttackerState {
    pub fn new(
        strategy: Strategy,
        base: Block,
        k_min: u32,
        k_max: u32,
        scheme: LearningScheme,
    ) -> Result<Self> {
        Ok(Self {
            strategy,
            base,
            private_chain: Vec::new(),
            published: 0,
            public_height: base.height,
            public_tip: base,
            private_branch_length: 0,
            k_tilde: AdaptiveFailSafe::new(k_min, k_max, scheme)?,
            weight_calc_counter: 0,
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Block the private chain forks from.
    pub fn base(&self) -> &Block {
        &self.base
    }

    pub fn private_chain(&self) -> &[Block] {
        &self.private_chain
    }

    pub fn published(&self) -> &[Block] {
        &self.private_chain[..self.published]
    }

    pub fn unpublished(&self) -> &[Block] {
        &self.private_chain[self.published..]
    }

    /// Where the pool mines next.
    pub fn private_tip(&self) -> &Block {
        self.private_chain.last().unwrap_or(&self.base)
    }

    pub fn public_height(&self) -> u64 {
        self.public_height
    }

    pub fn private_branch_length(&self) -> u64 {
        self.private_branch_length
    }

    pub fn k_tilde(&self) -> u32 {
        self.k_tilde.k()
    }

    pub fn k_tilde_state(&self) -> &AdaptiveFailSafe {
        &self.k_tilde
    }

    pub fn weight_calc_counter(&self) -> u64 {
        self.weight_calc_counter
    }

    /// Private lead over the public tip.
    pub fn delta(&self) -> i64 {
        self.private_tip().height as i64 - self.public_height as i64
    }

    /// Records the height of the highest public tip.
    pub fn observe_public(&mut self, height: u64) {
        self.public_height = height;
    }

    /// The pool found `block` on its private tip.
    pub fn on_pool_block(&mut self, block: Block) -> ReleaseDirective {
        debug_assert_eq!(block.parent, self.private_tip().id);
        let delta_prev = self.delta();
        self.private_chain.push(block);
        self.private_branch_length += 1;
        if delta_prev == 0 && self.private_branch_length == 2 {
            ReleaseDirective::PublishAll
        } else {
            ReleaseDirective::None
        }
    }

    /// Someone else found `block`, which is now the public tip.
    pub fn on_others_block(&mut self, block: Block) -> ReleaseDirective {
        let delta_prev = self.delta();
        self.public_tip = block;
        self.public_height = self.public_height.max(block.height);
        if delta_prev <= 0 {
            return ReleaseDirective::AdoptPublic;
        }
        match self.strategy {
            // A lead of one is matched by the single withheld block; the race
            // is won by the next pool block, so the branch length is kept.
            Strategy::ClassicSm1 => match delta_prev {
                2 => ReleaseDirective::PublishAll,
                _ => ReleaseDirective::PublishFirstUnpublished,
            },
            Strategy::ModifiedSm1 => {
                let winning_lead = i64::from(self.k_tilde()) + 1;
                if delta_prev == 1 {
                    ReleaseDirective::None
                } else if delta_prev == 2 || delta_prev == winning_lead {
                    ReleaseDirective::PublishAll
                } else if delta_prev > winning_lead {
                    ReleaseDirective::PublishFirstUnpublished
                } else {
                    ReleaseDirective::None
                }
            }
        }
    }

    pub fn apply(&mut self, directive: ReleaseDirective) -> Release {
        match directive {
            ReleaseDirective::None => Release::default(),
            ReleaseDirective::PublishAll => {
                let publish = self.private_chain[self.published..].to_vec();
                self.published = self.private_chain.len();
                self.private_branch_length = 0;
                Release {
                    publish,
                    abandoned: Vec::new(),
                }
            }
            ReleaseDirective::PublishFirstUnpublished => {
                let publish = self.private_chain[self.published..]
                    .first()
                    .copied()
                    .into_iter()
                    .collect::<Vec<_>>();
                self.published += publish.len();
                Release {
                    publish,
                    abandoned: Vec::new(),
                }
            }
            ReleaseDirective::AdoptPublic => Release {
                publish: Vec::new(),
                abandoned: self.abandon(self.public_tip),
            },
        }
    }

    /// Drops the private chain and restarts on `tip`. Returns the withheld
    /// blocks that are lost.
    pub fn abandon(&mut self, tip: Block) -> Vec<Block> {
        let lost = self.private_chain.split_off(self.published);
        self.private_chain.clear();
        self.published = 0;
        self.private_branch_length = 0;
        self.base = tip;
        self.public_tip = tip;
        lost
    }

    /// Forgets published blocks up to and including `id` once they are
    /// part of the main chain. Returns whether `id` was found.
    pub fn trim_committed(&mut self, id: BlockId) -> bool {
        let Some(pos) = self.private_chain[..self.published]
            .iter()
            .position(|b| b.id == id)
        else {
            return false;
        };
        self.base = self.private_chain[pos];
        self.private_chain.drain(..=pos);
        self.published -= pos + 1;
        true
    }

    pub fn on_fork_decision_time(&mut self, observed: Option<DecisionKind>) {
        if observed == Some(DecisionKind::ByWeight) {
            self.weight_calc_counter += 1;
        }
    }

    pub fn on_time_window<R: Rng + ?Sized>(
        &mut self,
        taus_in_theta: u64,
        rng: &mut R,
    ) -> Result<()> {
        let beta = reinforcement_signal(self.weight_calc_counter, taus_in_theta)?;
        self.k_tilde.reinforce(beta)?;
        self.k_tilde.step(rng)?;
        self.weight_calc_counter = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Owner;
    use crate::defense::FailSafeAction;
    use crate::la::ReinforcementSignal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn attacker(strategy: Strategy, k_max: u32) -> AttackerState {
        AttackerState::new(
            strategy,
            Block::genesis(),
            1,
            k_max,
            LearningScheme::PURE_CHANCE,
        )
        .unwrap()
    }

    struct Chains {
        next: u64,
        public: Block,
    }

    impl Chains {
        fn new() -> Self {
            Self {
                next: 1,
                public: Block::genesis(),
            }
        }

        fn pool(&mut self, a: &mut AttackerState) -> ReleaseDirective {
            let b = a
                .private_tip()
                .child(BlockId(self.next), self.next, Owner::Selfish);
            self.next += 1;
            a.on_pool_block(b)
        }

        fn honest(&mut self, a: &mut AttackerState) -> ReleaseDirective {
            let b = self
                .public
                .child(BlockId(self.next), self.next, Owner::Honest);
            self.next += 1;
            self.public = b;
            a.on_others_block(b)
        }
    }

    /// Builds a private lead of `lead` blocks with K̃ forced to `k`.
    fn with_lead(strategy: Strategy, lead: usize, k: u32) -> (AttackerState, Chains) {
        let mut a = attacker(strategy, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        while a.k_tilde() != k {
            let mut probe = a.clone();
            if probe.k_tilde.step(&mut rng).unwrap() != FailSafeAction::Stop {
                a = probe;
            }
        }
        let mut c = Chains::new();
        for _ in 0..lead {
            c.pool(&mut a);
        }
        (a, c)
    }

    #[test]
    fn luck_publishes_two_block_lead_from_a_tie() {
        let mut a = attacker(Strategy::ModifiedSm1, 3);
        let mut c = Chains::new();
        assert_eq!(c.pool(&mut a), ReleaseDirective::None);
        assert_eq!(a.private_branch_length(), 1);
        assert_eq!(c.honest(&mut a), ReleaseDirective::None);
        assert_eq!(a.delta(), 0);
        assert_eq!(c.pool(&mut a), ReleaseDirective::PublishAll);
        let r = a.apply(ReleaseDirective::PublishAll);
        assert_eq!(r.publish.len(), 2);
        assert_eq!(a.private_branch_length(), 0);
    }

    #[test]
    fn others_win_from_a_tie() {
        let mut a = attacker(Strategy::ModifiedSm1, 3);
        let mut c = Chains::new();
        assert_eq!(c.honest(&mut a), ReleaseDirective::AdoptPublic);
        let r = a.apply(ReleaseDirective::AdoptPublic);
        assert!(r.abandoned.is_empty());
        assert_eq!(a.private_tip().id, c.public.id);
    }

    #[test]
    fn adopt_abandons_withheld_blocks() {
        let (mut a, mut c) = with_lead(Strategy::ModifiedSm1, 1, 1);
        c.honest(&mut a);
        assert_eq!(c.honest(&mut a), ReleaseDirective::AdoptPublic);
        let r = a.apply(ReleaseDirective::AdoptPublic);
        assert_eq!(r.abandoned.len(), 1);
        assert!(a.private_chain().is_empty());
    }

    #[test]
    fn modified_arms_by_lead() {
        let cases = [
            // (lead, K̃, expected)
            (1, 1, ReleaseDirective::None),
            (2, 1, ReleaseDirective::PublishAll),
            (2, 3, ReleaseDirective::PublishAll),
            (3, 3, ReleaseDirective::None),
            (4, 3, ReleaseDirective::PublishAll),
            (5, 3, ReleaseDirective::PublishFirstUnpublished),
            (3, 1, ReleaseDirective::PublishFirstUnpublished),
            (4, 5, ReleaseDirective::None),
            (6, 5, ReleaseDirective::PublishAll),
        ];
        for (lead, k, expected) in cases {
            let (mut a, mut c) = with_lead(Strategy::ModifiedSm1, lead, k);
            assert_eq!(c.honest(&mut a), expected, "lead {lead}, K̃ {k}");
        }
    }

    #[test]
    fn classic_arms_by_lead() {
        let cases = [
            (1, ReleaseDirective::PublishFirstUnpublished),
            (2, ReleaseDirective::PublishAll),
            (3, ReleaseDirective::PublishFirstUnpublished),
            (7, ReleaseDirective::PublishFirstUnpublished),
        ];
        for (lead, expected) in cases {
            let (mut a, mut c) = with_lead(Strategy::ClassicSm1, lead, 1);
            assert_eq!(c.honest(&mut a), expected, "lead {lead}");
        }
    }

    #[test]
    fn classic_race_then_pool_block_wins() {
        let (mut a, mut c) = with_lead(Strategy::ClassicSm1, 1, 1);
        let d = c.honest(&mut a);
        assert_eq!(a.apply(d).publish.len(), 1);
        assert_eq!(c.pool(&mut a), ReleaseDirective::PublishAll);
        assert_eq!(a.apply(ReleaseDirective::PublishAll).publish.len(), 1);
    }

    #[test]
    fn publish_first_matches_the_public_height() {
        let (mut a, mut c) = with_lead(Strategy::ClassicSm1, 4, 1);
        for _ in 0..2 {
            let d = c.honest(&mut a);
            assert_eq!(d, ReleaseDirective::PublishFirstUnpublished);
            let r = a.apply(d);
            assert_eq!(r.publish.len(), 1);
            assert_eq!(r.publish[0].height, c.public.height);
        }
        assert_eq!(c.honest(&mut a), ReleaseDirective::PublishAll);
    }

    #[test]
    fn trim_moves_the_base() {
        let (mut a, mut c) = with_lead(Strategy::ClassicSm1, 3, 1);
        let d = c.honest(&mut a);
        a.apply(d);
        let first = a.published()[0].id;
        assert!(a.trim_committed(first));
        assert_eq!(a.base().id, first);
        assert_eq!(a.published().len(), 0);
        assert_eq!(a.private_chain().len(), 2);
        assert!(!a.trim_committed(BlockId(999)));
    }

    #[test]
    fn weight_observations_are_counted() {
        let mut a = attacker(Strategy::ModifiedSm1, 3);
        a.on_fork_decision_time(Some(DecisionKind::ByWeight));
        a.on_fork_decision_time(Some(DecisionKind::ByHeight));
        a.on_fork_decision_time(None);
        assert_eq!(a.weight_calc_counter(), 1);
    }

    #[test]
    fn window_updates_with_observed_fraction() {
        let scheme = LearningScheme::reward_inaction(0.1).unwrap();
        let mut a =
            AttackerState::new(Strategy::ModifiedSm1, Block::genesis(), 1, 3, scheme).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        a.on_time_window(10, &mut rng).unwrap();
        let mut expected = a.k_tilde.clone();
        for i in 0..10 {
            a.on_fork_decision_time((i < 4).then_some(DecisionKind::ByWeight));
        }
        a.on_time_window(10, &mut rng).unwrap();
        expected
            .reinforce(ReinforcementSignal::new(0.4).unwrap())
            .unwrap();
        assert_eq!(
            a.k_tilde.automaton().probabilities(),
            expected.automaton().probabilities()
        );
        assert_eq!(a.weight_calc_counter(), 0);
    }

    #[test]
    fn k_tilde_stays_in_bounds() {
        let mut a = attacker(Strategy::ModifiedSm1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            a.on_time_window(10, &mut rng).unwrap();
            assert!((1..=3).contains(&a.k_tilde()));
        }
        let mut top = attacker(Strategy::ModifiedSm1, 1);
        top.on_time_window(10, &mut rng).unwrap();
        assert_eq!(top.k_tilde(), 1);
    }
}
