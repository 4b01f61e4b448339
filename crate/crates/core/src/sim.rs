//! Monte Carlo engine.
//!
//! Time advances in block-discovery events. Each event is won by the
//! selfish pool with probability α. Honest miners extend the longest
//! public branch, staying on their own branch when several are equally
//! long; during such a race a share γ of them extends the rival branch.
//! Every `tau_blocks` events the defenders reach a fork-decision time and
//! every `theta_taus` of those closes a time window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attack::{AttackerState, Strategy};
use crate::chain::{Block, BlockId, ForkSet, Owner};
use crate::defense::{tie_breaking_select, Defender, DefenderEvent, Outcome, Policy};
use crate::error::{Error, Result};
use crate::la::LearningScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackerKind {
    /// The selfish pool mines honestly.
    None,
    ClassicSm1,
    ModifiedSm1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub n_blocks: u64,
    pub tau_blocks: u64,
    pub theta_taus: u64,
    pub k_min: u32,
    pub k_max: u32,
    /// Used by the defenders and mirrored by the attacker's estimate of `K`.
    pub scheme: LearningScheme,
    pub defense: Policy,
    pub attacker: AttackerKind,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            gamma: 0.5,
            n_blocks: 10_000,
            tau_blocks: 5,
            theta_taus: 10,
            k_min: 1,
            k_max: 3,
            scheme: LearningScheme::new(0.1, 0.01).expect("valid scheme"),
            defense: Policy::Nik,
            attacker: AttackerKind::ModifiedSm1,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfiguration(msg));
        if !(0.0..=0.5).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 0.5]", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if self.n_blocks == 0 {
            return bad("n_blocks must be positive".into());
        }
        if self.tau_blocks == 0 {
            return bad("tau_blocks must be positive".into());
        }
        if self.theta_taus == 0 {
            return bad("theta_taus must be positive".into());
        }
        if self.k_min < 1 || self.k_min > self.k_max {
            return bad(format!(
                "fail-safe interval [{}, {}] must satisfy 1 <= k_min <= k_max",
                self.k_min, self.k_max
            ));
        }
        LearningScheme::new(self.scheme.reward, self.scheme.penalty)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub honest_accepted: u64,
    pub selfish_accepted: u64,
    pub discarded: u64,
    pub honest_relative_revenue: f64,
    pub selfish_relative_revenue: f64,
    pub height_decisions: u64,
    pub weight_decisions: u64,
    /// `K` after each closed time window, as (window index, k).
    pub k_trajectory: Vec<(u64, u32)>,
}

/// Which branch an honest block joins during an equal-length race.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RaceSide {
    HonestBranch,
    SelfishBranch,
}

pub fn sample_owner<R: Rng + ?Sized>(
    alpha: f64,
    race_active: bool,
    gamma: f64,
    rng: &mut R,
) -> (Owner, Option<RaceSide>) {
    if rng.gen::<f64>() < alpha {
        return (Owner::Selfish, None);
    }
    if !race_active {
        return (Owner::Honest, None);
    }
    let side = if rng.gen::<f64>() < gamma {
        RaceSide::SelfishBranch
    } else {
        RaceSide::HonestBranch
    };
    (Owner::Honest, Some(side))
}

/// Shares of the accepted blocks, `(honest, selfish)`.
pub fn relative_revenue(honest_won: u64, selfish_won: u64) -> Result<(f64, f64)> {
    let total = honest_won + selfish_won;
    if total == 0 {
        return Err(Error::UndefinedRevenue);
    }
    Ok((
        honest_won as f64 / total as f64,
        selfish_won as f64 / total as f64,
    ))
}

const MINING: u64 = 0;
const DEFENSE: u64 = 1;
const ATTACK: u64 = 2;

/// Independent stream per (seed, α, role). The top two bits of a
/// non-negative `f64` below 2 are zero, so rotating them to the bottom
/// leaves room for the role without collisions.
fn stream(seed: u64, alpha: f64, role: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(alpha.to_bits().rotate_left(2) ^ role);
    rng
}

struct Engine {
    cfg: SimConfig,
    fork: ForkSet,
    defender: Defender,
    attacker: Option<AttackerState>,
    honest_tip: Block,
    honest_accepted: u64,
    selfish_accepted: u64,
    discarded: u64,
    taus: u64,
    k_trajectory: Vec<(u64, u32)>,
    mining: ChaCha8Rng,
    defense: ChaCha8Rng,
    attack: ChaCha8Rng,
}

impl Engine {
    fn new(cfg: SimConfig) -> Result<Self> {
        let genesis = Block::genesis();
        let strategy = match cfg.attacker {
            AttackerKind::None => None,
            AttackerKind::ClassicSm1 => Some(Strategy::ClassicSm1),
            AttackerKind::ModifiedSm1 => Some(Strategy::ModifiedSm1),
        };
        let attacker = strategy
            .map(|s| AttackerState::new(s, genesis, cfg.k_min, cfg.k_max, cfg.scheme))
            .transpose()?;
        Ok(Self {
            fork: ForkSet::new(genesis),
            defender: Defender::new(cfg.defense, cfg.k_min, cfg.k_max, cfg.scheme)?,
            attacker,
            honest_tip: genesis,
            honest_accepted: 0,
            selfish_accepted: 0,
            discarded: 0,
            taus: 0,
            k_trajectory: Vec::new(),
            mining: stream(cfg.seed, cfg.alpha, MINING),
            defense: stream(cfg.seed, cfg.alpha, DEFENSE),
            attack: stream(cfg.seed, cfg.alpha, ATTACK),
            cfg,
        })
    }

    fn run(mut self) -> Result<RunResult> {
        for event in 1..=self.cfg.n_blocks {
            self.mine(event)?;
            self.reconcile();
            if self.cfg.defense == Policy::Nik && event.is_multiple_of(self.cfg.tau_blocks) {
                self.decision_time()?;
                self.reconcile();
            }
        }
        self.finish()?;

        let (height_decisions, weight_decisions) = self.defender.decision_totals();
        let (honest_relative_revenue, selfish_relative_revenue) =
            relative_revenue(self.honest_accepted, self.selfish_accepted).unwrap_or((0.0, 0.0));
        Ok(RunResult {
            honest_accepted: self.honest_accepted,
            selfish_accepted: self.selfish_accepted,
            discarded: self.discarded,
            honest_relative_revenue,
            selfish_relative_revenue,
            height_decisions,
            weight_decisions,
            k_trajectory: self.k_trajectory,
        })
    }

    fn mine(&mut self, event: u64) -> Result<()> {
        let race = self.race();
        let uniform_ties = self.cfg.defense == Policy::TieBreaking;
        let (owner, side) = sample_owner(
            self.cfg.alpha,
            race.is_some() && !uniform_ties,
            self.cfg.gamma,
            &mut self.mining,
        );
        let id = BlockId(event);

        if owner == Owner::Selfish {
            if let Some(attacker) = self.attacker.as_mut() {
                let block = attacker.private_tip().child(id, event, owner);
                let directive = attacker.on_pool_block(block);
                return self.release(directive);
            }
        }

        let parent = match race {
            Some((own, ref leaders)) if uniform_ties => {
                let pick = tie_breaking_select(&self.fork, &mut self.mining).unwrap_or(own);
                debug_assert!(leaders.contains(&pick));
                *self.fork.branches()[pick].tip()
            }
            Some((own, ref leaders)) if side == Some(RaceSide::SelfishBranch) => {
                let rival = leaders.iter().copied().find(|&i| i != own).unwrap_or(own);
                *self.fork.branches()[rival].tip()
            }
            _ => self.honest_tip,
        };
        let block = parent.child(id, event, owner);
        self.honest_tip = block;
        // The pool answers instantly, so its reply arrives together with
        // the block it answers.
        let mut batch = vec![block];
        if let Some(attacker) = self.attacker.as_mut() {
            let directive = attacker.on_others_block(block);
            let release = attacker.apply(directive);
            self.discarded += release.abandoned.len() as u64;
            batch.extend(release.publish);
        }
        self.receive(&batch)
    }

    /// The honest miners' branch and every branch tied with it for the
    /// lead, when there is more than one.
    fn race(&self) -> Option<(usize, Vec<usize>)> {
        let own = self.fork.branch_with_tip(self.honest_tip.id)?;
        let lengths = self.fork.fork_lengths();
        let longest = *lengths.iter().max()?;
        if lengths[own] != longest {
            return None;
        }
        let leaders: Vec<usize> = (0..lengths.len())
            .filter(|&i| lengths[i] == longest)
            .collect();
        (leaders.len() > 1).then_some((own, leaders))
    }

    fn release(&mut self, directive: crate::attack::ReleaseDirective) -> Result<()> {
        let Some(attacker) = self.attacker.as_mut() else {
            return Ok(());
        };
        let release = attacker.apply(directive);
        self.discarded += release.abandoned.len() as u64;
        if !release.publish.is_empty() {
            self.receive(&release.publish)?;
        }
        Ok(())
    }

    fn receive(&mut self, blocks: &[Block]) -> Result<()> {
        let outcome = self.defender.handle_event(
            DefenderEvent::BlockReceive(blocks),
            &mut self.fork,
            &mut self.defense,
        )?;
        self.tally(&outcome);
        Ok(())
    }

    fn decision_time(&mut self) -> Result<()> {
        self.taus += 1;
        let closes_window = self.taus.is_multiple_of(self.cfg.theta_taus);
        let event = if closes_window {
            DefenderEvent::TimeWindow
        } else {
            DefenderEvent::ForkDecisionTime
        };
        let outcome = self
            .defender
            .handle_event(event, &mut self.fork, &mut self.defense)?;
        self.tally(&outcome);
        if let Some(k) = outcome.k_after_window {
            self.k_trajectory.push((self.taus / self.cfg.theta_taus, k));
        }
        if let Some(attacker) = self.attacker.as_mut() {
            attacker.on_fork_decision_time(outcome.decision.map(|d| d.kind));
            if closes_window {
                attacker.on_time_window(self.cfg.theta_taus, &mut self.attack)?;
            }
        }
        Ok(())
    }

    fn tally(&mut self, outcome: &Outcome) {
        self.commit(&outcome.settlement.committed);
        self.discarded += outcome.settlement.discarded.len() as u64;
    }

    fn commit(&mut self, blocks: &[Block]) {
        for b in blocks {
            match b.owner {
                Owner::Honest => self.honest_accepted += 1,
                Owner::Selfish => self.selfish_accepted += 1,
            }
        }
    }

    /// Restores the invariants between events: honest miners sit on a
    /// longest branch, the attacker's chain still attaches to the public
    /// view, and a lone branch is committed as far as nobody can fork it.
    fn reconcile(&mut self) {
        self.follow_longest();

        if let Some(attacker) = self.attacker.as_mut() {
            attacker.trim_committed(self.fork.base().id);
            let base = attacker.base().id;
            let attached = base == self.fork.base().id || self.fork.contains(base);
            let viable = attached
                && attacker
                    .published()
                    .iter()
                    .all(|b| self.fork.contains(b.id));
            if !viable {
                self.discarded += attacker.abandon(self.honest_tip).len() as u64;
            }
        }

        if self.fork.branch_count() == 1 {
            let anchor = match &self.attacker {
                Some(a) => a.published().last().unwrap_or(a.base()).id,
                None => self.honest_tip.id,
            };
            let committed = self.fork.commit_through(anchor);
            self.commit(&committed);
            if let Some(attacker) = self.attacker.as_mut() {
                attacker.trim_committed(self.fork.base().id);
            }
        }

        if let Some(attacker) = self.attacker.as_mut() {
            attacker.observe_public(self.fork.tip_height());
        }
    }

    fn follow_longest(&mut self) {
        let lengths = self.fork.fork_lengths();
        let Some(&longest) = lengths.iter().max() else {
            self.honest_tip = *self.fork.base();
            return;
        };
        if let Some(own) = self.fork.branch_with_tip(self.honest_tip.id) {
            if lengths[own] == longest {
                return;
            }
        }
        let leaders = (0..lengths.len()).filter(|&i| lengths[i] == longest);
        let branches = self.fork.branches();
        let pick = leaders
            .clone()
            .find(|&i| branches[i].contains(self.honest_tip.id))
            .or_else(|| leaders.clone().next())
            .expect("a longest branch exists");
        self.honest_tip = *branches[pick].tip();
    }

    /// Resolves whatever is still open and drops withheld blocks.
    fn finish(&mut self) -> Result<()> {
        if self.fork.branch_count() >= 2 {
            match self.cfg.defense {
                Policy::Nik => {
                    let outcome = self.defender.handle_event(
                        DefenderEvent::ForkDecisionTime,
                        &mut self.fork,
                        &mut self.defense,
                    )?;
                    self.tally(&outcome);
                }
                Policy::TieBreaking | Policy::LongestChain => {
                    let pick = tie_breaking_select(&self.fork, &mut self.defense).unwrap_or(0);
                    let settlement = self.fork.settle(pick);
                    self.commit(&settlement.committed);
                    self.discarded += settlement.discarded.len() as u64;
                }
            }
        }
        if self.fork.branch_count() == 1 {
            let settlement = self.fork.settle(0);
            self.commit(&settlement.committed);
        }
        if let Some(attacker) = self.attacker.as_ref() {
            self.discarded += attacker.unpublished().len() as u64;
        }
        Ok(())
    }
}

pub fn run(config: &SimConfig) -> Result<RunResult> {
    config.validate()?;
    Engine::new(config.clone())?.run()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub threshold: Option<f64>,
}

/// α from 0.05 to 0.50 in steps of 0.025.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..19).map(|i| f64::from(50 + 25 * i) / 1000.0).collect()
}

/// Runs every (α, seed) pair, in parallel, returned in α-major order.
pub fn sweep_runs(
    base: &SimConfig,
    alphas: &[f64],
    seeds: &[u64],
) -> Result<Vec<(SimConfig, RunResult)>> {
    let configs: Vec<SimConfig> = alphas
        .iter()
        .flat_map(|&alpha| {
            seeds.iter().map(move |&seed| SimConfig {
                alpha,
                seed,
                ..base.clone()
            })
        })
        .collect();
    configs
        .into_par_iter()
        .map(|cfg| run(&cfg).map(|r| (cfg, r)))
        .collect()
}

/// Averages the selfish revenue per α and locates the threshold.
pub fn summarize(runs: &[(SimConfig, RunResult)]) -> SweepResult {
    let mut points: Vec<SweepPoint> = Vec::new();
    let mut start = 0;
    while start < runs.len() {
        let alpha = runs[start].0.alpha;
        let end = start
            + runs[start..]
                .iter()
                .take_while(|(c, _)| c.alpha == alpha)
                .count();
        let xs: Vec<f64> = runs[start..end]
            .iter()
            .map(|(_, r)| r.selfish_relative_revenue)
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        points.push(SweepPoint { alpha, mean, std });
        start = end;
    }
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let threshold = locate_threshold(&points);
    SweepResult { points, threshold }
}

pub fn threshold_sweep(base: &SimConfig, alphas: &[f64], seeds: &[u64]) -> Result<SweepResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfiguration(
            "threshold sweep needs at least one seed".into(),
        ));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) || alphas.iter().any(|&a| !(a > 0.0 && a <= 0.5)) {
        return Err(Error::InvalidConfiguration(
            "sweep alphas must be ascending and inside (0, 0.5]".into(),
        ));
    }
    Ok(summarize(&sweep_runs(base, alphas, seeds)?))
}

/// First point where the mean revenue rises from below α to at least α,
/// interpolated linearly between the bracketing samples.
pub fn locate_threshold(points: &[SweepPoint]) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let (lo, hi) = (w[0], w[1]);
        let d_lo = lo.mean - lo.alpha;
        let d_hi = hi.mean - hi.alpha;
        (d_lo < 0.0 && d_hi >= 0.0)
            .then(|| lo.alpha + (hi.alpha - lo.alpha) * (-d_lo) / (d_hi - d_lo))
    })
}
