//! Blocks and the set of branches competing above the last common block.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u64);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Owner {
    Honest,
    Selfish,
}

/// Timestamps are creation-order sequence numbers, fixed when the block is
/// mined regardless of when it is released.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub id: BlockId,
    pub parent: BlockId,
    pub height: u64,
    pub timestamp: u64,
    pub owner: Owner,
}

impl Block {
    pub fn genesis() -> Self {
        Self {
            id: BlockId(0),
            parent: BlockId(0),
            height: 0,
            timestamp: 0,
            owner: Owner::Honest,
        }
    }

    pub fn child(&self, id: BlockId, timestamp: u64, owner: Owner) -> Self {
        debug_assert!(timestamp > self.timestamp);
        Self {
            id,
            parent: self.id,
            height: self.height + 1,
            timestamp,
            owner,
        }
    }
}

/// Contiguous run of blocks starting right above the fork point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    blocks: Vec<Block>,
}

impl Branch {
    fn new(blocks: Vec<Block>) -> Self {
        debug_assert!(!blocks.is_empty());
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("branches are never empty")
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn position(&self, id: BlockId) -> Option<usize> {
        self.blocks.iter().position(|b| b.id == id)
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.position(id).is_some()
    }
}

/// Outcome of settling a fork: blocks that joined the main chain and blocks
/// that were dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settlement {
    pub committed: Vec<Block>,
    pub discarded: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForkSet {
    base: Block,
    branches: Vec<Branch>,
}

impl ForkSet {
    pub fn new(base: Block) -> Self {
        Self {
            base,
            branches: Vec::new(),
        }
    }

    /// The last common block, at height `C_H`.
    pub fn base(&self) -> &Block {
        &self.base
    }

    pub fn base_height(&self) -> u64 {
        self.base.height
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Height of the highest public tip, or of the base when nothing sits
    /// above it.
    pub fn tip_height(&self) -> u64 {
        self.branches
            .iter()
            .map(|b| b.tip().height)
            .max()
            .unwrap_or(self.base.height)
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.branches.iter().any(|b| b.contains(id))
    }

    pub fn find(&self, id: BlockId) -> Option<&Block> {
        if id == self.base.id {
            return Some(&self.base);
        }
        self.branches
            .iter()
            .flat_map(|b| b.blocks.iter())
            .find(|b| b.id == id)
    }

    /// Index of the branch whose tip is `id`.
    pub fn branch_with_tip(&self, id: BlockId) -> Option<usize> {
        self.branches.iter().position(|b| b.tip().id == id)
    }

    /// Adds `block` to the branch it extends and returns that branch's index.
    /// A block on the fork point, or on a block that already has a child,
    /// opens a new branch.
    pub fn append_block(&mut self, block: Block) -> Result<usize> {
        if let Some(i) = self.branches.iter().position(|b| b.contains(block.id)) {
            return Ok(i);
        }
        if let Some(i) = self.branch_with_tip(block.parent) {
            self.branches[i].blocks.push(block);
            return Ok(i);
        }
        if block.parent == self.base.id {
            self.branches.push(Branch::new(vec![block]));
            return Ok(self.branches.len() - 1);
        }
        for i in 0..self.branches.len() {
            if let Some(pos) = self.branches[i].position(block.parent) {
                let mut blocks = self.branches[i].blocks[..=pos].to_vec();
                blocks.push(block);
                self.branches.push(Branch::new(blocks));
                return Ok(self.branches.len() - 1);
            }
        }
        Err(Error::OrphanBlock {
            block: block.id,
            parent: block.parent,
        })
    }

    /// `L[i]` = tip height of branch `i` minus `C_H`.
    pub fn fork_lengths(&self) -> Vec<u64> {
        self.branches
            .iter()
            .map(|b| b.tip().height - self.base.height)
            .collect()
    }

    pub fn max_length(&self) -> u64 {
        self.fork_lengths().into_iter().max().unwrap_or(0)
    }

    /// Per-height timestamp contest: at each relative height up to
    /// `max_length`, the branch holding the latest block earns one unit.
    /// Equal timestamps are split uniformly at random; branches that do not
    /// reach a height sit that height out.
    pub fn fork_weights<R: Rng + ?Sized>(&self, max_length: u64, rng: &mut R) -> Vec<u64> {
        let mut weights = vec![0u64; self.branches.len()];
        let mut leaders = Vec::with_capacity(self.branches.len());
        for h in 0..max_length as usize {
            leaders.clear();
            let mut best = 0u64;
            for (i, branch) in self.branches.iter().enumerate() {
                let Some(block) = branch.blocks.get(h) else {
                    continue;
                };
                if leaders.is_empty() || block.timestamp > best {
                    best = block.timestamp;
                    leaders.clear();
                    leaders.push(i);
                } else if block.timestamp == best {
                    leaders.push(i);
                }
            }
            let winner = match leaders.len() {
                0 => continue,
                1 => leaders[0],
                n => leaders[rng.gen_range(0..n)],
            };
            weights[winner] += 1;
        }
        weights
    }

    /// Keeps branch `chosen` as the main chain and drops the rest. The base
    /// moves to the chosen tip.
    pub fn settle(&mut self, chosen: usize) -> Settlement {
        let winner = self.branches.swap_remove(chosen);
        let mut discarded = Vec::new();
        for branch in self.branches.drain(..) {
            for block in branch.blocks {
                if !winner.contains(block.id) && !discarded.iter().any(|b: &Block| b.id == block.id)
                {
                    discarded.push(block);
                }
            }
        }
        self.base = *winner.tip();
        Settlement {
            committed: winner.blocks,
            discarded,
        }
    }

    /// Longest-chain pruning: drops every branch strictly shorter than the
    /// longest one. Returns the blocks no surviving branch references.
    pub fn retain_longest(&mut self) -> Vec<Block> {
        let longest = self.max_length();
        let base_height = self.base.height;
        let (keep, drop): (Vec<Branch>, Vec<Branch>) = self
            .branches
            .drain(..)
            .partition(|b| b.tip().height - base_height == longest);
        self.branches = keep;
        let mut discarded: Vec<Block> = Vec::new();
        for block in drop.into_iter().flat_map(|b| b.blocks) {
            if !self.contains(block.id) && !discarded.iter().any(|d| d.id == block.id) {
                discarded.push(block);
            }
        }
        discarded
    }

    /// Moves the base up to the last block shared by every branch, returning
    /// the blocks that became common. A lone branch is left untouched.
    pub fn commit_common_prefix(&mut self) -> Vec<Block> {
        if self.branches.len() < 2 {
            return Vec::new();
        }
        let shortest = self.branches.iter().map(Branch::len).min().unwrap_or(0);
        let first = &self.branches[0].blocks;
        let shared = (0..shortest)
            .take_while(|&h| self.branches.iter().all(|b| b.blocks[h].id == first[h].id))
            .count();
        if shared == 0 {
            return Vec::new();
        }
        let committed = first[..shared].to_vec();
        self.base = committed[shared - 1];
        for branch in &mut self.branches {
            branch.blocks.drain(..shared);
        }
        self.branches.retain(|b| !b.is_empty());
        committed
    }

    /// Moves the base up to `id` when every branch runs through it. Returns
    /// the newly committed blocks, empty if `id` is not shared by all.
    pub fn commit_through(&mut self, id: BlockId) -> Vec<Block> {
        let Some(first) = self.branches.first() else {
            return Vec::new();
        };
        let Some(pos) = first.position(id) else {
            return Vec::new();
        };
        if !self.branches.iter().all(|b| b.position(id) == Some(pos)) {
            return Vec::new();
        }
        let committed = first.blocks[..=pos].to_vec();
        self.base = committed[pos];
        for branch in &mut self.branches {
            branch.blocks.drain(..=pos);
        }
        self.branches.retain(|b| !b.is_empty());
        committed
    }
}
