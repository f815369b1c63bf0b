//! Non-flat set partitions of the `n × r` grid and Stirling numbers.
//!
//! Cells are numbered row-major: cell `(row, col)` (both 1-based) has index
//! `(row − 1)·r + (col − 1)`. A partition is stored as a restricted-growth
//! string of 1-based block ids. It is *non-flat* when no block holds two
//! cells of the same row.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};

/// Default bound on `n·r` for enumeration.
pub const DEFAULT_CELL_LIMIT: usize = 16;

/// Row occupancy is tracked in a `u64` bitmask per block.
const MAX_ROWS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridIndex {
    pub row: usize,
    pub col: usize,
}

impl GridIndex {
    pub fn new(row: usize, col: usize) -> Self {
        GridIndex { row, col }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    n: usize,
    r: usize,
    labels: Vec<u32>,
    num_blocks: usize,
}

impl Partition {
    /// Builds a partition from 1-based row-major block labels, checking every
    /// invariant (restricted growth, coverage, non-flatness).
    pub fn from_labels(n: usize, r: usize, labels: Vec<u32>) -> Result<Self> {
        let num_blocks = labels.iter().copied().max().unwrap_or(0) as usize;
        let p = Partition {
            n,
            r,
            labels,
            num_blocks,
        };
        p.validate()?;
        Ok(p)
    }

    /// The partition of singletons, which is non-flat for every grid.
    pub fn singletons(n: usize, r: usize) -> Self {
        let labels = (1..=(n * r) as u32).collect();
        Partition {
            n,
            r,
            labels,
            num_blocks: n * r,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    /// Block id (1-based) of cell `(row, col)`.
    pub fn zeta(&self, row: usize, col: usize) -> Result<u32> {
        if row == 0 || col == 0 || row > self.n || col > self.r {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                n: self.n,
                r: self.r,
            });
        }
        Ok(self.labels[(row - 1) * self.r + (col - 1)])
    }

    pub fn zeta_at(&self, idx: GridIndex) -> Result<u32> {
        self.zeta(idx.row, idx.col)
    }

    /// The blocks as lists of grid cells, in block-id order.
    pub fn blocks(&self) -> Vec<Vec<GridIndex>> {
        let mut blocks = vec![Vec::new(); self.num_blocks];
        for (i, &b) in self.labels.iter().enumerate() {
            blocks[b as usize - 1].push(GridIndex::new(i / self.r + 1, i % self.r + 1));
        }
        blocks
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPartition(msg));
        if self.n == 0 || self.r == 0 {
            return bad(format!("empty grid {}x{}", self.n, self.r));
        }
        if self.labels.len() != self.n * self.r {
            return bad(format!(
                "{} labels for a {}x{} grid",
                self.labels.len(),
                self.n,
                self.r
            ));
        }
        let mut next = 1u32;
        for &b in &self.labels {
            if b == 0 || b > next {
                return bad(format!(
                    "labels are not a restricted-growth string: {:?}",
                    self.labels
                ));
            }
            if b == next {
                next += 1;
            }
        }
        if (next - 1) as usize != self.num_blocks {
            return bad(format!(
                "num_blocks {} but {} ids used",
                self.num_blocks,
                next - 1
            ));
        }
        for row in self.labels.chunks(self.r) {
            let mut seen = row.to_vec();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return bad(format!("row {:?} merges two cells of the same row", row));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks = self.blocks();
        for (i, block) in blocks.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str("{")?;
            for (j, c) in block.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "({},{})", c.row, c.col)?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

/// Lazy backtracking enumerator of non-flat restricted-growth strings.
///
/// Cells `0..prefix_len` are held fixed; cells `prefix_len..end` vary. With
/// `end < n·r` the yielded label vectors are valid prefixes, which is how work
/// gets split across workers.
#[derive(Clone, Debug)]
pub struct NonFlatPartitions {
    n: usize,
    r: usize,
    end: usize,
    prefix_len: usize,
    // 0-based block ids while enumerating
    labels: Vec<u32>,
    rows_of_block: Vec<u64>,
    started: bool,
    done: bool,
}

impl NonFlatPartitions {
    fn with_prefix(n: usize, r: usize, prefix: &[u32], end: usize) -> Self {
        let mut it = NonFlatPartitions {
            n,
            r,
            end,
            prefix_len: prefix.len(),
            labels: Vec::with_capacity(end),
            rows_of_block: Vec::new(),
            started: false,
            done: false,
        };
        for &b in prefix {
            let pos = it.labels.len();
            it.labels.push(0);
            it.assign(pos, b);
        }
        it
    }

    fn row_bit(&self, pos: usize) -> u64 {
        1u64 << (pos / self.r)
    }

    fn assign(&mut self, pos: usize, block: u32) {
        let bit = self.row_bit(pos);
        if block as usize == self.rows_of_block.len() {
            self.rows_of_block.push(0);
        }
        self.rows_of_block[block as usize] |= bit;
        self.labels[pos] = block;
    }

    fn unassign(&mut self, pos: usize) {
        let bit = self.row_bit(pos);
        let b = self.labels[pos] as usize;
        self.rows_of_block[b] &= !bit;
        if b + 1 == self.rows_of_block.len() && self.rows_of_block[b] == 0 {
            self.rows_of_block.pop();
        }
    }

    /// Smallest admissible block id at `pos` that is `>= from`. A fresh block
    /// is always admissible, so this never fails when `from <= num_blocks`.
    fn first_admissible(&self, pos: usize, from: u32) -> Option<u32> {
        let bit = self.row_bit(pos);
        let open = self.rows_of_block.len() as u32;
        (from..open)
            .find(|&b| self.rows_of_block[b as usize] & bit == 0)
            .or(if from <= open { Some(open) } else { None })
    }

    fn fill_from(&mut self, start: usize) {
        for pos in start..self.end {
            let b = self
                .first_admissible(pos, 0)
                .expect("a fresh block is always admissible");
            self.labels.push(0);
            self.assign(pos, b);
        }
    }

    fn advance(&mut self) -> bool {
        while self.labels.len() > self.prefix_len {
            let pos = self.labels.len() - 1;
            let cur = self.labels[pos];
            self.unassign(pos);
            if let Some(b) = self.first_admissible(pos, cur + 1) {
                self.assign(pos, b);
                self.fill_from(pos + 1);
                return true;
            }
            self.labels.pop();
        }
        false
    }

    fn current(&self) -> Vec<u32> {
        self.labels.iter().map(|&b| b + 1).collect()
    }
}

impl Iterator for NonFlatPartitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.fill_from(self.labels.len());
        } else if !self.advance() {
            self.done = true;
            return None;
        }
        if self.end == self.prefix_len && self.started && self.labels.len() == self.end {
            // nothing varies: yield once
            self.done = true;
        }
        Some(Partition {
            n: self.n,
            r: self.r,
            num_blocks: self.rows_of_block.len(),
            labels: self.current(),
        })
    }
}

fn check_limits(n: usize, r: usize, limit: usize) -> Result<()> {
    if n == 0 || r == 0 {
        return Err(Error::InvalidParams(format!(
            "partition grid needs n >= 1 and r >= 1, got {n}x{r}"
        )));
    }
    let cells = n * r;
    if cells > limit || n > MAX_ROWS {
        return Err(Error::PartitionLimit {
            n,
            r,
            cells,
            limit: limit.min(MAX_ROWS * r),
        });
    }
    Ok(())
}

/// Every non-flat partition of the `n × r` grid, in lexicographic
/// restricted-growth order. Fails if `n·r` exceeds [`DEFAULT_CELL_LIMIT`].
pub fn enumerate_nonflat(n: usize, r: usize) -> Result<NonFlatPartitions> {
    enumerate_nonflat_with_limit(n, r, DEFAULT_CELL_LIMIT)
}

pub fn enumerate_nonflat_with_limit(n: usize, r: usize, limit: usize) -> Result<NonFlatPartitions> {
    check_limits(n, r, limit)?;
    Ok(NonFlatPartitions::with_prefix(n, r, &[], n * r))
}

/// Disjoint label prefixes that together cover the whole enumeration. The
/// first row is forced to `1..=r`, so prefixes fix that row plus a few cells.
pub fn split_prefixes(n: usize, r: usize) -> Vec<Vec<u32>> {
    let depth = (n * r).min(r + 3);
    NonFlatPartitions::with_prefix(n, r, &[], depth)
        .map(|p| p.labels)
        .collect()
}

/// Enumerates all non-flat partitions that extend `prefix`.
pub fn enumerate_from_prefix(n: usize, r: usize, prefix: &[u32]) -> NonFlatPartitions {
    let zero_based: Vec<u32> = prefix.iter().map(|&b| b - 1).collect();
    NonFlatPartitions::with_prefix(n, r, &zero_based, n * r)
}

/// Folds `f` over all non-flat partitions, splitting the enumeration across
/// workers by prefix. Per-prefix results come back in enumeration order.
pub fn fold_nonflat<T, F, G>(
    n: usize,
    r: usize,
    limit: usize,
    policy: Parallelism,
    init: G,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    G: Fn() -> T + Sync + Send,
    F: Fn(&mut T, Partition) + Sync + Send,
{
    check_limits(n, r, limit)?;
    let prefixes = split_prefixes(n, r);
    Ok(exec::map_slice(policy, &prefixes, |prefix| {
        let mut acc = init();
        for p in enumerate_from_prefix(n, r, prefix) {
            f(&mut acc, p);
        }
        acc
    }))
}

/// Number of non-flat partitions of the `n × r` grid.
pub fn count_nonflat(n: usize, r: usize, limit: usize, policy: Parallelism) -> Result<u64> {
    let parts = fold_nonflat(n, r, limit, policy, || 0u64, |c, _| *c += 1)?;
    Ok(parts.into_iter().sum())
}

/// Table of Stirling numbers of the second kind up to a fixed order.
#[derive(Clone, Debug)]
pub struct Stirling2Table {
    values: Vec<Vec<BigUint>>,
}

impl Stirling2Table {
    pub fn new(max_n: usize) -> Self {
        let mut values: Vec<Vec<BigUint>> = Vec::with_capacity(max_n + 1);
        values.push(vec![BigUint::one()]);
        for n in 1..=max_n {
            let prev = &values[n - 1];
            let mut row = vec![BigUint::zero(); n + 1];
            for k in 1..=n {
                let stay = if k < prev.len() {
                    &prev[k] * BigUint::from(k)
                } else {
                    BigUint::zero()
                };
                row[k] = stay + &prev[k - 1];
            }
            values.push(row);
        }
        Stirling2Table { values }
    }

    pub fn max_n(&self) -> usize {
        self.values.len() - 1
    }

    /// `S(n, k)`; zero outside `0 <= k <= n`.
    pub fn get(&self, n: usize, k: usize) -> BigUint {
        self.values
            .get(n)
            .and_then(|row| row.get(k))
            .cloned()
            .unwrap_or_default()
    }

    pub fn bell(&self, n: usize) -> BigUint {
        self.values
            .get(n)
            .map(|row| row.iter().sum())
            .unwrap_or_default()
    }
}

pub fn stirling2(n: usize, k: usize) -> BigUint {
    Stirling2Table::new(n).get(n, k)
}
