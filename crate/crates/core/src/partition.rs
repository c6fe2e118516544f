//! Set partitions of `[n]`.
//!
//! A [`Partition`] is stored as its restricted growth string: `labels[i]` is
//! the index of the block holding element `i + 1`, with blocks numbered in
//! order of their least element. Two partitions are equal iff their label
//! vectors are.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    labels: Vec<u32>,
    num_blocks: usize,
}

impl Partition {
    /// `{{1}, ..., {n}}`.
    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n as u32).collect(),
            num_blocks: n,
        }
    }

    /// `{{1, ..., n}}`.
    pub fn single_block(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            num_blocks: usize::from(n > 0),
        }
    }

    /// Canonicalises arbitrary block labels: elements sharing a label share
    /// a block.
    pub fn from_labels<L: Copy + PartialEq>(labels: &[L]) -> Self {
        let mut seen: Vec<L> = Vec::new();
        let canonical = labels
            .iter()
            .map(|l| match seen.iter().position(|s| s == l) {
                Some(k) => k as u32,
                None => {
                    seen.push(*l);
                    (seen.len() - 1) as u32
                }
            })
            .collect();
        Self {
            labels: canonical,
            num_blocks: seen.len(),
        }
    }

    /// Same as [`Self::from_labels`] for `u32` labels below `bound`, in
    /// `O(n + bound)` using a caller-provided scratch buffer.
    pub(crate) fn from_dense_labels(labels: &[u32], scratch: &mut Vec<u32>, bound: usize) -> Self {
        scratch.clear();
        scratch.resize(bound, u32::MAX);
        let mut next = 0u32;
        let canonical = labels
            .iter()
            .map(|&l| {
                let slot = &mut scratch[l as usize];
                if *slot == u32::MAX {
                    *slot = next;
                    next += 1;
                }
                *slot
            })
            .collect();
        Self {
            labels: canonical,
            num_blocks: next as usize,
        }
    }

    /// From one-based blocks, e.g. `[[1, 3], [2]]`.
    pub fn from_blocks(blocks: &[Vec<usize>]) -> Result<Self> {
        let n: usize = blocks.iter().map(Vec::len).sum();
        let mut labels = vec![u32::MAX; n];
        for (k, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::input("partition has an empty block"));
            }
            for &e in block {
                if e == 0 || e > n {
                    return Err(Error::input(format!("element {e} outside 1..={n}")));
                }
                if labels[e - 1] != u32::MAX {
                    return Err(Error::input(format!("element {e} appears twice")));
                }
                labels[e - 1] = k as u32;
            }
        }
        Ok(Self::from_labels(&labels))
    }

    /// Number of elements `n`.
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Blocks as sorted one-based element lists, ordered by least element.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.num_blocks];
        for (i, &l) in self.labels.iter().enumerate() {
            blocks[l as usize].push(i + 1);
        }
        blocks
    }

    pub fn is_singletons(&self) -> bool {
        self.num_blocks == self.n()
    }

    pub fn is_single_block(&self) -> bool {
        self.num_blocks == 1
    }

    /// For each block of `self`, the number of blocks of `fine` merged into
    /// it; `None` unless `self` is a coarsening of `fine` (equality counts).
    pub fn merge_sizes(&self, fine: &Partition) -> Option<Vec<usize>> {
        if self.n() != fine.n() {
            return None;
        }
        let mut image = vec![u32::MAX; fine.num_blocks];
        let mut sizes = vec![0usize; self.num_blocks];
        for (&f, &c) in fine.labels.iter().zip(&self.labels) {
            let slot = &mut image[f as usize];
            if *slot == u32::MAX {
                *slot = c;
                sizes[c as usize] += 1;
            } else if *slot != c {
                return None;
            }
        }
        Some(sizes)
    }

    /// True if every block of `fine` lies inside a block of `self`.
    pub fn is_coarsening_of(&self, fine: &Partition) -> bool {
        self.merge_sizes(fine).is_some()
    }

    /// All partitions obtainable by merging blocks of `self` (including
    /// `self`), in the canonical order of the block-level partitions.
    pub fn coarsenings(&self) -> Vec<Partition> {
        enumerate(self.num_blocks)
            .into_iter()
            .map(|merge| {
                let labels: Vec<u32> = self.labels.iter().map(|&l| merge.labels[l as usize]).collect();
                Partition::from_labels(&labels)
            })
            .collect()
    }

    /// Merges blocks `a` and `b` (block indices).
    pub fn merge(&self, a: usize, b: usize) -> Partition {
        assert!(a < self.num_blocks && b < self.num_blocks, "block index out of range");
        let (keep, drop) = (a.min(b) as u32, a.max(b) as u32);
        let labels: Vec<u32> = self
            .labels
            .iter()
            .map(|&l| if l == drop { keep } else { l })
            .collect();
        Partition::from_labels(&labels)
    }
}

/// Every partition of `[n]` in descending restricted-growth-string order:
/// the singleton partition first, the single block last.
pub fn enumerate(n: usize) -> Vec<Partition> {
    fn extend(prefix: &mut Vec<u32>, max: u32, n: usize, out: &mut Vec<Partition>) {
        if prefix.len() == n {
            out.push(Partition {
                labels: prefix.clone(),
                num_blocks: if n == 0 { 0 } else { max as usize + 1 },
            });
            return;
        }
        for label in (0..=max + 1).rev() {
            prefix.push(label);
            extend(prefix, max.max(label), n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        out.push(Partition::singletons(0));
        return out;
    }
    let mut prefix = vec![0u32];
    extend(&mut prefix, 0, n, &mut out);
    out
}

impl fmt::Display for Partition {
    /// Canonical block notation, e.g. `{1,3}{2}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for block in self.blocks() {
            f.write_str("{")?;
            for (i, e) in block.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{e}")?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut rest = s.trim();
        while !rest.is_empty() {
            let inner = rest
                .strip_prefix('{')
                .and_then(|r| r.split_once('}'))
                .ok_or_else(|| Error::input(format!("malformed partition '{s}'")))?;
            let block = inner
                .0
                .split(',')
                .map(|e| e.trim().parse::<usize>())
                .collect::<core::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::input(format!("malformed partition '{s}'")))?;
            blocks.push(block);
            rest = inner.1.trim_start();
        }
        Partition::from_blocks(&blocks)
    }
}

/// Label used in CSV headers: the partitions joined by `|`.
pub fn tuple_label(parts: &[Partition]) -> String {
    let mut s = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            s.push('|');
        }
        s.push_str(&format!("{p}"));
    }
    s
}
