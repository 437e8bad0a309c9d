//! Windowed subword counts.
//!
//! A parse tree of depth `d` holds the number of occurrences of every word
//! of length 1..=d in a corpus, counted over all within-sequence windows:
//! for a single sequence of length N every length-`l` word count sums to
//! N - l + 1.  Words never span sequence boundaries.  The root carries the
//! total symbol count.  Built in one pass, O(total * depth).

use std::collections::HashMap;

use thiserror::Error;

use crate::alphabet::{Alphabet, Corpus, SymbolId};

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("parse tree depth must be at least 1")]
    DepthZero,
    #[error("suffix of length {len} too long for tree of depth {depth}")]
    SuffixTooLong { len: usize, depth: usize },
}

/// Next-symbol occurrence counts, one entry per alphabet symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    pub counts: Vec<u64>,
}

impl CountVector {
    pub fn zeros(k: usize) -> Self {
        CountVector { counts: vec![0; k] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add(&mut self, other: &CountVector) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn sub(&mut self, other: &CountVector) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a -= b;
        }
    }

    /// Relative frequencies; total must be positive.
    pub fn fractions(&self) -> Vec<f64> {
        let t = self.total() as f64;
        assert!(t > 0.0, "cannot normalize an empty count vector");
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }
}

const NONE: u32 = u32::MAX;

#[derive(Debug)]
struct DenseNode {
    count: u64,
    children: Box<[u32]>,
}

#[derive(Debug)]
struct SparseNode {
    count: u64,
    children: HashMap<SymbolId, u32>,
}

#[derive(Debug)]
enum Arena {
    /// Fixed child slots per node; used for small alphabets where the walk
    /// is pure indexing.
    Dense(Vec<DenseNode>),
    Sparse(Vec<SparseNode>),
}

const DENSE_MAX_K: usize = 64;

#[derive(Debug)]
pub struct ParseTree {
    k: usize,
    depth: usize,
    total: u64,
    seq_lens: Vec<usize>,
    arena: Arena,
}

/// Count all words of length 1..=depth in `corpus`.
pub fn build_tree(corpus: &Corpus, alphabet: &Alphabet, depth: usize) -> Result<ParseTree, TreeError> {
    if depth == 0 {
        return Err(TreeError::DepthZero);
    }
    let k = alphabet.len();
    let mut tree = ParseTree {
        k,
        depth,
        total: 0,
        seq_lens: corpus.sequences.iter().map(|s| s.len()).collect(),
        arena: if k <= DENSE_MAX_K {
            Arena::Dense(vec![DenseNode { count: 0, children: vec![NONE; k].into_boxed_slice() }])
        } else {
            Arena::Sparse(vec![SparseNode { count: 0, children: HashMap::new() }])
        },
    };
    for seq in &corpus.sequences {
        let syms = &seq.0;
        let n = syms.len();
        for i in 0..n {
            tree.total += 1;
            let end = (i + depth).min(n);
            match &mut tree.arena {
                Arena::Dense(nodes) => {
                    let mut cur = 0usize;
                    for &s in &syms[i..end] {
                        debug_assert!((s as usize) < k);
                        let slot = nodes[cur].children[s as usize];
                        let next = if slot == NONE {
                            let id = nodes.len() as u32;
                            nodes.push(DenseNode {
                                count: 0,
                                children: vec![NONE; k].into_boxed_slice(),
                            });
                            nodes[cur].children[s as usize] = id;
                            id
                        } else {
                            slot
                        };
                        cur = next as usize;
                        nodes[cur].count += 1;
                    }
                }
                Arena::Sparse(nodes) => {
                    let mut cur = 0usize;
                    for &s in &syms[i..end] {
                        let next = match nodes[cur].children.get(&s) {
                            Some(&id) => id,
                            None => {
                                let id = nodes.len() as u32;
                                nodes.push(SparseNode { count: 0, children: HashMap::new() });
                                nodes[cur].children.insert(s, id);
                                id
                            }
                        };
                        cur = next as usize;
                        nodes[cur].count += 1;
                    }
                }
            }
        }
    }
    Ok(tree)
}

impl ParseTree {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total symbol count across the corpus (the root count).
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn sequence_lengths(&self) -> &[usize] {
        &self.seq_lens
    }

    fn node_of(&self, word: &[SymbolId]) -> Option<u32> {
        let mut cur = 0u32;
        match &self.arena {
            Arena::Dense(nodes) => {
                for &s in word {
                    let slot = nodes[cur as usize].children.get(s as usize).copied()?;
                    if slot == NONE {
                        return None;
                    }
                    cur = slot;
                }
            }
            Arena::Sparse(nodes) => {
                for &s in word {
                    cur = *nodes[cur as usize].children.get(&s)?;
                }
            }
        }
        Some(cur)
    }

    /// Occurrences of `word`; the empty word returns the total symbol count.
    pub fn count(&self, word: &[SymbolId]) -> u64 {
        assert!(
            word.len() <= self.depth,
            "word of length {} queried on tree of depth {}",
            word.len(),
            self.depth
        );
        if word.is_empty() {
            return self.total;
        }
        match self.node_of(word) {
            None => 0,
            Some(id) => match &self.arena {
                Arena::Dense(nodes) => nodes[id as usize].count,
                Arena::Sparse(nodes) => nodes[id as usize].count,
            },
        }
    }

    /// Counts of each one-symbol continuation of `suffix`.  The empty suffix
    /// yields the unconditional symbol counts.
    pub fn next_symbol_counts(&self, suffix: &[SymbolId]) -> Result<CountVector, TreeError> {
        if suffix.len() >= self.depth {
            return Err(TreeError::SuffixTooLong { len: suffix.len(), depth: self.depth });
        }
        let mut out = CountVector::zeros(self.k);
        let Some(node) = self.node_of(suffix) else {
            return Ok(out);
        };
        match &self.arena {
            Arena::Dense(nodes) => {
                for (s, &slot) in nodes[node as usize].children.iter().enumerate() {
                    if slot != NONE {
                        out.counts[s] = nodes[slot as usize].count;
                    }
                }
            }
            Arena::Sparse(nodes) => {
                for (&s, &slot) in &nodes[node as usize].children {
                    out.counts[s as usize] = nodes[slot as usize].count;
                }
            }
        }
        Ok(out)
    }

    /// Visit every counted word in depth-first symbol order.
    pub fn for_each_word(&self, mut f: impl FnMut(&[SymbolId], u64)) {
        let mut path: Vec<SymbolId> = Vec::with_capacity(self.depth);
        self.visit(0, &mut path, &mut f);
    }

    fn visit(&self, node: u32, path: &mut Vec<SymbolId>, f: &mut impl FnMut(&[SymbolId], u64)) {
        let children: Vec<(SymbolId, u32)> = match &self.arena {
            Arena::Dense(nodes) => nodes[node as usize]
                .children
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != NONE)
                .map(|(s, &c)| (s as SymbolId, c))
                .collect(),
            Arena::Sparse(nodes) => {
                let mut v: Vec<(SymbolId, u32)> =
                    nodes[node as usize].children.iter().map(|(&s, &c)| (s, c)).collect();
                v.sort_unstable();
                v
            }
        };
        for (s, child) in children {
            path.push(s);
            let count = match &self.arena {
                Arena::Dense(nodes) => nodes[child as usize].count,
                Arena::Sparse(nodes) => nodes[child as usize].count,
            };
            f(path, count);
            self.visit(child, path, f);
            path.pop();
        }
    }
}
