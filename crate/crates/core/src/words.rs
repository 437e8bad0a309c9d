//! Stationary distributions over fixed-length words.
//!
//! Two independent constructions: a mass-passing walk that exploits
//! unifilarity of reconstructed machines, and the general forward
//! algorithm over per-symbol matrices for arbitrary process specs.  On a
//! unifilar process they must agree to floating-point accuracy, which the
//! test suite leans on.

use thiserror::Error;

use crate::alphabet::SymbolId;
use crate::machine::CausalStateMachine;
use crate::process::ProcessSpec;
use crate::stationary::{self, ComponentWeighting, StationaryError};
use crate::stats::{self, StatsError};

/// Dense tables stay cheap up to this many words.
const MAX_WORDS: u64 = 1 << 24;

#[derive(Debug, Error, PartialEq)]
pub enum WordsError {
    #[error("alphabet size {k} and word length {w} need {words} table entries, over the limit")]
    TooManyWords { k: usize, w: usize, words: u64 },
    #[error("word length must be at least 1")]
    EmptyWord,
    #[error("distributions have different shape")]
    ShapeMismatch,
    #[error(transparent)]
    Stationary(#[from] StationaryError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Probabilities of every length-`w` word, indexed lexicographically
/// (first symbol is the most significant digit).
#[derive(Debug, Clone, PartialEq)]
pub struct WordDistribution {
    k: usize,
    w: usize,
    probs: Vec<f64>,
}

fn table_size(k: usize, w: usize) -> Result<usize, WordsError> {
    if w == 0 {
        return Err(WordsError::EmptyWord);
    }
    let mut words: u64 = 1;
    for _ in 0..w {
        words = words.saturating_mul(k as u64);
        if words > MAX_WORDS {
            return Err(WordsError::TooManyWords { k, w, words });
        }
    }
    Ok(words as usize)
}

impl WordDistribution {
    pub fn word_len(&self) -> usize {
        self.w
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index_of(&self, word: &[SymbolId]) -> usize {
        assert_eq!(word.len(), self.w, "word length mismatch");
        word.iter().fold(0usize, |acc, &b| acc * self.k + b as usize)
    }

    pub fn prob(&self, word: &[SymbolId]) -> f64 {
        self.probs[self.index_of(word)]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Sum of absolute differences, in [0, 2].
    pub fn tv(&self, other: &WordDistribution) -> Result<f64, WordsError> {
        if self.k != other.k || self.w != other.w {
            return Err(WordsError::ShapeMismatch);
        }
        Ok(stats::total_variation(&self.probs, &other.probs)?)
    }

    /// Distribution of the first `w - 1` symbols.
    pub fn marginal_dropping_last(&self) -> Result<WordDistribution, WordsError> {
        if self.w < 2 {
            return Err(WordsError::EmptyWord);
        }
        let probs: Vec<f64> =
            self.probs.chunks(self.k).map(|chunk| chunk.iter().sum()).collect();
        Ok(WordDistribution { k: self.k, w: self.w - 1, probs })
    }

    /// Unifilar mass-passing walk from the machine's stationary state
    /// distribution.
    pub fn from_machine(machine: &CausalStateMachine, w: usize) -> Result<Self, WordsError> {
        let k = machine.alphabet.len();
        let size = table_size(k, w)?;
        let p = machine.transition_matrix();
        let mass: Vec<f64> = machine.states.iter().map(|s| s.weight).collect();
        let pi = stationary::stationary(&p, ComponentWeighting::StateMass(&mass))?.pi;
        let m = machine.states.len();
        let mut probs = vec![0.0; size];
        // depth-first over words; each state's mass moves along its single
        // b-successor, scaled by the emission probability
        let mut stack: Vec<(usize, usize, Vec<f64>)> = vec![(0, 0, pi)];
        while let Some((depth, prefix, mass)) = stack.pop() {
            if depth == w {
                probs[prefix] = mass.iter().sum();
                continue;
            }
            for b in 0..k {
                let mut next = vec![0.0; m];
                let mut any = false;
                for (s, &ms) in mass.iter().enumerate().filter(|(_, &ms)| ms > 0.0) {
                    let e = machine.states[s].emission[b];
                    if e > 0.0 {
                        next[machine.states[s].transitions[b]
                            .expect("live emission always has a successor")] += ms * e;
                        any = true;
                    }
                }
                if any {
                    stack.push((depth + 1, prefix * k + b, next));
                }
            }
        }
        Ok(WordDistribution { k, w, probs })
    }

    /// Forward algorithm from the spec's stationary distribution (initial
    /// distribution absorbed into the recurrent part).
    pub fn from_spec(spec: &ProcessSpec, w: usize) -> Result<Self, WordsError> {
        let k = spec.alphabet.len();
        let size = table_size(k, w)?;
        let p = spec.transition_matrix();
        let pi = stationary::stationary(&p, ComponentWeighting::Absorption(&spec.initial))?.pi;
        let mats = spec.symbol_matrices();
        let m = spec.n_states();
        let mut probs = vec![0.0; size];
        let mut stack: Vec<(usize, usize, Vec<f64>)> = vec![(0, 0, pi)];
        while let Some((depth, prefix, rho)) = stack.pop() {
            if depth == w {
                probs[prefix] = rho.iter().sum();
                continue;
            }
            for (b, mat) in mats.iter().enumerate() {
                let mut next = vec![0.0; m];
                let mut any = false;
                for (i, &ri) in rho.iter().enumerate().filter(|(_, &ri)| ri > 0.0) {
                    for (j, &pij) in mat[i].iter().enumerate() {
                        if pij > 0.0 {
                            next[j] += ri * pij;
                            any = true;
                        }
                    }
                }
                if any {
                    stack.push((depth + 1, prefix * k + b, next));
                }
            }
        }
        Ok(WordDistribution { k, w, probs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::even_process;

    #[test]
    fn even_process_word_probabilities() {
        let d1 = WordDistribution::from_spec(&even_process(), 1).unwrap();
        assert!((d1.prob(&[0]) - 1.0 / 3.0).abs() < 1e-12);
        assert!((d1.prob(&[1]) - 2.0 / 3.0).abs() < 1e-12);
        let d2 = WordDistribution::from_spec(&even_process(), 2).unwrap();
        assert!((d2.prob(&[0, 0]) - 1.0 / 6.0).abs() < 1e-12);
        assert!((d2.prob(&[1, 1]) - 0.5).abs() < 1e-12);
        let d3 = WordDistribution::from_spec(&even_process(), 3).unwrap();
        assert_eq!(d3.prob(&[0, 1, 0]), 0.0);
        assert!((d3.prob(&[0, 1, 1]) - 1.0 / 6.0).abs() < 1e-12);
        assert!((d3.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_matches_shorter_words() {
        let d4 = WordDistribution::from_spec(&even_process(), 4).unwrap();
        let d3 = WordDistribution::from_spec(&even_process(), 3).unwrap();
        let m = d4.marginal_dropping_last().unwrap();
        assert!(m.tv(&d3).unwrap() < 1e-12);
    }

    #[test]
    fn table_guard_rejects_huge_requests() {
        assert!(matches!(
            table_size(2, 30),
            Err(WordsError::TooManyWords { .. })
        ));
        assert!(matches!(table_size(2, 0), Err(WordsError::EmptyWord)));
        assert_eq!(table_size(2, 10).unwrap(), 1024);
    }

    #[test]
    fn tv_of_identical_distributions_is_zero() {
        let d = WordDistribution::from_spec(&even_process(), 5).unwrap();
        assert_eq!(d.tv(&d).unwrap(), 0.0);
        let short = WordDistribution::from_spec(&even_process(), 4).unwrap();
        assert_eq!(d.tv(&short), Err(WordsError::ShapeMismatch));
    }
}
