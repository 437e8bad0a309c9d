//! Causal-state reconstruction.
//!
//! Starting from a single state holding the empty suffix, sufficiency
//! passes test ever-longer history suffixes against the next-symbol
//! distribution of their parent's state, splitting off new states when a
//! two-sample test rejects.  A final phase prunes states the process
//! leaves forever and splits states until transitions are deterministic,
//! then the surviving partition is frozen into a machine.
//!
//! Suffixes are stored oldest symbol first; a child extends its parent at
//! the far-past end.  A state's next-symbol distribution is the pooled
//! count vector of its member suffixes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::alphabet::{Alphabet, Corpus, SymbolId};
use crate::machine::{CausalStateMachine, MachineMeta, MachineState};
use crate::stationary::condense;
use crate::stats::{self, StatsError, TestKind};
use crate::tree::{build_tree, CountVector, ParseTree, TreeError};

type Word = Box<[SymbolId]>;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("alphabet must have at least two symbols")]
    DegenerateAlphabet,
    #[error("no word of length {0} occurs; the corpus is too short for this lmax")]
    InsufficientData(usize),
    #[error("no recurrent states survive pruning; lmax is too large for this corpus")]
    NoRecurrentStates,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("suffix is not a member of the source state")]
    SuffixNotInState,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceConfig {
    /// Longest history length considered.
    pub lmax: usize,
    /// Size of the hypothesis tests.
    pub alpha: f64,
    pub test: TestKind,
    /// Suffixes with fewer observed continuations are never tested.
    pub min_count: u64,
}

impl InferenceConfig {
    pub fn new(lmax: usize) -> Self {
        InferenceConfig { lmax, alpha: 1e-3, test: TestKind::Ks, min_count: 1 }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.lmax < 1 {
            return Err(EngineError::InvalidConfig("lmax must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(EngineError::InvalidConfig("alpha must be strictly between 0 and 1"));
        }
        if self.min_count < 1 {
            return Err(EngineError::InvalidConfig("min_count must be at least 1"));
        }
        Ok(())
    }
}

/// Member suffixes order shortest first, then alphabetically.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Suffix(Word);

impl Ord for Suffix {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Suffix {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug)]
pub struct CausalState {
    suffixes: BTreeSet<Suffix>,
    pooled: CountVector,
}

impl CausalState {
    fn empty(k: usize) -> Self {
        CausalState { suffixes: BTreeSet::new(), pooled: CountVector::zeros(k) }
    }

    pub fn suffixes(&self) -> Vec<Vec<SymbolId>> {
        self.suffixes.iter().map(|s| s.0.to_vec()).collect()
    }

    pub fn pooled_counts(&self) -> &CountVector {
        &self.pooled
    }

    fn has_member_shorter_than(&self, len: usize) -> bool {
        // shortest member first
        self.suffixes.iter().next().map_or(false, |s| s.0.len() < len)
    }
}

#[derive(Clone, Debug)]
pub struct StatePartition {
    k: usize,
    lmax: usize,
    states: BTreeMap<u32, CausalState>,
    assign: HashMap<Word, u32>,
    counts: HashMap<Word, CountVector>,
    next_id: u32,
}

impl StatePartition {
    /// One state holding the empty suffix; its distribution is the
    /// unconditional next-symbol distribution.
    pub fn new(tree: &ParseTree) -> Result<Self, EngineError> {
        let k = tree.k();
        let lmax = tree.depth() - 1;
        let empty: Word = Vec::new().into_boxed_slice();
        let root_counts = tree.next_symbol_counts(&empty)?;
        let mut state = CausalState::empty(k);
        state.pooled = root_counts.clone();
        state.suffixes.insert(Suffix(empty.clone()));
        let mut states = BTreeMap::new();
        states.insert(0, state);
        let mut assign = HashMap::new();
        assign.insert(empty.clone(), 0);
        let mut counts = HashMap::new();
        counts.insert(empty, root_counts);
        Ok(StatePartition { k, lmax, states, assign, counts, next_id: 1 })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_ids(&self) -> Vec<u32> {
        self.states.keys().copied().collect()
    }

    pub fn state(&self, id: u32) -> Option<&CausalState> {
        self.states.get(&id)
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// State currently holding `suffix`, if assigned.
    pub fn assignment(&self, suffix: &[SymbolId]) -> Option<u32> {
        self.assign.get(suffix).copied()
    }

    /// State owning the longest assigned suffix of `history`.
    pub fn epsilon_map(&self, history: &[SymbolId]) -> Option<u32> {
        let start = history.len().saturating_sub(self.lmax);
        for i in start..=history.len() {
            if let Some(&sid) = self.assign.get(&history[i..]) {
                return Some(sid);
            }
        }
        None
    }

    fn fresh_id(&mut self) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn add_suffix(&mut self, word: Word, sid: u32, counts: CountVector) {
        let st = self.states.get_mut(&sid).expect("target state exists");
        st.pooled.add(&counts);
        st.suffixes.insert(Suffix(word.clone()));
        self.assign.insert(word.clone(), sid);
        self.counts.insert(word, counts);
    }

    /// Reassign a suffix, re-deriving both pooled distributions; an
    /// emptied source state is deleted.
    pub fn move_suffix(&mut self, suffix: &[SymbolId], from: u32, to: u32) -> Result<(), EngineError> {
        assert_ne!(from, to, "move requires distinct states");
        if self.assign.get(suffix) != Some(&from) {
            return Err(EngineError::SuffixNotInState);
        }
        let word: Word = suffix.to_vec().into_boxed_slice();
        let counts = self.counts.get(suffix).expect("assigned suffix has counts").clone();
        let src = self.states.get_mut(&from).expect("source state exists");
        src.suffixes.remove(&Suffix(word.clone()));
        src.pooled.sub(&counts);
        if src.suffixes.is_empty() {
            self.states.remove(&from);
        }
        let dst = self.states.get_mut(&to).expect("destination state exists");
        dst.pooled.add(&counts);
        dst.suffixes.insert(Suffix(word.clone()));
        self.assign.insert(word, to);
        Ok(())
    }

    /// Test one suffix against its parent's state and place it: with the
    /// parent when the null test accepts, else with the closest other
    /// state that accepts (total variation, ties to the lowest id), else
    /// in a new state of its own.
    pub fn test_and_assign(
        &mut self,
        suffix: Word,
        counts: CountVector,
        parent: u32,
        config: &InferenceConfig,
    ) -> Result<(), EngineError> {
        debug_assert!(counts.total() >= config.min_count);
        debug_assert!(!self.assign.contains_key(&suffix));
        let null_rejects = {
            let parent_state = self.states.get(&parent).expect("parent state exists");
            stats::two_sample(config.test, &counts, &parent_state.pooled, config.alpha)?.reject
        };
        if !null_rejects {
            self.add_suffix(suffix, parent, counts);
            return Ok(());
        }
        // the distribution may already exist under another state
        let fractions = counts.fractions();
        let mut best: Option<(f64, u32)> = None;
        for (&sid, st) in &self.states {
            if sid == parent {
                continue;
            }
            if stats::two_sample(config.test, &counts, &st.pooled, config.alpha)?.reject {
                continue;
            }
            let d = stats::total_variation(&fractions, &st.pooled.fractions())?;
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, sid));
            }
        }
        match best {
            Some((_, sid)) => self.add_suffix(suffix, sid, counts),
            None => {
                let sid = self.fresh_id();
                self.states.insert(sid, CausalState::empty(self.k));
                self.add_suffix(suffix, sid, counts);
            }
        }
        Ok(())
    }

    /// Extend every length-`level` suffix by one symbol at the far-past
    /// end and test the children, in alphabetical order within each state,
    /// states in id order.
    pub fn sufficiency_pass(
        &mut self,
        tree: &ParseTree,
        level: usize,
        config: &InferenceConfig,
    ) -> Result<(), EngineError> {
        let sids = self.state_ids();
        for sid in sids {
            let Some(st) = self.states.get(&sid) else { continue };
            let parents: Vec<Word> = st
                .suffixes
                .iter()
                .filter(|s| s.0.len() == level)
                .map(|s| s.0.clone())
                .collect();
            if parents.is_empty() {
                continue;
            }
            for a in 0..self.k as SymbolId {
                for x in &parents {
                    let mut child = Vec::with_capacity(level + 1);
                    child.push(a);
                    child.extend_from_slice(x);
                    let counts = tree.next_symbol_counts(&child)?;
                    if counts.total() < config.min_count {
                        continue;
                    }
                    self.test_and_assign(child.into_boxed_slice(), counts, sid, config)?;
                }
            }
        }
        debug_assert_eq!(self.check_consistency(), Ok(()));
        Ok(())
    }

    /// Members that pin down this state's successor on `b`, with their
    /// resolved targets.  A member contributes when its extension by `b`
    /// was observed and it is shorter than lmax; members of full length
    /// only speak for states that have no shorter member, resolving
    /// through the longest assigned suffix of the truncated extension.
    fn member_contributions(&self, sid: u32, b: SymbolId, tree: &ParseTree) -> Vec<(Word, u32)> {
        let st = &self.states[&sid];
        let has_short = st.has_member_shorter_than(self.lmax);
        let mut out = Vec::new();
        for s in &st.suffixes {
            if has_short && s.0.len() >= self.lmax {
                continue;
            }
            let mut child = Vec::with_capacity(s.0.len() + 1);
            child.extend_from_slice(&s.0);
            child.push(b);
            if tree.count(&child) == 0 {
                continue;
            }
            if let Some(t) = self.epsilon_map(&child) {
                out.push((s.0.clone(), t));
            }
        }
        out
    }

    /// State graph restricted to observed one-step continuations; nodes
    /// indexed by position in `state_ids()`.
    fn transition_graph(&self, tree: &ParseTree) -> (Vec<u32>, Vec<Vec<usize>>) {
        let ids = self.state_ids();
        let index: HashMap<u32, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let adj: Vec<Vec<usize>> = ids
            .iter()
            .map(|&sid| {
                let mut targets: Vec<usize> = (0..self.k as SymbolId)
                    .flat_map(|b| self.member_contributions(sid, b, tree))
                    .map(|(_, t)| index[&t])
                    .collect();
                targets.sort_unstable();
                targets.dedup();
                targets
            })
            .collect();
        (ids, adj)
    }

    /// Drop every state outside the recurrent part of the state graph
    /// (components with an exit in the condensation).  Returns the number
    /// of states removed.
    pub fn remove_transients(&mut self, tree: &ParseTree) -> Result<usize, EngineError> {
        if self.states.is_empty() {
            return Err(EngineError::NoRecurrentStates);
        }
        let (ids, adj) = self.transition_graph(tree);
        let (_, comp_of, recurrent) = condense(&adj);
        let dropped: Vec<u32> = ids
            .iter()
            .enumerate()
            .filter(|(i, _)| !recurrent[comp_of[*i]])
            .map(|(_, &id)| id)
            .collect();
        if dropped.len() == ids.len() {
            return Err(EngineError::NoRecurrentStates);
        }
        for sid in &dropped {
            let st = self.states.remove(sid).expect("dropped state exists");
            for s in st.suffixes {
                self.assign.remove(&s.0);
                self.counts.remove(&s.0);
            }
        }
        debug_assert_eq!(self.check_consistency(), Ok(()));
        Ok(dropped.len())
    }

    /// Successor a single member points at: the resolution of its
    /// extension by `b`, if that extension was observed.
    fn member_resolution(&self, x: &[SymbolId], b: SymbolId, tree: &ParseTree) -> Option<u32> {
        let mut child = Vec::with_capacity(x.len() + 1);
        child.extend_from_slice(x);
        child.push(b);
        if tree.count(&child) == 0 {
            return None;
        }
        self.epsilon_map(&child)
    }

    /// Split states until every state's members agree on a successor for
    /// each observed symbol.  Disagreement is judged on the contributing
    /// members, but a split regroups the whole membership: every member
    /// follows its own resolved successor (members with nothing observed
    /// stay with the first contributor), one fresh state per successor
    /// value, and the scan restarts after every split.
    pub fn determinize(&mut self, tree: &ParseTree) {
        'rescan: loop {
            let sids = self.state_ids();
            for sid in sids {
                for b in 0..self.k as SymbolId {
                    let contrib = self.member_contributions(sid, b, tree);
                    let Some(&(_, anchor)) = contrib.first() else { continue };
                    if contrib.iter().all(|(_, t)| *t == anchor) {
                        continue;
                    }
                    let members: Vec<Word> =
                        self.states[&sid].suffixes.iter().map(|s| s.0.clone()).collect();
                    // group movers by target, in order of first appearance
                    let mut groups: Vec<(u32, Vec<Word>)> = Vec::new();
                    for w in members {
                        let key = self.member_resolution(&w, b, tree).unwrap_or(anchor);
                        if key == anchor {
                            continue;
                        }
                        match groups.iter_mut().find(|(gt, _)| *gt == key) {
                            Some((_, ws)) => ws.push(w),
                            None => groups.push((key, vec![w])),
                        }
                    }
                    for (_, movers) in groups {
                        let nid = self.fresh_id();
                        self.states.insert(nid, CausalState::empty(self.k));
                        for w in movers {
                            self.move_suffix(&w, sid, nid).expect("member moves to fresh state");
                        }
                    }
                    continue 'rescan;
                }
            }
            break;
        }
        debug_assert_eq!(self.check_consistency(), Ok(()));
    }

    /// Successor of `sid` on `b` for the final machine.  Falls back to any
    /// member with an observed continuation when no member contributes
    /// under the graph rule; `None` marks a dead transition.
    fn resolve_transition(&self, sid: u32, b: SymbolId, tree: &ParseTree) -> Option<u32> {
        if let Some((_, t)) = self.member_contributions(sid, b, tree).into_iter().next() {
            return Some(t);
        }
        for s in &self.states[&sid].suffixes {
            let mut child = Vec::with_capacity(s.0.len() + 1);
            child.extend_from_slice(&s.0);
            child.push(b);
            if tree.count(&child) == 0 {
                continue;
            }
            if let Some(t) = self.epsilon_map(&child) {
                return Some(t);
            }
        }
        None
    }

    /// Every suffix in exactly one state, cached counts aligned with the
    /// assignment, pooled vectors equal to their membership sums.
    pub fn check_consistency(&self) -> Result<(), String> {
        let mut seen = 0usize;
        for (&sid, st) in &self.states {
            if st.suffixes.is_empty() {
                return Err(format!("state {sid} is empty"));
            }
            let mut sum = CountVector::zeros(self.k);
            for s in &st.suffixes {
                seen += 1;
                if self.assign.get(&s.0) != Some(&sid) {
                    return Err(format!("suffix in state {sid} not assigned to it"));
                }
                let c = self
                    .counts
                    .get(&s.0)
                    .ok_or_else(|| format!("suffix in state {sid} has no cached counts"))?;
                sum.add(c);
            }
            if sum != st.pooled {
                return Err(format!("state {sid} pooled counts out of sync"));
            }
        }
        if seen != self.assign.len() {
            return Err("assignment map does not match state membership".into());
        }
        if self.assign.len() != self.counts.len() {
            return Err("count cache does not match assignment".into());
        }
        Ok(())
    }

    /// Freeze the partition into a machine.  Emissions are pooled-count
    /// fractions; unresolvable transitions are dropped with the emission
    /// renormalized over live symbols; state weights are the fraction of
    /// training positions whose history resolves into each state.
    pub fn build_machine(
        &self,
        corpus: &Corpus,
        tree: &ParseTree,
        alphabet: &Alphabet,
        config: &InferenceConfig,
    ) -> Result<CausalStateMachine, EngineError> {
        let ids = self.state_ids();
        let index: HashMap<u32, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut warnings = Vec::new();
        {
            let (_, adj) = self.transition_graph(tree);
            let (_, _, recurrent) = condense(&adj);
            let nrec = recurrent.iter().filter(|r| **r).count();
            if nrec > 1 {
                warnings.push(format!(
                    "{nrec} disconnected recurrent components; stationary mixture uses training-measure weights"
                ));
            }
        }
        let mut states = Vec::with_capacity(ids.len());
        for (i, &sid) in ids.iter().enumerate() {
            let st = &self.states[&sid];
            assert!(st.pooled.total() > 0, "state without observed continuations");
            let mut emission = st.pooled.fractions();
            let mut transitions: Vec<Option<usize>> = vec![None; self.k];
            for b in 0..self.k {
                transitions[b] = self.resolve_transition(sid, b as SymbolId, tree).map(|t| index[&t]);
                if transitions[b].is_none() && emission[b] > 0.0 {
                    warnings.push(format!(
                        "state {i}: no surviving successor on {:?}; emission renormalized",
                        alphabet.symbol(b as SymbolId)
                    ));
                    emission[b] = 0.0;
                }
            }
            let live: f64 = emission.iter().sum();
            if live == 0.0 {
                warnings.push(format!("state {i} has no live transitions"));
            } else if live < 1.0 {
                for e in emission.iter_mut() {
                    *e /= live;
                }
            }
            states.push(MachineState {
                suffixes: st.suffixes(),
                emission,
                transitions,
                weight: 0.0,
            });
        }
        // weight states by how much of the training data resolves to them
        let mut tallies = vec![0u64; ids.len()];
        let mut matched = 0u64;
        for seq in &corpus.sequences {
            let s = &seq.0;
            for t in 0..s.len() {
                let hist = &s[t.saturating_sub(self.lmax)..t];
                if let Some(sid) = self.epsilon_map(hist) {
                    tallies[index[&sid]] += 1;
                    matched += 1;
                }
            }
        }
        if matched == 0 {
            warnings.push("no training position resolves to a state; uniform weights".into());
            for st in states.iter_mut() {
                st.weight = 1.0 / ids.len() as f64;
            }
        } else {
            for (st, t) in states.iter_mut().zip(&tallies) {
                st.weight = *t as f64 / matched as f64;
            }
        }
        let machine = CausalStateMachine {
            alphabet: alphabet.clone(),
            states,
            meta: MachineMeta {
                n: tree.total(),
                lmax: self.lmax,
                alpha: config.alpha,
                test: config.test,
                warnings,
            },
        };
        debug_assert!(machine.validate().is_ok(), "built machine failed validation");
        Ok(machine)
    }
}

/// Reconstruct a machine from a corpus.
pub fn infer(
    corpus: &Corpus,
    alphabet: &Alphabet,
    config: &InferenceConfig,
) -> Result<CausalStateMachine, EngineError> {
    config.validate()?;
    if alphabet.len() < 2 {
        return Err(EngineError::DegenerateAlphabet);
    }
    if !corpus.sequences.iter().any(|s| s.len() > config.lmax) {
        return Err(EngineError::InsufficientData(config.lmax + 1));
    }
    let tree = build_tree(corpus, alphabet, config.lmax + 1)?;
    let mut partition = StatePartition::new(&tree)?;
    for level in 0..config.lmax {
        partition.sufficiency_pass(&tree, level, config)?;
    }
    partition.remove_transients(&tree)?;
    // splitting can strand states, and pruning can in turn expose new
    // disagreements, so alternate until neither changes anything
    loop {
        partition.determinize(&tree);
        if partition.remove_transients(&tree)? == 0 {
            break;
        }
    }
    partition.build_machine(corpus, &tree, alphabet, config)
}
