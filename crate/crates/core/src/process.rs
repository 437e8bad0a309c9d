//! Generative process models: edge-labeled hidden-state machines.
//!
//! A process spec lists, per state, outgoing edges `(symbol, probability,
//! target)`.  Specs need not be unifilar: a state may carry several edges
//! for the same symbol.  Specs serve as ground truth for evaluation and as
//! simulators for sequence generation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use thiserror::Error;

use crate::alphabet::{Alphabet, AlphabetError, SymbolId, SymbolSequence};
use crate::jsonfmt;

#[derive(Debug, Error, PartialEq)]
pub enum ProcessError {
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("distribution for {what} sums to {sum}")]
    InvalidDistribution { what: String, sum: f64 },
    #[error("state {state} has edge to nonexistent state {target}")]
    DanglingTarget { state: usize, target: usize },
    #[error("process graph is not strongly connected")]
    NotStronglyConnected,
    #[error("suffix set is not closed: no suffix matches {0:?}")]
    IncompleteSuffixSet(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Alphabet(#[from] AlphabetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub symbol: SymbolId,
    pub p: f64,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpecState {
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    pub alphabet: Alphabet,
    pub states: Vec<SpecState>,
    pub initial: Vec<f64>,
}

impl ProcessSpec {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn validate(&self) -> Result<(), ProcessError> {
        let m = self.states.len();
        if m == 0 {
            return Err(ProcessError::Parse("spec has no states".into()));
        }
        for (i, st) in self.states.iter().enumerate() {
            let mut sum = 0.0;
            for e in &st.edges {
                if !(0.0..=1.0).contains(&e.p) || !e.p.is_finite() {
                    return Err(ProcessError::InvalidProbability(e.p));
                }
                if e.to >= m {
                    return Err(ProcessError::DanglingTarget { state: i, target: e.to });
                }
                if (e.symbol as usize) >= self.alphabet.len() {
                    return Err(ProcessError::Parse(format!(
                        "state {i} edge uses symbol id {} outside the alphabet",
                        e.symbol
                    )));
                }
                sum += e.p;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(ProcessError::InvalidDistribution { what: format!("state {i}"), sum });
            }
        }
        if self.initial.len() != m {
            return Err(ProcessError::Parse(format!(
                "initial distribution has {} entries for {m} states",
                self.initial.len()
            )));
        }
        let isum: f64 = self.initial.iter().sum();
        if self.initial.iter().any(|p| *p < 0.0 || !p.is_finite()) || (isum - 1.0).abs() > 1e-9 {
            return Err(ProcessError::InvalidDistribution { what: "initial".into(), sum: isum });
        }
        Ok(())
    }

    /// True when no state has two edges on the same symbol.
    pub fn is_unifilar(&self) -> bool {
        self.states.iter().all(|st| {
            let mut seen = vec![false; self.alphabet.len()];
            st.edges.iter().all(|e| {
                let slot = &mut seen[e.symbol as usize];
                !std::mem::replace(slot, true)
            })
        })
    }

    /// Row-stochastic state-to-state matrix, symbols marginalized out.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.states.len();
        let mut t = vec![vec![0.0; m]; m];
        for (i, st) in self.states.iter().enumerate() {
            for e in &st.edges {
                t[i][e.to] += e.p;
            }
        }
        t
    }

    /// Per-symbol transition matrices M_b[i][j] = P(emit b, go to j | i).
    pub fn symbol_matrices(&self) -> Vec<Vec<Vec<f64>>> {
        let m = self.states.len();
        let k = self.alphabet.len();
        let mut mats = vec![vec![vec![0.0; m]; m]; k];
        for (i, st) in self.states.iter().enumerate() {
            for e in &st.edges {
                mats[e.symbol as usize][i][e.to] += e.p;
            }
        }
        mats
    }

    /// Simulate `n` symbols.  Identical (spec, n, seed) triples produce
    /// identical output on every platform.
    pub fn generate(&self, n: usize, seed: u64) -> SymbolSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let mut state = sample_index(&self.initial, rng.gen::<f64>());
        for _ in 0..n {
            let st = &self.states[state];
            let mut u = rng.gen::<f64>();
            let mut chosen = st.edges.len() - 1;
            for (j, e) in st.edges.iter().enumerate() {
                if u < e.p {
                    chosen = j;
                    break;
                }
                u -= e.p;
            }
            let e = &st.edges[chosen];
            out.push(e.symbol);
            state = e.to;
        }
        SymbolSequence(out)
    }

    pub fn to_json(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        s.push_str("{\n  \"format\": \"cssr-process\",\n  \"version\": 1,\n");
        let syms: Vec<String> =
            self.alphabet.symbols().iter().map(|t| format!("\"{}\"", jsonfmt::escape(t))).collect();
        writeln!(s, "  \"alphabet\": [{}],", syms.join(", ")).unwrap();
        writeln!(s, "  \"token_alphabet\": {},", self.alphabet.token_mode()).unwrap();
        s.push_str("  \"states\": [\n");
        for (i, st) in self.states.iter().enumerate() {
            let edges: Vec<String> = st
                .edges
                .iter()
                .map(|e| {
                    format!(
                        "{{\"on\": \"{}\", \"p\": {}, \"to\": {}}}",
                        jsonfmt::escape(self.alphabet.symbol(e.symbol)),
                        jsonfmt::fmt_float(e.p),
                        e.to
                    )
                })
                .collect();
            let comma = if i + 1 < self.states.len() { "," } else { "" };
            writeln!(s, "    {{\"id\": {i}, \"edges\": [{}]}}{comma}", edges.join(", ")).unwrap();
        }
        s.push_str("  ],\n");
        let init: Vec<String> = self.initial.iter().map(|p| jsonfmt::fmt_float(*p)).collect();
        writeln!(s, "  \"initial\": [{}]", init.join(", ")).unwrap();
        s.push_str("}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ProcessError> {
        let parse = |text: &str| -> Result<ProcessSpec, String> {
            let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
            let root = jsonfmt::obj(&v, "root")?;
            let format = jsonfmt::str(jsonfmt::field(root, "format")?, "format")?;
            if format != "cssr-process" {
                return Err(format!("unexpected format tag {format:?}"));
            }
            let token = jsonfmt::bool(jsonfmt::field(root, "token_alphabet")?, "token_alphabet")?;
            let syms: Vec<String> = jsonfmt::arr(jsonfmt::field(root, "alphabet")?, "alphabet")?
                .iter()
                .map(|s| jsonfmt::str(s, "alphabet entry").map(str::to_string))
                .collect::<Result<_, _>>()?;
            let alphabet = if token {
                Alphabet::from_tokens(&syms).map_err(|e| e.to_string())?
            } else {
                Alphabet::from_chars(&syms.concat()).map_err(|e| e.to_string())?
            };
            let mut states = Vec::new();
            for sv in jsonfmt::arr(jsonfmt::field(root, "states")?, "states")? {
                let so = jsonfmt::obj(sv, "state")?;
                let mut edges = Vec::new();
                for ev in jsonfmt::arr(jsonfmt::field(so, "edges")?, "edges")? {
                    let eo = jsonfmt::obj(ev, "edge")?;
                    let on = jsonfmt::str(jsonfmt::field(eo, "on")?, "on")?;
                    let symbol = alphabet
                        .id_of(on)
                        .ok_or_else(|| format!("edge symbol {on:?} not in alphabet"))?;
                    edges.push(Edge {
                        symbol,
                        p: jsonfmt::f64(jsonfmt::field(eo, "p")?, "p")?,
                        to: jsonfmt::usize(jsonfmt::field(eo, "to")?, "to")?,
                    });
                }
                states.push(SpecState { edges });
            }
            let initial: Vec<f64> = jsonfmt::arr(jsonfmt::field(root, "initial")?, "initial")?
                .iter()
                .map(|x| jsonfmt::f64(x, "initial entry"))
                .collect::<Result<_, _>>()?;
            Ok(ProcessSpec { alphabet, states, initial })
        };
        let spec = parse(text).map_err(ProcessError::Parse)?;
        spec.validate()?;
        Ok(spec)
    }
}

fn sample_index(weights: &[f64], mut u: f64) -> usize {
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Two-state process over {A, B}: state 0 emits A or B with probability 1/2
/// (B switches to state 1), state 1 emits B and returns.  Blocks of B
/// between A's always have even length.
pub fn even_process() -> ProcessSpec {
    let alphabet = Alphabet::from_chars("AB").unwrap();
    ProcessSpec {
        alphabet,
        states: vec![
            SpecState {
                edges: vec![Edge { symbol: 0, p: 0.5, to: 0 }, Edge { symbol: 1, p: 0.5, to: 1 }],
            },
            SpecState { edges: vec![Edge { symbol: 1, p: 1.0, to: 0 }] },
        ],
        initial: vec![0.5, 0.5],
    }
}

/// Two-state alternator: ...ABABAB... with zero entropy rate.
pub fn period_two_process() -> ProcessSpec {
    let alphabet = Alphabet::from_chars("AB").unwrap();
    ProcessSpec {
        alphabet,
        states: vec![
            SpecState { edges: vec![Edge { symbol: 0, p: 1.0, to: 1 }] },
            SpecState { edges: vec![Edge { symbol: 1, p: 1.0, to: 0 }] },
        ],
        initial: vec![0.5, 0.5],
    }
}

/// Build a binary suffix machine: one state per context, emitting A with the
/// given probability, with targets found by appending the emitted symbol and
/// taking the longest context that is a suffix of the result.
///
/// Contexts are written oldest symbol first.  The context set must be closed
/// under this transition rule, every probability must be a multiple of 1/16
/// strictly inside (0, 1), and the resulting graph must be strongly
/// connected.
pub fn suffix_machine(contexts: &[&str], p_first: &[f64]) -> Result<ProcessSpec, ProcessError> {
    let alphabet = Alphabet::from_chars("AB").unwrap();
    assert_eq!(contexts.len(), p_first.len(), "one probability per context");
    let ctx_ids: Vec<Vec<SymbolId>> = contexts
        .iter()
        .map(|c| {
            c.chars()
                .map(|ch| {
                    alphabet
                        .id_of(&ch.to_string())
                        .ok_or_else(|| ProcessError::Parse(format!("context symbol {ch:?} not in alphabet")))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let find_target = |word: &[SymbolId]| -> Option<usize> {
        // longest context that is a suffix of word
        let mut best: Option<usize> = None;
        for (i, c) in ctx_ids.iter().enumerate() {
            if c.len() <= word.len() && word[word.len() - c.len()..] == c[..] {
                if best.map_or(true, |b| ctx_ids[b].len() < c.len()) {
                    best = Some(i);
                }
            }
        }
        best
    };
    let mut states = Vec::with_capacity(contexts.len());
    for (i, c) in ctx_ids.iter().enumerate() {
        let p = p_first[i];
        let sixteenths = p * 16.0;
        if !(1.0..=15.0).contains(&sixteenths) || (sixteenths - sixteenths.round()).abs() > 1e-12 {
            return Err(ProcessError::InvalidProbability(p));
        }
        let mut edges = Vec::with_capacity(2);
        for (sym, prob) in [(0u16, p), (1u16, 1.0 - p)] {
            let mut word = c.clone();
            word.push(sym);
            let to = find_target(&word).ok_or_else(|| {
                ProcessError::IncompleteSuffixSet(alphabet.render_word(&word))
            })?;
            edges.push(Edge { symbol: sym, p: prob, to });
        }
        states.push(SpecState { edges });
    }
    let m = states.len();
    let initial = vec![1.0 / m as f64; m];
    let spec = ProcessSpec { alphabet, states, initial };
    spec.validate()?;
    if !strongly_connected(&spec) {
        return Err(ProcessError::NotStronglyConnected);
    }
    Ok(spec)
}

/// Default seven-context machine used by the experiments: contexts
/// {BB, AAA, BAA, ABA, BBA, AAB, BAB} with distinct A-probabilities
/// {2, 13, 5, 11, 3, 9, 7}/16.
pub fn seven_state_default() -> ProcessSpec {
    suffix_machine(
        &["BB", "AAA", "BAA", "ABA", "BBA", "AAB", "BAB"],
        &[2.0 / 16.0, 13.0 / 16.0, 5.0 / 16.0, 11.0 / 16.0, 3.0 / 16.0, 9.0 / 16.0, 7.0 / 16.0],
    )
    .expect("default suffix machine is well-formed")
}

/// Look up a built-in process by CLI name.
pub fn named(name: &str) -> Option<ProcessSpec> {
    match name {
        "even" => Some(even_process()),
        "seven-default" => Some(seven_state_default()),
        _ => None,
    }
}

fn strongly_connected(spec: &ProcessSpec) -> bool {
    let m = spec.n_states();
    let fwd: Vec<Vec<usize>> = spec
        .states
        .iter()
        .map(|st| st.edges.iter().filter(|e| e.p > 0.0).map(|e| e.to).collect())
        .collect();
    let mut rev = vec![Vec::new(); m];
    for (i, outs) in fwd.iter().enumerate() {
        for &j in outs {
            rev[j].push(i);
        }
    }
    let reach = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(&fwd) && reach(&rev)
}
