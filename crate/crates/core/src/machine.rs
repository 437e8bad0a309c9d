//! Reconstructed predictor: a unifilar hidden Markov machine whose states
//! are sets of history suffixes sharing one next-symbol distribution.

use std::collections::HashMap;

use thiserror::Error;

use crate::alphabet::{Alphabet, AlphabetError, SymbolId};
use crate::jsonfmt;
use crate::process::{Edge, ProcessSpec, SpecState};
use crate::stationary::{self, ComponentWeighting, StationaryError};
use crate::stats::TestKind;
use serde_json::Value;

#[derive(Debug, Error)]
pub enum MachineError {
    #[error("machine file parse error: {0}")]
    Parse(String),
    #[error("machine has no states")]
    Empty,
    #[error("state {state}: emission probabilities sum to {sum}")]
    InvalidEmission { state: usize, sum: f64 },
    #[error("state {state}: transition on {symbol:?} targets missing state {target}")]
    DanglingTarget { state: usize, symbol: String, target: usize },
    #[error("state {state}: more than one transition on {symbol:?}")]
    DuplicateTransition { state: usize, symbol: String },
    #[error("state {state}: symbol {symbol:?} needs a transition exactly when its probability is positive")]
    TransitionEmissionMismatch { state: usize, symbol: String },
    #[error("state {state}: invalid weight {weight}")]
    InvalidWeight { state: usize, weight: f64 },
    #[error("suffix {0:?} belongs to more than one state")]
    DuplicateSuffix(String),
    #[error("machine is degenerate: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Alphabet(#[from] AlphabetError),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineState {
    /// History suffixes mapped to this state, shortest first then
    /// alphabetical.
    pub suffixes: Vec<Vec<SymbolId>>,
    /// Next-symbol distribution, indexed by symbol id.
    pub emission: Vec<f64>,
    /// Successor per symbol; `None` exactly where the emission is zero.
    pub transitions: Vec<Option<usize>>,
    /// Fraction of training positions whose history resolves here.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineMeta {
    /// Training corpus size in symbols.
    pub n: u64,
    pub lmax: usize,
    pub alpha: f64,
    pub test: TestKind,
    /// Non-fatal oddities hit during reconstruction.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalStateMachine {
    pub alphabet: Alphabet,
    pub states: Vec<MachineState>,
    pub meta: MachineMeta,
}

impl CausalStateMachine {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn validate(&self) -> Result<(), MachineError> {
        if self.states.is_empty() {
            return Err(MachineError::Empty);
        }
        let k = self.alphabet.len();
        let m = self.states.len();
        let mut seen_suffix: HashMap<&[SymbolId], usize> = HashMap::new();
        let mut weight_total = 0.0;
        for (i, st) in self.states.iter().enumerate() {
            if st.emission.len() != k || st.transitions.len() != k {
                return Err(MachineError::Parse(format!(
                    "state {i}: expected {k} emission and transition entries"
                )));
            }
            let mut sum = 0.0;
            for p in &st.emission {
                if !p.is_finite() || *p < 0.0 || *p > 1.0 {
                    return Err(MachineError::InvalidEmission { state: i, sum: *p });
                }
                sum += p;
            }
            if sum != 0.0 && (sum - 1.0).abs() > 1e-9 {
                return Err(MachineError::InvalidEmission { state: i, sum });
            }
            for (b, t) in st.transitions.iter().enumerate() {
                let live = st.emission[b] > 0.0;
                match t {
                    Some(t) if *t >= m => {
                        return Err(MachineError::DanglingTarget {
                            state: i,
                            symbol: self.alphabet.symbol(b as SymbolId).to_string(),
                            target: *t,
                        })
                    }
                    Some(_) if !live => {
                        return Err(MachineError::TransitionEmissionMismatch {
                            state: i,
                            symbol: self.alphabet.symbol(b as SymbolId).to_string(),
                        })
                    }
                    None if live => {
                        return Err(MachineError::TransitionEmissionMismatch {
                            state: i,
                            symbol: self.alphabet.symbol(b as SymbolId).to_string(),
                        })
                    }
                    _ => {}
                }
            }
            if !st.weight.is_finite() || st.weight < 0.0 {
                return Err(MachineError::InvalidWeight { state: i, weight: st.weight });
            }
            weight_total += st.weight;
            for suf in &st.suffixes {
                if suf.iter().any(|&s| (s as usize) >= k) {
                    return Err(MachineError::Parse(format!(
                        "state {i}: suffix symbol id out of range"
                    )));
                }
                if seen_suffix.insert(suf.as_slice(), i).is_some() {
                    return Err(MachineError::DuplicateSuffix(self.alphabet.render_word(suf)));
                }
            }
        }
        if weight_total != 0.0 && (weight_total - 1.0).abs() > 1e-6 {
            return Err(MachineError::InvalidWeight { state: m, weight: weight_total });
        }
        Ok(())
    }

    /// Suffix to state index, for repeated history resolution.
    pub fn suffix_map(&self) -> HashMap<&[SymbolId], usize> {
        let mut map = HashMap::new();
        for (i, st) in self.states.iter().enumerate() {
            for suf in &st.suffixes {
                map.insert(suf.as_slice(), i);
            }
        }
        map
    }

    /// State owning the longest mapped suffix of `history`, if any.
    pub fn epsilon_map(&self, history: &[SymbolId]) -> Option<usize> {
        let map = self.suffix_map();
        resolve_history(&map, history, self.meta.lmax)
    }

    /// State-to-state probability matrix.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.states.len();
        let mut p = vec![vec![0.0; m]; m];
        for (i, st) in self.states.iter().enumerate() {
            for (b, t) in st.transitions.iter().enumerate() {
                if let Some(t) = t {
                    p[i][*t] += st.emission[b];
                }
            }
        }
        p
    }

    /// Long-run state distribution.  Recurrent components are weighted by
    /// the training mass of their states.
    pub fn stationary(&self) -> Result<Vec<f64>, MachineError> {
        let p = self.transition_matrix();
        let mass: Vec<f64> = self.states.iter().map(|s| s.weight).collect();
        let d = stationary::stationary(&p, ComponentWeighting::StateMass(&mass))?;
        Ok(d.pi)
    }

    /// Entropy rate in bits per symbol under the stationary distribution.
    pub fn entropy_rate(&self) -> Result<f64, MachineError> {
        let pi = self.stationary()?;
        let emissions: Vec<Vec<f64>> = self.states.iter().map(|s| s.emission.clone()).collect();
        Ok(stationary::entropy_rate(&pi, &emissions))
    }

    /// View as a generator.  Initial distribution is the state weights.
    pub fn to_process_spec(&self) -> Result<ProcessSpec, MachineError> {
        let mut states = Vec::with_capacity(self.states.len());
        for (i, st) in self.states.iter().enumerate() {
            let mut edges = Vec::new();
            for (b, p) in st.emission.iter().enumerate() {
                if *p > 0.0 {
                    let to = st.transitions[b].ok_or_else(|| {
                        MachineError::TransitionEmissionMismatch {
                            state: i,
                            symbol: self.alphabet.symbol(b as SymbolId).to_string(),
                        }
                    })?;
                    edges.push(Edge { symbol: b as SymbolId, p: *p, to });
                }
            }
            if edges.is_empty() {
                return Err(MachineError::Degenerate(format!(
                    "state {i} has no outgoing transitions"
                )));
            }
            states.push(SpecState { edges });
        }
        let mut initial: Vec<f64> = self.states.iter().map(|s| s.weight).collect();
        let total: f64 = initial.iter().sum();
        if total > 0.0 {
            for w in initial.iter_mut() {
                *w /= total;
            }
        } else {
            initial = vec![1.0 / self.states.len() as f64; self.states.len()];
        }
        let spec = ProcessSpec { alphabet: self.alphabet.clone(), states, initial };
        spec.validate().map_err(|e| MachineError::Degenerate(e.to_string()))?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        s.push_str("{\n  \"format\": \"cssr-machine\",\n  \"version\": 1,\n");
        let syms: Vec<String> =
            self.alphabet.symbols().iter().map(|t| format!("\"{}\"", jsonfmt::escape(t))).collect();
        writeln!(s, "  \"alphabet\": [{}],", syms.join(", ")).unwrap();
        writeln!(s, "  \"token_alphabet\": {},", self.alphabet.token_mode()).unwrap();
        let warnings: Vec<String> = self
            .meta
            .warnings
            .iter()
            .map(|w| format!("\"{}\"", jsonfmt::escape(w)))
            .collect();
        writeln!(
            s,
            "  \"meta\": {{\"n\": {}, \"lmax\": {}, \"alpha\": {}, \"test\": \"{}\", \"warnings\": [{}]}},",
            self.meta.n,
            self.meta.lmax,
            jsonfmt::fmt_float(self.meta.alpha),
            self.meta.test.name(),
            warnings.join(", ")
        )
        .unwrap();
        s.push_str("  \"states\": [\n");
        for (i, st) in self.states.iter().enumerate() {
            let suffixes: Vec<String> = st
                .suffixes
                .iter()
                .map(|suf| {
                    let parts: Vec<String> = suf
                        .iter()
                        .map(|&b| format!("\"{}\"", jsonfmt::escape(self.alphabet.symbol(b))))
                        .collect();
                    format!("[{}]", parts.join(", "))
                })
                .collect();
            let emission: Vec<String> =
                st.emission.iter().map(|p| jsonfmt::fmt_float(*p)).collect();
            let transitions: Vec<String> = st
                .transitions
                .iter()
                .enumerate()
                .filter_map(|(b, t)| {
                    t.map(|t| {
                        format!(
                            "{{\"on\": \"{}\", \"to\": {t}}}",
                            jsonfmt::escape(self.alphabet.symbol(b as SymbolId))
                        )
                    })
                })
                .collect();
            writeln!(s, "    {{\"id\": {i},").unwrap();
            writeln!(s, "     \"suffixes\": [{}],", suffixes.join(", ")).unwrap();
            writeln!(s, "     \"weight\": {},", jsonfmt::fmt_float(st.weight)).unwrap();
            writeln!(s, "     \"emission\": [{}],", emission.join(", ")).unwrap();
            let comma = if i + 1 < self.states.len() { "," } else { "" };
            writeln!(s, "     \"transitions\": [{}]}}{comma}", transitions.join(", ")).unwrap();
        }
        s.push_str("  ]\n}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Self, MachineError> {
        let machine = parse_machine(text).map_err(MachineError::Parse)?;
        // transition-specific checks first so the reader reports the
        // offending entry, then the structural sweep
        let k = machine.alphabet.len();
        for (i, st) in machine.states.iter().enumerate() {
            for b in 0..k {
                if st.transitions[b].is_some() != (st.emission[b] > 0.0) {
                    return Err(MachineError::TransitionEmissionMismatch {
                        state: i,
                        symbol: machine.alphabet.symbol(b as SymbolId).to_string(),
                    });
                }
            }
        }
        machine.validate()?;
        Ok(machine)
    }

    /// Graphviz rendering; edge labels are `symbol | probability`.
    pub fn to_dot(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        s.push_str("digraph causal_state_machine {\n  rankdir=LR;\n  node [shape=circle];\n");
        for i in 0..self.states.len() {
            writeln!(s, "  s{i} [label=\"{i}\"];").unwrap();
        }
        for (i, st) in self.states.iter().enumerate() {
            for (b, t) in st.transitions.iter().enumerate() {
                if let Some(t) = t {
                    writeln!(
                        s,
                        "  s{i} -> s{t} [label=\"{} | {}\"];",
                        self.alphabet.symbol(b as SymbolId),
                        jsonfmt::fmt_sig(st.emission[b], 6)
                    )
                    .unwrap();
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Longest mapped suffix wins; histories longer than `lmax` are resolved
/// from their last `lmax` symbols.
pub(crate) fn resolve_history(
    map: &HashMap<&[SymbolId], usize>,
    history: &[SymbolId],
    lmax: usize,
) -> Option<usize> {
    let start = history.len().saturating_sub(lmax);
    for i in start..=history.len() {
        if let Some(&s) = map.get(&history[i..]) {
            return Some(s);
        }
    }
    None
}

fn parse_machine(text: &str) -> Result<CausalStateMachine, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let root = jsonfmt::obj(&v, "root")?;
    let format = jsonfmt::str(jsonfmt::field(root, "format")?, "format")?;
    if format != "cssr-machine" {
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
    let k = alphabet.len();
    let meta_obj = jsonfmt::obj(jsonfmt::field(root, "meta")?, "meta")?;
    let test_name = jsonfmt::str(jsonfmt::field(meta_obj, "test")?, "test")?;
    let meta = MachineMeta {
        n: jsonfmt::u64(jsonfmt::field(meta_obj, "n")?, "n")?,
        lmax: jsonfmt::usize(jsonfmt::field(meta_obj, "lmax")?, "lmax")?,
        alpha: jsonfmt::f64(jsonfmt::field(meta_obj, "alpha")?, "alpha")?,
        test: TestKind::parse(test_name).ok_or_else(|| format!("unknown test {test_name:?}"))?,
        warnings: jsonfmt::arr(jsonfmt::field(meta_obj, "warnings")?, "warnings")?
            .iter()
            .map(|w| jsonfmt::str(w, "warning").map(str::to_string))
            .collect::<Result<_, _>>()?,
    };
    let mut states = Vec::new();
    for (i, sv) in jsonfmt::arr(jsonfmt::field(root, "states")?, "states")?.iter().enumerate() {
        let so = jsonfmt::obj(sv, "state")?;
        let mut suffixes = Vec::new();
        for wv in jsonfmt::arr(jsonfmt::field(so, "suffixes")?, "suffixes")? {
            let mut word = Vec::new();
            for part in jsonfmt::arr(wv, "suffix")? {
                let sym = jsonfmt::str(part, "suffix symbol")?;
                word.push(
                    alphabet
                        .id_of(sym)
                        .ok_or_else(|| format!("suffix symbol {sym:?} not in alphabet"))?,
                );
            }
            suffixes.push(word);
        }
        let emission: Vec<f64> = jsonfmt::arr(jsonfmt::field(so, "emission")?, "emission")?
            .iter()
            .map(|x| jsonfmt::f64(x, "emission entry"))
            .collect::<Result<_, _>>()?;
        if emission.len() != k {
            return Err(format!("state {i}: expected {k} emission entries"));
        }
        let mut transitions: Vec<Option<usize>> = vec![None; k];
        for tv in jsonfmt::arr(jsonfmt::field(so, "transitions")?, "transitions")? {
            let to_obj = jsonfmt::obj(tv, "transition")?;
            let on = jsonfmt::str(jsonfmt::field(to_obj, "on")?, "on")?;
            let b = alphabet
                .id_of(on)
                .ok_or_else(|| format!("transition symbol {on:?} not in alphabet"))?;
            if transitions[b as usize].is_some() {
                return Err(format!("state {i}: more than one transition on {on:?}"));
            }
            transitions[b as usize] =
                Some(jsonfmt::usize(jsonfmt::field(to_obj, "to")?, "to")?);
        }
        let weight = jsonfmt::f64(jsonfmt::field(so, "weight")?, "weight")?;
        states.push(MachineState { suffixes, emission, transitions, weight });
    }
    Ok(CausalStateMachine { alphabet, states, meta })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn even_machine() -> CausalStateMachine {
        let alphabet = Alphabet::from_chars("AB").unwrap();
        CausalStateMachine {
            alphabet,
            states: vec![
                MachineState {
                    suffixes: vec![vec![0], vec![1, 1]],
                    emission: vec![0.5, 0.5],
                    transitions: vec![Some(0), Some(1)],
                    weight: 2.0 / 3.0,
                },
                MachineState {
                    suffixes: vec![vec![0, 1]],
                    emission: vec![0.0, 1.0],
                    transitions: vec![None, Some(0)],
                    weight: 1.0 / 3.0,
                },
            ],
            meta: MachineMeta {
                n: 10_000,
                lmax: 4,
                alpha: 1e-3,
                test: TestKind::Ks,
                warnings: Vec::new(),
            },
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let m = even_machine();
        m.validate().unwrap();
        let json = m.to_json();
        let m2 = CausalStateMachine::from_json(&json).unwrap();
        assert_eq!(m, m2);
        assert_eq!(json, m2.to_json());
    }

    #[test]
    fn bad_emission_sum_rejected() {
        let mut m = even_machine();
        m.states[0].emission = vec![0.5, 0.4];
        assert!(matches!(
            m.validate(),
            Err(MachineError::InvalidEmission { state: 0, .. })
        ));
    }

    #[test]
    fn duplicate_transition_rejected() {
        let json = even_machine()
            .to_json()
            .replace("[{\"on\": \"B\", \"to\": 0}]", "[{\"on\": \"B\", \"to\": 0}, {\"on\": \"B\", \"to\": 1}]");
        let err = CausalStateMachine::from_json(&json).unwrap_err();
        assert!(err.to_string().contains("more than one transition"));
    }

    #[test]
    fn transition_without_emission_rejected() {
        let mut m = even_machine();
        m.states[1].transitions[0] = Some(0);
        assert!(matches!(
            m.validate(),
            Err(MachineError::TransitionEmissionMismatch { state: 1, .. })
        ));
    }

    #[test]
    fn history_resolution_prefers_longest_suffix() {
        let m = even_machine();
        // ...AB is an odd block of B's, ...ABB an even one
        assert_eq!(m.epsilon_map(&[1, 0, 1]), Some(1));
        assert_eq!(m.epsilon_map(&[0, 1, 1]), Some(0));
        assert_eq!(m.epsilon_map(&[0]), Some(0));
        assert_eq!(m.epsilon_map(&[1]), None);
        assert_eq!(m.epsilon_map(&[]), None);
    }

    #[test]
    fn stationary_and_entropy() {
        let m = even_machine();
        let pi = m.stationary().unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.entropy_rate().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn spec_view_is_unifilar_with_same_stationary() {
        let spec = even_machine().to_process_spec().unwrap();
        assert!(spec.is_unifilar());
        assert_eq!(spec.n_states(), 2);
        assert!((spec.initial[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dot_output_lists_live_edges() {
        let dot = even_machine().to_dot();
        assert_eq!(dot.matches("->").count(), 2 + 1);
        assert!(dot.contains("s0 -> s1 [label=\"B | 0.5\"];"));
        assert!(dot.contains("s1 -> s0 [label=\"B | 1\"];"));
        assert!(!dot.contains("s1 -> s0 [label=\"A"));
    }
}
