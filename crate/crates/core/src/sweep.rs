//! Trial sweeps: generate, reconstruct, score, repeat.
//!
//! Each (n, lmax, trial) cell draws its own data from the reference
//! process with a seed hashed from the sweep's base seed, so cells are
//! reproducible no matter how they are scheduled.  Scoring is the total
//! variation distance between the true and reconstructed distributions
//! over fixed-length words.

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::alphabet::Corpus;
use crate::engine::{infer, InferenceConfig};
use crate::jsonfmt;
use crate::machine::CausalStateMachine;
use crate::process::{ProcessError, ProcessSpec};
use crate::stats::TestKind;
use crate::words::{WordDistribution, WordsError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("machine and process alphabets differ")]
    AlphabetMismatch,
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Words(#[from] WordsError),
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub spec: ProcessSpec,
    pub ns: Vec<usize>,
    pub lmaxes: Vec<usize>,
    pub trials: usize,
    pub alpha: f64,
    pub test: TestKind,
    pub word_len: usize,
    pub base_seed: u64,
    /// Worker threads; 0 uses the default pool.
    pub jobs: usize,
}

impl SweepConfig {
    pub fn new(spec: ProcessSpec) -> Self {
        SweepConfig {
            spec,
            ns: Vec::new(),
            lmaxes: Vec::new(),
            trials: 30,
            alpha: 1e-3,
            test: TestKind::Ks,
            word_len: 10,
            base_seed: 0,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub lmax: usize,
    pub alpha: f64,
    /// Trial index within the cell; -1 marks aggregate rows in the CSV.
    pub trial: usize,
    pub seed: u64,
    pub n_states: Option<usize>,
    pub tv_error: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub error: Option<String>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-cell seed: the base seed folded with n, lmax and the trial index
/// through a splitmix64 chain.
pub fn trial_seed(base: u64, n: usize, lmax: usize, trial: usize) -> u64 {
    let mut s = splitmix64(base ^ 0x243f_6a88_85a3_08d3);
    s = splitmix64(s ^ n as u64);
    s = splitmix64(s ^ lmax as u64);
    s = splitmix64(s ^ trial as u64);
    s
}

/// Total variation distance between the true word distribution and the
/// machine's, over words of length `w`.
pub fn prediction_error(
    spec: &ProcessSpec,
    machine: &CausalStateMachine,
    w: usize,
) -> Result<f64, SweepError> {
    if spec.alphabet.symbols() != machine.alphabet.symbols() {
        return Err(SweepError::AlphabetMismatch);
    }
    let truth = WordDistribution::from_spec(spec, w)?;
    let predicted = WordDistribution::from_machine(machine, w)?;
    Ok(truth.tv(&predicted)?)
}

/// Run every (n, lmax, trial) cell, in order; failures inside a trial are
/// recorded, not raised.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<TrialRecord>, SweepError> {
    if config.ns.is_empty() || config.lmaxes.is_empty() {
        return Err(SweepError::InvalidConfig("need at least one n and one lmax"));
    }
    if config.trials < 1 {
        return Err(SweepError::InvalidConfig("trials must be at least 1"));
    }
    if config.word_len < 1 {
        return Err(SweepError::InvalidConfig("word length must be at least 1"));
    }
    config.spec.validate()?;
    let truth = WordDistribution::from_spec(&config.spec, config.word_len)?;
    let mut cells = Vec::with_capacity(config.ns.len() * config.lmaxes.len() * config.trials);
    for &n in &config.ns {
        for &lmax in &config.lmaxes {
            for trial in 0..config.trials {
                cells.push((n, lmax, trial, trial_seed(config.base_seed, n, lmax, trial)));
            }
        }
    }
    let run_cell = |&(n, lmax, trial, seed): &(usize, usize, usize, u64)| -> TrialRecord {
        let data = Corpus::single(config.spec.generate(n, seed).0);
        let mut cfg = InferenceConfig::new(lmax);
        cfg.alpha = config.alpha;
        cfg.test = config.test;
        let t0 = Instant::now();
        let inferred = infer(&data, &config.spec.alphabet, &cfg);
        let runtime_ms = t0.elapsed().as_secs_f64() * 1e3;
        let mut rec = TrialRecord {
            n,
            lmax,
            alpha: config.alpha,
            trial,
            seed,
            n_states: None,
            tv_error: None,
            runtime_ms: Some(runtime_ms),
            error: None,
        };
        match inferred {
            Ok(machine) => {
                rec.n_states = Some(machine.n_states());
                match WordDistribution::from_machine(&machine, config.word_len)
                    .and_then(|d| truth.tv(&d))
                {
                    Ok(tv) => rec.tv_error = Some(tv),
                    Err(e) => rec.error = Some(e.to_string()),
                }
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        rec
    };
    let records = if config.jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| SweepError::ThreadPool(e.to_string()))?;
        pool.install(|| cells.par_iter().map(run_cell).collect())
    } else {
        cells.par_iter().map(run_cell).collect()
    };
    Ok(records)
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV with one row per trial plus one aggregate row per (n, lmax) cell,
/// flagged by trial=-1.  Aggregates average the clean trials and report
/// the errored-trial count in the error column.
pub fn to_csv(records: &[TrialRecord]) -> String {
    use std::fmt::Write;
    let sig = |x: f64| jsonfmt::fmt_sig(x, 6);
    let mut out = String::from("n,lmax,alpha,trial,seed,n_states,tv_error,runtime_ms,error\n");
    let mut cells: Vec<(usize, usize)> = Vec::new();
    for r in records {
        if !cells.contains(&(r.n, r.lmax)) {
            cells.push((r.n, r.lmax));
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            r.lmax,
            sig(r.alpha),
            r.trial,
            r.seed,
            r.n_states.map_or(String::new(), |v| v.to_string()),
            r.tv_error.map_or(String::new(), sig),
            r.runtime_ms.map_or(String::new(), sig),
            r.error.as_deref().map_or(String::new(), csv_escape),
        )
        .unwrap();
    }
    for (n, lmax) in cells {
        let rows: Vec<&TrialRecord> =
            records.iter().filter(|r| r.n == n && r.lmax == lmax).collect();
        let clean: Vec<&&TrialRecord> = rows.iter().filter(|r| r.error.is_none()).collect();
        let errored = rows.len() - clean.len();
        let mean = |f: &dyn Fn(&TrialRecord) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = clean.iter().filter_map(|r| f(r)).collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        let mean_states = mean(&|r| r.n_states.map(|v| v as f64));
        let mean_tv = mean(&|r| r.tv_error);
        let mean_rt = {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.runtime_ms).collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        writeln!(
            out,
            "{},{},{},-1,,{},{},{},{}",
            n,
            lmax,
            sig(rows[0].alpha),
            mean_states.map_or(String::new(), sig),
            mean_tv.map_or(String::new(), sig),
            mean_rt.map_or(String::new(), sig),
            errored,
        )
        .unwrap();
    }
    out
}

/// Longest history length the data volume can support:
/// floor(log2(n) / (h + 0.1)), with the entropy rate defaulting to the
/// worst case log2(k).
pub fn suggest_lmax(n: usize, k: usize, h: Option<f64>) -> usize {
    if n < 2 {
        return 0;
    }
    let h_eff = h.unwrap_or((k as f64).log2()).max(0.0);
    ((n as f64).log2() / (h_eff + 0.1)).floor() as usize
}
