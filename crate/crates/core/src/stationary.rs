//! Stationary distributions of finite state chains.
//!
//! Works on a row-stochastic state-to-state matrix.  The chain is split
//! into strongly connected components; each recurrent component (no
//! outgoing edges in the condensation) gets its own stationary vector by
//! direct solve (up to 64 states) or lazy power iteration, and the
//! components are mixed by caller-supplied weights: per-state mass for
//! reconstructed machines, absorption of the initial distribution for
//! process specs.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StationaryError {
    #[error("stationary solve failed: {0}")]
    SolveFailed(String),
    #[error("stationary residual {0} exceeds tolerance")]
    ResidualTooLarge(f64),
}

/// How to weight multiple recurrent components.
pub enum ComponentWeighting<'a> {
    /// Weight each component by the total of the per-state masses given
    /// (used with empirical state weights of a reconstructed machine).
    StateMass(&'a [f64]),
    /// Weight each component by the probability that a chain started from
    /// this initial distribution is absorbed into it.
    Absorption(&'a [f64]),
}

pub struct StationaryDecomposition {
    /// Component index per state.
    pub comp_of: Vec<usize>,
    /// States of each component.
    pub components: Vec<Vec<usize>>,
    /// Whether each component is recurrent.
    pub recurrent: Vec<bool>,
    /// Mixture weight per component (zero for transient components).
    pub weights: Vec<f64>,
    /// Full stationary distribution, components mixed; zero on transients.
    pub pi: Vec<f64>,
}

/// Tarjan's algorithm; components are emitted with every successor
/// component appearing earlier.
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct St<'a> {
        adj: &'a [Vec<usize>],
        index: Vec<Option<u32>>,
        low: Vec<u32>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: u32,
        comps: Vec<Vec<usize>>,
    }
    fn connect(s: &mut St, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for &w in &s.adj[v] {
            match s.index[w] {
                None => {
                    connect(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(i) if s.on_stack[w] => s.low[v] = s.low[v].min(i),
                _ => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = s.stack.pop().unwrap();
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            s.comps.push(comp);
        }
    }
    let n = adj.len();
    let mut st = St {
        adj,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        comps: Vec::new(),
    };
    for v in 0..n {
        if st.index[v].is_none() {
            connect(&mut st, v);
        }
    }
    st.comps
}

/// Components plus a recurrence flag: recurrent means no edge leaves the
/// component.
pub fn condense(adj: &[Vec<usize>]) -> (Vec<Vec<usize>>, Vec<usize>, Vec<bool>) {
    let comps = tarjan_scc(adj);
    let mut comp_of = vec![0usize; adj.len()];
    for (ci, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v] = ci;
        }
    }
    let mut recurrent = vec![true; comps.len()];
    for (v, outs) in adj.iter().enumerate() {
        for &w in outs {
            if comp_of[w] != comp_of[v] {
                recurrent[comp_of[v]] = false;
            }
        }
    }
    (comps, comp_of, recurrent)
}

/// Gaussian elimination with partial pivoting; `a` is consumed.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, StationaryError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(StationaryError::SolveFailed("singular matrix".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

const DIRECT_SOLVE_MAX: usize = 64;

/// Stationary vector of one closed component, indexed like `states`.
fn component_stationary(p: &[Vec<f64>], states: &[usize]) -> Result<Vec<f64>, StationaryError> {
    let m = states.len();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let local = |i: usize, j: usize| p[states[i]][states[j]];
    if m <= DIRECT_SOLVE_MAX {
        // solve pi (P - I) = 0 with sum(pi) = 1: columns of P^T - I, last
        // equation replaced by normalization
        let mut a = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                a[i][j] = local(j, i) - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..m {
            a[m - 1][j] = 1.0;
        }
        let mut b = vec![0.0; m];
        b[m - 1] = 1.0;
        let mut pi = solve_linear(a, b)?;
        for x in pi.iter_mut() {
            *x = x.max(0.0);
        }
        let s: f64 = pi.iter().sum();
        for x in pi.iter_mut() {
            *x /= s;
        }
        Ok(pi)
    } else {
        // lazy chain (P + I)/2 shares the stationary vector and kills
        // periodicity, so plain power iteration converges
        let mut pi = vec![1.0 / m as f64; m];
        let mut next = vec![0.0; m];
        for _ in 0..1_000_000 {
            for x in next.iter_mut() {
                *x = 0.0;
            }
            for i in 0..m {
                let w = pi[i] * 0.5;
                next[i] += w;
                for j in 0..m {
                    let p_ij = local(i, j);
                    if p_ij > 0.0 {
                        next[j] += w * p_ij;
                    }
                }
            }
            let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut pi, &mut next);
            if diff < 1e-13 {
                return Ok(pi);
            }
        }
        Err(StationaryError::SolveFailed("power iteration did not converge".into()))
    }
}

/// Decompose the chain and mix the per-component stationary vectors.
pub fn stationary(
    p: &[Vec<f64>],
    weighting: ComponentWeighting,
) -> Result<StationaryDecomposition, StationaryError> {
    let n = p.len();
    let adj: Vec<Vec<usize>> = p
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, &x)| x > 0.0).map(|(j, _)| j).collect())
        .collect();
    let (components, comp_of, recurrent) = condense(&adj);
    let nc = components.len();
    let mut weights = vec![0.0; nc];
    match weighting {
        ComponentWeighting::StateMass(mass) => {
            for (ci, comp) in components.iter().enumerate() {
                if recurrent[ci] {
                    weights[ci] = comp.iter().map(|&s| mass[s]).sum();
                }
            }
        }
        ComponentWeighting::Absorption(init) => {
            let transient: Vec<usize> =
                (0..n).filter(|&s| !recurrent[comp_of[s]]).collect();
            let t_index: std::collections::HashMap<usize, usize> =
                transient.iter().enumerate().map(|(i, &s)| (s, i)).collect();
            let nt = transient.len();
            for (ci, comp) in components.iter().enumerate() {
                if !recurrent[ci] {
                    continue;
                }
                let direct: f64 = comp.iter().map(|&s| init[s]).sum();
                if nt == 0 {
                    weights[ci] = direct;
                    continue;
                }
                // absorption probabilities h from each transient state:
                // (I - P_TT) h = P_T,comp 1
                let mut a = vec![vec![0.0; nt]; nt];
                let mut b = vec![0.0; nt];
                for (i, &s) in transient.iter().enumerate() {
                    a[i][i] = 1.0;
                    for (j, x) in p[s].iter().enumerate() {
                        if *x == 0.0 {
                            continue;
                        }
                        if let Some(&tj) = t_index.get(&j) {
                            a[i][tj] -= x;
                        } else if comp_of[j] == ci {
                            b[i] += x;
                        }
                    }
                }
                let h = solve_linear(a, b)?;
                let via: f64 = transient.iter().enumerate().map(|(i, &s)| init[s] * h[i]).sum();
                weights[ci] = direct + via;
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        // no mass reached any recurrent component; spread uniformly
        let nrec = recurrent.iter().filter(|r| **r).count().max(1);
        for (ci, w) in weights.iter_mut().enumerate() {
            if recurrent[ci] {
                *w = 1.0 / nrec as f64;
            }
        }
    } else {
        for w in weights.iter_mut() {
            *w /= total;
        }
    }
    let mut pi = vec![0.0; n];
    for (ci, comp) in components.iter().enumerate() {
        if !recurrent[ci] || weights[ci] == 0.0 {
            continue;
        }
        let local = component_stationary(p, comp)?;
        for (i, &s) in comp.iter().enumerate() {
            pi[s] = weights[ci] * local[i];
        }
    }
    // residual check over recurrent states
    let mut residual = 0.0;
    for j in 0..n {
        let mut flow = 0.0;
        for i in 0..n {
            if pi[i] > 0.0 && p[i][j] > 0.0 {
                flow += pi[i] * p[i][j];
            }
        }
        residual += (flow - pi[j]).abs();
    }
    if residual > 1e-12 {
        return Err(StationaryError::ResidualTooLarge(residual));
    }
    Ok(StationaryDecomposition { comp_of, components, recurrent, weights, pi })
}

/// Entropy rate in bits per symbol: stationary-weighted emission entropy.
pub fn entropy_rate(pi: &[f64], emissions: &[Vec<f64>]) -> f64 {
    let mut h = 0.0;
    for (w, row) in pi.iter().zip(emissions) {
        if *w == 0.0 {
            continue;
        }
        for p in row {
            if *p > 0.0 {
                h -= w * p * p.log2();
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scc_chain_and_cycle() {
        // 0 -> 1 -> 2 <-> 3
        let adj = vec![vec![1], vec![2], vec![3], vec![2]];
        let (comps, comp_of, recurrent) = condense(&adj);
        assert_eq!(comps.len(), 3);
        assert_eq!(comp_of[2], comp_of[3]);
        let rec: Vec<&Vec<usize>> =
            comps.iter().zip(&recurrent).filter(|(_, r)| **r).map(|(c, _)| c).collect();
        assert_eq!(rec, vec![&vec![2, 3]]);
    }

    #[test]
    fn even_chain_stationary() {
        let p = vec![vec![0.5, 0.5], vec![1.0, 0.0]];
        let d = stationary(&p, ComponentWeighting::Absorption(&[0.5, 0.5])).unwrap();
        assert!((d.pi[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((d.pi[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_chain_stationary() {
        let p = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let d = stationary(&p, ComponentWeighting::Absorption(&[1.0, 0.0])).unwrap();
        assert!((d.pi[0] - 0.5).abs() < 1e-12);
        assert!((d.pi[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn absorption_weights_split_mass() {
        // state 0 transient, flows 0.3 to the self-loop at 1, 0.7 to the
        // self-loop at 2
        let p = vec![vec![0.0, 0.3, 0.7], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let d = stationary(&p, ComponentWeighting::Absorption(&[1.0, 0.0, 0.0])).unwrap();
        assert!((d.pi[1] - 0.3).abs() < 1e-12);
        assert!((d.pi[2] - 0.7).abs() < 1e-12);
        assert_eq!(d.pi[0], 0.0);
    }

    #[test]
    fn state_mass_weighting() {
        let p = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let d = stationary(&p, ComponentWeighting::StateMass(&[0.25, 0.75])).unwrap();
        assert!((d.pi[0] - 0.25).abs() < 1e-12);
        assert!((d.pi[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn large_component_power_iteration() {
        // 100-state ring with a slight drift; uniform stationary
        let m = 100;
        let mut p = vec![vec![0.0; m]; m];
        for i in 0..m {
            p[i][(i + 1) % m] = 0.5;
            p[i][i] = 0.5;
        }
        let init = vec![1.0 / m as f64; m];
        let d = stationary(&p, ComponentWeighting::Absorption(&init)).unwrap();
        for x in &d.pi {
            assert!((x - 1.0 / m as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy_rate(&[1.0], &[vec![0.5, 0.5]]) - 1.0).abs() < 1e-12);
        assert_eq!(entropy_rate(&[0.5, 0.5], &[vec![1.0, 0.0], vec![0.0, 1.0]]), 0.0);
        let h = entropy_rate(&[2.0 / 3.0, 1.0 / 3.0], &[vec![0.5, 0.5], vec![0.0, 1.0]]);
        assert!((h - 2.0 / 3.0).abs() < 1e-12);
    }
}
