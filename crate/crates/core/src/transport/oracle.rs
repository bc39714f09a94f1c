//! Exhaustive bottleneck-transport oracle.
//!
//! Decides each candidate threshold with a max-flow feasibility check and
//! binary-searches the sorted candidate set. Shares nothing with the quantile
//! sweep besides the spectrum type.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::spectra::{position, SchmidtSpectrum};

/// Largest `|χ|·|υ|` the oracle accepts.
pub const ORACLE_MAX_PAIRS: usize = 64;

const FLOW_TOL: f64 = 1e-9;

pub fn brute_force_emd(chi: &SchmidtSpectrum, ups: &SchmidtSpectrum) -> Result<f64> {
    let pairs = chi.len() * ups.len();
    if pairs > ORACLE_MAX_PAIRS {
        return Err(Error::TooLarge { what: "oracle pair count", size: pairs, limit: ORACLE_MAX_PAIRS });
    }
    let pc: Vec<f64> = chi.coefficients().iter().map(|&c| position(c)).collect();
    let pu: Vec<f64> = ups.coefficients().iter().map(|&c| position(c)).collect();

    let mut candidates: Vec<f64> = pc.iter().flat_map(|a| pu.iter().map(move |b| (a - b).abs())).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let feasible = |threshold: f64| {
        let n = chi.len() + ups.len() + 2;
        let (source, sink) = (n - 2, n - 1);
        let mut net = FlowNetwork::new(n);
        for (i, &c) in chi.coefficients().iter().enumerate() {
            net.add_edge(source, i, c);
        }
        for (j, &u) in ups.coefficients().iter().enumerate() {
            net.add_edge(chi.len() + j, sink, u);
        }
        for (i, a) in pc.iter().enumerate() {
            for (j, b) in pu.iter().enumerate() {
                if (a - b).abs() <= threshold {
                    net.add_edge(i, chi.len() + j, f64::INFINITY);
                }
            }
        }
        net.max_flow(source, sink) >= 1.0 - FLOW_TOL
    };

    // the largest candidate admits every edge, so it is always feasible
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo])
}

/// Dinic's algorithm over real capacities.
struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

impl FlowNetwork {
    fn new(n: usize) -> Self {
        FlowNetwork { adj: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new() }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: f64) {
        self.adj[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(c);
        self.adj[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0.0);
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let n = self.adj.len();
        let mut total = 0.0;
        loop {
            let mut level = vec![usize::MAX; n];
            level[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if self.cap[e] > FLOW_TOL * 1e-3 && level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if level[t] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; n];
            loop {
                let pushed = self.augment(s, t, f64::INFINITY, &level, &mut next);
                if pushed <= 0.0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment(&mut self, u: usize, t: usize, limit: f64, level: &[usize], next: &mut [usize]) -> f64 {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let v = self.to[e];
            if self.cap[e] > FLOW_TOL * 1e-3 && level[v] == level[u] + 1 {
                let pushed = self.augment(v, t, limit.min(self.cap[e]), level, next);
                if pushed > 0.0 {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(v: &[f64]) -> SchmidtSpectrum {
        SchmidtSpectrum::new(v).unwrap()
    }

    #[test]
    fn identical_spectra_cost_nothing() {
        let s = sp(&[0.5, 0.3, 0.2]);
        assert_eq!(brute_force_emd(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn halves_to_quarters() {
        let d = brute_force_emd(&sp(&[0.5, 0.5]), &sp(&[0.25; 4])).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn skewed_pair() {
        // 0.25 at position 2 must reach position 1
        let d = brute_force_emd(&sp(&[0.75, 0.25]), &sp(&[0.5, 0.5])).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn rejects_large_inputs() {
        let big = SchmidtSpectrum::uniform(9).unwrap();
        assert!(matches!(brute_force_emd(&big, &big), Err(Error::TooLarge { .. })));
    }
}
