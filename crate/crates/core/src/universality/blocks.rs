//! Cutting the grouped density operator into near-diagonal blocks.
//!
//! Matrices live on the span of the normalized bin components, so `φ` has
//! entries `‖φ_k‖·‖φ_l‖`. Bins are grouped into windows `P_p` of `B`
//! consecutive bin indices, windows are paired into `M_i = P_{2i-1} + P_{2i}`,
//! and the pairs are dealt round-robin into `⌈1/ε⌉` classes `S_k`. Removing
//! the off-diagonal parts of the lightest class leaves a matrix whose blocks
//! `Q_j` are separated only by entries more than `B` bins apart.

use nalgebra::{DMatrix, SymmetricEigen};

use super::grouping::{bin_components, BinComponent, GroupedSpectrum};
use crate::error::{Error, Result};
use crate::protocols::{conversion_protocol, ConversionProtocol};
use crate::spectra::{normalize_spectrum, position, spread, SchmidtSpectrum, NORMALIZATION_TOL};
use crate::transport::emd_linf;

/// Entries below this are treated as structurally zero.
const ENTRY_TOL: f64 = 1e-15;

/// `30 + 2⌈log₂(1/ε)/N⌉`.
pub fn default_block_width(eps: f64, n: u32) -> u64 {
    30 + 2 * ((1.0 / eps).log2() / n as f64).ceil().max(0.0) as u64
}

/// `⌈1/ε⌉`, treating values within rounding of an integer as that integer.
pub fn class_count(eps: f64) -> u64 {
    let x = 1.0 / eps;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as u64
    } else {
        x.ceil() as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QBlock {
    pub index: i64,
    /// Positions in [`BlockDecomposition::bins`].
    pub members: Vec<usize>,
    /// The block's coefficients, renormalized.
    pub spectrum: SchmidtSpectrum,
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockDecomposition {
    pub bins: Vec<BinComponent>,
    pub n: u32,
    pub b: u64,
    pub epsilon: f64,
    /// `⌈1/ε⌉`.
    pub classes: u64,
    pub s_traces: Vec<f64>,
    /// Selected class, 1-based.
    pub k_star: u64,
    pub phi: DMatrix<f64>,
    pub vblock: DMatrix<f64>,
    pub vfar: DMatrix<f64>,
    pub k_matrix: DMatrix<f64>,
    /// `‖φ − (vblock + vfar)‖₁`.
    pub trace_gap: f64,
    pub blocks: Vec<QBlock>,
}

/// Outcome of the structural checks on a decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionChecks {
    pub trace_gap_ok: bool,
    /// Smallest bin gap among nonzero `vfar` entries.
    pub far_min_gap: Option<i64>,
    pub far_gap_ok: bool,
    pub s_trace_ok: bool,
    pub max_block_spread: f64,
    pub spread_limit: f64,
    pub spread_ok: bool,
    pub sum_ok: bool,
}

impl DecompositionChecks {
    pub fn all(&self) -> bool {
        self.trace_gap_ok && self.far_gap_ok && self.s_trace_ok && self.spread_ok && self.sum_ok
    }
}

impl BlockDecomposition {
    /// `2⌈1/ε⌉·B·N + 4`.
    pub fn spread_limit(&self) -> f64 {
        (2 * self.classes * self.b * u64::from(self.n) + 4) as f64
    }

    pub fn checks(&self) -> DecompositionChecks {
        let t = self.bins.len();
        let mut far_min_gap: Option<i64> = None;
        for r in 0..t {
            for c in 0..t {
                if self.vfar[(r, c)].abs() > ENTRY_TOL {
                    let gap = (self.bins[r].j - self.bins[c].j).abs();
                    far_min_gap = Some(far_min_gap.map_or(gap, |g| g.min(gap)));
                }
            }
        }
        let rebuilt = &self.vblock + &self.vfar + &self.k_matrix;
        let sum_ok = (rebuilt - &self.phi).abs().max() <= 1e-12;
        let max_block_spread = self.blocks.iter().map(|b| b.spread).fold(0.0, f64::max);
        let spread_limit = self.spread_limit();
        DecompositionChecks {
            trace_gap_ok: self.trace_gap <= 2.0 * self.epsilon + 1e-9,
            far_min_gap,
            far_gap_ok: far_min_gap.is_none_or(|g| g > self.b as i64),
            s_trace_ok: self.s_traces[(self.k_star - 1) as usize] <= self.epsilon + 1e-9,
            max_block_spread,
            spread_limit,
            spread_ok: max_block_spread <= spread_limit + 1e-9,
            sum_ok,
        }
    }
}

/// Sum of absolute eigenvalues of a symmetric matrix.
pub fn trace_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().map(|e| e.abs()).sum()
}

pub fn block_decompose(g: &GroupedSpectrum, eps: f64, b_override: Option<u64>) -> Result<BlockDecomposition> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::EpsOutOfRange(eps));
    }
    let b = b_override.unwrap_or_else(|| default_block_width(eps, g.n));
    if b == 0 {
        return Err(Error::OutOfDomain("block width must be positive".into()));
    }
    let bins = bin_components(g)?;
    let classes = class_count(eps);
    let t = bins.len();
    let bi = b as i64;
    let ci = classes as i64;

    // window, pair and class of every bin; all 1-based
    let window: Vec<i64> = bins.iter().map(|c| c.j.div_euclid(bi) + 1).collect();
    let pair: Vec<i64> = window.iter().map(|&p| (p + 1).div_euclid(2)).collect();
    let class: Vec<i64> = pair.iter().map(|&i| (i - 1).rem_euclid(ci) + 1).collect();

    let mut s_traces = vec![0.0; classes as usize];
    for (k, c) in class.iter().zip(&bins) {
        s_traces[(*k - 1) as usize] += c.norm_sq;
    }
    let k_star = (0..s_traces.len())
        .min_by(|&a, &b| s_traces[a].total_cmp(&s_traces[b]).then(a.cmp(&b)))
        .expect("at least one class") as i64
        + 1;
    let q_block: Vec<i64> = window.iter().map(|&p| (p - 2 * k_star).div_euclid(2 * ci) + 1).collect();

    let norms: Vec<f64> = bins.iter().map(|c| c.norm_sq.sqrt()).collect();
    let phi = DMatrix::from_fn(t, t, |r, c| norms[r] * norms[c]);
    let mut k_matrix = DMatrix::zeros(t, t);
    let mut vblock = DMatrix::zeros(t, t);
    let mut vfar = DMatrix::zeros(t, t);
    for r in 0..t {
        for c in 0..t {
            let in_k = pair[r] == pair[c] && class[r] == k_star && window[r] != window[c];
            if in_k {
                k_matrix[(r, c)] = phi[(r, c)];
            } else if q_block[r] == q_block[c] {
                vblock[(r, c)] = phi[(r, c)];
            } else {
                vfar[(r, c)] = phi[(r, c)];
            }
        }
    }
    let trace_gap = trace_norm(&(&phi - (&vblock + &vfar)));

    let mut blocks: Vec<QBlock> = Vec::new();
    for (idx, &q) in q_block.iter().enumerate() {
        match blocks.last_mut() {
            Some(last) if last.index == q => last.members.push(idx),
            _ => blocks.push(QBlock {
                index: q,
                members: vec![idx],
                spectrum: SchmidtSpectrum::uniform(1)?,
                spread: 0.0,
            }),
        }
    }
    for block in &mut blocks {
        let coefficients: Vec<f64> = block.members.iter().flat_map(|&m| bins[m].coefficients.iter().copied()).collect();
        block.spectrum = normalize_spectrum(&coefficients, NORMALIZATION_TOL, true)?;
        block.spread = spread(&block.spectrum);
    }

    Ok(BlockDecomposition {
        bins,
        n: g.n,
        b,
        epsilon: eps,
        classes,
        s_traces,
        k_star: k_star as u64,
        phi,
        vblock,
        vfar,
        k_matrix,
        trace_gap,
        blocks,
    })
}

/// Largest `m` tried when matching a block against `2^m` EPR-like atoms.
pub const MAX_UNIFORM_QUBITS: u32 = 12;

/// Protocol preparing `block` from the uniform spectrum on `2^m` atoms, with
/// `m` minimizing the transport distance (largest `m` on ties).
pub fn prepare_block_from_epr(block: &SchmidtSpectrum) -> Result<ConversionProtocol> {
    let lo = position(block.max()).floor().max(0.0) as u32;
    let hi = (position(block.min()).ceil() as u32).min(MAX_UNIFORM_QUBITS).max(lo.min(MAX_UNIFORM_QUBITS));
    let mut best: Option<(f64, SchmidtSpectrum)> = None;
    for m in lo.min(MAX_UNIFORM_QUBITS)..=hi {
        let uniform = SchmidtSpectrum::uniform(1 << m)?;
        let d = emd_linf(&uniform, block).distance;
        if best.as_ref().is_none_or(|(bd, _)| d <= *bd) {
            best = Some((d, uniform));
        }
    }
    let (_, uniform) = best.expect("at least one candidate");
    conversion_protocol(&uniform, block)
}
